use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridPoint, TimeGrid, TimeGridRecord};

use super::{ClipEvent, HurstParam};

/// Values of a process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
    hurst: HurstParam,
    seed: u64,
    clip_events: Vec<ClipEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePathRecord {
    pub grid: TimeGridRecord,
    pub values: Vec<f64>,
    pub hurst: f64,
    pub seed: u64,
    #[serde(default)]
    pub clip_events: Vec<ClipEvent>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    u: f64,
    value: f64,
}

impl SamplePath {
    /// A path with given values; the value at `t = 0` must be 0.
    pub fn new(grid: TimeGrid, values: Vec<f64>, hurst: HurstParam, seed: u64) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::domain(format!(
                "path has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if grid.first().t == 0.0 && values[0] != 0.0 {
            return Err(Error::domain("path value at t = 0 must be 0"));
        }
        Ok(SamplePath {
            grid,
            values,
            hurst,
            seed,
            clip_events: Vec::new(),
        })
    }

    pub(crate) fn from_parts(
        grid: TimeGrid,
        values: Vec<f64>,
        hurst: HurstParam,
        seed: u64,
        clip_events: Vec<ClipEvent>,
    ) -> Self {
        SamplePath {
            grid,
            values,
            hurst,
            seed,
            clip_events,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clip_events(&self) -> &[ClipEvent] {
        &self.clip_events
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the grid point nearest to `t` (within `tol`).
    pub fn value_at(&self, t: f64, tol: f64) -> Option<f64> {
        self.grid.index_of(t, tol).map(|i| self.values[i])
    }

    /// Restriction to every `stride`-th grid point (last point kept).
    pub fn subsample(&self, stride: usize) -> Result<SamplePath> {
        let stride = stride.max(1);
        let n = self.values.len();
        let mut values: Vec<f64> = self.values.iter().step_by(stride).copied().collect();
        if !(n - 1).is_multiple_of(stride) {
            values.push(self.values[n - 1]);
        }
        Ok(SamplePath {
            grid: self.grid.subsample(stride)?,
            values,
            hurst: self.hurst,
            seed: self.seed,
            clip_events: self.clip_events.clone(),
        })
    }

    pub fn to_record(&self) -> SamplePathRecord {
        SamplePathRecord {
            grid: self.grid.to_record(),
            values: self.values.clone(),
            hurst: self.hurst.value(),
            seed: self.seed,
            clip_events: self.clip_events.clone(),
        }
    }

    pub fn from_record(rec: SamplePathRecord) -> Result<Self> {
        let grid = TimeGrid::from_record(&rec.grid)?;
        let mut path = SamplePath::new(grid, rec.values, HurstParam::new(rec.hurst)?, rec.seed)?;
        path.clip_events = rec.clip_events;
        Ok(path)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }

    /// CSV with columns `t,u,value`, where `u = -ln(1 - t)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (p, &value) in self.grid.points().iter().zip(&self.values) {
            wtr.serialize(CsvRow {
                t: p.t,
                u: p.log_gap(),
                value,
            })
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`SamplePath::write_csv`]. The CSV carries no
    /// Hurst index or seed, so they are supplied by the caller.
    pub fn read_csv<R: Read>(r: R, hurst: HurstParam, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut pts = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row.map_err(csv_err)?;
            pts.push(if row.t >= 0.5 {
                GridPoint::from_log_gap(row.u)
            } else {
                GridPoint::from_t(row.t)
            });
            values.push(row.value);
        }
        SamplePath::new(TimeGrid::from_points(pts)?, values, hurst, seed)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// `max |B(t) - B(s)| / (|t - s|^H |ln|t - s||^{1/2})` over grid pairs with
/// `|t - s| < 1`.
pub fn modulus_statistic(path: &SamplePath) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::domain("modulus statistic needs at least two points"));
    }
    let h = path.hurst.value();
    let pts = path.grid.points();
    let v = &path.values;
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let lag = pts[i].lag_to(&pts[j]);
            if lag >= 1.0 {
                continue;
            }
            let denom = lag.powf(h) * (-lag.ln()).sqrt();
            best = best.max((v[j] - v[i]).abs() / denom);
        }
    }
    Ok(best)
}
