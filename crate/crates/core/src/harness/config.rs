use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::YoungRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Lemma2Asymptotics,
    SmallDeviation,
    FracIntegralProps,
    Representation,
    MollifierRate,
    SamplerCovariance,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lemma2Asymptotics => "lemma2-asymptotics",
            ExperimentKind::SmallDeviation => "small-deviation",
            ExperimentKind::FracIntegralProps => "frac-integral-props",
            ExperimentKind::Representation => "representation",
            ExperimentKind::MollifierRate => "mollifier-rate",
            ExperimentKind::SamplerCovariance => "sampler-covariance",
        }
    }
}

/// Target process of a representation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetChoice {
    Zero,
    Constant,
    Identity,
    Sine,
    LogHolder,
}

/// One experiment. `kind` and `seed` are mandatory; every other field has a
/// default, and empty lists are filled per kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Number of consecutive seeds `seed, seed + 1, ...` for per-seed runs.
    #[serde(default = "one")]
    pub seeds: u64,
    #[serde(default = "d_hurst")]
    pub hurst: f64,
    /// Hurst indices for the sampler check; empty means `[0.6, 0.8]`.
    #[serde(default)]
    pub hurst_values: Vec<f64>,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_a")]
    pub a: f64,
    /// Small-deviation fraction, or the derivative order of the tail
    /// diagnostic in representation runs.
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Derivative orders for the extended integral checks.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_d")]
    pub d: f64,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub n_values: Vec<u64>,
    #[serde(default)]
    pub mollifier_n: Vec<u32>,
    #[serde(default)]
    pub split_points: Vec<f64>,
    /// Cells of uniform grids on `[0, 1]`.
    #[serde(default = "d_grid_cells")]
    pub grid_cells: usize,
    #[serde(default = "d_trials")]
    pub trials: u64,
    /// Quadrature tolerance (relative, successive refinements).
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    /// Largest dyadic quadrature depth.
    #[serde(default = "d_depth")]
    pub depth: u32,
    #[serde(default = "d_target")]
    pub target: TargetChoice,
    #[serde(default)]
    pub target_value: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default)]
    pub include_iid: bool,
    #[serde(default)]
    pub young_rule: YoungRule,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> u64 {
    1
}
fn d_hurst() -> f64 {
    0.7
}
fn d_kappa() -> f64 {
    2.2
}
fn d_a() -> f64 {
    3.0
}
fn d_alpha() -> f64 {
    0.4
}
fn d_mu() -> f64 {
    1.0
}
fn d_d() -> f64 {
    2.0
}
fn d_n_max() -> usize {
    10
}
fn d_grid_cells() -> usize {
    4096
}
fn d_trials() -> u64 {
    100_000
}
fn d_tolerance() -> f64 {
    1e-5
}
fn d_depth() -> u32 {
    12
}
fn d_target() -> TargetChoice {
    TargetChoice::Identity
}
fn d_lambda() -> f64 {
    0.6
}
fn d_nu() -> f64 {
    1.0
}
fn d_beta() -> f64 {
    0.3
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            seed,
            seeds: 1,
            hurst: d_hurst(),
            hurst_values: Vec::new(),
            kappa: d_kappa(),
            a: d_a(),
            alpha: d_alpha(),
            alphas: Vec::new(),
            mu: d_mu(),
            d: d_d(),
            n_max: d_n_max(),
            n_values: Vec::new(),
            mollifier_n: Vec::new(),
            split_points: Vec::new(),
            grid_cells: d_grid_cells(),
            trials: d_trials(),
            tolerance: d_tolerance(),
            depth: d_depth(),
            target: d_target(),
            target_value: 0.0,
            lambda: d_lambda(),
            nu: d_nu(),
            beta: d_beta(),
            include_iid: false,
            young_rule: YoungRule::default(),
            output_dir: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|k| self.seed.wrapping_add(k)).collect()
    }

    /// Fills empty lists with the defaults of the experiment kind.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.n_values.is_empty() {
            c.n_values = match c.kind {
                ExperimentKind::Lemma2Asymptotics => vec![1 << 14],
                ExperimentKind::SmallDeviation => vec![4, 8, 16],
                ExperimentKind::SamplerCovariance => vec![16],
                _ => Vec::new(),
            };
        }
        if c.mollifier_n.is_empty() {
            c.mollifier_n = match c.kind {
                ExperimentKind::MollifierRate => vec![16, 64, 256],
                ExperimentKind::FracIntegralProps => vec![256],
                _ => Vec::new(),
            };
        }
        if c.alphas.is_empty() && c.kind == ExperimentKind::FracIntegralProps {
            c.alphas = vec![0.15, 0.3];
        }
        if c.split_points.is_empty() && c.kind == ExperimentKind::FracIntegralProps {
            c.split_points = vec![0.25, 0.5, 0.9];
        }
        if c.hurst_values.is_empty() && c.kind == ExperimentKind::SamplerCovariance {
            c.hurst_values = vec![0.6, 0.8];
        }
        c
    }
}

/// A violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (constraint {})", self.field, self.message, self.constraint)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, constraint: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.into(),
                constraint: constraint.into(),
                message: message.into(),
            });
        }
    }
}

/// All violated constraints; empty iff the config can be dispatched.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Violation> {
    use ExperimentKind::*;
    let c = config.resolved();
    let mut v = Checker(Vec::new());
    let h = c.hurst;
    v.check(h > 0.0 && h < 1.0, "hurst", "H in (0, 1)", format!("H = {h} is outside (0, 1)"));
    v.check(c.seeds >= 1, "seeds", "seeds >= 1", "at least one seed is required");
    match c.kind {
        Lemma2Asymptotics => {
            v.check(!c.n_values.is_empty(), "n_values", "non-empty", "no n given");
            for &n in &c.n_values {
                v.check(n >= 2, "n_values", "n >= 2", format!("n = {n} is too small"));
            }
        }
        SmallDeviation => {
            v.check(
                c.alpha > 0.0 && c.alpha < 1.0,
                "alpha",
                "alpha in (0, 1)",
                format!("small-deviation fraction {} is outside (0, 1)", c.alpha),
            );
            v.check(c.trials >= 1, "trials", "trials >= 1", "no trials");
            for &n in &c.n_values {
                v.check(n >= 1, "n_values", "n >= 1", "n must be positive");
            }
        }
        FracIntegralProps => {
            for &al in &c.alphas {
                v.check(al > 0.0 && al < 1.0, "alphas", "alpha in (0, 1)", format!("order {al} is outside (0, 1)"));
            }
            for &t in &c.split_points {
                v.check(t > 0.0 && t < 1.0, "split_points", "t in (0, 1)", format!("split point {t} is outside (0, 1)"));
            }
            v.check(c.depth >= 2 && c.depth <= 20, "depth", "depth in [2, 20]", format!("depth {}", c.depth));
            v.check(c.tolerance > 0.0, "tolerance", "tolerance > 0", "tolerance must be positive");
            for &n in &c.mollifier_n {
                v.check(
                    c.grid_cells as u64 >= 8 * n as u64,
                    "grid_cells",
                    "grid_cells >= 8 N",
                    format!("{} cells do not resolve the mollifier window 1/{n}", c.grid_cells),
                );
            }
        }
        Representation => {
            v.check(h > 0.5, "hurst", "H in (1/2, 1)", format!("H = {h} must exceed 1/2"));
            v.check(c.a > 1.0, "a", "a > 1", format!("a = {} must exceed 1", c.a));
            let upper = 2f64.powf(c.a);
            v.check(
                c.kappa > 2.0 && c.kappa < upper,
                "kappa",
                "kappa in (2, 2^a)",
                format!("kappa = {} is outside (2, 2^a) = (2, {upper})", c.kappa),
            );
            v.check(c.n_max >= 2, "n_max", "n_max >= 2", format!("n_max = {}", c.n_max));
            v.check(
                c.alpha > 1.0 - h && c.alpha < 0.5,
                "alpha",
                "alpha in (1 - H, 1/2)",
                format!("alpha = {} is outside (1 - H, 1/2) = ({}, 0.5)", c.alpha, 1.0 - h),
            );
            let mu_hi = c.a * 2f64.ln() / c.kappa.ln() - 0.5;
            v.check(
                c.mu > 0.5 && c.mu < mu_hi,
                "mu",
                "mu in (1/2, a log 2 / log kappa - 1/2)",
                format!("mu = {} is outside (0.5, {mu_hi})", c.mu),
            );
            if c.target == TargetChoice::LogHolder {
                v.check(c.d > 1.0, "d", "d > 1", format!("d = {} must exceed 1", c.d));
            }
        }
        MollifierRate => {
            v.check(c.beta > 0.0 && c.beta < 1.0, "beta", "beta in (0, 1)", format!("beta = {}", c.beta));
            v.check(
                c.lambda > c.beta && c.lambda <= 1.0,
                "lambda",
                "lambda in (beta, 1]",
                format!("lambda = {} must lie in ({}, 1]", c.lambda, c.beta),
            );
            v.check(c.nu >= 0.0, "nu", "nu >= 0", format!("nu = {}", c.nu));
            v.check(c.mu > 0.5, "mu", "mu > 1/2", format!("mu = {} must exceed 1/2", c.mu));
            v.check(!c.mollifier_n.is_empty(), "mollifier_n", "non-empty", "no N given");
            for &n in &c.mollifier_n {
                v.check(n >= 2, "mollifier_n", "N >= 2", format!("N = {n}"));
            }
        }
        SamplerCovariance => {
            for &hh in &c.hurst_values {
                v.check(hh > 0.0 && hh < 1.0, "hurst_values", "H in (0, 1)", format!("H = {hh}"));
            }
            v.check(c.trials >= 2, "trials", "trials >= 2", "need at least two samples");
            v.check(c.n_values.len() == 1, "n_values", "one increment count", "give exactly one n");
        }
    }
    v.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep() -> ExperimentConfig {
        ExperimentConfig::new(ExperimentKind::Representation, 0)
    }

    #[test]
    fn alpha_window() {
        let mut c = rep();
        c.hurst = 0.6;
        c.alpha = 0.45;
        assert!(validate_config(&c).is_empty());
        c.alpha = 0.3;
        let v = validate_config(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "alpha");
        assert!(v[0].constraint.contains("1 - H"));
    }

    #[test]
    fn mu_and_kappa_windows() {
        let mut c = rep();
        c.mu = 2.5;
        let v = validate_config(&c);
        assert_eq!(v[0].field, "mu");
        assert!(v[0].message.contains("2.137"), "{}", v[0].message);
        let mut c = rep();
        c.kappa = 5.0;
        c.a = 2.0;
        let v = validate_config(&c);
        assert!(v.iter().any(|x| x.constraint == "kappa in (2, 2^a)"));
    }

    #[test]
    fn toml_roundtrip_and_mandatory_seed() {
        let c = ExperimentConfig::from_toml_str("kind = \"representation\"\nseed = 4\nseeds = 3\ntarget = \"log-holder\"\n")
            .unwrap();
        assert_eq!(c.seed_list(), vec![4, 5, 6]);
        assert_eq!(c.target, TargetChoice::LogHolder);
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_toml_str("kind = \"representation\"\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"representation\"\nseed = 1\nkapa = 2\n").is_err());
    }

    #[test]
    fn kind_defaults() {
        let c = ExperimentConfig::new(ExperimentKind::MollifierRate, 0).resolved();
        assert_eq!(c.mollifier_n, vec![16, 64, 256]);
        let c = ExperimentConfig::new(ExperimentKind::SamplerCovariance, 0).resolved();
        assert_eq!(c.hurst_values, vec![0.6, 0.8]);
    }
}
