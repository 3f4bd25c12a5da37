//! Command line front end for the experiments.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use fbmlab::gaussian::{modulus_statistic, CovarianceModel, FbmSampler, HurstParam};
use fbmlab::harness::{run_experiment, validate_config, ExperimentConfig, ExperimentKind};
use fbmlab::{Error, Result, TimeGrid};

#[derive(Parser)]
#[command(name = "fbmlab", version, about = "Fractional Brownian motion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample paths and check the sampler.
    Fbm {
        #[command(subcommand)]
        op: FbmOp,
    },
    /// Squared-covariance sums against their asymptotics.
    Lemma2(Flags),
    /// Small-deviation probabilities against the Gaussian bound.
    Smalldev(Flags),
    /// Extended fractional integral checks.
    Fracint {
        #[command(subcommand)]
        op: CheckOp,
    },
    /// Adapted representation of a terminal value.
    Represent {
        #[command(subcommand)]
        op: RunOp,
    },
    /// Mollifier approximation rate.
    Mollifier {
        #[command(subcommand)]
        op: RateOp,
    },
    /// Configuration files.
    Config {
        #[command(subcommand)]
        op: ConfigOp,
    },
}

#[derive(Subcommand)]
enum FbmOp {
    /// Write one path on a uniform grid as CSV (and JSON with --out).
    Sample(Flags),
    /// Empirical increment covariance against the exact one.
    Check(Flags),
}

#[derive(Subcommand)]
enum CheckOp {
    Check(Flags),
}

#[derive(Subcommand)]
enum RunOp {
    Run(Flags),
}

#[derive(Subcommand)]
enum RateOp {
    Rate(Flags),
}

#[derive(Subcommand)]
enum ConfigOp {
    /// Print every violated parameter window.
    Validate {
        file: PathBuf,
    },
}

/// Experiment fields; each flag overrides the config file.
#[derive(Args, Default)]
struct Flags {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.json and the CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    hurst_values: Option<Vec<f64>>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    mollifier_n: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    split_points: Option<Vec<f64>>,
    #[arg(long)]
    grid_cells: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    depth: Option<u32>,
    /// zero, constant, identity, sine or log-holder.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    target_value: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    include_iid: bool,
    /// trapezoid or left-point.
    #[arg(long)]
    young_rule: Option<String>,
}

fn put<T: Into<Value>>(t: &mut Table, key: &str, v: Option<T>) {
    if let Some(v) = v {
        t.insert(key.to_string(), v.into());
    }
}

fn int(v: u64) -> Result<Value> {
    i64::try_from(v)
        .map(Value::Integer)
        .map_err(|_| Error::Config(vec![format!("{v} is too large")]))
}

fn ints(v: Option<Vec<u64>>) -> Result<Option<Value>> {
    v.map(|xs| xs.into_iter().map(int).collect::<Result<Vec<_>>>().map(Value::Array))
        .transpose()
}

impl Flags {
    fn resolve(self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut t = match &self.config {
            Some(p) => fs::read_to_string(p)?
                .parse::<Table>()
                .map_err(|e| Error::Config(vec![format!("{}: {e}", p.display())]))?,
            None => Table::new(),
        };
        if let Some(Value::String(k)) = t.get("kind") {
            if k != kind.name() {
                return Err(Error::Config(vec![format!(
                    "config kind {k} does not match the subcommand ({})",
                    kind.name()
                )]));
            }
        }
        t.insert("kind".into(), kind.name().into());
        put(&mut t, "seed", self.seed.map(int).transpose()?);
        put(&mut t, "seeds", self.seeds.map(int).transpose()?);
        put(&mut t, "hurst", self.hurst);
        put(&mut t, "hurst_values", self.hurst_values);
        put(&mut t, "kappa", self.kappa);
        put(&mut t, "a", self.a);
        put(&mut t, "alpha", self.alpha);
        put(&mut t, "alphas", self.alphas);
        put(&mut t, "mu", self.mu);
        put(&mut t, "d", self.d);
        put(&mut t, "n_max", self.n_max.map(int).transpose()?);
        put(&mut t, "n_values", ints(self.n_values)?);
        put(&mut t, "mollifier_n", self.mollifier_n.map(|v| v.into_iter().map(i64::from).collect::<Vec<_>>()));
        put(&mut t, "split_points", self.split_points);
        put(&mut t, "grid_cells", self.grid_cells.map(int).transpose()?);
        put(&mut t, "trials", self.trials.map(int).transpose()?);
        put(&mut t, "tolerance", self.tolerance);
        put(&mut t, "depth", self.depth.map(i64::from));
        put(&mut t, "target", self.target);
        put(&mut t, "target_value", self.target_value);
        put(&mut t, "lambda", self.lambda);
        put(&mut t, "nu", self.nu);
        put(&mut t, "beta", self.beta);
        put(&mut t, "include_iid", self.include_iid.then_some(true));
        put(&mut t, "young_rule", self.young_rule);
        if let Some(out) = &self.out {
            t.insert("output_dir".into(), out.display().to_string().into());
        }
        if !t.contains_key("seed") {
            return Err(Error::Config(vec!["seed: required (pass --seed or set it in the config)".into()]));
        }
        Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))
    }
}

/// Prints the verdicts; the exit code reflects them.
fn experiment(kind: ExperimentKind, flags: Flags) -> Result<bool> {
    let report = run_experiment(&flags.resolve(kind)?)?;
    let mut out = io::stdout().lock();
    for t in &report.tables {
        writeln!(out, "table {} ({} rows)", t.name, t.csv.lines().count().saturating_sub(1))?;
    }
    for v in &report.verdicts {
        writeln!(out, "{}", v.line())?;
    }
    Ok(report.passed())
}

fn sample(flags: Flags) -> Result<bool> {
    let out = flags.out.clone();
    let c = flags.resolve(ExperimentKind::SamplerCovariance)?;
    let problems = validate_config(&c);
    if !problems.is_empty() {
        return Err(Error::Config(problems.iter().map(|v| v.to_string()).collect()));
    }
    let grid = TimeGrid::uniform(c.grid_cells, 0.0, 1.0)?;
    let sampler = FbmSampler::new(HurstParam::new(c.hurst)?, &grid, CovarianceModel::default())?;
    let path = sampler.sample(c.seed);
    match out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            path.write_csv(fs::File::create(dir.join("path.csv"))?)?;
            fs::write(dir.join("path.json"), path.to_json()?)?;
            println!(
                "wrote {} points to {} (modulus statistic {:.4})",
                path.len(),
                dir.display(),
                modulus_statistic(&path)?
            );
        }
        None => path.write_csv(io::stdout().lock())?,
    }
    Ok(true)
}

fn validate(file: PathBuf) -> Result<bool> {
    let c = ExperimentConfig::from_path(&file)?;
    let problems = validate_config(&c);
    for v in &problems {
        println!("{v}");
    }
    if problems.is_empty() {
        println!("{}: valid {} config", file.display(), c.kind.name());
    }
    Ok(problems.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    use ExperimentKind::*;
    match cli.command {
        Command::Fbm { op: FbmOp::Sample(f) } => sample(f),
        Command::Fbm { op: FbmOp::Check(f) } => experiment(SamplerCovariance, f),
        Command::Lemma2(f) => experiment(Lemma2Asymptotics, f),
        Command::Smalldev(f) => experiment(SmallDeviation, f),
        Command::Fracint { op: CheckOp::Check(f) } => experiment(FracIntegralProps, f),
        Command::Represent { op: RunOp::Run(f) } => experiment(Representation, f),
        Command::Mollifier { op: RateOp::Rate(f) } => experiment(MollifierRate, f),
        Command::Config { op: ConfigOp::Validate { file } } => validate(file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            match &e {
                Error::Config(lines) => {
                    for l in lines {
                        eprintln!("error: {l}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(2)
        }
    }
}
