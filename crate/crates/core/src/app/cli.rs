//! Command-line surface: `test`, `simulate`, `power` and `transform`.
//!
//! Settings come from an optional `key = value` file (`--config`) and are
//! overridden by flags. Exit codes: 0 ok, 1 error inside the statistical
//! pipeline, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::app::density::{standardized_moments, transform, TransformKind};
use crate::app::io::{load_curves, load_densities, load_scalars, manifest_path_for, read_config, write_curves_to, RunManifest};
use crate::error::Error;
use crate::hilbert::{Curve, FunctionalSeries, Grid, ScalarSeries};
use crate::lrv::{Bandwidth, KernelSpec};
use crate::simlab::{self, BaselineParams, Design, Experiment, Preset};
use crate::testkit::{run_test, TestConfig, TestInput, Truncation, Variant};
use crate::weights::WeightSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const SEED_ENV: &str = "FUNFLIR_SEED";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "funflir", version, about = "Identification-robust inference on functional slopes")]
pub struct Cli {
    /// `key = value` settings file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test H0: theta = theta0 from CSV data.
    Test(TestArgs),
    /// Run a Monte Carlo experiment preset.
    Simulate(SimulateArgs),
    /// Local power curves of several weights.
    Power(PowerArgs),
    /// Convert a density CSV into a functional series.
    Transform(TransformArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Response, one value per line.
    #[arg(long)]
    pub y: Option<String>,
    /// Regressor curves; several comma-separated files for the multi variant.
    #[arg(long)]
    pub x: Option<String>,
    /// Auxiliary curves.
    #[arg(long)]
    pub z: Option<String>,
    /// Comma-separated scalar covariate files.
    #[arg(long)]
    pub covariates: Option<String>,
    /// plain | intercept | covariates | multi | benchmark
    #[arg(long)]
    pub variant: Option<String>,
    /// `endpoint` or a power such as `p3`.
    #[arg(long)]
    pub weight: Option<String>,
    /// bartlett | parzen | tukey_hanning
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// Number of eigenvalues, or `auto`.
    #[arg(long = "dT")]
    pub d_t: Option<String>,
    /// `auto` or a fixed bandwidth.
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub draws: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// `zero` or a curve file (comma-separated for several regressors).
    #[arg(long)]
    pub theta0: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset: 1 | 2 | 3 | a4, or benchmark | baseline | comparison | intercept.
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long = "T")]
    pub t: Option<String>,
    /// Grid points per curve.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub draws: Option<String>,
    /// json | text
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Comma-separated weights, e.g. `p0,p7,endpoint`.
    #[arg(long)]
    pub weights: Option<String>,
    /// Comma-separated values of kappa.
    #[arg(long)]
    pub kappas: Option<String>,
    /// informative | weak
    #[arg(long)]
    pub design: Option<String>,
    #[arg(long = "beta-u")]
    pub beta_u: Option<String>,
    /// Length of the run used for the population moments.
    #[arg(long)]
    pub periods: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub draws: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Density CSV: header = support points, one row per period.
    #[arg(long)]
    pub input: Option<String>,
    /// clr | lhr | lrhr | lcdf | pdf | qf
    #[arg(long)]
    pub kind: Option<String>,
    /// Also write mean, sd, skewness and kurtosis to this CSV.
    #[arg(long)]
    pub moments: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// Manifest file; defaults to `<out>.manifest.json`, or stderr.
    #[arg(long)]
    pub manifest: Option<String>,
}

/// Config values overridden by flags, restricted to known keys.
struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    fn new(config: &Option<PathBuf>, allowed: &[&str], flags: &[(&str, &Option<String>)]) -> CliResult<Settings> {
        let mut map = match config {
            Some(p) => read_config(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?,
            None => BTreeMap::new(),
        };
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                return usage(format!("unknown config key '{k}' (allowed: {})", allowed.join(", ")));
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(Settings { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> CliResult<&str> {
        match self.get(key) {
            Some(v) => Ok(v),
            None => usage(format!("missing required setting '{key}'")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn seed(&self) -> CliResult<u64> {
        if let Some(v) = self.get("seed") {
            return v.parse().map_err(|_| CliError::Usage(format!("invalid seed '{v}'")));
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid {SEED_ENV} '{v}'"))),
            Err(_) => Ok(0),
        }
    }
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    list(s)
        .into_iter()
        .map(|v| v.parse().map_err(|_| CliError::Usage(format!("invalid {what} '{v}'"))))
        .collect()
}

/// `endpoint`, `inf`, or a power written `p3`, `p=3` or `3`.
pub fn parse_weight(s: &str) -> CliResult<WeightSpec> {
    let s = s.trim().to_ascii_lowercase();
    if matches!(s.as_str(), "endpoint" | "inf" | "infinity" | "pinf" | "p=inf") {
        return Ok(WeightSpec::endpoint());
    }
    let p = s.trim_start_matches("p=").trim_start_matches('p');
    let p: f64 = p.parse().map_err(|_| CliError::Usage(format!("invalid weight '{s}'")))?;
    WeightSpec::power(p).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_design(s: &str) -> CliResult<Design> {
    match s.to_ascii_lowercase().as_str() {
        "informative" | "a" => Ok(Design::Informative),
        "weak" | "weakly_informative" | "b" => Ok(Design::WeaklyInformative),
        other => usage(format!("unknown design '{other}'")),
    }
}

fn usage_from(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Writes the primary output and the manifest.
fn emit(output: &OutputArgs, mut manifest: RunManifest, body: &str) -> CliResult<()> {
    match &output.out {
        Some(p) => {
            fs::write(p, body).map_err(Error::from)?;
            manifest.add_output(p, body.as_bytes());
        }
        None => {
            print!("{body}");
            manifest.add_output("stdout", body.as_bytes());
        }
    }
    write_manifest(output, &manifest)
}

fn write_manifest(output: &OutputArgs, manifest: &RunManifest) -> CliResult<()> {
    let json = manifest.to_json()?;
    let path = match (&output.manifest, &output.out) {
        (Some(m), _) => Some(PathBuf::from(m)),
        (None, Some(o)) => Some(manifest_path_for(Path::new(o))),
        (None, None) => None,
    };
    match path {
        Some(p) => fs::write(p, json).map_err(Error::from)?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn load_theta0(spec: Option<&str>, grid: &std::sync::Arc<Grid>, count: usize, manifest: &mut RunManifest) -> CliResult<Vec<Curve>> {
    let spec = spec.unwrap_or("zero");
    if spec.eq_ignore_ascii_case("zero") {
        return Ok(vec![Curve::zeros(grid); count]);
    }
    let files = list(spec);
    if files.len() != count {
        return usage(format!("--theta0 needs {count} curve file(s), got {}", files.len()));
    }
    files
        .into_iter()
        .map(|f| {
            let s = load_curves(f)?;
            manifest.add_input(Path::new(f))?;
            if s.len() != 1 {
                return Err(CliError::Usage(format!("theta0 file {f} must hold exactly one curve")));
            }
            Ok(s.curve(0))
        })
        .collect()
}

fn cmd_test(config: &Option<PathBuf>, a: &TestArgs) -> CliResult<()> {
    let keys = [
        "y", "x", "z", "covariates", "variant", "weight", "kernel", "alpha", "dT", "bandwidth", "draws", "seed", "theta0",
    ];
    let s = Settings::new(
        config,
        &keys,
        &[
            ("y", &a.y),
            ("x", &a.x),
            ("z", &a.z),
            ("covariates", &a.covariates),
            ("variant", &a.variant),
            ("weight", &a.weight),
            ("kernel", &a.kernel),
            ("alpha", &a.alpha),
            ("dT", &a.d_t),
            ("bandwidth", &a.bandwidth),
            ("draws", &a.draws),
            ("seed", &a.seed),
            ("theta0", &a.theta0),
        ],
    )?;
    let seed = s.seed()?;
    let variant: Variant = s.get("variant").unwrap_or("plain").parse().map_err(usage_from)?;
    let weight = parse_weight(s.get("weight").unwrap_or("endpoint"))?;
    let kernel: KernelSpec = s.get("kernel").unwrap_or("bartlett").parse().map_err(usage_from)?;
    let d_t = match s.get("dT").unwrap_or("auto") {
        "auto" => Truncation::Auto,
        v => Truncation::Fixed(v.parse().map_err(|_| CliError::Usage(format!("invalid dT '{v}'")))?),
    };
    let bandwidth = match s.get("bandwidth").unwrap_or("auto") {
        "auto" => Bandwidth::default(),
        v => Bandwidth::Fixed(v.parse().map_err(|_| CliError::Usage(format!("invalid bandwidth '{v}'")))?),
    };
    let cfg = TestConfig {
        variant,
        weight,
        kernel,
        alpha: s.parse("alpha", 0.05)?,
        d_t,
        bandwidth,
        mc_draws: s.parse("draws", 1000)?,
        seed,
    };
    cfg.validate().map_err(usage_from)?;

    let mut manifest = RunManifest::new("test", seed, s.map.clone());
    let y_path = s.require("y")?;
    let y = load_scalars(y_path)?;
    manifest.add_input(Path::new(y_path))?;
    let xs: Vec<FunctionalSeries> = list(s.require("x")?)
        .into_iter()
        .map(|p| {
            manifest.add_input(Path::new(p))?;
            load_curves(p)
        })
        .collect::<crate::Result<_>>()?;
    let z = match s.get("z") {
        Some(p) => {
            manifest.add_input(Path::new(p))?;
            Some(load_curves(p)?)
        }
        None => None,
    };
    let covariates: Vec<ScalarSeries> = match s.get("covariates") {
        Some(c) => list(c)
            .into_iter()
            .map(|p| {
                manifest.add_input(Path::new(p))?;
                load_scalars(p)
            })
            .collect::<crate::Result<_>>()?,
        None => Vec::new(),
    };
    if xs.is_empty() {
        return usage("no regressor files given");
    }
    let theta0 = load_theta0(s.get("theta0"), xs[0].grid(), xs.len(), &mut manifest)?;
    let mut input = TestInput::multi(&y, xs.iter().collect())
        .theta0s(theta0)
        .covariates(covariates);
    if let Some(z) = &z {
        input = input.instrument(z);
    }
    let result = run_test(&cfg, &input)?;
    let body = serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n";
    eprintln!(
        "statistic {:.6}  critical value {:.6}  p-value {:.4}  {} at alpha = {}  (bandwidth {:.3}, d_T {}, {} kernel, weight {})",
        result.statistic,
        result.critical_value,
        result.p_value,
        if result.reject { "REJECT" } else { "do not reject" },
        cfg.alpha,
        result.bandwidth,
        result.d_t,
        kernel.name(),
        result.diagnostics.weight
    );
    emit(&a.output, manifest, &body)
}

fn cmd_simulate(config: &Option<PathBuf>, a: &SimulateArgs) -> CliResult<()> {
    let keys = ["table", "reps", "seed", "T", "grid", "draws", "format"];
    let s = Settings::new(
        config,
        &keys,
        &[
            ("table", &a.table),
            ("reps", &a.reps),
            ("seed", &a.seed),
            ("T", &a.t),
            ("grid", &a.grid),
            ("draws", &a.draws),
            ("format", &a.format),
        ],
    )?;
    let seed = s.seed()?;
    let preset: Preset = s.require("table")?.parse().map_err(usage_from)?;
    let reps: usize = s.parse("reps", 2000)?;
    let mut exp = Experiment::preset(preset, reps, seed);
    if let Some(t) = s.get("T") {
        exp.sample_sizes = parse_list(t, "sample size")?;
    }
    exp.grid_size = s.parse("grid", exp.grid_size)?;
    exp.mc_draws = s.parse("draws", exp.mc_draws)?;
    let format = s.get("format").unwrap_or("json").to_string();
    if format != "json" && format != "text" {
        return usage(format!("unknown format '{format}'"));
    }
    let report = match simlab::run_experiment(&exp) {
        Ok(r) => r,
        Err(e @ Error::InvalidInput(_)) => return Err(usage_from(e)),
        Err(e) => return Err(e.into()),
    };
    eprintln!("{} cells in {:.1}s", report.cells.len(), report.runtime_secs);
    let body = if format == "json" {
        eprint!("{}", report.to_text());
        report.to_json()? + "\n"
    } else {
        report.to_text()
    };
    emit(&a.output, RunManifest::new("simulate", seed, s.map.clone()), &body)
}

#[derive(Debug, Serialize)]
struct PowerReport {
    design: Design,
    beta_u: f64,
    alpha: f64,
    periods: usize,
    draws: usize,
    curves: Vec<simlab::PowerCurve>,
}

fn cmd_power(config: &Option<PathBuf>, a: &PowerArgs) -> CliResult<()> {
    let keys = ["weights", "kappas", "design", "beta_u", "periods", "grid", "alpha", "draws", "seed"];
    let s = Settings::new(
        config,
        &keys,
        &[
            ("weights", &a.weights),
            ("kappas", &a.kappas),
            ("design", &a.design),
            ("beta_u", &a.beta_u),
            ("periods", &a.periods),
            ("grid", &a.grid),
            ("alpha", &a.alpha),
            ("draws", &a.draws),
            ("seed", &a.seed),
        ],
    )?;
    let seed = s.seed()?;
    let weights = list(s.get("weights").unwrap_or("endpoint,p7,p3,p1,p0"))
        .into_iter()
        .map(parse_weight)
        .collect::<CliResult<Vec<_>>>()?;
    if weights.is_empty() {
        return usage("no weights given");
    }
    let kappas: Vec<f64> = parse_list(s.get("kappas").unwrap_or("0,2.5,5,7.5,10,15,20"), "kappa")?;
    let design = parse_design(s.get("design").unwrap_or("informative"))?;
    let beta_u: f64 = s.parse("beta_u", 0.1)?;
    let periods: usize = s.parse("periods", 20_000)?;
    let grid_size: usize = s.parse("grid", simlab::DEFAULT_GRID_SIZE)?;
    let alpha: f64 = s.parse("alpha", 0.05)?;
    let draws: usize = s.parse("draws", 20_000)?;
    if !(alpha > 0.0 && alpha < 1.0) || grid_size < 3 {
        return usage("alpha must lie in (0,1) and the grid needs at least 3 points");
    }
    let grid = Grid::uniform(grid_size);
    let params = BaselineParams::draw(design, &grid, &mut crate::critical::stream(seed, 0));
    let moments = match simlab::population_moments(&params, &grid, beta_u, periods, seed) {
        Err(e @ Error::InvalidInput(_)) => return Err(usage_from(e)),
        r => r?,
    };
    let curves = simlab::local_power_curves(&moments, &weights, &kappas, alpha, draws, seed)?;
    let mut text = format!("{:>8}", "kappa");
    for c in &curves {
        text.push_str(&format!(" {:>10}", c.weight));
    }
    text.push_str(&format!("\n{:>8}", "D_w"));
    for c in &curves {
        text.push_str(&format!(" {:>10.4}", c.drift_factor));
    }
    text.push('\n');
    for (i, k) in kappas.iter().enumerate() {
        text.push_str(&format!("{k:>8}"));
        for c in &curves {
            text.push_str(&format!(" {:>10.3}", c.power[i]));
        }
        text.push('\n');
    }
    eprint!("{text}");
    let report = PowerReport {
        design,
        beta_u,
        alpha,
        periods,
        draws,
        curves,
    };
    let body = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
    emit(&a.output, RunManifest::new("power", seed, s.map.clone()), &body)
}

fn cmd_transform(config: &Option<PathBuf>, a: &TransformArgs) -> CliResult<()> {
    let keys = ["input", "kind", "moments"];
    let s = Settings::new(
        config,
        &keys,
        &[("input", &a.input), ("kind", &a.kind), ("moments", &a.moments)],
    )?;
    let input = s.require("input")?;
    let kind: TransformKind = s.require("kind")?.parse().map_err(usage_from)?;
    let mut manifest = RunManifest::new("transform", 0, s.map.clone());
    let d = load_densities(input)?;
    manifest.add_input(Path::new(input))?;
    let series = transform(&d, kind)?;
    if let Some(m) = s.get("moments") {
        let mom = standardized_moments(&d, 4)?;
        let mut body = String::from("mean,sd,skewness,kurtosis\n");
        for row in mom {
            body.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            body.push('\n');
        }
        fs::write(m, &body).map_err(Error::from)?;
        manifest.add_output(m, body.as_bytes());
    }
    let mut buf = Vec::new();
    write_curves_to(&mut buf, &series)?;
    let body = String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))?;
    emit(&a.output, manifest, &body)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Test(a) => cmd_test(&cli.config, a),
        Command::Simulate(a) => cmd_simulate(&cli.config, a),
        Command::Power(a) => cmd_power(&cli.config, a),
        Command::Transform(a) => cmd_transform(&cli.config, a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Domain(_) => EXIT_DOMAIN,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_parse() {
        assert_eq!(parse_weight("endpoint").unwrap().label(), "endpoint");
        assert_eq!(parse_weight("p7").unwrap().label(), "p=7");
        assert_eq!(parse_weight("p=3").unwrap().label(), "p=3");
        assert_eq!(parse_weight("0").unwrap().label(), "p=0");
        assert!(parse_weight("p-1").is_err());
        assert!(parse_weight("heavy").is_err());
    }

    #[test]
    fn bad_flags_are_usage_errors() {
        assert_eq!(run(["funflir", "test", "--nope"]), EXIT_USAGE);
        assert_eq!(run(["funflir", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["funflir", "test", "--kernel", "gauss", "--y", "a", "--x", "b"]), EXIT_USAGE);
        assert_eq!(run(["funflir", "simulate", "--table", "9"]), EXIT_USAGE);
        assert_eq!(run(["funflir", "simulate", "--table", "2", "--reps", "5"]), EXIT_USAGE);
    }
}
