use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use deltaqi::numerics::Tolerances;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "deltaqi", version, about = "Vacuum energy density between two delta barriers and spatial quantum-inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Continuum density profile: eta1, eta2, region-I value, beta, total energy.
    #[command(allow_negative_numbers = true)]
    Density(DensityArgs),
    /// Lorentzian quantum-inequality report per sampling width, plus critical widths.
    #[command(allow_negative_numbers = true)]
    Qi(QiArgs),
    /// Density profiles over a coupling grid, or QI reports over a width grid.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Finite-box mode sums against the continuum results.
    #[command(allow_negative_numbers = true)]
    Oracle(OracleArgs),
    /// Spectrum table for one box.
    #[command(allow_negative_numbers = true)]
    Modes(ModesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Coupling,
    Tau,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Barrier strength lambda; sets the coupling to lambda*a/2.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Dimensionless coupling lambda*a/2 (default 1).
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Barrier separation (default 1).
    #[arg(long)]
    pub a: Option<f64>,
    /// Flat key = value config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report lengths in units of a and densities in units of 1/a^2.
    #[arg(long)]
    pub normalize_a: bool,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct QiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated Lorentzian widths.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid variable (default coupling).
    #[arg(long, value_enum)]
    pub over: Option<SweepAxis>,
    /// Explicit widths for a tau sweep.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    /// Lower end of the logarithmic grid.
    #[arg(long)]
    pub min: Option<f64>,
    /// Upper end of the logarithmic grid.
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated box lengths (default 50a,100a,200a).
    #[arg(long = "L", value_delimiter = ',')]
    pub lengths: Vec<f64>,
    /// Fixed number of modes per parity (default ceil(40 L/a)).
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[command(flatten)]
    pub common: Common,
    /// Box length (default 100a).
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Modes per parity (default 20).
    #[arg(long)]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Density,
    Qi,
    Sweep,
    Oracle,
    Modes,
}

/// Fully resolved run settings; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub lambda: f64,
    pub coupling: f64,
    pub a: f64,
    pub tau: Vec<f64>,
    pub lengths: Vec<f64>,
    pub n_max: Option<usize>,
    pub sweep_over: Option<SweepAxis>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub normalize_a: bool,
    pub tolerances: Option<Tolerances>,
}

/// Bad command line or config file; exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub parameter: String,
    pub message: String,
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid value for `{}`: {}", self.parameter, self.message)
    }
}

fn usage(parameter: &str, message: impl Into<String>) -> UsageError {
    UsageError { parameter: parameter.to_string(), message: message.into() }
}

/// Values read from a config file, keyed as the long flag names with `_`
/// for `-`.
#[derive(Debug, Default)]
struct FileValues(BTreeMap<String, toml::Value>);

const KNOWN_KEYS: &[&str] = &[
    "lambda", "coupling", "a", "format", "output", "normalize_a", "rel_tol", "abs_tol", "max_iter", "tau", "over", "min", "max",
    "points", "L", "n_max",
];

impl FileValues {
    fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage("config", format!("{}: {e}", path.display())))?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| usage("config", e.message().to_string()))?;
        for key in table.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(key, "unknown config key"));
            }
        }
        Ok(Self(table.into_iter().collect()))
    }

    fn float(&self, key: &str) -> Result<Option<f64>, UsageError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(usage(key, "expected a number")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>, UsageError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(x) => Ok(*x as f64),
                    _ => Err(usage(key, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => self.float(key).map(|v| v.map(|x| vec![x])),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, UsageError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
            Some(_) => Err(usage(key, "expected a non-negative integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, UsageError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(usage(key, "expected a string")),
        }
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, UsageError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(usage(key, "expected true or false")),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, UsageError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(name, format!("must be a positive finite number, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64, UsageError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(usage(name, format!("must be a non-negative finite number, got {v}")))
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn list(flag: Vec<f64>, file: Option<Vec<f64>>) -> Vec<f64> {
    if flag.is_empty() {
        file.unwrap_or_default()
    } else {
        flag
    }
}

fn parse_enum<T: ValueEnum>(key: &str, s: Option<String>) -> Result<Option<T>, UsageError> {
    s.map(|s| T::from_str(&s, true).map_err(|_| usage(key, format!("unrecognized value `{s}`")))).transpose()
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, UsageError> {
        let (command, common) = match &cli.command {
            CommandArgs::Density(a) => (Command::Density, &a.common),
            CommandArgs::Qi(a) => (Command::Qi, &a.common),
            CommandArgs::Sweep(a) => (Command::Sweep, &a.common),
            CommandArgs::Oracle(a) => (Command::Oracle, &a.common),
            CommandArgs::Modes(a) => (Command::Modes, &a.common),
        };
        let file = match &common.config {
            Some(path) => FileValues::load(path)?,
            None => FileValues::default(),
        };

        let a = positive("a", pick(common.a, file.float("a")?).unwrap_or(1.0))?;
        let lambda_in = pick(common.lambda, file.float("lambda")?);
        let coupling_in = pick(common.coupling, file.float("coupling")?);
        let coupling = match (lambda_in, coupling_in) {
            (Some(_), Some(_)) if common.lambda.is_some() == common.coupling.is_some() => {
                return Err(usage("lambda", "give either lambda or coupling, not both"))
            }
            // a flag overrides the other quantity coming from the file
            (Some(l), Some(_)) if common.lambda.is_some() => non_negative("lambda", l)? * a / 2.0,
            (Some(_), Some(c)) => non_negative("coupling", c)?,
            (Some(l), None) => non_negative("lambda", l)? * a / 2.0,
            (None, Some(c)) => non_negative("coupling", c)?,
            (None, None) => 1.0,
        };
        let lambda = 2.0 * coupling / a;

        let format = match common.format {
            Some(f) => f,
            None => parse_enum::<Format>("format", file.string("format")?)?.unwrap_or(Format::Json),
        };
        let output = common.output.clone().or(file.string("output")?.map(PathBuf::from));
        let normalize_a = common.normalize_a || file.flag("normalize_a")?.unwrap_or(false);

        let rel = pick(common.rel_tol, file.float("rel_tol")?);
        let abs = pick(common.abs_tol, file.float("abs_tol")?);
        let iters = pick(common.max_iter, file.count("max_iter")?);
        let tolerances = if rel.is_some() || abs.is_some() || iters.is_some() {
            let base = deltaqi::energy::eta_tolerances();
            let tol = Tolerances {
                rel_tol: positive("rel_tol", rel.unwrap_or(base.rel_tol))?,
                abs_tol: positive("abs_tol", abs.unwrap_or(base.abs_tol))?,
                max_iter: iters.unwrap_or(base.max_iter),
            };
            if tol.max_iter == 0 {
                return Err(usage("max_iter", "must be at least 1"));
            }
            Some(tol)
        } else {
            None
        };

        let mut cfg = RunConfig {
            command,
            lambda,
            coupling,
            a,
            tau: Vec::new(),
            lengths: Vec::new(),
            n_max: None,
            sweep_over: None,
            grid_min: None,
            grid_max: None,
            grid_points: None,
            format,
            output,
            normalize_a,
            tolerances,
        };

        match cli.command {
            CommandArgs::Density(_) => {}
            CommandArgs::Qi(args) => {
                cfg.tau = list(args.tau, file.floats("tau")?);
                if cfg.tau.is_empty() {
                    return Err(usage("tau", "at least one sampling width is required"));
                }
            }
            CommandArgs::Sweep(args) => {
                let over = match args.over {
                    Some(o) => o,
                    None => parse_enum::<SweepAxis>("over", file.string("over")?)?.unwrap_or(SweepAxis::Coupling),
                };
                cfg.sweep_over = Some(over);
                cfg.tau = list(args.tau, file.floats("tau")?);
                cfg.grid_min = pick(args.min, file.float("min")?);
                cfg.grid_max = pick(args.max, file.float("max")?);
                cfg.grid_points = pick(args.points, file.count("points")?);
                if over == SweepAxis::Coupling && !cfg.tau.is_empty() {
                    return Err(usage("tau", "only valid with --over tau"));
                }
                if over == SweepAxis::Tau && cfg.tau.is_empty() {
                    cfg.grid_min.get_or_insert(0.01 * a);
                    cfg.grid_max.get_or_insert(100.0 * a);
                    cfg.grid_points.get_or_insert(25);
                }
                if over == SweepAxis::Coupling {
                    cfg.grid_min.get_or_insert(0.01);
                    cfg.grid_max.get_or_insert(1e3);
                    cfg.grid_points.get_or_insert(25);
                }
                if let Some(lo) = cfg.grid_min {
                    positive("min", lo)?;
                }
                if let Some(hi) = cfg.grid_max {
                    positive("max", hi)?;
                    if hi <= cfg.grid_min.unwrap_or(0.0) {
                        return Err(usage("max", "must exceed min"));
                    }
                }
                if let Some(p) = cfg.grid_points {
                    if p < 2 {
                        return Err(usage("points", "need at least 2 grid points"));
                    }
                }
            }
            CommandArgs::Oracle(args) => {
                cfg.lengths = list(args.lengths, file.floats("L")?);
                if cfg.lengths.is_empty() {
                    cfg.lengths = vec![50.0 * a, 100.0 * a, 200.0 * a];
                }
                cfg.n_max = pick(args.n_max, file.count("n_max")?);
            }
            CommandArgs::Modes(args) => {
                cfg.lengths = vec![pick(args.length, file.float("L")?).unwrap_or(100.0 * a)];
                cfg.n_max = Some(pick(args.n_max, file.count("n_max")?).unwrap_or(20));
            }
        }

        for &t in &cfg.tau {
            positive("tau", t)?;
        }
        for &l in &cfg.lengths {
            positive("L", l)?;
            if l < 10.0 * a {
                return Err(usage("L", format!("box length {l} is shorter than 10a")));
            }
        }
        if cfg.n_max == Some(0) {
            return Err(usage("n_max", "must be at least 1"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, UsageError> {
        let mut full = vec!["deltaqi"];
        full.extend_from_slice(args);
        RunConfig::from_cli(Cli::try_parse_from(full).expect("clap accepts"))
    }

    #[test]
    fn lambda_sets_coupling() {
        let c = parse(&["density", "--lambda", "2", "--a", "1"]).unwrap();
        assert_eq!(c.command, Command::Density);
        assert_eq!(c.coupling, 1.0);
        assert_eq!(c.format, Format::Json);
    }

    #[test]
    fn defaults() {
        let c = parse(&["density"]).unwrap();
        assert_eq!((c.a, c.coupling, c.lambda), (1.0, 1.0, 2.0));
    }

    #[test]
    fn tau_list() {
        let c = parse(&["qi", "--lambda", "2", "--a", "1", "--tau", "0.1,1,10"]).unwrap();
        assert_eq!(c.tau, vec![0.1, 1.0, 10.0]);
    }

    #[test]
    fn negative_separation_names_parameter() {
        let e = parse(&["density", "--a", "-1"]).unwrap_err();
        assert_eq!(e.parameter, "a");
    }

    #[test]
    fn both_strengths_rejected() {
        assert!(parse(&["density", "--lambda", "1", "--coupling", "1"]).is_err());
    }

    #[test]
    fn short_box_rejected() {
        assert_eq!(parse(&["modes", "--L", "5"]).unwrap_err().parameter, "L");
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "coupling = 3.0\na = 2\nformat = \"csv\"\ntau = [1, 2]\n").unwrap();
        let p = path.to_str().unwrap();
        let c = parse(&["qi", "--config", p, "--a", "4"]).unwrap();
        assert_eq!(c.a, 4.0);
        assert_eq!(c.coupling, 3.0);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.tau, vec![1.0, 2.0]);
        let c = parse(&["qi", "--config", p, "--lambda", "1", "--tau", "5"]).unwrap();
        assert_eq!(c.coupling, 1.0);
        assert_eq!(c.tau, vec![5.0]);
    }

    #[test]
    fn unknown_config_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "colour = 1\n").unwrap();
        let e = parse(&["density", "--config", path.to_str().unwrap()]).unwrap_err();
        assert_eq!(e.parameter, "colour");
    }
}
