//! Run configuration: command-line flags, then an optional `key=value`
//! file, then built-in defaults.

use crate::CliError;
use clap::{Args, ValueEnum};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Vmf,
    Rgauss,
    Isonormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Dat,
}

/// Options shared by all subcommands. Every field is optional so that
/// unset flags fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// File of `key=value` lines using the long flag names as keys
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Model: vmf, rgauss or isonormal
    #[arg(long, global = true, value_enum)]
    pub model: Option<Model>,
    /// Dimension (sphere ambient dimension, SPD size, or Euclidean dimension);
    /// lower end of the range for table1
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Upper end of the dimension range for table1
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Smallest grid value (η for vmf, σ otherwise)
    #[arg(long, global = true)]
    pub grid_min: Option<f64>,
    /// Largest grid value
    #[arg(long, global = true)]
    pub grid_max: Option<f64>,
    /// Number of grid points (at least 2)
    #[arg(long, global = true)]
    pub grid_count: Option<usize>,
    /// Geometric grid spacing (`--grid-log false` for linear)
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub grid_log: Option<bool>,
    /// Monte Carlo samples for ψ tabulation (at least 10000)
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Random seed for ψ tabulation
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dispersion σ for distances, or the initial σ of a geodesic
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Output format: csv, or dat (whitespace-separated with a `#` header)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Geodesic start: comma-separated vector, or an SPD matrix file for rgauss
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Geodesic base velocity: comma-separated vector, or a symmetric matrix file for rgauss
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Geodesic initial dσ/dt (unused for vmf, where --x0 is the natural parameter)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub u_sigma: Option<f64>,
    /// Geodesic final time
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    /// Number of geodesic output intervals
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Precomputed ψ table (CSV as written by psi-table) instead of tabulating
    #[arg(long, global = true, value_name = "FILE")]
    pub psi_table: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "model", "n", "n-max", "grid-min", "grid-max", "grid-count", "grid-log", "samples", "seed", "sigma", "out",
    "format", "x0", "u", "u-sigma", "t-end", "steps", "psi-table",
];

pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Flags merged with the config file.
pub struct Resolved {
    flags: Flags,
    file: HashMap<String, String>,
}

impl Resolved {
    pub fn new(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => HashMap::new(),
        };
        Ok(Self { flags, file })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v.clone())),
            None => self.from_file(key),
        }
    }

    pub fn model(&self) -> Result<Option<Model>, CliError> {
        if let Some(m) = self.flags.model {
            return Ok(Some(m));
        }
        match self.file.get("model") {
            None => Ok(None),
            Some(v) => Model::from_str(v, true)
                .map(Some)
                .map_err(|_| CliError::Config(format!("unknown model '{v}'"))),
        }
    }

    pub fn format(&self) -> Result<Format, CliError> {
        if let Some(f) = self.flags.format {
            return Ok(f);
        }
        match self.file.get("format") {
            None => Ok(Format::Csv),
            Some(v) => Format::from_str(v, true).map_err(|_| CliError::Config(format!("unknown format '{v}'"))),
        }
    }

    pub fn n(&self) -> Result<Option<usize>, CliError> {
        self.pick(&self.flags.n, "n")
    }
    pub fn n_max(&self) -> Result<Option<usize>, CliError> {
        self.pick(&self.flags.n_max, "n-max")
    }
    pub fn samples(&self, default: usize) -> Result<usize, CliError> {
        let s = self.pick(&self.flags.samples, "samples")?.unwrap_or(default);
        if s < infogeo::model_rgauss::MIN_SAMPLES {
            return Err(CliError::Config(format!(
                "--samples must be at least {}",
                infogeo::model_rgauss::MIN_SAMPLES
            )));
        }
        Ok(s)
    }
    pub fn seed(&self) -> Result<u64, CliError> {
        Ok(self.pick(&self.flags.seed, "seed")?.unwrap_or(1))
    }
    pub fn sigma(&self) -> Result<Option<f64>, CliError> {
        self.pick(&self.flags.sigma, "sigma")
    }
    pub fn out(&self) -> Result<Option<PathBuf>, CliError> {
        self.pick(&self.flags.out, "out")
    }
    pub fn x0(&self) -> Result<Option<String>, CliError> {
        self.pick(&self.flags.x0, "x0")
    }
    pub fn u(&self) -> Result<Option<String>, CliError> {
        self.pick(&self.flags.u, "u")
    }
    pub fn u_sigma(&self) -> Result<f64, CliError> {
        Ok(self.pick(&self.flags.u_sigma, "u-sigma")?.unwrap_or(0.0))
    }
    pub fn t_end(&self) -> Result<f64, CliError> {
        let t = self.pick(&self.flags.t_end, "t-end")?.unwrap_or(1.0);
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config("--t-end must be positive".into()));
        }
        Ok(t)
    }
    pub fn steps(&self) -> Result<usize, CliError> {
        let s = self.pick(&self.flags.steps, "steps")?.unwrap_or(100);
        if s == 0 {
            return Err(CliError::Config("--steps must be at least 1".into()));
        }
        Ok(s)
    }
    pub fn psi_table(&self) -> Result<Option<PathBuf>, CliError> {
        self.pick(&self.flags.psi_table, "psi-table")
    }

    pub fn grid(&self, default: GridSpec) -> Result<GridSpec, CliError> {
        let g = GridSpec {
            min: self.pick(&self.flags.grid_min, "grid-min")?.unwrap_or(default.min),
            max: self.pick(&self.flags.grid_max, "grid-max")?.unwrap_or(default.max),
            count: self.pick(&self.flags.grid_count, "grid-count")?.unwrap_or(default.count),
            log: self.pick(&self.flags.grid_log, "grid-log")?.unwrap_or(default.log),
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl GridSpec {
    fn validate(&self) -> Result<(), CliError> {
        if self.count < 2 {
            return Err(CliError::Config("grid needs at least 2 points".into()));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(CliError::Config("grid needs finite min < max".into()));
        }
        if self.log && !(self.min > 0.0) {
            return Err(CliError::Config("geometric grid needs min > 0".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let f = i as f64 / last;
                if i + 1 == self.count {
                    self.max
                } else if self.log {
                    self.min * (self.max / self.min).powf(f)
                } else {
                    self.min + (self.max - self.min) * f
                }
            })
            .collect()
    }
}

/// Reads whitespace-separated floats, requiring `n²` of them (`n` rows of `n`).
pub fn read_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let values = read_floats(path)?;
    let n = (values.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != values.len() {
        return Err(CliError::Config(format!(
            "{}: expected n×n floats, found {} values",
            path.display(),
            values.len()
        )));
    }
    Ok(nalgebra::DMatrix::from_row_slice(n, n, &values))
}

pub fn read_floats(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{}: '{t}' is not a finite number", path.display())))
        })
        .collect()
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("'{t}' is not a finite number")))
        })
        .collect()
}
