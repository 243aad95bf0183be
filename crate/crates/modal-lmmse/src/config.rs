//! Flat `key = value` configuration.
//!
//! Lists are comma separated. Matrices list their rows separated by `;`,
//! e.g. `a = 1, 0.2; 0, 0.95`. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use modal_lmmse_core::clutter::{ClutterCount, ClutterParams, ClutterScenario, MissModel};
use modal_lmmse_core::linalg::{is_symmetric, min_eigenvalue};
use nalgebra::{DMatrix, DVector};

use crate::bench::{ExperimentConfig, FilterKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for {key}: `{value}` ({reason})")]
    InvalidValue {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("{key} out of range: {value}")]
    OutOfRange { key: &'static str, value: String },
    #[error("unknown filter name in filters: `{0}`")]
    UnknownFilter(String),
    #[error("{key}: {reason}")]
    Shape { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Everything a CLI invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub densities: Vec<f64>,
    pub runs: usize,
    pub horizon: usize,
    pub pd: f64,
    pub pg: f64,
    pub seed: u64,
    pub filters: Vec<FilterKind>,
    /// `None` writes to stdout.
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Run index to trace instead of running the sweep.
    pub trace: Option<usize>,
    pub miss_weight: MissModel,
    pub clutter_count: ClutterCount,
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub h_nom: DMatrix<f64>,
    pub g_nom: f64,
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
    pub verbosity: u8,
}

pub const KEYS: [&str; 19] = [
    "rho",
    "runs",
    "horizon",
    "pd",
    "pg",
    "seed",
    "filters",
    "out",
    "format",
    "trace",
    "miss_weight",
    "clutter_count",
    "a",
    "c",
    "h_nom",
    "g_nom",
    "x0",
    "p0",
    "verbosity",
];

impl Default for CliConfig {
    fn default() -> Self {
        let sc = ClutterScenario::reference(0.0);
        Self {
            densities: vec![0.2, 0.5, 1.0, 2.0],
            runs: 1000,
            horizon: 400,
            pd: sc.params.p_d,
            pg: sc.params.p_g,
            seed: 1,
            filters: FilterKind::ALL.to_vec(),
            out: None,
            format: OutputFormat::Csv,
            trace: None,
            miss_weight: MissModel::Product,
            clutter_count: ClutterCount::Poisson,
            a: sc.a,
            c: sc.c,
            h_nom: sc.params.h_nom,
            g_nom: sc.params.g_nom,
            x0: DVector::zeros(2),
            p0: DMatrix::identity(2, 2) * 30.0,
            verbosity: 0,
        }
    }
}

fn canonical(key: &str) -> Option<&'static str> {
    let k = key.trim().to_ascii_lowercase().replace('-', "_");
    let k = match k.as_str() {
        "densities" => "rho",
        other => other,
    };
    KEYS.iter().copied().find(|c| *c == k)
}

fn number<T: FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| ConfigError::InvalidValue {
            key,
            value: value.trim().to_string(),
            reason: e.to_string(),
        })
}

fn list(key: &'static str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| number::<f64>(key, s))
        .collect()
}

fn matrix(key: &'static str, value: &str) -> Result<DMatrix<f64>, ConfigError> {
    let rows: Vec<Vec<f64>> = value
        .split(';')
        .map(|r| list(key, r))
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(ConfigError::Shape {
            key,
            reason: format!(
                "rows of `{}` must be nonempty and equally long",
                value.trim()
            ),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn write_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| m[(i, j)].to_string())
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn write_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl CliConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = canonical(key).ok_or_else(|| ConfigError::UnknownKey(key.trim().to_string()))?;
        let v = value.trim();
        match key {
            "rho" => self.densities = list(key, v)?,
            "runs" => self.runs = number(key, v)?,
            "horizon" => self.horizon = number(key, v)?,
            "pd" => self.pd = number(key, v)?,
            "pg" => self.pg = number(key, v)?,
            "seed" => self.seed = number(key, v)?,
            "filters" => {
                self.filters = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<FilterKind>().map_err(ConfigError::UnknownFilter))
                    .collect::<Result<_, _>>()?;
            }
            "out" => {
                self.out = if v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            "format" => {
                self.format = match v.to_ascii_lowercase().as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key,
                            value: v.into(),
                            reason: "expected csv or json".into(),
                        })
                    }
                }
            }
            "trace" => {
                self.trace = if v.is_empty() {
                    None
                } else {
                    Some(number(key, v)?)
                }
            }
            "miss_weight" => {
                self.miss_weight = match v.to_ascii_lowercase().as_str() {
                    "paper" => MissModel::Product,
                    "standard" => MissModel::Standard,
                    "none" => MissModel::Disabled,
                    _ => {
                        return Err(ConfigError::InvalidValue {
                            key,
                            value: v.into(),
                            reason: "expected paper, standard or none".into(),
                        })
                    }
                }
            }
            "clutter_count" => {
                self.clutter_count = if v.eq_ignore_ascii_case("poisson") {
                    ClutterCount::Poisson
                } else {
                    ClutterCount::Fixed(number(key, v)?)
                }
            }
            "a" => self.a = matrix(key, v)?,
            "c" => self.c = matrix(key, v)?,
            "h_nom" => self.h_nom = matrix(key, v)?,
            "g_nom" => self.g_nom = number(key, v)?,
            "x0" => self.x0 = DVector::from_vec(list(key, v)?),
            "p0" => self.p0 = matrix(key, v)?,
            "verbosity" => self.verbosity = number(key, v)?,
            _ => unreachable!("key list and match arms differ"),
        }
        Ok(())
    }

    /// Applies a file's contents on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line: i + 1,
                text: raw.trim().to_string(),
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_text(&text)
    }

    /// Text that [`CliConfig::parse_text`] maps back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("rho", write_list(&self.densities));
        put("runs", self.runs.to_string());
        put("horizon", self.horizon.to_string());
        put("pd", self.pd.to_string());
        put("pg", self.pg.to_string());
        put("seed", self.seed.to_string());
        put(
            "filters",
            self.filters
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join(", "),
        );
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        put("format", self.format.name().to_string());
        if let Some(t) = self.trace {
            put("trace", t.to_string());
        }
        put(
            "miss_weight",
            match self.miss_weight {
                MissModel::Product => "paper",
                MissModel::Standard => "standard",
                MissModel::Disabled => "none",
            }
            .to_string(),
        );
        put(
            "clutter_count",
            match self.clutter_count {
                ClutterCount::Poisson => "poisson".to_string(),
                ClutterCount::Fixed(n) => n.to_string(),
            },
        );
        put("a", write_matrix(&self.a));
        put("c", write_matrix(&self.c));
        put("h_nom", write_matrix(&self.h_nom));
        put("g_nom", self.g_nom.to_string());
        put("x0", write_list(self.x0.as_slice()));
        put("p0", write_matrix(&self.p0));
        put("verbosity", self.verbosity.to_string());
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &'static str, value: String| Err(ConfigError::OutOfRange { key, value });
        if !(self.pd > 0.0 && self.pd <= 1.0) {
            return range("pd", self.pd.to_string());
        }
        if !(self.pg > 0.0 && self.pg < 1.0) {
            return range("pg", self.pg.to_string());
        }
        if self.densities.is_empty() {
            return range("rho", "empty list".into());
        }
        if let Some(r) = self
            .densities
            .iter()
            .find(|r| !(**r >= 0.0 && r.is_finite()))
        {
            return range("rho", r.to_string());
        }
        if self.runs < 1 {
            return range("runs", self.runs.to_string());
        }
        if self.horizon < 1 {
            return range("horizon", self.horizon.to_string());
        }
        if self.filters.is_empty() {
            return range("filters", "empty list".into());
        }
        if !(self.g_nom > 0.0 && self.g_nom.is_finite()) {
            return range("g_nom", self.g_nom.to_string());
        }
        if let Some(t) = self.trace {
            if t >= self.runs {
                return range("trace", format!("{t} (runs = {})", self.runs));
            }
        }
        let n = self.a.nrows();
        let shape = |key: &'static str, reason: String| Err(ConfigError::Shape { key, reason });
        if self.a.ncols() != n {
            return shape("a", format!("must be square, got {}x{}", n, self.a.ncols()));
        }
        if self.c.nrows() != n {
            return shape("c", format!("needs {n} rows, got {}", self.c.nrows()));
        }
        if self.h_nom.shape() != (1, n) {
            return shape(
                "h_nom",
                format!(
                    "must be 1x{n}, got {}x{}",
                    self.h_nom.nrows(),
                    self.h_nom.ncols()
                ),
            );
        }
        if self.x0.len() != n {
            return shape("x0", format!("needs {n} entries, got {}", self.x0.len()));
        }
        if self.p0.shape() != (n, n) {
            return shape(
                "p0",
                format!(
                    "must be {n}x{n}, got {}x{}",
                    self.p0.nrows(),
                    self.p0.ncols()
                ),
            );
        }
        if !is_symmetric(&self.p0, 1e-12) || min_eigenvalue(&self.p0) < 0.0 {
            return shape("p0", "must be symmetric positive semidefinite".into());
        }
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let params = ClutterParams {
            h_nom: self.h_nom.clone(),
            g_nom: self.g_nom,
            p_d: self.pd,
            p_g: self.pg,
            rho: 0.0,
            count: self.clutter_count,
            miss: self.miss_weight,
        };
        ExperimentConfig {
            horizon: self.horizon,
            runs: self.runs,
            densities: self.densities.clone(),
            scenario: ClutterScenario {
                a: self.a.clone(),
                c: self.c.clone(),
                params,
            },
            x0_mean: self.x0.clone(),
            p0: self.p0.clone(),
            seed: self.seed,
            filters: self.filters.clone(),
        }
    }
}
