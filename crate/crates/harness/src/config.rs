//! Experiment configuration files.
//!
//! Configs are flat `key = value` lines with `[section]` blocks selecting
//! the regression models, e.g.
//!
//! ```text
//! # Rejection rate of RBPT on the quadratic design, sweeping gamma.
//! method = rbpt
//! dgp = quadratic
//! d_z = 10
//! n_train = 800
//! n_test = 200
//! alpha = 0.1
//! replications = 200
//! sweep = gamma: 0, 0.5, 1, 2
//!
//! [model]
//! factory = ols
//! ```
//!
//! Full-line comments start with `#`.  Keys may appear at most once, and
//! every key must be recognized, so a typo fails loudly instead of
//! silently running a default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use ci_robust_core::models::{
    KrrFactory, LassoFactory, LassoLambda, LogisticFactory, MinNormFactory, OlsFactory,
};
use ci_robust_core::rng::RngStream;
use ci_robust_core::simgen::HighDimVariant;
use ci_robust_core::{LossFunction, Method, ModelFactory};

/// What went wrong while reading a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line} is neither `key = value` nor `[section]`: {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: key {key:?} appears twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: unknown key {key:?} in {scope}")]
    UnknownKey {
        line: usize,
        key: String,
        scope: String,
    },
    #[error("line {line}: unknown section {name:?}")]
    UnknownSection { line: usize, name: String },
    #[error("key {key:?}: {message}")]
    BadValue { key: String, message: String },
    #[error("required key {key:?} is missing")]
    MissingKey { key: &'static str },
    #[error("column {name:?} is assigned to more than one of x/y/z")]
    DuplicateColumn { name: String },
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug)]
struct Section {
    line: usize,
    keys: BTreeMap<String, Entry>,
}

/// A parsed but untyped configuration: raw strings keyed by name.
#[derive(Debug, Default)]
pub struct RawConfig {
    top: BTreeMap<String, Entry>,
    sections: BTreeMap<String, Section>,
}

const SECTION_NAMES: [&str; 5] = ["model", "model_x", "model_y", "second_stage", "resampler"];

/// Splits a config file into keyed entries without interpreting them.
pub fn parse_config_text(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut current: Option<String> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Malformed {
                    line: line_no,
                    text: trimmed.to_string(),
                })?
                .trim()
                .to_string();
            if !SECTION_NAMES.contains(&name.as_str()) {
                return Err(ConfigError::UnknownSection {
                    line: line_no,
                    name,
                });
            }
            raw.sections.entry(name.clone()).or_insert(Section {
                line: line_no,
                keys: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: line_no,
            text: trimmed.to_string(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Malformed {
                line: line_no,
                text: trimmed.to_string(),
            });
        }
        let map = match &current {
            Some(name) => &mut raw.sections.get_mut(name).expect("section was inserted").keys,
            None => &mut raw.top,
        };
        if map.contains_key(&key) {
            return Err(ConfigError::DuplicateKey { line: line_no, key });
        }
        map.insert(key, Entry {
            line: line_no,
            value,
        });
    }
    Ok(raw)
}

/// Reads and splits a config file from disk.
pub fn read_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_text(&text)
}

/// Tracks which keys a typed parse has consumed so leftovers can be
/// reported as unknown.
struct KeyBag {
    map: BTreeMap<String, Entry>,
    scope: String,
}

impl KeyBag {
    fn new(map: BTreeMap<String, Entry>, scope: &str) -> Self {
        KeyBag {
            map,
            scope: scope.to_string(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some((key, entry)) => Err(ConfigError::UnknownKey {
                line: entry.line,
                key,
                scope: self.scope,
            }),
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(key: &str, entry: &Entry) -> Result<f64, ConfigError> {
    entry
        .value
        .parse::<f64>()
        .map_err(|_| bad(key, format!("expected a number, got {:?}", entry.value)))
}

fn parse_usize(key: &str, entry: &Entry) -> Result<usize, ConfigError> {
    entry
        .value
        .parse::<usize>()
        .map_err(|_| bad(key, format!("expected a nonnegative integer, got {:?}", entry.value)))
}

fn parse_u64(key: &str, entry: &Entry) -> Result<u64, ConfigError> {
    entry
        .value
        .parse::<u64>()
        .map_err(|_| bad(key, format!("expected a nonnegative integer, got {:?}", entry.value)))
}

fn parse_u32(key: &str, entry: &Entry) -> Result<u32, ConfigError> {
    entry
        .value
        .parse::<u32>()
        .map_err(|_| bad(key, format!("expected a nonnegative integer, got {:?}", entry.value)))
}

fn parse_bool(key: &str, entry: &Entry) -> Result<bool, ConfigError> {
    match entry.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(key, format!("expected true or false, got {other:?}"))),
    }
}

fn parse_f64_list(key: &str, entry: &Entry) -> Result<Vec<f64>, ConfigError> {
    let values: Result<Vec<f64>, _> = entry
        .value
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect();
    let values = values.map_err(|_| bad(key, format!("expected comma-separated numbers, got {:?}", entry.value)))?;
    if values.is_empty() {
        return Err(bad(key, "needs at least one value"));
    }
    Ok(values)
}

fn parse_string_list(key: &str, entry: &Entry) -> Result<Vec<String>, ConfigError> {
    let values: Vec<String> = entry
        .value
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(bad(key, "needs at least one column name"));
    }
    Ok(values)
}

/// Which regression estimator a `[model*]` section selects.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "factory", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols {
        intercept: bool,
    },
    MinNorm,
    Lasso {
        /// A fixed penalty, or `None` to pick one by cross-validation.
        lambda: Option<f64>,
        folds: usize,
        grid: usize,
    },
    Krr {
        degree: u32,
        ridge: f64,
    },
    Logistic,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Ols { intercept: true }
    }
}

impl ModelSpec {
    fn from_section(section: Section, scope: &str) -> Result<Self, ConfigError> {
        let mut bag = KeyBag::new(section.keys, scope);
        let factory = match bag.take("factory") {
            Some(entry) => entry.value,
            None => "ols".to_string(),
        };
        let spec = match factory.as_str() {
            "ols" => {
                let intercept = match bag.take("intercept") {
                    Some(entry) => parse_bool("intercept", &entry)?,
                    None => true,
                };
                ModelSpec::Ols { intercept }
            }
            "minnorm" | "min_norm" => ModelSpec::MinNorm,
            "lasso" => {
                let lambda = match bag.take("lambda") {
                    None => None,
                    Some(entry) if entry.value == "cv" => None,
                    Some(entry) => {
                        let l = parse_f64("lambda", &entry)?;
                        if l < 0.0 {
                            return Err(bad("lambda", "penalty must be nonnegative"));
                        }
                        Some(l)
                    }
                };
                let folds = match bag.take("folds") {
                    Some(entry) => parse_usize("folds", &entry)?,
                    None => 5,
                };
                let grid = match bag.take("grid") {
                    Some(entry) => parse_usize("grid", &entry)?,
                    None => 50,
                };
                if folds < 2 {
                    return Err(bad("folds", "cross-validation needs at least two folds"));
                }
                if grid == 0 {
                    return Err(bad("grid", "the penalty grid cannot be empty"));
                }
                ModelSpec::Lasso { lambda, folds, grid }
            }
            "krr" => {
                let degree = match bag.take("degree") {
                    Some(entry) => parse_u32("degree", &entry)?,
                    None => 3,
                };
                let ridge = match bag.take("ridge") {
                    Some(entry) => parse_f64("ridge", &entry)?,
                    None => 1e-3,
                };
                if ridge <= 0.0 {
                    return Err(bad("ridge", "the ridge penalty must be positive"));
                }
                ModelSpec::Krr { degree, ridge }
            }
            "logistic" => ModelSpec::Logistic,
            other => {
                return Err(bad(
                    "factory",
                    format!("unknown factory {other:?}; expected ols, minnorm, lasso, krr, or logistic"),
                ))
            }
        };
        bag.finish()?;
        Ok(spec)
    }

    /// Builds the boxed factory.  `stream` seeds cross-validation when the
    /// lasso penalty is chosen by CV; the other factories ignore it.
    pub fn build(&self, stream: RngStream) -> Box<dyn ModelFactory<f64>> {
        match self {
            ModelSpec::Ols { intercept } => Box::new(OlsFactory {
                intercept: *intercept,
            }),
            ModelSpec::MinNorm => Box::new(MinNormFactory),
            ModelSpec::Lasso { lambda, folds, grid } => Box::new(LassoFactory {
                lambda: match lambda {
                    Some(l) => LassoLambda::Fixed(*l),
                    None => LassoLambda::CrossValidated {
                        folds: *folds,
                        grid_size: *grid,
                        stream,
                    },
                },
            }),
            ModelSpec::Krr { degree, ridge } => Box::new(KrrFactory {
                degree: *degree,
                ridge: *ridge,
            }),
            ModelSpec::Logistic => Box::new(LogisticFactory),
        }
    }
}

/// Which data-generating process feeds the experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "dgp", rename_all = "snake_case")]
pub enum DgpSpec {
    /// `Z` standard normal, `X | Z` normal around `(b'Z)^2`, `Y` linear in
    /// `X` and `Z` plus `gamma * (b'Z)^2` with optionally skewed noise.
    Quadratic { d_z: usize, c: f64, gamma: f64, skew: f64 },
    /// Sparse high-dimensional linear designs.
    HighDim {
        variant: HighDimVariant,
        d: usize,
        signal: f64,
        sparsity: usize,
    },
    /// Rows read from a CSV file.
    Csv {
        path: String,
        x_cols: Vec<String>,
        y_cols: Vec<String>,
        z_cols: Vec<String>,
        /// When set, each replication shuffles `y` within this many
        /// quantile bins of `z`, manufacturing an approximate null.
        n_bins: Option<usize>,
        /// Expand a discrete `z` column into indicator columns.
        one_hot_z: bool,
        /// Shuffle rows (per replication) before the train/test split.
        shuffle: bool,
    },
}

impl DgpSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DgpSpec::Quadratic { .. } => "quadratic",
            DgpSpec::HighDim { .. } => "highdim",
            DgpSpec::Csv { .. } => "csv",
        }
    }
}

/// How resampling-based tests obtain draws of `X` given `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResamplerSpec {
    /// The generative conditional law itself (quadratic designs only).
    Exact,
    /// A Gaussian centered on an OLS fit of `x` against `z`, with scale
    /// taken from the training residuals.
    Fitted,
}

/// Which scalar the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    Gamma,
    C,
    Theta,
    DZ,
    Skew,
}

impl SweepKey {
    fn parse(name: &str) -> Option<SweepKey> {
        match name {
            "gamma" => Some(SweepKey::Gamma),
            "c" => Some(SweepKey::C),
            "theta" => Some(SweepKey::Theta),
            "d_z" => Some(SweepKey::DZ),
            "skew" | "s" => Some(SweepKey::Skew),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepKey::Gamma => "gamma",
            SweepKey::C => "c",
            SweepKey::Theta => "theta",
            SweepKey::DZ => "d_z",
            SweepKey::Skew => "skew",
        }
    }
}

/// A one-dimensional grid over a config scalar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

/// A fully resolved experiment: every default already filled in, so a
/// report embedding one of these can be re-run verbatim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dgp: DgpSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub replications: usize,
    /// Independent redraws of the generative parameters (quadratic design
    /// only; the other designs have none and default to one draw).
    pub param_draws: usize,
    pub base_seed: u64,
    pub loss: LossFunction,
    /// Noise added to loss-difference scores, as a multiple of the
    /// training-response standard deviation.
    pub rho_scale: f64,
    /// Resamples or permutations for the resampling-based tests.
    pub resamples: usize,
    /// Mean shift of the resampling distribution away from the truth.
    pub theta: f64,
    pub sweep: Option<Sweep>,
    pub model: ModelSpec,
    pub model_x: ModelSpec,
    pub model_y: ModelSpec,
    pub second_stage: ModelSpec,
    pub resampler: ResamplerSpec,
}

impl ExperimentConfig {
    /// Types and validates a raw config for `simulate` or `test`.
    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let mut sections = raw.sections;
        let mut bag = KeyBag::new(raw.top, "the top level");

        let method_entry = bag.take("method").ok_or(ConfigError::MissingKey { key: "method" })?;
        let method = Method::parse(&method_entry.value).ok_or_else(|| {
            bad(
                "method",
                format!(
                    "unknown method {:?}; expected one of stfr, gcm, resit, rbpt, rbpt2, crt",
                    method_entry.value
                ),
            )
        })?;

        let dgp_entry = bag.take("dgp").ok_or(ConfigError::MissingKey { key: "dgp" })?;
        let dgp = match dgp_entry.value.as_str() {
            "quadratic" => {
                let d_z = match bag.take("d_z") {
                    Some(entry) => parse_usize("d_z", &entry)?,
                    None => 10,
                };
                if d_z == 0 {
                    return Err(bad("d_z", "the conditioning dimension must be positive"));
                }
                let c = match bag.take("c") {
                    Some(entry) => parse_f64("c", &entry)?,
                    None => 0.0,
                };
                let gamma = match bag.take("gamma") {
                    Some(entry) => parse_f64("gamma", &entry)?,
                    None => 0.0,
                };
                let skew = match bag.take("skew") {
                    Some(entry) => parse_f64("skew", &entry)?,
                    None => 0.0,
                };
                DgpSpec::Quadratic { d_z, c, gamma, skew }
            }
            "highdim" => {
                let variant_entry = bag
                    .take("variant")
                    .ok_or(ConfigError::MissingKey { key: "variant" })?;
                let variant = match variant_entry.value.as_str() {
                    "gcm_toy" => HighDimVariant::GcmToy,
                    "stfr_toy" => HighDimVariant::StfrToy,
                    other => {
                        return Err(bad(
                            "variant",
                            format!("unknown variant {other:?}; expected gcm_toy or stfr_toy"),
                        ))
                    }
                };
                let defaults = match variant {
                    HighDimVariant::GcmToy => (500usize, 20.0, 5usize),
                    HighDimVariant::StfrToy => (300usize, 1.0, 30usize),
                };
                let d = match bag.take("d") {
                    Some(entry) => parse_usize("d", &entry)?,
                    None => defaults.0,
                };
                let signal = match bag.take("signal") {
                    Some(entry) => parse_f64("signal", &entry)?,
                    None => defaults.1,
                };
                let sparsity = match bag.take("sparsity") {
                    Some(entry) => parse_usize("sparsity", &entry)?,
                    None => defaults.2,
                };
                if sparsity == 0 || sparsity > d {
                    return Err(bad("sparsity", "must be between 1 and d"));
                }
                DgpSpec::HighDim {
                    variant,
                    d,
                    signal,
                    sparsity,
                }
            }
            "csv" => {
                let path = bag
                    .take("path")
                    .ok_or(ConfigError::MissingKey { key: "path" })?
                    .value;
                let x_cols = parse_string_list(
                    "x_cols",
                    &bag.take("x_cols").ok_or(ConfigError::MissingKey { key: "x_cols" })?,
                )?;
                let y_cols = parse_string_list(
                    "y_cols",
                    &bag.take("y_cols").ok_or(ConfigError::MissingKey { key: "y_cols" })?,
                )?;
                let z_cols = parse_string_list(
                    "z_cols",
                    &bag.take("z_cols").ok_or(ConfigError::MissingKey { key: "z_cols" })?,
                )?;
                let mut seen = BTreeMap::new();
                for name in x_cols.iter().chain(&y_cols).chain(&z_cols) {
                    if seen.insert(name.clone(), ()).is_some() {
                        return Err(ConfigError::DuplicateColumn { name: name.clone() });
                    }
                }
                let n_bins = match bag.take("n_bins") {
                    Some(entry) => {
                        let n = parse_usize("n_bins", &entry)?;
                        if n == 0 {
                            return Err(bad("n_bins", "needs at least one bin"));
                        }
                        Some(n)
                    }
                    None => None,
                };
                let one_hot_z = match bag.take("one_hot_z") {
                    Some(entry) => parse_bool("one_hot_z", &entry)?,
                    None => false,
                };
                let shuffle = match bag.take("shuffle") {
                    Some(entry) => parse_bool("shuffle", &entry)?,
                    None => false,
                };
                if (n_bins.is_some() || one_hot_z) && z_cols.len() != 1 {
                    return Err(bad(
                        "z_cols",
                        "binning and one-hot expansion need a single z column",
                    ));
                }
                DgpSpec::Csv {
                    path,
                    x_cols,
                    y_cols,
                    z_cols,
                    n_bins,
                    one_hot_z,
                    shuffle,
                }
            }
            other => {
                return Err(bad(
                    "dgp",
                    format!("unknown dgp {other:?}; expected quadratic, highdim, or csv"),
                ))
            }
        };

        let n_train = match bag.take("n_train") {
            Some(entry) => parse_usize("n_train", &entry)?,
            None => 800,
        };
        let n_test = match bag.take("n_test") {
            Some(entry) => parse_usize("n_test", &entry)?,
            None => 200,
        };
        if n_train == 0 {
            return Err(bad("n_train", "needs at least one training row"));
        }
        if n_test < 2 {
            return Err(bad("n_test", "needs at least two test rows"));
        }
        let alpha = match bag.take("alpha") {
            Some(entry) => parse_f64("alpha", &entry)?,
            None => 0.1,
        };
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad("alpha", "the level must lie strictly between 0 and 1"));
        }
        let replications = parse_usize(
            "replications",
            &bag.take("replications")
                .ok_or(ConfigError::MissingKey { key: "replications" })?,
        )?;
        if replications == 0 {
            return Err(bad("replications", "needs at least one replication"));
        }
        let param_draws = match bag.take("param_draws") {
            Some(entry) => {
                let n = parse_usize("param_draws", &entry)?;
                if n == 0 {
                    return Err(bad("param_draws", "needs at least one draw"));
                }
                n
            }
            None => match dgp {
                DgpSpec::Quadratic { .. } => 10,
                _ => 1,
            },
        };
        if !matches!(dgp, DgpSpec::Quadratic { .. }) && param_draws != 1 {
            return Err(bad(
                "param_draws",
                "only the quadratic design redraws generative parameters",
            ));
        }
        let base_seed = match bag.take("base_seed") {
            Some(entry) => parse_u64("base_seed", &entry)?,
            None => 0,
        };
        let loss = match bag.take("loss") {
            Some(entry) => LossFunction::parse(&entry.value).ok_or_else(|| {
                bad("loss", format!("unknown loss {:?}; expected squared or absolute", entry.value))
            })?,
            None => LossFunction::SquaredL2,
        };
        let rho_scale = match bag.take("rho_scale") {
            Some(entry) => parse_f64("rho_scale", &entry)?,
            None => 0.0,
        };
        if rho_scale < 0.0 {
            return Err(bad("rho_scale", "the noise scale must be nonnegative"));
        }
        let resamples = match bag.take("resamples") {
            Some(entry) => parse_usize("resamples", &entry)?,
            None => 100,
        };
        if resamples == 0 {
            return Err(bad("resamples", "needs at least one resample"));
        }
        let theta = match bag.take("theta") {
            Some(entry) => parse_f64("theta", &entry)?,
            None => 0.0,
        };

        let sweep = match bag.take("sweep") {
            None => None,
            Some(entry) => {
                let (name, rest) = entry.value.split_once(':').ok_or_else(|| {
                    bad("sweep", "expected `key: v1, v2, ...`, e.g. `gamma: 0, 1, 2`")
                })?;
                let key = SweepKey::parse(name.trim()).ok_or_else(|| {
                    bad(
                        "sweep",
                        format!(
                            "unknown sweep key {:?}; expected gamma, c, theta, d_z, or skew",
                            name.trim()
                        ),
                    )
                })?;
                let values = parse_f64_list(
                    "sweep",
                    &Entry {
                        line: entry.line,
                        value: rest.to_string(),
                    },
                )?;
                if key == SweepKey::DZ {
                    for v in &values {
                        if v.fract() != 0.0 || *v < 1.0 {
                            return Err(bad("sweep", "d_z values must be positive integers"));
                        }
                    }
                }
                if key != SweepKey::Theta && !matches!(dgp, DgpSpec::Quadratic { .. }) {
                    return Err(bad(
                        "sweep",
                        format!("sweep key {:?} needs the quadratic design", key.name()),
                    ));
                }
                Some(Sweep { key, values })
            }
        };

        bag.finish()?;

        let model = match sections.remove("model") {
            Some(section) => ModelSpec::from_section(section, "section [model]")?,
            None => ModelSpec::default(),
        };
        let model_x = match sections.remove("model_x") {
            Some(section) => ModelSpec::from_section(section, "section [model_x]")?,
            None => model.clone(),
        };
        let model_y = match sections.remove("model_y") {
            Some(section) => ModelSpec::from_section(section, "section [model_y]")?,
            None => model.clone(),
        };
        let second_stage = match sections.remove("second_stage") {
            Some(section) => ModelSpec::from_section(section, "section [second_stage]")?,
            None => model.clone(),
        };
        let resampler = match sections.remove("resampler") {
            Some(section) => {
                let mut bag = KeyBag::new(section.keys, "section [resampler]");
                let kind = match bag.take("kind") {
                    Some(entry) => match entry.value.as_str() {
                        "exact" => ResamplerSpec::Exact,
                        "fitted" => ResamplerSpec::Fitted,
                        other => {
                            return Err(bad(
                                "kind",
                                format!("unknown resampler {other:?}; expected exact or fitted"),
                            ))
                        }
                    },
                    None => default_resampler(&dgp),
                };
                bag.finish()?;
                kind
            }
            None => default_resampler(&dgp),
        };
        if resampler == ResamplerSpec::Exact && !matches!(dgp, DgpSpec::Quadratic { .. }) {
            return Err(bad(
                "kind",
                "the exact resampler is only available for the quadratic design",
            ));
        }

        Ok(ExperimentConfig {
            method,
            dgp,
            n_train,
            n_test,
            alpha,
            replications,
            param_draws,
            base_seed,
            loss,
            rho_scale,
            resamples,
            theta,
            sweep,
            model,
            model_x,
            model_y,
            second_stage,
            resampler,
        })
    }
}

fn default_resampler(dgp: &DgpSpec) -> ResamplerSpec {
    match dgp {
        DgpSpec::Quadratic { .. } => ResamplerSpec::Exact,
        _ => ResamplerSpec::Fitted,
    }
}

/// Which built-in oracle the `theory` subcommand profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryFixture {
    /// `Y = Z + Z^2 + noise`, `X = Z^2 + noise`: dependence that only
    /// shows once the quadratic part of `Z` is unexplained.
    QuadraticExample,
    /// `Y = Z + coefficient * sin(X) + noise` with independent `X` and `Z`.
    SineExample,
}

impl TheoryFixture {
    pub fn name(&self) -> &'static str {
        match self {
            TheoryFixture::QuadraticExample => "quadratic_example",
            TheoryFixture::SineExample => "sine_example",
        }
    }
}

/// Settings for the `theory` subcommand: which oracle fixture to profile
/// and how many Monte Carlo draws to spend on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryConfig {
    pub fixture: TheoryFixture,
    pub n_draws: usize,
    pub alpha: f64,
    /// Test-split sizes for the predicted-versus-empirical rejection table.
    pub sample_sizes: Vec<usize>,
    /// Simulated tests per sample size when measuring empirical rejection.
    pub calibration_reps: usize,
    pub base_seed: u64,
    pub loss: LossFunction,
}

impl TheoryConfig {
    /// Types and validates a raw config for `theory`.
    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        if let Some((name, section)) = raw.sections.into_iter().next() {
            return Err(ConfigError::UnknownSection {
                line: section.line,
                name,
            });
        }
        let mut bag = KeyBag::new(raw.top, "the top level");
        let fixture_entry = bag.take("fixture").ok_or(ConfigError::MissingKey { key: "fixture" })?;
        let fixture = match fixture_entry.value.as_str() {
            "quadratic_example" => TheoryFixture::QuadraticExample,
            "sine_example" => TheoryFixture::SineExample,
            other => {
                return Err(bad(
                    "fixture",
                    format!("unknown fixture {other:?}; expected quadratic_example or sine_example"),
                ))
            }
        };
        let n_draws = match bag.take("n_draws") {
            Some(entry) => parse_usize("n_draws", &entry)?,
            None => 100_000,
        };
        if n_draws < 100 {
            return Err(bad("n_draws", "gap estimates need at least 100 draws"));
        }
        let alpha = match bag.take("alpha") {
            Some(entry) => parse_f64("alpha", &entry)?,
            None => 0.05,
        };
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad("alpha", "the level must lie strictly between 0 and 1"));
        }
        let sample_sizes = match bag.take("sample_sizes") {
            Some(entry) => {
                let values = parse_f64_list("sample_sizes", &entry)?;
                let mut sizes = Vec::with_capacity(values.len());
                for v in values {
                    if v.fract() != 0.0 || v < 2.0 {
                        return Err(bad("sample_sizes", "sizes must be integers of at least 2"));
                    }
                    sizes.push(v as usize);
                }
                sizes
            }
            None => vec![50, 200],
        };
        let calibration_reps = match bag.take("calibration_reps") {
            Some(entry) => parse_usize("calibration_reps", &entry)?,
            None => 1000,
        };
        if calibration_reps == 0 {
            return Err(bad("calibration_reps", "needs at least one replication"));
        }
        let base_seed = match bag.take("base_seed") {
            Some(entry) => parse_u64("base_seed", &entry)?,
            None => 0,
        };
        let loss = match bag.take("loss") {
            Some(entry) => LossFunction::parse(&entry.value).ok_or_else(|| {
                bad("loss", format!("unknown loss {:?}; expected squared or absolute", entry.value))
            })?,
            None => LossFunction::SquaredL2,
        };
        bag.finish()?;
        Ok(TheoryConfig {
            fixture,
            n_draws,
            alpha,
            sample_sizes,
            calibration_reps,
            base_seed,
            loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_raw(parse_config_text(text)?)
    }

    #[test]
    fn minimal_quadratic_config_fills_defaults() {
        let config = experiment(
            "method = stfr\n\
             dgp = quadratic\n\
             replications = 10\n",
        )
        .unwrap();
        assert_eq!(config.method, Method::Stfr);
        assert_eq!(
            config.dgp,
            DgpSpec::Quadratic {
                d_z: 10,
                c: 0.0,
                gamma: 0.0,
                skew: 0.0
            }
        );
        assert_eq!(config.n_train, 800);
        assert_eq!(config.n_test, 200);
        assert_eq!(config.alpha, 0.1);
        assert_eq!(config.param_draws, 10);
        assert_eq!(config.resampler, ResamplerSpec::Exact);
        assert_eq!(config.model, ModelSpec::Ols { intercept: true });
        assert_eq!(config.model_x, config.model);
        assert_eq!(config.loss, LossFunction::SquaredL2);
        assert!(config.sweep.is_none());
    }

    #[test]
    fn sections_override_the_shared_model() {
        let config = experiment(
            "method = gcm\n\
             dgp = highdim\n\
             variant = gcm_toy\n\
             n_train = 250\n\
             n_test = 250\n\
             replications = 5\n\
             \n\
             [model]\n\
             factory = lasso\n\
             \n\
             [model_y]\n\
             factory = minnorm\n",
        )
        .unwrap();
        assert_eq!(
            config.model,
            ModelSpec::Lasso {
                lambda: None,
                folds: 5,
                grid: 50
            }
        );
        assert_eq!(config.model_x, config.model);
        assert_eq!(config.model_y, ModelSpec::MinNorm);
        assert_eq!(config.param_draws, 1);
        assert_eq!(config.resampler, ResamplerSpec::Fitted);
        assert_eq!(
            config.dgp,
            DgpSpec::HighDim {
                variant: HighDimVariant::GcmToy,
                d: 500,
                signal: 20.0,
                sparsity: 5
            }
        );
    }

    #[test]
    fn sweeps_parse_key_and_grid() {
        let config = experiment(
            "method = rbpt\n\
             dgp = quadratic\n\
             replications = 5\n\
             sweep = gamma: 0, 0.5, 1, 2\n",
        )
        .unwrap();
        let sweep = config.sweep.unwrap();
        assert_eq!(sweep.key, SweepKey::Gamma);
        assert_eq!(sweep.values, vec![0.0, 0.5, 1.0, 2.0]);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let config = experiment(
            "# a comment\n\
             method = crt\n\
             \n\
             dgp = quadratic\n\
             # another\n\
             replications = 5\n",
        )
        .unwrap();
        assert_eq!(config.method, Method::Crt);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let err = experiment(
            "method = stfr\n\
             dgp = quadratic\n\
             replications = 5\n\
             bandwidth = 3\n",
        )
        .unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key, .. } => {
                assert_eq!(line, 4);
                assert_eq!(key, "bandwidth");
            }
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn dgp_specific_keys_do_not_leak_across_designs() {
        let err = experiment(
            "method = stfr\n\
             dgp = highdim\n\
             variant = stfr_toy\n\
             replications = 5\n\
             gamma = 2\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { ref key, .. } if key == "gamma"));
    }

    #[test]
    fn duplicate_keys_and_malformed_lines_fail() {
        let err = parse_config_text("method = stfr\nmethod = gcm\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
        let err = parse_config_text("just some words\n").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }));
        let err = parse_config_text("[mystery]\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { line: 1, .. }));
    }

    #[test]
    fn missing_required_keys_are_named() {
        let err = experiment("dgp = quadratic\nreplications = 5\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey { key: "method" }));
        let err = experiment("method = stfr\nreplications = 5\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey { key: "dgp" }));
        let err = experiment("method = stfr\ndgp = quadratic\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey { key: "replications" }));
    }

    #[test]
    fn csv_column_roles_must_be_disjoint() {
        let err = experiment(
            "method = gcm\n\
             dgp = csv\n\
             path = data.csv\n\
             x_cols = a\n\
             y_cols = b\n\
             z_cols = a, c\n\
             replications = 5\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateColumn { ref name } if name == "a"));
    }

    #[test]
    fn value_checks_name_the_offending_key() {
        let err = experiment(
            "method = stfr\ndgp = quadratic\nreplications = 5\nalpha = 1.5\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "alpha"));
        let err = experiment(
            "method = stfr\ndgp = quadratic\nreplications = 0\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "replications"));
        let err = experiment(
            "method = stfr\ndgp = quadratic\nreplications = five\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "replications"));
    }

    #[test]
    fn exact_resampler_needs_the_quadratic_design() {
        let err = experiment(
            "method = crt\n\
             dgp = highdim\n\
             variant = gcm_toy\n\
             replications = 5\n\
             \n\
             [resampler]\n\
             kind = exact\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "kind"));
    }

    #[test]
    fn sweeps_outside_the_quadratic_design_only_cover_theta() {
        let err = experiment(
            "method = crt\n\
             dgp = highdim\n\
             variant = gcm_toy\n\
             replications = 5\n\
             sweep = gamma: 0, 1\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { ref key, .. } if key == "sweep"));
        let ok = experiment(
            "method = crt\n\
             dgp = highdim\n\
             variant = gcm_toy\n\
             replications = 5\n\
             sweep = theta: 0, 1\n",
        )
        .unwrap();
        assert_eq!(ok.sweep.unwrap().key, SweepKey::Theta);
    }

    #[test]
    fn theory_config_parses_and_rejects_sections() {
        let raw = parse_config_text(
            "fixture = quadratic_example\nn_draws = 5000\nsample_sizes = 50, 200\n",
        )
        .unwrap();
        let config = TheoryConfig::from_raw(raw).unwrap();
        assert_eq!(config.fixture, TheoryFixture::QuadraticExample);
        assert_eq!(config.n_draws, 5000);
        assert_eq!(config.sample_sizes, vec![50, 200]);
        assert_eq!(config.calibration_reps, 1000);

        let raw =
            parse_config_text("fixture = sine_example\n\n[model]\nfactory = ols\n").unwrap();
        assert!(matches!(
            TheoryConfig::from_raw(raw),
            Err(ConfigError::UnknownSection { .. })
        ));
    }

    #[test]
    fn model_specs_build_working_factories() {
        use ci_robust_core::Matrix;
        let features =
            Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let targets = Matrix::column(vec![1.0, 3.0, 5.0, 7.0]);
        for spec in [
            ModelSpec::Ols { intercept: true },
            ModelSpec::MinNorm,
            ModelSpec::Lasso {
                lambda: Some(0.01),
                folds: 5,
                grid: 50,
            },
            ModelSpec::Krr {
                degree: 2,
                ridge: 1e-4,
            },
        ] {
            let factory = spec.build(RngStream::new(1, 0));
            let fit = factory.fit(&features, &targets).unwrap();
            let at_two = fit.predict_scalar(&[2.0]);
            assert!(
                (at_two - 5.0).abs() < 0.8,
                "{spec:?} predicted {at_two} at x = 2"
            );
        }
    }
}
