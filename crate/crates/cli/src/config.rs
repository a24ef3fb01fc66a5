//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use spag::inner::{DEFAULT_INNER_TOL, DEFAULT_MAX_PASSES};
use spag::LossKind;

use crate::CliError;

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::config("config", format!("line {}: expected key = value", k + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<(String, String), CliError> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| CliError::config("--set", format!("expected key=value, got `{arg}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// A configuration that can be assembled from and echoed as flat pairs.
pub trait KvConfig: Default {
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError>;

    fn pairs(&self) -> BTreeMap<String, String>;

    fn validate(&self) -> Result<(), CliError>;

    /// Defaults, then the file, then the overrides in order.
    fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for (k, v) in parse_pairs(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The echo as `key = value` lines, loadable by [`KvConfig::load`].
    fn to_text(&self) -> String {
        self.pairs()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| CliError::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref()
        .map(T::to_string)
        .unwrap_or_else(|| "none".into())
}

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::Logistic => "logistic",
        LossKind::Squared => "squared",
    }
}

fn require(key: &str, ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, msg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Dense,
    Sparse,
}

impl FromStr for Design {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dense" => Ok(Design::Dense),
            "sparse" => Ok(Design::Sparse),
            _ => Err("expected dense or sparse".into()),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::Dense => "dense",
            Design::Sparse => "sparse",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSetting {
    Auto,
    Value(f64),
}

impl FromStr for MuSetting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(MuSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(MuSetting::Value(v)),
            _ => Err("expected `auto` or a number >= 0".into()),
        }
    }
}

impl std::fmt::Display for MuSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MuSetting::Auto => f.write_str("auto"),
            MuSetting::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Minimizer of the server's local loss.
    Local,
    Zero,
}

impl FromStr for Init {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "local" => Ok(Init::Local),
            "zero" => Ok(Init::Zero),
            _ => Err("expected local or zero".into()),
        }
    }
}

impl std::fmt::Display for Init {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Init::Local => "local",
            Init::Zero => "zero",
        })
    }
}

/// Everything `run`, `tune-mu` and `make-synthetic` need.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// LibSVM file; a synthetic dataset is generated when absent.
    pub dataset: Option<String>,
    /// Scale rows of a loaded dataset to at most this norm.
    pub normalize: Option<f64>,
    pub design: Design,
    pub d: usize,
    pub examples: usize,
    pub decay: f64,
    pub loss: LossKind,
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    pub mu: MuSetting,
    pub algorithm: String,
    pub g_min: f64,
    pub t0: usize,
    pub inner_tol: f64,
    pub max_inner_passes: usize,
    pub max_iters: usize,
    pub target: Option<f64>,
    pub seed: u64,
    pub output: String,
    pub init: Init,
    pub probe_iters: usize,
    pub dane_eta: Option<f64>,
    pub hb_beta: Option<f64>,
    pub agd_step: Option<f64>,
    pub agd_momentum: Option<f64>,
    /// Grid-search the momentum baseline before running it.
    pub agd_tune: bool,
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            normalize: None,
            design: Design::Sparse,
            d: 100,
            examples: 20_000,
            decay: 0.92,
            loss: LossKind::Logistic,
            lambda: 1e-6,
            m: 4,
            n: 2000,
            mu: MuSetting::Auto,
            algorithm: "spag".into(),
            g_min: 1.0,
            t0: 50,
            inner_tol: DEFAULT_INNER_TOL,
            max_inner_passes: DEFAULT_MAX_PASSES,
            max_iters: 100,
            target: None,
            seed: 0,
            output: "run.csv".into(),
            init: Init::Local,
            probe_iters: 20,
            dane_eta: None,
            hb_beta: None,
            agd_step: None,
            agd_momentum: None,
            agd_tune: false,
            wall_clock: false,
        }
    }
}

impl KvConfig for RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "dataset" => self.dataset = parse_opt(key, value)?,
            "normalize" => self.normalize = parse_opt(key, value)?,
            "design" => self.design = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "N" | "examples" => self.examples = parse(key, value)?,
            "decay" => self.decay = parse(key, value)?,
            "loss" => self.loss = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "algorithm" => self.algorithm = value.to_string(),
            "g_min" => self.g_min = parse(key, value)?,
            "t0" => self.t0 = parse(key, value)?,
            "inner_tol" => self.inner_tol = parse(key, value)?,
            "max_inner_passes" => self.max_inner_passes = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "target" => self.target = parse_opt(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = value.to_string(),
            "init" => self.init = parse(key, value)?,
            "probe_iters" => self.probe_iters = parse(key, value)?,
            "dane_eta" => self.dane_eta = parse_opt(key, value)?,
            "hb_beta" => self.hb_beta = parse_opt(key, value)?,
            "agd_step" => self.agd_step = parse_opt(key, value)?,
            "agd_momentum" => self.agd_momentum = parse_opt(key, value)?,
            "agd_tune" => self.agd_tune = parse(key, value)?,
            "wall_clock" => self.wall_clock = parse(key, value)?,
            _ => return Err(CliError::config("config", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn pairs(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            p.insert(k.to_string(), v);
        };
        put("dataset", opt_str(&self.dataset));
        put("normalize", opt_str(&self.normalize));
        put("design", self.design.to_string());
        put("d", self.d.to_string());
        put("N", self.examples.to_string());
        put("decay", self.decay.to_string());
        put("loss", loss_name(self.loss).into());
        put("lambda", self.lambda.to_string());
        put("m", self.m.to_string());
        put("n", self.n.to_string());
        put("mu", self.mu.to_string());
        put("algorithm", self.algorithm.clone());
        put("g_min", self.g_min.to_string());
        put("t0", self.t0.to_string());
        put("inner_tol", self.inner_tol.to_string());
        put("max_inner_passes", self.max_inner_passes.to_string());
        put("max_iters", self.max_iters.to_string());
        put("target", opt_str(&self.target));
        put("seed", self.seed.to_string());
        put("output", self.output.clone());
        put("init", self.init.to_string());
        put("probe_iters", self.probe_iters.to_string());
        put("dane_eta", opt_str(&self.dane_eta));
        put("hb_beta", opt_str(&self.hb_beta));
        put("agd_step", opt_str(&self.agd_step));
        put("agd_momentum", opt_str(&self.agd_momentum));
        put("agd_tune", self.agd_tune.to_string());
        put("wall_clock", self.wall_clock.to_string());
        p
    }

    fn validate(&self) -> Result<(), CliError> {
        require("d", self.d >= 1, "must be at least 1")?;
        require("N", self.examples >= 1, "must be at least 1")?;
        require(
            "decay",
            self.decay > 0.0 && self.decay <= 1.0,
            "must lie in (0, 1]",
        )?;
        require(
            "lambda",
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "must be >= 0",
        )?;
        require("m", self.m >= 1, "must be at least 1")?;
        require("n", self.n >= 1, "must be at least 1")?;
        require(
            "g_min",
            self.g_min >= 0.0 && self.g_min.is_finite(),
            "must be >= 0",
        )?;
        require("inner_tol", self.inner_tol > 0.0, "must be > 0")?;
        require(
            "max_inner_passes",
            self.max_inner_passes >= 1,
            "must be at least 1",
        )?;
        require("target", self.target.is_none_or(|t| t > 0.0), "must be > 0")?;
        require("probe_iters", self.probe_iters >= 1, "must be at least 1")?;
        require(
            "normalize",
            self.normalize.is_none_or(|r| r > 0.0),
            "must be > 0",
        )?;
        require("output", !self.output.is_empty(), "must not be empty")?;
        let registry = spag::AlgorithmRegistry::builtin();
        if !registry.contains(&self.algorithm) {
            return Err(CliError::config(
                "algorithm",
                format!(
                    "unknown `{}` (known: {})",
                    self.algorithm,
                    registry.names().join(", ")
                ),
            ));
        }
        Ok(())
    }
}

/// Settings of `verify-concentration`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationConfig {
    pub d: usize,
    pub examples: usize,
    pub n: usize,
    pub delta: f64,
    pub lambda: f64,
    pub loss: LossKind,
    pub decay: f64,
    /// Monte Carlo draws of the preconditioning sample for the sandwich check.
    pub draws: usize,
    /// Draws per sample size in the gap scaling study.
    pub gap_draws: usize,
    /// Random probe points per gap estimate (non-quadratic losses).
    pub probes: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            d: 10,
            examples: 100_000,
            n: 500,
            delta: 0.1,
            lambda: 1e-3,
            loss: LossKind::Squared,
            decay: 1.0,
            draws: 100,
            gap_draws: 50,
            probes: 20,
            power_iters: 200,
            seed: 0,
        }
    }
}

impl KvConfig for ConcentrationConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "d" => self.d = parse(key, value)?,
            "N" | "examples" => self.examples = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "loss" => self.loss = parse(key, value)?,
            "decay" => self.decay = parse(key, value)?,
            "draws" => self.draws = parse(key, value)?,
            "gap_draws" => self.gap_draws = parse(key, value)?,
            "probes" => self.probes = parse(key, value)?,
            "power_iters" => self.power_iters = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(CliError::config("config", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn pairs(&self) -> BTreeMap<String, String> {
        [
            ("d", self.d.to_string()),
            ("N", self.examples.to_string()),
            ("n", self.n.to_string()),
            ("delta", self.delta.to_string()),
            ("lambda", self.lambda.to_string()),
            ("loss", loss_name(self.loss).to_string()),
            ("decay", self.decay.to_string()),
            ("draws", self.draws.to_string()),
            ("gap_draws", self.gap_draws.to_string()),
            ("probes", self.probes.to_string()),
            ("power_iters", self.power_iters.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        require("d", self.d >= 1, "must be at least 1")?;
        require(
            "n",
            self.n >= 1 && self.n <= self.examples,
            "must lie in [1, N]",
        )?;
        require(
            "delta",
            self.delta > 0.0 && self.delta < 1.0,
            "must lie in (0, 1)",
        )?;
        require(
            "lambda",
            self.lambda > 0.0 && self.lambda.is_finite(),
            "must be > 0",
        )?;
        require(
            "decay",
            self.decay > 0.0 && self.decay <= 1.0,
            "must lie in (0, 1]",
        )?;
        require("draws", self.draws >= 1, "must be at least 1")?;
        require("power_iters", self.power_iters >= 30, "must be at least 30")?;
        Ok(())
    }
}
