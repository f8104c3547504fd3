//! Experiment configuration and its flat key-value file format.
//!
//! One `key = value` pair per line; `#` starts a comment. Lists are comma
//! separated. Keys:
//!
//! | key           | value                                                     |
//! |---------------|-----------------------------------------------------------|
//! | `experiment`  | beam, onedim-a1, universal-sin2x, borehole, calibration, custom |
//! | `fn`          | registered test function name                             |
//! | `kernels`     | list of gaussian, rq, matern32, exp                       |
//! | `methods`     | list of ok, rk, limit, idw, uk, urk, koh, rkkoh           |
//! | `n`           | design size (>= 3)                                        |
//! | `reps`        | replications (>= 1)                                       |
//! | `seed`        | master seed                                               |
//! | `grid`        | test grid size (1-D) or test sample size                  |
//! | `alpha`       | interval level, in (0, 1)                                 |
//! | `out`         | result CSV path; the summary is written next to it        |
//! | `threads`     | worker threads, 0 for all cores                           |
//! | `noise_sd`    | observation noise sd (calibration)                        |
//! | `theta_grid`  | list of length-scales (calibration)                       |
//! | `loocv`       | true/false, report leave-one-out RMSE                     |
//! | `loocv_refit` | true/false, re-estimate length-scales in every fold       |
//! | `nugget`      | diagonal nugget                                           |
//! | `rescale`     | true/false, map 1-D design endpoints to 0 and 1           |
//! | `timing`      | true/false, record wall times in the CSV                  |
//!
//! `experiment` selects the preset defaults; the remaining keys override them
//! regardless of order. Unknown and repeated keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ratkrig::kernels::DEFAULT_NUGGET;
use ratkrig::testfns::Registry;
use ratkrig::KernelFamily;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Beam,
    OnedimA1,
    UniversalSin2x,
    Borehole,
    Calibration,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Beam,
        ExperimentKind::OnedimA1,
        ExperimentKind::UniversalSin2x,
        ExperimentKind::Borehole,
        ExperimentKind::Calibration,
        ExperimentKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Beam => "beam",
            ExperimentKind::OnedimA1 => "onedim-a1",
            ExperimentKind::UniversalSin2x => "universal-sin2x",
            ExperimentKind::Borehole => "borehole",
            ExperimentKind::Calibration => "calibration",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ok,
    Rk,
    Uk,
    Urk,
    Koh,
    RkKoh,
    Idw,
    Limit,
}

impl Method {
    pub const ALL: [Method; 8] =
        [Method::Ok, Method::Rk, Method::Uk, Method::Urk, Method::Koh, Method::RkKoh, Method::Idw, Method::Limit];

    /// Label written to result files.
    pub fn label(self) -> &'static str {
        match self {
            Method::Ok => "OK",
            Method::Rk => "RK",
            Method::Uk => "UK",
            Method::Urk => "URK",
            Method::Koh => "KOH",
            Method::RkKoh => "RK-KOH",
            Method::Idw => "IDW",
            Method::Limit => "LIMIT",
        }
    }

    /// Command-line spelling.
    pub fn key(self) -> &'static str {
        match self {
            Method::Ok => "ok",
            Method::Rk => "rk",
            Method::Uk => "uk",
            Method::Urk => "urk",
            Method::Koh => "koh",
            Method::RkKoh => "rkkoh",
            Method::Idw => "idw",
            Method::Limit => "limit",
        }
    }

    pub fn is_calibration(self) -> bool {
        matches!(self, Method::Koh | Method::RkKoh)
    }

    /// Whether the method depends on a kernel family.
    pub fn uses_kernel(self) -> bool {
        self != Method::Idw
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s || m.label().eq_ignore_ascii_case(&s))
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub function: String,
    pub kernels: Vec<KernelFamily>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid: usize,
    pub alpha: f64,
    pub out: Option<PathBuf>,
    /// `None` or `Some(0)` uses every core.
    pub threads: Option<usize>,
    pub noise_sd: f64,
    pub theta_grid: Vec<f64>,
    pub loocv: bool,
    pub loocv_refit: bool,
    pub nugget: f64,
    pub rescale: bool,
    pub timing: bool,
}

/// Name under which the calibration study's data generator is reported.
pub const CALIBRATION_FUNCTION: &str = "linear-sin5x";

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            function: String::new(),
            kernels: vec![KernelFamily::Gaussian, KernelFamily::RationalQuadratic],
            methods: vec![Method::Ok, Method::Rk],
            n: 11,
            replications: 50,
            seed: 0,
            grid: 1001,
            alpha: 0.05,
            out: None,
            threads: None,
            noise_sd: 0.0,
            theta_grid: Vec::new(),
            loocv: false,
            loocv_refit: false,
            nugget: DEFAULT_NUGGET,
            rescale: true,
            timing: false,
        };
        match kind {
            ExperimentKind::Beam => ExperimentConfig { function: "beam".into(), ..base },
            ExperimentKind::OnedimA1 => ExperimentConfig { function: "xiong".into(), n: 30, ..base },
            ExperimentKind::UniversalSin2x => ExperimentConfig {
                function: "sin2x".into(),
                kernels: vec![KernelFamily::Gaussian],
                methods: vec![Method::Uk, Method::Urk],
                n: 30,
                rescale: false,
                ..base
            },
            ExperimentKind::Borehole => ExperimentConfig {
                function: "borehole".into(),
                kernels: vec![KernelFamily::Gaussian],
                n: 80,
                loocv: true,
                rescale: false,
                ..base
            },
            ExperimentKind::Calibration => ExperimentConfig {
                function: CALIBRATION_FUNCTION.into(),
                methods: vec![Method::Koh, Method::RkKoh],
                n: 17,
                replications: 20,
                noise_sd: 0.02,
                theta_grid: (1..=10).map(|k| k as f64 / 10.0).collect(),
                rescale: false,
                ..base
            },
            ExperimentKind::Custom => ExperimentConfig { function: "beam".into(), n: 20, ..base },
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::ConfigSyntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim().to_string();
            if pairs.iter().any(|(_, k, _)| *k == key) {
                return Err(HarnessError::ConfigSyntax { line, message: format!("key `{key}` given twice") });
            }
            pairs.push((line, key, value.trim().to_string()));
        }

        let kind = match pairs.iter().find(|(_, k, _)| k == "experiment") {
            Some((line, _, v)) => v.parse().map_err(|e| at_line(*line, e))?,
            None => ExperimentKind::Custom,
        };
        let mut cfg = ExperimentConfig::preset(kind);
        for (line, key, value) in &pairs {
            cfg.set(key, value).map_err(|e| match e {
                HarnessError::UnknownKey { key, .. } => HarnessError::UnknownKey { line: *line, key },
                other => at_line(*line, other),
            })?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "fn" => self.function = value.to_string(),
            "kernels" => self.kernels = parse_list(value, |s| s.parse::<KernelFamily>().map_err(Into::into))?,
            "methods" => self.methods = parse_list(value, str::parse)?,
            "n" => self.n = parse_num(key, value)?,
            "reps" => self.replications = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "grid" => self.grid = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(parse_num(key, value)?),
            "noise_sd" => self.noise_sd = parse_num(key, value)?,
            "theta_grid" => self.theta_grid = parse_list(value, |s| parse_num("theta_grid", s))?,
            "loocv" => self.loocv = parse_num(key, value)?,
            "loocv_refit" => self.loocv_refit = parse_num(key, value)?,
            "nugget" => self.nugget = parse_num(key, value)?,
            "rescale" => self.rescale = parse_num(key, value)?,
            "timing" => self.timing = parse_num(key, value)?,
            other => return Err(HarnessError::UnknownKey { line: 0, key: other.to_string() }),
        }
        Ok(())
    }

    /// Checks invariants and that the function exists in `registry`.
    pub fn validate(&self, registry: &Registry) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.replications < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.kernels.is_empty() || self.methods.is_empty() {
            return bad("kernels and methods must be non-empty".into());
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return bad(format!("nugget must be finite and >= 0, got {}", self.nugget));
        }
        let calibration = self.experiment == ExperimentKind::Calibration;
        if let Some(m) = self.methods.iter().find(|m| m.is_calibration() != calibration) {
            return bad(format!("method {m} does not apply to the {} experiment", self.experiment));
        }
        if calibration {
            if self.theta_grid.is_empty() || self.theta_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return bad("theta_grid must hold positive length-scales".into());
            }
            if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
                return bad(format!("noise_sd must be finite and >= 0, got {}", self.noise_sd));
            }
            if self.function != CALIBRATION_FUNCTION {
                return bad(format!("the calibration experiment uses fn = {CALIBRATION_FUNCTION}"));
            }
        } else {
            registry.get(&self.function)?;
        }
        Ok(())
    }
}

fn at_line(line: usize, e: HarnessError) -> HarnessError {
    HarnessError::ConfigSyntax { line, message: e.to_string() }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::InvalidConfig(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T, HarnessError>) -> Result<Vec<T>, HarnessError> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}
