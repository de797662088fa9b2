//! Line-oriented run configuration: `section.key = value`, `#` comments.
//!
//! Every key has a default, so an empty file is a valid configuration:
//!
//! | key | default |
//! |-----|---------|
//! | `geometry.kind` | `fixed` (`rotation`, `breathing`, `surface_wind`) |
//! | `geometry.amplitude` | `0.2` |
//! | `geometry.omega` | `1.0` |
//! | `geometry.delta` | `0.5` |
//! | `geometry.wind_speed` | `0.5` |
//! | `mesh.n_r`, `mesh.n_theta` | `16`, `32` |
//! | `mesh.r_inner`, `mesh.r_outer` | `1.0`, `2.0` |
//! | `model.delta_omega`, `model.delta_gamma`, `model.delta_gamma_prime` | `1.0` |
//! | `model.delta_k`, `model.delta_k_prime` | `1.0` (`inf` disables the term) |
//! | `model.nonlinearity` | `mass_action` (or `custom:<name>`) |
//! | `model.equilibrium_mode` | `rate_balance` (or `paper_literal`) |
//! | `model.floor_eps` | `1e-30` |
//! | `time.t_end` | `1.0` |
//! | `time.dt` | `0.01`; ignored when `time.cfl` is set |
//! | `time.cfl` | unset; safety factor of the adaptive step |
//! | `time.dt_max` | `0.05`, cap of the adaptive step |
//! | `time.output_interval` | `0.1` |
//! | `time.stepper` | `imex` (or `implicit`) |
//! | `initial.profile` | `uniform` (`perturbed_equilibrium`, `grid`) |
//! | `initial.u`, `initial.w`, `initial.z` | `1.0` |
//! | `initial.amplitude`, `initial.mode` | `0.1`, `2` |
//! | `initial.file` | required for `grid` |
//! | `probe.n_samples`, `probe.seed` | `1000`, `1` |
//! | `output.directory` | `out` |
//! | `output.prefix` | empty, prepended to every output file name |
//! | `output.snapshots` | `false` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::equilibrium::EquilibriumMode;
use crate::geometry::{GeometryKind, GeometryPreset};
use crate::mesh::{MIN_NR, MIN_NTHETA};
use crate::model::{ModelParams, Nonlinearity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {second}: duplicate key '{key}' (first set on line {first})")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for '{key}' (line {line}): {message}")]
    Validation { key: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    Imex,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepControl {
    Fixed(f64),
    /// Safety factor on the advective bound, with an upper cap.
    Cfl { safety: f64, dt_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Uniform { u: f64, w: f64, z: f64 },
    /// Equilibrium of the uniform `(u, w, z)` masses with a smooth angular
    /// perturbation of relative size `amplitude` and wave number `mode`.
    PerturbedEquilibrium { u: f64, w: f64, z: f64, amplitude: f64, mode: u32 },
    Grid(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryPreset,
    pub n_r: usize,
    pub n_theta: usize,
    pub params: ModelParams,
    pub nonlinearity: Nonlinearity,
    pub equilibrium_mode: EquilibriumMode,
    pub floor_eps: f64,
    pub t_end: f64,
    pub time_step: TimeStepControl,
    pub output_interval: f64,
    pub stepper: Stepper,
    pub initial: InitialProfile,
    pub probe_samples: usize,
    pub probe_seed: u64,
    pub output_dir: PathBuf,
    pub output_prefix: String,
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

const KEYS: &[&str] = &[
    "geometry.kind",
    "geometry.amplitude",
    "geometry.omega",
    "geometry.delta",
    "geometry.wind_speed",
    "mesh.n_r",
    "mesh.n_theta",
    "mesh.r_inner",
    "mesh.r_outer",
    "model.delta_omega",
    "model.delta_gamma",
    "model.delta_gamma_prime",
    "model.delta_k",
    "model.delta_k_prime",
    "model.nonlinearity",
    "model.equilibrium_mode",
    "model.floor_eps",
    "time.t_end",
    "time.dt",
    "time.cfl",
    "time.dt_max",
    "time.output_interval",
    "time.stepper",
    "initial.profile",
    "initial.u",
    "initial.w",
    "initial.z",
    "initial.amplitude",
    "initial.mode",
    "initial.file",
    "probe.n_samples",
    "probe.seed",
    "output.directory",
    "output.prefix",
    "output.snapshots",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Validation {
            key: key.to_string(),
            line: self.map.get(key).map_or(0, |(l, _)| *l),
            message: message.into(),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, v)) => {
                let x: f64 = match v {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => v.parse().map_err(|_| self.invalid(key, format!("'{v}' is not a number")))?,
                };
                if x.is_nan() {
                    return Err(self.invalid(key, "NaN is not allowed"));
                }
                Ok(x)
            }
        }
    }

    fn finite_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.f64_or(key, default)?;
        if !x.is_finite() {
            return Err(self.invalid(key, "must be finite"));
        }
        Ok(x)
    }

    fn positive_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.finite_or(key, default)?;
        if x <= 0.0 {
            return Err(self.invalid(key, "must be positive"));
        }
        Ok(x)
    }

    fn nonneg_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.finite_or(key, default)?;
        if x < 0.0 {
            return Err(self.invalid(key, "must be nonnegative"));
        }
        Ok(x)
    }

    fn uint_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((_, v)) => v
                .parse()
                .map_err(|_| self.invalid(key, format!("'{v}' is not a nonnegative integer"))),
        }
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).map_or(default, |(_, v)| v)
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected 'section.key = value', got '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.contains('.') {
            return Err(ConfigError::Parse {
                line,
                message: format!("key '{key}' is not of the form section.key"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: format!("missing value for '{key}'"),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        let value = value.trim_matches('"').to_string();
        if let Some((first, _)) = map.get(key) {
            return Err(ConfigError::DuplicateKey {
                key: key.to_string(),
                first: *first,
                second: line,
            });
        }
        map.insert(key.to_string(), (line, value));
    }
    Ok(Entries { map })
}

/// Parse and validate a configuration. Relative `initial.file` paths are
/// resolved against `base_dir` when given.
pub fn parse_config_in(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let e = tokenize(text)?;

    let kind_s = e.str_or("geometry.kind", "fixed");
    let kind = GeometryKind::parse(kind_s)
        .ok_or_else(|| e.invalid("geometry.kind", format!("unknown geometry '{kind_s}'")))?;
    let r_inner = e.positive_or("mesh.r_inner", 1.0)?;
    let r_outer = e.positive_or("mesh.r_outer", 2.0)?;
    if r_outer <= r_inner {
        return Err(e.invalid("mesh.r_outer", "must exceed mesh.r_inner"));
    }
    let amplitude = e.finite_or("geometry.amplitude", 0.2)?;
    let omega = e.finite_or("geometry.omega", 1.0)?;
    let delta = e.nonneg_or("geometry.delta", 0.5)?;
    let wind = e.finite_or("geometry.wind_speed", 0.5)?;
    let geometry = match kind {
        GeometryKind::Fixed => GeometryPreset::fixed(r_inner, r_outer),
        GeometryKind::Rotation => GeometryPreset::rotation(r_inner, r_outer, omega, delta),
        GeometryKind::Breathing => GeometryPreset::breathing(r_inner, r_outer, amplitude, omega, delta),
        GeometryKind::SurfaceWind => GeometryPreset::surface_wind(r_inner, r_outer, wind, delta),
    };
    geometry
        .validate()
        .map_err(|err| e.invalid("geometry.amplitude", err.to_string()))?;

    let n_r = e.uint_or("mesh.n_r", 16)? as usize;
    if n_r < MIN_NR {
        return Err(e.invalid("mesh.n_r", format!("below minimum {MIN_NR}")));
    }
    let n_theta = e.uint_or("mesh.n_theta", 32)? as usize;
    if n_theta < MIN_NTHETA {
        return Err(e.invalid("mesh.n_theta", format!("below minimum {MIN_NTHETA}")));
    }

    let params = ModelParams {
        delta_omega: e.f64_or("model.delta_omega", 1.0)?,
        delta_gamma: e.f64_or("model.delta_gamma", 1.0)?,
        delta_gamma_prime: e.f64_or("model.delta_gamma_prime", 1.0)?,
        delta_k: e.f64_or("model.delta_k", 1.0)?,
        delta_k_prime: e.f64_or("model.delta_k_prime", 1.0)?,
    };
    if let Err(err) = params.validate() {
        let key = match &err {
            crate::model::ModelError::InvalidParameter { name, .. } => format!("model.{name}"),
            _ => "model".to_string(),
        };
        return Err(e.invalid(&key, err.to_string()));
    }
    let nl = e.str_or("model.nonlinearity", "mass_action");
    let nonlinearity =
        Nonlinearity::parse(nl).map_err(|err| e.invalid("model.nonlinearity", err.to_string()))?;
    let mode_s = e.str_or("model.equilibrium_mode", "rate_balance");
    let equilibrium_mode = EquilibriumMode::parse(mode_s)
        .ok_or_else(|| e.invalid("model.equilibrium_mode", format!("unknown mode '{mode_s}'")))?;
    let floor_eps = e.positive_or("model.floor_eps", crate::diagnostics::DEFAULT_FLOOR)?;

    let t_end = e.nonneg_or("time.t_end", 1.0)?;
    let time_step = if e.raw("time.cfl").is_some() {
        let safety = e.positive_or("time.cfl", 0.9)?;
        if safety > 1.0 {
            return Err(e.invalid("time.cfl", "safety factor must not exceed 1"));
        }
        TimeStepControl::Cfl {
            safety,
            dt_max: e.positive_or("time.dt_max", 0.05)?,
        }
    } else {
        TimeStepControl::Fixed(e.positive_or("time.dt", 0.01)?)
    };
    let output_interval = e.positive_or("time.output_interval", 0.1)?;
    let stepper = match e.str_or("time.stepper", "imex") {
        "imex" => Stepper::Imex,
        "implicit" => Stepper::Implicit,
        other => return Err(e.invalid("time.stepper", format!("unknown stepper '{other}'"))),
    };

    let (u, w, z) = (
        e.nonneg_or("initial.u", 1.0)?,
        e.nonneg_or("initial.w", 1.0)?,
        e.nonneg_or("initial.z", 1.0)?,
    );
    let initial = match e.str_or("initial.profile", "uniform") {
        "uniform" => InitialProfile::Uniform { u, w, z },
        "perturbed_equilibrium" => {
            let amplitude = e.nonneg_or("initial.amplitude", 0.1)?;
            if amplitude >= 1.0 {
                return Err(e.invalid("initial.amplitude", "must be below 1 to keep positivity"));
            }
            let mode = e.uint_or("initial.mode", 2)?;
            if mode > u32::MAX as u64 {
                return Err(e.invalid("initial.mode", "too large"));
            }
            InitialProfile::PerturbedEquilibrium {
                u,
                w,
                z,
                amplitude,
                mode: mode as u32,
            }
        }
        "grid" => {
            let (_, f) = e
                .raw("initial.file")
                .ok_or_else(|| e.invalid("initial.profile", "grid profile needs initial.file"))?;
            let mut path = PathBuf::from(f);
            if let (true, Some(base)) = (path.is_relative(), base_dir) {
                path = base.join(path);
            }
            if !path.is_file() {
                return Err(e.invalid("initial.file", format!("file {} does not exist", path.display())));
            }
            InitialProfile::Grid(path)
        }
        other => return Err(e.invalid("initial.profile", format!("unknown profile '{other}'"))),
    };

    let probe_samples = e.uint_or("probe.n_samples", 1000)? as usize;
    if probe_samples == 0 {
        return Err(e.invalid("probe.n_samples", "must be at least 1"));
    }
    let probe_seed = e.uint_or("probe.seed", 1)?;

    let snapshots = match e.str_or("output.snapshots", "false") {
        "true" => true,
        "false" => false,
        other => return Err(e.invalid("output.snapshots", format!("expected true or false, got '{other}'"))),
    };

    Ok(RunConfig {
        geometry,
        n_r,
        n_theta,
        params,
        nonlinearity,
        equilibrium_mode,
        floor_eps,
        t_end,
        time_step,
        output_interval,
        stepper,
        initial,
        probe_samples,
        probe_seed,
        output_dir: PathBuf::from(e.str_or("output.directory", "out")),
        output_prefix: e.str_or("output.prefix", "").to_string(),
        snapshots,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_in(text, None)
}
