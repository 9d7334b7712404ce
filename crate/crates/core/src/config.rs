//! Run configuration: a flat `key = value` text format with dotted keys.
//!
//! ```text
//! # advection with noise learning
//! preset = advection-ifac
//! scenario.seed = 3
//! filter.dt = 0.0025
//! output.dir = out/run3
//! ```
//!
//! Keys set in the file override the preset. Without a preset every key
//! in [`REQUIRED_KEYS`] must be present.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::advection::{AdvectionScenario, Bimodal, PdeForm};
use crate::error::{Error, Result};
use crate::filter::{FilterConfig, BOUNDARY_NOISE};
use crate::kernels::{HyperParams, Scheme};
use crate::regression::{ActiveParams, FitOptions};

pub const PRESET_ADVECTION_IFAC: &str = "advection-ifac";

/// Keys with no built-in default.
pub const REQUIRED_KEYS: &[&str] = &[
    "scenario.g",
    "filter.dt",
    "filter.scheme",
    "theta0.sigma2_se",
    "theta0.l",
    "theta0.sigma2_q",
    "theta0.sigma2_r",
];

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "scenario.g",
    "scenario.mu1",
    "scenario.sigma1",
    "scenario.mu2",
    "scenario.sigma2",
    "scenario.x_lo",
    "scenario.x_hi",
    "scenario.sigma_eps",
    "scenario.n_meas",
    "scenario.n_init",
    "scenario.horizon",
    "scenario.seed",
    "scenario.pde_form",
    "scenario.estimate_shift",
    "scenario.estimate_extra_var",
    "filter.dt",
    "filter.scheme",
    "filter.grid_points",
    "filter.refit_every",
    "filter.boundary_noise",
    "filter.fit.active",
    "filter.fit.max_iters",
    "filter.fit.tol",
    "filter.fit.initial_step",
    "filter.fit.restarts",
    "theta0.sigma2_se",
    "theta0.l",
    "theta0.sigma2_q",
    "theta0.sigma2_r",
    "output.dir",
    "emit.state_trace",
    "emit.hyper_trace",
    "emit.mise_trace",
    "emit.innovation_trace",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitFlags {
    pub state_trace: bool,
    pub hyper_trace: bool,
    pub mise_trace: bool,
    pub innovation_trace: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            state_trace: true,
            hyper_trace: true,
            mise_trace: true,
            innovation_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: AdvectionScenario,
    pub filter: FilterConfig,
    pub theta0: HyperParams,
    pub output_dir: PathBuf,
    pub emit: EmitFlags,
}

impl RunConfig {
    /// Replaces the seed of both the scenario and the filter.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.filter.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate()
            .map_err(|e| Error::config("scenario", strip_contract(e)))?;
        self.filter
            .validate()
            .map_err(|e| Error::config("filter", strip_contract(e)))?;
        self.theta0
            .validate()
            .map_err(|e| Error::config("theta0", strip_contract(e)))?;
        if self.scenario.n_init_samples == 0 {
            return Err(Error::config("scenario.n_init", "must be >= 1"));
        }
        Ok(())
    }
}

fn strip_contract(e: Error) -> String {
    match e {
        Error::Contract(m) => m,
        other => other.to_string(),
    }
}

/// Key/value pairs as written in the file, with the line each came from.
fn parse_pairs(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {lineno}"), format!("expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::config(format!("line {lineno}"), "empty key"));
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(key, format!("unknown key (line {lineno})")));
        }
        if let Some((_, first)) = out.insert(key.to_string(), (value.to_string(), lineno)) {
            return Err(Error::config(key, format!("assigned twice (lines {first} and {lineno})")));
        }
    }
    Ok(out)
}

/// The named preset's values as key/value text.
pub fn preset_text(name: &str) -> Result<&'static str> {
    match name {
        PRESET_ADVECTION_IFAC => Ok(ADVECTION_IFAC),
        other => Err(Error::config(
            "preset",
            format!("unknown preset `{other}` (available: {PRESET_ADVECTION_IFAC})"),
        )),
    }
}

const ADVECTION_IFAC: &str = "\
scenario.g = 3
scenario.sigma_eps = 0.06
scenario.n_meas = 5
scenario.n_init = 41
scenario.horizon = 100
filter.dt = 0.005
filter.scheme = implicit
filter.grid_points = 41
filter.fit.active = sigma_q, sigma_r
theta0.sigma2_se = 0.09
theta0.l = 0.5
theta0.sigma2_q = 0.01
theta0.sigma2_r = 0.04
";

fn get<T: FromStr>(map: &BTreeMap<String, (String, usize)>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some((v, _)) => v
            .parse::<T>()
            .map(Some)
            .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
    }
}

fn parse_active(key: &str, v: &str) -> Result<ActiveParams> {
    let mut a = ActiveParams {
        sigma2_se: false,
        length_scale: false,
        sigma2_q: false,
        sigma2_r: false,
    };
    for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "sigma_se" => a.sigma2_se = true,
            "l" => a.length_scale = true,
            "sigma_q" => a.sigma2_q = true,
            "sigma_r" => a.sigma2_r = true,
            "all" => a = ActiveParams::ALL,
            "none" => {}
            other => {
                return Err(Error::config(
                    key,
                    format!("unknown parameter `{other}` (expected sigma_se, l, sigma_q, sigma_r, all, none)"),
                ))
            }
        }
    }
    Ok(a)
}

/// Parses config text. A `preset` key in the file wins over the `preset`
/// argument; keys set in the file override the preset's values.
pub fn parse_config_str(text: &str, preset: Option<&str>) -> Result<RunConfig> {
    let file = parse_pairs(text)?;
    let preset = match (file.get("preset"), preset) {
        (Some((p, _)), _) => Some(p.clone()),
        (None, p) => p.map(str::to_string),
    };
    let mut map = match &preset {
        Some(name) => parse_pairs(preset_text(name)?)?,
        None => BTreeMap::new(),
    };
    map.extend(file);
    map.remove("preset");

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !map.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(
            missing[0],
            format!("missing required keys: {}", missing.join(", ")),
        ));
    }

    let d = AdvectionScenario::default();
    let req = |key: &str| -> Result<f64> {
        get::<f64>(&map, key)?.ok_or_else(|| Error::config(key, "missing"))
    };
    let dt = req("filter.dt")?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config("filter.dt", format!("must be finite and > 0, got {dt}")));
    }
    let pde_form = match map.get("scenario.pde_form") {
        None => d.pde_form,
        Some((v, _)) => PdeForm::from_str(v).map_err(|e| Error::config("scenario.pde_form", strip_contract(e)))?,
    };
    let scenario = AdvectionScenario {
        g: req("scenario.g")?,
        init: Bimodal {
            mu1: get(&map, "scenario.mu1")?.unwrap_or(d.init.mu1),
            sigma1: get(&map, "scenario.sigma1")?.unwrap_or(d.init.sigma1),
            mu2: get(&map, "scenario.mu2")?.unwrap_or(d.init.mu2),
            sigma2: get(&map, "scenario.sigma2")?.unwrap_or(d.init.sigma2),
        },
        x_lo: get(&map, "scenario.x_lo")?.unwrap_or(d.x_lo),
        x_hi: get(&map, "scenario.x_hi")?.unwrap_or(d.x_hi),
        sigma_eps: get(&map, "scenario.sigma_eps")?.unwrap_or(d.sigma_eps),
        dt,
        n_meas_per_step: get(&map, "scenario.n_meas")?.unwrap_or(d.n_meas_per_step),
        n_init_samples: get(&map, "scenario.n_init")?.unwrap_or(d.n_init_samples),
        horizon: get(&map, "scenario.horizon")?.unwrap_or(d.horizon),
        seed: get(&map, "scenario.seed")?.unwrap_or(d.seed),
        pde_form,
        estimate_shift: get(&map, "scenario.estimate_shift")?.unwrap_or(d.estimate_shift),
        estimate_extra_var: get(&map, "scenario.estimate_extra_var")?.unwrap_or(d.estimate_extra_var),
    };
    if scenario.x_lo.is_nan() || scenario.x_hi.is_nan() || scenario.x_lo >= scenario.x_hi {
        return Err(Error::config(
            "scenario.x_hi",
            format!("must exceed scenario.x_lo ({} <= {})", scenario.x_hi, scenario.x_lo),
        ));
    }
    if scenario.sigma_eps.is_nan() || scenario.sigma_eps < 0.0 {
        return Err(Error::config("scenario.sigma_eps", "must be >= 0"));
    }

    let scheme = {
        let (v, _) = &map["filter.scheme"];
        Scheme::from_str(v).map_err(|e| Error::config("filter.scheme", strip_contract(e)))?
    };
    let grid_points: usize = get(&map, "filter.grid_points")?.unwrap_or(41);
    if grid_points < 2 {
        return Err(Error::config("filter.grid_points", "must be >= 2"));
    }
    let refit_every: usize = get(&map, "filter.refit_every")?.unwrap_or(1);
    if refit_every == 0 {
        return Err(Error::config("filter.refit_every", "must be >= 1"));
    }
    let fd = FitOptions::default();
    let fit = FitOptions {
        max_iters: get(&map, "filter.fit.max_iters")?.unwrap_or(fd.max_iters),
        simplex_tol: get(&map, "filter.fit.tol")?.unwrap_or(fd.simplex_tol),
        initial_step: get(&map, "filter.fit.initial_step")?.unwrap_or(fd.initial_step),
        active: match map.get("filter.fit.active") {
            Some((v, _)) => parse_active("filter.fit.active", v)?,
            None => fd.active,
        },
        restarts: get(&map, "filter.fit.restarts")?.unwrap_or(fd.restarts),
        seed: scenario.seed,
    };
    if fit.restarts == 0 {
        return Err(Error::config("filter.fit.restarts", "must be >= 1"));
    }
    let filter = FilterConfig {
        dt,
        scheme,
        operator: scenario.operator(),
        test_grid: scenario.uniform_grid(grid_points),
        boundary_points: vec![scenario.x_lo],
        refit_every,
        fit,
        boundary_noise: get(&map, "filter.boundary_noise")?.unwrap_or(BOUNDARY_NOISE),
        seed: scenario.seed,
    };

    let theta0 = HyperParams {
        sigma2_se: req("theta0.sigma2_se")?,
        length_scale: req("theta0.l")?,
        sigma2_q: req("theta0.sigma2_q")?,
        sigma2_r: req("theta0.sigma2_r")?,
    };
    for (key, v, strict) in [
        ("theta0.sigma2_se", theta0.sigma2_se, true),
        ("theta0.l", theta0.length_scale, true),
        ("theta0.sigma2_q", theta0.sigma2_q, false),
        ("theta0.sigma2_r", theta0.sigma2_r, false),
    ] {
        let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
        if !ok {
            let bound = if strict { "> 0" } else { ">= 0" };
            return Err(Error::config(key, format!("must be finite and {bound}, got {v}")));
        }
    }

    let emit = EmitFlags {
        state_trace: get(&map, "emit.state_trace")?.unwrap_or(true),
        hyper_trace: get(&map, "emit.hyper_trace")?.unwrap_or(true),
        mise_trace: get(&map, "emit.mise_trace")?.unwrap_or(true),
        innovation_trace: get(&map, "emit.innovation_trace")?.unwrap_or(true),
    };
    let output_dir = map
        .get("output.dir")
        .map(|(v, _)| PathBuf::from(v))
        .unwrap_or_else(|| PathBuf::from("gpkf-out"));

    let cfg = RunConfig {
        scenario,
        filter,
        theta0,
        output_dir,
        emit,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path, preset: Option<&str>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, preset)
}

/// The preset alone.
pub fn preset(name: &str) -> Result<RunConfig> {
    parse_config_str("", Some(name))
}
