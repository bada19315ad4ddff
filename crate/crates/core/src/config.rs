//! Flat key-value run configuration in TOML syntax.
//!
//! ```toml
//! alpha = 2.1
//! d2 = 0.2
//! omega = 0.541
//! grid_points = 192
//! init_s_const = 1.2
//! init_s_amp = 0.01
//! init_s_k = 1.0
//! ```
//!
//! Model keys not given keep their [`ModelParams::baseline`] values. Initial
//! constants not given default to the endemic equilibrium, or to the
//! disease-free one when there is no endemic state.

use std::path::Path;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::simulator::{Scheme, SimConfig};

pub const MODEL_KEYS: [&str; 11] = [
    "alpha", "d", "mu", "gamma", "beta", "tau", "omega", "d1", "d2", "d3", "l",
];

pub const SIM_KEYS: [&str; 6] = ["grid_points", "dt", "t_end", "record_every", "record_from", "scheme"];

const COMPONENTS: [&str; 3] = ["s", "i", "y"];
const PROFILE_FIELDS: [&str; 4] = ["const", "amp", "k", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Builder::default().finish()
    }
}

/// Collects settings before initial defaults that depend on the parameters
/// are resolved.
#[derive(Debug, Clone)]
struct Builder {
    params: ModelParams,
    sim: SimConfig,
    init_const: [Option<f64>; 3],
}

impl Default for Builder {
    fn default() -> Self {
        Builder {
            params: ModelParams::baseline(),
            sim: SimConfig::starting_at([0.0; 3]),
            init_const: [None; 3],
        }
    }
}

fn err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(err(key, format!("expected a number, found {}", other.type_str()))),
    }
}

fn as_count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(err(key, format!("expected a non-negative integer, found {other}"))),
    }
}

impl Builder {
    fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let p = &mut self.params;
        let slot = match key {
            "alpha" => Some(&mut p.alpha),
            "d" => Some(&mut p.d),
            "mu" => Some(&mut p.mu),
            "gamma" => Some(&mut p.gamma),
            "beta" => Some(&mut p.beta),
            "tau" => Some(&mut p.tau),
            "omega" => Some(&mut p.omega),
            "d1" => Some(&mut p.d1),
            "d2" => Some(&mut p.d2),
            "d3" => Some(&mut p.d3),
            "l" => Some(&mut p.l),
            "dt" => Some(&mut self.sim.dt),
            "t_end" => Some(&mut self.sim.t_end),
            "record_from" => Some(&mut self.sim.record_from),
            _ => None,
        };
        if let Some(slot) = slot {
            *slot = as_f64(key, v)?;
            return Ok(());
        }
        match key {
            "grid_points" => self.sim.grid_points = as_count(key, v)?,
            "record_every" => self.sim.record_every = as_count(key, v)?,
            "scheme" => {
                self.sim.scheme = match v.as_str() {
                    Some("explicit") => Scheme::Explicit,
                    Some("semi-implicit") => Scheme::SemiImplicit,
                    _ => return Err(err(key, "expected \"explicit\" or \"semi-implicit\"")),
                }
            }
            _ => return self.set_profile(key, v),
        }
        Ok(())
    }

    fn set_profile(&mut self, key: &str, v: &Value) -> Result<()> {
        let parts: Vec<&str> = key.split('_').collect();
        let (c, f) = match parts.as_slice() {
            ["init", c, f] => (
                COMPONENTS.iter().position(|x| x == c),
                PROFILE_FIELDS.iter().position(|x| x == f),
            ),
            _ => (None, None),
        };
        let (Some(c), Some(f)) = (c, f) else {
            return Err(err(key, "unknown key"));
        };
        let x = as_f64(key, v)?;
        let prof = &mut self.sim.initial[c];
        match f {
            0 => self.init_const[c] = Some(x),
            1 => prof.amplitude = x,
            2 => prof.wavenumber = x,
            _ => prof.seed = x,
        }
        Ok(())
    }

    fn finish(mut self) -> RunConfig {
        let eq = self.params.equilibria();
        let rest = eq.e2.unwrap_or(eq.e1);
        for c in 0..3 {
            self.sim.initial[c].constant = self.init_const[c].unwrap_or(rest[c]);
        }
        RunConfig {
            params: self.params,
            sim: self.sim,
        }
    }
}

/// Parses a configuration, applying `overrides` (`key=value`) afterwards.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| err("<file>", e.message().to_string()))?;
    let mut b = Builder::default();
    for (key, v) in &table {
        b.set(key, v)?;
    }
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| err(o, "override must look like key=value"))?;
        let key = key.trim();
        b.set(key, &parse_scalar(raw.trim()))?;
    }
    Ok(b.finish())
}

fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
