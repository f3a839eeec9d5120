//! Scenario files: the system, per-user distortion tables and solver knobs.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{SystemConfig, TaskKind, C64};
use crate::distortion::DistortionTable;
use crate::error::{Error, Result};
use crate::power_beam::{PowerBeamOptions, ScaOptions};
use crate::rate_opt::RateOptions;

/// Stopping thresholds (fractional objective decrease) per loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Epsilons {
    pub rate: f64,
    pub sca: f64,
    pub beam: f64,
    pub alternation: f64,
}

impl Default for Epsilons {
    fn default() -> Self {
        Self {
            rate: 1e-5,
            sca: 1e-4,
            beam: 1e-4,
            alternation: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationCaps {
    pub rate: usize,
    pub sca: usize,
    pub beam: usize,
    pub alternation: usize,
}

impl Default for IterationCaps {
    fn default() -> Self {
        Self {
            rate: 500,
            sca: 50,
            beam: 30,
            alternation: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub epsilons: Epsilons,
    pub max_iters: IterationCaps,
    /// Seeds the randomized checks of `validate`.
    pub seed: u64,
    /// Restart the rate search from every tabulated rate.
    pub multistart: bool,
}

impl SolverSettings {
    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            epsilon: self.epsilons.rate,
            max_iters: self.max_iters.rate,
            multistart: self.multistart,
            ..Default::default()
        }
    }

    pub fn power_beam_options(&self) -> PowerBeamOptions {
        PowerBeamOptions {
            sca: ScaOptions {
                epsilon: self.epsilons.sca,
                max_iters: self.max_iters.sca,
                ..Default::default()
            },
            epsilon: self.epsilons.beam,
            max_outer: self.max_iters.beam,
        }
    }
}

/// A user entry. The delay cap is given either directly in channel uses or
/// as channel uses per source dimension times the source dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub kind: TaskKind,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_dim: Option<f64>,
    /// Table file, relative to the scenario file.
    pub table: PathBuf,
}

impl UserSpec {
    pub fn resolved_delay_cap(&self) -> Result<f64> {
        match (self.delay_cap, self.bandwidth_ratio, self.source_dim) {
            (Some(t), None, None) => Ok(t),
            (None, Some(r), Some(d)) if r > 0.0 && d > 0.0 => Ok(r * d),
            (None, Some(_), None) => Err(Error::Config(
                "bandwidth_ratio needs source_dim to convert into channel uses".into(),
            )),
            _ => Err(Error::Config(
                "give either delay_cap or bandwidth_ratio with source_dim".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n_tx: usize,
    pub users: Vec<UserSpec>,
    /// One column per user, each `n_tx` entries of `[re, im]`.
    pub channel: Vec<Vec<[f64; 2]>>,
    pub p_max: f64,
    pub blocklength: u32,
    /// Per-user noise variance; channels are divided by it. Defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: SystemSpec,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub system: SystemConfig,
    /// One table per user, of the user's kind.
    pub tables: Vec<DistortionTable>,
    pub solver: SolverSettings,
}

impl Scenario {
    pub fn new(name: impl Into<String>, system: SystemConfig, tables: Vec<DistortionTable>, solver: SolverSettings) -> Result<Self> {
        if tables.len() != system.n_users() {
            return Err(Error::Config(format!(
                "{} tables for {} users",
                tables.len(),
                system.n_users()
            )));
        }
        for (i, (t, k)) in tables.iter().zip(system.kinds()).enumerate() {
            if t.kind != *k {
                return Err(Error::Config(format!("user {i} is {k} but its table is {}", t.kind)));
            }
            t.validate()?;
        }
        Ok(Self {
            name: name.into(),
            system,
            tables,
            solver,
        })
    }

    pub fn from_file_spec(spec: &ScenarioFile, base_dir: &Path) -> Result<Self> {
        let s = &spec.system;
        let k = s.users.len();
        if s.channel.len() != k {
            return Err(Error::Config(format!("{} channel columns for {k} users", s.channel.len())));
        }
        if s.channel.iter().any(|c| c.len() != s.n_tx) {
            return Err(Error::Config(format!("every channel column needs n_tx = {} entries", s.n_tx)));
        }
        let h = DMatrix::from_fn(s.n_tx, k, |r, c| C64::new(s.channel[c][r][0], s.channel[c][r][1]));
        let caps = s
            .users
            .iter()
            .map(UserSpec::resolved_delay_cap)
            .collect::<Result<Vec<_>>>()?;
        let kinds = s.users.iter().map(|u| u.kind).collect();
        let weights = s.users.iter().map(|u| u.weight).collect();
        let noise = s.noise_var.clone().unwrap_or_else(|| vec![1.0; k]);
        let system = SystemConfig::from_raw(kinds, h, &noise, s.p_max, s.blocklength, caps, weights)?;
        let tables = s
            .users
            .iter()
            .map(|u| {
                let path = base_dir.join(&u.table);
                DistortionTable::load(&path)
                    .map_err(|e| Error::Table(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec.name.clone().unwrap_or_default(), system, tables, spec.solver)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let spec: ScenarioFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut scn = Self::from_file_spec(&spec, base)?;
        if scn.name.is_empty() {
            scn.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(scn)
    }

    pub fn with_system(&self, system: SystemConfig) -> Self {
        Self {
            system,
            ..self.clone()
        }
    }
}
