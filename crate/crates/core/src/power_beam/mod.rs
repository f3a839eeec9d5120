//! Joint downlink power allocation and beamforming through the virtual uplink.
//!
//! The downlink problem is mapped to its dual uplink, where receive beams
//! decouple (MMSE is optimal per user) and powers are found by SCA. The
//! uplink solution is mapped back with the same beams, preserving every SINR.

pub mod barrier;
mod mmse;
pub mod sca;

use nalgebra::DVector;
use serde::Serialize;

pub use barrier::{barrier_solve, BarrierOptions, BarrierSolution, ConvexProgram, SmoothConvex, Univariate};
pub use mmse::mmse_beam;
pub use sca::{PowerProblem, ScaOptions, ScaOutcome, ScaPoint};

use crate::channel::{downlink_to_uplink_power, sinr_downlink, uplink_to_downlink_power, SystemConfig, C64};
use crate::distortion::DistortionTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBeamOptions {
    pub sca: ScaOptions,
    /// Fractional-decrease threshold of the beam/power alternation.
    pub epsilon: f64,
    pub max_outer: usize,
}

impl Default for PowerBeamOptions {
    fn default() -> Self {
        Self {
            sca: ScaOptions::default(),
            epsilon: 1e-4,
            max_outer: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBeamSolution {
    pub powers: Vec<f64>,
    #[serde(skip)]
    pub beams: Vec<DVector<C64>>,
    pub uplink_powers: Vec<f64>,
    #[serde(skip)]
    pub uplink_beams: Vec<DVector<C64>>,
    /// Weighted-sum distortion at the start and after each outer iteration.
    pub objective_trajectory: Vec<f64>,
    pub converged: bool,
    pub objective: f64,
}

/// Equal power split with matched-filter beams.
pub fn default_start(cfg: &SystemConfig) -> (Vec<f64>, Vec<DVector<C64>>) {
    let k = cfg.n_users();
    (vec![cfg.p_max() / k as f64; k], cfg.matched_filter_beams())
}

/// Alternates MMSE receive beams and SCA power allocation on the virtual
/// uplink, starting from the downlink point `(p_init, w_init)`.
pub fn joint_power_beam(
    cfg: &SystemConfig,
    tables: &[DistortionTable],
    source_rates: &[f64],
    channel_rates: &[f64],
    p_init: &[f64],
    w_init: &[DVector<C64>],
    opts: &PowerBeamOptions,
) -> Result<PowerBeamSolution> {
    let q0 = match downlink_to_uplink_power(cfg, w_init, p_init) {
        Ok(q) => q,
        Err(Error::DualityInfeasible(_)) => {
            let (p, w) = default_start(cfg);
            downlink_to_uplink_power(cfg, &w, &p)?
        }
        Err(e) => return Err(e),
    };
    let mut q = q0;
    let mut beams_u = w_init.to_vec();
    let mut f = PowerProblem::new(cfg, tables, source_rates, channel_rates, &beams_u)?.true_objective(&q)?;
    let mut trajectory = vec![f];
    let mut converged = false;

    for _ in 0..opts.max_outer {
        let w = mmse_beam(cfg, &q)?;
        let prob = PowerProblem::new(cfg, tables, source_rates, channel_rates, &w)?;
        let out = prob.sca_power(&q, &opts.sca)?;
        let fc = prob.true_objective(&out.q)?;
        if fc > f {
            // MMSE and SCA steps are both non-increasing; guard against
            // round-off anyway
            converged = true;
            break;
        }
        let decrease = (f - fc) / f.abs().max(f64::MIN_POSITIVE);
        q = out.q;
        beams_u = w;
        f = fc;
        trajectory.push(f);
        if decrease < opts.epsilon {
            converged = true;
            break;
        }
    }

    let powers = uplink_to_downlink_power(cfg, &beams_u, &q)?;
    let prob = PowerProblem::new(cfg, tables, source_rates, channel_rates, &beams_u)?;
    let up = prob.sinr(&q);
    let down = sinr_downlink(cfg, &powers, &beams_u)?;
    for (a, b) in up.iter().zip(&down) {
        if (a - b).abs() > 1e-8 * a.abs().max(1.0) {
            return Err(Error::DualityInfeasible(format!(
                "uplink SINR {a} not preserved on the downlink ({b})"
            )));
        }
    }
    Ok(PowerBeamSolution {
        powers,
        beams: beams_u.clone(),
        uplink_powers: q,
        uplink_beams: beams_u,
        objective_trajectory: trajectory,
        converged,
        objective: f,
    })
}
