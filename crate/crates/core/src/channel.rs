//! Downlink and virtual-uplink SINR, the finite-blocklength error model, and
//! the uplink-downlink duality power transforms.
//!
//! Channels are stored noise-normalized (`h̄ = h / σ²`), so every SINR carries
//! a unit noise term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, LOG2_E};

pub type C64 = nalgebra::Complex<f64>;

/// Task a user's receiver performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Reconstructs the source (distortion = 1 − MS-SSIM).
    Data,
    /// Executes an inference task (distortion = classification error).
    Semantic,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Data => f.write_str("data"),
            TaskKind::Semantic => f.write_str("semantic"),
        }
    }
}

/// Immutable description of the multi-user MISO downlink.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    n_tx: usize,
    kinds: Vec<TaskKind>,
    /// `n_tx × K`, one normalized channel per column.
    channel: DMatrix<C64>,
    p_max: f64,
    blocklength: u32,
    delay_caps: Vec<f64>,
    weights: Vec<f64>,
}

impl SystemConfig {
    pub fn new(
        kinds: Vec<TaskKind>,
        channel: DMatrix<C64>,
        p_max: f64,
        blocklength: u32,
        delay_caps: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let k = kinds.len();
        if k == 0 {
            return Err(Error::Config("at least one user required".into()));
        }
        if channel.ncols() != k || channel.nrows() == 0 {
            return Err(Error::Config(format!(
                "channel is {}x{}, expected n_tx x {k}",
                channel.nrows(),
                channel.ncols()
            )));
        }
        for (i, col) in channel.column_iter().enumerate() {
            if col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || col.norm() == 0.0 {
                return Err(Error::Config(format!("channel of user {i} is zero or non-finite")));
            }
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::Config(format!("p_max must be positive, got {p_max}")));
        }
        if blocklength == 0 {
            return Err(Error::Config("blocklength must be >= 1".into()));
        }
        if delay_caps.len() != k || delay_caps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("one positive delay cap per user required".into()));
        }
        if weights.len() != k
            || weights.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
            || !(weights.iter().sum::<f64>() > 0.0)
        {
            return Err(Error::Config(
                "one non-negative weight per user required, not all zero".into(),
            ));
        }
        Ok(Self {
            n_tx: channel.nrows(),
            kinds,
            channel,
            p_max,
            blocklength,
            delay_caps,
            weights,
        })
    }

    /// Builds a configuration from raw channels and per-user noise powers,
    /// normalizing each column by its noise variance.
    pub fn from_raw(
        kinds: Vec<TaskKind>,
        raw_channel: DMatrix<C64>,
        noise_var: &[f64],
        p_max: f64,
        blocklength: u32,
        delay_caps: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if noise_var.len() != raw_channel.ncols() || noise_var.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("one positive noise variance per user required".into()));
        }
        let mut channel = raw_channel;
        for (mut col, s) in channel.column_iter_mut().zip(noise_var) {
            col.unscale_mut(*s);
        }
        Self::new(kinds, channel, p_max, blocklength, delay_caps, weights)
    }

    pub fn n_users(&self) -> usize {
        self.kinds.len()
    }
    pub fn n_tx(&self) -> usize {
        self.n_tx
    }
    pub fn n_data_users(&self) -> usize {
        self.kinds.iter().filter(|k| **k == TaskKind::Data).count()
    }
    pub fn n_sem_users(&self) -> usize {
        self.kinds.iter().filter(|k| **k == TaskKind::Semantic).count()
    }
    pub fn kinds(&self) -> &[TaskKind] {
        &self.kinds
    }
    pub fn channel(&self) -> &DMatrix<C64> {
        &self.channel
    }
    pub fn user_channel(&self, i: usize) -> DVector<C64> {
        self.channel.column(i).into_owned()
    }
    pub fn p_max(&self) -> f64 {
        self.p_max
    }
    pub fn blocklength(&self) -> u32 {
        self.blocklength
    }
    pub fn delay_caps(&self) -> &[f64] {
        &self.delay_caps
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_p_max(&self, p_max: f64) -> Result<Self> {
        let mut c = self.clone();
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::Config(format!("p_max must be positive, got {p_max}")));
        }
        c.p_max = p_max;
        Ok(c)
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            self.kinds.clone(),
            self.channel.clone(),
            self.p_max,
            self.blocklength,
            self.delay_caps.clone(),
            weights,
        )
    }

    pub fn with_blocklength(&self, blocklength: u32) -> Result<Self> {
        Self::new(
            self.kinds.clone(),
            self.channel.clone(),
            self.p_max,
            blocklength,
            self.delay_caps.clone(),
            self.weights.clone(),
        )
    }

    /// Unit-norm matched-filter beams `h̄_i / ‖h̄_i‖`.
    pub fn matched_filter_beams(&self) -> Vec<DVector<C64>> {
        self.channel.column_iter().map(|c| c.normalize()).collect()
    }

    fn check_beams(&self, beams: &[DVector<C64>]) -> Result<()> {
        if beams.len() != self.n_users() || beams.iter().any(|w| w.len() != self.n_tx) {
            return Err(Error::Config(format!(
                "expected {} beams of length {}",
                self.n_users(),
                self.n_tx
            )));
        }
        Ok(())
    }

    fn check_powers(&self, powers: &[f64]) -> Result<()> {
        if powers.len() != self.n_users() {
            return Err(Error::Config(format!(
                "expected {} powers, got {}",
                self.n_users(),
                powers.len()
            )));
        }
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("powers must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Per-user decision variables of the joint problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub source_rates: Vec<f64>,
    pub channel_rates: Vec<f64>,
    pub powers: Vec<f64>,
    pub beams: Vec<DVector<C64>>,
}

impl Allocation {
    /// Checks the budget, beam norms and delay caps against `cfg`.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let k = cfg.n_users();
        if self.source_rates.len() != k || self.channel_rates.len() != k {
            return Err(Error::Config("rate vectors do not match user count".into()));
        }
        cfg.check_powers(&self.powers)?;
        cfg.check_beams(&self.beams)?;
        let total: f64 = self.powers.iter().sum();
        if total > cfg.p_max() * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Config(format!("total power {total} exceeds budget {}", cfg.p_max())));
        }
        for (i, w) in self.beams.iter().enumerate() {
            if (w.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("beam {i} is not unit norm")));
            }
        }
        for i in 0..k {
            let (rs, rc) = (self.source_rates[i], self.channel_rates[i]);
            if !(rs > 0.0 && rc > 0.0) || rs / rc > cfg.delay_caps()[i] * (1.0 + 1e-12) {
                return Err(Error::Config(format!("rates of user {i} violate the delay cap")));
            }
        }
        Ok(())
    }
}

/// Link-level figures of merit for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub sinr: f64,
    pub packet_error: f64,
    pub log10_ber: f64,
    pub distortion: f64,
}

/// `[k, l] = |h̄_kᴴ w_l|²`.
pub fn gain_matrix(cfg: &SystemConfig, beams: &[DVector<C64>]) -> Result<DMatrix<f64>> {
    cfg.check_beams(beams)?;
    let k = cfg.n_users();
    Ok(DMatrix::from_fn(k, k, |r, c| {
        cfg.channel.column(r).dotc(&beams[c]).norm_sqr()
    }))
}

/// Downlink SINR `p_i G_ii / (Σ_{j≠i} p_j G_ij + 1)`.
pub fn sinr_downlink(cfg: &SystemConfig, powers: &[f64], beams: &[DVector<C64>]) -> Result<Vec<f64>> {
    cfg.check_powers(powers)?;
    let g = gain_matrix(cfg, beams)?;
    Ok(sinr_downlink_from_gains(&g, powers))
}

pub(crate) fn sinr_downlink_from_gains(g: &DMatrix<f64>, powers: &[f64]) -> Vec<f64> {
    let k = powers.len();
    (0..k)
        .map(|i| {
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| powers[j] * g[(i, j)]).sum();
            powers[i] * g[(i, i)] / (interference + 1.0)
        })
        .collect()
}

/// Virtual-uplink SINR `q_i G_ii / (Σ_{j≠i} q_j G_ji + 1)`; interference
/// arrives on the other users' channels through receive beam `i`.
pub fn sinr_uplink(cfg: &SystemConfig, q: &[f64], beams_u: &[DVector<C64>]) -> Result<Vec<f64>> {
    cfg.check_powers(q)?;
    let g = gain_matrix(cfg, beams_u)?;
    Ok(sinr_uplink_from_gains(&g, q))
}

pub(crate) fn sinr_uplink_from_gains(g: &DMatrix<f64>, q: &[f64]) -> Vec<f64> {
    let k = q.len();
    (0..k)
        .map(|i| {
            let interference: f64 = (0..k).filter(|&j| j != i).map(|j| q[j] * g[(j, i)]).sum();
            q[i] * g[(i, i)] / (interference + 1.0)
        })
        .collect()
}

/// Finite-blocklength evaluation of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockErrorEval {
    /// Argument of `Q`; `None` when the SINR is zero.
    pub q_arg: Option<f64>,
    pub packet_error: f64,
    pub log10_ber: f64,
    /// Set when `gamma == 0` and the dispersion term vanishes.
    pub degenerate: bool,
}

/// `1 - 1/(1+γ)²`, the channel dispersion in nats².
pub fn dispersion(gamma: f64) -> f64 {
    gamma * (2.0 + gamma) / ((1.0 + gamma) * (1.0 + gamma))
}

/// Normal-approximation argument `√L (log₂(1+γ) − R_c) / (√V · log₂e)`.
pub fn q_argument(gamma: f64, r_c: f64, blocklength: u32) -> f64 {
    let l = blocklength as f64;
    l.sqrt() * (numerics::log2_1p(gamma) - r_c) / (dispersion(gamma).sqrt() * LOG2_E)
}

fn check_link(gamma: f64, r_c: f64, blocklength: u32) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Precondition(format!("SINR must be finite and >= 0, got {gamma}")));
    }
    if !(r_c > 0.0 && r_c.is_finite()) {
        return Err(Error::Precondition(format!("channel rate must be positive, got {r_c}")));
    }
    if blocklength == 0 {
        return Err(Error::Precondition("blocklength must be >= 1".into()));
    }
    Ok(())
}

/// Packet error and log10 bit error for one link.
pub fn evaluate_link(gamma: f64, r_c: f64, blocklength: u32) -> Result<BlockErrorEval> {
    check_link(gamma, r_c, blocklength)?;
    let prefix = -(r_c * blocklength as f64).log10();
    if gamma == 0.0 {
        return Ok(BlockErrorEval {
            q_arg: None,
            packet_error: 1.0,
            log10_ber: prefix,
            degenerate: true,
        });
    }
    let x = q_argument(gamma, r_c, blocklength);
    Ok(BlockErrorEval {
        q_arg: Some(x),
        packet_error: numerics::q_function(x)?,
        log10_ber: prefix + numerics::log_q(x)? * std::f64::consts::LOG10_E,
        degenerate: false,
    })
}

/// Average packet error probability under the normal approximation.
pub fn packet_error(gamma: f64, r_c: f64, blocklength: u32) -> Result<f64> {
    Ok(evaluate_link(gamma, r_c, blocklength)?.packet_error)
}

/// Base-10 logarithm of the bit error rate: packet error spread over the
/// `R_c·L` message bits of a codeword.
pub fn log10_ber(gamma: f64, r_c: f64, blocklength: u32) -> Result<f64> {
    Ok(evaluate_link(gamma, r_c, blocklength)?.log10_ber)
}

/// Matrix `Ψ` with `Ψ p = 1` reproducing the target SINRs `gamma_u` on the
/// downlink: diagonal `G_kk / γ_k`, off-diagonal `−|h̄_kᴴ w_l|²`.
pub fn psi_matrix(cfg: &SystemConfig, beams_u: &[DVector<C64>], gamma_u: &[f64]) -> Result<DMatrix<f64>> {
    let g = gain_matrix(cfg, beams_u)?;
    duality_matrix(&g, gamma_u, false)
}

/// Matrix `Φ` with `Φ q = 1` reproducing the target SINRs `gamma` on the
/// virtual uplink: diagonal `G_kk / γ_k`, off-diagonal `−|h̄_lᴴ w_k|²`.
pub fn phi_matrix(cfg: &SystemConfig, beams: &[DVector<C64>], gamma: &[f64]) -> Result<DMatrix<f64>> {
    let g = gain_matrix(cfg, beams)?;
    duality_matrix(&g, gamma, true)
}

fn duality_matrix(g: &DMatrix<f64>, gamma: &[f64], transpose: bool) -> Result<DMatrix<f64>> {
    let k = g.nrows();
    if gamma.len() != k || gamma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::DualityInfeasible("SINR targets must be strictly positive".into()));
    }
    Ok(DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            g[(r, r)] / gamma[r]
        } else if transpose {
            -g[(c, r)]
        } else {
            -g[(r, c)]
        }
    }))
}

/// Solves `M x = 1` on the users with positive SINR; inactive users get zero.
fn solve_active(g: &DMatrix<f64>, gamma: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let active: Vec<usize> = (0..gamma.len()).filter(|&i| gamma[i] > 0.0).collect();
    let mut out = vec![0.0; gamma.len()];
    if active.is_empty() {
        return Ok(out);
    }
    let sub = g.select_rows(&active).select_columns(&active);
    let targets: Vec<f64> = active.iter().map(|&i| gamma[i]).collect();
    let m = duality_matrix(&sub, &targets, transpose)?;
    let rhs = DVector::from_element(active.len(), 1.0);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DualityInfeasible("singular duality matrix".into()))?;
    for (slot, &i) in active.iter().enumerate() {
        let v = x[slot];
        if !v.is_finite() || v < -1e-12 * (1.0 + x.amax()) {
            return Err(Error::DualityInfeasible(format!(
                "negative power {v} for user {i}"
            )));
        }
        out[i] = v.max(0.0);
    }
    Ok(out)
}

/// Downlink powers achieving the uplink SINRs of `(q, beams_u)` with the same
/// beams; the total power is conserved.
pub fn uplink_to_downlink_power(cfg: &SystemConfig, beams_u: &[DVector<C64>], q: &[f64]) -> Result<Vec<f64>> {
    cfg.check_powers(q)?;
    let g = gain_matrix(cfg, beams_u)?;
    let gamma_u = sinr_uplink_from_gains(&g, q);
    solve_active(&g, &gamma_u, false)
}

/// Uplink powers achieving the downlink SINRs of `(p, beams)`.
pub fn downlink_to_uplink_power(cfg: &SystemConfig, beams: &[DVector<C64>], p: &[f64]) -> Result<Vec<f64>> {
    cfg.check_powers(p)?;
    let g = gain_matrix(cfg, beams)?;
    let gamma = sinr_downlink_from_gains(&g, p);
    solve_active(&g, &gamma, true)
}
