//! Per-user source/channel rate selection with fixed power and beams.
//!
//! With the delay cap active (`R_c = R_s / T`) the distortion is a function of
//! the source rate alone. It is smooth between tabulated rates and has kinks
//! at them; projected subgradient descent with a backtracking line search
//! walks it from the lowest rate.

use serde::Serialize;

use crate::channel::{self, dispersion};
use crate::distortion::{self, DistortionTable, LogisticRow};
use crate::error::Result;
use crate::numerics::{self, LOG2_E};

/// Line-search and stopping knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    /// Stop once the fractional objective decrease falls below this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant of the backtracking rule.
    pub armijo: f64,
    pub shrink: f64,
    /// First trial displacement as a fraction of the table's rate span.
    pub initial_step: f64,
    /// Restart from every tabulated rate and keep the best result.
    pub multistart: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iters: 500,
            armijo: 0.3,
            shrink: 0.5,
            initial_step: 0.05,
            multistart: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSolution {
    pub source_rate: f64,
    pub channel_rate: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Accepted `(R_s, objective)` iterates, starting point first.
    pub trajectory: Vec<(f64, f64)>,
}

/// Link parameters the rate subproblem is solved against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub gamma: f64,
    pub delay_cap: f64,
    pub blocklength: u32,
}

impl LinkState {
    pub fn new(gamma: f64, delay_cap: f64, blocklength: u32) -> Self {
        Self {
            gamma,
            delay_cap,
            blocklength,
        }
    }

    fn log10_ber(&self, r_s: f64) -> Result<f64> {
        channel::log10_ber(self.gamma, r_s / self.delay_cap, self.blocklength)
    }

    /// `d ρ̃ / d R_s` with `R_c = R_s / T`.
    fn log10_ber_slope(&self, r_s: f64) -> Result<f64> {
        let r_c = r_s / self.delay_cap;
        let mut d = -std::f64::consts::LOG10_E / r_c;
        if self.gamma > 0.0 {
            let x = channel::q_argument(self.gamma, r_c, self.blocklength);
            let dx = -(self.blocklength as f64).sqrt() / (LOG2_E * dispersion(self.gamma).sqrt());
            d += std::f64::consts::LOG10_E * numerics::log_q_derivative(x)? * dx;
        }
        Ok(d / self.delay_cap)
    }
}

/// Distortion at source rate `r_s` with `R_c = r_s / T`.
pub fn objective_at(table: &DistortionTable, link: LinkState, r_s: f64) -> Result<f64> {
    distortion::e2e_distortion(table, r_s, link.log10_ber(r_s)?)
}

/// Derivative of the objective using the parameter slopes of segment `seg`.
fn segment_derivative(table: &DistortionTable, link: LinkState, seg: usize, r_s: f64) -> Result<f64> {
    let rows = table.rows();
    let (a, b) = (&rows[seg], &rows[seg + 1]);
    let width = b.rate - a.rate;
    let lambda = (r_s - a.rate) / width;
    let p: LogisticRow = distortion::blend(a, b, lambda);
    let dfloor = (b.floor - a.floor) / width;
    let dspan = (b.span - a.span) / width;
    let dslope = (b.slope - a.slope) / width;
    let dmid = (b.midpoint - a.midpoint) / width;

    let ber = link.log10_ber(r_s)?;
    let dber = link.log10_ber_slope(r_s)?;
    let s = distortion::sigmoid(p.slope * (ber - p.midpoint));
    let dz = dslope * (ber - p.midpoint) + p.slope * (dber - dmid);
    Ok(dfloor + dspan * s + p.span * s * (1.0 - s) * dz)
}

/// Subgradient of [`objective_at`].
///
/// Between tabulated rates this is the derivative. At a tabulated rate it is
/// the right derivative at the lowest rate, the left derivative at the highest,
/// and the mean of the two one-sided derivatives elsewhere.
pub fn subgradient_at(table: &DistortionTable, link: LinkState, r_s: f64) -> Result<f64> {
    let br = table.bracket(r_s)?;
    let last = table.rows().len() - 1;
    match br.exact {
        None => segment_derivative(table, link, br.lower, r_s),
        Some(0) => segment_derivative(table, link, 0, r_s),
        Some(n) if n == last => segment_derivative(table, link, last - 1, r_s),
        Some(n) => {
            let left = segment_derivative(table, link, n - 1, r_s)?;
            let right = segment_derivative(table, link, n, r_s)?;
            Ok(0.5 * (left + right))
        }
    }
}

/// Runs the descent from `start` (clamped to the table range).
pub fn optimize_rate_from(
    table: &DistortionTable,
    link: LinkState,
    start: f64,
    opts: &RateOptions,
) -> Result<RateSolution> {
    let (lo, hi) = (table.min_rate(), table.max_rate());
    let step0 = opts.initial_step * (hi - lo);
    let mut r = start.clamp(lo, hi);
    let mut f = objective_at(table, link, r)?;
    let mut trajectory = vec![(r, f)];
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let d = subgradient_at(table, link, r)?;
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let mut alpha = step0 / d.abs();
        let mut accepted = None;
        for _ in 0..64 {
            let cand = (r - alpha * d).clamp(lo, hi);
            if cand == r {
                break;
            }
            let fc = objective_at(table, link, cand)?;
            if fc <= f + opts.armijo * d * (cand - r) {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= opts.shrink;
        }
        let Some((cand, fc)) = accepted else { break };
        let decrease = (f - fc) / f.abs().max(f64::MIN_POSITIVE);
        r = cand;
        f = fc;
        trajectory.push((r, f));
        if decrease < opts.epsilon {
            break;
        }
    }

    Ok(RateSolution {
        source_rate: r,
        channel_rate: r / link.delay_cap,
        objective: f,
        iterations,
        trajectory,
    })
}

/// Source/channel rates minimizing one user's distortion, starting from the
/// lowest tabulated rate (or from every tabulated rate with `multistart`).
pub fn optimize_rate(table: &DistortionTable, link: LinkState, opts: &RateOptions) -> Result<RateSolution> {
    let mut best = optimize_rate_from(table, link, table.min_rate(), opts)?;
    if opts.multistart {
        for start in table.rates().skip(1) {
            let sol = optimize_rate_from(table, link, start, opts)?;
            if sol.objective < best.objective {
                best = sol;
            }
        }
    }
    Ok(best)
}
