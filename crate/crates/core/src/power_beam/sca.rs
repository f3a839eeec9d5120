//! Successive convex approximation for the virtual-uplink power allocation.
//!
//! With receive beams fixed, user `i`'s logistic distortion is rewritten with
//! slack variables:
//!
//! ```text
//! minimize   Σ β_i (floor_i + span_i / (1 + c_i t_i))
//! subject to ln t_i + a_i (log10(1/(R_c,i L)) + log10 Q(ρ̂_i)) <= 0
//!            ρ̂_i g_i <= √L/log2(e) · (log2(1 + ζ_i) − R_c,i)
//!            1 − 1/(1 + ξ_i)² − g_i² <= 0
//!            ζ_i (Σ_{j≠i} q_j a_ji + 1) <= q_i b_i <= ξ_i (Σ_{j≠i} q_j a_ji + 1)
//!            Σ q <= P_max, box bounds
//! ```
//!
//! with `c_i = e^{a_i m_i}` (slope `a`, midpoint `m`), `a_ji = |h̄_jᴴ w_i|²`
//! and `b_i = |h̄_iᴴ w_i|²`. Each non-convex left side is replaced by a convex
//! majorant that is tight at the current point, and the resulting convex
//! program is solved with the embedded barrier method.
//!
//! Inside the subproblem `t` is carried as the ratio `t / t⁽ⁿ⁾` and `ρ̂` as the
//! offset `ρ̂ − ρ̂⁽ⁿ⁾`. Both are affine changes of variable, so convexity is
//! untouched, but `t` routinely spans hundreds of orders of magnitude.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::barrier::{barrier_solve, BarrierOptions, ConvexProgram, SmoothConvex, Univariate};
use crate::channel::{self, dispersion, gain_matrix, sinr_uplink_from_gains, SystemConfig, C64};
use crate::distortion::{self, DistortionTable, LogisticRow};
use crate::error::{Error, Result};
use crate::numerics::{self, tangent_l1, tangent_l2, tangent_l3, LOG2_E};

const LOG10_E: f64 = std::f64::consts::LOG10_E;

/// Smallest upper-SINR slack used when anchoring a user with (near) zero
/// power; keeps the dispersion slack away from zero.
const XI_FLOOR: f64 = 1e-6;

/// Operating point of the convexified subproblem. `log_t` is `ln t_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaPoint {
    pub q: Vec<f64>,
    pub log_t: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub g: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
}

impl ScaPoint {
    pub fn t(&self) -> Vec<f64> {
        self.log_t.iter().map(|v| v.exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    /// Fractional-decrease stopping threshold.
    pub epsilon: f64,
    pub max_iters: usize,
    pub barrier: BarrierOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 50,
            barrier: BarrierOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaOutcome {
    pub q: Vec<f64>,
    /// True objective at the start and after each accepted iteration.
    pub objective_trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Why the loop ended early, if it did.
    pub stopped_by: Option<String>,
}

/// The virtual-uplink power problem for fixed rates and receive beams.
#[derive(Debug, Clone)]
pub struct PowerProblem {
    p_max: f64,
    blocklength: u32,
    weights: Vec<f64>,
    rows: Vec<LogisticRow>,
    channel_rates: Vec<f64>,
    /// `[j, i] = |h̄_jᴴ w_i|²`.
    gains: DMatrix<f64>,
}

/// Left sides of the five non-convex constraints, in original variables.
pub mod constraint_lhs {
    use super::*;

    /// `ln t + a (log10(1/(R_c L)) + log10 Q(ρ̂))`
    pub fn log_t(log_t: f64, rho_hat: f64, slope: f64, r_c: f64, blocklength: u32) -> f64 {
        log_t + slope * (-(r_c * blocklength as f64).log10() + numerics::log_q(rho_hat).unwrap() * LOG10_E)
    }

    /// Majorant of [`log_t`] tight at `(ln t⁽ⁿ⁾, ρ̂⁽ⁿ⁾)`: `ln t` is bounded by its
    /// tangent and `log Q` (concave) by its linearization.
    pub fn log_t_convex(log_t0: f64, rho0: f64, log_t: f64, rho_hat: f64, slope: f64, r_c: f64, blocklength: u32) -> f64 {
        let q_lin = (numerics::log_q_derivative(rho0).unwrap() * (rho_hat - rho0) + numerics::log_q(rho0).unwrap()) * LOG10_E;
        (log_t - log_t0).exp() + log_t0 - 1.0 + slope * (-(r_c * blocklength as f64).log10() + q_lin)
    }

    fn capacity_term(zeta: f64, r_c: f64, blocklength: u32) -> f64 {
        (blocklength as f64).sqrt() / LOG2_E * (numerics::log2_1p(zeta) - r_c)
    }

    /// `ρ̂ g − √L/log2(e) (log2(1+ζ) − R_c)`
    pub fn rho_hat(rho_hat: f64, g: f64, zeta: f64, r_c: f64, blocklength: u32) -> f64 {
        rho_hat * g - capacity_term(zeta, r_c, blocklength)
    }

    pub fn rho_hat_convex(rho0: f64, g0: f64, rho_hat: f64, g: f64, zeta: f64, r_c: f64, blocklength: u32) -> f64 {
        let s = rho_hat + g;
        0.25 * (s * s - tangent_l2(rho0, g0, rho_hat, g)) - capacity_term(zeta, r_c, blocklength)
    }

    /// `1 − 1/(1+ξ)² − g²`
    pub fn dispersion(xi: f64, g: f64) -> f64 {
        1.0 - 1.0 / ((1.0 + xi) * (1.0 + xi)) - g * g
    }

    pub fn dispersion_convex(xi0: f64, g0: f64, xi: f64, g: f64) -> f64 {
        1.0 + tangent_l3(xi0, xi) - (g0 * g0 + 2.0 * g0 * (g - g0))
    }

    /// `Σ_{j≠i} ζ_i q_j a_ji + ζ_i − q_i b_i`
    pub fn sinr_lower(i: usize, zeta: f64, q: &[f64], gains: &DMatrix<f64>) -> f64 {
        let interf: f64 = (0..q.len()).filter(|&j| j != i).map(|j| zeta * q[j] * gains[(j, i)]).sum();
        interf + zeta - q[i] * gains[(i, i)]
    }

    pub fn sinr_lower_convex(i: usize, zeta0: f64, q0: &[f64], zeta: f64, q: &[f64], gains: &DMatrix<f64>) -> f64 {
        let interf: f64 = (0..q.len())
            .filter(|&j| j != i)
            .map(|j| {
                let s = zeta + q[j];
                0.25 * (s * s - tangent_l2(zeta0, q0[j], zeta, q[j])) * gains[(j, i)]
            })
            .sum();
        interf + zeta - q[i] * gains[(i, i)]
    }

    /// `−Σ_{j≠i} ξ_i q_j a_ji − ξ_i + q_i b_i`
    pub fn sinr_upper(i: usize, xi: f64, q: &[f64], gains: &DMatrix<f64>) -> f64 {
        let interf: f64 = (0..q.len()).filter(|&j| j != i).map(|j| xi * q[j] * gains[(j, i)]).sum();
        -interf - xi + q[i] * gains[(i, i)]
    }

    pub fn sinr_upper_convex(i: usize, xi0: f64, q0: &[f64], xi: f64, q: &[f64], gains: &DMatrix<f64>) -> f64 {
        let interf: f64 = (0..q.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d = xi - q[j];
                0.25 * (d * d - tangent_l1(xi0, q0[j], xi, q[j])) * gains[(j, i)]
            })
            .sum();
        interf - xi + q[i] * gains[(i, i)]
    }
}

/// Index layout of the subproblem's decision vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    k: usize,
}

impl Layout {
    fn q(&self, i: usize) -> usize {
        i
    }
    fn t_ratio(&self, i: usize) -> usize {
        self.k + i
    }
    fn d_rho(&self, i: usize) -> usize {
        2 * self.k + i
    }
    fn g(&self, i: usize) -> usize {
        3 * self.k + i
    }
    fn zeta(&self, i: usize) -> usize {
        4 * self.k + i
    }
    fn xi(&self, i: usize) -> usize {
        5 * self.k + i
    }
    fn len(&self) -> usize {
        6 * self.k
    }
}

impl PowerProblem {
    /// `source_rates` select the logistic parameters; `channel_rates` the
    /// finite-blocklength operating point.
    pub fn new(
        cfg: &SystemConfig,
        tables: &[DistortionTable],
        source_rates: &[f64],
        channel_rates: &[f64],
        beams_u: &[DVector<C64>],
    ) -> Result<Self> {
        let k = cfg.n_users();
        if tables.len() != k || source_rates.len() != k || channel_rates.len() != k {
            return Err(Error::Config("tables and rates must be given per user".into()));
        }
        let rows = tables
            .iter()
            .zip(source_rates)
            .map(|(t, &r)| distortion::interpolate(t, r))
            .collect::<Result<Vec<_>>>()?;
        if channel_rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("channel rates must be positive".into()));
        }
        Ok(Self {
            p_max: cfg.p_max(),
            blocklength: cfg.blocklength(),
            weights: cfg.weights().to_vec(),
            rows,
            channel_rates: channel_rates.to_vec(),
            gains: gain_matrix(cfg, beams_u)?,
        })
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    /// Logistic parameters at each user's source rate.
    pub fn rows(&self) -> &[LogisticRow] {
        &self.rows
    }

    pub fn channel_rates(&self) -> &[f64] {
        &self.channel_rates
    }

    pub fn blocklength(&self) -> u32 {
        self.blocklength
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn sinr(&self, q: &[f64]) -> Vec<f64> {
        sinr_uplink_from_gains(&self.gains, q)
    }

    /// Per-user distortions at uplink powers `q`.
    pub fn distortions(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.sinr(q)
            .iter()
            .zip(&self.rows)
            .zip(&self.channel_rates)
            .map(|((&g, row), &rc)| Ok(row.evaluate(channel::log10_ber(g, rc, self.blocklength)?)))
            .collect()
    }

    /// Weighted-sum distortion at uplink powers `q`.
    pub fn true_objective(&self, q: &[f64]) -> Result<f64> {
        Ok(self.distortions(q)?.iter().zip(&self.weights).map(|(d, b)| d * b).sum())
    }

    /// SINR at full budget, the upper bound for both SINR slacks.
    fn sinr_cap(&self, i: usize) -> f64 {
        self.p_max * self.gains[(i, i)]
    }

    /// Slacks set to the values implied by `q`, so every convexified
    /// constraint is tight there.
    pub fn anchor(&self, q: &[f64]) -> Result<ScaPoint> {
        let k = self.n_users();
        let gamma = self.sinr(q);
        let mut p = ScaPoint {
            q: q.to_vec(),
            log_t: vec![0.0; k],
            rho_hat: vec![0.0; k],
            g: vec![0.0; k],
            zeta: vec![0.0; k],
            xi: vec![0.0; k],
        };
        for i in 0..k {
            let cap = self.sinr_cap(i);
            let zeta = gamma[i].min(cap);
            let xi = gamma[i].max(XI_FLOOR).min(cap.max(XI_FLOOR));
            let g = dispersion(xi).sqrt();
            let rho = (self.blocklength as f64).sqrt() * (numerics::log2_1p(zeta) - self.channel_rates[i]) / (LOG2_E * g);
            let ber = -(self.channel_rates[i] * self.blocklength as f64).log10() + numerics::log_q(rho)? * LOG10_E;
            p.zeta[i] = zeta;
            p.xi[i] = xi;
            p.g[i] = g;
            p.rho_hat[i] = rho;
            p.log_t[i] = -self.rows[i].slope * ber;
        }
        Ok(p)
    }

    /// Convex program built at `theta`, in subproblem coordinates.
    fn build(&self, theta: &ScaPoint) -> Result<(ConvexProgram, Layout, Vec<f64>)> {
        let k = self.n_users();
        let lay = Layout { k };
        let n = lay.len();
        let l_sqrt = (self.blocklength as f64).sqrt();
        let cap_scale = l_sqrt / LOG2_E;

        let mut objective = SmoothConvex::default();
        for i in 0..k {
            let row = &self.rows[i];
            let beta = self.weights[i];
            objective.constant += beta * row.floor;
            if row.span > 0.0 {
                // c·t = e^{a m + ln t⁽ⁿ⁾} · (t / t⁽ⁿ⁾)
                objective.add_univariate(
                    lay.t_ratio(i),
                    Univariate::Reciprocal {
                        span: beta * row.span,
                        log_gain: row.slope * row.midpoint + theta.log_t[i],
                    },
                );
            }
        }

        let mut cons = Vec::new();
        let mut budget = SmoothConvex::constant(-self.p_max);
        for i in 0..k {
            budget.add_linear(lay.q(i), 1.0);
        }
        cons.push(budget);

        for i in 0..k {
            let row = &self.rows[i];
            let rc = self.channel_rates[i];
            let (rho0, g0, zeta0, xi0) = (theta.rho_hat[i], theta.g[i], theta.zeta[i], theta.xi[i]);

            // log-t majorant; ln t⁽ⁿ⁾ may differ from its anchored value, so
            // keep the full constant
            let ber0 = -(rc * self.blocklength as f64).log10() + numerics::log_q(rho0)? * LOG10_E;
            let dq = numerics::log_q_derivative(rho0)? * LOG10_E;
            let mut c = SmoothConvex::constant(theta.log_t[i] - 1.0 + row.slope * ber0);
            c.add_linear(lay.t_ratio(i), 1.0).add_linear(lay.d_rho(i), row.slope * dq);
            cons.push(c);

            // ρ̂ g ≤ ρ̂⁰g⁰ + g⁰Δρ + ρ̂⁰Δg + ¼(Δρ + Δg)²
            let mut c = SmoothConvex::constant(cap_scale * rc);
            c.add_linear(lay.d_rho(i), g0)
                .add_linear(lay.g(i), rho0)
                .add_square(0.25, vec![(lay.d_rho(i), 1.0), (lay.g(i), 1.0)], -g0)
                .add_univariate(lay.zeta(i), Univariate::NegLog1p { scale: cap_scale / std::f64::consts::LN_2 });
            cons.push(c);

            // 1 + l3(ξ⁰, ξ) − g⁰² − 2g⁰(g − g⁰)
            let b = 1.0 + xi0;
            let k3 = 2.0 / (b * b * b);
            let mut c = SmoothConvex::constant(1.0 - k3 * xi0 - 1.0 / (b * b) + g0 * g0);
            c.add_linear(lay.xi(i), k3).add_linear(lay.g(i), -2.0 * g0);
            cons.push(c);

            // ζ q_j ≤ q⁰ζ + ζ⁰q − ζ⁰q⁰ + ¼(Δζ + Δq)²
            let mut lower = SmoothConvex::default();
            // −ξ q_j ≤ −q⁰ξ − ξ⁰q + ξ⁰q⁰ + ¼(Δξ − Δq)²
            let mut upper = SmoothConvex::default();
            for j in (0..k).filter(|&j| j != i) {
                let a = self.gains[(j, i)];
                let q0 = theta.q[j];
                lower.constant -= a * zeta0 * q0;
                lower
                    .add_linear(lay.zeta(i), a * q0)
                    .add_linear(lay.q(j), a * zeta0)
                    .add_square(0.25 * a, vec![(lay.zeta(i), 1.0), (lay.q(j), 1.0)], -zeta0 - q0);
                upper.constant += a * xi0 * q0;
                upper
                    .add_linear(lay.xi(i), -a * q0)
                    .add_linear(lay.q(j), -a * xi0)
                    .add_square(0.25 * a, vec![(lay.xi(i), 1.0), (lay.q(j), -1.0)], -xi0 + q0);
            }
            let bii = self.gains[(i, i)];
            lower.add_linear(lay.zeta(i), 1.0).add_linear(lay.q(i), -bii);
            upper.add_linear(lay.xi(i), -1.0).add_linear(lay.q(i), bii);
            cons.push(lower);
            cons.push(upper);

            // boxes
            let cap = self.sinr_cap(i);
            cons.push(SmoothConvex::affine1(lay.t_ratio(i), -1.0, 0.0));
            cons.push(SmoothConvex::affine1(lay.q(i), -1.0, 0.0));
            cons.push(SmoothConvex::affine1(lay.g(i), -1.0, 0.0));
            cons.push(SmoothConvex::affine1(lay.g(i), 1.0, -1.0));
            cons.push(SmoothConvex::affine1(lay.zeta(i), -1.0, 0.0));
            cons.push(SmoothConvex::affine1(lay.zeta(i), 1.0, -cap));
            cons.push(SmoothConvex::affine1(lay.xi(i), -1.0, 0.0));
            cons.push(SmoothConvex::affine1(lay.xi(i), 1.0, -cap.max(XI_FLOOR)));
        }

        let mut hint = vec![0.0; n];
        for i in 0..k {
            hint[lay.q(i)] = theta.q[i];
            hint[lay.t_ratio(i)] = 1.0;
            hint[lay.d_rho(i)] = 0.0;
            hint[lay.g(i)] = theta.g[i];
            hint[lay.zeta(i)] = theta.zeta[i];
            hint[lay.xi(i)] = theta.xi[i];
        }
        Ok((
            ConvexProgram {
                n_vars: n,
                objective,
                constraints: cons,
            },
            lay,
            hint,
        ))
    }

    /// Value of the convexified subproblem's objective and constraint left
    /// sides at a point in original coordinates (used to check majorization).
    pub fn convexified_lhs(&self, theta: &ScaPoint, point: &ScaPoint) -> Result<Vec<f64>> {
        let (prog, lay, _) = self.build(theta)?;
        let x = self.to_subproblem(theta, point, lay);
        prog.constraints
            .iter()
            .map(|c| c.value(&x).ok_or_else(|| Error::Precondition("point outside constraint domain".into())))
            .collect()
    }

    fn to_subproblem(&self, theta: &ScaPoint, p: &ScaPoint, lay: Layout) -> Vec<f64> {
        let mut x = vec![0.0; lay.len()];
        for i in 0..lay.k {
            x[lay.q(i)] = p.q[i];
            x[lay.t_ratio(i)] = (p.log_t[i] - theta.log_t[i]).exp();
            x[lay.d_rho(i)] = p.rho_hat[i] - theta.rho_hat[i];
            x[lay.g(i)] = p.g[i];
            x[lay.zeta(i)] = p.zeta[i];
            x[lay.xi(i)] = p.xi[i];
        }
        x
    }

    /// Solves the convexified program at `theta`.
    pub fn sca_subproblem(&self, theta: &ScaPoint, opts: &BarrierOptions) -> Result<ScaPoint> {
        let (prog, lay, hint) = self.build(theta)?;
        let sol = barrier_solve(&prog, &hint, opts).map_err(|e| Error::Sca(format!("subproblem: {e}")))?;
        let x = &sol.x;
        let k = lay.k;
        Ok(ScaPoint {
            q: (0..k).map(|i| x[lay.q(i)].max(0.0)).collect(),
            log_t: (0..k).map(|i| theta.log_t[i] + x[lay.t_ratio(i)].ln()).collect(),
            rho_hat: (0..k).map(|i| theta.rho_hat[i] + x[lay.d_rho(i)]).collect(),
            g: (0..k).map(|i| x[lay.g(i)]).collect(),
            zeta: (0..k).map(|i| x[lay.zeta(i)]).collect(),
            xi: (0..k).map(|i| x[lay.xi(i)]).collect(),
        })
    }

    /// Scales `q` up to the full budget. Every uplink SINR is non-decreasing
    /// under a common scale-up, so the objective cannot get worse.
    fn fill_budget(&self, q: &[f64]) -> Vec<f64> {
        let total: f64 = q.iter().sum();
        if total <= 0.0 {
            return vec![self.p_max / q.len() as f64; q.len()];
        }
        q.iter().map(|v| v * self.p_max / total).collect()
    }

    /// Iterates convexify-and-solve from `q_init` until the fractional
    /// decrease of the true objective drops below `epsilon`.
    pub fn sca_power(&self, q_init: &[f64], opts: &ScaOptions) -> Result<ScaOutcome> {
        if q_init.len() != self.n_users() || q_init.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Precondition("initial uplink powers must be non-negative".into()));
        }
        if q_init.iter().sum::<f64>() > self.p_max * (1.0 + 1e-9) {
            return Err(Error::Precondition("initial uplink powers exceed the budget".into()));
        }
        let mut q = self.fill_budget(q_init);
        let mut f = self.true_objective(&q)?;
        if self.true_objective(q_init)? < f {
            q = q_init.to_vec();
            f = self.true_objective(&q)?;
        }
        let mut trajectory = vec![f];
        let mut converged = false;
        let mut stopped_by = None;
        let mut iterations = 0;

        while iterations < opts.max_iters {
            iterations += 1;
            let theta = self.anchor(&q)?;
            let next = match self.sca_subproblem(&theta, &opts.barrier) {
                Ok(p) => p,
                Err(e) if iterations == 1 => return Err(e),
                Err(e) => {
                    stopped_by = Some(e.to_string());
                    break;
                }
            };
            let target = self.fill_budget(&next.q);
            // accept the subproblem step, or the best damped version of it
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let cand: Vec<f64> = q.iter().zip(&target).map(|(a, b)| a + step * (b - a)).collect();
                let fc = self.true_objective(&cand)?;
                if fc <= f {
                    accepted = Some((cand, fc));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc)) = accepted else {
                converged = true;
                break;
            };
            let decrease = (f - fc) / f.abs().max(f64::MIN_POSITIVE);
            q = cand;
            f = fc;
            trajectory.push(f);
            if decrease < opts.epsilon {
                converged = true;
                break;
            }
        }

        Ok(ScaOutcome {
            q,
            objective_trajectory: trajectory,
            iterations,
            converged,
            stopped_by,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TaskKind;
    use crate::distortion::synthetic_table;

    fn golden_cfg(p_max: f64) -> SystemConfig {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(-0.4199, -1.2885),
                C64::new(-0.4546, 1.0362),
                C64::new(0.2092, 1.0851),
                C64::new(-0.5603, 0.7316),
            ],
        );
        SystemConfig::new(
            vec![TaskKind::Data, TaskKind::Semantic],
            h,
            p_max,
            256,
            vec![7000.0, 7000.0],
            vec![0.8, 0.2],
        )
        .unwrap()
    }

    fn problem(cfg: &SystemConfig, rs: [f64; 2]) -> PowerProblem {
        let tables = vec![
            synthetic_table(TaskKind::Data, 12).unwrap(),
            synthetic_table(TaskKind::Semantic, 12).unwrap(),
        ];
        let rc = [rs[0] / 7000.0, rs[1] / 7000.0];
        let beams = super::super::mmse::mmse_beam(cfg, &[1.5, 1.5]).unwrap();
        PowerProblem::new(cfg, &tables, &rs, &rc, &beams).unwrap()
    }

    #[test]
    fn anchor_is_tight() {
        let cfg = golden_cfg(3.0);
        let prob = problem(&cfg, [15000.0, 12000.0]);
        let theta = prob.anchor(&[1.7, 1.3]).unwrap();
        let lhs = prob.convexified_lhs(&theta, &theta).unwrap();
        // budget is slack, each user's five constraints are active
        for i in 0..2 {
            for c in 0..5 {
                let v = lhs[1 + i * 13 + c];
                assert!(v.abs() < 1e-9, "user {i} constraint {c}: {v}");
            }
        }
    }

    #[test]
    fn subproblem_improves_true_objective() {
        let cfg = golden_cfg(3.0);
        let prob = problem(&cfg, [15000.0, 12000.0]);
        let q0 = [1.5, 1.5];
        let theta = prob.anchor(&q0).unwrap();
        let next = prob.sca_subproblem(&theta, &BarrierOptions::default()).unwrap();
        assert!(next.q.iter().sum::<f64>() <= 3.0 + 1e-8);
        assert!(prob.true_objective(&next.q).unwrap() <= prob.true_objective(&q0).unwrap() + 1e-9);
    }

    #[test]
    fn sca_power_descends() {
        let cfg = golden_cfg(3.0);
        let prob = problem(&cfg, [18000.0, 15000.0]);
        let out = prob.sca_power(&[1.5, 1.5], &ScaOptions::default()).unwrap();
        assert!(out.objective_trajectory.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!(out.q.iter().sum::<f64>() <= 3.0 + 1e-8);
        assert!(out.q.iter().all(|v| *v >= -1e-10));
    }
}
