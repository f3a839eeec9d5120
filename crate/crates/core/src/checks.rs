//! Randomized invariant checks on a concrete scenario.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::channel::{self, downlink_to_uplink_power, sinr_downlink, sinr_uplink, uplink_to_downlink_power, SystemConfig, C64};
use crate::driver::jrpb_solve;
use crate::error::Result;
use crate::power_beam::sca::constraint_lhs as lhs;
use crate::power_beam::{default_start, mmse_beam, PowerProblem, ScaPoint};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Uniformly distributed unit vector in `Cⁿ`.
pub fn random_unit_beam<R: Rng>(rng: &mut R, n: usize) -> DVector<C64> {
    let v = DVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    v.normalize()
}

/// Q-argument below which `log10_ber` sits within half an ulp of its ceiling.
pub const RESOLVABLE_Q_ARG: f64 = -7.0;

/// SINR interval `[lo, hi]` on which the Q-argument of `(r_c, blocklength)`
/// stays above `x_min`.
pub fn resolvable_sinr_range(r_c: f64, blocklength: u32, x_min: f64, hi: f64) -> (f64, f64) {
    // the Q-argument increases in γ
    let (mut a, mut b) = (1e-12_f64, hi);
    for _ in 0..200 {
        let m = (a * b).sqrt();
        if channel::q_argument(m, r_c, blocklength) < x_min {
            a = m;
        } else {
            b = m;
        }
    }
    (b, hi)
}

/// Log-spaced points on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// Worst violations found by [`sca_majorization`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MajorizationStats {
    /// Largest `true − convex` (scaled), over sampled points; `<= 0` passes.
    pub worst_gap: f64,
    /// Largest `|true − convex|` at the operating point.
    pub worst_tangency: f64,
    pub samples: usize,
}

fn scaled_gap(truth: f64, convex: f64) -> f64 {
    (truth - convex) / (1.0 + truth.abs().max(convex.abs()))
}

/// Samples `n` points per constraint around `theta` and compares each
/// convexified constraint with the original one.
pub fn sca_majorization<R: Rng>(prob: &PowerProblem, theta: &ScaPoint, n: usize, rng: &mut R) -> [MajorizationStats; 5] {
    let k = prob.n_users();
    let l = prob.blocklength();
    let gains = prob.gains();
    let mut stats = [MajorizationStats::default(); 5];
    let caps: Vec<f64> = (0..k).map(|i| prob.p_max() * gains[(i, i)]).collect();

    for i in 0..k {
        let a = prob.rows()[i].slope;
        let rc = prob.channel_rates()[i];
        let (lt0, r0, g0, z0, x0) = (theta.log_t[i], theta.rho_hat[i], theta.g[i], theta.zeta[i], theta.xi[i]);
        let tang = [
            (lhs::log_t(lt0, r0, a, rc, l) - lhs::log_t_convex(lt0, r0, lt0, r0, a, rc, l)).abs(),
            (lhs::rho_hat(r0, g0, z0, rc, l) - lhs::rho_hat_convex(r0, g0, r0, g0, z0, rc, l)).abs(),
            (lhs::dispersion(x0, g0) - lhs::dispersion_convex(x0, g0, x0, g0)).abs(),
            (lhs::sinr_lower(i, z0, &theta.q, gains) - lhs::sinr_lower_convex(i, z0, &theta.q, z0, &theta.q, gains)).abs(),
            (lhs::sinr_upper(i, x0, &theta.q, gains) - lhs::sinr_upper_convex(i, x0, &theta.q, x0, &theta.q, gains)).abs(),
        ];
        for (s, t) in stats.iter_mut().zip(tang) {
            s.worst_tangency = s.worst_tangency.max(t);
        }
        for _ in 0..n {
            let q: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=prob.p_max())).collect();
            let lt = lt0 + rng.random_range(-20.0..20.0);
            let rho = r0 + rng.random_range(-10.0..10.0);
            let g = rng.random_range(0.0..=1.0);
            let z = rng.random_range(0.0..=caps[i]);
            let x = rng.random_range(0.0..=caps[i]);
            let gaps = [
                scaled_gap(lhs::log_t(lt, rho, a, rc, l), lhs::log_t_convex(lt0, r0, lt, rho, a, rc, l)),
                scaled_gap(lhs::rho_hat(rho, g, z, rc, l), lhs::rho_hat_convex(r0, g0, rho, g, z, rc, l)),
                scaled_gap(lhs::dispersion(x, g), lhs::dispersion_convex(x0, g0, x, g)),
                scaled_gap(
                    lhs::sinr_lower(i, z, &q, gains),
                    lhs::sinr_lower_convex(i, z0, &theta.q, z, &q, gains),
                ),
                scaled_gap(
                    lhs::sinr_upper(i, x, &q, gains),
                    lhs::sinr_upper_convex(i, x0, &theta.q, x, &q, gains),
                ),
            ];
            for (s, gap) in stats.iter_mut().zip(gaps) {
                s.worst_gap = if s.samples == 0 { gap } else { s.worst_gap.max(gap) };
                s.samples += 1;
            }
        }
    }
    stats
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn duality_check(cfg: &SystemConfig) -> Result<CheckResult> {
    let (p, w) = default_start(cfg);
    let q = downlink_to_uplink_power(cfg, &w, &p)?;
    let back = uplink_to_downlink_power(cfg, &w, &q)?;
    let down = sinr_downlink(cfg, &p, &w)?;
    let up = sinr_uplink(cfg, &q, &w)?;
    let sinr_err = down
        .iter()
        .zip(&up)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    let power_err = p.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let total_err = (p.iter().sum::<f64>() - q.iter().sum::<f64>()).abs();
    Ok(check(
        "duality",
        sinr_err <= 1e-8 && power_err <= 1e-8 && total_err <= 1e-9,
        format!("SINR rel. error {sinr_err:.2e}, round-trip power error {power_err:.2e}, total-power error {total_err:.2e}"),
    ))
}

fn mmse_check(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let (q, _) = default_start(cfg);
    let w = mmse_beam(cfg, &q)?;
    let best = sinr_uplink(cfg, &q, &w)?;
    let mut violations = 0;
    for _ in 0..1000 {
        let trial: Vec<_> = (0..cfg.n_users()).map(|_| random_unit_beam(rng, cfg.n_tx())).collect();
        let s = sinr_uplink(cfg, &q, &trial)?;
        violations += s.iter().zip(&best).filter(|(a, b)| **a > **b * (1.0 + 1e-12)).count();
    }
    Ok(check("mmse_optimality", violations == 0, format!("{violations} random beams beat MMSE")))
}

/// Runs the invariant suite on `scn`; `seed` drives every random draw.
pub fn validate_scenario(scn: &Scenario, seed: u64) -> Result<Vec<CheckResult>> {
    let cfg = &scn.system;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let warnings: Vec<String> = scn.tables.iter().flat_map(|t| t.warnings()).collect();
    out.push(check(
        "tables",
        true,
        if warnings.is_empty() { "valid".into() } else { warnings.join("; ") },
    ));

    let (mut rises, mut ties) = (0, 0);
    for (i, t) in scn.tables.iter().enumerate() {
        for r_s in [t.min_rate(), t.max_rate()] {
            let rc = r_s / cfg.delay_caps()[i];
            let (lo, _) = resolvable_sinr_range(rc, cfg.blocklength(), RESOLVABLE_Q_ARG, 1e4);
            for g in logspace(1e-2, 1e4, 1000).windows(2) {
                let a = channel::log10_ber(g[0], rc, cfg.blocklength())?;
                let b = channel::log10_ber(g[1], rc, cfg.blocklength())?;
                rises += usize::from(b > a);
                ties += usize::from(b == a && g[0] >= lo);
            }
        }
    }
    out.push(check(
        "ber_monotone_in_sinr",
        rises + ties == 0,
        format!("{rises} increases, {ties} ties where the decrease is representable"),
    ));

    out.push(duality_check(cfg)?);
    out.push(mmse_check(cfg, &mut rng)?);

    let (q, _) = default_start(cfg);
    let w = mmse_beam(cfg, &q)?;
    let rs: Vec<f64> = scn.tables.iter().map(|t| t.min_rate()).collect();
    let rc: Vec<f64> = rs.iter().zip(cfg.delay_caps()).map(|(r, t)| r / t).collect();
    let prob = PowerProblem::new(cfg, &scn.tables, &rs, &rc, &w)?;
    let theta = prob.anchor(&q)?;
    let stats = sca_majorization(&prob, &theta, 1000, &mut rng);
    let gap = stats.iter().map(|s| s.worst_gap).fold(f64::NEG_INFINITY, f64::max);
    let tang = stats.iter().map(|s| s.worst_tangency).fold(0.0, f64::max);
    out.push(check(
        "sca_majorization",
        gap <= 1e-9 && tang <= 1e-9,
        format!("worst scaled gap {gap:.2e}, worst tangency error {tang:.2e}"),
    ));

    let report = jrpb_solve(scn)?;
    let diff = report.revalidate(scn);
    let monotone = report.trajectory.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    out.push(check(
        "solve_integrity",
        diff.is_ok() && monotone,
        match diff {
            Ok(d) => format!(
                "objective {:.6} re-evaluates within {d:.1e}; alternation {}",
                report.objective,
                if monotone { "non-increasing" } else { "increased" }
            ),
            Err(e) => e.to_string(),
        },
    ));
    Ok(out)
}
