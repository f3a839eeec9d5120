//! Alternating rate / power-and-beam optimization, round-down discretization,
//! the zero-forcing + waterfilling reference, and parameter sweeps.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DVector;

use crate::channel::{sinr_downlink, Allocation, SystemConfig, C64};
use crate::error::{Error, Result};
use crate::power_beam::{default_start, joint_power_beam};
use crate::rate_opt::{optimize_rate, optimize_rate_from, LinkState};
use crate::report::{evaluate_allocation, SolverReport};
use crate::scenario::Scenario;

fn fractional_decrease(prev: f64, next: f64) -> f64 {
    (prev - next) / prev.abs().max(f64::MIN_POSITIVE)
}

/// Per-user rate step at the SINRs of `(powers, beams)`. Each user's search
/// starts from the lowest rate and, when given, also from its current rate;
/// the better end point is kept.
fn rate_step(
    scn: &Scenario,
    powers: &[f64],
    beams: &[DVector<C64>],
    current: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let cfg = &scn.system;
    let opts = scn.solver.rate_options();
    let gamma = sinr_downlink(cfg, powers, beams)?;
    (0..cfg.n_users())
        .map(|i| {
            let link = LinkState::new(gamma[i], cfg.delay_caps()[i], cfg.blocklength());
            let table = &scn.tables[i];
            let mut best = optimize_rate(table, link, &opts)?;
            if let Some(cur) = current {
                let warm = optimize_rate_from(table, link, cur[i], &opts)?;
                if warm.objective < best.objective {
                    best = warm;
                }
            }
            Ok(best.source_rate)
        })
        .collect()
}

fn channel_rates(cfg: &SystemConfig, source_rates: &[f64]) -> Vec<f64> {
    source_rates.iter().zip(cfg.delay_caps()).map(|(r, t)| r / t).collect()
}

/// Joint rate, power and beam optimization.
///
/// Alternates the per-user rate search and the power/beam solver from an
/// equal power split with matched-filter beams, then snaps each source rate
/// down to a tabulated rate and re-optimizes power and beams once. Sub-solver
/// failures end the affected phase and are listed in the report; the best
/// feasible point found so far is returned.
pub fn jrpb_solve(scn: &Scenario) -> Result<SolverReport> {
    let started = Instant::now();
    let cfg = &scn.system;
    let pb_opts = scn.solver.power_beam_options();
    let (mut powers, mut beams) = default_start(cfg);
    let mut source: Vec<f64> = scn.tables.iter().map(|t| t.min_rate()).collect();
    let mut trajectory = Vec::new();
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut failed = false;

    for it in 0..scn.solver.max_iters.alternation {
        let warm = (it > 0).then_some(source.as_slice());
        source = match rate_step(scn, &powers, &beams, warm) {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(format!("rate step {}: {e}", it + 1));
                break;
            }
        };
        let rc = channel_rates(cfg, &source);
        match joint_power_beam(cfg, &scn.tables, &source, &rc, &powers, &beams, &pb_opts) {
            Ok(sol) => {
                if !sol.converged {
                    diagnostics.push(format!("power/beam step {} hit its iteration cap", it + 1));
                }
                powers = sol.powers;
                beams = sol.beams;
            }
            Err(e) => {
                diagnostics.push(format!("power/beam step {}: {e}", it + 1));
                failed = true;
            }
        }
        let alloc = Allocation {
            channel_rates: rc,
            source_rates: source.clone(),
            powers: powers.clone(),
            beams: beams.clone(),
        };
        let (_, f) = evaluate_allocation(scn, &alloc)?;
        let done = trajectory
            .last()
            .is_some_and(|&prev| fractional_decrease(prev, f) < scn.solver.epsilons.alternation);
        trajectory.push(f);
        if done {
            converged = true;
            break;
        }
        if failed {
            break;
        }
    }
    let continuous = Allocation {
        channel_rates: channel_rates(cfg, &source),
        source_rates: source.clone(),
        powers: powers.clone(),
        beams: beams.clone(),
    };
    let (_, continuous_objective) = evaluate_allocation(scn, &continuous)?;

    let snapped: Vec<f64> = scn
        .tables
        .iter()
        .zip(&source)
        .map(|(t, &r)| t.round_down(r.max(t.min_rate())))
        .collect();
    let final_alloc = if snapped == source {
        continuous
    } else {
        let rc = channel_rates(cfg, &snapped);
        match joint_power_beam(cfg, &scn.tables, &snapped, &rc, &powers, &beams, &pb_opts) {
            Ok(sol) => Allocation {
                source_rates: snapped,
                channel_rates: rc,
                powers: sol.powers,
                beams: sol.beams,
            },
            Err(e) => {
                diagnostics.push(format!("power/beam after rounding: {e}"));
                Allocation {
                    source_rates: snapped,
                    channel_rates: rc,
                    powers,
                    beams,
                }
            }
        }
    };
    SolverReport::build(scn, final_alloc, trajectory, continuous_objective, converged, diagnostics, started.elapsed())
}

/// Unit-norm zero-forcing beams: normalized columns of `H (Hᴴ H)⁻¹`.
pub fn zf_beams(cfg: &SystemConfig) -> Result<Vec<DVector<C64>>> {
    let (n, k) = (cfg.n_tx(), cfg.n_users());
    if k > n {
        return Err(Error::BaselineInapplicable(format!(
            "zero forcing needs at most {n} users, scenario has {k}"
        )));
    }
    let h = cfg.channel();
    let gram = h.adjoint() * h;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::BaselineInapplicable("user channels are linearly dependent".into()))?;
    let w = h * inv;
    Ok(w.column_iter().map(|c| c.into_owned().normalize()).collect())
}

/// Classical waterfilling of `p_max` over parallel channels with unit noise
/// and power gains `gains`.
pub fn waterfill(gains: &[f64], p_max: f64) -> Vec<f64> {
    let mut floors: Vec<(usize, f64)> = gains.iter().map(|g| 1.0 / g).enumerate().collect();
    floors.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut level = 0.0;
    for m in (1..=floors.len()).rev() {
        let sum: f64 = floors[..m].iter().map(|f| f.1).sum();
        level = (p_max + sum) / m as f64;
        if level > floors[m - 1].1 {
            break;
        }
    }
    gains.iter().map(|g| (level - 1.0 / g).max(0.0)).collect()
}

/// Zero-forcing beams with waterfilling powers.
///
/// With `fixed_channel_rates` each user keeps its given channel rate and takes
/// the tabulated source rate (within the delay cap) that minimizes its
/// distortion; otherwise rates are optimized at the resulting SINRs and
/// rounded down to tabulated rates.
pub fn zf_waterfilling_baseline(scn: &Scenario, fixed_channel_rates: Option<&[f64]>) -> Result<SolverReport> {
    let started = Instant::now();
    let cfg = &scn.system;
    let beams = zf_beams(cfg)?;
    let gains: Vec<f64> = beams
        .iter()
        .enumerate()
        .map(|(i, w)| cfg.user_channel(i).dotc(w).norm_sqr())
        .collect();
    let powers = waterfill(&gains, cfg.p_max());
    let gamma = sinr_downlink(cfg, &powers, &beams)?;
    let k = cfg.n_users();
    let mut source = vec![0.0; k];
    let mut rc = vec![0.0; k];
    match fixed_channel_rates {
        Some(fixed) => {
            if fixed.len() != k || fixed.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::Config(format!("need {k} positive channel rates")));
            }
            for i in 0..k {
                let cap = fixed[i] * cfg.delay_caps()[i];
                let log10_ber = crate::channel::log10_ber(gamma[i], fixed[i], cfg.blocklength())?;
                let best = scn.tables[i]
                    .rows()
                    .iter()
                    .filter(|r| r.rate <= cap * (1.0 + 1e-12))
                    .min_by(|a, b| a.evaluate(log10_ber).total_cmp(&b.evaluate(log10_ber)))
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "user {i}: no tabulated source rate within R_c·T = {cap}"
                        ))
                    })?;
                source[i] = best.rate;
                rc[i] = fixed[i];
            }
        }
        None => {
            let opts = scn.solver.rate_options();
            for i in 0..k {
                let link = LinkState::new(gamma[i], cfg.delay_caps()[i], cfg.blocklength());
                let sol = optimize_rate(&scn.tables[i], link, &opts)?;
                source[i] = scn.tables[i].round_down(sol.source_rate);
                rc[i] = source[i] / cfg.delay_caps()[i];
            }
        }
    }
    let alloc = Allocation {
        source_rates: source,
        channel_rates: rc,
        powers,
        beams,
    };
    let (_, f) = evaluate_allocation(scn, &alloc)?;
    SolverReport::build(scn, alloc, vec![f], f, true, Vec::new(), started.elapsed())
}

/// One point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub p_max: f64,
    pub weights: Vec<f64>,
    pub outcome: std::result::Result<SolverReport, String>,
}

/// Runs `solve` over `scenarios` on all available cores; output order follows
/// the input order.
fn run_parallel(scenarios: Vec<Scenario>, solve: fn(&Scenario) -> Result<SolverReport>) -> Vec<SweepPoint> {
    let n = scenarios.len();
    let slots: Vec<Mutex<Option<SweepPoint>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |c| c.get()).min(n.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let scn = &scenarios[i];
                let point = SweepPoint {
                    p_max: scn.system.p_max(),
                    weights: scn.system.weights().to_vec(),
                    outcome: solve(scn).map_err(|e| e.to_string()),
                };
                *slots[i].lock().expect("sweep slot") = Some(point);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("sweep slot").expect("every point solved"))
        .collect()
}

/// Solves the scenario at every power budget in `p_max_grid`.
pub fn sweep_power(scn: &Scenario, p_max_grid: &[f64]) -> Result<Vec<SweepPoint>> {
    let scenarios = p_max_grid
        .iter()
        .map(|&p| Ok(scn.with_system(scn.system.with_p_max(p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(run_parallel(scenarios, jrpb_solve))
}

/// Weight vectors for a sweep over the first user's weight `w`; the other
/// users share `1 − w` in proportion to their scenario weights.
pub fn weight_vectors(base: &[f64], first_user_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let rest: f64 = base[1..].iter().sum();
    first_user_grid
        .iter()
        .map(|&w| {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("weight {w} outside [0, 1]")));
            }
            let mut v = vec![w];
            v.extend(base[1..].iter().map(|b| if rest > 0.0 { (1.0 - w) * b / rest } else { 0.0 }));
            Ok(v)
        })
        .collect()
}

/// Solves the scenario for every weight vector; each report's per-user
/// distortions give one point of the achievable region.
pub fn sweep_weights(scn: &Scenario, weights: &[Vec<f64>]) -> Result<Vec<SweepPoint>> {
    let scenarios = weights
        .iter()
        .map(|w| Ok(scn.with_system(scn.system.with_weights(w.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(run_parallel(scenarios, jrpb_solve))
}
