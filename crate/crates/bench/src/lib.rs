//! Shared fixtures for the solver benchmarks.

use std::path::PathBuf;

use ascc_core::power_beam::{mmse_beam, PowerProblem};
use ascc_core::Scenario;

/// Repository scenario `name`, e.g. `golden_L256.json`.
pub fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}

/// Power subproblem of `scn` at the lowest tabulated rates and MMSE beams for
/// an even power split.
pub fn power_problem(scn: &Scenario) -> (PowerProblem, Vec<f64>) {
    let cfg = &scn.system;
    let k = cfg.n_users();
    let q0 = vec![cfg.p_max() / k as f64; k];
    let beams = mmse_beam(cfg, &q0).expect("MMSE beams");
    let rs: Vec<f64> = scn.tables.iter().map(|t| t.min_rate()).collect();
    let rc: Vec<f64> = rs.iter().zip(cfg.delay_caps()).map(|(r, t)| r / t).collect();
    let prob = PowerProblem::new(cfg, &scn.tables, &rs, &rc, &beams).expect("power problem");
    (prob, q0)
}
