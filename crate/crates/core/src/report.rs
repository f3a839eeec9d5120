//! Solver reports, independent re-evaluation, and CSV/summary output.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Duration;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::channel::{evaluate_link, sinr_downlink, Allocation, LinkMetrics};
use crate::distortion;
use crate::driver::SweepPoint;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Per-user metrics and weighted-sum distortion of `alloc`, recomputed from
/// the channel model and the distortion tables.
pub fn evaluate_allocation(scn: &Scenario, alloc: &Allocation) -> Result<(Vec<LinkMetrics>, f64)> {
    let cfg = &scn.system;
    let gamma = sinr_downlink(cfg, &alloc.powers, &alloc.beams)?;
    let mut metrics = Vec::with_capacity(gamma.len());
    let mut objective = 0.0;
    for (i, &g) in gamma.iter().enumerate() {
        let link = evaluate_link(g, alloc.channel_rates[i], cfg.blocklength())?;
        let d = distortion::e2e_distortion(&scn.tables[i], alloc.source_rates[i], link.log10_ber)?;
        objective += cfg.weights()[i] * d;
        metrics.push(LinkMetrics {
            sinr: g,
            packet_error: link.packet_error,
            log10_ber: link.log10_ber,
            distortion: d,
        });
    }
    Ok((metrics, objective))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub scenario: String,
    pub p_max: f64,
    pub weights: Vec<f64>,
    pub allocation: Allocation,
    pub metrics: Vec<LinkMetrics>,
    /// Weighted-sum distortion of `allocation`.
    pub objective: f64,
    /// Objective after each alternation of the continuous phase.
    pub trajectory: Vec<f64>,
    /// Objective before rounding source rates to tabulated values.
    pub continuous_objective: f64,
    pub discretization_delta: f64,
    pub converged: bool,
    pub diagnostics: Vec<String>,
    pub wall_time: Duration,
}

impl SolverReport {
    pub(crate) fn build(
        scn: &Scenario,
        allocation: Allocation,
        trajectory: Vec<f64>,
        continuous_objective: f64,
        converged: bool,
        diagnostics: Vec<String>,
        wall_time: Duration,
    ) -> Result<Self> {
        allocation.validate(&scn.system)?;
        let (metrics, objective) = evaluate_allocation(scn, &allocation)?;
        Ok(Self {
            scenario: scn.name.clone(),
            p_max: scn.system.p_max(),
            weights: scn.system.weights().to_vec(),
            allocation,
            metrics,
            objective,
            trajectory,
            continuous_objective,
            discretization_delta: objective - continuous_objective,
            converged,
            diagnostics,
            wall_time,
        })
    }

    /// Re-checks feasibility and recomputes the objective; returns the
    /// absolute difference to the stored value.
    pub fn revalidate(&self, scn: &Scenario) -> Result<f64> {
        self.allocation.validate(&scn.system)?;
        let (_, f) = evaluate_allocation(scn, &self.allocation)?;
        let diff = (f - self.objective).abs();
        if diff > 1e-9 {
            return Err(Error::Precondition(format!(
                "reported objective {} differs from recomputed {f}",
                self.objective
            )));
        }
        Ok(diff)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let name = if self.scenario.is_empty() { "scenario" } else { &self.scenario };
        let _ = writeln!(s, "{name}: P_max = {} W, weights = {:?}", self.p_max, self.weights);
        let _ = writeln!(
            s,
            "objective {:.6} (continuous {:.6}, rounding {:+.2e}), {} alternations, {}",
            self.objective,
            self.continuous_objective,
            self.discretization_delta,
            self.trajectory.len(),
            if self.converged { "converged" } else { "not converged" }
        );
        for (i, m) in self.metrics.iter().enumerate() {
            let a = &self.allocation;
            let _ = writeln!(
                s,
                "  user {}: R_s {:.1}  R_c {:.4}  p {:.4} W  SINR {:.3} dB  log10 BER {:.3}  distortion {:.5}",
                i + 1,
                a.source_rates[i],
                a.channel_rates[i],
                a.powers[i],
                10.0 * m.sinr.log10(),
                m.log10_ber,
                m.distortion
            );
        }
        for d in &self.diagnostics {
            let _ = writeln!(s, "  note: {d}");
        }
        let _ = writeln!(s, "  solved in {:.3} s", self.wall_time.as_secs_f64());
        s
    }
}

impl Serialize for SolverReport {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let beams: Vec<Vec<[f64; 2]>> = self
            .allocation
            .beams
            .iter()
            .map(|w| w.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        let mut st = ser.serialize_struct("SolverReport", 14)?;
        st.serialize_field("scenario", &self.scenario)?;
        st.serialize_field("p_max", &self.p_max)?;
        st.serialize_field("weights", &self.weights)?;
        st.serialize_field("source_rates", &self.allocation.source_rates)?;
        st.serialize_field("channel_rates", &self.allocation.channel_rates)?;
        st.serialize_field("powers", &self.allocation.powers)?;
        st.serialize_field("beams", &beams)?;
        st.serialize_field("metrics", &self.metrics)?;
        st.serialize_field("objective", &self.objective)?;
        st.serialize_field("trajectory", &self.trajectory)?;
        st.serialize_field("continuous_objective", &self.continuous_objective)?;
        st.serialize_field("discretization_delta", &self.discretization_delta)?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("diagnostics", &self.diagnostics)?;
        st.end()
    }
}

/// Column names of [`write_csv`] for `k` users.
pub fn csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["p_max".to_string()];
    h.extend((1..=k).map(|i| format!("beta_{i}")));
    for i in 1..=k {
        for f in ["rs", "rc", "p", "sinr", "log10_ber", "distortion"] {
            h.push(format!("{f}_{i}"));
        }
    }
    h.extend(["objective", "continuous_objective", "status"].map(String::from));
    h
}

/// One row per sweep point. Floats are written in shortest round-trip form
/// and timing is left out, so identical inputs give identical bytes.
pub fn write_csv<W: Write>(out: W, k: usize, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    w.write_record(csv_header(k)).map_err(csv_err)?;
    for pt in points {
        let mut row = vec![pt.p_max.to_string()];
        row.extend(pt.weights.iter().map(f64::to_string));
        match &pt.outcome {
            Ok(r) => {
                let a = &r.allocation;
                for (i, m) in r.metrics.iter().enumerate() {
                    for v in [a.source_rates[i], a.channel_rates[i], a.powers[i], m.sinr, m.log10_ber, m.distortion] {
                        row.push(v.to_string());
                    }
                }
                row.push(r.objective.to_string());
                row.push(r.continuous_objective.to_string());
                row.push(if r.diagnostics.is_empty() { "ok".into() } else { r.diagnostics.join("; ") });
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 6 * k + 2));
                row.push(format!("error: {e}"));
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

impl From<SolverReport> for SweepPoint {
    fn from(r: SolverReport) -> Self {
        Self {
            p_max: r.p_max,
            weights: r.weights.clone(),
            outcome: Ok(r),
        }
    }
}
