//! Monte-Carlo packet simulator and synthetic fitting datasets.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so every run is
//! reproducible bit-for-bit across platforms.

use std::io::{Read, Write};

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::distortion::LogisticRow;
use crate::error::{Error, Result};

/// Outcome of one simulated packet stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRun {
    pub seed: u64,
    pub packets: u64,
    pub packet_failures: u64,
    /// One bit error per failed packet.
    pub bit_errors: u64,
    /// `R_c · L` message bits per packet.
    pub bits_per_packet: f64,
    pub empirical_ber: f64,
    /// `ρ / (R_c L)` from the analytic model.
    pub predicted_ber: f64,
    /// Binomial standard error of `empirical_ber` around the prediction.
    pub standard_error: f64,
    /// Distortion of the supplied row at the empirical log10-BER.
    pub distortion: Option<f64>,
}

/// Draws `n_packets` i.i.d. packet outcomes with failure probability from the
/// finite-blocklength model and converts failures to bit errors.
pub fn simulate_link(
    gamma: f64,
    r_c: f64,
    blocklength: u32,
    n_packets: u64,
    seed: u64,
    row: Option<&LogisticRow>,
) -> Result<SimRun> {
    if n_packets == 0 {
        return Err(Error::Precondition("at least one packet required".into()));
    }
    let rho = channel::packet_error(gamma, r_c, blocklength)?;
    let bits = r_c * blocklength as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = Bernoulli::new(rho).map_err(|_| Error::Domain(rho))?;
    let failures = (0..n_packets).filter(|_| draw.sample(&mut rng)).count() as u64;
    let empirical = failures as f64 / (n_packets as f64 * bits);
    let predicted = rho / bits;
    let standard_error = (rho * (1.0 - rho) / n_packets as f64).sqrt() / bits;
    Ok(SimRun {
        seed,
        packets: n_packets,
        packet_failures: failures,
        bit_errors: failures,
        bits_per_packet: bits,
        empirical_ber: empirical,
        predicted_ber: predicted,
        standard_error,
        distortion: row.map(|r| r.evaluate(empirical.log10())),
    })
}

/// Empirical BER of [`simulate_link`].
pub fn simulate_ber(gamma: f64, r_c: f64, blocklength: u32, n_packets: u64, seed: u64) -> Result<f64> {
    Ok(simulate_link(gamma, r_c, blocklength, n_packets, seed, None)?.empirical_ber)
}

/// One `(log10_ber, distortion)` observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub log10_ber: f64,
    pub distortion: f64,
}

/// Samples the logistic `row` on `ber_grid` (log10-BER values) and adds
/// Gaussian noise of standard deviation `noise_sigma`.
pub fn generate_fit_dataset(row: &LogisticRow, ber_grid: &[f64], noise_sigma: f64, seed: u64) -> Result<Vec<FitSample>> {
    if ber_grid.is_empty() {
        return Err(Error::Precondition("log10-BER grid is empty".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Precondition(format!("noise sigma must be non-negative, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|_| Error::Domain(noise_sigma))?;
    Ok(ber_grid
        .iter()
        .map(|&x| {
            let clean = row.evaluate(x);
            let distortion = if noise_sigma > 0.0 { clean + noise.sample(&mut rng) } else { clean };
            FitSample {
                log10_ber: x,
                distortion,
            }
        })
        .collect())
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn write_samples<W: Write>(samples: &[FitSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s).map_err(|e| Error::Config(format!("writing samples: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `log10_ber,distortion` CSV with a header row.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<FitSample>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Config(format!("reading samples: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::fit_logistic;

    fn row() -> LogisticRow {
        LogisticRow {
            rate: 10_000.0,
            floor: 0.05,
            span: 0.6,
            slope: 2.5,
            midpoint: -5.0,
        }
    }

    #[test]
    fn no_failures_at_huge_sinr() {
        assert_eq!(simulate_ber(1e6, 1.0, 256, 10_000, 1).unwrap(), 0.0);
    }

    #[test]
    fn every_packet_fails_far_above_capacity() {
        let ber = simulate_ber(0.01, 2.0, 256, 1000, 3).unwrap();
        assert_eq!(ber, 1.0 / 512.0);
    }

    #[test]
    fn seed_determinism() {
        let a = simulate_link(3.0, 2.0, 256, 20_000, 9, Some(&row())).unwrap();
        let b = simulate_link(3.0, 2.0, 256, 20_000, 9, Some(&row())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_dataset_on_curve_and_refits() {
        let r = row();
        let grid = linspace(-9.0, -1.0, 41);
        let s = generate_fit_dataset(&r, &grid, 0.0, 0).unwrap();
        assert!(s.iter().all(|p| p.distortion == r.evaluate(p.log10_ber)));
        let pts: Vec<_> = s.iter().map(|p| (p.log10_ber, p.distortion)).collect();
        let fit = fit_logistic(&pts, r.floor).unwrap();
        assert!(fit.mse < 1e-20);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(matches!(generate_fit_dataset(&row(), &[], 0.0, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_round_trip() {
        let s = generate_fit_dataset(&row(), &linspace(-8.0, -2.0, 7), 0.01, 5).unwrap();
        let mut buf = Vec::new();
        write_samples(&s, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("log10_ber,distortion\n"));
        assert_eq!(read_samples(&buf[..]).unwrap(), s);
    }
}
