//! Logistic end-to-end distortion models.
//!
//! Each row of a [`DistortionTable`] describes one pre-trained codec at a
//! fixed source rate:
//!
//! ```text
//! D(ρ̃) = floor + span / (1 + exp(-slope · (ρ̃ - midpoint)))
//! ```
//!
//! where `ρ̃` is the log10 bit error rate. Between tabulated rates the four
//! parameters are blended linearly.

use std::path::Path;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::storage::Owned;
use nalgebra::{DVector, Dyn, OMatrix, Vector3, U3};
use serde::{Deserialize, Serialize};

use crate::channel::TaskKind;
use crate::error::{Error, Result};

/// Logistic parameters of one codec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticRow {
    /// Source rate, bits per source item.
    pub rate: f64,
    /// Distortion under error-free transmission.
    pub floor: f64,
    /// Distortion added when the channel saturates.
    pub span: f64,
    pub slope: f64,
    /// Half-rise point, in log10-BER units.
    pub midpoint: f64,
}

/// `1 / (1 + e^{-z})` without overflow for large `|z|`.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRow {
    /// Distortion at log10-BER `log10_ber`.
    pub fn evaluate(&self, log10_ber: f64) -> f64 {
        self.floor + self.span * sigmoid(self.slope * (log10_ber - self.midpoint))
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.rate, self.floor, self.span, self.slope, self.midpoint];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Table(format!("non-finite parameter in row at rate {}", self.rate)));
        }
        if !(self.rate > 0.0) {
            return Err(Error::Table(format!("rate must be positive, got {}", self.rate)));
        }
        if !(0.0..=1.0).contains(&self.floor) || self.span < 0.0 {
            return Err(Error::Table(format!("floor/span out of range at rate {}", self.rate)));
        }
        if self.floor + self.span > 1.0 + 1e-9 {
            return Err(Error::Table(format!("floor + span exceeds 1 at rate {}", self.rate)));
        }
        if !(self.slope > 0.0) {
            return Err(Error::Table(format!("slope must be positive at rate {}", self.rate)));
        }
        Ok(())
    }
}

/// Distortion at log10-BER `log10_ber` for `row`.
pub fn evaluate(row: &LogisticRow, log10_ber: f64) -> f64 {
    row.evaluate(log10_ber)
}

/// Rate-sorted logistic rows for one task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionTable {
    pub kind: TaskKind,
    rows: Vec<LogisticRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// Bracketing position of a rate inside a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    /// Lower row index; the segment is `[lower, lower + 1]`.
    pub lower: usize,
    pub lambda: f64,
    /// Index of the row whose rate equals the query exactly.
    pub exact: Option<usize>,
}

impl DistortionTable {
    pub fn new(kind: TaskKind, rows: Vec<LogisticRow>) -> Result<Self> {
        let t = Self {
            kind,
            rows,
            provenance: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 2 {
            return Err(Error::Table("at least two rows required".into()));
        }
        for r in &self.rows {
            r.validate()?;
        }
        if self.rows.windows(2).any(|w| w[1].rate <= w[0].rate) {
            return Err(Error::Table("rates must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Soft checks: non-monotone floors are tolerated but reported.
    pub fn warnings(&self) -> Vec<String> {
        self.rows
            .windows(2)
            .filter(|w| w[1].floor > w[0].floor)
            .map(|w| format!("floor rises from {} to {} between rates {} and {}", w[0].floor, w[1].floor, w[0].rate, w[1].rate))
            .collect()
    }

    pub fn rows(&self) -> &[LogisticRow] {
        &self.rows
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.rate)
    }

    pub fn min_rate(&self) -> f64 {
        self.rows[0].rate
    }

    pub fn max_rate(&self) -> f64 {
        self.rows[self.rows.len() - 1].rate
    }

    pub fn contains(&self, r_s: f64) -> bool {
        r_s >= self.min_rate() && r_s <= self.max_rate()
    }

    pub fn bracket(&self, r_s: f64) -> Result<Bracket> {
        if !self.contains(r_s) {
            return Err(Error::RateOutOfRange {
                rate: r_s,
                min: self.min_rate(),
                max: self.max_rate(),
            });
        }
        let n = self.rows.len();
        // first row with rate > r_s
        let upper = self.rows.partition_point(|r| r.rate <= r_s);
        let lower = upper.saturating_sub(1).min(n - 2);
        let exact = self.rows.iter().position(|r| r.rate == r_s);
        let (a, b) = (self.rows[lower].rate, self.rows[lower + 1].rate);
        Ok(Bracket {
            lower,
            lambda: (r_s - a) / (b - a),
            exact,
        })
    }

    /// Largest tabulated rate not exceeding `r_s`, clamped to the first row.
    pub fn round_down(&self, r_s: f64) -> f64 {
        self.rows
            .iter()
            .rev()
            .find(|r| r.rate <= r_s)
            .map_or(self.min_rate(), |r| r.rate)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let t: Self = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn blend(a: &LogisticRow, b: &LogisticRow, lambda: f64) -> LogisticRow {
    let mix = |x: f64, y: f64| x + lambda * (y - x);
    LogisticRow {
        rate: mix(a.rate, b.rate),
        floor: mix(a.floor, b.floor),
        span: mix(a.span, b.span),
        slope: mix(a.slope, b.slope),
        midpoint: mix(a.midpoint, b.midpoint),
    }
}

/// Logistic parameters at an arbitrary in-range rate.
pub fn interpolate(table: &DistortionTable, r_s: f64) -> Result<LogisticRow> {
    let br = table.bracket(r_s)?;
    if let Some(i) = br.exact {
        return Ok(table.rows[i]);
    }
    let mut row = blend(&table.rows[br.lower], &table.rows[br.lower + 1], br.lambda);
    row.rate = r_s;
    Ok(row)
}

/// Predicted end-to-end distortion at source rate `r_s` and log10-BER.
pub fn e2e_distortion(table: &DistortionTable, r_s: f64, log10_ber: f64) -> Result<f64> {
    Ok(interpolate(table, r_s)?.evaluate(log10_ber))
}

/// Result of a logistic regression with known floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticFit {
    pub span: f64,
    pub slope: f64,
    pub midpoint: f64,
    pub mse: f64,
    /// Residual evaluations spent by the least-squares solver.
    pub evaluations: usize,
}

impl LogisticFit {
    pub fn into_row(self, rate: f64, floor: f64) -> LogisticRow {
        LogisticRow {
            rate,
            floor,
            span: self.span,
            slope: self.slope,
            midpoint: self.midpoint,
        }
    }
}

struct LogisticResiduals<'a> {
    samples: &'a [(f64, f64)],
    floor: f64,
    p: Vector3<f64>,
}

impl LeastSquaresProblem<f64, Dyn, U3> for LogisticResiduals<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let [span, slope, mid] = [self.p[0], self.p[1], self.p[2]];
        Some(DVector::from_iterator(
            self.samples.len(),
            self.samples
                .iter()
                .map(|&(x, y)| self.floor + span * sigmoid(slope * (x - mid)) - y),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let [span, slope, mid] = [self.p[0], self.p[1], self.p[2]];
        let mut j = OMatrix::<f64, Dyn, U3>::zeros(self.samples.len());
        for (r, &(x, _)) in self.samples.iter().enumerate() {
            let s = sigmoid(slope * (x - mid));
            let ds = s * (1.0 - s);
            j[(r, 0)] = s;
            j[(r, 1)] = span * ds * (x - mid);
            j[(r, 2)] = -span * ds * slope;
        }
        Some(j)
    }
}

/// Least-squares fit of `(span, slope, midpoint)` to `(log10_ber, distortion)`
/// samples with the floor held fixed.
///
/// Levenberg–Marquardt with analytic Jacobian, started from the observed span,
/// the half-rise crossing and a slope of 2.
pub fn fit_logistic(samples: &[(f64, f64)], floor: f64) -> Result<LogisticFit> {
    if samples.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) || !floor.is_finite() {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    if hi - lo <= 1e-12 {
        return Err(Error::Fit("samples carry no variation".into()));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span0 = hi - floor;
    if !(span0 > 0.0) {
        return Err(Error::Fit("samples never rise above the floor".into()));
    }
    let half = floor + 0.5 * span0;
    let mid0 = sorted
        .windows(2)
        .find(|w| (w[0].1 - half) * (w[1].1 - half) <= 0.0 && w[0].1 != w[1].1)
        .map(|w| w[0].0 + (half - w[0].1) * (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .unwrap_or_else(|| 0.5 * (sorted[0].0 + sorted[sorted.len() - 1].0));

    let problem = LogisticResiduals {
        samples,
        floor,
        p: Vector3::new(span0, 2.0, mid0),
    };
    let (fitted, report) = LevenbergMarquardt::new()
        .with_tol(1e-15)
        .with_patience(1000)
        .minimize(problem);
    let p = fitted.p;
    if !report.termination.was_successful() && !matches!(report.termination, TerminationReason::NoImprovementPossible(_)) {
        return Err(Error::Fit(format!("least squares did not converge: {:?}", report.termination)));
    }
    if !(p[1] > 0.0) || !(p[0] > 0.0) {
        return Err(Error::Fit(format!(
            "fit converged to a non-increasing curve (span {}, slope {})",
            p[0], p[1]
        )));
    }
    Ok(LogisticFit {
        span: p[0],
        slope: p[1],
        midpoint: p[2],
        mse: 2.0 * report.objective_function / samples.len() as f64,
        evaluations: report.number_of_evaluations,
    })
}

/// Source-rate grid of the bundled synthetic tables, bits per item.
pub const SYNTHETIC_RATE_RANGE: (f64, f64) = (2.4e3, 9.3e4);

/// Synthetic stand-in for a bank of trained codecs: floors fall with rate
/// while the logistic midpoint moves toward lower BER, so low-rate models
/// tolerate more bit errors.
pub fn synthetic_table(kind: TaskKind, n_rows: usize) -> Result<DistortionTable> {
    if n_rows < 2 {
        return Err(Error::Table("at least two rows required".into()));
    }
    let (r0, r1) = SYNTHETIC_RATE_RANGE;
    let rows = (0..n_rows)
        .map(|n| {
            let u = n as f64 / (n_rows - 1) as f64;
            let rate = r0 * (r1 / r0).powf(u);
            let (floor, ceiling, slope, midpoint) = match kind {
                TaskKind::Data => (0.012 + 0.16 * (1.0 - u).powf(1.6), 0.72, 2.2 + 0.6 * u, -4.6 - 1.2 * u),
                TaskKind::Semantic => (0.18 + 0.55 * (1.0 - u).powi(2), 0.995, 2.8 + 0.5 * u, -5.0 - 1.0 * u),
            };
            LogisticRow {
                rate,
                floor,
                span: ceiling - floor,
                slope,
                midpoint,
            }
        })
        .collect();
    Ok(DistortionTable::new(kind, rows)?.with_provenance(format!(
        "synthetic {kind} table, {n_rows} log-spaced rates in [{r0}, {r1}]"
    )))
}
