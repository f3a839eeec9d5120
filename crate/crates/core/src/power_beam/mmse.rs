use nalgebra::{DMatrix, DVector};

use crate::channel::{SystemConfig, C64};
use crate::error::{Error, Result};

/// Uplink MMSE receive beams `normalize((I + Σ_j q_j h̄_j h̄_jᴴ)⁻¹ h̄_i)`.
///
/// For fixed uplink powers each of these maximizes its own user's SINR.
pub fn mmse_beam(cfg: &SystemConfig, q: &[f64]) -> Result<Vec<DVector<C64>>> {
    if q.len() != cfg.n_users() || q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("uplink powers must be finite, non-negative, one per user".into()));
    }
    let n = cfg.n_tx();
    let h = cfg.channel();
    let mut cov = DMatrix::<C64>::identity(n, n);
    for (j, &qj) in q.iter().enumerate() {
        let col = h.column(j);
        cov.gerc(C64::new(qj, 0.0), &col, &col, C64::new(1.0, 0.0));
    }
    let lu = cov.lu();
    (0..cfg.n_users())
        .map(|i| {
            let x = lu
                .solve(&h.column(i).into_owned())
                .ok_or_else(|| Error::Config("MMSE covariance is singular".into()))?;
            Ok(x.normalize())
        })
        .collect()
}
