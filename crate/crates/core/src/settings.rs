//! Numerical tolerances and capacity limits.

use crate::error::{Error, Result};

/// Tolerances used by validation and exactness checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max |A_ij - conj(A_ji)| accepted for Hermitian inputs.
    pub hermitian: f64,
    /// Eigenvalues in [-psd, 0) are clamped to zero; below that is an error.
    pub psd: f64,
    /// Allowed deviation of a density trace from its nominal value.
    pub trace: f64,
    /// Completeness tolerance for trace-preserving channels.
    pub tp: f64,
    /// Knill-Laflamme residual below which a code is reported exact.
    pub kl: f64,
    /// Kraus operators with Frobenius norm at or below this are zero.
    pub prune: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-9,
            psd: 1e-9,
            trace: 1e-8,
            tp: 1e-8,
            kl: 1e-8,
            prune: 1e-12,
        }
    }
}

/// Capacity limits for dense tensor products and enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest matrix dimension any operation may build.
    pub max_dim: usize,
    /// Largest number of Kraus operators a materialized channel may hold.
    pub max_kraus: usize,
    /// Largest number of index sequences enumerated explicitly.
    pub enumeration_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_dim: 4096,
            max_kraus: 1 << 16,
            enumeration_cap: 10_000_000,
        }
    }
}

impl Limits {
    pub fn check_dim(&self, what: &'static str, dim: u128) -> Result<()> {
        if dim > self.max_dim as u128 {
            return Err(Error::capacity(what, dim, self.max_dim as u128));
        }
        Ok(())
    }

    pub fn check_kraus(&self, count: u128) -> Result<()> {
        if count > self.max_kraus as u128 {
            return Err(Error::capacity("Kraus operator count", count, self.max_kraus as u128));
        }
        Ok(())
    }

    pub fn check_enumeration(&self, count: u128) -> Result<()> {
        if count > self.enumeration_cap as u128 {
            return Err(Error::Capacity {
                what: "sequence enumeration size",
                requested: count,
                limit: self.enumeration_cap as u128,
                hint: Some("use sample mode"),
            });
        }
        Ok(())
    }
}

/// `base^exp` with saturation at `u128::MAX`.
pub fn saturating_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
