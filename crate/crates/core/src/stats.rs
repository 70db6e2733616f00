//! Monte Carlo summaries.

use rayon::prelude::*;

use crate::rng::{task_rng, StreamRng};
use crate::scalar::Real;

/// Sample mean with its standard error, optionally compared against a
/// closed-form prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate<R: Real> {
    pub mean: R,
    /// Sample standard deviation over sqrt(samples); zero for one sample.
    pub stderr: R,
    pub samples: usize,
    pub closed_form: Option<R>,
    /// |mean - closed_form| / stderr, or 0 when both the deviation and the
    /// standard error vanish.
    pub sigmas: Option<R>,
}

impl<R: Real> MCEstimate<R> {
    pub fn from_samples(xs: &[R]) -> Self {
        let n = xs.len();
        assert!(n > 0, "MCEstimate needs at least one sample");
        let nr = R::of_usize(n);
        let mean = xs.iter().fold(R::zero(), |s, x| s + *x) / nr;
        let stderr = if n > 1 {
            let var = xs.iter().fold(R::zero(), |s, x| s + (*x - mean) * (*x - mean)) / R::of_usize(n - 1);
            (var / nr).sqrt()
        } else {
            R::zero()
        };
        MCEstimate {
            mean,
            stderr,
            samples: n,
            closed_form: None,
            sigmas: None,
        }
    }

    pub fn with_closed_form(mut self, value: R) -> Self {
        let dev = (self.mean - value).abs();
        let sig = if self.stderr > R::zero() {
            dev / self.stderr
        } else if dev <= R::lit(1e-12) {
            R::zero()
        } else {
            R::lit(f64::INFINITY)
        };
        self.closed_form = Some(value);
        self.sigmas = Some(sig);
        self
    }

    /// True when the closed form lies within `k` standard errors. Deviations
    /// at the 1e-12 level count as agreement so zero-variance cases pass.
    pub fn agrees_within(&self, k: f64) -> bool {
        match self.closed_form {
            Some(c) => (self.mean - c).abs() <= R::lit(k) * self.stderr + R::lit(1e-12),
            None => false,
        }
    }
}

/// Evaluates `f` on `samples` independent streams in parallel. The result
/// order (and so every reduction over it) is fixed by the sample index.
pub fn par_samples<T, F>(master_seed: u64, samples: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = task_rng(master_seed, i as u64);
            f(&mut rng)
        })
        .collect()
}
