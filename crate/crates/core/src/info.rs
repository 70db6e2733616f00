//! Entropy exchange, coherent information and related rate expressions.
//!
//! Everything is computed from the N×N matrix W_ij = tr(A_i ρ A_j†), whose
//! spectrum is the environment spectrum after the channel. No purification
//! of the input is ever formed here.

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, identity, shannon_entropy, spectral_entropy, von_neumann_entropy, CMatrix, Density};
use crate::scalar::Real;
use crate::settings::Tolerances;

/// W_ij = tr(A_i ρ A_j†).
pub fn w_matrix<R: Real>(ch: &KrausChannel<R>, rho: &Density<R>) -> Result<CMatrix<R>> {
    if rho.dim() != ch.input_dim() {
        return Err(Error::input(format!(
            "state dimension {} does not match channel input dimension {}",
            rho.dim(),
            ch.input_dim()
        )));
    }
    let n = ch.len();
    let images: Vec<CMatrix<R>> = ch.kraus().iter().map(|a| a * rho.matrix()).collect();
    let mut w = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // tr(A_i ρ A_j†) = Σ_ab (A_i ρ)_ab conj(A_j)_ab
            let v = ch.kraus()[j].dotc(&images[i]);
            w[(i, j)] = v;
            w[(j, i)] = v.conj();
        }
    }
    Ok(w)
}

fn require_normalized<R: Real>(rho: &Density<R>) -> Result<()> {
    let tr = rho.trace();
    if (tr - R::one()).abs() > R::lit(Tolerances::default().trace) {
        return Err(Error::input(format!(
            "expected a normalized state (trace {:.6})",
            tr.as_f64()
        )));
    }
    Ok(())
}

fn require_trace_preserving<R: Real>(ch: &KrausChannel<R>) -> Result<()> {
    if !ch.is_trace_preserving() {
        return Err(Error::input("entropic quantities need a trace-preserving channel"));
    }
    Ok(())
}

/// S_e(ρ, N) = S(W) in bits.
pub fn entropy_exchange<R: Real>(ch: &KrausChannel<R>, rho: &Density<R>) -> Result<R> {
    require_normalized(rho)?;
    require_trace_preserving(ch)?;
    let tol = Tolerances::default();
    let w = w_matrix(ch, rho)?;
    let eig = hermitian_eigen(&w, &tol)?;
    spectral_entropy(&eig.values, tol.psd)
}

/// I(ρ, N) = S(N(ρ)) − S_e(ρ, N) in bits.
pub fn coherent_information<R: Real>(ch: &KrausChannel<R>, rho: &Density<R>) -> Result<R> {
    let se = entropy_exchange(ch, rho)?;
    let out = ch.apply(rho)?.output;
    Ok(von_neumann_entropy(&out)? - se)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataProcessingReport<R: Real> {
    /// S(ρ).
    pub entropy: R,
    /// I(ρ, N1).
    pub first: R,
    /// I(ρ, N2 ∘ N1).
    pub composed: R,
    pub passed: bool,
}

/// Checks S(ρ) ≥ I(ρ, N1) ≥ I(ρ, N2∘N1) within 1e-7.
pub fn data_processing_check<R: Real>(
    ch1: &KrausChannel<R>,
    ch2: &KrausChannel<R>,
    rho: &Density<R>,
) -> Result<DataProcessingReport<R>> {
    let entropy = von_neumann_entropy(rho)?;
    let first = coherent_information(ch1, rho)?;
    let composed = coherent_information(&ch1.then(ch2)?, rho)?;
    let tol = R::lit(1e-7);
    Ok(DataProcessingReport {
        entropy,
        first,
        composed,
        passed: entropy + tol >= first && first + tol >= composed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitalRateReport<R: Real> {
    /// log2 M − log2 N' with N' the number of nonzero diagonal Kraus operators.
    pub log_rate: R,
    /// I(π_Q, N).
    pub coherent_information: R,
    pub unital: bool,
    /// (1/M) tr A_i†A_i = 1/N' for every nonzero operator.
    pub equal_probability: bool,
    pub nonzero_kraus: usize,
    /// Kraus probabilities of the diagonal representation, descending.
    pub probabilities: Vec<R>,
    /// |log_rate − coherent_information| ≤ 1e-8.
    pub coincide: bool,
}

pub fn unital_rate_report<R: Real>(ch: &KrausChannel<R>) -> Result<UnitalRateReport<R>> {
    require_trace_preserving(ch)?;
    let tol = Tolerances::default();
    let m = ch.input_dim();
    let diag = ch.diagonalize(&identity(m))?.pruned(tol.prune);
    let mr = R::of_usize(m);
    let probabilities: Vec<R> = diag
        .kraus()
        .iter()
        .map(|a| crate::linalg::frobenius_sq(a) / mr)
        .collect();
    let nonzero = probabilities.len();
    let target = R::one() / R::of_usize(nonzero);
    let equal_probability = probabilities.iter().all(|p| (*p - target).abs() <= R::lit(1e-8));
    let log_rate = mr.lg() - R::of_usize(nonzero).lg();
    let ci = coherent_information(ch, &Density::maximally_mixed(m))?;
    Ok(UnitalRateReport {
        log_rate,
        coherent_information: ci,
        unital: ch.is_unital(),
        equal_probability,
        nonzero_kraus: nonzero,
        coincide: (log_rate - ci).abs() <= R::lit(1e-8),
        probabilities,
    })
}

/// Shannon entropy of the Kraus probabilities (1/M) tr A_i†A_i of the
/// diagonal representation; equals S_e(π_Q, N).
pub fn kraus_probability_entropy<R: Real>(ch: &KrausChannel<R>) -> Result<R> {
    let m = ch.input_dim();
    let diag = ch.diagonalize(&identity(m))?;
    let probs: Vec<R> = diag
        .kraus()
        .iter()
        .map(|a| crate::linalg::frobenius_sq(a) / R::of_usize(m))
        .collect();
    Ok(shannon_entropy(&probs))
}
