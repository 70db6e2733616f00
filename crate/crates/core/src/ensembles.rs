//! Unitarily invariant code ensembles U_K(V) and their Monte Carlo checks.
//!
//! A subspace V of dimension L is held as an M×L isometry; random codes are
//! V·U·C_0 with U Haar on C^L and C_0 the first K basis vectors.

use rand::Rng;

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, haar_unitary, hermitian_eigen, identity, trace, CMatrix};
use crate::qec::{build_d_with, d_frobenius_sq, CodeSpace};
use crate::scalar::{abs2, Real};
use crate::settings::{Limits, Tolerances};
use crate::stats::{par_samples, MCEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec<R: Real> {
    ambient: CMatrix<R>,
    code_dim: usize,
    samples: usize,
    master_seed: u64,
}

impl<R: Real> EnsembleSpec<R> {
    /// Codes drawn from the whole space C^m.
    pub fn full(m: usize, code_dim: usize, samples: usize, master_seed: u64) -> Result<Self> {
        Self::new(identity(m), code_dim, samples, master_seed)
    }

    /// Codes drawn inside the span of the orthonormal columns of `isometry`.
    pub fn new(isometry: CMatrix<R>, code_dim: usize, samples: usize, master_seed: u64) -> Result<Self> {
        // reuse the code-basis validation for the isometry
        let v = CodeSpace::new(isometry)?;
        let l = v.code_dim();
        if code_dim == 0 || code_dim > l {
            return Err(Error::input(format!(
                "code dimension {code_dim} must lie in 1..={l}"
            )));
        }
        if samples == 0 {
            return Err(Error::input("an ensemble needs at least one sample"));
        }
        Ok(EnsembleSpec {
            ambient: v.basis().clone(),
            code_dim,
            samples,
            master_seed,
        })
    }

    /// Codes drawn inside the range of an orthogonal projector.
    pub fn from_projector(p: &CMatrix<R>, code_dim: usize, samples: usize, master_seed: u64) -> Result<Self> {
        crate::channels::check_projector(p, p.nrows())?;
        let eig = hermitian_eigen(p, &Tolerances::default())?;
        let cols: Vec<usize> = (0..eig.values.len())
            .filter(|&j| eig.values[j] > R::lit(0.5))
            .collect();
        if cols.is_empty() {
            return Err(Error::input("projector is zero"));
        }
        let iso = CMatrix::from_fn(p.nrows(), cols.len(), |i, j| eig.vectors[(i, cols[j])]);
        Self::new(iso, code_dim, samples, master_seed)
    }

    pub fn isometry(&self) -> &CMatrix<R> {
        &self.ambient
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient.nrows()
    }

    /// L = dim V.
    pub fn subspace_dim(&self) -> usize {
        self.ambient.ncols()
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn is_full(&self) -> bool {
        self.subspace_dim() == self.ambient_dim()
    }

    /// Π_V.
    pub fn projector(&self) -> CMatrix<R> {
        &self.ambient * self.ambient.adjoint()
    }
}

pub fn sample_code<R: Real, G: Rng + ?Sized>(spec: &EnsembleSpec<R>, rng: &mut G) -> CodeSpace<R> {
    let u = haar_unitary::<R, G>(spec.subspace_dim(), rng);
    let basis = spec.isometry() * u.columns(0, spec.code_dim);
    CodeSpace::new(basis).expect("isometry times unitary columns is orthonormal")
}

fn check_channel<R: Real>(ch: &KrausChannel<R>, spec: &EnsembleSpec<R>) -> Result<()> {
    if ch.input_dim() != spec.ambient_dim() {
        return Err(Error::input(format!(
            "ensemble lives in dimension {} but the channel acts on dimension {}",
            spec.ambient_dim(),
            ch.input_dim()
        )));
    }
    Ok(())
}

/// |⟨e_1|P|e_1⟩|² over random K-dimensional codes in C^M, compared with
/// (K² + K)/(M² + M).
pub fn mc_projector_moment<R: Real>(m: usize, k: usize, samples: usize, master_seed: u64) -> Result<MCEstimate<R>> {
    let spec = EnsembleSpec::<R>::full(m, k, samples, master_seed)?;
    let xs = par_samples(master_seed, samples, |rng| {
        let code = sample_code(&spec, rng);
        let b = code.basis();
        let diag = (0..k).fold(R::zero(), |s, l| s + abs2(b[(0, l)]));
        diag * diag
    });
    let (mr, kr) = (R::of_usize(m), R::of_usize(k));
    Ok(MCEstimate::from_samples(&xs).with_closed_form((kr * kr + kr) / (mr * mr + mr)))
}

/// Exact ensemble mean of ‖D‖_F² over U_K:
/// (1 − 1/K²)/(M² − 1) Σ_ij (tr W_ij†W_ij − |tr W_ij|²/M), W_ij = A_i†A_j.
pub fn closed_form_avg_d_frobenius_sq<R: Real>(ch: &KrausChannel<R>, k: usize) -> Result<R> {
    closed_form_avg_d_frobenius_sq_in(ch, k, &identity(ch.input_dim()))
}

/// The same average over U_K(V), obtained by compressing every W_ij to
/// V†W_ijV and replacing M by L = dim V.
pub fn closed_form_avg_d_frobenius_sq_in<R: Real>(ch: &KrausChannel<R>, k: usize, v: &CMatrix<R>) -> Result<R> {
    if v.nrows() != ch.input_dim() {
        return Err(Error::input("subspace isometry does not match the channel input"));
    }
    let l = v.ncols();
    if k == 0 || k > l {
        return Err(Error::input(format!("code dimension {k} must lie in 1..={l}")));
    }
    if k == 1 {
        return Ok(R::zero());
    }
    let lr = R::of_usize(l);
    let kr = R::of_usize(k);
    let c: Vec<CMatrix<R>> = ch.kraus().iter().map(|a| a * v).collect();
    let mut acc = R::zero();
    for ci in &c {
        for cj in &c {
            let w = ci.adjoint() * cj;
            acc += frobenius_sq(&w) - abs2(trace(&w)) / lr;
        }
    }
    Ok((R::one() - R::one() / (kr * kr)) / (lr * lr - R::one()) * acc)
}

/// N(π_V).
pub fn output_of_pi_v<R: Real>(ch: &KrausChannel<R>, v: &CMatrix<R>) -> CMatrix<R> {
    let pi_v = (v * v.adjoint()).unscale(R::of_usize(v.ncols()));
    ch.apply_operator(&pi_v)
}

/// Minimal Kraus set relative to V: diagonal Gram on V, operators that
/// vanish on V removed.
pub fn minimal_representation<R: Real>(ch: &KrausChannel<R>, v: &CMatrix<R>) -> Result<KrausChannel<R>> {
    let p = v * v.adjoint();
    let diag = ch.diagonalize(&p)?;
    let t2 = R::lit(Tolerances::default().prune.powi(2));
    let keep: Vec<usize> = (0..diag.len())
        .filter(|&i| frobenius_sq(&(&diag.kraus()[i] * v)) > t2)
        .collect();
    if keep.is_empty() {
        return Err(Error::input("every Kraus operator vanishes on the subspace"));
    }
    Ok(diag.select(&keep))
}

/// Number of Kraus operators with A_iΠ_V ≠ 0 after diagonalization.
pub fn effective_kraus_count<R: Real>(ch: &KrausChannel<R>, v: &CMatrix<R>) -> Result<usize> {
    Ok(minimal_representation(ch, v)?.len())
}

/// tr N(π_V) − sqrt(K N)·‖N(π_V)‖_F, unclamped.
pub fn ensemble_fidelity_bound<R: Real>(ch: &KrausChannel<R>, k: usize, v: &CMatrix<R>) -> Result<R> {
    if v.nrows() != ch.input_dim() {
        return Err(Error::input("subspace isometry does not match the channel input"));
    }
    let out = output_of_pi_v(ch, v);
    let n = effective_kraus_count(ch, v)?;
    let kn = R::of_usize(k * n);
    Ok(trace(&out).re - kn.sqrt() * frobenius_sq(&out).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DAverageReport<R: Real> {
    /// Sampled ‖D‖_F² with the exact ensemble mean as closed form.
    pub estimate: MCEstimate<R>,
    /// ‖N(π_V)‖_F².
    pub upper_bound: R,
}

impl<R: Real> DAverageReport<R> {
    pub fn within_upper_bound(&self, sigmas: f64) -> bool {
        self.estimate.mean <= self.upper_bound + R::lit(sigmas) * self.estimate.stderr + R::lit(1e-12)
    }
}

pub fn mc_avg_d_frobenius_sq<R: Real>(ch: &KrausChannel<R>, spec: &EnsembleSpec<R>) -> Result<DAverageReport<R>> {
    mc_avg_d_frobenius_sq_with(ch, spec, &Limits::default())
}

pub fn mc_avg_d_frobenius_sq_with<R: Real>(
    ch: &KrausChannel<R>,
    spec: &EnsembleSpec<R>,
    limits: &Limits,
) -> Result<DAverageReport<R>> {
    check_channel(ch, spec)?;
    limits.check_dim(
        "D operator dimension K*N",
        (spec.code_dim() as u128) * (ch.len() as u128),
    )?;
    let xs = par_samples(spec.master_seed(), spec.samples(), |rng| {
        let code = sample_code(spec, rng);
        d_frobenius_sq(ch, &code)
    })
    .into_iter()
    .collect::<Result<Vec<R>>>()?;
    let exact = closed_form_avg_d_frobenius_sq_in(ch, spec.code_dim(), spec.isometry())?;
    let out = output_of_pi_v(ch, spec.isometry());
    Ok(DAverageReport {
        estimate: MCEstimate::from_samples(&xs).with_closed_form(exact),
        upper_bound: frobenius_sq(&out),
    })
}

/// tr N(π_C) over the ensemble, compared with tr N(π_V).
pub fn mc_trace_identity<R: Real>(ch: &KrausChannel<R>, spec: &EnsembleSpec<R>) -> Result<MCEstimate<R>> {
    check_channel(ch, spec)?;
    let kr = R::of_usize(spec.code_dim());
    let xs = par_samples(spec.master_seed(), spec.samples(), |rng| {
        let code = sample_code(spec, rng);
        ch.kraus()
            .iter()
            .fold(R::zero(), |s, a| s + frobenius_sq(&(a * code.basis())))
            / kr
    });
    let closed = trace(&output_of_pi_v(ch, spec.isometry())).re;
    Ok(MCEstimate::from_samples(&xs).with_closed_form(closed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFidelityReport<R: Real> {
    /// Per-code bound tr N(π_C) − ‖D‖_tr.
    pub bound: MCEstimate<R>,
    pub trace_norm_d: MCEstimate<R>,
    pub frobenius_sq_d: MCEstimate<R>,
    /// sqrt(K N)‖D‖_F / ‖D‖_tr averaged over codes.
    pub frobenius_ratio: MCEstimate<R>,
    /// tr N(π_V) − sqrt(K N ⟨‖D‖_F²⟩) with the exact ensemble mean.
    pub analytic_bound: R,
    /// tr N(π_V) − sqrt(K N)‖N(π_V)‖_F.
    pub simple_bound: R,
    /// Kraus operators in the minimal representation.
    pub kraus_count: usize,
    /// Largest per-code bound seen.
    pub max_bound: R,
}

impl<R: Real> EnsembleFidelityReport<R> {
    /// Mean per-code bound ≥ analytic bound − k·stderr.
    pub fn jensen_holds(&self, k: f64) -> bool {
        self.bound.mean + R::lit(k) * self.bound.stderr + R::lit(1e-12) >= self.analytic_bound
    }

    /// ⟨‖D‖_tr⟩ ≤ sqrt(K N ⟨‖D‖_F²⟩) + k·stderr.
    pub fn trace_frobenius_holds(&self, k: f64, code_dim: usize) -> bool {
        let kn = R::of_usize(code_dim * self.kraus_count);
        self.trace_norm_d.mean
            <= (kn * self.frobenius_sq_d.mean).sqrt() + R::lit(k) * self.trace_norm_d.stderr + R::lit(1e-12)
    }
}

pub fn mc_ensemble_fidelity<R: Real>(ch: &KrausChannel<R>, spec: &EnsembleSpec<R>) -> Result<EnsembleFidelityReport<R>> {
    mc_ensemble_fidelity_with(ch, spec, &Limits::default())
}

pub fn mc_ensemble_fidelity_with<R: Real>(
    ch: &KrausChannel<R>,
    spec: &EnsembleSpec<R>,
    limits: &Limits,
) -> Result<EnsembleFidelityReport<R>> {
    check_channel(ch, spec)?;
    let v = spec.isometry();
    let min = minimal_representation(ch, v)?;
    let n = min.len();
    let k = spec.code_dim();
    limits.check_dim("D operator dimension K*N", (k as u128) * (n as u128))?;
    let rows = par_samples(spec.master_seed(), spec.samples(), |rng| {
        let code = sample_code(spec, rng);
        build_d_with(&min, &code, limits).map(|d| {
            (
                d.fidelity_lower_bound,
                d.trace_norm_d,
                d.frobenius_sq_d,
                d.frobenius_ratio(),
            )
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&(R, R, R, R)) -> R| -> Vec<R> { rows.iter().map(f).collect() };
    let bounds = col(|r| r.0);
    let max_bound = bounds.iter().fold(R::lit(f64::NEG_INFINITY), |m, b| m.max(*b));
    let out = output_of_pi_v(ch, v);
    let tr_v = trace(&out).re;
    let avg_frob = closed_form_avg_d_frobenius_sq_in(&min, k, v)?;
    let kn = R::of_usize(k * n);
    Ok(EnsembleFidelityReport {
        bound: MCEstimate::from_samples(&bounds),
        trace_norm_d: MCEstimate::from_samples(&col(|r| r.1)),
        frobenius_sq_d: MCEstimate::from_samples(&col(|r| r.2)).with_closed_form(avg_frob),
        frobenius_ratio: MCEstimate::from_samples(&col(|r| r.3)),
        analytic_bound: tr_v - (kn * avg_frob).sqrt(),
        simple_bound: tr_v - kn.sqrt() * frobenius_sq(&out).sqrt(),
        kraus_count: n,
        max_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_standard, random_channel, StandardChannel};
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    #[test]
    fn full_rank_sample_is_the_subspace() {
        let v = CodeSpace::<f64>::random(5, 3, &mut seeded(1)).unwrap();
        let spec = EnsembleSpec::new(v.basis().clone(), 3, 1, 0).unwrap();
        let code = sample_code(&spec, &mut seeded(2));
        let diff = code.projector() - spec.projector();
        assert!(diff.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn from_projector_roundtrip() {
        let v = CodeSpace::<f64>::random(4, 2, &mut seeded(3)).unwrap();
        let spec = EnsembleSpec::from_projector(&v.projector(), 1, 1, 0).unwrap();
        assert_eq!(spec.subspace_dim(), 2);
        let diff = spec.projector() - v.projector();
        assert!(diff.iter().all(|z| z.norm() < 1e-10));
        assert!(EnsembleSpec::<f64>::full(3, 4, 1, 0).is_err());
    }

    #[test]
    fn projector_moment() {
        let e = mc_projector_moment::<f64>(2, 1, 4000, 11).unwrap();
        assert_abs_diff_eq!(e.closed_form.unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(e.agrees_within(3.0), "{e:?}");
        let e = mc_projector_moment::<f64>(3, 3, 50, 12).unwrap();
        assert_abs_diff_eq!(e.mean, 1.0, epsilon = 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn closed_form_trivial_cases() {
        let id = make_standard::<f64>(StandardChannel::Identity { dim: 4 }).unwrap();
        assert_abs_diff_eq!(closed_form_avg_d_frobenius_sq(&id, 2).unwrap(), 0.0, epsilon = 1e-14);
        let ch = random_channel::<f64, _>(4, 2, &mut seeded(4)).unwrap();
        assert_eq!(closed_form_avg_d_frobenius_sq(&ch, 1).unwrap(), 0.0);
    }

    #[test]
    fn d_average_matches_closed_form() {
        let ch = random_channel::<f64, _>(4, 2, &mut seeded(5)).unwrap();
        let spec = EnsembleSpec::full(4, 2, 3000, 21).unwrap();
        let r = mc_avg_d_frobenius_sq(&ch, &spec).unwrap();
        assert!(r.estimate.agrees_within(3.0), "{:?}", r.estimate);
        assert!(r.within_upper_bound(3.0));
    }

    #[test]
    fn d_average_in_subspace() {
        let mut rng = seeded(6);
        let ch = random_channel::<f64, _>(6, 2, &mut rng).unwrap();
        let v = CodeSpace::<f64>::random(6, 4, &mut rng).unwrap();
        let spec = EnsembleSpec::new(v.basis().clone(), 2, 3000, 22).unwrap();
        let r = mc_avg_d_frobenius_sq(&ch, &spec).unwrap();
        assert!(r.estimate.agrees_within(3.0), "{:?}", r.estimate);
        assert!(r.within_upper_bound(3.0));
    }

    #[test]
    fn identity_channel_ensemble() {
        let id = make_standard::<f64>(StandardChannel::Identity { dim: 4 }).unwrap();
        let spec = EnsembleSpec::full(4, 2, 50, 1).unwrap();
        let r = mc_avg_d_frobenius_sq(&id, &spec).unwrap();
        assert!(r.estimate.mean.abs() < 1e-14 && r.estimate.stderr < 1e-14);
        let f = mc_ensemble_fidelity(&id, &spec).unwrap();
        assert_abs_diff_eq!(f.bound.mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_bound_examples() {
        // unital: 1 − sqrt(KN/M)
        let dep = make_standard::<f64>(StandardChannel::Depolarizing { p: 0.3 }).unwrap();
        let b = ensemble_fidelity_bound(&dep, 1, &identity(2)).unwrap();
        assert_abs_diff_eq!(b, 1.0 - (4.0f64 / 2.0).sqrt(), epsilon = 1e-12);
        let id = make_standard::<f64>(StandardChannel::Identity { dim: 4 }).unwrap();
        let b = ensemble_fidelity_bound(&id, 1, &identity(4)).unwrap();
        assert_abs_diff_eq!(b, 1.0 - 0.5, epsilon = 1e-12);
        let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.5 }).unwrap();
        assert_abs_diff_eq!(ensemble_fidelity_bound(&pf, 1, &identity(2)).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_identity() {
        let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.3 }).unwrap();
        let sel = pf.restrict(&[0]).unwrap();
        let spec = EnsembleSpec::full(2, 1, 500, 3).unwrap();
        let e = mc_trace_identity(&sel, &spec).unwrap();
        assert_abs_diff_eq!(e.closed_form.unwrap(), 0.7, epsilon = 1e-12);
        assert!(e.agrees_within(3.0));
        let e = mc_trace_identity(&pf, &spec).unwrap();
        assert_abs_diff_eq!(e.mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ensemble_fidelity_chain() {
        let ch = random_channel::<f64, _>(8, 2, &mut seeded(7)).unwrap();
        let spec = EnsembleSpec::full(8, 1, 400, 4).unwrap();
        let r = mc_ensemble_fidelity(&ch, &spec).unwrap();
        assert!(r.jensen_holds(3.0));
        assert!(r.trace_frobenius_holds(3.0, 1));
        assert!(r.max_bound <= 1.0 + 1e-9);
        assert!(r.bound.mean <= 1.0 + 1e-12);
    }
}
