//! Dense complex linear algebra: norms, Kronecker products, partial traces,
//! Hermitian spectra, entropies, fidelities and Haar-distributed samples.
//!
//! Matrices are `nalgebra::DMatrix<Complex<R>>`. Kronecker products use the
//! standard ordering, row index `i_a * rows_b + i_b`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{abs2, cabs, creal, Real};
use crate::settings::{Limits, Tolerances};

pub type CMatrix<R> = DMatrix<Complex<R>>;
pub type CVector<R> = DVector<Complex<R>>;

pub fn identity<R: Real>(d: usize) -> CMatrix<R> {
    CMatrix::identity(d, d)
}

pub fn trace<R: Real>(a: &CMatrix<R>) -> Complex<R> {
    a.diagonal().iter().fold(Complex::new(R::zero(), R::zero()), |acc, z| acc + *z)
}

pub fn ensure_finite<R: Real>(a: &CMatrix<R>) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::input("matrix has non-finite entries"))
    }
}

fn ensure_square<R: Real>(a: &CMatrix<R>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::input(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Sum of singular values.
pub fn trace_norm<R: Real>(a: &CMatrix<R>) -> Result<R> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Ok(R::zero());
    }
    Ok(a.clone().singular_values().iter().fold(R::zero(), |s, v| s + *v))
}

/// sqrt(sum |a_ij|^2).
pub fn frobenius_norm<R: Real>(a: &CMatrix<R>) -> Result<R> {
    ensure_finite(a)?;
    Ok(frobenius_sq(a).sqrt())
}

pub(crate) fn frobenius_sq<R: Real>(a: &CMatrix<R>) -> R {
    a.iter().fold(R::zero(), |s, z| s + abs2(*z))
}

/// Kronecker product, refusing results larger than `limits.max_dim`.
pub fn kron<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>, limits: &Limits) -> Result<CMatrix<R>> {
    let rows = a.nrows() as u128 * b.nrows() as u128;
    let cols = a.ncols() as u128 * b.ncols() as u128;
    limits.check_dim("kron dimension", rows.max(cols))?;
    Ok(a.kronecker(b))
}

/// Which factor of a bipartite space to keep in [`partial_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Reduces an operator on `H1 ⊗ H2` (dims `(d1, d2)`) to the kept factor.
pub fn partial_trace<R: Real>(
    a: &CMatrix<R>,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<CMatrix<R>> {
    let (d1, d2) = dims;
    let n = ensure_square(a)?;
    if d1 == 0 || d2 == 0 || d1 * d2 != n {
        return Err(Error::input(format!(
            "partial trace dims {d1}x{d2} do not match operator dimension {n}"
        )));
    }
    let out = match keep {
        Subsystem::First => CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).fold(creal(R::zero()), |s, k| s + a[(i * d2 + k, j * d2 + k)])
        }),
        Subsystem::Second => CMatrix::from_fn(d2, d2, |i, j| {
            (0..d1).fold(creal(R::zero()), |s, k| s + a[(k * d2 + i, k * d2 + j)])
        }),
    };
    Ok(out)
}

/// max |A_ij - conj(A_ji)|.
pub fn hermitian_residual<R: Real>(a: &CMatrix<R>) -> R {
    let n = a.nrows().min(a.ncols());
    let mut worst = R::zero();
    for i in 0..n {
        for j in i..n {
            let d = cabs(a[(i, j)] - a[(j, i)].conj());
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub(crate) fn hermitian_part<R: Real>(a: &CMatrix<R>) -> CMatrix<R> {
    (a + a.adjoint()).scale(R::lit(0.5))
}

/// Spectrum of a Hermitian matrix; `vectors` holds eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen<R: Real> {
    pub values: Vec<R>,
    pub vectors: CMatrix<R>,
}

impl<R: Real> HermitianEigen<R> {
    /// V diag(f(λ)) V†.
    pub fn map(&self, f: impl Fn(R) -> R) -> CMatrix<R> {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, lam) in self.values.iter().enumerate() {
            let s = creal(f(*lam));
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition after verifying Hermiticity within `tol.hermitian`.
pub fn hermitian_eigen<R: Real>(a: &CMatrix<R>, tol: &Tolerances) -> Result<HermitianEigen<R>> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let res = hermitian_residual(a);
    if res > R::lit(tol.hermitian) {
        return Err(Error::input(format!(
            "matrix is not Hermitian (residual {:.3e})",
            res.as_f64()
        )));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    Ok(HermitianEigen {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: eig.eigenvectors,
    })
}

/// Clamps eigenvalues in `[-psd, 0)` to zero; more negative values are errors.
pub(crate) fn clamp_psd<R: Real>(values: &[R], psd_tol: f64) -> Result<Vec<R>> {
    values
        .iter()
        .map(|&v| {
            if v >= R::zero() {
                Ok(v)
            } else if v >= -R::lit(psd_tol) {
                Ok(R::zero())
            } else {
                Err(Error::input(format!(
                    "operator is not positive semidefinite (eigenvalue {:.3e})",
                    v.as_f64()
                )))
            }
        })
        .collect()
}

/// -Σ p log2 p with 0 log 0 = 0.
pub fn shannon_entropy<R: Real>(probs: &[R]) -> R {
    probs
        .iter()
        .filter(|p| **p > R::zero())
        .fold(R::zero(), |s, p| s - *p * p.lg())
}

/// Entropy in bits of a PSD spectrum after clamping.
pub fn spectral_entropy<R: Real>(values: &[R], psd_tol: f64) -> Result<R> {
    Ok(shannon_entropy(&clamp_psd(values, psd_tol)?))
}

/// Hermitian square root of a PSD matrix.
pub fn psd_sqrt<R: Real>(a: &CMatrix<R>, tol: &Tolerances) -> Result<CMatrix<R>> {
    let eig = hermitian_eigen(a, tol)?;
    let vals = clamp_psd(&eig.values, tol.psd)?;
    let eig = HermitianEigen {
        values: vals,
        vectors: eig.vectors,
    };
    Ok(eig.map(|v| v.sqrt()))
}

/// Positive semidefinite operator with trace at most one.
///
/// Selective (trace-decreasing) maps produce sub-normalized states, so the
/// trace is only bounded above.
#[derive(Debug, Clone, PartialEq)]
pub struct Density<R: Real> {
    mat: CMatrix<R>,
}

impl<R: Real> Density<R> {
    pub fn new(mat: CMatrix<R>) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: CMatrix<R>, tol: &Tolerances) -> Result<Self> {
        let eig = hermitian_eigen(&mat, tol)?;
        clamp_psd(&eig.values, tol.psd)?;
        let tr = trace(&mat).re;
        if tr > R::one() + R::lit(tol.trace) {
            return Err(Error::input(format!("density trace {:.6} exceeds 1", tr.as_f64())));
        }
        Ok(Density {
            mat: hermitian_part(&mat),
        })
    }

    /// Wraps a matrix already known to be a valid (sub-)density.
    pub(crate) fn from_raw(mat: CMatrix<R>) -> Self {
        Density {
            mat: hermitian_part(&mat),
        }
    }

    /// `1/d` on a `d`-dimensional space.
    pub fn maximally_mixed(d: usize) -> Self {
        Density {
            mat: identity::<R>(d).scale(R::one() / R::of_usize(d)),
        }
    }

    /// |ψ⟩⟨ψ| for a column vector normalized here.
    pub fn pure(psi: &CVector<R>) -> Result<Self> {
        let norm = psi.norm();
        if norm <= R::zero() || !norm.is_finite() {
            return Err(Error::input("pure state vector has zero or non-finite norm"));
        }
        let v = psi.unscale(norm);
        Ok(Density {
            mat: &v * v.adjoint(),
        })
    }

    /// Π / tr Π for a projector (or any PSD operator) Π.
    pub fn normalized(p: &CMatrix<R>) -> Result<Self> {
        let tr = trace(p).re;
        if tr <= R::zero() {
            return Err(Error::input("cannot normalize an operator with non-positive trace"));
        }
        Self::new(p.unscale(tr))
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<R> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> R {
        trace(&self.mat).re
    }

    /// ρ ⊗ σ.
    pub fn tensor(&self, other: &Density<R>, limits: &Limits) -> Result<Self> {
        Ok(Density {
            mat: kron(&self.mat, &other.mat, limits)?,
        })
    }
}

/// S(ρ) = -tr ρ log2 ρ in bits. Requires trace 1 within `trace_tol`.
pub fn von_neumann_entropy<R: Real>(rho: &Density<R>) -> Result<R> {
    von_neumann_entropy_with(rho, &Tolerances::default())
}

pub fn von_neumann_entropy_with<R: Real>(rho: &Density<R>, tol: &Tolerances) -> Result<R> {
    let tr = rho.trace();
    if (tr - R::one()).abs() > R::lit(tol.trace) {
        return Err(Error::input(format!(
            "entropy needs a normalized state (trace {:.6})",
            tr.as_f64()
        )));
    }
    let eig = hermitian_eigen(rho.matrix(), tol)?;
    spectral_entropy(&eig.values, tol.psd)
}

/// F(ρ, σ) = ‖√ρ √σ‖²_tr (squared convention).
pub fn state_fidelity<R: Real>(rho: &Density<R>, sigma: &Density<R>) -> Result<R> {
    if rho.dim() != sigma.dim() {
        return Err(Error::input("fidelity arguments have different dimensions"));
    }
    let tol = Tolerances::default();
    let a = psd_sqrt(rho.matrix(), &tol)?;
    let b = psd_sqrt(sigma.matrix(), &tol)?;
    let t = trace_norm(&(a * b))?;
    Ok(t * t)
}

fn gaussian<R: Real, G: Rng + ?Sized>(rng: &mut G) -> Complex<R> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(R::lit(re * std::f64::consts::FRAC_1_SQRT_2), R::lit(im * std::f64::consts::FRAC_1_SQRT_2))
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Real, G: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut G) -> CMatrix<R> {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// diag(R) moved into Q.
pub fn haar_unitary<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G) -> CMatrix<R> {
    assert!(d >= 1, "haar_unitary needs d >= 1");
    let qr = ginibre::<R, G>(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let mag = cabs(rjj);
        let phase = if mag > R::zero() { rjj.unscale(mag) } else { creal(R::one()) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unit vector (normalized Gaussian vector).
pub fn random_pure_state<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G) -> CVector<R> {
    assert!(d >= 1, "random_pure_state needs d >= 1");
    let mut v = CVector::from_fn(d, |_, _| gaussian::<R, G>(rng));
    let n = v.norm();
    v.unscale_mut(n);
    v
}

/// Random full-rank density G G† / tr(G G†).
pub fn random_density<R: Real, G: Rng + ?Sized>(d: usize, rng: &mut G) -> Density<R> {
    let g = ginibre::<R, G>(d, d, rng);
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    Density::from_raw(m.unscale(tr))
}

/// Isometry whose columns span the orthogonal complement of the unit vector
/// `x` inside `C^k`.
pub(crate) fn orthogonal_complement<R: Real>(x: &CVector<R>) -> CMatrix<R> {
    let k = x.len();
    let proj = identity::<R>(k) - x * x.adjoint();
    let eig = SymmetricEigen::new(hermitian_part(&proj));
    let mut cols: Vec<(R, usize)> = eig.eigenvalues.iter().copied().zip(0..k).collect();
    cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let keep: Vec<usize> = cols.iter().take(k - 1).map(|c| c.1).collect();
    CMatrix::from_fn(k, k - 1, |i, j| eig.eigenvectors[(i, keep[j])])
}
