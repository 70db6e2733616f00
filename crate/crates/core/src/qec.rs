//! Code subspaces, correctability, the D-operator bound and recoveries.
//!
//! For a code with isometric basis B (M×K) and channel Kraus operators A_i,
//! most quantities only need the images C_i = A_i B and their K×K products
//! C_i†C_j, so nothing here works in the full ambient space unless asked to.

use rand::Rng;

use crate::channels::{ChannelKind, KrausChannel};
use crate::error::{Error, Result};
use crate::info::coherent_information;
use crate::linalg::{
    frobenius_sq, haar_unitary, hermitian_eigen, identity, orthogonal_complement, random_pure_state,
    trace, CMatrix, CVector, Density,
};
use crate::rng::task_rng;
use crate::scalar::{abs2, cabs, creal, Real};
use crate::settings::{Limits, Tolerances};
use crate::stats::{par_samples, MCEstimate};

/// Subspace C of the input space, stored as an M×K matrix with orthonormal
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpace<R: Real> {
    basis: CMatrix<R>,
}

impl<R: Real> CodeSpace<R> {
    /// Orthonormality is checked to within 1e-10 (or 100 ulp for `f32`).
    pub fn new(basis: CMatrix<R>) -> Result<Self> {
        let tol = 1e-10f64.max(100.0 * R::default_epsilon().as_f64());
        Self::with_tolerance(basis, tol)
    }

    pub fn with_tolerance(basis: CMatrix<R>, tol: f64) -> Result<Self> {
        let (m, k) = basis.shape();
        if k == 0 || m == 0 {
            return Err(Error::input("a code needs at least one basis vector"));
        }
        if k > m {
            return Err(Error::input(format!(
                "code dimension {k} exceeds ambient dimension {m}"
            )));
        }
        crate::linalg::ensure_finite(&basis)?;
        let gram = basis.adjoint() * &basis;
        let dev = (gram - identity::<R>(k))
            .iter()
            .fold(R::zero(), |acc, z| acc.max(cabs(*z)));
        if dev > R::lit(tol) {
            return Err(Error::input(format!(
                "code basis is not orthonormal (max deviation {:.3e})",
                dev.as_f64()
            )));
        }
        Ok(CodeSpace { basis })
    }

    /// The whole space C^m.
    pub fn full(m: usize) -> Self {
        CodeSpace { basis: identity(m) }
    }

    /// span{|000⟩, |111⟩} inside three qubits.
    pub fn repetition3() -> Self {
        let mut b = CMatrix::zeros(8, 2);
        b[(0, 0)] = creal(R::one());
        b[(7, 1)] = creal(R::one());
        CodeSpace { basis: b }
    }

    /// First `k` columns of a Haar-random unitary on C^m.
    pub fn random<G: Rng + ?Sized>(m: usize, k: usize, rng: &mut G) -> Result<Self> {
        if k == 0 || k > m {
            return Err(Error::input(format!("need 1 <= K <= M, got K={k}, M={m}")));
        }
        let u = haar_unitary::<R, G>(m, rng);
        Ok(CodeSpace {
            basis: u.columns(0, k).into_owned(),
        })
    }

    pub fn basis(&self) -> &CMatrix<R> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn code_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// P = B B†.
    pub fn projector(&self) -> CMatrix<R> {
        &self.basis * self.basis.adjoint()
    }

    /// π_C = P / K.
    pub fn maximally_mixed(&self) -> Density<R> {
        Density::from_raw(self.projector().unscale(R::of_usize(self.code_dim())))
    }

    /// Pure code state B·x for a unit vector x in C^K.
    pub fn embed(&self, x: &CVector<R>) -> CVector<R> {
        &self.basis * x
    }
}

fn check_code_dims<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<()> {
    if ch.input_dim() != code.ambient_dim() {
        return Err(Error::input(format!(
            "code lives in dimension {} but the channel acts on dimension {}",
            code.ambient_dim(),
            ch.input_dim()
        )));
    }
    Ok(())
}

fn code_images<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Vec<CMatrix<R>> {
    ch.kraus().iter().map(|a| a * code.basis()).collect()
}

/// Knill-Laflamme residual of a code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLReport<R: Real> {
    /// max_ij ‖P A_i†A_j P − (tr(P A_i†A_j P)/K) P‖_F.
    pub residual: R,
    pub exact: bool,
}

pub fn kl_check<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<KLReport<R>> {
    kl_check_with(ch, code, Tolerances::default().kl)
}

pub fn kl_check_with<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>, kl_tol: f64) -> Result<KLReport<R>> {
    check_code_dims(ch, code)?;
    let c = code_images(ch, code);
    let k = code.code_dim();
    let kr = R::of_usize(k);
    let mut residual = R::zero();
    // B is an isometry, so the Frobenius norm can be taken on the K×K block
    for i in 0..c.len() {
        for j in i..c.len() {
            let g = c[i].adjoint() * &c[j];
            let t = trace(&g) / creal(kr);
            let dev = g - identity::<R>(k) * t;
            residual = residual.max(frobenius_sq(&dev).sqrt());
        }
    }
    Ok(KLReport {
        residual,
        exact: residual <= R::lit(kl_tol),
    })
}

/// The operator D on C ⊗ H_E and the fidelity bound derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DReport<R: Real> {
    /// KN×KN Hermitian matrix, row index l·N + i for code index l and Kraus
    /// index i.
    pub d: CMatrix<R>,
    pub trace_norm_d: R,
    pub frobenius_sq_d: R,
    /// selection_probability − ‖D‖_tr, not clamped.
    pub fidelity_lower_bound: R,
    /// tr N(π_C); exactly 1 for trace-preserving channels.
    pub selection_probability: R,
}

impl<R: Real> DReport<R> {
    /// The bound clamped below at zero.
    pub fn clamped_bound(&self) -> R {
        self.fidelity_lower_bound.max(R::zero())
    }

    /// sqrt(K N)·‖D‖_F / ‖D‖_tr, at least one; large values mean the
    /// eigenvalues of D are spread unevenly.
    pub fn frobenius_ratio(&self) -> R {
        let kn = R::of_usize(self.d.nrows());
        if self.trace_norm_d <= R::zero() {
            return R::one();
        }
        (kn * self.frobenius_sq_d).sqrt() / self.trace_norm_d
    }
}

fn selection_probability<R: Real>(ch: &KrausChannel<R>, c: &[CMatrix<R>], k: usize) -> R {
    if ch.kind() == ChannelKind::TracePreserving {
        return R::one();
    }
    c.iter().fold(R::zero(), |s, ci| s + frobenius_sq(ci)) / R::of_usize(k)
}

pub fn build_d<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<DReport<R>> {
    build_d_with(ch, code, &Limits::default())
}

pub fn build_d_with<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>, limits: &Limits) -> Result<DReport<R>> {
    check_code_dims(ch, code)?;
    let k = code.code_dim();
    let n = ch.len();
    limits.check_dim("D operator dimension K*N", (k as u128) * (n as u128))?;
    let c = code_images(ch, code);
    let kr = R::of_usize(k);
    let mut d = CMatrix::zeros(k * n, k * n);
    for i in 0..n {
        for j in i..n {
            let g = c[i].adjoint() * &c[j];
            let t = trace(&g) / creal(kr);
            let block = (g - identity::<R>(k) * t).unscale(kr);
            for l in 0..k {
                for lp in 0..k {
                    let v = block[(l, lp)];
                    d[(l * n + i, lp * n + j)] = v;
                    d[(lp * n + j, l * n + i)] = v.conj();
                }
            }
        }
    }
    let tol = Tolerances::default();
    let eig = hermitian_eigen(&d, &tol)?;
    let trace_norm_d = eig.values.iter().fold(R::zero(), |s, v| s + v.abs());
    let frobenius_sq_d = frobenius_sq(&d);
    let selection_probability = selection_probability(ch, &c, k);
    Ok(DReport {
        d,
        trace_norm_d,
        frobenius_sq_d,
        fidelity_lower_bound: selection_probability - trace_norm_d,
        selection_probability,
    })
}

/// ‖D‖_F² without assembling D.
pub fn d_frobenius_sq<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<R> {
    check_code_dims(ch, code)?;
    let c = code_images(ch, code);
    let kr = R::of_usize(code.code_dim());
    let mut acc = R::zero();
    for i in 0..c.len() {
        for j in 0..c.len() {
            let g = c[i].adjoint() * &c[j];
            acc += frobenius_sq(&g) - abs2(trace(&g)) / kr;
        }
    }
    Ok(acc / (kr * kr))
}

fn require_square<R: Real>(ch: &KrausChannel<R>) -> Result<()> {
    if ch.input_dim() != ch.output_dim() {
        return Err(Error::input(
            "recovery construction needs equal input and output dimensions",
        ));
    }
    Ok(())
}

/// Recovery for a code satisfying the Knill-Laflamme conditions.
///
/// The returned map is trace-preserving: the last Kraus operator projects
/// onto the complement of the error images and is dropped when that
/// complement is empty.
pub fn exact_recovery<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<KrausChannel<R>> {
    require_square(ch)?;
    let kl = kl_check(ch, code)?;
    if !kl.exact {
        return Err(Error::precondition(
            format!(
                "code is not exactly correctable (KL residual {:.3e})",
                kl.residual.as_f64()
            ),
            Some(kl.residual.as_f64()),
        ));
    }
    let m = code.ambient_dim();
    let k = code.code_dim();
    let kr = R::of_usize(k);
    let c = code_images(ch, code);
    let n = c.len();
    let mut lambda = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = c[i].dotc(&c[j]) / creal(kr);
            lambda[(i, j)] = v;
            lambda[(j, i)] = v.conj();
        }
    }
    let eig = hermitian_eigen(&lambda, &Tolerances::default())?;
    let mut ops = Vec::new();
    let mut covered = CMatrix::<R>::zeros(m, m);
    for (kk, &dk) in eig.values.iter().enumerate() {
        if dk <= R::lit(1e-13) {
            continue;
        }
        let mut f = CMatrix::zeros(m, k);
        for (i, ci) in c.iter().enumerate() {
            f += ci * eig.vectors[(i, kk)];
        }
        let v = f.unscale(dk.sqrt());
        covered += &v * v.adjoint();
        ops.push(code.basis() * v.adjoint());
    }
    let complement = identity::<R>(m) - covered;
    if frobenius_sq(&complement) > R::lit(1e-20) {
        ops.push(complement);
    }
    KrausChannel::new(ops)
}

/// Recovery from Uhlmann's theorem applied to the purification of ρ'_RE and
/// of the decoupled state ρ_R ⊗ ρ'_E.
///
/// The ancilla S is a copy of RQ (dimension K·M) prepared in |0⟩; the
/// fidelity-achieving isometry X: Q → QS comes from the SVD of the M×(M·K·M)
/// overlap between the two purifications, and R(ρ) = tr_S XρX†.
pub fn uhlmann_recovery<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<KrausChannel<R>> {
    uhlmann_recovery_with(ch, code, &Limits::default()).map(|r| r.recovery)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UhlmannRecovery<R: Real> {
    pub recovery: KrausChannel<R>,
    /// F(ρ'_RE, ρ_R ⊗ ρ'_E) = (Σ singular values of the overlap)².
    pub uhlmann_fidelity: R,
    /// tr N(π_C).
    pub selection_probability: R,
}

pub fn uhlmann_recovery_with<R: Real>(
    ch: &KrausChannel<R>,
    code: &CodeSpace<R>,
    limits: &Limits,
) -> Result<UhlmannRecovery<R>> {
    check_code_dims(ch, code)?;
    require_square(ch)?;
    let m = code.ambient_dim();
    let k = code.code_dim();
    let n = ch.len();
    let s_dim = k * m;
    limits.check_dim("Uhlmann ancilla dimension K*M*M", (m as u128) * (s_dim as u128))?;
    limits.check_dim("reference-environment dimension K*N", (k as u128) * (n as u128))?;
    let c = code_images(ch, code);
    let p = c.iter().fold(R::zero(), |s, ci| s + frobenius_sq(ci)) / R::of_usize(k);
    if p <= R::lit(1e-300) {
        return Ok(UhlmannRecovery {
            recovery: KrausChannel::new(vec![identity(m)])?,
            uhlmann_fidelity: R::zero(),
            selection_probability: R::zero(),
        });
    }
    let inv_k = R::one() / R::of_usize(k).sqrt();
    let norm = inv_k / p.sqrt();
    // Ψ'[(l,i), q] = C_i[q,l] / sqrt(K p)
    let rows = k * n;
    let psi = CMatrix::from_fn(rows, m, |a, q| {
        let (l, i) = (a / n, a % n);
        c[i][(q, l)] * creal(norm)
    });
    // Ψ̃[(l,i), (q, l'·M + q')] = B[q,l]/sqrt(K) · Ψ'[(l',i), q']
    let b = code.basis();
    let cols = m * s_dim;
    let psi_dec = CMatrix::from_fn(rows, cols, |a, x| {
        let (l, i) = (a / n, a % n);
        let (q, s) = (x / s_dim, x % s_dim);
        let (lp, qp) = (s / m, s % m);
        b[(q, l)] * creal(inv_k) * psi[(lp * n + i, qp)]
    });
    // Õ[q, x] = Σ_a Ψ'[a,q] conj(Ψ̃[a,x])
    let overlap = psi.transpose() * psi_dec.map(|z| z.conj());
    let svd = overlap.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return V^T".into()))?;
    let sum_sv = svd.singular_values.iter().fold(R::zero(), |s, v| s + *v);
    let x = v_t.adjoint() * u.adjoint();
    let ops: Vec<CMatrix<R>> = (0..s_dim)
        .map(|s| CMatrix::from_fn(m, m, |qo, qi| x[(qo * s_dim + s, qi)]))
        .collect();
    let kept: Vec<CMatrix<R>> = ops
        .into_iter()
        .filter(|r| frobenius_sq(r) > R::lit(1e-24))
        .collect();
    Ok(UhlmannRecovery {
        recovery: KrausChannel::new(kept)?,
        uhlmann_fidelity: sum_sv * sum_sv,
        selection_probability: p,
    })
}

/// F_e(ρ, N) = Σ_i |tr(ρ A_i)|².
pub fn entanglement_fidelity<R: Real>(ch: &KrausChannel<R>, rho: &Density<R>) -> Result<R> {
    if ch.input_dim() != ch.output_dim() || rho.dim() != ch.input_dim() {
        return Err(Error::input(format!(
            "entanglement fidelity needs a {0}x{0} state for a channel on dimension {0}",
            ch.input_dim()
        )));
    }
    if (rho.trace() - R::one()).abs() > R::lit(Tolerances::default().trace) {
        return Err(Error::input("entanglement fidelity needs a normalized state"));
    }
    Ok(ch
        .kraus()
        .iter()
        .fold(R::zero(), |s, a| s + abs2(rho.matrix().dotc(&a.adjoint()))))
}

/// F_e(π_C, N).
pub fn code_entanglement_fidelity<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<R> {
    check_code_dims(ch, code)?;
    entanglement_fidelity(ch, &code.maximally_mixed())
}

/// ⟨ψ|N(ψ)|ψ⟩ = Σ_i |⟨ψ|A_i|ψ⟩|² for a unit vector ψ.
pub fn pure_state_fidelity<R: Real>(ch: &KrausChannel<R>, psi: &CVector<R>) -> R {
    ch.kraus()
        .iter()
        .fold(R::zero(), |s, a| s + abs2(psi.dotc(&(a * psi))))
}

/// Monte Carlo average of ⟨ψ|N(ψ)|ψ⟩ over Haar-random code states.
pub fn average_channel_fidelity_mc<R: Real>(
    ch: &KrausChannel<R>,
    code: &CodeSpace<R>,
    samples: usize,
    master_seed: u64,
) -> Result<MCEstimate<R>> {
    check_code_dims(ch, code)?;
    if ch.input_dim() != ch.output_dim() {
        return Err(Error::input("channel fidelity needs equal input and output dimensions"));
    }
    if samples == 0 {
        return Err(Error::input("need at least one sample"));
    }
    let k = code.code_dim();
    let xs = par_samples(master_seed, samples, |rng| {
        let x = random_pure_state::<R, _>(k, rng);
        pure_state_fidelity(ch, &code.embed(&x))
    });
    Ok(MCEstimate::from_samples(&xs))
}

/// Number of restarts of the minimal-fidelity search.
pub const SUBCODE_RESTARTS: usize = 20;
/// Extra random probes used when the current subspace has dimension ≤ 4.
pub const SUBCODE_RANDOM_PROBES: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SubcodeReport<R: Real> {
    pub code: CodeSpace<R>,
    /// Fidelity of the vector removed at each stage.
    pub stage_minima: Vec<R>,
    /// Smallest fidelity the search found on the returned subcode.
    pub achieved_min: R,
}

struct RestrictedFidelity<R: Real> {
    ops: Vec<CMatrix<R>>,
}

impl<R: Real> RestrictedFidelity<R> {
    fn new(ch: &KrausChannel<R>, w: &CMatrix<R>) -> Self {
        let wa = w.adjoint();
        RestrictedFidelity {
            ops: ch.kraus().iter().map(|a| &wa * a * w).collect(),
        }
    }

    fn value(&self, x: &CVector<R>) -> R {
        self.ops
            .iter()
            .fold(R::zero(), |s, g| s + abs2(x.dotc(&(g * x))))
    }

    /// Wirtinger gradient Σ_i [conj(z_i) G_i x + z_i G_i† x] with z_i = x†G_i x.
    fn gradient(&self, x: &CVector<R>) -> CVector<R> {
        let mut grad = CVector::zeros(x.len());
        for g in &self.ops {
            let gx = g * x;
            let z = x.dotc(&gx);
            grad += gx * z.conj() + g.ad_mul(x) * z;
        }
        grad
    }

    fn descend(&self, mut x: CVector<R>) -> (R, CVector<R>) {
        let mut f = self.value(&x);
        let mut step = R::lit(0.5);
        for _ in 0..300 {
            let g = self.gradient(&x);
            // tangent component only
            let radial = x.dotc(&g);
            let tang = &g - &x * radial;
            if tang.norm() <= R::lit(1e-12) {
                break;
            }
            let mut improved = false;
            while step > R::lit(1e-12) {
                let mut y = &x - &tang * creal(step);
                let ny = y.norm();
                y.unscale_mut(ny);
                let fy = self.value(&y);
                if fy < f {
                    x = y;
                    f = fy;
                    step *= R::lit(1.5);
                    improved = true;
                    break;
                }
                step *= R::lit(0.5);
            }
            if !improved {
                break;
            }
        }
        (f, x)
    }

    /// Approximate minimizer of the fidelity over unit vectors.
    fn minimize(&self, dim: usize, seed: u64) -> (R, CVector<R>) {
        let starts = par_samples(seed, SUBCODE_RESTARTS, |rng| {
            self.descend(random_pure_state::<R, _>(dim, rng))
        });
        let mut best = starts
            .into_iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .expect("at least one restart");
        if dim <= 4 {
            let mut rng = task_rng(seed, u64::MAX);
            for _ in 0..SUBCODE_RANDOM_PROBES {
                let x = random_pure_state::<R, _>(dim, &mut rng);
                let f = self.value(&x);
                if f < best.0 {
                    best = (f, x);
                }
            }
        }
        best
    }
}

/// Greedy subcode: repeatedly remove an approximately least-fidelity vector
/// until `target_dim` dimensions remain.
pub fn extract_subcode<R: Real>(
    ch: &KrausChannel<R>,
    code: &CodeSpace<R>,
    target_dim: usize,
    seed: u64,
) -> Result<SubcodeReport<R>> {
    check_code_dims(ch, code)?;
    if ch.input_dim() != ch.output_dim() {
        return Err(Error::input("subcode extraction needs equal input and output dimensions"));
    }
    let k = code.code_dim();
    if target_dim == 0 || target_dim > k {
        return Err(Error::input(format!(
            "target dimension {target_dim} outside 1..={k}"
        )));
    }
    let mut w = code.basis().clone();
    let mut stage_minima = Vec::with_capacity(k - target_dim);
    for stage in 0..(k - target_dim) {
        let dim = w.ncols();
        let obj = RestrictedFidelity::new(ch, &w);
        let (f, x) = obj.minimize(dim, seed.wrapping_add(stage as u64 + 1));
        stage_minima.push(f);
        w = &w * orthogonal_complement(&x);
    }
    let obj = RestrictedFidelity::new(ch, &w);
    let (achieved_min, _) = obj.minimize(w.ncols(), seed.wrapping_add(k as u64 + 1));
    Ok(SubcodeReport {
        code: CodeSpace { basis: w },
        stage_minima,
        achieved_min,
    })
}

/// Minimum of ⟨ψ|N(ψ)|ψ⟩ over `samples` Haar-random states of the code.
pub fn sampled_min_fidelity<R: Real>(
    ch: &KrausChannel<R>,
    code: &CodeSpace<R>,
    samples: usize,
    seed: u64,
) -> Result<R> {
    check_code_dims(ch, code)?;
    let k = code.code_dim();
    let xs = par_samples(seed, samples.max(1), |rng| {
        let x = random_pure_state::<R, _>(k, rng);
        pure_state_fidelity(ch, &code.embed(&x))
    });
    Ok(xs.into_iter().fold(R::lit(f64::INFINITY), |m, v| m.min(v)))
}

/// 1 − 2 sqrt(max(0, S(π_C) − I(π_C, N))).
pub fn sw_bound<R: Real>(ch: &KrausChannel<R>, code: &CodeSpace<R>) -> Result<R> {
    check_code_dims(ch, code)?;
    let s = R::of_usize(code.code_dim()).lg();
    let i = coherent_information(ch, &code.maximally_mixed())?;
    let mut gap = s - i;
    if gap.abs() <= R::lit(1e-10) {
        gap = R::zero();
    }
    Ok(R::one() - R::lit(2.0) * gap.max(R::zero()).sqrt())
}
