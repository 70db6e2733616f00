//! Quantum operations in operator-sum (Kraus) form.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    clamp_psd, frobenius_sq, haar_unitary, hermitian_eigen, hermitian_part, identity, kron, trace,
    CMatrix, Density,
};
use crate::scalar::{cabs, cplx, creal, Real};
use crate::settings::{saturating_pow, Limits, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    TracePreserving,
    TraceDecreasing,
}

/// Completely positive map ρ ↦ Σ A_i ρ A_i†.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<R: Real> {
    kraus: Vec<CMatrix<R>>,
    input_dim: usize,
    output_dim: usize,
    kind: ChannelKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelApplyResult<R: Real> {
    /// N(ρ), sub-normalized for selective operations.
    pub output: Density<R>,
    /// tr N(ρ).
    pub selection_probability: R,
}

impl<R: Real> KrausChannel<R> {
    pub fn new(kraus: Vec<CMatrix<R>>) -> Result<Self> {
        Self::with_tolerances(kraus, &Tolerances::default())
    }

    /// Validates shapes and classifies the map as trace-preserving or
    /// trace-decreasing. Maps with Σ A_i†A_i exceeding the identity are
    /// rejected.
    pub fn with_tolerances(kraus: Vec<CMatrix<R>>, tol: &Tolerances) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::input("a channel needs at least one Kraus operator"))?;
        let (output_dim, input_dim) = first.shape();
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::input("Kraus operators must be non-empty matrices"));
        }
        if let Some(bad) = kraus.iter().position(|a| a.shape() != (output_dim, input_dim)) {
            return Err(Error::input(format!(
                "Kraus operator {bad} has shape {:?}, expected {:?}",
                kraus[bad].shape(),
                (output_dim, input_dim)
            )));
        }
        for a in &kraus {
            crate::linalg::ensure_finite(a)?;
        }
        let kind = classify(&completeness_of(&kraus), tol)?;
        Ok(KrausChannel {
            kraus,
            input_dim,
            output_dim,
            kind,
        })
    }

    pub(crate) fn from_parts(kraus: Vec<CMatrix<R>>, kind: ChannelKind) -> Self {
        let (output_dim, input_dim) = kraus[0].shape();
        KrausChannel {
            kraus,
            input_dim,
            output_dim,
            kind,
        }
    }

    pub fn kraus(&self) -> &[CMatrix<R>] {
        &self.kraus
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.kind == ChannelKind::TracePreserving
    }

    /// Σ A_i†A_i.
    pub fn completeness(&self) -> CMatrix<R> {
        completeness_of(&self.kraus)
    }

    /// Σ A_i X A_i† for an arbitrary operator X.
    pub fn apply_operator(&self, x: &CMatrix<R>) -> CMatrix<R> {
        let mut out = CMatrix::zeros(self.output_dim, self.output_dim);
        for a in &self.kraus {
            out += a * x * a.adjoint();
        }
        out
    }

    pub fn apply(&self, rho: &Density<R>) -> Result<ChannelApplyResult<R>> {
        if rho.dim() != self.input_dim {
            return Err(Error::input(format!(
                "state dimension {} does not match channel input dimension {}",
                rho.dim(),
                self.input_dim
            )));
        }
        let out = self.apply_operator(rho.matrix());
        let p = trace(&out).re;
        Ok(ChannelApplyResult {
            output: Density::from_raw(out),
            selection_probability: p,
        })
    }

    /// n-fold tensor power with Kraus operators A_{j1}⊗…⊗A_{jn} in
    /// lexicographic multi-index order (leftmost factor most significant).
    pub fn tensor_power(&self, n: usize, limits: &Limits) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("tensor power needs n >= 1"));
        }
        limits.check_kraus(saturating_pow(self.len(), n))?;
        limits.check_dim("tensor power dimension", saturating_pow(self.input_dim.max(self.output_dim), n))?;
        let mut ops = self.kraus.clone();
        for _ in 1..n {
            let mut next = Vec::with_capacity(ops.len() * self.len());
            for a in &ops {
                for b in &self.kraus {
                    next.push(kron(a, b, limits)?);
                }
            }
            ops = next;
        }
        Ok(KrausChannel::from_parts(ops, self.kind))
    }

    /// Gram matrix H_ij = tr(V B_i† B_j V) for a projector V on the input.
    pub fn gram(&self, v: &CMatrix<R>) -> CMatrix<R> {
        let n = self.len();
        let projected: Vec<CMatrix<R>> = self.kraus.iter().map(|b| b * v).collect();
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let hij = projected[i].dotc(&projected[j]);
                h[(i, j)] = hij;
                h[(j, i)] = hij.conj();
            }
        }
        h
    }

    /// Equivalent Kraus set with tr(V A_i† A_j V) = 0 for i ≠ j.
    ///
    /// Operators that become zero are kept; see [`KrausChannel::pruned`].
    pub fn diagonalize(&self, v: &CMatrix<R>) -> Result<Self> {
        check_projector(v, self.input_dim)?;
        let eig = hermitian_eigen(&self.gram(v), &Tolerances {
            hermitian: 1e-8,
            ..Tolerances::default()
        })?;
        // descending weight order
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            eig.values[b]
                .partial_cmp(&eig.values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let ops = order
            .iter()
            .map(|&m| {
                let mut acc = CMatrix::zeros(self.output_dim, self.input_dim);
                for (j, b) in self.kraus.iter().enumerate() {
                    acc += b * eig.vectors[(j, m)];
                }
                acc
            })
            .collect();
        Ok(KrausChannel::from_parts(ops, self.kind))
    }

    /// Drops Kraus operators with Frobenius norm at or below `prune_tol`.
    ///
    /// Returns the channel unchanged if every operator would be dropped.
    pub fn pruned(&self, prune_tol: f64) -> Self {
        let t2 = R::lit(prune_tol * prune_tol);
        let kept: Vec<CMatrix<R>> = self
            .kraus
            .iter()
            .filter(|a| frobenius_sq(a) > t2)
            .cloned()
            .collect();
        if kept.is_empty() {
            return self.clone();
        }
        KrausChannel::from_parts(kept, self.kind)
    }

    /// Subset of the Kraus operators that keeps the original classification;
    /// for dropping operators known to vanish on the region of interest.
    pub(crate) fn select(&self, keep: &[usize]) -> Self {
        let ops = keep.iter().map(|&k| self.kraus[k].clone()).collect();
        KrausChannel::from_parts(ops, self.kind)
    }

    /// Reduction to a subset of Kraus operators.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::input("restriction needs a non-empty index set"));
        }
        let mut ops = Vec::with_capacity(keep.len());
        for &k in keep {
            let a = self
                .kraus
                .get(k)
                .ok_or_else(|| Error::input(format!("Kraus index {k} out of range")))?;
            ops.push(a.clone());
        }
        let kind = classify(&completeness_of(&ops), &Tolerances::default())?;
        Ok(KrausChannel::from_parts(ops, kind))
    }

    /// `outer ∘ self`, Kraus set {B_j A_i}.
    pub fn then(&self, outer: &KrausChannel<R>) -> Result<Self> {
        compose(outer, self)
    }

    /// Σ A_i A_i† = 1, i.e. N(π) = π.
    pub fn is_unital(&self) -> bool {
        self.is_unital_with(&Tolerances::default())
    }

    pub fn is_unital_with(&self, tol: &Tolerances) -> bool {
        if self.input_dim != self.output_dim {
            return false;
        }
        let mut s = CMatrix::zeros(self.output_dim, self.output_dim);
        for a in &self.kraus {
            s += a * a.adjoint();
        }
        max_dev_from_identity(&s) <= R::lit(tol.tp)
    }
}

/// Kraus set {B_j A_i}: apply `inner`, then `outer`.
pub fn compose<R: Real>(outer: &KrausChannel<R>, inner: &KrausChannel<R>) -> Result<KrausChannel<R>> {
    if inner.output_dim != outer.input_dim {
        return Err(Error::input(format!(
            "cannot compose: inner output dimension {} vs outer input dimension {}",
            inner.output_dim, outer.input_dim
        )));
    }
    let mut ops = Vec::with_capacity(outer.len() * inner.len());
    for b in &outer.kraus {
        for a in &inner.kraus {
            ops.push(b * a);
        }
    }
    let kind = if outer.is_trace_preserving() && inner.is_trace_preserving() {
        ChannelKind::TracePreserving
    } else {
        ChannelKind::TraceDecreasing
    };
    Ok(KrausChannel::from_parts(ops, kind))
}

fn completeness_of<R: Real>(kraus: &[CMatrix<R>]) -> CMatrix<R> {
    let d = kraus[0].ncols();
    let mut s = CMatrix::zeros(d, d);
    for a in kraus {
        s += a.adjoint() * a;
    }
    s
}

fn max_dev_from_identity<R: Real>(s: &CMatrix<R>) -> R {
    let id = identity::<R>(s.nrows());
    (s - id).iter().fold(R::zero(), |m, z| m.max(cabs(*z)))
}

fn classify<R: Real>(completeness: &CMatrix<R>, tol: &Tolerances) -> Result<ChannelKind> {
    if max_dev_from_identity(completeness) <= R::lit(tol.tp) {
        return Ok(ChannelKind::TracePreserving);
    }
    let gap = identity::<R>(completeness.nrows()) - completeness;
    let eig = hermitian_eigen(&hermitian_part(&gap), tol)?;
    clamp_psd(&eig.values, tol.psd).map_err(|_| {
        Error::input("Kraus operators violate Σ A_i†A_i ≤ 1 (not a quantum operation)")
    })?;
    Ok(ChannelKind::TraceDecreasing)
}

pub(crate) fn check_projector<R: Real>(v: &CMatrix<R>, dim: usize) -> Result<()> {
    if v.shape() != (dim, dim) {
        return Err(Error::input(format!(
            "projector has shape {:?}, expected {dim}x{dim}",
            v.shape()
        )));
    }
    let idem = (v * v - v).iter().fold(R::zero(), |m, z| m.max(cabs(*z)));
    let herm = crate::linalg::hermitian_residual(v);
    if idem > R::lit(1e-9) || herm > R::lit(1e-9) {
        return Err(Error::input(format!(
            "operator is not an orthogonal projector (idempotency residual {:.3e})",
            idem.as_f64()
        )));
    }
    Ok(())
}

/// Standard noise models used as fixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardChannel {
    Identity { dim: usize },
    BitFlip { p: f64 },
    PhaseFlip { p: f64 },
    Depolarizing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    /// {√(1-p) 1, √(p/3) X_k}: at most one bit flip on three qubits.
    ThreeQubitBitflipNoise { p: f64 },
}

pub fn pauli<R: Real>(which: char) -> CMatrix<R> {
    let (a, b, c, d) = match which {
        'I' => (cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(1.0, 0.0)),
        'X' => (cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)),
        'Y' => (cplx(0.0, 0.0), cplx(0.0, -1.0), cplx(0.0, 1.0), cplx(0.0, 0.0)),
        'Z' => (cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0), cplx(-1.0, 0.0)),
        other => panic!("unknown Pauli {other}"),
    };
    CMatrix::from_row_slice(2, 2, &[a, b, c, d])
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::input(format!("{name} parameter {p} outside [0, 1]")));
    }
    Ok(())
}

fn scaled<R: Real>(m: CMatrix<R>, w: f64) -> CMatrix<R> {
    m * creal(R::lit(w.sqrt()))
}

pub fn make_standard<R: Real>(spec: StandardChannel) -> Result<KrausChannel<R>> {
    let lim = Limits::default();
    let ops = match spec {
        StandardChannel::Identity { dim } => {
            if dim == 0 {
                return Err(Error::input("identity channel needs dim >= 1"));
            }
            vec![identity(dim)]
        }
        StandardChannel::BitFlip { p } => {
            check_prob("bit_flip p", p)?;
            vec![scaled(pauli('I'), 1.0 - p), scaled(pauli('X'), p)]
        }
        StandardChannel::PhaseFlip { p } => {
            check_prob("phase_flip p", p)?;
            vec![scaled(pauli('I'), 1.0 - p), scaled(pauli('Z'), p)]
        }
        StandardChannel::Depolarizing { p } => {
            check_prob("depolarizing p", p)?;
            vec![
                scaled(pauli('I'), 1.0 - 0.75 * p),
                scaled(pauli('X'), p / 4.0),
                scaled(pauli('Y'), p / 4.0),
                scaled(pauli('Z'), p / 4.0),
            ]
        }
        StandardChannel::AmplitudeDamping { gamma } => {
            check_prob("amplitude_damping gamma", gamma)?;
            let z = cplx(0.0, 0.0);
            let a0 = CMatrix::from_row_slice(2, 2, &[cplx(1.0, 0.0), z, z, cplx((1.0 - gamma).sqrt(), 0.0)]);
            let a1 = CMatrix::from_row_slice(2, 2, &[z, cplx(gamma.sqrt(), 0.0), z, z]);
            vec![a0, a1]
        }
        StandardChannel::ThreeQubitBitflipNoise { p } => {
            check_prob("three_qubit_bitflip_noise p", p)?;
            let (i, x) = (pauli::<R>('I'), pauli::<R>('X'));
            let mut ops = vec![scaled(identity(8), 1.0 - p)];
            for k in 0..3 {
                let f: Vec<&CMatrix<R>> = (0..3).map(|q| if q == k { &x } else { &i }).collect();
                let op = kron(&kron(f[0], f[1], &lim)?, f[2], &lim)?;
                ops.push(scaled(op, p / 3.0));
            }
            ops
        }
    };
    KrausChannel::new(ops)
}

/// Random trace-preserving channel from a Stinespring isometry: the first M
/// columns of a Haar unitary on M·N, cut into N blocks of M rows.
pub fn random_channel<R: Real, G: Rng + ?Sized>(m: usize, n: usize, rng: &mut G) -> Result<KrausChannel<R>> {
    if m == 0 || n == 0 {
        return Err(Error::input("random channel needs M >= 1 and N >= 1"));
    }
    let u = haar_unitary::<R, G>(m * n, rng);
    let ops = (0..n)
        .map(|k| u.view((k * m, 0), (m, m)).into_owned())
        .collect();
    Ok(KrausChannel::from_parts(ops, ChannelKind::TracePreserving))
}

/// Unitary channel with the single Kraus operator `u`.
pub fn unitary_channel<R: Real>(u: CMatrix<R>) -> Result<KrausChannel<R>> {
    KrausChannel::new(vec![u])
}
