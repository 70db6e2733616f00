//! ε-typical sequences of Kraus operators, typical subspaces and the
//! ε-reduced operation of a tensor-power channel.
//!
//! Sequence probabilities are compared in the log2 domain. Counts and masses
//! are aggregated over type classes (compositions of n), so only the
//! explicit enumeration mode ever touches all N^n sequences.

use std::collections::HashMap;
use std::rc::Rc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::info::{coherent_information, entropy_exchange};
use crate::linalg::{frobenius_sq, hermitian_eigen, kron, trace, CMatrix, Density};
use crate::scalar::{abs2, cabs, creal, Real};
use crate::settings::{saturating_pow, Limits, Tolerances};
use crate::stats::{par_samples, MCEstimate};

/// Slack applied to both typicality inequalities in the log2 domain.
pub const LOG_TOLERANCE: f64 = 1e-12;

/// Probabilities of the symbols of a memoryless source.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausDistribution {
    probs: Vec<f64>,
}

impl KrausDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::input("a distribution needs at least one symbol"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::input("probabilities must be finite and non-negative"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("probabilities sum to {s}, expected 1")));
        }
        Ok(KrausDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        crate::linalg::shannon_entropy(&self.probs)
    }

    fn log2_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.log2()).collect()
    }
}

/// Diagonal Kraus set relative to V with operators vanishing on V removed.
pub fn diagonal_form<R: Real>(ch: &KrausChannel<R>, v: &CMatrix<R>) -> Result<KrausChannel<R>> {
    crate::ensembles::minimal_representation(ch, v)
}

/// p_i = tr(Π_V A_i†A_i Π_V)/L for a Kraus set that is diagonal on V (an
/// M×L isometry).
pub fn kraus_distribution<R: Real>(ch: &KrausChannel<R>, v: &CMatrix<R>) -> Result<KrausDistribution> {
    if v.nrows() != ch.input_dim() {
        return Err(Error::input("subspace isometry does not match the channel input"));
    }
    let gram = ch.gram(&(v * v.adjoint()));
    let n = gram.nrows();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(cabs(gram[(i, j)]).as_f64());
            }
        }
    }
    if off > 1e-8 {
        return Err(Error::precondition(
            format!("Kraus set is not diagonal on the subspace (off-diagonal Gram {off:.3e}); diagonalize it first"),
            Some(off),
        ));
    }
    let l = v.ncols() as f64;
    KrausDistribution::new((0..n).map(|i| gram[(i, i)].re.as_f64() / l).collect())
}

/// 2^{−n(H+ε)} ≤ p ≤ 2^{−n(H−ε)} in the log2 domain, boundaries included.
pub fn is_typical(log2_p: f64, n: usize, entropy: f64, epsilon: f64) -> bool {
    let nf = n as f64;
    log2_p >= -nf * (entropy + epsilon) - LOG_TOLERANCE && log2_p <= -nf * (entropy - epsilon) + LOG_TOLERANCE
}

/// All compositions of `n` into `parts` non-negative parts, lexicographic.
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=rem).rev() {
            cur.push(c);
            rec(rem - c, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(n, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// n! / Π c_i!.
pub fn multinomial(counts: &[usize]) -> BigUint {
    let mut acc = BigUint::one();
    let mut total = 0u64;
    for &c in counts {
        for k in 1..=c as u64 {
            total += 1;
            acc = acc * BigUint::from(total) / BigUint::from(k);
        }
    }
    acc
}

fn exact_prob(p: f64) -> BigRational {
    BigRational::from_float(p).unwrap_or_else(BigRational::zero)
}

/// Typical sequence statistics aggregated by type class.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSummary {
    pub n: usize,
    pub epsilon: f64,
    pub entropy: f64,
    pub count: BigUint,
    /// Exact mass of the typical set, with the f64 probabilities taken as
    /// exact rationals.
    pub mass_exact: BigRational,
    pub mass: f64,
    /// Typical type classes (symbol counts).
    pub classes: Vec<Vec<usize>>,
}

impl TypicalSummary {
    /// log2 of the count; −∞ for an empty set.
    pub fn log2_count(&self) -> f64 {
        if self.count.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.count.bits();
        if bits < 1000 {
            self.count.to_f64().map(f64::log2).unwrap_or(f64::INFINITY)
        } else {
            let shift = bits - 64;
            ((&self.count >> shift).to_f64().unwrap_or(0.0)).log2() + shift as f64
        }
    }

    /// N_{ε,n} ≤ 2^{n(H+ε)}.
    pub fn count_within_bound(&self) -> bool {
        self.log2_count() <= self.n as f64 * (self.entropy + self.epsilon) + LOG_TOLERANCE
    }

    pub fn count_u128(&self) -> Option<u128> {
        self.count.to_u128()
    }
}

pub fn typical_summary(dist: &KrausDistribution, n: usize, epsilon: f64) -> Result<TypicalSummary> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::input("block length n must be at least 1"));
    }
    let h = dist.entropy();
    let logs = dist.log2_probs();
    let exact: Vec<BigRational> = dist.probs.iter().map(|p| exact_prob(*p)).collect();
    let mut count = BigUint::zero();
    let mut mass_exact = BigRational::zero();
    let mut classes = Vec::new();
    for c in compositions(n, dist.len()) {
        let lp: f64 = c
            .iter()
            .zip(&logs)
            .map(|(&ci, &l)| if ci == 0 { 0.0 } else { ci as f64 * l })
            .sum();
        if !is_typical(lp, n, h, epsilon) {
            continue;
        }
        let mult = multinomial(&c);
        let mut w = BigRational::from_integer(BigInt::from(mult.clone()));
        for (ci, p) in c.iter().zip(&exact) {
            w *= num_traits::pow(p.clone(), *ci);
        }
        count += mult;
        mass_exact += w;
        classes.push(c);
    }
    let mass = mass_exact.to_f64().unwrap_or(f64::NAN);
    Ok(TypicalSummary {
        n,
        epsilon,
        entropy: h,
        count,
        mass_exact,
        mass,
        classes,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Explicitly enumerated typical sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSet {
    /// Typical sequences in lexicographic order.
    pub sequences: Vec<Vec<usize>>,
    pub mass_exact: BigRational,
    pub mass: f64,
}

impl TypicalSet {
    pub fn count(&self) -> usize {
        self.sequences.len()
    }
}

pub enum TypicalMode {
    Enumerate,
    Sample { samples: usize, seed: u64 },
}

pub enum TypicalSetResult {
    Enumerated(TypicalSet),
    /// Estimated probability that a sequence is typical.
    Sampled(MCEstimate<f64>),
}

pub fn typical_set(
    dist: &KrausDistribution,
    n: usize,
    epsilon: f64,
    mode: TypicalMode,
    limits: &Limits,
) -> Result<TypicalSetResult> {
    match mode {
        TypicalMode::Enumerate => enumerate_typical(dist, n, epsilon, limits).map(TypicalSetResult::Enumerated),
        TypicalMode::Sample { samples, seed } => {
            sample_typicality(dist, n, epsilon, samples, seed).map(TypicalSetResult::Sampled)
        }
    }
}

/// Walks all N^n sequences, testing each one individually.
pub fn enumerate_typical(dist: &KrausDistribution, n: usize, epsilon: f64, limits: &Limits) -> Result<TypicalSet> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::input("block length n must be at least 1"));
    }
    let k = dist.len();
    let total = saturating_pow(k, n);
    limits.check_enumeration(total)?;
    let h = dist.entropy();
    let logs = dist.log2_probs();
    let exact: Vec<BigRational> = dist.probs.iter().map(|p| exact_prob(*p)).collect();
    let mut sequences = Vec::new();
    let mut mass_exact = BigRational::zero();
    let mut seq = vec![0usize; n];
    for idx in 0..total as u64 {
        let mut rem = idx;
        for pos in (0..n).rev() {
            seq[pos] = (rem % k as u64) as usize;
            rem /= k as u64;
        }
        let lp: f64 = seq.iter().map(|&s| logs[s]).sum();
        if is_typical(lp, n, h, epsilon) {
            let p = seq.iter().fold(BigRational::one(), |acc, &s| acc * &exact[s]);
            mass_exact += p;
            sequences.push(seq.clone());
        }
    }
    let mass = mass_exact.to_f64().unwrap_or(f64::NAN);
    Ok(TypicalSet {
        sequences,
        mass_exact,
        mass,
    })
}

/// Fraction of i.i.d. sampled sequences that are typical, with the exact
/// type-class mass attached as closed form.
pub fn sample_typicality(
    dist: &KrausDistribution,
    n: usize,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<MCEstimate<f64>> {
    check_epsilon(epsilon)?;
    if samples == 0 || n == 0 {
        return Err(Error::input("need n >= 1 and at least one sample"));
    }
    let weights = WeightedIndex::new(dist.probs.iter().copied())
        .map_err(|e| Error::input(format!("invalid distribution: {e}")))?;
    let h = dist.entropy();
    let logs = dist.log2_probs();
    let xs = par_samples(seed, samples, |rng| {
        let lp: f64 = (0..n).map(|_| logs[weights.sample(rng)]).sum();
        if is_typical(lp, n, h, epsilon) {
            1.0
        } else {
            0.0
        }
    });
    let est = MCEstimate::from_samples(&xs);
    // the exact mass is cheap whenever the number of type classes is modest
    if num_compositions(n, dist.len()) <= 1_000_000 {
        Ok(est.with_closed_form(typical_summary(dist, n, epsilon)?.mass))
    } else {
        Ok(est)
    }
}

fn num_compositions(n: usize, parts: usize) -> u128 {
    // C(n + parts − 1, parts − 1)
    let mut acc: u128 = 1;
    for i in 1..parts as u128 {
        acc = acc.saturating_mul(n as u128 + i) / i;
    }
    acc
}

/// Atypical mass 1 − P_{ε,n} along a grid of block lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub points: Vec<(usize, f64)>,
    pub non_increasing: bool,
    /// Least-squares slope of −ln(1 − P) against n; a diagnostic only.
    pub rate_fit: Option<f64>,
}

pub fn typicality_decay(dist: &KrausDistribution, epsilon: f64, ns: &[usize]) -> Result<DecayReport> {
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let s = typical_summary(dist, n, epsilon)?;
        let atyp = (BigRational::one() - s.mass_exact).to_f64().unwrap_or(f64::NAN);
        points.push((n, atyp));
    }
    let non_increasing = points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15);
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, a)| *a > 0.0)
        .map(|(n, a)| (*n as f64, -a.ln()))
        .collect();
    let rate_fit = if fit.len() >= 2 {
        let m = fit.len() as f64;
        let (sx, sy) = fit.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let sxx: f64 = fit.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let sxy: f64 = fit.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Ok(DecayReport {
        points,
        non_increasing,
        rate_fit,
    })
}

fn typical_class_set(summary: &TypicalSummary) -> std::collections::HashSet<Vec<usize>> {
    summary.classes.iter().cloned().collect()
}

fn counts_of(seq: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &s in seq {
        c[s] += 1;
    }
    c
}

/// N_{ε,n}: the typical Kraus operators A_{j1}⊗…⊗A_{jn} of N^⊗n, in
/// lexicographic order of j.
pub fn typical_channel<R: Real>(
    ch: &KrausChannel<R>,
    v: &CMatrix<R>,
    n: usize,
    epsilon: f64,
    limits: &Limits,
) -> Result<KrausChannel<R>> {
    let dist = kraus_distribution(ch, v)?;
    limits.check_enumeration(saturating_pow(ch.len(), n))?;
    limits.check_dim(
        "tensor power dimension",
        saturating_pow(ch.input_dim().max(ch.output_dim()), n),
    )?;
    let summary = typical_summary(&dist, n, epsilon)?;
    let count = summary.count.to_u128().unwrap_or(u128::MAX);
    if count == 0 {
        return Err(Error::precondition(
            format!("no ε-typical Kraus sequences at n={n}, ε={epsilon}"),
            None,
        ));
    }
    limits.check_kraus(count)?;
    let classes = typical_class_set(&summary);
    let set = enumerate_sequences(ch.len(), n, |seq| classes.contains(&counts_of(seq, ch.len())));
    let mut ops = Vec::with_capacity(set.len());
    for seq in &set {
        let mut op = ch.kraus()[seq[0]].clone();
        for &s in &seq[1..] {
            op = kron(&op, &ch.kraus()[s], limits)?;
        }
        ops.push(op);
    }
    KrausChannel::new(ops)
}

fn enumerate_sequences(k: usize, n: usize, keep: impl Fn(&[usize]) -> bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut seq = vec![0usize; n];
    loop {
        if keep(&seq) {
            out.push(seq.clone());
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Typical subspace T_{ε,n} of σ^⊗n, described by σ's eigenbasis and a mask
/// over product eigenvector indices (lexicographic, leftmost factor most
/// significant).
#[derive(Debug, Clone)]
pub struct TypicalSubspace<R: Real> {
    /// Eigenvalues of σ, descending.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors as columns.
    pub eigenvectors: CMatrix<R>,
    pub n: usize,
    pub epsilon: f64,
    /// S(σ) in bits.
    pub entropy: f64,
    pub mask: Vec<bool>,
    pub dim: usize,
    /// tr(Π σ^⊗n).
    pub mass: f64,
}

impl<R: Real> TypicalSubspace<R> {
    /// dim T_{ε,n} ≤ 2^{n(S+ε)}.
    pub fn dim_within_bound(&self) -> bool {
        (self.dim as f64).log2() <= self.n as f64 * (self.entropy + self.epsilon) + LOG_TOLERANCE || self.dim == 0
    }

    /// The projector Π_{ε,n} in the standard product basis.
    pub fn projector(&self, limits: &Limits) -> Result<CMatrix<R>> {
        let m = self.eigenvectors.nrows();
        let big = m.pow(self.n as u32);
        limits.check_dim("typical projector dimension", big as u128)?;
        if self.dim == big {
            return Ok(CMatrix::identity(big, big));
        }
        let mut u = self.eigenvectors.clone();
        for _ in 1..self.n {
            u = kron(&u, &self.eigenvectors, limits)?;
        }
        let cols: Vec<usize> = (0..big).filter(|&l| self.mask[l]).collect();
        let w = CMatrix::from_fn(big, cols.len(), |i, j| u[(i, cols[j])]);
        Ok(&w * w.adjoint())
    }

    /// The eigenvalues of σ as a distribution.
    pub fn spectrum(&self) -> Result<KrausDistribution> {
        let s: f64 = self.eigenvalues.iter().sum();
        KrausDistribution::new(self.eigenvalues.iter().map(|v| v / s).collect())
    }
}

pub fn typical_subspace_projector<R: Real>(
    sigma: &Density<R>,
    n: usize,
    epsilon: f64,
    limits: &Limits,
) -> Result<TypicalSubspace<R>> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::input("block length n must be at least 1"));
    }
    let m = sigma.dim();
    limits.check_dim("typical subspace ambient dimension", saturating_pow(m, n))?;
    let tol = Tolerances::default();
    let eig = hermitian_eigen(sigma.matrix(), &tol)?;
    let vals = crate::linalg::clamp_psd(&eig.values, tol.psd)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i].as_f64()).collect();
    let eigenvectors = CMatrix::from_fn(m, m, |i, j| eig.vectors[(i, order[j])]);
    let entropy = crate::linalg::shannon_entropy(&eigenvalues);
    let logs: Vec<f64> = eigenvalues.iter().map(|v| v.log2()).collect();
    let big = m.pow(n as u32);
    let mut mask = vec![false; big];
    let mut dim = 0;
    let mut mass = 0.0;
    let mut digits = vec![0usize; n];
    for (l, slot) in mask.iter_mut().enumerate() {
        let mut rem = l;
        for pos in (0..n).rev() {
            digits[pos] = rem % m;
            rem /= m;
        }
        let lp: f64 = digits.iter().map(|&d| logs[d]).sum();
        if is_typical(lp, n, entropy, epsilon) {
            *slot = true;
            dim += 1;
            mass += digits.iter().map(|&d| eigenvalues[d]).product::<f64>();
        }
    }
    Ok(TypicalSubspace {
        eigenvalues,
        eigenvectors,
        n,
        epsilon,
        entropy,
        mask,
        dim,
        mass,
    })
}

/// Figures of the ε-reduced operation Ñ = P_{ε,n} ∘ N_{ε,n} on π_{V^⊗n}.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalReduction {
    pub n: usize,
    pub epsilon: f64,
    /// Number of ε-typical Kraus sequences, N_{ε,n}.
    pub kraus_count: u128,
    /// Typical sequences whose projected operator Π A_j Π_V^⊗n is nonzero.
    pub nonzero_kraus_count: u128,
    /// tr Ñ(π).
    pub selection_prob: f64,
    /// ‖Ñ(π)‖_F².
    pub frobenius_sq: f64,
    pub typical_subspace_dim: usize,
    /// H of the Kraus distribution, equal to S_e(π_V, N).
    pub kraus_entropy: f64,
    /// S(N(π_V)).
    pub output_entropy: f64,
    /// tr N_{ε,n}(π): typical Kraus mass.
    pub kraus_mass: f64,
    /// tr(Π σ^⊗n): typical eigenvalue mass.
    pub subspace_mass: f64,
}

impl TypicalReduction {
    /// N_{ε,n} ≤ 2^{n(H+ε)}.
    pub fn kraus_count_within_bound(&self) -> bool {
        self.kraus_count == 0
            || (self.kraus_count as f64).log2() <= self.n as f64 * (self.kraus_entropy + self.epsilon) + LOG_TOLERANCE
    }

    /// dim T ≤ 2^{n(S+ε)}.
    pub fn dim_within_bound(&self) -> bool {
        self.typical_subspace_dim == 0
            || (self.typical_subspace_dim as f64).log2()
                <= self.n as f64 * (self.output_entropy + self.epsilon) + LOG_TOLERANCE
    }

    /// 2^{−n(S − 3ε)}.
    pub fn frobenius_bound(&self) -> f64 {
        (-(self.n as f64) * (self.output_entropy - 3.0 * self.epsilon)).exp2()
    }

    pub fn frobenius_within_bound(&self) -> bool {
        self.frobenius_sq <= self.frobenius_bound() * (1.0 + 1e-9) + 1e-15
    }

    /// tr Ñ(π) ≥ tr(Πσ^⊗n) − (1 − tr N_{ε,n}(π)), within 1e-9.
    pub fn selection_within_bound(&self) -> bool {
        self.selection_prob >= self.subspace_mass - (1.0 - self.kraus_mass) - 1e-9
    }
}

struct SuffixSums<'a, R: Real> {
    blocks: &'a [CMatrix<R>],
    n: usize,
    classes: &'a std::collections::HashSet<Vec<usize>>,
    memo: HashMap<(usize, Vec<usize>), Option<Rc<CMatrix<R>>>>,
    limits: &'a Limits,
}

impl<R: Real> SuffixSums<'_, R> {
    /// Σ over suffixes s of length n − depth with prefix counts `counts`
    /// such that counts + type(s) is typical, of ⊗_k blocks[s_k].
    fn get(&mut self, depth: usize, counts: Vec<usize>) -> Result<Option<Rc<CMatrix<R>>>> {
        if depth == self.n {
            return Ok(if self.classes.contains(&counts) {
                Some(Rc::new(CMatrix::from_element(1, 1, creal(R::one()))))
            } else {
                None
            });
        }
        let key = (depth, counts);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let mut acc: Option<CMatrix<R>> = None;
        for (i, g) in self.blocks.iter().enumerate() {
            let mut next = key.1.clone();
            next[i] += 1;
            if let Some(tail) = self.get(depth + 1, next)? {
                let term = kron(g, &tail, self.limits)?;
                acc = Some(match acc {
                    Some(a) => a + term,
                    None => term,
                });
            }
        }
        let out = acc.map(Rc::new);
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// ε-reduced operation of N^⊗n evaluated on π_{V^⊗n}.
///
/// `ch` must be diagonal on V (see [`diagonal_form`]); `v` is an M×L
/// isometry onto V.
pub fn reduced_operation<R: Real>(
    ch: &KrausChannel<R>,
    v: &CMatrix<R>,
    n: usize,
    epsilon: f64,
    limits: &Limits,
) -> Result<TypicalReduction> {
    let dist = kraus_distribution(ch, v)?;
    let m_out = ch.output_dim();
    limits.check_dim("tensor power dimension", saturating_pow(m_out, n))?;
    let pi_v = (v * v.adjoint()).unscale(R::of_usize(v.ncols()));
    let blocks_std: Vec<CMatrix<R>> = ch.kraus().iter().map(|a| a * &pi_v * a.adjoint()).collect();
    let sigma_mat = blocks_std.iter().fold(CMatrix::zeros(m_out, m_out), |s, g| s + g);
    let sigma = Density::new(sigma_mat)?;
    let sub = typical_subspace_projector(&sigma, n, epsilon, limits)?;
    let u = &sub.eigenvectors;
    let blocks: Vec<CMatrix<R>> = blocks_std.iter().map(|g| u.adjoint() * g * u).collect();
    let summary = typical_summary(&dist, n, epsilon)?;
    let classes = typical_class_set(&summary);
    let kraus_count = summary.count.to_u128().unwrap_or(u128::MAX);

    let mut sums = SuffixSums {
        blocks: &blocks,
        n,
        classes: &classes,
        memo: HashMap::new(),
        limits,
    };
    let x = sums.get(0, vec![0; ch.len()])?;
    let (selection_prob, frobenius_sq, kraus_mass) = match &x {
        None => (0.0, 0.0, 0.0),
        Some(x) => {
            let idx: Vec<usize> = (0..sub.mask.len()).filter(|&l| sub.mask[l]).collect();
            let mut tr = R::zero();
            let mut fr = R::zero();
            for &a in &idx {
                tr += x[(a, a)].re;
                for &b in &idx {
                    fr += abs2(x[(a, b)]);
                }
            }
            (tr.as_f64(), fr.as_f64(), trace(x).re.as_f64())
        }
    };

    // per-class weight of Π A_j π_V A_j† Π, identical within a class
    let diags: Vec<Vec<R>> = blocks.iter().map(|g| (0..m_out).map(|i| g[(i, i)].re).collect()).collect();
    let mut nonzero_kraus_count: u128 = 0;
    for c in &summary.classes {
        let mut d = vec![R::one()];
        for (i, &ci) in c.iter().enumerate() {
            for _ in 0..ci {
                d = d.iter().flat_map(|a| diags[i].iter().map(move |b| *a * *b)).collect();
            }
        }
        let w = d
            .iter()
            .zip(&sub.mask)
            .filter(|(_, keep)| **keep)
            .fold(R::zero(), |s, (x, _)| s + *x);
        let scaled = w.as_f64() * (v.ncols() as f64).powi(n as i32);
        if scaled > 1e-24 {
            nonzero_kraus_count = nonzero_kraus_count.saturating_add(multinomial(c).to_u128().unwrap_or(u128::MAX));
        }
    }

    Ok(TypicalReduction {
        n,
        epsilon,
        kraus_count,
        nonzero_kraus_count,
        selection_prob,
        frobenius_sq,
        typical_subspace_dim: sub.dim,
        kraus_entropy: dist.entropy(),
        output_entropy: sub.entropy,
        kraus_mass,
        subspace_mass: sub.mass,
    })
}

/// Kraus operators Π_{ε,n} A_j of Ñ for the typical sequences j.
pub fn reduced_channel<R: Real>(
    ch: &KrausChannel<R>,
    v: &CMatrix<R>,
    n: usize,
    epsilon: f64,
    limits: &Limits,
) -> Result<KrausChannel<R>> {
    let typ = typical_channel(ch, v, n, epsilon, limits)?;
    let pi_v = (v * v.adjoint()).unscale(R::of_usize(v.ncols()));
    let sigma = Density::new(ch.apply_operator(&pi_v))?;
    let proj = typical_subspace_projector(&sigma, n, epsilon, limits)?.projector(limits)?;
    KrausChannel::new(typ.kraus().iter().map(|a| &proj * a).collect())
}

/// Terms of the lower bound 1 − α_n − β_n on the ensemble-averaged
/// entanglement fidelity at rate R.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBoundReport {
    pub n: usize,
    pub epsilon: f64,
    pub rate: f64,
    /// K_n = ⌊2^{nR}⌋.
    pub code_dim: u128,
    pub alpha: f64,
    /// sqrt(K_n N_{ε,n})·‖Ñ(π)‖_F.
    pub beta: f64,
    /// β computed with the nonzero projected Kraus count instead.
    pub beta_nonzero: f64,
    pub bound: f64,
    /// I(π_V, N) = S(N(π_V)) − S_e(π_V, N).
    pub coherent_information: f64,
    /// n/2·(R + S_e − S + 4ε); β_n ≤ 2^{this}.
    pub beta_exponent: f64,
    pub reduction: TypicalReduction,
}

impl RateBoundReport {
    pub fn beta_within_bound(&self) -> bool {
        self.beta <= self.beta_exponent.exp2() * (1.0 + 1e-9) + 1e-15
    }
}

pub fn rate_bound_report<R: Real>(
    ch: &KrausChannel<R>,
    v: &CMatrix<R>,
    n: usize,
    epsilon: f64,
    rate: f64,
    limits: &Limits,
) -> Result<RateBoundReport> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::input(format!("rate must be non-negative, got {rate}")));
    }
    let kn_f = (n as f64 * rate).exp2().floor();
    if kn_f < 1.0 {
        return Err(Error::input("code dimension ⌊2^{nR}⌋ is zero"));
    }
    let code_dim = if kn_f >= u128::MAX as f64 { u128::MAX } else { kn_f as u128 };
    let red = reduced_operation(ch, v, n, epsilon, limits)?;
    let pi_v = Density::normalized(&(v * v.adjoint()))?;
    let se = entropy_exchange(ch, &pi_v)?.as_f64();
    let ci = coherent_information(ch, &pi_v)?.as_f64();
    let alpha = 1.0 - red.selection_prob;
    let frob = red.frobenius_sq.sqrt();
    let beta = (kn_f * red.kraus_count as f64).sqrt() * frob;
    let beta_nonzero = (kn_f * red.nonzero_kraus_count as f64).sqrt() * frob;
    let beta_exponent = 0.5 * n as f64 * (rate + se - red.output_entropy + 4.0 * epsilon);
    Ok(RateBoundReport {
        n,
        epsilon,
        rate,
        code_dim,
        alpha,
        beta,
        beta_nonzero,
        bound: 1.0 - alpha - beta,
        coherent_information: ci,
        beta_exponent,
        reduction: red,
    })
}

/// I(ρ, N^⊗m)/m for a state ρ on the m-fold input space.
pub fn finite_m_coherent_rate<R: Real>(
    ch: &KrausChannel<R>,
    rho: &Density<R>,
    m: usize,
    limits: &Limits,
) -> Result<R> {
    let power = ch.tensor_power(m, limits)?;
    Ok(coherent_information(&power, rho)? / R::of_usize(m))
}

/// ‖Ñ(π)‖_F² of a materialized channel; used to cross-check
/// [`reduced_operation`].
pub fn output_frobenius_sq<R: Real>(ch: &KrausChannel<R>, rho: &Density<R>) -> Result<R> {
    Ok(frobenius_sq(&ch.apply(rho)?.output.into_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{make_standard, random_channel, unitary_channel, StandardChannel};
    use crate::linalg::{haar_unitary, identity};
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    fn h(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    fn pf(p: f64) -> KrausChannel<f64> {
        make_standard(StandardChannel::PhaseFlip { p }).unwrap()
    }

    #[test]
    fn distribution_from_channels() {
        let d = kraus_distribution(&pf(0.1), &identity(2)).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(d.entropy(), h(0.1), epsilon = 1e-12);
        let u = unitary_channel(haar_unitary::<f64, _>(3, &mut seeded(1))).unwrap();
        let d = kraus_distribution(&u, &identity(3)).unwrap();
        assert_eq!(d.probs().len(), 1);
        assert_abs_diff_eq!(d.entropy(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn distribution_requires_diagonal_set() {
        let ch = random_channel::<f64, _>(3, 3, &mut seeded(2)).unwrap();
        assert!(matches!(
            kraus_distribution(&ch, &identity(3)),
            Err(Error::Precondition { .. })
        ));
        let d = diagonal_form(&ch, &identity(3)).unwrap();
        let dist = kraus_distribution(&d, &identity(3)).unwrap();
        let se = entropy_exchange(&ch, &Density::maximally_mixed(3)).unwrap();
        assert_abs_diff_eq!(dist.entropy(), se, epsilon = 1e-9);
    }

    #[test]
    fn compositions_and_multinomials() {
        let c = compositions(3, 2);
        assert_eq!(c, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(compositions(4, 3).len(), 15);
        assert_eq!(multinomial(&[2, 1, 1]), BigUint::from(12u32));
        let total: BigUint = compositions(6, 3).iter().map(|c| multinomial(c)).sum();
        assert_eq!(total, BigUint::from(729u32));
    }

    #[test]
    fn degenerate_and_uniform() {
        let d = KrausDistribution::new(vec![1.0]).unwrap();
        let s = typical_summary(&d, 7, 0.1).unwrap();
        assert_eq!(s.count, BigUint::one());
        assert_eq!(s.mass_exact, BigRational::one());
        let u = KrausDistribution::new(vec![0.25; 4]).unwrap();
        let s = typical_summary(&u, 5, 0.05).unwrap();
        assert_eq!(s.count, BigUint::from(1024u32));
        assert_eq!(s.mass_exact, BigRational::one());
    }

    #[test]
    fn type_classes_match_enumeration() {
        let d = KrausDistribution::new(vec![0.9, 0.1]).unwrap();
        for eps in [0.1, 0.2] {
            let s = typical_summary(&d, 10, eps).unwrap();
            let e = enumerate_typical(&d, 10, eps, &Limits::default()).unwrap();
            assert_eq!(s.count, BigUint::from(e.count()));
            assert_eq!(s.mass_exact, e.mass_exact);
            assert!(s.count_within_bound());
        }
        let d = KrausDistribution::new(vec![0.7, 0.2, 0.1]).unwrap();
        let s = typical_summary(&d, 7, 0.15).unwrap();
        let e = enumerate_typical(&d, 7, 0.15, &Limits::default()).unwrap();
        assert_eq!(s.count, BigUint::from(e.count()));
        assert_eq!(s.mass_exact, e.mass_exact);
    }

    #[test]
    fn enumeration_cap() {
        let d = KrausDistribution::new(vec![0.25; 4]).unwrap();
        match enumerate_typical(&d, 20, 0.1, &Limits::default()) {
            Err(Error::Capacity { hint: Some(h), .. }) => assert!(h.contains("sample")),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn sampling_agrees_with_exact_mass() {
        let d = KrausDistribution::new(vec![0.8, 0.1, 0.1]).unwrap();
        let e = sample_typicality(&d, 30, 0.2, 4000, 9).unwrap();
        assert!(e.agrees_within(3.0), "{e:?}");
    }

    #[test]
    fn decay_on_coarse_grid() {
        for probs in [vec![0.9, 0.1], vec![0.8, 0.1, 0.1]] {
            let d = KrausDistribution::new(probs).unwrap();
            let r = typicality_decay(&d, 0.2, &[10, 20, 40, 80]).unwrap();
            assert!(r.non_increasing, "{r:?}");
            assert!(r.rate_fit.unwrap() > 0.0);
        }
    }

    #[test]
    fn typical_channel_examples() {
        let lim = Limits::default();
        let u = unitary_channel(haar_unitary::<f64, _>(2, &mut seeded(3))).unwrap();
        let t = typical_channel(&u, &identity(2), 3, 0.1, &lim).unwrap();
        assert_eq!(t.len(), 1);
        let half = pf(0.5);
        let t = typical_channel(&half, &identity(2), 4, 0.05, &lim).unwrap();
        assert_eq!(t.len(), 16);
        assert!(t.is_trace_preserving());

        let ch = pf(0.1);
        let t = typical_channel(&ch, &identity(2), 8, 0.15, &lim).unwrap();
        let pi = Density::maximally_mixed(256);
        let sel = t.apply(&pi).unwrap().selection_probability;
        let dist = kraus_distribution(&ch, &identity(2)).unwrap();
        let s = typical_summary(&dist, 8, 0.15).unwrap();
        assert_abs_diff_eq!(sel, s.mass, epsilon = 1e-10);
        assert_eq!(t.len() as u128, s.count_u128().unwrap());
    }

    #[test]
    fn subspace_examples() {
        let lim = Limits::default();
        let pi = Density::<f64>::maximally_mixed(2);
        let t = typical_subspace_projector(&pi, 4, 0.1, &lim).unwrap();
        assert_eq!(t.dim, 16);
        let p = t.projector(&lim).unwrap();
        assert!((p - identity::<f64>(16)).iter().all(|z| z.norm() < 1e-12));

        let psi = crate::linalg::random_pure_state::<f64, _>(3, &mut seeded(4));
        let t = typical_subspace_projector(&Density::pure(&psi).unwrap(), 3, 0.1, &lim).unwrap();
        assert_eq!(t.dim, 1);
        assert_abs_diff_eq!(t.mass, 1.0, epsilon = 1e-9);

        let mut m = CMatrix::<f64>::zeros(2, 2);
        m[(0, 0)] = creal(0.9);
        m[(1, 1)] = creal(0.1);
        let sigma = Density::new(m).unwrap();
        let t = typical_subspace_projector(&sigma, 10, 0.2, &lim).unwrap();
        let s = typical_summary(&t.spectrum().unwrap(), 10, 0.2).unwrap();
        assert_eq!(BigUint::from(t.dim), s.count);
        assert_abs_diff_eq!(t.mass, s.mass, epsilon = 1e-12);
        let proj = t.projector(&lim).unwrap();
        assert_abs_diff_eq!(trace(&proj).re, t.dim as f64, epsilon = 1e-9);
        assert!(t.dim_within_bound());
    }

    #[test]
    fn reduced_operation_matches_materialized_channel() {
        let lim = Limits::default();
        let mut rng = seeded(5);
        let ch = random_channel::<f64, _>(2, 3, &mut rng).unwrap();
        let d = diagonal_form(&ch, &identity(2)).unwrap();
        let (n, eps) = (4, 0.3);
        let r = reduced_operation(&d, &identity(2), n, eps, &lim).unwrap();
        if r.kraus_count > 0 {
            let red = reduced_channel(&d, &identity(2), n, eps, &lim).unwrap();
            let pi = Density::maximally_mixed(16);
            let sel = red.apply(&pi).unwrap().selection_probability;
            assert_abs_diff_eq!(sel, r.selection_prob, epsilon = 1e-10);
            assert_abs_diff_eq!(output_frobenius_sq(&red, &pi).unwrap(), r.frobenius_sq, epsilon = 1e-10);
        }
        assert!(r.selection_within_bound());
        assert!(r.frobenius_within_bound());
        assert!(r.kraus_count_within_bound() && r.dim_within_bound());
    }

    #[test]
    fn reduced_unitary() {
        let u = unitary_channel(haar_unitary::<f64, _>(2, &mut seeded(6))).unwrap();
        let mut v = CMatrix::<f64>::zeros(2, 1);
        v[(0, 0)] = creal(1.0);
        let r = reduced_operation(&u, &v, 3, 0.1, &Limits::default()).unwrap();
        assert_abs_diff_eq!(r.selection_prob, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.frobenius_sq, 1.0, epsilon = 1e-9);
        assert!(r.frobenius_within_bound());
    }

    #[test]
    fn rate_report_identity() {
        let id = make_standard::<f64>(StandardChannel::Identity { dim: 2 }).unwrap();
        let r = rate_bound_report(&id, &identity(2), 6, 0.1, 0.5, &Limits::default()).unwrap();
        // α = 0, β = sqrt(K_n)·2^{−n/2}
        assert_abs_diff_eq!(r.alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.beta, (8.0f64).sqrt() / 8.0, epsilon = 1e-12);
        assert!(r.beta_within_bound());
    }

    #[test]
    fn finite_m_rates() {
        let lim = Limits::default();
        let id = make_standard::<f64>(StandardChannel::Identity { dim: 3 }).unwrap();
        let r = finite_m_coherent_rate(&id, &Density::maximally_mixed(3), 1, &lim).unwrap();
        assert_abs_diff_eq!(r, 3f64.log2(), epsilon = 1e-10);
        let ch = pf(0.2);
        let pi = Density::maximally_mixed(2);
        let r1 = finite_m_coherent_rate(&ch, &pi, 1, &lim).unwrap();
        let r2 = finite_m_coherent_rate(&ch, &pi.tensor(&pi, &lim).unwrap(), 2, &lim).unwrap();
        assert_abs_diff_eq!(r1, 1.0 - h(0.2), epsilon = 1e-9);
        assert_abs_diff_eq!(r1, r2, epsilon = 1e-8);
    }
}
