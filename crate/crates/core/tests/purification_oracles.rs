use aqec_core::channels::{make_standard, random_channel, StandardChannel};
use aqec_core::info::{coherent_information, entropy_exchange};
use aqec_core::linalg::{hermitian_eigen, identity, kron, random_density, von_neumann_entropy, CMatrix, CVector, Density};
use aqec_core::qec::{entanglement_fidelity, exact_recovery, CodeSpace as Code};
use aqec_core::rng::seeded;
use aqec_core::{Channel, Limits, Tolerances};
use approx::assert_abs_diff_eq;
use nalgebra::Complex;

/// |ψ_RQ⟩ = Σ_k sqrt(λ_k) |k⟩_R |e_k⟩_Q.
fn purify(rho: &Density<f64>) -> CVector<f64> {
    let d = rho.dim();
    let eig = hermitian_eigen(rho.matrix(), &Tolerances::default()).unwrap();
    let mut psi = CVector::zeros(d * d);
    for k in 0..d {
        let w = eig.values[k].max(0.0).sqrt();
        for q in 0..d {
            psi[k * d + q] = eig.vectors[(q, k)] * Complex::new(w, 0.0);
        }
    }
    psi
}

/// (I_R ⊗ N)(ψ_RQ).
fn extended_output(ch: &Channel, rho: &Density<f64>) -> (CVector<f64>, CMatrix<f64>) {
    let d = rho.dim();
    let psi = purify(rho);
    let lim = Limits::default();
    let mut out = CMatrix::zeros(d * ch.output_dim(), d * ch.output_dim());
    for a in ch.kraus() {
        let phi = kron(&identity(d), a, &lim).unwrap() * &psi;
        out += &phi * phi.adjoint();
    }
    (psi, out)
}

#[test]
fn entropy_exchange_matches_purification() {
    let mut rng = seeded(101);
    for i in 0..20 {
        let m = 2 + i % 3;
        let n = 2 + i % 2;
        let ch = random_channel::<f64, _>(m, n, &mut rng).unwrap();
        let rho = random_density::<f64, _>(m, &mut rng);
        let (_, out) = extended_output(&ch, &rho);
        let oracle = von_neumann_entropy(&Density::new(out).unwrap()).unwrap();
        assert_abs_diff_eq!(entropy_exchange(&ch, &rho).unwrap(), oracle, epsilon = 1e-8);
    }
}

#[test]
fn entanglement_fidelity_matches_purification() {
    let mut rng = seeded(102);
    for i in 0..20 {
        let m = 2 + i % 3;
        let ch = random_channel::<f64, _>(m, 3, &mut rng).unwrap();
        let rho = random_density::<f64, _>(m, &mut rng);
        let (psi, out) = extended_output(&ch, &rho);
        let oracle = psi.dotc(&(&out * &psi)).re;
        assert_abs_diff_eq!(entanglement_fidelity(&ch, &rho).unwrap(), oracle, epsilon = 1e-10);
    }
}

#[test]
fn standard_channel_fidelities() {
    let pi = Density::maximally_mixed(2);
    for p in [0.1, 0.4, 0.9] {
        let dep = make_standard::<f64>(StandardChannel::Depolarizing { p }).unwrap();
        assert_abs_diff_eq!(entanglement_fidelity(&dep, &pi).unwrap(), 1.0 - 0.75 * p, epsilon = 1e-12);
        let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p }).unwrap();
        assert_abs_diff_eq!(entanglement_fidelity(&pf, &pi).unwrap(), 1.0 - p, epsilon = 1e-12);
    }
}

#[test]
fn coherent_information_below_input_entropy() {
    let mut rng = seeded(103);
    for _ in 0..10 {
        let ch = random_channel::<f64, _>(3, 2, &mut rng).unwrap();
        let rho = random_density::<f64, _>(3, &mut rng);
        let s = von_neumann_entropy(&rho).unwrap();
        assert!(coherent_information(&ch, &rho).unwrap() <= s + 1e-7);
    }
}

#[test]
fn exact_recovery_preserves_coherent_information() {
    let mut rng = seeded(104);
    let code = Code::repetition3();
    for p in [0.05, 0.2] {
        let noise = make_standard::<f64>(StandardChannel::ThreeQubitBitflipNoise { p }).unwrap();
        let rec = exact_recovery(&noise, &code).unwrap();
        let small = random_density::<f64, _>(2, &mut rng);
        let b = code.basis();
        let rho = Density::new(b * small.matrix() * b.adjoint()).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        let both = noise.then(&rec).unwrap();
        assert_abs_diff_eq!(coherent_information(&both, &rho).unwrap(), s, epsilon = 1e-6);
        assert_abs_diff_eq!(coherent_information(&noise, &rho).unwrap(), s, epsilon = 1e-6);
    }
}
