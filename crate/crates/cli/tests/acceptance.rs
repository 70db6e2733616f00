//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aqec_core::channels::{make_standard, random_channel, KrausChannel, StandardChannel};
use aqec_core::ensembles::{mc_avg_d_frobenius_sq, mc_projector_moment, EnsembleSpec};
use aqec_core::info::{coherent_information, data_processing_check, entropy_exchange};
use aqec_core::linalg::{
    haar_unitary, hermitian_eigen, identity, kron, random_density, trace, von_neumann_entropy, CMatrix, CVector,
    Density,
};
use aqec_core::qec::{
    average_channel_fidelity_mc, build_d, code_entanglement_fidelity, entanglement_fidelity, exact_recovery,
    extract_subcode, kl_check, sampled_min_fidelity, uhlmann_recovery,
};
use aqec_core::rng::seeded;
use aqec_core::scalar::cplx;
use aqec_core::typicality::{
    enumerate_typical, rate_bound_report, reduced_operation, typical_subspace_projector,
    typical_summary, KrausDistribution,
};
use aqec_core::{Channel, CodeSpace, Limits, Tolerances};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn binary_entropy(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

fn projector_moment() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (i, (m, k)) in [(2usize, 1usize), (4, 2), (8, 3)].into_iter().enumerate() {
        let est = mc_projector_moment::<f64>(m, k, 20_000, 1000 + i as u64).unwrap();
        let exact = ((k * k + k) as f64) / ((m * m + m) as f64);
        let sig = (est.mean - exact).abs() / est.stderr;
        ok &= sig <= 3.0;
        notes.push(format!("(M={m},K={k}) {:.5}/{exact:.5} {sig:.2}σ", est.mean));
    }
    outcome(ok, notes.join("; "))
}

/// Σ_ij (‖A_i†A_j‖_F² − |tr A_i†A_j|²/M)·(1 − 1/K²)/(M² − 1).
fn exact_average_oracle(ch: &Channel, k: usize) -> f64 {
    let m = ch.input_dim() as f64;
    let kf = k as f64;
    let mut s = 0.0;
    for a in ch.kraus() {
        for b in ch.kraus() {
            let w = a.adjoint() * b;
            s += w.norm_squared() - trace(&w).norm_sqr() / m;
        }
    }
    (1.0 - 1.0 / (kf * kf)) / (m * m - 1.0) * s
}

fn exact_average() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for m in [4usize, 8] {
        for n in [2usize, 3] {
            let ch = random_channel::<f64, _>(m, n, &mut seeded((10 * m + n) as u64)).unwrap();
            for k in [2usize, 3] {
                let spec = EnsembleSpec::full(m, k, 5_000, (100 * m + 10 * n + k) as u64).unwrap();
                let r = mc_avg_d_frobenius_sq(&ch, &spec).unwrap();
                let oracle = exact_average_oracle(&ch, k);
                let sig = (r.estimate.mean - oracle).abs() / r.estimate.stderr;
                worst = worst.max(sig);
                ok &= sig <= 3.0;
                ok &= (r.estimate.closed_form.unwrap() - oracle).abs() <= 1e-12 * (1.0 + oracle);
                points += 1;
            }
        }
    }
    outcome(ok, format!("{points} grid points, worst deviation {worst:.2}σ"))
}

fn exact_correction() -> Outcome {
    let code = CodeSpace::repetition3();
    let mut ok = true;
    let mut notes = Vec::new();
    for p in [0.05, 0.2, 0.5] {
        let ch = make_standard::<f64>(StandardChannel::ThreeQubitBitflipNoise { p }).unwrap();
        let kl = kl_check(&ch, &code).unwrap();
        let d = build_d(&ch, &code).unwrap();
        let rec = exact_recovery(&ch, &code).unwrap();
        let fe = entanglement_fidelity(&ch.then(&rec).unwrap(), &code.maximally_mixed()).unwrap();
        ok &= kl.residual <= 1e-10 && d.trace_norm_d <= 1e-9 && fe >= 1.0 - 1e-8;
        notes.push(format!(
            "p={p}: KL {:.1e}, ‖D‖ {:.1e}, 1-Fe {:.1e}",
            kl.residual,
            d.trace_norm_d,
            1.0 - fe
        ));
    }
    outcome(ok, notes.join("; "))
}

fn uhlmann_witness(ch: &Channel, code: &CodeSpace) -> (f64, f64) {
    let d = build_d(ch, code).unwrap();
    let rec = uhlmann_recovery(ch, code).unwrap();
    let fe = entanglement_fidelity(&ch.then(&rec).unwrap(), &code.maximally_mixed()).unwrap();
    (fe, d.fidelity_lower_bound)
}

fn constructive_bound() -> Outcome {
    let mut rng = seeded(4242);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for i in 0..20 {
        let m = [4usize, 8][i % 2];
        let n = [2usize, 3][(i / 2) % 2];
        let ch = random_channel::<f64, _>(m, n, &mut rng).unwrap();
        let code = CodeSpace::random(m, 2, &mut rng).unwrap();
        let (fe, bound) = uhlmann_witness(&ch, &code);
        worst = worst.min(fe - bound);
        count += 1;
    }
    let mut selective = Vec::new();
    for i in 0..4 {
        let ch = random_channel::<f64, _>(4, 3, &mut rng).unwrap();
        let keep: Vec<usize> = if i % 2 == 0 { vec![0] } else { vec![0, 2] };
        let sub = ch.restrict(&keep).unwrap();
        let code = CodeSpace::random(4, 2, &mut rng).unwrap();
        selective.push((sub, code));
    }
    let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.1 }).unwrap();
    let mut psi = CMatrix::<f64>::zeros(2, 1);
    psi[(0, 0)] = cplx(0.6, 0.0);
    psi[(1, 0)] = cplx(0.0, 0.8);
    selective.push((pf.restrict(&[0]).unwrap(), CodeSpace::new(psi).unwrap()));
    for (ch, code) in &selective {
        let (fe, bound) = uhlmann_witness(ch, code);
        worst = worst.min(fe - bound);
        count += 1;
    }
    outcome(
        worst >= -1e-6,
        format!("{count} instances (5 trace-decreasing), min Fe - bound = {worst:.3e}"),
    )
}

fn representation_independence() -> Outcome {
    let mut rng = seeded(55);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let m = 3 + i % 4;
        let ch = random_channel::<f64, _>(m, 2 + i % 3, &mut rng).unwrap();
        let code = CodeSpace::random(m, 2, &mut rng).unwrap();
        let diag = ch.diagonalize(&identity(m)).unwrap();
        let a = build_d(&ch, &code).unwrap().trace_norm_d;
        let b = build_d(&diag, &code).unwrap().trace_norm_d;
        worst = worst.max((a - b).abs());
    }
    outcome(worst <= 1e-9, format!("10 instances, max |Δ‖D‖_tr| = {worst:.2e}"))
}

/// Entropy of (I ⊗ N)(ψ) for an explicit purification ψ of ρ.
fn purification_entropy(ch: &Channel, rho: &Density<f64>) -> f64 {
    let d = rho.dim();
    let eig = hermitian_eigen(rho.matrix(), &Tolerances::default()).unwrap();
    let mut psi = CVector::<f64>::zeros(d * d);
    for k in 0..d {
        let w = eig.values[k].max(0.0).sqrt();
        for q in 0..d {
            psi[k * d + q] = eig.vectors[(q, k)] * cplx::<f64>(w, 0.0);
        }
    }
    let lim = Limits::default();
    let dim = d * ch.output_dim();
    let mut out = CMatrix::<f64>::zeros(dim, dim);
    for a in ch.kraus() {
        let phi = kron(&identity(d), a, &lim).unwrap() * &psi;
        out += &phi * phi.adjoint();
    }
    von_neumann_entropy(&Density::new(out).unwrap()).unwrap()
}

fn entropic_identities() -> Outcome {
    let mut rng = seeded(66);
    let mut worst_se: f64 = 0.0;
    for i in 0..10 {
        let m = 2 + i % 3;
        let ch = random_channel::<f64, _>(m, 2 + i % 2, &mut rng).unwrap();
        let rho = random_density::<f64, _>(m, &mut rng);
        worst_se = worst_se.max((entropy_exchange(&ch, &rho).unwrap() - purification_entropy(&ch, &rho)).abs());
    }
    let mut worst_pf: f64 = 0.0;
    for p in [0.1, 0.3, 0.5] {
        let ch = make_standard::<f64>(StandardChannel::PhaseFlip { p }).unwrap();
        let i = coherent_information(&ch, &Density::maximally_mixed(2)).unwrap();
        worst_pf = worst_pf.max((i - (1.0 - binary_entropy(p))).abs());
    }
    let mut chains = 0;
    for _ in 0..10 {
        let a = random_channel::<f64, _>(4, 2, &mut rng).unwrap();
        let b = random_channel::<f64, _>(4, 3, &mut rng).unwrap();
        let rho = random_density::<f64, _>(4, &mut rng);
        chains += data_processing_check(&a, &b, &rho).unwrap().passed as usize;
    }
    outcome(
        worst_se <= 1e-8 && worst_pf <= 1e-9 && chains == 10,
        format!("S_e oracle Δ {worst_se:.1e}; phase-flip I Δ {worst_pf:.1e}; data processing {chains}/10"),
    )
}

fn typicality_exactness() -> Outcome {
    let dist = KrausDistribution::new(vec![0.9, 0.1]).unwrap();
    let lim = Limits::default();
    let mut ok = true;
    let mut notes = Vec::new();
    let mut sigma = CMatrix::<f64>::zeros(2, 2);
    sigma[(0, 0)] = cplx(0.9, 0.0);
    sigma[(1, 1)] = cplx(0.1, 0.0);
    let sigma = Density::new(sigma).unwrap();
    for eps in [0.1, 0.2] {
        let s = typical_summary(&dist, 10, eps).unwrap();
        let e = enumerate_typical(&dist, 10, eps, &lim).unwrap();
        let same = s.count_u128() == Some(e.count() as u128) && s.mass_exact == e.mass_exact;
        let h = dist.entropy();
        let count_ok = (e.count() as f64) <= (10.0 * (h + eps)).exp2();
        let t = typical_subspace_projector(&sigma, 10, eps, &lim).unwrap();
        let dim_ok = (t.dim as f64) <= (10.0 * (t.entropy + eps)).exp2();
        ok &= same && count_ok && dim_ok;
        notes.push(format!(
            "ε={eps}: count {} mass {:.6} exact-match {same}, dim T {}",
            e.count(),
            e.mass,
            t.dim
        ));
    }
    // the bounds also hold at the reduced-operation grid points
    let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.1 }).unwrap();
    for n in [2, 4, 6, 8] {
        let r = reduced_operation(&pf, &identity(2), n, 0.15, &lim).unwrap();
        ok &= r.kraus_count_within_bound() && r.dim_within_bound();
    }
    outcome(ok, notes.join("; "))
}

fn reduced_trends() -> Outcome {
    let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.1 }).unwrap();
    let lim = Limits::default();
    let mut sel = Vec::new();
    let mut frob_ok = true;
    for n in [2, 4, 6, 8] {
        let r = reduced_operation(&pf, &identity(2), n, 0.15, &lim).unwrap();
        frob_ok &= r.frobenius_within_bound();
        sel.push(r.selection_prob);
    }
    let monotone = non_decreasing(&sel);
    let last = sel[3] >= 0.5;
    outcome(
        monotone && last && frob_ok,
        format!(
            "tr Ñ(π) = {} (non-decreasing {monotone}, ≥0.5 at n=8 {last}); Frobenius bound {frob_ok}",
            fmt_list(&sel)
        ),
    )
}

fn rate_direction() -> Outcome {
    let pf = make_standard::<f64>(StandardChannel::PhaseFlip { p: 0.1 }).unwrap();
    let lim = Limits::default();
    let ns = [4, 6, 8, 10];
    let series = |rate: f64, f: fn(&aqec_core::typicality::RateBoundReport) -> f64| -> Vec<f64> {
        ns.iter()
            .map(|&n| f(&rate_bound_report(&pf, &identity(2), n, 0.1, rate, &lim).unwrap()))
            .collect()
    };
    let bound = series(0.2, |r| r.bound);
    let beta = series(0.9, |r| r.beta);
    // grid points with no typical sequence contribute the constant 0; the
    // series must never decrease and must end strictly above where it starts
    let rises = |xs: &[f64]| non_decreasing(xs) && xs[xs.len() - 1] > xs[0];
    let ci = rate_bound_report(&pf, &identity(2), 4, 0.1, 0.2, &lim).unwrap().coherent_information;
    outcome(
        rises(&bound) && rises(&beta),
        format!(
            "I(π,N) = {ci:.4}; R=0.2 bound {}; R=0.9 β {}",
            fmt_list(&bound),
            fmt_list(&beta)
        ),
    )
}

/// {√(1−q) 1, √q U}.
fn unitary_mixture(m: usize, q: f64, seed: u64) -> Channel {
    let u = haar_unitary::<f64, _>(m, &mut seeded(seed));
    KrausChannel::new(vec![identity::<f64>(m).scale((1.0 - q).sqrt()), u.scale(q.sqrt())]).unwrap()
}

fn fidelity_relations() -> Outcome {
    let mut rng = seeded(77);
    let mut ok_av = 0;
    for i in 0..10 {
        let ch = random_channel::<f64, _>(4, 2 + i % 2, &mut rng).unwrap();
        let code = CodeSpace::random(4, 2, &mut rng).unwrap();
        let fe = code_entanglement_fidelity(&ch, &code).unwrap();
        let av = average_channel_fidelity_mc(&ch, &code, 2_000, 900 + i as u64).unwrap();
        ok_av += (fe <= av.mean + 3.0 * av.stderr) as usize;
    }
    let mut ok_sub = 0;
    let mut notes = Vec::new();
    for i in 0..5 {
        let q = 0.01 * (i + 1) as f64;
        let ch = unitary_mixture(8, q, 300 + i as u64);
        let code = CodeSpace::random(8, 4, &mut rng).unwrap();
        let rec = uhlmann_recovery(&ch, &code).unwrap();
        let e = ch.then(&rec).unwrap();
        let eps = 1.0 - code_entanglement_fidelity(&e, &code).unwrap();
        let sub = extract_subcode(&e, &code, code.code_dim() / 2, 500 + i as u64).unwrap();
        let min = sampled_min_fidelity(&e, &sub.code, 200, 600 + i as u64).unwrap();
        let pass = eps <= 0.05 && min >= 1.0 - 2.0 * eps - 0.01;
        ok_sub += pass as usize;
        notes.push(format!("ε={eps:.4} min={min:.4}"));
    }
    outcome(
        ok_av == 10 && ok_sub == 5,
        format!("F_e ≤ F_av+3σ {ok_av}/10; subcode {ok_sub}/5 ({})", notes.join(", ")),
    )
}

fn run_cli(config: &Path, out: &Path, threads: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_aqec"))
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("aqec runs");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let mut same = 0;
    let names = [
        "ensemble_davg",
        "ensemble_fidelity",
        "ensemble_moment",
        "recovery_verify",
        "typicality_sample",
        "rate_report",
    ];
    for name in names {
        let cfg = configs.join(format!("{name}.json"));
        let a = run_cli(&cfg, &dir.path().join(format!("{name}_a.csv")), "1");
        let b = run_cli(&cfg, &dir.path().join(format!("{name}_b.csv")), "4");
        let c = run_cli(&cfg, &dir.path().join(format!("{name}_c.csv")), "4");
        same += (a == b && b == c && !a.is_empty()) as usize;
    }
    outcome(
        same == names.len(),
        format!("{same}/{} configs byte-identical over 3 runs (1 and 4 threads)", names.len()),
    )
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Outcome); 11] = [
        ("projector moment", Some(Duration::from_secs(30)), projector_moment),
        ("exact ensemble average", Some(Duration::from_secs(120)), exact_average),
        ("exact-correction fixture", Some(Duration::from_secs(5)), exact_correction),
        ("constructive bound witness", Some(Duration::from_secs(120)), constructive_bound),
        ("representation independence", None, representation_independence),
        ("entropic identities", None, entropic_identities),
        ("typicality exactness", None, typicality_exactness),
        ("reduced-operation trends", Some(Duration::from_secs(60)), reduced_trends),
        ("rate-bound direction", Some(Duration::from_secs(60)), rate_direction),
        ("fidelity relations", None, fidelity_relations),
        ("determinism", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = out.passed && in_time;
        failed += !pass as usize;
        let timing = match budget {
            Some(b) => format!("{:.2}s of {}s", took.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", took.as_secs_f64()),
        };
        println!(
            "criterion {:>2} {} {name}: {} [{timing}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
