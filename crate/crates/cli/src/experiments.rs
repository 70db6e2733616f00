//! Builds channels and codes from a configuration and evaluates one row per
//! parameter point.

use std::collections::BTreeMap;
use std::path::Path;

use aqec_core::channels::{make_standard, random_channel, StandardChannel};
use aqec_core::ensembles::{mc_avg_d_frobenius_sq_with, mc_ensemble_fidelity_with, mc_projector_moment, EnsembleSpec};
use aqec_core::info::{coherent_information, entropy_exchange, kraus_probability_entropy, unital_rate_report};
use aqec_core::linalg::{identity, von_neumann_entropy};
use aqec_core::qec::{
    build_d_with, entanglement_fidelity, exact_recovery, kl_check, sw_bound, uhlmann_recovery_with,
};
use aqec_core::rng::seeded;
use aqec_core::scalar::cplx;
use aqec_core::stats::MCEstimate;
use aqec_core::typicality::{
    diagonal_form, enumerate_typical, kraus_distribution, rate_bound_report, reduced_operation, sample_typicality,
};
use aqec_core::{Channel, CodeSpace, ComplexMatrix, Limits};

use crate::config::{
    read_basis_file, ChannelSpec, CodeSpec, ExperimentConfig, ExperimentKind, SubspaceSpec, TypicalityMode,
};
use crate::error::CliError;
use crate::output::{Cell, Table};

/// Seed offset separating random codes from random channels drawn from the
/// same master seed.
const CODE_SEED_OFFSET: u64 = 0x9e37_79b9;

/// Tolerance on basis-file orthonormality.
const BASIS_TOL: f64 = 1e-8;

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub base_dir: &'a Path,
    pub limits: Limits,
}

struct ChannelPoint {
    label: String,
    channel: Channel,
    instance: usize,
}

fn fmt_param(v: f64) -> String {
    format!("{v}")
}

fn standard(name: &str, params: &BTreeMap<String, f64>) -> Result<Channel, CliError> {
    let get = |k: &str| {
        params
            .get(k)
            .copied()
            .ok_or_else(|| CliError::config(format!("{name} needs parameter '{k}'"), None))
    };
    let spec = match name {
        "identity" => StandardChannel::Identity { dim: get("dim")? as usize },
        "bit_flip" => StandardChannel::BitFlip { p: get("p")? },
        "phase_flip" => StandardChannel::PhaseFlip { p: get("p")? },
        "depolarizing" => StandardChannel::Depolarizing { p: get("p")? },
        "amplitude_damping" => StandardChannel::AmplitudeDamping { gamma: get("gamma")? },
        "three_qubit_bitflip_noise" => StandardChannel::ThreeQubitBitflipNoise { p: get("p")? },
        other => return Err(CliError::config(format!("unknown channel '{other}'"), None)),
    };
    Ok(make_standard(spec)?)
}

/// Cartesian product of swept parameters, keys in sorted order.
fn param_grid(params: &BTreeMap<String, crate::config::OneOrMany<f64>>) -> Vec<BTreeMap<String, f64>> {
    let mut grid = vec![BTreeMap::new()];
    for (k, vals) in params {
        let mut next = Vec::new();
        for point in &grid {
            for v in vals.values() {
                let mut p = point.clone();
                p.insert(k.clone(), v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}

fn channel_points(ctx: &Context, spec: &ChannelSpec) -> Result<Vec<ChannelPoint>, CliError> {
    let instances = ctx.config.instances();
    let mut out = Vec::new();
    let keep_label = spec
        .keep
        .as_ref()
        .map(|k| {
            let idx: Vec<String> = k.iter().map(|i| i.to_string()).collect();
            format!("[keep={}]", idx.join(";"))
        })
        .unwrap_or_default();
    match &spec.name {
        Some(name) => {
            for params in param_grid(&spec.params) {
                let ch = standard(name, &params)?;
                let args: Vec<String> = params.iter().map(|(k, v)| format!("{k}={}", fmt_param(*v))).collect();
                let label = format!("{name}({}){keep_label}", args.join(";"));
                for instance in 0..instances {
                    out.push(ChannelPoint {
                        label: label.clone(),
                        channel: restrict(ch.clone(), spec)?,
                        instance,
                    });
                }
            }
        }
        None => {
            let (m, n) = match (spec.m, spec.n) {
                (Some(m), Some(n)) => (m, n),
                _ => return Err(CliError::config("random channel needs M and N", None)),
            };
            let base = spec.seed.unwrap_or(ctx.config.master_seed);
            for instance in 0..instances {
                let seed = base.wrapping_add(instance as u64);
                let ch = random_channel::<f64, _>(m, n, &mut seeded(seed))?;
                out.push(ChannelPoint {
                    label: format!("random(M={m};N={n};seed={seed}){keep_label}"),
                    channel: restrict(ch, spec)?,
                    instance,
                });
            }
        }
    }
    Ok(out)
}

fn restrict(ch: Channel, spec: &ChannelSpec) -> Result<Channel, CliError> {
    match &spec.keep {
        Some(keep) => Ok(ch.restrict(keep)?),
        None => Ok(ch),
    }
}

/// Reads an orthonormal basis file; slightly non-orthonormal columns
/// (within 1e-8) are re-orthonormalized by QR.
fn basis_from_file(ctx: &Context, file: &Path) -> Result<ComplexMatrix, CliError> {
    let path = ctx.base_dir.join(file);
    let cols = read_basis_file(&path)?;
    let (m, k) = (cols[0].len(), cols.len());
    let basis = ComplexMatrix::from_fn(m, k, |i, j| cplx(cols[j][i][0], cols[j][i][1]));
    match CodeSpace::with_tolerance(basis.clone(), BASIS_TOL) {
        Ok(_) => {}
        Err(aqec_core::Error::Input(msg)) => return Err(CliError::Basis(format!("{}: {msg}", path.display()))),
        Err(e) => return Err(e.into()),
    }
    if CodeSpace::new(basis.clone()).is_ok() {
        Ok(basis)
    } else {
        Ok(basis.qr().q())
    }
}

fn build_code(ctx: &Context, spec: &CodeSpec, m: usize, instance: usize) -> Result<(String, CodeSpace), CliError> {
    if let Some(name) = &spec.named {
        return match name.as_str() {
            "repetition3" => Ok(("repetition3".into(), CodeSpace::repetition3())),
            "full" => Ok(("full".into(), CodeSpace::full(m))),
            other => Err(CliError::config(format!("unknown code '{other}'"), None)),
        };
    }
    if let Some(k) = spec.k {
        let base = spec
            .seed
            .unwrap_or_else(|| ctx.config.master_seed.wrapping_add(CODE_SEED_OFFSET));
        let seed = base.wrapping_add(instance as u64);
        let code = CodeSpace::random(m, k, &mut seeded(seed))?;
        return Ok((format!("random(K={k};seed={seed})"), code));
    }
    if let Some(file) = &spec.basis_file {
        let code = CodeSpace::new(basis_from_file(ctx, file)?)?;
        return Ok((format!("file({})", file.display()), code));
    }
    Err(CliError::config("code needs named, K or basis_file", None))
}

fn subspace(ctx: &Context, spec: Option<&SubspaceSpec>, m: usize) -> Result<ComplexMatrix, CliError> {
    match spec {
        None => Ok(identity(m)),
        Some(SubspaceSpec { dim: Some(l), .. }) => {
            if *l == 0 || *l > m {
                return Err(CliError::config(format!("subspace dimension {l} outside 1..={m}"), None));
            }
            Ok(identity::<f64>(m).columns(0, *l).into_owned())
        }
        Some(SubspaceSpec {
            basis_file: Some(file), ..
        }) => {
            let v = basis_from_file(ctx, file)?;
            if v.nrows() != m {
                return Err(CliError::config(
                    format!("subspace lives in dimension {}, channel in {m}", v.nrows()),
                    None,
                ));
            }
            Ok(v)
        }
        Some(_) => Err(CliError::config("subspace needs dim or basis_file", None)),
    }
}

fn require<'a, T>(block: &'a Option<T>, what: &str) -> Result<&'a T, CliError> {
    block
        .as_ref()
        .ok_or_else(|| CliError::config(format!("missing {what} block"), None))
}

fn estimate_cells(e: &MCEstimate<f64>) -> Vec<Cell> {
    vec![
        Cell::Float(e.mean),
        Cell::Float(e.stderr),
        Cell::Float(e.closed_form.unwrap_or(f64::NAN)),
        Cell::Float(e.sigmas.unwrap_or(f64::NAN)),
    ]
}

pub fn run(ctx: &Context) -> Result<Table, CliError> {
    match ctx.config.experiment {
        ExperimentKind::KlCheck | ExperimentKind::Bound | ExperimentKind::RecoveryVerify | ExperimentKind::InfoReport => {
            code_experiment(ctx)
        }
        ExperimentKind::EnsembleMoment => ensemble_moment(ctx),
        ExperimentKind::EnsembleDavg | ExperimentKind::EnsembleFidelity => ensemble_experiment(ctx),
        ExperimentKind::TypicalityTrend => typicality_trend(ctx),
        ExperimentKind::RateReport => rate_report(ctx),
    }
}

fn code_experiment(ctx: &Context) -> Result<Table, CliError> {
    let cfg = ctx.config;
    let kind = cfg.experiment;
    let mut header = vec!["experiment", "channel", "code", "instance", "M", "K", "N"];
    header.extend_from_slice(match kind {
        ExperimentKind::KlCheck => &["residual", "exact"][..],
        ExperimentKind::Bound => &[
            "selection_probability",
            "trace_norm_d",
            "frobenius_sq_d",
            "fidelity_lower_bound",
            "clamped_bound",
            "frobenius_ratio",
        ][..],
        ExperimentKind::RecoveryVerify => &[
            "kl_residual",
            "recovery",
            "recovery_kraus",
            "entanglement_fidelity",
            "fidelity_lower_bound",
            "slack",
            "passed",
        ][..],
        _ => &[
            "input_entropy",
            "entropy_exchange",
            "coherent_information",
            "sw_bound",
            "unital",
            "log_rate",
            "equal_probability",
            "nonzero_kraus",
            "kraus_entropy",
        ][..],
    });
    header.push("seed");
    let mut table = Table::new(header);
    let default_code = CodeSpec {
        named: Some("full".into()),
        ..CodeSpec::default()
    };
    let code_spec = cfg.code.as_ref().unwrap_or(&default_code);
    for point in channel_points(ctx, require(&cfg.channel, "channel")?)? {
        let ch = &point.channel;
        let (code_label, code) = build_code(ctx, code_spec, ch.input_dim(), point.instance)?;
        if code.ambient_dim() != ch.input_dim() {
            return Err(CliError::config(
                format!(
                    "code lives in dimension {} but the channel acts on dimension {}",
                    code.ambient_dim(),
                    ch.input_dim()
                ),
                None,
            ));
        }
        let mut row = vec![
            Cell::Text(kind.name().into()),
            Cell::Text(point.label.clone()),
            Cell::Text(code_label),
            Cell::Int(point.instance as u128),
            Cell::Int(ch.input_dim() as u128),
            Cell::Int(code.code_dim() as u128),
            Cell::Int(ch.len() as u128),
        ];
        match kind {
            ExperimentKind::KlCheck => {
                let kl = kl_check(ch, &code)?;
                row.extend([Cell::Float(kl.residual), Cell::Bool(kl.exact)]);
            }
            ExperimentKind::Bound => {
                let d = build_d_with(ch, &code, &ctx.limits)?;
                row.extend([
                    Cell::Float(d.selection_probability),
                    Cell::Float(d.trace_norm_d),
                    Cell::Float(d.frobenius_sq_d),
                    Cell::Float(d.fidelity_lower_bound),
                    Cell::Float(d.clamped_bound()),
                    Cell::Float(d.frobenius_ratio()),
                ]);
            }
            ExperimentKind::RecoveryVerify => {
                let kl = kl_check(ch, &code)?;
                let d = build_d_with(ch, &code, &ctx.limits)?;
                let (name, rec) = if kl.exact {
                    ("exact", exact_recovery(ch, &code)?)
                } else {
                    ("uhlmann", uhlmann_recovery_with(ch, &code, &ctx.limits)?.recovery)
                };
                let fe = entanglement_fidelity(&ch.then(&rec)?, &code.maximally_mixed())?;
                let passed = if kl.exact {
                    fe >= 1.0 - 1e-8
                } else {
                    fe >= d.fidelity_lower_bound - 1e-6
                };
                row.extend([
                    Cell::Float(kl.residual),
                    Cell::Text(name.into()),
                    Cell::Int(rec.len() as u128),
                    Cell::Float(fe),
                    Cell::Float(d.fidelity_lower_bound),
                    Cell::Float(fe - d.fidelity_lower_bound),
                    Cell::Bool(passed),
                ]);
            }
            _ => {
                let rho = code.maximally_mixed();
                let unital = unital_rate_report(ch)?;
                row.extend([
                    Cell::Float(von_neumann_entropy(&rho)?),
                    Cell::Float(entropy_exchange(ch, &rho)?),
                    Cell::Float(coherent_information(ch, &rho)?),
                    Cell::Float(sw_bound(ch, &code)?),
                    Cell::Bool(unital.unital),
                    Cell::Float(unital.log_rate),
                    Cell::Bool(unital.equal_probability),
                    Cell::Int(unital.nonzero_kraus as u128),
                    Cell::Float(kraus_probability_entropy(ch)?),
                ]);
            }
        }
        row.push(Cell::Int(cfg.master_seed as u128));
        table.push(row);
    }
    Ok(table)
}

fn ensemble_moment(ctx: &Context) -> Result<Table, CliError> {
    let cfg = ctx.config;
    let e = require(&cfg.ensemble, "ensemble")?;
    let ms = e
        .m
        .as_ref()
        .ok_or_else(|| CliError::config("ensemble-moment needs M", None))?
        .values();
    let mut table = Table::new(vec![
        "experiment", "M", "K", "samples", "mean", "stderr", "closed_form", "sigmas", "seed",
    ]);
    for &m in &ms {
        ctx.limits.check_dim("ensemble ambient dimension", m as u128)?;
        for k in e.k.values() {
            let est = mc_projector_moment::<f64>(m, k, e.samples, cfg.master_seed)?;
            let mut row = vec![
                Cell::Text(cfg.experiment.name().into()),
                Cell::Int(m as u128),
                Cell::Int(k as u128),
                Cell::Int(e.samples as u128),
            ];
            row.extend(estimate_cells(&est));
            row.push(Cell::Int(cfg.master_seed as u128));
            table.push(row);
        }
    }
    Ok(table)
}

fn ensemble_experiment(ctx: &Context) -> Result<Table, CliError> {
    let cfg = ctx.config;
    let e = require(&cfg.ensemble, "ensemble")?;
    let fidelity = cfg.experiment == ExperimentKind::EnsembleFidelity;
    let mut header = vec!["experiment", "channel", "instance", "M", "N", "L", "K", "samples"];
    if fidelity {
        header.extend_from_slice(&[
            "kraus_count",
            "bound_mean",
            "bound_stderr",
            "analytic_bound",
            "simple_bound",
            "max_bound",
            "trace_norm_mean",
            "frobenius_sq_mean",
            "frobenius_sq_closed_form",
            "frobenius_ratio_mean",
        ]);
    } else {
        header.extend_from_slice(&["mean", "stderr", "closed_form", "sigmas", "upper_bound"]);
    }
    header.push("seed");
    let mut table = Table::new(header);
    for point in channel_points(ctx, require(&cfg.channel, "channel")?)? {
        let ch = &point.channel;
        let v = subspace(ctx, e.v.as_ref(), ch.input_dim())?;
        for k in e.k.values() {
            let spec = EnsembleSpec::new(v.clone(), k, e.samples, cfg.master_seed)?;
            let mut row = vec![
                Cell::Text(cfg.experiment.name().into()),
                Cell::Text(point.label.clone()),
                Cell::Int(point.instance as u128),
                Cell::Int(ch.input_dim() as u128),
                Cell::Int(ch.len() as u128),
                Cell::Int(v.ncols() as u128),
                Cell::Int(k as u128),
                Cell::Int(e.samples as u128),
            ];
            if fidelity {
                let r = mc_ensemble_fidelity_with(ch, &spec, &ctx.limits)?;
                row.extend([
                    Cell::Int(r.kraus_count as u128),
                    Cell::Float(r.bound.mean),
                    Cell::Float(r.bound.stderr),
                    Cell::Float(r.analytic_bound),
                    Cell::Float(r.simple_bound),
                    Cell::Float(r.max_bound),
                    Cell::Float(r.trace_norm_d.mean),
                    Cell::Float(r.frobenius_sq_d.mean),
                    Cell::Float(r.frobenius_sq_d.closed_form.unwrap_or(f64::NAN)),
                    Cell::Float(r.frobenius_ratio.mean),
                ]);
            } else {
                let r = mc_avg_d_frobenius_sq_with(ch, &spec, &ctx.limits)?;
                row.extend(estimate_cells(&r.estimate));
                row.push(Cell::Float(r.upper_bound));
            }
            row.push(Cell::Int(cfg.master_seed as u128));
            table.push(row);
        }
    }
    Ok(table)
}

fn typicality_trend(ctx: &Context) -> Result<Table, CliError> {
    let cfg = ctx.config;
    let t = require(&cfg.typicality, "typicality")?;
    let sample = t.mode == TypicalityMode::Sample;
    let mut header = vec!["experiment", "channel", "instance", "n", "epsilon"];
    if sample {
        header.extend_from_slice(&["samples", "typical_prob", "stderr", "closed_form", "sigmas"]);
    } else {
        header.extend_from_slice(&[
            "kraus_entropy",
            "output_entropy",
            "kraus_count",
            "count_bound_log2",
            "nonzero_kraus_count",
            "typical_subspace_dim",
            "dim_bound_log2",
            "kraus_mass",
            "subspace_mass",
            "selection_prob",
            "frobenius_sq",
            "frobenius_bound",
        ]);
    }
    header.push("seed");
    let mut table = Table::new(header);
    for point in channel_points(ctx, require(&cfg.channel, "channel")?)? {
        let v = subspace(ctx, t.v.as_ref(), point.channel.input_dim())?;
        let ch = diagonal_form(&point.channel, &v)?;
        let dist = kraus_distribution(&ch, &v)?;
        for eps in t.epsilon.values() {
            for n in t.n.values() {
                let mut row = vec![
                    Cell::Text(cfg.experiment.name().into()),
                    Cell::Text(point.label.clone()),
                    Cell::Int(point.instance as u128),
                    Cell::Int(n as u128),
                    Cell::Float(eps),
                ];
                if sample {
                    let samples = t.samples.unwrap_or(0);
                    let est = sample_typicality(&dist, n, eps, samples, cfg.master_seed)?;
                    if est.closed_form.is_none() {
                        return Err(aqec_core::Error::Capacity {
                            what: "type classes for the exact typical mass",
                            requested: n as u128,
                            limit: 0,
                            hint: Some("reduce n"),
                        }
                        .into());
                    }
                    row.push(Cell::Int(samples as u128));
                    row.extend(estimate_cells(&est));
                } else {
                    let set = enumerate_typical(&dist, n, eps, &ctx.limits)?;
                    let r = reduced_operation(&ch, &v, n, eps, &ctx.limits)?;
                    if set.count() as u128 != r.kraus_count {
                        return Err(aqec_core::Error::Numerical(format!(
                            "enumerated typical count {} differs from type-class count {}",
                            set.count(),
                            r.kraus_count
                        ))
                        .into());
                    }
                    let nf = n as f64;
                    row.extend([
                        Cell::Float(r.kraus_entropy),
                        Cell::Float(r.output_entropy),
                        Cell::Int(r.kraus_count),
                        Cell::Float(nf * (r.kraus_entropy + eps)),
                        Cell::Int(r.nonzero_kraus_count),
                        Cell::Int(r.typical_subspace_dim as u128),
                        Cell::Float(nf * (r.output_entropy + eps)),
                        Cell::Float(set.mass),
                        Cell::Float(r.subspace_mass),
                        Cell::Float(r.selection_prob),
                        Cell::Float(r.frobenius_sq),
                        Cell::Float(r.frobenius_bound()),
                    ]);
                }
                row.push(Cell::Int(cfg.master_seed as u128));
                table.push(row);
            }
        }
    }
    Ok(table)
}

fn rate_report(ctx: &Context) -> Result<Table, CliError> {
    let cfg = ctx.config;
    let t = require(&cfg.typicality, "typicality")?;
    let rates = t
        .rate
        .as_ref()
        .ok_or_else(|| CliError::config("rate-report needs R", None))?
        .values();
    let mut table = Table::new(vec![
        "experiment",
        "channel",
        "instance",
        "rate",
        "epsilon",
        "n",
        "code_dim",
        "kraus_count",
        "nonzero_kraus_count",
        "alpha",
        "beta",
        "beta_nonzero",
        "bound",
        "coherent_information",
        "beta_exponent",
        "seed",
    ]);
    for point in channel_points(ctx, require(&cfg.channel, "channel")?)? {
        let v = subspace(ctx, t.v.as_ref(), point.channel.input_dim())?;
        let ch = diagonal_form(&point.channel, &v)?;
        for &rate in &rates {
            for eps in t.epsilon.values() {
                for n in t.n.values() {
                    let r = rate_bound_report(&ch, &v, n, eps, rate, &ctx.limits)?;
                    table.push(vec![
                        Cell::Text(cfg.experiment.name().into()),
                        Cell::Text(point.label.clone()),
                        Cell::Int(point.instance as u128),
                        Cell::Float(rate),
                        Cell::Float(eps),
                        Cell::Int(n as u128),
                        Cell::Int(r.code_dim),
                        Cell::Int(r.reduction.kraus_count),
                        Cell::Int(r.reduction.nonzero_kraus_count),
                        Cell::Float(r.alpha),
                        Cell::Float(r.beta),
                        Cell::Float(r.beta_nonzero),
                        Cell::Float(r.bound),
                        Cell::Float(r.coherent_information),
                        Cell::Float(r.beta_exponent),
                        Cell::Int(cfg.master_seed as u128),
                    ]);
                }
            }
        }
    }
    Ok(table)
}
