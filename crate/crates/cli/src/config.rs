//! Experiment configuration: JSON schema, source line lookup and static
//! checks run before any computation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use aqec_core::Limits;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    KlCheck,
    Bound,
    RecoveryVerify,
    EnsembleMoment,
    EnsembleDavg,
    EnsembleFidelity,
    TypicalityTrend,
    RateReport,
    InfoReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KlCheck => "kl-check",
            ExperimentKind::Bound => "bound",
            ExperimentKind::RecoveryVerify => "recovery-verify",
            ExperimentKind::EnsembleMoment => "ensemble-moment",
            ExperimentKind::EnsembleDavg => "ensemble-davg",
            ExperimentKind::EnsembleFidelity => "ensemble-fidelity",
            ExperimentKind::TypicalityTrend => "typicality-trend",
            ExperimentKind::RateReport => "rate-report",
            ExperimentKind::InfoReport => "info-report",
        }
    }

    fn needs_channel(self) -> bool {
        self != ExperimentKind::EnsembleMoment
    }

    fn needs_code(self) -> bool {
        matches!(
            self,
            ExperimentKind::KlCheck | ExperimentKind::Bound | ExperimentKind::RecoveryVerify
        )
    }

    fn uses_code(self) -> bool {
        self.needs_code() || self == ExperimentKind::InfoReport
    }

    fn needs_ensemble(self) -> bool {
        matches!(
            self,
            ExperimentKind::EnsembleMoment | ExperimentKind::EnsembleDavg | ExperimentKind::EnsembleFidelity
        )
    }

    fn needs_typicality(self) -> bool {
        matches!(self, ExperimentKind::TypicalityTrend | ExperimentKind::RateReport)
    }

    fn needs_trace_preserving(self) -> bool {
        matches!(
            self,
            ExperimentKind::InfoReport | ExperimentKind::TypicalityTrend | ExperimentKind::RateReport
        )
    }
}

/// A scalar or a list of values swept over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Repetitions over random channels/codes; seeds advance by the index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typicality: Option<TypicalityBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitsBlock>,
}

/// `{name, params}` for a standard channel or `{seed, M, N}` for a random one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, OneOrMany<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Kraus indices to keep, giving a trace-decreasing restriction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    /// `repetition3` or `full`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_file: Option<PathBuf>,
}

/// Subspace V given by its first `dim` standard basis vectors or a basis file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    /// Ambient dimension; only for `ensemble-moment`.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<OneOrMany<usize>>,
    #[serde(rename = "K")]
    pub k: OneOrMany<usize>,
    pub samples: usize,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<SubspaceSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypicalityMode {
    #[default]
    Enumerate,
    Sample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypicalityBlock {
    pub n: OneOrMany<usize>,
    pub epsilon: OneOrMany<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<OneOrMany<f64>>,
    #[serde(default)]
    pub mode: TypicalityMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<SubspaceSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_kraus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,
}

impl ExperimentConfig {
    pub fn limits(&self) -> Limits {
        let mut lim = Limits::default();
        if let Some(b) = &self.limits {
            if let Some(v) = b.max_dim {
                lim.max_dim = v;
            }
            if let Some(v) = b.max_kraus {
                lim.max_kraus = v;
            }
            if let Some(v) = b.enumeration_cap {
                lim.enumeration_cap = v;
            }
        }
        lim
    }

    pub fn instances(&self) -> usize {
        self.instances.unwrap_or(1)
    }
}

/// A parsed configuration together with its source text.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display()), None))?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        let line = (e.line() > 0).then_some(e.line());
        CliError::config(format!("{}: {e}", path.display()), line)
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, text, base_dir })
}

/// Line of the innermost key of a dotted path, searching each segment after
/// the previous one.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let mut pos = 0;
    let mut found = None;
    for seg in path.split('.') {
        let key = format!("\"{seg}\"");
        match text[pos..].find(&key) {
            Some(i) => {
                pos += i + key.len();
                found = Some(pos);
            }
            None => break,
        }
    }
    found.map(|p| text[..p].matches('\n').count() + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub level: Level,
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Error => "error",
            Level::Warning => "warning",
        };
        match self.line {
            Some(l) => write!(f, "{level}: line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{level}: {}: {}", self.path, self.message),
        }
    }
}

struct Checker<'a> {
    text: &'a str,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, level: Level, path: &str, message: impl Into<String>) {
        self.out.push(Diagnostic {
            level,
            path: path.to_string(),
            line: locate(self.text, path),
            message: message.into(),
        });
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        self.push(Level::Error, path, message);
    }

    fn warn(&mut self, path: &str, message: impl Into<String>) {
        self.push(Level::Warning, path, message);
    }
}

/// Required parameters of each standard channel.
pub fn standard_params(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "identity" => &["dim"],
        "bit_flip" | "phase_flip" | "depolarizing" | "three_qubit_bitflip_noise" => &["p"],
        "amplitude_damping" => &["gamma"],
        _ => return None,
    })
}

/// (input dimension, Kraus count) of a standard channel.
fn standard_shape(name: &str, params: &BTreeMap<String, OneOrMany<f64>>) -> Option<(usize, usize)> {
    match name {
        "identity" => {
            let dims = params.get("dim")?.values();
            let d = dims.iter().fold(0.0f64, |m, v| m.max(*v));
            Some((d as usize, 1))
        }
        "bit_flip" | "phase_flip" | "amplitude_damping" => Some((2, 2)),
        "depolarizing" => Some((2, 4)),
        "three_qubit_bitflip_noise" => Some((8, 4)),
        _ => None,
    }
}

/// Reads a basis file: a JSON array of K columns, each an array of M
/// `[re, im]` pairs.
pub fn read_basis_file(path: &Path) -> Result<Vec<Vec<[f64; 2]>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read basis file {}: {e}", path.display()), None))?;
    let cols: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text).map_err(|e| {
        CliError::config(format!("basis file {}: {e}", path.display()), Some(e.line()))
    })?;
    if cols.is_empty() || cols[0].is_empty() {
        return Err(CliError::config(format!("basis file {} is empty", path.display()), None));
    }
    let m = cols[0].len();
    if let Some(j) = cols.iter().position(|c| c.len() != m) {
        return Err(CliError::config(
            format!("basis file {}: column {j} has {} entries, expected {m}", path.display(), cols[j].len()),
            None,
        ));
    }
    Ok(cols)
}

/// Schema, range and capacity checks that do not run any computation.
pub fn diagnose(cfg: &ExperimentConfig, text: &str, base_dir: &Path, limits: &Limits) -> Vec<Diagnostic> {
    let mut c = Checker { text, out: Vec::new() };
    let kind = cfg.experiment;

    if cfg.output_path.is_none() {
        c.error("output_path", "no output path (set output_path or pass --out)");
    }
    if cfg.instances == Some(0) {
        c.error("instances", "instances must be at least 1");
    }

    let mut shape: Option<(usize, usize)> = None;
    match (&cfg.channel, kind.needs_channel()) {
        (None, true) => c.error("experiment", format!("{} needs a channel block", kind.name())),
        (Some(_), false) => c.warn("channel", format!("ignored by {}", kind.name())),
        (Some(ch), true) => shape = check_channel(&mut c, ch, kind),
        (None, false) => {}
    }

    match (&cfg.code, kind.needs_code(), kind.uses_code()) {
        (None, true, _) => c.error("experiment", format!("{} needs a code block", kind.name())),
        (Some(_), _, false) => c.warn("code", format!("ignored by {}", kind.name())),
        (Some(code), _, true) => check_code(&mut c, code, shape, base_dir, limits, kind),
        _ => {}
    }

    match (&cfg.ensemble, kind.needs_ensemble()) {
        (None, true) => c.error("experiment", format!("{} needs an ensemble block", kind.name())),
        (Some(_), false) => c.warn("ensemble", format!("ignored by {}", kind.name())),
        (Some(e), true) => check_ensemble(&mut c, e, shape, base_dir, limits, kind),
        (None, false) => {}
    }

    match (&cfg.typicality, kind.needs_typicality()) {
        (None, true) => c.error("experiment", format!("{} needs a typicality block", kind.name())),
        (Some(_), false) => c.warn("typicality", format!("ignored by {}", kind.name())),
        (Some(t), true) => check_typicality(&mut c, t, shape, base_dir, limits, kind),
        (None, false) => {}
    }

    if let Some(b) = &cfg.limits {
        if b.max_dim == Some(0) {
            c.error("limits.max_dim", "max_dim must be positive");
        }
        if b.max_kraus == Some(0) {
            c.error("limits.max_kraus", "max_kraus must be positive");
        }
    }
    c.out
}

fn check_channel(c: &mut Checker, ch: &ChannelSpec, kind: ExperimentKind) -> Option<(usize, usize)> {
    let shape = match &ch.name {
        Some(name) => {
            if ch.seed.is_some() || ch.m.is_some() || ch.n.is_some() {
                c.error("channel", "seed, M and N apply only to random channels; drop them or the name");
            }
            let Some(required) = standard_params(name) else {
                c.error(
                    "channel.name",
                    format!(
                        "unknown channel '{name}' (expected identity, bit_flip, phase_flip, depolarizing, amplitude_damping or three_qubit_bitflip_noise)"
                    ),
                );
                return None;
            };
            for key in ch.params.keys() {
                if !required.contains(&key.as_str()) {
                    c.error(&format!("channel.params.{key}"), format!("unknown parameter for {name}"));
                }
            }
            for key in required {
                let path = format!("channel.params.{key}");
                let Some(values) = ch.params.get(*key) else {
                    c.error("channel.params", format!("{name} needs parameter '{key}'"));
                    continue;
                };
                let values = values.values();
                if values.is_empty() {
                    c.error(&path, "empty parameter list");
                }
                for v in values {
                    if *key == "dim" {
                        if !(v >= 1.0 && v.fract() == 0.0 && v.is_finite()) {
                            c.error(&path, format!("dim must be a positive integer, got {v}"));
                        }
                    } else if !(0.0..=1.0).contains(&v) {
                        c.error(&path, format!("{key} = {v} outside [0, 1]"));
                    }
                }
            }
            standard_shape(name, &ch.params)
        }
        None => {
            if !ch.params.is_empty() {
                c.error("channel.params", "params need a standard channel name");
            }
            match (ch.m, ch.n) {
                (Some(m), Some(n)) if m >= 1 && n >= 1 => Some((m, n)),
                (Some(_), Some(_)) => {
                    c.error("channel", "random channel needs M >= 1 and N >= 1");
                    None
                }
                _ => {
                    c.error("channel", "give either a standard channel name or random M and N");
                    None
                }
            }
        }
    };
    if let Some(keep) = &ch.keep {
        if keep.is_empty() {
            c.error("channel.keep", "keep must list at least one Kraus index");
        }
        let mut seen = keep.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != keep.len() {
            c.error("channel.keep", "duplicate Kraus indices");
        }
        if let Some((_, n)) = shape {
            if let Some(bad) = keep.iter().find(|&&i| i >= n) {
                c.error("channel.keep", format!("index {bad} out of range for {n} Kraus operators"));
            }
        }
        if kind.needs_trace_preserving() {
            c.error("channel.keep", format!("{} needs a trace-preserving channel", kind.name()));
        }
    }
    shape.map(|(m, n)| (m, ch.keep.as_ref().map_or(n, |k| k.len().max(1))))
}

fn basis_shape(c: &mut Checker, path: &str, file: &Path, base_dir: &Path) -> Option<(usize, usize)> {
    match read_basis_file(&base_dir.join(file)) {
        Ok(cols) => Some((cols[0].len(), cols.len())),
        Err(e) => {
            c.error(path, e.to_string());
            None
        }
    }
}

fn check_code(
    c: &mut Checker,
    code: &CodeSpec,
    shape: Option<(usize, usize)>,
    base_dir: &Path,
    limits: &Limits,
    kind: ExperimentKind,
) {
    let given = [code.named.is_some(), code.k.is_some(), code.basis_file.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given != 1 {
        c.error("code", "give exactly one of named, K (random code) or basis_file");
        return;
    }
    if code.seed.is_some() && code.k.is_none() {
        c.error("code.seed", "seed applies only to random codes");
    }
    let m = shape.map(|s| s.0);
    let dims: Option<(usize, usize)> = if let Some(name) = &code.named {
        match name.as_str() {
            "repetition3" => Some((8, 2)),
            "full" => m.map(|m| (m, m)),
            other => {
                c.error("code.named", format!("unknown code '{other}' (expected repetition3 or full)"));
                None
            }
        }
    } else if let Some(k) = code.k {
        if k == 0 {
            c.error("code.K", "K must be at least 1");
        }
        m.map(|m| (m, k))
    } else {
        basis_shape(c, "code.basis_file", code.basis_file.as_ref().unwrap(), base_dir)
    };
    let (Some((cm, k)), Some((m, n))) = (dims, shape) else {
        return;
    };
    if cm != m {
        c.error("code", format!("code lives in dimension {cm} but the channel acts on dimension {m}"));
    }
    if k > cm {
        c.error("code", format!("code dimension {k} exceeds ambient dimension {cm}"));
    }
    if (k * n) as u128 > limits.max_dim as u128 {
        c.warn("code", format!("D operator dimension K*N = {} exceeds max_dim {}", k * n, limits.max_dim));
    }
    if kind == ExperimentKind::RecoveryVerify && (k * m * m) as u128 > limits.max_dim as u128 {
        c.warn(
            "code",
            format!("recovery ancilla dimension K*M*M = {} exceeds max_dim {}", k * m * m, limits.max_dim),
        );
    }
}

fn check_subspace(
    c: &mut Checker,
    path: &str,
    v: &SubspaceSpec,
    m: Option<usize>,
    base_dir: &Path,
) -> Option<usize> {
    match (v.dim, &v.basis_file) {
        (Some(d), None) => {
            if d == 0 {
                c.error(&format!("{path}.dim"), "subspace dimension must be at least 1");
            }
            if let Some(m) = m {
                if d > m {
                    c.error(&format!("{path}.dim"), format!("subspace dimension {d} exceeds {m}"));
                }
            }
            Some(d)
        }
        (None, Some(file)) => {
            let (vm, l) = basis_shape(c, &format!("{path}.basis_file"), file, base_dir)?;
            if let Some(m) = m {
                if vm != m {
                    c.error(path, format!("subspace lives in dimension {vm}, channel in {m}"));
                }
            }
            Some(l)
        }
        _ => {
            c.error(path, "give exactly one of dim or basis_file");
            None
        }
    }
}

fn check_ensemble(
    c: &mut Checker,
    e: &EnsembleBlock,
    shape: Option<(usize, usize)>,
    base_dir: &Path,
    limits: &Limits,
    kind: ExperimentKind,
) {
    if e.samples == 0 {
        c.error("ensemble.samples", "samples must be at least 1");
    }
    let ks = e.k.values();
    if ks.is_empty() {
        c.error("ensemble.K", "empty K list");
    }
    if ks.contains(&0) {
        c.error("ensemble.K", "K must be at least 1");
    }
    if kind == ExperimentKind::EnsembleMoment {
        if e.v.is_some() {
            c.warn("ensemble.V", "ignored by ensemble-moment");
        }
        let Some(ms) = &e.m else {
            c.error("ensemble", "ensemble-moment needs M");
            return;
        };
        let ms = ms.values();
        if ms.is_empty() || ms.contains(&0) {
            c.error("ensemble.M", "M must be a non-empty list of positive dimensions");
        }
        for &m in &ms {
            if m > limits.max_dim {
                c.warn("ensemble.M", format!("M = {m} exceeds max_dim {}", limits.max_dim));
            }
            if let Some(k) = ks.iter().find(|&&k| k > m) {
                c.error("ensemble.K", format!("K = {k} exceeds M = {m}"));
            }
        }
        return;
    }
    if e.m.is_some() {
        c.error("ensemble.M", "M is taken from the channel");
    }
    let m = shape.map(|s| s.0);
    let l = match &e.v {
        Some(v) => check_subspace(c, "ensemble.V", v, m, base_dir),
        None => m,
    };
    if let Some(l) = l {
        if let Some(k) = ks.iter().find(|&&k| k > l) {
            c.error("ensemble.K", format!("K = {k} exceeds the subspace dimension {l}"));
        }
    }
    if let Some((_, n)) = shape {
        if let Some(k) = ks.iter().find(|&&k| (k * n) as u128 > limits.max_dim as u128) {
            c.warn("ensemble.K", format!("D operator dimension K*N = {} exceeds max_dim", k * n));
        }
    }
}

fn check_typicality(
    c: &mut Checker,
    t: &TypicalityBlock,
    shape: Option<(usize, usize)>,
    base_dir: &Path,
    limits: &Limits,
    kind: ExperimentKind,
) {
    let ns = t.n.values();
    if ns.is_empty() || ns.contains(&0) {
        c.error("typicality.n", "n must be a non-empty list of positive block lengths");
    }
    let eps = t.epsilon.values();
    if eps.is_empty() {
        c.error("typicality.epsilon", "empty epsilon list");
    }
    if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        c.error("typicality.epsilon", format!("epsilon must be positive, got {e}"));
    }
    match (kind, &t.rate) {
        (ExperimentKind::RateReport, None) => c.error("typicality", "rate-report needs R"),
        (ExperimentKind::RateReport, Some(r)) => {
            let rs = r.values();
            if rs.is_empty() {
                c.error("typicality.R", "empty rate list");
            }
            if let Some(r) = rs.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                c.error("typicality.R", format!("rate must be non-negative, got {r}"));
            }
            if let Some(&n) = ns.iter().min() {
                if let Some(r) = rs.iter().find(|r| (n as f64 * **r).exp2() < 1.0) {
                    c.error("typicality.R", format!("code dimension 2^(nR) is below 1 for R = {r}"));
                }
            }
        }
        (_, Some(_)) => c.warn("typicality.R", format!("ignored by {}", kind.name())),
        _ => {}
    }
    let sample = t.mode == TypicalityMode::Sample;
    if sample && kind == ExperimentKind::RateReport {
        c.error("typicality.mode", "rate-report supports only enumerate mode");
    }
    if sample && t.samples.unwrap_or(0) == 0 {
        c.error("typicality.samples", "sample mode needs samples >= 1");
    }
    if !sample && t.samples.is_some() {
        c.warn("typicality.samples", "ignored in enumerate mode");
    }
    let m = shape.map(|s| s.0);
    if let Some(v) = &t.v {
        check_subspace(c, "typicality.V", v, m, base_dir);
    }
    let (Some((m, n_kraus)), Some(&n)) = (shape, ns.iter().max()) else {
        return;
    };
    if sample {
        return;
    }
    let seqs = aqec_core::settings::saturating_pow(n_kraus, n);
    if seqs > limits.enumeration_cap as u128 && kind == ExperimentKind::TypicalityTrend {
        c.warn(
            "typicality.n",
            format!(
                "N^n = {n_kraus}^{n} = {seqs} exceeds the enumeration cap {}; use sample mode",
                limits.enumeration_cap
            ),
        );
    }
    let dim = aqec_core::settings::saturating_pow(m, n);
    if dim > limits.max_dim as u128 {
        c.warn(
            "typicality.n",
            format!("M^n = {m}^{n} = {dim} exceeds max_dim {}", limits.max_dim),
        );
    }
}
