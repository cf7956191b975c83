//! Batch front door: argument parsing, config files, orchestration and report
//! persistence.
//!
//! Parameters resolve as `flag > [command] table of --config > default`.
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on usage,
//! config or IO errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{trajectory, truncated_hamiltonian, FlowConfig};
use crate::error::{LabError, Result};
use crate::estimates::{
    levelset_sweep, probe_dyadic_estimates, probe_levelset_sum, probe_localized_quintic, SweepSpec,
    DEFAULT_REFINE_RATIO,
};
use crate::functionals::{
    default_h_list, eval_functional_with, verify_ftc_identity, verify_poincare_dulac, EvalOptions, FunctionalKind,
};
use crate::report::{write_records, Format, Header};
use crate::resonance::{
    count_triples_bruteforce, count_triples_divisor, elementary_count, weighted_level_sum, CountQuery, LevelConstraint,
    PsiKind, Signature, Symbol,
};
use crate::sampler::{linear_invariance_check, GaussianEnsemble};
use crate::spectral::{FieldJson, SobolevParams, TorusField};
use crate::transport::{
    probe_exponential_integrability, probe_quantitative_inequality, probe_square_root_cancellation, transport_cell,
    CoeffSpec, CylinderBall, CylinderTestFn,
};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "NLS_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nls-lab", version, about = "Truncated quintic NLS lab on the torus")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// TOML file with top-level globals and one table per command.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Write `<command>.csv` / `<command>.jsonl` here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Format,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self { seed: 0, out_dir: None, threads: None, format: Format::Json }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw Gaussian random fields.
    Sample(SampleArgs),
    /// Integrate the truncated flow and dump a trajectory.
    Evolve(EvolveArgs),
    /// Evaluate M, T or N on a field.
    Functional(FunctionalArgs),
    /// Run an identity verifier.
    Verify(VerifyArgs),
    /// Run an estimate probe.
    Probe(ProbeArgs),
    /// Exact lattice counts.
    Count(CountArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Evolve(_) => "evolve",
            Command::Functional(_) => "functional",
            Command::Verify(_) => "verify",
            Command::Probe(_) => "probe",
            Command::Count(_) => "count",
        }
    }
}

// ---------------------------------------------------------------------------
// shared field source

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct Ensemble {
    s: f64,
    /// `σ = s − ½ − delta`.
    delta: f64,
    k_cut: Option<usize>,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self { s: 1.2, delta: 0.05, k_cut: None }
    }
}

fn ensemble(e: &Ensemble, n: usize, seed: u64, n_samples: usize) -> Result<GaussianEnsemble> {
    let params = SobolevParams::with_gap(e.s, e.delta)?;
    GaussianEnsemble::new(params, e.k_cut.unwrap_or(4 * n.max(1)), seed, n_samples)
}

fn load_field(path: &Path) -> Result<TorusField> {
    let text = std::fs::read_to_string(path)?;
    let j: FieldJson = serde_json::from_str(&text)?;
    TorusField::from_json(&j)
}

// ---------------------------------------------------------------------------
// sample

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_cut: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    /// Include the coefficients in each record.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    dump_fields: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct SampleConfig {
    s: f64,
    delta: f64,
    k_cut: usize,
    n_samples: usize,
    dump_fields: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { s: 1.2, delta: 0.05, k_cut: 16, n_samples: 4, dump_fields: false }
    }
}

fn cmd_sample(g: &GlobalConfig, c: &SampleConfig) -> Result<(Vec<Value>, bool)> {
    let e = GaussianEnsemble::new(SobolevParams::with_gap(c.s, c.delta)?, c.k_cut, g.seed, c.n_samples)?;
    let sigma = e.params.sigma;
    let recs = (0..c.n_samples)
        .map(|i| {
            let u = e.sample(i);
            let mut r = json!({
                "index": i,
                "mass": u.mass(),
                "hsigma_norm": u.sobolev_norm(sigma),
                "hs_norm": u.sobolev_norm(c.s),
            });
            if c.dump_fields {
                r["field"] = serde_json::to_value(u.to_json()).expect("field json");
            }
            r
        })
        .collect();
    Ok((recs, true))
}

// ---------------------------------------------------------------------------
// evolve

#[derive(Debug, Args, Serialize)]
pub struct EvolveArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_cut: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_saves: Option<usize>,
    /// Ensemble sample used as initial datum.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    /// Field JSON used as initial datum instead of a sample.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<PathBuf>,
    /// Include field snapshots in the records.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshots: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct EvolveConfig {
    s: f64,
    delta: f64,
    k_cut: Option<usize>,
    #[serde(rename = "N")]
    n: usize,
    dt: f64,
    t: f64,
    n_saves: usize,
    index: usize,
    field: Option<PathBuf>,
    snapshots: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            s: 1.2,
            delta: 0.05,
            k_cut: None,
            n: 8,
            dt: 1e-3,
            t: 1.0,
            n_saves: 10,
            index: 0,
            field: None,
            snapshots: false,
        }
    }
}

fn initial_datum(field: &Option<PathBuf>, ens: &Ensemble, n: usize, seed: u64, index: usize) -> Result<TorusField> {
    match field {
        Some(p) => load_field(p),
        None => Ok(ensemble(ens, n, seed, index + 1)?.sample(index)),
    }
}

fn cmd_evolve(g: &GlobalConfig, c: &EvolveConfig) -> Result<(Vec<Value>, bool)> {
    let ens = Ensemble { s: c.s, delta: c.delta, k_cut: c.k_cut };
    let sigma = SobolevParams::with_gap(c.s, c.delta)?.sigma;
    let u0 = initial_datum(&c.field, &ens, c.n, g.seed, c.index)?;
    let cfg = FlowConfig::new(c.n, c.dt, c.t.abs())?;
    let traj = trajectory(&u0, &cfg, c.t, c.n_saves.max(1))?;
    let m0 = u0.with_k_max(c.n).mass();
    let h0 = truncated_hamiltonian(&u0, c.n);
    let mut pass = true;
    let recs = traj
        .iter()
        .map(|(t, u)| {
            let mass = u.with_k_max(c.n).mass();
            let ham = truncated_hamiltonian(u, c.n);
            let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
            pass &= rel(mass, m0) <= cfg.tol_report && rel(ham, h0) <= 100.0 * cfg.tol_report;
            let mut r = json!({ "t": t, "mass": mass, "hamiltonian": ham, "hsigma_norm": u.sobolev_norm(sigma) });
            if c.snapshots {
                r["field"] = serde_json::to_value(u.to_json()).expect("field json");
            }
            r
        })
        .collect();
    Ok((recs, pass))
}

// ---------------------------------------------------------------------------
// functional

#[derive(Debug, Args, Serialize)]
pub struct FunctionalArgs {
    /// M, T or N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_cut: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<PathBuf>,
    /// Raise the truncation guard.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_n: Option<usize>,
    /// Record wall time (makes the body run-dependent).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct FunctionalConfig {
    kind: Option<String>,
    s: f64,
    delta: f64,
    k_cut: Option<usize>,
    #[serde(rename = "N")]
    n: usize,
    index: usize,
    field: Option<PathBuf>,
    max_n: usize,
    timing: bool,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self {
            kind: None,
            s: 1.2,
            delta: 0.05,
            k_cut: None,
            n: 4,
            index: 0,
            field: None,
            max_n: crate::functionals::DEFAULT_MAX_N,
            timing: false,
        }
    }
}

fn cmd_functional(g: &GlobalConfig, c: &FunctionalConfig) -> Result<(Vec<Value>, bool)> {
    let kind: FunctionalKind = required(&c.kind, "kind")?.parse()?;
    let ens = Ensemble { s: c.s, delta: c.delta, k_cut: c.k_cut };
    let u = initial_datum(&c.field, &ens, c.n, g.seed, c.index)?;
    let opts = EvalOptions { max_n: c.max_n, ..EvalOptions::default() };
    let start = Instant::now();
    let v = eval_functional_with(kind, &u, c.s, c.n, &opts)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let rec = json!({
        "kind": kind.name(),
        "s": c.s,
        "N": c.n,
        "value_re": v.value.re,
        "value_im": v.value.im,
        "terms": v.terms,
        "wall_ms": if c.timing { json!(wall) } else { Value::Null },
    });
    Ok((vec![rec], true))
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyKind {
    PoincareDulac,
    Ftc,
    PushforwardMu,
    PushforwardRho,
    LinearInvariance,
    SqrtCancel,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<VerifyKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_cut: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    /// Finite-difference steps (default: scaled to the sample's rate).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<Vec<f64>>,
    /// Number of cylinder test functions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    probes: Option<usize>,
    /// Signs of the Gaussian factors for sqrt-cancel, e.g. `1,-1,1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    signs: Option<Vec<i8>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    monitor_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct VerifyConfig {
    kind: Option<VerifyKind>,
    s: f64,
    delta: f64,
    k_cut: Option<usize>,
    #[serde(rename = "N")]
    n: usize,
    t: f64,
    dt: f64,
    n_samples: Option<usize>,
    h: Option<Vec<f64>>,
    probes: usize,
    signs: Vec<i8>,
    bound: i64,
    entries: usize,
    monitor_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            kind: None,
            s: 1.2,
            delta: 0.05,
            k_cut: None,
            n: 4,
            t: 0.5,
            dt: 1e-3,
            n_samples: None,
            h: None,
            probes: crate::transport::DEFAULT_DICTIONARY_SIZE,
            signs: vec![1, -1, 1],
            bound: 8,
            entries: 20,
            monitor_tol: 1e-10,
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn cmd_verify(g: &GlobalConfig, c: &VerifyConfig) -> Result<(Vec<Value>, bool)> {
    let kind = *required(&c.kind, "kind")?;
    let ens = Ensemble { s: c.s, delta: c.delta, k_cut: c.k_cut };
    let cfg = FlowConfig { monitor_tol: c.monitor_tol, ..FlowConfig::new(c.n, c.dt, c.t.abs().max(1.0))? };
    match kind {
        VerifyKind::PoincareDulac | VerifyKind::Ftc => {
            let m = c.n_samples.unwrap_or(3);
            let e = ensemble(&ens, c.n, g.seed, m)?;
            let mut pass = true;
            let mut recs = Vec::with_capacity(m);
            for i in 0..m {
                let u = e.sample(i);
                let mut r = if kind == VerifyKind::PoincareDulac {
                    let h = c.h.clone().unwrap_or_else(|| default_h_list(&u, c.n));
                    let rep = verify_poincare_dulac(&u, c.s, c.n, &h, &cfg)?;
                    pass &= rep.pass;
                    to_value(&rep)
                } else {
                    let rep = verify_ftc_identity(&u, c.s, c.n, c.t, &cfg)?;
                    pass &= rep.pass;
                    to_value(&rep)
                };
                r["index"] = json!(i);
                recs.push(r);
            }
            Ok((recs, pass))
        }
        VerifyKind::PushforwardMu | VerifyKind::PushforwardRho => {
            let e = ensemble(&ens, c.n, g.seed, c.n_samples.unwrap_or(1000))?;
            let fs = CylinderTestFn::dictionary(c.n, c.probes);
            let with_rho = kind == VerifyKind::PushforwardRho;
            let cell = transport_cell(&fs, c.s, c.t, &e, &cfg, with_rho)?;
            let list = if with_rho { &cell.rho } else { &cell.mu };
            let mut recs: Vec<Value> = list
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let mut v = to_value(r);
                    v["probe"] = json!(j);
                    v
                })
                .collect();
            let pass = list.iter().all(|r| r.pass) && cell.mean_density.pass;
            let mut md = to_value(&cell.mean_density);
            md["probe"] = Value::Null;
            recs.push(md);
            Ok((recs, pass))
        }
        VerifyKind::LinearInvariance => {
            let e = ensemble(&ens, c.n, g.seed, c.n_samples.unwrap_or(10_000))?;
            let rep = linear_invariance_check(&e, c.n, c.t);
            Ok((vec![to_value(&rep)], rep.pass))
        }
        VerifyKind::SqrtCancel => {
            let spec = CoeffSpec::random_sparse(c.signs.clone(), c.bound, c.entries, g.seed)?;
            let k_cut = c.k_cut.unwrap_or(c.bound.max(0) as usize);
            let e = GaussianEnsemble::new(
                SobolevParams::with_gap(c.s, c.delta)?,
                k_cut,
                g.seed,
                c.n_samples.unwrap_or(100_000),
            )?;
            let rep = probe_square_root_cancellation(&spec, &e)?;
            Ok((vec![to_value(&rep)], rep.pass))
        }
    }
}

// ---------------------------------------------------------------------------
// probe

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    ExpIntegrability,
    Quantitative,
    LocalizedQuintic,
    Levelset,
    Dyadic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PsiArg {
    Resonant,
    Nonresonant,
}

impl From<PsiArg> for PsiKind {
    fn from(p: PsiArg) -> Self {
        match p {
            PsiArg::Resonant => PsiKind::Resonant,
            PsiArg::Nonresonant => PsiKind::Nonresonant,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<ProbeKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_cut: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_samples: Option<usize>,
    /// Functional for exp-integrability (M, T or N).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    functional: Option<String>,
    /// Ball radius `R`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
    /// Dyadic levels: `N1` values for localized-quintic, sweep levels otherwise.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<u64>>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    /// 4 or 6.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    arity: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    refined: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    refine_ratio: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    psi: Option<PsiArg>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct ProbeConfig {
    kind: Option<ProbeKind>,
    s: f64,
    delta: f64,
    k_cut: Option<usize>,
    #[serde(rename = "N")]
    n: usize,
    t: f64,
    dt: f64,
    n_samples: Option<usize>,
    functional: String,
    radius: f64,
    alpha: Vec<f64>,
    radii: Vec<f64>,
    levels: Option<Vec<u64>>,
    kappa: i64,
    trials: usize,
    arity: usize,
    refined: bool,
    refine_ratio: u64,
    psi: PsiArg,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: None,
            s: 1.2,
            delta: 0.05,
            k_cut: None,
            n: 4,
            t: 0.5,
            dt: 1e-3,
            n_samples: None,
            functional: "T".into(),
            radius: 5.0,
            alpha: vec![0.0, 0.5, 1.0, 2.0],
            radii: vec![0.5, 1.0, 2.0],
            levels: None,
            kappa: 0,
            trials: 4,
            arity: 6,
            refined: false,
            refine_ratio: DEFAULT_REFINE_RATIO,
            psi: PsiArg::Nonresonant,
        }
    }
}

fn cmd_probe(g: &GlobalConfig, c: &ProbeConfig) -> Result<(Vec<Value>, bool)> {
    let kind = *required(&c.kind, "kind")?;
    let ens = Ensemble { s: c.s, delta: c.delta, k_cut: c.k_cut };
    match kind {
        ProbeKind::ExpIntegrability => {
            let e = ensemble(&ens, c.n, g.seed, c.n_samples.unwrap_or(10_000))?;
            let f: FunctionalKind = c.functional.parse()?;
            let rep = probe_exponential_integrability(f, c.s, c.n, c.radius, &c.alpha, &e)?;
            let pass = rep.monotone;
            let recs = rep
                .rows
                .iter()
                .map(|r| {
                    let mut v = to_value(r);
                    v["in_ball"] = json!(rep.in_ball);
                    v["growth_exponent"] = json!(rep.growth_exponent);
                    v
                })
                .collect();
            Ok((recs, pass))
        }
        ProbeKind::Quantitative => {
            let e = ensemble(&ens, c.n, g.seed, c.n_samples.unwrap_or(1000))?;
            let cfg = FlowConfig::new(c.n, c.dt, c.t.abs().max(1.0))?;
            let ball = CylinderBall { center: TorusField::zeros(c.n), k0: c.n, sigma: e.params.sigma, radius: 1.0 };
            let rep = probe_quantitative_inequality(c.s, c.t, &ball, &c.radii, &e, &cfg)?;
            Ok((rep.rows.iter().map(to_value).collect(), rep.pass))
        }
        ProbeKind::LocalizedQuintic => {
            let levels = c.levels.clone().unwrap_or_else(|| vec![4, 8, 16, 32, 64, 128]);
            let top = levels.iter().copied().max().unwrap_or(1) as usize;
            let ens = Ensemble { k_cut: Some(c.k_cut.unwrap_or(top)), ..ens };
            let e = ensemble(&ens, top, g.seed, c.n_samples.unwrap_or(200))?;
            let rep = probe_localized_quintic(c.s, e.params.sigma, c.radius, &levels, &e)?;
            let recs = rep
                .rows
                .iter()
                .map(|r| {
                    let mut v = to_value(r);
                    v["slope"] = json!(rep.slope);
                    v["n_s"] = json!(rep.n_s);
                    v
                })
                .collect();
            Ok((recs, rep.pass))
        }
        ProbeKind::Levelset => {
            let levels = c.levels.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16]);
            if levels.len() == c.arity && c.trials > 0 && c.n_samples.is_none() && c.levels.is_some() {
                // explicit cell
                let row = probe_levelset_sum(&levels, c.kappa, c.trials, g.seed)?;
                return Ok((vec![to_value(&row)], row.max_ratio.is_finite()));
            }
            let sweep = levelset_sweep(c.arity, &levels, c.kappa, c.trials, g.seed)?;
            let recs = sweep
                .rows
                .iter()
                .map(|r| {
                    let mut v = to_value(r);
                    v["slope"] = json!(sweep.slope);
                    v
                })
                .collect();
            Ok((recs, sweep.pass))
        }
        ProbeKind::Dyadic => {
            let levels = c.levels.clone().unwrap_or_else(|| vec![1, 4, 16]);
            let spec = SweepSpec {
                refine_ratio: c.refine_ratio,
                ..SweepSpec::uniform(c.s, c.psi.into(), c.arity, &levels, c.trials, g.seed)
            };
            let rep = probe_dyadic_estimates(&spec, c.refined)?;
            let recs = rep
                .rows
                .iter()
                .map(|r| {
                    let mut v = to_value(r);
                    v["slope"] = json!(rep.slope);
                    v
                })
                .collect();
            Ok((recs, rep.pass))
        }
    }
}

// ---------------------------------------------------------------------------
// count

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    Triples,
    Elementary,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    /// Divisor path when it covers the query, enumeration otherwise.
    Auto,
    Divisor,
    Brute,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Alternating,
    SameSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum ConstraintArg {
    C0,
    C1,
}

#[derive(Debug, Args, Serialize)]
pub struct CountArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<CountKind>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<i64>,
    /// Common bound `|k_j| ≤ bound`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<u64>,
    /// Per-slot bounds, overriding `--bound`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<ModeArg>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    exclude_pairings: Option<bool>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<CountMethod>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    signs: Option<Vec<i8>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    constraint: Option<ConstraintArg>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    psi: Option<PsiArg>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct CountConfig {
    kind: CountKind,
    l: i64,
    q: i64,
    bound: u64,
    bounds: Option<Vec<u64>>,
    mode: ModeArg,
    exclude_pairings: bool,
    method: CountMethod,
    signs: Vec<i8>,
    levels: Vec<u64>,
    s: f64,
    constraint: ConstraintArg,
    psi: PsiArg,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self {
            kind: CountKind::Triples,
            l: 0,
            q: 0,
            bound: 8,
            bounds: None,
            mode: ModeArg::Alternating,
            exclude_pairings: false,
            method: CountMethod::Auto,
            signs: vec![1, -1, 1, -1],
            levels: vec![1, 1, 1, 1],
            s: 1.2,
            constraint: ConstraintArg::C1,
            psi: PsiArg::Nonresonant,
        }
    }
}

/// Records and the line printed to stdout.
fn cmd_count(c: &CountConfig) -> Result<(Vec<Value>, bool, String)> {
    match c.kind {
        CountKind::Triples => {
            let bounds: [u64; 3] = match &c.bounds {
                Some(b) => b
                    .as_slice()
                    .try_into()
                    .map_err(|_| LabError::InvalidArgument("--bounds needs three values".into()))?,
                None => [c.bound; 3],
            };
            let signature = match c.mode {
                ModeArg::Alternating => Signature::Alternating,
                ModeArg::SameSign => Signature::SameSign,
            };
            let q = CountQuery { l: c.l, q: c.q, bounds, signature, exclude_pairings: c.exclude_pairings };
            let divisor = match c.method {
                CountMethod::Brute => None,
                CountMethod::Auto => match count_triples_divisor(&q) {
                    Ok(v) => Some(v),
                    Err(LabError::Unsupported(_)) => None,
                    Err(e) => return Err(e),
                },
                _ => Some(count_triples_divisor(&q)?),
            };
            let brute = match c.method {
                CountMethod::Divisor => None,
                CountMethod::Auto if divisor.is_some() => None,
                _ => Some(count_triples_bruteforce(&q)?),
            };
            let pass = match (divisor, brute) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            };
            let count = divisor.or(brute).unwrap_or(0);
            let rec =
                json!({ "l": c.l, "q": c.q, "bounds": bounds, "count": count, "divisor": divisor, "brute": brute });
            Ok((vec![rec], pass, count.to_string()))
        }
        CountKind::Elementary => {
            let r = elementary_count(&c.signs, &c.levels, c.l)?;
            let pass = r.count as f64 <= r.bound;
            let line = r.count.to_string();
            let mut v = to_value(&r);
            v["l"] = json!(c.l);
            v["levels"] = json!(c.levels);
            Ok((vec![v], pass, line))
        }
        CountKind::Weighted => {
            let levels: [u64; 6] = c
                .levels
                .as_slice()
                .try_into()
                .map_err(|_| LabError::InvalidArgument("weighted counts need six levels".into()))?;
            let constraint = match c.constraint {
                ConstraintArg::C0 => LevelConstraint::C0,
                ConstraintArg::C1 => LevelConstraint::C1,
            };
            let r = weighted_level_sum(levels, c.s, c.psi.into(), constraint, Symbol::Homogeneous)?;
            let line = format!("{:e}", r.lhs);
            let mut v = to_value(&r);
            v["ratio"] = json!(r.ratio());
            Ok((vec![v], true, line))
        }
    }
}

// ---------------------------------------------------------------------------
// driver

fn required<'a, T>(x: &'a Option<T>, name: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| LabError::Config(format!("missing required parameter `{name}`")))
}

fn read_config(path: Option<&Path>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<toml::Table>().map_err(|e| LabError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// `flags` laid over `file`, then deserialized with defaults for the rest.
fn resolve<T: DeserializeOwned>(file: Value, flags: Value) -> Result<T> {
    let mut merged = match file {
        Value::Object(m) => m,
        Value::Null => serde_json::Map::new(),
        other => return Err(LabError::Config(format!("expected a table, found {other}"))),
    };
    if let Value::Object(f) = flags {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| LabError::Config(e.to_string()))
}

fn split_file(table: &toml::Table, command: &str) -> Result<(Value, Value)> {
    let mut globals = serde_json::Map::new();
    let mut section = Value::Null;
    for (k, v) in table {
        match v {
            toml::Value::Table(_) if k == command => {
                section = serde_json::to_value(v).map_err(|e| LabError::Config(e.to_string()))?;
            }
            toml::Value::Table(_) => {}
            _ => {
                globals.insert(k.clone(), serde_json::to_value(v).map_err(|e| LabError::Config(e.to_string()))?);
            }
        }
    }
    Ok((Value::Object(globals), section))
}

fn emit(g: &GlobalConfig, command: &str, params: &Value, recs: &[Value], stdout: &mut dyn Write) -> Result<()> {
    // threads and the output location do not change results
    let header = Header::new(command, &json!({ "command": command, "seed": g.seed, "params": params }))?;
    match &g.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let ext = match g.format {
                Format::Csv => "csv",
                Format::Json => "jsonl",
            };
            let path = dir.join(format!("{command}.{ext}"));
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_records(&mut f, g.format, &header, recs)?;
            f.flush()?;
        }
        None => write_records(stdout, g.format, &header, recs)?,
    }
    Ok(())
}

fn setup_threads(requested: Option<usize>) -> Result<()> {
    let env = std::env::var(THREADS_ENV).ok();
    let n = match env.as_deref().map(str::trim) {
        Some(v) if !v.is_empty() => Some(
            v.parse::<usize>()
                .map_err(|_| LabError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        ),
        _ => requested,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(LabError::Config("thread count must be ≥ 1".into()));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs a parsed command; returns whether every check passed.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<bool> {
    let name = cli.command.name();
    let table = read_config(cli.global.config.as_deref())?;
    let (file_globals, section) = split_file(&table, name)?;
    let g: GlobalConfig = resolve(file_globals, to_value(&cli.global))?;
    setup_threads(g.threads)?;
    macro_rules! go {
        ($args:expr, $cfg:ty, $f:expr) => {{
            let c: $cfg = resolve(section, to_value($args))?;
            let (recs, pass) = $f(&c)?;
            emit(&g, name, &to_value(&c), &recs, stdout)?;
            Ok(pass)
        }};
    }
    match &cli.command {
        Command::Sample(a) => go!(a, SampleConfig, |c| cmd_sample(&g, c)),
        Command::Evolve(a) => go!(a, EvolveConfig, |c| cmd_evolve(&g, c)),
        Command::Functional(a) => go!(a, FunctionalConfig, |c| cmd_functional(&g, c)),
        Command::Verify(a) => go!(a, VerifyConfig, |c| cmd_verify(&g, c)),
        Command::Probe(a) => go!(a, ProbeConfig, |c| cmd_probe(&g, c)),
        Command::Count(a) => {
            let c: CountConfig = resolve(section, to_value(a))?;
            let (recs, pass, line) = cmd_count(&c)?;
            writeln!(stdout, "{line}")?;
            if g.out_dir.is_some() {
                emit(&g, name, &to_value(&c), &recs, stdout)?;
            }
            Ok(pass)
        }
    }
}

/// Full entry point with the exit-code contract.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let name = cli.command.name();
    match run(cli, stdout) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if matches!(e, LabError::Config(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    let _ = writeln!(stderr, "{}", sub.render_usage());
                }
            }
            1
        }
    }
}
