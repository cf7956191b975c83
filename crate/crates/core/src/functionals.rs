//! Sextic energy functionals `M_{s,N}`, `T_{s,N}`, `N_{s,N}` and the derived
//! energy correction, modified energy and modified energy derivative.
//!
//! All three functionals are instances of
//!
//! ```text
//! Σ_{k1−k2+k3−k4+k5−k6=0, |k_j|≤N} Ψ(k) a1(k1) b̄2(k2) a3(k3) b̄4(k4) a5(k5) b̄6(k6)
//! ```
//!
//! with `Ψ = 1_{Ω=0} ψ` (resonant) or `1_{Ω≠0} ψ/Ω` (non-resonant), where
//! `ψ = Σ ± w(k_j)` and `w(k) = ⟨k⟩^{2s}` by default. That weight is the one
//! for which `d/dt E_{s,N} = Q_{s,N}` holds exactly with the inhomogeneous
//! `H^s` norm in `E_{s,N}`.
//!
//! The fast kernel groups ordered odd triples `(k1,k3,k5)` and even triples
//! `(k2,k4,k6)` by `(Σk, sorted |k|)`. A key fixes `Σk²` and `Σw(|k|)`, so Ψ
//! is a function of the two keys and the six-fold sum collapses to a sum
//! over key pairs with equal `Σk`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_low, evolve_low_with, FlowConfig, LowModeStepper};
use crate::error::{LabError, Result};
use crate::resonance::{symbol_weight, PsiKind, Symbol};
use crate::spectral::TorusField;
use crate::stats::{extrapolate_to_zero, loglog_slope};
use crate::summation::{combine_ordered, ComplexSum, NeumaierSum};

/// Largest truncation accepted by default.
pub const DEFAULT_MAX_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionalKind {
    /// `(Ψ^{(0)}, Id)`.
    M,
    /// `(Ψ^{(1)}, Id)`.
    T,
    /// `(Ψ^{(1)}, F_N)`.
    #[serde(rename = "N")]
    Ncal,
}

impl FunctionalKind {
    pub fn psi_kind(self) -> PsiKind {
        match self {
            FunctionalKind::M => PsiKind::Resonant,
            FunctionalKind::T | FunctionalKind::Ncal => PsiKind::Nonresonant,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FunctionalKind::M => "M",
            FunctionalKind::T => "T",
            FunctionalKind::Ncal => "N",
        }
    }

    /// First slot: `π_N u` or `F_N(u)`, on band `n`.
    pub fn leading(self, u: &TorusField, n: usize) -> TorusField {
        match self {
            FunctionalKind::M | FunctionalKind::T => u.with_k_max(n),
            FunctionalKind::Ncal => u.nonlinearity_trunc(n),
        }
    }
}

impl std::str::FromStr for FunctionalKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(Self::M),
            "T" | "t" => Ok(Self::T),
            "N" | "n" | "Ncal" => Ok(Self::Ncal),
            _ => Err(LabError::InvalidArgument(format!("unknown functional kind {s:?}"))),
        }
    }
}

/// Evaluation knobs shared by every entry point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub symbol: Symbol,
    /// Budget guard on the truncation.
    pub max_n: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { symbol: Symbol::Bracket, max_n: DEFAULT_MAX_N }
    }
}

fn guard(n: usize, opts: &EvalOptions) -> Result<()> {
    if n > opts.max_n {
        return Err(LabError::BudgetExceeded {
            what: "functional truncation N",
            needed: n as u64,
            allowed: opts.max_n as u64,
        });
    }
    Ok(())
}

/// Lattice points `(2N+1)^5` a direct evaluation would visit.
pub fn lattice_terms(n: usize) -> u64 {
    (2 * n as u64 + 1).pow(5)
}

/// `w(|k|)` for `|k| = 0..=n`.
pub fn weight_table(n: usize, s: f64, sym: Symbol) -> Vec<f64> {
    (0..=n as i64).map(|k| symbol_weight(k, s, sym)).collect()
}

// ---------------------------------------------------------------------------
// grouped kernel

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TripleKey {
    l: i32,
    sq: i64,
    abs: [u16; 3],
}

/// Ordered triples in `[-N, N]^3` grouped by key, keys grouped by `Σk`.
pub struct TripleIndex {
    n: usize,
    keys: Vec<TripleKey>,
    /// Triples of key `j` are `members[starts[j]..starts[j+1]]`.
    starts: Vec<u32>,
    members: Vec<[u16; 3]>,
    /// Key range per value of `Σk`, ascending.
    l_ranges: Vec<(usize, usize)>,
}

impl TripleIndex {
    fn build(n: usize) -> Self {
        let width = 2 * n + 1;
        let mut all: Vec<(TripleKey, [u16; 3])> = Vec::with_capacity(width.pow(3));
        let off = n as i64;
        for i in 0..width {
            for j in 0..width {
                for k in 0..width {
                    let ks = [i as i64 - off, j as i64 - off, k as i64 - off];
                    let mut abs = ks.map(|x| x.unsigned_abs() as u16);
                    abs.sort_unstable();
                    let key = TripleKey { l: (ks[0] + ks[1] + ks[2]) as i32, sq: ks.iter().map(|x| x * x).sum(), abs };
                    all.push((key, [i as u16, j as u16, k as u16]));
                }
            }
        }
        all.sort_unstable();
        let mut keys = Vec::new();
        let mut starts = Vec::new();
        let mut members = Vec::with_capacity(all.len());
        for (pos, (key, m)) in all.iter().enumerate() {
            if keys.last() != Some(key) {
                keys.push(*key);
                starts.push(pos as u32);
            }
            members.push(*m);
        }
        starts.push(members.len() as u32);
        let mut l_ranges = Vec::new();
        let mut a = 0;
        while a < keys.len() {
            let mut b = a;
            while b < keys.len() && keys[b].l == keys[a].l {
                b += 1;
            }
            l_ranges.push((a, b));
            a = b;
        }
        Self { n, keys, starts, members, l_ranges }
    }

    /// Shared index for truncation `n`, built on first use.
    pub fn get(n: usize) -> Arc<TripleIndex> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TripleIndex>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n).or_insert_with(|| Arc::new(TripleIndex::build(n))).clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    /// `Σ_{triples in key} x(i1) y(i2) z(i3)` for every key.
    fn aggregate(&self, x: &[Complex64], y: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
        (0..self.keys.len())
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in &self.members[self.starts[j] as usize..self.starts[j + 1] as usize] {
                    acc += x[m[0] as usize] * y[m[1] as usize] * z[m[2] as usize];
                }
                acc
            })
            .collect()
    }
}

/// Value of a multilinear sum and `Σ|Ψ·a·b|` over the same terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOutput {
    pub value: Complex64,
    pub abs_sum: f64,
}

/// Six slot fields, all on band `n`; slots 2, 4, 6 are conjugated inside.
pub struct Slots<'a> {
    pub fields: [&'a [Complex64]; 6],
}

impl<'a> Slots<'a> {
    pub fn uniform(first: &'a TorusField, rest: &'a TorusField) -> Self {
        let r = rest.coeffs();
        Self { fields: [first.coeffs(), r, r, r, r, r] }
    }

    pub fn from_fields(fs: [&'a TorusField; 6]) -> Self {
        Self { fields: fs.map(|f| f.coeffs()) }
    }
}

/// Grouped evaluation of the multilinear sum at truncation `n`.
pub fn grouped_sum(slots: &Slots<'_>, n: usize, s: f64, kind: PsiKind, sym: Symbol) -> KernelOutput {
    for f in slots.fields {
        assert_eq!(f.len(), 2 * n + 1, "slot field not on band N");
    }
    let idx = TripleIndex::get(n);
    let wt = weight_table(n, s, sym);
    let key_w: Vec<f64> = idx.keys.iter().map(|k| k.abs.iter().map(|&a| wt[a as usize]).sum()).collect();
    let [f1, f2, f3, f4, f5, f6] = slots.fields;
    let odd = idx.aggregate(f1, f3, f5);
    let even: Vec<Complex64> = idx.aggregate(f2, f4, f6).into_iter().map(|z| z.conj()).collect();
    let parts: Vec<(ComplexSum, NeumaierSum)> = idx
        .l_ranges
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = ComplexSum::new();
            let mut abs = NeumaierSum::new();
            match kind {
                PsiKind::Nonresonant => {
                    for o in a..b {
                        let ao = odd[o];
                        if ao.re == 0.0 && ao.im == 0.0 {
                            continue;
                        }
                        let (so, wo) = (idx.keys[o].sq, key_w[o]);
                        for e in a..b {
                            let om = so - idx.keys[e].sq;
                            if om == 0 {
                                continue;
                            }
                            let psi = (wo - key_w[e]) / om as f64;
                            let term = ao * even[e] * psi;
                            acc.add(term);
                            abs.add(term.norm());
                        }
                    }
                }
                PsiKind::Resonant => {
                    // keys inside an L range are sorted by Σk², so equal-Σk²
                    // runs are contiguous
                    let mut i = a;
                    while i < b {
                        let mut j = i;
                        while j < b && idx.keys[j].sq == idx.keys[i].sq {
                            j += 1;
                        }
                        for o in i..j {
                            if odd[o].re == 0.0 && odd[o].im == 0.0 {
                                continue;
                            }
                            for e in i..j {
                                let term = odd[o] * even[e] * (key_w[o] - key_w[e]);
                                acc.add(term);
                                abs.add(term.norm());
                            }
                        }
                        i = j;
                    }
                }
            }
            (acc, abs)
        })
        .collect();
    let sums: Vec<ComplexSum> = parts.iter().map(|p| p.0).collect();
    let mut abs = NeumaierSum::new();
    for p in &parts {
        abs.merge(&p.1);
    }
    KernelOutput { value: combine_ordered(&sums), abs_sum: abs.value() }
}

// ---------------------------------------------------------------------------
// direct kernel

/// Five free indices with the sixth eliminated; `keep` filters tuples.
pub fn direct_sum(
    slots: &Slots<'_>,
    n: usize,
    s: f64,
    kind: PsiKind,
    sym: Symbol,
    keep: impl Fn(&[i64; 6]) -> bool + Sync,
) -> Complex64 {
    for f in slots.fields {
        assert_eq!(f.len(), 2 * n + 1, "slot field not on band N");
    }
    let wt = weight_table(n, s, sym);
    let ni = n as i64;
    let at = |f: &[Complex64], k: i64| f[(k + ni) as usize];
    let [f1, f2, f3, f4, f5, f6] = slots.fields;
    let parts: Vec<ComplexSum> = (-ni..=ni)
        .into_par_iter()
        .map(|k1| {
            let mut acc = ComplexSum::new();
            let a1 = at(f1, k1);
            if a1.re == 0.0 && a1.im == 0.0 {
                return acc;
            }
            for k2 in -ni..=ni {
                let b2 = at(f2, k2).conj();
                if b2.re == 0.0 && b2.im == 0.0 {
                    continue;
                }
                for k3 in -ni..=ni {
                    let a3 = at(f3, k3);
                    if a3.re == 0.0 && a3.im == 0.0 {
                        continue;
                    }
                    let p3 = a1 * b2 * a3;
                    for k4 in -ni..=ni {
                        let b4 = at(f4, k4).conj();
                        if b4.re == 0.0 && b4.im == 0.0 {
                            continue;
                        }
                        let p4 = p3 * b4;
                        for k5 in -ni..=ni {
                            let k6 = k1 - k2 + k3 - k4 + k5;
                            if k6.abs() > ni {
                                continue;
                            }
                            let ks = [k1, k2, k3, k4, k5, k6];
                            if !keep(&ks) {
                                continue;
                            }
                            let psi = psi_from_table(&ks, &wt, kind);
                            if psi == 0.0 {
                                continue;
                            }
                            acc.add(p4 * at(f5, k5) * at(f6, k6).conj() * psi);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    combine_ordered(&parts)
}

#[inline]
fn psi_from_table(ks: &[i64], wt: &[f64], kind: PsiKind) -> f64 {
    let mut om = 0i64;
    let mut psi = 0.0;
    for (j, &k) in ks.iter().enumerate() {
        let w = wt[k.unsigned_abs() as usize];
        if j % 2 == 0 {
            om += k * k;
            psi += w;
        } else {
            om -= k * k;
            psi -= w;
        }
    }
    match kind {
        PsiKind::Resonant if om == 0 => psi,
        PsiKind::Nonresonant if om != 0 => psi / om as f64,
        _ => 0.0,
    }
}

// ---------------------------------------------------------------------------
// functionals

/// Evaluation result with the bookkeeping the CLI reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub value: Complex64,
    pub abs_sum: f64,
    pub terms: u64,
}

pub fn eval_functional(kind: FunctionalKind, u: &TorusField, s: f64, n: usize) -> Result<Complex64> {
    Ok(eval_functional_with(kind, u, s, n, &EvalOptions::default())?.value)
}

pub fn eval_functional_with(
    kind: FunctionalKind,
    u: &TorusField,
    s: f64,
    n: usize,
    opts: &EvalOptions,
) -> Result<FunctionalValue> {
    guard(n, opts)?;
    let first = kind.leading(u, n);
    let rest = u.with_k_max(n);
    let out = grouped_sum(&Slots::uniform(&first, &rest), n, s, kind.psi_kind(), opts.symbol);
    Ok(FunctionalValue { value: out.value, abs_sum: out.abs_sum, terms: lattice_terms(n) })
}

/// `R_{s,N} = ⅙ Re T_{s,N}(u)`.
pub fn energy_correction(u: &TorusField, s: f64, n: usize) -> Result<f64> {
    energy_correction_with(u, s, n, &EvalOptions::default())
}

pub fn energy_correction_with(u: &TorusField, s: f64, n: usize, opts: &EvalOptions) -> Result<f64> {
    Ok(eval_functional_with(FunctionalKind::T, u, s, n, opts)?.value.re / 6.0)
}

/// `E_{s,N} = ½‖π_N u‖²_{H^s} + R_{s,N}`.
pub fn modified_energy(u: &TorusField, s: f64, n: usize) -> Result<f64> {
    modified_energy_with(u, s, n, &EvalOptions::default())
}

pub fn modified_energy_with(u: &TorusField, s: f64, n: usize, opts: &EvalOptions) -> Result<f64> {
    let low = u.with_k_max(n);
    Ok(0.5 * low.sobolev_norm_sq(s) + energy_correction_with(&low, s, n, opts)?)
}

/// `Q_{s,N} = −⅙ Im M_{s,N} + Im N_{s,N}`.
pub fn energy_derivative(u: &TorusField, s: f64, n: usize) -> Result<f64> {
    energy_derivative_with(u, s, n, &EvalOptions::default())
}

pub fn energy_derivative_with(u: &TorusField, s: f64, n: usize, opts: &EvalOptions) -> Result<f64> {
    let m = eval_functional_with(FunctionalKind::M, u, s, n, opts)?.value;
    let nn = eval_functional_with(FunctionalKind::Ncal, u, s, n, opts)?.value;
    Ok(-m.im / 6.0 + nn.im)
}

// ---------------------------------------------------------------------------
// verifiers

/// Central differences of `E_{s,N}` along the flow against `Q_{s,N}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareDulacReport {
    pub s: f64,
    pub n: usize,
    pub q: f64,
    pub h: Vec<f64>,
    pub d_h: Vec<f64>,
    /// Slope of `log|D_h − Q|` against `log h`; `None` when every difference
    /// is already at rounding level.
    pub order: Option<f64>,
    /// Extrapolated `D_0`.
    pub limit: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Fallback `h` grid for slow dynamics.
pub const DEFAULT_H_LIST: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Rate of the fastest motion of `π_N u`: the largest linear frequency
/// difference `3N²` plus `sup|π_N u|⁴` for the nonlinear rotation.
pub fn dynamical_rate(u: &TorusField, n: usize) -> f64 {
    let low = u.with_k_max(n);
    let grid = crate::spectral::grid_size(8 * (n + 1));
    let sup = crate::spectral::to_grid(&low, grid).iter().map(|z| z.norm()).fold(0.0, f64::max);
    3.0 * (n * n) as f64 + sup.powi(4)
}

/// `h0·(1, ½, ¼)` with `h0 = min(1e-2, 0.1/rate)`, so that `h·rate ≤ 0.1`.
pub fn default_h_list(u: &TorusField, n: usize) -> Vec<f64> {
    let h0 = DEFAULT_H_LIST[0].min(0.1 / dynamical_rate(u, n));
    vec![h0, h0 / 2.0, h0 / 4.0]
}

/// `D_h = (E(Φ^N(h)u) − E(Φ^N(−h)u)) / 2h` for each `h`, with the integrator
/// step refined to `min(dt, h²/10)`. The limit `h → 0` is the polynomial
/// extrapolation in `h²` through all points.
pub fn verify_poincare_dulac(
    u: &TorusField,
    s: f64,
    n: usize,
    h_list: &[f64],
    cfg: &FlowConfig,
) -> Result<PoincareDulacReport> {
    if h_list.len() < 2 || h_list.iter().any(|&h| !(h > 0.0)) {
        return Err(LabError::InvalidArgument("need at least two positive h values".into()));
    }
    let opts = EvalOptions::default();
    let low = u.with_k_max(n);
    let q = energy_derivative_with(&low, s, n, &opts)?;
    let mut d_h = Vec::with_capacity(h_list.len());
    let mut stepper = LowModeStepper::new(n);
    for &h in h_list {
        let c = FlowConfig { n, dt: cfg.dt.min(h * h / 10.0), t_end: h, ..cfg.clone() };
        let fwd = evolve_low_with(&mut stepper, low.coeffs(), &c, h)?;
        let bwd = evolve_low_with(&mut stepper, low.coeffs(), &c, -h)?;
        let ef = modified_energy_with(&TorusField::from_coeffs(n, fwd)?, s, n, &opts)?;
        let eb = modified_energy_with(&TorusField::from_coeffs(n, bwd)?, s, n, &opts)?;
        d_h.push((ef - eb) / (2.0 * h));
    }
    let tol = 1e-6 * (1.0 + q.abs());
    let errs: Vec<f64> = d_h.iter().map(|d| (d - q).abs()).collect();
    let floor = 1e-12 * (1.0 + q.abs());
    let order = if errs.iter().all(|&e| e <= floor) {
        None
    } else {
        Some(loglog_slope(h_list, &errs.iter().map(|e| e.max(f64::MIN_POSITIVE)).collect::<Vec<_>>()))
    };
    let h2: Vec<f64> = h_list.iter().map(|h| h * h).collect();
    let limit = extrapolate_to_zero(&h2, &d_h);
    let order_ok = order.is_none_or(|p| (1.7..=2.3).contains(&p));
    let pass = order_ok && (limit - q).abs() <= tol;
    Ok(PoincareDulacReport { s, n, q, h: h_list.to_vec(), d_h, order, limit, tol, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtcReport {
    pub s: f64,
    pub n: usize,
    pub t: f64,
    pub intervals: usize,
    /// `E(Φ^N(−t)u) − E(u)`.
    pub lhs: f64,
    /// Composite Simpson value of `∫_0^{−t} Q(Φ^N(τ)u) dτ`.
    pub rhs: f64,
    /// `|S_m − S_{m/2}| / 15`.
    pub quadrature_error: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Minimum number of Simpson intervals.
pub const FTC_MIN_INTERVALS: usize = 64;

/// Upper limit on Simpson intervals before the verifier gives up refining.
pub const FTC_MAX_INTERVALS: usize = 1 << 20;

fn simpson(qs: &[f64], step: f64, stride: usize) -> f64 {
    let m = (qs.len() - 1) / stride;
    let mut acc = NeumaierSum::new();
    for j in 0..=m {
        let c = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.add(c * qs[j * stride]);
    }
    acc.value() * step * stride as f64 / 3.0
}

/// Composite Simpson with step halving: starts at `max(64, |t|·rate/0.2)`
/// intervals and doubles until the Richardson estimate `|S_m − S_{m/2}|/15`
/// is below a tenth of the tolerance.
pub fn verify_ftc_identity(u: &TorusField, s: f64, n: usize, t: f64, cfg: &FlowConfig) -> Result<FtcReport> {
    let opts = EvalOptions::default();
    let low = u.with_k_max(n);
    let e0 = modified_energy_with(&low, s, n, &opts)?;
    if t == 0.0 {
        return Ok(FtcReport {
            s,
            n,
            t,
            intervals: 0,
            lhs: 0.0,
            rhs: 0.0,
            quadrature_error: 0.0,
            tol: 1e-6,
            pass: true,
        });
    }
    let start = (t.abs() * dynamical_rate(&low, n) / 0.2).ceil() as usize;
    let mut m = start.max(FTC_MIN_INTERVALS).next_power_of_two();
    let q0 = energy_derivative_with(&low, s, n, &opts)?;
    let mut stepper = LowModeStepper::new(n);
    loop {
        let step = -t / m as f64;
        let seg_cfg = FlowConfig { n, t_end: step.abs(), ..cfg.clone() };
        let mut w = low.coeffs().to_vec();
        let mut qs = Vec::with_capacity(m + 1);
        qs.push(q0);
        for _ in 0..m {
            w = evolve_low_with(&mut stepper, &w, &seg_cfg, step)?;
            qs.push(energy_derivative_with(&TorusField::from_coeffs(n, w.clone())?, s, n, &opts)?);
        }
        let end = TorusField::from_coeffs(n, w)?;
        let lhs = modified_energy_with(&end, s, n, &opts)? - e0;
        let rhs = simpson(&qs, step, 1);
        let quadrature_error = (rhs - simpson(&qs, step, 2)).abs() / 15.0;
        let tol = 1e-6 * (1.0 + lhs.abs());
        if quadrature_error <= 0.1 * tol || m >= FTC_MAX_INTERVALS {
            let pass = (lhs - rhs).abs() <= tol;
            return Ok(FtcReport { s, n, t, intervals: m, lhs, rhs, quadrature_error, tol, pass });
        }
        m *= 2;
    }
}

/// `E_{s,N}(Φ^N(−t)u) − E_{s,N}(u)`, the exponent route for the ρ density.
pub fn energy_increment(u: &TorusField, s: f64, cfg: &FlowConfig, t: f64) -> Result<f64> {
    let n = cfg.n;
    let low = u.with_k_max(n);
    if t == 0.0 {
        return Ok(0.0);
    }
    let back = TorusField::from_coeffs(n, evolve_low(low.coeffs(), cfg, -t)?)?;
    Ok(modified_energy(&back, s, n)? - modified_energy(&low, s, n)?)
}

// ---------------------------------------------------------------------------
// dyadic blocks and pairing

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlockSpec {
    pub kind: FunctionalKind,
    pub s: f64,
    pub n: usize,
    pub levels: [u64; 6],
}

impl DyadicBlockSpec {
    fn validate(&self) -> Result<()> {
        if self.levels.iter().any(|l| !l.is_power_of_two()) {
            return Err(LabError::InvalidArgument("dyadic levels must be powers of two".into()));
        }
        Ok(())
    }

    /// `[P_{N1} G, P_{N2} π_N u, …]` on band `N`.
    fn slot_fields(&self, u: &TorusField) -> [TorusField; 6] {
        let g = self.kind.leading(u, self.n);
        let low = u.with_k_max(self.n);
        std::array::from_fn(|j| {
            let base = if j == 0 { &g } else { &low };
            base.project_dyadic(self.levels[j])
        })
    }
}

pub fn eval_dyadic_block(spec: &DyadicBlockSpec, u: &TorusField) -> Result<Complex64> {
    eval_dyadic_block_with(spec, u, &EvalOptions::default())
}

pub fn eval_dyadic_block_with(spec: &DyadicBlockSpec, u: &TorusField, opts: &EvalOptions) -> Result<Complex64> {
    spec.validate()?;
    guard(spec.n, opts)?;
    let f = spec.slot_fields(u);
    let slots = Slots::from_fields([&f[0], &f[1], &f[2], &f[3], &f[4], &f[5]]);
    Ok(grouped_sum(&slots, spec.n, spec.s, spec.kind.psi_kind(), opts.symbol).value)
}

/// Sum of every dyadic block of `kind` at truncation `n`.
pub fn sum_dyadic_blocks(kind: FunctionalKind, u: &TorusField, s: f64, n: usize) -> Result<Complex64> {
    let levels = crate::spectral::dyadic_levels(n);
    let m = levels.len();
    let mut acc = ComplexSum::new();
    for code in 0..m.pow(6) {
        let mut c = code;
        let lv: [u64; 6] = std::array::from_fn(|_| {
            let l = levels[c % m];
            c /= m;
            l
        });
        acc.add(eval_dyadic_block(&DyadicBlockSpec { kind, s, n, levels: lv }, u)?);
    }
    Ok(acc.value())
}

/// Non-pairing / pairing split of a dyadic block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingSplit {
    /// Terms with `k3 ∉ {k2, k4}`.
    pub non_pairing: Complex64,
    /// Terms with `k3 ∈ {k2, k4}`, by direct summation.
    pub pairing: Complex64,
    /// The pairing part through the four-frequency rewrite.
    pub pairing_degenerate: Complex64,
}

pub fn split_pairing(spec: &DyadicBlockSpec, u: &TorusField) -> Result<PairingSplit> {
    let opts = EvalOptions::default();
    spec.validate()?;
    guard(spec.n, &opts)?;
    let (n, s, kind, sym) = (spec.n, spec.s, spec.kind.psi_kind(), opts.symbol);
    let f = spec.slot_fields(u);
    let slots = Slots::from_fields([&f[0], &f[1], &f[2], &f[3], &f[4], &f[5]]);
    let non_pairing = direct_sum(&slots, n, s, kind, sym, |k| k[2] != k[1] && k[2] != k[3]);
    let pairing = direct_sum(&slots, n, s, kind, sym, |k| k[2] == k[1] || k[2] == k[3]);
    let pairing_degenerate = degenerate_pairing(&f, n, s, kind, sym);
    Ok(PairingSplit { non_pairing, pairing, pairing_degenerate })
}

/// `⟨U3,U2⟩ Σ Ψ↓(k1,k4,k5,k6) G Ū4 U5 Ū6 + Σ Ψ↓(k1,k2,k5,k6) G Ū2 W U5 Ū6`
/// with `W_{k2} = Σ_{k3≠k2} U3_{k3} Ū4_{k3}`.
fn degenerate_pairing(f: &[TorusField; 6], n: usize, s: f64, kind: PsiKind, sym: Symbol) -> Complex64 {
    let ni = n as i64;
    let wt = weight_table(n, s, sym);
    let c = |j: usize, k: i64| f[j].get(k);
    let overlap: Complex64 = (-ni..=ni).map(|k| c(2, k) * c(1, k).conj()).sum();
    let total34: Complex64 = (-ni..=ni).map(|k| c(2, k) * c(3, k).conj()).sum();
    let four = |b: &dyn Fn(i64) -> Complex64| {
        let mut acc = ComplexSum::new();
        for k1 in -ni..=ni {
            for kb in -ni..=ni {
                for k5 in -ni..=ni {
                    let k6 = k1 - kb + k5;
                    if k6.abs() > ni {
                        continue;
                    }
                    let psi = psi_from_table(&[k1, kb, k5, k6], &wt, kind);
                    if psi == 0.0 {
                        continue;
                    }
                    acc.add(c(0, k1) * b(kb) * c(4, k5) * c(5, k6).conj() * psi);
                }
            }
        }
        acc.value()
    };
    let first = overlap * four(&|k4| c(3, k4).conj());
    let second = four(&|k2| {
        let w = total34 - c(2, k2) * c(3, k2).conj();
        c(1, k2).conj() * w
    });
    first + second
}
