//! Exact integer combinatorics of six- and four-wave resonances.
//!
//! All frequency arithmetic is done in `i64`; tuples reject entries above
//! `2^20` so squares and alternating sums can never overflow.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spectral::in_dyadic_block;

/// Largest admissible `|k|`.
pub const K_LIMIT: i64 = 1 << 20;

/// A 6-tuple or a degenerate 4-tuple of frequencies with alternating
/// conjugation signature `+ − + − (+ −)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FreqTuple {
    ks: [i64; 6],
    arity: u8,
}

impl FreqTuple {
    pub fn new(ks: &[i64]) -> Result<Self> {
        if ks.len() != 4 && ks.len() != 6 {
            return Err(LabError::InvalidArgument(format!("arity must be 4 or 6, got {}", ks.len())));
        }
        if let Some(k) = ks.iter().find(|k| k.abs() > K_LIMIT) {
            return Err(LabError::InvalidArgument(format!("|k| = {} exceeds 2^20", k.abs())));
        }
        let mut arr = [0i64; 6];
        arr[..ks.len()].copy_from_slice(ks);
        Ok(Self { ks: arr, arity: ks.len() as u8 })
    }

    /// # Panics
    /// If an entry exceeds the overflow guard.
    pub fn six(ks: [i64; 6]) -> Self {
        Self::new(&ks).expect("frequency out of range")
    }

    /// # Panics
    /// If an entry exceeds the overflow guard.
    pub fn four(ks: [i64; 4]) -> Self {
        Self::new(&ks).expect("frequency out of range")
    }

    #[inline]
    pub fn ks(&self) -> &[i64] {
        &self.ks[..self.arity as usize]
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// `k1 − k2 + k3 − … = 0`.
    pub fn is_admissible(&self) -> bool {
        alternating(self.ks(), |k| k) == 0
    }

    pub fn is_zero(&self) -> bool {
        self.ks().iter().all(|&k| k == 0)
    }

    /// `|k_(1)| ≥ … ≥ |k_(m)|`, ties broken by original index.
    pub fn sorted_abs(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.ks().iter().map(|k| k.unsigned_abs()).collect();
        // sort_by is stable, so equal magnitudes keep index order
        v.sort_by(|a, b| b.cmp(a));
        v
    }

    /// Swap each conjugated slot with its plain partner: `(k2,k1,k4,k3,…)`.
    pub fn swapped(&self) -> Self {
        let mut out = *self;
        for j in (0..self.arity()).step_by(2) {
            out.ks.swap(j, j + 1);
        }
        out
    }
}

#[inline]
fn alternating(ks: &[i64], f: impl Fn(i64) -> i64) -> i64 {
    ks.iter().enumerate().map(|(j, &k)| if j % 2 == 0 { f(k) } else { -f(k) }).sum()
}

/// `Ω = Σ (−1)^{j−1} k_j²` (or `Ω↓` for 4-tuples).
pub fn omega(t: &FreqTuple) -> i64 {
    alternating(t.ks(), |k| k * k)
}

/// How `|k|^{2s}` is regularised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Symbol {
    /// `|k|^{2s}`, the symmetrized derivative as written.
    #[default]
    Homogeneous,
    /// `⟨k⟩^{2s} = (1 + k²)^s`, matching the inhomogeneous `H^s` norm.
    Bracket,
}

#[inline]
pub fn symbol_weight(k: i64, s: f64, sym: Symbol) -> f64 {
    let k2 = (k * k) as f64;
    match sym {
        Symbol::Homogeneous => {
            if k == 0 {
                if s > 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                k2.powf(s)
            }
        }
        Symbol::Bracket => (1.0 + k2).powf(s),
    }
}

/// `ψ_{2s} = Σ (−1)^{j−1} |k_j|^{2s}`.
pub fn psi(t: &FreqTuple, s: f64) -> f64 {
    psi_with(t, s, Symbol::Homogeneous)
}

pub fn psi_with(t: &FreqTuple, s: f64, sym: Symbol) -> f64 {
    t.ks()
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let w = symbol_weight(k, s, sym);
            if j % 2 == 0 {
                w
            } else {
                -w
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiKind {
    /// `Ψ^{(0)} = 1_{Ω=0} ψ`.
    Resonant,
    /// `Ψ^{(1)} = 1_{Ω≠0} ψ/Ω`.
    Nonresonant,
}

pub fn psi_weight(t: &FreqTuple, s: f64, kind: PsiKind) -> f64 {
    psi_weight_with(t, s, kind, Symbol::Homogeneous)
}

pub fn psi_weight_with(t: &FreqTuple, s: f64, kind: PsiKind, sym: Symbol) -> f64 {
    let om = omega(t);
    match kind {
        PsiKind::Resonant if om == 0 => psi_with(t, s, sym),
        PsiKind::Nonresonant if om != 0 => psi_with(t, s, sym) / om as f64,
        _ => 0.0,
    }
}

/// Both sides of `Ω↓ = 2(k2 − k1)(k3 − k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FactorizationWitness {
    pub omega: i64,
    pub product: i64,
    pub holds: bool,
}

pub fn check_factorization(t: &FreqTuple) -> Result<FactorizationWitness> {
    if t.arity() != 4 || !t.is_admissible() {
        return Err(LabError::InvalidArgument(format!("factorization needs an admissible 4-tuple, got {:?}", t.ks())));
    }
    let k = t.ks();
    let om = omega(t);
    let product = 2 * (k[1] - k[0]) * (k[2] - k[1]);
    Ok(FactorizationWitness { omega: om, product, holds: om == product })
}

/// `(|k_(1)|, |k_(3)|)` when the tuple passes the three-high filter
/// `t ≠ 0`, admissible, `10|k_(4)| ≤ |k_(3)|`.
///
/// Tuples with `k_(3) = 0` satisfy the bound trivially (both sides vanish)
/// and are left out so the ratio is always defined.
fn lower_bound_filter(t: &FreqTuple) -> Option<(u64, u64)> {
    if t.is_zero() || !t.is_admissible() {
        return None;
    }
    let a = t.sorted_abs();
    (a[2] > 0 && 10 * a[3] <= a[2]).then_some((a[0], a[2]))
}

/// `|Ω| / (|k_(1)||k_(3)|)` on filtered tuples.
pub fn lower_bound_ratio(t: &FreqTuple) -> Option<f64> {
    let (a1, a3) = lower_bound_filter(t)?;
    let denom = (a1 * a3) as f64;
    Some(omega(t).unsigned_abs() as f64 / denom)
}

/// Integer test of `10|Ω| ≥ |k_(1)||k_(3)|`; `None` outside the filter.
pub fn lower_bound_holds(t: &FreqTuple) -> Option<bool> {
    let (a1, a3) = lower_bound_filter(t)?;
    Some(10 * omega(t).unsigned_abs() >= a1 * a3)
}

// ---------------------------------------------------------------------------
// counting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signature {
    /// `k1 − k2 + k3 = l`, `k1² − k2² + k3² = q`.
    Alternating,
    /// `k1 + k2 + k3 = l`, `k1² + k2² + k3² = q`.
    SameSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountQuery {
    pub l: i64,
    pub q: i64,
    pub bounds: [u64; 3],
    pub signature: Signature,
    /// Drop solutions with `k1 = k2` or `k3 = k2` (alternating only).
    pub exclude_pairings: bool,
}

impl CountQuery {
    pub fn alternating(l: i64, q: i64, n: u64, exclude_pairings: bool) -> Self {
        Self { l, q, bounds: [n; 3], signature: Signature::Alternating, exclude_pairings }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.iter().any(|&b| b == 0 || b as i64 > K_LIMIT) {
            return Err(LabError::InvalidArgument("bounds must lie in [1, 2^20]".into()));
        }
        Ok(())
    }
}

/// Reference count by a plain triple loop.
pub fn count_triples_bruteforce(q: &CountQuery) -> Result<u64> {
    q.validate()?;
    let [n1, n2, n3] = q.bounds.map(|b| b as i64);
    let sgn = match q.signature {
        Signature::Alternating => -1,
        Signature::SameSign => 1,
    };
    let mut count = 0u64;
    for k1 in -n1..=n1 {
        for k2 in -n2..=n2 {
            for k3 in -n3..=n3 {
                if k1 + sgn * k2 + k3 != q.l || k1 * k1 + sgn * k2 * k2 + k3 * k3 != q.q {
                    continue;
                }
                if q.exclude_pairings && q.signature == Signature::Alternating && (k1 == k2 || k3 == k2) {
                    continue;
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Count via `2(k1 − l)(k3 − l) = l² − q`.
///
/// Each solution is determined by a signed factorisation `a·b = (l² − q)/2`
/// with `k1 = a + l`, `k3 = b + l`. Excluding pairings is exactly `a, b ≠ 0`.
pub fn count_triples_divisor(q: &CountQuery) -> Result<u64> {
    q.validate()?;
    if q.signature != Signature::Alternating || !q.exclude_pairings {
        return Err(LabError::Unsupported("the divisor path covers alternating queries with pairings excluded".into()));
    }
    let d = q.l * q.l - q.q;
    if d == 0 || d % 2 != 0 {
        return Ok(0);
    }
    let half = d / 2;
    let [n1, n2, n3] = q.bounds.map(|b| b as i64);
    let mut count = 0;
    for a in positive_divisors(half.unsigned_abs()) {
        for sa in [1i64, -1] {
            let a = sa * a as i64;
            let b = half / a;
            let (k1, k3) = (a + q.l, b + q.l);
            let k2 = k1 + k3 - q.l;
            if k1.abs() <= n1 && k2.abs() <= n2 && k3.abs() <= n3 {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn positive_divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementaryCount {
    pub count: u64,
    /// `N_(2)·…·N_(m)`.
    pub bound: f64,
}

/// `#{Σ ε_j k_j = l : |k_j| ∼ N_j}` by exact convolution of block histograms.
pub fn elementary_count(signs: &[i8], levels: &[u64], l: i64) -> Result<ElementaryCount> {
    if signs.len() != levels.len() || signs.len() < 2 {
        return Err(LabError::InvalidArgument("need m ≥ 2 matching signs and levels".into()));
    }
    if signs.iter().any(|&e| e != 1 && e != -1) {
        return Err(LabError::InvalidArgument("signs must be ±1".into()));
    }
    check_dyadic(levels)?;
    // histogram of partial sums, offset by `reach`
    let reach: i64 = levels.iter().map(|&n| n as i64).sum();
    let width = (2 * reach + 1) as usize;
    let mut hist = vec![0u64; width];
    hist[reach as usize] = 1;
    for (&e, &n) in signs.iter().zip(levels) {
        let block = block_values(n);
        let mut next = vec![0u64; width];
        for (i, &c) in hist.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for &k in &block {
                let j = i as i64 + e as i64 * k;
                if (0..width as i64).contains(&j) {
                    next[j as usize] += c;
                }
            }
        }
        hist = next;
    }
    let count = if l.abs() > reach { 0 } else { hist[(l + reach) as usize] };
    let mut sorted: Vec<u64> = levels.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let bound = sorted[1..].iter().map(|&n| n as f64).product();
    Ok(ElementaryCount { count, bound })
}

fn check_dyadic(levels: &[u64]) -> Result<()> {
    if levels.iter().any(|n| !n.is_power_of_two()) {
        return Err(LabError::InvalidArgument("dyadic levels must be powers of two".into()));
    }
    Ok(())
}

fn block_values(level: u64) -> Vec<i64> {
    crate::spectral::dyadic_block(level)
}

/// Constraint sets for the weighted level sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelConstraint {
    /// Admissible, dyadic, and `k3 ∉ {k2, k4}`.
    C0,
    /// Admissible and dyadic.
    C1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSumReport {
    pub levels: [u64; 6],
    pub lhs: f64,
    /// Right-hand side with unit constant and no `N_(1)^ε` factor.
    pub rhs: f64,
    pub tuples: u64,
}

impl LevelSumReport {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// `Σ C(k)·Ψ(k)²` over the dyadic cell, next to the corresponding bound
/// `[N_(1)^{2s−3/2} N_(3)^{3/2} P^{1/2}]²` with `P = N1N5N6` for `C0` and
/// `P = min(N2N4N6, N1N3N5)` for `C1`.
pub fn weighted_level_sum(
    levels: [u64; 6],
    s: f64,
    kind: PsiKind,
    constraint: LevelConstraint,
    sym: Symbol,
) -> Result<LevelSumReport> {
    check_dyadic(&levels)?;
    let blocks: Vec<Vec<i64>> = levels.iter().map(|&n| block_values(n)).collect();
    let partials: Vec<(f64, u64)> = blocks[0]
        .par_iter()
        .map(|&k1| {
            let mut acc = crate::summation::NeumaierSum::new();
            let mut tuples = 0u64;
            for &k2 in &blocks[1] {
                for &k3 in &blocks[2] {
                    if constraint == LevelConstraint::C0 && k3 == k2 {
                        continue;
                    }
                    for &k4 in &blocks[3] {
                        if constraint == LevelConstraint::C0 && k3 == k4 {
                            continue;
                        }
                        for &k5 in &blocks[4] {
                            let k6 = k1 - k2 + k3 - k4 + k5;
                            if !in_dyadic_block(k6, levels[5]) {
                                continue;
                            }
                            tuples += 1;
                            let t = FreqTuple::six([k1, k2, k3, k4, k5, k6]);
                            let w = psi_weight_with(&t, s, kind, sym);
                            acc.add(w * w);
                        }
                    }
                }
            }
            (acc.value(), tuples)
        })
        .collect();
    let lhs = crate::summation::sum_f64(&partials.iter().map(|p| p.0).collect::<Vec<_>>());
    let tuples = partials.iter().map(|p| p.1).sum();
    let mut sorted = levels;
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let n = levels.map(|x| x as f64);
    let p = match constraint {
        LevelConstraint::C0 => n[0] * n[4] * n[5],
        LevelConstraint::C1 => (n[1] * n[3] * n[5]).min(n[0] * n[2] * n[4]),
    };
    let root = (sorted[0] as f64).powf(2.0 * s - 1.5) * (sorted[2] as f64).powf(1.5) * p.sqrt();
    Ok(LevelSumReport { levels, lhs, rhs: root * root, tuples })
}

// ---------------------------------------------------------------------------
// exhaustive scans

/// Outcome of an exhaustive lattice scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub bound: i64,
    /// Tuples that met the scan's hypothesis.
    pub checked: u64,
    pub violations: u64,
    /// First violating tuple found in scan order, if any.
    pub witness: Option<Vec<i64>>,
}

/// Checks the factorisation of `Ω↓` over every admissible 4-tuple.
pub fn scan_factorization(bound: i64) -> ScanReport {
    let parts: Vec<(u64, u64, Option<Vec<i64>>)> = (-bound..=bound)
        .into_par_iter()
        .map(|k1| {
            let mut checked = 0;
            let mut bad = 0;
            let mut witness = None;
            for k2 in -bound..=bound {
                for k3 in -bound..=bound {
                    let k4 = k1 - k2 + k3;
                    if k4.abs() > bound {
                        continue;
                    }
                    checked += 1;
                    let w = check_factorization(&FreqTuple::four([k1, k2, k3, k4])).expect("constructed admissible");
                    if !w.holds {
                        bad += 1;
                        witness.get_or_insert(vec![k1, k2, k3, k4]);
                    }
                }
            }
            (checked, bad, witness)
        })
        .collect();
    merge_scan(bound, parts)
}

fn merge_scan(bound: i64, parts: Vec<(u64, u64, Option<Vec<i64>>)>) -> ScanReport {
    let mut report = ScanReport { bound, checked: 0, violations: 0, witness: None };
    for (c, v, w) in parts {
        report.checked += c;
        report.violations += v;
        if report.witness.is_none() {
            report.witness = w;
        }
    }
    report
}

/// Visit one representative per multiset class of admissible 6-tuples with
/// `|k_j| ≤ bound`: odd slots `k1 ≤ k3 ≤ k5`, even slots `k2 ≤ k4 ≤ k6`.
///
/// Ω, `sorted_abs` and zero-ness are invariant under permutations inside the
/// odd and the even slots, so scans of those quantities may use this.
/// The callback gets the chunk-local state `S` for leading index `k1`.
fn canonical_six_scan<S, F>(bound: i64, init: impl Fn() -> S + Sync + Send, visit: F) -> Vec<S>
where
    S: Send,
    F: Fn(&mut S, FreqTuple) + Sync + Send,
{
    (-bound..=bound)
        .into_par_iter()
        .map(|k1| {
            let mut st = init();
            for k3 in k1..=bound {
                for k5 in k3..=bound {
                    let total = k1 + k3 + k5;
                    for k2 in -bound..=bound {
                        // k4 ≥ k2 and k6 = total − k2 − k4 ≥ k4
                        let lo = k2.max(total - k2 - bound);
                        let hi = (total - k2).div_euclid(2).min(bound);
                        for k4 in lo..=hi {
                            let k6 = total - k2 - k4;
                            debug_assert!(k6 >= k4 && k6.abs() <= bound);
                            visit(&mut st, FreqTuple::six([k1, k2, k3, k4, k5, k6]));
                        }
                    }
                }
            }
            st
        })
        .collect()
}

fn full_six_scan<S, F>(bound: i64, init: impl Fn() -> S + Sync + Send, visit: F) -> Vec<S>
where
    S: Send,
    F: Fn(&mut S, FreqTuple) + Sync + Send,
{
    (-bound..=bound)
        .into_par_iter()
        .map(|k1| {
            let mut st = init();
            for k2 in -bound..=bound {
                for k3 in -bound..=bound {
                    for k4 in -bound..=bound {
                        for k5 in -bound..=bound {
                            let k6 = k1 - k2 + k3 - k4 + k5;
                            if k6.abs() <= bound {
                                visit(&mut st, FreqTuple::six([k1, k2, k3, k4, k5, k6]));
                            }
                        }
                    }
                }
            }
            st
        })
        .collect()
}

fn full_four_scan<S, F>(bound: i64, init: impl Fn() -> S + Sync + Send, visit: F) -> Vec<S>
where
    S: Send,
    F: Fn(&mut S, FreqTuple) + Sync + Send,
{
    (-bound..=bound)
        .into_par_iter()
        .map(|k1| {
            let mut st = init();
            for k2 in -bound..=bound {
                for k3 in -bound..=bound {
                    let k4 = k1 - k2 + k3;
                    if k4.abs() <= bound {
                        visit(&mut st, FreqTuple::four([k1, k2, k3, k4]));
                    }
                }
            }
            st
        })
        .collect()
}

/// How a six-frequency scan enumerates the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enumeration {
    /// One tuple per odd/even multiset class.
    Canonical,
    /// Every admissible tuple.
    Full,
}

/// Minimum of `|Ω|/(|k_(1)||k_(3)|)` over filtered tuples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundScan {
    pub arity: usize,
    pub bound: i64,
    pub filtered: u64,
    /// `10|Ω| < |k_(1)||k_(3)|` cases; zero is the claim.
    pub violations: u64,
    /// Minimum ratio as an exact fraction `(|Ω|, |k_(1)||k_(3)|)`.
    pub min_fraction: Option<(u64, u64)>,
    pub min_tuple: Option<Vec<i64>>,
}

impl LowerBoundScan {
    pub fn min_ratio(&self) -> Option<f64> {
        self.min_fraction.map(|(n, d)| n as f64 / d as f64)
    }
}

#[derive(Default)]
struct LbState {
    filtered: u64,
    violations: u64,
    best: Option<(u64, u64, FreqTuple)>,
}

fn lb_visit(st: &mut LbState, t: FreqTuple) {
    let Some((a1, a3)) = lower_bound_filter(&t) else {
        return;
    };
    st.filtered += 1;
    let om = omega(&t).unsigned_abs();
    let den = a1 * a3;
    if 10 * om < den {
        st.violations += 1;
    }
    let better = match st.best {
        None => true,
        Some((n, d, _)) => (om as u128 * d as u128).cmp(&(n as u128 * den as u128)) == Ordering::Less,
    };
    if better {
        st.best = Some((om, den, t));
    }
}

fn lb_merge(arity: usize, bound: i64, parts: Vec<LbState>) -> LowerBoundScan {
    let mut out = LowerBoundScan { arity, bound, filtered: 0, violations: 0, min_fraction: None, min_tuple: None };
    let mut best: Option<(u64, u64, FreqTuple)> = None;
    for p in parts {
        out.filtered += p.filtered;
        out.violations += p.violations;
        if let Some((n, d, t)) = p.best {
            let replace = match best {
                None => true,
                Some((bn, bd, _)) => (n as u128 * bd as u128) < (bn as u128 * d as u128),
            };
            if replace {
                best = Some((n, d, t));
            }
        }
    }
    if let Some((n, d, t)) = best {
        out.min_fraction = Some((n, d));
        out.min_tuple = Some(t.ks().to_vec());
    }
    out
}

pub fn scan_lower_bound_six(bound: i64, how: Enumeration) -> LowerBoundScan {
    let parts = match how {
        Enumeration::Canonical => canonical_six_scan(bound, LbState::default, lb_visit),
        Enumeration::Full => full_six_scan(bound, LbState::default, lb_visit),
    };
    lb_merge(6, bound, parts)
}

pub fn scan_lower_bound_four(bound: i64) -> LowerBoundScan {
    lb_merge(4, bound, full_four_scan(bound, LbState::default, lb_visit))
}

/// `Ω = 0 ∧ admissible ∧ k_(3) ≠ 0 ⇒ |k_(3)| < 10|k_(4)|` over `|k_j| ≤ bound`.
pub fn scan_resonant_spread(bound: i64, how: Enumeration) -> ScanReport {
    let visit = |st: &mut (u64, u64, Option<Vec<i64>>), t: FreqTuple| {
        if omega(&t) != 0 {
            return;
        }
        let a = t.sorted_abs();
        if a[2] == 0 {
            return;
        }
        st.0 += 1;
        if a[2] >= 10 * a[3] {
            st.1 += 1;
            st.2.get_or_insert(t.ks().to_vec());
        }
    };
    let init = || (0u64, 0u64, None);
    let parts = match how {
        Enumeration::Canonical => canonical_six_scan(bound, init, visit),
        Enumeration::Full => full_six_scan(bound, init, visit),
    };
    merge_scan(bound, parts)
}

/// Supremum of `|ψ_{2s}| / (k_(1)^{2(s−1)}(|Ω| + k_(3)²) + k_(3)^{2s})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiSupReport {
    pub arity: usize,
    pub s: f64,
    pub bound: i64,
    pub sup_ratio: f64,
    pub argmax: Option<Vec<i64>>,
    /// Tuples with nonzero ψ and vanishing reference; must stay zero.
    pub unbounded: u64,
}

fn psi_ratio(t: &FreqTuple, s: f64, sym: Symbol) -> Option<f64> {
    let a = t.sorted_abs();
    let p = psi_with(t, s, sym).abs();
    let a1 = a[0] as f64;
    let a3 = a[2] as f64;
    let om = omega(t).unsigned_abs() as f64;
    let lead = if a[0] == 0 { 0.0 } else { a1.powf(2.0 * (s - 1.0)) * (om + a3 * a3) };
    let tail = if a[2] == 0 { 0.0 } else { a3.powf(2.0 * s) };
    let reference = lead + tail;
    if reference == 0.0 {
        return if p == 0.0 { None } else { Some(f64::INFINITY) };
    }
    Some(p / reference)
}

pub fn scan_psi_sup(arity: usize, bound: i64, s: f64) -> Result<PsiSupReport> {
    if s <= 0.0 {
        return Err(LabError::InvalidArgument("s must be positive".into()));
    }
    type St = (f64, Option<FreqTuple>, u64);
    let visit = |st: &mut St, t: FreqTuple| {
        if let Some(r) = psi_ratio(&t, s, Symbol::Homogeneous) {
            if r.is_infinite() {
                st.2 += 1;
            } else if r > st.0 {
                st.0 = r;
                st.1 = Some(t);
            }
        }
    };
    let init = || (0.0, None, 0u64);
    let parts: Vec<St> = match arity {
        // ψ is a signed sum, so it is not invariant under the slot
        // permutations the canonical scan quotients out; use the full scan.
        6 => full_six_scan(bound, init, visit),
        4 => full_four_scan(bound, init, visit),
        _ => return Err(LabError::InvalidArgument("arity must be 4 or 6".into())),
    };
    let mut out = PsiSupReport { arity, s, bound, sup_ratio: 0.0, argmax: None, unbounded: 0 };
    for (r, t, u) in parts {
        out.unbounded += u;
        if r > out.sup_ratio {
            out.sup_ratio = r;
            out.argmax = t.map(|t| t.ks().to_vec());
        }
    }
    Ok(out)
}
