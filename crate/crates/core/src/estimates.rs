//! Ratio probes for the deterministic multilinear estimates: the localized
//! quintic bound, level-set sums and the dyadic `|Ψ|`-weighted sums.
//!
//! Probes never assert an implicit constant. They report ratios against the
//! bound with constant 1 and test trends (slopes) with a stated slack.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::resonance::{symbol_weight, PsiKind, Symbol};
use crate::sampler::GaussianEnsemble;
use crate::spectral::dyadic_block;
use crate::stats::{loglog_slope, mean_se};

/// Allowed growth exponent in `N_(1)` for ratio tables.
pub const GROWTH_SLACK: f64 = 0.2;

/// Minimum ratio `N_(3)/N_(4)` read as `N_(4) ≪ N_(3)`.
pub const DEFAULT_REFINE_RATIO: u64 = 16;

/// `n_s = ½ − s` for `s > 1` and `9/2 − 5s` for `s ≤ 1`.
pub fn localized_exponent(s: f64) -> f64 {
    if s > 1.0 {
        0.5 - s
    } else {
        4.5 - 5.0 * s
    }
}

// ---------------------------------------------------------------------------
// localized quintic

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizedRow {
    pub n1: u64,
    /// Mean of `‖P_{N1} F(U)‖_{L²}` over the samples in the ball.
    pub mean_norm: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizedReport {
    pub s: f64,
    pub sigma: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub in_ball: usize,
    pub rows: Vec<LocalizedRow>,
    pub slope: Option<f64>,
    pub n_s: f64,
    /// `slope ≤ n_s + 0.15`.
    pub pass: bool,
}

/// Regresses `log E‖P_{N1}F(U)‖_{L²}` on `log N1` over samples `U` of the
/// ensemble with `‖U‖_{H^σ} ≤ R`.
pub fn probe_localized_quintic(
    s: f64,
    sigma: f64,
    radius: f64,
    n1_levels: &[u64],
    e: &GaussianEnsemble,
) -> Result<LocalizedReport> {
    if n1_levels.iter().any(|l| !l.is_power_of_two()) {
        return Err(LabError::InvalidArgument("N1 levels must be powers of two".into()));
    }
    let per_sample: Vec<Option<Vec<f64>>> = (0..e.n_samples)
        .into_par_iter()
        .map(|i| {
            let u = e.sample(i);
            if u.sobolev_norm(sigma) > radius {
                return None;
            }
            let f = u.nonlinearity();
            Some(n1_levels.iter().map(|&l| (2.0 * std::f64::consts::PI * f.project_dyadic(l).l2_sq()).sqrt()).collect())
        })
        .collect();
    let inside: Vec<&Vec<f64>> = per_sample.iter().flatten().collect();
    let rows: Vec<LocalizedRow> = n1_levels
        .iter()
        .enumerate()
        .map(|(j, &n1)| {
            let xs: Vec<f64> = inside.iter().map(|v| v[j]).collect();
            let (mean_norm, se) = if xs.is_empty() { (f64::NAN, f64::NAN) } else { mean_se(&xs) };
            LocalizedRow { n1, mean_norm, se }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.mean_norm > 0.0).map(|r| (r.n1 as f64, r.mean_norm)).collect();
    let slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        loglog_slope(&xs, &ys)
    });
    let n_s = localized_exponent(s);
    Ok(LocalizedReport {
        s,
        sigma,
        radius,
        n_samples: e.n_samples,
        in_ball: inside.len(),
        rows,
        slope,
        n_s,
        pass: slope.is_some_and(|p| p <= n_s + 0.15),
    })
}

// ---------------------------------------------------------------------------
// random unit sequences and grouped sums

/// Unit `ℓ²` sequence on the dyadic block `|k| ∼ level`: Dirichlet(1)
/// squared magnitudes and uniform phases.
pub fn random_unit_sequence(level: u64, rng: &mut impl Rng) -> Vec<(i64, Complex64)> {
    let support = dyadic_block(level);
    let e: Vec<f64> = support.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    support
        .iter()
        .zip(e)
        .map(|(&k, x)| {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            (k, Complex64::from_polar((x / total).sqrt(), theta))
        })
        .collect()
}

/// Magnitudes of a sequence.
pub type Magnitudes = Vec<(i64, f64)>;

fn magnitudes(f: &[(i64, Complex64)]) -> Magnitudes {
    f.iter().map(|&(k, z)| (k, z.norm())).collect()
}

/// Products over all ordered tuples of the given slots, aggregated by
/// `(Σk, Σk², sorted |k|)`.
#[derive(Debug, Clone)]
struct Grouped {
    /// `(Σk, Σk²) → [(Σw, Σ Π|f|)]`
    by_level: BTreeMap<(i64, i64), Vec<(f64, f64)>>,
    /// `Σk → Σ Π|f|`
    by_l: BTreeMap<i64, f64>,
}

fn group(slots: &[&Magnitudes], wt: &dyn Fn(i64) -> f64) -> Grouped {
    let mut acc: BTreeMap<(i64, i64, Vec<u64>), f64> = BTreeMap::new();
    let mut idx = vec![0usize; slots.len()];
    if slots.iter().any(|s| s.is_empty()) {
        return Grouped { by_level: BTreeMap::new(), by_l: BTreeMap::new() };
    }
    loop {
        let mut l = 0;
        let mut sq = 0;
        let mut p = 1.0;
        let mut abs = Vec::with_capacity(slots.len());
        for (s, &i) in slots.iter().zip(&idx) {
            let (k, m) = s[i];
            l += k;
            sq += k * k;
            p *= m;
            abs.push(k.unsigned_abs());
        }
        abs.sort_unstable();
        *acc.entry((l, sq, abs)).or_insert(0.0) += p;
        // odometer
        let mut j = 0;
        loop {
            if j == slots.len() {
                return finish(acc, wt);
            }
            idx[j] += 1;
            if idx[j] < slots[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn finish(acc: BTreeMap<(i64, i64, Vec<u64>), f64>, wt: &dyn Fn(i64) -> f64) -> Grouped {
    let mut by_level: BTreeMap<(i64, i64), Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_l: BTreeMap<i64, f64> = BTreeMap::new();
    for ((l, sq, abs), v) in acc {
        let w: f64 = abs.iter().map(|&a| wt(a as i64)).sum();
        by_level.entry((l, sq)).or_default().push((w, v));
        *by_l.entry(l).or_insert(0.0) += v;
    }
    Grouped { by_level, by_l }
}

fn split_slots(fs: &[Magnitudes]) -> Result<(Vec<&Magnitudes>, Vec<&Magnitudes>)> {
    if fs.len() != 6 && fs.len() != 4 {
        return Err(LabError::InvalidArgument("arity must be 4 or 6".into()));
    }
    Ok((fs.iter().step_by(2).collect(), fs.iter().skip(1).step_by(2).collect()))
}

/// `Σ_{constraint, Ω = κ} Π|f_j|` for 4 or 6 sequences.
pub fn level_set_sum(fs: &[Magnitudes], kappa: i64) -> Result<f64> {
    let (odd, even) = split_slots(fs)?;
    let no_w = |_: i64| 0.0;
    let go = group(&odd, &no_w);
    let ge = group(&even, &no_w);
    let mut total = 0.0;
    let mut keys: Vec<_> = go.by_level.keys().copied().collect();
    keys.sort_unstable();
    for (l, so) in keys {
        if let Some(ev) = ge.by_level.get(&(l, so - kappa)) {
            let a: f64 = go.by_level[&(l, so)].iter().map(|x| x.1).sum();
            let b: f64 = ev.iter().map(|x| x.1).sum();
            total += a * b;
        }
    }
    Ok(total)
}

/// `Σ_{constraint} Π|f_j|` over all `Ω`.
pub fn constrained_sum(fs: &[Magnitudes]) -> Result<f64> {
    let (odd, even) = split_slots(fs)?;
    let no_w = |_: i64| 0.0;
    let go = group(&odd, &no_w);
    let ge = group(&even, &no_w);
    let mut keys: Vec<_> = go.by_l.keys().copied().collect();
    keys.sort_unstable();
    Ok(keys.iter().map(|l| go.by_l[l] * ge.by_l.get(l).copied().unwrap_or(0.0)).sum())
}

/// `Σ_{constraint} |Ψ(k)| Π|f_j|` with the homogeneous symbol.
pub fn weighted_abs_sum(fs: &[Magnitudes], s: f64, kind: PsiKind) -> Result<f64> {
    let (odd, even) = split_slots(fs)?;
    let wt = |k: i64| symbol_weight(k, s, Symbol::Homogeneous);
    let go = group(&odd, &wt);
    let ge = group(&even, &wt);
    // pair every odd key with every even key of the same Σk
    let mut even_by_l: BTreeMap<i64, Vec<(i64, f64, f64)>> = BTreeMap::new();
    for (&(l, sq), v) in &ge.by_level {
        for &(w, x) in v {
            even_by_l.entry(l).or_default().push((sq, w, x));
        }
    }
    let mut odd_keys: Vec<_> = go.by_level.keys().copied().collect();
    odd_keys.sort_unstable();
    let parts: Vec<f64> = odd_keys
        .par_iter()
        .map(|&(l, so)| {
            let mut acc = 0.0;
            for &(wo, xo) in &go.by_level[&(l, so)] {
                match kind {
                    PsiKind::Resonant => {
                        if let Some(ev) = ge.by_level.get(&(l, so)) {
                            for &(we, xe) in ev {
                                acc += (wo - we).abs() * xo * xe;
                            }
                        }
                    }
                    PsiKind::Nonresonant => {
                        for &(se, we, xe) in even_by_l.get(&l).map(Vec::as_slice).unwrap_or(&[]) {
                            let om = so - se;
                            if om != 0 {
                                acc += ((wo - we) / om as f64).abs() * xo * xe;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Levels sorted in decreasing order.
pub fn sorted_levels(levels: &[u64]) -> Vec<u64> {
    let mut v = levels.to_vec();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// Whether some tuple with `|k_j| ∼ N_j` can satisfy the linear constraint.
pub fn cell_feasible(levels: &[u64]) -> bool {
    let v = sorted_levels(levels);
    let lower = |l: u64| if l <= 1 { 0 } else { l / 2 + 1 };
    lower(v[0]) <= v[1..].iter().sum::<u64>()
}

pub fn is_refined(levels: &[u64], ratio: u64) -> bool {
    let v = sorted_levels(levels);
    v.len() >= 4 && v[3] * ratio <= v[2]
}

/// Bound with constant 1 and no `N^ε`.
pub fn dyadic_rhs(levels: &[u64], s: f64, refined: bool) -> f64 {
    let v: Vec<f64> = sorted_levels(levels).iter().map(|&l| l as f64).collect();
    let lead = v[0].powf(2.0 * (s - 1.0)).max(v[2].powf(2.0 * (s - 1.0)));
    if refined {
        lead * v[2..].iter().product::<f64>().sqrt()
    } else {
        lead * v[2] * v[2]
    }
}

fn cell_rng(seed: u64, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell.wrapping_mul(1 << 20).wrapping_add(trial));
    rng
}

fn draw_cell(levels: &[u64], seed: u64, cell: u64, trial: u64) -> Vec<Magnitudes> {
    let mut rng = cell_rng(seed, cell, trial);
    levels.iter().map(|&l| magnitudes(&random_unit_sequence(l, &mut rng))).collect()
}

// ---------------------------------------------------------------------------
// level-set probe

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetRow {
    pub levels: Vec<u64>,
    pub kappa: i64,
    pub trials: usize,
    /// Largest `Σ Π|f| / Π‖f‖` over the trials.
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

pub fn probe_levelset_sum(levels: &[u64], kappa: i64, trials: usize, seed: u64) -> Result<LevelSetRow> {
    levelset_row(levels, kappa, trials, seed, 0)
}

fn levelset_row(levels: &[u64], kappa: i64, trials: usize, seed: u64, cell: u64) -> Result<LevelSetRow> {
    if levels.iter().any(|l| !l.is_power_of_two()) {
        return Err(LabError::InvalidArgument("levels must be powers of two".into()));
    }
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|j| level_set_sum(&draw_cell(levels, seed, cell, j), kappa))
        .collect::<Result<_>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let mean_ratio = if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
    Ok(LevelSetRow { levels: levels.to_vec(), kappa, trials, max_ratio, mean_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetSweep {
    pub arity: usize,
    pub rows: Vec<LevelSetRow>,
    /// Growth exponent of the max ratio in `N_(1)`.
    pub slope: Option<f64>,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Diagonal sweep `N_j = L` for every `L` in `levels`. Six-tuples pass when
/// the max ratio grows slower than `N_(1)^{0.2}`; four-tuples report the
/// uniform constant and pass when it is finite.
pub fn levelset_sweep(arity: usize, levels: &[u64], kappa: i64, trials: usize, seed: u64) -> Result<LevelSetSweep> {
    let rows: Vec<LevelSetRow> = levels
        .iter()
        .enumerate()
        .map(|(c, &l)| levelset_row(&vec![l; arity], kappa, trials, seed, c as u64))
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.max_ratio > 0.0).map(|r| (r.levels[0] as f64, r.max_ratio)).collect();
    let slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        loglog_slope(&xs, &ys)
    });
    let max_ratio = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let pass = max_ratio.is_finite() && (arity == 4 || slope.is_none_or(|p| p <= GROWTH_SLACK));
    Ok(LevelSetSweep { arity, rows, slope, max_ratio, pass })
}

// ---------------------------------------------------------------------------
// dyadic estimates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub s: f64,
    pub kind: PsiKind,
    /// Candidate levels per slot; the cells are their product.
    pub ranges: Vec<Vec<u64>>,
    pub samples: usize,
    pub seed: u64,
    pub refine_ratio: u64,
}

impl SweepSpec {
    /// Same candidate levels in every slot.
    pub fn uniform(s: f64, kind: PsiKind, arity: usize, levels: &[u64], samples: usize, seed: u64) -> Self {
        Self { s, kind, ranges: vec![levels.to_vec(); arity], samples, seed, refine_ratio: DEFAULT_REFINE_RATIO }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.len() != 4 && self.ranges.len() != 6 {
            return Err(LabError::InvalidArgument("arity must be 4 or 6".into()));
        }
        if self.ranges.iter().any(|r| r.is_empty() || r.iter().any(|l| !l.is_power_of_two())) {
            return Err(LabError::InvalidArgument("every slot needs a non-empty list of dyadic levels".into()));
        }
        if self.samples == 0 || self.refine_ratio < 2 {
            return Err(LabError::InvalidArgument("samples ≥ 1 and refine ratio ≥ 2 required".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for r in &self.ranges {
            out = out.into_iter().flat_map(|c| r.iter().map(move |&l| [c.clone(), vec![l]].concat())).collect();
        }
        out
    }

    /// The summand is symmetric under permutations of the odd slots, of the
    /// even slots, and under swapping the two groups. When the ranges share
    /// that symmetry only one representative per orbit is needed.
    fn is_representative(&self, cell: &[u64]) -> bool {
        let odd_r: Vec<_> = self.ranges.iter().step_by(2).collect();
        let even_r: Vec<_> = self.ranges.iter().skip(1).step_by(2).collect();
        let sym_odd = odd_r.windows(2).all(|w| w[0] == w[1]);
        let sym_even = even_r.windows(2).all(|w| w[0] == w[1]);
        let odd: Vec<u64> = cell.iter().step_by(2).copied().collect();
        let even: Vec<u64> = cell.iter().skip(1).step_by(2).copied().collect();
        let desc = |v: &[u64]| v.windows(2).all(|w| w[0] >= w[1]);
        if sym_odd && !desc(&odd) || sym_even && !desc(&even) {
            return false;
        }
        !(sym_odd && sym_even && odd_r[0] == even_r[0] && odd < even)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicRow {
    pub levels: Vec<u64>,
    pub kind: PsiKind,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicReport {
    pub s: f64,
    pub kind: PsiKind,
    pub arity: usize,
    pub refined: bool,
    pub rows: Vec<DyadicRow>,
    pub skipped: usize,
    pub slope: Option<f64>,
    pub max_ratio: f64,
    /// Every LHS is exactly zero (resonant kind in the refined regime).
    pub all_zero: bool,
    pub pass: bool,
}

/// LHS = max over samples of `Σ |Ψ| Π|f_j|` with unit sequences, RHS = the
/// bound with constant 1. One cell per symmetry orbit is evaluated;
/// infeasible cells, and in the refined mode cells without
/// `N_(3) ≥ ratio·N_(4)`, are skipped.
pub fn probe_dyadic_estimates(spec: &SweepSpec, refined: bool) -> Result<DyadicReport> {
    spec.validate()?;
    let cells = spec.cells();
    let mut keep: Vec<(u64, &Vec<u64>)> =
        cells.iter().enumerate().filter(|(_, c)| spec.is_representative(c)).map(|(i, c)| (i as u64, c)).collect();
    let orbits = keep.len();
    keep.retain(|(_, c)| cell_feasible(c) && (!refined || is_refined(c, spec.refine_ratio)));
    let skipped = orbits - keep.len();
    let rows: Vec<DyadicRow> = keep
        .iter()
        .map(|&(id, levels)| {
            let mut lhs: f64 = 0.0;
            for j in 0..spec.samples as u64 {
                lhs = lhs.max(weighted_abs_sum(&draw_cell(levels, spec.seed, id, j), spec.s, spec.kind)?);
            }
            let rhs = dyadic_rhs(levels, spec.s, refined);
            Ok(DyadicRow { levels: levels.clone(), kind: spec.kind, lhs, rhs, ratio: lhs / rhs, refined })
        })
        .collect::<Result<_>>()?;
    let mut by_top: BTreeMap<u64, f64> = BTreeMap::new();
    for r in &rows {
        let top = sorted_levels(&r.levels)[0];
        let e = by_top.entry(top).or_insert(0.0);
        *e = e.max(r.ratio);
    }
    let pts: Vec<(f64, f64)> = by_top.iter().filter(|(_, &v)| v > 0.0).map(|(&k, &v)| (k as f64, v)).collect();
    let slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        loglog_slope(&xs, &ys)
    });
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let all_zero = rows.iter().all(|r| r.lhs == 0.0);
    let pass = max_ratio.is_finite() && slope.is_none_or(|p| p <= GROWTH_SLACK);
    Ok(DyadicReport {
        s: spec.s,
        kind: spec.kind,
        arity: spec.ranges.len(),
        refined,
        rows,
        skipped,
        slope,
        max_ratio,
        all_zero,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(levels: &[u64]) -> Vec<Magnitudes> {
        levels.iter().map(|&l| dyadic_block(l).into_iter().map(|k| (k, 1.0)).collect()).collect()
    }

    fn brute_level_set(fs: &[Magnitudes], kappa: i64) -> f64 {
        let mut total = 0.0;
        let mut stack = vec![(0usize, 0i64, 0i64, 1.0f64)];
        while let Some((j, l, om, p)) = stack.pop() {
            if j == fs.len() {
                if l == 0 && om == kappa {
                    total += p;
                }
                continue;
            }
            let sign = if j % 2 == 0 { 1 } else { -1 };
            for &(k, m) in &fs[j] {
                stack.push((j + 1, l + sign * k, om + sign * k * k, p * m));
            }
        }
        total
    }

    #[test]
    fn exponent_values() {
        assert_eq!(localized_exponent(1.0), -0.5);
        assert_eq!(localized_exponent(2.0), -1.5);
        assert!((localized_exponent(1.2) + 0.7).abs() < 1e-12);
    }

    #[test]
    fn level_set_matches_enumeration() {
        for levels in [vec![1u64; 6], vec![1, 2, 1, 2, 1, 1], vec![2, 2, 1, 1]] {
            let fs = ones(&levels);
            for kappa in [-3, 0, 2] {
                assert_eq!(level_set_sum(&fs, kappa).unwrap(), brute_level_set(&fs, kappa));
            }
        }
    }

    #[test]
    fn infeasible_supports_give_zero() {
        let fs = ones(&[16, 1, 1, 1, 1, 1]);
        assert!(!cell_feasible(&[16, 1, 1, 1, 1, 1]));
        assert_eq!(constrained_sum(&fs).unwrap(), 0.0);
    }

    #[test]
    fn unit_sequences_are_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_unit_sequence(16, &mut rng);
        let n: f64 = f.iter().map(|(_, z)| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(f.iter().all(|(k, _)| (9..=16).contains(&k.abs())));
    }

    #[test]
    fn quadratic_symbol_reduces_to_counting() {
        // s = 1: |Ψ^{(1)}| = 1 off the resonant set
        let fs = draw_cell(&[4, 2, 2, 4, 1, 2], 9, 0, 0);
        let lhs = weighted_abs_sum(&fs, 1.0, PsiKind::Nonresonant).unwrap();
        let alt = constrained_sum(&fs).unwrap() - level_set_sum(&fs, 0).unwrap();
        assert!((lhs - alt).abs() <= 1e-12 * alt);
    }

    #[test]
    fn sweep_cells_enumerate_product() {
        let spec = SweepSpec::uniform(1.2, PsiKind::Nonresonant, 4, &[1, 2], 1, 0);
        assert_eq!(spec.cells().len(), 16);
    }
}
