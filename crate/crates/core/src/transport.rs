//! Monte-Carlo checks of the transport formulas for `μ_s` and `ρ_{s,N}` under
//! the truncated flow, plus statistical probes of the integrability bounds.
//!
//! For `f` bounded and `φ ~ μ_s`,
//!
//! ```text
//! E[f(Φ^N(t)φ)]        = E[f(φ) G_{s,N,t}(φ)]
//! E[f(Φ^N(t)φ) w(φ)]   = E[f(φ) w(φ) exp(−(E_{s,N}(Φ^N(−t)φ) − E_{s,N}(φ)))]
//! ```
//!
//! with `w = e^{−R_{s,N}}`. Per sample the forward and backward trajectories
//! are computed once and shared by every test function and both identities.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with, FlowConfig, LowModeStepper};
use crate::error::{LabError, Result};
use crate::functionals::{energy_correction, eval_functional, modified_energy, FunctionalKind};
use crate::report::{complex_mean_se, MCReport};
use crate::sampler::GaussianEnsemble;
use crate::spectral::TorusField;
use crate::stats::{loglog_slope, mean_se};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestForm {
    /// `exp(i·Re⟨probe, π_{K0}u⟩)`.
    Characteristic,
    /// `tanh(Re⟨probe, π_{K0}u⟩)`.
    BoundedPoly,
}

/// Bounded function of the modes `|k| ≤ K0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderTestFn {
    pub probe: TorusField,
    pub form: TestForm,
    pub k0: usize,
}

impl CylinderTestFn {
    pub fn new(probe: TorusField, form: TestForm, k0: usize) -> Result<Self> {
        if probe.iter().any(|(k, z)| k.unsigned_abs() as usize > k0 && z != Complex64::new(0.0, 0.0)) {
            return Err(LabError::InvalidArgument("probe has modes above K0".into()));
        }
        Ok(Self { probe: probe.with_k_max(k0), form, k0 })
    }

    /// `f ≡ 1`.
    pub fn one() -> Self {
        Self { probe: TorusField::zeros(0), form: TestForm::Characteristic, k0: 0 }
    }

    /// `2π Σ_{|k|≤K0} probe_k · conj(u_k)`, real part.
    pub fn pairing(&self, u: &TorusField) -> f64 {
        let mut acc = 0.0;
        for (k, p) in self.probe.iter() {
            if k.unsigned_abs() as usize <= u.k_max() {
                acc += (p * u.get(k).conj()).re;
            }
        }
        2.0 * std::f64::consts::PI * acc
    }

    pub fn eval(&self, u: &TorusField) -> Complex64 {
        let x = self.pairing(u);
        match self.form {
            TestForm::Characteristic => Complex64::new(x.cos(), x.sin()),
            TestForm::BoundedPoly => Complex64::new(x.tanh(), 0.0),
        }
    }

    /// Default dictionary: single-mode probes of amplitude ½ on
    /// `k = 0, 1, −1, 2, −2, …`, alternating the two forms, capped at `K0`.
    pub fn dictionary(k0: usize, size: usize) -> Vec<Self> {
        (0..size)
            .map(|j| {
                let m = j.div_ceil(2) as i64 * if j % 2 == 1 { 1 } else { -1 };
                let k = m.clamp(-(k0 as i64), k0 as i64);
                let form = if j % 2 == 0 { TestForm::Characteristic } else { TestForm::BoundedPoly };
                let mut probe = TorusField::zeros(k0);
                probe.set(k, Complex64::new(0.5, 0.0));
                Self { probe, form, k0 }
            })
            .collect()
    }
}

pub const DEFAULT_DICTIONARY_SIZE: usize = 8;

/// Per-sample quantities shared by every transport identity.
struct SampleData {
    f_now: Vec<Complex64>,
    f_fwd: Vec<Complex64>,
    /// `log G_{s,N,t}(φ)`.
    log_g: f64,
    /// `log w(φ) = −R(φ)`.
    log_w: f64,
    /// `−(E(Φ(−t)φ) − E(φ))`.
    log_rho_density: f64,
}

fn sample_data(
    phi: &TorusField,
    fs: &[CylinderTestFn],
    s: f64,
    cfg: &FlowConfig,
    t: f64,
    need_rho: bool,
) -> Result<SampleData> {
    let n = cfg.n;
    let mut st = LowModeStepper::new(n);
    let fwd = evolve_with(&mut st, phi, cfg, t)?;
    let low = phi.with_k_max(n);
    let back = evolve_with(&mut st, &low, cfg, -t)?;
    let log_g = -(0.5 * back.sobolev_norm_sq(s) - 0.5 * low.sobolev_norm_sq(s));
    let (log_w, log_rho_density) = if need_rho {
        let e_back = modified_energy(&back, s, n)?;
        let e_now = modified_energy(&low, s, n)?;
        (-energy_correction(&low, s, n)?, -(e_back - e_now))
    } else {
        (0.0, 0.0)
    };
    Ok(SampleData {
        f_now: fs.iter().map(|f| f.eval(phi)).collect(),
        f_fwd: fs.iter().map(|f| f.eval(&fwd)).collect(),
        log_g,
        log_w,
        log_rho_density,
    })
}

/// All identities of one `(s, N, t)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportCell {
    pub s: f64,
    pub n: usize,
    pub t: f64,
    /// One report per test function.
    pub mu: Vec<MCReport>,
    pub rho: Vec<MCReport>,
    /// `E[G_{s,N,t}] = 1`.
    pub mean_density: MCReport,
    pub pass: bool,
}

fn check_ensemble(e: &GaussianEnsemble, fs: &[CylinderTestFn], n: usize) -> Result<()> {
    let k0 = fs.iter().map(|f| f.k0).max().unwrap_or(0);
    if e.k_cut < k0 || e.k_cut < n {
        return Err(LabError::InvalidArgument(format!("ensemble k_cut {} must be ≥ K0 {k0} and ≥ N {n}", e.k_cut)));
    }
    Ok(())
}

/// Runs every sample once and evaluates the `μ`, `ρ` and `E[G]` identities.
pub fn transport_cell(
    fs: &[CylinderTestFn],
    s: f64,
    t: f64,
    e: &GaussianEnsemble,
    cfg: &FlowConfig,
    with_rho: bool,
) -> Result<TransportCell> {
    check_ensemble(e, fs, cfg.n)?;
    let cfg = FlowConfig { t_end: cfg.t_end.max(t.abs()), ..cfg.clone() };
    let data: Vec<Option<SampleData>> = (0..e.n_samples)
        .into_par_iter()
        .map(|i| match sample_data(&e.sample(i), fs, s, &cfg, t, with_rho) {
            Ok(d) => Ok(Some(d)),
            Err(LabError::StepRejected { .. }) => Ok(None),
            Err(other) => Err(other),
        })
        .collect::<Result<_>>()?;
    let failed = data.iter().filter(|d| d.is_none()).count();
    let ok: Vec<&SampleData> = data.iter().flatten().collect();
    let m = ok.len();
    let report = |op: &str, lhs: Vec<Complex64>, rhs: Vec<Complex64>| {
        let (l, sl) = complex_mean_se(&lhs);
        let (r, sr) = complex_mean_se(&rhs);
        MCReport::new(op, l, sl, r, sr, m, e.seed).with_failures(failed)
    };
    let mut mu = Vec::with_capacity(fs.len());
    let mut rho = Vec::new();
    for j in 0..fs.len() {
        mu.push(report(
            "pushforward-mu",
            ok.iter().map(|d| d.f_fwd[j]).collect(),
            ok.iter().map(|d| d.f_now[j] * d.log_g.exp()).collect(),
        ));
        if with_rho {
            rho.push(report(
                "pushforward-rho",
                ok.iter().map(|d| d.f_fwd[j] * d.log_w.exp()).collect(),
                ok.iter().map(|d| d.f_now[j] * (d.log_w + d.log_rho_density).exp()).collect(),
            ));
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let mean_density =
        report("mean-density", vec![one; m], ok.iter().map(|d| Complex64::new(d.log_g.exp(), 0.0)).collect());
    let pass = mu.iter().chain(&rho).all(|r| r.pass) && mean_density.pass;
    Ok(TransportCell { s, n: cfg.n, t, mu, rho, mean_density, pass })
}

/// `E[f(Φ^N(t)φ)]` against `E[f(φ) G_{s,N,t}(φ)]`.
pub fn verify_pushforward_mu(
    f: &CylinderTestFn,
    s: f64,
    t: f64,
    e: &GaussianEnsemble,
    cfg: &FlowConfig,
) -> Result<MCReport> {
    let cell = transport_cell(std::slice::from_ref(f), s, t, e, cfg, false)?;
    Ok(cell.mu.into_iter().next().expect("one test function"))
}

/// `E[f(Φ^N(t)φ) w(φ)]` against `E[f(φ) w(φ) exp(−ΔE)]`.
pub fn verify_pushforward_rho(
    f: &CylinderTestFn,
    s: f64,
    t: f64,
    e: &GaussianEnsemble,
    cfg: &FlowConfig,
) -> Result<MCReport> {
    let cell = transport_cell(std::slice::from_ref(f), s, t, e, cfg, true)?;
    Ok(cell.rho.into_iter().next().expect("one test function"))
}

// ---------------------------------------------------------------------------
// integrability probes

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMomentRow {
    pub alpha: f64,
    /// `log E[1_{B_R}(π_N φ) e^{α|F|}]`; `-inf` when no sample is in the ball.
    pub log_estimate: f64,
    /// Delta-method standard error of the log estimate.
    pub se: f64,
    /// Largest summand exceeds 10% of the total.
    pub tail_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpIntegrabilityReport {
    pub kind: FunctionalKind,
    pub s: f64,
    pub n: usize,
    pub radius: f64,
    pub sigma: f64,
    pub n_samples: usize,
    pub in_ball: usize,
    pub seed: u64,
    pub rows: Vec<ExpMomentRow>,
    /// Slope of `log(L(α) − L(0))` against `log α` over the positive grid.
    pub growth_exponent: Option<f64>,
    /// Finite estimates, non-decreasing in `α`.
    pub monotone: bool,
}

/// MC estimate of `log E[1_{B_R} e^{α|F_{s,N}(π_N φ)|}]` on a grid of `α`,
/// with `B_R = {‖π_N u‖_{H^σ} ≤ R}`.
pub fn probe_exponential_integrability(
    kind: FunctionalKind,
    s: f64,
    n: usize,
    radius: f64,
    alpha_grid: &[f64],
    e: &GaussianEnsemble,
) -> Result<ExpIntegrabilityReport> {
    let sigma = e.params.sigma;
    let vals: Vec<Option<f64>> = (0..e.n_samples)
        .into_par_iter()
        .map(|i| {
            let u = e.sample(i).with_k_max(n);
            if u.sobolev_norm(sigma) > radius {
                return Ok(None);
            }
            Ok(Some(eval_functional(kind, &u, s, n)?.norm()))
        })
        .collect::<Result<_>>()?;
    let inside: Vec<f64> = vals.iter().flatten().copied().collect();
    let m = e.n_samples as f64;
    let rows: Vec<ExpMomentRow> = alpha_grid
        .iter()
        .map(|&alpha| {
            if inside.is_empty() {
                return ExpMomentRow { alpha, log_estimate: f64::NEG_INFINITY, se: f64::INFINITY, tail_flag: false };
            }
            // scale by the largest exponent to stay finite
            let top = inside.iter().map(|f| alpha * f).fold(f64::NEG_INFINITY, f64::max);
            let mut terms: Vec<f64> = vals.iter().map(|v| v.map_or(0.0, |f| (alpha * f - top).exp())).collect();
            let (mean, se) = mean_se(&terms);
            let total: f64 = mean * m;
            terms.sort_by(f64::total_cmp);
            let largest = terms.last().copied().unwrap_or(0.0);
            ExpMomentRow { alpha, log_estimate: mean.ln() + top, se: se / mean, tail_flag: largest > 0.1 * total }
        })
        .collect();
    let base = rows.iter().find(|r| r.alpha == 0.0).map(|r| r.log_estimate);
    let growth_exponent = base.and_then(|b| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.alpha > 0.0 && r.log_estimate - b > 0.0)
            .map(|r| (r.alpha, r.log_estimate - b))
            .collect();
        (pts.len() >= 2).then(|| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            loglog_slope(&xs, &ys)
        })
    });
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let monotone = sorted.iter().all(|r| r.log_estimate.is_finite())
        && sorted.windows(2).all(|w| w[1].log_estimate >= w[0].log_estimate);
    Ok(ExpIntegrabilityReport {
        kind,
        s,
        n,
        radius,
        sigma,
        n_samples: e.n_samples,
        in_ball: inside.len(),
        seed: e.seed,
        rows,
        growth_exponent,
        monotone,
    })
}

/// `{u : ‖π_{K0}u − c‖_{H^σ} ≤ r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderBall {
    pub center: TorusField,
    pub k0: usize,
    pub sigma: f64,
    pub radius: f64,
}

impl CylinderBall {
    pub fn contains(&self, u: &TorusField) -> bool {
        u.with_k_max(self.k0).sub(&self.center.with_k_max(self.k0)).sobolev_norm(self.sigma) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantitativeRow {
    pub radius: f64,
    /// `log ρ_{s,N}(A)`; the weights overflow doubles for rough samples.
    pub log_rho_a: f64,
    /// Standard error of `ρ(A)` relative to its mean.
    pub rel_se_a: f64,
    /// `log ρ_{s,N}(Φ^N(t)A)`.
    pub log_rho_moved: f64,
    pub rel_se_moved: f64,
    /// `log ρ(Φ(t)A) − ½ log ρ(A)`.
    pub log_ratio: f64,
}

/// `(log mean, relative se)` of `exp(l_i)`, with `None` standing for zero.
fn log_mean_se(logs: &[Option<f64>]) -> (f64, f64) {
    let m = logs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NAN);
    }
    let ys: Vec<f64> = logs.iter().map(|l| l.map_or(0.0, |l| (l - m).exp())).collect();
    let (mean, se) = mean_se(&ys);
    (m + mean.ln(), se / mean)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantitativeReport {
    pub s: f64,
    pub n: usize,
    pub t: f64,
    pub n_samples: usize,
    pub failed_samples: usize,
    pub seed: u64,
    pub rows: Vec<QuantitativeRow>,
    /// Every ratio over a non-empty ball is finite.
    pub pass: bool,
}

/// Unnormalised `ρ_{s,N}(A) = E[w 1_A(φ)]` and
/// `ρ_{s,N}(Φ^N(t)A) = E[w 1_A(Φ^N(−t)φ) e^{−ΔE}]` over a radius sweep.
pub fn probe_quantitative_inequality(
    s: f64,
    t: f64,
    ball: &CylinderBall,
    radii: &[f64],
    e: &GaussianEnsemble,
    cfg: &FlowConfig,
) -> Result<QuantitativeReport> {
    let n = cfg.n;
    let cfg = FlowConfig { t_end: cfg.t_end.max(t.abs()), ..cfg.clone() };
    // ρ(Φ(t)A) = E_ρ[1_A ∘ Φ(−t)], and Φ(−t)_#ρ has density exp(−(E(Φ(t)u) − E(u)))
    let data: Vec<Option<(TorusField, TorusField, f64, f64)>> = (0..e.n_samples)
        .into_par_iter()
        .map(|i| {
            let phi = e.sample(i);
            let mut st = LowModeStepper::new(n);
            let mut run = || -> Result<_> {
                let back = evolve_with(&mut st, &phi, &cfg, -t)?;
                let fwd_low = evolve_with(&mut st, &phi.with_k_max(n), &cfg, t)?;
                let low = phi.with_k_max(n);
                let log_w = -energy_correction(&low, s, n)?;
                let de = modified_energy(&fwd_low, s, n)? - modified_energy(&low, s, n)?;
                Ok((phi.clone(), back, log_w, -de))
            };
            match run() {
                Ok(v) => Ok(Some(v)),
                Err(LabError::StepRejected { .. }) => Ok(None),
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;
    let failed = data.iter().filter(|d| d.is_none()).count();
    let ok: Vec<_> = data.iter().flatten().collect();
    let rows = radii
        .iter()
        .map(|&r| {
            let b = CylinderBall { radius: r, ..ball.clone() };
            let a: Vec<Option<f64>> = ok.iter().map(|(phi, _, lw, _)| b.contains(phi).then_some(*lw)).collect();
            let moved: Vec<Option<f64>> =
                ok.iter().map(|(_, back, lw, ld)| b.contains(back).then_some(lw + ld)).collect();
            let (la, sa) = log_mean_se(&a);
            let (lm, sm) = log_mean_se(&moved);
            QuantitativeRow {
                radius: r,
                log_rho_a: la,
                rel_se_a: sa,
                log_rho_moved: lm,
                rel_se_moved: sm,
                log_ratio: lm - 0.5 * la,
            }
        })
        .collect::<Vec<_>>();
    // an empty ball says nothing either way
    let pass =
        rows.iter().filter(|r| r.log_rho_a.is_finite()).all(|r| !r.log_ratio.is_nan() && r.log_ratio < f64::INFINITY);
    Ok(QuantitativeReport { s, n, t, n_samples: ok.len(), failed_samples: failed, seed: e.seed, rows, pass })
}

// ---------------------------------------------------------------------------
// square-root cancellation

/// `G = Σ c_{k1..km} Π g_{kj}^{ιj}` with `ι_j = +` plain and `−` conjugated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSpec {
    pub signs: Vec<i8>,
    pub entries: Vec<(Vec<i64>, Complex64)>,
}

impl CoeffSpec {
    /// Rejects entries with a pairing `k_i = k_j`, `ι_i ≠ ι_j`.
    pub fn validate(&self) -> Result<()> {
        let m = self.signs.len();
        if m == 0 || self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(LabError::InvalidArgument("signs must be a non-empty ±1 array".into()));
        }
        for (ks, _) in &self.entries {
            if ks.len() != m {
                return Err(LabError::InvalidArgument("entry arity differs from signs".into()));
            }
            for i in 0..m {
                for j in i + 1..m {
                    if self.signs[i] != self.signs[j] && ks[i] == ks[j] {
                        return Err(LabError::InvalidArgument(format!("paired entry {ks:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_mode(&self) -> u64 {
        self.entries.iter().flat_map(|(ks, _)| ks.iter().map(|k| k.unsigned_abs())).max().unwrap_or(0)
    }

    pub fn l2_sq(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    /// Random sparse tensor on `|k| ≤ bound` whose entries have pairwise
    /// distinct frequencies and no two entries are permutations of each
    /// other inside a sign class. For such supports `E|G|² = 2^m Σ|c|²`.
    pub fn random_sparse(signs: Vec<i8>, bound: i64, entries: usize, seed: u64) -> Result<Self> {
        let m = signs.len();
        if (2 * bound + 1) < m as i64 {
            return Err(LabError::InvalidArgument("range too small for distinct frequencies".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ks = Uniform::new_inclusive(-bound, bound).map_err(|e| LabError::InvalidArgument(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        let mut attempts = 0;
        while out.len() < entries && attempts < 100 * entries + 100 {
            attempts += 1;
            let mut t: Vec<i64> = (0..m).map(|_| ks.sample(&mut rng)).collect();
            let mut distinct = t.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < m {
                continue;
            }
            // canonical order inside each sign class
            for class in [1i8, -1] {
                let pos: Vec<usize> = (0..m).filter(|&j| signs[j] == class).collect();
                let mut vals: Vec<i64> = pos.iter().map(|&j| t[j]).collect();
                vals.sort_unstable();
                for (p, v) in pos.iter().zip(vals) {
                    t[*p] = v;
                }
            }
            if !seen.insert(t.clone()) {
                continue;
            }
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            out.push((t, Complex64::new(re, im)));
        }
        let spec = Self { signs, entries: out };
        spec.validate()?;
        Ok(spec)
    }
}

/// `E|G|²` by Monte Carlo against `2^m Σ|c|²`, using the ensemble's raw
/// Gaussians as `g_k`.
pub fn probe_square_root_cancellation(spec: &CoeffSpec, e: &GaussianEnsemble) -> Result<MCReport> {
    spec.validate()?;
    if spec.max_mode() > e.k_cut as u64 {
        return Err(LabError::InvalidArgument("ensemble k_cut below the coefficient support".into()));
    }
    let k = e.k_cut as i64;
    let vals: Vec<f64> = (0..e.n_samples)
        .into_par_iter()
        .map(|i| {
            let g = e.gaussians(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (ks, c) in &spec.entries {
                let mut p = *c;
                for (&kj, &sj) in ks.iter().zip(&spec.signs) {
                    let z = g[(kj + k) as usize];
                    p *= if sj == 1 { z } else { z.conj() };
                }
                acc += p;
            }
            acc.norm_sqr()
        })
        .collect();
    let (mean, se) = mean_se(&vals);
    let bound = 2f64.powi(spec.signs.len() as i32) * spec.l2_sq();
    Ok(MCReport::new(
        "sqrt-cancel",
        Complex64::new(mean, 0.0),
        se,
        Complex64::new(bound, 0.0),
        0.0,
        e.n_samples,
        e.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SobolevParams;

    fn ens(k_cut: usize, m: usize) -> GaussianEnsemble {
        GaussianEnsemble::new(SobolevParams::with_gap(1.2, 0.05).unwrap(), k_cut, 5, m).unwrap()
    }

    #[test]
    fn zero_time_sides_agree_exactly() {
        let e = ens(8, 20);
        let cfg = FlowConfig::new(2, 1e-2, 1.0).unwrap();
        let cell = transport_cell(&CylinderTestFn::dictionary(2, 4), 1.2, 0.0, &e, &cfg, true).unwrap();
        for r in cell.mu.iter().chain(&cell.rho) {
            assert_eq!(r.lhs, r.rhs);
        }
        assert_eq!(cell.mean_density.rhs, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn test_functions_are_bounded() {
        let u = ens(8, 1).sample(0).scale(Complex64::new(50.0, 0.0));
        for f in CylinderTestFn::dictionary(4, 8) {
            assert!(f.eval(&u).norm() <= 1.0 + 1e-15);
        }
        assert_eq!(CylinderTestFn::one().eval(&u), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_gaussian_second_moment() {
        let spec = CoeffSpec { signs: vec![1], entries: vec![(vec![0], Complex64::new(1.0, 0.0))] };
        let r = probe_square_root_cancellation(&spec, &ens(2, 4000)).unwrap();
        assert_eq!(r.rhs.re, 2.0);
        assert!(r.pass, "{r:?}");
        let empty = CoeffSpec { signs: vec![1, -1], entries: vec![] };
        assert_eq!(probe_square_root_cancellation(&empty, &ens(2, 10)).unwrap().lhs.re, 0.0);
    }

    #[test]
    fn pairing_entries_rejected() {
        let spec = CoeffSpec { signs: vec![1, -1], entries: vec![(vec![3, 3], Complex64::new(1.0, 0.0))] };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn indicator_moment_at_zero_alpha() {
        let e = ens(8, 200);
        let r = probe_exponential_integrability(FunctionalKind::T, 1.2, 2, 5.0, &[0.0, 0.5], &e).unwrap();
        assert!(r.rows[0].log_estimate <= 0.0);
    }
}
