//! Gaussian random Fourier series `φ = Σ_{|n|≤k_cut} g_n ⟨n⟩^{−s} e^{inx}`.
//!
//! `g_n` has independent `N(0,1)` real and imaginary parts, so `E|g_n|² = 2`.
//! Sample `i` of an ensemble is drawn from a ChaCha8 stream keyed by
//! `(seed, i)`; modes are read in the fixed order `0, −1, 1, −2, 2, …`, which
//! makes the coefficient of mode `n` a function of `(seed, i, n)` alone and
//! nests fields with different `k_cut`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_low, linear_phase, FlowConfig};
use crate::error::{LabError, Result};
use crate::functionals::energy_correction;
use crate::spectral::{bracket, SobolevParams, TorusField};
use crate::stats::mean_se;

/// Recorded alongside every sample dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub seed: u64,
    pub s: f64,
    pub sigma: f64,
    pub k_cut: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnsemble {
    pub params: SobolevParams,
    pub k_cut: usize,
    pub seed: u64,
    pub n_samples: usize,
}

impl GaussianEnsemble {
    pub fn new(params: SobolevParams, k_cut: usize, seed: u64, n_samples: usize) -> Result<Self> {
        if k_cut < 1 || n_samples < 1 {
            return Err(LabError::InvalidArgument("k_cut and n_samples must be ≥ 1".into()));
        }
        Ok(Self { params, k_cut, seed, n_samples })
    }

    /// `k_cut = 4N`, the default for dynamics at truncation `N`.
    pub fn for_truncation(params: SobolevParams, n: usize, seed: u64, n_samples: usize) -> Result<Self> {
        Self::new(params, 4 * n, seed, n_samples)
    }

    pub fn manifest(&self) -> EnsembleManifest {
        EnsembleManifest {
            seed: self.seed,
            s: self.params.s,
            sigma: self.params.sigma,
            k_cut: self.k_cut,
            n_samples: self.n_samples,
        }
    }

    /// The raw Gaussians `g_n`, `|n| ≤ k_cut`, ordered by `n`.
    pub fn gaussians(&self, i: usize) -> Vec<Complex64> {
        draw_gaussians(self.seed, i as u64, self.k_cut)
    }

    /// # Panics
    /// If `i ≥ n_samples`.
    pub fn sample(&self, i: usize) -> TorusField {
        assert!(i < self.n_samples, "sample index {i} ≥ n_samples {}", self.n_samples);
        let g = self.gaussians(i);
        let k = self.k_cut as i64;
        let coeffs = g.into_iter().enumerate().map(|(j, z)| z / bracket(j as i64 - k).powf(self.params.s)).collect();
        TorusField::from_coeffs(self.k_cut, coeffs).expect("gaussian draws are finite")
    }

    /// All samples, generated in parallel and returned in index order.
    pub fn samples(&self) -> Vec<TorusField> {
        (0..self.n_samples).into_par_iter().map(|i| self.sample(i)).collect()
    }
}

fn draw_gaussians(seed: u64, stream: u64, k_cut: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let k = k_cut as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * k_cut + 1];
    for j in 0..out.len() as i64 {
        // 0, −1, 1, −2, 2, …
        let n = if j % 2 == 1 { -(j + 1) / 2 } else { j / 2 };
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        out[(n + k) as usize] = Complex64::new(re, im);
    }
    out
}

/// `G_{s,N,t}(u) = exp(−(½‖π_N Φ^N(−t)u‖²_{H^s} − ½‖π_N u‖²_{H^s}))`.
pub fn density_mu(u: &TorusField, s: f64, cfg: &FlowConfig, t: f64) -> Result<f64> {
    Ok(density_mu_exponent(u, s, cfg, t)?.exp())
}

/// The exponent of [`density_mu`], without exponentiation.
pub fn density_mu_exponent(u: &TorusField, s: f64, cfg: &FlowConfig, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let low = u.with_k_max(cfg.n);
    let back = evolve_low(low.coeffs(), cfg, -t)?;
    let back = TorusField::from_coeffs(cfg.n, back)?;
    Ok(-(0.5 * back.sobolev_norm_sq(s) - 0.5 * low.sobolev_norm_sq(s)))
}

/// `exp(−R_{s,N}(u))`.
pub fn weight_rho(u: &TorusField, s: f64, n: usize) -> Result<f64> {
    Ok((-energy_correction(u, s, n)?).exp())
}

/// Per-mode moment comparison of `e^{it∂²}φ` on modes `|n| > N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearInvarianceReport {
    pub seed: u64,
    pub n_samples: usize,
    pub t: f64,
    pub modes_checked: usize,
    /// Largest `|estimate − expected| / SE` over all modes and moments.
    pub max_z: f64,
    pub worst_mode: Option<i64>,
    pub worst_moment: Option<&'static str>,
    pub pass: bool,
}

/// Moments of the normalised coefficient `⟨n⟩^s (e^{it∂²}φ)_n`: the means of
/// its real and imaginary parts vanish, both parts have unit variance, they
/// are uncorrelated, and `E|g|² = 2`. Pass when every discrepancy is within
/// `4·SE`.
pub fn linear_invariance_check(e: &GaussianEnsemble, n: usize, t: f64) -> LinearInvarianceReport {
    const NAMES: [&str; 6] = ["mean_re", "mean_im", "var_re", "var_im", "cov", "abs2"];
    const EXPECT: [f64; 6] = [0.0, 0.0, 1.0, 1.0, 0.0, 2.0];
    let k = e.k_cut as i64;
    let modes: Vec<i64> = (-k..=k).filter(|m| m.unsigned_abs() as usize > n).collect();
    let draws: Vec<Vec<Complex64>> = (0..e.n_samples).into_par_iter().map(|i| e.gaussians(i)).collect();
    let mut report = LinearInvarianceReport {
        seed: e.seed,
        n_samples: e.n_samples,
        t,
        modes_checked: modes.len(),
        max_z: 0.0,
        worst_mode: None,
        worst_moment: None,
        pass: true,
    };
    for &m in &modes {
        let phase = linear_phase(m, t);
        let idx = (m + k) as usize;
        // ⟨n⟩^s cancels the sampling decay, leaving g_n rotated by the phase
        let z: Vec<Complex64> = draws.iter().map(|g| g[idx] * phase).collect();
        let series: [Vec<f64>; 6] = [
            z.iter().map(|z| z.re).collect(),
            z.iter().map(|z| z.im).collect(),
            z.iter().map(|z| z.re * z.re).collect(),
            z.iter().map(|z| z.im * z.im).collect(),
            z.iter().map(|z| z.re * z.im).collect(),
            z.iter().map(|z| z.norm_sqr()).collect(),
        ];
        for (j, xs) in series.iter().enumerate() {
            let (mean, se) = mean_se(xs);
            let zscore = if se > 0.0 { (mean - EXPECT[j]).abs() / se } else { 0.0 };
            if zscore > report.max_z {
                report.max_z = zscore;
                report.worst_mode = Some(m);
                report.worst_moment = Some(NAMES[j]);
            }
        }
    }
    report.pass = report.max_z <= 4.0;
    report
}
