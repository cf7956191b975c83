//! Truncated Fourier fields on the torus.
//!
//! A [`TorusField`] stores `û(k)` for `k ∈ [-K, K]` densely with index offset
//! `K`, representing `u(x) = Σ û(k) e^{ikx}`.
//!
//! Normalisation conventions, side by side:
//!
//! | quantity          | formula                                   |
//! |-------------------|-------------------------------------------|
//! | `sobolev_norm(σ)` | `(Σ ⟨k⟩^{2σ} |û(k)|²)^{1/2}`, no `2π`      |
//! | `mass`            | `∫|u|² = 2π Σ |û(k)|²`                     |
//! | `hamiltonian`     | `½∫|∂u|² + ⅙∫|u|⁶`                        |

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::summation::NeumaierSum;

/// `⟨k⟩ = (1 + k²)^{1/2}`.
#[inline]
pub fn bracket(k: i64) -> f64 {
    (1.0 + (k * k) as f64).sqrt()
}

/// Regularity pair `(s, σ)` with `σ < s − ½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub s: f64,
    pub sigma: f64,
}

/// Lowest `s` covered by the full verification pipeline.
pub const PIPELINE_MIN_S: f64 = 0.9;

impl SobolevParams {
    pub fn new(s: f64, sigma: f64) -> Result<Self> {
        if !(s.is_finite() && sigma.is_finite()) {
            return Err(LabError::InvalidArgument("s and sigma must be finite".into()));
        }
        if sigma >= s - 0.5 {
            return Err(LabError::InvalidArgument(format!("sigma = {sigma} must be < s - 1/2 = {}", s - 0.5)));
        }
        Ok(Self { s, sigma })
    }

    /// `σ = s − ½ − δ`.
    pub fn with_gap(s: f64, delta: f64) -> Result<Self> {
        Self::new(s, s - 0.5 - delta)
    }

    /// True when `s` lies below the range where the full pipeline is meaningful;
    /// callers may still run exploratory experiments.
    pub fn is_exploratory(&self) -> bool {
        self.s <= PIPELINE_MIN_S
    }
}

/// Dyadic frequency levels `1, 2, 4, …` whose blocks meet `[-k_max, k_max]`.
pub fn dyadic_levels(k_max: usize) -> Vec<u64> {
    let mut levels = vec![1u64];
    let mut l = 2u64;
    while l / 2 < k_max as u64 {
        levels.push(l);
        l *= 2;
    }
    levels
}

/// `|k| ∼ L`: `|k| ≤ 1` for `L = 1`, `L/2 < |k| ≤ L` otherwise.
#[inline]
pub fn in_dyadic_block(k: i64, level: u64) -> bool {
    let a = k.unsigned_abs();
    if level <= 1 {
        a <= 1
    } else {
        a > level / 2 && a <= level
    }
}

/// The dyadic level containing `k`.
pub fn dyadic_level_of(k: i64) -> u64 {
    let a = k.unsigned_abs();
    if a <= 1 {
        1
    } else {
        a.next_power_of_two()
    }
}

/// Frequencies in the block `|k| ∼ L`, ascending.
pub fn dyadic_block(level: u64) -> Vec<i64> {
    let lo = if level <= 1 { 0 } else { level / 2 + 1 };
    let hi = level.max(1);
    let mut ks: Vec<i64> = (lo..=hi).flat_map(|a| [-(a as i64), a as i64]).collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Truncated Fourier coefficient vector on `[-k_max, k_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl TorusField {
    pub fn zeros(k_max: usize) -> Self {
        Self { k_max, coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1] }
    }

    /// Build from coefficients ordered `k = -k_max..=k_max`.
    pub fn from_coeffs(k_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * k_max + 1 {
            return Err(LabError::InvalidArgument(format!(
                "expected {} coefficients for k_max = {k_max}, got {}",
                2 * k_max + 1,
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(LabError::NonFinite(i as i64 - k_max as i64));
        }
        Ok(Self { k_max, coeffs })
    }

    /// `c · e^{ikx}` on the smallest band containing `k`.
    pub fn single_mode(k: i64, c: Complex64) -> Self {
        let mut f = Self::zeros(k.unsigned_abs() as usize);
        f.set(k, c);
        f
    }

    /// `Σ_{k ∈ ks} e^{ikx}` on band `k_max`.
    pub fn indicator(k_max: usize, ks: impl IntoIterator<Item = i64>) -> Self {
        let mut f = Self::zeros(k_max);
        for k in ks {
            f.set(k, Complex64::new(1.0, 0.0));
        }
        f
    }

    #[inline]
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `û(k)`; zero outside the band.
    #[inline]
    pub fn get(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.k_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.k_max as i64) as usize]
        }
    }

    /// Set `û(k)`.
    ///
    /// # Panics
    /// If `|k| > k_max` or `c` is not finite.
    pub fn set(&mut self, k: i64, c: Complex64) {
        assert!(k.unsigned_abs() as usize <= self.k_max, "k = {k} outside band {}", self.k_max);
        assert!(c.re.is_finite() && c.im.is_finite(), "non-finite coefficient");
        self.coeffs[(k + self.k_max as i64) as usize] = c;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let off = self.k_max as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - off, *c))
    }

    /// Copy onto band `k_max`, padding with zeros or dropping modes.
    pub fn with_k_max(&self, k_max: usize) -> Self {
        let mut out = Self::zeros(k_max);
        let m = k_max.min(self.k_max) as i64;
        for k in -m..=m {
            out.coeffs[(k + k_max as i64) as usize] = self.get(k);
        }
        out
    }

    pub fn add(&self, other: &TorusField) -> TorusField {
        let k_max = self.k_max.max(other.k_max);
        let mut out = self.with_k_max(k_max);
        for (k, c) in other.iter() {
            out.coeffs[(k + k_max as i64) as usize] += c;
        }
        out
    }

    pub fn sub(&self, other: &TorusField) -> TorusField {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: Complex64) -> TorusField {
        TorusField { k_max: self.k_max, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    fn filtered(&self, keep: impl Fn(i64) -> bool) -> TorusField {
        let mut out = self.clone();
        let off = self.k_max as i64;
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if !keep(i as i64 - off) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Dirichlet projector `π_N`; the band is preserved.
    pub fn project_low(&self, n: usize) -> TorusField {
        self.filtered(|k| k.unsigned_abs() as usize <= n)
    }

    /// `π_N^⊥ = Id − π_N`.
    pub fn project_high(&self, n: usize) -> TorusField {
        self.filtered(|k| k.unsigned_abs() as usize > n)
    }

    /// Dyadic projector `P_L`.
    pub fn project_dyadic(&self, level: u64) -> TorusField {
        self.filtered(|k| in_dyadic_block(k, level))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// `Σ |û(k)|²`, the Fourier-side `ℓ²` norm squared.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect::<NeumaierSum>().value()
    }

    /// `Σ ⟨k⟩^{2σ} |û(k)|²`.
    pub fn sobolev_norm_sq(&self, sigma: f64) -> f64 {
        self.iter().map(|(k, c)| (1.0 + (k * k) as f64).powf(sigma) * c.norm_sqr()).collect::<NeumaierSum>().value()
    }

    pub fn sobolev_norm(&self, sigma: f64) -> f64 {
        self.sobolev_norm_sq(sigma).sqrt()
    }

    /// `M(u) = ∫|u|² = 2π Σ |û(k)|²`.
    pub fn mass(&self) -> f64 {
        2.0 * PI * self.l2_sq()
    }

    /// `½∫|∂ₓu|² = π Σ k² |û(k)|²`.
    pub fn kinetic(&self) -> f64 {
        PI * self.iter().map(|(k, c)| (k * k) as f64 * c.norm_sqr()).collect::<NeumaierSum>().value()
    }

    /// `∫|u|⁶` by quadrature on a grid that integrates `|u|⁶` exactly.
    pub fn l6_pow6(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let grid = grid_size(6 * self.k_max + 2);
        let values = to_grid(self, grid);
        let s: NeumaierSum = values.iter().map(|z| z.norm_sqr().powi(3)).collect();
        2.0 * PI * s.value() / grid as f64
    }

    /// `H(u) = ½∫|∂ₓu|² + ⅙∫|u|⁶`.
    pub fn hamiltonian(&self) -> f64 {
        self.kinetic() + self.l6_pow6() / 6.0
    }

    /// `F(u) = |u|⁴u`, exact on its full band `5·k_max`.
    pub fn nonlinearity(&self) -> TorusField {
        self.nonlinearity_band(5 * self.k_max)
    }

    /// Coefficients of `|u|⁴u` for `|k| ≤ k_out`, alias-free.
    pub fn nonlinearity_band(&self, k_out: usize) -> TorusField {
        let mut kernel = QuinticKernel::new(self.k_max, k_out);
        let mut out = TorusField::zeros(k_out);
        kernel.apply(&self.coeffs, &mut out.coeffs);
        out
    }

    /// `F_N(u) = π_N(|π_N u|⁴ π_N u)` on band `N`.
    pub fn nonlinearity_trunc(&self, n: usize) -> TorusField {
        let low = self.with_k_max(n);
        let mut kernel = QuinticKernel::new(n, n);
        let mut out = TorusField::zeros(n);
        kernel.apply(&low.coeffs, &mut out.coeffs);
        out
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            k_max: self.k_max,
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
        }
    }

    pub fn from_json(j: &FieldJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(LabError::InvalidArgument("re/im length mismatch".into()));
        }
        let coeffs = j.re.iter().zip(&j.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        Self::from_coeffs(j.k_max, coeffs)
    }
}

/// Serialised field: `{"k_max": K, "re": [...], "im": [...]}`, `k = -K..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub k_max: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Smallest power of two `≥ min_points`.
pub fn grid_size(min_points: usize) -> usize {
    min_points.max(1).next_power_of_two()
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// Physical-space values `u(2πj/M)`.
pub fn to_grid(u: &TorusField, grid: usize) -> Vec<Complex64> {
    assert!(grid > 2 * u.k_max, "grid too small for band");
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    for (k, c) in u.iter() {
        buf[k.rem_euclid(grid as i64) as usize] = c;
    }
    let (_, inv) = plans(grid);
    inv.process(&mut buf);
    buf
}

/// Pseudo-spectral evaluation of `|u|⁴u` with reusable plans and buffers.
///
/// The grid has `M ≥ 5·k_in + k_out + 2` points, so aliased products never
/// land on a retained mode `|k| ≤ k_out`.
pub struct QuinticKernel {
    k_in: usize,
    k_out: usize,
    grid: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl QuinticKernel {
    pub fn new(k_in: usize, k_out: usize) -> Self {
        let grid = grid_size(5 * k_in + k_out + 2);
        let (fwd, inv) = plans(grid);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            k_in,
            k_out,
            grid,
            fwd,
            inv,
            buf: vec![Complex64::new(0.0, 0.0); grid],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// `input` holds `2·k_in + 1` coefficients, `out` receives `2·k_out + 1`.
    pub fn apply(&mut self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), 2 * self.k_in + 1);
        debug_assert_eq!(out.len(), 2 * self.k_out + 1);
        let m = self.grid as i64;
        let zero = Complex64::new(0.0, 0.0);
        self.buf.iter_mut().for_each(|z| *z = zero);
        let off = self.k_in as i64;
        for (i, c) in input.iter().enumerate() {
            let k = i as i64 - off;
            self.buf[k.rem_euclid(m) as usize] = *c;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        for z in self.buf.iter_mut() {
            let a2 = z.norm_sqr();
            *z *= a2 * a2;
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = 1.0 / self.grid as f64;
        let off = self.k_out as i64;
        for (i, o) in out.iter_mut().enumerate() {
            let k = i as i64 - off;
            *o = self.buf[k.rem_euclid(m) as usize] * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ones(k_max: usize) -> TorusField {
        TorusField::indicator(k_max, -(k_max as i64)..=k_max as i64)
    }

    #[test]
    fn low_projection_examples() {
        let u = TorusField::single_mode(3, c(1.0, 0.0));
        assert!(u.project_low(0).is_zero());
        let v = ones(2);
        assert_eq!(v.project_low(2), v);
        let w = ones(5).project_low(2);
        for k in -5i64..=5 {
            let expect = if k.abs() <= 2 { 1.0 } else { 0.0 };
            assert_eq!(w.get(k), c(expect, 0.0));
        }
    }

    #[test]
    fn high_projection_examples() {
        let u = TorusField::single_mode(3, c(1.0, 0.0));
        assert_eq!(u.project_high(0), u);
        assert!(u.project_low(4).project_high(4).is_zero());
        let w = ones(5).project_high(2);
        for k in -5i64..=5 {
            let expect = if k.abs() > 2 { 1.0 } else { 0.0 };
            assert_eq!(w.get(k), c(expect, 0.0));
        }
    }

    #[test]
    fn dyadic_blocks_follow_convention() {
        let u = ones(8);
        let p1 = u.project_dyadic(1);
        let kept: Vec<i64> = p1.iter().filter(|(_, z)| z.re != 0.0).map(|(k, _)| k).collect();
        assert_eq!(kept, vec![-1, 0, 1]);
        let p4 = u.project_dyadic(4);
        let kept: Vec<i64> = p4.iter().filter(|(_, z)| z.re != 0.0).map(|(k, _)| k).collect();
        assert_eq!(kept, vec![-4, -3, 3, 4]);
        assert_eq!(dyadic_block(4), vec![-4, -3, 3, 4]);
        assert_eq!(dyadic_block(1), vec![-1, 0, 1]);
    }

    #[test]
    fn dyadic_blocks_partition_frequencies() {
        for k_max in [0usize, 1, 2, 3, 7, 8, 33, 256] {
            let levels = dyadic_levels(k_max);
            for k in -(k_max as i64)..=k_max as i64 {
                let hits = levels.iter().filter(|&&l| in_dyadic_block(k, l)).count();
                assert_eq!(hits, 1, "k = {k}, k_max = {k_max}");
                assert!(in_dyadic_block(k, dyadic_level_of(k)));
            }
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        assert_eq!(TorusField::zeros(3).sobolev_norm(1.3), 0.0);
        let one = TorusField::single_mode(0, c(1.0, 0.0));
        for sigma in [-1.0, 0.0, 0.5, 2.0] {
            assert_eq!(one.sobolev_norm(sigma), 1.0);
        }
        let e1 = TorusField::single_mode(1, c(1.0, 0.0));
        assert!((e1.sobolev_norm(1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mass_and_hamiltonian_examples() {
        let z = TorusField::zeros(4);
        assert_eq!(z.mass(), 0.0);
        assert_eq!(z.hamiltonian(), 0.0);
        let e1 = TorusField::single_mode(1, c(1.0, 0.0));
        assert!((e1.mass() - 2.0 * PI).abs() < 1e-14);
        let cval = 1.3;
        let u = TorusField::single_mode(0, c(cval, 0.0));
        let expect = 2.0 * PI / 6.0 * cval.powi(6);
        assert!((u.hamiltonian() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn nonlinearity_examples() {
        assert!(TorusField::zeros(2).nonlinearity().is_zero());
        let a = c(0.7, -0.4);
        let f = TorusField::single_mode(3, a).nonlinearity();
        let expect = a * a.norm_sqr() * a.norm_sqr();
        for (k, z) in f.iter() {
            let e = if k == 3 { expect } else { c(0.0, 0.0) };
            assert!((z - e).norm() < 1e-14, "k = {k}");
        }
        let two = TorusField::indicator(1, [0, 1]).nonlinearity();
        assert!((two.get(0) - c(10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn truncated_nonlinearity_ignores_high_modes() {
        let mut u = TorusField::zeros(6);
        u.set(1, c(0.5, 0.2));
        u.set(-2, c(0.1, 0.3));
        u.set(6, c(3.0, 0.0));
        let f = u.nonlinearity_trunc(2);
        let g = u.project_low(2).nonlinearity().with_k_max(2);
        for k in -2..=2 {
            assert!((f.get(k) - g.get(k)).norm() < 1e-14);
        }
        assert_eq!(f.k_max(), 2);
    }

    #[test]
    fn json_round_trip() {
        let mut u = TorusField::zeros(2);
        u.set(-1, c(1.5, -2.0));
        u.set(2, c(0.25, 0.0));
        let s = serde_json::to_string(&u.to_json()).unwrap();
        assert!(s.starts_with("{\"k_max\":2,\"re\":["));
        let back = TorusField::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn rejects_non_finite() {
        let coeffs = vec![c(0.0, 0.0), c(f64::NAN, 0.0), c(0.0, 0.0)];
        assert!(matches!(TorusField::from_coeffs(1, coeffs), Err(LabError::NonFinite(0))));
    }

    #[test]
    fn sobolev_params_guard() {
        assert!(SobolevParams::new(1.2, 0.7).is_err());
        assert!(SobolevParams::new(1.2, 0.65).is_ok());
        assert!(SobolevParams::with_gap(0.8, 0.05).unwrap().is_exploratory());
    }

    #[test]
    fn add_keeps_largest_band() {
        let a = TorusField::single_mode(1, c(1.0, 0.0));
        let b = TorusField::single_mode(-4, c(2.0, 0.0));
        let s = a.add(&b);
        assert_eq!(s.k_max(), 4);
        assert_eq!(s.get(1), c(1.0, 0.0));
        assert_eq!(s.get(-4), c(2.0, 0.0));
    }
}
