//! Integration of the truncated flow `Φ^N`.
//!
//! Modes `|k| > N` evolve by the exact free phase `e^{−ik²t}`. Modes `|k| ≤ N`
//! solve the finite-dimensional system
//!
//! ```text
//! ∂_t ŵ_k = −i k² ŵ_k − i [π_N(|w|⁴w)]_k
//! ```
//!
//! with a Lawson (integrating-factor) RK4 step, i.e. classical RK4 on the
//! interaction-picture variable `v_k = e^{ik²τ} ŵ_k`. Backward time uses the
//! same step with a negative step size.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spectral::{QuinticKernel, TorusField};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Rk4InteractionPicture,
}

/// Integrator settings for `Φ^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub method: Method,
    /// Relative tolerance used by conservation reports.
    pub tol_report: f64,
    /// Relative local-error tolerance of the step-doubling monitor.
    pub monitor_tol: f64,
    /// Run the monitor on every `monitor_every`-th step; 0 disables it.
    pub monitor_every: usize,
    /// Number of times a step may be halved before the run is rejected.
    pub max_refinements: u32,
}

impl FlowConfig {
    pub fn new(n: usize, dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            n,
            dt,
            t_end,
            method: Method::default(),
            tol_report: 1e-8,
            monitor_tol: 1e-10,
            monitor_every: 16,
            max_refinements: 8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(LabError::InvalidArgument("truncation N must be ≥ 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LabError::InvalidArgument("dt must be positive and finite".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(LabError::InvalidArgument("t_end must be non-negative".into()));
        }
        Ok(())
    }

    /// Same settings with another step size.
    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Reusable low-mode stepper for one truncation level.
pub struct LowModeStepper {
    n: usize,
    kernel: QuinticKernel,
    ksq: Vec<f64>,
    f_buf: Vec<Complex64>,
    scratch: [Vec<Complex64>; 6],
}

impl LowModeStepper {
    pub fn new(n: usize) -> Self {
        let len = 2 * n + 1;
        let zero = vec![Complex64::new(0.0, 0.0); len];
        Self {
            n,
            kernel: QuinticKernel::new(n, n),
            ksq: (0..len).map(|i| ((i as i64 - n as i64).pow(2)) as f64).collect(),
            f_buf: zero.clone(),
            scratch: std::array::from_fn(|_| zero.clone()),
        }
    }

    /// `out = −i F_N(w)`.
    fn rhs(kernel: &mut QuinticKernel, w: &[Complex64], out: &mut [Complex64]) {
        kernel.apply(w, out);
        for z in out.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }

    /// One Lawson-RK4 step of size `h` (any sign), in place.
    pub fn step(&mut self, w: &mut [Complex64], h: f64) {
        let [a, b, c, d, tmp, e1] = &mut self.scratch;
        for (e, k2) in e1.iter_mut().zip(&self.ksq) {
            *e = Complex64::from_polar(1.0, -k2 * h * 0.5);
        }
        Self::rhs(&mut self.kernel, w, a);
        for i in 0..w.len() {
            tmp[i] = e1[i] * (w[i] + a[i] * (0.5 * h));
        }
        Self::rhs(&mut self.kernel, tmp, b);
        for i in 0..w.len() {
            tmp[i] = e1[i] * w[i] + b[i] * (0.5 * h);
        }
        Self::rhs(&mut self.kernel, tmp, c);
        for i in 0..w.len() {
            tmp[i] = e1[i] * (e1[i] * w[i] + c[i] * h);
        }
        Self::rhs(&mut self.kernel, tmp, d);
        for i in 0..w.len() {
            let e = e1[i];
            let e2 = e * e;
            w[i] = e2 * w[i] + (e2 * a[i] + e * (b[i] + c[i]) * 2.0 + d[i]) * (h / 6.0);
        }
    }

    /// `2^level` equal sub-steps covering `h`.
    fn substeps(&mut self, w: &mut [Complex64], h: f64, level: u32) {
        let m = 1u64 << level;
        let sub = h / m as f64;
        for _ in 0..m {
            self.step(w, sub);
        }
    }

    /// Evaluate `π_N F(w)` into `f_buf` and return it.
    pub fn nonlinearity(&mut self, w: &[Complex64]) -> &[Complex64] {
        self.kernel.apply(w, &mut self.f_buf);
        &self.f_buf
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).collect::<NeumaierSum>().value().sqrt()
}

/// Integrate the low modes `w ∈ C^{2N+1}` over time `t`.
pub fn evolve_low(w0: &[Complex64], cfg: &FlowConfig, t: f64) -> Result<Vec<Complex64>> {
    let mut stepper = LowModeStepper::new(cfg.n);
    evolve_low_with(&mut stepper, w0, cfg, t)
}

pub fn evolve_low_with(
    stepper: &mut LowModeStepper,
    w0: &[Complex64],
    cfg: &FlowConfig,
    t: f64,
) -> Result<Vec<Complex64>> {
    assert_eq!(w0.len(), 2 * cfg.n + 1);
    assert_eq!(stepper.n(), cfg.n);
    let mut w = w0.to_vec();
    if t == 0.0 || w.iter().all(|z| z.norm_sqr() == 0.0) {
        // F_N(0) = 0, so the zero field only picks up the free phase
        return Ok(free_phase(&w, cfg.n, t));
    }
    let steps = (t.abs() / cfg.dt).ceil().max(1.0) as u64;
    let h = t / steps as f64;
    let mut level = 0u32;
    let mut trial = vec![Complex64::new(0.0, 0.0); w.len()];
    for i in 0..steps {
        let check = cfg.monitor_every > 0 && i % cfg.monitor_every as u64 == 0;
        if !check {
            stepper.substeps(&mut w, h, level);
            continue;
        }
        loop {
            trial.copy_from_slice(&w);
            stepper.substeps(&mut trial, h, level);
            let coarse = trial.clone();
            trial.copy_from_slice(&w);
            stepper.substeps(&mut trial, h, level + 1);
            let diff: Vec<Complex64> = coarse.iter().zip(&trial).map(|(a, b)| a - b).collect();
            let scale = l2(&trial).max(f64::MIN_POSITIVE);
            // Richardson estimate of the coarse local error
            let err = l2(&diff) / scale * 16.0 / 15.0;
            if !err.is_finite() {
                return Err(LabError::StepRejected { t: i as f64 * h, dt: h.abs(), error: err });
            }
            if err <= cfg.monitor_tol {
                w.copy_from_slice(&coarse);
                break;
            }
            if level >= cfg.max_refinements {
                return Err(LabError::StepRejected {
                    t: i as f64 * h,
                    dt: h.abs() / (1u64 << level) as f64,
                    error: err,
                });
            }
            level += 1;
        }
    }
    if let Some(k) = w.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LabError::NonFinite(k as i64 - cfg.n as i64));
    }
    Ok(w)
}

fn free_phase(w: &[Complex64], n: usize, t: f64) -> Vec<Complex64> {
    w.iter()
        .enumerate()
        .map(|(i, z)| {
            let k = i as i64 - n as i64;
            z * linear_phase(k, t)
        })
        .collect()
}

/// `e^{−ik²t}`.
#[inline]
pub fn linear_phase(k: i64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -((k * k) as f64) * t)
}

/// `Φ^N(t) u0` on band `max(K_max, N)`.
pub fn evolve(u0: &TorusField, cfg: &FlowConfig, t: f64) -> Result<TorusField> {
    let mut stepper = LowModeStepper::new(cfg.n);
    evolve_with(&mut stepper, u0, cfg, t)
}

pub fn evolve_with(stepper: &mut LowModeStepper, u0: &TorusField, cfg: &FlowConfig, t: f64) -> Result<TorusField> {
    cfg.validate()?;
    if t.abs() > cfg.t_end * (1.0 + 1e-12) {
        return Err(LabError::InvalidArgument(format!(
            "|t| = {} exceeds the configured horizon {}",
            t.abs(),
            cfg.t_end
        )));
    }
    let n = cfg.n;
    let band = u0.k_max().max(n);
    let low = u0.with_k_max(n);
    let w = evolve_low_with(stepper, low.coeffs(), cfg, t)?;
    let mut out = u0.with_k_max(band);
    for (k, c) in u0.iter() {
        if k.unsigned_abs() as usize > n {
            out.set(k, c * linear_phase(k, t));
        }
    }
    for (i, z) in w.into_iter().enumerate() {
        out.set(i as i64 - n as i64, z);
    }
    Ok(out)
}

/// `H_N(w) = ½·2π Σ_{|k|≤N} k²|ŵ_k|² + ⅙∫|π_N w|⁶`.
pub fn truncated_hamiltonian(u: &TorusField, n: usize) -> f64 {
    u.with_k_max(n).hamiltonian()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub n: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub mass_drift: f64,
    pub hamiltonian_drift: f64,
    pub tol: f64,
    pub pass: bool,
}

fn rel_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Max relative drift of `M` and `H_N` along the trajectory at `n_saves`
/// equally spaced times in `(0, t_end]`.
pub fn conservation_report(u0: &TorusField, cfg: &FlowConfig, n_saves: usize) -> Result<ConservationReport> {
    let traj = trajectory(u0, cfg, cfg.t_end, n_saves.max(1))?;
    let m0 = u0.with_k_max(cfg.n).mass();
    let h0 = truncated_hamiltonian(u0, cfg.n);
    let mut dm: f64 = 0.0;
    let mut dh: f64 = 0.0;
    for (_, u) in &traj[1..] {
        dm = dm.max(rel_drift(u.with_k_max(cfg.n).mass(), m0));
        dh = dh.max(rel_drift(truncated_hamiltonian(u, cfg.n), h0));
    }
    Ok(ConservationReport {
        n: cfg.n,
        dt: cfg.dt,
        times: traj.iter().map(|(t, _)| *t).collect(),
        mass_drift: dm,
        hamiltonian_drift: dh,
        tol: cfg.tol_report,
        pass: dm <= cfg.tol_report && dh <= 100.0 * cfg.tol_report,
    })
}

/// States at `t_j = j·t/n_saves`, `j = 0..=n_saves`, integrated segment by
/// segment.
pub fn trajectory(u0: &TorusField, cfg: &FlowConfig, t: f64, n_saves: usize) -> Result<Vec<(f64, TorusField)>> {
    let seg = t / n_saves as f64;
    let seg_cfg = FlowConfig { t_end: seg.abs().max(cfg.t_end), ..cfg.clone() };
    let mut stepper = LowModeStepper::new(cfg.n);
    let mut out = vec![(0.0, u0.clone())];
    let mut u = u0.clone();
    for j in 1..=n_saves {
        u = evolve_with(&mut stepper, &u, &seg_cfg, seg)?;
        out.push((j as f64 * seg, u.clone()));
    }
    Ok(out)
}

/// `‖Φ^N(−t)Φ^N(t)u0 − u0‖_{H^σ}`.
pub fn reversibility_check(u0: &TorusField, cfg: &FlowConfig, t: f64, sigma: f64) -> Result<f64> {
    let mut stepper = LowModeStepper::new(cfg.n);
    let fwd = evolve_with(&mut stepper, u0, cfg, t)?;
    let back = evolve_with(&mut stepper, &fwd, cfg, -t)?;
    Ok(back.sub(u0).sobolev_norm(sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationRow {
    pub n: usize,
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationReport {
    pub n_ref: usize,
    pub sigma: f64,
    pub rows: Vec<ApproximationRow>,
    /// Each error is at most 1.1 times its predecessor.
    pub monotone: bool,
}

/// `sup_{t ∈ t_grid} ‖Φ^{N_ref}(t)u0 − Φ^N(t)u0‖_{H^σ}` for each `N`.
pub fn approximation_study(
    u0: &TorusField,
    n_list: &[usize],
    n_ref: usize,
    t_grid: &[f64],
    cfg: &FlowConfig,
    sigma: f64,
) -> Result<ApproximationReport> {
    if n_list.iter().any(|&n| n > n_ref) {
        return Err(LabError::InvalidArgument("every N must be ≤ N_ref".into()));
    }
    let u0 = u0.project_low(n_ref);
    let ref_cfg = cfg.with_n(n_ref);
    let mut reference = Vec::with_capacity(t_grid.len());
    let mut ref_stepper = LowModeStepper::new(n_ref);
    for &t in t_grid {
        reference.push(evolve_with(&mut ref_stepper, &u0, &ref_cfg, t)?);
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let c = cfg.with_n(n);
        let mut st = LowModeStepper::new(n);
        let mut sup: f64 = 0.0;
        for (&t, r) in t_grid.iter().zip(&reference) {
            let u = evolve_with(&mut st, &u0, &c, t)?;
            sup = sup.max(r.sub(&u).sobolev_norm(sigma));
        }
        rows.push(ApproximationRow { n, sup_error: sup });
    }
    let monotone = rows.windows(2).all(|w| w[1].sup_error <= 1.1 * w[0].sup_error);
    Ok(ApproximationReport { n_ref, sigma, rows, monotone })
}

/// Trajectory CSV rows `t,mass,hamiltonian,hs_norm` (no header).
pub fn write_trajectory_rows<W: Write>(
    out: &mut W,
    traj: &[(f64, TorusField)],
    n: usize,
    sigma: f64,
) -> std::io::Result<()> {
    for (t, u) in traj {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e}",
            t,
            u.with_k_max(n).mass(),
            truncated_hamiltonian(u, n),
            u.sobolev_norm(sigma)
        )?;
    }
    Ok(())
}
