//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Criteria listed in `KNOWN_RED` are reported but do not fail the run; the
//! reasons are recorded alongside the project's decision notes.

use std::time::Instant;

use nls_lab::dynamics::{conservation_report, evolve, evolve_low, linear_phase, FlowConfig};
use nls_lab::estimates::{
    levelset_sweep, localized_exponent, probe_dyadic_estimates, probe_localized_quintic, SweepSpec,
};
use nls_lab::functionals::{
    default_h_list, eval_dyadic_block, eval_functional, eval_functional_with, split_pairing, sum_dyadic_blocks,
    verify_ftc_identity, verify_poincare_dulac, DyadicBlockSpec, EvalOptions, FunctionalKind,
};
use nls_lab::report::{body_of, write_records, Format, Header};
use nls_lab::resonance::{
    count_triples_bruteforce, count_triples_divisor, scan_factorization, scan_lower_bound_four, scan_lower_bound_six,
    CountQuery, Enumeration, LowerBoundScan, PsiKind, Signature,
};
use nls_lab::sampler::{linear_invariance_check, GaussianEnsemble};
use nls_lab::stats::loglog_slope;
use nls_lab::transport::{
    probe_exponential_integrability, probe_quantitative_inequality, probe_square_root_cancellation, transport_cell,
    CoeffSpec, CylinderBall, CylinderTestFn, DEFAULT_DICTIONARY_SIZE,
};
use nls_lab::{Complex64, SobolevParams, TorusField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Criteria expected to stay red.
const KNOWN_RED: &[u32] = &[7, 9];

const DELTA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_field(k_max: usize, r: &mut ChaCha8Rng) -> TorusField {
    let coeffs =
        (0..2 * k_max + 1).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
    TorusField::from_coeffs(k_max, coeffs).unwrap()
}

fn sorted_abs(ks: &[i64]) -> Vec<u64> {
    let mut a: Vec<u64> = ks.iter().map(|k| k.unsigned_abs()).collect();
    a.sort_unstable_by(|x, y| y.cmp(x));
    a
}

fn omega_of(ks: &[i64]) -> i64 {
    ks.iter().enumerate().map(|(j, k)| if j % 2 == 0 { k * k } else { -k * k }).sum()
}

// ---------------------------------------------------------------------------
// 1

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let rep = scan_factorization(40);
    let secs = t0.elapsed().as_secs_f64();
    // independent: Ω↓ = 2(k1 − k2)(k1 − k4) once k3 is eliminated
    let (mut checked, mut bad) = (0u64, 0u64);
    for k1 in -40i64..=40 {
        for k2 in -40i64..=40 {
            for k4 in -40i64..=40 {
                let k3 = k2 + k4 - k1;
                if k3.abs() > 40 {
                    continue;
                }
                checked += 1;
                if omega_of(&[k1, k2, k3, k4]) != 2 * (k1 - k2) * (k1 - k4) {
                    bad += 1;
                }
            }
        }
    }
    let pass = rep.violations == 0 && bad == 0 && rep.checked == checked && secs < 10.0;
    outcome(
        pass,
        format!("{} tuples, {} violations (oracle {checked}, {bad}), {secs:.2}s", rep.checked, rep.violations),
    )
}

// ---------------------------------------------------------------------------
// 2

fn filtered(ks: &[i64]) -> Option<(u64, u64)> {
    if ks.iter().all(|&k| k == 0)
        || ks.iter().enumerate().map(|(j, k)| if j % 2 == 0 { *k } else { -k }).sum::<i64>() != 0
    {
        return None;
    }
    let a = sorted_abs(ks);
    (a[2] > 0 && 10 * a[3] <= a[2]).then_some((a[0], a[2]))
}

/// Exact minimum fraction over every tuple of the given arity.
fn brute_min(arity: usize, bound: i64) -> Option<(u64, u64)> {
    let mut best: Option<(u64, u64)> = None;
    let free = arity - 1;
    let width = (2 * bound + 1) as usize;
    for code in 0..width.pow(free as u32) {
        let mut c = code;
        let mut ks: Vec<i64> = (0..free)
            .map(|_| {
                let k = (c % width) as i64 - bound;
                c /= width;
                k
            })
            .collect();
        // last slot carries a minus sign
        let last: i64 = ks.iter().enumerate().map(|(j, k)| if j % 2 == 0 { *k } else { -k }).sum();
        if last.abs() > bound {
            continue;
        }
        ks.push(last);
        if let Some((a1, a3)) = filtered(&ks) {
            let om = omega_of(&ks).unsigned_abs();
            let den = a1 * a3;
            if best.is_none_or(|(n, d)| (om as u128) * (d as u128) < (n as u128) * (den as u128)) {
                best = Some((om, den));
            }
        }
    }
    best
}

fn same_fraction(a: Option<(u64, u64)>, b: Option<(u64, u64)>) -> bool {
    match (a, b) {
        (Some((n1, d1)), Some((n2, d2))) => n1 as u128 * d2 as u128 == n2 as u128 * d1 as u128,
        (None, None) => true,
        _ => false,
    }
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let six = scan_lower_bound_six(30, Enumeration::Canonical);
    let four = scan_lower_bound_four(30);
    let secs = t0.elapsed().as_secs_f64();
    let ok = |r: &LowerBoundScan| r.violations == 0 && r.min_ratio().is_some_and(|m| m >= 0.1);
    // oracles: exhaustive four-tuples at the full bound, six-tuples at 12
    let four_oracle = same_fraction(brute_min(4, 30), four.min_fraction);
    let six_oracle = same_fraction(brute_min(6, 12), scan_lower_bound_six(12, Enumeration::Canonical).min_fraction);
    let pass = ok(&six) && ok(&four) && four_oracle && six_oracle && secs < 300.0;
    outcome(
        pass,
        format!(
            "min six {:.4} at {:?} ({} filtered), min four {:.4} at {:?} ({} filtered), oracle agreement {}/{}, {secs:.2}s",
            six.min_ratio().unwrap_or(f64::NAN),
            six.min_tuple.unwrap_or_default(),
            six.filtered,
            four.min_ratio().unwrap_or(f64::NAN),
            four.min_tuple.unwrap_or_default(),
            four.filtered,
            four_oracle,
            six_oracle
        ),
    )
}

// ---------------------------------------------------------------------------
// 3

fn naive_triples(l: i64, q: i64, b: [u64; 3], exclude_pairings: bool) -> u64 {
    let b = b.map(|x| x as i64);
    let mut n = 0;
    for k1 in -b[0]..=b[0] {
        for k2 in -b[1]..=b[1] {
            let k3 = l - k1 + k2;
            if k3.abs() > b[2] || k1 * k1 - k2 * k2 + k3 * k3 != q {
                continue;
            }
            if exclude_pairings && (k2 == k1 || k2 == k3) {
                continue;
            }
            n += 1;
        }
    }
    n
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut mismatches = 0;
    let mut nonzero = 0;
    for i in 0..1000 {
        let bounds: [u64; 3] = std::array::from_fn(|_| r.random_range(1..=32));
        let (l, q) = if i % 2 == 0 {
            // a query with at least one solution candidate
            let k: [i64; 3] = std::array::from_fn(|j| r.random_range(-(bounds[j] as i64)..=bounds[j] as i64));
            (k[0] - k[1] + k[2], k[0] * k[0] - k[1] * k[1] + k[2] * k[2])
        } else {
            (r.random_range(-96..=96), r.random_range(-1024..=3072))
        };
        let query = CountQuery { l, q, bounds, signature: Signature::Alternating, exclude_pairings: true };
        let d = count_triples_divisor(&query).unwrap();
        let b = count_triples_bruteforce(&query).unwrap();
        if d != b {
            mismatches += 1;
        }
        if b > 0 {
            nonzero += 1;
        }
    }
    let fixed = [
        (CountQuery::alternating(0, 0, 2, true), 0u64, true),
        (CountQuery::alternating(0, 0, 2, false), 9, false),
        (CountQuery::alternating(0, -8, 8, true), 6, true),
        (CountQuery::alternating(1, 1, 1, true), 0, true),
    ];
    let mut fixed_ok = 0;
    for (q, want, divisor_applies) in &fixed {
        let brute = count_triples_bruteforce(q).unwrap();
        let naive = naive_triples(q.l, q.q, q.bounds, q.exclude_pairings);
        let div_ok = !divisor_applies || count_triples_divisor(q).unwrap() == *want;
        if brute == *want && naive == *want && div_ok {
            fixed_ok += 1;
        }
    }
    let pass = mismatches == 0 && fixed_ok == fixed.len();
    outcome(
        pass,
        format!(
            "{mismatches} mismatches over 1000 random queries ({nonzero} non-zero), fixed examples {fixed_ok}/{}",
            fixed.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4

fn observed_order(u0: &TorusField, n: usize, t: f64, exact: Option<&dyn Fn() -> Vec<Complex64>>) -> f64 {
    let base = FlowConfig { monitor_every: 0, ..FlowConfig::new(n, 0.1, t).unwrap() };
    let w0 = u0.with_k_max(n);
    let reference = match exact {
        Some(f) => f(),
        None => evolve_low(w0.coeffs(), &base.with_dt(0.1 / 512.0), t).unwrap(),
    };
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let w = evolve_low(w0.coeffs(), &base.with_dt(dt), t).unwrap();
            w.iter().zip(&reference).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect();
    loglog_slope(&dts, &errs)
}

fn criterion_4() -> Outcome {
    let params = SobolevParams::with_gap(1.2, DELTA).unwrap();
    let mut worst_mass: f64 = 0.0;
    let mut worst_ham: f64 = 0.0;
    let mut failures = 0;
    for n in [8usize, 16, 32] {
        let e = GaussianEnsemble::for_truncation(params, n, 4, 20).unwrap();
        let cfg = FlowConfig::new(n, 1e-3, 1.0).unwrap();
        for i in 0..20 {
            match conservation_report(&e.sample(i), &cfg, 10) {
                Ok(r) => {
                    worst_mass = worst_mass.max(r.mass_drift);
                    worst_ham = worst_ham.max(r.hamiltonian_drift);
                }
                Err(_) => failures += 1,
            }
        }
    }
    let conservation = failures == 0 && worst_mass <= 1e-8 && worst_ham <= 1e-6;

    // a single mode solves i a' = (k² + |a|⁴) a exactly
    let a = Complex64::new(0.9, 0.5);
    let k = 2i64;
    let single = TorusField::single_mode(k, a).with_k_max(3);
    let t = 2.0;
    let exact = || {
        let mut w = vec![Complex64::new(0.0, 0.0); 7];
        w[(k + 3) as usize] = a * Complex64::from_polar(1.0, -((k * k) as f64 + a.norm_sqr().powi(2)) * t);
        w
    };
    let p1 = observed_order(&single, 3, t, Some(&exact));
    let mut two = TorusField::zeros(3);
    two.set(1, Complex64::new(0.8, 0.1));
    two.set(-2, Complex64::new(0.3, -0.6));
    let p2 = observed_order(&two, 3, t, None);
    let order_ok = (p1 - 4.0).abs() <= 0.3 && (p2 - 4.0).abs() <= 0.3;

    // modes above N only pick up e^{−ik²t}
    let mut r = rng(44);
    let u = random_field(24, &mut r);
    let n = 6;
    let t = 0.7;
    let out = evolve(&u, &FlowConfig::new(n, 1e-3, t).unwrap(), t).unwrap();
    let mut high_err: f64 = 0.0;
    for (k, c) in u.iter() {
        if k.unsigned_abs() as usize > n {
            let theta = -((k * k) as f64) * t;
            let want = c * Complex64::new(theta.cos(), theta.sin());
            high_err = high_err.max((out.get(k) - want).norm() / c.norm());
        }
    }
    let phase_ok = high_err <= 4.0 * f64::EPSILON && linear_phase(3, 0.0) == Complex64::new(1.0, 0.0);

    outcome(
        conservation && order_ok && phase_ok,
        format!(
            "mass drift {worst_mass:.2e}, H drift {worst_ham:.2e} ({failures} rejected) over 60 runs; order {p1:.3} (one mode), {p2:.3} (two modes); high-mode error {high_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5, 6

const GRID_S: [f64; 3] = [0.95, 1.2, 2.0];
const GRID_N: [usize; 3] = [2, 4, 8];

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let (mut passed, mut total, mut rounding) = (0, 0, 0);
    let mut worst_order_dev: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for &s in &GRID_S {
        for &n in &GRID_N {
            let e = GaussianEnsemble::for_truncation(SobolevParams::with_gap(s, DELTA).unwrap(), n, 5, 10).unwrap();
            let cfg = FlowConfig::new(n, 1e-3, 1.0).unwrap();
            for i in 0..10 {
                let u = e.sample(i);
                total += 1;
                let Ok(r) = verify_poincare_dulac(&u, s, n, &default_h_list(&u, n), &cfg) else { continue };
                match r.order {
                    Some(p) => worst_order_dev = worst_order_dev.max((p - 2.0).abs()),
                    None => rounding += 1,
                }
                worst_rel = worst_rel.max((r.limit - r.q).abs() / (1.0 + r.q.abs()));
                if r.pass {
                    passed += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        passed == total && worst_order_dev <= 0.3 && worst_rel <= 1e-6,
        format!(
            "{passed}/{total} pass; worst |order − 2| {worst_order_dev:.3} ({rounding} at rounding level), worst |limit − Q|/(1+|Q|) {worst_rel:.1e}, {secs:.0}s"
        ),
    )
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let (mut passed, mut total) = (0, 0);
    let mut worst: f64 = 0.0;
    let t = 0.25;
    for &s in &GRID_S {
        for &n in &GRID_N {
            let e = GaussianEnsemble::for_truncation(SobolevParams::with_gap(s, DELTA).unwrap(), n, 6, 10).unwrap();
            let cfg = FlowConfig::new(n, 1e-3, 1.0).unwrap();
            for i in 0..10 {
                total += 1;
                let Ok(r) = verify_ftc_identity(&e.sample(i), s, n, t, &cfg) else { continue };
                worst = worst.max((r.lhs - r.rhs).abs() / (1.0 + r.lhs.abs()));
                if r.pass {
                    passed += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        passed == total && worst <= 1e-6,
        format!("{passed}/{total} pass at t = {t}; worst |ΔE − ∫Q|/(1+|ΔE|) {worst:.1e}, {secs:.0}s"),
    )
}

// ---------------------------------------------------------------------------
// 7

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut cells_ok = 0;
    let mut lines = Vec::new();
    let mut all_ok = true;
    for &s in &[0.95, 1.2] {
        for &n in &[4usize, 8] {
            for &t in &[0.25, 0.5] {
                let c0 = Instant::now();
                let e =
                    GaussianEnsemble::for_truncation(SobolevParams::with_gap(s, DELTA).unwrap(), n, 7, 10_000).unwrap();
                let cfg = FlowConfig { monitor_tol: 1e-8, ..FlowConfig::new(n, 1e-3, t).unwrap() };
                let fs = CylinderTestFn::dictionary(n, DEFAULT_DICTIONARY_SIZE);
                let cell = match transport_cell(&fs, s, t, &e, &cfg, true) {
                    Ok(c) => c,
                    Err(err) => {
                        all_ok = false;
                        lines.push(format!("s={s} N={n} t={t}: error {err}"));
                        continue;
                    }
                };
                let mu_ok = cell.mu.iter().filter(|r| r.pass).count();
                let rho_ok = cell.rho.iter().filter(|r| r.pass).count();
                let md = &cell.mean_density;
                let ok = mu_ok == cell.mu.len() && rho_ok == cell.rho.len() && md.pass;
                all_ok &= ok;
                cells_ok += ok as usize;
                let line = format!(
                    "s={s} N={n} t={t}: μ {mu_ok}/{}, ρ {rho_ok}/{}, E[G] = {:.3} ± {:.3} (z {:.1}), {} rejected, {:.0}s",
                    cell.mu.len(),
                    cell.rho.len(),
                    md.lhs.re,
                    md.se_lhs,
                    md.z_score(),
                    md.failed_samples,
                    c0.elapsed().as_secs_f64()
                );
                println!("    criterion 7 cell  {line}");
                lines.push(line);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(all_ok, format!("{cells_ok}/8 cells pass, {secs:.0}s"))
}

// ---------------------------------------------------------------------------
// 8

fn bracket_weight(k: i64, s: f64) -> f64 {
    (1.0 + (k * k) as f64).powf(s)
}

/// `π_N(|π_N u|⁴ π_N u)` by direct convolution.
fn naive_fn(u: &TorusField, n: usize) -> TorusField {
    let ni = n as i64;
    let v = u.with_k_max(n);
    let mut out = TorusField::zeros(n);
    for k in -ni..=ni {
        let mut acc = Complex64::new(0.0, 0.0);
        for k1 in -ni..=ni {
            for k2 in -ni..=ni {
                for k3 in -ni..=ni {
                    for k4 in -ni..=ni {
                        let k5 = k - k1 + k2 - k3 + k4;
                        if k5.abs() <= ni {
                            acc += v.get(k1) * v.get(k2).conj() * v.get(k3) * v.get(k4).conj() * v.get(k5);
                        }
                    }
                }
            }
        }
        out.set(k, acc);
    }
    out
}

/// Plain six-fold loop over `[−N, N]^6` with the constraint tested.
fn naive_functional(kind: FunctionalKind, u: &TorusField, s: f64, n: usize) -> Complex64 {
    let ni = n as i64;
    let v = u.with_k_max(n);
    let g = match kind {
        FunctionalKind::Ncal => naive_fn(u, n),
        _ => v.clone(),
    };
    let mut acc = Complex64::new(0.0, 0.0);
    let r = || -ni..=ni;
    for k1 in r() {
        for k2 in r() {
            for k3 in r() {
                for k4 in r() {
                    for k5 in r() {
                        for k6 in r() {
                            if k1 - k2 + k3 - k4 + k5 - k6 != 0 {
                                continue;
                            }
                            let ks = [k1, k2, k3, k4, k5, k6];
                            let om = omega_of(&ks);
                            let psi: f64 = ks
                                .iter()
                                .enumerate()
                                .map(|(j, &k)| if j % 2 == 0 { bracket_weight(k, s) } else { -bracket_weight(k, s) })
                                .sum();
                            let w = match kind {
                                FunctionalKind::M if om == 0 => psi,
                                FunctionalKind::T | FunctionalKind::Ncal if om != 0 => psi / om as f64,
                                _ => continue,
                            };
                            acc += g.get(k1)
                                * v.get(k2).conj()
                                * v.get(k3)
                                * v.get(k4).conj()
                                * v.get(k5)
                                * v.get(k6).conj()
                                * w;
                        }
                    }
                }
            }
        }
    }
    acc
}

/// Relative error, with exact zeros compared against the term scale.
fn rel(a: Complex64, b: Complex64, scale: f64) -> f64 {
    let d = (a - b).norm();
    if b.norm() > 1e-8 * scale {
        d / b.norm()
    } else {
        d / scale.max(f64::MIN_POSITIVE)
    }
}

fn criterion_8() -> Outcome {
    let kinds = [FunctionalKind::M, FunctionalKind::T, FunctionalKind::Ncal];
    let mut r = rng(8);
    let mut worst_naive: f64 = 0.0;
    for i in 0..50 {
        let n = 1 + i % 3;
        let s = GRID_S[i % 3];
        let u = random_field(n + 2, &mut r);
        for kind in kinds {
            let fast = eval_functional_with(kind, &u, s, n, &EvalOptions::default()).unwrap();
            let slow = naive_functional(kind, &u, s, n);
            worst_naive = worst_naive.max(rel(fast.value, slow, fast.abs_sum));
        }
    }

    let mut worst_dyadic: f64 = 0.0;
    for _ in 0..3 {
        let u = random_field(6, &mut r);
        for kind in kinds {
            let whole = eval_functional_with(kind, &u, 1.2, 4, &EvalOptions::default()).unwrap();
            let blocks = sum_dyadic_blocks(kind, &u, 1.2, 4).unwrap();
            worst_dyadic = worst_dyadic.max(rel(blocks, whole.value, whole.abs_sum));
        }
    }

    let mut worst_split: f64 = 0.0;
    let mut worst_degenerate: f64 = 0.0;
    let level_sets: [[u64; 6]; 4] = [[4, 4, 4, 4, 4, 4], [2, 4, 4, 2, 1, 4], [4, 2, 2, 4, 4, 1], [1, 1, 2, 2, 4, 4]];
    for (j, levels) in level_sets.iter().enumerate() {
        let u = random_field(5, &mut r);
        for kind in kinds {
            let spec = DyadicBlockSpec { kind, s: GRID_S[j % 3], n: 4, levels: *levels };
            let block = eval_dyadic_block(&spec, &u).unwrap();
            let split = split_pairing(&spec, &u).unwrap();
            let scale = block.norm().max(split.pairing.norm()).max(split.non_pairing.norm()).max(1e-300);
            worst_split = worst_split.max((split.non_pairing + split.pairing - block).norm() / scale);
            worst_degenerate = worst_degenerate.max((split.pairing - split.pairing_degenerate).norm() / scale);
        }
    }
    let pass = worst_naive <= 1e-10 && worst_dyadic <= 1e-10 && worst_split <= 1e-10 && worst_degenerate <= 1e-10;
    outcome(
        pass,
        format!(
            "naive oracle {worst_naive:.1e} (150 evaluations), dyadic recombination {worst_dyadic:.1e}, pairing split {worst_split:.1e}, degenerate route {worst_degenerate:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 9

fn criterion_9() -> Outcome {
    let t0 = Instant::now();
    let n1 = [4u64, 8, 16, 32, 64, 128];
    let mut parts = Vec::new();
    let mut localized_ok = true;
    for s in [1.2, 2.0] {
        let params = SobolevParams::with_gap(s, DELTA).unwrap();
        let e = GaussianEnsemble::new(params, 128, 9, 200).unwrap();
        let rep = probe_localized_quintic(s, params.sigma, 5.0, &n1, &e).unwrap();
        localized_ok &= rep.pass;
        parts.push(format!(
            "localized s={s}: slope {:.3} vs n_s + 0.15 = {:.2} ({} in ball)",
            rep.slope.unwrap_or(f64::NAN),
            localized_exponent(s) + 0.15,
            rep.in_ball
        ));
    }

    let levels = [1u64, 2, 4, 8, 16, 32, 64];
    let mut zero_ok = true;
    for arity in [6, 4] {
        let spec = SweepSpec::uniform(1.2, PsiKind::Resonant, arity, &levels, 1, 9);
        let rep = probe_dyadic_estimates(&spec, true).unwrap();
        zero_ok &= rep.all_zero && !rep.rows.is_empty();
        parts.push(format!("refined resonant arity {arity}: {} cells, all zero {}", rep.rows.len(), rep.all_zero));
    }

    let mut growth_ok = true;
    for arity in [6, 4] {
        let spec = SweepSpec::uniform(1.2, PsiKind::Nonresonant, arity, &levels, 4, 9);
        let rep = probe_dyadic_estimates(&spec, false).unwrap();
        growth_ok &= rep.pass;
        parts.push(format!(
            "dyadic ratio arity {arity}: growth exponent {:.3}, max ratio {:.2}",
            rep.slope.unwrap_or(f64::NAN),
            rep.max_ratio
        ));
    }
    let sweep = levelset_sweep(6, &levels, 0, 4, 9).unwrap();
    growth_ok &= sweep.pass;
    parts.push(format!("level-set growth exponent {:.3}", sweep.slope.unwrap_or(f64::NAN)));

    parts.push(format!("{:.0}s", t0.elapsed().as_secs_f64()));
    outcome(localized_ok && zero_ok && growth_ok, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 10

fn val<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap()
}

/// Every suite at reduced size, serialised through the report writer.
fn suite_bodies() -> Vec<(String, String)> {
    let params = SobolevParams::with_gap(1.2, DELTA).unwrap();
    let e4 = GaussianEnsemble::for_truncation(params, 4, 10, 300).unwrap();
    let cfg = FlowConfig { monitor_tol: 1e-8, ..FlowConfig::new(4, 1e-3, 1.0).unwrap() };
    let u = e4.sample(0);
    let mut out: Vec<(&str, Vec<Value>)> = Vec::new();

    out.push(("sample", e4.samples().iter().take(20).map(|f| val(&f.to_json())).collect()));
    out.push((
        "conservation",
        vec![val(&conservation_report(&u, &FlowConfig::new(8, 1e-3, 0.5).unwrap(), 5).unwrap())],
    ));
    out.push((
        "functional",
        [FunctionalKind::M, FunctionalKind::T, FunctionalKind::Ncal]
            .iter()
            .map(|&k| val(&eval_functional(k, &u, 1.2, 4).unwrap()))
            .collect(),
    ));
    out.push(("poincare-dulac", vec![val(&verify_poincare_dulac(&u, 1.2, 4, &default_h_list(&u, 4), &cfg).unwrap())]));
    out.push(("ftc", vec![val(&verify_ftc_identity(&e4.sample(1), 1.2, 2, 0.1, &cfg.with_n(2)).unwrap())]));
    let fs = CylinderTestFn::dictionary(4, 4);
    let small = GaussianEnsemble::for_truncation(params, 4, 10, 200).unwrap();
    out.push(("transport", vec![val(&transport_cell(&fs, 1.2, 0.25, &small, &cfg, true).unwrap())]));
    out.push(("linear-invariance", vec![val(&linear_invariance_check(&e4, 4, 0.3))]));
    let spec = CoeffSpec::random_sparse(vec![1, -1, 1], 6, 10, 10).unwrap();
    let e6 = GaussianEnsemble::new(params, 6, 10, 2000).unwrap();
    out.push(("sqrt-cancel", vec![val(&probe_square_root_cancellation(&spec, &e6).unwrap())]));
    out.push((
        "exp-integrability",
        vec![val(&probe_exponential_integrability(FunctionalKind::T, 1.2, 4, 5.0, &[0.0, 0.5, 1.0], &small).unwrap())],
    ));
    let ball = CylinderBall { center: TorusField::zeros(4), k0: 4, sigma: params.sigma, radius: 1.0 };
    out.push((
        "quantitative",
        vec![val(&probe_quantitative_inequality(1.2, 0.25, &ball, &[0.5, 1.0, 2.0], &small, &cfg).unwrap())],
    ));
    let e32 = GaussianEnsemble::new(params, 32, 10, 40).unwrap();
    out.push((
        "localized",
        vec![val(&probe_localized_quintic(1.2, params.sigma, 5.0, &[4, 8, 16, 32], &e32).unwrap())],
    ));
    out.push(("levelset", vec![val(&levelset_sweep(6, &[1, 2, 4, 8], 0, 2, 10).unwrap())]));
    let sweep = SweepSpec::uniform(1.2, PsiKind::Nonresonant, 6, &[1, 2, 4, 8], 2, 10);
    out.push(("dyadic", vec![val(&probe_dyadic_estimates(&sweep, false).unwrap())]));
    out.push(("scan", vec![val(&scan_factorization(16)), val(&scan_lower_bound_six(10, Enumeration::Canonical))]));

    out.into_iter()
        .map(|(name, recs)| {
            let header = Header::new(name, &json!({ "suite": name })).unwrap();
            let mut buf = Vec::new();
            write_records(&mut buf, Format::Json, &header, &recs).unwrap();
            (name.to_string(), body_of(&String::from_utf8(buf).unwrap()))
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let t0 = Instant::now();
    let runs: Vec<(usize, Vec<(String, String)>)> = [1usize, 4, 8]
        .iter()
        .map(|&w| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
            (w, pool.install(suite_bodies))
        })
        .collect();
    let reference = &runs[0].1;
    let mut differing = Vec::new();
    for (w, bodies) in &runs[1..] {
        for ((name, a), (_, b)) in reference.iter().zip(bodies) {
            if a != b {
                differing.push(format!("{name}@{w}"));
            }
        }
    }
    // a second run on one worker replays the first
    let again = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(suite_bodies);
    let replay_ok = &again == reference;
    outcome(
        differing.is_empty() && replay_ok,
        format!(
            "{} suites under 1/4/8 workers, differing: [{}], replay identical {replay_ok}, {:.0}s",
            reference.len(),
            differing.join(", "),
            t0.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test -- --list` and friends only expect a quiet exit
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "factorization scan", criterion_1),
        (2, "resonance lower bound", criterion_2),
        (3, "counting oracle", criterion_3),
        (4, "integrator", criterion_4),
        (5, "Poincaré–Dulac derivative", criterion_5),
        (6, "energy increment identity", criterion_6),
        (7, "transport identities", criterion_7),
        (8, "functional oracle", criterion_8),
        (9, "estimate probes", criterion_9),
        (10, "determinism", criterion_10),
    ];
    // ACCEPTANCE_ONLY=1,4,8 runs a subset
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_RED.contains(&id) { " (known red)" } else { "" };
        println!("criterion {id:>2} {tag}{note}  {name}: {}", o.detail);
        if !o.pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
