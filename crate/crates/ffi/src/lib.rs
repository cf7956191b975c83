//! C ABI over the `nls-lab` kernels.
//!
//! Fields cross the boundary as opaque `NlsField` handles owned by the
//! caller and released with `nls_field_free`. Every function returns an
//! `NlsStatus`; on failure the message is kept per thread and can be copied
//! out with `nls_last_error_message`. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nls_lab::dynamics::{evolve, FlowConfig};
use nls_lab::functionals::{energy_derivative, eval_functional, modified_energy, FunctionalKind};
use nls_lab::resonance::{count_triples_bruteforce, count_triples_divisor, omega, CountQuery, FreqTuple};
use nls_lab::sampler::GaussianEnsemble;
use nls_lab::{Complex64, LabError, SobolevParams, TorusField};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BudgetExceeded = 3,
    IntegratorFailure = 4,
    Panic = 5,
    Internal = 6,
}

/// `M`, `T` or `N` functional.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsFunctional {
    M = 0,
    T = 1,
    N = 2,
}

/// Opaque truncated Fourier field.
pub struct NlsField {
    inner: TorusField,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &LabError) -> NlsStatus {
    match e {
        LabError::InvalidArgument(_) | LabError::Unsupported(_) | LabError::NonFinite(_) => NlsStatus::InvalidArgument,
        LabError::BudgetExceeded { .. } => NlsStatus::BudgetExceeded,
        LabError::StepRejected { .. } => NlsStatus::IntegratorFailure,
        _ => NlsStatus::Internal,
    }
}

struct Fail(NlsStatus, String);

impl From<LabError> for Fail {
    fn from(e: LabError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NlsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any failure and converts panics.
fn guarded(body: impl FnOnce() -> Result<(), Fail>) -> NlsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NlsStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            NlsStatus::Panic
        }
    }
}

unsafe fn field_ref<'a>(f: *const NlsField) -> Result<&'a TorusField, Fail> {
    f.as_ref().map(|f| &f.inner).ok_or_else(|| null("field"))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

fn boxed(u: TorusField) -> *mut NlsField {
    Box::into_raw(Box::new(NlsField { inner: u }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nls_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => panic!("version"),
    };
    V.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns its full length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nls_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Field on `|k| ≤ k_max` from `2·k_max + 1` coefficients ordered
/// `k = −k_max, …, k_max`.
///
/// # Safety
/// `re` and `im` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_new(
    k_max: usize,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut NlsField,
) -> NlsStatus {
    guarded(|| {
        if re.is_null() || im.is_null() {
            return Err(null("coefficient array"));
        }
        if len != 2 * k_max + 1 {
            return Err(Fail(
                NlsStatus::InvalidArgument,
                format!("expected {} coefficients, got {len}", 2 * k_max + 1),
            ));
        }
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let coeffs = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let u = TorusField::from_coeffs(k_max, coeffs)?;
        put(out, boxed(u))
    })
}

/// Sample `index` of the Gaussian ensemble at regularity `s`, with
/// `σ = s − ½ − delta`, modes `|k| ≤ k_cut` and the given seed.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_sample(
    s: f64,
    delta: f64,
    k_cut: usize,
    seed: u64,
    index: usize,
    out: *mut *mut NlsField,
) -> NlsStatus {
    guarded(|| {
        let e = GaussianEnsemble::new(SobolevParams::with_gap(s, delta)?, k_cut, seed, index + 1)?;
        put(out, boxed(e.sample(index)))
    })
}

/// Releases a field; null is ignored.
///
/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nls_field_free(f: *mut NlsField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_k_max(f: *const NlsField, out: *mut usize) -> NlsStatus {
    guarded(|| put(out, field_ref(f)?.k_max()))
}

/// Copies the `2·k_max + 1` coefficients out.
///
/// # Safety
/// `f` must be a live handle, `re` and `im` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nls_field_coeffs(f: *const NlsField, re: *mut f64, im: *mut f64, len: usize) -> NlsStatus {
    guarded(|| {
        let u = field_ref(f)?;
        if re.is_null() || im.is_null() {
            return Err(null("coefficient buffer"));
        }
        let c = u.coeffs();
        if len < c.len() {
            return Err(Fail(NlsStatus::InvalidArgument, format!("buffer holds {len}, need {}", c.len())));
        }
        for (i, z) in c.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// `M(u) = ∫|u|²`.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_mass(f: *const NlsField, out: *mut f64) -> NlsStatus {
    guarded(|| put(out, field_ref(f)?.mass()))
}

/// `H(u) = ½∫|∂ₓu|² + ⅙∫|u|⁶`.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_hamiltonian(f: *const NlsField, out: *mut f64) -> NlsStatus {
    guarded(|| put(out, field_ref(f)?.hamiltonian()))
}

/// `‖u‖_{H^σ}`.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_field_sobolev_norm(f: *const NlsField, sigma: f64, out: *mut f64) -> NlsStatus {
    guarded(|| put(out, field_ref(f)?.sobolev_norm(sigma)))
}

/// `Φ^N(t) u` with nominal step `dt`; the result is a new handle.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_evolve(
    f: *const NlsField,
    n: usize,
    dt: f64,
    t: f64,
    out: *mut *mut NlsField,
) -> NlsStatus {
    guarded(|| {
        let u = field_ref(f)?;
        let cfg = FlowConfig::new(n, dt, t.abs())?;
        put(out, boxed(evolve(u, &cfg, t)?))
    })
}

/// Value of the `M`, `T` or `N` functional at truncation `n`.
///
/// # Safety
/// `f` must be a live handle, `re` and `im` valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn nls_functional(
    f: *const NlsField,
    kind: NlsFunctional,
    s: f64,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> NlsStatus {
    guarded(|| {
        let u = field_ref(f)?;
        let k = match kind {
            NlsFunctional::M => FunctionalKind::M,
            NlsFunctional::T => FunctionalKind::T,
            NlsFunctional::N => FunctionalKind::Ncal,
        };
        let v = eval_functional(k, u, s, n)?;
        put(re, v.re)?;
        put(im, v.im)
    })
}

/// `E_{s,N}(u)`.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_modified_energy(f: *const NlsField, s: f64, n: usize, out: *mut f64) -> NlsStatus {
    guarded(|| put(out, modified_energy(field_ref(f)?, s, n)?))
}

/// `Q_{s,N}(u)`, the time derivative of `E_{s,N}` along the flow.
///
/// # Safety
/// `f` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_energy_derivative(f: *const NlsField, s: f64, n: usize, out: *mut f64) -> NlsStatus {
    guarded(|| put(out, energy_derivative(field_ref(f)?, s, n)?))
}

/// Resonance function of an alternating tuple of length 4 or 6.
///
/// # Safety
/// `ks` must be valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_omega(ks: *const i64, len: usize, out: *mut i64) -> NlsStatus {
    guarded(|| {
        if ks.is_null() {
            return Err(null("frequency array"));
        }
        let t = FreqTuple::new(std::slice::from_raw_parts(ks, len))?;
        put(out, omega(&t))
    })
}

/// Number of `(k1, k2, k3)` with `|k_j| ≤ bound`, `k1 − k2 + k3 = l` and
/// `k1² − k2² + k3² = q`. With pairings excluded the divisor route is used.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nls_count_triples(
    l: i64,
    q: i64,
    bound: u64,
    exclude_pairings: bool,
    out: *mut u64,
) -> NlsStatus {
    guarded(|| {
        let query = CountQuery::alternating(l, q, bound, exclude_pairings);
        let n = if exclude_pairings { count_triples_divisor(&query)? } else { count_triples_bruteforce(&query)? };
        put(out, n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panic_is_contained() {
        let st = guarded(|| panic!("boom"));
        assert_eq!(st, NlsStatus::Panic);
        let mut buf = [0 as c_char; 32];
        let n = unsafe { nls_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, "panic: boom".len());
    }
}
