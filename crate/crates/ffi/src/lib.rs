//! C ABI for the `sqfree` toolkit.
//!
//! Every fallible function returns an [`SqfStatus`] and writes its result
//! through an out-pointer. On failure, [`sqf_last_error`] returns a message
//! for the calling thread. Tables and profiles are opaque handles released
//! with their `_free` function; strings returned by the library are
//! released with [`sqf_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_traits::ToPrimitive;
use sqfree::arith::{c_constant, euler_phi, sieve_mobius, MobiusTable};
use sqfree::characters::character_variance;
use sqfree::experiments::{sweep, to_csv};
use sqfree::lemmas::{
    congruence_count, count_primitive_solutions, lemma1_bound, m_quantity, m_quantity_f64,
    LinearFormInstance, MAX_EXACT_M_MODULUS,
};
use sqfree::progressions::{
    gamma_report, profile, t_via_convolution, variance, ProgressionProfile, ResidueBijection,
};
use sqfree::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqfStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Capacity = 3,
    Io = 4,
    Format = 5,
    InvalidUtf8 = 6,
    Panic = 7,
}

/// Möbius table handle.
pub struct SqfMobiusTable {
    inner: MobiusTable,
}

/// Residue-class profile handle.
pub struct SqfProfile {
    inner: ProgressionProfile,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SqfVariance {
    pub x: u64,
    pub q: u64,
    pub phi: u64,
    pub total: u64,
    pub c_q: f64,
    pub v: f64,
    pub centered_variance: f64,
    pub t: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SqfGamma {
    pub t: u64,
    pub t_gamma: u64,
    pub v: f64,
    pub v_gamma: f64,
    pub defect: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SqfStatus {
    match e {
        Error::Domain(_) => SqfStatus::Domain,
        Error::Capacity { .. } => SqfStatus::Capacity,
        Error::Io { .. } => SqfStatus::Io,
        Error::Format(_) => SqfStatus::Format,
    }
}

enum Fail {
    Lib(Error),
    Null,
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SqfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqfStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            SqfStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            SqfStatus::InvalidUtf8
        }
        Err(_) => {
            set_error("internal panic".into());
            SqfStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null)
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

fn narrow(v: u128, what: &'static str) -> Result<u64, Fail> {
    u64::try_from(v).map_err(|_| {
        Fail::Lib(Error::Capacity {
            what,
            requested: u64::MAX,
            limit: u64::MAX,
        })
    })
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sqf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn sqf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sqf_euler_phi(q: u64, phi: *mut u64) -> SqfStatus {
    guard(|| {
        *out(phi)? = euler_phi(q)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_c_constant(q: u64, c_q: *mut f64) -> SqfStatus {
    guard(|| {
        *out(c_q)? = c_constant(q)?;
        Ok(())
    })
}

/// Sieves μ on `[1, limit]`.
#[no_mangle]
pub unsafe extern "C" fn sqf_table_new(limit: u64, table: *mut *mut SqfMobiusTable) -> SqfStatus {
    guard(|| {
        let slot = out(table)?;
        let inner = sieve_mobius(limit)?;
        *slot = Box::into_raw(Box::new(SqfMobiusTable { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_table_load(
    path: *const c_char,
    table: *mut *mut SqfMobiusTable,
) -> SqfStatus {
    guard(|| {
        let slot = out(table)?;
        let inner = MobiusTable::load(Path::new(text(path)?))?;
        *slot = Box::into_raw(Box::new(SqfMobiusTable { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_table_save(
    table: *const SqfMobiusTable,
    path: *const c_char,
) -> SqfStatus {
    guard(|| {
        handle(table)?.inner.save(Path::new(text(path)?))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_table_free(table: *mut SqfMobiusTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Largest `n` covered by the table, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sqf_table_limit(table: *const SqfMobiusTable) -> u64 {
    table.as_ref().map_or(0, |t| t.inner.limit())
}

#[no_mangle]
pub unsafe extern "C" fn sqf_table_mu(
    table: *const SqfMobiusTable,
    n: u64,
    mu: *mut i8,
) -> SqfStatus {
    guard(|| {
        let t = &handle(table)?.inner;
        if n == 0 || n > t.limit() {
            return Err(Error::Domain(format!("n = {n} outside [1, {}]", t.limit())).into());
        }
        *out(mu)? = t.mu(n);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_squarefree_count(
    table: *const SqfMobiusTable,
    x: u64,
    count: *mut u64,
) -> SqfStatus {
    guard(|| {
        *out(count)? = handle(table)?.inner.squarefree_count(x)?;
        Ok(())
    })
}

/// Counts `S(x;q,a)` for every unit `a` mod `q`.
#[no_mangle]
pub unsafe extern "C" fn sqf_profile_new(
    table: *const SqfMobiusTable,
    x: u64,
    q: u64,
    prof: *mut *mut SqfProfile,
) -> SqfStatus {
    guard(|| {
        let slot = out(prof)?;
        let inner = profile(&handle(table)?.inner, x, q)?;
        *slot = Box::into_raw(Box::new(SqfProfile { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_profile_free(prof: *mut SqfProfile) {
    if !prof.is_null() {
        drop(Box::from_raw(prof));
    }
}

/// Number of unit residues, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sqf_profile_len(prof: *const SqfProfile) -> usize {
    prof.as_ref().map_or(0, |p| p.inner.counts().len())
}

/// Copies residues and counts, in ascending residue order, into buffers of
/// length `len` (which must equal [`sqf_profile_len`]). Either buffer may
/// be null.
#[no_mangle]
pub unsafe extern "C" fn sqf_profile_counts(
    prof: *const SqfProfile,
    residues: *mut u64,
    counts: *mut u64,
    len: usize,
) -> SqfStatus {
    guard(|| {
        let p = &handle(prof)?.inner;
        if len != p.counts().len() {
            return Err(Error::Domain(format!(
                "buffer length {len}, expected {}",
                p.counts().len()
            ))
            .into());
        }
        if !residues.is_null() {
            std::slice::from_raw_parts_mut(residues, len).copy_from_slice(p.units().elements());
        }
        if !counts.is_null() {
            std::slice::from_raw_parts_mut(counts, len).copy_from_slice(p.counts());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_variance(
    prof: *const SqfProfile,
    report: *mut SqfVariance,
) -> SqfStatus {
    guard(|| {
        let slot = out(report)?;
        let r = variance(&handle(prof)?.inner);
        *slot = SqfVariance {
            x: r.x,
            q: r.q,
            phi: r.phi,
            total: r.total,
            c_q: r.c_q,
            v: r.v,
            centered_variance: r.centered_variance.to_f64(),
            t: narrow(r.t, "T")?,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_t_via_convolution(
    table: *const SqfMobiusTable,
    x: u64,
    q: u64,
    t: *mut u64,
) -> SqfStatus {
    guard(|| {
        let slot = out(t)?;
        *slot = narrow(t_via_convolution(&handle(table)?.inner, x, q)?, "T")?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_character_variance(
    table: *const SqfMobiusTable,
    x: u64,
    q: u64,
    value: *mut f64,
) -> SqfStatus {
    guard(|| {
        let slot = out(value)?;
        *slot = character_variance(&handle(table)?.inner, q, x)?;
        Ok(())
    })
}

/// `gamma` is one of `identity`, `inv`, `mul:c`, `pow:k`, `random`; the
/// seed only matters for `random`.
#[no_mangle]
pub unsafe extern "C" fn sqf_gamma(
    prof: *const SqfProfile,
    gamma: *const c_char,
    seed: u64,
    report: *mut SqfGamma,
) -> SqfStatus {
    guard(|| {
        let slot = out(report)?;
        let g = ResidueBijection::parse(text(gamma)?, seed)?;
        let r = gamma_report(&handle(prof)?.inner, &g)?;
        *slot = SqfGamma {
            t: narrow(r.t, "T")?,
            t_gamma: narrow(r.t_gamma, "T_gamma")?,
            v: r.v,
            v_gamma: r.v_gamma,
            defect: r.defect,
        };
        Ok(())
    })
}

/// Primitive solutions of `w·n = 0` in the box `|nᵢ| ≤ uᵢ`, and the
/// explicit upper bound for that count.
#[no_mangle]
pub unsafe extern "C" fn sqf_lemma1(
    w: *const i64,
    u: *const f64,
    count: *mut u64,
    bound: *mut f64,
) -> SqfStatus {
    guard(|| {
        if w.is_null() || u.is_null() {
            return Err(Fail::Null);
        }
        let w: [i64; 3] = std::slice::from_raw_parts(w, 3).try_into().unwrap();
        let u: [f64; 3] = std::slice::from_raw_parts(u, 3).try_into().unwrap();
        let inst = LinearFormInstance::new(w, u)?;
        let (c, b) = (out(count)?, out(bound)?);
        *c = count_primitive_solutions(&inst)?;
        *b = lemma1_bound(&inst);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqf_lemma2_count(
    v1: f64,
    v2: f64,
    q: u64,
    a1: i64,
    a2: i64,
    count: *mut u64,
) -> SqfStatus {
    guard(|| {
        let slot = out(count)?;
        *slot = congruence_count(v1, v2, q, a1, a2)?.n;
        Ok(())
    })
}

/// `M(q, a1, a2)` as a double; exact rational arithmetic is used up to the
/// library's exact-modulus limit.
#[no_mangle]
pub unsafe extern "C" fn sqf_m_quantity(q: u64, a1: i64, a2: i64, value: *mut f64) -> SqfStatus {
    guard(|| {
        let slot = out(value)?;
        *slot = if q <= MAX_EXACT_M_MODULUS {
            m_quantity(q, a1, a2)?.to_f64().unwrap_or(f64::NAN)
        } else {
            m_quantity_f64(q, a1, a2)?
        };
        Ok(())
    })
}

/// Sweep over `qs[0..n]` at fixed `x`, returned as CSV text. Release the
/// string with [`sqf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sqf_sweep_csv(
    table: *const SqfMobiusTable,
    x: u64,
    qs: *const u64,
    n: usize,
    eps: f64,
    csv: *mut *mut c_char,
) -> SqfStatus {
    guard(|| {
        let slot = out(csv)?;
        *slot = ptr::null_mut();
        let qs = if n == 0 {
            &[][..]
        } else if qs.is_null() {
            return Err(Fail::Null);
        } else {
            std::slice::from_raw_parts(qs, n)
        };
        let rows = sweep(&handle(table)?.inner, x, qs, eps)?;
        *slot = CString::new(to_csv(&rows))
            .expect("csv has no NUL")
            .into_raw();
        Ok(())
    })
}
