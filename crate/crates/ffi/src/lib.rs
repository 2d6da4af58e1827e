//! C ABI over the multifract pipeline.
//!
//! Every object crosses the boundary as an opaque handle created by an
//! `mf_*_new`/`mf_*_build` call and released by the matching `mf_*_free`.
//! Functions return [`MfStatus`]; on any non-`Ok` status a human-readable
//! message is available from [`mf_last_error_message`] until the next call
//! on the same thread. Pointers must never be shared across frees.
//!
//! Safety contract for every `unsafe extern "C"` function here: handle
//! arguments must be pointers returned by the matching constructor and not
//! yet freed; string arguments must be valid NUL-terminated C strings; out
//! parameters must point to writable memory of the right type.

#![allow(clippy::missing_safety_doc)]

use multifract::hofbauer::{build_tower_with, TowerGraph};
use multifract::inducing::{build_scheme_type_a, build_scheme_type_b, scheme_candidates, InducingScheme};
use multifract::map_model::{IntervalMap, Potential};
use multifract::thermo::{cylinder_interval, tq_curve, SolveConfig, TqCurve, WordTable};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidConfig = 2,
    Convergence = 3,
    Divergence = 4,
    Runtime = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &multifract::Error) -> MfStatus {
    match err.exit_code() {
        2 => MfStatus::InvalidConfig,
        3 => MfStatus::Convergence,
        4 => MfStatus::Divergence,
        _ => MfStatus::Runtime,
    }
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Opaque interval map.
pub struct MfMap {
    map: IntervalMap,
}

/// Opaque potential.
pub struct MfPotential {
    potential: Potential,
}

/// Opaque truncated extension.
pub struct MfTower {
    tower: TowerGraph,
}

/// Opaque inducing scheme.
pub struct MfScheme {
    scheme: InducingScheme,
}

/// Opaque sampled temperature curve.
pub struct MfTqCurve {
    curve: TqCurve,
}

/// Build a map from its JSON descriptor, e.g.
/// `{"family":"quadratic","lambda":3.9}`. Returns null on error.
#[no_mangle]
pub unsafe extern "C" fn mf_map_new_json(json: *const c_char) -> *mut MfMap {
    let Some(text) = cstr_arg(json) else {
        set_error("map descriptor is null or not UTF-8");
        return ptr::null_mut();
    };
    let spec: Result<multifract::config::MapSpec, _> = serde_json::from_str(text);
    match spec.map_err(multifract::Error::from).and_then(|s| s.build()) {
        Ok(map) => Box::into_raw(Box::new(MfMap { map })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `map` must come from `mf_map_new_json` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mf_map_free(map: *mut MfMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// `f(x)` through the C boundary.
#[no_mangle]
pub unsafe extern "C" fn mf_map_eval(map: *const MfMap, x: f64, out: *mut f64) -> MfStatus {
    if map.is_null() || out.is_null() {
        set_error("null argument to mf_map_eval");
        return MfStatus::NullArgument;
    }
    match (*map).map.eval(x) {
        Ok(v) => {
            *out = v;
            MfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Topological entropy estimate from lap-count growth.
#[no_mangle]
pub unsafe extern "C" fn mf_map_entropy(map: *const MfMap, n_max: usize, out: *mut f64) -> MfStatus {
    if map.is_null() || out.is_null() {
        set_error("null argument to mf_map_entropy");
        return MfStatus::NullArgument;
    }
    match (*map).map.estimate_topological_entropy(n_max) {
        Ok(e) => {
            *out = e.value;
            MfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Build a potential from its JSON descriptor, e.g.
/// `{"kind":"bernoulli","p":0.3}`. Returns null on error.
#[no_mangle]
pub unsafe extern "C" fn mf_potential_new_json(json: *const c_char) -> *mut MfPotential {
    let Some(text) = cstr_arg(json) else {
        set_error("potential descriptor is null or not UTF-8");
        return ptr::null_mut();
    };
    match serde_json::from_str::<multifract::config::PotentialSpec>(text) {
        Ok(spec) => Box::into_raw(Box::new(MfPotential { potential: spec.build() })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `p` must come from `mf_potential_new_json` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mf_potential_free(p: *mut MfPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Truncated extension of the map.
#[no_mangle]
pub unsafe extern "C" fn mf_tower_build(
    map: *const MfMap,
    level_cap: usize,
    min_width: f64,
) -> *mut MfTower {
    if map.is_null() {
        set_error("null map in mf_tower_build");
        return ptr::null_mut();
    }
    let tower = build_tower_with(&(*map).map, level_cap, min_width, 1e-9, 10_000);
    Box::into_raw(Box::new(MfTower { tower }))
}

/// # Safety
/// `tower` must come from `mf_tower_build` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mf_tower_free(tower: *mut MfTower) {
    if !tower.is_null() {
        drop(Box::from_raw(tower));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mf_tower_domain_count(tower: *const MfTower) -> usize {
    if tower.is_null() {
        return 0;
    }
    (*tower).tower.domains.len()
}

/// First-return scheme over a cylinder base. `scheme_type` is `'A'` or
/// `'B'`; the base cylinder is named by partition depth and index, with
/// depth 0 meaning the whole interval (type A only). Returns null on error.
#[no_mangle]
pub unsafe extern "C" fn mf_scheme_build(
    map: *const MfMap,
    tower: *const MfTower,
    scheme_type: c_char,
    base_depth: usize,
    base_index: usize,
    delta: f64,
    tau_cap: usize,
) -> *mut MfScheme {
    if map.is_null() || tower.is_null() {
        set_error("null argument to mf_scheme_build");
        return ptr::null_mut();
    }
    let map = &(*map).map;
    let tower = &(*tower).tower;
    let built = cylinder_interval(map, base_depth, base_index).and_then(|base| {
        if scheme_type as u8 as char == 'B' || scheme_type as u8 as char == 'b' {
            build_scheme_type_b(tower, map, base, delta, tau_cap)
        } else {
            let cands = scheme_candidates(tower, base);
            let (domain, _) = cands.first().copied().ok_or_else(|| {
                multifract::Error::Precondition("no tower domain admits this base".into())
            })?;
            build_scheme_type_a(tower, map, domain, base, tau_cap)
        }
    });
    match built {
        Ok(scheme) => Box::into_raw(Box::new(MfScheme { scheme })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `scheme` must come from `mf_scheme_build` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mf_scheme_free(scheme: *mut MfScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mf_scheme_branch_count(scheme: *const MfScheme) -> usize {
    if scheme.is_null() {
        return 0;
    }
    (*scheme).scheme.branches.len()
}

#[no_mangle]
pub unsafe extern "C" fn mf_scheme_coverage(scheme: *const MfScheme) -> f64 {
    if scheme.is_null() {
        return f64::NAN;
    }
    (*scheme).scheme.coverage
}

/// Temperature curve `T(q)` over a uniform grid, solved on the scheme's
/// word sums. Returns null on error.
#[no_mangle]
pub unsafe extern "C" fn mf_tq_curve_compute(
    map: *const MfMap,
    scheme: *const MfScheme,
    potential: *const MfPotential,
    q_min: f64,
    q_max: f64,
    steps: usize,
    word_depth: usize,
    branch_cap: usize,
) -> *mut MfTqCurve {
    if map.is_null() || scheme.is_null() || potential.is_null() {
        set_error("null argument to mf_tq_curve_compute");
        return ptr::null_mut();
    }
    if steps == 0 || q_max < q_min {
        set_error("bad q grid");
        return ptr::null_mut();
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![q_min]
    } else {
        let h = (q_max - q_min) / (steps - 1) as f64;
        (0..steps).map(|k| q_min + h * k as f64).collect()
    };
    let table = WordTable::build(
        &(*scheme).scheme,
        &(*map).map,
        &(*potential).potential,
        word_depth.max(1),
        branch_cap.max(1),
        200_000,
    );
    match table {
        Ok(table) => {
            let curve = tq_curve(&table, &grid, &SolveConfig::default());
            Box::into_raw(Box::new(MfTqCurve { curve }))
        }
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `curve` must come from `mf_tq_curve_compute` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mf_tq_curve_free(curve: *mut MfTqCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mf_tq_curve_len(curve: *const MfTqCurve) -> usize {
    if curve.is_null() {
        return 0;
    }
    (*curve).curve.samples.len()
}

/// Read one sample; `t_out`/`alpha_out` become NaN where the solve failed
/// or no derivative neighbour exists.
#[no_mangle]
pub unsafe extern "C" fn mf_tq_curve_get(
    curve: *const MfTqCurve,
    index: usize,
    q_out: *mut f64,
    t_out: *mut f64,
    alpha_out: *mut f64,
    converged_out: *mut bool,
) -> MfStatus {
    if curve.is_null() || q_out.is_null() || t_out.is_null() || alpha_out.is_null() || converged_out.is_null() {
        set_error("null argument to mf_tq_curve_get");
        return MfStatus::NullArgument;
    }
    let samples = &(*curve).curve.samples;
    let Some(s) = samples.get(index) else {
        set_error("curve index out of range");
        return MfStatus::InvalidConfig;
    };
    *q_out = s.q;
    *t_out = s.t.unwrap_or(f64::NAN);
    *alpha_out = s.alpha.unwrap_or(f64::NAN);
    *converged_out = s.converged;
    MfStatus::Ok
}

/// Run the oracle acceptance suite; returns `Ok` when every criterion
/// passes, `Runtime` otherwise.
#[no_mangle]
pub extern "C" fn mf_verify_oracles(seed: u64) -> MfStatus {
    let report = multifract::verify::run_all(seed);
    if report.all_passed() {
        MfStatus::Ok
    } else {
        set_error("oracle suite reported failures");
        MfStatus::Runtime
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    #[test]
    fn map_roundtrip_through_c_abi() {
        let json = CString::new(r#"{"family":"tent","slope":2.0}"#).unwrap();
        unsafe {
            let map = mf_map_new_json(json.as_ptr());
            assert!(!map.is_null());
            let mut y = 0.0f64;
            assert_eq!(mf_map_eval(map, 0.75, &mut y), MfStatus::Ok);
            assert!((y - 0.5).abs() < 1e-15);
            assert_eq!(mf_map_eval(map, 1.5, &mut y), MfStatus::InvalidConfig);
            let msg = CStr::from_ptr(mf_last_error_message());
            assert!(msg.to_str().unwrap().contains("outside"));
            let mut h = 0.0f64;
            assert_eq!(mf_map_entropy(map, 12, &mut h), MfStatus::Ok);
            assert!((h - 2f64.ln()).abs() < 1e-9);
            mf_map_free(map);
        }
    }

    #[test]
    fn curve_through_c_abi() {
        let map_json = CString::new(r#"{"family":"tent","slope":2.0}"#).unwrap();
        let pot_json = CString::new(r#"{"kind":"bernoulli","p":0.3}"#).unwrap();
        unsafe {
            let map = mf_map_new_json(map_json.as_ptr());
            let pot = mf_potential_new_json(pot_json.as_ptr());
            let tower = mf_tower_build(map, 5, 1e-9);
            assert_eq!(mf_tower_domain_count(tower), 1);
            let scheme = mf_scheme_build(map, tower, 'A' as c_char, 0, 0, 0.2, 4);
            assert!(!scheme.is_null(), "{:?}", CStr::from_ptr(mf_last_error_message()));
            assert_eq!(mf_scheme_branch_count(scheme), 2);
            assert!((mf_scheme_coverage(scheme) - 1.0).abs() < 1e-12);
            let curve = mf_tq_curve_compute(map, scheme, pot, -2.0, 2.0, 41, 8, 64);
            assert!(!curve.is_null());
            assert_eq!(mf_tq_curve_len(curve), 41);
            let (mut q, mut t, mut a, mut conv) = (0.0, 0.0, 0.0, false);
            assert_eq!(
                mf_tq_curve_get(curve, 40, &mut q, &mut t, &mut a, &mut conv),
                MfStatus::Ok
            );
            assert!((q - 2.0).abs() < 1e-12);
            assert!((t + 0.7859).abs() < 1e-3);
            assert!(conv);
            assert_eq!(
                mf_tq_curve_get(curve, 99, &mut q, &mut t, &mut a, &mut conv),
                MfStatus::InvalidConfig
            );
            mf_tq_curve_free(curve);
            mf_scheme_free(scheme);
            mf_tower_free(tower);
            mf_potential_free(pot);
            mf_map_free(map);
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            assert!(mf_map_new_json(std::ptr::null()).is_null());
            let mut y = 0.0;
            assert_eq!(
                mf_map_eval(std::ptr::null(), 0.5, &mut y),
                MfStatus::NullArgument
            );
            mf_map_free(std::ptr::null_mut());
            mf_tower_free(std::ptr::null_mut());
            mf_scheme_free(std::ptr::null_mut());
        }
    }
}
