//! C ABI over `weakconc`.
//!
//! Every fallible call returns a `WcStatus` and writes its result through an
//! out-pointer. On failure `wc_last_error_message` holds a description until
//! the next call on the same thread. Handles are opaque and must be released
//! with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use weakconc::chain::{solve_hitting, ExactSolution};
use weakconc::error::Error;
use weakconc::graph::{min_cut_weight, parse_edge_list, WeightedGraph};
use weakconc::{families, fpp, multigraph, stats};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed input: parse errors, bad parameters, unknown vertices.
    InvalidInput = 2,
    /// Exact computation exceeds a size limit.
    Capacity = 3,
    /// The chain is ill-posed (unreachable target, non-increasing move).
    Numeric = 4,
    BufferTooSmall = 5,
    Internal = 6,
    Panic = 7,
}

/// Opaque weighted graph.
pub struct WcGraph {
    inner: WeightedGraph,
}

/// Opaque exact hitting-time solution.
pub struct WcSolution {
    inner: ExactSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> WcStatus {
    match e {
        Error::Capacity { .. } => WcStatus::Capacity,
        Error::InfiniteHitting { .. }
        | Error::NotIncreasing { .. }
        | Error::InvalidRate { .. }
        | Error::Monotonicity { .. } => WcStatus::Numeric,
        Error::Internal(_) | Error::Io(_) => WcStatus::Internal,
        _ => WcStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (WcStatus, String)>) -> WcStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            WcStatus::Panic
        }
    }
}

fn lift<T>(r: weakconc::Result<T>) -> Result<T, (WcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (WcStatus, String) {
    (WcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const WcGraph) -> Result<&'a WeightedGraph, (WcStatus, String)> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

unsafe fn emit<T>(out: *mut T, value: T) -> Result<(), (WcStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed_graph(g: weakconc::Result<WeightedGraph>) -> Result<*mut WcGraph, (WcStatus, String)> {
    Ok(Box::into_raw(Box::new(WcGraph { inner: lift(g)? })))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn wc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a `u v weight` edge list (NUL-terminated UTF-8).
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_parse(text: *const c_char, out: *mut *mut WcGraph) -> WcStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (WcStatus::InvalidInput, format!("edge list is not UTF-8: {e}")))?;
        emit(out, boxed_graph(parse_edge_list(s))?)
    })
}

/// Unit-rate path on `n` vertices.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_path(n: usize, out: *mut *mut WcGraph) -> WcStatus {
    guard(|| emit(out, boxed_graph(families::path(n))?))
}

/// Unit-rate complete graph on `n` vertices.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_complete(n: usize, out: *mut *mut WcGraph) -> WcStatus {
    guard(|| emit(out, boxed_graph(families::complete(n))?))
}

/// Unit-rate `rows x cols` grid.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_grid(rows: usize, cols: usize, out: *mut *mut WcGraph) -> WcStatus {
    guard(|| emit(out, boxed_graph(families::grid(rows, cols))?))
}

/// Two unit-rate cliques joined by one edge of rate `bridge_rate`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_bridge(c1: usize, c2: usize, bridge_rate: f64, out: *mut *mut WcGraph) -> WcStatus {
    guard(|| emit(out, boxed_graph(families::bridge(c1, c2, bridge_rate))?))
}

/// # Safety
/// `g` must come from a `wc_graph_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_free(g: *mut WcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_vertex_count(g: *const WcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.vertex_count())
}

/// # Safety
/// `g` must be a live graph handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_edge_count(g: *const WcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// Index of the vertex with the given label.
///
/// # Safety
/// `g` must be a live handle, `label` a C string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_vertex_id(g: *const WcGraph, label: *const c_char, out: *mut usize) -> WcStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if label.is_null() {
            return Err(null("label"));
        }
        let l = CStr::from_ptr(label).to_string_lossy();
        emit(out, lift(g.vertex_id(&l))?)
    })
}

/// Global minimum cut weight `w_*`.
///
/// # Safety
/// `g` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_graph_min_cut(g: *const WcGraph, out: *mut f64) -> WcStatus {
    guard(|| emit(out, lift(min_cut_weight(graph_ref(g)?))?.weight))
}

/// Exact law of the passage time from `source` to `target` (n <= 20).
///
/// # Safety
/// `g` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_fpp_solve(
    g: *const WcGraph,
    source: usize,
    target: usize,
    out: *mut *mut WcSolution,
) -> WcStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let sol = lift(fpp::fpp_chain_spec(g, source, target).and_then(|c| solve_hitting(&c)))?;
        emit(out, Box::into_raw(Box::new(WcSolution { inner: sol })))
    })
}

/// # Safety
/// `s` must come from `wc_fpp_solve` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wc_solution_free(s: *mut WcSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// NaN for a null handle.
///
/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_solution_expected_time(s: *const WcSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.inner.expected_time)
}

/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_solution_variance(s: *const WcSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.inner.variance)
}

/// Largest one-step drop of the mean remaining time.
///
/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_solution_kappa(s: *const WcSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.inner.kappa())
}

/// # Safety
/// `s` must be a live solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn wc_solution_state_count(s: *const WcSolution) -> usize {
    s.as_ref().map_or(0, |s| s.inner.states().len())
}

/// `runs` shortest-path samples; writes X and the largest edge time on the
/// minimizing path. Either buffer may be null; non-null buffers need `runs`
/// slots. Output depends only on `seed`, not on the thread count.
///
/// # Safety
/// `g` must be a live handle; buffers must hold `runs` doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_fpp_simulate(
    g: *const WcGraph,
    source: usize,
    target: usize,
    runs: usize,
    seed: u64,
    x_out: *mut f64,
    xi_out: *mut f64,
    capacity: usize,
) -> WcStatus {
    guard(|| {
        let g = graph_ref(g)?;
        if capacity < runs && !(x_out.is_null() && xi_out.is_null()) {
            return Err((WcStatus::BufferTooSmall, format!("buffers hold {capacity}, need {runs}")));
        }
        let samples = lift(fpp::simulate_fpp(g, source, target, runs, seed))?;
        for (i, s) in samples.iter().enumerate() {
            if !x_out.is_null() {
                *x_out.add(i) = s.x;
            }
            if !xi_out.is_null() {
                *xi_out.add(i) = s.xi;
            }
        }
        Ok(())
    })
}

/// Natural log of the lower-bound constant at `delta` in (0, 1].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_psi_minus_ln(delta: f64, out: *mut f64) -> WcStatus {
    guard(|| emit(out, lift(stats::psi_minus_eval(delta))?.ln_value))
}

/// `E (max(0, s - U_1 - .. - U_k))^2` for independent uniforms.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_fk_eval(k: u32, s: f64, out: *mut f64) -> WcStatus {
    guard(|| emit(out, lift(stats::f_k_eval(k, s))?.value))
}

/// `a(k) = inf_q q / (1 - (1 - q^3)^k)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wc_a_k(k: u32, out: *mut f64) -> WcStatus {
    guard(|| emit(out, lift(multigraph::a_k_eval(k))?))
}

/// Empirical `inf { d : P(|V| > d) <= d }` over `len` samples.
///
/// # Safety
/// `samples` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wc_l0_norm(samples: *const f64, len: usize, out: *mut f64) -> WcStatus {
    guard(|| {
        if samples.is_null() && len > 0 {
            return Err(null("samples"));
        }
        let xs = if len == 0 { &[][..] } else { std::slice::from_raw_parts(samples, len) };
        emit(out, lift(stats::l0_norm_estimate(xs))?.value)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_outputs_are_reported() {
        assert_eq!(unsafe { wc_graph_path(3, ptr::null_mut()) }, WcStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(wc_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("null"));
    }

    #[test]
    fn errors_map_to_statuses() {
        let mut g = ptr::null_mut();
        let text = CString::new("a b -1").unwrap();
        assert_eq!(unsafe { wc_graph_parse(text.as_ptr(), &mut g) }, WcStatus::InvalidInput);
        assert!(g.is_null());
        assert_eq!(unsafe { wc_graph_path(25, &mut g) }, WcStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { wc_fpp_solve(g, 0, 24, &mut s) }, WcStatus::Capacity);
        unsafe { wc_graph_free(g) };
    }
}
