//! C ABI for the qns toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json` or
//! constructor functions and released with the matching `*_free`. Every
//! fallible function returns a status code (`QNS_OK` on success); the
//! message of the most recent failure on the calling thread is available
//! from `qns_last_error`. Strings returned by the library must be released
//! with `qns_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qns::correlations::Correlation;
use qns::games::{self, ConstraintGame};
use qns::ncgraphs::{self, Graph};
use qns::{symmetry, Error};

pub const QNS_OK: i32 = 0;
pub const QNS_ERR_INVALID_INPUT: i32 = 1;
pub const QNS_ERR_DIMENSION: i32 = 2;
pub const QNS_ERR_NULL_POINTER: i32 = 3;
pub const QNS_ERR_NO_CONVERGENCE: i32 = 4;
pub const QNS_ERR_UNDEFINED_COMPOSITION: i32 = 5;
pub const QNS_ERR_PANIC: i32 = 6;

/// A QNS, CQNS or NS correlation.
pub struct QnsCorrelation(Correlation);

/// A simple undirected graph.
pub struct QnsGraph(Graph);

/// A non-local game given by constraints.
pub struct QnsGame(ConstraintGame);

/// Outcome of a check: `pass` is 1 or 0, `residual` the largest residual.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QnsCheck {
    pub pass: i32,
    pub residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Dimension(_) => QNS_ERR_DIMENSION,
        Error::NoConvergence(_) => QNS_ERR_NO_CONVERGENCE,
        Error::UndefinedComposition(_) => QNS_ERR_UNDEFINED_COMPOSITION,
        _ => QNS_ERR_INVALID_INPUT,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(Error::Json(e))
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QNS_OK,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QNS_ERR_NULL_POINTER
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            QNS_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Invalid(format!("{what} is not valid UTF-8"))))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn check(pass: bool, residual: f64) -> QnsCheck {
    QnsCheck {
        pass: pass as i32,
        residual,
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library.
#[no_mangle]
pub unsafe extern "C" fn qns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a correlation from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_from_json(json: *const c_char, out: *mut *mut QnsCorrelation) -> i32 {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let c: Correlation = serde_json::from_str(text)?;
        *out = Box::into_raw(Box::new(QnsCorrelation(c)));
        Ok(())
    })
}

/// Serialises a correlation to JSON; release the result with
/// `qns_string_free`.
///
/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_to_json(c: *const QnsCorrelation, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let c = ref_arg(c, "correlation")?;
        let out = out_arg(out, "out")?;
        let text = serde_json::to_string(&c.0)?;
        *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// Releases a correlation handle.
///
/// # Safety
/// `c` must be null or a handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_free(c: *mut QnsCorrelation) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Writes the input and output sizes `[x, y, a, b]` to `dims`.
///
/// # Safety
/// `c` must be a live handle; `dims` must point to 4 writable values.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_dims(c: *const QnsCorrelation, dims: *mut usize) -> i32 {
    guard(|| {
        let c = ref_arg(c, "correlation")?;
        if dims.is_null() {
            return Err(Failure::Null("dims"));
        }
        let d = c.0.dims();
        for (k, v) in [d.x, d.y, d.a, d.b].into_iter().enumerate() {
            *dims.add(k) = v;
        }
        Ok(())
    })
}

/// Checks the defining conditions of the correlation's class.
///
/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_verify(c: *const QnsCorrelation, tol: f64, out: *mut QnsCheck) -> i32 {
    guard(|| {
        let c = ref_arg(c, "correlation")?;
        let out = out_arg(out, "out")?;
        *out = match &c.0 {
            Correlation::Qns(g) => {
                let r = g.verify(tol)?;
                let worst = (-r.min_eigenvalue)
                    .max(r.trace_residual)
                    .max(r.signalling_a_to_b)
                    .max(r.signalling_b_to_a);
                check(r.pass, worst.max(0.0))
            }
            Correlation::Cqns(s) => {
                let r = s.verify(tol)?;
                let worst = (-r.min_eigenvalue)
                    .max(r.trace_residual)
                    .max(r.marginal_a_residual)
                    .max(r.marginal_b_residual);
                check(r.pass, worst.max(0.0))
            }
            Correlation::Ns(p) => {
                let r = p.verify(tol);
                let worst = (-r.min_entry)
                    .max(r.normalization_residual)
                    .max(r.signalling_a_to_b)
                    .max(r.signalling_b_to_a);
                check(r.pass, worst.max(0.0))
            }
        };
        Ok(())
    })
}

/// Checks that the correlation maps fair states to fair states.
///
/// # Safety
/// `c` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_correlation_is_fair(c: *const QnsCorrelation, tol: f64, out: *mut QnsCheck) -> i32 {
    guard(|| {
        let c = ref_arg(c, "correlation")?;
        let out = out_arg(out, "out")?;
        let r = symmetry::is_fair(&c.0.to_qns(), tol)?;
        *out = check(r.pass, r.residual);
        Ok(())
    })
}

/// Quantum colouring of `K_{d^2}` with `d` colours, as a CQNS correlation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_kd2_colouring(d: usize, out: *mut *mut QnsCorrelation) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        let k = ncgraphs::kd2_colouring(d)?;
        *out = Box::into_raw(Box::new(QnsCorrelation(Correlation::Cqns(k.correlation))));
        Ok(())
    })
}

/// Graph on `n` vertices from `edge_count` pairs stored flat in `edges`.
///
/// # Safety
/// `edges` must point to `2 * edge_count` values (may be null when
/// `edge_count` is 0); `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_graph_new(
    n: usize,
    edges: *const usize,
    edge_count: usize,
    out: *mut *mut QnsGraph,
) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pairs: Vec<(usize, usize)> = if edge_count == 0 {
            Vec::new()
        } else {
            if edges.is_null() {
                return Err(Failure::Null("edges"));
            }
            let flat = std::slice::from_raw_parts(edges, 2 * edge_count);
            flat.chunks_exact(2).map(|e| (e[0], e[1])).collect()
        };
        *out = Box::into_raw(Box::new(QnsGraph(Graph::new(n, pairs)?)));
        Ok(())
    })
}

/// Parses a graph from `{"n": .., "edges": [[i, j], ..]}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_graph_from_json(json: *const c_char, out: *mut *mut QnsGraph) -> i32 {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let g: Graph = serde_json::from_str(text)?;
        *out = Box::into_raw(Box::new(QnsGraph(g)));
        Ok(())
    })
}

/// Releases a graph handle.
///
/// # Safety
/// `g` must be null or a handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn qns_graph_free(g: *mut QnsGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Lovász theta number of `g`, solved to absolute tolerance `tol`.
///
/// # Safety
/// `g` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_lovasz_theta(g: *const QnsGraph, tol: f64, out: *mut f64) -> i32 {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let out = out_arg(out, "out")?;
        *out = ncgraphs::lovasz_theta(&g.0, tol)?.theta_raw;
        Ok(())
    })
}

/// Checks whether a correlation is a proper colouring of `g`.
///
/// # Safety
/// `c`, `g` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_proper_check(
    c: *const QnsCorrelation,
    g: *const QnsGraph,
    tol: f64,
    out: *mut QnsCheck,
) -> i32 {
    guard(|| {
        let c = ref_arg(c, "correlation")?;
        let g = ref_arg(g, "graph")?;
        let out = out_arg(out, "out")?;
        let Correlation::Cqns(s) = &c.0 else {
            return Err(Error::Invalid("colourings are CQNS correlations".into()).into());
        };
        let r = ncgraphs::proper_check(s, &g.0, tol)?;
        *out = check(r.pass, r.max_residual);
        Ok(())
    })
}

/// Parses a game from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_game_from_json(json: *const c_char, out: *mut *mut QnsGame) -> i32 {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let g: ConstraintGame = serde_json::from_str(text)?;
        *out = Box::into_raw(Box::new(QnsGame(g)));
        Ok(())
    })
}

/// Colouring game of `g` with `colours` colours.
///
/// # Safety
/// `g` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_colouring_game(
    g: *const QnsGraph,
    colours: usize,
    synchronous: i32,
    out: *mut *mut QnsGame,
) -> i32 {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        let out = out_arg(out, "out")?;
        let game = games::colouring_game(&g.0, colours, synchronous != 0)?;
        *out = Box::into_raw(Box::new(QnsGame(game)));
        Ok(())
    })
}

/// Releases a game handle.
///
/// # Safety
/// `g` must be null or a handle from this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn qns_game_free(g: *mut QnsGame) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Checks whether `c` is a perfect strategy for `game`.
///
/// # Safety
/// `game`, `c` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qns_game_check(
    game: *const QnsGame,
    c: *const QnsCorrelation,
    tol: f64,
    out: *mut QnsCheck,
) -> i32 {
    guard(|| {
        let game = ref_arg(game, "game")?;
        let c = ref_arg(c, "correlation")?;
        let out = out_arg(out, "out")?;
        let r = games::perfect_strategy_check(&game.0, &c.0, tol)?;
        *out = check(r.pass, r.max_residual);
        Ok(())
    })
}
