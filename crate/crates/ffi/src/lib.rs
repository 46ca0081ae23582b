//! C ABI over `thinflow`: obstacle maps, initial velocity fields and the mapped-grid solver.
//!
//! Every function returns a [`TfStatus`]; on failure the message is kept per thread and
//! read back with [`tf_last_error_message`]. Handles are opaque and freed by their `_free`.

use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use thinflow::conformal::{ExteriorMap, ObstacleFamily};
use thinflow::fields::{
    circulation, Bump, BumpVorticity, Circle, CutoffProfile, FlowData, HarmonicField, InitialVelocity,
    ShiftedInitialData, VectorField,
};
use thinflow::solver::{build_grid, velocity_from_stream, GridSpec, Solver, SolverConfig, SolverState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MapError = 3,
    FieldError = 4,
    SolverError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfFieldKind {
    /// `H_ε`, unit circulation around the obstacle.
    Harmonic = 0,
    /// `u₀^ε`.
    Initial = 1,
    /// `K_ε[ω₀]`.
    Induced = 2,
    /// `W₀^ε` with cutoff parameter λ.
    Shifted = 3,
    /// `u₀` around the bare curve; `epsilon` is ignored.
    Limit = 4,
}

/// One disk-supported vorticity bump.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfBump {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub amplitude: f64,
}

pub struct TfFamily {
    inner: ObstacleFamily,
}

pub struct TfFlow {
    inner: FlowData,
}

pub struct TfField {
    inner: Box<dyn VectorField + Send>,
}

pub struct TfSolver {
    solver: Solver,
    state: SolverState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TfStatus, msg: impl std::fmt::Display) -> TfStatus {
    set_error(msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> TfStatus) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == TfStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(TfStatus::Panic, "panic inside thinflow"),
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> TfStatus {
    if out.is_null() {
        return fail(TfStatus::NullPointer, "null output pointer");
    }
    out.write(value);
    TfStatus::Ok
}

unsafe fn boxed<T>(out: *mut *mut T, value: T) -> TfStatus {
    write(out, Box::into_raw(Box::new(value)))
}

/// Copies the last error of this thread into `buf` (NUL-terminated, truncated to `len`).
///
/// Returns the full message length without the terminator, 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn tf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Segment obstacle `Ω_ε` with `T_ε = T/(1+ε)`.
#[no_mangle]
pub unsafe extern "C" fn tf_family_new(epsilon: f64, out: *mut *mut TfFamily) -> TfStatus {
    guard(|| match ObstacleFamily::new(ExteriorMap::segment(), epsilon) {
        Ok(inner) => boxed(out, TfFamily { inner }),
        Err(e) => fail(TfStatus::MapError, e),
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_family_free(family: *mut TfFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// `T_ε(x)` for a point outside the obstacle.
#[no_mangle]
pub unsafe extern "C" fn tf_family_map(family: *const TfFamily, x: f64, y: f64, re: *mut f64, im: *mut f64) -> TfStatus {
    guard(|| {
        let Some(f) = family.as_ref() else {
            return fail(TfStatus::NullPointer, "null family");
        };
        match f.inner.map(Complex64::new(x, y)) {
            Ok(w) => match write(re, w.re) {
                TfStatus::Ok => write(im, w.im),
                s => s,
            },
            Err(e) => fail(TfStatus::MapError, e),
        }
    })
}

/// 1 when `(x, y)` lies in `Π_ε`, 0 otherwise.
#[no_mangle]
pub unsafe extern "C" fn tf_family_is_exterior(family: *const TfFamily, x: f64, y: f64, out: *mut i32) -> TfStatus {
    guard(|| match family.as_ref() {
        Some(f) => write(out, f.inner.is_exterior(Complex64::new(x, y)) as i32),
        None => fail(TfStatus::NullPointer, "null family"),
    })
}

/// Flow data: circulation `gamma`, viscosity `nu`, and `n` bumps validated against `Ω_{epsilon_max}`.
#[no_mangle]
pub unsafe extern "C" fn tf_flow_new(
    gamma: f64,
    nu: f64,
    bumps: *const TfBump,
    n: usize,
    epsilon_max: f64,
    out: *mut *mut TfFlow,
) -> TfStatus {
    guard(|| {
        if n > 0 && bumps.is_null() {
            return fail(TfStatus::NullPointer, "null bump array");
        }
        let list = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(bumps, n)
                .iter()
                .map(|b| Bump::new(Complex64::new(b.center_x, b.center_y), b.radius, b.amplitude))
                .collect()
        };
        let flow = BumpVorticity::new(list, ExteriorMap::segment(), epsilon_max)
            .and_then(|omega| FlowData::new(gamma, nu, omega));
        match flow {
            Ok(inner) => boxed(out, TfFlow { inner }),
            Err(e) => fail(TfStatus::FieldError, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_flow_free(flow: *mut TfFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// `α = γ + ∫ω₀`.
#[no_mangle]
pub unsafe extern "C" fn tf_flow_alpha(flow: *const TfFlow, out: *mut f64) -> TfStatus {
    guard(|| match flow.as_ref() {
        Some(f) => write(out, f.inner.alpha()),
        None => fail(TfStatus::NullPointer, "null flow"),
    })
}

/// Builds a velocity field of the given kind; `lambda` is used by `Shifted` only.
#[no_mangle]
pub unsafe extern "C" fn tf_field_new(
    flow: *const TfFlow,
    kind: TfFieldKind,
    epsilon: f64,
    lambda: f64,
    out: *mut *mut TfField,
) -> TfStatus {
    guard(|| {
        let Some(flow) = flow.as_ref() else {
            return fail(TfStatus::NullPointer, "null flow");
        };
        let flow = &flow.inner;
        let base = ExteriorMap::segment();
        let family = if kind == TfFieldKind::Limit {
            ObstacleFamily::limit(base)
        } else {
            match ObstacleFamily::new(base, epsilon) {
                Ok(f) => f,
                Err(e) => return fail(TfStatus::MapError, e),
            }
        };
        let field: Result<Box<dyn VectorField + Send>, _> = match kind {
            TfFieldKind::Harmonic => Ok(Box::new(HarmonicField { family })),
            TfFieldKind::Initial => InitialVelocity::new(flow, family).map(|u| Box::new(u) as Box<_>),
            TfFieldKind::Induced => InitialVelocity::new(flow, family).map(|u| Box::new(u.induced().clone()) as Box<_>),
            TfFieldKind::Shifted => match CutoffProfile::new(lambda) {
                Ok(p) => ShiftedInitialData::new(flow, family, p).map(|w| Box::new(w) as Box<_>),
                Err(e) => return fail(TfStatus::InvalidArgument, e),
            },
            TfFieldKind::Limit => InitialVelocity::limit(flow, base).map(|u| Box::new(u) as Box<_>),
        };
        match field {
            Ok(inner) => boxed(out, TfField { inner }),
            Err(e) => fail(TfStatus::FieldError, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_field_free(field: *mut TfField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Velocity at `n` points; `u1[i], u2[i]` receive the components at `(x[i], y[i])`.
#[no_mangle]
pub unsafe extern "C" fn tf_field_velocity(
    field: *const TfField,
    x: *const f64,
    y: *const f64,
    n: usize,
    u1: *mut f64,
    u2: *mut f64,
) -> TfStatus {
    guard(|| {
        let Some(f) = field.as_ref() else {
            return fail(TfStatus::NullPointer, "null field");
        };
        if n == 0 {
            return TfStatus::Ok;
        }
        if x.is_null() || y.is_null() || u1.is_null() || u2.is_null() {
            return fail(TfStatus::NullPointer, "null point or output array");
        }
        for i in 0..n {
            let z = Complex64::new(*x.add(i), *y.add(i));
            match f.inner.velocity(z) {
                Ok(u) => {
                    *u1.add(i) = u.re;
                    *u2.add(i) = u.im;
                }
                Err(e) => return fail(TfStatus::FieldError, format!("point {i}: {e}")),
            }
        }
        TfStatus::Ok
    })
}

/// Counterclockwise circulation over the circle of centre `(cx, cy)` and `radius`.
#[no_mangle]
pub unsafe extern "C" fn tf_field_circulation(
    field: *const TfField,
    cx: f64,
    cy: f64,
    radius: f64,
    n: usize,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let Some(f) = field.as_ref() else {
            return fail(TfStatus::NullPointer, "null field");
        };
        let circle = Circle {
            center: Complex64::new(cx, cy),
            radius,
        };
        match circulation(f.inner.as_ref(), &circle, n) {
            Ok(c) => write(out, c),
            Err(e) => fail(TfStatus::FieldError, e),
        }
    })
}

/// Solver on an `n_sigma × n_theta` log-polar grid, initialized from `u₀^ε` of `flow`.
#[no_mangle]
pub unsafe extern "C" fn tf_solver_new(
    flow: *const TfFlow,
    epsilon: f64,
    n_sigma: usize,
    n_theta: usize,
    r_max: f64,
    dt: f64,
    out: *mut *mut TfSolver,
) -> TfStatus {
    guard(|| {
        let Some(flow) = flow.as_ref() else {
            return fail(TfStatus::NullPointer, "null flow");
        };
        let spec = GridSpec {
            epsilon,
            n_sigma,
            n_theta,
            r_max,
        };
        let config = SolverConfig {
            nu: flow.inner.nu,
            dt,
            t_end: f64::MAX,
            snapshot_dt: dt,
            ..SolverConfig::default()
        };
        let built = build_grid(spec).and_then(|grid| {
            let mut solver = Solver::new(grid, config)?;
            let state = solver.init(&flow.inner)?;
            Ok(TfSolver { solver, state })
        });
        match built {
            Ok(s) => boxed(out, s),
            Err(e) => fail(TfStatus::SolverError, e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_solver_free(solver: *mut TfSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances `steps` time steps; on error the state is left at the last completed step.
#[no_mangle]
pub unsafe extern "C" fn tf_solver_step(solver: *mut TfSolver, steps: u64) -> TfStatus {
    guard(|| {
        let Some(s) = solver.as_mut() else {
            return fail(TfStatus::NullPointer, "null solver");
        };
        for _ in 0..steps {
            let mut next = s.state.clone();
            if let Err(e) = s.solver.advance(&mut next) {
                return fail(TfStatus::SolverError, e);
            }
            s.state = next;
        }
        TfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_solver_time(solver: *const TfSolver, out: *mut f64) -> TfStatus {
    guard(|| match solver.as_ref() {
        Some(s) => write(out, s.state.t),
        None => fail(TfStatus::NullPointer, "null solver"),
    })
}

/// `β` and the conservation defect `β + ∫ω - α`.
#[no_mangle]
pub unsafe extern "C" fn tf_solver_circulation(solver: *const TfSolver, beta: *mut f64, defect: *mut f64) -> TfStatus {
    guard(|| match solver.as_ref() {
        Some(s) => match write(beta, s.state.beta) {
            TfStatus::Ok => write(defect, s.state.stokes_defect(&s.solver.grid)),
            st => st,
        },
        None => fail(TfStatus::NullPointer, "null solver"),
    })
}

/// Velocity of the current state at one physical point.
#[no_mangle]
pub unsafe extern "C" fn tf_solver_velocity(solver: *const TfSolver, x: f64, y: f64, u1: *mut f64, u2: *mut f64) -> TfStatus {
    guard(|| {
        let Some(s) = solver.as_ref() else {
            return fail(TfStatus::NullPointer, "null solver");
        };
        match velocity_from_stream(&s.state, &s.solver.grid, Complex64::new(x, y)) {
            Ok(u) => match write(u1, u.re) {
                TfStatus::Ok => write(u2, u.im),
                st => st,
            },
            Err(e) => fail(TfStatus::SolverError, e),
        }
    })
}
