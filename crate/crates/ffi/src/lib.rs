//! C ABI over `preview-lqr`.
//!
//! Objects are opaque heap handles created by `plqr_*_new` style functions and
//! released with the matching `plqr_*_free`. Matrices are passed as dense
//! row-major `double` arrays. Every fallible call returns a [`PlqrStatus`]; on
//! failure [`plqr_last_error_message`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use preview_lqr::bounds::{bound_report, ExtremaSource};
use preview_lqr::costs::{random_uniform_schedule, CostBounds, CostSchedule, CostSource};
use preview_lqr::linalg::{Mat, Vector};
use preview_lqr::policies::{clairvoyant_policy, run_prediction_tracking, MpcBaseline, PolicyConfig};
use preview_lqr::riccati::{solve_dare, DareOptions, Trajectory};
use preview_lqr::seed::{substream, Role};
use preview_lqr::system::{inverted_pendulum, place_poles_single_input, real_poles, LinearSystem};
use preview_lqr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlqrStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    Precondition = 4,
    Numerical = 5,
    Overflow = 6,
    NonConvergence = 7,
    Degenerate = 8,
    Other = 9,
    Panic = 10,
}

/// Linear system `x_{t+1} = A x_t + B u_t + w_t` with initial state.
pub struct PlqrSystem(LinearSystem);

/// Cost matrices `Q_0..Q_{T−1}` and `R_0..R_{T−2}`.
pub struct PlqrSchedule(CostSchedule);

/// Closed-loop states, controls and total cost.
pub struct PlqrTrajectory(Trajectory);

/// Regret-bound constants and the bound value for one instance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlqrBoundReport {
    pub rho: f64,
    pub q: f64,
    pub c_f: f64,
    pub c_k: f64,
    pub c: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub bound: f64,
    pub regret: f64,
    pub margin: f64,
    pub sufficient_condition: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PlqrStatus {
    match e {
        Error::Dimension(_) => PlqrStatus::Dimension,
        Error::Argument(_) | Error::Config(_) | Error::Unsupported(_) => PlqrStatus::InvalidArgument,
        Error::Precondition(_) | Error::IncomparableSequence { .. } => PlqrStatus::Precondition,
        Error::Numerical(_) => PlqrStatus::Numerical,
        Error::Overflow { .. } => PlqrStatus::Overflow,
        Error::NonConvergence { .. } => PlqrStatus::NonConvergence,
        Error::DegenerateConstants(_) | Error::DegenerateResult { .. } => PlqrStatus::Degenerate,
        _ => PlqrStatus::Other,
    }
}

struct Fail(PlqrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PlqrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PlqrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PlqrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PlqrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn matrix(ptr: *const f64, rows: usize, cols: usize, what: &str) -> FfiResult<Mat> {
    Ok(Mat::from_row_slice(rows, cols, slice(ptr, rows * cols, what)?))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> FfiResult<&'a T> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_matrix(m: &Mat, out: *mut f64) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            *out.add(i * m.ncols() + j) = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn disturbances(w: *const f64, n: usize, horizon: usize) -> FfiResult<Vec<Vector>> {
    if w.is_null() {
        return Ok(Vec::new());
    }
    let steps = horizon.saturating_sub(1);
    let raw = slice(w, steps * n, "disturbances")?;
    Ok(raw.chunks(n).map(Vector::from_column_slice).collect())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn plqr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a system from row-major `a` (n×n), `b` (n×m) and `x0` (n).
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plqr_system_new(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    x0: *const f64,
    out: *mut *mut PlqrSystem,
) -> PlqrStatus {
    guard(|| {
        let sys = LinearSystem::new(
            matrix(a, n, n, "a")?,
            matrix(b, n, m, "b")?,
            Vector::from_column_slice(slice(x0, n, "x0")?),
        )?;
        write_out(out, PlqrSystem(sys))
    })
}

/// Linearized inverted pendulum with initial state `x0` (4 entries).
///
/// # Safety
/// `x0` must hold 4 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plqr_system_pendulum(x0: *const f64, out: *mut *mut PlqrSystem) -> PlqrStatus {
    guard(|| {
        let sys = inverted_pendulum(Vector::from_column_slice(slice(x0, 4, "x0")?))?;
        write_out(out, PlqrSystem(sys))
    })
}

/// # Safety
/// `sys` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plqr_system_free(sys: *mut PlqrSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State and input dimensions.
///
/// # Safety
/// `sys` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plqr_system_dims(sys: *const PlqrSystem, n: *mut usize, m: *mut usize) -> PlqrStatus {
    guard(|| {
        let s = &handle(sys, "system")?.0;
        if n.is_null() || m.is_null() {
            return Err(null("output"));
        }
        *n = s.n();
        *m = s.m();
        Ok(())
    })
}

/// Schedule from `horizon` row-major n×n state costs stored back to back in
/// `q` and `horizon − 1` m×m input costs in `r`.
///
/// # Safety
/// `q` must hold `horizon·n·n` doubles and `r` `(horizon−1)·m·m`.
#[no_mangle]
pub unsafe extern "C" fn plqr_schedule_new(
    n: usize,
    m: usize,
    horizon: usize,
    q: *const f64,
    r: *const f64,
    out: *mut *mut PlqrSchedule,
) -> PlqrStatus {
    guard(|| {
        let qs = slice(q, horizon * n * n, "q")?;
        let rs = slice(r, horizon.saturating_sub(1) * m * m, "r")?;
        let q = qs.chunks(n * n).map(|c| Mat::from_row_slice(n, n, c)).collect();
        let r = rs.chunks(m * m).map(|c| Mat::from_row_slice(m, m, c)).collect();
        write_out(out, PlqrSchedule(CostSchedule::new(q, r)?))
    })
}

/// Random schedule `Q_t = Q_min + U_t (Q_max − Q_min)` with scalar-identity
/// bounds, drawn from `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn plqr_schedule_random(
    n: usize,
    m: usize,
    horizon: usize,
    q_min: f64,
    q_max: f64,
    r_min: f64,
    r_max: f64,
    seed: u64,
    out: *mut *mut PlqrSchedule,
) -> PlqrStatus {
    guard(|| {
        let bounds = CostBounds::scaled_identity(n, m, q_min, q_max, r_min, r_max)?;
        let sched = random_uniform_schedule(&bounds, horizon, &mut substream(seed, &[], Role::Schedule))?;
        write_out(out, PlqrSchedule(sched))
    })
}

/// # Safety
/// `sched` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plqr_schedule_free(sched: *mut PlqrSchedule) {
    if !sched.is_null() {
        drop(Box::from_raw(sched));
    }
}

/// # Safety
/// `sched` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn plqr_schedule_horizon(sched: *const PlqrSchedule) -> usize {
    sched.as_ref().map_or(0, |s| s.0.horizon())
}

/// Stabilizing solution of the discrete algebraic Riccati equation, written
/// row-major into `p_out` (n×n).
///
/// # Safety
/// Inputs must hold n×n, n×m, n×n and m×m doubles; `p_out` n×n.
#[no_mangle]
pub unsafe extern "C" fn plqr_solve_dare(
    n: usize,
    m: usize,
    a: *const f64,
    b: *const f64,
    q: *const f64,
    r: *const f64,
    p_out: *mut f64,
) -> PlqrStatus {
    guard(|| {
        let p = solve_dare(
            &matrix(a, n, n, "a")?,
            &matrix(b, n, m, "b")?,
            &matrix(q, n, n, "q")?,
            &matrix(r, m, m, "r")?,
            DareOptions::default(),
        )?;
        write_matrix(&p, p_out)
    })
}

/// Single-input pole placement: writes `K` (1×n) with `eig(A + BK)` equal to
/// the `n` real `poles`.
///
/// # Safety
/// `poles` must hold n doubles and `k_out` n doubles.
#[no_mangle]
pub unsafe extern "C" fn plqr_place_poles(sys: *const PlqrSystem, poles: *const f64, k_out: *mut f64) -> PlqrStatus {
    guard(|| {
        let s = &handle(sys, "system")?.0;
        let k = place_poles_single_input(s, &real_poles(slice(poles, s.n(), "poles")?))?;
        write_matrix(&k, k_out)
    })
}

/// Optimal policy with full knowledge of costs and disturbances. `w` holds
/// `T − 1` disturbance vectors back to back, or is null for none.
///
/// # Safety
/// Handles must be live; `w` null or `(T−1)·n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plqr_run_clairvoyant(
    sys: *const PlqrSystem,
    sched: *const PlqrSchedule,
    w: *const f64,
    out: *mut *mut PlqrTrajectory,
) -> PlqrStatus {
    guard(|| {
        let (s, c) = (&handle(sys, "system")?.0, &handle(sched, "schedule")?.0);
        let w = disturbances(w, s.n(), c.horizon())?;
        write_out(out, PlqrTrajectory(clairvoyant_policy(s, c, &w)?))
    })
}

/// Prediction-tracking policy with `preview` steps of cost preview and
/// tracking gain `k` (m×n).
///
/// # Safety
/// Handles must be live; `k` m×n doubles; `w` null or `(T−1)·n` doubles.
#[no_mangle]
pub unsafe extern "C" fn plqr_run_prediction_tracking(
    sys: *const PlqrSystem,
    sched: *const PlqrSchedule,
    preview: usize,
    k: *const f64,
    w: *const f64,
    out: *mut *mut PlqrTrajectory,
) -> PlqrStatus {
    guard(|| {
        let (s, c) = (&handle(sys, "system")?.0, &handle(sched, "schedule")?.0);
        let cfg = PolicyConfig::new(s, preview, matrix(k, s.m(), s.n(), "k")?)?;
        let w = disturbances(w, s.n(), c.horizon())?;
        let (traj, _) = run_prediction_tracking(s, c, &cfg, &w)?;
        write_out(out, PlqrTrajectory(traj))
    })
}

/// Receding-horizon baseline with window `preview + 1` and terminal matrix
/// `p_max` (n×n), typically from [`plqr_solve_dare`] at the upper cost bounds.
///
/// # Safety
/// Handles must be live; `p_max` n×n doubles; `w` null or `(T−1)·n` doubles.
#[no_mangle]
pub unsafe extern "C" fn plqr_run_mpc(
    sys: *const PlqrSystem,
    sched: *const PlqrSchedule,
    preview: usize,
    p_max: *const f64,
    w: *const f64,
    out: *mut *mut PlqrTrajectory,
) -> PlqrStatus {
    guard(|| {
        let (s, c) = (&handle(sys, "system")?.0, &handle(sched, "schedule")?.0);
        let mpc = MpcBaseline::with_p_max(matrix(p_max, s.n(), s.n(), "p_max")?, preview);
        let w = disturbances(w, s.n(), c.horizon())?;
        write_out(out, PlqrTrajectory(mpc.run(s, c, &w)?))
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plqr_trajectory_free(traj: *mut PlqrTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of states `T` in the trajectory (0 for a null handle).
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plqr_trajectory_len(traj: *const PlqrTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.x.len())
}

/// Total cost (NaN for a null handle).
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plqr_trajectory_cost(traj: *const PlqrTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.0.cost)
}

unsafe fn copy_vectors(v: &[Vector], buf: *mut f64, len: usize) -> FfiResult<()> {
    let need: usize = v.iter().map(|x| x.len()).sum();
    if len < need {
        return Err(Fail(PlqrStatus::Dimension, format!("buffer holds {len} doubles, {need} required")));
    }
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    let mut off = 0;
    for x in v {
        std::ptr::copy_nonoverlapping(x.as_ptr(), buf.add(off), x.len());
        off += x.len();
    }
    Ok(())
}

/// Copies the `T` states (T·n doubles) into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plqr_trajectory_states(traj: *const PlqrTrajectory, buf: *mut f64, len: usize) -> PlqrStatus {
    guard(|| copy_vectors(&handle(traj, "trajectory")?.0.x, buf, len))
}

/// Copies the `T − 1` controls ((T−1)·m doubles) into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plqr_trajectory_controls(
    traj: *const PlqrTrajectory,
    buf: *mut f64,
    len: usize,
) -> PlqrStatus {
    guard(|| copy_vectors(&handle(traj, "trajectory")?.0.u, buf, len))
}

/// Dynamic regret of `traj` against the clairvoyant optimum on the same
/// disturbances `w` (null for none).
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plqr_regret(
    sys: *const PlqrSystem,
    sched: *const PlqrSchedule,
    traj: *const PlqrTrajectory,
    w: *const f64,
    out: *mut f64,
) -> PlqrStatus {
    guard(|| {
        let (s, c) = (&handle(sys, "system")?.0, &handle(sched, "schedule")?.0);
        let t = &handle(traj, "trajectory")?.0;
        let w = disturbances(w, s.n(), c.horizon())?;
        let r = preview_lqr::regret::regret(t, s, c, &w)?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = r.regret;
        Ok(())
    })
}

/// Regret bound for the disturbance-free prediction-tracking policy, with the
/// cost extrema taken from the schedule itself and the sufficient condition
/// checked against the scalar-identity bounds.
///
/// # Safety
/// Handles must be live; `k` m×n doubles; `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn plqr_bound_check(
    sys: *const PlqrSystem,
    sched: *const PlqrSchedule,
    preview: usize,
    k: *const f64,
    q_min: f64,
    q_max: f64,
    r_min: f64,
    r_max: f64,
    out: *mut PlqrBoundReport,
) -> PlqrStatus {
    guard(|| {
        let (s, c) = (&handle(sys, "system")?.0, &handle(sched, "schedule")?.0);
        let cfg = PolicyConfig::new(s, preview, matrix(k, s.m(), s.n(), "k")?)?;
        cfg.check_horizon(c.horizon())?;
        let bounds = CostBounds::scaled_identity(s.n(), s.m(), q_min, q_max, r_min, r_max)?;
        let r = bound_report(s, c, &cfg, ExtremaSource::Sequence, &bounds)?;
        if out.is_null() {
            return Err(null("output"));
        }
        let k = &r.constants;
        *out = PlqrBoundReport {
            rho: k.rho,
            q: k.q,
            c_f: k.c_f,
            c_k: k.c_k,
            c: k.c,
            eta: k.eta,
            alpha: k.alpha,
            beta: k.beta,
            gamma: k.gamma,
            alpha1: k.alpha1,
            alpha2: k.alpha2,
            bound: r.bound_value,
            regret: r.realized_regret,
            margin: r.margin,
            sufficient_condition: r.sufficient_condition_holds,
        };
        Ok(())
    })
}
