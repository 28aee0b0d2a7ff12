//! Finite-horizon Riccati recursions (plain and affine), the DARE fixed point
//! and forward rollout.

use crate::costs::CostSource;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::regret::total_cost;
use crate::system::LinearSystem;

/// Value matrices `P_0..P_{T−1}` and gains `K_0..K_{T−2}` with `u_i = K_i x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Vec<Mat>,
    pub k: Vec<Mat>,
}

/// Riccati solution plus the affine terms that arise from known disturbances:
/// `u_i = K_i x_i + k_i`, value `xᵀP_i x + 2 q_iᵀ x + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRiccatiSolution {
    pub p: Vec<Mat>,
    pub k: Vec<Mat>,
    pub q: Vec<Vector>,
    pub feedforward: Vec<Vector>,
}

/// States `x_0..x_{T−1}`, controls `u_0..u_{T−2}` and their realized cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub cost: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.x.len()
    }
}

/// A time-indexed state-feedback law.
pub trait FeedbackLaw {
    fn steps(&self) -> usize;
    fn control(&self, i: usize, x: &Vector) -> Vector;
}

impl FeedbackLaw for RiccatiSolution {
    fn steps(&self) -> usize {
        self.k.len()
    }

    fn control(&self, i: usize, x: &Vector) -> Vector {
        &self.k[i] * x
    }
}

impl FeedbackLaw for AffineRiccatiSolution {
    fn steps(&self) -> usize {
        self.k.len()
    }

    fn control(&self, i: usize, x: &Vector) -> Vector {
        &self.k[i] * x + &self.feedforward[i]
    }
}

fn check_source<S: CostSource>(sys: &LinearSystem, schedule: &S) -> Result<()> {
    let (n, m) = (sys.n(), sys.m());
    dim_check(schedule.horizon() >= 2, || "horizon must be at least 2".into())?;
    dim_check(schedule.state_cost(0).shape() == (n, n), || format!("state costs must be {n}×{n}"))?;
    dim_check(schedule.input_cost(0).shape() == (m, m), || format!("input costs must be {m}×{m}"))?;
    Ok(())
}

/// Disturbance sequences are either empty (no disturbance) or one vector per
/// control step.
pub(crate) fn check_disturbances(w: &[Vector], horizon: usize, n: usize) -> Result<()> {
    dim_check(w.is_empty() || w.len() == horizon - 1, || {
        format!("expected {} disturbance vectors, got {}", horizon - 1, w.len())
    })?;
    dim_check(w.iter().all(|wi| wi.len() == n), || format!("disturbances must have length {n}"))
}

pub(crate) fn disturbance(w: &[Vector], i: usize, n: usize) -> Vector {
    w.get(i).cloned().unwrap_or_else(|| Vector::zeros(n))
}

/// One backward step: returns `(K_i, P_i)` from `P_{i+1}`.
fn riccati_step(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p_next: &Mat) -> Result<(Mat, Mat)> {
    let bt_p = b.transpose() * p_next;
    let g = r + &bt_p * b;
    let k = -linalg::solve_spd(&g, &(&bt_p * a))?;
    let at_p = a.transpose() * p_next;
    let p = &at_p * a + q + &at_p * b * &k;
    Ok((k, linalg::symmetrize(&p)))
}

/// Time-varying LQR backward pass over any cost source.
pub fn backward_riccati<S: CostSource>(sys: &LinearSystem, schedule: &S) -> Result<RiccatiSolution> {
    check_source(sys, schedule)?;
    let horizon = schedule.horizon();
    let (a, b) = (sys.a(), sys.b());
    let mut p = vec![Mat::zeros(0, 0); horizon];
    let mut k = vec![Mat::zeros(0, 0); horizon - 1];
    p[horizon - 1] = schedule.state_cost(horizon - 1).clone();
    for i in (0..horizon - 1).rev() {
        let (ki, pi) = riccati_step(a, b, schedule.state_cost(i), schedule.input_cost(i), &p[i + 1])?;
        if !linalg::all_finite(&pi) {
            return Err(Error::Numerical(format!("Riccati value matrix P_{i} is not finite")));
        }
        k[i] = ki;
        p[i] = pi;
    }
    Ok(RiccatiSolution { p, k })
}

/// Affine value terms `q_i` and feedforward controls `k_i` for a solved
/// Riccati pass and a disturbance sequence known exactly (zero where unknown).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerms {
    pub q: Vec<Vector>,
    pub feedforward: Vec<Vector>,
}

pub fn affine_terms<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    sol: &RiccatiSolution,
    known_w: &[Vector],
) -> Result<AffineTerms> {
    let horizon = sol.p.len();
    let n = sys.n();
    check_disturbances(known_w, horizon, n)?;
    let (a, b) = (sys.a(), sys.b());
    let mut q = vec![Vector::zeros(n); horizon];
    let mut feedforward = vec![Vector::zeros(sys.m()); horizon - 1];
    // q_i and k_i vanish above the last nonzero disturbance
    let last = known_w.iter().rposition(|w| w.iter().any(|&v| v != 0.0));
    if let Some(last) = last {
        for i in (0..=last).rev() {
            let p_next = &sol.p[i + 1];
            let pw_q = p_next * &known_w[i] + &q[i + 1];
            let g = schedule.input_cost(i) + b.transpose() * p_next * b;
            let rhs = b.transpose() * &pw_q;
            let k_ff = -linalg::solve_spd(&g, &Mat::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
            feedforward[i] = k_ff.column(0).into_owned();
            q[i] = (a + b * &sol.k[i]).transpose() * pw_q;
        }
    }
    Ok(AffineTerms { q, feedforward })
}

/// Exact minimizer of the quadratic cost with known disturbances `known_w`.
pub fn affine_backward_riccati<S: CostSource>(
    sys: &LinearSystem,
    schedule: &S,
    known_w: &[Vector],
) -> Result<AffineRiccatiSolution> {
    let sol = backward_riccati(sys, schedule)?;
    let AffineTerms { q, feedforward } = affine_terms(sys, schedule, &sol, known_w)?;
    Ok(AffineRiccatiSolution { p: sol.p, k: sol.k, q, feedforward })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000 }
    }
}

/// Image of `p` under the Riccati map `Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA`.
pub fn riccati_map(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    Ok(riccati_step(a, b, q, r, p)?.1)
}

/// Spectral norm of `riccati_map(P) − P`.
pub fn dare_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<f64> {
    Ok(linalg::spectral_norm(&(riccati_map(a, b, q, r, p)? - p)))
}

/// Stabilizing DARE solution by fixed-point iteration from `P = Q`.
pub fn solve_dare(a: &Mat, b: &Mat, q: &Mat, r: &Mat, opts: DareOptions) -> Result<Mat> {
    let n = a.nrows();
    dim_check(a.is_square() && b.nrows() == n, || "A must be n×n and B n×m".into())?;
    dim_check(q.shape() == (n, n), || format!("Q must be {n}×{n}"))?;
    dim_check(r.shape() == (b.ncols(), b.ncols()), || "R must be m×m".into())?;
    let mut p = linalg::symmetrize(q);
    for _ in 0..opts.max_iter {
        let next = riccati_map(a, b, q, r, &p)?;
        if !linalg::all_finite(&next) {
            return Err(Error::Numerical("DARE iterate is not finite".into()));
        }
        let step = linalg::spectral_norm(&(&next - &p));
        let scale = linalg::spectral_norm(&p).max(1.0);
        p = next;
        if step <= opts.tol * scale {
            return Ok(p);
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter })
}

/// Simulates `u_i = law(i, x_i)`, `x_{i+1} = A x_i + B u_i + w_i` and fills in
/// the realized cost under `schedule`.
pub fn rollout<L: FeedbackLaw, S: CostSource>(
    sys: &LinearSystem,
    law: &L,
    x0: &Vector,
    w: &[Vector],
    schedule: &S,
) -> Result<Trajectory> {
    let horizon = law.steps() + 1;
    dim_check(schedule.horizon() == horizon, || {
        format!("law has {} steps but schedule horizon is {}", law.steps(), schedule.horizon())
    })?;
    check_disturbances(w, horizon, sys.n())?;
    dim_check(x0.len() == sys.n(), || "initial state has the wrong length".into())?;
    let mut x = Vec::with_capacity(horizon);
    let mut u = Vec::with_capacity(horizon - 1);
    x.push(x0.clone());
    for i in 0..horizon - 1 {
        let ui = law.control(i, &x[i]);
        let next = sys.a() * &x[i] + sys.b() * &ui + disturbance(w, i, sys.n());
        if !linalg::vec_finite(&next) || !linalg::vec_finite(&ui) {
            return Err(Error::Overflow { step: i + 1 });
        }
        u.push(ui);
        x.push(next);
    }
    finish_trajectory(x, u, schedule)
}

pub(crate) fn finish_trajectory<S: CostSource>(x: Vec<Vector>, u: Vec<Vector>, schedule: &S) -> Result<Trajectory> {
    let cost = total_cost(&x, &u, schedule);
    if !cost.is_finite() {
        return Err(Error::Overflow { step: x.len() - 1 });
    }
    Ok(Trajectory { x, u, cost })
}
