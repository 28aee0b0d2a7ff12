//! Time-varying quadratic cost schedules, their Loewner bounds and extrema,
//! and the frozen surrogate schedule used for prediction.

use rand::Rng;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, Mat};

/// Read access to a cost sequence `Q_0..Q_{T−1}`, `R_0..R_{T−2}`.
///
/// Online policies only see the schedule through this trait so that tests can
/// audit which indices are read at each decision time.
pub trait CostSource {
    /// Horizon `T` (number of states).
    fn horizon(&self) -> usize;
    fn state_cost(&self, i: usize) -> &Mat;
    fn input_cost(&self, i: usize) -> &Mat;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    q: Vec<Mat>,
    r: Vec<Mat>,
}

impl CostSchedule {
    pub fn new(q: Vec<Mat>, r: Vec<Mat>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::Argument(format!("horizon must be at least 2, got {}", q.len())));
        }
        dim_check(r.len() + 1 == q.len(), || {
            format!("{} state costs require {} input costs, got {}", q.len(), q.len() - 1, r.len())
        })?;
        let n = q[0].nrows();
        let m = r[0].nrows();
        for (t, qt) in q.iter().enumerate() {
            dim_check(qt.shape() == (n, n), || format!("Q_{t} is not {n}×{n}"))?;
            if !linalg::is_symmetric(qt, 1e-12) || !linalg::is_psd(qt) {
                return Err(Error::Argument(format!("Q_{t} is not symmetric positive semidefinite")));
            }
        }
        for (t, rt) in r.iter().enumerate() {
            dim_check(rt.shape() == (m, m), || format!("R_{t} is not {m}×{m}"))?;
            if !linalg::is_symmetric(rt, 1e-12) || !linalg::is_pd(rt) {
                return Err(Error::Argument(format!("R_{t} is not symmetric positive definite")));
            }
        }
        Ok(Self { q, r })
    }

    /// Same `Q` and `R` at every step.
    pub fn constant(q: Mat, r: Mat, horizon: usize) -> Result<Self> {
        let steps = horizon.saturating_sub(1);
        Self::new(vec![q; horizon], vec![r; steps])
    }

    pub fn n(&self) -> usize {
        self.q[0].nrows()
    }

    pub fn m(&self) -> usize {
        self.r[0].nrows()
    }

    pub fn state_costs(&self) -> &[Mat] {
        &self.q
    }

    pub fn input_costs(&self) -> &[Mat] {
        &self.r
    }
}

impl CostSource for CostSchedule {
    fn horizon(&self) -> usize {
        self.q.len()
    }

    fn state_cost(&self, i: usize) -> &Mat {
        &self.q[i]
    }

    fn input_cost(&self, i: usize) -> &Mat {
        &self.r[i]
    }
}

impl<S: CostSource + ?Sized> CostSource for &S {
    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn state_cost(&self, i: usize) -> &Mat {
        (**self).state_cost(i)
    }

    fn input_cost(&self, i: usize) -> &Mat {
        (**self).input_cost(i)
    }
}

/// Index at which a schedule is frozen after `t` steps with preview `w`.
/// Once `t + W ≥ T − 2` every input cost is revealed and only the terminal
/// state cost is left, which then counts as known: the result is `T − 1`.
pub fn frozen_index(t: usize, w: usize, horizon: usize) -> usize {
    if t + w + 2 >= horizon {
        horizon - 1
    } else {
        t + w
    }
}

/// View of a schedule holding every matrix past index `s` at its value at `s`.
///
/// Only indices `≤ s` of the inner source are ever read. With `s ≥ T − 1`
/// the view is the schedule itself.
#[derive(Debug, Clone, Copy)]
pub struct FrozenView<S> {
    inner: S,
    s: usize,
}

impl<S: CostSource> FrozenView<S> {
    pub fn new(inner: S, s: usize) -> Self {
        let s = s.min(inner.horizon() - 1);
        Self { inner, s }
    }

    pub fn index(&self) -> usize {
        self.s
    }

    pub fn is_exact(&self) -> bool {
        self.s + 1 >= self.inner.horizon()
    }
}

impl<S: CostSource> CostSource for FrozenView<S> {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn state_cost(&self, i: usize) -> &Mat {
        self.inner.state_cost(i.min(self.s))
    }

    fn input_cost(&self, i: usize) -> &Mat {
        self.inner.input_cost(i.min(self.s))
    }
}

/// Materialized frozen schedule for time `t` and preview `w`.
pub fn frozen_schedule(schedule: &CostSchedule, t: usize, w: usize) -> CostSchedule {
    let view = FrozenView::new(schedule, frozen_index(t, w, schedule.horizon()));
    if view.is_exact() {
        return schedule.clone();
    }
    to_schedule(&view)
}

/// Copies any cost source into an owned schedule.
pub fn to_schedule<S: CostSource>(source: &S) -> CostSchedule {
    let horizon = source.horizon();
    CostSchedule {
        q: (0..horizon).map(|i| source.state_cost(i).clone()).collect(),
        r: (0..horizon - 1).map(|i| source.input_cost(i).clone()).collect(),
    }
}

/// Loewner bounds `Q_min ⪯ Q_t ⪯ Q_max`, `R_min ⪯ R_t ⪯ R_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBounds {
    pub q_min: Mat,
    pub q_max: Mat,
    pub r_min: Mat,
    pub r_max: Mat,
}

impl CostBounds {
    pub fn new(q_min: Mat, q_max: Mat, r_min: Mat, r_max: Mat) -> Result<Self> {
        dim_check(q_min.shape() == q_max.shape() && q_min.is_square(), || {
            "Q bounds must be square and of equal size".into()
        })?;
        dim_check(r_min.shape() == r_max.shape() && r_min.is_square(), || {
            "R bounds must be square and of equal size".into()
        })?;
        for (name, m) in [("Q_min", &q_min), ("Q_max", &q_max), ("R_min", &r_min), ("R_max", &r_max)] {
            if !linalg::is_symmetric(m, 1e-12) || !linalg::is_pd(m) {
                return Err(Error::Argument(format!("{name} is not symmetric positive definite")));
            }
        }
        if !linalg::loewner_leq(&q_min, &q_max) {
            return Err(Error::Argument("Q_min ⪯ Q_max does not hold".into()));
        }
        if !linalg::loewner_leq(&r_min, &r_max) {
            return Err(Error::Argument("R_min ⪯ R_max does not hold".into()));
        }
        Ok(Self { q_min, q_max, r_min, r_max })
    }

    /// Bounds that are multiples of the identity.
    pub fn scaled_identity(n: usize, m: usize, q_min: f64, q_max: f64, r_min: f64, r_max: f64) -> Result<Self> {
        Self::new(
            Mat::identity(n, n) * q_min,
            Mat::identity(n, n) * q_max,
            Mat::identity(m, m) * r_min,
            Mat::identity(m, m) * r_max,
        )
    }

    /// The benchmark bounds: `Q ∈ [8e3, 3.2e4]·I_n`, `R ∈ [2e3, 9.8e4]·I_m`.
    pub fn benchmark(n: usize, m: usize) -> Self {
        Self::scaled_identity(n, m, 8e3, 3.2e4, 2e3, 9.8e4).expect("benchmark bounds are valid")
    }

    pub fn n(&self) -> usize {
        self.q_min.nrows()
    }

    pub fn m(&self) -> usize {
        self.r_min.nrows()
    }
}

/// Loewner extrema of a schedule; each is an element of the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CostExtrema {
    pub q_min: Mat,
    pub q_max: Mat,
    pub r_min: Mat,
    pub r_max: Mat,
}

impl From<&CostBounds> for CostExtrema {
    fn from(b: &CostBounds) -> Self {
        Self { q_min: b.q_min.clone(), q_max: b.q_max.clone(), r_min: b.r_min.clone(), r_max: b.r_max.clone() }
    }
}

pub fn verify_bounds(schedule: &CostSchedule, bounds: &CostBounds) -> bool {
    if schedule.n() != bounds.n() || schedule.m() != bounds.m() {
        return false;
    }
    let inside = |lo: &Mat, x: &Mat, hi: &Mat| linalg::loewner_leq(lo, x) && linalg::loewner_leq(x, hi);
    schedule.q.iter().all(|q| inside(&bounds.q_min, q, &bounds.q_max))
        && schedule.r.iter().all(|r| inside(&bounds.r_min, r, &bounds.r_max))
}

/// `Q_t = Q_min + u_t (Q_max − Q_min)` and likewise for `R_t`, from explicit
/// interpolation weights in `[0, 1]`.
pub fn interpolated_schedule(bounds: &CostBounds, q_weights: &[f64], r_weights: &[f64]) -> Result<CostSchedule> {
    if q_weights.iter().chain(r_weights).any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::Argument("interpolation weights must lie in [0, 1]".into()));
    }
    let dq = &bounds.q_max - &bounds.q_min;
    let dr = &bounds.r_max - &bounds.r_min;
    let q = q_weights.iter().map(|&u| &bounds.q_min + &dq * u).collect();
    let r = r_weights.iter().map(|&u| &bounds.r_min + &dr * u).collect();
    CostSchedule::new(q, r)
}

/// Random schedule with one Uniform(0, 1) weight per matrix per step.
pub fn random_uniform_schedule<R: Rng + ?Sized>(
    bounds: &CostBounds,
    horizon: usize,
    rng: &mut R,
) -> Result<CostSchedule> {
    if horizon < 2 {
        return Err(Error::Argument(format!("horizon must be at least 2, got {horizon}")));
    }
    let q_weights: Vec<f64> = (0..horizon).map(|_| rng.random::<f64>()).collect();
    let r_weights: Vec<f64> = (0..horizon - 1).map(|_| rng.random::<f64>()).collect();
    interpolated_schedule(bounds, &q_weights, &r_weights)
}

fn extremum(seq: &[Mat], want_max: bool, which: &'static str) -> Result<Mat> {
    let by_trace = |a: &&Mat, b: &&Mat| a.trace().total_cmp(&b.trace());
    let candidate = if want_max { seq.iter().max_by(by_trace) } else { seq.iter().min_by(by_trace) }
        .expect("schedules are nonempty");
    let dominates =
        seq.iter().all(
            |x| {
                if want_max {
                    linalg::loewner_leq(x, candidate)
                } else {
                    linalg::loewner_leq(candidate, x)
                }
            },
        );
    if dominates {
        Ok(candidate.clone())
    } else {
        Err(Error::IncomparableSequence { which })
    }
}

/// Loewner extrema of the sequence. A Loewner maximum, when it exists, also
/// has the largest trace, so only that candidate needs checking.
pub fn sequence_extrema(schedule: &CostSchedule) -> Result<CostExtrema> {
    Ok(CostExtrema {
        q_min: extremum(&schedule.q, false, "minimum of Q")?,
        q_max: extremum(&schedule.q, true, "maximum of Q")?,
        r_min: extremum(&schedule.r, false, "minimum of R")?,
        r_max: extremum(&schedule.r, true, "maximum of R")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn constant_schedule_within_tight_bounds() {
        let b = CostBounds::scaled_identity(2, 1, 3.0, 3.0, 1.0, 1.0).unwrap();
        let sched = CostSchedule::constant(Mat::identity(2, 2) * 3.0, s(1.0), 5).unwrap();
        assert!(verify_bounds(&sched, &b));
    }

    #[test]
    fn doubled_q_violates_bounds() {
        let b = CostBounds::scaled_identity(1, 1, 1.0, 2.0, 1.0, 1.0).unwrap();
        let sched = CostSchedule::new(vec![s(1.5), s(4.0), s(1.0)], vec![s(1.0), s(1.0)]).unwrap();
        assert!(!verify_bounds(&sched, &b));
    }

    #[test]
    fn schedule_validation() {
        assert!(CostSchedule::new(vec![s(1.0)], vec![]).is_err());
        assert!(CostSchedule::new(vec![s(1.0), s(1.0)], vec![s(0.0)]).is_err());
        assert!(CostSchedule::new(vec![s(-1.0), s(1.0)], vec![s(1.0)]).is_err());
        assert!(CostSchedule::new(vec![s(1.0), s(1.0)], vec![s(1.0), s(1.0)]).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let b = CostBounds::benchmark(4, 1);
        let lo = interpolated_schedule(&b, &[0.0; 6], &[0.0; 5]).unwrap();
        assert!(lo.state_costs().iter().all(|q| *q == b.q_min));
        let hi = interpolated_schedule(&b, &[1.0; 6], &[1.0; 5]).unwrap();
        assert!(hi.state_costs().iter().all(|q| *q == b.q_max));
        assert!(hi.input_costs().iter().all(|r| *r == b.r_max));
    }

    #[test]
    fn benchmark_schedule_is_scaled_identity() {
        let b = CostBounds::benchmark(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sched = random_uniform_schedule(&b, 30, &mut rng).unwrap();
        assert!(verify_bounds(&sched, &b));
        for q in sched.state_costs() {
            let c = q[(0, 0)];
            assert!((8e3..=3.2e4).contains(&c));
            assert!((q - Mat::identity(4, 4) * c).amax() == 0.0);
        }
    }

    #[test]
    fn frozen_schedule_cases() {
        let sched = CostSchedule::new(vec![s(1.0), s(2.0), s(3.0), s(4.0)], vec![s(5.0), s(6.0), s(7.0)]).unwrap();
        let f = frozen_schedule(&sched, 1, 0);
        let qs: Vec<f64> = f.state_costs().iter().map(|q| q[(0, 0)]).collect();
        let rs: Vec<f64> = f.input_costs().iter().map(|r| r[(0, 0)]).collect();
        assert_eq!(qs, vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!(rs, vec![5.0, 6.0, 6.0]);
        assert_eq!(frozen_schedule(&sched, 1, 2), sched);
        assert_eq!(frozen_schedule(&sched, 3, 0), sched);
        assert_eq!(frozen_schedule(&sched, 2, 0), sched);
        assert_eq!(frozen_index(0, 1, 4), 1);
        assert_eq!(frozen_index(0, 2, 4), 3);
        let c = CostSchedule::constant(s(2.0), s(3.0), 6).unwrap();
        assert_eq!(frozen_schedule(&c, 1, 1), c);
    }

    #[test]
    fn extrema_examples() {
        let c = CostSchedule::constant(s(2.0), s(3.0), 4).unwrap();
        let e = sequence_extrema(&c).unwrap();
        assert_eq!((e.q_min[(0, 0)], e.q_max[(0, 0)]), (2.0, 2.0));
        let sched = CostSchedule::new(vec![s(3.0), s(1.0), s(2.0)], vec![s(1.0), s(1.0)]).unwrap();
        let e = sequence_extrema(&sched).unwrap();
        assert_eq!((e.q_min[(0, 0)], e.q_max[(0, 0)]), (1.0, 3.0));
        let d = |a: f64, b: f64| Mat::from_diagonal(&DVector::from_column_slice(&[a, b]));
        let bad = CostSchedule::new(vec![d(1.0, 2.0), d(2.0, 1.0)], vec![s(1.0)]).unwrap();
        assert!(matches!(sequence_extrema(&bad), Err(Error::IncomparableSequence { .. })));
    }
}
