//! Discrete-time linear systems, controllability, pole placement and the
//! benchmark system generators.

use nalgebra::{Complex, Schur, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Maximum number of draws made by [`random_controllable_system`].
pub const REJECTION_BUDGET: usize = 1000;

/// `x_{t+1} = A x_t + B u_t + w_t` with initial state `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: Mat,
    b: Mat,
    x0: Vector,
}

impl LinearSystem {
    /// Builds a system, rejecting inconsistent shapes and uncontrollable pairs.
    pub fn new(a: Mat, b: Mat, x0: Vector) -> Result<Self> {
        dim_check(a.is_square(), || format!("A is {}×{}, expected square", a.nrows(), a.ncols()))?;
        let n = a.nrows();
        dim_check(n >= 1, || "state dimension must be at least 1".into())?;
        dim_check(b.nrows() == n, || format!("B has {} rows, expected {n}", b.nrows()))?;
        dim_check(b.ncols() >= 1, || "B must have at least one column".into())?;
        dim_check(x0.len() == n, || format!("x0 has length {}, expected {n}", x0.len()))?;
        let rank = controllability_rank(&a, &b);
        if rank < n {
            return Err(Error::Precondition(format!("(A, B) is not controllable: controllability rank {rank} < {n}")));
        }
        Ok(Self { a, b, x0 })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn with_x0(mut self, x0: Vector) -> Result<Self> {
        dim_check(x0.len() == self.n(), || format!("x0 has length {}, expected {}", x0.len(), self.n()))?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn controllability_rank(&self) -> usize {
        controllability_rank(&self.a, &self.b)
    }

    /// One step of the dynamics: `A x + B u + w`.
    pub fn step(&self, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector> {
        let n = self.n();
        dim_check(x.len() == n, || format!("state has length {}, expected {n}", x.len()))?;
        dim_check(u.len() == self.m(), || format!("control has length {}, expected {}", u.len(), self.m()))?;
        dim_check(w.len() == n, || format!("disturbance has length {}, expected {n}", w.len()))?;
        Ok(&self.a * x + &self.b * u + w)
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a + &self.b * k
    }
}

/// Largest eigenvalue magnitude, using a real Schur decomposition so complex
/// eigenvalues are handled.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    dim_check(m.is_square(), || format!("{}×{} matrix is not square", m.nrows(), m.ncols()))?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex<f64>>> {
    dim_check(m.is_square(), || format!("{}×{} matrix is not square", m.nrows(), m.ncols()))?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    ctrb
}

pub fn controllability_rank(a: &Mat, b: &Mat) -> usize {
    linalg::numerical_rank(&controllability_matrix(a, b))
}

/// Ackermann's formula for single-input systems. Returns `K` such that the
/// eigenvalues of `A + BK` are `poles`.
pub fn place_poles_single_input(sys: &LinearSystem, poles: &[Complex<f64>]) -> Result<Mat> {
    if sys.m() != 1 {
        return Err(Error::Unsupported(format!("pole placement supports single-input systems only (m = {})", sys.m())));
    }
    let n = sys.n();
    if poles.len() != n {
        return Err(Error::Argument(format!("expected {n} poles, got {}", poles.len())));
    }
    check_conjugate_closed(poles)?;

    // coeffs[k] multiplies λ^{n−k}
    let mut coeffs = vec![Complex::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * p;
        }
        coeffs = next;
    }

    let a = sys.a();
    let mut char_poly_of_a = Mat::identity(n, n);
    for c in &coeffs[1..] {
        char_poly_of_a = &char_poly_of_a * a + Mat::identity(n, n) * c.re;
    }

    let ctrb = controllability_matrix(a, sys.b());
    if linalg::numerical_rank(&ctrb) < n {
        return Err(Error::Precondition("(A, B) is not controllable".into()));
    }
    let mut e_n = Vector::zeros(n);
    e_n[n - 1] = 1.0;
    let row = ctrb
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or_else(|| Error::Numerical("controllability matrix is singular".into()))?;
    let k = -(row.transpose() * char_poly_of_a);
    Ok(Mat::from_row_slice(1, n, k.as_slice()))
}

fn check_conjugate_closed(poles: &[Complex<f64>]) -> Result<()> {
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let p = poles[i];
        let tol = 1e-12 * p.norm().max(1.0);
        if p.im.abs() <= tol {
            used[i] = true;
            continue;
        }
        let partner = (0..poles.len()).find(|&j| j != i && !used[j] && (poles[j] - p.conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return Err(Error::Argument(format!("pole {p} has no complex-conjugate partner"))),
        }
    }
    Ok(())
}

/// Real poles as complex numbers.
pub fn real_poles(values: &[f64]) -> Vec<Complex<f64>> {
    values.iter().map(|&v| Complex::new(v, 0.0)).collect()
}

/// Draws `A` (n×n) and `B` (n×m) with i.i.d. Uniform(lo, hi) entries until the
/// pair is controllable.
pub fn random_controllable_system<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    lo: f64,
    hi: f64,
    x0: Vector,
    rng: &mut R,
) -> Result<LinearSystem> {
    if n == 0 || m == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty range ({lo}, {hi})")));
    }
    dim_check(x0.len() == n, || format!("x0 has length {}, expected {n}", x0.len()))?;
    for _ in 0..REJECTION_BUDGET {
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(lo..hi));
        let b = Mat::from_fn(n, m, |_, _| rng.random_range(lo..hi));
        if controllability_rank(&a, &b) == n {
            return LinearSystem::new(a, b, x0);
        }
    }
    Err(Error::Generation { attempts: REJECTION_BUDGET })
}

/// `A x + B u + w` for `sys`.
pub fn simulate_step(sys: &LinearSystem, x: &Vector, u: &Vector, w: &Vector) -> Result<Vector> {
    sys.step(x, u, w)
}

/// The linearized inverted pendulum, used as printed as a discrete-time model.
pub fn inverted_pendulum(x0: Vector) -> Result<LinearSystem> {
    #[rustfmt::skip]
    let a = Mat::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        0.0, -0.1818, 2.6727, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, -18.1818, 31.1818, 0.0,
    ]);
    let b = Mat::from_column_slice(4, 1, &[0.0, 1.8182, 0.0, 4.5455]);
    LinearSystem::new(a, b, x0)
}

/// Tracking-gain poles used with the pendulum and random benchmarks.
pub const DEFAULT_POLES: [f64; 4] = [1e-3, 6e-3, 4e-3, 3e-3];

/// Zero-mean Gaussian disturbance with covariance `W_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    covariance: Mat,
    factor: Mat,
}

impl DisturbanceModel {
    pub fn new(covariance: Mat) -> Result<Self> {
        dim_check(covariance.is_square(), || "covariance must be square".into())?;
        if !linalg::is_symmetric(&covariance, 1e-12) {
            return Err(Error::Argument("covariance is not symmetric".into()));
        }
        if !linalg::is_psd(&covariance) {
            return Err(Error::Argument("covariance is not positive semidefinite".into()));
        }
        let eig = SymmetricEigen::new(linalg::symmetrize(&covariance));
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * Mat::from_diagonal(&roots);
        Ok(Self { covariance, factor })
    }

    /// `variance · I_n`.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self> {
        Self::new(Mat::identity(n, n) * variance)
    }

    pub fn covariance(&self) -> &Mat {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.covariance.iter().all(|&v| v == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let z = Vector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.factor * z
    }

    /// `len` i.i.d. draws.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Vector> {
        (0..len).map(|_| self.sample(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64) -> LinearSystem {
        LinearSystem::new(Mat::from_element(1, 1, a), Mat::from_element(1, 1, b), Vector::from_element(1, 1.0)).unwrap()
    }

    fn pendulum() -> LinearSystem {
        inverted_pendulum(Vector::from_element(4, 1.0)).unwrap()
    }

    #[test]
    fn step_examples() {
        let s = scalar(0.0, 1.0);
        let x = s.step(&Vector::from_element(1, 5.0), &Vector::from_element(1, 3.0), &Vector::zeros(1)).unwrap();
        assert_eq!(x[0], 3.0);
        let s = scalar(1.0, 1.0);
        let x = s
            .step(&Vector::from_element(1, 2.0), &Vector::from_element(1, -1.0), &Vector::from_element(1, 0.5))
            .unwrap();
        assert_eq!(x[0], 1.5);
        let p = pendulum();
        let e1 = Vector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        let x = p.step(&e1, &Vector::zeros(1), &Vector::zeros(4)).unwrap();
        assert_eq!(x, Vector::zeros(4));
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let p = pendulum();
        assert!(matches!(p.step(&Vector::zeros(3), &Vector::zeros(1), &Vector::zeros(4)), Err(Error::Dimension(_))));
        assert!(matches!(p.step(&Vector::zeros(4), &Vector::zeros(2), &Vector::zeros(4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Mat::identity(3, 3)).unwrap() - 1.0).abs() < 1e-12);
        let d = Mat::from_diagonal(&Vector::from_column_slice(&[0.5, -0.9]));
        assert!((spectral_radius(&d).unwrap() - 0.9).abs() < 1e-12);
        let rot = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn controllability_examples() {
        assert_eq!(scalar(1.0, 1.0).controllability_rank(), 1);
        let a = Mat::from_diagonal(&Vector::from_column_slice(&[1.0, 2.0]));
        let b = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(controllability_rank(&a, &b), 1);
        assert!(matches!(LinearSystem::new(a, b, Vector::zeros(2)), Err(Error::Precondition(_))));
        assert_eq!(pendulum().controllability_rank(), 4);
    }

    #[test]
    fn pendulum_matrices() {
        let p = pendulum();
        assert_eq!(p.a()[(1, 2)], 2.6727);
        assert_eq!(p.b().column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.8182, 0.0, 4.5455]);
    }

    fn double_integrator() -> LinearSystem {
        LinearSystem::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            Vector::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn ackermann_hand_examples() {
        let s = double_integrator();
        let k = place_poles_single_input(&s, &real_poles(&[0.0, 0.0])).unwrap();
        assert!(k.amax() < 1e-15);
        let k = place_poles_single_input(&s, &real_poles(&[0.1, 0.2])).unwrap();
        assert!((k[(0, 0)] + 0.02).abs() < 1e-14);
        assert!((k[(0, 1)] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn ackermann_pendulum_is_fast() {
        let p = pendulum();
        let k = place_poles_single_input(&p, &real_poles(&DEFAULT_POLES)).unwrap();
        let rho = spectral_radius(&p.closed_loop(&k)).unwrap();
        assert!(rho <= 6e-3 + 1e-4, "rho = {rho}");
    }

    #[test]
    fn ackermann_errors() {
        let s = double_integrator();
        let poles = vec![Complex::new(0.1, 0.2), Complex::new(0.1, 0.3)];
        assert!(matches!(place_poles_single_input(&s, &poles), Err(Error::Argument(_))));
        let two_inputs = LinearSystem::new(Mat::identity(2, 2), Mat::identity(2, 2), Vector::zeros(2)).unwrap();
        assert!(matches!(place_poles_single_input(&two_inputs, &real_poles(&[0.1, 0.2])), Err(Error::Unsupported(_))));
    }

    #[test]
    fn complex_pole_pair() {
        let s = double_integrator();
        let poles = vec![Complex::new(0.3, 0.4), Complex::new(0.3, -0.4)];
        let k = place_poles_single_input(&s, &poles).unwrap();
        let rho = spectral_radius(&s.closed_loop(&k)).unwrap();
        assert!((rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_generation_is_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_controllable_system(2, 1, 0.0, 10.0, Vector::zeros(2), &mut rng).unwrap()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn random_generation_acceptance_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let accepted = (0..1000)
            .filter(|_| {
                let a = Mat::from_fn(4, 4, |_, _| rng.random_range(0.0..10.0));
                let b = Mat::from_fn(4, 1, |_, _| rng.random_range(0.0..10.0));
                controllability_rank(&a, &b) == 4
            })
            .count();
        assert!(accepted >= 990, "accepted {accepted}/1000");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_controllable_system(1, 1, 0.0, 10.0, Vector::zeros(1), &mut rng).unwrap();
        assert_eq!(s.controllability_rank(), 1);
    }

    #[test]
    fn disturbance_model_validation() {
        assert!(DisturbanceModel::new(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        let zero = DisturbanceModel::isotropic(3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(zero.sample(&mut rng), Vector::zeros(3));
    }

    #[test]
    fn disturbance_sample_covariance() {
        let cov = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let model = DisturbanceModel::new(cov.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let mut acc = Mat::zeros(2, 2);
        for _ in 0..n {
            let w = model.sample(&mut rng);
            acc += &w * w.transpose();
        }
        acc /= n as f64;
        assert!((acc - cov).amax() < 0.15);
    }
}
