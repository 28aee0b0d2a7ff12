//! Brute-force finite-horizon LQR: stack every control into one vector and
//! solve the normal equations of the resulting quadratic program.
//!
//! Shares no code with the Riccati recursions, so it can be used to check them.

use crate::costs::CostSource;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{Mat, Vector};
use crate::riccati::{check_disturbances, disturbance, finish_trajectory, Trajectory};
use crate::system::LinearSystem;

/// Largest number of stacked control variables the oracle accepts.
pub const ORACLE_CAP: usize = 64;

pub fn brute_force_lqr_oracle<S: CostSource>(sys: &LinearSystem, schedule: &S, w: &[Vector]) -> Result<Trajectory> {
    let horizon = schedule.horizon();
    let (n, m) = (sys.n(), sys.m());
    let steps = horizon - 1;
    let size = steps * m;
    if size > ORACLE_CAP {
        return Err(Error::OracleTooLarge { size, cap: ORACLE_CAP });
    }
    check_disturbances(w, horizon, n)?;
    dim_check(schedule.state_cost(0).nrows() == n, || "schedule does not match the system".into())?;
    let (a, b) = (sys.a(), sys.b());

    // x_t = phi[t] · U + offset[t]
    let mut phi = vec![Mat::zeros(n, size)];
    let mut offset = vec![sys.x0().clone()];
    for t in 0..steps {
        let mut next = a * &phi[t];
        next.view_mut((0, t * m), (n, m)).copy_from(b);
        phi.push(next);
        offset.push(a * &offset[t] + disturbance(w, t, n));
    }

    let mut hessian = Mat::zeros(size, size);
    let mut gradient = Vector::zeros(size);
    for t in 0..horizon {
        let q = schedule.state_cost(t);
        let phi_q = phi[t].transpose() * q;
        hessian += &phi_q * &phi[t];
        gradient += &phi_q * &offset[t];
    }
    for t in 0..steps {
        let mut block = hessian.view_mut((t * m, t * m), (m, m));
        block += schedule.input_cost(t);
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let controls = match hessian.clone().cholesky() {
        Some(chol) => chol.solve(&(-&gradient)),
        None => hessian
            .lu()
            .solve(&(-&gradient))
            .ok_or_else(|| Error::Numerical("oracle normal equations are singular".into()))?,
    };

    let u: Vec<Vector> = (0..steps).map(|t| controls.rows(t * m, m).into_owned()).collect();
    let mut x = vec![sys.x0().clone()];
    for t in 0..steps {
        let next = a * &x[t] + b * &u[t] + disturbance(w, t, n);
        x.push(next);
    }
    finish_trajectory(x, u, schedule)
}
