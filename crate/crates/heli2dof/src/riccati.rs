//! Gain synthesis: Lyapunov and continuous algebraic Riccati solvers built
//! on a matrix-sign-function iteration, plus quadratic-cost bookkeeping.
//!
//! The solvers are dimension-generic (`DMatrix`) so they can be certified
//! against small analytic systems and batches of randomized plants, not
//! just the six-state rig model. Every Riccati solve is gated by an
//! explicit residual check — a solution that does not satisfy its own
//! equation is reported as an error, never returned silently.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix6, Vector2, Vector6};
use thiserror::Error;

use crate::model::LinearModel;
use crate::simulate::Trace;

/// Relative residual tolerance a Riccati solution must meet:
/// `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F ≤ RESIDUAL_RTOL · (1 + ‖P‖_F)`.
pub const RESIDUAL_RTOL: f64 = 1e-9;

const SIGN_ITER_MAX: usize = 100;
const SIGN_ITER_RTOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("input matrix contains a non-finite entry")]
    NonFiniteInput,
    #[error("weight matrix {name} must be symmetric positive definite")]
    WeightNotPositiveDefinite { name: &'static str },
    #[error("Lyapunov operator is singular (A has an eigenvalue pair summing to zero)")]
    SingularLyapunov,
    #[error("sign iteration hit a singular iterate (Hamiltonian eigenvalue on the imaginary axis?)")]
    SingularIterate,
    #[error("solution extraction failed: stacked coefficient block is rank-deficient")]
    ExtractionFailed,
    #[error("Riccati residual {residual:.3e} exceeds tolerance {tolerance:.3e}; system may not be stabilizable")]
    NotConverged { residual: f64, tolerance: f64 },
    #[error("cost evaluation needs at least two samples with matching state/input counts, got {0}")]
    BadCostSamples(String),
}

/// State and input weights for the six-state rig cost
/// `∫ xᵀQx + uᵀRu dt`. `Default` is the tuning used for all bundled
/// scenarios: heavy weight on angles and yaw rate, moderate on integral
/// action, unit input cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix6<f64>,
    pub r: Matrix2<f64>,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: Matrix6::from_diagonal(&Vector6::new(200.0, 150.0, 100.0, 200.0, 50.0, 50.0)),
            r: Matrix2::identity(),
        }
    }
}

impl LqrWeights {
    /// Q must be symmetric positive semidefinite, R symmetric positive
    /// definite. The PSD check shifts Q by a hair so boundary cases
    /// (zero rows) still pass Cholesky.
    pub fn validate(&self) -> Result<(), RiccatiError> {
        if self.q.iter().chain(self.r.iter()).any(|x| !x.is_finite()) {
            return Err(RiccatiError::NonFiniteInput);
        }
        if (self.q - self.q.transpose()).norm() > 1e-9 * (1.0 + self.q.norm()) {
            return Err(RiccatiError::WeightNotPositiveDefinite { name: "Q" });
        }
        if (self.q + Matrix6::identity() * 1e-12).cholesky().is_none() {
            return Err(RiccatiError::WeightNotPositiveDefinite { name: "Q" });
        }
        if (self.r - self.r.transpose()).norm() > 1e-9 * (1.0 + self.r.norm()) {
            return Err(RiccatiError::WeightNotPositiveDefinite { name: "R" });
        }
        if self.r.cholesky().is_none() {
            return Err(RiccatiError::WeightNotPositiveDefinite { name: "R" });
        }
        Ok(())
    }

    pub fn q_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(6, 6, self.q.as_slice())
    }

    pub fn r_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, self.r.as_slice())
    }
}

/// A certified Riccati solution: the stabilizing `P`, the feedback gain
/// `K = R⁻¹BᵀP`, the Frobenius norm of the equation residual, and how
/// many sign iterations the solve took.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn check_finite(matrices: &[&DMatrix<f64>]) -> Result<(), RiccatiError> {
    for m in matrices {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(RiccatiError::NonFiniteInput);
        }
    }
    Ok(())
}

/// Solves the continuous Lyapunov equation `AᵀP + PA + Q = 0` for `P`
/// via the Kronecker-product linear system
/// `(I⊗Aᵀ + Aᵀ⊗I)·vec(P) = −vec(Q)`, then symmetrizes. Errors if the
/// operator is singular, i.e. some eigenvalue pair of `A` sums to zero.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let n = a.nrows();
    if n == 0 || !a.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    check_finite(&[a, q])?;
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let vec_p = op.lu().solve(&rhs).ok_or(RiccatiError::SingularLyapunov)?;
    if vec_p.iter().any(|x| !x.is_finite()) {
        return Err(RiccatiError::SingularLyapunov);
    }
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + &p.transpose()) * 0.5)
}

/// `ln |det M|` from the LU factorization, or `None` if `M` is singular.
/// Working in logs keeps the determinant-based scaling of the sign
/// iteration safe from overflow at larger dimensions.
fn log_abs_det(m: &DMatrix<f64>) -> Option<f64> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(acc)
}

/// Frobenius norm of the Riccati residual
/// `AᵀP + PA − PBR⁻¹BᵀP + Q` for a candidate `P`. Returns NaN if `R` is
/// not positive definite.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let rs = (r + r.transpose()) * 0.5;
    let Some(chol) = rs.cholesky() else {
        return f64::NAN;
    };
    let r_inv_bt_p = chol.solve(&(b.transpose() * p));
    (a.transpose() * p + p * a - p * b * r_inv_bt_p + q).norm()
}

/// Solves the continuous algebraic Riccati equation
/// `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` for the stabilizing `P`.
///
/// Method: matrix sign function of the Hamiltonian
/// `H = [[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]` by determinant-scaled inverse
/// averaging `Z ← (cZ + (cZ)⁻¹)/2`, least-squares extraction of `P` from
/// the stable invariant subspace, then up to three Kleinman–Newton
/// refinement sweeps (each one Lyapunov solve). The returned solution is
/// guaranteed to satisfy the [`RESIDUAL_RTOL`] gate.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CareSolution, RiccatiError> {
    let n = a.nrows();
    let m = b.ncols();
    if n == 0 || m == 0 || !a.is_square() || b.nrows() != n {
        return Err(RiccatiError::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if q.nrows() != n || q.ncols() != n || r.nrows() != m || r.ncols() != m {
        return Err(RiccatiError::DimensionMismatch(format!(
            "Q is {}x{} (want {n}x{n}), R is {}x{} (want {m}x{m})",
            q.nrows(),
            q.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    check_finite(&[a, b, q, r])?;

    let rs = (r + r.transpose()) * 0.5;
    let r_chol = rs
        .clone()
        .cholesky()
        .ok_or(RiccatiError::WeightNotPositiveDefinite { name: "R" })?;

    // Hamiltonian H = [[A, -B R^-1 B^T], [-Q, -A^T]]
    let g = b * r_chol.solve(&b.transpose());
    let two_n = 2 * n;
    let mut h = DMatrix::<f64>::zeros(two_n, two_n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    // sign iteration with determinant scaling
    let mut z = h;
    let mut iterations = 0usize;
    for _ in 0..SIGN_ITER_MAX {
        iterations += 1;
        let logdet = log_abs_det(&z).ok_or(RiccatiError::SingularIterate)?;
        let c = (-logdet / two_n as f64).exp();
        let zs = &z * c;
        let zs_inv = zs
            .clone()
            .lu()
            .try_inverse()
            .ok_or(RiccatiError::SingularIterate)?;
        let z_next = (&zs + &zs_inv) * 0.5;
        let step = (&z_next - &z).norm();
        z = z_next;
        if !z.iter().all(|x| x.is_finite()) {
            return Err(RiccatiError::SingularIterate);
        }
        if step <= SIGN_ITER_RTOL * z.norm() {
            break;
        }
    }

    // P spans the stable subspace: [S12; S22 + I] P = -[S11 + I; S21]
    let s11 = z.view((0, 0), (n, n)).into_owned();
    let s12 = z.view((0, n), (n, n)).into_owned();
    let s21 = z.view((n, 0), (n, n)).into_owned();
    let s22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::<f64>::zeros(two_n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(&s22 + &eye));
    let mut rhs = DMatrix::<f64>::zeros(two_n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(&s11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-&s21));
    let normal = lhs.transpose() * &lhs;
    let projected = lhs.transpose() * &rhs;
    let p_raw = normal
        .lu()
        .solve(&projected)
        .ok_or(RiccatiError::ExtractionFailed)?;
    let mut p = (&p_raw + &p_raw.transpose()) * 0.5;

    // Kleinman–Newton polish: each sweep solves one Lyapunov equation for
    // the current closed loop and keeps the iterate only if the residual
    // actually improved.
    let mut best_p = p.clone();
    let mut best_res = care_residual(a, b, q, r, &best_p);
    if !best_res.is_finite() {
        return Err(RiccatiError::ExtractionFailed);
    }
    for _ in 0..3 {
        let k = r_chol.solve(&(b.transpose() * &p));
        let a_cl = a - b * &k;
        let q_kn = q + k.transpose() * &rs * &k;
        let Ok(p_next) = solve_lyapunov(&a_cl, &q_kn) else {
            break;
        };
        p = p_next;
        let res = care_residual(a, b, q, r, &p);
        if res.is_finite() && res < best_res {
            best_res = res;
            best_p = p.clone();
        } else {
            break;
        }
        if best_res <= 0.01 * RESIDUAL_RTOL * (1.0 + best_p.norm()) {
            break;
        }
    }

    let tolerance = RESIDUAL_RTOL * (1.0 + best_p.norm());
    if !(best_res <= tolerance) {
        return Err(RiccatiError::NotConverged {
            residual: best_res,
            tolerance,
        });
    }
    let k = r_chol.solve(&(b.transpose() * &best_p));
    Ok(CareSolution {
        p: best_p,
        k,
        residual_norm: best_res,
        iterations,
    })
}

/// The LQR state-feedback gain `K = R⁻¹BᵀP` for the cost
/// `∫ xᵀQx + uᵀRu dt`. Scaling `Q` and `R` by a common factor leaves `K`
/// unchanged.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, RiccatiError> {
    solve_care(a, b, q, r).map(|sol| sol.k)
}

/// Convenience wrapper: synthesize the rig's feedback gain from its
/// linear model and cost weights.
pub fn synthesize_gains(
    model: &LinearModel,
    weights: &LqrWeights,
) -> Result<CareSolution, RiccatiError> {
    weights.validate()?;
    solve_care(&model.a_dyn(), &model.b_dyn(), &weights.q_dyn(), &weights.r_dyn())
}

/// True iff every eigenvalue of `A` has strictly negative real part,
/// decided by a Lyapunov certificate: solve `AᵀP + PA = −I` and test `P`
/// for positive definiteness. Any solver failure (singular operator,
/// non-finite input) counts as "not Hurwitz".
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    if a.nrows() == 0 || !a.is_square() || a.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let eye = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    match solve_lyapunov(a, &eye) {
        Ok(p) => p.cholesky().is_some(),
        Err(_) => false,
    }
}

/// Trapezoid-rule evaluation of `∫ xᵀQx + uᵀRu dt` over uniformly spaced
/// samples. `xs` and `us` must have equal length ≥ 2.
pub fn quadratic_cost(
    xs: &[Vector6<f64>],
    us: &[Vector2<f64>],
    dt: f64,
    weights: &LqrWeights,
) -> Result<f64, RiccatiError> {
    if xs.len() != us.len() || xs.len() < 2 {
        return Err(RiccatiError::BadCostSamples(format!(
            "{} states vs {} inputs",
            xs.len(),
            us.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(RiccatiError::BadCostSamples(format!("dt = {dt}")));
    }
    let integrand = |x: &Vector6<f64>, u: &Vector2<f64>| -> f64 {
        (weights.q * x).dot(x) + (weights.r * u).dot(u)
    };
    let last = xs.len() - 1;
    let mut acc = 0.5 * (integrand(&xs[0], &us[0]) + integrand(&xs[last], &us[last]));
    for k in 1..last {
        acc += integrand(&xs[k], &us[k]);
    }
    Ok(acc * dt)
}

/// Evaluates the synthesis cost over a recorded closed-loop run. The
/// integral states are not logged in a trace, so they are reconstructed
/// by trapezoid accumulation of the recorded tracking errors; angles,
/// rates, and commands come straight from the records.
pub fn evaluate_lqr_cost(trace: &Trace, weights: &LqrWeights) -> Result<f64, RiccatiError> {
    weights.validate()?;
    let n = trace.records.len();
    if n < 2 {
        return Err(RiccatiError::BadCostSamples(format!("{n} trace records")));
    }
    let dt = trace.dt;
    let mut xs = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    let mut i_theta = 0.0;
    let mut i_psi = 0.0;
    let mut prev_err: Option<(f64, f64)> = None;
    for rec in &trace.records {
        let e_theta = rec.theta - rec.theta_ref;
        let e_psi = rec.psi - rec.psi_ref;
        if let Some((pe_theta, pe_psi)) = prev_err {
            i_theta += 0.5 * (e_theta + pe_theta) * dt;
            i_psi += 0.5 * (e_psi + pe_psi) * dt;
        }
        prev_err = Some((e_theta, e_psi));
        xs.push(Vector6::new(
            rec.theta,
            rec.psi,
            rec.theta_dot,
            rec.psi_dot,
            i_theta,
            i_psi,
        ));
        us.push(Vector2::new(rec.u_p, rec.u_y));
    }
    quadratic_cost(&xs, &us, dt, weights)
}
