//! Linearized twin-rotor plant: parameters, state conventions, and dynamics.
//!
//! The state vector ordering is fixed everywhere as
//! `[theta, psi, theta_dot, psi_dot, i_theta, i_psi]` — pitch angle, yaw
//! angle, their rates, and the integrals of the tracking errors. The last
//! two rows make integral action part of the synthesis model, so the LQR
//! gain comes out already partitioned into P/D/I blocks.

use nalgebra::{DMatrix, Matrix2x6, Matrix6, Matrix6x2, Vector2, Vector6};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NonFiniteParam { name: &'static str, value: f64 },
    #[error("perturbation of {name} by {delta} violates parameter positivity")]
    BadPerturbation { name: &'static str, delta: f64 },
}

/// Physical parameters of the rig.
///
/// Damping in N/V, inertias in kg·m², mass in kg, arm length in m, thrust
/// constants in N·m/V, voltage limits in V. `Default` is the nominal
/// bench-top rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeliParams {
    pub b_p: f64,
    pub b_y: f64,
    pub j_eq_p: f64,
    pub j_eq_y: f64,
    pub m_h: f64,
    pub l: f64,
    pub k_pp: f64,
    pub k_py: f64,
    pub k_yp: f64,
    pub k_yy: f64,
    pub u_p_max: f64,
    pub u_y_max: f64,
}

impl Default for HeliParams {
    fn default() -> Self {
        Self {
            b_p: 0.8,
            b_y: 0.318,
            j_eq_p: 0.0384,
            j_eq_y: 0.0432,
            m_h: 1.3872,
            l: 0.186,
            k_pp: 0.204,
            k_py: 0.0068,
            k_yp: 0.0219,
            k_yy: 0.072,
            u_p_max: 24.0,
            u_y_max: 15.0,
        }
    }
}

/// Named parameters that [`perturb_params`] can scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    BP,
    BY,
    JeqP,
    JeqY,
    MH,
    L,
    KPp,
    KPy,
    KYp,
    KYy,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::BP => "b_p",
            ParamKind::BY => "b_y",
            ParamKind::JeqP => "j_eq_p",
            ParamKind::JeqY => "j_eq_y",
            ParamKind::MH => "m_h",
            ParamKind::L => "l",
            ParamKind::KPp => "k_pp",
            ParamKind::KPy => "k_py",
            ParamKind::KYp => "k_yp",
            ParamKind::KYy => "k_yy",
        }
    }
}

impl HeliParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positives = [
            ("j_eq_p", self.j_eq_p),
            ("j_eq_y", self.j_eq_y),
            ("m_h", self.m_h),
            ("l", self.l),
            ("u_p_max", self.u_p_max),
            ("u_y_max", self.u_y_max),
        ];
        for (name, value) in positives {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::NonPositiveParam { name, value });
            }
        }
        let finites = [
            ("b_p", self.b_p),
            ("b_y", self.b_y),
            ("k_pp", self.k_pp),
            ("k_py", self.k_py),
            ("k_yp", self.k_yp),
            ("k_yy", self.k_yy),
        ];
        for (name, value) in finites {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteParam { name, value });
            }
        }
        Ok(())
    }

    /// Effective pitch inertia `J_eq_p + m_h·l²`.
    pub fn pitch_inertia(&self) -> f64 {
        self.j_eq_p + self.m_h * self.l * self.l
    }

    /// Effective yaw inertia `J_eq_y + m_h·l²`.
    pub fn yaw_inertia(&self) -> f64 {
        self.j_eq_y + self.m_h * self.l * self.l
    }
}

/// Plant state with the fixed `[θ, Ψ, θ̇, Ψ̇, I_θ, I_Ψ]` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub theta: f64,
    pub psi: f64,
    pub theta_dot: f64,
    pub psi_dot: f64,
    pub i_theta: f64,
    pub i_psi: f64,
}

impl State {
    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::new(
            self.theta,
            self.psi,
            self.theta_dot,
            self.psi_dot,
            self.i_theta,
            self.i_psi,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            theta: v[0],
            psi: v[1],
            theta_dot: v[2],
            psi_dot: v[3],
            i_theta: v[4],
            i_psi: v[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Motor voltages, pitch and yaw channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub u_p: f64,
    pub u_y: f64,
}

impl ControlInput {
    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u_p, self.u_y)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { u_p: v[0], u_y: v[1] }
    }
}

/// Per-axis record of whether [`saturate`] clamped the command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SatFlags {
    pub pitch: bool,
    pub yaw: bool,
}

impl SatFlags {
    pub fn any(self) -> bool {
        self.pitch || self.yaw
    }
}

/// State-space matrices of the linearized plant, `ẋ = A·x + B·u`,
/// `y = C·x` with `y = (θ, Ψ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Matrix6<f64>,
    pub b: Matrix6x2<f64>,
    pub c: Matrix2x6<f64>,
}

impl LinearModel {
    /// Dynamically-sized copy of `A` for the general-purpose solvers.
    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(6, 6, self.a.as_slice())
    }

    /// Dynamically-sized copy of `B`.
    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(6, 2, self.b.as_slice())
    }

    /// Dynamically-sized copy of `C`.
    pub fn c_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 6, self.c.as_slice())
    }
}

/// Builds the six-state model from physical parameters.
///
/// Rows 1–2 chain angles to rates, rows 3–4 carry viscous damping and the
/// cross-coupled thrust terms divided by the effective inertias, and rows
/// 5–6 accumulate the angles (the zero-reference form of the error
/// integrals; [`dynamics`] substitutes the reference-dependent form).
pub fn build_linear_model(params: &HeliParams) -> Result<LinearModel, ModelError> {
    params.validate()?;
    let dp = params.pitch_inertia();
    let dy = params.yaw_inertia();

    let mut a = Matrix6::zeros();
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    a[(2, 2)] = -params.b_p / dp;
    a[(3, 3)] = -params.b_y / dy;
    a[(4, 0)] = 1.0;
    a[(5, 1)] = 1.0;

    let mut b = Matrix6x2::zeros();
    b[(2, 0)] = params.k_pp / dp;
    b[(2, 1)] = params.k_py / dp;
    b[(3, 0)] = params.k_yp / dy;
    b[(3, 1)] = params.k_yy / dy;

    let mut c = Matrix2x6::zeros();
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;

    Ok(LinearModel { a, b, c })
}

/// A sampled pitch/yaw reference pair, in radians.
pub type ReferenceSample = Vector2<f64>;

/// Time derivative of the plant state.
///
/// Rows 1–4 are the matrix product `A·x + B·u`; rows 5–6 return the
/// tracking errors `θ − θ_d` and `Ψ − Ψ_d` so the integral states track
/// the error rather than the raw angle. With `ref = 0` this is exactly
/// `A·x + B·u`.
pub fn dynamics(
    model: &LinearModel,
    x: &Vector6<f64>,
    u: &ControlInput,
    reference: &ReferenceSample,
) -> Vector6<f64> {
    let mut dx = model.a * x + model.b * u.to_vector();
    dx[4] = x[0] - reference[0];
    dx[5] = x[1] - reference[1];
    dx
}

/// Componentwise clamp of the command to the rig's voltage box, with
/// per-axis flags for the anti-windup logic.
pub fn saturate(u: &ControlInput, params: &HeliParams) -> (ControlInput, SatFlags) {
    let clamped = ControlInput {
        u_p: u.u_p.clamp(-params.u_p_max, params.u_p_max),
        u_y: u.u_y.clamp(-params.u_y_max, params.u_y_max),
    };
    let flags = SatFlags {
        pitch: clamped.u_p != u.u_p,
        yaw: clamped.u_y != u.u_y,
    };
    (clamped, flags)
}

/// Returns a copy of `params` with each named parameter scaled by
/// `(1 + delta)`. The plant built from the result keeps controllers
/// synthesized from the nominal parameters honest about model mismatch.
pub fn perturb_params(
    params: &HeliParams,
    deltas: &[(ParamKind, f64)],
) -> Result<HeliParams, ModelError> {
    let mut out = *params;
    for &(kind, delta) in deltas {
        if !delta.is_finite() {
            return Err(ModelError::BadPerturbation { name: kind.name(), delta });
        }
        let slot = match kind {
            ParamKind::BP => &mut out.b_p,
            ParamKind::BY => &mut out.b_y,
            ParamKind::JeqP => &mut out.j_eq_p,
            ParamKind::JeqY => &mut out.j_eq_y,
            ParamKind::MH => &mut out.m_h,
            ParamKind::L => &mut out.l,
            ParamKind::KPp => &mut out.k_pp,
            ParamKind::KPy => &mut out.k_py,
            ParamKind::KYp => &mut out.k_yp,
            ParamKind::KYy => &mut out.k_yy,
        };
        *slot *= 1.0 + delta;
    }
    out.validate().map_err(|_| ModelError::BadPerturbation {
        name: deltas.first().map(|d| d.0.name()).unwrap_or("<none>"),
        delta: deltas.first().map(|d| d.1).unwrap_or(0.0),
    })?;
    Ok(out)
}
