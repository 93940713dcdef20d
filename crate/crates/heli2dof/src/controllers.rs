//! The two feedback laws and their shared plumbing: gain partitioning,
//! PID error action, the ultra-local-model estimator chain, and the
//! exact-knowledge closed-loop matrix used to certify the loop algebra.
//!
//! Both controllers run from the same synthesized gain. The classic law
//! applies it directly to the error vector; the model-free variant wraps
//! the same PID action around an online estimate of the lumped dynamics
//! `F`, so the plant model never enters the control computation — only
//! the scalar input gains `α` do.

use nalgebra::{DMatrix, Matrix2, Matrix2x6, Vector2};
use thiserror::Error;

use crate::model::{ControlInput, LinearModel, SatFlags};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("gain matrix must be 2x6, got {rows}x{cols}")]
    GainShape { rows: usize, cols: usize },
    #[error("ultra-local input gain alpha must be finite and nonzero, got ({pitch}, {yaw})")]
    BadAlpha { pitch: f64, yaw: f64 },
    #[error("estimator time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("estimator filter time constant must be nonnegative, got {0}")]
    BadFilterConstant(f64),
    #[error("input-coupling block of B is singular; cannot fold the exact-knowledge loop")]
    InputCouplingSingular,
}

/// The synthesized 2x6 state-feedback gain, split by what each block
/// multiplies: `kp` the angle errors, `kd` the rate errors, `ki` the
/// integrated errors. Splitting works because the state ordering groups
/// angles, rates, and integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: Matrix2<f64>,
    pub kd: Matrix2<f64>,
    pub ki: Matrix2<f64>,
}

/// Splits a full-state LQR gain into its P/D/I blocks. The matrix must
/// be 2x6.
pub fn partition_gain(k: &DMatrix<f64>) -> Result<PidGains, ControllerError> {
    if k.nrows() != 2 || k.ncols() != 6 {
        return Err(ControllerError::GainShape {
            rows: k.nrows(),
            cols: k.ncols(),
        });
    }
    let block = |c0: usize| {
        Matrix2::new(k[(0, c0)], k[(0, c0 + 1)], k[(1, c0)], k[(1, c0 + 1)])
    };
    Ok(PidGains {
        kp: block(0),
        kd: block(2),
        ki: block(4),
    })
}

impl PidGains {
    /// Reassembles the 2x6 gain `[KP | KD | KI]`.
    pub fn full(&self) -> Matrix2x6<f64> {
        let mut k = Matrix2x6::zeros();
        k.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.kp);
        k.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.kd);
        k.fixed_view_mut::<2, 2>(0, 4).copy_from(&self.ki);
        k
    }

    /// Every block scaled by a common factor — handy for cost-optimality
    /// comparisons against detuned versions of the same structure.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kp: self.kp * factor,
            kd: self.kd * factor,
            ki: self.ki * factor,
        }
    }
}

/// Input gains of the second-order ultra-local model
/// `ÿ = F + α·u` (one scalar per axis). `Default` is the tuning used by
/// all bundled scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltraLocalConfig {
    pub alpha_pitch: f64,
    pub alpha_yaw: f64,
}

impl Default for UltraLocalConfig {
    fn default() -> Self {
        Self {
            alpha_pitch: 1.3,
            alpha_yaw: 0.43,
        }
    }
}

impl UltraLocalConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let ok = |a: f64| a.is_finite() && a != 0.0;
        if !ok(self.alpha_pitch) || !ok(self.alpha_yaw) {
            return Err(ControllerError::BadAlpha {
                pitch: self.alpha_pitch,
                yaw: self.alpha_yaw,
            });
        }
        Ok(())
    }

    pub fn alpha(&self) -> Vector2<f64> {
        Vector2::new(self.alpha_pitch, self.alpha_yaw)
    }
}

/// Online second-derivative estimator for one measured signal: a
/// four-point backward difference, a slew clamp, and a first-order
/// low-pass filter.
///
/// The backward stencil `(2y_k − 5y_{k−1} + 4y_{k−2} − y_{k−3})/dt²` is
/// exact on quadratics and second-order accurate in general. Raw values
/// are clamped before filtering: a measurement discontinuity (sensor
/// glitch, injected angle step) otherwise produces a spike train whose
/// filtered tail is far from zero, and the controller would chase it
/// into saturation. The default bound is roughly four times the largest
/// angular acceleration the rig's saturated inputs can command, so it
/// never engages during clean tracking. Output is zero until four
/// samples have arrived.
#[derive(Debug, Clone)]
pub struct DerivEstimator {
    buf: [f64; 4],
    seen: usize,
    filt: f64,
    dt: f64,
    tau_f: f64,
    clamp: f64,
}

impl DerivEstimator {
    /// Raw-acceleration clamp applied before the low-pass filter, rad/s².
    pub const DEFAULT_ACCEL_CLAMP: f64 = 250.0;

    /// Default low-pass time constant, seconds.
    pub const DEFAULT_TAU_F: f64 = 0.02;

    /// `dt` is the sampling period, `tau_f` the low-pass time constant
    /// (zero disables filtering).
    pub fn new(dt: f64, tau_f: f64) -> Result<Self, ControllerError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ControllerError::BadTimeStep(dt));
        }
        if !(tau_f.is_finite() && tau_f >= 0.0) {
            return Err(ControllerError::BadFilterConstant(tau_f));
        }
        Ok(Self {
            buf: [0.0; 4],
            seen: 0,
            filt: 0.0,
            dt,
            tau_f,
            clamp: Self::DEFAULT_ACCEL_CLAMP,
        })
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = clamp.abs();
        self
    }

    /// Feeds one sample and returns the current filtered estimate of the
    /// signal's second derivative.
    pub fn update(&mut self, y: f64) -> f64 {
        self.buf.rotate_right(1);
        self.buf[0] = y;
        self.seen += 1;
        if self.seen < 4 {
            return 0.0;
        }
        let [y0, y1, y2, y3] = self.buf;
        let raw = (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3) / (self.dt * self.dt);
        let bounded = raw.clamp(-self.clamp, self.clamp);
        let a = self.dt / (self.tau_f + self.dt);
        self.filt += a * (bounded - self.filt);
        self.filt
    }
}

/// The common PID action `KP·e + KD·ė + KI·∫e`.
pub fn pid_action(
    gains: &PidGains,
    e: &Vector2<f64>,
    e_dot: &Vector2<f64>,
    e_int: &Vector2<f64>,
) -> Vector2<f64> {
    gains.kp * e + gains.kd * e_dot + gains.ki * e_int
}

/// Classic full-state law: `u = −(KP·e + KD·ė + KI·∫e)`.
pub fn lqr_pid_control(
    gains: &PidGains,
    e: &Vector2<f64>,
    e_dot: &Vector2<f64>,
    e_int: &Vector2<f64>,
) -> ControlInput {
    ControlInput::from_vector(&(-pid_action(gains, e, e_dot, e_int)))
}

/// Lumped-dynamics estimate `F̂ = ŷ̈ − α·u_prev`, where `u_prev` is the
/// previous tick's command after saturation.
pub fn estimate_f(
    y_ddot_hat: &Vector2<f64>,
    u_prev: &ControlInput,
    config: &UltraLocalConfig,
) -> Vector2<f64> {
    y_ddot_hat - config.alpha().component_mul(&u_prev.to_vector())
}

/// Model-free law on the ultra-local model:
/// `u = −(F̂ − ÿ_d + KP·e + KD·ė + KI·∫e) / α`, per axis. Cancelling
/// `F̂` leaves the same closed-loop error dynamics as the classic law,
/// without using the plant matrices.
pub fn ilqr_pid_control(
    gains: &PidGains,
    config: &UltraLocalConfig,
    f_hat: &Vector2<f64>,
    y_ddot_ref: &Vector2<f64>,
    e: &Vector2<f64>,
    e_dot: &Vector2<f64>,
    e_int: &Vector2<f64>,
) -> Result<ControlInput, ControllerError> {
    config.validate()?;
    let numerator = f_hat - y_ddot_ref + pid_action(gains, e, e_dot, e_int);
    Ok(ControlInput::from_vector(
        &(-numerator.component_div(&config.alpha())),
    ))
}

/// Conditional (anti-windup) integral update: each axis accumulates
/// `e·dt` only if that axis's previous command was not saturated.
pub fn update_integral(
    e_int: &Vector2<f64>,
    e: &Vector2<f64>,
    dt: f64,
    prev_sat: SatFlags,
) -> Vector2<f64> {
    Vector2::new(
        if prev_sat.pitch { e_int[0] } else { e_int[0] + e[0] * dt },
        if prev_sat.yaw { e_int[1] } else { e_int[1] + e[1] * dt },
    )
}

/// Closed-loop state matrix when the lumped dynamics are known exactly
/// and the reference is zero: substituting
/// `u = −B₂⁻¹(A₂x + [KP|KD|KI]x)` (with `A₂`, `B₂` the acceleration rows
/// of the model) gives `A_cl = A − B·B₂⁻¹(A₂ + [KP|KD|KI])`, whose
/// acceleration rows are exactly `−[KP|KD|KI]`. This is the ideal the
/// estimator-based law approaches, and the yardstick the loop algebra is
/// certified against.
pub fn exact_f_closed_loop_matrix(
    model: &LinearModel,
    gains: &PidGains,
) -> Result<nalgebra::Matrix6<f64>, ControllerError> {
    let a2 = model.a.fixed_view::<2, 6>(2, 0).into_owned();
    let b2 = model.b.fixed_view::<2, 2>(2, 0).into_owned();
    let b2_inv = b2
        .try_inverse()
        .ok_or(ControllerError::InputCouplingSingular)?;
    let k_fold = b2_inv * (a2 + gains.full());
    Ok(model.a - model.b * k_fold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_linear_model, HeliParams};
    use crate::riccati::is_hurwitz;
    use approx::assert_relative_eq;

    /// Published rounding of the rig's synthesized gain — handy for
    /// readable arithmetic in the examples below.
    fn rounded_gains() -> PidGains {
        let k = DMatrix::from_row_slice(
            2,
            6,
            &[
                18.9, 1.98, 7.48, 1.53, 7.03, 0.77, //
                -2.22, 19.4, -0.45, 11.9, -0.77, 7.03,
            ],
        );
        partition_gain(&k).unwrap()
    }

    #[test]
    fn partition_splits_the_expected_blocks() {
        let g = rounded_gains();
        assert_eq!(g.kp, Matrix2::new(18.9, 1.98, -2.22, 19.4));
        assert_eq!(g.kd, Matrix2::new(7.48, 1.53, -0.45, 11.9));
        assert_eq!(g.ki, Matrix2::new(7.03, 0.77, -0.77, 7.03));
    }

    #[test]
    fn partition_rejects_wrong_shapes() {
        assert!(matches!(
            partition_gain(&DMatrix::zeros(3, 6)),
            Err(ControllerError::GainShape { rows: 3, cols: 6 })
        ));
        assert!(partition_gain(&DMatrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn full_round_trips_the_partition() {
        let g = rounded_gains();
        let full = g.full();
        let back = partition_gain(&DMatrix::from_row_slice(2, 6, &{
            let mut v = [0.0; 12];
            for r in 0..2 {
                for c in 0..6 {
                    v[r * 6 + c] = full[(r, c)];
                }
            }
            v
        }))
        .unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn classic_law_on_unit_angle_error() {
        let g = rounded_gains();
        let u = lqr_pid_control(&g, &Vector2::new(1.0, 0.0), &Vector2::zeros(), &Vector2::zeros());
        assert_relative_eq!(u.u_p, -18.9, epsilon = 1e-12);
        assert_relative_eq!(u.u_y, 2.22, epsilon = 1e-12);
    }

    #[test]
    fn classic_law_on_unit_integral_error() {
        let g = rounded_gains();
        let u = lqr_pid_control(&g, &Vector2::zeros(), &Vector2::zeros(), &Vector2::new(0.0, 1.0));
        assert_relative_eq!(u.u_p, -0.77, epsilon = 1e-12);
        assert_relative_eq!(u.u_y, -7.03, epsilon = 1e-12);
    }

    #[test]
    fn model_free_law_is_idle_when_balanced() {
        let g = rounded_gains();
        let cfg = UltraLocalConfig::default();
        let f = Vector2::new(0.7, -0.2);
        let u = ilqr_pid_control(&g, &cfg, &f, &f, &Vector2::zeros(), &Vector2::zeros(), &Vector2::zeros())
            .unwrap();
        assert_eq!(u, ControlInput::default());
    }

    #[test]
    fn model_free_law_cancels_lumped_dynamics() {
        let g = rounded_gains();
        let cfg = UltraLocalConfig::default();
        let u = ilqr_pid_control(
            &g,
            &cfg,
            &Vector2::new(1.3, 0.0),
            &Vector2::zeros(),
            &Vector2::zeros(),
            &Vector2::zeros(),
            &Vector2::zeros(),
        )
        .unwrap();
        assert_relative_eq!(u.u_p, -1.0, epsilon = 1e-12);
        assert_relative_eq!(u.u_y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn model_free_law_rescales_pid_action_by_alpha() {
        let g = rounded_gains();
        let cfg = UltraLocalConfig::default();
        let u = ilqr_pid_control(
            &g,
            &cfg,
            &Vector2::zeros(),
            &Vector2::zeros(),
            &Vector2::new(1.0, 0.0),
            &Vector2::zeros(),
            &Vector2::zeros(),
        )
        .unwrap();
        assert_relative_eq!(u.u_p, -18.9 / 1.3, epsilon = 1e-12);
        assert_relative_eq!(u.u_y, 2.22 / 0.43, epsilon = 1e-12);
    }

    #[test]
    fn zero_alpha_is_a_config_error() {
        let cfg = UltraLocalConfig {
            alpha_pitch: 0.0,
            alpha_yaw: 0.43,
        };
        assert!(cfg.validate().is_err());
        let g = rounded_gains();
        let z = Vector2::zeros();
        assert!(matches!(
            ilqr_pid_control(&g, &cfg, &z, &z, &z, &z, &z),
            Err(ControllerError::BadAlpha { .. })
        ));
    }

    #[test]
    fn alpha_identity_holds_per_sample() {
        // pre-saturation, each emitted command satisfies
        // alpha*u + F_hat - ydd_ref + pid = 0 exactly
        let g = rounded_gains();
        let cfg = UltraLocalConfig::default();
        let f_hat = Vector2::new(2.3, -1.1);
        let ydd_ref = Vector2::new(0.4, 0.2);
        let e = Vector2::new(0.05, -0.03);
        let e_dot = Vector2::new(-0.2, 0.6);
        let e_int = Vector2::new(0.01, 0.02);
        let u = ilqr_pid_control(&g, &cfg, &f_hat, &ydd_ref, &e, &e_dot, &e_int).unwrap();
        let residual =
            cfg.alpha().component_mul(&u.to_vector()) + f_hat - ydd_ref + pid_action(&g, &e, &e_dot, &e_int);
        assert!(residual.norm() <= 1e-12, "residual {residual}");
    }

    #[test]
    fn lumped_estimate_cancels_known_input_share() {
        let got = estimate_f(
            &Vector2::new(2.6, 0.0),
            &ControlInput { u_p: 2.0, u_y: 0.0 },
            &UltraLocalConfig::default(),
        );
        assert_relative_eq!(got.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn estimator_warms_up_silently() {
        let mut est = DerivEstimator::new(0.002, 0.0).unwrap();
        assert_eq!(est.update(1.0), 0.0);
        assert_eq!(est.update(2.0), 0.0);
        assert_eq!(est.update(3.0), 0.0);
        // the fourth sample is the first one with a full stencil
        assert_ne!(est.update(5.0), 0.0);
    }

    #[test]
    fn estimator_is_zero_on_constant_input() {
        let mut est = DerivEstimator::new(0.002, 0.02).unwrap();
        for _ in 0..50 {
            assert_eq!(est.update(7.5), 0.0);
        }
    }

    #[test]
    fn estimator_is_exact_on_quadratics() {
        let dt = 0.002;
        let mut est = DerivEstimator::new(dt, 0.0).unwrap();
        for k in 0..10 {
            let t = k as f64 * dt;
            let out = est.update(3.0 * t * t);
            if k >= 3 {
                assert_relative_eq!(out, 6.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn estimator_tracks_a_sine_second_derivative() {
        let dt = 0.002;
        let mut est = DerivEstimator::new(dt, 0.0).unwrap();
        for k in 0..500 {
            let t = k as f64 * dt;
            let out = est.update(t.sin());
            if k >= 10 {
                assert_relative_eq!(out, -t.sin(), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn estimator_clamps_measurement_discontinuities() {
        let dt = 0.002;
        let mut est = DerivEstimator::new(dt, 0.0).unwrap();
        for _ in 0..10 {
            est.update(0.0);
        }
        // a 10-degree measurement step would read as ~87000 rad/s^2 raw
        let out = est.update(10.0_f64.to_radians());
        assert_eq!(out, DerivEstimator::DEFAULT_ACCEL_CLAMP);
    }

    #[test]
    fn lumped_estimate_recovers_constant_f() {
        // y(t) = 0.5 (F + alpha*u) t^2 solves ydd = F + alpha*u; the
        // estimator plus the cancellation must return F once warmed up.
        let dt = 0.002;
        let cfg = UltraLocalConfig::default();
        let f_true = 4.2;
        let u = ControlInput { u_p: 1.5, u_y: 0.0 };
        let mut est = DerivEstimator::new(dt, 0.0).unwrap();
        for k in 0..20 {
            let t = k as f64 * dt;
            let y = 0.5 * (f_true + cfg.alpha_pitch * u.u_p) * t * t;
            let ydd = est.update(y);
            if k >= 3 {
                let f_hat = estimate_f(&Vector2::new(ydd, 0.0), &u, &cfg);
                assert_relative_eq!(f_hat[0], f_true, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn estimator_rejects_bad_configuration() {
        assert!(DerivEstimator::new(0.0, 0.02).is_err());
        assert!(DerivEstimator::new(-0.002, 0.02).is_err());
        assert!(DerivEstimator::new(0.002, -1.0).is_err());
        assert!(DerivEstimator::new(f64::NAN, 0.02).is_err());
    }

    #[test]
    fn integral_update_respects_saturation_flags() {
        let e_int = Vector2::new(1.0, -1.0);
        let e = Vector2::new(0.5, 0.25);
        let dt = 0.002;
        let free = update_integral(&e_int, &e, dt, SatFlags::default());
        assert_relative_eq!(free[0], 1.001, epsilon = 1e-15);
        assert_relative_eq!(free[1], -0.9995, epsilon = 1e-15);

        let pitch_held = update_integral(&e_int, &e, dt, SatFlags { pitch: true, yaw: false });
        assert_eq!(pitch_held[0], 1.0);
        assert_relative_eq!(pitch_held[1], -0.9995, epsilon = 1e-15);

        let yaw_held = update_integral(&e_int, &e, dt, SatFlags { pitch: false, yaw: true });
        assert_relative_eq!(yaw_held[0], 1.001, epsilon = 1e-15);
        assert_eq!(yaw_held[1], -1.0);
    }

    #[test]
    fn exact_knowledge_loop_has_pure_gain_acceleration_rows() {
        let model = build_linear_model(&HeliParams::default()).unwrap();
        let g = rounded_gains();
        let a_cl = exact_f_closed_loop_matrix(&model, &g).unwrap();
        let full = g.full();
        for c in 0..6 {
            assert_relative_eq!(a_cl[(2, c)], -full[(0, c)], epsilon = 1e-12);
            assert_relative_eq!(a_cl[(3, c)], -full[(1, c)], epsilon = 1e-12);
        }
        // rows without input authority are untouched
        for &r in &[0usize, 1, 4, 5] {
            for c in 0..6 {
                assert_eq!(a_cl[(r, c)], model.a[(r, c)]);
            }
        }
        let dyn_acl = DMatrix::from_column_slice(6, 6, a_cl.as_slice());
        assert!(is_hurwitz(&dyn_acl));
    }

    #[test]
    fn singular_input_coupling_is_reported() {
        let mut model = build_linear_model(&HeliParams::default()).unwrap();
        model.b[(2, 0)] = 0.0;
        model.b[(3, 0)] = 0.0; // first input column dead in the acceleration rows
        let g = rounded_gains();
        assert!(matches!(
            exact_f_closed_loop_matrix(&model, &g),
            Err(ControllerError::InputCouplingSingular)
        ));
    }

    #[test]
    fn scaled_gains_scale_every_block() {
        let g = rounded_gains();
        let g3 = g.scaled(3.0);
        assert_eq!(g3.kp, g.kp * 3.0);
        assert_eq!(g3.kd, g.kd * 3.0);
        assert_eq!(g3.ki, g.ki * 3.0);
    }
}
