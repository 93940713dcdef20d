//! Cross-cutting invariants: randomized solver certificates, algebraic
//! identities of the two control laws, statistics invariances, and
//! linear-regime behavior of the full closed loop.

use nalgebra::{DMatrix, Vector2};
use proptest::prelude::*;

use heli2dof::controllers::{
    estimate_f, ilqr_pid_control, partition_gain, pid_action, PidGains, UltraLocalConfig,
};
use heli2dof::metrics::compute_stats;
use heli2dof::model::{
    build_linear_model, perturb_params, saturate, ControlInput, HeliParams, ParamKind, State,
};
use heli2dof::riccati::{evaluate_lqr_cost, is_hurwitz, solve_care, solve_lyapunov, synthesize_gains, LqrWeights};
use heli2dof::simulate::{
    run_closed_loop, sample_reference, Axis, ControllerKind, DisturbanceKind, DisturbanceSpec,
    Injection, Record, ReferenceKind, ReferenceSpec, Scenario, Trace,
};

fn rig_gains() -> PidGains {
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

const PARAM_KINDS: [ParamKind; 10] = [
    ParamKind::BP,
    ParamKind::BY,
    ParamKind::JeqP,
    ParamKind::JeqY,
    ParamKind::MH,
    ParamKind::L,
    ParamKind::KPp,
    ParamKind::KPy,
    ParamKind::KYp,
    ParamKind::KYy,
];

proptest! {
    /// Shifting any matrix left by slightly more than its Frobenius norm
    /// makes it Hurwitz, so the Lyapunov solve must succeed with a tiny
    /// residual and the stability classifier must agree.
    #[test]
    fn lyapunov_solve_certifies_shifted_matrices(
        n in 1usize..8,
        entries in prop::collection::vec(-1.0f64..1.0, 49),
    ) {
        let raw = DMatrix::from_fn(n, n, |r, c| entries[r * n + c]);
        let a = &raw - DMatrix::identity(n, n) * (raw.norm() + 1.0);
        let q = DMatrix::identity(n, n);
        let p = solve_lyapunov(&a, &q).unwrap();
        let residual = (a.transpose() * &p + &p * &a + &q).norm();
        prop_assert!(residual <= 1e-10 * (1.0 + p.norm()),
            "residual {residual} for n = {n}");
        prop_assert!(is_hurwitz(&a));
    }

    /// The Riccati certificate must hold on arbitrary random systems:
    /// random (A, B) pairs are controllable with probability one.
    #[test]
    fn riccati_solve_certifies_random_systems(
        n in 1usize..=4,
        m in 1usize..=2,
        a_entries in prop::collection::vec(-1.0f64..1.0, 16),
        b_entries in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let a = DMatrix::from_fn(n, n, |r, c| a_entries[r * n + c]);
        let b = DMatrix::from_fn(n, m, |r, c| b_entries[r * m + c]);
        let sol = solve_care(&a, &b, &DMatrix::identity(n, n), &DMatrix::identity(m, m)).unwrap();
        prop_assert!(sol.residual_norm <= 1e-9 * (1.0 + sol.p.norm()));
        prop_assert!(sol.p.clone().cholesky().is_some());
        prop_assert!(is_hurwitz(&(&a - &b * &sol.k)));
    }

    /// The PID action is linear in its error inputs.
    #[test]
    fn pid_action_is_linear(
        e1 in prop::collection::vec(-10.0f64..10.0, 6),
        e2 in prop::collection::vec(-10.0f64..10.0, 6),
        scale in -5.0f64..5.0,
    ) {
        let gains = rig_gains();
        let split = |v: &[f64]| {
            (Vector2::new(v[0], v[1]), Vector2::new(v[2], v[3]), Vector2::new(v[4], v[5]))
        };
        let (a_e, a_d, a_i) = split(&e1);
        let (b_e, b_d, b_i) = split(&e2);
        let sum = pid_action(&gains, &(a_e + b_e * scale), &(a_d + b_d * scale), &(a_i + b_i * scale));
        let parts = pid_action(&gains, &a_e, &a_d, &a_i) + pid_action(&gains, &b_e, &b_d, &b_i) * scale;
        prop_assert!((sum - parts).norm() <= 1e-9 * (1.0 + parts.norm()));
    }

    /// The model-free law inverts its own ultra-local model: plugging
    /// the command back in recovers `ÿ_d − PID` exactly.
    #[test]
    fn model_free_law_inverts_the_ultra_local_model(
        inputs in prop::collection::vec(-20.0f64..20.0, 10),
    ) {
        let gains = rig_gains();
        let cfg = UltraLocalConfig::default();
        let e = Vector2::new(inputs[0], inputs[1]);
        let e_dot = Vector2::new(inputs[2], inputs[3]);
        let e_int = Vector2::new(inputs[4], inputs[5]);
        let ydd_hat = Vector2::new(inputs[6], inputs[7]);
        let u_prev = ControlInput { u_p: inputs[8], u_y: inputs[9] };

        let f_hat = estimate_f(&ydd_hat, &u_prev, &cfg);
        let ydd_ref = Vector2::new(0.3, -0.8);
        let u = ilqr_pid_control(&gains, &cfg, &f_hat, &ydd_ref, &e, &e_dot, &e_int).unwrap();
        let recovered = cfg.alpha().component_mul(&u.to_vector()) + f_hat;
        let expect = ydd_ref - pid_action(&gains, &e, &e_dot, &e_int);
        prop_assert!((recovered - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
    }

    /// Tracking-error statistics depend only on the error, so shifting
    /// the measurement and the reference together changes nothing.
    #[test]
    fn error_statistics_are_shift_invariant(
        values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20..120),
        shift in -1.0f64..1.0,
    ) {
        let build = |offset: f64| {
            let records: Vec<Record> = values
                .iter()
                .enumerate()
                .map(|(k, (y, r))| Record {
                    t: k as f64 * 0.002,
                    theta_ref: r + offset,
                    psi_ref: 0.0,
                    theta: y + offset,
                    psi: 0.0,
                    theta_dot: 0.0,
                    psi_dot: 0.0,
                    u_p: 0.0,
                    u_y: 0.0,
                    f_hat_p: 0.0,
                    f_hat_y: 0.0,
                    disturbance: 0.0,
                })
                .collect();
            Trace { records, dt: 0.002, disturbance_injection: Injection::OutputAngle }
        };
        let t1 = (values.len() - 1) as f64 * 0.002;
        let base = compute_stats(&build(0.0), Axis::Pitch, 0.0, t1).unwrap();
        let moved = compute_stats(&build(shift), Axis::Pitch, 0.0, t1).unwrap();
        prop_assert!((base.mean - moved.mean).abs() <= 1e-12);
        prop_assert!((base.std - moved.std).abs() <= 1e-12);
        prop_assert!((base.rms - moved.rms).abs() <= 1e-12);
        prop_assert!((base.max_abs - moved.max_abs).abs() <= 1e-12);
    }

    /// Saturating twice is the same as saturating once, and the second
    /// pass must not report clipping.
    #[test]
    fn saturation_is_idempotent(u_p in -100.0f64..100.0, u_y in -100.0f64..100.0) {
        let params = HeliParams::default();
        let (once, _) = saturate(&ControlInput { u_p, u_y }, &params);
        let (twice, flags) = saturate(&once, &params);
        prop_assert_eq!(once, twice);
        prop_assert!(!flags.any());
    }

    /// Scaling a parameter by (1 + δ) and then by the inverse factor
    /// restores the original plant.
    #[test]
    fn parameter_perturbation_round_trips(kind_idx in 0usize..10, delta in -0.5f64..0.5) {
        let kind = PARAM_KINDS[kind_idx];
        let nominal = HeliParams::default();
        let inverse = 1.0 / (1.0 + delta) - 1.0;
        let there = perturb_params(&nominal, &[(kind, delta)]).unwrap();
        let back = perturb_params(&there, &[(kind, inverse)]).unwrap();
        for (orig, restored) in [
            (nominal.b_p, back.b_p),
            (nominal.b_y, back.b_y),
            (nominal.j_eq_p, back.j_eq_p),
            (nominal.j_eq_y, back.j_eq_y),
            (nominal.m_h, back.m_h),
            (nominal.l, back.l),
            (nominal.k_pp, back.k_pp),
            (nominal.k_py, back.k_py),
            (nominal.k_yp, back.k_yp),
            (nominal.k_yy, back.k_yy),
        ] {
            prop_assert!((orig - restored).abs() <= 1e-12 * orig.abs());
        }
    }

    /// The raw square command only ever takes its two plateau values on
    /// pitch and stays constant on yaw.
    #[test]
    fn square_reference_stays_on_its_plateaus(
        amplitude in 0.01f64..1.0,
        period in 0.5f64..50.0,
        offset in -1.0f64..1.0,
        yaw_offset in -1.0f64..1.0,
        t in 0.0f64..200.0,
    ) {
        let spec = ReferenceSpec {
            kind: ReferenceKind::Square,
            amplitude,
            period,
            offset,
            yaw_offset,
            prefilter_wn: 0.0,
        };
        let r = sample_reference(&spec, t);
        prop_assert!(r[0] == offset + amplitude || r[0] == offset - amplitude);
        prop_assert!(r[1] == yaw_offset);
    }
}

fn nominal_gains() -> PidGains {
    let model = build_linear_model(&HeliParams::default()).unwrap();
    partition_gain(&synthesize_gains(&model, &LqrWeights::default()).unwrap().k).unwrap()
}

/// Away from saturation and the estimator clamp, the whole loop is
/// linear, so the response to reference-plus-disturbance must equal the
/// sum of the individual responses.
#[test]
fn small_signal_responses_superpose() {
    let gains = nominal_gains();
    let base = Scenario {
        duration: 3.0,
        initial_state: State::default(),
        reference: ReferenceSpec {
            kind: ReferenceKind::Constant,
            amplitude: 0.0,
            period: 2.0,
            offset: 0.0,
            yaw_offset: 0.0,
            prefilter_wn: 2.0,
        },
        ..Scenario::default()
    };
    let small_square = ReferenceSpec {
        kind: ReferenceKind::Square,
        amplitude: 0.5f64.to_radians(),
        ..base.reference
    };
    let small_sine = DisturbanceSpec {
        kind: DisturbanceKind::Sine {
            magnitude: 0.3f64.to_radians(),
            omega: 25.0,
            phase: 10.0,
        },
        injection: Injection::OutputAngle,
        axis: Axis::Yaw,
    };

    let mut ref_only = base.clone();
    ref_only.name = "ref-only".to_string();
    ref_only.reference = small_square;
    let mut dist_only = base.clone();
    dist_only.name = "dist-only".to_string();
    dist_only.disturbance = small_sine;
    let mut combined = base.clone();
    combined.name = "combined".to_string();
    combined.reference = small_square;
    combined.disturbance = small_sine;

    for kind in [ControllerKind::LqrPid, ControllerKind::IlqrPid] {
        let a = run_closed_loop(&ref_only, &gains, kind).unwrap();
        let b = run_closed_loop(&dist_only, &gains, kind).unwrap();
        let c = run_closed_loop(&combined, &gains, kind).unwrap();
        let mut max_dev = 0.0f64;
        for ((ra, rb), rc) in a.records.iter().zip(&b.records).zip(&c.records) {
            max_dev = max_dev
                .max((ra.theta + rb.theta - rc.theta).abs())
                .max((ra.psi + rb.psi - rc.psi).abs());
        }
        assert!(
            max_dev <= 1e-8,
            "superposition violated by {max_dev:.3e} rad under {kind}"
        );
    }
}

/// The synthesized gain minimizes the quadratic cost it was designed
/// for, so a detuned (uniformly tripled) gain must cost more on the
/// same regulation task — still stabilizing and unsaturated, so the
/// comparison is fair.
#[test]
fn synthesized_gain_beats_a_detuned_gain_on_its_own_cost() {
    let gains = nominal_gains();
    let detuned = gains.scaled(3.0);
    let scenario = Scenario {
        name: "regulation".to_string(),
        duration: 8.0,
        reference: ReferenceSpec {
            kind: ReferenceKind::Constant,
            amplitude: 0.0,
            period: 20.0,
            offset: 0.0,
            yaw_offset: 0.0,
            prefilter_wn: 0.0,
        },
        initial_state: State {
            theta: 5f64.to_radians(),
            ..State::default()
        },
        ..Scenario::default()
    };
    let weights = LqrWeights::default();

    let run = |g: &PidGains| {
        let trace = run_closed_loop(&scenario, g, ControllerKind::LqrPid).unwrap();
        let peak = trace
            .records
            .iter()
            .map(|r| r.u_p.abs().max(r.u_y.abs()))
            .fold(0.0f64, f64::max);
        assert!(peak < 15.0, "saturated run would spoil the optimality comparison");
        evaluate_lqr_cost(&trace, &weights).unwrap()
    };
    let j_synth = run(&gains);
    let j_detuned = run(&detuned);
    assert!(
        j_synth < j_detuned,
        "synthesized-gain cost {j_synth:.6} not below detuned-gain cost {j_detuned:.6}"
    );
}

/// Both laws drive the tracking error to (numerical) zero on a plain
/// regulation task with the sampled, saturated, estimator-in-the-loop
/// controller — not just in the idealized analysis.
#[test]
fn both_laws_regulate_the_error_away() {
    let gains = nominal_gains();
    let scenario = Scenario {
        name: "regulate".to_string(),
        duration: 10.0,
        reference: ReferenceSpec {
            kind: ReferenceKind::Constant,
            amplitude: 0.0,
            period: 20.0,
            offset: 0.0,
            yaw_offset: 0.0,
            prefilter_wn: 0.0,
        },
        initial_state: State {
            theta: 5f64.to_radians(),
            psi: (-3f64).to_radians(),
            ..State::default()
        },
        ..Scenario::default()
    };
    for kind in [ControllerKind::LqrPid, ControllerKind::IlqrPid] {
        let trace = run_closed_loop(&scenario, &gains, kind).unwrap();
        let last = trace.records.last().unwrap();
        let final_err = (last.theta - last.theta_ref)
            .abs()
            .max((last.psi - last.psi_ref).abs());
        assert!(
            final_err < 1e-3,
            "{kind} left {final_err:.2e} rad of error after 10 s"
        );
    }
}
