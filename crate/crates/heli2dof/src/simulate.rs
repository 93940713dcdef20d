//! Closed-loop scenario engine: reference and disturbance generators, a
//! fixed-step RK4 integrator, and the two-rate control loop that ties
//! the plant, the estimator, and the feedback laws together.
//!
//! The loop runs at two rates: the controller samples and commands at
//! `dt_control`, the plant integrates underneath at `dt_plant` with the
//! command held (zero-order hold). Per control tick the order is fixed:
//! sample the reference shaper, measure (output disturbances enter
//! here), estimate, update the conditional integral, compute and
//! saturate the command, record, then integrate the plant (input
//! disturbances enter here). Everything is deterministic for a given
//! scenario, including the wind generator, which draws from a counter
//! based stream cipher seeded by the scenario.

use nalgebra::{SVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controllers::{
    estimate_f, ilqr_pid_control, lqr_pid_control, update_integral, ControllerError,
    DerivEstimator, PidGains, UltraLocalConfig,
};
use crate::model::{
    build_linear_model, dynamics, perturb_params, saturate, ControlInput, HeliParams,
    ModelError, ParamKind, SatFlags, State,
};

/// Hard abort threshold for the divergence guard, in state units.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("integration produced a non-finite state")]
    NonFiniteState,
    #[error("state magnitude exceeded {DIVERGENCE_LIMIT:.0e} at t = {t:.3} s; loop diverged")]
    Diverged { t: f64 },
}

/// Which feedback law drives the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    /// Classic full-state law applied to the tracking error.
    LqrPid,
    /// Model-free law on the ultra-local model, fed by the online
    /// second-derivative estimator.
    IlqrPid,
}

impl ControllerKind {
    /// Short token used in file names and CLI arguments.
    pub fn token(self) -> &'static str {
        match self {
            ControllerKind::LqrPid => "lqr",
            ControllerKind::IlqrPid => "ilqr",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lqr" => Ok(ControllerKind::LqrPid),
            "ilqr" => Ok(ControllerKind::IlqrPid),
            other => Err(format!("unknown controller '{other}' (expected lqr or ilqr)")),
        }
    }
}

/// Shape of the raw reference command, before the optional shaper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Symmetric square wave on pitch, constant on yaw.
    Square,
    /// Constant on both axes.
    Constant,
}

/// Reference command specification. Angles in radians, times in
/// seconds. `prefilter_wn` is the natural frequency of a critically
/// damped second-order shaper the raw command is passed through; zero
/// disables shaping and the loop then tracks the raw command with zero
/// feedforward rate and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub kind: ReferenceKind,
    pub amplitude: f64,
    pub period: f64,
    pub offset: f64,
    pub yaw_offset: f64,
    pub prefilter_wn: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            kind: ReferenceKind::Square,
            amplitude: 10f64.to_radians(),
            period: 20.0,
            offset: 0.0,
            yaw_offset: 0.0,
            prefilter_wn: 2.0,
        }
    }
}

/// Square wave that starts high: `+amplitude` while `t mod period` is in
/// the first half-period, `−amplitude` in the second.
pub fn square_reference(t: f64, amplitude: f64, period: f64) -> f64 {
    if t % period < period / 2.0 {
        amplitude
    } else {
        -amplitude
    }
}

/// Raw (unshaped) reference command at time `t`, `[pitch, yaw]`.
pub fn sample_reference(spec: &ReferenceSpec, t: f64) -> Vector2<f64> {
    match spec.kind {
        ReferenceKind::Square => Vector2::new(
            spec.offset + square_reference(t, spec.amplitude, spec.period),
            spec.yaw_offset,
        ),
        ReferenceKind::Constant => Vector2::new(spec.offset, spec.yaw_offset),
    }
}

/// Disturbance waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisturbanceKind {
    None,
    /// Rectangular pulse train: zero before `delay`, then `magnitude`
    /// for the first `width_frac` of every `period`.
    Pulse {
        magnitude: f64,
        period: f64,
        delay: f64,
        width_frac: f64,
    },
    /// `magnitude · sin(omega·t + phase)`.
    Sine {
        magnitude: f64,
        omega: f64,
        phase: f64,
    },
    /// Filtered random gusts: `mean_v` plus uniform noise of amplitude
    /// `noise_v` passed through a first-order low-pass with the given
    /// `cutoff` (rad/s), one draw per control tick.
    Wind {
        mean_v: f64,
        noise_v: f64,
        cutoff: f64,
    },
}

/// Where a disturbance enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    /// Added to the measured angle before the controller sees it
    /// (sensor-side); value in radians.
    OutputAngle,
    /// Added to the plant input after the controller's command
    /// (actuator-side); value in volts.
    InputTorque,
}

/// Which axis a disturbance acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Pitch,
    Yaw,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub injection: Injection,
    pub axis: Axis,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::None,
            injection: Injection::OutputAngle,
            axis: Axis::Yaw,
        }
    }
}

/// Pulse-train sample at time `t` (see [`DisturbanceKind::Pulse`]).
pub fn pulse_disturbance(t: f64, magnitude: f64, period: f64, delay: f64, width_frac: f64) -> f64 {
    if t < delay {
        return 0.0;
    }
    if (t - delay) % period < width_frac * period {
        magnitude
    } else {
        0.0
    }
}

/// Sine-disturbance sample at time `t`.
pub fn sine_disturbance(t: f64, magnitude: f64, omega: f64, phase: f64) -> f64 {
    magnitude * (omega * t + phase).sin()
}

/// Deterministic filtered-gust generator; one sample per control tick.
#[derive(Debug, Clone)]
struct WindGen {
    rng: ChaCha8Rng,
    w: f64,
    a: f64,
    mean: f64,
    noise: f64,
}

impl WindGen {
    fn new(mean_v: f64, noise_v: f64, cutoff: f64, seed: u64, dt: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            w: 0.0,
            a: dt * cutoff / (1.0 + dt * cutoff),
            mean: mean_v,
            noise: noise_v,
        }
    }

    fn sample(&mut self) -> f64 {
        let raw = self.rng.gen_range(-1.0..1.0) * self.noise;
        self.w += self.a * (raw - self.w);
        self.mean + self.w
    }
}

/// Critically damped second-order reference shaper,
/// `r̈ = ωₙ²(cmd − r) − 2ωₙṙ`, integrated per axis with RK4. Starting it
/// on the plant's initial angles makes the handoff bumpless: the loop
/// sees zero initial error and a reference that glides to the command.
#[derive(Debug, Clone)]
pub struct Prefilter {
    wn: f64,
    r: Vector2<f64>,
    rd: Vector2<f64>,
}

impl Prefilter {
    pub fn new(wn: f64, initial: Vector2<f64>) -> Self {
        Self {
            wn,
            r: initial,
            rd: Vector2::zeros(),
        }
    }

    /// Shaped reference (what the loop tracks).
    pub fn reference(&self) -> Vector2<f64> {
        self.r
    }

    /// Shaped reference rate (feedforward for the derivative error).
    pub fn reference_rate(&self) -> Vector2<f64> {
        self.rd
    }

    /// Shaped reference acceleration for the current command
    /// (feedforward `ÿ_d` for the model-free law).
    pub fn accel(&self, cmd: &Vector2<f64>) -> Vector2<f64> {
        (cmd - self.r) * (self.wn * self.wn) - self.rd * (2.0 * self.wn)
    }

    /// Advances the shaper one control period.
    pub fn step(&mut self, cmd: &Vector2<f64>, dt: f64) -> Result<(), SimError> {
        let wn = self.wn;
        for i in 0..2 {
            let c = cmd[i];
            let s = SVector::<f64, 2>::new(self.r[i], self.rd[i]);
            let next = rk4_step(
                |st: &SVector<f64, 2>| {
                    SVector::<f64, 2>::new(st[1], wn * wn * (c - st[0]) - 2.0 * wn * st[1])
                },
                &s,
                dt,
            )?;
            self.r[i] = next[0];
            self.rd[i] = next[1];
        }
        Ok(())
    }
}

/// One classic fourth-order Runge–Kutta step of `ẋ = f(x)`. Errors if
/// the result is not finite (derivative blow-up or overflow).
pub fn rk4_step<const N: usize, F>(
    f: F,
    x: &SVector<f64, N>,
    dt: f64,
) -> Result<SVector<f64, N>, SimError>
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
{
    let k1 = f(x);
    let k2 = f(&(x + k1 * (dt / 2.0)));
    let k3 = f(&(x + k2 * (dt / 2.0)));
    let k4 = f(&(x + k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(SimError::NonFiniteState)
    }
}

/// A complete closed-loop experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Total simulated time, seconds.
    pub duration: f64,
    /// Plant integration step; must divide `dt_control` evenly.
    pub dt_plant: f64,
    /// Controller sampling period.
    pub dt_control: f64,
    pub reference: ReferenceSpec,
    pub disturbance: DisturbanceSpec,
    /// Relative perturbations applied to the simulated plant's
    /// parameters. Gains are always synthesized from the nominal model,
    /// so these express model mismatch.
    pub param_deltas: Vec<(ParamKind, f64)>,
    pub initial_state: State,
    /// Seed for the stochastic disturbance stream.
    pub seed: u64,
    /// Restrict a single-scenario run to one law; `None` means both.
    pub controller: Option<ControllerKind>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "nominal".to_string(),
            duration: 45.0,
            dt_plant: 0.0005,
            dt_control: 0.002,
            reference: ReferenceSpec::default(),
            disturbance: DisturbanceSpec::default(),
            param_deltas: Vec::new(),
            initial_state: State {
                theta: (-40.5f64).to_radians(),
                ..State::default()
            },
            seed: 42,
            controller: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadScenario(msg));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad(format!(
                "name '{}' must be nonempty and use only [A-Za-z0-9_-]",
                self.name
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        for (label, dt) in [("dt_plant", self.dt_plant), ("dt_control", self.dt_control)] {
            if !(dt.is_finite() && dt > 0.0) {
                return bad(format!("{label} must be positive, got {dt}"));
            }
        }
        let ratio = self.dt_control / self.dt_plant;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio < 1.0 - 1e-9 {
            return bad(format!(
                "dt_control ({}) must be an integer multiple of dt_plant ({})",
                self.dt_control, self.dt_plant
            ));
        }
        if self.duration < self.dt_control {
            return bad(format!(
                "duration ({}) shorter than one control period ({})",
                self.duration, self.dt_control
            ));
        }

        let r = &self.reference;
        if ![r.amplitude, r.offset, r.yaw_offset].iter().all(|v| v.is_finite()) {
            return bad("reference amplitude/offsets must be finite".to_string());
        }
        if matches!(r.kind, ReferenceKind::Square) && !(r.period.is_finite() && r.period > 0.0) {
            return bad(format!("square reference period must be positive, got {}", r.period));
        }
        if !(r.prefilter_wn.is_finite() && r.prefilter_wn >= 0.0) {
            return bad(format!(
                "reference prefilter_wn must be nonnegative, got {}",
                r.prefilter_wn
            ));
        }

        match self.disturbance.kind {
            DisturbanceKind::None => {}
            DisturbanceKind::Pulse {
                magnitude,
                period,
                delay,
                width_frac,
            } => {
                if !magnitude.is_finite() || !(period.is_finite() && period > 0.0) {
                    return bad("pulse magnitude/period invalid".to_string());
                }
                if !(delay.is_finite() && delay >= 0.0) {
                    return bad(format!("pulse delay must be nonnegative, got {delay}"));
                }
                if !(0.0..=1.0).contains(&width_frac) {
                    return bad(format!(
                        "pulse width_frac must lie in [0, 1], got {width_frac}"
                    ));
                }
            }
            DisturbanceKind::Sine {
                magnitude,
                omega,
                phase,
            } => {
                if ![magnitude, omega, phase].iter().all(|v| v.is_finite()) {
                    return bad("sine disturbance parameters must be finite".to_string());
                }
            }
            DisturbanceKind::Wind {
                mean_v,
                noise_v,
                cutoff,
            } => {
                if !mean_v.is_finite()
                    || !(noise_v.is_finite() && noise_v >= 0.0)
                    || !(cutoff.is_finite() && cutoff >= 0.0)
                {
                    return bad("wind parameters invalid (noise and cutoff must be nonnegative)".to_string());
                }
            }
        }

        if !self.initial_state.is_finite() {
            return bad("initial state must be finite".to_string());
        }
        for (kind, delta) in &self.param_deltas {
            if !delta.is_finite() {
                return bad(format!("perturbation of {} must be finite", kind.name()));
            }
        }
        Ok(())
    }

    /// Number of control ticks (the trace has `control_ticks() + 1`
    /// records including `t = 0`).
    pub fn control_ticks(&self) -> usize {
        (self.duration / self.dt_control).round() as usize
    }
}

/// One recorded control tick. Angles and references in radians (the
/// pitch/yaw fields hold the measured angles, i.e. what the controller
/// saw); rates in rad/s (true plant rates); commands in volts after
/// saturation; lumped-dynamics estimates in rad/s² (zero for the
/// classic law). `disturbance` holds the injected value in its native
/// unit: radians for angle injection, volts for input injection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub theta_ref: f64,
    pub psi_ref: f64,
    pub theta: f64,
    pub psi: f64,
    pub theta_dot: f64,
    pub psi_dot: f64,
    pub u_p: f64,
    pub u_y: f64,
    pub f_hat_p: f64,
    pub f_hat_y: f64,
    pub disturbance: f64,
}

/// A completed run: one record per control tick, uniformly spaced by
/// `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<Record>,
    pub dt: f64,
    /// How the scenario's disturbance entered (decides the reporting
    /// unit of the `disturbance` column).
    pub disturbance_injection: Injection,
}

/// Runs one closed-loop experiment and returns the trace.
///
/// `gains` must come from the nominal model — the scenario's parameter
/// perturbations apply only to the simulated plant, which is the whole
/// point of a mismatch experiment. The estimator, the shaper, and the
/// conditional integral all live inside this loop; the per-tick order
/// matches the module-level description exactly.
pub fn run_closed_loop(
    scenario: &Scenario,
    gains: &PidGains,
    kind: ControllerKind,
) -> Result<Trace, SimError> {
    scenario.validate()?;
    let plant_params = perturb_params(&HeliParams::default(), &scenario.param_deltas)?;
    let plant = build_linear_model(&plant_params)?;

    let dt_c = scenario.dt_control;
    let dt_p = scenario.dt_plant;
    let n_sub = (dt_c / dt_p).round() as usize;
    let n_ticks = scenario.control_ticks();

    let mut x = scenario.initial_state.to_vector();
    let mut shaper = (scenario.reference.prefilter_wn > 0.0).then(|| {
        Prefilter::new(scenario.reference.prefilter_wn, Vector2::new(x[0], x[1]))
    });
    let ul_cfg = UltraLocalConfig::default();
    if kind == ControllerKind::IlqrPid {
        ul_cfg.validate()?;
    }
    let mut est_pitch = DerivEstimator::new(dt_c, DerivEstimator::DEFAULT_TAU_F)?;
    let mut est_yaw = DerivEstimator::new(dt_c, DerivEstimator::DEFAULT_TAU_F)?;
    let mut wind = match scenario.disturbance.kind {
        DisturbanceKind::Wind {
            mean_v,
            noise_v,
            cutoff,
        } => Some(WindGen::new(mean_v, noise_v, cutoff, scenario.seed, dt_c)),
        _ => None,
    };

    let mut e_int = Vector2::zeros();
    let mut u_prev = ControlInput::default();
    let mut prev_sat = SatFlags::default();
    let mut records = Vec::with_capacity(n_ticks + 1);

    for k in 0..=n_ticks {
        let t = k as f64 * dt_c;
        let cmd = sample_reference(&scenario.reference, t);
        let (r, r_dot, ydd_ref) = match shaper.as_mut() {
            Some(pf) => {
                let triple = (pf.reference(), pf.reference_rate(), pf.accel(&cmd));
                pf.step(&cmd, dt_c)?;
                triple
            }
            None => (cmd, Vector2::zeros(), Vector2::zeros()),
        };

        let d = match scenario.disturbance.kind {
            DisturbanceKind::None => 0.0,
            DisturbanceKind::Pulse {
                magnitude,
                period,
                delay,
                width_frac,
            } => pulse_disturbance(t, magnitude, period, delay, width_frac),
            DisturbanceKind::Sine {
                magnitude,
                omega,
                phase,
            } => sine_disturbance(t, magnitude, omega, phase),
            DisturbanceKind::Wind { .. } => wind.as_mut().expect("wind state").sample(),
        };
        let on_axis = |axis: Axis, which: Axis| axis == which || axis == Axis::Both;

        let mut y_meas = Vector2::new(x[0], x[1]);
        if scenario.disturbance.injection == Injection::OutputAngle {
            if on_axis(scenario.disturbance.axis, Axis::Pitch) {
                y_meas[0] += d;
            }
            if on_axis(scenario.disturbance.axis, Axis::Yaw) {
                y_meas[1] += d;
            }
        }

        let ydd_hat = match kind {
            ControllerKind::IlqrPid => {
                Vector2::new(est_pitch.update(y_meas[0]), est_yaw.update(y_meas[1]))
            }
            ControllerKind::LqrPid => Vector2::zeros(),
        };

        let e = y_meas - r;
        let e_dot = Vector2::new(x[2], x[3]) - r_dot;
        e_int = update_integral(&e_int, &e, dt_c, prev_sat);

        let (u_raw, f_hat) = match kind {
            ControllerKind::LqrPid => {
                (lqr_pid_control(gains, &e, &e_dot, &e_int), Vector2::zeros())
            }
            ControllerKind::IlqrPid => {
                let f_hat = estimate_f(&ydd_hat, &u_prev, &ul_cfg);
                let u = ilqr_pid_control(gains, &ul_cfg, &f_hat, &ydd_ref, &e, &e_dot, &e_int)?;
                (u, f_hat)
            }
        };
        let (u, sat) = saturate(&u_raw, &plant_params);

        records.push(Record {
            t,
            theta_ref: r[0],
            psi_ref: r[1],
            theta: y_meas[0],
            psi: y_meas[1],
            theta_dot: x[2],
            psi_dot: x[3],
            u_p: u.u_p,
            u_y: u.u_y,
            f_hat_p: f_hat[0],
            f_hat_y: f_hat[1],
            disturbance: d,
        });
        prev_sat = sat;
        u_prev = u;

        if k == n_ticks {
            break;
        }

        let mut u_plant = u;
        if scenario.disturbance.injection == Injection::InputTorque {
            if on_axis(scenario.disturbance.axis, Axis::Pitch) {
                u_plant.u_p += d;
            }
            if on_axis(scenario.disturbance.axis, Axis::Yaw) {
                u_plant.u_y += d;
            }
        }
        for _ in 0..n_sub {
            x = rk4_step(|xx| dynamics(&plant, xx, &u_plant, &r), &x, dt_p)?;
        }
        if x.amax() > DIVERGENCE_LIMIT {
            return Err(SimError::Diverged { t: t + dt_c });
        }
    }

    Ok(Trace {
        records,
        dt: dt_c,
        disturbance_injection: scenario.disturbance.injection,
    })
}
