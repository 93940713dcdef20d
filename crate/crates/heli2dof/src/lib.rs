//! Closed-loop simulation toolkit for a bench-top twin-rotor rig with two
//! rotational degrees of freedom (pitch and yaw).
//!
//! The crate covers the full pipeline:
//!
//! * [`model`] — the linearized six-state plant (angles, rates, and error
//!   integrals) built from the rig's physical parameters;
//! * [`riccati`] — dense Lyapunov/Riccati solvers and LQR gain synthesis;
//! * [`controllers`] — the classic LQR-PID feedback law and its model-free
//!   counterpart driven by an online estimate of the lumped dynamics;
//! * [`simulate`] — fixed-step closed-loop execution with reference shaping
//!   and disturbance injection;
//! * [`metrics`] — tracking-error statistics and controller comparison
//!   reports;
//! * [`cli`] — scenario files, batch execution, and CSV/report emission.
//!
//! All internal computation is in SI units (radians, volts, seconds);
//! degrees appear only at the CSV/report boundary.

pub mod cli;
pub mod controllers;
pub mod metrics;
pub mod model;
pub mod riccati;
pub mod simulate;
