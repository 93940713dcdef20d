//! Command-line front end: line-oriented scenario files, batch
//! execution with both controllers, CSV trace emission, comparison
//! reports, and a gain dump.
//!
//! Scenario files are `key = value` lines with `#` comments and dotted
//! keys for nesting (e.g. `disturbance.kind = sine`). Unknown keys are
//! hard errors with a line number; missing keys take the defaults
//! documented in the README and in `Scenario::default`. All artifacts
//! are plain deterministic text: identical inputs produce identical
//! bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::controllers::{partition_gain, ControllerError, PidGains};
use crate::metrics::{compare_report, MetricsError};
use crate::model::{build_linear_model, HeliParams, ModelError, ParamKind};
use crate::riccati::{synthesize_gains, CareSolution, LqrWeights, RiccatiError};
use crate::simulate::{
    run_closed_loop, Axis, ControllerKind, DisturbanceKind, DisturbanceSpec, Injection,
    ReferenceKind, Scenario, SimError, Trace,
};

/// Default statistics window, seconds — the zoomed-in steady-state
/// interval every report leads with (when the run is long enough).
pub const DEFAULT_WINDOW: (f64, f64) = (26.0, 30.0);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("scenario '{scenario}': {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: SimError,
    },
    #[error("scenario '{scenario}': {source}")]
    Report {
        scenario: String,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Synthesis(#[from] RiccatiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("{0}")]
    BadArgs(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "heli2dof",
    version,
    about = "Closed-loop pitch/yaw rig simulator: classic and model-free LQR-PID"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and write CSV traces, comparison reports, and the
    /// gain dump
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory whose *.scn files form the suite (sorted by file name)
    #[arg(long, value_name = "DIR", conflicts_with = "scenario", required_unless_present = "scenario")]
    pub suite: Option<PathBuf>,

    /// A single scenario file
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,

    /// Which law to run: lqr, ilqr, or both
    #[arg(long, default_value = "both")]
    pub controller: String,

    /// Output directory, created if missing
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Override every scenario's disturbance seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Artifacts to write, comma separated from {csv, report, gains}
    #[arg(long, default_value = "csv,report,gains")]
    pub emit: String,
}

/// Resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario_paths: Vec<PathBuf>,
    /// `None` runs both controllers.
    pub controller: Option<ControllerKind>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub emit_csv: bool,
    pub emit_report: bool,
    pub emit_gains: bool,
}

impl RunArgs {
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let controller = match self.controller.as_str() {
            "both" => None,
            other => Some(other.parse::<ControllerKind>().map_err(CliError::BadArgs)?),
        };
        let (mut emit_csv, mut emit_report, mut emit_gains) = (false, false, false);
        for item in self.emit.split(',') {
            match item.trim() {
                "csv" => emit_csv = true,
                "report" => emit_report = true,
                "gains" => emit_gains = true,
                other => {
                    return Err(CliError::BadArgs(format!(
                        "unknown emit flag '{other}' (expected csv, report, gains)"
                    )))
                }
            }
        }
        let scenario_paths = match (self.suite, self.scenario) {
            (Some(dir), None) => suite_paths(&dir)?,
            (None, Some(file)) => vec![file],
            _ => {
                return Err(CliError::BadArgs(
                    "exactly one of --suite or --scenario is required".to_string(),
                ))
            }
        };
        Ok(RunConfig {
            scenario_paths,
            controller,
            out_dir: self.out,
            seed: self.seed,
            emit_csv,
            emit_report,
            emit_gains,
        })
    }
}

/// All `*.scn` files in a directory, sorted by file name for a stable
/// execution order.
pub fn suite_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("scn") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::BadArgs(format!(
            "no .scn files found in {}",
            dir.display()
        )));
    }
    Ok(paths)
}

/// Key-value store with line attribution, consumed key by key so
/// leftovers can be reported as unknown.
struct KeyMap<'p> {
    entries: BTreeMap<String, (String, usize)>,
    path: &'p Path,
}

impl<'p> KeyMap<'p> {
    fn err(&self, line: usize, msg: String) -> CliError {
        CliError::Parse {
            path: self.path.to_path_buf(),
            line,
            msg,
        }
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn take_string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _)| v)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.err(line, format!("'{key}' expects a number, got '{v}'"))),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<u64>().map(Some).map_err(|_| {
                self.err(line, format!("'{key}' expects a nonnegative integer, got '{v}'"))
            }),
        }
    }

    /// Rejects a key that only applies to a different disturbance kind.
    fn forbid(&mut self, key: &str, reason: &str) -> Result<(), CliError> {
        if let Some((_, line)) = self.take(key) {
            return Err(self.err(line, format!("'{key}' {reason}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((key, (_, line))) = self.entries.into_iter().min_by_key(|(_, (_, l))| *l) {
            let path = self.path.to_path_buf();
            return Err(CliError::Parse {
                path,
                line,
                msg: format!("unknown key '{key}'"),
            });
        }
        Ok(())
    }
}

fn split_lines<'p>(text: &str, path: &'p Path) -> Result<KeyMap<'p>, CliError> {
    let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 'key = value', got '{content}'"),
            });
        };
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "empty key or value".to_string(),
            });
        }
        if let Some((_, first)) = entries.get(&key) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate key '{key}' (first set on line {first})"),
            });
        }
        entries.insert(key, (value, line));
    }
    Ok(KeyMap { entries, path })
}

// The value signature a KeyMap-extracted key must parse into is small
// and closed; each helper below owns one dotted sub-tree.

fn parse_reference(map: &mut KeyMap<'_>, sc: &mut Scenario) -> Result<(), CliError> {
    if let Some((v, line)) = map.take("reference.kind") {
        sc.reference.kind = match v.as_str() {
            "square" => ReferenceKind::Square,
            "constant" => ReferenceKind::Constant,
            other => {
                return Err(map.err(line, format!("unknown reference.kind '{other}' (square|constant)")))
            }
        };
    }
    if let Some(v) = map.take_f64("reference.amplitude_deg")? {
        sc.reference.amplitude = v.to_radians();
    }
    if let Some(v) = map.take_f64("reference.period")? {
        sc.reference.period = v;
    }
    if let Some(v) = map.take_f64("reference.offset_deg")? {
        sc.reference.offset = v.to_radians();
    }
    if let Some(v) = map.take_f64("reference.yaw_offset_deg")? {
        sc.reference.yaw_offset = v.to_radians();
    }
    if let Some(v) = map.take_f64("reference.prefilter_wn")? {
        sc.reference.prefilter_wn = v;
    }
    Ok(())
}

fn parse_initial(map: &mut KeyMap<'_>, sc: &mut Scenario) -> Result<(), CliError> {
    if let Some(v) = map.take_f64("initial.theta_deg")? {
        sc.initial_state.theta = v.to_radians();
    }
    if let Some(v) = map.take_f64("initial.psi_deg")? {
        sc.initial_state.psi = v.to_radians();
    }
    if let Some(v) = map.take_f64("initial.theta_dot")? {
        sc.initial_state.theta_dot = v;
    }
    if let Some(v) = map.take_f64("initial.psi_dot")? {
        sc.initial_state.psi_dot = v;
    }
    Ok(())
}

fn parse_plant_deltas(map: &mut KeyMap<'_>, sc: &mut Scenario) -> Result<(), CliError> {
    const PARAMS: [(&str, ParamKind); 10] = [
        ("plant.b_p_delta", ParamKind::BP),
        ("plant.b_y_delta", ParamKind::BY),
        ("plant.j_eq_p_delta", ParamKind::JeqP),
        ("plant.j_eq_y_delta", ParamKind::JeqY),
        ("plant.m_h_delta", ParamKind::MH),
        ("plant.l_delta", ParamKind::L),
        ("plant.k_pp_delta", ParamKind::KPp),
        ("plant.k_py_delta", ParamKind::KPy),
        ("plant.k_yp_delta", ParamKind::KYp),
        ("plant.k_yy_delta", ParamKind::KYy),
    ];
    for (key, kind) in PARAMS {
        if let Some(v) = map.take_f64(key)? {
            sc.param_deltas.push((kind, v));
        }
    }
    Ok(())
}

fn parse_disturbance(map: &mut KeyMap<'_>, sc: &mut Scenario) -> Result<(), CliError> {
    let kind_token = map.take("disturbance.kind");
    let (kind_name, kind_line) = match &kind_token {
        Some((v, line)) => (v.as_str(), *line),
        None => ("none", 0),
    };

    // per-kind defaults; the scenario files only need to state what
    // differs from the experiment each kind models
    let mut spec = match kind_name {
        "none" => DisturbanceSpec::default(),
        "pulse" => DisturbanceSpec {
            kind: DisturbanceKind::Pulse {
                magnitude: 10f64.to_radians(),
                period: 35.0,
                delay: 25.0,
                width_frac: 0.1,
            },
            injection: Injection::OutputAngle,
            axis: Axis::Yaw,
        },
        "sine" => DisturbanceSpec {
            kind: DisturbanceKind::Sine {
                magnitude: 10f64.to_radians(),
                omega: 25.0,
                phase: 10.0,
            },
            injection: Injection::OutputAngle,
            axis: Axis::Yaw,
        },
        "wind" => DisturbanceSpec {
            kind: DisturbanceKind::Wind {
                mean_v: 2.0,
                noise_v: 1.5,
                cutoff: 5.0,
            },
            injection: Injection::InputTorque,
            axis: Axis::Both,
        },
        other => {
            return Err(map.err(
                kind_line,
                format!("unknown disturbance.kind '{other}' (none|pulse|sine|wind)"),
            ))
        }
    };

    match &mut spec.kind {
        DisturbanceKind::None => {
            for key in [
                "disturbance.injection",
                "disturbance.axis",
                "disturbance.magnitude_deg",
                "disturbance.period",
                "disturbance.delay",
                "disturbance.width_frac",
                "disturbance.omega",
                "disturbance.phase",
                "disturbance.mean_v",
                "disturbance.noise_v",
                "disturbance.cutoff",
            ] {
                map.forbid(key, "requires a disturbance.kind other than none")?;
            }
            sc.disturbance = spec;
            return Ok(());
        }
        DisturbanceKind::Pulse {
            magnitude,
            period,
            delay,
            width_frac,
        } => {
            if let Some(v) = map.take_f64("disturbance.magnitude_deg")? {
                *magnitude = v.to_radians();
            }
            if let Some(v) = map.take_f64("disturbance.period")? {
                *period = v;
            }
            if let Some(v) = map.take_f64("disturbance.delay")? {
                *delay = v;
            }
            if let Some(v) = map.take_f64("disturbance.width_frac")? {
                *width_frac = v;
            }
            map.forbid("disturbance.omega", "applies to kind sine, not pulse")?;
            map.forbid("disturbance.phase", "applies to kind sine, not pulse")?;
            map.forbid("disturbance.mean_v", "applies to kind wind, not pulse")?;
            map.forbid("disturbance.noise_v", "applies to kind wind, not pulse")?;
            map.forbid("disturbance.cutoff", "applies to kind wind, not pulse")?;
        }
        DisturbanceKind::Sine {
            magnitude,
            omega,
            phase,
        } => {
            if let Some(v) = map.take_f64("disturbance.magnitude_deg")? {
                *magnitude = v.to_radians();
            }
            if let Some(v) = map.take_f64("disturbance.omega")? {
                *omega = v;
            }
            if let Some(v) = map.take_f64("disturbance.phase")? {
                *phase = v;
            }
            map.forbid("disturbance.period", "applies to kind pulse, not sine")?;
            map.forbid("disturbance.delay", "applies to kind pulse, not sine")?;
            map.forbid("disturbance.width_frac", "applies to kind pulse, not sine")?;
            map.forbid("disturbance.mean_v", "applies to kind wind, not sine")?;
            map.forbid("disturbance.noise_v", "applies to kind wind, not sine")?;
            map.forbid("disturbance.cutoff", "applies to kind wind, not sine")?;
        }
        DisturbanceKind::Wind {
            mean_v,
            noise_v,
            cutoff,
        } => {
            if let Some(v) = map.take_f64("disturbance.mean_v")? {
                *mean_v = v;
            }
            if let Some(v) = map.take_f64("disturbance.noise_v")? {
                *noise_v = v;
            }
            if let Some(v) = map.take_f64("disturbance.cutoff")? {
                *cutoff = v;
            }
            map.forbid("disturbance.magnitude_deg", "applies to pulse/sine, not wind")?;
            map.forbid("disturbance.period", "applies to kind pulse, not wind")?;
            map.forbid("disturbance.delay", "applies to kind pulse, not wind")?;
            map.forbid("disturbance.width_frac", "applies to kind pulse, not wind")?;
            map.forbid("disturbance.omega", "applies to kind sine, not wind")?;
            map.forbid("disturbance.phase", "applies to kind sine, not wind")?;
        }
    }

    if let Some((v, line)) = map.take("disturbance.injection") {
        spec.injection = match v.as_str() {
            "output_angle" => Injection::OutputAngle,
            "input_torque" => Injection::InputTorque,
            other => {
                return Err(map.err(
                    line,
                    format!("unknown disturbance.injection '{other}' (output_angle|input_torque)"),
                ))
            }
        };
    }
    if let Some((v, line)) = map.take("disturbance.axis") {
        spec.axis = match v.as_str() {
            "pitch" => Axis::Pitch,
            "yaw" => Axis::Yaw,
            "both" => Axis::Both,
            other => {
                return Err(map.err(line, format!("unknown disturbance.axis '{other}' (pitch|yaw|both)")))
            }
        };
    }
    sc.disturbance = spec;
    Ok(())
}

/// Parses one scenario file. Missing keys take the defaults of the
/// nominal experiment; the scenario name defaults to the file stem.
pub fn parse_scenario_file(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_scenario_str(&text, path)
}

fn parse_scenario_str(text: &str, path: &Path) -> Result<Scenario, CliError> {
    let mut map = split_lines(text, path)?;
    let mut sc = Scenario::default();
    sc.name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();

    if let Some(v) = map.take_string("name") {
        sc.name = v;
    }
    if let Some(v) = map.take_f64("duration")? {
        sc.duration = v;
    }
    if let Some(v) = map.take_f64("dt_plant")? {
        sc.dt_plant = v;
    }
    if let Some(v) = map.take_f64("dt_control")? {
        sc.dt_control = v;
    }
    if let Some(v) = map.take_u64("seed")? {
        sc.seed = v;
    }
    if let Some((v, line)) = map.take("controller") {
        sc.controller = match v.as_str() {
            "both" => None,
            other => Some(
                other
                    .parse::<ControllerKind>()
                    .map_err(|e| map.err(line, e))?,
            ),
        };
    }
    parse_reference(&mut map, &mut sc)?;
    parse_initial(&mut map, &mut sc)?;
    parse_plant_deltas(&mut map, &mut sc)?;
    parse_disturbance(&mut map, &mut sc)?;
    map.finish()?;

    sc.validate().map_err(|e| CliError::Scenario {
        scenario: sc.name.clone(),
        source: e,
    })?;
    Ok(sc)
}

/// CSV column header, fixed by contract.
pub const CSV_HEADER: &str =
    "t,theta_ref_deg,psi_ref_deg,theta_deg,psi_deg,u_p_V,u_y_V,F_hat_p,F_hat_y,disturbance";

/// Writes a trace as CSV: angles in degrees, commands in volts, lumped
/// estimates in rad/s², the disturbance column in degrees for angle
/// injection and volts for input injection. Nine significant digits,
/// `\n` newlines, no locale formatting.
pub fn emit_csv(trace: &Trace, path: &Path) -> Result<(), CliError> {
    let deg = 180.0 / std::f64::consts::PI;
    let dist_scale = match trace.disturbance_injection {
        Injection::OutputAngle => deg,
        Injection::InputTorque => 1.0,
    };
    let mut out = String::with_capacity(trace.records.len() * 160 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            r.t,
            r.theta_ref * deg,
            r.psi_ref * deg,
            r.theta * deg,
            r.psi * deg,
            r.u_p,
            r.u_y,
            r.f_hat_p,
            r.f_hat_y,
            r.disturbance * dist_scale,
        )
        .expect("writing to String cannot fail");
    }
    fs::write(path, out).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Renders the gain dump: cost weights, feedback gain, and the solve's
/// certificate (residual and iteration count).
pub fn render_gains(weights: &LqrWeights, sol: &CareSolution) -> String {
    let mut out = String::new();
    out.push_str("state-feedback synthesis certificate\n");
    out.push_str("\nQ (state weights):\n");
    for r in 0..6 {
        let row: Vec<String> = (0..6).map(|c| format!("{:>14.6e}", weights.q[(r, c)])).collect();
        out.push_str(&format!("  {}\n", row.join(" ")));
    }
    out.push_str("\nR (input weights):\n");
    for r in 0..2 {
        let row: Vec<String> = (0..2).map(|c| format!("{:>14.6e}", weights.r[(r, c)])).collect();
        out.push_str(&format!("  {}\n", row.join(" ")));
    }
    out.push_str("\nK = R^-1 B^T P (u = -K x):\n");
    for r in 0..sol.k.nrows() {
        let row: Vec<String> = (0..sol.k.ncols()).map(|c| format!("{:>16.8e}", sol.k[(r, c)])).collect();
        out.push_str(&format!("  {}\n", row.join(" ")));
    }
    out.push_str(&format!(
        "\nRiccati residual (Frobenius): {:.6e}\nsign iterations: {}\n",
        sol.residual_norm, sol.iterations
    ));
    out
}

/// Statistics windows for a scenario's report: the standard zoom window
/// (when the run reaches it) plus the full span.
pub fn report_intervals(scenario: &Scenario) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    if scenario.duration >= DEFAULT_WINDOW.1 {
        intervals.push(DEFAULT_WINDOW);
    }
    intervals.push((0.0, scenario.duration));
    intervals
}

/// Everything a suite run produced, plus per-scenario failures.
#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub csv_paths: Vec<PathBuf>,
    pub report_paths: Vec<PathBuf>,
    pub gains_path: Option<PathBuf>,
    /// `(scenario name, diagnostic)` for runs that failed.
    pub failures: Vec<(String, String)>,
}

impl SuiteOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Parses, validates, and runs every scenario in the config.
///
/// All scenario files are parsed and validated before anything is
/// written, so a bad file aborts the run without partial artifacts.
/// Gains are synthesized once from the nominal model and shared by all
/// runs. Scenarios execute in name order; each runs under both
/// controllers unless restricted by the CLI flag or the scenario file.
/// Simulation failures don't abort the suite — they are collected as
/// per-scenario diagnostics and reflected in the exit status.
pub fn run_suite(config: &RunConfig) -> Result<SuiteOutcome, CliError> {
    let mut scenarios = Vec::new();
    for path in &config.scenario_paths {
        scenarios.push(parse_scenario_file(path)?);
    }
    if let Some(seed) = config.seed {
        for sc in &mut scenarios {
            sc.seed = seed;
        }
    }
    scenarios.sort_by(|a, b| a.name.cmp(&b.name));
    for pair in scenarios.windows(2) {
        if pair[0].name == pair[1].name {
            return Err(CliError::BadArgs(format!(
                "duplicate scenario name '{}' would collide in the output directory",
                pair[0].name
            )));
        }
    }

    let model = build_linear_model(&HeliParams::default())?;
    let weights = LqrWeights::default();
    let sol = synthesize_gains(&model, &weights)?;
    let gains: PidGains = partition_gain(&sol.k)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Io {
        path: config.out_dir.clone(),
        source: e,
    })?;

    let mut outcome = SuiteOutcome::default();
    if config.emit_gains {
        let path = config.out_dir.join("gains.txt");
        fs::write(&path, render_gains(&weights, &sol)).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        })?;
        outcome.gains_path = Some(path);
    }

    for scenario in &scenarios {
        let kinds: Vec<ControllerKind> = match config.controller.or(scenario.controller) {
            Some(kind) => vec![kind],
            None => vec![ControllerKind::LqrPid, ControllerKind::IlqrPid],
        };
        let mut traces: Vec<(ControllerKind, Trace)> = Vec::new();
        for &kind in &kinds {
            match run_closed_loop(scenario, &gains, kind) {
                Ok(trace) => {
                    if config.emit_csv {
                        let path = config
                            .out_dir
                            .join(format!("{}_{}.csv", scenario.name, kind.token()));
                        emit_csv(&trace, &path)?;
                        outcome.csv_paths.push(path);
                    }
                    traces.push((kind, trace));
                }
                Err(e) => {
                    outcome
                        .failures
                        .push((scenario.name.clone(), format!("{kind}: {e}")));
                }
            }
        }
        if config.emit_report && traces.len() == 2 {
            let report = compare_report(
                &scenario.name,
                traces[0].0.token(),
                &traces[0].1,
                traces[1].0.token(),
                &traces[1].1,
                &report_intervals(scenario),
            )
            .map_err(|e| CliError::Report {
                scenario: scenario.name.clone(),
                source: e,
            })?;
            let path = config.out_dir.join(format!("{}_report.txt", scenario.name));
            fs::write(&path, report.render()).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            outcome.report_paths.push(path);
        }
    }
    Ok(outcome)
}
