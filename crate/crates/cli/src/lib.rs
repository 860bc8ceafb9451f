//! Command-line front end: argument definitions and the command runners.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trigate::config::{self, CouplerPulseConfig, DeviceFile, SweepFile, TqPulseConfig};
use trigate::gates::{self, GateArgs};
use trigate::pulse::fidelity::{report_from_block, FidelityReport};
use trigate::pulse::device::mhz;
use trigate::pulse::runs::{
    calibrate_coupler, calibrate_tunable_qubits, coupler_operating_point, coupler_pulse, coupler_setup,
    run_tunable_qubits, tq_pulse, tq_setup, CouplerGate, GateSetup, TqGate, TqSettings,
};
use trigate::pulse::{Drive, StepControl, TunableCouplerDevice, TunableQubitDevice};
use trigate::qudit::{Operator, OperatorDump};
use trigate::state_prep::{self, PROTOCOL_NAMES};
use trigate::sweeps::{fmt6, run_sweep};

/// Significant digits in every dumped number.
pub const DUMP_DIGITS: i32 = 12;

/// Environment variable giving the default output directory.
pub const OUT_DIR_ENV: &str = "TRIGATE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "trigate", version, about = "Three-qubit gates from simultaneous two-qubit interactions")]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Directory for output files; reports always also go to stdout.
    #[arg(long, global = true, value_name = "DIR", env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a gate matrix.
    GateDump(GateDumpArgs),
    /// Check an analytic gate identity.
    GateVerify(GateVerifyArgs),
    /// Run a state-preparation protocol and report the fidelity to its target.
    Prepare(PrepareArgs),
    /// Simulate a gate on a device model.
    Simulate(SimulateArgs),
    /// Run a parameter sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Average gate fidelity of a dumped matrix against a named gate.
    Fidelity(FidelityArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct GateParams {
    /// Mixing angle theta (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Phase phi (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Conditional phase gamma (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// iSWAP angle beta (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// DIV rotation angle varphi (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub varphi: Option<f64>,
}

impl GateParams {
    fn args(&self) -> GateArgs {
        GateArgs { theta: self.theta, phi: self.phi, gamma: self.gamma, beta: self.beta, varphi: self.varphi }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DumpFormat {
    Json,
    Text,
}

#[derive(Debug, clap::Args)]
pub struct GateDumpArgs {
    /// Gate name: cczs, uczs, div, udiv, xy, cz, iswap, uiswap, fredkin, ifredkin, toffoli, ccz, h, x, s, sqrtx.
    pub name: String,
    #[command(flatten)]
    pub params: GateParams,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: DumpFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Identity {
    /// CCZS = XY . CZ . XY^dag.
    #[value(alias = "eq33")]
    Decomposition,
    Fredkin,
    Ifredkin,
    Toffoli,
    All,
}

#[derive(Debug, clap::Args)]
pub struct GateVerifyArgs {
    /// Identity to check.
    #[arg(value_enum)]
    pub identity: Identity,
    /// Points per axis of the regular (theta, phi, gamma) lattice.
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Number of random parameter triples.
    #[arg(long, default_value_t = 100)]
    pub random: usize,
    /// Seed for the random triples.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Points per axis of the Toffoli distance scan.
    #[arg(long, default_value_t = 20)]
    pub toffoli_grid: usize,
}

#[derive(Debug, clap::Args)]
pub struct PrepareArgs {
    /// Protocol: ghz3, dicke53, w3-div, w16-cz, w16-iswap or all.
    pub protocol: String,
    /// Fail (exit 1) below this fidelity.
    #[arg(long, default_value_t = 1.0 - 1e-8)]
    pub min_fidelity: f64,
    /// Include the final state amplitudes for the small protocols.
    #[arg(long)]
    pub dump_state: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Scheme {
    TunableQubits,
    TunableCoupler,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Device scheme.
    #[arg(value_enum)]
    pub scheme: Scheme,
    /// Gate: cz01, cz02, cczs (both schemes); iswap01, iswap02, div (tunable qubits).
    #[arg(long)]
    pub target: String,
    /// Device TOML file (default: built-in device).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Pulse TOML file (default: built-in operating point).
    #[arg(long, value_name = "FILE")]
    pub pulse: Option<PathBuf>,
    /// Run the local calibration before reporting.
    #[arg(long)]
    pub calibrate: bool,
    /// Integrator step (ns).
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Target phi of the CCZS (rad).
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    pub phi: f64,
    /// Fail (exit 1) below this fidelity.
    #[arg(long)]
    pub min_fidelity: Option<f64>,
    /// Write a population trace CSV starting from this basis ket (one digit per site).
    #[arg(long, value_name = "KET")]
    pub trace: Option<String>,
    /// Comma-separated kets to track in the trace (default: the initial ket).
    #[arg(long, value_name = "KETS", value_delimiter = ',', requires = "trace")]
    pub track: Vec<String>,
    /// Trace sampling interval (ns).
    #[arg(long, default_value_t = 0.5, requires = "trace")]
    pub sample: f64,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// Sweep TOML file.
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct FidelityArgs {
    /// Matrix JSON file as written by gate-dump.
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    /// Target gate name (see gate-dump).
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub params: GateParams,
    /// Fail (exit 1) below this fidelity.
    #[arg(long)]
    pub min_fidelity: Option<f64>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and failed (exit 1).
    Verification(String),
    /// Bad input, configuration or I/O (exit 2).
    Usage(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

/// Everything a command prints, plus files to write under the output directory.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub failed: Option<String>,
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Operator dump as JSON with one matrix row per line.
pub fn operator_json(d: &OperatorDump) -> Result<String> {
    let rows: Vec<String> = d.entries.iter().map(serde_json::to_string).collect::<Result<_, _>>()?;
    Ok(format!(
        "{{\n  \"dims\": {},\n  \"labels\": {},\n  \"entries\": [\n    {}\n  ]\n}}\n",
        serde_json::to_string(&d.dims)?,
        serde_json::to_string(&d.labels)?,
        rows.join(",\n    ")
    ))
}

fn check_file(p: &Path) -> Result<()> {
    if !p.is_file() {
        bail!("file not found: {}", p.display());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    // Validate paths before any computation.
    match &cli.command {
        Command::Simulate(a) => {
            for p in a.config.iter().chain(&a.pulse) {
                check_file(p)?;
            }
        }
        Command::Sweep(a) => check_file(&a.spec)?,
        Command::Fidelity(a) => check_file(&a.matrix)?,
        _ => {}
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(anyhow!("--jobs must be at least 1").into());
        }
        // Ignore the error if a pool was already set up in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = match &cli.command {
        Command::GateDump(a) => gate_dump(a)?,
        Command::GateVerify(a) => gate_verify(a)?,
        Command::Prepare(a) => prepare(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::Sweep(a) => sweep(a)?,
        Command::Fidelity(a) => fidelity(a)?,
    };
    if let Some(dir) = &cli.out {
        if !out.files.is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (name, body) in &out.files {
                let p = dir.join(name);
                fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))?;
            }
        }
    }
    Ok(out)
}

fn gate_dump(a: &GateDumpArgs) -> Result<Outcome> {
    let op = gates::named_gate(&a.name, &a.params.args())?;
    let dump = op.to_dump(DUMP_DIGITS);
    let stdout = match a.format {
        DumpFormat::Json => operator_json(&dump)?,
        DumpFormat::Text => {
            let mut s = String::new();
            for row in &dump.entries {
                let cells: Vec<String> = row.iter().map(|[re, im]| format!("{re:+.11e}{im:+.11e}i")).collect();
                s += &cells.join("  ");
                s.push('\n');
            }
            s
        }
    };
    Ok(Outcome { files: vec![(format!("{}.json", a.name), operator_json(&dump)?)], stdout, failed: None })
}

fn gate_verify(a: &GateVerifyArgs) -> Result<Outcome> {
    let mut reports = Vec::new();
    let want = |i: Identity| a.identity == i || a.identity == Identity::All;
    if want(Identity::Decomposition) {
        reports.push(gates::verify_xy_cz_decomposition(a.random, a.grid, a.seed));
    }
    if want(Identity::Fredkin) {
        reports.push(gates::construct_fredkin()?.report);
    }
    if want(Identity::Ifredkin) {
        reports.push(gates::construct_ifredkin()?.report);
    }
    if want(Identity::Toffoli) {
        reports.push(gates::verify_toffoli_distinct(a.toffoli_grid));
    }
    let mut stdout = String::new();
    for r in &reports {
        stdout += &format!(
            "{:<10} {} max residual {:.3e} (tolerance {:.1e}) {}\n",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.max_residual,
            r.tolerance,
            r.note
        );
    }
    let failed = reports.iter().find(|r| !r.pass).map(|r| format!("identity {} failed", r.name));
    Ok(Outcome { stdout, files: vec![("gate-verify.json".into(), json(&reports)?)], failed })
}

#[derive(Serialize)]
struct PrepareReport {
    protocol: String,
    fidelity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<trigate::qudit::StateDump>,
}

fn prepare(a: &PrepareArgs) -> Result<Outcome> {
    let names: Vec<&str> =
        if a.protocol == "all" { PROTOCOL_NAMES.to_vec() } else { vec![a.protocol.as_str()] };
    let mut reports = Vec::new();
    for n in names {
        let (psi, f) = state_prep::run_named(n)?;
        let state = if a.dump_state { psi.map(|p| p.to_dump(DUMP_DIGITS)) } else { None };
        reports.push(PrepareReport { protocol: n.into(), fidelity: f, state });
    }
    let stdout = reports.iter().map(|r| format!("{:<10} fidelity {:.12}\n", r.protocol, r.fidelity)).collect::<String>();
    let failed = reports
        .iter()
        .find(|r| r.fidelity.is_nan() || r.fidelity < a.min_fidelity)
        .map(|r| format!("{} fidelity {:.3e} below {}", r.protocol, r.fidelity, a.min_fidelity));
    Ok(Outcome { stdout, files: vec![("prepare.json".into(), json(&reports)?)], failed })
}

#[derive(Serialize)]
struct SimulateReport {
    scheme: String,
    gate: String,
    report: FidelityReport,
    pulse: serde_json::Value,
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    if !(a.dt > 0.0 && a.dt.is_finite()) {
        bail!("--dt must be positive");
    }
    let ctrl = StepControl::with_dt(a.dt);
    let device_file = a.config.as_ref().map(|p| config::load::<DeviceFile>(p)).transpose()?;
    let (name, report, pulse, trace) = match a.scheme {
        Scheme::TunableQubits => {
            let gate = TqGate::parse(&a.target).ok_or_else(|| anyhow!("unknown tunable-qubit gate '{}'", a.target))?;
            let dev = match device_file {
                Some(DeviceFile::TunableQubits(c)) => c.to_device()?,
                Some(_) => bail!("device file is not a tunable-qubits device"),
                None if matches!(gate, TqGate::Iswap01 | TqGate::Iswap02 | TqGate::Div) => TunableQubitDevice::default_div(),
                None => TunableQubitDevice::default_cczs(),
            };
            let settings = match &a.pulse {
                Some(p) => config::load::<TqPulseConfig>(p)?.to_settings()?,
                None => TqSettings::nominal(&dev, gate),
            };
            let (settings, report) = if a.calibrate || a.pulse.is_none() {
                let c = calibrate_tunable_qubits(&dev, gate, &ctrl)?;
                (c.settings, c.outcome.report)
            } else {
                (settings, run_tunable_qubits(&dev, gate, &settings, &ctrl)?.report)
            };
            let trace = match &a.trace {
                Some(k) => Some(trace_csv(&tq_setup(&dev, gate)?, &tq_pulse(&dev, gate, &settings), k, a, &ctrl)?),
                None => None,
            };
            (gate.name(), report, serde_json::to_value(TqPulseConfig::from_settings(&settings))?, trace)
        }
        Scheme::TunableCoupler => {
            let gate = CouplerGate::parse(&a.target).ok_or_else(|| anyhow!("unknown tunable-coupler gate '{}'", a.target))?;
            let dev = match device_file {
                Some(DeviceFile::TunableCoupler(c)) => c.to_device()?,
                Some(_) => bail!("device file is not a tunable-coupler device"),
                None => TunableCouplerDevice::default_device(),
            };
            let mut settings = match &a.pulse {
                Some(p) => config::load::<CouplerPulseConfig>(p)?.to_settings()?,
                None => coupler_operating_point(gate),
            };
            let setup = coupler_setup(&dev, gate, a.phi)?;
            let report = if a.calibrate {
                let c = calibrate_coupler(&dev, &setup, gate, &settings, (20.0, mhz(1.0)), 2, &ctrl)?;
                settings = c.settings;
                c.outcome.report
            } else {
                setup.evaluate(&coupler_pulse(&dev, gate, &settings), &ctrl, settings.gate_time())?.report
            };
            let trace = match &a.trace {
                Some(k) => Some(trace_csv(&setup, &coupler_pulse(&dev, gate, &settings), k, a, &ctrl)?),
                None => None,
            };
            (gate.name(), report, serde_json::to_value(CouplerPulseConfig::from_settings(&settings))?, trace)
        }
    };
    let scheme = match a.scheme {
        Scheme::TunableQubits => "tunable-qubits",
        Scheme::TunableCoupler => "tunable-coupler",
    };
    let rep = SimulateReport { scheme: scheme.into(), gate: name.into(), report, pulse };
    let stdout = format!(
        "{scheme} {name}: fidelity {:.6} leakage {:.3e} gate time {:.3} ns\n",
        rep.report.fidelity, rep.report.leakage, rep.report.gate_time
    );
    let failed = a
        .min_fidelity
        .filter(|m| !(rep.report.fidelity >= *m))
        .map(|m| format!("fidelity {:.6} below {m}", rep.report.fidelity));
    let mut files = vec![(format!("simulate-{scheme}-{name}.json"), json(&rep)?)];
    if let Some(csv) = trace {
        files.push((format!("simulate-{scheme}-{name}.trace.csv"), csv));
    }
    Ok(Outcome { stdout: json(&rep)? + &stdout, files, failed })
}

fn trace_csv(setup: &GateSetup, drive: &dyn Drive, initial: &str, a: &SimulateArgs, ctrl: &StepControl) -> Result<String> {
    if !(a.sample > 0.0 && a.sample.is_finite()) {
        bail!("--sample must be positive");
    }
    let tracked: Vec<&str> =
        if a.track.is_empty() { vec![initial] } else { a.track.iter().map(String::as_str).collect() };
    let tr = setup.trace(drive, initial, &tracked, a.sample, ctrl)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time_ns".to_string()];
    header.extend(tr.labels.iter().map(|l| format!("pop_{l}")));
    w.write_record(&header)?;
    for (t, row) in tr.times.iter().zip(&tr.populations) {
        let mut rec = vec![fmt6(*t)];
        rec.extend(row.iter().map(|p| fmt6(*p)));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn sweep(a: &SweepArgs) -> Result<Outcome> {
    let file: SweepFile = config::load(&a.spec)?;
    let spec = file.to_spec()?;
    let result = run_sweep(&spec)?;
    let mut stdout = format!("sweep {}: {} points\n", result.name, result.values.len());
    for e in &result.summary {
        stdout += &format!("  {}: max {:.6} at {:?}, min {:.6} at {:?}\n", e.observable, e.max, e.argmax, e.min, e.argmin);
    }
    if !result.failures.is_empty() {
        stdout += &format!("  {} points failed\n", result.failures.len());
    }
    if !result.clamped.is_empty() {
        stdout += &format!("  {} points clamped into [0, 1]\n", result.clamped.len());
    }
    let summary = serde_json::json!({
        "name": result.name,
        "summary": result.summary,
        "failures": result.failures,
        "clamped": result.clamped,
        "provenance": result.provenance,
    });
    let files = vec![(format!("{}.csv", result.name), result.to_csv()), (format!("{}.summary.json", result.name), json(&summary)?)];
    Ok(Outcome { stdout, files, failed: None })
}

fn fidelity(a: &FidelityArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.matrix).with_context(|| format!("cannot read {}", a.matrix.display()))?;
    let dump: OperatorDump =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", a.matrix.display()))?;
    let m = Operator::from_dump(&dump)?;
    let u = gates::named_gate(&a.target, &a.params.args())?;
    if m.dim() != u.dim() || !matches!(m.dim(), 4 | 8) {
        bail!("matrix dimension {} does not match target dimension {} (expected 4 or 8)", m.dim(), u.dim());
    }
    let report = report_from_block(&m.mat, &u.mat, 0.0);
    let stdout = format!(
        "fidelity {:.12} (uncorrected {:.12}) leakage {:.3e}\n",
        report.fidelity, report.fidelity_uncorrected, report.leakage
    );
    let failed = a
        .min_fidelity
        .filter(|m| !(report.fidelity >= *m))
        .map(|m| format!("fidelity {:.6} below {m}", report.fidelity));
    Ok(Outcome { stdout, files: vec![("fidelity.json".into(), json(&report)?)], failed })
}
