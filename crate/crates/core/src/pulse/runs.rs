//! Gate simulations and calibrations on the two device types.

use std::f64::consts::{PI, SQRT_2};

use ndarray as nd;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::coordinate_ascent;
use super::device::{
    mhz, CouplerPulse, DeviceModel, Drive, FluxDrive, TunableCouplerDevice, TunableQubitDevice, TunableQubitPulse,
};
use super::fidelity::{report_frozen, report_from_block, FidelityReport};
use super::integrator::{DressedFrame, Simulator, StepControl};
use crate::error::SimError;
use crate::gates::{self, CczsParams, DivParams};
use crate::qudit::{ComputationalProjector, Operator, RegisterShape};

/// Simulator, dressed frame and target for one gate on one device.
pub struct GateSetup {
    pub shape: RegisterShape,
    pub sim: Simulator,
    pub frame: DressedFrame,
    pub projector: ComputationalProjector,
    pub target: nd::Array2<C64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GateOutcome {
    pub report: FidelityReport,
    /// Computational block in the dressed frame, before Z correction.
    #[serde(skip)]
    pub block: nd::Array2<C64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trace {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `populations[k][s]`: population of tracked state `s` at `times[k]`.
    pub populations: Vec<Vec<f64>>,
}

impl GateSetup {
    pub fn new(model: &DeviceModel, qubits: &[usize], target: &Operator) -> Result<Self, SimError> {
        let projector = ComputationalProjector::new(&model.shape, qubits)?;
        if target.dim() != projector.n() {
            return Err(SimError::InvalidProtocol(format!(
                "target has dimension {} but the computational subspace has {}",
                target.dim(),
                projector.n()
            )));
        }
        let sim = Simulator::new(model);
        let frame = sim.dressed_frame();
        Ok(Self { shape: model.shape.clone(), sim, frame, projector, target: target.mat.clone() })
    }

    /// Computational block `M = V^dag e^{i H_s T} U V`.
    pub fn block(&self, drive: &dyn Drive, ctrl: &StepControl) -> Result<nd::Array2<C64>, SimError> {
        let idx = self.projector.indices();
        let psi = self.sim.propagate(&self.frame.columns(idx), ctrl, drive)?;
        Ok(self.frame.project(&psi, idx, drive.end()))
    }

    pub fn evaluate(&self, drive: &dyn Drive, ctrl: &StepControl, gate_time: f64) -> Result<GateOutcome, SimError> {
        let m = self.block(drive, ctrl)?;
        Ok(GateOutcome { report: report_from_block(&m, &self.target, gate_time), block: m })
    }

    pub fn evaluate_frozen(
        &self,
        drive: &dyn Drive,
        ctrl: &StepControl,
        gate_time: f64,
        z: &[f64],
    ) -> Result<GateOutcome, SimError> {
        let m = self.block(drive, ctrl)?;
        Ok(GateOutcome { report: report_frozen(&m, &self.target, z, gate_time), block: m })
    }

    /// Dressed-state populations sampled every `sample` ns from a dressed initial state.
    pub fn trace(
        &self,
        drive: &dyn Drive,
        initial: &str,
        tracked: &[&str],
        sample: f64,
        ctrl: &StepControl,
    ) -> Result<Trace, SimError> {
        let i0 = self.shape.parse_ket(initial)?;
        let idx: Vec<usize> = tracked.iter().map(|k| self.shape.parse_ket(k)).collect::<Result<_, _>>()?;
        let mut psi = self.frame.columns(&[i0]);
        let v = self.frame.columns(&idx);
        let mut tr = Trace { labels: tracked.iter().map(|s| s.to_string()).collect(), ..Default::default() };
        let end = drive.end();
        let n = (end / sample).ceil() as usize;
        let mut t = 0.0;
        for k in 0..=n {
            let t1 = (k as f64 * sample).min(end);
            self.sim.evolve(&mut psi, t, t1, ctrl, drive);
            t = t1;
            let amps = v.t().mapv(|z| z.conj()).dot(&psi);
            tr.times.push(t);
            tr.populations.push(amps.iter().map(|z| z.norm_sqr()).collect());
        }
        Ok(tr)
    }
}

// ---------------------------------------------------------------------------
// Tunable qubits

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TqGate {
    Cz01,
    Cz02,
    Cczs,
    Iswap01,
    Iswap02,
    Div,
}

impl TqGate {
    pub fn active(self) -> [bool; 2] {
        match self {
            TqGate::Cz01 | TqGate::Iswap01 => [true, false],
            TqGate::Cz02 | TqGate::Iswap02 => [false, true],
            TqGate::Cczs | TqGate::Div => [true, true],
        }
    }

    pub fn is_cz_type(self) -> bool {
        matches!(self, TqGate::Cz01 | TqGate::Cz02 | TqGate::Cczs)
    }

    pub fn qubits(self) -> Vec<usize> {
        match self {
            TqGate::Cz01 | TqGate::Iswap01 => vec![0, 1],
            TqGate::Cz02 | TqGate::Iswap02 => vec![0, 2],
            TqGate::Cczs | TqGate::Div => vec![0, 1, 2],
        }
    }

    pub fn target(self) -> Operator {
        match self {
            TqGate::Cz01 | TqGate::Cz02 => gates::cz(0.0),
            TqGate::Iswap01 | TqGate::Iswap02 => gates::u_iswap(PI / 2.0),
            TqGate::Cczs => gates::cczs(&CczsParams::new(PI / 2.0, PI, 0.0).unwrap()),
            TqGate::Div => gates::div(&DivParams { theta: PI / 4.0, varphi: PI / 2.0 }),
        }
    }

    /// Resonant frequency for the moving qubit `j` (1 or 2).
    pub fn resonance(self, dev: &TunableQubitDevice, j: usize) -> f64 {
        if self.is_cz_type() {
            dev.cz_target(j)
        } else {
            dev.iswap_target(j)
        }
    }

    /// Ideal interaction time for the effective model.
    pub fn nominal_time(self, dev: &TunableQubitDevice) -> f64 {
        let l = dev.lambdas();
        match self {
            TqGate::Cz01 => PI / l[0],
            TqGate::Cz02 => PI / l[1],
            TqGate::Cczs => PI / (l[0] * l[0] + l[1] * l[1]).sqrt(),
            TqGate::Iswap01 => PI / (2.0 * dev.g[0]),
            TqGate::Iswap02 => PI / (2.0 * dev.g[1]),
            TqGate::Div => PI / (2.0 * (dev.g[0] * dev.g[0] + dev.g[1] * dev.g[1]).sqrt()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TqGate::Cz01 => "cz01",
            TqGate::Cz02 => "cz02",
            TqGate::Cczs => "cczs",
            TqGate::Iswap01 => "iswap01",
            TqGate::Iswap02 => "iswap02",
            TqGate::Div => "div",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [TqGate::Cz01, TqGate::Cz02, TqGate::Cczs, TqGate::Iswap01, TqGate::Iswap02, TqGate::Div]
            .into_iter()
            .find(|g| g.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TqSettings {
    pub t_gate: f64,
    /// Offset from the nominal resonance for `q1`, `q2` (rad/ns).
    pub offsets: [f64; 2],
    pub sigma: f64,
    /// Idle time of `q1`, `q2` before their ramps (ns).
    #[serde(default)]
    pub delays: [f64; 2],
}

impl TqSettings {
    pub fn nominal(dev: &TunableQubitDevice, gate: TqGate) -> Self {
        Self { t_gate: gate.nominal_time(dev), offsets: [0.0; 2], sigma: 1.0, delays: [0.0; 2] }
    }
}

pub fn tq_pulse(dev: &TunableQubitDevice, gate: TqGate, s: &TqSettings) -> TunableQubitPulse {
    let a = gate.active();
    let target = [
        a[0].then(|| gate.resonance(dev, 1) + s.offsets[0]),
        a[1].then(|| gate.resonance(dev, 2) + s.offsets[1]),
    ];
    TunableQubitPulse::new(dev, s.t_gate, s.sigma, target).delayed(s.delays)
}

/// Period of the frame phase that site `j` (1 or 2) winds between idle and
/// its plateau frequency for `gate` (ns).
pub fn frame_period(dev: &TunableQubitDevice, gate: TqGate, j: usize) -> f64 {
    2.0 * PI / (dev.sites[j].omega - gate.resonance(dev, j)).abs()
}

pub fn tq_setup(dev: &TunableQubitDevice, gate: TqGate) -> Result<GateSetup, SimError> {
    dev.validate()?;
    GateSetup::new(&dev.model(), &gate.qubits(), &gate.target())
}

pub fn run_tunable_qubits(
    dev: &TunableQubitDevice,
    gate: TqGate,
    s: &TqSettings,
    ctrl: &StepControl,
) -> Result<GateOutcome, SimError> {
    let setup = tq_setup(dev, gate)?;
    setup.evaluate(&tq_pulse(dev, gate, s), ctrl, s.t_gate)
}

#[derive(Clone, Debug, Serialize)]
pub struct TqCalibration {
    pub gate: TqGate,
    pub settings: TqSettings,
    pub outcome: GateOutcome,
    pub evaluations: usize,
}

/// Adds whole frame periods to the delays so the two plateaus overlap as
/// closely as possible; each site's frame phase is unchanged.
fn align_delays(d: [f64; 2], periods: [f64; 2]) -> [f64; 2] {
    let mut best = d;
    for k1 in 0..4 {
        for k2 in 0..4 {
            let c = [d[0] + k1 as f64 * periods[0], d[1] + k2 as f64 * periods[1]];
            if (c[0] - c[1]).abs() < (best[0] - best[1]).abs() - 1e-9 {
                best = c;
            }
        }
    }
    best
}

/// Local search over gate time and resonance offsets. When both outer qubits
/// move, their start delays are first scanned over one frame period each and
/// then refined with the rest.
pub fn calibrate_tunable_qubits(
    dev: &TunableQubitDevice,
    gate: TqGate,
    ctrl: &StepControl,
) -> Result<TqCalibration, SimError> {
    let setup = tq_setup(dev, gate)?;
    let active = gate.active();
    let both = active[0] && active[1];
    let base = TqSettings::nominal(dev, gate);
    let unpack = |x: &[f64]| {
        let mut s = base;
        s.t_gate = x[0];
        let mut k = 1;
        for j in 0..2 {
            if active[j] {
                s.offsets[j] = x[k];
                k += 1;
            }
        }
        if both {
            s.delays = [x[k], x[k + 1]];
        }
        s
    };
    let objective = |x: &[f64]| {
        let s = unpack(x);
        setup.evaluate(&tq_pulse(dev, gate, &s), ctrl, s.t_gate).map(|o| o.report.fidelity).unwrap_or(0.0)
    };
    let n_off = active.iter().filter(|a| **a).count();
    let n = 1 + n_off + 2 * both as usize;
    let mut x0 = vec![0.0; n];
    x0[0] = base.t_gate + 1.0;
    let mut widths = vec![mhz(1.5); n];
    widths[0] = 3.0;
    let mut tols = vec![mhz(0.01); n];
    tols[0] = 0.01;
    let mut evals = 0;
    if both {
        let steps = 12;
        let periods = [frame_period(dev, gate, 1), frame_period(dev, gate, 2)];
        let grid: Vec<[f64; 2]> = (0..steps * steps)
            .map(|k| [periods[0] * (k / steps) as f64 / steps as f64, periods[1] * (k % steps) as f64 / steps as f64])
            .collect();
        let scores: Vec<f64> = grid
            .par_iter()
            .map(|d| {
                let mut x = x0.clone();
                x[n - 2..].copy_from_slice(d);
                objective(&x)
            })
            .collect();
        evals += grid.len();
        let k = (0..grid.len()).max_by(|a, b| scores[*a].total_cmp(&scores[*b])).unwrap_or(0);
        x0[n - 2..].copy_from_slice(&align_delays(grid[k], periods));
        for j in 0..2 {
            widths[n - 2 + j] = periods[j] / steps as f64;
            tols[n - 2 + j] = 1e-4;
        }
    }
    let r = coordinate_ascent(objective, &x0, &widths, &tols, 3, 0.4);
    let settings = unpack(&r.x);
    let outcome = setup.evaluate(&tq_pulse(dev, gate, &settings), ctrl, settings.t_gate)?;
    Ok(TqCalibration { gate, settings, outcome, evaluations: evals + r.evaluations })
}

// ---------------------------------------------------------------------------
// Tunable couplers

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplerGate {
    Cz01,
    Cz02,
    Cczs,
}

impl CouplerGate {
    pub fn active(self) -> [bool; 2] {
        match self {
            CouplerGate::Cz01 => [true, false],
            CouplerGate::Cz02 => [false, true],
            CouplerGate::Cczs => [true, true],
        }
    }

    pub fn qubits(self) -> Vec<usize> {
        match self {
            CouplerGate::Cz01 => vec![0, 1],
            CouplerGate::Cz02 => vec![0, 2],
            CouplerGate::Cczs => vec![0, 1, 2],
        }
    }

    pub fn target(self, phi: f64) -> Operator {
        match self {
            CouplerGate::Cz01 | CouplerGate::Cz02 => gates::cz(0.0),
            CouplerGate::Cczs => gates::cczs(&CczsParams::new(PI / 2.0, phi, 0.0).unwrap()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CouplerGate::Cz01 => "cz01",
            CouplerGate::Cz02 => "cz02",
            CouplerGate::Cczs => "cczs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [CouplerGate::Cz01, CouplerGate::Cz02, CouplerGate::Cczs].into_iter().find(|g| g.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerSettings {
    pub plateau: f64,
    pub rise: f64,
    pub delta0: [f64; 2],
    pub omega_phi: [f64; 2],
    pub phase: [f64; 2],
}

impl CouplerSettings {
    pub fn gate_time(&self) -> f64 {
        self.plateau + 2.0 * self.rise
    }
}

pub fn coupler_pulse(dev: &TunableCouplerDevice, gate: CouplerGate, s: &CouplerSettings) -> CouplerPulse {
    let a = gate.active();
    let fd = |j: usize| if a[j] { FluxDrive::on(s.delta0[j], s.omega_phi[j], s.phase[j]) } else { FluxDrive::off() };
    CouplerPulse::new(dev, s.plateau, s.rise, [fd(0), fd(1)])
}

pub fn coupler_setup(dev: &TunableCouplerDevice, gate: CouplerGate, phi: f64) -> Result<GateSetup, SimError> {
    dev.validate()?;
    GateSetup::new(&dev.model(), &gate.qubits(), &gate.target(phi))
}

/// Labels of the states exchanged by coupler `j`'s CZ interaction, `(|1_0 1_j>, |2_0 0_j>)`.
pub fn cz_pair(j: usize) -> (&'static str, &'static str) {
    if j == 0 {
        ("11000", "20000")
    } else {
        ("10100", "20000")
    }
}

/// Mean coupler frequency over one modulation period at full amplitude.
pub fn mean_coupler_frequency(dev: &TunableCouplerDevice, j: usize, delta0: f64) -> f64 {
    let n = 256;
    (0..n)
        .map(|k| dev.coupler_frequency(j, dev.theta[j] + delta0 * (2.0 * PI * (k as f64 + 0.5) / n as f64).cos()))
        .sum::<f64>()
        / n as f64
}

/// Dressed `|2_0 0_j> - |1_0 1_j>` gap with every active coupler parked at
/// its mean modulated frequency; a starting guess for `omega_Phi_j`.
pub fn resonance_estimate(dev: &TunableCouplerDevice, j: usize, delta0: [f64; 2], active: [bool; 2]) -> f64 {
    let mut d = dev.clone();
    for k in 0..2 {
        if active[k] {
            // Park the coupler by shifting its maximum so the DC point lands on the mean.
            let ratio = mean_coupler_frequency(dev, k, delta0[k]) / dev.coupler_frequency(k, dev.theta[k]);
            d.couplers[k].omega *= ratio;
        }
    }
    let sim = Simulator::new(&d.model());
    let fr = sim.dressed_frame();
    let sh = d.shape();
    let (a, b) = cz_pair(j);
    fr.gap(sh.parse_ket(b).unwrap(), sh.parse_ket(a).unwrap())
}

/// Default starting point near the quoted operating point.
pub fn coupler_initial_settings(dev: &TunableCouplerDevice, gate: CouplerGate, delta0: f64, plateau: f64) -> CouplerSettings {
    let active = gate.active();
    let d0 = [delta0; 2];
    let omega_phi = [
        if active[0] { resonance_estimate(dev, 0, d0, active) } else { 0.0 },
        if active[1] { resonance_estimate(dev, 1, d0, active) } else { 0.0 },
    ];
    CouplerSettings { plateau, rise: 25.0, delta0: d0, omega_phi, phase: [0.0; 2] }
}

/// Final states for several plateau lengths from one run: the evolution up to
/// the start of each fall is shared and every fall is branched off it. Returns
/// `(end time, states)` in the order of `plateaus`.
pub fn plateau_branches(
    dev: &TunableCouplerDevice,
    sim: &Simulator,
    gate: CouplerGate,
    s: &CouplerSettings,
    plateaus: &[f64],
    initial: &nd::Array2<C64>,
    ctrl: &StepControl,
) -> Result<Vec<(f64, nd::Array2<C64>)>, SimError> {
    if plateaus.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(SimError::InvalidSweep("plateau lengths must be finite and non-negative".into()));
    }
    let mut order: Vec<usize> = (0..plateaus.len()).collect();
    order.sort_by(|a, b| plateaus[*a].total_cmp(&plateaus[*b]));
    let pmax = plateaus.iter().copied().fold(0.0, f64::max);
    // Up to the start of any fall the drive is that of the longest pulse.
    let long = coupler_pulse(dev, gate, &CouplerSettings { plateau: pmax, ..*s });
    let mut psi = initial.clone();
    let mut t = 0.0;
    let mut out = vec![(0.0, nd::Array2::zeros((0, 0))); plateaus.len()];
    for k in order {
        let p = plateaus[k];
        let t_fall = s.rise + p;
        sim.evolve(&mut psi, t, t_fall, ctrl, &long);
        t = t_fall;
        let pulse = coupler_pulse(dev, gate, &CouplerSettings { plateau: p, ..*s });
        let mut branch = psi.clone();
        sim.evolve(&mut branch, t_fall, pulse.end(), ctrl, &pulse);
        out[k] = (pulse.end(), branch);
    }
    Ok(out)
}

/// Dressed populations of `observe` after the full pulse from `initial`, for
/// each plateau length.
pub fn plateau_scan(
    dev: &TunableCouplerDevice,
    setup: &GateSetup,
    gate: CouplerGate,
    s: &CouplerSettings,
    plateaus: &[f64],
    observe: &[&str],
    initial: &str,
    ctrl: &StepControl,
) -> Result<Vec<Vec<f64>>, SimError> {
    let i0 = setup.shape.parse_ket(initial)?;
    let obs: Vec<usize> = observe.iter().map(|k| setup.shape.parse_ket(k)).collect::<Result<_, _>>()?;
    let branches = plateau_branches(dev, &setup.sim, gate, s, plateaus, &setup.frame.columns(&[i0]), ctrl)?;
    Ok(branches
        .iter()
        .map(|(end, psi)| setup.frame.project(psi, &obs, *end).iter().map(|z| z.norm_sqr()).collect())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplerCalibration {
    pub gate: CouplerGate,
    pub settings: CouplerSettings,
    pub outcome: GateOutcome,
    pub evaluations: usize,
}

/// Local search over plateau length and modulation frequencies.
pub fn calibrate_coupler(
    dev: &TunableCouplerDevice,
    setup: &GateSetup,
    gate: CouplerGate,
    start: &CouplerSettings,
    widths: (f64, f64),
    rounds: usize,
    ctrl: &StepControl,
) -> Result<CouplerCalibration, SimError> {
    let active = gate.active();
    let unpack = |x: &[f64]| {
        let mut s = *start;
        s.plateau = x[0];
        let mut k = 1;
        for j in 0..2 {
            if active[j] {
                s.omega_phi[j] = x[k];
                k += 1;
            }
        }
        s
    };
    let mut x0 = vec![start.plateau];
    let mut w = vec![widths.0];
    let mut tols = vec![0.2];
    for j in 0..2 {
        if active[j] {
            x0.push(start.omega_phi[j]);
            w.push(widths.1);
            tols.push(mhz(0.005));
        }
    }
    let objective = |x: &[f64]| {
        let s = unpack(x);
        setup.evaluate(&coupler_pulse(dev, gate, &s), ctrl, s.gate_time()).map(|o| o.report.fidelity).unwrap_or(0.0)
    };
    let r = coordinate_ascent(objective, &x0, &w, &tols, rounds, 0.4);
    let settings = unpack(&r.x);
    let outcome = setup.evaluate(&coupler_pulse(dev, gate, &settings), ctrl, settings.gate_time())?;
    Ok(CouplerCalibration { gate, settings, outcome, evaluations: r.evaluations })
}

/// Operating points of the default coupler device found with
/// [`calibrate_coupler`] (dt = 0.05 ns, `delta0 = 0.08`, 25 ns ramps).
pub fn coupler_operating_point(gate: CouplerGate) -> CouplerSettings {
    let ghz = |f: f64| 2.0 * PI * f;
    let (plateau, omega_phi) = match gate {
        CouplerGate::Cz01 => (370.94, [ghz(0.405_935_64), 0.0]),
        CouplerGate::Cz02 => (338.22, [0.0, ghz(0.279_518_00)]),
        CouplerGate::Cczs => (252.066, [ghz(0.405_322_29), ghz(0.280_359_27)]),
    };
    CouplerSettings { plateau, rise: 25.0, delta0: [0.08; 2], omega_phi, phase: [0.0; 2] }
}

/// Ratio used for the simultaneous gate: `t_p(CCZS) ~ t_p(CZ) / sqrt(2)`.
pub fn cczs_plateau_guess(cz_plateaus: [f64; 2]) -> f64 {
    0.5 * (cz_plateaus[0] + cz_plateaus[1]) / SQRT_2
}
