//! Grid sweeps over drive parameters, chevron-tip extraction and the
//! phase scan of the simultaneous coupler gate.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray as nd;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SimError;
use crate::gates::{self, CczsParams};
use crate::pulse::device::{mhz, TunableCouplerDevice, TunableQubitDevice};
use crate::pulse::fidelity::{report_frozen, report_from_block};
use crate::pulse::Drive;
use crate::pulse::integrator::StepControl;
use crate::pulse::runs::{
    coupler_pulse, coupler_setup, plateau_branches, tq_pulse, tq_setup, CouplerGate, CouplerSettings, GateSetup, TqGate,
    TqSettings,
};

/// Values at or beyond this distance outside `[0, 1]` are clamped and flagged.
pub const RANGE_SLACK: f64 = 1e-9;

/// Sweepable parameter. The serialized name carries the unit of the axis values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Gate time for tunable qubits, plateau length for couplers.
    #[serde(rename = "time_ns")]
    Time,
    #[serde(rename = "mod_freq_1_ghz")]
    ModFreq1,
    #[serde(rename = "mod_freq_2_ghz")]
    ModFreq2,
    /// Added to the drive phase of coupler 1.
    #[serde(rename = "phase_diff_rad")]
    PhaseDiff,
    /// Flux amplitude of every active coupler.
    #[serde(rename = "amplitude_flux_phi0")]
    Amplitude,
    /// DC bias of both couplers.
    #[serde(rename = "bias_flux_phi0")]
    Bias,
    #[serde(rename = "offset_1_mhz")]
    Offset1,
    #[serde(rename = "offset_2_mhz")]
    Offset2,
    /// Target `phi` of the CCZS used by fidelity observables.
    #[serde(rename = "target_phi_rad")]
    TargetPhi,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Time => "time_ns",
            Axis::ModFreq1 => "mod_freq_1_ghz",
            Axis::ModFreq2 => "mod_freq_2_ghz",
            Axis::PhaseDiff => "phase_diff_rad",
            Axis::Amplitude => "amplitude_flux_phi0",
            Axis::Bias => "bias_flux_phi0",
            Axis::Offset1 => "offset_1_mhz",
            Axis::Offset2 => "offset_2_mhz",
            Axis::TargetPhi => "target_phi_rad",
        }
    }

    fn allowed_for(self, device: &SweepDevice) -> bool {
        match (self, device) {
            (Axis::Time | Axis::TargetPhi, _) => true,
            (Axis::Offset1 | Axis::Offset2, SweepDevice::TunableQubits { .. }) => true,
            (Axis::Offset1 | Axis::Offset2, _) => false,
            (_, SweepDevice::TunableCoupler { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(axis: Axis, start: f64, stop: f64, count: usize) -> Self {
        Self { axis, start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count).map(|k| self.start + (self.stop - self.start) * k as f64 / (self.count - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    /// Dressed population of `state` at the end, starting from dressed `initial`.
    Population { initial: String, state: String },
    /// Virtual-Z corrected fidelity against the gate's target.
    Fidelity,
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Population { initial, state } => format!("pop_{state}_from_{initial}"),
            Observable::Fidelity => "fidelity".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum SweepDevice {
    TunableQubits { device: TunableQubitDevice, gate: TqGate, base: TqSettings },
    TunableCoupler { device: TunableCouplerDevice, gate: CouplerGate, base: CouplerSettings },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    pub device: SweepDevice,
    pub axes: Vec<AxisSpec>,
    pub observables: Vec<Observable>,
    /// Target `phi` of a CCZS when no `target_phi_rad` axis is given.
    #[serde(default = "default_phi")]
    pub target_phi: f64,
    pub step: StepControl,
}

fn default_phi() -> f64 {
    PI
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSweep(m));
        if self.axes.is_empty() || self.axes.len() > 3 {
            return bad(format!("expected 1 to 3 axes, found {}", self.axes.len()));
        }
        if self.observables.is_empty() {
            return bad("no observables".into());
        }
        let mut seen = Vec::new();
        for a in &self.axes {
            if seen.contains(&a.axis) {
                return bad(format!("axis {} given twice", a.axis.name()));
            }
            seen.push(a.axis);
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return bad(format!("axis {} has a non-finite range", a.axis.name()));
            }
            if a.count < 2 && !(a.count == 1 && self.total_points() == 1) {
                return bad(format!("axis {} needs at least 2 points", a.axis.name()));
            }
            if !a.axis.allowed_for(&self.device) {
                return bad(format!("axis {} does not apply to this device", a.axis.name()));
            }
            if a.axis == Axis::Time && a.start.min(a.stop) < 0.0 {
                return bad("negative times".into());
            }
        }
        if !(self.step.dt > 0.0 && self.step.dt.is_finite()) {
            return bad(format!("step {} ns", self.step.dt));
        }
        match &self.device {
            SweepDevice::TunableQubits { device, .. } => device.validate()?,
            SweepDevice::TunableCoupler { device, .. } => device.validate()?,
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let d = Sha256::digest(json.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Coordinates of point `k`, the last axis varying fastest.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.axes.len()];
        for (i, a) in self.axes.iter().enumerate().rev() {
            let v = a.values();
            c[i] = v[k % a.count];
            k /= a.count;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: String,
    pub dt: f64,
    pub scheme: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub observable: String,
    pub max: f64,
    pub argmax: Vec<f64>,
    pub min: f64,
    pub argmin: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub axes: Vec<AxisSpec>,
    pub observables: Vec<String>,
    /// `values[point][observable]`, points in [`SweepSpec::point`] order.
    pub values: Vec<Vec<f64>>,
    /// Failure reason for points whose values are NaN.
    pub failures: BTreeMap<usize, String>,
    /// Points where a value was clamped into `[0, 1]`.
    pub clamped: Vec<usize>,
    pub summary: Vec<Extremum>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn coords(&self, k: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.axes.len()];
        let mut k = k;
        for (i, a) in self.axes.iter().enumerate().rev() {
            c[i] = a.values()[k % a.count];
            k /= a.count;
        }
        c
    }

    pub fn observable_index(&self, label: &str) -> Option<usize> {
        self.observables.iter().position(|o| o == label)
    }

    /// One header row, then one row per point; values to 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let head: Vec<&str> =
            self.axes.iter().map(|a| a.axis.name()).chain(self.observables.iter().map(|s| s.as_str())).collect();
        let _ = writeln!(out, "{},note", head.join(","));
        for (k, row) in self.values.iter().enumerate() {
            let mut cells: Vec<String> = self.coords(k).iter().map(|v| fmt6(*v)).collect();
            cells.extend(row.iter().map(|v| fmt6(*v)));
            let note = match (self.failures.get(&k), self.clamped.contains(&k)) {
                (Some(r), _) => r.replace([',', '\n'], ";"),
                (None, true) => "clamped".into(),
                _ => String::new(),
            };
            let _ = writeln!(out, "{},{}", cells.join(","), note);
        }
        out
    }
}

/// Six significant digits, `NaN` for missing values.
pub fn fmt6(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.5e}")
    }
}

fn clamp_unit(v: f64, flagged: &mut bool) -> f64 {
    if v < -RANGE_SLACK || v > 1.0 + RANGE_SLACK {
        *flagged = true;
    }
    v.clamp(0.0, 1.0)
}

enum Prepared {
    Tq { device: TunableQubitDevice, gate: TqGate, base: TqSettings, setup: Option<GateSetup> },
    Coupler { device: TunableCouplerDevice, gate: CouplerGate, base: CouplerSettings, setup: Option<GateSetup> },
}

/// Everything a grid point needs: initial dressed columns and the rows to read.
struct Plan {
    initial: Vec<usize>,
    comp: Vec<usize>,
    pops: Vec<(usize, usize)>,
}

fn plan(setup: &GateSetup, obs: &[Observable]) -> Result<Plan, SimError> {
    let comp = setup.projector.indices().to_vec();
    let mut initial = Vec::new();
    if obs.iter().any(|o| matches!(o, Observable::Fidelity)) {
        initial.extend_from_slice(&comp);
    }
    let mut pops = Vec::new();
    for o in obs {
        if let Observable::Population { initial: i, state } = o {
            let i = setup.shape.parse_ket(i)?;
            let s = setup.shape.parse_ket(state)?;
            let col = match initial.iter().position(|&x| x == i) {
                Some(c) => c,
                None => {
                    initial.push(i);
                    initial.len() - 1
                }
            };
            pops.push((col, s));
        }
    }
    Ok(Plan { initial, comp, pops })
}

fn target_for(spec_device: &SweepDevice, phi: f64) -> nd::Array2<C64> {
    match spec_device {
        SweepDevice::TunableQubits { gate, .. } => gate.target().mat,
        SweepDevice::TunableCoupler { gate: CouplerGate::Cczs, .. } => {
            gates::cczs(&CczsParams::new(PI / 2.0, phi, 0.0).expect("gamma = 0")).mat
        }
        SweepDevice::TunableCoupler { gate, .. } => gate.target(phi).mat,
    }
}

fn observe(
    setup: &GateSetup,
    plan: &Plan,
    obs: &[Observable],
    psi: &nd::Array2<C64>,
    end: f64,
    target: &nd::Array2<C64>,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(obs.len());
    let mut pop_k = 0;
    let block = if obs.iter().any(|o| matches!(o, Observable::Fidelity)) {
        let n = plan.comp.len();
        Some(setup.frame.project(&psi.slice(nd::s![.., ..n]).to_owned(), &plan.comp, end))
    } else {
        None
    };
    for o in obs {
        match o {
            Observable::Fidelity => {
                let m = block.as_ref().expect("block computed");
                out.push(report_from_block(m, target, end).fidelity);
            }
            Observable::Population { .. } => {
                let (col, s) = plan.pops[pop_k];
                pop_k += 1;
                let a = setup.frame.project(&psi.slice(nd::s![.., col..col + 1]).to_owned(), &[s], end);
                out.push(a[[0, 0]].norm_sqr());
            }
        }
    }
    out
}

fn apply_tq(base: &TqSettings, axes: &[AxisSpec], c: &[f64]) -> TqSettings {
    let mut s = *base;
    for (a, v) in axes.iter().zip(c) {
        match a.axis {
            Axis::Time => s.t_gate = *v,
            Axis::Offset1 => s.offsets[0] = mhz(*v),
            Axis::Offset2 => s.offsets[1] = mhz(*v),
            _ => {}
        }
    }
    s
}

fn apply_coupler(
    device: &TunableCouplerDevice,
    base: &CouplerSettings,
    axes: &[AxisSpec],
    c: &[f64],
) -> (TunableCouplerDevice, CouplerSettings) {
    let mut d = device.clone();
    let mut s = *base;
    for (a, v) in axes.iter().zip(c) {
        match a.axis {
            Axis::Time => s.plateau = *v,
            Axis::ModFreq1 => s.omega_phi[0] = 2.0 * PI * v,
            Axis::ModFreq2 => s.omega_phi[1] = 2.0 * PI * v,
            Axis::PhaseDiff => s.phase[0] = base.phase[0] + v,
            Axis::Amplitude => s.delta0 = [*v; 2],
            Axis::Bias => d.theta = [*v; 2],
            _ => {}
        }
    }
    (d, s)
}

fn target_phi(spec: &SweepSpec, c: &[f64]) -> f64 {
    spec.axes.iter().zip(c).find(|(a, _)| a.axis == Axis::TargetPhi).map_or(spec.target_phi, |(_, v)| *v)
}

/// Evaluates one grid point from scratch.
fn eval_point(spec: &SweepSpec, prep: &Prepared, c: &[f64]) -> Result<Vec<f64>, SimError> {
    let phi = target_phi(spec, c);
    let target = target_for(&spec.device, phi);
    match prep {
        Prepared::Tq { device, gate, base, setup } => {
            let setup = setup.as_ref().expect("tunable-qubit setup is shared");
            let s = apply_tq(base, &spec.axes, c);
            let p = plan(setup, &spec.observables)?;
            let pulse = tq_pulse(device, *gate, &s);
            let psi = setup.sim.propagate(&setup.frame.columns(&p.initial), &spec.step, &pulse)?;
            Ok(observe(setup, &p, &spec.observables, &psi, pulse.end(), &target))
        }
        Prepared::Coupler { device, gate, base, setup } => {
            let (d, s) = apply_coupler(device, base, &spec.axes, c);
            let owned;
            let setup = match setup {
                Some(s) => s,
                None => {
                    owned = coupler_setup(&d, *gate, phi)?;
                    &owned
                }
            };
            let p = plan(setup, &spec.observables)?;
            let pulse = coupler_pulse(&d, *gate, &s);
            let psi = setup.sim.propagate(&setup.frame.columns(&p.initial), &spec.step, &pulse)?;
            Ok(observe(setup, &p, &spec.observables, &psi, pulse.end(), &target))
        }
    }
}

fn prepare(spec: &SweepSpec) -> Result<Prepared, SimError> {
    Ok(match &spec.device {
        SweepDevice::TunableQubits { device, gate, base } => {
            Prepared::Tq { device: device.clone(), gate: *gate, base: *base, setup: Some(tq_setup(device, *gate)?) }
        }
        SweepDevice::TunableCoupler { device, gate, base } => {
            let per_point = spec.axes.iter().any(|a| a.axis == Axis::Bias);
            let setup = if per_point { None } else { Some(coupler_setup(device, *gate, spec.target_phi)?) };
            Prepared::Coupler { device: device.clone(), gate: *gate, base: *base, setup }
        }
    })
}

/// Runs every grid point, in parallel on the current rayon pool. Results do
/// not depend on the evaluation order. For coupler sweeps with a time axis,
/// points differing only in plateau length share one branched propagation.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SimError> {
    spec.validate()?;
    let prep = prepare(spec)?;
    let n = spec.total_points();
    let time_axis = spec.axes.iter().position(|a| a.axis == Axis::Time);
    let branched = matches!(prep, Prepared::Coupler { setup: Some(_), .. }) && time_axis.is_some();

    let rows: Vec<Result<Vec<f64>, SimError>> = if branched {
        let ta = time_axis.expect("checked");
        // Group points by their coordinates on the other axes.
        let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for k in 0..n {
            let c = spec.point(k);
            let key = c.iter().enumerate().filter(|(i, _)| *i != ta).map(|(_, v)| v.to_bits()).collect();
            groups.entry(key).or_default().push(k);
        }
        let groups: Vec<Vec<usize>> = groups.into_values().collect();
        let results: Vec<Vec<(usize, Result<Vec<f64>, SimError>)>> =
            groups.par_iter().map(|g| eval_branched(spec, &prep, g, ta)).collect();
        let mut rows: Vec<Option<Result<Vec<f64>, SimError>>> = (0..n).map(|_| None).collect();
        for (k, r) in results.into_iter().flatten() {
            rows[k] = Some(r);
        }
        rows.into_iter().map(|r| r.expect("every point evaluated")).collect()
    } else {
        (0..n).into_par_iter().map(|k| eval_point(spec, &prep, &spec.point(k))).collect()
    };
    Ok(assemble(spec, rows))
}

fn eval_branched(spec: &SweepSpec, prep: &Prepared, group: &[usize], ta: usize) -> Vec<(usize, Result<Vec<f64>, SimError>)> {
    let Prepared::Coupler { device, gate, base, setup: Some(setup) } = prep else {
        unreachable!("branched evaluation needs a shared coupler setup")
    };
    let coords: Vec<Vec<f64>> = group.iter().map(|&k| spec.point(k)).collect();
    let run = || -> Result<Vec<Vec<f64>>, SimError> {
        let (d, s) = apply_coupler(device, base, &spec.axes, &coords[0]);
        let p = plan(setup, &spec.observables)?;
        let plateaus: Vec<f64> = coords.iter().map(|c| c[ta]).collect();
        let branches = plateau_branches(&d, &setup.sim, *gate, &s, &plateaus, &setup.frame.columns(&p.initial), &spec.step)?;
        Ok(branches
            .iter()
            .zip(&coords)
            .map(|((end, psi), c)| {
                let target = target_for(&spec.device, target_phi(spec, c));
                observe(setup, &p, &spec.observables, psi, *end, &target)
            })
            .collect())
    };
    match run() {
        Ok(vals) => group.iter().copied().zip(vals.into_iter().map(Ok)).collect(),
        Err(e) => group.iter().map(|&k| (k, Err(e.clone()))).collect(),
    }
}

fn assemble(spec: &SweepSpec, rows: Vec<Result<Vec<f64>, SimError>>) -> SweepResult {
    let n_obs = spec.observables.len();
    let mut values = Vec::with_capacity(rows.len());
    let mut failures = BTreeMap::new();
    let mut clamped = Vec::new();
    for (k, r) in rows.into_iter().enumerate() {
        match r {
            Ok(v) => {
                let mut flagged = false;
                values.push(v.into_iter().map(|x| clamp_unit(x, &mut flagged)).collect());
                if flagged {
                    clamped.push(k);
                }
            }
            Err(e) => {
                failures.insert(k, e.to_string());
                values.push(vec![f64::NAN; n_obs]);
            }
        }
    }
    let labels: Vec<String> = spec.observables.iter().map(|o| o.label()).collect();
    let mut result = SweepResult {
        name: spec.name.clone(),
        axes: spec.axes.clone(),
        observables: labels,
        values,
        failures,
        clamped,
        summary: Vec::new(),
        provenance: Provenance {
            spec_hash: spec.hash(),
            dt: spec.step.dt,
            scheme: format!("{:?}", spec.step.scheme),
            version: env!("CARGO_PKG_VERSION").into(),
        },
    };
    result.summary = summarize(&result);
    result
}

fn summarize(r: &SweepResult) -> Vec<Extremum> {
    (0..r.observables.len())
        .map(|o| {
            let mut best = (f64::NEG_INFINITY, 0usize);
            let mut worst = (f64::INFINITY, 0usize);
            for (k, row) in r.values.iter().enumerate() {
                let v = row[o];
                if v.is_nan() {
                    continue;
                }
                if v > best.0 {
                    best = (v, k);
                }
                if v < worst.0 {
                    worst = (v, k);
                }
            }
            Extremum {
                observable: r.observables[o].clone(),
                max: best.0,
                argmax: r.coords(best.1),
                min: worst.0,
                argmin: r.coords(worst.1),
            }
        })
        .collect()
}

/// Builds a result from precomputed values, e.g. for synthetic data.
pub fn result_from_values(name: &str, axes: Vec<AxisSpec>, observables: Vec<String>, values: Vec<Vec<f64>>) -> SweepResult {
    let mut r = SweepResult {
        name: name.into(),
        axes,
        observables,
        values,
        failures: BTreeMap::new(),
        clamped: Vec::new(),
        summary: Vec::new(),
        provenance: Provenance { spec_hash: String::new(), dt: 0.0, scheme: String::new(), version: String::new() },
    };
    r.summary = summarize(&r);
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChevronQuery {
    pub time_axis: Axis,
    pub freq_axis: Axis,
    /// Observable maximised at the operating point.
    pub observable: String,
    /// When given, the frequency is fixed first as the one whose maximum of
    /// this observable over time is largest (the chevron tip).
    pub transfer: Option<String>,
    /// Frequency of zero detuning, for tie breaking.
    pub center: f64,
    /// Values within this of the maximum count as ties.
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChevronTip {
    pub time: f64,
    pub freq: f64,
    pub value: f64,
}

/// Operating point of a (time, frequency) chevron. Ties go to the smaller
/// time, then to the smaller detuning. A maximum on the grid boundary is an
/// error rather than an operating point.
pub fn find_chevron_tip(r: &SweepResult, q: &ChevronQuery) -> Result<ChevronTip, SimError> {
    if r.axes.len() != 2 {
        return Err(SimError::InvalidSweep(format!("chevron needs 2 axes, found {}", r.axes.len())));
    }
    let ta = r.axes.iter().position(|a| a.axis == q.time_axis);
    let fa = r.axes.iter().position(|a| a.axis == q.freq_axis);
    let (Some(ta), Some(fa)) = (ta, fa) else {
        return Err(SimError::InvalidSweep("chevron axes not present".into()));
    };
    let oi = r
        .observable_index(&q.observable)
        .ok_or_else(|| SimError::InvalidSweep(format!("no observable {}", q.observable)))?;
    let times = r.axes[ta].values();
    let freqs = r.axes[fa].values();
    let at = |it: usize, jf: usize, o: usize| {
        let mut idx = [0usize; 2];
        idx[ta] = it;
        idx[fa] = jf;
        r.values[idx[0] * r.axes[1].count + idx[1]][o]
    };
    let better = |a: (f64, f64, f64), b: (f64, f64, f64)| -> bool {
        // (value, time, |detuning|)
        if a.0 > b.0 + q.tol {
            return true;
        }
        if a.0 < b.0 - q.tol {
            return false;
        }
        if a.1 != b.1 {
            return a.1 < b.1;
        }
        a.2 < b.2
    };
    let freq_range: Vec<usize> = match &q.transfer {
        Some(label) => {
            let ti = r.observable_index(label).ok_or_else(|| SimError::InvalidSweep(format!("no observable {label}")))?;
            let mut best: Option<(usize, f64)> = None;
            for jf in 0..freqs.len() {
                let m = (0..times.len()).map(|it| at(it, jf, ti)).filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
                let det = (freqs[jf] - q.center).abs();
                match best {
                    None => best = Some((jf, m)),
                    Some((bj, bm)) => {
                        let bdet = (freqs[bj] - q.center).abs();
                        if m > bm + q.tol || ((m - bm).abs() <= q.tol && det < bdet) {
                            best = Some((jf, m));
                        }
                    }
                }
            }
            vec![best.map(|b| b.0).unwrap_or(0)]
        }
        None => (0..freqs.len()).collect(),
    };
    let mut best: Option<((f64, f64, f64), usize, usize)> = None;
    for &jf in &freq_range {
        for it in 0..times.len() {
            let v = at(it, jf, oi);
            if v.is_nan() {
                continue;
            }
            let cand = (v, times[it], (freqs[jf] - q.center).abs());
            if best.is_none_or(|(b, _, _)| better(cand, b)) {
                best = Some((cand, it, jf));
            }
        }
    }
    let Some((v, it, jf)) = best else {
        return Err(SimError::InvalidSweep("no finite values".into()));
    };
    let on_edge = it == 0 || it + 1 == times.len() || jf == 0 || jf + 1 == freqs.len();
    if on_edge {
        return Err(SimError::EdgeOfGrid(format!(
            "maximum {:.6} at {} = {}, {} = {}",
            v.0,
            q.time_axis.name(),
            times[it],
            q.freq_axis.name(),
            freqs[jf]
        )));
    }
    Ok(ChevronTip { time: times[it], freq: freqs[jf], value: v.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiScan {
    pub result: SweepResult,
    /// Best target `phi` for each drive phase difference.
    pub ridge: Vec<(f64, f64)>,
    /// Best fidelity over drive phase differences for each target `phi`.
    pub column_max: Vec<(f64, f64)>,
    /// Z phases fixed at the base point.
    pub z_phases: Vec<f64>,
}

/// Fidelity of the simultaneous coupler drive against CCZS(pi/2, phi, 0)
/// over (drive phase difference, target phi). The virtual-Z phases are fixed
/// at the base point (zero phase difference, phi = pi), so each column shows
/// what one calibrated frame gives for every target.
pub fn phi_scan(
    device: &TunableCouplerDevice,
    base: &CouplerSettings,
    delta_axis: &AxisSpec,
    phi_axis: &AxisSpec,
    ctrl: &StepControl,
) -> Result<PhiScan, SimError> {
    if delta_axis.axis != Axis::PhaseDiff || phi_axis.axis != Axis::TargetPhi {
        return Err(SimError::InvalidSweep("phi scan needs phase_diff_rad and target_phi_rad axes".into()));
    }
    let deltas = delta_axis.values();
    let phis = phi_axis.values();
    let gate = CouplerGate::Cczs;
    let setup = coupler_setup(device, gate, PI)?;
    let pi_target = gates::cczs(&CczsParams::new(PI / 2.0, PI, 0.0)?).mat;
    let m0 = setup.block(&coupler_pulse(device, gate, base), ctrl)?;
    let z = report_from_block(&m0, &pi_target, base.gate_time()).z_phases;
    let targets: Vec<nd::Array2<C64>> =
        phis.iter().map(|&p| gates::cczs(&CczsParams::new(PI / 2.0, p, 0.0).expect("gamma = 0")).mat).collect();
    let blocks: Vec<Result<nd::Array2<C64>, SimError>> = deltas
        .par_iter()
        .map(|&d| {
            let mut s = *base;
            s.phase[0] = base.phase[0] + d;
            setup.block(&coupler_pulse(device, gate, &s), ctrl)
        })
        .collect();
    let mut rows = Vec::new();
    for b in blocks {
        match b {
            Ok(m) => {
                for t in &targets {
                    rows.push(Ok(vec![report_frozen(&m, t, &z, base.gate_time()).fidelity]));
                }
            }
            Err(e) => rows.extend(targets.iter().map(|_| Err(e.clone()))),
        }
    }
    let axes = vec![delta_axis.clone(), phi_axis.clone()];
    let spec = SweepSpec {
        name: "phi-scan".into(),
        device: SweepDevice::TunableCoupler { device: device.clone(), gate, base: *base },
        axes,
        observables: vec![Observable::Fidelity],
        target_phi: PI,
        step: ctrl.clone(),
    };
    let result = assemble(&spec, rows);
    let np = phis.len();
    let ridge = deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let row = &result.values[i * np..(i + 1) * np];
            let j = (0..np).max_by(|a, b| row[*a][0].total_cmp(&row[*b][0])).unwrap_or(0);
            (d, phis[j])
        })
        .collect();
    let column_max = phis
        .iter()
        .enumerate()
        .map(|(j, &p)| (p, (0..deltas.len()).map(|i| result.values[i * np + j][0]).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    Ok(PhiScan { result, ridge, column_max, z_phases: z })
}

/// Shortest distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    gates::wrap_angle(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rabi(omega: f64, det: f64, t: f64) -> f64 {
        let w = (omega * omega + det * det).sqrt();
        omega * omega / (w * w) * (0.5 * w * t).sin().powi(2)
    }

    fn synthetic(omega: f64) -> SweepResult {
        let tmax = 2.0 * PI / omega;
        let times = AxisSpec::new(Axis::Time, 0.0, tmax, 41);
        let dets = AxisSpec::new(Axis::ModFreq1, -2.0 * omega, 2.0 * omega, 21);
        let mut values = Vec::new();
        for &t in &times.values() {
            for &d in &dets.values() {
                values.push(vec![rabi(omega, d, t)]);
            }
        }
        result_from_values("rabi", vec![times, dets], vec!["transfer".into()], values)
    }

    #[test]
    fn chevron_tip_on_synthetic_rabi() {
        let omega = 0.3;
        let r = synthetic(omega);
        let q = ChevronQuery {
            time_axis: Axis::Time,
            freq_axis: Axis::ModFreq1,
            observable: "transfer".into(),
            transfer: None,
            center: 0.0,
            tol: 1e-9,
        };
        let tip = find_chevron_tip(&r, &q).unwrap();
        assert!(tip.freq.abs() < 1e-12);
        assert!((tip.time - PI / omega).abs() < 1e-9);
        assert!((tip.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chevron_is_symmetric() {
        let r = synthetic(0.3);
        let nf = r.axes[1].count;
        for row in r.values.chunks(nf) {
            for j in 0..nf {
                assert!((row[j][0] - row[nf - 1 - j][0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monotone_data_flags_edge() {
        let times = AxisSpec::new(Axis::Time, 0.0, 1.0, 5);
        let freqs = AxisSpec::new(Axis::ModFreq1, -1.0, 1.0, 5);
        let values = (0..25).map(|k| vec![k as f64 / 24.0]).collect();
        let r = result_from_values("ramp", vec![times, freqs], vec!["x".into()], values);
        let q = ChevronQuery {
            time_axis: Axis::Time,
            freq_axis: Axis::ModFreq1,
            observable: "x".into(),
            transfer: None,
            center: 0.0,
            tol: 1e-9,
        };
        assert!(matches!(find_chevron_tip(&r, &q), Err(SimError::EdgeOfGrid(_))));
    }

    #[test]
    fn clamping_is_flagged() {
        let mut f = false;
        assert_eq!(clamp_unit(1.0 + 1e-12, &mut f), 1.0);
        assert!(!f);
        assert_eq!(clamp_unit(1.1, &mut f), 1.0);
        assert!(f);
    }

    #[test]
    fn csv_layout() {
        let r = synthetic(0.3);
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "time_ns,mod_freq_1_ghz,transfer,note");
        assert_eq!(csv.lines().count(), 1 + 41 * 21);
    }
}
