//! Property checks shared by the proptest suite and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray as nd;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use trigate::config::{self, SweepFile};
use trigate::effective::{qutrit_projector, leakage_amplitude, CzPairModel, IswapPairModel};
use trigate::gates::{self, CczsParams, DivParams};
use trigate::pulse::device::mhz;
use trigate::pulse::integrator::connected_blocks;
use trigate::pulse::runs::{tq_pulse, tq_setup, TqGate, TqSettings};
use trigate::pulse::{Simulator, StepControl, TunableCouplerDevice, TunableQubitDevice};
use trigate::qudit::{max_abs_diff, RegisterShape};
use trigate::sweeps::run_sweep;

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn cczs_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..PI, -PI..PI, -PI + 1e-6..PI - 1e-6)
}

pub fn cz_drive() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (0.1..2.0f64, -PI..PI, 0.1..2.0f64, -PI..PI, -1.5..1.5f64)
}

/// Random frequency offsets (MHz) and couplings (MHz) for the tunable-qubit chip.
pub fn tq_device() -> impl Strategy<Value = ([f64; 3], [f64; 2])> {
    ([-50.0..50.0f64, -50.0..50.0, -50.0..50.0], [1.0..10.0f64, 1.0..10.0])
}

pub fn make_tq_device(df: [f64; 3], g: [f64; 2]) -> TunableQubitDevice {
    let mut d = TunableQubitDevice::default_cczs();
    for (s, x) in d.sites.iter_mut().zip(df) {
        s.omega += mhz(x);
        if let Some(m) = s.omega_max.as_mut() {
            *m = m.max(s.omega);
        }
    }
    d.g = [mhz(g[0]), mhz(g[1])];
    d
}

fn excitations(shape: &RegisterShape, i: usize) -> usize {
    shape.digits(i).iter().sum()
}

pub fn gates_are_unitary(theta: f64, phi: f64, gamma: f64) -> Check {
    let p = CczsParams::new(theta, phi, gamma).map_err(|e| e.to_string())?;
    let r = gates::cczs(&p).unitarity_residual();
    ensure(r < 1e-12, || format!("cczs unitarity residual {r:e}"))?;
    let d = gates::div(&DivParams { theta, varphi: phi });
    let r = d.unitarity_residual();
    ensure(r < 1e-12, || format!("div unitarity residual {r:e}"))
}

/// CCZS keeps `q0` and the excitation number; DIV keeps the excitation number.
pub fn gates_are_block_diagonal(theta: f64, phi: f64, gamma: f64) -> Check {
    let p = CczsParams::new(theta, phi, gamma).map_err(|e| e.to_string())?;
    let c = gates::cczs(&p).mat;
    let d = gates::div(&DivParams { theta, varphi: phi }).mat;
    for i in 0..8usize {
        for j in 0..8usize {
            let same_n = i.count_ones() == j.count_ones();
            if !(same_n && (i >> 2) == (j >> 2)) && c[[i, j]].norm() > 1e-14 {
                return Err(format!("cczs couples {i:03b} and {j:03b}"));
            }
            if !same_n && d[[i, j]].norm() > 1e-14 {
                return Err(format!("div couples {i:03b} and {j:03b}"));
            }
        }
    }
    Ok(())
}

fn cz_model(x: (f64, f64, f64, f64, f64)) -> CzPairModel {
    CzPairModel { lambda1: C64::from_polar(x.0, x.1), lambda2: C64::from_polar(x.2, x.3), delta: x.4 }
}

/// The effective Hamiltonian conserves excitations, its propagator is unitary
/// and nothing leaves the qubit levels at the gate time.
pub fn effective_dynamics_conserve(x: (f64, f64, f64, f64, f64), t: f64) -> Check {
    let m = cz_model(x);
    let h = m.hamiltonian();
    let s = CzPairModel::shape();
    for i in 0..27 {
        for j in 0..27 {
            if h.mat[[i, j]].norm() > 0.0 && excitations(&s, i) != excitations(&s, j) {
                return Err(format!("H couples sectors at ({i}, {j})"));
            }
        }
    }
    let u = m.propagate(t);
    let r = u.unitarity_residual();
    ensure(r < 1e-10, || format!("propagator unitarity residual {r:e}"))?;
    let l = leakage_amplitude(&m.propagate(m.gate_time()), &qutrit_projector());
    ensure(l < 1e-10, || format!("leakage amplitude {l:e} at the gate time"))?;
    let iswap = IswapPairModel { g1: x.0, g2: x.2 };
    let u = iswap.propagate(t);
    let n = IswapPairModel::excitation_operator().mat;
    let comm = max_abs_diff(&u.mat.dot(&n), &n.dot(&u.mat));
    ensure(comm < 1e-10, || format!("iSWAP pair does not conserve excitations ({comm:e})"))
}

/// Tunable-qubit device: exchange coupling keeps the total excitation number,
/// so every simulator block lies in one sector; the full propagator is unitary.
pub fn tq_device_conserves(df: [f64; 3], g: [f64; 2]) -> Check {
    let dev = make_tq_device(df, g);
    let model = dev.model();
    for b in connected_blocks(&model.h_static) {
        let n0 = excitations(&model.shape, b[0]);
        ensure(b.iter().all(|&i| excitations(&model.shape, i) == n0), || format!("block mixes sectors: {b:?}"))?;
    }
    let sim = Simulator::new(&model);
    let s = TqSettings::nominal(&dev, TqGate::Cczs);
    let u = sim.full_propagator(&StepControl::with_dt(0.1), &tq_pulse(&dev, TqGate::Cczs, &s)).map_err(|e| e.to_string())?;
    let r = (u.t().mapv(|z| z.conj()).dot(&u) - nd::Array2::<C64>::eye(u.nrows())).iter().map(|z| z.norm()).fold(0.0, f64::max);
    ensure(r < 1e-10, || format!("device propagator unitarity residual {r:e}"))
}

/// Coupler device: full transverse coupling keeps excitation parity only.
pub fn coupler_device_keeps_parity(theta: f64) -> Check {
    let mut dev = TunableCouplerDevice::default_device();
    dev.theta = [theta, theta];
    let model = dev.model();
    let blocks = connected_blocks(&model.h_static);
    ensure(blocks.len() == 2, || format!("expected two parity blocks, got {}", blocks.len()))?;
    for b in &blocks {
        let p = excitations(&model.shape, b[0]) % 2;
        ensure(b.iter().all(|&i| excitations(&model.shape, i) % 2 == p), || "block mixes parities".into())?;
    }
    Ok(())
}

/// Block errors at `dt`, `dt/2`, `dt/4` for a perturbed CZ pulse shrink at
/// (at least) third order, or sit at the rounding floor.
pub fn integrator_self_converges(dt_offset: f64, t_offset: f64) -> Check {
    let dev = TunableQubitDevice::default_cczs();
    let gate = TqGate::Cz02;
    let setup = tq_setup(&dev, gate).map_err(|e| e.to_string())?;
    let mut s = TqSettings::nominal(&dev, gate);
    s.t_gate += t_offset;
    let pulse = tq_pulse(&dev, gate, &s);
    let dt = 0.2 + dt_offset;
    let b: Vec<_> = [dt, dt / 2.0, dt / 4.0]
        .iter()
        .map(|&h| setup.block(&pulse, &StepControl::with_dt(h)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let e1 = max_abs_diff(&b[0], &b[1]);
    let e2 = max_abs_diff(&b[1], &b[2]);
    ensure(e2 < 1e-9 || e1 / e2 > 8.0, || format!("errors {e1:e} -> {e2:e}"))?;
    ensure(e1 < 1e-3, || format!("step {dt} already off by {e1:e}"))
}

pub fn tiny_sweep_text(start: f64, offset: f64) -> String {
    format!(
        "name = \"det\"\nscheme = \"tunable-qubits\"\ngate = \"cz02\"\nstep_ns = 0.1\n\
         [[axis]]\naxis = \"time_ns\"\nstart = {start}\nstop = {}\ncount = 3\n\
         [[axis]]\naxis = \"offset_2_mhz\"\nstart = {offset}\nstop = {}\ncount = 2\n\
         [[observable]]\nkind = \"fidelity\"\n\
         [[observable]]\nkind = \"population\"\ninitial = \"101\"\nstate = \"200\"\n",
        start + 4.0,
        offset + 1.0
    )
}

/// Re-running a sweep gives bit-identical values and the same spec hash.
pub fn sweep_is_deterministic(start: f64, offset: f64) -> Check {
    let f: SweepFile = config::parse(&tiny_sweep_text(start, offset), "generated").map_err(|e| e.to_string())?;
    let spec = f.to_spec().map_err(|e| e.to_string())?;
    let a = run_sweep(&spec).map_err(|e| e.to_string())?;
    let b = run_sweep(&spec).map_err(|e| e.to_string())?;
    ensure(a.provenance.spec_hash == b.provenance.spec_hash, || "hash changed".into())?;
    let same = a.values.iter().flatten().zip(b.values.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(same && a.to_csv() == b.to_csv(), || "values differ between runs".into())?;
    ensure(a.failures.is_empty(), || format!("failures: {:?}", a.failures))
}
