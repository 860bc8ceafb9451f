//! Acceptance runner: one PASS/FAIL line per criterion, with the measured
//! numbers and the runtime against its budget.
//!
//! The process exits non-zero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ndarray as nd;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trigate::effective::{
    alpha12_for_full_transfer, leakage_amplitude, qutrit_projector, u_bare, CzPairModel, DeltaSystemModel,
    IswapPairModel,
};
use trigate::gates::{self, params_from_drive, PhysicalCzDrive};
use trigate::pulse::fidelity::{gate_fidelity, haar_average_fidelity};
use trigate::pulse::runs::{
    calibrate_tunable_qubits, coupler_operating_point, coupler_pulse, coupler_setup, CouplerGate, TqGate,
};
use trigate::pulse::{StepControl, TunableCouplerDevice, TunableQubitDevice};
use trigate::qudit::{self, expm, max_abs_diff, project_computational, Operator};
use trigate::state_prep::{self, Step};
use trigate::sweeps::{angle_distance, phi_scan, Axis, AxisSpec};

/// Criteria expected to fail, with the reason printed next to the FAIL line.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    2,
    "the closed-form CCZS gives the bright state and |111> the same detuning phase e^{i gamma}, \
     while the Hamiltonian gives them opposite phases; all detuned drives disagree by 2|sin gamma|",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn ctrl() -> StepControl {
    StepControl::with_dt(0.05)
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> nd::Array2<C64> {
    let a = nd::Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let mut op = Operator::from_matrix(h);
    op.hermitian = qudit::Flag::Yes;
    expm(&op, 3.0).expect("hermitian").mat
}

fn criterion_1() -> Result<Outcome, String> {
    let dec = gates::verify_xy_cz_decomposition(100, 0, 1);
    let fred = gates::construct_fredkin().map_err(|e| e.to_string())?.report;
    let ifred = gates::construct_ifredkin().map_err(|e| e.to_string())?.report;
    let toff = gates::verify_toffoli_distinct(20);
    let pass = dec.pass && dec.max_residual <= 1e-10 && fred.max_residual <= 1e-10 && ifred.max_residual <= 1e-10
        && toff.max_residual > 0.5;
    outcome(
        pass,
        format!(
            "decomposition max residual {:.1e} over {} draws; Fredkin {:.1e}; iFredkin {:.1e}; Toffoli min distance {:.3}",
            dec.max_residual,
            dec.residuals.len(),
            fred.max_residual,
            ifred.max_residual,
            toff.max_residual
        ),
    )
}

fn criterion_2() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = qutrit_projector();
    let (mut res_resonant, mut res_detuned, mut leak, mut dark) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut res_closed = 0.0f64;
    for k in 0..50 {
        let delta = if k < 25 { 0.0 } else { rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 } };
        let d = PhysicalCzDrive {
            lambda1: C64::from_polar(rng.random_range(0.2..2.0), rng.random_range(-PI..PI)),
            lambda2: C64::from_polar(rng.random_range(0.2..2.0), rng.random_range(-PI..PI)),
            delta,
        };
        let m = CzPairModel::from_drive(&d);
        let u = m.propagate(m.gate_time());
        let blk = project_computational(&u, &p).map_err(|e| e.to_string())?;
        let (params, _) = params_from_drive(&d).map_err(|e| e.to_string())?;
        let r = max_abs_diff(&blk.mat, &gates::cczs(&params).mat);
        if delta == 0.0 {
            res_resonant = res_resonant.max(r);
        } else {
            res_detuned = res_detuned.max(r);
        }
        res_closed = res_closed.max(max_abs_diff(&blk.mat, &m.gate_block().mat));
        leak = leak.max(leakage_amplitude(&u, &p));
        let t = rng.random_range(0.0..20.0);
        let ut = m.propagate(t);
        for s in [m.dark(), m.dark_v()] {
            let moved = ut.mat.dot(&s.amps) - &s.amps;
            dark = dark.max(moved.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    let mut res_div = 0.0f64;
    for _ in 0..50 {
        let m = IswapPairModel { g1: rng.random_range(0.1..2.0), g2: rng.random_range(0.1..2.0) };
        let t = rng.random_range(0.0..20.0);
        res_div = res_div.max(max_abs_diff(&m.propagate(t).mat, &gates::div(&m.div_params(t)).mat));
    }
    let pass = res_resonant <= 1e-8 && res_detuned <= 1e-8 && leak <= 1e-10 && dark <= 1e-10 && res_div <= 1e-8;
    outcome(
        pass,
        format!(
            "CCZS residual {res_resonant:.1e} (delta = 0), {res_detuned:.2e} (delta != 0); \
             closed form with opposite phases {res_closed:.1e}; leakage {leak:.1e}; dark drift {dark:.1e}; DIV {res_div:.1e}"
        ),
    )
}

fn criterion_3() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut res, mut leak2, mut worst_transfer) = (0.0f64, 0.0f64, 1.0f64);
    for _ in 0..30 {
        let a12 = rng.random_range(0.1..2.0);
        let a13 = rng.random_range(-2.0..2.0);
        let m = DeltaSystemModel::symmetric(a12, a13);
        let t = PI / m.omega();
        let ex = expm(&m.hamiltonian(), t).map_err(|e| e.to_string())?;
        res = res.max(max_abs_diff(&u_bare(a13, t).mat, &ex.mat));
        for (i, j) in [(1, 0), (1, 2), (0, 1), (2, 1)] {
            leak2 = leak2.max(ex.mat[[i, j]].norm());
        }
        // alpha13 = 0 at Omega t = pi.
        let m0 = DeltaSystemModel::symmetric(a12, 0.0);
        let u0 = expm(&m0.hamiltonian(), PI / m0.omega()).map_err(|e| e.to_string())?;
        worst_transfer = worst_transfer.min(u0.mat[[2, 0]].norm_sqr());
        // t = 4 pi / alpha13 with the matching alpha12.
        let a13 = a13.abs().max(0.05);
        let mt = DeltaSystemModel::symmetric(alpha12_for_full_transfer(a13), a13);
        let ut = expm(&mt.hamiltonian(), 4.0 * PI / a13).map_err(|e| e.to_string())?;
        worst_transfer = worst_transfer.min(ut.mat[[2, 0]].norm_sqr());
    }
    let pass = res <= 1e-9 && worst_transfer >= 1.0 - 1e-9 && leak2 <= 1e-9;
    outcome(
        pass,
        format!("closed form vs expm {res:.1e}; worst transfer 1 - {:.1e}; |2> amplitude {leak2:.1e}", 1.0 - worst_transfer),
    )
}

fn criterion_4() -> Result<Outcome, String> {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, tol) in [("ghz3", 1e-9), ("dicke53", 1e-9), ("w3-div", 1e-9), ("w16-cz", 1e-8), ("w16-iswap", 1e-8)] {
        let (_, f) = state_prep::run_named(name).map_err(|e| e.to_string())?;
        pass &= f >= 1.0 - tol;
        parts.push(format!("{name} infidelity {:.1e}", (1.0 - f).max(0.0)));
    }
    let times: Vec<f64> = state_prep::dicke53_protocol_with(1.0)
        .steps
        .iter()
        .filter_map(|s| match s {
            Step::Evolve { duration, .. } => Some(*duration),
            _ => None,
        })
        .collect();
    let want = [PI / 4.0, PI / (2.0 * 6f64.sqrt())];
    let times_ok = times.len() == 2 && times.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12);
    pass &= times_ok;
    parts.push(format!("Dicke step times {:?} x 1/lambda", times.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>()));
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [4, 8] {
        for k in 0..20 {
            let u = random_unitary(n, &mut rng);
            let mut m = random_unitary(n, &mut rng);
            if k % 2 == 1 {
                // Leaky: shrink some columns.
                for j in 0..n {
                    let r: f64 = rng.random_range(0.6..1.0);
                    m.column_mut(j).mapv_inplace(|z| z * r);
                }
            }
            if k % 4 == 0 {
                // Close to the target so the average is not trivially small.
                m = u.dot(&random_unitary(n, &mut rng).mapv(|z| z * 0.2)) + &u.mapv(|z| z * 0.8);
            }
            let f = gate_fidelity(&m, &u);
            let (mean, se) = haar_average_fidelity(&m, &u, 100_000, &mut rng);
            worst = worst.max((f - mean).abs() / se);
            count += 1;
        }
    }
    outcome(worst <= 3.0, format!("{count} pairs, largest deviation {worst:.2} sigma"))
}

fn criterion_6() -> Result<Outcome, String> {
    let dev = TunableQubitDevice::default_cczs();
    let cz = calibrate_tunable_qubits(&dev, TqGate::Cz02, &ctrl()).map_err(|e| e.to_string())?;
    let cc = calibrate_tunable_qubits(&dev, TqGate::Cczs, &ctrl()).map_err(|e| e.to_string())?;
    let (fc, tc) = (cc.outcome.report.fidelity, cc.settings.t_gate);
    let (fz, tz) = (cz.outcome.report.fidelity, cz.settings.t_gate);
    let ratio = tc / tz;
    let pass = fc >= 0.99
        && (tc - 66.8).abs() <= 3.0
        && (ratio * 2f64.sqrt() - 1.0).abs() <= 0.05
        && fz >= 0.999
        && (tz - 93.0).abs() <= 3.0;
    outcome(
        pass,
        format!("CCZS F {fc:.5} at {tc:.2} ns; CZ02 F {fz:.5} at {tz:.2} ns; time ratio {ratio:.4} (1/sqrt2 = 0.7071)"),
    )
}

fn criterion_7() -> Result<Outcome, String> {
    let dev = TunableCouplerDevice::default_device();
    let c = ctrl();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut plateaus = Vec::new();
    for (gate, near) in [(CouplerGate::Cz01, 405.0), (CouplerGate::Cz02, 396.0)] {
        let s = coupler_operating_point(gate);
        let setup = coupler_setup(&dev, gate, PI).map_err(|e| e.to_string())?;
        let r = setup.evaluate(&coupler_pulse(&dev, gate, &s), &c, s.gate_time()).map_err(|e| e.to_string())?.report;
        pass &= r.fidelity >= 0.995 && (s.gate_time() / near - 1.0).abs() <= 0.05;
        plateaus.push(s.plateau);
        parts.push(format!("{} F {:.5} at {:.1} ns", gate.name(), r.fidelity, s.gate_time()));
    }
    let gate = CouplerGate::Cczs;
    let base = coupler_operating_point(gate);
    let setup = coupler_setup(&dev, gate, PI).map_err(|e| e.to_string())?;
    let r = setup.evaluate(&coupler_pulse(&dev, gate, &base), &c, base.gate_time()).map_err(|e| e.to_string())?.report;
    let ratio = base.plateau / (0.5 * (plateaus[0] + plateaus[1]));
    pass &= r.fidelity >= 0.99 && (ratio * 2f64.sqrt() - 1.0).abs() <= 0.10;
    parts.push(format!("CCZS F {:.5}, plateau {:.1} ns = {ratio:.4} x mean CZ plateau", r.fidelity, base.plateau));

    let n = 16;
    let step = 2.0 * PI / n as f64;
    let deltas = AxisSpec::new(Axis::PhaseDiff, -PI, PI - step, n);
    let phis = AxisSpec::new(Axis::TargetPhi, 0.0, 2.0 * PI - step, n);
    let scan = phi_scan(&dev, &base, &deltas, &phis, &c).map_err(|e| e.to_string())?;
    let ridge_err = scan.ridge.iter().map(|&(d, p)| angle_distance(p, PI + d)).fold(0.0, f64::max);
    let col_min = scan.column_max.iter().map(|&(_, f)| f).fold(f64::INFINITY, f64::min);
    pass &= ridge_err <= 0.5 * step + 1e-9 && col_min >= 0.99;
    parts.push(format!(
        "phi scan {n}x{n}: ridge off phi = pi + dphi by at most {ridge_err:.3} rad, worst column best F {col_min:.5}"
    ));
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Result<Outcome, String> {
    let dev = TunableQubitDevice::default_div();
    let isw = calibrate_tunable_qubits(&dev, TqGate::Iswap01, &ctrl()).map_err(|e| e.to_string())?;
    let div = calibrate_tunable_qubits(&dev, TqGate::Div, &ctrl()).map_err(|e| e.to_string())?;
    let (fi, ti) = (isw.outcome.report.fidelity, isw.settings.t_gate);
    let (fd, td) = (div.outcome.report.fidelity, div.settings.t_gate);
    // Column |010>; rows |010>, |100>, |001> (q1, q0, q2 sites).
    let b = &div.outcome.block;
    let pops = [b[[0b010, 0b010]].norm_sqr(), b[[0b100, 0b010]].norm_sqr(), b[[0b001, 0b010]].norm_sqr()];
    let pops_ok = pops.iter().zip([0.25, 0.5, 0.25]).all(|(p, w)| (p - w).abs() <= 0.02);
    let pass = fi >= 0.995 && (ti - 66.8).abs() <= 3.0 && fd >= 0.985 && (td - 47.5).abs() <= 3.0 && pops_ok;
    outcome(
        pass,
        format!(
            "iSWAP01 F {fi:.5} at {ti:.2} ns; DIV F {fd:.5} at {td:.2} ns; |010> -> ({:.4}, {:.4}, {:.4})",
            pops[0], pops[1], pops[2]
        ),
    )
}

fn run_property<S: Strategy>(cases: u32, strategy: S, check: impl Fn(S::Value) -> common::Check) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, rng_seed: RngSeed::Fixed(0x5eed), failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new(config);
    runner.run(&strategy, |v| check(v).map_err(TestCaseError::fail)).map_err(|e| e.to_string())
}

fn criterion_9() -> Result<Outcome, String> {
    let results = [
        ("gate unitarity", run_property(64, common::cczs_params(), |(t, p, g)| common::gates_are_unitary(t, p, g))),
        ("gate block structure", run_property(64, common::cczs_params(), |(t, p, g)| common::gates_are_block_diagonal(t, p, g))),
        (
            "effective dynamics",
            run_property(64, (common::cz_drive(), 0.0..20.0f64), |(x, t)| common::effective_dynamics_conserve(x, t)),
        ),
        ("tunable-qubit sectors", run_property(8, common::tq_device(), |(df, g)| common::tq_device_conserves(df, g))),
        ("coupler parity", run_property(8, -0.45..0.45f64, common::coupler_device_keeps_parity)),
        (
            "integrator convergence",
            run_property(8, (0.0..0.1f64, -3.0..3.0f64), |(d, t)| common::integrator_self_converges(d, t)),
        ),
        (
            "sweep determinism",
            run_property(3, (85.0..95.0f64, -3.0..2.0f64), |(s, o)| common::sweep_is_deterministic(s, o)),
        ),
    ];
    let failed: Vec<String> =
        results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    if failed.is_empty() {
        outcome(true, format!("all hold: {}", names.join(", ")))
    } else {
        outcome(false, failed.join("; "))
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome, String>);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "analytic identities", Duration::from_secs(10), criterion_1),
        (2, "effective dynamics vs closed forms", Duration::from_secs(30), criterion_2),
        (3, "Delta-system closed form", Duration::from_secs(10), criterion_3),
        (4, "state preparation", Duration::from_secs(30), criterion_4),
        (5, "fidelity formula vs Haar average", Duration::from_secs(120), criterion_5),
        (6, "tunable-qubit CCZS", Duration::from_secs(600), criterion_6),
        (7, "tunable-coupler CCZS", Duration::from_secs(1800), criterion_7),
        (8, "tunable-qubit DIV", Duration::from_secs(600), criterion_8),
        (9, "property suite", Duration::from_secs(60), criterion_9),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (id, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && took <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        println!(
            "criterion {id}: {} {name} [{:.1} s of {} s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            match known {
                Some((_, why)) => println!("    known failure: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
