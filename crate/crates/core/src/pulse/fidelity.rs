//! Average gate fidelity on the computational subspace, with optional
//! virtual-Z correction.

use ndarray as nd;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::qudit::{project_computational, ComputationalProjector, Operator, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// After the virtual-Z correction.
    pub fidelity: f64,
    pub fidelity_uncorrected: f64,
    pub leakage: f64,
    pub gate_time: f64,
    /// Post-gate Z phase per computational qubit.
    pub z_phases: Vec<f64>,
}

fn trace_mud(m: &nd::Array2<C64>, u: &nd::Array2<C64>) -> C64 {
    // Tr(M U^dag) = sum_ij M_ij conj(U_ij)
    m.iter().zip(u.iter()).map(|(a, b)| a * b.conj()).sum()
}

fn trace_mdm(m: &nd::Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `(|Tr(M U^dag)|^2 + Tr(M^dag M)) / (n (n + 1))`.
pub fn gate_fidelity(m: &nd::Array2<C64>, u: &nd::Array2<C64>) -> f64 {
    let n = m.nrows() as f64;
    (trace_mud(m, u).norm_sqr() + trace_mdm(m)) / (n * (n + 1.0))
}

/// `1 - Tr(M^dag M) / n`, floored at zero against rounding.
pub fn leakage(m: &nd::Array2<C64>) -> f64 {
    (1.0 - trace_mdm(m) / m.nrows() as f64).max(0.0)
}

/// `diag(exp(i sum_q z_q b_q(a))) M`, qubit 0 being the most significant bit.
pub fn apply_virtual_z(m: &nd::Array2<C64>, z: &[f64]) -> nd::Array2<C64> {
    let nq = z.len();
    let mut out = m.clone();
    for (a, mut row) in out.rows_mut().into_iter().enumerate() {
        let ph: f64 = (0..nq).filter(|q| a >> (nq - 1 - q) & 1 == 1).map(|q| z[q]).sum();
        let p = C64::from_polar(1.0, ph);
        row.mapv_inplace(|x| x * p);
    }
    out
}

/// Coordinate ascent on `|Tr(Z(z) M U^dag)|` over the post-gate Z phases.
/// Each coordinate update is the exact maximiser, so the objective never
/// decreases. Returns the phases and the per-sweep objective history.
pub fn optimize_virtual_z(m: &nd::Array2<C64>, u: &nd::Array2<C64>, starts: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows();
    let nq = n.trailing_zeros() as usize;
    assert_eq!(1 << nq, n, "computational dimension must be a power of two");
    // diagonal of M U^dag
    let d: Vec<C64> = (0..n).map(|a| (0..n).map(|b| m[[a, b]] * u[[a, b]].conj()).sum()).collect();
    let bit = |a: usize, q: usize| a >> (nq - 1 - q) & 1 == 1;
    let objective = |z: &[f64]| -> f64 {
        d.iter()
            .enumerate()
            .map(|(a, x)| x * C64::from_polar(1.0, (0..nq).filter(|&q| bit(a, q)).map(|q| z[q]).sum::<f64>()))
            .sum::<C64>()
            .norm()
    };
    let mut best = (vec![0.0; nq], objective(&vec![0.0; nq]), Vec::new());
    for s in starts {
        let mut z = s.clone();
        let mut hist = vec![objective(&z)];
        for _ in 0..200 {
            for q in 0..nq {
                let (mut a, mut b) = (ZERO, ZERO);
                for (k, x) in d.iter().enumerate() {
                    let ph: f64 = (0..nq).filter(|&p| p != q && bit(k, p)).map(|p| z[p]).sum();
                    let v = x * C64::from_polar(1.0, ph);
                    if bit(k, q) {
                        b += v;
                    } else {
                        a += v;
                    }
                }
                if b.norm() > 0.0 {
                    z[q] = crate::gates::wrap_angle(a.arg() - b.arg());
                }
            }
            let o = objective(&z);
            let last = *hist.last().unwrap();
            hist.push(o);
            if o - last < 1e-15 {
                break;
            }
        }
        let o = *hist.last().unwrap();
        if o > best.1 + 1e-15 {
            best = (z, o, hist);
        } else if best.2.is_empty() {
            best.2 = hist;
        }
    }
    (best.0, best.2)
}

fn default_starts(nq: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; nq]];
    for k in 1..4 {
        s.push((0..nq).map(|q| std::f64::consts::PI * ((k * (q + 2)) % 5) as f64 * 0.4 - 0.8).collect());
    }
    s
}

/// Fidelity report for a computational-block matrix `m` against `u`.
pub fn report_from_block(m: &nd::Array2<C64>, u: &nd::Array2<C64>, gate_time: f64) -> FidelityReport {
    let nq = m.nrows().trailing_zeros() as usize;
    let (z, _) = optimize_virtual_z(m, u, &default_starts(nq));
    let mz = apply_virtual_z(m, &z);
    FidelityReport {
        fidelity: gate_fidelity(&mz, u),
        fidelity_uncorrected: gate_fidelity(m, u),
        leakage: leakage(m),
        gate_time,
        z_phases: z,
    }
}

/// Report with externally fixed Z phases.
pub fn report_frozen(m: &nd::Array2<C64>, u: &nd::Array2<C64>, z: &[f64], gate_time: f64) -> FidelityReport {
    FidelityReport {
        fidelity: gate_fidelity(&apply_virtual_z(m, z), u),
        fidelity_uncorrected: gate_fidelity(m, u),
        leakage: leakage(m),
        gate_time,
        z_phases: z.to_vec(),
    }
}

/// Projects a full-space map and reports its fidelity against `target`.
pub fn average_gate_fidelity(m_full: &Operator, target: &Operator, p: &ComputationalProjector) -> FidelityReport {
    let m = project_computational(m_full, p).expect("projector matches the register");
    report_from_block(&m.mat, &target.mat, 0.0)
}

/// Haar-random state in `C^n`.
pub fn haar_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> nd::Array1<C64> {
    let mut v: nd::Array1<C64> =
        (0..n).map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);
    v
}

/// Monte-Carlo estimate of `int dpsi |<U psi|M psi>|^2` and its standard error.
pub fn haar_average_fidelity<R: Rng + ?Sized>(
    m: &nd::Array2<C64>,
    u: &nd::Array2<C64>,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let n = m.nrows();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let psi = haar_state(n, rng);
        let a = u.dot(&psi);
        let b = m.dot(&psi);
        let f = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr();
        s += f;
        s2 += f * f;
    }
    let mean = s / samples as f64;
    let var = (s2 / samples as f64 - mean * mean).max(0.0);
    (mean, (var / samples as f64).sqrt())
}
