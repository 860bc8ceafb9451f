//! Transmon device models: static Hamiltonians and drive terms.
//!
//! Frequencies are angular, in rad/ns; times are in ns.

use std::f64::consts::{PI, TAU};

use ndarray as nd;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::shapes::PulseShape;
use crate::error::SimError;
use crate::qudit::{ComputationalProjector, RegisterShape};

pub fn ghz(f: f64) -> f64 {
    TAU * f
}

pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmonSite {
    pub omega: f64,
    pub alpha: f64,
    pub levels: usize,
    /// Upper limit of a flux-tunable site (sweet spot).
    pub omega_max: Option<f64>,
}

impl TransmonSite {
    pub fn fixed(omega: f64, alpha: f64) -> Self {
        Self { omega, alpha, levels: 3, omega_max: None }
    }

    pub fn tunable(omega: f64, alpha: f64, omega_max: f64) -> Self {
        Self { omega, alpha, levels: 3, omega_max: Some(omega_max) }
    }

    /// `omega n + alpha/2 n (n - 1)`.
    pub fn energy(&self, n: usize, omega: f64) -> f64 {
        let n = n as f64;
        omega * n + 0.5 * self.alpha * n * (n - 1.0)
    }

    pub fn clamp(&self, omega: f64) -> f64 {
        self.omega_max.map_or(omega, |m| omega.min(m))
    }
}

/// Static Hamiltonian plus diagonal drive operators `H(t) = H_s + sum_k f_k(t) diag(d_k)`.
#[derive(Clone, Debug)]
pub struct DeviceModel {
    pub shape: RegisterShape,
    pub h_static: nd::Array2<C64>,
    pub drive_diags: Vec<Vec<f64>>,
}

impl DeviceModel {
    pub fn dim(&self) -> usize {
        self.shape.total_dim()
    }

    pub fn hamiltonian_at(&self, f: &[f64]) -> nd::Array2<C64> {
        let mut h = self.h_static.clone();
        for (d, fk) in self.drive_diags.iter().zip(f) {
            for (i, v) in d.iter().enumerate() {
                h[[i, i]] += fk * v;
            }
        }
        h
    }
}

/// Time-dependent drive amplitudes `f_k(t)` matching a model's `drive_diags`.
pub trait Drive: Sync {
    fn n_drives(&self) -> usize;
    fn values(&self, t: f64, out: &mut [f64]);
    /// End of the simulation window.
    fn end(&self) -> f64;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

fn number_diag(shape: &RegisterShape, site: usize) -> Vec<f64> {
    (0..shape.total_dim()).map(|i| shape.digits(i)[site] as f64).collect()
}

fn add_site_energies(h: &mut nd::Array2<C64>, shape: &RegisterShape, sites: &[(TransmonSite, f64)]) {
    for i in 0..shape.total_dim() {
        let d = shape.digits(i);
        let e: f64 = sites.iter().zip(&d).map(|((s, w), &n)| s.energy(n, *w)).sum();
        h[[i, i]] += e;
    }
}

/// Adds `g (a_i^dag a_j + h.c.)` or `g (a_i + a_i^dag)(a_j + a_j^dag)`.
fn add_coupling(h: &mut nd::Array2<C64>, shape: &RegisterShape, i: usize, j: usize, g: f64, exchange: bool) {
    let dims = shape.dims();
    for col in 0..shape.total_dim() {
        let d = shape.digits(col);
        for (di, dj) in [(1i32, -1i32), (-1, 1), (1, 1), (-1, -1)] {
            if exchange && di == dj {
                continue;
            }
            let ni = d[i] as i32 + di;
            let nj = d[j] as i32 + dj;
            if ni < 0 || nj < 0 || ni as usize >= dims[i] || nj as usize >= dims[j] {
                continue;
            }
            let ai = (d[i].max(ni as usize) as f64).sqrt();
            let aj = (d[j].max(nj as usize) as f64).sqrt();
            let mut e = d.clone();
            e[i] = ni as usize;
            e[j] = nj as usize;
            let row = shape.index(&e).unwrap();
            h[[row, col]] += g * ai * aj;
        }
    }
}

/// Fixed `q0` between flux-tunable `q1` and `q2`, with exchange couplings,
/// written in a frame rotating at `omega_ref` on every site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunableQubitDevice {
    pub sites: [TransmonSite; 3],
    /// Exchange couplings `g_j` between `q0` and `q_j` (`|10> <-> |01>` strength).
    pub g: [f64; 2],
    pub omega_ref: f64,
}

impl TunableQubitDevice {
    /// Three-qubit chain used for the CCZS gate.
    pub fn default_cczs() -> Self {
        let w0 = ghz(5.202);
        Self {
            sites: [
                TransmonSite::fixed(w0, -mhz(275.2)),
                TransmonSite::tunable(ghz(5.708), -mhz(261.1), ghz(5.708)),
                TransmonSite::tunable(ghz(4.350), -mhz(277.3), ghz(4.927)),
            ],
            g: [mhz(3.8), mhz(3.8)],
            omega_ref: w0,
        }
    }

    /// Same chain with `q2` able to reach `omega_0`.
    pub fn default_div() -> Self {
        let mut d = Self::default_cczs();
        d.sites[2].omega_max = Some(d.sites[0].omega);
        d
    }

    /// `|11> <-> |20>` coupling strengths, `lambda_j = sqrt(2) g_j`.
    pub fn lambdas(&self) -> [f64; 2] {
        [2f64.sqrt() * self.g[0], 2f64.sqrt() * self.g[1]]
    }

    /// Resonance of `|1_0 1_j>` with `|2_0 0_j>`, capped at the site maximum.
    pub fn cz_target(&self, j: usize) -> f64 {
        self.sites[j].clamp(self.sites[0].omega + self.sites[0].alpha)
    }

    /// Resonance of `|1_0 0_j>` with `|0_0 1_j>`.
    pub fn iswap_target(&self, j: usize) -> f64 {
        self.sites[j].clamp(self.sites[0].omega)
    }

    pub fn shape(&self) -> RegisterShape {
        RegisterShape::new(self.sites.iter().map(|s| s.levels).collect(), vec!["q0".into(), "q1".into(), "q2".into()])
            .unwrap()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (k, s) in self.sites.iter().enumerate() {
            if s.levels < 3 {
                return Err(SimError::InvalidDevice(format!("q{k} needs at least 3 levels")));
            }
            if let Some(m) = s.omega_max {
                if s.omega > m + 1e-12 {
                    return Err(SimError::InvalidDevice(format!("q{k} idles above its maximum frequency")));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> DeviceModel {
        let shape = self.shape();
        let n = shape.total_dim();
        let mut h = nd::Array2::zeros((n, n));
        let sites: Vec<(TransmonSite, f64)> = self.sites.iter().map(|s| (*s, s.omega - self.omega_ref)).collect();
        add_site_energies(&mut h, &shape, &sites);
        add_coupling(&mut h, &shape, 0, 1, self.g[0], true);
        add_coupling(&mut h, &shape, 0, 2, self.g[1], true);
        let drive_diags = vec![number_diag(&shape, 1), number_diag(&shape, 2)];
        DeviceModel { shape, h_static: h, drive_diags }
    }

    pub fn projector(&self, qubits: &[usize]) -> ComputationalProjector {
        ComputationalProjector::new(&self.shape(), qubits).unwrap()
    }
}

/// Frequency trajectories of `q1` and `q2`; `None` leaves the site idle.
#[derive(Clone, Debug)]
pub struct TunableQubitPulse {
    pub shapes: [PulseShape; 2],
    pub idle: [f64; 2],
    pub target: [Option<f64>; 2],
}

impl TunableQubitPulse {
    pub fn new(dev: &TunableQubitDevice, t_gate: f64, sigma: f64, target: [Option<f64>; 2]) -> Self {
        let target = [target[0].map(|w| dev.sites[1].clamp(w)), target[1].map(|w| dev.sites[2].clamp(w))];
        let shape = PulseShape::rect_gauss(t_gate, sigma);
        Self { shapes: [shape.clone(), shape], idle: [dev.sites[1].omega, dev.sites[2].omega], target }
    }

    /// Holds each site at idle for `delays[j]` ns before its ramp starts. While a
    /// site is detuned from its plateau frequency its frame phase winds, so the
    /// delays set the phases of the effective exchange couplings.
    pub fn delayed(mut self, delays: [f64; 2]) -> Self {
        for (shape, d) in self.shapes.iter_mut().zip(delays) {
            if let PulseShape::RectGauss { start, .. } = shape {
                *start += d;
            }
        }
        self
    }

    pub fn frequency(&self, j: usize, t: f64) -> f64 {
        match self.target[j] {
            Some(w) => self.idle[j] + (w - self.idle[j]) * self.shapes[j].value(t),
            None => self.idle[j],
        }
    }
}

impl Drive for TunableQubitPulse {
    fn n_drives(&self) -> usize {
        2
    }

    fn values(&self, t: f64, out: &mut [f64]) {
        for j in 0..2 {
            out[j] = self.target[j].map_or(0.0, |w| (w - self.idle[j]) * self.shapes[j].value(t));
        }
    }

    fn end(&self) -> f64 {
        self.shapes[0].end().max(self.shapes[1].end())
    }
}

/// Three fixed-frequency qubits joined by two flux-tunable couplers
/// (`c1` between `q0` and `q1`, `c2` between `q0` and `q2`), lab frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunableCouplerDevice {
    pub qubits: [TransmonSite; 3],
    /// `omega` holds the maximum frequency `omega_c^0`.
    pub couplers: [TransmonSite; 2],
    /// `g[i][j]` between qubit `i` and coupler `j`.
    pub g: [[f64; 2]; 3],
    /// DC flux bias of each coupler in units of the flux quantum.
    pub theta: [f64; 2],
}

impl TunableCouplerDevice {
    pub fn default_device() -> Self {
        Self {
            qubits: [
                TransmonSite::fixed(ghz(4.8), ghz(-0.17)),
                TransmonSite::fixed(ghz(4.225), ghz(-0.18)),
                TransmonSite::fixed(ghz(4.35), ghz(-0.18)),
            ],
            couplers: [TransmonSite::fixed(ghz(7.8), ghz(-0.12)), TransmonSite::fixed(ghz(8.0), ghz(-0.12))],
            g: [[ghz(0.07), ghz(0.07)], [ghz(0.07), 0.0], [0.0, ghz(0.07)]],
            theta: [0.275, 0.275],
        }
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        for s in self.qubits.iter_mut().chain(self.couplers.iter_mut()) {
            s.levels = levels;
        }
        self
    }

    /// `omega_c(Phi) = omega_c^0 sqrt(|cos(pi Phi)|)`.
    pub fn coupler_frequency(&self, j: usize, phi: f64) -> f64 {
        self.couplers[j].omega * (PI * phi).cos().abs().sqrt()
    }

    pub fn shape(&self) -> RegisterShape {
        let dims: Vec<usize> = self.qubits.iter().chain(&self.couplers).map(|s| s.levels).collect();
        RegisterShape::new(dims, ["q0", "q1", "q2", "c1", "c2"].iter().map(|s| s.to_string()).collect()).unwrap()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for s in self.qubits.iter().chain(&self.couplers) {
            if s.levels < 3 {
                return Err(SimError::InvalidDevice("every site needs at least 3 levels".into()));
            }
        }
        for t in self.theta {
            if !(0.0..0.5).contains(&t.abs()) {
                return Err(SimError::InvalidDevice(format!("DC bias {t} outside (-0.5, 0.5)")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> DeviceModel {
        let shape = self.shape();
        let n = shape.total_dim();
        let mut h = nd::Array2::zeros((n, n));
        let mut sites: Vec<(TransmonSite, f64)> = self.qubits.iter().map(|s| (*s, s.omega)).collect();
        for j in 0..2 {
            sites.push((self.couplers[j], self.coupler_frequency(j, self.theta[j])));
        }
        add_site_energies(&mut h, &shape, &sites);
        for i in 0..3 {
            for j in 0..2 {
                if self.g[i][j] != 0.0 {
                    add_coupling(&mut h, &shape, i, 3 + j, self.g[i][j], false);
                }
            }
        }
        let drive_diags = vec![number_diag(&shape, 3), number_diag(&shape, 4)];
        DeviceModel { shape, h_static: h, drive_diags }
    }

    pub fn projector(&self, qubits: &[usize]) -> ComputationalProjector {
        ComputationalProjector::new(&self.shape(), qubits).unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxDrive {
    pub enabled: bool,
    /// Modulation amplitude in flux quanta.
    pub delta0: f64,
    /// Modulation frequency, rad/ns.
    pub omega_phi: f64,
    pub phase: f64,
}

impl FluxDrive {
    pub fn off() -> Self {
        Self { enabled: false, delta0: 0.0, omega_phi: 0.0, phase: 0.0 }
    }

    pub fn on(delta0: f64, omega_phi: f64, phase: f64) -> Self {
        Self { enabled: true, delta0, omega_phi, phase }
    }
}

/// Flux modulation `Phi_j(t) = Theta_j + delta_j(t) cos(omega_Phi_j t + phase_j)` on both couplers.
#[derive(Clone, Debug)]
pub struct CouplerPulse {
    pub envelope: PulseShape,
    pub flux: [FluxDrive; 2],
    theta: [f64; 2],
    omega_c0: [f64; 2],
}

impl CouplerPulse {
    pub fn new(dev: &TunableCouplerDevice, plateau: f64, rise: f64, flux: [FluxDrive; 2]) -> Self {
        Self {
            envelope: PulseShape::sin_rise_fall(plateau, rise),
            flux,
            theta: dev.theta,
            omega_c0: [dev.couplers[0].omega, dev.couplers[1].omega],
        }
    }

    pub fn flux_at(&self, j: usize, t: f64) -> f64 {
        let f = &self.flux[j];
        if !f.enabled {
            return self.theta[j];
        }
        self.theta[j] + f.delta0 * self.envelope.value(t) * (f.omega_phi * t + f.phase).cos()
    }
}

impl Drive for CouplerPulse {
    fn n_drives(&self) -> usize {
        2
    }

    fn values(&self, t: f64, out: &mut [f64]) {
        for j in 0..2 {
            out[j] = if self.flux[j].enabled {
                let w = |phi: f64| self.omega_c0[j] * (PI * phi).cos().abs().sqrt();
                w(self.flux_at(j, t)) - w(self.theta[j])
            } else {
                0.0
            };
        }
    }

    fn end(&self) -> f64 {
        self.envelope.end()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.envelope.breakpoints()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::Operator;

    #[test]
    fn tunable_qubit_model() {
        let d = TunableQubitDevice::default_cczs();
        d.validate().unwrap();
        let m = d.model();
        assert_eq!(m.dim(), 27);
        let op = Operator::new(m.shape.clone(), m.h_static.clone()).unwrap();
        assert!(op.hermiticity_residual() < 1e-15);
        assert!((op.get("100", "010").re - d.g[0]).abs() < 1e-15);
        assert!((op.get("110", "200").re - d.lambdas()[0]).abs() < 1e-15);
        assert!((d.lambdas()[0] / d.g[0] - 2f64.sqrt()).abs() < 1e-15);
        // rotating frame: q0 idle is the reference
        assert!(op.get("100", "100").norm() < 1e-15);
    }

    #[test]
    fn coupler_model() {
        let d = TunableCouplerDevice::default_device();
        d.validate().unwrap();
        let m = d.model();
        assert_eq!(m.dim(), 243);
        let op = Operator::new(m.shape.clone(), m.h_static.clone()).unwrap();
        assert!(op.hermiticity_residual() < 1e-15);
        assert!((op.get("00010", "10000").re - ghz(0.07)).abs() < 1e-15);
        assert!((op.get("00000", "10010").re - ghz(0.07)).abs() < 1e-15);
        assert!(op.get("00001", "01000").norm() == 0.0);
        let p = CouplerPulse::new(&d, 100.0, 25.0, [FluxDrive::on(0.08, 2.5, 0.0), FluxDrive::off()]);
        let mut f = [0.0; 2];
        for t in [0.0, 10.0, 60.0, 149.0] {
            p.values(t, &mut f);
            assert!(f[1] == 0.0);
            let h = m.hamiltonian_at(&f);
            let hop = Operator::new(m.shape.clone(), h).unwrap();
            assert!(hop.hermiticity_residual() < 1e-15);
        }
        p.values(0.0, &mut f);
        assert_eq!(f[0], 0.0);
        let w = d.coupler_frequency(0, 0.5);
        assert!(w.abs() < 1e-6);
    }
}
