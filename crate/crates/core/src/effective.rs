//! Interaction-picture effective Hamiltonians and their exact propagators.

use std::f64::consts::PI;

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::error::GateError;
use crate::gates::{self, CczsParams, PhysicalCzDrive};
use crate::qudit::{self, expm, ops, ComputationalProjector, Operator, RegisterShape, StateVector, I, ONE, ZERO};

fn add_coupling(h: &mut nd::Array2<C64>, i: usize, j: usize, v: C64) {
    h[[i, j]] += v;
    h[[j, i]] += v.conj();
}

/// Two simultaneous CZ-type couplings through `|2>` of the middle qubit.
#[derive(Clone, Copy, Debug)]
pub struct CzPairModel {
    pub lambda1: C64,
    pub lambda2: C64,
    pub delta: f64,
}

impl CzPairModel {
    pub fn from_drive(d: &PhysicalCzDrive) -> Self {
        Self { lambda1: d.lambda1, lambda2: d.lambda2, delta: d.delta }
    }

    pub fn drive(&self) -> PhysicalCzDrive {
        PhysicalCzDrive { lambda1: self.lambda1, lambda2: self.lambda2, delta: self.delta }
    }

    pub fn shape() -> RegisterShape {
        RegisterShape::qutrits(3)
    }

    pub fn omega(&self) -> f64 {
        self.drive().omega()
    }

    pub fn gate_time(&self) -> f64 {
        self.drive().gate_time()
    }

    pub fn hamiltonian(&self) -> Operator {
        let s = Self::shape();
        let k = |ket: &str| s.parse_ket(ket).unwrap();
        let mut h = nd::Array2::zeros((27, 27));
        add_coupling(&mut h, k("110"), k("200"), self.lambda1);
        add_coupling(&mut h, k("111"), k("201"), self.lambda1);
        add_coupling(&mut h, k("101"), k("200"), self.lambda2);
        add_coupling(&mut h, k("111"), k("210"), self.lambda2);
        h[[k("200"), k("200")]] += self.delta;
        h[[k("111"), k("111")]] -= self.delta;
        let mut op = Operator::new(s, h).unwrap();
        op.hermitian = qudit::Flag::Yes;
        op
    }

    pub fn propagate(&self, t: f64) -> Operator {
        expm(&self.hamiltonian(), t).expect("hermitian by construction")
    }

    /// State coupled to `|200>`: `(lambda2 |101> + lambda1 |110>) / Omega`.
    pub fn bright(&self) -> StateVector {
        let s = Self::shape();
        let o = self.omega();
        let mut v = StateVector::ket(&s, "000").unwrap();
        v.amps.fill(ZERO);
        v.amps[s.parse_ket("101").unwrap()] = self.lambda2 / o;
        v.amps[s.parse_ket("110").unwrap()] = self.lambda1 / o;
        v
    }

    /// State decoupled from `|200>`: `(lambda1* |101> - lambda2* |110>) / Omega`.
    pub fn dark(&self) -> StateVector {
        let s = Self::shape();
        let o = self.omega();
        let mut v = StateVector::ket(&s, "000").unwrap();
        v.amps.fill(ZERO);
        v.amps[s.parse_ket("101").unwrap()] = self.lambda1.conj() / o;
        v.amps[s.parse_ket("110").unwrap()] = -self.lambda2.conj() / o;
        v
    }

    pub fn excited(&self) -> StateVector {
        StateVector::ket(&Self::shape(), "200").unwrap()
    }

    /// V-system bright state coupled to `|111>`.
    pub fn bright_v(&self) -> StateVector {
        let s = Self::shape();
        let o = self.omega();
        let mut v = StateVector::ket(&s, "000").unwrap();
        v.amps.fill(ZERO);
        v.amps[s.parse_ket("201").unwrap()] = self.lambda1.conj() / o;
        v.amps[s.parse_ket("210").unwrap()] = self.lambda2.conj() / o;
        v
    }

    pub fn dark_v(&self) -> StateVector {
        let s = Self::shape();
        let o = self.omega();
        let mut v = StateVector::ket(&s, "000").unwrap();
        v.amps.fill(ZERO);
        v.amps[s.parse_ket("201").unwrap()] = self.lambda2 / o;
        v.amps[s.parse_ket("210").unwrap()] = -self.lambda1 / o;
        v
    }

    /// Computational block of the exact propagator at the gate time, written
    /// in closed form: the bright state picks up `-e^{-i gamma}`, the dark state
    /// is untouched and `|111>` picks up `-e^{i gamma}`.
    pub fn gate_block(&self) -> Operator {
        let (p, _) = gates::params_from_drive(&self.drive()).expect("nonzero coupling");
        let b = self.bright();
        let d = self.dark();
        let s = Self::shape();
        let i101 = s.parse_ket("101").unwrap();
        let i110 = s.parse_ket("110").unwrap();
        let mut m = nd::Array2::<C64>::eye(8);
        let e = C64::from_polar(1.0, -p.gamma);
        let idx = [(0b101usize, i101), (0b110usize, i110)];
        for &(ra, fa) in &idx {
            for &(rb, fb) in &idx {
                m[[ra, rb]] = d.amps[fa] * d.amps[fb].conj() - e * b.amps[fa] * b.amps[fb].conj();
            }
        }
        m[[7, 7]] = -C64::from_polar(1.0, p.gamma);
        Operator::new(gates::three_qubit_shape(), m).unwrap()
    }

    /// Gate-library parameters of this drive.
    pub fn gate_params(&self) -> Result<CczsParams, GateError> {
        Ok(gates::params_from_drive(&self.drive())?.0)
    }
}

/// Projector onto the qubit levels of a three-qutrit register.
pub fn qutrit_projector() -> ComputationalProjector {
    ComputationalProjector::all(&RegisterShape::qutrits(3))
}

/// Largest amplitude leaving the computational subspace from any computational input.
pub fn leakage_amplitude(u: &Operator, p: &ComputationalProjector) -> f64 {
    let comp = p.indices();
    let mut r: f64 = 0.0;
    for &j in comp {
        for i in 0..u.dim() {
            if !comp.contains(&i) {
                r = r.max(u.mat[[i, j]].norm());
            }
        }
    }
    r
}

/// Central qutrit coupled to `N` neighbour qubits through `|2_0 0_j> <-> |1_0 1_j>`.
#[derive(Clone, Debug)]
pub struct DickeModel {
    pub lambdas: Vec<C64>,
}

pub fn dicke_coefficient(n: usize, k: usize) -> f64 {
    (((n - k) * (k + 1)) as f64).sqrt()
}

impl DickeModel {
    pub fn uniform(n: usize, lambda: f64) -> Self {
        Self { lambdas: vec![C64::new(lambda, 0.0); n] }
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// `q0` with three levels followed by `N` two-level neighbours.
    pub fn full_shape(&self) -> RegisterShape {
        let mut dims = vec![3];
        dims.extend(std::iter::repeat_n(2, self.n()));
        RegisterShape::with_dims(&dims)
    }

    pub fn full_hamiltonian(&self) -> Operator {
        let s = self.full_shape();
        let n = s.total_dim();
        let mut h = nd::Array2::zeros((n, n));
        for col in 0..n {
            let d = s.digits(col);
            if d[0] != 1 {
                continue;
            }
            for (j, &lam) in self.lambdas.iter().enumerate() {
                if d[j + 1] == 1 {
                    let mut e = d.clone();
                    e[0] = 2;
                    e[j + 1] = 0;
                    add_coupling(&mut h, s.index(&e).unwrap(), col, lam);
                }
            }
        }
        let mut op = Operator::new(s, h).unwrap();
        op.hermitian = qudit::Flag::Yes;
        op
    }

    /// Total excitation number (level index summed over sites) on the full register.
    pub fn excitation_operator(&self) -> Operator {
        let s = self.full_shape();
        let d: Vec<C64> = (0..s.total_dim())
            .map(|i| C64::new(s.digits(i).iter().sum::<usize>() as f64, 0.0))
            .collect();
        Operator::diag(s, &d)
    }

    /// Hamiltonian in the symmetric basis `|x0> (x) |D_N^k>`, index `x0 (N+1) + k`.
    /// Requires equal couplings.
    pub fn symmetric_hamiltonian(&self) -> Option<nd::Array2<C64>> {
        let lam = *self.lambdas.first()?;
        if self.lambdas.iter().any(|l| (l - lam).norm() > 1e-15) {
            return None;
        }
        let n = self.n();
        let dim = 3 * (n + 1);
        let mut h = nd::Array2::zeros((dim, dim));
        for k in 0..n {
            // <2_0, D^k| H |1_0, D^{k+1}> = lambda G_N^k
            add_coupling(&mut h, 2 * (n + 1) + k, n + 1 + k + 1, lam * dicke_coefficient(n, k));
        }
        Some(h)
    }

    /// Maps a symmetric-basis vector to the full register.
    pub fn symmetric_to_full(&self, v: &nd::Array1<C64>) -> StateVector {
        let n = self.n();
        let s = self.full_shape();
        let mut amps = nd::Array1::zeros(s.total_dim());
        for x0 in 0..3 {
            for k in 0..=n {
                let c = v[x0 * (n + 1) + k];
                if c == ZERO {
                    continue;
                }
                let dk = dicke_state(n, k);
                for (m, a) in dk.amps.iter().enumerate() {
                    if *a != ZERO {
                        amps[x0 * (1 << n) + m] += c * a;
                    }
                }
            }
        }
        StateVector::new(s, amps).unwrap()
    }
}

/// `|D_N^k>` on `N` qubits.
pub fn dicke_state(n: usize, k: usize) -> StateVector {
    let s = RegisterShape::qubits(n);
    let mut amps = nd::Array1::zeros(1 << n);
    let mut count = 0usize;
    for m in 0usize..(1 << n) {
        if m.count_ones() as usize == k {
            amps[m] = ONE;
            count += 1;
        }
    }
    let norm = (count as f64).sqrt();
    amps.mapv_inplace(|z: C64| z / norm);
    StateVector::new(s, amps).unwrap()
}

/// Evolution in the `(k+2)`-excitation sector, basis `{|1_0>|D^{k+1}>, |2_0>|D^k>}`.
pub fn dicke_step(n: usize, k: usize, lambda: f64, t: f64) -> Result<Operator, GateError> {
    if k + 1 > n {
        return Err(GateError::DickeIndex { n, k });
    }
    let a = t * lambda * dicke_coefficient(n, k);
    let (s, co) = a.sin_cos();
    let mut op = Operator::from_matrix(nd::arr2(&[[C64::new(co, 0.0), -I * s], [-I * s, C64::new(co, 0.0)]]));
    op.unitary = qudit::Flag::Yes;
    Ok(op)
}

/// Two simultaneous exchange couplings `|1_0 0_j> <-> |0_0 1_j>`.
#[derive(Clone, Copy, Debug)]
pub struct IswapPairModel {
    pub g1: f64,
    pub g2: f64,
}

impl IswapPairModel {
    pub fn omega(&self) -> f64 {
        (self.g1 * self.g1 + self.g2 * self.g2).sqrt()
    }

    pub fn hamiltonian(&self) -> Operator {
        let s = RegisterShape::qubits(3);
        let k = |ket: &str| s.parse_ket(ket).unwrap();
        let mut h = nd::Array2::zeros((8, 8));
        let (g1, g2) = (C64::new(self.g1, 0.0), C64::new(self.g2, 0.0));
        add_coupling(&mut h, k("100"), k("010"), g1);
        add_coupling(&mut h, k("101"), k("011"), g1);
        add_coupling(&mut h, k("100"), k("001"), g2);
        add_coupling(&mut h, k("110"), k("011"), g2);
        let mut op = Operator::new(s, h).unwrap();
        op.hermitian = qudit::Flag::Yes;
        op
    }

    pub fn propagate(&self, t: f64) -> Operator {
        expm(&self.hamiltonian(), t).expect("hermitian by construction")
    }

    pub fn excitation_operator() -> Operator {
        let s = RegisterShape::qubits(3);
        let d: Vec<C64> = (0..8).map(|i: usize| C64::new(i.count_ones() as f64, 0.0)).collect();
        Operator::diag(s, &d)
    }

    /// `(B1, B2, D1, D2)` on `|q1 q2>` as amplitudes of `(|10>, |01>)`.
    pub fn bright_dark(&self) -> [[f64; 2]; 4] {
        let o = self.omega();
        let (a, b) = (self.g1 / o, self.g2 / o);
        [[a, b], [b, a], [b, -a], [a, -b]]
    }

    pub fn div_params(&self, t: f64) -> gates::DivParams {
        gates::DivParams::from_couplings(self.g1, self.g2, t)
    }
}

/// Three states `|1> = |101>`, `|2> = |200>`, `|3> = |110>` with a direct
/// `|1> <-> |3>` coupling, in the rotating frame.
#[derive(Clone, Copy, Debug)]
pub struct DeltaSystemModel {
    pub alpha12: f64,
    pub alpha23: f64,
    pub alpha13: f64,
    pub delta1: f64,
    pub delta3: f64,
    pub phase: f64,
}

impl DeltaSystemModel {
    /// Resonant, equal-strength case.
    pub fn symmetric(alpha12: f64, alpha13: f64) -> Self {
        Self { alpha12, alpha23: alpha12, alpha13, delta1: 0.0, delta3: 0.0, phase: 0.0 }
    }

    pub fn hamiltonian(&self) -> Operator {
        let a13 = self.alpha13 * C64::from_polar(1.0, self.phase);
        let r = |x: f64| C64::new(x, 0.0);
        let mut op = Operator::from_matrix(nd::arr2(&[
            [r(self.delta1), r(self.alpha12), a13],
            [r(self.alpha12), ZERO, r(self.alpha23)],
            [a13.conj(), r(self.alpha23), r(self.delta3)],
        ]));
        op.hermitian = qudit::Flag::Yes;
        op
    }

    /// Rabi frequency of the bright/`|2>` pair in the symmetric case.
    pub fn omega(&self) -> f64 {
        ((self.alpha13 / 2.0).powi(2) + 2.0 * self.alpha12 * self.alpha12).sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.alpha12 == self.alpha23 && self.delta1 == 0.0 && self.delta3 == 0.0 && self.phase == 0.0
    }
}

/// Closed-form propagator in the symmetric case, valid at any `t`.
fn delta_closed_form(m: &DeltaSystemModel, t: f64) -> nd::Array2<C64> {
    let om = m.omega();
    let (nx, nz) = if om > 0.0 { (2f64.sqrt() * m.alpha12 / om, m.alpha13 / (2.0 * om)) } else { (0.0, 0.0) };
    let (s, co) = (om * t).sin_cos();
    let ph = C64::from_polar(1.0, -m.alpha13 * t / 2.0);
    // (B, 2) block of exp(-i H2 t) times the common phase.
    let ubb = ph * C64::new(co, -s * nz);
    let ub2 = ph * C64::new(0.0, -s * nx);
    let u22 = ph * C64::new(co, s * nz);
    let ud = C64::from_polar(1.0, m.alpha13 * t);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // B = (|1> + |3>)/sqrt2, D = (|1> - |3>)/sqrt2
    let b = [h, 0.0, h];
    let d = [h, 0.0, -h];
    let mut u = nd::Array2::zeros((3, 3));
    for i in 0..3 {
        for j in 0..3 {
            u[[i, j]] = ubb * b[i] * b[j] + ud * d[i] * d[j];
        }
    }
    for i in 0..3 {
        u[[i, 1]] += ub2 * b[i];
        u[[1, i]] += ub2 * b[i];
    }
    u[[1, 1]] = u22;
    u
}

/// Propagator of the Delta system in the bare basis `(|1>, |2>, |3>)`.
/// Uses the closed form when the model is symmetric and `expm` otherwise.
pub fn delta_system_propagator(m: &DeltaSystemModel, t: f64) -> Operator {
    let mut op = if m.is_symmetric() {
        Operator::from_matrix(delta_closed_form(m, t))
    } else {
        expm(&m.hamiltonian(), t).expect("hermitian")
    };
    op.unitary = qudit::Flag::Yes;
    op
}

/// Bare-basis propagator at `Omega t = pi` for the symmetric Delta system,
/// written in terms of `e = exp(-i alpha13 t / 2)` and `d = exp(i alpha13 t)`.
pub fn u_bare(alpha13: f64, t: f64) -> Operator {
    let e = C64::from_polar(1.0, -alpha13 * t / 2.0);
    let d = C64::from_polar(1.0, alpha13 * t);
    let mut op = Operator::from_matrix(nd::arr2(&[
        [(d - e) / 2.0, ZERO, -(e + d) / 2.0],
        [ZERO, -e, ZERO],
        [-(e + d) / 2.0, ZERO, (d - e) / 2.0],
    ]));
    op.unitary = qudit::Flag::Yes;
    op
}

/// `alpha12` giving full `|1> -> |3>` transfer at `t = 4 pi / alpha13`
/// (there `Omega t = 3 pi`).
pub fn alpha12_for_full_transfer(alpha13: f64) -> f64 {
    alpha13.abs() * (5.0f64 / 32.0).sqrt()
}

/// Single-qutrit raising of `|1> -> |2>` (a two-level X on levels 1,2).
pub fn flip12() -> nd::Array2<C64> {
    ops::two_level(3, 1, 2, [[ZERO, ONE], [ONE, ZERO]])
}

/// Period of the resonant Rabi cycle; handy for time arithmetic in tests.
pub fn cz_time(lambda: f64) -> f64 {
    PI / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{max_abs_diff, project_computational};
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn cz_pair_transitions() {
        let m = CzPairModel { lambda1: C64::new(1.0, 0.0), lambda2: C64::new(1.0, 0.0), delta: 0.0 };
        let h = m.hamiltonian();
        let nz = h.mat.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nz, 8);
        for (a, b) in [("110", "200"), ("111", "201"), ("101", "200"), ("111", "210")] {
            assert_eq!(h.get(a, b), ONE);
            assert_eq!(h.get(b, a), ONE);
        }
    }

    #[test]
    fn cczs_from_equal_couplings() {
        let lam = 0.9;
        let m = CzPairModel { lambda1: C64::new(lam, 0.0), lambda2: C64::new(lam, 0.0), delta: 0.0 };
        let u = m.propagate(PI / (2f64.sqrt() * lam));
        let p = qutrit_projector();
        let blk = project_computational(&u, &p).unwrap();
        let target = gates::cczs(&CczsParams::new(PI / 2.0, PI, 0.0).unwrap());
        assert!(max_abs_diff(&blk.mat, &target.mat) < 1e-10);
        assert!(leakage_amplitude(&u, &p) < 1e-10);
    }

    #[test]
    fn gate_block_matches_expm() {
        let m = CzPairModel { lambda1: C64::new(0.4, -0.7), lambda2: C64::new(-1.1, 0.2), delta: 0.6 };
        let u = m.propagate(m.gate_time());
        let blk = project_computational(&u, &qutrit_projector()).unwrap();
        assert!(max_abs_diff(&blk.mat, &m.gate_block().mat) < 1e-12);
        let p = m.gate_params().unwrap();
        assert!((blk.mat[[7, 7]] + C64::from_polar(1.0, p.gamma)).norm() < 1e-12);
    }

    #[test]
    fn iswap_pair_gives_div() {
        let g = 0.8;
        let m = IswapPairModel { g1: g, g2: g };
        let u = m.propagate(PI / (2.0 * 2f64.sqrt() * g));
        let target = gates::div(&gates::DivParams { theta: PI / 4.0, varphi: PI / 2.0 });
        assert!(max_abs_diff(&u.mat, &target.mat) < 1e-12);
        let single = IswapPairModel { g1: g, g2: 0.0 }.hamiltonian();
        assert_eq!(single.get("100", "010"), C64::new(g, 0.0));
        assert_eq!(single.get("100", "001"), ZERO);
    }

    #[test]
    fn dicke_matrix_element() {
        let lam = 0.37;
        let m = DickeModel::uniform(4, lam);
        let h = m.full_hamiltonian();
        let mut left = nd::Array1::<C64>::zeros(h.dim());
        let mut right = nd::Array1::<C64>::zeros(h.dim());
        let d2 = dicke_state(4, 2);
        let d1 = dicke_state(4, 1);
        for k in 0..16 {
            left[16 + k] = d2.amps[k];
            right[32 + k] = d1.amps[k];
        }
        let el: C64 = left.iter().zip(h.mat.dot(&right).iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((el - C64::new(lam * 6f64.sqrt(), 0.0)).norm() < 1e-14);
        let hs = m.symmetric_hamiltonian().unwrap();
        assert!((hs[[2 * 5 + 1, 5 + 2]] - C64::new(lam * 6f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dicke_steps() {
        let lam = 1.7;
        let u = dicke_step(4, 0, lam, PI / (4.0 * lam)).unwrap();
        assert!((u.mat[[0, 1]].norm_sqr() - 1.0).abs() < 1e-14);
        let u = dicke_step(4, 1, lam, PI / (2.0 * 6f64.sqrt() * lam)).unwrap();
        assert!((u.mat[[0, 1]].norm_sqr() - 1.0).abs() < 1e-14);
        let u = dicke_step(4, 2, lam, 0.0).unwrap();
        assert!(max_abs_diff(&u.mat, &nd::Array2::eye(2)) == 0.0);
        assert!(dicke_step(4, 4, lam, 1.0).is_err());
    }

    #[test]
    fn u_bare_examples() {
        let a12 = 0.8;
        let m = DeltaSystemModel::symmetric(a12, 0.0);
        let t = PI / m.omega();
        let u = u_bare(0.0, t);
        assert!((u.mat[[0, 2]] + ONE).norm() < 1e-14 && (u.mat[[2, 0]] + ONE).norm() < 1e-14);
        assert!(u.mat[[0, 0]].norm() < 1e-14 && u.mat[[2, 2]].norm() < 1e-14);
        let ex = expm(&m.hamiltonian(), t).unwrap();
        assert!(max_abs_diff(&u.mat, &ex.mat) < 1e-12);
        // Lambda block of CCZS(pi/2, pi, 0) on (|101>, |110>).
        let c = gates::u_czs(&CczsParams::new(PI / 2.0, PI, 0.0).unwrap());
        assert!((u.mat[[0, 2]] - c.mat[[1, 2]]).norm() < 1e-14);

        let a13 = 0.5;
        let m = DeltaSystemModel::symmetric(alpha12_for_full_transfer(a13), a13);
        let t = 4.0 * PI / a13;
        let u = delta_system_propagator(&m, t);
        assert!((u.mat[[2, 0]].norm_sqr() - 1.0).abs() < 1e-12);
        let ex = expm(&m.hamiltonian(), t).unwrap();
        assert!(max_abs_diff(&u.mat, &ex.mat) < 1e-12);
    }

    #[test]
    fn delta_general_path_uses_expm() {
        let m = DeltaSystemModel { alpha12: 0.3, alpha23: 0.5, alpha13: 0.2, delta1: 0.1, delta3: -0.2, phase: 0.4 };
        let u = delta_system_propagator(&m, 2.0);
        assert!(u.unitarity_residual() < 1e-12);
        assert!(max_abs_diff(&u.mat, &expm(&m.hamiltonian(), 2.0).unwrap().mat) < 1e-14);
    }

    #[test]
    fn bright_dark_orthonormal() {
        let m = IswapPairModel { g1: 0.3, g2: 0.9 };
        let bd = m.bright_dark();
        for v in bd {
            assert!(((v[0] * v[0] + v[1] * v[1]) - 1.0).abs() < 1e-14);
        }
        assert!((bd[0][0] * bd[2][0] + bd[0][1] * bd[2][1]).abs() < 1e-14);
        let _ = FRAC_1_SQRT_2;
    }
}
