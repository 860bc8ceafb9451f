//! Closed-form gate constructors and identities between them.
//!
//! Three-qubit matrices use the order `|q0 q1 q2>` with `q0` the middle
//! (control) qubit of the chain.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray as nd;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::GateError;
use crate::qudit::{self, embed, Operator, RegisterShape, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CczsParams {
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
}

impl CczsParams {
    pub fn new(theta: f64, phi: f64, gamma: f64) -> Result<Self, GateError> {
        if !(gamma > -PI && gamma < PI) {
            return Err(GateError::GammaOutOfRange(gamma));
        }
        Ok(Self { theta, phi, gamma })
    }
}

/// Couplings of the `|11x> <-> |20x>` and `|1x1> <-> |2x0>` transitions and
/// their common detuning, all in angular units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalCzDrive {
    pub lambda1: C64,
    pub lambda2: C64,
    pub delta: f64,
}

impl PhysicalCzDrive {
    pub fn omega(&self) -> f64 {
        (self.lambda1.norm_sqr() + self.lambda2.norm_sqr()).sqrt()
    }

    pub fn gate_time(&self) -> f64 {
        PI / (self.omega().powi(2) + self.delta * self.delta / 4.0).sqrt()
    }
}

/// DIV gate parameters: `tan(theta) = g2/g1`, `varphi = Omega t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivParams {
    pub theta: f64,
    pub varphi: f64,
}

impl DivParams {
    pub fn from_couplings(g1: f64, g2: f64, t: f64) -> Self {
        Self { theta: g2.atan2(g1), varphi: (g1 * g1 + g2 * g2).sqrt() * t }
    }
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn op4(m: [[C64; 4]; 4]) -> Operator {
    let mut op = Operator::from_matrix(nd::Array2::from_shape_fn((4, 4), |(i, j)| m[i][j]));
    op.shape = RegisterShape::new(vec![2, 2], vec!["q1".into(), "q2".into()]).unwrap();
    op.unitary = qudit::Flag::Yes;
    op
}

/// Controlled part of the CCZS gate on `|q1 q2>`.
pub fn u_czs(p: &CczsParams) -> Operator {
    let e = C64::from_polar(1.0, p.gamma);
    let (s, co) = (p.theta / 2.0).sin_cos();
    let off = 0.5 * (ONE + e) * p.theta.sin();
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, -e * s * s + co * co, off * C64::from_polar(1.0, -p.phi), ZERO],
        [ZERO, off * C64::from_polar(1.0, p.phi), -e * co * co + s * s, ZERO],
        [ZERO, ZERO, ZERO, -e],
    ])
}

pub fn three_qubit_shape() -> RegisterShape {
    RegisterShape::qubits(3)
}

/// `|0><0| (x) 1 + |1><1| (x) u` with `q0` as control.
pub fn controlled(u: &Operator) -> Operator {
    let mut m = nd::Array2::zeros((8, 8));
    for k in 0..4 {
        m[[k, k]] = ONE;
    }
    m.slice_mut(nd::s![4..8, 4..8]).assign(&u.mat);
    let mut op = Operator::new(three_qubit_shape(), m).unwrap();
    op.unitary = u.unitary;
    op
}

pub fn cczs(p: &CczsParams) -> Operator {
    controlled(&u_czs(p))
}

/// Maps a physical drive to CCZS parameters and the leakage-free gate time.
///
/// `phi` is defined through `lambda2/lambda1 = -exp(-i phi) tan(theta/2)`,
/// which makes the exact propagator's `{|101>,|110>}` block agree with
/// [`u_czs`] whenever the drive is resonant.
pub fn params_from_drive(d: &PhysicalCzDrive) -> Result<(CczsParams, f64), GateError> {
    let omega = d.omega();
    if omega == 0.0 {
        return Err(GateError::ZeroCoupling);
    }
    let (theta, phi) = if d.lambda1.norm() == 0.0 {
        (PI, 0.0)
    } else {
        let r = d.lambda2 / d.lambda1;
        (2.0 * r.norm().atan(), if r.norm() == 0.0 { PI } else { wrap_angle(PI - r.arg()) })
    };
    let gamma = PI * d.delta / (4.0 * omega * omega + d.delta * d.delta).sqrt();
    Ok((CczsParams { theta, phi, gamma }, d.gate_time()))
}

/// Inverse of [`params_from_drive`] for a given total coupling `omega`.
pub fn drive_from_params(p: &CczsParams, omega: f64) -> PhysicalCzDrive {
    let lambda1 = c(omega * (p.theta / 2.0).cos(), 0.0);
    let lambda2 = -omega * (p.theta / 2.0).sin() * C64::from_polar(1.0, -p.phi);
    let delta = 2.0 * omega * p.gamma / (PI * PI - p.gamma * p.gamma).sqrt();
    PhysicalCzDrive { lambda1, lambda2, delta }
}

/// Single-excitation block of the DIV gate in the basis `(|010>, |100>, |001>)`.
/// The double-excitation block in `(|101>, |011>, |110>)` has the same form.
pub fn u_div_block(p: &DivParams) -> Operator {
    let (st, ct) = p.theta.sin_cos();
    let (sv, cv) = p.varphi.sin_cos();
    let m = nd::arr2(&[
        [c(st * st + ct * ct * cv, 0.0), c(0.0, -ct * sv), c(0.5 * (2.0 * p.theta).sin() * (cv - 1.0), 0.0)],
        [c(0.0, -ct * sv), c(cv, 0.0), c(0.0, -st * sv)],
        [c(0.5 * (2.0 * p.theta).sin() * (cv - 1.0), 0.0), c(0.0, -st * sv), c(ct * ct + st * st * cv, 0.0)],
    ]);
    let mut op = Operator::from_matrix(m);
    op.unitary = qudit::Flag::Yes;
    op
}

/// Basis indices of the one- and two-excitation DIV blocks in the 8-dim register.
pub const DIV_BLOCK1: [usize; 3] = [0b010, 0b100, 0b001];
pub const DIV_BLOCK2: [usize; 3] = [0b101, 0b011, 0b110];

pub fn div(p: &DivParams) -> Operator {
    let u = u_div_block(p);
    let mut m = nd::Array2::zeros((8, 8));
    m[[0, 0]] = ONE;
    m[[7, 7]] = ONE;
    for blk in [DIV_BLOCK1, DIV_BLOCK2] {
        for a in 0..3 {
            for b in 0..3 {
                m[[blk[a], blk[b]]] = u.mat[[a, b]];
            }
        }
    }
    let mut op = Operator::new(three_qubit_shape(), m).unwrap();
    op.unitary = qudit::Flag::Yes;
    op
}

pub fn xy(theta: f64, phi: f64) -> Operator {
    let (s, co) = (theta / 2.0).sin_cos();
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, c(co, 0.0), I * s * C64::from_polar(1.0, phi), ZERO],
        [ZERO, I * s * C64::from_polar(1.0, -phi), c(co, 0.0), ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ])
}

pub fn cz(gamma: f64) -> Operator {
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ONE, ZERO],
        [ZERO, ZERO, ZERO, -C64::from_polar(1.0, gamma)],
    ])
}

pub fn iswap() -> Operator {
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ZERO, I, ZERO],
        [ZERO, I, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ])
}

/// Exchange rotation generated by a stray `|01> <-> |10>` coupling, `beta = g t`.
pub fn u_iswap(beta: f64) -> Operator {
    let (s, co) = beta.sin_cos();
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, c(co, 0.0), c(0.0, -s), ZERO],
        [ZERO, c(0.0, -s), c(co, 0.0), ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ])
}

pub fn u_fredkin() -> Operator {
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ZERO, ONE, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ONE],
    ])
}

pub fn u_ifredkin() -> Operator {
    iswap()
}

pub fn u_toffoli() -> Operator {
    op4([
        [ONE, ZERO, ZERO, ZERO],
        [ZERO, ONE, ZERO, ZERO],
        [ZERO, ZERO, ZERO, ONE],
        [ZERO, ZERO, ONE, ZERO],
    ])
}

pub fn u_ccz() -> Operator {
    cz(0.0)
}

pub fn fredkin() -> Operator {
    controlled(&u_fredkin())
}

pub fn ifredkin() -> Operator {
    controlled(&u_ifredkin())
}

pub fn toffoli() -> Operator {
    controlled(&u_toffoli())
}

pub fn ccz() -> Operator {
    controlled(&u_ccz())
}

fn op2(m: [[C64; 2]; 2]) -> Operator {
    let mut op = Operator::from_matrix(nd::Array2::from_shape_fn((2, 2), |(i, j)| m[i][j]));
    op.unitary = qudit::Flag::Yes;
    op
}

pub fn hadamard() -> Operator {
    let h = c(FRAC_1_SQRT_2, 0.0);
    op2([[h, h], [h, -h]])
}

pub fn pauli_x() -> Operator {
    op2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn s_gate() -> Operator {
    op2([[ONE, ZERO], [ZERO, I]])
}

pub fn sqrt_x() -> Operator {
    let a = c(0.5, 0.5);
    let b = c(0.5, -0.5);
    op2([[a, b], [b, a]])
}

/// Single-qubit `Z` rotation `diag(1, e^{i z})`.
pub fn phase(z: f64) -> Operator {
    op2([[ONE, ZERO], [ZERO, C64::from_polar(1.0, z)]])
}

/// Parameters accepted by [`named_gate`]; unused fields are ignored.
#[derive(Clone, Debug, Default)]
pub struct GateArgs {
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub varphi: Option<f64>,
}

fn need(v: Option<f64>, name: &str) -> Result<f64, GateError> {
    v.ok_or_else(|| GateError::MissingParam(name.into()))
}

pub const GATE_NAMES: &[&str] = &[
    "cczs", "uczs", "div", "udiv", "xy", "cz", "fredkin", "ifredkin", "toffoli", "ccz", "iswap",
    "uiswap", "h", "x", "s", "sqrtx",
];

pub fn named_gate(name: &str, a: &GateArgs) -> Result<Operator, GateError> {
    let g = match name.to_ascii_lowercase().as_str() {
        "cczs" => cczs(&CczsParams::new(need(a.theta, "theta")?, need(a.phi, "phi")?, a.gamma.unwrap_or(0.0))?),
        "uczs" => u_czs(&CczsParams::new(need(a.theta, "theta")?, need(a.phi, "phi")?, a.gamma.unwrap_or(0.0))?),
        "div" => div(&DivParams { theta: need(a.theta, "theta")?, varphi: need(a.varphi, "varphi")? }),
        "udiv" => u_div_block(&DivParams { theta: need(a.theta, "theta")?, varphi: need(a.varphi, "varphi")? }),
        "xy" => xy(need(a.theta, "theta")?, need(a.phi, "phi")?),
        "cz" => cz(a.gamma.unwrap_or(0.0)),
        "fredkin" => fredkin(),
        "ifredkin" => ifredkin(),
        "toffoli" => toffoli(),
        "ccz" => ccz(),
        "iswap" => iswap(),
        "uiswap" => u_iswap(need(a.beta, "beta")?),
        "h" => hadamard(),
        "x" => pauli_x(),
        "s" => s_gate(),
        "sqrtx" => sqrt_x(),
        other => return Err(GateError::UnknownGate(other.into())),
    };
    Ok(g)
}

/// Two-qubit gate placed on `(a, b)` of the three-qubit register.
pub fn on_pair(u: &Operator, a: usize, b: usize) -> Operator {
    embed(u, &[a, b], &three_qubit_shape()).expect("pair embedding")
}

#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub label: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub tolerance: f64,
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    pub pass: bool,
    pub note: String,
}

impl IdentityReport {
    fn from_residuals(name: &str, tol: f64, residuals: Vec<Residual>, note: String) -> Self {
        let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        Self { name: name.into(), tolerance: tol, pass: max_residual <= tol, residuals, max_residual, note }
    }
}

/// Right-hand side of the XY/CZ/XY^dag decomposition, with XY on `(q1, q2)`
/// and CZ on `(q0, q1)`.
pub fn xy_cz_rhs(p: &CczsParams) -> Operator {
    let x = on_pair(&xy(p.theta, PI / 2.0 - p.phi), 1, 2);
    let z = on_pair(&cz(p.gamma), 0, 1);
    x.matmul(&z).unwrap().matmul(&x.dagger()).unwrap()
}

pub fn xy_cz_residual(p: &CczsParams) -> f64 {
    qudit::phase_aligned_diff(&xy_cz_rhs(p).mat, &cczs(p).mat)
}

/// Checks the decomposition on `n_random` random triples plus a regular
/// `grid^3` lattice (pass `grid = 0` to skip the lattice).
pub fn verify_xy_cz_decomposition(n_random: usize, grid: usize, seed: u64) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for _ in 0..n_random {
        points.push(CczsParams {
            theta: rng.random_range(0.0..PI),
            phi: rng.random_range(-PI..PI),
            gamma: rng.random_range(-PI..PI) * 0.999,
        });
    }
    for a in 0..grid {
        for b in 0..grid {
            for g in 0..grid {
                let f = |k: usize| (k as f64 + 0.5) / grid as f64;
                points.push(CczsParams {
                    theta: PI * f(a),
                    phi: -PI + 2.0 * PI * f(b),
                    gamma: -PI + 2.0 * PI * f(g),
                });
            }
        }
    }
    let residuals = points
        .iter()
        .map(|p| Residual {
            label: format!("theta={:.6} phi={:.6} gamma={:.6}", p.theta, p.phi, p.gamma),
            residual: xy_cz_residual(p),
        })
        .collect();
    IdentityReport::from_residuals("decomposition", qudit::TOL_ALGEBRA, residuals, String::new())
}

#[derive(Clone, Debug, Serialize)]
pub struct Construction {
    #[serde(skip)]
    pub operator: Operator,
    pub report: IdentityReport,
}

/// Fredkin from CCZ and CCZS(pi/2, 0, 0); both application orders are checked.
pub fn construct_fredkin() -> Result<Construction, GateError> {
    let c0 = cczs(&CczsParams::new(PI / 2.0, 0.0, 0.0)?);
    let z = ccz();
    let target = fredkin();
    let after = z.matmul(&c0)?; // CCZS first, then CCZ
    let before = c0.matmul(&z)?; // CCZ first, then CCZS
    let residuals = vec![
        Residual { label: "CCZS then CCZ".into(), residual: qudit::phase_aligned_diff(&after.mat, &target.mat) },
        Residual { label: "CCZ then CCZS".into(), residual: qudit::phase_aligned_diff(&before.mat, &target.mat) },
    ];
    let best = if residuals[0].residual <= residuals[1].residual { 0 } else { 1 };
    let note = format!("best order: {}", residuals[best].label);
    let operator = if best == 0 { after } else { before };
    let report = IdentityReport {
        max_residual: residuals[best].residual,
        pass: residuals[best].residual <= qudit::TOL_ALGEBRA,
        name: "fredkin".into(),
        tolerance: qudit::TOL_ALGEBRA,
        residuals,
        note,
    };
    if !report.pass {
        return Err(GateError::SearchFailed);
    }
    Ok(Construction { operator, report })
}

/// iFredkin from CCZS(pi/2, pi/2, 0) and one CZ; the CZ pair and order are
/// found by exhaustive search.
pub fn construct_ifredkin() -> Result<Construction, GateError> {
    let c0 = cczs(&CczsParams::new(PI / 2.0, PI / 2.0, 0.0)?);
    let target = ifredkin();
    let mut residuals = Vec::new();
    let mut ops = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let z = on_pair(&cz(0.0), a, b);
        let after = z.matmul(&c0)?;
        let before = c0.matmul(&z)?;
        residuals.push(Residual {
            label: format!("CCZS then CZ(q{a},q{b})"),
            residual: qudit::phase_aligned_diff(&after.mat, &target.mat),
        });
        ops.push(after);
        residuals.push(Residual {
            label: format!("CZ(q{a},q{b}) then CCZS"),
            residual: qudit::phase_aligned_diff(&before.mat, &target.mat),
        });
        ops.push(before);
    }
    let best = (0..residuals.len())
        .min_by(|&x, &y| residuals[x].residual.partial_cmp(&residuals[y].residual).unwrap())
        .unwrap();
    let matches: Vec<String> = residuals
        .iter()
        .filter(|r| r.residual <= qudit::TOL_ALGEBRA)
        .map(|r| r.label.clone())
        .collect();
    let report = IdentityReport {
        name: "ifredkin".into(),
        tolerance: qudit::TOL_ALGEBRA,
        max_residual: residuals[best].residual,
        pass: residuals[best].residual <= qudit::TOL_ALGEBRA,
        note: format!("matching placements: {}", matches.join("; ")),
        residuals,
    };
    if !report.pass {
        return Err(GateError::SearchFailed);
    }
    Ok(Construction { operator: ops[best].clone(), report })
}

/// Minimum phase-aligned distance between CCZS and Toffoli over an `n^3` grid.
pub fn toffoli_min_distance(n: usize) -> (f64, CczsParams) {
    let target = toffoli();
    let mut best = (f64::INFINITY, CczsParams { theta: 0.0, phi: 0.0, gamma: 0.0 });
    let f = |k: usize| (k as f64 + 0.5) / n as f64;
    for a in 0..n {
        let theta = if n > 1 { PI * a as f64 / (n - 1) as f64 } else { 0.0 };
        for b in 0..n {
            let phi = -PI + 2.0 * PI * f(b);
            for g in 0..n {
                let p = CczsParams { theta, phi, gamma: -PI + 2.0 * PI * f(g) };
                let d = qudit::phase_aligned_diff(&cczs(&p).mat, &target.mat);
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
    }
    best
}

/// Minimum CCZS-to-Toffoli distance required by [`verify_toffoli_distinct`].
pub const TOFFOLI_MIN_DISTANCE: f64 = 0.5;

/// Grid scan showing no CCZS coincides with Toffoli. Passes when the minimum
/// distance stays above [`TOFFOLI_MIN_DISTANCE`].
pub fn verify_toffoli_distinct(n: usize) -> IdentityReport {
    let (d, p) = toffoli_min_distance(n);
    IdentityReport {
        name: "toffoli".into(),
        tolerance: TOFFOLI_MIN_DISTANCE,
        residuals: vec![Residual {
            label: format!("theta={:.4} phi={:.4} gamma={:.4}", p.theta, p.phi, p.gamma),
            residual: d,
        }],
        max_residual: d,
        pass: d > TOFFOLI_MIN_DISTANCE,
        note: format!("minimum distance over a {n}^3 grid; must exceed the tolerance"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{max_abs_diff, StateVector};

    const EPS: f64 = 1e-12;

    #[test]
    fn u_czs_special_cases() {
        let u = u_czs(&CczsParams::new(PI / 2.0, PI, 0.0).unwrap());
        let t = nd::arr2(&[
            [ONE, ZERO, ZERO, ZERO],
            [ZERO, ZERO, -ONE, ZERO],
            [ZERO, -ONE, ZERO, ZERO],
            [ZERO, ZERO, ZERO, -ONE],
        ]);
        assert!(max_abs_diff(&u.mat, &t) < EPS);

        let u = u_czs(&CczsParams::new(0.0, 0.7, 0.0).unwrap());
        let d = nd::Array2::from_diag(&nd::arr1(&[ONE, ONE, -ONE, -ONE]));
        assert!(max_abs_diff(&u.mat, &d) < EPS);

        let phi = 0.83;
        let u = u_czs(&CczsParams::new(PI / 2.0, phi, 0.0).unwrap());
        assert!((u.mat[[1, 2]] - C64::from_polar(1.0, -phi)).norm() < EPS);
        assert!((u.mat[[2, 1]] - C64::from_polar(1.0, phi)).norm() < EPS);
        assert!(u.mat[[1, 1]].norm() < EPS && u.mat[[2, 2]].norm() < EPS);
    }

    #[test]
    fn gamma_range_enforced() {
        assert!(CczsParams::new(0.0, 0.0, PI).is_err());
        assert!(CczsParams::new(0.0, 0.0, -PI).is_err());
    }

    #[test]
    fn cczs_examples() {
        let g = cczs(&CczsParams::new(PI / 2.0, PI, 0.0).unwrap());
        let s = three_qubit_shape();
        let out = g.apply(&StateVector::ket(&s, "110").unwrap()).unwrap();
        assert!((out.amp("101") + ONE).norm() < EPS);
        for ket in ["000", "001", "010", "011"] {
            let out = g.apply(&StateVector::ket(&s, ket).unwrap()).unwrap();
            assert!((out.amp(ket) - ONE).norm() < EPS);
        }
        let g = cczs(&CczsParams::new(PI / 2.0, 0.0, 0.0).unwrap());
        let psi = StateVector::superposition(&s, &[("010", ONE), ("110", ONE)]).unwrap();
        let out = g.apply(&psi).unwrap();
        let want = StateVector::superposition(&s, &[("010", ONE), ("101", ONE)]).unwrap();
        assert!((out.fidelity(&want) - 1.0).abs() < EPS);
    }

    #[test]
    fn drive_examples() {
        let lam = 1.3;
        let (p, t) = params_from_drive(&PhysicalCzDrive { lambda1: c(lam, 0.0), lambda2: c(lam, 0.0), delta: 0.0 }).unwrap();
        assert!((p.theta - PI / 2.0).abs() < EPS && (p.phi - PI).abs() < EPS && p.gamma == 0.0);
        assert!((t - PI / (2f64.sqrt() * lam)).abs() < EPS);

        let (p, t) = params_from_drive(&PhysicalCzDrive { lambda1: c(lam, 0.0), lambda2: ZERO, delta: 0.0 }).unwrap();
        assert!(p.theta.abs() < EPS && (t - PI / lam).abs() < EPS);

        let (k, phi) = (0.6, 0.4);
        let d = PhysicalCzDrive { lambda1: c(lam, 0.0), lambda2: -k * lam * C64::from_polar(1.0, -phi), delta: 0.0 };
        let (p, t) = params_from_drive(&d).unwrap();
        assert!((p.theta - 2.0 * k.atan()).abs() < EPS);
        assert!((p.phi - phi).abs() < EPS);
        assert!((t - PI / ((1.0 + k * k).sqrt() * lam)).abs() < EPS);

        let (p, _) = params_from_drive(&PhysicalCzDrive { lambda1: ZERO, lambda2: c(lam, 0.0), delta: 0.0 }).unwrap();
        assert_eq!((p.theta, p.phi), (PI, 0.0));
        assert!(params_from_drive(&PhysicalCzDrive { lambda1: ZERO, lambda2: ZERO, delta: 1.0 }).is_err());
    }

    #[test]
    fn div_examples() {
        let u = u_div_block(&DivParams { theta: PI / 4.0, varphi: PI / 2.0 });
        let h = FRAC_1_SQRT_2;
        let t = nd::arr2(&[
            [c(0.5, 0.0), c(0.0, -h), c(-0.5, 0.0)],
            [c(0.0, -h), ZERO, c(0.0, -h)],
            [c(-0.5, 0.0), c(0.0, -h), c(0.5, 0.0)],
        ]);
        assert!(max_abs_diff(&u.mat, &t) < EPS);
        let id = u_div_block(&DivParams { theta: 0.3, varphi: 0.0 });
        assert!(max_abs_diff(&id.mat, &nd::Array2::eye(3)) < EPS);

        let v = 1.1;
        let u = u_div_block(&DivParams { theta: PI / 4.0, varphi: v });
        let (s, co) = v.sin_cos();
        let t = nd::arr2(&[
            [c(0.5 * (1.0 + co), 0.0), c(0.0, -h * s), c(0.5 * (co - 1.0), 0.0)],
            [c(0.0, -h * s), c(co, 0.0), c(0.0, -h * s)],
            [c(0.5 * (co - 1.0), 0.0), c(0.0, -h * s), c(0.5 * (1.0 + co), 0.0)],
        ]);
        assert!(max_abs_diff(&u.mat, &t) < EPS);

        let g = div(&DivParams { theta: PI / 4.0, varphi: PI / 2.0 });
        let s3 = three_qubit_shape();
        let out = g.apply(&StateVector::ket(&s3, "010").unwrap()).unwrap();
        assert!((out.amp("010") - c(0.5, 0.0)).norm() < EPS);
        assert!((out.amp("100") - c(0.0, -h)).norm() < EPS);
        assert!((out.amp("001") - c(-0.5, 0.0)).norm() < EPS);
        for ket in ["000", "111"] {
            let out = g.apply(&StateVector::ket(&s3, ket).unwrap()).unwrap();
            assert!((out.amp(ket) - ONE).norm() < EPS);
        }
    }

    #[test]
    fn named_gate_examples() {
        assert!(max_abs_diff(&xy(PI, 0.0).mat, &iswap().mat) < EPS);
        let z = cz(0.0);
        assert!((z.mat[[3, 3]] + ONE).norm() < EPS);
        assert!(max_abs_diff(&u_iswap(0.0).mat, &nd::Array2::eye(4)) < EPS);
        for name in GATE_NAMES {
            let a = GateArgs { theta: Some(0.4), phi: Some(0.2), gamma: Some(0.1), beta: Some(0.3), varphi: Some(0.5) };
            let g = named_gate(name, &a).unwrap();
            assert!(g.unitarity_residual() < EPS, "{name}");
        }
        assert!(named_gate("nope", &GateArgs::default()).is_err());
        assert!(matches!(named_gate("xy", &GateArgs::default()), Err(GateError::MissingParam(_))));
    }

    #[test]
    fn decomposition_special_points() {
        let p = CczsParams::new(PI / 2.0, PI, 0.0).unwrap();
        assert!(xy_cz_residual(&p) <= 1e-10);
        let p = CczsParams::new(0.0, 0.0, 0.9).unwrap();
        let cz01 = on_pair(&cz(0.9), 0, 1);
        assert!(max_abs_diff(&xy_cz_rhs(&p).mat, &cz01.mat) < EPS);
        assert!(max_abs_diff(&cczs(&p).mat, &cz01.mat) < EPS);
    }

    #[test]
    fn constructions() {
        let f = construct_fredkin().unwrap();
        assert!(f.report.pass);
        let i = construct_ifredkin().unwrap();
        assert!(i.report.pass);
        assert!(i.report.note.contains("CCZS then CZ(q0,q2)"));
        assert!(i.report.residuals.iter().filter(|r| r.label.contains("(q1,q2)")).all(|r| r.residual > 0.1));
    }
}
