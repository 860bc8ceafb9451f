//! GHZ, W and Dicke state preparation circuits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::effective::{dicke_state, DickeModel};
use crate::error::SimError;
use crate::gates::{self, CczsParams, DivParams};
use crate::qudit::{embed, expm, hermitian_function, ops, Operator, RegisterShape, StateVector, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Ghz { n: usize },
    W { n: usize },
    Dicke { n: usize, k: usize },
    /// `sqrt(3/5)|1_0>|D_4^2> + sqrt(2/5)|0_0>|D_4^3>` with a qutrit `q0`.
    D53,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TargetState {
    pub kind: TargetKind,
}

impl TargetState {
    pub fn new(kind: TargetKind) -> Self {
        Self { kind }
    }

    pub fn shape(&self) -> RegisterShape {
        match self.kind {
            TargetKind::Ghz { n } | TargetKind::W { n } | TargetKind::Dicke { n, .. } => RegisterShape::qubits(n),
            TargetKind::D53 => DickeModel::uniform(4, 1.0).full_shape(),
        }
    }

    pub fn amplitudes(&self) -> StateVector {
        match self.kind {
            TargetKind::Ghz { n } => {
                let mut amps = nd::Array1::zeros(1 << n);
                amps[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                amps[(1 << n) - 1] = amps[0];
                StateVector::new(self.shape(), amps).unwrap()
            }
            TargetKind::W { n } => dicke_state(n, 1),
            TargetKind::Dicke { n, k } => dicke_state(n, k),
            TargetKind::D53 => {
                let d2 = dicke_state(4, 2);
                let d3 = dicke_state(4, 3);
                let mut amps = nd::Array1::zeros(48);
                for m in 0..16 {
                    amps[16 + m] = (0.6f64).sqrt() * d2.amps[m];
                    amps[m] = (0.4f64).sqrt() * d3.amps[m];
                }
                StateVector::new(self.shape(), amps).unwrap()
            }
        }
    }

    pub fn fidelity(&self, psi: &StateVector) -> f64 {
        self.amplitudes().fidelity(psi)
    }
}

#[derive(Clone, Debug)]
pub enum Step {
    /// Instantaneous or timed unitary on a subset of sites.
    Local { name: String, op: Operator, sites: Vec<usize>, duration: f64 },
    /// `exp(-i H t)` of a full-register Hamiltonian.
    Evolve { name: String, hamiltonian: Operator, duration: f64 },
}

impl Step {
    pub fn name(&self) -> &str {
        match self {
            Step::Local { name, .. } | Step::Evolve { name, .. } => name,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Step::Local { duration, .. } | Step::Evolve { duration, .. } => *duration,
        }
    }

    /// True when the step entangles more than one site.
    pub fn is_multi_site(&self) -> bool {
        match self {
            Step::Local { sites, .. } => sites.len() > 1,
            Step::Evolve { .. } => true,
        }
    }

    pub fn operator(&self, shape: &RegisterShape) -> Result<Operator, SimError> {
        Ok(match self {
            Step::Local { op, sites, .. } => embed(op, sites, shape)?,
            Step::Evolve { hamiltonian, duration, .. } => {
                if hamiltonian.shape.dims() != shape.dims() {
                    return Err(SimError::InvalidProtocol(format!("step '{}' has the wrong shape", self.name())));
                }
                expm(hamiltonian, *duration)?
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct Protocol {
    pub name: String,
    pub shape: RegisterShape,
    pub steps: Vec<Step>,
}

impl Protocol {
    pub fn new(name: &str, shape: RegisterShape) -> Self {
        Self { name: name.into(), shape, steps: Vec::new() }
    }

    fn local(mut self, name: &str, op: Operator, sites: &[usize]) -> Self {
        self.steps.push(Step::Local { name: name.into(), op, sites: sites.to_vec(), duration: 0.0 });
        self
    }

    fn timed(mut self, name: &str, op: Operator, sites: &[usize], duration: f64) -> Self {
        self.steps.push(Step::Local { name: name.into(), op, sites: sites.to_vec(), duration });
        self
    }

    fn evolve(mut self, name: &str, hamiltonian: Operator, duration: f64) -> Self {
        self.steps.push(Step::Evolve { name: name.into(), hamiltonian, duration });
        self
    }

    pub fn multi_site_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.is_multi_site()).count()
    }

    /// Sum of step durations; single-site rotations count as zero.
    pub fn evolution_time(&self) -> f64 {
        self.steps.iter().map(Step::duration).sum()
    }

    /// All-zero initial state on the protocol register.
    pub fn ground(&self) -> StateVector {
        StateVector::basis(&self.shape, &vec![0; self.shape.n_sites()]).unwrap()
    }
}

pub fn run_protocol(p: &Protocol, initial: &StateVector) -> Result<StateVector, SimError> {
    if initial.shape.dims() != p.shape.dims() {
        return Err(SimError::InvalidProtocol(format!(
            "initial state dims {:?} do not match protocol dims {:?}",
            initial.shape.dims(),
            p.shape.dims()
        )));
    }
    let mut psi = initial.clone();
    for s in &p.steps {
        psi = s.operator(&p.shape)?.apply(&psi)?;
    }
    Ok(psi)
}

/// Same as [`run_protocol`] but records the state after every step.
pub fn run_protocol_traced(p: &Protocol, initial: &StateVector) -> Result<Vec<StateVector>, SimError> {
    let mut out = vec![initial.clone()];
    for (k, s) in p.steps.iter().enumerate() {
        let next = s.operator(&p.shape)?.apply(&out[k])?;
        out.push(next);
    }
    Ok(out)
}

/// Squared norm of the components whose summed level index differs from `n`.
pub fn weight_outside_sector(psi: &StateVector, n: usize) -> f64 {
    psi.amps
        .iter()
        .enumerate()
        .filter(|(i, _)| psi.shape.digits(*i).iter().sum::<usize>() != n)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

pub fn ghz3_protocol() -> Protocol {
    ghz3_protocol_with(1.0)
}

/// GHZ3 circuit with the CCZS step timed for simultaneous couplings `lambda`.
pub fn ghz3_protocol_with(lambda: f64) -> Protocol {
    let p = CczsParams::new(PI / 2.0, 0.0, 0.0).unwrap();
    Protocol::new("ghz3", gates::three_qubit_shape())
        .local("H", gates::hadamard(), &[0])
        .local("X", gates::pauli_x(), &[1])
        .timed("CCZS(pi/2,0,0)", gates::cczs(&p), &[0, 1, 2], PI / (2f64.sqrt() * lambda))
        .local("X", gates::pauli_x(), &[1])
}

/// Duration of a GHZ3 preparation built from two sequential CZ gates.
pub fn two_cz_ghz_time(lambda: f64) -> f64 {
    2.0 * PI / lambda
}

fn qutrit_op(m: nd::Array2<C64>) -> Operator {
    let mut op = Operator::from_matrix(m);
    op.unitary = crate::qudit::Flag::Yes;
    op
}

/// `R_x` on levels `(0, 1)` of a qutrit sending `|1> -> -i sqrt(2/5)|0> + sqrt(3/5)|1>`.
pub fn d53_rotation() -> Operator {
    let c = (0.6f64).sqrt();
    let s = (0.4f64).sqrt();
    qutrit_op(ops::two_level(3, 0, 1, [[C64::new(c, 0.0), -I * s], [-I * s, C64::new(c, 0.0)]]))
}

fn swap_levels(a: usize, b: usize) -> Operator {
    qutrit_op(ops::two_level(3, a, b, [[ZERO, ONE], [ONE, ZERO]]))
}

pub fn dicke53_protocol() -> Protocol {
    dicke53_protocol_with(1.0)
}

pub fn dicke53_protocol_with(lambda: f64) -> Protocol {
    let model = DickeModel::uniform(4, lambda);
    let h = model.full_hamiltonian();
    let mut p = Protocol::new("dicke53", model.full_shape())
        .local("raise 0->2", swap_levels(0, 2), &[0])
        .evolve("cell", h.clone(), PI / (4.0 * lambda))
        .local("Rx(0,1)", d53_rotation(), &[0])
        .local("flip 1<->2", swap_levels(1, 2), &[0])
        .evolve("cell", h, PI / (2.0 * 6f64.sqrt() * lambda));
    for j in 1..=4 {
        p = p.local("X", gates::pauli_x(), &[j]);
    }
    p
}

/// First Dicke step with arbitrary couplings; spreads one excitation over the
/// neighbours with amplitudes proportional to the couplings.
pub fn tripod_protocol(lambdas: &[C64]) -> Protocol {
    let model = DickeModel { lambdas: lambdas.to_vec() };
    let omega = lambdas.iter().map(|l| l.norm_sqr()).sum::<f64>().sqrt();
    Protocol::new("tripod", model.full_shape())
        .local("raise 0->2", swap_levels(0, 2), &[0])
        .evolve("cell", model.full_hamiltonian(), PI / (2.0 * omega))
}

pub fn w_div_protocol() -> Protocol {
    w_div_protocol_with(PI / 4.0, 2f64.sqrt().atan())
}

pub fn w_div_protocol_with(theta: f64, varphi: f64) -> Protocol {
    Protocol::new("w3-div", gates::three_qubit_shape())
        .local("X", gates::pauli_x(), &[0])
        .local("DIV", gates::div(&DivParams { theta, varphi }), &[0, 1, 2])
        .local("S", gates::s_gate(), &[1])
        .local("S", gates::s_gate(), &[2])
}

// ---------------------------------------------------------------------------
// Grid scale-up on a sparse configuration map.

pub type Site = (i32, i32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    /// `|1_c 1_j> <-> |2_c 0_j>`; centres start in `|2>`.
    Cz,
    /// `|1_c 0_j> <-> |0_c 1_j>`; centres start in `|1>`.
    Iswap,
}

#[derive(Clone, Debug)]
pub enum GridStep {
    Cell { center: Site, neighbors: Vec<Site>, duration: f64 },
    Swap(Site, Site),
    /// Single-site unitary given as a level permutation-free matrix.
    Local { site: Site, name: String, op: nd::Array2<C64> },
}

#[derive(Clone, Debug)]
pub struct ScaleupProtocol {
    pub kind: CellKind,
    pub coupling: f64,
    pub sites: Vec<Site>,
    pub dims: Vec<usize>,
    pub initial: Vec<u8>,
    pub steps: Vec<GridStep>,
    /// Sites expected to carry `|D_N^1>` at the end.
    pub targets: Vec<Site>,
    /// Expected final level of every non-target site.
    pub rest_level: BTreeMap<Site, u8>,
}

fn adjacent(a: Site, b: Site) -> bool {
    (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1
}

/// `|0> -> |1> -> |2> -> |0>` on a qutrit.
pub fn cyclic_raise() -> nd::Array2<C64> {
    let mut m = nd::Array2::zeros((3, 3));
    m[[1, 0]] = ONE;
    m[[2, 1]] = ONE;
    m[[0, 2]] = ONE;
    m
}

const OUT: [Site; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl ScaleupProtocol {
    fn cell_time(&self, n: usize) -> f64 {
        PI / (2.0 * self.coupling * (n as f64).sqrt())
    }

    fn index_of(&self, s: Site) -> Result<usize, SimError> {
        self.sites
            .iter()
            .position(|&x| x == s)
            .ok_or_else(|| SimError::InvalidProtocol(format!("site {s:?} is not on the grid")))
    }

    /// One centre with `n` nearest neighbours (`n <= 4`).
    pub fn single_cell(n: usize, kind: CellKind, coupling: f64) -> Result<Self, SimError> {
        if n == 0 || n > 4 {
            return Err(SimError::InvalidProtocol(format!("a square-grid cell has 1 to 4 neighbours, got {n}")));
        }
        let nb: Vec<Site> = OUT[..n].to_vec();
        let mut sites = vec![(0, 0)];
        sites.extend(&nb);
        let mut dims = vec![2; sites.len()];
        let mut initial = vec![0u8; sites.len()];
        match kind {
            CellKind::Cz => {
                dims[0] = 3;
                initial[0] = 2;
            }
            CellKind::Iswap => initial[0] = 1,
        }
        let mut p = Self {
            kind,
            coupling,
            sites,
            dims,
            initial,
            steps: Vec::new(),
            targets: nb.clone(),
            rest_level: BTreeMap::new(),
        };
        p.rest_level.insert((0, 0), if kind == CellKind::Cz { 1 } else { 0 });
        let t = p.cell_time(n);
        p.steps.push(GridStep::Cell { center: (0, 0), neighbors: nb, duration: t });
        p.validate()?;
        Ok(p)
    }

    /// Two-stage spread onto 16 qubits: one cell, outward swaps, four cells.
    pub fn w16(kind: CellKind, coupling: f64) -> Result<Self, SimError> {
        let mut p = Self::single_cell(4, kind, coupling)?;
        p.rest_level.clear();
        p.rest_level.insert((0, 0), if kind == CellKind::Cz { 1 } else { 0 });
        let centres: Vec<Site> = OUT.iter().map(|d| (2 * d.0, 2 * d.1)).collect();
        let mut targets = Vec::new();
        for (d, &c) in OUT.iter().zip(&centres) {
            p.sites.push(c);
            p.dims.push(if kind == CellKind::Cz { 3 } else { 2 });
            p.initial.push(0);
            p.steps.push(GridStep::Swap((d.0, d.1), c));
            let nb: Vec<Site> = OUT.iter().map(|e| (c.0 + e.0, c.1 + e.1)).collect();
            for &s in &nb {
                if !p.sites.contains(&s) {
                    p.sites.push(s);
                    p.dims.push(2);
                    p.initial.push(0);
                }
            }
            targets.extend(nb);
        }
        if kind == CellKind::Cz {
            for &c in &centres {
                p.steps.push(GridStep::Local { site: c, name: "cyclic raise".into(), op: cyclic_raise() });
            }
        }
        let t = p.cell_time(4);
        for &c in &centres {
            let nb: Vec<Site> = OUT.iter().map(|e| (c.0 + e.0, c.1 + e.1)).collect();
            p.steps.push(GridStep::Cell { center: c, neighbors: nb, duration: t });
        }
        for &c in &centres {
            p.rest_level.insert(c, if kind == CellKind::Cz { 1 } else { 0 });
        }
        for d in OUT {
            p.rest_level.insert(d, 0);
        }
        p.targets = targets;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let uniq: BTreeSet<Site> = self.sites.iter().copied().collect();
        if uniq.len() != self.sites.len() {
            return Err(SimError::InvalidProtocol("duplicate grid site".into()));
        }
        for s in &self.steps {
            match s {
                GridStep::Cell { center, neighbors, .. } => {
                    let c = self.index_of(*center)?;
                    if self.kind == CellKind::Cz && self.dims[c] < 3 {
                        return Err(SimError::InvalidProtocol(format!("centre {center:?} needs three levels")));
                    }
                    for &n in neighbors {
                        self.index_of(n)?;
                        if !adjacent(*center, n) {
                            return Err(SimError::InvalidProtocol(format!("{n:?} is not adjacent to {center:?}")));
                        }
                    }
                }
                GridStep::Swap(a, b) => {
                    self.index_of(*a)?;
                    self.index_of(*b)?;
                    if !adjacent(*a, *b) {
                        return Err(SimError::InvalidProtocol(format!("swap {a:?}<->{b:?} is not between neighbours")));
                    }
                }
                GridStep::Local { site, op, .. } => {
                    let k = self.index_of(*site)?;
                    if op.nrows() != self.dims[k] {
                        return Err(SimError::InvalidProtocol(format!("operator on {site:?} has the wrong dimension")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SparseState {
        let mut amps = BTreeMap::new();
        amps.insert(self.initial.clone(), ONE);
        SparseState { amps }
    }

    pub fn total_time(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| if let GridStep::Cell { duration, .. } = s { *duration } else { 0.0 })
            .sum()
    }

    pub fn target_state(&self) -> SparseState {
        let n = self.targets.len() as f64;
        let mut base = vec![0u8; self.sites.len()];
        for (s, &l) in &self.rest_level {
            base[self.index_of(*s).unwrap()] = l;
        }
        let mut amps = BTreeMap::new();
        for t in &self.targets {
            let mut c = base.clone();
            c[self.index_of(*t).unwrap()] = 1;
            amps.insert(c, C64::new(1.0 / n.sqrt(), 0.0));
        }
        SparseState { amps }
    }

    pub fn run(&self) -> Result<ScaleupResult, SimError> {
        let mut psi = self.initial_state();
        let mut max_support = 1;
        for s in &self.steps {
            match s {
                GridStep::Swap(a, b) => {
                    let (i, j) = (self.index_of(*a)?, self.index_of(*b)?);
                    psi = psi.map_configs(|c| {
                        let mut c = c.clone();
                        c.swap(i, j);
                        c
                    });
                    for c in psi.amps.keys() {
                        if c[i] as usize >= self.dims[i] || c[j] as usize >= self.dims[j] {
                            return Err(SimError::InvalidProtocol(format!("swap {a:?}<->{b:?} overflows a site")));
                        }
                    }
                }
                GridStep::Local { site, op, .. } => {
                    psi = psi.apply_local(self.index_of(*site)?, op);
                }
                GridStep::Cell { center, neighbors, duration } => {
                    let c = self.index_of(*center)?;
                    let nb: Vec<usize> = neighbors.iter().map(|&n| self.index_of(n)).collect::<Result<_, _>>()?;
                    psi = self.apply_cell(&psi, c, &nb, *duration);
                }
            }
            max_support = max_support.max(psi.amps.len());
        }
        let target = self.target_state();
        Ok(ScaleupResult { fidelity: target.fidelity(&psi), norm: psi.norm(), max_support, state: psi })
    }

    /// Neighbour configurations reachable by one exchange, with the matrix element.
    fn moves(&self, cfg: &[u8], c: usize, nb: &[usize]) -> Vec<(Vec<u8>, f64)> {
        let mut out = Vec::new();
        for &j in nb {
            let (a, b) = (cfg[c], cfg[j]);
            let next = match self.kind {
                CellKind::Cz => match (a, b) {
                    (1, 1) => Some((2, 0)),
                    (2, 0) => Some((1, 1)),
                    _ => None,
                },
                CellKind::Iswap => match (a, b) {
                    (1, 0) => Some((0, 1)),
                    (0, 1) => Some((1, 0)),
                    _ => None,
                },
            };
            if let Some((na, nbv)) = next {
                let mut e = cfg.to_vec();
                e[c] = na;
                e[j] = nbv;
                out.push((e, self.coupling));
            }
        }
        out
    }

    fn apply_cell(&self, psi: &SparseState, c: usize, nb: &[usize], t: f64) -> SparseState {
        let mut out = SparseState::default();
        let mut done: BTreeSet<Vec<u8>> = BTreeSet::new();
        for start in psi.amps.keys() {
            if done.contains(start) {
                continue;
            }
            // Closed subspace reachable from `start` under the cell couplings.
            let mut basis = vec![start.clone()];
            let mut pos: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
            pos.insert(start.clone(), 0);
            let mut queue = VecDeque::from([start.clone()]);
            let mut edges = Vec::new();
            while let Some(cfg) = queue.pop_front() {
                let i = pos[&cfg];
                for (e, v) in self.moves(&cfg, c, nb) {
                    let j = *pos.entry(e.clone()).or_insert_with(|| {
                        basis.push(e.clone());
                        queue.push_back(e.clone());
                        basis.len() - 1
                    });
                    if i < j {
                        edges.push((i, j, v));
                    }
                }
            }
            let n = basis.len();
            let mut h = nd::Array2::<C64>::zeros((n, n));
            for (i, j, v) in edges {
                h[[i, j]] += v;
                h[[j, i]] += v;
            }
            let u = hermitian_function(&h, |l| C64::from_polar(1.0, -l * t));
            for (j, cfg) in basis.iter().enumerate() {
                done.insert(cfg.clone());
                if let Some(&a) = psi.amps.get(cfg) {
                    for (i, cfg_i) in basis.iter().enumerate() {
                        let v = u[[i, j]] * a;
                        if v.norm() > 1e-15 {
                            *out.amps.entry(cfg_i.clone()).or_insert(ZERO) += v;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Amplitudes keyed by the level of every grid site; absent keys are zero.
#[derive(Clone, Debug, Default)]
pub struct SparseState {
    pub amps: BTreeMap<Vec<u8>, C64>,
}

impl SparseState {
    pub fn norm(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b)).sum()
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn map_configs(&self, f: impl Fn(&Vec<u8>) -> Vec<u8>) -> Self {
        Self { amps: self.amps.iter().map(|(k, a)| (f(k), *a)).collect() }
    }

    fn apply_local(&self, site: usize, op: &nd::Array2<C64>) -> Self {
        let mut out = Self::default();
        for (k, a) in &self.amps {
            for r in 0..op.nrows() {
                let v = op[[r, k[site] as usize]] * a;
                if v != ZERO {
                    let mut k2 = k.clone();
                    k2[site] = r as u8;
                    *out.amps.entry(k2).or_insert(ZERO) += v;
                }
            }
        }
        out
    }

    /// Dense vector on a register with the given site dimensions.
    pub fn to_dense(&self, dims: &[usize]) -> StateVector {
        let shape = RegisterShape::with_dims(dims);
        let mut amps = nd::Array1::zeros(shape.total_dim());
        for (k, a) in &self.amps {
            let d: Vec<usize> = k.iter().map(|&x| x as usize).collect();
            amps[shape.index(&d).unwrap()] += a;
        }
        StateVector::new(shape, amps).unwrap()
    }
}

#[derive(Clone, Debug)]
pub struct ScaleupResult {
    pub state: SparseState,
    pub fidelity: f64,
    pub norm: f64,
    /// Largest number of nonzero configurations held at any point.
    pub max_support: usize,
}

pub const PROTOCOL_NAMES: &[&str] = &["ghz3", "dicke53", "w3-div", "w16-cz", "w16-iswap"];

/// Runs a named protocol and returns the final amplitudes (dense, when the
/// register is small enough) together with the fidelity to its target.
pub fn run_named(name: &str) -> Result<(Option<StateVector>, f64), SimError> {
    Ok(match name {
        "ghz3" => {
            let p = ghz3_protocol();
            let psi = run_protocol(&p, &p.ground())?;
            let f = TargetState::new(TargetKind::Ghz { n: 3 }).fidelity(&psi);
            (Some(psi), f)
        }
        "dicke53" => {
            let p = dicke53_protocol();
            let psi = run_protocol(&p, &p.ground())?;
            let f = TargetState::new(TargetKind::D53).fidelity(&psi);
            (Some(psi), f)
        }
        "w3-div" => {
            let p = w_div_protocol();
            let psi = run_protocol(&p, &p.ground())?;
            let f = TargetState::new(TargetKind::W { n: 3 }).fidelity(&psi);
            (Some(psi), f)
        }
        "w16-cz" => (None, ScaleupProtocol::w16(CellKind::Cz, 1.0)?.run()?.fidelity),
        "w16-iswap" => (None, ScaleupProtocol::w16(CellKind::Iswap, 1.0)?.run()?.fidelity),
        other => return Err(SimError::InvalidProtocol(format!("unknown protocol '{other}'"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz3() {
        let p = ghz3_protocol();
        let tr = run_protocol_traced(&p, &p.ground()).unwrap();
        let mid = StateVector::superposition(
            &p.shape,
            &[("010", C64::new(0.5f64.sqrt(), 0.0)), ("101", C64::new(0.5f64.sqrt(), 0.0))],
        )
        .unwrap();
        assert!((tr[3].fidelity(&mid) - 1.0).abs() < 1e-12);
        let t = TargetState::new(TargetKind::Ghz { n: 3 });
        assert!((t.fidelity(&tr[4]) - 1.0).abs() < 1e-12);
        assert_eq!(p.multi_site_steps(), 1);
        assert!((p.evolution_time() * 2.0 * 2f64.sqrt() - two_cz_ghz_time(1.0)).abs() < 1e-12);
        let wrong = run_protocol(&p, &StateVector::ket(&p.shape, "111").unwrap()).unwrap();
        assert!(t.fidelity(&wrong) < 1.0 - 1e-3);
    }

    #[test]
    fn dicke53() {
        let lam = 0.7;
        let p = dicke53_protocol_with(lam);
        let tr = run_protocol_traced(&p, &p.ground()).unwrap();
        let step1 = DickeModel::uniform(4, lam).symmetric_to_full(&{
            let mut v = nd::Array1::zeros(15);
            v[5 + 1] = ONE;
            v
        });
        assert!((tr[2].fidelity(&step1) - 1.0).abs() < 1e-12);
        let out = tr.last().unwrap();
        assert!((TargetState::new(TargetKind::D53).fidelity(out) - 1.0).abs() < 1e-10);
        assert!(weight_outside_sector(out, 3) < 1e-12);
    }

    #[test]
    fn tripod_weights() {
        let l = [C64::new(0.2, 0.0), C64::new(0.5, 0.1), C64::new(0.0, -0.3), C64::new(0.4, 0.0)];
        let p = tripod_protocol(&l);
        let psi = run_protocol(&p, &p.ground()).unwrap();
        let om: f64 = l.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for (j, lj) in l.iter().enumerate() {
            let idx = 16 + (1 << (3 - j));
            assert!((psi.amps[idx].norm() - lj.norm() / om).abs() < 1e-12);
        }
    }

    #[test]
    fn w_div() {
        let p = w_div_protocol();
        let psi = run_protocol(&p, &p.ground()).unwrap();
        assert!((TargetState::new(TargetKind::W { n: 3 }).fidelity(&psi) - 1.0).abs() < 1e-12);
        let q = w_div_protocol_with(0.0, PI / 2.0);
        let psi = run_protocol(&q, &q.ground()).unwrap();
        assert!((psi.amps[0b010].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaleup_single_cell_matches_dense() {
        for kind in [CellKind::Cz, CellKind::Iswap] {
            let p = ScaleupProtocol::single_cell(4, kind, 0.9).unwrap();
            let r = p.run().unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-12, "{kind:?}");
            if kind == CellKind::Cz {
                let dense = r.state.to_dense(&p.dims);
                let model = DickeModel::uniform(4, 0.9);
                let mut init = vec![0; 5];
                init[0] = 2;
                let psi = expm(&model.full_hamiltonian(), PI / (4.0 * 0.9))
                    .unwrap()
                    .apply(&StateVector::basis(&model.full_shape(), &init).unwrap())
                    .unwrap();
                assert!((dense.inner(&psi).norm() - 1.0).abs() < 1e-12);
            }
        }
        let one = ScaleupProtocol::single_cell(1, CellKind::Iswap, 1.0).unwrap().run().unwrap();
        assert!((one.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w16() {
        for kind in [CellKind::Cz, CellKind::Iswap] {
            let p = ScaleupProtocol::w16(kind, 1.3).unwrap();
            assert_eq!(p.targets.len(), 16);
            let r = p.run().unwrap();
            assert!((r.fidelity - 1.0).abs() < 1e-10, "{kind:?} {}", r.fidelity);
            assert!(r.max_support <= 16);
        }
    }

    #[test]
    fn bad_adjacency() {
        let mut p = ScaleupProtocol::single_cell(2, CellKind::Cz, 1.0).unwrap();
        p.sites.push((5, 5));
        p.dims.push(2);
        p.initial.push(0);
        p.steps.push(GridStep::Cell { center: (0, 0), neighbors: vec![(5, 5)], duration: 1.0 });
        assert!(p.validate().is_err());
    }
}
