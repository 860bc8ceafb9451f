//! Split-operator propagation of `H(t) = H_s + sum_k f_k(t) diag(d_k)`.
//!
//! The static part is exponentiated exactly per connected block of `H_s`; the
//! diagonal drive part is exponentiated exactly using Gauss-Legendre
//! integrals of `f_k`. Strang steps are composed into a fourth-order scheme.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray as nd;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::device::{DeviceModel, Drive};
use crate::error::SimError;
use crate::qudit::{eigh, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Second order.
    Strang,
    /// Five-stage symmetric composition of Strang steps, fourth order.
    Suzuki4,
}

impl Scheme {
    fn weights(self) -> Vec<f64> {
        match self {
            Scheme::Strang => vec![1.0],
            Scheme::Suzuki4 => {
                let s1 = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
                let s0 = 1.0 - 4.0 * s1;
                vec![s1, s1, s0, s1, s1]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Largest step, ns.
    pub dt: f64,
    pub scheme: Scheme,
    /// When set, the run is repeated at `dt / 2` and rejected if any
    /// propagated amplitude changes by more than this.
    pub halving_tolerance: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { dt: 0.02, scheme: Scheme::Suzuki4, halving_tolerance: None }
    }
}

impl StepControl {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn checked(mut self, tol: f64) -> Self {
        self.halving_tolerance = Some(tol);
        self
    }
}

struct Block {
    idx: Vec<usize>,
    evals: Vec<f64>,
    evecs: nd::Array2<C64>,
    tuple_of_row: Vec<usize>,
    tuples: Vec<Vec<f64>>,
}

type ExpCache = HashMap<(u64, Scheme), Arc<Vec<Vec<nd::Array2<C64>>>>>;

/// Prepared propagation engine for one static Hamiltonian.
pub struct Simulator {
    dim: usize,
    n_drives: usize,
    blocks: Vec<Block>,
    cache: Mutex<ExpCache>,
}

/// Connected components of the off-diagonal pattern of `h`.
pub fn connected_blocks(h: &nd::Array2<C64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h[[i, j]] != ZERO || h[[j, i]] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

const GL_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// `int_a^b f_k(t) dt` for every drive, split at envelope kinks.
fn drive_integral(drive: &dyn Drive, a: f64, b: f64, kinks: &[f64], buf: &mut [f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    pts.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    pts.push(hi);
    for w in pts.windows(2) {
        let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for q in 0..3 {
            drive.values(c + r * GL_X[q], buf);
            for k in 0..out.len() {
                out[k] += sign * r * GL_W[q] * buf[k];
            }
        }
    }
}

impl Simulator {
    pub fn new(model: &DeviceModel) -> Self {
        let dim = model.dim();
        let mut blocks = Vec::new();
        for idx in connected_blocks(&model.h_static) {
            let hb = nd::Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| model.h_static[[idx[i], idx[j]]]);
            let (evals, evecs) = eigh(&hb);
            let mut tuples: Vec<Vec<f64>> = Vec::new();
            let mut tuple_of_row = Vec::with_capacity(idx.len());
            for &r in &idx {
                let t: Vec<f64> = model.drive_diags.iter().map(|d| d[r]).collect();
                let k = match tuples.iter().position(|x| *x == t) {
                    Some(k) => k,
                    None => {
                        tuples.push(t);
                        tuples.len() - 1
                    }
                };
                tuple_of_row.push(k);
            }
            blocks.push(Block { idx, evals, evecs, tuple_of_row, tuples });
        }
        Self { dim, n_drives: model.drive_diags.len(), blocks, cache: Mutex::new(HashMap::new()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.idx.len()).collect()
    }

    fn exp_tables(&self, h: f64, scheme: Scheme) -> Arc<Vec<Vec<nd::Array2<C64>>>> {
        let key = (h.to_bits(), scheme);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let mut uniq: Vec<f64> = Vec::new();
        for w in scheme.weights() {
            if !uniq.contains(&w) {
                uniq.push(w);
            }
        }
        let tabs: Vec<Vec<nd::Array2<C64>>> = self
            .blocks
            .iter()
            .map(|b| {
                uniq.iter()
                    .map(|&w| {
                        let mut vf = b.evecs.clone();
                        for (k, &l) in b.evals.iter().enumerate() {
                            let ph = C64::from_polar(1.0, -l * w * h);
                            vf.column_mut(k).mapv_inplace(|z| z * ph);
                        }
                        vf.dot(&b.evecs.t().mapv(|z| z.conj()))
                    })
                    .collect()
            })
            .collect();
        let arc = Arc::new(tabs);
        let mut c = self.cache.lock().unwrap();
        if c.len() > 16 {
            c.clear();
        }
        c.insert(key, arc.clone());
        arc
    }

    /// Evolves the columns of `state` (full-space kets) from `t0` to `t1`.
    pub fn evolve(&self, state: &mut nd::Array2<C64>, t0: f64, t1: f64, ctrl: &StepControl, drive: &dyn Drive) {
        assert_eq!(state.nrows(), self.dim, "state has the wrong dimension");
        assert_eq!(drive.n_drives(), self.n_drives, "drive count does not match the model");
        if t1 <= t0 {
            return;
        }
        let n_steps = (((t1 - t0) / ctrl.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n_steps as f64;
        let weights = ctrl.scheme.weights();
        let mut uniq: Vec<f64> = Vec::new();
        for &w in &weights {
            if !uniq.contains(&w) {
                uniq.push(w);
            }
        }
        let which: Vec<usize> = weights.iter().map(|w| uniq.iter().position(|u| u == w).unwrap()).collect();
        let tabs = self.exp_tables(h, ctrl.scheme);

        // Midpoints of every A sub-step, then drive integrals between them.
        let m = weights.len();
        let mut mids = Vec::with_capacity(n_steps * m);
        for s in 0..n_steps {
            let mut tau = t0 + s as f64 * h;
            for &w in &weights {
                mids.push(tau + 0.5 * w * h);
                tau += w * h;
            }
        }
        let kinks = drive.breakpoints();
        let nd_ = self.n_drives;
        let mut ints = vec![0.0; (mids.len() + 1) * nd_];
        let mut buf = vec![0.0; nd_];
        let mut prev = t0;
        for (k, &mid) in mids.iter().chain(std::iter::once(&t1)).enumerate() {
            drive_integral(drive, prev, mid, &kinks, &mut buf, &mut ints[k * nd_..(k + 1) * nd_]);
            prev = mid;
        }

        for (bi, b) in self.blocks.iter().enumerate() {
            let cols: Vec<usize> =
                (0..state.ncols()).filter(|&c| b.idx.iter().any(|&r| state[[r, c]] != ZERO)).collect();
            if cols.is_empty() {
                continue;
            }
            let nb = b.idx.len();
            let mut x = nd::Array2::from_shape_fn((nb, cols.len()), |(i, j)| state[[b.idx[i], cols[j]]]);
            let mut y = nd::Array2::<C64>::zeros((nb, cols.len()));
            let mut tphase = vec![ZERO; b.tuples.len()];
            let apply_b = |x: &mut nd::Array2<C64>, seg: usize, tphase: &mut Vec<C64>| {
                let f = &ints[seg * nd_..(seg + 1) * nd_];
                for (k, t) in b.tuples.iter().enumerate() {
                    let a: f64 = t.iter().zip(f).map(|(d, v)| d * v).sum();
                    tphase[k] = C64::from_polar(1.0, -a);
                }
                for (i, mut row) in x.rows_mut().into_iter().enumerate() {
                    let p = tphase[b.tuple_of_row[i]];
                    row.mapv_inplace(|z| z * p);
                }
            };
            for (seg, &w) in which.iter().cycle().take(mids.len()).enumerate() {
                apply_b(&mut x, seg, &mut tphase);
                nd::linalg::general_mat_mul(C64::new(1.0, 0.0), &tabs[bi][w], &x, ZERO, &mut y);
                std::mem::swap(&mut x, &mut y);
            }
            apply_b(&mut x, mids.len(), &mut tphase);
            for (j, &c) in cols.iter().enumerate() {
                for (i, &r) in b.idx.iter().enumerate() {
                    state[[r, c]] = x[[i, j]];
                }
            }
        }
    }

    /// Evolves over `[0, drive.end()]`, optionally verifying by step halving.
    pub fn propagate(&self, state: &nd::Array2<C64>, ctrl: &StepControl, drive: &dyn Drive) -> Result<nd::Array2<C64>, SimError> {
        let mut out = state.clone();
        self.evolve(&mut out, 0.0, drive.end(), ctrl, drive);
        if let Some(tol) = ctrl.halving_tolerance {
            let half = StepControl { dt: ctrl.dt / 2.0, ..*ctrl };
            let mut fine = state.clone();
            self.evolve(&mut fine, 0.0, drive.end(), &half, drive);
            let change = out.iter().zip(fine.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if change > tol {
                return Err(SimError::NotConverged { change, target: tol });
            }
            out = fine;
        }
        Ok(out)
    }

    /// Full propagator over `[0, drive.end()]`.
    pub fn full_propagator(&self, ctrl: &StepControl, drive: &dyn Drive) -> Result<nd::Array2<C64>, SimError> {
        self.propagate(&nd::Array2::eye(self.dim), ctrl, drive)
    }

    /// Eigenstates of `H_s` labelled by the bare state they overlap most with.
    pub fn dressed_frame(&self) -> DressedFrame {
        let mut energies = vec![0.0; self.dim];
        let mut vectors = nd::Array2::<C64>::zeros((self.dim, self.dim));
        for b in &self.blocks {
            let nb = b.idx.len();
            let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(nb * nb);
            for i in 0..nb {
                for k in 0..nb {
                    pairs.push((b.evecs[[i, k]].norm_sqr(), i, k));
                }
            }
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut used_i = vec![false; nb];
            let mut used_k = vec![false; nb];
            for (_, i, k) in pairs {
                if used_i[i] || used_k[k] {
                    continue;
                }
                used_i[i] = true;
                used_k[k] = true;
                let ph = b.evecs[[i, k]].conj() / b.evecs[[i, k]].norm();
                let bare = b.idx[i];
                energies[bare] = b.evals[k];
                for (r, &row) in b.idx.iter().enumerate() {
                    vectors[[row, bare]] = b.evecs[[r, k]] * ph;
                }
            }
        }
        DressedFrame { energies, vectors }
    }
}

/// Dressed eigenbasis of the static Hamiltonian indexed by bare label.
#[derive(Clone, Debug)]
pub struct DressedFrame {
    pub energies: Vec<f64>,
    /// Column `a` is the dressed state adiabatically connected to bare state `a`.
    pub vectors: nd::Array2<C64>,
}

impl DressedFrame {
    pub fn columns(&self, bare: &[usize]) -> nd::Array2<C64> {
        nd::Array2::from_shape_fn((self.vectors.nrows(), bare.len()), |(i, j)| self.vectors[[i, bare[j]]])
    }

    /// `<a| e^{i H_s T} |psi>` for every dressed label `a` in `bare` and every column of `psi`.
    pub fn project(&self, psi: &nd::Array2<C64>, bare: &[usize], t: f64) -> nd::Array2<C64> {
        let v = self.columns(bare);
        let mut m = v.t().mapv(|z| z.conj()).dot(psi);
        for (a, &lbl) in bare.iter().enumerate() {
            let ph = C64::from_polar(1.0, self.energies[lbl] * t);
            m.row_mut(a).mapv_inplace(|z| z * ph);
        }
        m
    }

    /// Transition energy between two dressed labels.
    pub fn gap(&self, a: usize, b: usize) -> f64 {
        self.energies[a] - self.energies[b]
    }
}
