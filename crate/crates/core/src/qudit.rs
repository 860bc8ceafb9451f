//! Dense linear algebra over registers of d-level systems.
//!
//! Basis states are ordered lexicographically with site 0 as the most
//! significant digit, so `|q0 q1 q2>` maps to `q0*d1*d2 + q1*d2 + q2`.

use ndarray as nd;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::AlgebraError;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default tolerance for algebraic identities.
pub const TOL_ALGEBRA: f64 = 1e-10;
/// Default tolerance for propagator-vs-closed-form comparisons.
pub const TOL_PROPAGATOR: f64 = 1e-8;

/// Per-site dimensions and labels of a register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterShape {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl RegisterShape {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self, AlgebraError> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(AlgebraError::BadShape(format!("every site needs dim >= 2, got {dims:?}")));
        }
        if labels.len() != dims.len() {
            return Err(AlgebraError::BadShape(format!(
                "{} labels for {} sites",
                labels.len(),
                dims.len()
            )));
        }
        Ok(Self { dims, labels })
    }

    /// Sites labelled `q0, q1, ...`.
    pub fn uniform(n: usize, d: usize) -> Self {
        let labels = (0..n).map(|k| format!("q{k}")).collect();
        Self::new(vec![d; n], labels).expect("uniform register")
    }

    pub fn qubits(n: usize) -> Self {
        Self::uniform(n, 2)
    }

    pub fn qutrits(n: usize) -> Self {
        Self::uniform(n, 3)
    }

    pub fn with_dims(dims: &[usize]) -> Self {
        let labels = (0..dims.len()).map(|k| format!("q{k}")).collect();
        Self::new(dims.to_vec(), labels).expect("register dims")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn site(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn index(&self, digits: &[usize]) -> Result<usize, AlgebraError> {
        if digits.len() != self.dims.len() {
            return Err(AlgebraError::BadShape(format!(
                "{} digits for {} sites",
                digits.len(),
                self.dims.len()
            )));
        }
        let mut idx = 0;
        for (k, (&x, &d)) in digits.iter().zip(&self.dims).enumerate() {
            if x >= d {
                return Err(AlgebraError::BadShape(format!("digit {x} out of range at site {k}")));
            }
            idx = idx * d + x;
        }
        Ok(idx)
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        out
    }

    /// Digit string such as `"110"`, used for labelling basis states.
    pub fn ket_label(&self, index: usize) -> String {
        self.digits(index).iter().map(|d| d.to_string()).collect()
    }

    pub fn parse_ket(&self, ket: &str) -> Result<usize, AlgebraError> {
        let digits: Option<Vec<usize>> =
            ket.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect();
        let digits = digits.ok_or_else(|| AlgebraError::BadShape(format!("bad ket '{ket}'")))?;
        self.index(&digits)
    }

    pub fn sub_shape(&self, sites: &[usize]) -> Self {
        Self {
            dims: sites.iter().map(|&s| self.dims[s]).collect(),
            labels: sites.iter().map(|&s| self.labels[s].clone()).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self { dims, labels }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    Yes,
    No,
    Unchecked,
}

/// Dense square operator on a register.
#[derive(Clone, Debug)]
pub struct Operator {
    pub shape: RegisterShape,
    pub mat: nd::Array2<C64>,
    pub hermitian: Flag,
    pub unitary: Flag,
}

impl Operator {
    pub fn new(shape: RegisterShape, mat: nd::Array2<C64>) -> Result<Self, AlgebraError> {
        let n = shape.total_dim();
        if mat.dim() != (n, n) {
            return Err(AlgebraError::DimensionMismatch { expected: n, found: mat.nrows() });
        }
        Ok(Self { shape, mat, hermitian: Flag::Unchecked, unitary: Flag::Unchecked })
    }

    /// Wraps a matrix on a register of qubits (dimension must be a power of two)
    /// or a single site of that dimension otherwise.
    pub fn from_matrix(mat: nd::Array2<C64>) -> Self {
        let n = mat.nrows();
        let shape = if n.is_power_of_two() && n >= 2 {
            RegisterShape::qubits(n.trailing_zeros() as usize)
        } else {
            RegisterShape::with_dims(&[n])
        };
        Self::new(shape, mat).expect("square matrix")
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let mut m = nd::Array2::zeros((n, n));
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        Self::from_matrix(m)
    }

    pub fn identity(shape: RegisterShape) -> Self {
        let n = shape.total_dim();
        let mut op = Self::new(shape, nd::Array2::eye(n)).unwrap();
        op.hermitian = Flag::Yes;
        op.unitary = Flag::Yes;
        op
    }

    pub fn zeros(shape: RegisterShape) -> Self {
        let n = shape.total_dim();
        Self::new(shape, nd::Array2::zeros((n, n))).unwrap()
    }

    pub fn diag(shape: RegisterShape, d: &[C64]) -> Self {
        let mut op = Self::zeros(shape);
        for (k, &v) in d.iter().enumerate() {
            op.mat[[k, k]] = v;
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn with_shape(mut self, shape: RegisterShape) -> Result<Self, AlgebraError> {
        if shape.total_dim() != self.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim(),
                found: shape.total_dim(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn dagger(&self) -> Self {
        let mat = self.mat.t().mapv(|z| z.conj());
        Self { shape: self.shape.clone(), mat, hermitian: self.hermitian, unitary: self.unitary }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.dim() != other.dim() {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let unitary = match (self.unitary, other.unitary) {
            (Flag::Yes, Flag::Yes) => Flag::Yes,
            _ => Flag::Unchecked,
        };
        Ok(Self {
            shape: self.shape.clone(),
            mat: self.mat.dot(&other.mat),
            hermitian: Flag::Unchecked,
            unitary,
        })
    }

    /// Product of a sequence of operators applied left to right in time order:
    /// `chain([a, b, c]) = c * b * a`.
    pub fn chain(ops: &[&Operator]) -> Result<Self, AlgebraError> {
        let mut it = ops.iter();
        let first = it.next().ok_or_else(|| AlgebraError::BadShape("empty chain".into()))?;
        let mut acc = (*first).clone();
        for op in it {
            acc = op.matmul(&acc)?;
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.dim() != other.dim() {
            return Err(AlgebraError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Self::new(self.shape.clone(), &self.mat + &other.mat)
    }

    pub fn scale(&self, z: C64) -> Self {
        Self::new(self.shape.clone(), self.mat.mapv(|x| x * z)).unwrap()
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim();
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                r = r.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        r
    }

    /// `max |U^dag U - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.mat.t().mapv(|z| z.conj()).dot(&self.mat);
        max_abs_deviation_from_identity(&g)
    }

    pub fn check_unitary(&mut self, tol: f64) -> bool {
        let ok = self.unitarity_residual() <= tol;
        self.unitary = if ok { Flag::Yes } else { Flag::No };
        ok
    }

    pub fn check_hermitian(&mut self, tol: f64) -> bool {
        let ok = self.hermiticity_residual() <= tol;
        self.hermitian = if ok { Flag::Yes } else { Flag::No };
        ok
    }

    pub fn get(&self, row: &str, col: &str) -> C64 {
        let i = self.shape.parse_ket(row).expect("row ket");
        let j = self.shape.parse_ket(col).expect("col ket");
        self.mat[[i, j]]
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector, AlgebraError> {
        if psi.amps.len() != self.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim(),
                found: psi.amps.len(),
            });
        }
        Ok(StateVector { shape: self.shape.clone(), amps: self.mat.dot(&psi.amps) })
    }

    /// Submatrix on the given basis indices.
    pub fn block(&self, idx: &[usize]) -> nd::Array2<C64> {
        let n = idx.len();
        nd::Array2::from_shape_fn((n, n), |(a, b)| self.mat[[idx[a], idx[b]]])
    }
}

fn max_abs_deviation_from_identity(g: &nd::Array2<C64>) -> f64 {
    let mut r: f64 = 0.0;
    for ((i, j), z) in g.indexed_iter() {
        let target = if i == j { ONE } else { ZERO };
        r = r.max((z - target).norm());
    }
    r
}

/// Entry-wise maximum of `|a - b|`.
pub fn max_abs_diff(a: &nd::Array2<C64>, b: &nd::Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Entry-wise distance after removing the global phase that maximizes `|Tr(A^dag B)|`.
pub fn phase_aligned_diff(a: &nd::Array2<C64>, b: &nd::Array2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let tr: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if tr.norm() > 1e-300 { tr / tr.norm() } else { ONE };
    a.iter().zip(b.iter()).map(|(x, y)| (x * ph - y).norm()).fold(0.0, f64::max)
}

/// Equality up to global phase within `tol`.
pub fn equal_up_to_phase(a: &Operator, b: &Operator, tol: f64) -> bool {
    a.dim() == b.dim() && phase_aligned_diff(&a.mat, &b.mat) <= tol
}

pub fn equal_exact(a: &Operator, b: &Operator, tol: f64) -> bool {
    a.dim() == b.dim() && max_abs_diff(&a.mat, &b.mat) <= tol
}

/// Tensor product; site order follows the argument order.
pub fn kron(ops: &[&Operator]) -> Result<Operator, AlgebraError> {
    let mut it = ops.iter();
    let first = it.next().ok_or_else(|| AlgebraError::BadShape("empty kron".into()))?;
    let mut shape = first.shape.clone();
    let mut mat = first.mat.clone();
    let mut unitary = first.unitary;
    for op in it {
        mat = kron_mat(&mat, &op.mat);
        shape = shape.concat(&op.shape);
        if op.unitary != Flag::Yes {
            unitary = Flag::Unchecked;
        }
    }
    let mut out = Operator::new(shape, mat)?;
    out.unitary = unitary;
    Ok(out)
}

pub fn kron_mat(a: &nd::Array2<C64>, b: &nd::Array2<C64>) -> nd::Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = nd::Array2::zeros((ra * rb, ca * cb));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let mut blk = out.slice_mut(nd::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
        blk.zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

/// Embeds an operator acting on `sites` (in the given order) into `shape`.
pub fn embed(op: &Operator, sites: &[usize], shape: &RegisterShape) -> Result<Operator, AlgebraError> {
    let sub = shape.sub_shape(sites);
    if sub.total_dim() != op.dim() {
        return Err(AlgebraError::DimensionMismatch { expected: sub.total_dim(), found: op.dim() });
    }
    for (k, &s) in sites.iter().enumerate() {
        if s >= shape.n_sites() || sites[..k].contains(&s) {
            return Err(AlgebraError::BadShape(format!("bad site list {sites:?}")));
        }
    }
    let n = shape.total_dim();
    let rest: Vec<usize> = (0..shape.n_sites()).filter(|s| !sites.contains(s)).collect();
    let mut mat = nd::Array2::zeros((n, n));
    for col in 0..n {
        let dc = shape.digits(col);
        let sub_c = sub.index(&sites.iter().map(|&s| dc[s]).collect::<Vec<_>>()).unwrap();
        for sub_r in 0..sub.total_dim() {
            let v = op.mat[[sub_r, sub_c]];
            if v == ZERO {
                continue;
            }
            let dr_sub = sub.digits(sub_r);
            let mut dr = dc.clone();
            for (k, &s) in sites.iter().enumerate() {
                dr[s] = dr_sub[k];
            }
            debug_assert!(rest.iter().all(|&s| dr[s] == dc[s]));
            let row = shape.index(&dr).unwrap();
            mat[[row, col]] = v;
        }
    }
    let mut out = Operator::new(shape.clone(), mat)?;
    out.unitary = if op.unitary == Flag::Yes { Flag::Yes } else { Flag::Unchecked };
    out.hermitian = if op.hermitian == Flag::Yes { Flag::Yes } else { Flag::Unchecked };
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending and
/// eigenvectors as columns.
pub fn eigh(h: &nd::Array2<C64>) -> (Vec<f64>, nd::Array2<C64>) {
    let n = h.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[[i, j]] + h[[j, i]].conj()));
    let eig = nalgebra::linalg::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = nd::Array2::from_shape_fn((n, n), |(i, k)| eig.eigenvectors[(i, order[k])]);
    (vals, vecs)
}

/// `V diag(f(lambda)) V^dag` for a Hermitian matrix.
pub fn hermitian_function(h: &nd::Array2<C64>, f: impl Fn(f64) -> C64) -> nd::Array2<C64> {
    let (vals, v) = eigh(h);
    let mut vf = v.clone();
    for (k, &l) in vals.iter().enumerate() {
        let s = f(l);
        vf.column_mut(k).mapv_inplace(|z| z * s);
    }
    vf.dot(&v.t().mapv(|z| z.conj()))
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm(h: &Operator, t: f64) -> Result<Operator, AlgebraError> {
    let scale = h.mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let res = h.hermiticity_residual();
    if res > 1e-12 * scale {
        return Err(AlgebraError::NotHermitian(res));
    }
    let mat = hermitian_function(&h.mat, |l| C64::from_polar(1.0, -l * t));
    let mut out = Operator::new(h.shape.clone(), mat)?;
    out.unitary = Flag::Yes;
    Ok(out)
}

/// Levels {0,1} on the chosen qubit sites, level 0 on every other site.
#[derive(Clone, Debug)]
pub struct ComputationalProjector {
    pub shape: RegisterShape,
    pub qubit_sites: Vec<usize>,
    indices: Vec<usize>,
}

impl ComputationalProjector {
    pub fn new(shape: &RegisterShape, qubit_sites: &[usize]) -> Result<Self, AlgebraError> {
        if qubit_sites.iter().any(|&s| s >= shape.n_sites()) {
            return Err(AlgebraError::BadShape(format!("qubit sites {qubit_sites:?} out of range")));
        }
        let q = qubit_sites.len();
        let mut indices = Vec::with_capacity(1 << q);
        for bits in 0..(1usize << q) {
            let mut digits = vec![0; shape.n_sites()];
            for (k, &s) in qubit_sites.iter().enumerate() {
                digits[s] = (bits >> (q - 1 - k)) & 1;
            }
            indices.push(shape.index(&digits)?);
        }
        Ok(Self { shape: shape.clone(), qubit_sites: qubit_sites.to_vec(), indices })
    }

    /// All sites as qubits.
    pub fn all(shape: &RegisterShape) -> Self {
        let sites: Vec<usize> = (0..shape.n_sites()).collect();
        Self::new(shape, &sites).unwrap()
    }

    pub fn n(&self) -> usize {
        self.indices.len()
    }

    /// Full-register basis indices of the computational states, in qubit order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn matrix(&self) -> Operator {
        let mut d = vec![ZERO; self.shape.total_dim()];
        for &i in &self.indices {
            d[i] = ONE;
        }
        Operator::diag(self.shape.clone(), &d)
    }

    pub fn sub_shape(&self) -> RegisterShape {
        let labels = self.qubit_sites.iter().map(|&s| self.shape.labels()[s].clone()).collect();
        RegisterShape::new(vec![2; self.qubit_sites.len()], labels).unwrap()
    }
}

/// The `n x n` block of `m_full` on the computational subspace.
pub fn project_computational(m_full: &Operator, p: &ComputationalProjector) -> Result<Operator, AlgebraError> {
    if m_full.dim() != p.shape.total_dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: p.shape.total_dim(),
            found: m_full.dim(),
        });
    }
    Operator::new(p.sub_shape(), m_full.block(p.indices()))
}

/// Pure state on a register.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub shape: RegisterShape,
    pub amps: nd::Array1<C64>,
}

impl StateVector {
    pub fn new(shape: RegisterShape, amps: nd::Array1<C64>) -> Result<Self, AlgebraError> {
        if amps.len() != shape.total_dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: shape.total_dim(),
                found: amps.len(),
            });
        }
        Ok(Self { shape, amps })
    }

    pub fn basis(shape: &RegisterShape, digits: &[usize]) -> Result<Self, AlgebraError> {
        let mut amps = nd::Array1::zeros(shape.total_dim());
        amps[shape.index(digits)?] = ONE;
        Ok(Self { shape: shape.clone(), amps })
    }

    pub fn ket(shape: &RegisterShape, ket: &str) -> Result<Self, AlgebraError> {
        let mut amps = nd::Array1::zeros(shape.total_dim());
        amps[shape.parse_ket(ket)?] = ONE;
        Ok(Self { shape: shape.clone(), amps })
    }

    /// Normalized superposition of basis kets with the given coefficients.
    pub fn superposition(shape: &RegisterShape, terms: &[(&str, C64)]) -> Result<Self, AlgebraError> {
        let mut amps = nd::Array1::zeros(shape.total_dim());
        for (ket, c) in terms {
            amps[shape.parse_ket(ket)?] += *c;
        }
        let mut s = Self { shape: shape.clone(), amps };
        s.normalize();
        Ok(s)
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.mapv_inplace(|z| z / n);
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn amp(&self, ket: &str) -> C64 {
        self.amps[self.shape.parse_ket(ket).expect("ket")]
    }

    pub fn population(&self, ket: &str) -> f64 {
        self.amp(ket).norm_sqr()
    }

    /// Reduced density matrix of one site.
    pub fn reduced(&self, site: usize) -> nd::Array2<C64> {
        let d = self.shape.dims()[site];
        let mut rho = nd::Array2::zeros((d, d));
        let n = self.shape.total_dim();
        let stride = self.shape.strides()[site];
        for i in 0..n {
            let a = (i / stride) % d;
            if a != 0 {
                continue;
            }
            for x in 0..d {
                for y in 0..d {
                    rho[[x, y]] += self.amps[i + x * stride] * self.amps[i + y * stride].conj();
                }
            }
        }
        rho
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let p = digits - 1 - mag;
    if p > 300 {
        return x;
    }
    let f = 10f64.powi(p);
    let r = (x * f).round() / f;
    if r == 0.0 { 0.0 } else { r }
}

/// Serialized operator: shape plus row-major `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorDump {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub entries: Vec<Vec<[f64; 2]>>,
}

/// Serialized state vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateDump {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub amplitudes: Vec<[f64; 2]>,
}

impl Operator {
    pub fn to_dump(&self, sig: i32) -> OperatorDump {
        let entries = self
            .mat
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| [round_sig(z.re, sig), round_sig(z.im, sig)]).collect())
            .collect();
        OperatorDump {
            dims: self.shape.dims().to_vec(),
            labels: self.shape.labels().to_vec(),
            entries,
        }
    }

    pub fn from_dump(d: &OperatorDump) -> Result<Self, AlgebraError> {
        let shape = RegisterShape::new(d.dims.clone(), d.labels.clone())?;
        let n = shape.total_dim();
        if d.entries.len() != n || d.entries.iter().any(|r| r.len() != n) {
            return Err(AlgebraError::DimensionMismatch { expected: n, found: d.entries.len() });
        }
        let mat = nd::Array2::from_shape_fn((n, n), |(i, j)| {
            C64::new(d.entries[i][j][0], d.entries[i][j][1])
        });
        Operator::new(shape, mat)
    }
}

impl StateVector {
    pub fn to_dump(&self, sig: i32) -> StateDump {
        StateDump {
            dims: self.shape.dims().to_vec(),
            labels: self.shape.labels().to_vec(),
            amplitudes: self.amps.iter().map(|z| [round_sig(z.re, sig), round_sig(z.im, sig)]).collect(),
        }
    }
}

/// Common single-site operators.
pub mod ops {
    use super::*;

    /// Annihilation operator truncated to `d` levels.
    pub fn annihilation(d: usize) -> nd::Array2<C64> {
        let mut a = nd::Array2::zeros((d, d));
        for n in 1..d {
            a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn number(d: usize) -> nd::Array2<C64> {
        nd::Array2::from_diag(&nd::Array1::from_iter((0..d).map(|n| C64::new(n as f64, 0.0))))
    }

    /// `|m><n|` on a `d`-level site.
    pub fn ketbra(d: usize, m: usize, n: usize) -> nd::Array2<C64> {
        let mut s = nd::Array2::zeros((d, d));
        s[[m, n]] = ONE;
        s
    }

    /// Two-level unitary `u` acting on levels `(a, b)` of a `d`-level site.
    pub fn two_level(d: usize, a: usize, b: usize, u: [[C64; 2]; 2]) -> nd::Array2<C64> {
        let mut m = nd::Array2::eye(d);
        m[[a, a]] = u[0][0];
        m[[a, b]] = u[0][1];
        m[[b, a]] = u[1][0];
        m[[b, b]] = u[1][1];
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn index_round_trip() {
        let s = RegisterShape::with_dims(&[3, 2, 4]);
        for i in 0..s.total_dim() {
            assert_eq!(s.index(&s.digits(i)).unwrap(), i);
        }
        assert_eq!(s.index(&[1, 0, 2]).unwrap(), 10);
        assert_eq!(s.ket_label(10), "102");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RegisterShape::new(vec![1, 2], vec!["a".into(), "b".into()]).is_err());
        assert!(RegisterShape::new(vec![], vec![]).is_err());
        assert!(RegisterShape::with_dims(&[2, 2]).index(&[2, 0]).is_err());
    }

    #[test]
    fn kron_identity_and_flip() {
        let i2 = Operator::identity(RegisterShape::qubits(1));
        let k = kron(&[&i2, &i2]).unwrap();
        assert!(max_abs_diff(&k.mat, &nd::Array2::eye(4)) == 0.0);
        let x = Operator::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
        let xx = kron(&[&x, &x]).unwrap();
        let out = xx.apply(&StateVector::ket(&xx.shape, "00").unwrap()).unwrap();
        assert_eq!(out.amp("11"), ONE);
    }

    #[test]
    fn expm_rabi_half_period() {
        let lam = 0.7;
        let h = Operator::from_rows(&[&[ZERO, c(lam, 0.0)], &[c(lam, 0.0), ZERO]]);
        let u = expm(&h, std::f64::consts::PI / (2.0 * lam)).unwrap();
        let target = nd::arr2(&[[ZERO, -I], [-I, ZERO]]);
        assert!(max_abs_diff(&u.mat, &target) < 1e-14);
        let z = expm(&Operator::zeros(RegisterShape::qutrits(2)), 3.0).unwrap();
        assert!(max_abs_diff(&z.mat, &nd::Array2::eye(9)) < 1e-15);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let h = Operator::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
        assert!(matches!(expm(&h, 1.0), Err(AlgebraError::NotHermitian(_))));
    }

    #[test]
    fn embed_matches_kron_for_adjacent_sites() {
        let shape = RegisterShape::qubits(3);
        let x = Operator::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
        let e = embed(&x, &[1], &shape).unwrap();
        let i2 = Operator::identity(RegisterShape::qubits(1));
        let k = kron(&[&i2, &x, &i2]).unwrap();
        assert_eq!(max_abs_diff(&e.mat, &k.mat), 0.0);
    }

    #[test]
    fn embed_respects_site_order() {
        // CNOT with control on site 2 and target on site 0.
        let cnot = Operator::from_rows(&[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ZERO, ONE],
            &[ZERO, ZERO, ONE, ZERO],
        ]);
        let shape = RegisterShape::qubits(3);
        let e = embed(&cnot, &[2, 0], &shape).unwrap();
        let out = e.apply(&StateVector::ket(&shape, "001").unwrap()).unwrap();
        assert_eq!(out.amp("101"), ONE);
    }

    #[test]
    fn projector_identity_and_leak() {
        let shape = RegisterShape::qutrits(3);
        let p = ComputationalProjector::all(&shape);
        assert_eq!(p.n(), 8);
        let m = project_computational(&Operator::identity(shape.clone()), &p).unwrap();
        assert!(max_abs_diff(&m.mat, &nd::Array2::eye(8)) == 0.0);

        let mut swap = Operator::identity(shape.clone());
        let a = shape.parse_ket("110").unwrap();
        let b = shape.parse_ket("200").unwrap();
        swap.mat[[a, a]] = ZERO;
        swap.mat[[b, b]] = ZERO;
        swap.mat[[a, b]] = ONE;
        swap.mat[[b, a]] = ONE;
        let m = project_computational(&swap, &p).unwrap();
        let k = 6; // |110> in qubit order
        assert!(m.mat.row(k).iter().all(|z| *z == ZERO));
        assert!(m.mat.column(k).iter().all(|z| *z == ZERO));

        let pm = p.matrix();
        assert!(max_abs_diff(&pm.matmul(&pm).unwrap().mat, &pm.mat) == 0.0);
    }

    #[test]
    fn phase_alignment() {
        let a = nd::arr2(&[[ONE, ZERO], [ZERO, I]]);
        let b = a.mapv(|z| z * C64::from_polar(1.0, 0.3));
        assert!(phase_aligned_diff(&a, &b) < 1e-15);
        assert!(max_abs_diff(&a, &b) > 0.1);
    }

    #[test]
    fn dump_round_trip() {
        let h = Operator::from_rows(&[&[c(0.1, 0.2), c(1.0 / 3.0, 0.0)], &[ZERO, c(-2.0, 1e-20)]]);
        let d = h.to_dump(12);
        assert_eq!(d.entries[0][1][0], 0.333333333333);
        let back = Operator::from_dump(&d).unwrap();
        assert!(max_abs_diff(&back.mat, &h.mat) < 1e-12);
    }

    #[test]
    fn round_sig_digits() {
        assert_eq!(round_sig(123456.789, 3), 123000.0);
        assert_eq!(round_sig(-0.000123456, 2), -0.00012);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }
}
