//! Dense complex linear algebra and open-system propagation.
//!
//! Composite systems use a Kronecker ordering in which the left operand is
//! the slower-varying index: for dims `[d0, d1, ...]`, subsystem 0 is the
//! most significant digit of a basis index.

mod lindblad;
mod ode;

pub(crate) use lindblad::propagate_operator;
pub use lindblad::{propagate, propagate_state, Collapse, Propagator, PropagatorKind};
pub use ode::{IntegrationStats, IntegratorOptions};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

fn dims_product(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// A pure state over an ordered tensor-product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let total = dims_product(&dims);
        if total != amplitudes.len() || dims.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, dims })
    }

    /// Builds the state and rescales it to unit norm.
    pub fn normalized(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "zero vector cannot be normalized".into(),
            ));
        }
        Self::new(amplitudes / C64::from(norm), dims)
    }

    pub fn from_slice(amplitudes: &[C64], dims: Vec<usize>) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes), dims)
    }

    /// Computational basis vector `index`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let total = dims_product(&dims);
        if index >= total {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {total}"
            )));
        }
        let mut amps = CVector::zeros(total);
        amps[index] = ONE;
        Self::new(amps, dims)
    }

    /// `n` qubits in `|0...0>`.
    pub fn qubits_zero(n: usize) -> Self {
        Self::basis(vec![2; n], 0).expect("valid qubit register")
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        StateVector { amplitudes, dims }
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// Applies `op` to subsystem `k`.
    pub fn apply_local(&mut self, k: usize, op: &CMatrix) -> Result<()> {
        let (left, dk, stride) = local_layout(&self.dims, k, op)?;
        apply_local_slice(self.amplitudes.as_mut_slice(), left, dk, stride, op);
        Ok(())
    }

    /// Writes the amplitudes as `index,re,im` lines.
    pub fn write_amplitudes<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, a) in self.amplitudes.iter().enumerate() {
            writeln!(out, "{i},{:.16e},{:.16e}", a.re, a.im)?;
        }
        Ok(())
    }
}

/// A (possibly sub-normalized) density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates shape and Hermiticity (within 1e-12).
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let total = dims_product(&dims);
        if !matrix.is_square() || matrix.nrows() != total || dims.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: matrix.nrows(),
            });
        }
        let asym = hermitian_defect(&matrix);
        if asym > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "density matrix is not Hermitian (defect {asym:e})"
            )));
        }
        Ok(Self { matrix, dims })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(matrix.nrows(), dims_product(&dims));
        Self { matrix, dims }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = dims_product(&dims);
        Self {
            matrix: CMatrix::identity(d, d) / C64::from(d as f64),
            dims,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            matrix: self.matrix.kronecker(&other.matrix),
            dims,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    /// Hermitian within 1e-12, trace in [0, 1] and eigenvalues ≥ -1e-10.
    pub fn is_physical(&self) -> bool {
        let tr = self.trace();
        hermitian_defect(&self.matrix) <= 1e-12
            && (-1e-10..=1.0 + 1e-10).contains(&tr)
            && self.eigenvalues().iter().all(|&l| l >= -1e-10)
    }

    /// ρ → O_k ρ O_k†.
    pub fn apply_local(&mut self, k: usize, op: &CMatrix) -> Result<()> {
        let (left, dk, stride) = local_layout(&self.dims, k, op)?;
        let n = self.dim();
        // columns: ρ → Oρ
        for mut col in self.matrix.column_iter_mut() {
            apply_local_slice(col.as_mut_slice(), left, dk, stride, op);
        }
        // rows: ρ → ρO†, i.e. each row r → conj(O) r
        let op_conj = op.map(|z| z.conj());
        let mut row = vec![ZERO; n];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate() {
                *r = self.matrix[(i, j)];
            }
            apply_local_slice(&mut row, left, dk, stride, &op_conj);
            for (j, r) in row.iter().enumerate() {
                self.matrix[(i, j)] = *r;
            }
        }
        Ok(())
    }

    /// ρ → Σ_k K_k ρ K_k† with every Kraus operator acting on subsystem `k`.
    pub fn apply_local_kraus(&mut self, k: usize, kraus: &[CMatrix]) -> Result<()> {
        if kraus.is_empty() {
            return Err(Error::InvalidArgument("empty Kraus set".into()));
        }
        let mut acc = CMatrix::zeros(self.dim(), self.dim());
        for op in kraus {
            let mut branch = self.clone();
            branch.apply_local(k, op)?;
            acc += branch.matrix;
        }
        self.matrix = acc;
        Ok(())
    }
}

/// Either kind of state; used where operations accept both.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn dims(&self) -> &[usize] {
        match self {
            QuantumState::Pure(s) => s.dims(),
            QuantumState::Mixed(r) => r.dims(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.dim(),
            QuantumState::Mixed(r) => r.dim(),
        }
    }

    /// Squared norm for a pure state, trace for a density matrix.
    pub fn weight(&self) -> f64 {
        match self {
            QuantumState::Pure(s) => s.norm_sqr(),
            QuantumState::Mixed(r) => r.trace(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => s.to_density(),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    pub fn apply_local(&mut self, k: usize, op: &CMatrix) -> Result<()> {
        match self {
            QuantumState::Pure(s) => s.apply_local(k, op),
            QuantumState::Mixed(r) => r.apply_local(k, op),
        }
    }
}

impl From<StateVector> for QuantumState {
    fn from(s: StateVector) -> Self {
        QuantumState::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumState {
    fn from(r: DensityMatrix) -> Self {
        QuantumState::Mixed(r)
    }
}

/// Kronecker product of two states of the same kind.
pub fn tensor_product(a: &QuantumState, b: &QuantumState) -> Result<QuantumState> {
    match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => Ok(x.tensor(y).into()),
        (QuantumState::Mixed(x), QuantumState::Mixed(y)) => Ok(x.tensor(y).into()),
        _ => Err(Error::MixedKinds),
    }
}

/// Traces out every subsystem not listed in `keep`. Kept subsystems retain
/// their original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set must not be empty".into()));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "subsystem {bad} out of range ({} subsystems)",
            dims.len()
        )));
    }
    if keep.len() == dims.len() {
        return Ok(rho.clone());
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk = dims_product(&kept_dims);
    let dt = dims_product(&traced_dims);

    let strides = strides(dims);
    let compose = |kept_digits: &[usize], traced_digits: &[usize]| -> usize {
        keep.iter()
            .zip(kept_digits)
            .map(|(&k, &d)| d * strides[k])
            .chain(
                traced
                    .iter()
                    .zip(traced_digits)
                    .map(|(&k, &d)| d * strides[k]),
            )
            .sum()
    };

    let kept_digits: Vec<Vec<usize>> = (0..dk).map(|i| digits(i, &kept_dims)).collect();
    let traced_digits: Vec<Vec<usize>> = (0..dt).map(|i| digits(i, &traced_dims)).collect();

    let mut out = CMatrix::zeros(dk, dk);
    for (a, da) in kept_digits.iter().enumerate() {
        for (b, db) in kept_digits.iter().enumerate() {
            let mut acc = ZERO;
            for tdig in &traced_digits {
                acc += rho.matrix()[(compose(da, tdig), compose(db, tdig))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix::new_unchecked(out, kept_dims))
}

/// Fidelity between two states.
///
/// Pure–pure: |⟨a|b⟩|². Pure–mixed: ⟨a|ρ|a⟩. Mixed–mixed: (tr √(√ρ σ √ρ))².
pub fn state_fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let f = match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => x.inner(y)?.norm_sqr(),
        (QuantumState::Pure(x), QuantumState::Mixed(r))
        | (QuantumState::Mixed(r), QuantumState::Pure(x)) => {
            let v = x.amplitudes();
            v.dotc(&(r.matrix() * v)).re
        }
        (QuantumState::Mixed(r), QuantumState::Mixed(s)) => {
            let sqrt_r = hermitian_sqrt(r.matrix());
            let m = &sqrt_r * s.matrix() * &sqrt_r;
            let m = (&m + m.adjoint()) * C64::from(0.5);
            let tr: f64 = m
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .map(|&l| l.max(0.0).sqrt())
                .sum();
            tr * tr
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| C64::from(l.max(0.0).sqrt()));
    &eig.eigenvectors * CMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint()
}

/// Largest entry of |M − M†|.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |U†U − I|.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let p = u.adjoint() * u - CMatrix::identity(n, n);
    p.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

fn local_layout(dims: &[usize], k: usize, op: &CMatrix) -> Result<(usize, usize, usize)> {
    if k >= dims.len() {
        return Err(Error::InvalidArgument(format!(
            "subsystem {k} out of range ({} subsystems)",
            dims.len()
        )));
    }
    let dk = dims[k];
    if op.nrows() != dk || op.ncols() != dk {
        return Err(Error::DimensionMismatch {
            expected: dk,
            found: op.nrows(),
        });
    }
    let left = dims_product(&dims[..k]);
    let stride = dims_product(&dims[k + 1..]);
    Ok((left, dk, stride))
}

fn apply_local_slice(v: &mut [C64], left: usize, dk: usize, stride: usize, op: &CMatrix) {
    let mut buf = vec![ZERO; dk];
    let mut out = vec![ZERO; dk];
    for outer in 0..left {
        let base = outer * dk * stride;
        for inner in 0..stride {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = v[base + j * stride + inner];
            }
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (c, b) in buf.iter().enumerate() {
                    acc += op[(r, c)] * b;
                }
                *o = acc;
            }
            for (j, o) in out.iter().enumerate() {
                v[base + j * stride + inner] = *o;
            }
        }
    }
}

/// `|i⟩⟨j|` on a `dim`-dimensional space.
pub fn outer_basis(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = ONE;
    m
}
