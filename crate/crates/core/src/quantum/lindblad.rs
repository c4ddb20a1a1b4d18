//! Lindblad and Schrödinger propagation for time-dependent generators.

use super::ode::{integrate, IntegrationStats, IntegratorOptions};
use super::{
    check_dim, unitarity_defect, CMatrix, CVector, DensityMatrix, StateVector, C64, I, ONE,
};
use crate::error::{Error, Result};

/// A jump operator `L` entering as `rate · (L ρ L† − ½{L†L, ρ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    pub op: CMatrix,
    pub rate: f64,
}

impl Collapse {
    pub fn new(op: CMatrix, rate: f64) -> Self {
        Self { op, rate }
    }
}

struct Dissipator {
    jumps: Vec<(CMatrix, CMatrix)>,
    // Σ rate · L†L
    anti: CMatrix,
}

impl Dissipator {
    fn new(collapse: &[Collapse], dim: usize) -> Result<Self> {
        let mut anti = CMatrix::zeros(dim, dim);
        let mut jumps = Vec::with_capacity(collapse.len());
        for c in collapse {
            if c.op.nrows() != dim || c.op.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.op.nrows(),
                });
            }
            if c.rate < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "collapse rate must be non-negative (got {})",
                    c.rate
                )));
            }
            if c.rate == 0.0 {
                continue;
            }
            let scaled = &c.op * C64::from(c.rate.sqrt());
            anti += scaled.adjoint() * &scaled;
            let adj = scaled.adjoint();
            jumps.push((scaled, adj));
        }
        Ok(Self { jumps, anti })
    }

    fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }
}

fn lindblad_rhs(h: &CMatrix, diss: &Dissipator, rho: &CMatrix) -> CMatrix {
    let hr = h * rho;
    // −i[H, ρ] = −i(Hρ − ρH) and ρH = (Hρ)† for Hermitian H, ρ
    let mut out = (&hr - hr.adjoint()) * (-I);
    if !diss.is_empty() {
        let ar = &diss.anti * rho;
        out -= (&ar + ar.adjoint()) * C64::from(0.5);
        for (l, ld) in &diss.jumps {
            out += l * rho * ld;
        }
    }
    out
}

/// Solves dρ/dt = −i[H(t), ρ] + Σ_k γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}) from
/// `t0` to `t1`. `hamiltonian` must return a Hermitian matrix in rad/ps.
pub fn propagate<H>(
    hamiltonian: H,
    collapse: &[Collapse],
    rho: &DensityMatrix,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(DensityMatrix, IntegrationStats)>
where
    H: Fn(f64) -> CMatrix,
{
    let n = rho.dim();
    let diss = Dissipator::new(collapse, n)?;
    let y0 = CVector::from_column_slice(rho.matrix().as_slice());
    let rhs = |t: f64, y: &CVector| -> CVector {
        let r = CMatrix::from_column_slice(n, n, y.as_slice());
        let d = lindblad_rhs(&hamiltonian(t), &diss, &r);
        CVector::from_column_slice(d.as_slice())
    };
    let (y, stats) = integrate(rhs, &y0, t0, t1, opts)?;
    let mut m = CMatrix::from_column_slice(n, n, y.as_slice());
    // remove round-off anti-Hermitian drift
    m = (&m + m.adjoint()) * C64::from(0.5);
    Ok((DensityMatrix::new_unchecked(m, rho.dims().to_vec()), stats))
}

/// Pure-state fast path: i dψ/dt = H(t) ψ.
pub fn propagate_state<H>(
    hamiltonian: H,
    psi: &StateVector,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(StateVector, IntegrationStats)>
where
    H: Fn(f64) -> CMatrix,
{
    let rhs = |t: f64, y: &CVector| -> CVector { (hamiltonian(t) * y) * (-I) };
    let (y, stats) = integrate(rhs, psi.amplitudes(), t0, t1, opts)?;
    Ok((StateVector::new(y, psi.dims().to_vec())?, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    /// Acts on state vectors.
    Unitary,
    /// Acts on column-stacked density matrices.
    Superoperator,
}

/// A linear evolution map over a fixed window.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub kind: PropagatorKind,
    pub map: CMatrix,
    pub dims: Vec<usize>,
}

impl Propagator {
    /// Builds the unitary by propagating each basis vector.
    pub fn unitary<H>(
        hamiltonian: H,
        dims: Vec<usize>,
        t0: f64,
        t1: f64,
        opts: &IntegratorOptions,
    ) -> Result<Self>
    where
        H: Fn(f64) -> CMatrix,
    {
        let n: usize = dims.iter().product();
        let mut map = CMatrix::zeros(n, n);
        for j in 0..n {
            let e = StateVector::basis(dims.clone(), j)?;
            let (out, _) = propagate_state(&hamiltonian, &e, t0, t1, opts)?;
            map.set_column(j, out.amplitudes());
        }
        Ok(Self {
            kind: PropagatorKind::Unitary,
            map,
            dims,
        })
    }

    /// Builds the superoperator by propagating each matrix unit |i⟩⟨j|.
    pub fn superoperator<H>(
        hamiltonian: H,
        collapse: &[Collapse],
        dims: Vec<usize>,
        t0: f64,
        t1: f64,
        opts: &IntegratorOptions,
    ) -> Result<Self>
    where
        H: Fn(f64) -> CMatrix,
    {
        let n: usize = dims.iter().product();
        let mut map = CMatrix::zeros(n * n, n * n);
        for j in 0..n {
            for i in 0..n {
                let mut unit = CMatrix::zeros(n, n);
                unit[(i, j)] = ONE;
                // matrix units are not Hermitian; bypass the state constructor
                let rho = DensityMatrix::new_unchecked(unit, dims.clone());
                let (out, _) = propagate_raw(&hamiltonian, collapse, &rho, t0, t1, opts)?;
                map.set_column(j * n + i, &CVector::from_column_slice(out.as_slice()));
            }
        }
        Ok(Self {
            kind: PropagatorKind::Superoperator,
            map,
            dims,
        })
    }

    pub fn apply_state(&self, psi: &StateVector) -> Result<StateVector> {
        if self.kind != PropagatorKind::Unitary {
            return Err(Error::InvalidArgument(
                "superoperator cannot act on a state vector".into(),
            ));
        }
        check_dim(self.map.ncols(), psi.dim())?;
        StateVector::new(&self.map * psi.amplitudes(), psi.dims().to_vec())
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let n = rho.dim();
        match self.kind {
            PropagatorKind::Unitary => {
                check_dim(self.map.ncols(), n)?;
                let m = &self.map * rho.matrix() * self.map.adjoint();
                Ok(DensityMatrix::new_unchecked(m, rho.dims().to_vec()))
            }
            PropagatorKind::Superoperator => {
                check_dim(self.map.ncols(), n * n)?;
                let v = &self.map * CVector::from_column_slice(rho.matrix().as_slice());
                Ok(DensityMatrix::new_unchecked(
                    CMatrix::from_column_slice(n, n, v.as_slice()),
                    rho.dims().to_vec(),
                ))
            }
        }
    }

    pub fn unitarity_defect(&self) -> Option<f64> {
        (self.kind == PropagatorKind::Unitary).then(|| unitarity_defect(&self.map))
    }
}

// Like `propagate`, without the Hermitian symmetrization (inputs may be
// arbitrary operators).
fn propagate_raw<H>(
    hamiltonian: H,
    collapse: &[Collapse],
    rho: &DensityMatrix,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(CMatrix, IntegrationStats)>
where
    H: Fn(f64) -> CMatrix,
{
    let n = rho.dim();
    let diss = Dissipator::new(collapse, n)?;
    let y0 = CVector::from_column_slice(rho.matrix().as_slice());
    let rhs = |t: f64, y: &CVector| -> CVector {
        let r = CMatrix::from_column_slice(n, n, y.as_slice());
        let hr = hamiltonian(t) * &r;
        let rh = &r * hamiltonian(t);
        let mut d = (hr - rh) * (-I);
        if !diss.is_empty() {
            d -= (&diss.anti * &r + &r * &diss.anti) * C64::from(0.5);
            for (l, ld) in &diss.jumps {
                d += l * &r * ld;
            }
        }
        CVector::from_column_slice(d.as_slice())
    };
    let (y, stats) = integrate(rhs, &y0, t0, t1, opts)?;
    Ok((CMatrix::from_column_slice(n, n, y.as_slice()), stats))
}

/// Evolves an arbitrary (not necessarily Hermitian) operator under the
/// master equation. Used for process reconstruction from matrix units.
pub(crate) fn propagate_operator<H>(
    hamiltonian: H,
    collapse: &[Collapse],
    op: CMatrix,
    dims: Vec<usize>,
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
) -> Result<(CMatrix, IntegrationStats)>
where
    H: Fn(f64) -> CMatrix,
{
    let rho = DensityMatrix::new_unchecked(op, dims);
    propagate_raw(hamiltonian, collapse, &rho, t0, t1, opts)
}
