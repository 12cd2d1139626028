//! Orthonormal bases for the constraint subspace `U`, the flat subspace `V`
//! on which the objective is constant, and the complement `V⊥` inside `U`.
//!
//! `U` holds the stacked vectors `y = (x_1, …, x_d)` with `s_k · x_k = 0` for
//! every mode. `V` is the part of `U` whose exponent sums vanish on every
//! support tuple of the tensor. Column order is deterministic: modes in
//! order, indices ascending, so identical inputs give identical bases.

pub mod linalg;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{mode_offsets, ScalingVectors, SparseTensor, TargetSums, DEFAULT_COMPAT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    U,
    V,
    Vperp,
}

#[derive(Debug, Clone)]
pub struct SubspaceFrame {
    dims: Vec<usize>,
    basis_u: DMatrix<f64>,
    basis_v: DMatrix<f64>,
    basis_vperp: DMatrix<f64>,
    /// Stacked positions of each support tuple, row-major `nnz × d`.
    positions: Vec<usize>,
}

/// The `d × n` matrix whose row `k` carries `s_k` (scaled to unit maximum) in
/// block `k`.
pub fn constraint_matrix(s: &TargetSums) -> DMatrix<f64> {
    let dims = s.dims();
    let offsets = mode_offsets(&dims);
    let n: usize = dims.iter().sum();
    let mut m = DMatrix::zeros(dims.len(), n);
    for (k, sk) in s.modes().iter().enumerate() {
        let peak = sk.iter().copied().fold(0.0, f64::max);
        for (i, v) in sk.iter().enumerate() {
            m[(k, offsets[k] + i)] = v / peak;
        }
    }
    m
}

/// Support incidence matrix: one row per stored entry with a 1 at each of its
/// `d` stacked positions.
pub fn incidence_matrix(b: &SparseTensor) -> DMatrix<f64> {
    let d = b.num_modes();
    let positions = b.stacked_positions();
    let mut m = DMatrix::zeros(b.nnz(), b.stacked_len());
    for (e, pos) in positions.chunks_exact(d).enumerate() {
        for &p in pos {
            m[(e, p)] += 1.0;
        }
    }
    m
}

/// Orthonormal basis of `U` alone.
pub fn basis_u(s: &TargetSums) -> DMatrix<f64> {
    linalg::orthonormalize(&linalg::nullspace(&constraint_matrix(s)), None)
}

/// Checks the shared preconditions: matching dims, no zero slice, positive
/// and compatible targets.
pub(crate) fn check_instance(b: &SparseTensor, s: &TargetSums) -> Result<()> {
    s.check_dims(b)?;
    b.validate_no_zero_slice()?;
    s.check_compatibility(DEFAULT_COMPAT_TOL)
}

pub fn build_frame(b: &SparseTensor, s: &TargetSums) -> Result<SubspaceFrame> {
    check_instance(b, s)?;
    let constraints = constraint_matrix(s);
    let basis_u = linalg::orthonormalize(&linalg::nullspace(&constraints), None);

    let incidence = incidence_matrix(b);
    let mut stacked = DMatrix::zeros(constraints.nrows() + incidence.nrows(), b.stacked_len());
    stacked.rows_mut(0, constraints.nrows()).copy_from(&constraints);
    stacked
        .rows_mut(constraints.nrows(), incidence.nrows())
        .copy_from(&incidence);
    let basis_v = linalg::orthonormalize(&linalg::nullspace(&stacked), None);

    let basis_vperp = linalg::orthonormalize(&basis_u, Some(&basis_v));
    if basis_vperp.ncols() + basis_v.ncols() != basis_u.ncols() {
        return Err(Error::Internal(format!(
            "dim V⊥ = {} but dim U − dim V = {}",
            basis_vperp.ncols(),
            basis_u.ncols() as isize - basis_v.ncols() as isize
        )));
    }
    Ok(SubspaceFrame {
        dims: b.dims().to_vec(),
        basis_u,
        basis_v,
        basis_vperp,
        positions: b.stacked_positions(),
    })
}

impl SubspaceFrame {
    /// Ambient dimension `Σ m_k`.
    pub fn n(&self) -> usize {
        self.basis_u.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, which: Subspace) -> usize {
        self.basis(which).ncols()
    }

    pub fn basis(&self, which: Subspace) -> &DMatrix<f64> {
        match which {
            Subspace::U => &self.basis_u,
            Subspace::V => &self.basis_v,
            Subspace::Vperp => &self.basis_vperp,
        }
    }

    pub fn num_support(&self) -> usize {
        self.positions.len() / self.dims.len().max(1)
    }

    /// Coordinates `basisᵀ y` of `y` in the selected basis.
    pub fn project(&self, which: Subspace, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for ambient dimension {}",
                y.len(),
                self.n()
            )));
        }
        let coords = self.basis(which).tr_mul(&DVector::from_column_slice(y));
        Ok(coords.as_slice().to_vec())
    }

    /// `basis · coords`, the right inverse of [`project`](Self::project).
    pub fn embed(&self, which: Subspace, coords: &[f64]) -> Result<ScalingVectors> {
        let basis = self.basis(which);
        if coords.len() != basis.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for a {}-dimensional subspace",
                coords.len(),
                basis.ncols()
            )));
        }
        let y = basis * DVector::from_column_slice(coords);
        ScalingVectors::new(self.dims.clone(), y.as_slice().to_vec())
    }

    /// `nnz × dim` matrix mapping subspace coordinates to the exponent sums on
    /// each support tuple.
    pub fn support_sum_matrix(&self, which: Subspace) -> DMatrix<f64> {
        let basis = self.basis(which);
        let d = self.dims.len();
        let mut w = DMatrix::zeros(self.num_support(), basis.ncols());
        for (e, pos) in self.positions.chunks_exact(d).enumerate() {
            for &p in pos {
                for j in 0..basis.ncols() {
                    w[(e, j)] += basis[(p, j)];
                }
            }
        }
        w
    }

    /// Plain-text dump of the three bases, one matrix row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, which) in [("U", Subspace::U), ("V", Subspace::V), ("Vperp", Subspace::Vperp)] {
            let m = self.basis(which);
            out.push_str(&format!("basis {} {} {}\n", name, m.nrows(), m.ncols()));
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// `max` over support tuples of `x_{1,i_1} + … + x_{d,i_d}`.
pub fn max_support_sum(b: &SparseTensor, y: &ScalingVectors) -> Result<f64> {
    if b.nnz() == 0 {
        return Err(Error::EmptySupport);
    }
    Ok(b.exponent_sums(y)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}
