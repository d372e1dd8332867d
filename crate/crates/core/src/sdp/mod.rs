//! Standard-form conic programs and a dense interior-point solver.
//!
//! Problems are posed over a product of PSD blocks and one nonnegative
//! orthant:
//!
//! ```text
//! minimize    Σ_b ⟨C_b, X_b⟩ + c_lᵀ x_l + constant
//! subject to  Σ_b ⟨A_ib, X_b⟩ + a_ilᵀ x_l = b_i,   i = 1..m
//!             X_b ⪰ 0,  x_l ≥ 0
//! ```
//!
//! Coefficient matrices are stored as upper-triangular triplets; all
//! numerical work on iterates is dense.

mod linalg;
mod solver;

pub use linalg::{min_eig, sqrt_factor, sym_eigen_clipped};
pub use solver::solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("invalid cone problem: {0}")]
    InvalidProblem(String),
    #[error("matrix is not PSD: minimum eigenvalue {min_eig:.3e} below −{tol:.1e}")]
    NotPsd { min_eig: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeStructure {
    pub psd_block_sizes: Vec<usize>,
    pub nonneg_count: usize,
}

impl ConeStructure {
    /// Barrier parameter `ν`: total PSD order plus orthant dimension.
    pub fn degree(&self) -> usize {
        self.psd_block_sizes.iter().sum::<usize>() + self.nonneg_count
    }
}

/// Symmetric matrix stored as upper-triangular entries `(i, j, v)`, `i ≤ j`.
/// An off-diagonal entry stands for `v` at both `(i, j)` and `(j, i)`.
/// Repeated positions add up.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymSparse {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        if v != 0.0 {
            self.entries.push((a, b, v));
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut s = Self::new(m.nrows());
        for j in 0..m.ncols() {
            for i in 0..=j {
                s.push(i, j, m[(i, j)]);
            }
        }
        s
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        self.add_to(&mut d, 1.0);
        d
    }

    /// `out += factor · A`.
    pub fn add_to(&self, out: &mut DMatrix<f64>, factor: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += factor * v;
            if i != j {
                out[(j, i)] += factor * v;
            }
        }
    }

    /// Trace inner product `⟨A, X⟩` (only the symmetric part of `X` matters).
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    v * x[(i, i)]
                } else {
                    v * (x[(i, j)] + x[(j, i)])
                }
            })
            .sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.to_dense().norm_squared()
    }

    fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|&(_, j, _)| j).max()
    }
}

/// Coefficients laid out like a point of the cone: one symmetric matrix per
/// PSD block and a sparse vector on the orthant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Coefficients {
    pub psd: Vec<SymSparse>,
    pub nonneg: Vec<(usize, f64)>,
}

impl Coefficients {
    pub fn zeros(structure: &ConeStructure) -> Self {
        Self {
            psd: structure
                .psd_block_sizes
                .iter()
                .map(|&n| SymSparse::new(n))
                .collect(),
            nonneg: Vec::new(),
        }
    }

    pub fn inner(&self, x: &ConeVector) -> f64 {
        let psd: f64 = self.psd.iter().zip(&x.psd).map(|(a, xb)| a.inner(xb)).sum();
        let lin: f64 = self.nonneg.iter().map(|&(k, v)| v * x.nonneg[k]).sum();
        psd + lin
    }

    pub fn norm(&self) -> f64 {
        let psd: f64 = self.psd.iter().map(SymSparse::frobenius_sq).sum();
        let mut lin = vec![0.0; self.nonneg.iter().map(|&(k, _)| k + 1).max().unwrap_or(0)];
        for &(k, v) in &self.nonneg {
            lin[k] += v;
        }
        (psd + lin.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Coefficients,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProblem {
    pub structure: ConeStructure,
    pub objective: Coefficients,
    pub constraints: Vec<Constraint>,
    /// Added to every reported objective value.
    pub constant_term: f64,
}

impl ConeProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        let st = &self.structure;
        let bad = |msg: String| Err(SdpError::InvalidProblem(msg));
        if st.psd_block_sizes.is_empty() && st.nonneg_count == 0 {
            return bad("no cones".into());
        }
        if st.psd_block_sizes.contains(&0) {
            return bad("PSD block of size zero".into());
        }
        if self.constraints.is_empty() {
            return bad("at least one constraint is required".into());
        }
        let check = |c: &Coefficients, what: &str| -> Result<(), SdpError> {
            if c.psd.len() != st.psd_block_sizes.len() {
                return Err(SdpError::InvalidProblem(format!(
                    "{what}: {} PSD blocks, structure has {}",
                    c.psd.len(),
                    st.psd_block_sizes.len()
                )));
            }
            for (b, (blk, &n)) in c.psd.iter().zip(&st.psd_block_sizes).enumerate() {
                if blk.dim != n || blk.max_index().is_some_and(|k| k >= n) {
                    return Err(SdpError::InvalidProblem(format!(
                        "{what}: block {b} does not match size {n}"
                    )));
                }
                if blk.entries.iter().any(|e| !e.2.is_finite()) {
                    return Err(SdpError::InvalidProblem(format!(
                        "{what}: non-finite coefficient in block {b}"
                    )));
                }
            }
            if c.nonneg.iter().any(|&(k, v)| k >= st.nonneg_count || !v.is_finite()) {
                return Err(SdpError::InvalidProblem(format!(
                    "{what}: orthant index out of range or non-finite"
                )));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.coeffs, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return bad(format!("constraint {i}: non-finite rhs"));
            }
            if c.coeffs.norm() == 0.0 {
                return bad(format!("constraint {i}: all coefficients are zero"));
            }
        }
        Ok(())
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Debug dump as JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cone problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| SdpError::InvalidProblem(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Primal objective including the constant term.
    pub fn objective_value(&self, x: &ConeVector) -> f64 {
        self.objective.inner(x) + self.constant_term
    }

    /// Residuals `b_i − A_i(x)`.
    pub fn residuals(&self, x: &ConeVector) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.rhs - c.coeffs.inner(x)),
        )
    }
}

/// A point in the cone product (primal `x` or dual slack `z`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVector {
    pub psd: Vec<DMatrix<f64>>,
    pub nonneg: DVector<f64>,
}

impl ConeVector {
    pub fn scaled_identity(structure: &ConeStructure, tau: f64) -> Self {
        Self {
            psd: structure
                .psd_block_sizes
                .iter()
                .map(|&n| DMatrix::identity(n, n) * tau)
                .collect(),
            nonneg: DVector::from_element(structure.nonneg_count, tau),
        }
    }

    pub fn dot(&self, other: &ConeVector) -> f64 {
        let psd: f64 = self.psd.iter().zip(&other.psd).map(|(a, b)| a.dot(b)).sum();
        psd + self.nonneg.dot(&other.nonneg)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub mu: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub x: ConeVector,
    pub dual_y: DVector<f64>,
    pub dual_z: ConeVector,
    pub status: SolveStatus,
    /// Relative duality gap `|p − d| / (1 + |p| + |d|)` of the returned iterate,
    /// measured on the normalized problem the solver iterates on.
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    /// Primal objective including the constant term.
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub trace: Vec<IterationInfo>,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iters: 100,
            step_fraction: 0.98,
            verbose: false,
        }
    }
}
