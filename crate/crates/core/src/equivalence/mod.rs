//! Feasibility checkers and constructive maps between the feasible sets of
//! the BC, PI and VA relaxations.

mod convert;
mod roots;

pub use convert::{
    alternate_to_pi64, bc_to_pi16, bc_to_pi64, bc_to_va, bc_to_va_with, lemma1_decompose,
    lemma1_decompose_with_perp, pi64_to_alternate, pi_to_bc, va_to_bc, PerpStrategy,
};
pub use roots::{
    compute_d_interval, hankel_to_theta, lower_end_condition, roots_condition, upper_end_condition,
    RootAnalysis,
};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::model::va_weight_matrix;
use crate::relaxations::{bordered, Aux, RelaxError, RootSet, SdrPoint};
use crate::sdp::{min_eig, SdpError};

/// Default tolerance for the checkers.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EquivError {
    #[error("point carries no auxiliary variables of the required kind")]
    MissingAux,
    #[error("input is infeasible: {0}")]
    Infeasible(String),
    #[error("‖z‖ = {norm} lies outside [{lo}, {hi}]")]
    NormOutOfRange { norm: f64, lo: f64, hi: f64 },
    #[error("decomposition needs dimension ≥ 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("polynomial constraint violated by {0:e}")]
    PolynomialViolated(f64),
    #[error("Vandermonde residual {0:e} too large")]
    VandermondeResidual(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

/// Outcome of a feasibility check. Violations are normalized and
/// nonnegative:
///
/// - PSD: `max(0, −λ_min(X)) / (1 + tr X)` over the bordered blocks;
/// - equality: `|residual| / (1 + Σ |term|)` per row;
/// - bounds: distance outside the box over `1 + |bound|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub worst_psd_violation: f64,
    pub worst_equality_violation: f64,
    pub worst_bound_violation: f64,
    pub tol: f64,
}

impl FeasibilityReport {
    fn into_result(self) -> Result<Self, EquivError> {
        if self.feasible {
            Ok(self)
        } else {
            Err(EquivError::Infeasible(self.to_string()))
        }
    }
}

impl std::fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "psd {:.2e}, equality {:.2e}, bounds {:.2e} (tol {:.1e})",
            self.worst_psd_violation,
            self.worst_equality_violation,
            self.worst_bound_violation,
            self.tol
        )
    }
}

#[derive(Default)]
struct Tally {
    psd: f64,
    eq: f64,
    bound: f64,
}

impl Tally {
    fn psd(&mut self, x: &DMatrix<f64>) {
        let v = (-min_eig(x)).max(0.0) / (1.0 + x.trace().abs());
        self.psd = self.psd.max(v);
    }

    /// Equality `Σ terms = 0`.
    fn eq(&mut self, terms: &[f64]) {
        let res: f64 = terms.iter().sum();
        let mag: f64 = terms.iter().map(|t| t.abs()).sum();
        self.eq = self.eq.max(res.abs() / (1.0 + mag));
    }

    fn bound(&mut self, v: f64, lo: f64, hi: f64) {
        let below = (lo - v).max(0.0) / (1.0 + lo.abs());
        let above = (v - hi).max(0.0) / (1.0 + hi.abs());
        self.bound = self.bound.max(below).max(above);
    }

    fn report(self, tol: f64) -> FeasibilityReport {
        FeasibilityReport {
            feasible: self.psd <= tol && self.eq <= tol && self.bound <= tol,
            worst_psd_violation: self.psd,
            worst_equality_violation: self.eq,
            worst_bound_violation: self.bound,
            tol,
        }
    }
}

/// The polynomial used by a PI point.
#[derive(Debug, Clone, PartialEq)]
pub enum PiForm {
    /// `u² − 10u + 9`, 16-QAM.
    Quadratic,
    /// Quartic over four roots.
    Quartic(RootSet),
}

impl PiForm {
    /// Box `[r₁, r_max]` implied by the roots.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            PiForm::Quadratic => (1.0, 9.0),
            PiForm::Quartic(r) => (r.r[0], r.r[3]),
        }
    }
}

/// Default BC box `[1, (2^q − 1)²]`.
pub fn bc_bounds(q: u32) -> (f64, f64) {
    let m = ((1u64 << q) - 1) as f64;
    (1.0, m * m)
}

/// `S ⪰ s sᵀ` and `1 ≤ S_ii ≤ (2^q − 1)²`.
pub fn check_bc_feasible(point: &SdrPoint, q: u32, tol: f64) -> FeasibilityReport {
    let (lo, hi) = bc_bounds(q);
    check_bc_feasible_bounds(point, lo, hi, tol)
}

pub fn check_bc_feasible_bounds(point: &SdrPoint, lo: f64, hi: f64, tol: f64) -> FeasibilityReport {
    let mut t = Tally::default();
    t.psd(&point.bordered());
    for i in 0..point.n() {
        t.bound(point.s_mat[(i, i)], lo, hi);
    }
    t.report(tol)
}

/// Both bordered blocks PSD, `d(S) = u₁`, and the polynomial rows.
pub fn check_pi_feasible(
    point: &SdrPoint,
    form: &PiForm,
    tol: f64,
) -> Result<FeasibilityReport, EquivError> {
    let Some(Aux::Pi { u_mat, u_vec }) = &point.aux else {
        return Err(EquivError::MissingAux);
    };
    let n = point.n();
    let width = match form {
        PiForm::Quadratic => n,
        PiForm::Quartic(_) => 2 * n,
    };
    if u_vec.len() != width || u_mat.shape() != (width, width) {
        return Err(EquivError::Infeasible(format!(
            "auxiliary block has size {}, expected {width}",
            u_vec.len()
        )));
    }
    let mut t = Tally::default();
    t.psd(&point.bordered());
    t.psd(&bordered(u_mat, u_vec));
    for i in 0..n {
        t.eq(&[point.s_mat[(i, i)], -u_vec[i]]);
        match form {
            PiForm::Quadratic => t.eq(&[u_mat[(i, i)], -10.0 * u_vec[i], 9.0]),
            PiForm::Quartic(r) => {
                t.eq(&[u_mat[(i, i)], -u_vec[n + i]]);
                t.eq(&[
                    r.p[0],
                    r.p[1] * u_vec[i],
                    r.p[2] * u_mat[(i, i)],
                    r.p[3] * u_mat[(i, n + i)],
                    r.p[4] * u_mat[(n + i, n + i)],
                ]);
            }
        }
    }
    Ok(t.report(tol))
}

/// `B ⪰ b bᵀ`, `d(B) = 1`, and `(S, s) = (W B Wᵀ, W b)`.
pub fn check_va_feasible(point: &SdrPoint, q: u32, tol: f64) -> Result<FeasibilityReport, EquivError> {
    let Some(Aux::Va { b_mat, b_vec }) = &point.aux else {
        return Err(EquivError::MissingAux);
    };
    let n = point.n();
    let qn = q as usize * n;
    if b_vec.len() != qn || b_mat.shape() != (qn, qn) {
        return Err(EquivError::Infeasible(format!(
            "bit block has size {}, expected {qn}",
            b_vec.len()
        )));
    }
    let mut t = Tally::default();
    t.psd(&bordered(b_mat, b_vec));
    for k in 0..qn {
        t.eq(&[b_mat[(k, k)], -1.0]);
    }
    let w = va_weight_matrix(n, q);
    let s_mat = &w * b_mat * w.transpose();
    let s_vec = &w * b_vec;
    for i in 0..n {
        t.eq(&[point.s_vec[i], -s_vec[i]]);
        for j in 0..n {
            t.eq(&[point.s_mat[(i, j)], -s_mat[(i, j)]]);
        }
    }
    Ok(t.report(tol))
}
