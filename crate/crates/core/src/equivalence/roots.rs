use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::EquivError;
use crate::relaxations::{poly_coeffs, RootSet};
use crate::sdp::{self, Coefficients, ConeProblem, ConeStructure, Constraint, SolverOptions, SymSparse};

/// Recovers `θ` with `Hank(1, v₁, …, v₄) = Σ_ℓ θ_ℓ a_ℓ a_ℓᵀ`,
/// `a_ℓ = (1, r_ℓ, r_ℓ²)`.
///
/// Works in units where the largest root is one (`v_k → v_k / r₄^k`). The
/// square system formed by `Σ θ = 1` and the rows for `v₁, v₂, v₃` is solved
/// directly; the `v₄` row and the full reconstruction are then verified.
/// Leaving out the `v₄` row keeps a small polynomial residual from being
/// amplified by `1 / p₀` into `Σ θ`.
/// `tol` applies to the polynomial residual (relative to the magnitude of
/// its terms), to `|Σ θ − 1|` and to every reconstructed moment.
pub fn hankel_to_theta(v: &[f64; 4], roots: &RootSet, tol: f64) -> Result<[f64; 4], EquivError> {
    let (c, rho, p) = roots.scaled();
    let m = [1.0, v[0] / c, v[1] / c.powi(2), v[2] / c.powi(3), v[3] / c.powi(4)];
    let terms: Vec<f64> = (0..5).map(|k| p[k] * m[k]).collect();
    let residual = terms.iter().sum::<f64>() / (1.0 + terms.iter().map(|t| t.abs()).sum::<f64>());
    if residual.abs() > tol {
        return Err(EquivError::PolynomialViolated(residual));
    }
    let a = DMatrix::from_fn(4, 4, |k, l| rho[l].powi(k as i32));
    let rhs = DVector::from_fn(4, |k, _| m[k]);
    let theta = a
        .lu()
        .solve(&rhs)
        .ok_or(EquivError::VandermondeResidual(f64::INFINITY))?;
    let total: f64 = theta.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(EquivError::VandermondeResidual(total - 1.0));
    }
    let worst = (0..5)
        .map(|k| ((0..4).map(|l| theta[l] * rho[l].powi(k as i32)).sum::<f64>() - m[k]).abs())
        .fold(0.0, f64::max);
    if worst > tol {
        return Err(EquivError::VandermondeResidual(worst));
    }
    Ok([theta[0], theta[1], theta[2], theta[3]])
}

/// `√(r₄ − r₁) ≤ min{√(r₃ − r₁) + √(r₂ − r₁), √(r₄ − r₂) + √(r₄ − r₃)}`.
pub fn roots_condition(roots: &RootSet) -> bool {
    let [r1, r2, r3, r4] = roots.r;
    (r4 - r1).sqrt() <= ((r3 - r1).sqrt() + (r2 - r1).sqrt()).min((r4 - r2).sqrt() + (r4 - r3).sqrt())
}

/// Closed-form test for `L = r₁`: `(√u₁ − √u₂)² ≤ u₃ ≤ (√u₁ + √u₂)²` with
/// `u_j = r_{j+1}/r₁ − 1`.
pub fn lower_end_condition(roots: &RootSet) -> bool {
    let r = roots.r;
    let u: Vec<f64> = (1..4).map(|j| r[j] / r[0] - 1.0).collect();
    let (a, b) = (u[0].sqrt(), u[1].sqrt());
    (a - b).powi(2) <= u[2] && u[2] <= (a + b).powi(2)
}

/// Closed-form test for `U = r₄`: `(√v₂ − √v₃)² ≤ v₁ ≤ (√v₂ + √v₃)²` with
/// `v_i = 1 − r_i/r₄`.
pub fn upper_end_condition(roots: &RootSet) -> bool {
    let r = roots.r;
    let v: Vec<f64> = (0..3).map(|i| 1.0 - r[i] / r[3]).collect();
    let (a, b) = (v[1].sqrt(), v[2].sqrt());
    (a - b).powi(2) <= v[0] && v[0] <= (a + b).powi(2)
}

/// Moment problem over `V = Hank(1, w₁, …, w₄) ⪰ 0` with the polynomial row,
/// posed in the coordinate `t = (2u − r₁ − r₄)/(r₄ − r₁)` which maps the
/// roots into `[−1, 1]`. `sign = +1` minimizes `w₁`, `−1` maximizes it; the
/// result is mapped back to the `u` axis.
fn interval_end(roots: &RootSet, sign: f64, opts: &SolverOptions) -> Result<f64, EquivError> {
    let [r1, _, _, r4] = roots.r;
    let (mid, half) = (0.5 * (r1 + r4), 0.5 * (r4 - r1));
    let tau: Vec<f64> = roots.r.iter().map(|r| (r - mid) / half).collect();
    let p = poly_coeffs(&tau)?;
    let structure = ConeStructure {
        psd_block_sizes: vec![3],
        nonneg_count: 0,
    };
    let mut obj = Coefficients::zeros(&structure);
    obj.psd[0].push(0, 1, 0.5 * sign);
    let row = |entries: &[(usize, usize, f64)], rhs: f64| {
        let mut a = Coefficients::zeros(&structure);
        let mut m = SymSparse::new(3);
        for &(i, j, v) in entries {
            m.push(i, j, v);
        }
        a.psd[0] = m;
        Constraint { coeffs: a, rhs }
    };
    let problem = ConeProblem {
        structure: structure.clone(),
        objective: obj,
        constraints: vec![
            row(&[(0, 0, 1.0)], 1.0),
            row(&[(0, 2, 0.5), (1, 1, -1.0)], 0.0),
            row(
                &[(0, 1, 0.5 * p[1]), (1, 1, p[2]), (1, 2, 0.5 * p[3]), (2, 2, p[4])],
                -p[0],
            ),
        ],
        constant_term: 0.0,
    };
    let sol = sdp::solve(&problem, opts)?;
    if !sol.is_optimal() {
        return Err(EquivError::Unsupported(format!(
            "interval program ended with status {:?}",
            sol.status
        )));
    }
    Ok(mid + half * sign * sol.objective)
}

/// Endpoints `[L, U]` of the set of diagonal values reachable by the
/// quartic PI constraints.
pub fn compute_d_interval(roots: &RootSet, opts: &SolverOptions) -> Result<(f64, f64), EquivError> {
    Ok((interval_end(roots, 1.0, opts)?, interval_end(roots, -1.0, opts)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootAnalysis {
    pub roots: RootSet,
    pub condition_holds: bool,
    pub d_interval: (f64, f64),
    pub lower_end_condition: bool,
    pub upper_end_condition: bool,
    /// Whether the computed interval equals `[r₁, r₄]` within the tolerance.
    pub interval_is_box: bool,
    /// `interval_is_box == condition_holds` and each endpoint agrees with
    /// its closed-form test.
    pub agrees: bool,
}

impl RootAnalysis {
    /// Solves both interval programs and compares against the closed forms.
    /// `tol` is the absolute tolerance on `|L − r₁|` and `|U − r₄|`.
    pub fn run(roots: &RootSet, opts: &SolverOptions, tol: f64) -> Result<Self, EquivError> {
        let (l, u) = compute_d_interval(roots, opts)?;
        let lower_hit = (l - roots.r[0]).abs() <= tol;
        let upper_hit = (u - roots.r[3]).abs() <= tol;
        let condition_holds = roots_condition(roots);
        let lower = lower_end_condition(roots);
        let upper = upper_end_condition(roots);
        let interval_is_box = lower_hit && upper_hit;
        Ok(Self {
            roots: roots.clone(),
            condition_holds,
            d_interval: (l, u),
            lower_end_condition: lower,
            upper_end_condition: upper,
            interval_is_box,
            agrees: interval_is_box == condition_holds && lower_hit == lower && upper_hit == upper,
        })
    }
}
