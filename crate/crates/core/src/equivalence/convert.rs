use nalgebra::{DMatrix, DVector, Matrix3};

use super::{
    bc_bounds, check_bc_feasible, check_bc_feasible_bounds, check_pi_feasible, check_va_feasible,
    EquivError, PiForm,
};
use crate::model::va_weight_matrix;
use crate::relaxations::{Aux, RootSet, SdrPoint};
use crate::sdp::{min_eig, sqrt_factor};

/// `u = d(S)`, `U = u uᵀ + D(w)` with `w_i = −(S_ii − 1)(S_ii − 9)`.
pub fn bc_to_pi16(point: &SdrPoint, tol: f64) -> Result<SdrPoint, EquivError> {
    check_bc_feasible(point, 2, tol).into_result()?;
    let u = point.s_mat.diagonal();
    let mut u_mat = &u * u.transpose();
    for i in 0..u.len() {
        u_mat[(i, i)] -= (u[i] - 1.0) * (u[i] - 9.0);
    }
    Ok(SdrPoint {
        s_mat: point.s_mat.clone(),
        s_vec: point.s_vec.clone(),
        aux: Some(Aux::Pi { u_mat, u_vec: u }),
    })
}

/// Drops the lifted block after checking PI feasibility and that the
/// diagonal of `S` lands in the box spanned by the roots.
pub fn pi_to_bc(point: &SdrPoint, form: &PiForm, tol: f64) -> Result<SdrPoint, EquivError> {
    check_pi_feasible(point, form, tol)?.into_result()?;
    let out = SdrPoint::new(point.s_mat.clone(), point.s_vec.clone());
    let (lo, hi) = form.bounds();
    check_bc_feasible_bounds(&out, lo, hi, tol).into_result()?;
    Ok(out)
}

/// Each `S_ii ∈ [r₁, r₄]` is written as a convex combination of its two
/// bracketing roots, giving a rank-two moment matrix `V_i`; the lifted
/// block is then assembled by [`alternate_to_pi64`].
pub fn bc_to_pi64(point: &SdrPoint, roots: &RootSet, tol: f64) -> Result<SdrPoint, EquivError> {
    let (lo, hi) = (roots.r[0], roots.r[3]);
    check_bc_feasible_bounds(point, lo, hi, tol).into_result()?;
    let vs: Vec<Matrix3<f64>> = (0..point.n())
        .map(|i| {
            let d = point.s_mat[(i, i)].clamp(lo, hi);
            let k = roots.r.iter().position(|&r| r >= d).unwrap_or(3).max(1);
            let (ra, rb) = (roots.r[k - 1], roots.r[k]);
            let ta = (rb - d) / (rb - ra);
            let a = nalgebra::Vector3::new(1.0, ra, ra * ra);
            let b = nalgebra::Vector3::new(1.0, rb, rb * rb);
            let mut v = a * a.transpose() * ta + b * b.transpose() * (1.0 - ta);
            // Keep v₁ equal to the unclamped diagonal.
            v[(0, 1)] = point.s_mat[(i, i)];
            v[(1, 0)] = point.s_mat[(i, i)];
            v
        })
        .collect();
    alternate_to_pi64(&vs, point, roots, tol)
}

/// Principal 3×3 submatrices `V_i` of `[[1, uᵀ], [u, U]]` on the indices
/// `(0, i, N + i)`.
pub fn pi64_to_alternate(
    point: &SdrPoint,
    roots: &RootSet,
    tol: f64,
) -> Result<Vec<Matrix3<f64>>, EquivError> {
    check_pi_feasible(point, &PiForm::Quartic(roots.clone()), tol)?.into_result()?;
    let Some(Aux::Pi { u_mat, u_vec }) = &point.aux else {
        return Err(EquivError::MissingAux);
    };
    let n = point.n();
    Ok((0..n)
        .map(|i| {
            Matrix3::new(
                1.0,
                u_vec[i],
                u_vec[n + i],
                u_vec[i],
                u_mat[(i, i)],
                u_mat[(i, n + i)],
                u_vec[n + i],
                u_mat[(n + i, i)],
                u_mat[(n + i, n + i)],
            )
        })
        .collect())
}

/// Assembles `(U, u)` from moment matrices `V_i = Hank(1, v_i1, …, v_i4)`:
///
/// ```text
/// u₁ = (v_i1),  U₁₁ = C₂ − D(u₁ ⊙ u₁) + u₁u₁ᵀ,  u₂ = (v_i2),
/// U₁₂ = C₃ − D(u₁ ⊙ u₂) + u₁u₂ᵀ,  U₂₂ = C₄ − D(u₂ ⊙ u₂) + u₂u₂ᵀ
/// ```
///
/// with `C_k = D(v_1k, …, v_Nk)`. `(S, s)` is passed through unchanged.
pub fn alternate_to_pi64(
    vs: &[Matrix3<f64>],
    point: &SdrPoint,
    roots: &RootSet,
    tol: f64,
) -> Result<SdrPoint, EquivError> {
    let n = point.n();
    if vs.len() != n {
        return Err(EquivError::Infeasible(format!(
            "{} moment matrices for N = {n}",
            vs.len()
        )));
    }
    // Scale to roots in (0, 1] before testing PSD-ness so that entries of
    // very different magnitude are comparable.
    let c = roots.r[3];
    let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0 / c, 1.0 / (c * c)));
    for (i, v) in vs.iter().enumerate() {
        let fail = |what: &str, by: f64| {
            Err(EquivError::Infeasible(format!("V_{i}: {what} violated by {by:.2e}")))
        };
        let scaled = d * v * d;
        let scale = 1.0 + scaled.trace();
        if (v[(0, 0)] - 1.0).abs() > tol {
            return fail("unit corner", (v[(0, 0)] - 1.0).abs());
        }
        let hank = (v[(0, 2)] - v[(1, 1)]).abs() / (1.0 + v[(1, 1)].abs());
        if hank > tol {
            return fail("Hankel structure", hank);
        }
        let terms = [
            roots.p[0],
            roots.p[1] * v[(0, 1)],
            roots.p[2] * v[(1, 1)],
            roots.p[3] * v[(1, 2)],
            roots.p[4] * v[(2, 2)],
        ];
        let poly = terms.iter().sum::<f64>().abs() / (1.0 + terms.iter().map(|t| t.abs()).sum::<f64>());
        if poly > tol {
            return fail("polynomial row", poly);
        }
        let link = (v[(0, 1)] - point.s_mat[(i, i)]).abs() / (1.0 + point.s_mat[(i, i)].abs());
        if link > tol {
            return fail("d(S) = v₁", link);
        }
        let lam = min_eig(&DMatrix::from_column_slice(3, 3, scaled.as_slice()));
        if lam < -tol * scale {
            return fail("V ⪰ 0", -lam / scale);
        }
        // Schur block [[v2 − v1², v3 − v1 v2], [·, v4 − v2²]] in scaled units.
        let (v1, v2) = (scaled[(0, 1)], scaled[(1, 1)]);
        let schur = DMatrix::from_row_slice(
            2,
            2,
            &[
                v2 - v1 * v1,
                scaled[(1, 2)] - v1 * v2,
                scaled[(1, 2)] - v1 * v2,
                scaled[(2, 2)] - v2 * v2,
            ],
        );
        let lam = min_eig(&schur);
        if lam < -tol * scale {
            return fail("Schur block ⪰ 0", -lam / scale);
        }
    }
    let col = |k: (usize, usize)| DVector::from_fn(n, |i, _| vs[i][k]);
    let u1 = col((0, 1));
    let u2 = col((1, 1));
    let (c2, c3, c4) = (u2.clone(), col((1, 2)), col((2, 2)));
    let block = |diag: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| {
        let mut m = a * b.transpose();
        for i in 0..n {
            m[(i, i)] = diag[i];
        }
        m
    };
    let u11 = block(&c2, &u1, &u1);
    let u12 = block(&c3, &u1, &u2);
    let u22 = block(&c4, &u2, &u2);
    let mut u_mat = DMatrix::zeros(2 * n, 2 * n);
    u_mat.view_mut((0, 0), (n, n)).copy_from(&u11);
    u_mat.view_mut((0, n), (n, n)).copy_from(&u12);
    u_mat.view_mut((n, 0), (n, n)).copy_from(&u12.transpose());
    u_mat.view_mut((n, n), (n, n)).copy_from(&u22);
    let mut u_vec = DVector::zeros(2 * n);
    u_vec.rows_mut(0, n).copy_from(&u1);
    u_vec.rows_mut(n, n).copy_from(&u2);
    Ok(SdrPoint {
        s_mat: point.s_mat.clone(),
        s_vec: point.s_vec.clone(),
        aux: Some(Aux::Pi { u_mat, u_vec }),
    })
}

/// Choice of the unit vector orthogonal to `z` in the two-vector
/// decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerpStrategy {
    /// Standard basis direction at the smallest-magnitude component of `z`
    /// (first on ties), orthogonalized against `z`.
    #[default]
    SmallestComponent,
    /// Direction of the border column `z_{N+1}` orthogonalized against `z`;
    /// falls back to [`PerpStrategy::SmallestComponent`] when degenerate.
    TowardBorder,
}

fn default_perp(z: &DVector<f64>) -> DVector<f64> {
    let k = z
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v.abs() < best.1 { (i, v.abs()) } else { best })
        .0;
    let mut e = DVector::zeros(z.len());
    e[k] = 1.0;
    orthonormalize(&e, z).expect("a basis vector at the smallest component is never parallel to z")
}

fn orthonormalize(w: &DVector<f64>, z: &DVector<f64>) -> Option<DVector<f64>> {
    let zz = z.norm_squared();
    let p = if zz > 0.0 { w - z * (z.dot(w) / zz) } else { w.clone() };
    let norm = p.norm();
    (norm > 1e-8 * w.norm().max(1e-300)).then(|| p / norm)
}

/// Unit vectors `u, v` with `z = α u + β v`, for `β − α ≤ ‖z‖ ≤ β + α`:
///
/// ```text
/// θ = (‖z‖² + α² − β²) / (2α‖z‖),  u = θ z/‖z‖ + √(1 − θ²) z⊥,  v = (z − αu)/β
/// ```
///
/// A norm within `tol` outside the range is clamped to the nearest end.
pub fn lemma1_decompose(
    z: &DVector<f64>,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<(DVector<f64>, DVector<f64>), EquivError> {
    lemma1_decompose_with_perp(z, alpha, beta, tol, None)
}

/// As [`lemma1_decompose`] with an explicit `z⊥` (normalized and
/// orthogonalized against `z` here).
pub fn lemma1_decompose_with_perp(
    z: &DVector<f64>,
    alpha: f64,
    beta: f64,
    tol: f64,
    perp: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, DVector<f64>), EquivError> {
    if z.len() < 2 {
        return Err(EquivError::DimensionTooSmall(z.len()));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(EquivError::Unsupported(format!(
            "weights must be positive (α = {alpha}, β = {beta})"
        )));
    }
    let (lo, hi) = ((beta - alpha).abs(), beta + alpha);
    let raw = z.norm();
    if raw < lo - tol || raw > hi + tol {
        return Err(EquivError::NormOutOfRange { norm: raw, lo, hi });
    }
    let norm = raw.clamp(lo, hi);
    let perp = match perp.and_then(|p| orthonormalize(p, z)) {
        Some(p) => p,
        None => default_perp(z),
    };
    if norm == 0.0 {
        // Only possible for α = β: u arbitrary, v = −u.
        return Ok((perp.clone(), -perp));
    }
    let dir = if raw > 0.0 { z / raw } else { perp.clone() };
    let zc = &dir * norm;
    let theta = ((norm * norm + alpha * alpha - beta * beta) / (2.0 * alpha * norm)).clamp(-1.0, 1.0);
    let u = &dir * theta + &perp * (1.0 - theta * theta).max(0.0).sqrt();
    let v = (zc - &u * alpha) / beta;
    Ok((u, v))
}

/// Constructs a VA point with `(W B Wᵀ, W b) = (S, s)` from a BC point.
pub fn bc_to_va(point: &SdrPoint, q: u32, tol: f64) -> Result<SdrPoint, EquivError> {
    bc_to_va_with(point, q, tol, PerpStrategy::SmallestComponent)
}

pub fn bc_to_va_with(
    point: &SdrPoint,
    q: u32,
    tol: f64,
    strategy: PerpStrategy,
) -> Result<SdrPoint, EquivError> {
    check_bc_feasible(point, q, tol).into_result()?;
    let n = point.n();
    if q == 1 {
        return Ok(SdrPoint {
            s_mat: point.s_mat.clone(),
            s_vec: point.s_vec.clone(),
            aux: Some(Aux::Va {
                b_mat: point.s_mat.clone(),
                b_vec: point.s_vec.clone(),
            }),
        });
    }
    let x = point.bordered();
    let scale = 1.0 + x.trace();
    let factor = sqrt_factor(&x, tol * scale)?;
    let qn = q as usize * n;
    let mut z = DMatrix::zeros(qn + 1, n + 1);
    z.view_mut((0, 0), (n + 1, n + 1)).copy_from(&factor);
    let border = z.column(n).into_owned();
    let alpha = ((1u64 << (q - 1)) - 1) as f64;
    let beta = (1u64 << (q - 1)) as f64;
    let (_, hi) = bc_bounds(q);
    // Covers the diagonal slack admitted by the checker plus eigenvalue
    // clipping in the factorization.
    let norm_tol = tol * (scale + hi);
    let mut r = DMatrix::zeros(qn + 1, qn + 1);
    for i in 0..n {
        let zi = z.column(i).into_owned();
        let perp = match strategy {
            PerpStrategy::SmallestComponent => None,
            PerpStrategy::TowardBorder => Some(&border),
        };
        let (u, v) = lemma1_decompose_with_perp(&zi, alpha, beta, norm_tol, perp)?;
        for j in 0..(q as usize - 1) {
            r.set_column(j * n + i, &u);
        }
        r.set_column((q as usize - 1) * n + i, &v);
    }
    r.set_column(qn, &border);
    let y = r.transpose() * &r;
    let b_mat = y.view((0, 0), (qn, qn)).into_owned();
    let b_vec = DVector::from_fn(qn, |k, _| y[(k, qn)]);
    let out = SdrPoint {
        s_mat: point.s_mat.clone(),
        s_vec: point.s_vec.clone(),
        aux: Some(Aux::Va { b_mat, b_vec }),
    };
    Ok(out)
}

/// `(S, s) = (W B Wᵀ, W b)`.
pub fn va_to_bc(point: &SdrPoint, q: u32, tol: f64) -> Result<SdrPoint, EquivError> {
    let Some(Aux::Va { b_mat, b_vec }) = &point.aux else {
        return Err(EquivError::MissingAux);
    };
    let n = b_vec.len() / q as usize;
    let w = va_weight_matrix(n, q);
    let out = SdrPoint::new(&w * b_mat * w.transpose(), &w * b_vec);
    let mut probe = point.clone();
    probe.s_mat = out.s_mat.clone();
    probe.s_vec = out.s_vec.clone();
    check_va_feasible(&probe, q, tol)?.into_result()?;
    check_bc_feasible(&out, q, tol).into_result()?;
    Ok(out)
}
