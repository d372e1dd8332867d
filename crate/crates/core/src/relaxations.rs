//! Compilation of the BC, PI and VA relaxations into cone problems.
//!
//! Every relaxation shares the objective
//! `f(S, s) = tr(HᵀH S) − 2 sᵀHᵀy + ‖y‖²` and encodes `S ⪰ s sᵀ` through the
//! bordered block `[[S, s], [sᵀ, 1]] ⪰ 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{va_weight_matrix, Constellation, Instance, ModelError};
use crate::sdp::{
    self, Coefficients, ConeProblem, ConeSolution, ConeStructure, Constraint, SdpError,
    SolverOptions, SymSparse,
};

#[derive(Debug, Error, PartialEq)]
pub enum RelaxError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("roots must be distinct, got {0:?}")]
    NonDistinctRoots(Vec<f64>),
    #[error("invalid roots: {0}")]
    InvalidRoots(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Auxiliary variables carried by PI and VA points.
#[derive(Debug, Clone, PartialEq)]
pub enum Aux {
    Pi {
        u_mat: DMatrix<f64>,
        u_vec: DVector<f64>,
    },
    Va {
        b_mat: DMatrix<f64>,
        b_vec: DVector<f64>,
    },
}

/// A point `(S, s)` of some relaxation together with its lifted variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrPoint {
    pub s_mat: DMatrix<f64>,
    pub s_vec: DVector<f64>,
    pub aux: Option<Aux>,
}

impl SdrPoint {
    pub fn new(s_mat: DMatrix<f64>, s_vec: DVector<f64>) -> Self {
        Self {
            s_mat,
            s_vec,
            aux: None,
        }
    }

    /// Rank-one point `(s sᵀ, s)`.
    pub fn rank_one(s: &DVector<f64>) -> Self {
        Self::new(s * s.transpose(), s.clone())
    }

    pub fn n(&self) -> usize {
        self.s_vec.len()
    }

    /// `[[S, s], [sᵀ, 1]]`.
    pub fn bordered(&self) -> DMatrix<f64> {
        bordered(&self.s_mat, &self.s_vec)
    }
}

pub(crate) fn bordered(m: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let mut x = DMatrix::zeros(n + 1, n + 1);
    x.view_mut((0, 0), (n, n)).copy_from(m);
    for i in 0..n {
        x[(i, n)] = v[i];
        x[(n, i)] = v[i];
    }
    x[(n, n)] = 1.0;
    x
}

/// Four increasing positive roots and the coefficients of the monic quartic
/// `Π (u − r_i) = Σ_ℓ p_ℓ u^{ℓ−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub r: [f64; 4],
    pub p: [f64; 5],
}

impl RootSet {
    pub fn new(r: [f64; 4]) -> Result<Self, RelaxError> {
        if r.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(RelaxError::InvalidRoots(format!("roots must be positive: {r:?}")));
        }
        if r.windows(2).any(|w| w[0] == w[1]) {
            return Err(RelaxError::NonDistinctRoots(r.to_vec()));
        }
        if r.windows(2).any(|w| w[0] > w[1]) {
            return Err(RelaxError::InvalidRoots(format!("roots must be increasing: {r:?}")));
        }
        let p = poly_coeffs(&r)?;
        Ok(Self {
            r,
            p: [p[0], p[1], p[2], p[3], p[4]],
        })
    }

    /// The squared 64-QAM levels `{1, 9, 25, 49}`.
    pub fn canonical() -> Self {
        Self::new([1.0, 9.0, 25.0, 49.0]).expect("canonical roots are valid")
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.p.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// Roots and coefficients after the substitution `u = c ρ` with
    /// `c = r₄`, keeping the polynomial monic.
    pub(crate) fn scaled(&self) -> (f64, [f64; 4], [f64; 5]) {
        let c = self.r[3];
        let rho = self.r.map(|v| v / c);
        let mut p = [0.0; 5];
        for (l, v) in p.iter_mut().enumerate() {
            *v = self.p[l] * c.powi(l as i32 - 4);
        }
        (c, rho, p)
    }
}

/// Coefficients `p_1..p_{k+1}` (constant term first) of `Π (u − r_i)`.
pub fn poly_coeffs(roots: &[f64]) -> Result<Vec<f64>, RelaxError> {
    for (i, a) in roots.iter().enumerate() {
        if roots[i + 1..].contains(a) {
            return Err(RelaxError::NonDistinctRoots(roots.to_vec()));
        }
    }
    let mut p = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        p = next;
    }
    let scale = p[0].abs().max(1.0);
    for &r in roots {
        let v = p.iter().rev().fold(0.0, |acc, c| acc * r + c);
        if v.abs() > 1e-9 * scale {
            return Err(RelaxError::InvalidRoots(format!(
                "polynomial residual {v:e} at root {r}"
            )));
        }
    }
    Ok(p)
}

/// `f(S, s) = tr(HᵀH S) − 2 sᵀHᵀy + ‖y‖²`.
pub fn objective_f(instance: &Instance, point: &SdrPoint) -> Result<f64, RelaxError> {
    let n = instance.n();
    if point.s_vec.len() != n || point.s_mat.shape() != (n, n) {
        return Err(RelaxError::Dimension(format!(
            "point of size {} for an instance with N = {n}",
            point.s_vec.len()
        )));
    }
    let g = instance.h.transpose() * &instance.h;
    let hty = instance.h.transpose() * &instance.y;
    Ok(g.dot(&point.s_mat) - 2.0 * point.s_vec.dot(&hty) + instance.y.norm_squared())
}

/// Which relaxation to build.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    /// Bound-constrained: `lo ≤ S_ii ≤ hi`.
    Bc { lo: f64, hi: f64 },
    /// Polynomial-inspired, 16-QAM (roots `{1, 9}`).
    Pi16,
    /// Polynomial-inspired with a quartic over four roots.
    Pi64(RootSet),
    /// Virtually antipodal with `q` bit layers.
    Va { q: u32 },
}

impl Relaxation {
    /// BC with the default bounds `[1, (2^q − 1)²]`.
    pub fn bc_default(q: u32) -> Self {
        let m = ((1u64 << q) - 1) as f64;
        Relaxation::Bc { lo: 1.0, hi: m * m }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Relaxation::Bc { .. } => "bc",
            Relaxation::Pi16 | Relaxation::Pi64(_) => "pi",
            Relaxation::Va { .. } => "va",
        }
    }

    pub fn build(&self, instance: &Instance) -> Result<ConeProblem, RelaxError> {
        match self {
            Relaxation::Bc { lo, hi } => build_bc_sdr(instance, *lo, *hi),
            Relaxation::Pi16 => build_pi_sdr_16(instance),
            Relaxation::Pi64(roots) => build_pi_sdr_64(instance, roots),
            Relaxation::Va { q } => build_va_sdr(instance, *q),
        }
    }

    /// Reads `(S, s)` and the auxiliary variables out of a solution.
    pub fn extract(&self, solution: &ConeSolution, n: usize) -> SdrPoint {
        let x = &solution.x.psd;
        let (s_mat, s_vec) = split_bordered(&x[0]);
        match self {
            Relaxation::Bc { .. } => SdrPoint::new(s_mat, s_vec),
            Relaxation::Pi16 => {
                let (u_mat, u_vec) = split_bordered(&x[1]);
                SdrPoint {
                    s_mat,
                    s_vec,
                    aux: Some(Aux::Pi { u_mat, u_vec }),
                }
            }
            Relaxation::Pi64(roots) => {
                let (c, _, _) = roots.scaled();
                let d = DVector::from_fn(2 * n + 1, |k, _| {
                    if k < n {
                        c
                    } else if k < 2 * n {
                        c * c
                    } else {
                        1.0
                    }
                });
                let unscaled = DMatrix::from_fn(2 * n + 1, 2 * n + 1, |i, j| d[i] * x[1][(i, j)] * d[j]);
                let (u_mat, u_vec) = split_bordered(&unscaled);
                SdrPoint {
                    s_mat,
                    s_vec,
                    aux: Some(Aux::Pi { u_mat, u_vec }),
                }
            }
            Relaxation::Va { q } => {
                let (b_mat, b_vec) = split_bordered(&x[0]);
                let w = va_weight_matrix(n, *q);
                SdrPoint {
                    s_mat: &w * &b_mat * w.transpose(),
                    s_vec: &w * &b_vec,
                    aux: Some(Aux::Va { b_mat, b_vec }),
                }
            }
        }
    }
}

/// Builds and solves a relaxation, returning the solver output and the
/// extracted point.
pub fn solve_relaxation(
    instance: &Instance,
    relaxation: &Relaxation,
    opts: &SolverOptions,
) -> Result<(ConeSolution, SdrPoint), RelaxError> {
    let problem = relaxation.build(instance)?;
    let sol = sdp::solve(&problem, opts)?;
    let point = relaxation.extract(&sol, instance.n());
    Ok((sol, point))
}

fn split_bordered(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() - 1;
    let m = x.view((0, 0), (n, n)).into_owned();
    let v = DVector::from_fn(n, |i, _| 0.5 * (x[(i, n)] + x[(n, i)]));
    (m, v)
}

/// Objective block for `[[M, m], [mᵀ, 1]]` with `tr(G M) − 2 gᵀm`.
fn bordered_objective(g: &DMatrix<f64>, lin: &DVector<f64>) -> SymSparse {
    let n = lin.len();
    let mut c = SymSparse::new(n + 1);
    for j in 0..n {
        for i in 0..=j {
            c.push(i, j, g[(i, j)]);
        }
        c.push(j, n, -lin[j]);
    }
    c
}

fn corner(structure: &ConeStructure, block: usize) -> Constraint {
    let n = structure.psd_block_sizes[block];
    let mut a = Coefficients::zeros(structure);
    a.psd[block].push(n - 1, n - 1, 1.0);
    Constraint { coeffs: a, rhs: 1.0 }
}

fn s_block_objective(instance: &Instance, structure: &ConeStructure) -> Coefficients {
    let g = instance.h.transpose() * &instance.h;
    let hty = instance.h.transpose() * &instance.y;
    let mut obj = Coefficients::zeros(structure);
    obj.psd[0] = bordered_objective(&g, &hty);
    obj
}

/// BC relaxation. A degenerate box `lo == hi` (BPSK, `q = 1`) becomes the
/// equality `d(S) = lo`.
pub fn build_bc_sdr(instance: &Instance, lo: f64, hi: f64) -> Result<ConeProblem, RelaxError> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(RelaxError::Unsupported(format!("invalid bounds [{lo}, {hi}]")));
    }
    let n = instance.n();
    let fixed = lo == hi;
    let structure = ConeStructure {
        psd_block_sizes: vec![n + 1],
        nonneg_count: if fixed { 0 } else { 2 * n },
    };
    let mut constraints = vec![corner(&structure, 0)];
    for i in 0..n {
        if fixed {
            let mut a = Coefficients::zeros(&structure);
            a.psd[0].push(i, i, 1.0);
            constraints.push(Constraint { coeffs: a, rhs: lo });
            continue;
        }
        let mut a = Coefficients::zeros(&structure);
        a.psd[0].push(i, i, 1.0);
        a.nonneg.push((i, -1.0));
        constraints.push(Constraint { coeffs: a, rhs: lo });
        let mut a = Coefficients::zeros(&structure);
        a.psd[0].push(i, i, 1.0);
        a.nonneg.push((n + i, 1.0));
        constraints.push(Constraint { coeffs: a, rhs: hi });
    }
    Ok(ConeProblem {
        objective: s_block_objective(instance, &structure),
        structure,
        constraints,
        constant_term: instance.y.norm_squared(),
    })
}

pub fn build_pi_sdr_16(instance: &Instance) -> Result<ConeProblem, RelaxError> {
    if instance.q != 2 {
        return Err(RelaxError::Unsupported(format!(
            "the quadratic PI relaxation is defined for 16-QAM only (q = {})",
            instance.q
        )));
    }
    let n = instance.n();
    let structure = ConeStructure {
        psd_block_sizes: vec![n + 1, n + 1],
        nonneg_count: 0,
    };
    let mut constraints = vec![corner(&structure, 0), corner(&structure, 1)];
    for i in 0..n {
        // S_ii − u_i = 0
        let mut a = Coefficients::zeros(&structure);
        a.psd[0].push(i, i, 1.0);
        a.psd[1].push(i, n, -0.5);
        constraints.push(Constraint { coeffs: a, rhs: 0.0 });
        // U_ii − 10 u_i = −9
        let mut a = Coefficients::zeros(&structure);
        a.psd[1].push(i, i, 1.0);
        a.psd[1].push(i, n, -5.0);
        constraints.push(Constraint { coeffs: a, rhs: -9.0 });
    }
    Ok(ConeProblem {
        objective: s_block_objective(instance, &structure),
        structure,
        constraints,
        constant_term: instance.y.norm_squared(),
    })
}

/// PI relaxation over a quartic with arbitrary roots.
///
/// The lifted block is stored in units of `c = r₄`: the solver sees
/// `u₁/c`, `u₂/c²`, `U₁₁/c²`, `U₁₂/c³`, `U₂₂/c⁴`, and the polynomial row
/// uses the coefficients of the rescaled roots `r/c`. [`Relaxation::extract`]
/// undoes the scaling.
pub fn build_pi_sdr_64(instance: &Instance, roots: &RootSet) -> Result<ConeProblem, RelaxError> {
    if *roots == RootSet::canonical() && instance.q != 3 {
        return Err(RelaxError::Unsupported(format!(
            "canonical 64-QAM roots used with q = {}",
            instance.q
        )));
    }
    let n = instance.n();
    let (c, _, p) = roots.scaled();
    let structure = ConeStructure {
        psd_block_sizes: vec![n + 1, 2 * n + 1],
        nonneg_count: 0,
    };
    let last = 2 * n;
    let mut constraints = vec![corner(&structure, 0), corner(&structure, 1)];
    for i in 0..n {
        // S_ii = u1_i
        let mut a = Coefficients::zeros(&structure);
        a.psd[0].push(i, i, 1.0);
        a.psd[1].push(i, last, -0.5 * c);
        constraints.push(Constraint { coeffs: a, rhs: 0.0 });
        // (U11)_ii = u2_i
        let mut a = Coefficients::zeros(&structure);
        a.psd[1].push(i, i, 1.0);
        a.psd[1].push(n + i, last, -0.5);
        constraints.push(Constraint { coeffs: a, rhs: 0.0 });
        // p1 + p2 u1_i + p3 (U11)_ii + p4 (U12)_ii + p5 (U22)_ii = 0
        let mut a = Coefficients::zeros(&structure);
        a.psd[1].push(i, last, 0.5 * p[1]);
        a.psd[1].push(i, i, p[2]);
        a.psd[1].push(i, n + i, 0.5 * p[3]);
        a.psd[1].push(n + i, n + i, p[4]);
        constraints.push(Constraint {
            coeffs: a,
            rhs: -p[0],
        });
    }
    Ok(ConeProblem {
        objective: s_block_objective(instance, &structure),
        structure,
        constraints,
        constant_term: instance.y.norm_squared(),
    })
}

pub fn build_va_sdr(instance: &Instance, q: u32) -> Result<ConeProblem, RelaxError> {
    Constellation::new(q)?;
    let n = instance.n();
    let qn = q as usize * n;
    let w = va_weight_matrix(n, q);
    let hw = &instance.h * &w;
    let g = hw.transpose() * &hw;
    let lin = hw.transpose() * &instance.y;
    let structure = ConeStructure {
        psd_block_sizes: vec![qn + 1],
        nonneg_count: 0,
    };
    let mut objective = Coefficients::zeros(&structure);
    objective.psd[0] = bordered_objective(&g, &lin);
    let constraints = (0..=qn)
        .map(|k| {
            let mut a = Coefficients::zeros(&structure);
            a.psd[0].push(k, k, 1.0);
            Constraint { coeffs: a, rhs: 1.0 }
        })
        .collect();
    Ok(ConeProblem {
        structure,
        objective,
        constraints,
        constant_term: instance.y.norm_squared(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_instance;
    use crate::sdp::SolveStatus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(h: f64, y: f64, q: u32, s: f64) -> Instance {
        Instance::new(
            DMatrix::from_element(1, 1, h),
            DVector::from_element(1, y),
            DVector::from_element(1, s),
            q,
        )
        .unwrap()
    }

    fn solve_value(inst: &Instance, r: &Relaxation) -> (f64, SdrPoint) {
        let (sol, point) = solve_relaxation(inst, r, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{r:?}");
        (sol.objective, point)
    }

    /// Elementary symmetric polynomials of the roots (Vieta).
    fn vieta(r: &[i64]) -> Vec<i64> {
        let n = r.len();
        let mut e = vec![0i64; n + 1];
        for mask in 0u32..(1 << n) {
            let k = mask.count_ones() as usize;
            let prod: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).product();
            e[k] += prod;
        }
        // p_{ℓ} multiplies u^{ℓ−1}: coefficient of u^{n−k} is (−1)^k e_k.
        (0..=n)
            .map(|deg| {
                let k = n - deg;
                if k.is_multiple_of(2) {
                    e[k]
                } else {
                    -e[k]
                }
            })
            .collect()
    }

    #[test]
    fn poly_coeffs_examples() {
        assert_eq!(poly_coeffs(&[1.0, 9.0]).unwrap(), vec![9.0, -10.0, 1.0]);
        assert_eq!(poly_coeffs(&[4.0]).unwrap(), vec![-4.0, 1.0]);
        let p = poly_coeffs(&[1.0, 9.0, 25.0, 49.0]).unwrap();
        assert_eq!(p[0], 11025.0);
        let oracle: Vec<f64> = vieta(&[1, 9, 25, 49]).into_iter().map(|v| v as f64).collect();
        assert_eq!(p, oracle);
        assert_eq!(p, vec![11025.0, -12916.0, 1974.0, -84.0, 1.0]);
        assert!(matches!(
            poly_coeffs(&[1.0, 1.0]),
            Err(RelaxError::NonDistinctRoots(_))
        ));
    }

    #[test]
    fn root_set_validation() {
        assert!(RootSet::new([1.0, 2.0, 3.0, 100.0]).is_ok());
        assert!(RootSet::new([1.0, 2.0, 2.0, 3.0]).is_err());
        assert!(RootSet::new([0.0, 2.0, 3.0, 4.0]).is_err());
        assert!(RootSet::new([3.0, 2.0, 5.0, 7.0]).is_err());
        let rs = RootSet::canonical();
        for r in rs.r {
            assert!(rs.eval(r).abs() <= 1e-9 * rs.p[0]);
        }
        let (c, rho, p) = rs.scaled();
        assert_eq!(c, 49.0);
        for r in rho {
            let v: f64 = p.iter().rev().fold(0.0, |a, k| a * r + k);
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn objective_f_examples() {
        let inst = generate_instance(3, 2, 2, 10.0, 4).unwrap().to_real();
        let s = DVector::from_vec(vec![1.0, -3.0, 3.0, 1.0]);
        let f = objective_f(&inst, &SdrPoint::rank_one(&s)).unwrap();
        assert!((f - inst.objective(&s)).abs() < 1e-10);
        let zero = SdrPoint::new(DMatrix::zeros(4, 4), DVector::zeros(4));
        assert!((objective_f(&inst, &zero).unwrap() - inst.y.norm_squared()).abs() < 1e-12);

        // Term-by-term expansion oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-2.0..2.0));
        let s_mat = &a * a.transpose();
        let s_vec = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
        let (h, y) = (&inst.h, &inst.y);
        let mut oracle = 0.0;
        for k in 0..h.nrows() {
            for i in 0..4 {
                for j in 0..4 {
                    oracle += h[(k, i)] * h[(k, j)] * s_mat[(i, j)];
                }
                oracle -= 2.0 * s_vec[i] * h[(k, i)] * y[k];
            }
            oracle += y[k] * y[k];
        }
        let f = objective_f(&inst, &SdrPoint::new(s_mat, s_vec)).unwrap();
        assert!((f - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
        assert!(objective_f(&inst, &SdrPoint::rank_one(&DVector::zeros(3))).is_err());
    }

    #[test]
    fn bc_scalar_examples() {
        let (v, p) = solve_value(&scalar(1.0, 2.0, 2, 1.0), &Relaxation::bc_default(2));
        assert!(v.abs() < 1e-6);
        assert!((objective_f(&scalar(1.0, 2.0, 2, 1.0), &p).unwrap() - v).abs() < 1e-6);

        let inst = scalar(1.0, 5.0, 2, 3.0);
        let (v, p) = solve_value(&inst, &Relaxation::bc_default(2));
        assert!((v - 4.0).abs() < 1e-6);
        assert!((p.s_vec[0] - 3.0).abs() < 1e-4);
        assert!((p.s_mat[(0, 0)] - 9.0).abs() < 1e-4);
    }

    #[test]
    fn bc_separable_diagonal_channel() {
        // With a diagonal channel the relaxation splits into independent
        // scalar problems min_s h² max(s², lo) − 2 h y s + y² over
        // |s| ≤ √hi, each convex and solved here by ternary search.
        let h = [0.7, 1.3, -0.4];
        let y = [2.5, -6.0, 0.1];
        let (lo, hi) = (1.0f64, 9.0f64);
        let scalar_opt = |h: f64, y: f64| {
            let g = |s: f64| h * h * (s * s).max(lo) - 2.0 * h * y * s + y * y;
            let (mut a, mut b) = (-hi.sqrt(), hi.sqrt());
            for _ in 0..300 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if g(m1) < g(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            g(0.5 * (a + b))
        };
        let oracle: f64 = h.iter().zip(&y).map(|(&h, &y)| scalar_opt(h, y)).sum();
        let inst = Instance::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(&h)),
            DVector::from_row_slice(&y),
            DVector::from_vec(vec![1.0; 3]),
            2,
        )
        .unwrap();
        let (v, _) = solve_value(&inst, &Relaxation::Bc { lo, hi });
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn noiseless_instances_have_zero_value() {
        for (q, relax) in [
            (2, Relaxation::bc_default(2)),
            (2, Relaxation::Pi16),
            (2, Relaxation::Va { q: 2 }),
            (3, Relaxation::bc_default(3)),
            (3, Relaxation::Pi64(RootSet::canonical())),
            (3, Relaxation::Va { q: 3 }),
        ] {
            let inst = generate_instance(3, 2, q, f64::INFINITY, 9).unwrap().to_real();
            let (v, p) = solve_value(&inst, &relax);
            assert!(v.abs() < 1e-6, "{relax:?}: {v}");
            let scale = 1.0 + inst.s_true.norm_squared();
            assert!((&p.s_vec - &inst.s_true).norm() < 1e-3 * scale, "{relax:?}");
        }
    }

    #[test]
    fn rank_one_truth_is_feasible_with_zero_objective() {
        let inst = generate_instance(2, 2, 2, f64::INFINITY, 3).unwrap().to_real();
        let truth = SdrPoint::rank_one(&inst.s_true);
        assert!(objective_f(&inst, &truth).unwrap().abs() < 1e-10);
    }

    #[test]
    fn equal_values_across_relaxations() {
        for seed in 0..4 {
            let inst = generate_instance(2, 2, 2, 8.0, seed).unwrap().to_real();
            let (bc, _) = solve_value(&inst, &Relaxation::bc_default(2));
            let (pi, _) = solve_value(&inst, &Relaxation::Pi16);
            let (va, _) = solve_value(&inst, &Relaxation::Va { q: 2 });
            assert!((bc - pi).abs() <= 1e-5 * (1.0 + bc.abs()), "{bc} {pi}");
            assert!((bc - va).abs() <= 1e-5 * (1.0 + bc.abs()), "{bc} {va}");

            let inst = generate_instance(2, 2, 3, 15.0, seed).unwrap().to_real();
            let (bc, _) = solve_value(&inst, &Relaxation::bc_default(3));
            let (pi, _) = solve_value(&inst, &Relaxation::Pi64(RootSet::canonical()));
            let (va, _) = solve_value(&inst, &Relaxation::Va { q: 3 });
            assert!((bc - pi).abs() <= 1e-5 * (1.0 + bc.abs()), "{bc} {pi}");
            assert!((bc - va).abs() <= 1e-5 * (1.0 + bc.abs()), "{bc} {va}");
        }
    }

    #[test]
    fn va_order_one_is_the_correlation_sdp() {
        let inst = generate_instance(2, 2, 1, 5.0, 2).unwrap().to_real();
        let p = build_va_sdr(&inst, 1).unwrap();
        assert_eq!(p.structure.psd_block_sizes, vec![5]);
        assert_eq!(p.structure.nonneg_count, 0);
        assert_eq!(p.constraints.len(), 5);
        for (k, c) in p.constraints.iter().enumerate() {
            assert_eq!(c.rhs, 1.0);
            assert_eq!(c.coeffs.psd[0].entries, vec![(k, k, 1.0)]);
        }
        // Objective block is [[HᵀH, −Hᵀy], [−yᵀH, 0]].
        let c = p.objective.psd[0].to_dense();
        let g = inst.h.transpose() * &inst.h;
        assert!((c.view((0, 0), (4, 4)) - g).norm() < 1e-14);
    }

    #[test]
    fn va_extraction_of_antipodal_lift() {
        let inst = generate_instance(2, 1, 2, f64::INFINITY, 5).unwrap().to_real();
        let (_, p) = solve_value(&inst, &Relaxation::Va { q: 2 });
        let c = inst.constellation();
        let rounded = p.s_vec.map(|v| c.decide(v));
        assert_eq!(rounded, inst.s_true);
        assert!(p.s_vec.iter().all(|v| (v - c.decide(*v)).abs() < 1e-3));
    }

    #[test]
    fn pi_diagonal_stays_in_box() {
        let inst = generate_instance(2, 2, 2, 0.0, 8).unwrap().to_real();
        let (_, p) = solve_value(&inst, &Relaxation::Pi16);
        for i in 0..inst.n() {
            let d = p.s_mat[(i, i)];
            assert!((1.0 - 1e-6..=9.0 + 1e-6).contains(&d), "{d}");
        }
    }

    #[test]
    fn objective_matches_extracted_point() {
        let inst = generate_instance(3, 3, 3, 12.0, 6).unwrap().to_real();
        for relax in [
            Relaxation::bc_default(3),
            Relaxation::Pi64(RootSet::canonical()),
            Relaxation::Va { q: 3 },
        ] {
            let (v, p) = solve_value(&inst, &relax);
            let f = objective_f(&inst, &p).unwrap();
            assert!((v - f).abs() <= 1e-8 * (1.0 + v.abs()), "{relax:?}: {v} vs {f}");
        }
    }

    #[test]
    fn unsupported_combinations() {
        let inst = generate_instance(2, 2, 3, 10.0, 0).unwrap().to_real();
        assert!(matches!(build_pi_sdr_16(&inst), Err(RelaxError::Unsupported(_))));
        let inst2 = generate_instance(2, 2, 2, 10.0, 0).unwrap().to_real();
        assert!(build_pi_sdr_64(&inst2, &RootSet::canonical()).is_err());
        assert!(build_bc_sdr(&inst, 9.0, 1.0).is_err());
    }
}
