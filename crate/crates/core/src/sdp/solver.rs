//! Infeasible-start primal-dual path-following method with the HKM search
//! direction and a Mehrotra predictor-corrector.
//!
//! Each equality row is scaled to unit norm and the objective to unit norm
//! before iterating; reported duals and objectives are in the original
//! scaling, convergence measures in the scaled one.

use log::{info, trace};
use nalgebra::{Cholesky, DMatrix, DVector, LU};

use super::linalg::min_eig;
use super::{ConeProblem, ConeSolution, ConeVector, IterationInfo, SdpError, SolveStatus, SolverOptions};

/// One constraint row with each symmetric entry listed in both orders.
struct Row {
    psd: Vec<Vec<(usize, usize, f64)>>,
    lin: Vec<(usize, f64)>,
}

struct Scaled {
    sizes: Vec<usize>,
    nonneg: usize,
    c: ConeVector,
    c_norm: f64,
    rows: Vec<Row>,
    b: DVector<f64>,
    row_scale: Vec<f64>,
    obj_scale: f64,
    constant: f64,
}

impl Scaled {
    fn new(p: &ConeProblem) -> Self {
        let sizes = p.structure.psd_block_sizes.clone();
        let nonneg = p.structure.nonneg_count;

        let obj_norm = p.objective.norm();
        let obj_scale = if obj_norm > 0.0 { obj_norm } else { 1.0 };
        let mut c = ConeVector {
            psd: p.objective.psd.iter().map(|s| s.to_dense() / obj_scale).collect(),
            nonneg: DVector::zeros(nonneg),
        };
        for &(k, v) in &p.objective.nonneg {
            c.nonneg[k] += v / obj_scale;
        }

        let mut rows = Vec::with_capacity(p.constraints.len());
        let mut row_scale = Vec::with_capacity(p.constraints.len());
        let mut b = DVector::zeros(p.constraints.len());
        for (i, con) in p.constraints.iter().enumerate() {
            let scale = con.coeffs.norm();
            let psd = con
                .coeffs
                .psd
                .iter()
                .map(|blk| {
                    let mut e = Vec::with_capacity(2 * blk.entries.len());
                    for &(r, s, v) in &blk.entries {
                        e.push((r, s, v / scale));
                        if r != s {
                            e.push((s, r, v / scale));
                        }
                    }
                    e
                })
                .collect();
            let mut dense_lin = vec![0.0; nonneg];
            for &(k, v) in &con.coeffs.nonneg {
                dense_lin[k] += v / scale;
            }
            let lin = dense_lin
                .into_iter()
                .enumerate()
                .filter(|&(_, v)| v != 0.0)
                .collect();
            rows.push(Row { psd, lin });
            row_scale.push(scale);
            b[i] = con.rhs / scale;
        }
        let c_norm = c.norm();
        Self {
            sizes,
            nonneg,
            c,
            c_norm,
            rows,
            b,
            row_scale,
            obj_scale,
            constant: p.constant_term / obj_scale,
        }
    }

    fn degree(&self) -> f64 {
        (self.sizes.iter().sum::<usize>() + self.nonneg) as f64
    }

    /// `A(P)` for blocks that need not be symmetric.
    fn apply(&self, p: &ConeVector) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let psd: f64 = row
                    .psd
                    .iter()
                    .zip(&p.psd)
                    .map(|(e, pb)| e.iter().map(|&(r, s, v)| v * pb[(r, s)]).sum::<f64>())
                    .sum();
                psd + row.lin.iter().map(|&(k, v)| v * p.nonneg[k]).sum::<f64>()
            }),
        )
    }

    /// `A*(y) = Σ y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> ConeVector {
        let mut out = ConeVector::scaled_identity_like(&self.sizes, self.nonneg);
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for (e, ob) in row.psd.iter().zip(out.psd.iter_mut()) {
                for &(r, s, v) in e {
                    ob[(r, s)] += yi * v;
                }
            }
            for &(k, v) in &row.lin {
                out.nonneg[k] += yi * v;
            }
        }
        out
    }

    /// HKM Schur complement `M_ij = Σ_b tr(A_i X A_j Z⁻¹) + Σ_l a_il a_jl x_l / z_l`.
    fn schur(&self, x: &ConeVector, zinv: &ConeVector) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for (b, (xb, zb)) in x.psd.iter().zip(&zinv.psd).enumerate() {
                    let ei = &self.rows[i].psd[b];
                    let ej = &self.rows[j].psd[b];
                    if ei.is_empty() || ej.is_empty() {
                        continue;
                    }
                    for &(p, q, a) in ei {
                        for &(r, s, c) in ej {
                            acc += a * c * xb[(q, r)] * zb[(s, p)];
                        }
                    }
                }
                let (li, lj) = (&self.rows[i].lin, &self.rows[j].lin);
                let (mut u, mut w) = (0, 0);
                while u < li.len() && w < lj.len() {
                    match li[u].0.cmp(&lj[w].0) {
                        std::cmp::Ordering::Less => u += 1,
                        std::cmp::Ordering::Greater => w += 1,
                        std::cmp::Ordering::Equal => {
                            let k = li[u].0;
                            acc += li[u].1 * lj[w].1 * x.nonneg[k] * zinv.nonneg[k];
                            u += 1;
                            w += 1;
                        }
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }
}

impl ConeVector {
    fn scaled_identity_like(sizes: &[usize], nonneg: usize) -> Self {
        Self {
            psd: sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
            nonneg: DVector::zeros(nonneg),
        }
    }

    fn axpy(&mut self, alpha: f64, d: &ConeVector) {
        for (a, b) in self.psd.iter_mut().zip(&d.psd) {
            *a += b * alpha;
        }
        self.nonneg += &d.nonneg * alpha;
    }
}

enum SchurFactor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        match Cholesky::new(m.clone()) {
            Some(c) => Some(Self::Chol(c)),
            None => {
                let lu = LU::new(m);
                lu.is_invertible().then_some(Self::Lu(lu))
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let sol = match self {
            Self::Chol(c) => Some(c.solve(rhs)),
            Self::Lu(l) => l.solve(rhs),
        }?;
        sol.iter().all(|v| v.is_finite()).then_some(sol)
    }
}

struct Iterate {
    x: ConeVector,
    y: DVector<f64>,
    z: ConeVector,
}

struct Direction {
    dx: ConeVector,
    dy: DVector<f64>,
    dz: ConeVector,
}

/// Largest `α` with `X + α dX ⪰ 0` (or `+∞`).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(a1) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(a2) = l.solve_lower_triangular(&a1.transpose()) else {
        return 0.0;
    };
    let lam = min_eig(&a2);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn max_step(x: &ConeVector, dx: &ConeVector) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.psd.iter().zip(&dx.psd) {
        alpha = alpha.min(max_step_psd(xb, db));
    }
    for (xi, di) in x.nonneg.iter().zip(dx.nonneg.iter()) {
        if *di < 0.0 {
            alpha = alpha.min(-xi / di);
        }
    }
    alpha
}

fn inverse_blocks(z: &ConeVector) -> Option<ConeVector> {
    let mut psd = Vec::with_capacity(z.psd.len());
    for zb in &z.psd {
        psd.push(Cholesky::new(zb.clone())?.inverse());
    }
    if z.nonneg.iter().any(|&v| v <= 0.0) {
        return None;
    }
    Some(ConeVector {
        psd,
        nonneg: z.nonneg.map(|v| 1.0 / v),
    })
}

/// Refinement passes per search direction.
const REFINE_STEPS: usize = 2;

/// Non-improving iterations tolerated after convergence.
const POLISH_PATIENCE: usize = 3;

struct Measures {
    pobj: f64,
    dobj: f64,
    /// Relative gap of the normalized problem.
    gap: f64,
    /// Relative gap in the units of the original objective.
    abs_gap: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
    rp: DVector<f64>,
    rd: ConeVector,
}

impl Scaled {
    fn measures(&self, it: &Iterate) -> Measures {
        let rp = &self.b - self.apply(&it.x);
        let aty = self.adjoint(&it.y);
        let mut rd = self.c.clone();
        rd.axpy(-1.0, &aty);
        rd.axpy(-1.0, &it.z);
        let pobj = self.c.dot(&it.x);
        let dobj = self.b.dot(&it.y);
        let compl = it.x.dot(&it.z);
        let (p, d) = ((pobj + self.constant).abs(), (dobj + self.constant).abs());
        let s = self.obj_scale;
        Measures {
            pobj,
            dobj,
            gap: (pobj - dobj).abs() / (1.0 + p + d),
            abs_gap: s * (pobj - dobj).abs() / (1.0 + s * p + s * d),
            pinf: rp.norm() / (1.0 + self.b.norm()),
            dinf: rd.norm() / (1.0 + self.c_norm),
            mu: compl / self.degree(),
            rp,
            rd,
        }
    }

    /// Solves the linearized system for a complementarity target `T`,
    /// where `dX = T − X dZ Z⁻¹` (symmetrized) on PSD blocks and
    /// `dx = t − x dz / z` on the orthant.
    fn direction(
        &self,
        it: &Iterate,
        zinv: &ConeVector,
        factor: &SchurFactor,
        meas: &Measures,
        target: &ConeVector,
    ) -> Option<Direction> {
        let mut w = target.clone();
        for (b, wb) in w.psd.iter_mut().enumerate() {
            *wb -= &it.x.psd[b] * &meas.rd.psd[b] * &zinv.psd[b];
        }
        for k in 0..self.nonneg {
            w.nonneg[k] -= it.x.nonneg[k] * meas.rd.nonneg[k] * zinv.nonneg[k];
        }
        let rhs = &meas.rp - self.apply(&w);
        let dy = factor.solve(&rhs)?;
        let mut dz = meas.rd.clone();
        dz.axpy(-1.0, &self.adjoint(&dy));
        let mut dx = target.clone();
        for (b, db) in dx.psd.iter_mut().enumerate() {
            *db -= &it.x.psd[b] * &dz.psd[b] * &zinv.psd[b];
            let sym = (&*db + db.transpose()) * 0.5;
            *db = sym;
        }
        for k in 0..self.nonneg {
            dx.nonneg[k] -= it.x.nonneg[k] * dz.nonneg[k] * zinv.nonneg[k];
        }
        let mut dy = dy;
        // Iterative refinement against the primal residual `rp − A dX`;
        // the Schur matrix loses accuracy near a rank-deficient optimum.
        for _ in 0..REFINE_STEPS {
            let err = &meas.rp - self.apply(&dx);
            if err.norm() <= 1e-15 * (1.0 + meas.rp.norm()) {
                break;
            }
            let ey = factor.solve(&err)?;
            let aty = self.adjoint(&ey);
            dy += &ey;
            dz.axpy(-1.0, &aty);
            for (b, db) in dx.psd.iter_mut().enumerate() {
                let c = &it.x.psd[b] * &aty.psd[b] * &zinv.psd[b];
                *db += (&c + c.transpose()) * 0.5;
            }
            for k in 0..self.nonneg {
                dx.nonneg[k] += it.x.nonneg[k] * aty.nonneg[k] * zinv.nonneg[k];
            }
        }
        Some(Direction { dx, dy, dz })
    }
}

/// Solves a cone problem. Failures to converge are reported through
/// [`SolveStatus`] together with the best iterate seen.
pub fn solve(problem: &ConeProblem, opts: &SolverOptions) -> Result<ConeSolution, SdpError> {
    problem.validate()?;
    let sc = Scaled::new(problem);
    let tau = 1.0 + sc.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut it = Iterate {
        x: ConeVector::scaled_identity(&problem.structure, tau),
        y: DVector::zeros(sc.rows.len()),
        z: ConeVector::scaled_identity(&problem.structure, tau),
    };

    let mut trace = Vec::new();
    let mut best: Option<(f64, Iterate, Measures, usize)> = None;
    // Converged iterates, ranked by the gap in original units.
    let mut polished: Option<(f64, Iterate, Measures, usize)> = None;
    let mut stalls = 0;
    let mut status = SolveStatus::MaxIterations;
    let (mut step_p, mut step_d) = (0.0, 0.0);

    for iter in 0..=opts.max_iters {
        let meas = sc.measures(&it);
        let info = IterationInfo {
            iteration: iter,
            primal_objective: sc.obj_scale * (meas.pobj + sc.constant),
            dual_objective: sc.obj_scale * (meas.dobj + sc.constant),
            gap: meas.gap,
            primal_infeas: meas.pinf,
            dual_infeas: meas.dinf,
            mu: meas.mu,
            step_primal: step_p,
            step_dual: step_d,
        };
        if opts.verbose {
            info!(
                "iter {:3}  pobj {:+.9e}  dobj {:+.9e}  gap {:.2e}  pinf {:.2e}  dinf {:.2e}  steps {:.3}/{:.3}",
                iter, info.primal_objective, info.dual_objective, meas.gap, meas.pinf, meas.dinf, step_p, step_d
            );
        } else {
            trace!("iter {iter}: gap {:.2e} pinf {:.2e} dinf {:.2e}", meas.gap, meas.pinf, meas.dinf);
        }
        trace.push(info);

        let merit = (meas.gap / opts.gap_tol)
            .max(meas.pinf / opts.feas_tol)
            .max(meas.dinf / opts.feas_tol);
        let converged = meas.gap <= opts.gap_tol
            && meas.pinf <= opts.feas_tol
            && meas.dinf <= opts.feas_tol;
        if converged {
            // Keep polishing while the original-units gap still improves;
            // degenerate optima stall short of it.
            if polished.as_ref().is_none_or(|b| meas.abs_gap < b.0) {
                stalls = 0;
                let done = meas.abs_gap <= opts.gap_tol;
                polished = Some((meas.abs_gap, clone_iterate(&it), clone_measures(&meas), iter));
                if done {
                    break;
                }
            } else {
                stalls += 1;
                if stalls >= POLISH_PATIENCE {
                    break;
                }
            }
        } else if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, clone_iterate(&it), clone_measures(&meas), iter));
        }
        if iter == opts.max_iters {
            break;
        }

        let Some(zinv) = inverse_blocks(&it.z) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some(factor) = SchurFactor::new(sc.schur(&it.x, &zinv)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        // Predictor: pure Newton step toward complementarity.
        let mut target = it.x.clone();
        target.psd.iter_mut().for_each(|b| b.neg_mut());
        target.nonneg.neg_mut();
        let Some(aff) = sc.direction(&it, &zinv, &factor, &meas, &target) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = max_step(&it.x, &aff.dx).min(1.0);
        let ad = max_step(&it.z, &aff.dz).min(1.0);
        let mut xa = it.x.clone();
        xa.axpy(ap, &aff.dx);
        let mut za = it.z.clone();
        za.axpy(ad, &aff.dz);
        let mu_aff = xa.dot(&za) / sc.degree();
        let sigma = if meas.mu > 0.0 {
            (mu_aff / meas.mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };
        let smu = sigma * meas.mu;

        // Corrector with the second-order term dXa dZa Z⁻¹.
        let mut target = it.x.clone();
        for (b, tb) in target.psd.iter_mut().enumerate() {
            let corr = &aff.dx.psd[b] * &aff.dz.psd[b] * &zinv.psd[b];
            *tb = &zinv.psd[b] * smu - &*tb - corr;
        }
        for k in 0..sc.nonneg {
            target.nonneg[k] = smu * zinv.nonneg[k]
                - it.x.nonneg[k]
                - aff.dx.nonneg[k] * aff.dz.nonneg[k] * zinv.nonneg[k];
        }
        let Some(dir) = sc.direction(&it, &zinv, &factor, &meas, &target) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        step_p = (opts.step_fraction * max_step(&it.x, &dir.dx)).min(1.0);
        step_d = (opts.step_fraction * max_step(&it.z, &dir.dz)).min(1.0);
        if step_p.max(step_d) < 1e-12 || !step_p.is_finite() || !step_d.is_finite() {
            status = SolveStatus::NumericalFailure;
            break;
        }
        it.x.axpy(step_p, &dir.dx);
        it.y += &dir.dy * step_d;
        it.z.axpy(step_d, &dir.dz);
    }

    if polished.is_some() {
        status = SolveStatus::Optimal;
    }
    let (_, best_it, meas, iters) = polished
        .or(best)
        .expect("at least one iterate is measured");
    let iterations = if status == SolveStatus::Optimal {
        iters
    } else {
        trace.len().saturating_sub(1)
    };
    let dual_y = DVector::from_iterator(
        best_it.y.len(),
        best_it
            .y
            .iter()
            .zip(&sc.row_scale)
            .map(|(&y, &s)| y * sc.obj_scale / s),
    );
    let mut dual_z = best_it.z.clone();
    dual_z.psd.iter_mut().for_each(|b| *b *= sc.obj_scale);
    dual_z.nonneg *= sc.obj_scale;
    Ok(ConeSolution {
        objective: sc.obj_scale * (meas.pobj + sc.constant),
        dual_objective: sc.obj_scale * (meas.dobj + sc.constant),
        x: best_it.x,
        dual_y,
        dual_z,
        status,
        gap: meas.gap,
        primal_infeas: meas.pinf,
        dual_infeas: meas.dinf,
        iterations,
        trace,
    })
}

fn clone_iterate(it: &Iterate) -> Iterate {
    Iterate {
        x: it.x.clone(),
        y: it.y.clone(),
        z: it.z.clone(),
    }
}

fn clone_measures(m: &Measures) -> Measures {
    Measures {
        pobj: m.pobj,
        dobj: m.dobj,
        gap: m.gap,
        abs_gap: m.abs_gap,
        pinf: m.pinf,
        dinf: m.dinf,
        mu: m.mu,
        rp: m.rp.clone(),
        rd: m.rd.clone(),
    }
}
