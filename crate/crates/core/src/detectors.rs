//! Symbol decisions from relaxation points, plus the zero-forcing, exhaustive
//! ML and sphere-decoding baselines.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::model::{bits_to_symbols, dec, Instance, ModelError};
use crate::relaxations::{Aux, SdrPoint};
use crate::sdp::sym_eigen_clipped;

/// Default enumeration cap for [`ml_exhaustive`].
pub const ML_CAP: u64 = 1 << 20;

/// Tolerance on the most negative covariance eigenvalue in randomized
/// rounding, relative to `1 + tr(S − s sᵀ)`.
pub const COVARIANCE_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point carries no bit variables")]
    MissingBits,
    #[error("covariance S − s sᵀ has eigenvalue {0:e}")]
    CovarianceNotPsd(f64),
    #[error("channel matrix is rank deficient")]
    RankDeficient,
    #[error("{size} candidates exceed the enumeration cap {cap}")]
    CapExceeded { size: u64, cap: u64 },
}

/// A hard decision together with its ML metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub s_hat: DVector<f64>,
    /// `‖y − H ŝ‖²`.
    pub objective: f64,
    pub method: String,
}

impl Decision {
    fn new(instance: &Instance, s_hat: DVector<f64>, method: &str) -> Self {
        Self {
            objective: instance.objective(&s_hat),
            s_hat,
            method: method.to_string(),
        }
    }
}

fn check_len(v: &DVector<f64>, expected: usize, what: &str) -> Result<(), DetectError> {
    if v.len() != expected {
        return Err(DetectError::Dimension(format!(
            "{what} has length {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// `ŝ = dec(s)`.
pub fn simple_rounding(point: &SdrPoint, instance: &Instance) -> Result<Decision, DetectError> {
    check_len(&point.s_vec, instance.n(), "s")?;
    Ok(Decision::new(instance, dec(&point.s_vec, instance.q)?, "simple"))
}

/// Sign of each bit with `sgn(0) = +1`, recombined as `Σ_j 2^j sgn(b_j)`.
pub fn round_bits_i(b: &DVector<f64>, n: usize, q: u32) -> Result<DVector<f64>, DetectError> {
    check_len(b, q as usize * n, "bit vector")?;
    let signs = b.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
    Ok(bits_to_symbols(&signs, n, q)?)
}

/// `dec(W b)`.
pub fn round_bits_ii(b: &DVector<f64>, n: usize, q: u32) -> Result<DVector<f64>, DetectError> {
    check_len(b, q as usize * n, "bit vector")?;
    Ok(dec(&bits_to_symbols(b, n, q)?, q)?)
}

pub fn va_rounding_i(b: &DVector<f64>, instance: &Instance) -> Result<Decision, DetectError> {
    let s = round_bits_i(b, instance.n(), instance.q)?;
    Ok(Decision::new(instance, s, "va-rounding-i"))
}

pub fn va_rounding_ii(b: &DVector<f64>, instance: &Instance) -> Result<Decision, DetectError> {
    let s = round_bits_ii(b, instance.n(), instance.q)?;
    Ok(Decision::new(instance, s, "va-rounding-ii"))
}

/// Bit vector of a VA point.
pub fn va_bits(point: &SdrPoint) -> Result<&DVector<f64>, DetectError> {
    match &point.aux {
        Some(Aux::Va { b_vec, .. }) => Ok(b_vec),
        _ => Err(DetectError::MissingBits),
    }
}

/// Draws `count` Gaussian samples with mean `s` and covariance `S − s sᵀ`,
/// decides each, and keeps the best candidate (including `dec(s)`) under the
/// ML metric. Earlier candidates win ties; `dec(s)` comes first.
pub fn gaussian_randomized_rounding(
    point: &SdrPoint,
    instance: &Instance,
    count: usize,
    seed: u64,
) -> Result<Decision, DetectError> {
    let n = instance.n();
    check_len(&point.s_vec, n, "s")?;
    if point.s_mat.shape() != (n, n) {
        return Err(DetectError::Dimension("S has the wrong shape".into()));
    }
    let q = instance.q;
    let mut best = simple_rounding(point, instance)?;
    best.method = "randomized".into();
    if count == 0 {
        return Ok(best);
    }
    let cov = &point.s_mat - &point.s_vec * point.s_vec.transpose();
    let raw = nalgebra::SymmetricEigen::new((&cov + cov.transpose()) * 0.5);
    let lo = raw.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < -COVARIANCE_TOL * (1.0 + cov.trace().abs()) {
        return Err(DetectError::CovarianceNotPsd(lo));
    }
    let (lambda, v) = sym_eigen_clipped(&cov);
    let factor = &v * DMatrix::from_diagonal(&lambda.map(f64::sqrt));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let s = dec(&(&point.s_vec + &factor * g), q)?;
        let obj = instance.objective(&s);
        if obj < best.objective {
            best.s_hat = s;
            best.objective = obj;
        }
    }
    Ok(best)
}

/// Column-pivot-free QR with a rank check on the diagonal of `R`.
fn qr_full_rank(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), DetectError> {
    let (m, n) = h.shape();
    if m < n || n == 0 {
        return Err(DetectError::RankDeficient);
    }
    let qr = h.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let scale = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(DetectError::RankDeficient);
    }
    Ok((q, r))
}

/// `ŝ = dec(H⁺ y)`.
pub fn zf_detect(instance: &Instance) -> Result<Decision, DetectError> {
    let (q, r) = qr_full_rank(&instance.h)?;
    let rhs = q.transpose() * &instance.y;
    let ls = r
        .solve_upper_triangular(&rhs)
        .ok_or(DetectError::RankDeficient)?;
    Ok(Decision::new(instance, dec(&ls, instance.q)?, "zf"))
}

pub fn ml_exhaustive(instance: &Instance) -> Result<Decision, DetectError> {
    ml_exhaustive_with_cap(instance, ML_CAP)
}

/// Full enumeration of `L(q)^N` in lexicographic order (ascending levels,
/// first coordinate most significant); the first minimizer wins ties.
pub fn ml_exhaustive_with_cap(instance: &Instance, cap: u64) -> Result<Decision, DetectError> {
    let levels = instance.constellation().levels().to_vec();
    let n = instance.n();
    let size = (levels.len() as u64)
        .checked_pow(n as u32)
        .unwrap_or(u64::MAX);
    if size > cap {
        return Err(DetectError::CapExceeded { size, cap });
    }
    let (m, h, y) = (instance.m(), &instance.h, &instance.y);
    let mut idx = vec![0usize; n];
    let mut best_idx = idx.clone();
    let mut best = f64::INFINITY;
    let mut r = vec![0.0; m];
    loop {
        r.copy_from_slice(y.as_slice());
        for (j, &k) in idx.iter().enumerate() {
            let col = h.column(j);
            let l = levels[k];
            for (ri, hij) in r.iter_mut().zip(col.iter()) {
                *ri -= hij * l;
            }
        }
        let obj: f64 = r.iter().map(|v| v * v).sum();
        if obj < best {
            best = obj;
            best_idx.copy_from_slice(&idx);
        }
        // Odometer step, last coordinate fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let s = DVector::from_iterator(n, best_idx.iter().map(|&k| levels[k]));
                return Ok(Decision::new(instance, s, "ml"));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < levels.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Starting radius for [`sphere_decode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusPolicy {
    /// Metric of the zero-forcing decision, inflated by `1 + 1e-9` plus a
    /// `1e-12 (1 + ‖Qᵀy‖²)` absolute slack.
    #[default]
    ZeroForcing,
    Infinite,
}

struct Search<'a> {
    r: &'a DMatrix<f64>,
    z: &'a DVector<f64>,
    levels: &'a [f64],
    radius: f64,
    current: Vec<f64>,
    best: Option<Vec<f64>>,
}

impl Search<'_> {
    /// Depth-first over coordinates `k, k−1, …, 0` with children visited in
    /// order of distance to the interference-cancelled center.
    fn visit(&mut self, k: usize, partial: f64) {
        let n = self.current.len();
        let mut acc = self.z[k];
        for j in k + 1..n {
            acc -= self.r[(k, j)] * self.current[j];
        }
        let rkk = self.r[(k, k)];
        let center = acc / rkk;
        let mut order: Vec<f64> = self.levels.to_vec();
        order.sort_by(|a, b| {
            (a - center)
                .abs()
                .partial_cmp(&(b - center).abs())
                .unwrap()
                .then(a.partial_cmp(b).unwrap())
        });
        for l in order {
            let e = acc - rkk * l;
            let d = partial + e * e;
            if d > self.radius {
                // Children are sorted by distance, so the rest are farther.
                break;
            }
            self.current[k] = l;
            if k == 0 {
                if self.best.is_none() || d < self.radius {
                    self.radius = d;
                    self.best = Some(self.current.clone());
                }
            } else {
                self.visit(k - 1, d);
            }
        }
    }
}

/// Exact ML by Schnorr–Euchner enumeration over the QR-factored problem
/// `‖Qᵀy − R s‖²`, shrinking the radius at every leaf.
pub fn sphere_decode(instance: &Instance, policy: RadiusPolicy) -> Result<Decision, DetectError> {
    let (q, r) = qr_full_rank(&instance.h)?;
    let z = q.transpose() * &instance.y;
    let levels = instance.constellation().levels().to_vec();
    let radius = match policy {
        RadiusPolicy::ZeroForcing => {
            let zf = zf_detect(instance)?.s_hat;
            // The absolute term absorbs rounding when the metric is zero.
            (&z - &r * zf).norm_squared() * (1.0 + 1e-9) + 1e-12 * (1.0 + z.norm_squared())
        }
        RadiusPolicy::Infinite => f64::INFINITY,
    };
    let n = instance.n();
    let mut search = Search {
        r: &r,
        z: &z,
        levels: &levels,
        radius,
        current: vec![0.0; n],
        best: None,
    };
    search.visit(n - 1, 0.0);
    let best = search
        .best
        .expect("the zero-forcing point lies inside the initial radius");
    Ok(Decision::new(instance, DVector::from_vec(best), "sphere"))
}

/// Complex-symbol and vector error counts. Symbol `i` pairs real components
/// `i` and `i + N/2`.
pub fn symbol_error_count(s_hat: &DVector<f64>, s_true: &DVector<f64>) -> (usize, usize) {
    assert_eq!(s_hat.len(), s_true.len(), "decision and truth lengths differ");
    assert!(s_hat.len().is_multiple_of(2), "real dimension must be even");
    let half = s_hat.len() / 2;
    let errors = (0..half)
        .filter(|&i| s_hat[i] != s_true[i] || s_hat[i + half] != s_true[i + half])
        .count();
    (errors, usize::from(errors > 0))
}
