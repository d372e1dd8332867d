//! MIMO system model.
//!
//! A complex model `ỹ = H̃ s̃ + ṽ` with symbols from 4^q-QAM is mapped to the
//! stacked real model `y = H s + ν` with `N = 2Ñ` real unknowns, each drawn
//! from the level set `L(q) = {±1, ±3, …, ±(2^q − 1)}`.

mod io;

pub use io::InstanceFile;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

pub type Complex64 = Complex<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("constellation order must be at least 1 (got {0})")]
    InvalidOrder(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value {value} is not a level of the {size}-ary PAM alphabet")]
    NotALevel { value: f64, size: usize },
    #[error("instance file parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
}

/// The real-dimension PAM alphabet underlying 4^q-QAM.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    q: u32,
    levels: Vec<f64>,
    per_dim_energy: f64,
}

impl Constellation {
    pub fn new(q: u32) -> Result<Self, ModelError> {
        if q == 0 || q > 16 {
            return Err(ModelError::InvalidOrder(q));
        }
        let max = (1i64 << q) - 1;
        let levels: Vec<f64> = (0..(1i64 << q)).map(|k| (2 * k - max) as f64).collect();
        let per_dim_energy = ((4f64).powi(q as i32) - 1.0) / 3.0;
        Ok(Self {
            q,
            levels,
            per_dim_energy,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Levels sorted ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Mean of the squared levels, `(4^q − 1)/3`.
    pub fn per_dim_energy(&self) -> f64 {
        self.per_dim_energy
    }

    /// Mean energy of a complex symbol, `2 (4^q − 1)/3`.
    pub fn symbol_energy(&self) -> f64 {
        2.0 * self.per_dim_energy
    }

    pub fn max_level(&self) -> f64 {
        ((1u64 << self.q) - 1) as f64
    }

    pub fn contains(&self, x: f64) -> bool {
        self.levels.contains(&x)
    }

    /// Nearest level; exact midpoints go to the level of smaller magnitude
    /// and zero maps to `+1`.
    pub fn decide(&self, x: f64) -> f64 {
        let a = x.abs().min(self.max_level());
        let k = (a / 2.0).ceil().max(1.0);
        let level = 2.0 * k - 1.0;
        if x < 0.0 {
            -level
        } else {
            level
        }
    }

    /// Canonical decomposition `level = Σ_j 2^j b_j` with `b_j ∈ {±1}`,
    /// extracted greedily from the most significant layer.
    pub fn level_bits(&self, level: f64) -> Result<Vec<f64>, ModelError> {
        if !self.contains(level) {
            return Err(ModelError::NotALevel {
                value: level,
                size: self.levels.len(),
            });
        }
        let mut bits = vec![0.0; self.q as usize];
        let mut rest = level;
        for j in (0..self.q as usize).rev() {
            let b = if rest > 0.0 { 1.0 } else { -1.0 };
            bits[j] = b;
            rest -= b * (1u64 << j) as f64;
        }
        debug_assert_eq!(rest, 0.0);
        Ok(bits)
    }
}

/// Elementwise decision onto `L(q)`.
pub fn dec(x: &DVector<f64>, q: u32) -> Result<DVector<f64>, ModelError> {
    let c = Constellation::new(q)?;
    Ok(x.map(|v| c.decide(v)))
}

/// `W = [I, 2I, 4I, …, 2^{q−1} I]`, of size `n × qn`.
pub fn va_weight_matrix(n: usize, q: u32) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, q as usize * n);
    for j in 0..q as usize {
        let weight = (1u64 << j) as f64;
        for i in 0..n {
            w[(i, j * n + i)] = weight;
        }
    }
    w
}

/// `W b` for a bit vector laid out as `[b_1; b_2; …; b_q]`.
pub fn bits_to_symbols(b: &DVector<f64>, n: usize, q: u32) -> Result<DVector<f64>, ModelError> {
    if b.len() != q as usize * n {
        return Err(ModelError::Dimension(format!(
            "bit vector has length {}, expected q·n = {}",
            b.len(),
            q as usize * n
        )));
    }
    Ok(va_weight_matrix(n, q) * b)
}

/// Inverse of [`bits_to_symbols`] on `L(q)^n`.
pub fn symbols_to_bits(s: &DVector<f64>, q: u32) -> Result<DVector<f64>, ModelError> {
    let c = Constellation::new(q)?;
    let n = s.len();
    let mut b = DVector::zeros(q as usize * n);
    for (i, &level) in s.iter().enumerate() {
        for (j, bit) in c.level_bits(level)?.into_iter().enumerate() {
            b[j * n + i] = bit;
        }
    }
    Ok(b)
}

/// Complex-valued detection problem `ỹ = H̃ s̃ + ṽ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexInstance {
    pub h_tilde: DMatrix<Complex64>,
    pub y_tilde: DVector<Complex64>,
    pub s_tilde: DVector<Complex64>,
    pub q: u32,
    /// Noise variance per complex entry.
    pub noise_var: f64,
}

impl ComplexInstance {
    pub fn new(
        h_tilde: DMatrix<Complex64>,
        y_tilde: DVector<Complex64>,
        s_tilde: DVector<Complex64>,
        q: u32,
        noise_var: f64,
    ) -> Result<Self, ModelError> {
        let c = Constellation::new(q)?;
        let (m, n) = h_tilde.shape();
        if m == 0 || n == 0 {
            return Err(ModelError::Dimension("channel must be at least 1×1".into()));
        }
        if y_tilde.len() != m || s_tilde.len() != n {
            return Err(ModelError::Dimension(format!(
                "channel is {m}×{n} but y has {} entries and s has {}",
                y_tilde.len(),
                s_tilde.len()
            )));
        }
        for z in s_tilde.iter() {
            for part in [z.re, z.im] {
                if !c.contains(part) {
                    return Err(ModelError::NotALevel {
                        value: part,
                        size: c.levels().len(),
                    });
                }
            }
        }
        if !(noise_var >= 0.0) {
            return Err(ModelError::Dimension(format!(
                "noise variance must be nonnegative (got {noise_var})"
            )));
        }
        Ok(Self {
            h_tilde,
            y_tilde,
            s_tilde,
            q,
            noise_var,
        })
    }

    pub fn m_tilde(&self) -> usize {
        self.h_tilde.nrows()
    }

    pub fn n_tilde(&self) -> usize {
        self.h_tilde.ncols()
    }

    /// Stacked real model: `y = [Re ỹ; Im ỹ]`, `s = [Re s̃; Im s̃]` and
    /// `H = [[Re H̃, −Im H̃], [Im H̃, Re H̃]]`.
    pub fn to_real(&self) -> Instance {
        let (mt, nt) = self.h_tilde.shape();
        let mut h = DMatrix::zeros(2 * mt, 2 * nt);
        for i in 0..mt {
            for j in 0..nt {
                let z = self.h_tilde[(i, j)];
                h[(i, j)] = z.re;
                h[(i, j + nt)] = -z.im;
                h[(i + mt, j)] = z.im;
                h[(i + mt, j + nt)] = z.re;
            }
        }
        let stack = |v: &DVector<Complex64>| {
            let k = v.len();
            DVector::from_fn(2 * k, |i, _| if i < k { v[i].re } else { v[i - k].im })
        };
        Instance {
            h,
            y: stack(&self.y_tilde),
            s_true: stack(&self.s_tilde),
            q: self.q,
        }
    }

    /// Stable 64-bit fingerprint of the instance contents.
    pub fn fingerprint(&self) -> u64 {
        let mut acc = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                acc ^= b as u64;
                acc = acc.wrapping_mul(0x0100_0000_01b3);
            }
        };
        self.h_tilde
            .iter()
            .chain(self.y_tilde.iter())
            .chain(self.s_tilde.iter())
            .for_each(|z| {
                eat(z.re);
                eat(z.im);
            });
        eat(self.q as f64);
        eat(self.noise_var);
        acc
    }
}

/// Free-function form of [`ComplexInstance::to_real`].
pub fn complex_to_real(ci: &ComplexInstance) -> Instance {
    ci.to_real()
}

/// Real-valued detection problem `y = H s + ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub h: DMatrix<f64>,
    pub y: DVector<f64>,
    pub s_true: DVector<f64>,
    pub q: u32,
}

impl Instance {
    pub fn new(
        h: DMatrix<f64>,
        y: DVector<f64>,
        s_true: DVector<f64>,
        q: u32,
    ) -> Result<Self, ModelError> {
        let c = Constellation::new(q)?;
        if h.nrows() != y.len() || h.ncols() != s_true.len() {
            return Err(ModelError::Dimension(format!(
                "H is {}×{}, y has {} entries, s has {}",
                h.nrows(),
                h.ncols(),
                y.len(),
                s_true.len()
            )));
        }
        if let Some(&bad) = s_true.iter().find(|&&v| !c.contains(v)) {
            return Err(ModelError::NotALevel {
                value: bad,
                size: c.levels().len(),
            });
        }
        Ok(Self { h, y, s_true, q })
    }

    /// Number of real unknowns `N`.
    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// Number of real observations `M`.
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.q).expect("instance order validated at construction")
    }

    /// ML metric `‖y − H s‖²`.
    pub fn objective(&self, s: &DVector<f64>) -> f64 {
        (&self.y - &self.h * s).norm_squared()
    }
}

/// Noise variance per complex entry for a given SNR, `E|s̃|² / 10^{snr/10}`.
/// Returns zero for an infinite SNR.
pub fn noise_variance(q: u32, snr_db: f64) -> Result<f64, ModelError> {
    let c = Constellation::new(q)?;
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(c.symbol_energy() / 10f64.powf(snr_db / 10.0))
}

/// Draws an instance with i.i.d. unit-variance circular Gaussian channel
/// entries, uniform QAM symbols and circular Gaussian noise at the requested
/// SNR (`f64::INFINITY` disables noise).
///
/// Draw order is fixed: channel (row-major, real then imaginary part),
/// symbols (real then imaginary level index), then noise. Identical
/// arguments reproduce the same instance bit-exactly.
pub fn generate_instance(
    m_tilde: usize,
    n_tilde: usize,
    q: u32,
    snr_db: f64,
    seed: u64,
) -> Result<ComplexInstance, ModelError> {
    let c = Constellation::new(q)?;
    if m_tilde == 0 || n_tilde == 0 {
        return Err(ModelError::Dimension("system size must be at least 1×1".into()));
    }
    let noise_var = noise_variance(q, snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let gauss = |rng: &mut ChaCha8Rng, scale: f64| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(scale * re, scale * im)
    };

    let mut h_tilde = DMatrix::zeros(m_tilde, n_tilde);
    for i in 0..m_tilde {
        for j in 0..n_tilde {
            h_tilde[(i, j)] = gauss(&mut rng, half);
        }
    }
    let levels = c.levels();
    let s_tilde = DVector::from_fn(n_tilde, |_, _| {
        let re = levels[rng.random_range(0..levels.len())];
        let im = levels[rng.random_range(0..levels.len())];
        Complex64::new(re, im)
    });
    // The clean signal goes through the real model so that noiseless
    // instances satisfy `y = H s` bit-exactly after conversion.
    let clean = ComplexInstance {
        h_tilde: h_tilde.clone(),
        y_tilde: DVector::zeros(m_tilde),
        s_tilde: s_tilde.clone(),
        q,
        noise_var,
    }
    .to_real();
    let hs = &clean.h * &clean.s_true;
    let mut y_tilde = DVector::from_fn(m_tilde, |i, _| Complex64::new(hs[i], hs[i + m_tilde]));
    if noise_var > 0.0 {
        let per_part = Normal::new(0.0, (noise_var / 2.0).sqrt())
            .expect("finite nonnegative standard deviation");
        for v in y_tilde.iter_mut() {
            let re = per_part.sample(&mut rng);
            let im = per_part.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
    ComplexInstance::new(h_tilde, y_tilde, s_tilde, q, noise_var)
}
