//! JSON instance files.
//!
//! ```text
//! {
//!   "m_tilde": 2, "n_tilde": 2, "q": 2,
//!   "h_real": [..m̃·ñ, row-major..], "h_imag": [..],
//!   "y_real": [..m̃..], "y_imag": [..],
//!   "s_real": [..ñ..], "s_imag": [..],
//!   "noise_var": 0.0
//! }
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Complex64, ComplexInstance, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub m_tilde: usize,
    pub n_tilde: usize,
    pub q: u32,
    pub h_real: Vec<f64>,
    pub h_imag: Vec<f64>,
    pub y_real: Vec<f64>,
    pub y_imag: Vec<f64>,
    pub s_real: Vec<f64>,
    pub s_imag: Vec<f64>,
    pub noise_var: f64,
}

impl From<&ComplexInstance> for InstanceFile {
    fn from(ci: &ComplexInstance) -> Self {
        let (m, n) = ci.h_tilde.shape();
        let mut h_real = Vec::with_capacity(m * n);
        let mut h_imag = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                h_real.push(ci.h_tilde[(i, j)].re);
                h_imag.push(ci.h_tilde[(i, j)].im);
            }
        }
        Self {
            m_tilde: m,
            n_tilde: n,
            q: ci.q,
            h_real,
            h_imag,
            y_real: ci.y_tilde.iter().map(|z| z.re).collect(),
            y_imag: ci.y_tilde.iter().map(|z| z.im).collect(),
            s_real: ci.s_tilde.iter().map(|z| z.re).collect(),
            s_imag: ci.s_tilde.iter().map(|z| z.im).collect(),
            noise_var: ci.noise_var,
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<ComplexInstance, ModelError> {
        let (m, n) = (self.m_tilde, self.n_tilde);
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(ModelError::Dimension(format!(
                    "field `{name}` has {got} entries, expected {want}"
                )))
            }
        };
        check("h_real", self.h_real.len(), m * n)?;
        check("h_imag", self.h_imag.len(), m * n)?;
        check("y_real", self.y_real.len(), m)?;
        check("y_imag", self.y_imag.len(), m)?;
        check("s_real", self.s_real.len(), n)?;
        check("s_imag", self.s_imag.len(), n)?;
        let h = DMatrix::from_fn(m, n, |i, j| {
            Complex64::new(self.h_real[i * n + j], self.h_imag[i * n + j])
        });
        let zip = |re: &[f64], im: &[f64]| {
            DVector::from_iterator(re.len(), re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)))
        };
        let y = zip(&self.y_real, &self.y_imag);
        let s = zip(&self.s_real, &self.s_imag);
        ComplexInstance::new(h, y, s, self.q, self.noise_var)
    }
}

impl ComplexInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    /// Parses an instance file; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        file.into_instance()
    }
}
