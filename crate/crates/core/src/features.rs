//! Node feature storage for the implicit complete graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the per-node affinity scalar enters the edge cost.
///
/// `Plus` adds `alpha_i * alpha_j` to the inner product and biases towards
/// larger clusters, `Minus` subtracts it and biases towards smaller ones.
/// `Off` ignores alpha entirely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSign {
    Plus,
    Minus,
    Off,
}

impl AlphaSign {
    /// Multiplier applied to `alpha_i * alpha_j`, `None` when switched off.
    pub fn factor(self) -> Option<f64> {
        match self {
            AlphaSign::Plus => Some(1.0),
            AlphaSign::Minus => Some(-1.0),
            AlphaSign::Off => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlphaSign::Plus => "plus",
            AlphaSign::Minus => "minus",
            AlphaSign::Off => "off",
        }
    }
}

impl std::str::FromStr for AlphaSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(AlphaSign::Plus),
            "minus" | "-" => Ok(AlphaSign::Minus),
            "off" | "none" => Ok(AlphaSign::Off),
            other => Err(Error::argument(format!("unknown alpha sign {other:?}"))),
        }
    }
}

/// Dense `n x d` feature matrix with a per-node affinity scalar.
///
/// Values are stored in single precision, row-major. Every similarity
/// computed from it accumulates in double precision.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f32>,
    alpha: Vec<f32>,
    sign: AlphaSign,
}

impl FeatureMatrix {
    /// Builds a matrix with alpha switched off.
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_alpha(n, d, data, vec![0.0; n], AlphaSign::Off)
    }

    pub fn with_alpha(n: usize, d: usize, data: Vec<f32>, alpha: Vec<f32>, sign: AlphaSign) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::argument(format!(
                "feature matrix needs n >= 1 and d >= 1, got {n} x {d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::argument(format!(
                "expected {} feature values for {n} x {d}, got {}",
                n * d,
                data.len()
            )));
        }
        if alpha.len() != n {
            return Err(Error::argument(format!(
                "expected {n} alpha values, got {}",
                alpha.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite feature value in row {} column {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(pos) = alpha.iter().position(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::data(format!(
                "alpha of node {pos} must be finite and nonnegative, got {}",
                alpha[pos]
            )));
        }
        Ok(FeatureMatrix {
            n,
            d,
            data,
            alpha,
            sign,
        })
    }

    /// Builds a matrix from row vectors. Convenient for tests and small inputs.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::argument("rows have differing lengths"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), d, data)
    }

    /// Returns a copy with every node's alpha set to `alpha`.
    pub fn with_uniform_alpha(mut self, alpha: f32, sign: AlphaSign) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::argument(format!(
                "alpha must be finite and nonnegative, got {alpha}"
            )));
        }
        self.alpha = vec![alpha; self.n];
        self.sign = sign;
        Ok(self)
    }

    /// Replaces the sign while keeping the per-node alphas.
    pub fn with_sign(mut self, sign: AlphaSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sign(&self) -> AlphaSign {
        self.sign
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn alphas(&self) -> &[f32] {
        &self.alpha
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Effective alpha of a node; zero when the sign is `Off`.
    pub fn alpha(&self, i: usize) -> f64 {
        match self.sign {
            AlphaSign::Off => 0.0,
            _ => f64::from(self.alpha[i]),
        }
    }

    /// True when any node carries a nonzero alpha.
    pub fn has_alpha(&self) -> bool {
        self.alpha.iter().any(|&a| a != 0.0)
    }

    pub(crate) fn check_node(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::argument(format!("node {i} out of range for {} nodes", self.n)))
        }
    }

    /// Edge cost between two distinct nodes: `<f_i, f_j> +/- alpha_i alpha_j`.
    pub fn similarity(&self, i: usize, j: usize) -> Result<f64> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(Error::argument(format!("similarity of node {i} with itself")));
        }
        Ok(self.similarity_unchecked(i, j))
    }

    pub(crate) fn similarity_unchecked(&self, i: usize, j: usize) -> f64 {
        let dot = dot_f32(self.row(i), self.row(j));
        match self.sign.factor() {
            Some(s) => dot + s * f64::from(self.alpha[i]) * f64::from(self.alpha[j]),
            None => dot,
        }
    }

    /// Scales each row to unit L2 norm. Zero rows are rejected.
    pub fn normalize_rows(&mut self) -> Result<()> {
        for (i, row) in self.data.chunks_exact_mut(self.d).enumerate() {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::data(format!("cannot normalize zero row {i}")));
            }
            for v in row.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        Ok(())
    }
}

/// Single-precision inputs, double-precision sequential accumulation.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Free-function form of [`FeatureMatrix::similarity`].
pub fn similarity(fm: &FeatureMatrix, i: usize, j: usize) -> Result<f64> {
    fm.similarity(i, j)
}
