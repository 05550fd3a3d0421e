//! Tensor Gauss–Hermite rules for expectations against N(0, I_d).

use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NormalQuadrature {
    dim: usize,
    /// `len × dim`, row-major.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalQuadrature {
    /// `points` nodes per dimension, tensorised over `dim` dimensions.
    pub fn new(points: usize, dim: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(points).ok_or_else(|| Error::Usage("quadrature needs at least one node".into()))?;
        if dim == 0 {
            return Err(Error::Usage("quadrature dimension must be positive".into()));
        }
        // The rule is for weight exp(-x^2): rescale to the standard normal.
        let mut pairs: Vec<(f64, f64)> = GaussHermite::new(deg)
            .iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / std::f64::consts::PI.sqrt()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrise: eigen-solver output is symmetric only up to rounding.
        let m = pairs.len();
        let sym: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let (a, wa) = pairs[k];
                let (b, wb) = pairs[m - 1 - k];
                (0.5 * (a - b), 0.5 * (wa + wb))
            })
            .collect();
        let total: f64 = sym.iter().map(|p| p.1).sum();
        let one_d: Vec<(f64, f64)> = sym.into_iter().map(|(x, w)| (x, w / total)).collect();

        let len = one_d.len().pow(dim as u32);
        let mut nodes = Vec::with_capacity(len * dim);
        let mut weights = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rest = flat;
            let mut w = 1.0;
            for _ in 0..dim {
                let (x, wk) = one_d[rest % m];
                rest /= m;
                nodes.push(x);
                w *= wk;
            }
            weights.push(w);
        }
        Ok(Self { dim, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Largest |ξ| component over the rule.
    pub fn max_abs_node(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn expectation(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|k| self.weights[k] * g(self.node(k))).sum()
    }
}
