//! Uniform tensor state lattice with multilinear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
const MAX_CORNERS: usize = 1 << MAX_DIM;

/// How off-grid evaluations are extended beyond the lattice box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Constant extension: the query point is clamped into the box.
    #[default]
    Clamp,
    /// Linear extension of the outermost cell.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    boundary: BoundaryPolicy,
}

/// Interpolation weights of one query point: at most `2^n` (node, weight) pairs.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    len: usize,
    nodes: [usize; MAX_CORNERS],
    weights: [f64; MAX_CORNERS],
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.nodes[k], self.weights[k]))
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        (0..self.len).map(|k| self.weights[k] * values[self.nodes[k]]).sum()
    }
}

impl StateGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = lower.len();
        if n == 0 || n > MAX_DIM || upper.len() != n || counts.len() != n {
            return Err(Error::Usage(format!(
                "grid needs matching bounds and counts in 1..={MAX_DIM} dimensions"
            )));
        }
        for k in 0..n {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(Error::Usage(format!("grid dimension {k}: need lo < hi")));
            }
            if counts[k] < 3 {
                return Err(Error::Usage(format!("grid dimension {k}: need at least 3 nodes")));
            }
        }
        let spacing = (0..n)
            .map(|k| (upper[k] - lower[k]) / (counts[k] - 1) as f64)
            .collect();
        Ok(Self {
            lower,
            upper,
            counts,
            spacing,
            boundary: BoundaryPolicy::Clamp,
        })
    }

    pub fn uniform_1d(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![count])
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Node coordinate along one axis.
    pub fn axis_value(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.counts[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + self.spacing[axis] * i as f64
        }
    }

    /// Flat index -> per-axis indices (first axis fastest).
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for (k, &c) in self.counts.iter().enumerate() {
            idx[k] = flat % c;
            flat /= c;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for (k, &c) in self.counts.iter().enumerate() {
            flat += idx[k] * stride;
            stride *= c;
        }
        flat
    }

    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let idx = self.multi_index(flat);
        for k in 0..self.dim() {
            out[k] = self.axis_value(k, idx[k]);
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(flat, &mut out);
        out
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, &c)| c >= self.lower[k] && c <= self.upper[k])
    }

    /// Node nearest to `x` (the query is clamped into the box first).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = [0; MAX_DIM];
        for k in 0..self.dim() {
            let s = ((x[k] - self.lower[k]) / self.spacing[k]).round();
            idx[k] = s.clamp(0.0, (self.counts[k] - 1) as f64) as usize;
        }
        self.flat_index(&idx[..self.dim()])
    }

    /// Multilinear interpolation weights at `x` under the boundary policy.
    pub fn stencil(&self, x: &[f64]) -> Stencil {
        let n = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0f64; MAX_DIM];
        for k in 0..n {
            let last = (self.counts[k] - 1) as f64;
            let mut s = (x[k] - self.lower[k]) / self.spacing[k];
            if self.boundary == BoundaryPolicy::Clamp || s.is_nan() {
                s = s.clamp(0.0, last);
            }
            let cell = s.floor().clamp(0.0, last - 1.0);
            base[k] = cell as usize;
            frac[k] = s - cell;
        }
        let mut stencil = Stencil {
            len: 1 << n,
            nodes: [0; MAX_CORNERS],
            weights: [0.0; MAX_CORNERS],
        };
        let mut corner = [0usize; MAX_DIM];
        for c in 0..(1usize << n) {
            let mut w = 1.0;
            for k in 0..n {
                let up = c >> k & 1 == 1;
                corner[k] = base[k] + usize::from(up);
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            stencil.nodes[c] = self.flat_index(&corner[..n]);
            stencil.weights[c] = w;
        }
        stencil
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        self.stencil(x).apply(values)
    }

    /// Grid with every cell split in two (same box).
    pub fn refined(&self) -> StateGrid {
        let counts = self.counts.iter().map(|c| 2 * (c - 1) + 1).collect();
        StateGrid::new(self.lower.clone(), self.upper.clone(), counts)
            .expect("refining a valid grid")
            .with_boundary(self.boundary)
    }

    /// Checks that `values` is a field on this grid.
    pub fn check_field(&self, values: &[f64], what: &str) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "{what} has {} values but the grid has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(())
    }
}
