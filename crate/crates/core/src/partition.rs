use serde::Serialize;

use crate::error::{Error, Result};

/// Strictly increasing time knots `t = t_0 < t_1 < ... < t_n = T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimePartition {
    knots: Vec<f64>,
}

/// Knots closer than this (relative to the horizon length) are identified.
const KNOT_TOLERANCE: f64 = 1e-12;

impl TimePartition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Usage("a partition needs at least two knots".into()));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Usage("partition knots must be finite and strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    pub fn uniform(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(start < end) {
            return Err(Error::Usage(format!(
                "uniform partition needs start < end and steps >= 1 (got [{start}, {end}], {steps})"
            )));
        }
        let h = (end - start) / steps as f64;
        let mut knots: Vec<f64> = (0..steps).map(|i| start + h * i as f64).collect();
        knots.push(end);
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Number of cells `[t_i, t_{i+1})`.
    pub fn cells(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn step(&self, i: usize) -> f64 {
        self.knots[i + 1] - self.knots[i]
    }

    /// Mesh `τ = max_i (t_{i+1} - t_i)`.
    pub fn mesh(&self) -> f64 {
        self.knots.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the knot equal to `t`, if any.
    pub fn knot_index(&self, t: f64) -> Option<usize> {
        let tol = KNOT_TOLERANCE * (self.end() - self.start()).max(1.0);
        self.knots.iter().position(|k| (k - t).abs() <= tol)
    }

    /// Partition with every cell split in two.
    pub fn refined(&self) -> TimePartition {
        let mut knots = Vec::with_capacity(2 * self.knots.len() - 1);
        for w in self.knots.windows(2) {
            knots.push(w[0]);
            knots.push(0.5 * (w[0] + w[1]));
        }
        knots.push(self.end());
        TimePartition { knots }
    }

    /// Coarse partition made of every `stride`-th knot (the end knot is always kept).
    pub fn coarsened(&self, stride: usize) -> Result<TimePartition> {
        if stride == 0 {
            return Err(Error::Usage("stride must be positive".into()));
        }
        let mut knots: Vec<f64> = self.knots.iter().step_by(stride).copied().collect();
        if *knots.last().unwrap() != self.end() {
            knots.push(self.end());
        }
        TimePartition::new(knots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partition_hits_both_ends() {
        let p = TimePartition::uniform(0.25, 1.0, 3).unwrap();
        assert_eq!(p.knots(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.cells(), 3);
        assert_eq!(p.mesh(), 0.25);
    }

    #[test]
    fn rejects_non_increasing_knots() {
        assert!(TimePartition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimePartition::new(vec![0.0]).is_err());
        assert!(TimePartition::uniform(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn refine_and_coarsen() {
        let p = TimePartition::uniform(0.0, 1.0, 10).unwrap();
        assert_eq!(p.refined().cells(), 20);
        let c = p.coarsened(5).unwrap();
        assert_eq!(c.cells(), 2);
        assert_eq!(c.knot(1), p.knot(5));
        assert_eq!(p.knot_index(p.knot(7)), Some(7));
        assert_eq!(p.knot_index(0.55), None);
    }
}
