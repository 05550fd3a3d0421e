//! Backward semigroup `G_{s1,s2}[η]` on the lattice for Markov terminal fields.

use serde::Serialize;

use crate::bsde_solver::{backward, Scheme};
use crate::error::{Error, Result};
use crate::feedback::FeedbackTable;
use crate::game_model::{GameSpec, Player};
use crate::grid::StateGrid;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalField {
    pub grid: StateGrid,
    pub values: Vec<f64>,
    pub label: String,
}

impl TerminalField {
    pub fn new(grid: StateGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        grid.check_field(&values, "terminal field")?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Usage(format!("terminal field is not finite at node {k}")));
        }
        Ok(Self {
            grid,
            values,
            label: label.into(),
        })
    }

    pub fn from_fn(grid: &StateGrid, label: impl Into<String>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|x| f(x)).collect();
        Self::new(grid.clone(), values, label)
    }

    pub fn max_abs_diff(&self, other: &TerminalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn check(scheme: &Scheme, eta: &TerminalField, s1: usize, s2: usize) -> Result<()> {
    if &eta.grid != scheme.grid() {
        return Err(Error::GridMismatch(format!("field `{}` lives on a different grid", eta.label)));
    }
    if s1 > s2 || s2 > scheme.partition().cells() {
        return Err(Error::Usage(format!("need s1 <= s2 <= n, got {s1}, {s2}")));
    }
    Ok(())
}

/// `G_{s1,s2}[η]` for player `j` under `feedback`, returned at knot `s1`.
pub fn apply(
    spec: &GameSpec,
    player: Player,
    feedback: &FeedbackTable,
    s1: usize,
    s2: usize,
    eta: &TerminalField,
    scheme: &Scheme,
) -> Result<TerminalField> {
    check(scheme, eta, s1, s2)?;
    feedback.check(spec, scheme.partition().cells(), scheme.grid().len())?;
    let partition = scheme.partition();
    let (mut y, _) = backward(
        scheme,
        s1,
        s2,
        &eta.values,
        |i, k, x, b, s| {
            let (u, v) = feedback.get(i, k);
            spec.drift_into(partition.knot(i), x, u, v, b);
            spec.diffusion_into(partition.knot(i), x, u, v, s);
        },
        |i, k, x, y, z| {
            let (u, v) = feedback.get(i, k);
            spec.driver(player, partition.knot(i), x, y, z, u, v)
        },
    )?;
    Ok(TerminalField {
        grid: eta.grid.clone(),
        values: y.swap_remove(0),
        label: format!("G[{s1},{s2}]({})", eta.label),
    })
}

/// `max |G_{s1,s3}[η] - G_{s1,s2}[G_{s2,s3}[η]]|` over the nodes.
#[allow(clippy::too_many_arguments)]
pub fn flow_check(
    spec: &GameSpec,
    player: Player,
    feedback: &FeedbackTable,
    s1: usize,
    s2: usize,
    s3: usize,
    eta: &TerminalField,
    scheme: &Scheme,
) -> Result<f64> {
    if !(s1 <= s2 && s2 <= s3) {
        return Err(Error::Usage(format!("need s1 <= s2 <= s3, got {s1}, {s2}, {s3}")));
    }
    let direct = apply(spec, player, feedback, s1, s3, eta, scheme)?;
    let inner = apply(spec, player, feedback, s2, s3, eta, scheme)?;
    let composed = apply(spec, player, feedback, s1, s2, &inner, scheme)?;
    Ok(direct.max_abs_diff(&composed))
}
