//! Lattice dynamic programming for the two zero-sum value functions.
//!
//! `W1(t_i, x) = max_u min_v G1^{u,v}[W1(t_{i+1})](x)` and
//! `W2(t_i, x) = max_v min_u G2^{u,v}[W2(t_{i+1})](x)`, where `G^{u,v}` is
//! one step of the backward scheme with the pair frozen on the cell. The
//! opposite-order (upper) recursions run alongside and their distance from
//! the lower ones is reported.

use std::io::Write;

use serde::Serialize;

use crate::bsde_solver::Scheme;
use crate::error::{Error, Result};
use crate::exec;
use crate::feedback::FeedbackTable;
use crate::game_model::{GameSpec, Player};
use crate::grid::StateGrid;
use crate::hamiltonian::{audit_isaacs, maximin, IsaacsAudit, QueryBox};
use crate::partition::TimePartition;

pub const DEFAULT_AUDIT_QUERIES: usize = 1000;
pub const DEFAULT_AUDIT_SEED: u64 = 0;

#[derive(Clone, Debug, Serialize)]
pub struct ValueField {
    pub partition: TimePartition,
    pub grid: StateGrid,
    pub quadrature_points: usize,
    /// Lower (max-min) values `W_j[knot][node]`.
    pub w: [Vec<Vec<f64>>; 2],
    /// Upper (min-max) values from the separate recursion.
    pub w_upper: [Vec<Vec<f64>>; 2],
    /// Saddle feedback per player: the maximizer's argmax and the opponent's reply.
    pub saddle: [FeedbackTable; 2],
    /// `punish_1[cell][node]`: u minimizing the max over v of player 2's one-step value.
    pub punish_1: Vec<Vec<usize>>,
    /// `punish_2[cell][node]`: v minimizing the max over u of player 1's one-step value.
    pub punish_2: Vec<Vec<usize>>,
    pub isaacs: IsaacsAudit,
    /// `max |W_j upper - W_j lower|` over the lattice.
    pub lattice_gap: [f64; 2],
}

impl ValueField {
    pub fn values(&self, player: Player) -> &[Vec<f64>] {
        &self.w[player.index()]
    }

    pub fn value_at(&self, player: Player, knot: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.w[player.index()][knot], x)
    }

    pub fn cells(&self) -> usize {
        self.partition.cells()
    }

    pub fn punish_control(&self, punisher: Player, cell: usize, node: usize) -> usize {
        match punisher {
            Player::One => self.punish_1[cell][node],
            Player::Two => self.punish_2[cell][node],
        }
    }

    /// Checks that the field lives on the scheme's lattice.
    pub fn check_scheme(&self, scheme: &Scheme) -> Result<()> {
        if &self.partition != scheme.partition() || &self.grid != scheme.grid() {
            return Err(Error::Usage("value field and scheme use different lattices".into()));
        }
        Ok(())
    }

    /// Columns: `time, x1.., w1, w2, w1_upper, w2_upper, saddle1_u, saddle1_v,
    /// saddle2_u, saddle2_v, punish1_u, punish2_v` (labels empty at T).
    pub fn write_csv<W: Write>(&self, spec: &GameSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.grid.dim();
        let mut header = vec!["time".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        for h in [
            "w1", "w2", "w1_upper", "w2_upper", "saddle1_u", "saddle1_v", "saddle2_u", "saddle2_v", "punish1_u", "punish2_v",
        ] {
            header.push(h.into());
        }
        w.write_record(&header)?;
        let cells = self.cells();
        for (i, &t) in self.partition.knots().iter().enumerate() {
            for node in 0..self.grid.len() {
                let mut rec = vec![format!("{t}")];
                rec.extend(self.grid.node(node).iter().map(|c| format!("{c}")));
                for field in [&self.w[0], &self.w[1], &self.w_upper[0], &self.w_upper[1]] {
                    rec.push(format!("{}", field[i][node]));
                }
                if i < cells {
                    let (u1, v1) = self.saddle[0].get(i, node);
                    let (u2, v2) = self.saddle[1].get(i, node);
                    rec.push(spec.u().label(u1).into());
                    rec.push(spec.v().label(v1).into());
                    rec.push(spec.u().label(u2).into());
                    rec.push(spec.v().label(v2).into());
                    rec.push(spec.u().label(self.punish_1[i][node]).into());
                    rec.push(spec.v().label(self.punish_2[i][node]).into());
                } else {
                    rec.extend(std::iter::repeat(String::new()).take(6));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One-step values `G_j^{u,v}[next](t_i, x_node)` for every pair, row-major
/// in `(u, v)`, for each `(player, next)` field.
pub fn one_step_matrices(
    spec: &GameSpec,
    scheme: &Scheme,
    i: usize,
    node: usize,
    fields: &[(Player, &[f64])],
) -> Result<Vec<Vec<f64>>> {
    let grid = scheme.grid();
    let n = grid.dim();
    let d = scheme.noise_dim();
    let t = scheme.partition().knot(i);
    let (nu, nv) = (spec.u().len(), spec.v().len());
    let mut x = vec![0.0; n];
    grid.node_into(node, &mut x);
    let mut b = vec![0.0; n];
    let mut s = vec![0.0; n * d];
    let mut z = vec![0.0; d];
    let mut stencils = Vec::with_capacity(scheme.quadrature().len());
    let mut out = vec![Vec::with_capacity(nu * nv); fields.len()];
    for u in 0..nu {
        for v in 0..nv {
            spec.drift_into(t, &x, u, v, &mut b);
            spec.diffusion_into(t, &x, u, v, &mut s);
            scheme.transition(i, &x, &b, &s, &mut stencils);
            for (f, &(player, next)) in fields.iter().enumerate() {
                let e = scheme.moments(i, &stencils, next, &mut z);
                let y = scheme.implicit(i, node, e, |y| spec.driver(player, t, &x, y, &z, u, v))?;
                out[f].push(y);
            }
        }
    }
    Ok(out)
}

fn transpose(m: &[f64], nu: usize, nv: usize) -> Vec<f64> {
    let mut t = vec![0.0; nu * nv];
    for u in 0..nu {
        for v in 0..nv {
            t[v * nu + u] = m[u * nv + v];
        }
    }
    t
}

struct NodeStep {
    w: [f64; 2],
    upper: [f64; 2],
    saddle: [(usize, usize); 2],
    punish: (usize, usize),
}

fn node_step(spec: &GameSpec, scheme: &Scheme, i: usize, node: usize, next: [&[f64]; 4]) -> Result<NodeStep> {
    let (nu, nv) = (spec.u().len(), spec.v().len());
    let m = one_step_matrices(
        spec,
        scheme,
        i,
        node,
        &[(Player::One, next[0]), (Player::Two, next[1]), (Player::One, next[2]), (Player::Two, next[3])],
    )?;
    // player 1 maximizes G1 over rows u
    let g1 = maximin(&m[0], nu, nv);
    // player 2 maximizes G2 over v: work on the transpose (rows v)
    let g2 = maximin(&transpose(&m[1], nu, nv), nv, nu);
    let up1 = maximin(&m[2], nu, nv);
    let up2 = maximin(&transpose(&m[3], nu, nv), nv, nu);
    Ok(NodeStep {
        w: [g1.lower, g2.lower],
        upper: [up1.upper, up2.upper],
        saddle: [g1.lower_pair, (g2.lower_pair.1, g2.lower_pair.0)],
        punish: (g2.upper_pair.1, g1.upper_pair.1),
    })
}

struct Induction {
    w: [Vec<Vec<f64>>; 2],
    upper: [Vec<Vec<f64>>; 2],
    saddle: [Vec<Vec<(usize, usize)>>; 2],
    punish_1: Vec<Vec<usize>>,
    punish_2: Vec<Vec<usize>>,
}

fn check_mesh(spec: &GameSpec, scheme: &Scheme) -> Result<()> {
    let mesh = scheme.partition().mesh();
    if spec.lipschitz() * mesh >= 1.0 {
        return Err(Error::StepTooLarge {
            lipschitz: spec.lipschitz(),
            mesh,
        });
    }
    Ok(())
}

fn induct(spec: &GameSpec, scheme: &Scheme, from: usize, to: usize, terminal: [&[f64]; 2]) -> Result<Induction> {
    check_mesh(spec, scheme)?;
    let grid = scheme.grid();
    if from > to || to > scheme.partition().cells() {
        return Err(Error::Usage(format!("invalid knot range {from}..={to}")));
    }
    for t in terminal {
        grid.check_field(t, "terminal value slice")?;
    }
    let mut ind = Induction {
        w: [vec![terminal[0].to_vec()], vec![terminal[1].to_vec()]],
        upper: [vec![terminal[0].to_vec()], vec![terminal[1].to_vec()]],
        saddle: [Vec::new(), Vec::new()],
        punish_1: Vec::new(),
        punish_2: Vec::new(),
    };
    for i in (from..to).rev() {
        let next = [
            ind.w[0].last().unwrap().as_slice(),
            ind.w[1].last().unwrap().as_slice(),
            ind.upper[0].last().unwrap().as_slice(),
            ind.upper[1].last().unwrap().as_slice(),
        ];
        let steps = exec::try_map(grid.len(), |k| node_step(spec, scheme, i, k, next))?;
        for j in 0..2 {
            ind.w[j].push(steps.iter().map(|s| s.w[j]).collect());
            ind.upper[j].push(steps.iter().map(|s| s.upper[j]).collect());
            ind.saddle[j].push(steps.iter().map(|s| s.saddle[j]).collect());
        }
        ind.punish_1.push(steps.iter().map(|s| s.punish.0).collect());
        ind.punish_2.push(steps.iter().map(|s| s.punish.1).collect());
    }
    for j in 0..2 {
        ind.w[j].reverse();
        ind.upper[j].reverse();
        ind.saddle[j].reverse();
    }
    ind.punish_1.reverse();
    ind.punish_2.reverse();
    Ok(ind)
}

fn terminal_slice(spec: &GameSpec, grid: &StateGrid, player: Player) -> Vec<f64> {
    grid.nodes().iter().map(|x| spec.terminal(player, x)).collect()
}

/// Values with the default Isaacs audit attached.
pub fn compute_values(spec: &GameSpec, scheme: &Scheme) -> Result<ValueField> {
    check_mesh(spec, scheme)?;
    let audit = audit_isaacs(spec, &QueryBox::default_for(spec), DEFAULT_AUDIT_QUERIES, DEFAULT_AUDIT_SEED)?;
    compute_values_audited(spec, scheme, audit)
}

pub fn compute_values_audited(spec: &GameSpec, scheme: &Scheme, isaacs: IsaacsAudit) -> Result<ValueField> {
    let grid = scheme.grid();
    let cells = scheme.partition().cells();
    let t1 = terminal_slice(spec, grid, Player::One);
    let t2 = terminal_slice(spec, grid, Player::Two);
    let ind = induct(spec, scheme, 0, cells, [&t1, &t2])?;
    let gap = |j: usize| {
        ind.w[j]
            .iter()
            .flatten()
            .zip(ind.upper[j].iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let lattice_gap = [gap(0), gap(1)];
    if isaacs.pass && lattice_gap[0].max(lattice_gap[1]) > crate::hamiltonian::ISAACS_TOLERANCE {
        log::info!(
            "lower and upper lattice recursions differ by up to {:e} (control-dependent transition)",
            lattice_gap[0].max(lattice_gap[1])
        );
    }
    let [s1, s2] = ind.saddle;
    Ok(ValueField {
        partition: scheme.partition().clone(),
        grid: grid.clone(),
        quadrature_points: scheme.quadrature_points(),
        w: ind.w,
        w_upper: ind.upper,
        saddle: [FeedbackTable::from_rows(s1)?, FeedbackTable::from_rows(s2)?],
        punish_1: ind.punish_1,
        punish_2: ind.punish_2,
        isaacs,
        lattice_gap,
    })
}

/// Lower values on knots `from..=to` from the given slices at knot `to`.
pub fn values_over(
    spec: &GameSpec,
    scheme: &Scheme,
    from: usize,
    to: usize,
    terminal: [&[f64]; 2],
) -> Result<[Vec<Vec<f64>>; 2]> {
    Ok(induct(spec, scheme, from, to, terminal)?.w)
}

#[derive(Clone, Debug, Serialize)]
pub struct PlayerRegularity {
    pub player: Player,
    /// `max |W(t,x) - W(t,x')| / |x - x'|` over node pairs and knots.
    pub lipschitz_x: f64,
    /// `max |W(t,x) - W(t',x)| / ((1 + |x|) |t - t'|^½)` over knot pairs and nodes.
    pub holder_t: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub players: [PlayerRegularity; 2],
}

impl RegularityReport {
    pub fn all_finite(&self) -> bool {
        self.players.iter().all(|p| p.lipschitz_x.is_finite() && p.holder_t.is_finite())
    }
}

pub fn regularity_check(field: &ValueField) -> RegularityReport {
    let nodes = field.grid.nodes();
    let knots = field.partition.knots();
    let players = Player::BOTH.map(|player| {
        let w = &field.w[player.index()];
        let lipschitz_x = exec::map(knots.len(), |i| {
            let mut best = 0.0f64;
            for a in 0..nodes.len() {
                for b in a + 1..nodes.len() {
                    let dist = nodes[a].iter().zip(&nodes[b]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                    best = best.max((w[i][a] - w[i][b]).abs() / dist);
                }
            }
            best
        })
        .into_iter()
        .fold(0.0, f64::max);
        let holder_t = exec::map(knots.len(), |i| {
            let mut best = 0.0f64;
            for k in i + 1..knots.len() {
                let root = (knots[k] - knots[i]).sqrt();
                for (node, x) in nodes.iter().enumerate() {
                    let weight = 1.0 + x.iter().map(|c| c * c).sum::<f64>().sqrt();
                    best = best.max((w[i][node] - w[k][node]).abs() / (weight * root));
                }
            }
            best
        })
        .into_iter()
        .fold(0.0, f64::max);
        PlayerRegularity {
            player,
            lipschitz_x,
            holder_t,
        }
    });
    RegularityReport { players }
}
