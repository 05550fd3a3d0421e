//! ε-Nash construction on the lattice, Monte Carlo certificate
//! verification, and unilateral deviation tests against punishment.

use std::io::Write;

use serde::Serialize;

use crate::bsde_solver::{path_values, solve_markov, BackwardSolution, Scheme};
use crate::error::{Error, Result};
use crate::exec;
use crate::feedback::FeedbackTable;
use crate::game_model::{GameSpec, Player};
use crate::grid::StateGrid;
use crate::sde_sim::{mean_and_se, simulate, FeedbackRule, PathBundle};
use crate::strategies::{punishment_strategy, NadStrategy, StrategyRule};
use crate::value_pde::{one_step_matrices, ValueField};

/// Per-node slack of the selected pair: `G_j^{u,v}[W_j(t_{i+1})](x) - W_j(t_i, x)`.
#[derive(Clone, Debug, Serialize)]
pub struct Construction {
    pub epsilon: f64,
    pub feedback: FeedbackTable,
    /// `slack[j][cell][node]`.
    pub slack: [Vec<Vec<f64>>; 2],
    pub min_slack: [f64; 2],
    /// Nodes where the coupled saddle pair qualified (the rest came from the scan).
    pub coupled_selected: usize,
    pub scanned_selected: usize,
}

impl Construction {
    /// Columns `cell, node, u, v, slack1, slack2` with control labels.
    pub fn write_csv<W: Write>(&self, spec: &GameSpec, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "node", "u", "v", "slack1", "slack2"])?;
        for i in 0..self.feedback.cells() {
            for k in 0..self.feedback.nodes() {
                let (u, v) = self.feedback.get(i, k);
                w.write_record([
                    i.to_string(),
                    k.to_string(),
                    spec.u().label(u).into(),
                    spec.v().label(v).into(),
                    format!("{}", self.slack[0][i][k]),
                    format!("{}", self.slack[1][i][k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Picks, at every `(cell, node)`, a pair meeting both one-step inequalities
/// `G_j^{u,v}[W_j(t_{i+1})](x) >= W_j(t_i, x) - ε`. The coupled saddle pair
/// (player 1's maximin control with player 2's maximin control) is tried
/// first, then all of `U × V` in row-major order.
pub fn construct_equilibrium(spec: &GameSpec, values: &ValueField, scheme: &Scheme, epsilon: f64) -> Result<Construction> {
    values.check_scheme(scheme)?;
    if !(epsilon > 0.0) {
        return Err(Error::Usage(format!("epsilon must be positive, got {epsilon}")));
    }
    if !values.isaacs.pass {
        return Err(Error::IsaacsViolated {
            max_gap: values.isaacs.max_gap,
        });
    }
    let cells = values.cells();
    let nodes = values.grid.len();
    let (nu, nv) = (spec.u().len(), spec.v().len());
    let mut feedback = FeedbackTable::constant(cells, nodes, 0, 0);
    let mut slack = [vec![vec![0.0; nodes]; cells], vec![vec![0.0; nodes]; cells]];
    let mut coupled_selected = 0;
    for i in 0..cells {
        let picks = exec::try_map(nodes, |k| {
            let m = one_step_matrices(
                spec,
                scheme,
                i,
                k,
                &[(Player::One, &values.w[0][i + 1]), (Player::Two, &values.w[1][i + 1])],
            )?;
            let w1 = values.w[0][i][k];
            let w2 = values.w[1][i][k];
            let slacks = |u: usize, v: usize| (m[0][u * nv + v] - w1, m[1][u * nv + v] - w2);
            let coupled = (values.saddle[0].get(i, k).0, values.saddle[1].get(i, k).1);
            let (s1, s2) = slacks(coupled.0, coupled.1);
            if s1 >= -epsilon && s2 >= -epsilon {
                return Ok((coupled, (s1, s2), true));
            }
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for u in 0..nu {
                for v in 0..nv {
                    let (s1, s2) = slacks(u, v);
                    if s1 >= -epsilon && s2 >= -epsilon {
                        return Ok(((u, v), (s1, s2), false));
                    }
                    if s1.min(s2) > best.0 {
                        best = (s1.min(s2), s1, s2);
                    }
                }
            }
            Err(Error::NoQualifyingPair {
                step: i,
                node: k,
                slack_1: best.1,
                slack_2: best.2,
            })
        })?;
        for (k, (pair, (s1, s2), coupled)) in picks.into_iter().enumerate() {
            feedback.set(i, k, pair);
            slack[0][i][k] = s1;
            slack[1][i][k] = s2;
            coupled_selected += usize::from(coupled);
        }
    }
    let min_slack = [0, 1].map(|j| slack[j].iter().flatten().fold(f64::INFINITY, |m, &s| m.min(s)));
    Ok(Construction {
        epsilon,
        feedback,
        slack,
        min_slack,
        coupled_selected,
        scanned_selected: cells * nodes - coupled_selected,
    })
}

fn z_interp(grid: &StateGrid, z: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (node, w) in grid.stencil(x).iter() {
        for c in 0..d {
            out[c] += w * z[node * d + c];
        }
    }
}

/// `Φ_j(X_T) + Σ f_j(t_i, X_i, Ŷ_i, Ẑ_i, u_i, v_i) Δt_i` along one path, with
/// `Ŷ, Ẑ` read from `fields(i)` by interpolation.
fn path_payoff<'a>(
    spec: &GameSpec,
    player: Player,
    grid: &StateGrid,
    bundle: &PathBundle,
    m: usize,
    fields: impl Fn(usize) -> (&'a [f64], &'a [f64]),
) -> f64 {
    let partition = bundle.partition();
    let d = bundle.noise_dim();
    let cells = partition.cells();
    let mut z = vec![0.0; d];
    let mut total = spec.terminal(player, bundle.state(m, cells));
    for i in 0..cells {
        let x = bundle.state(m, i);
        let (ys, zs) = fields(i);
        let y = grid.interpolate(ys, x);
        z_interp(grid, zs, d, x, &mut z);
        let (u, v) = bundle.control(m, i);
        total += spec.driver(player, partition.knot(i), x, y, &z, u, v) * partition.step(i);
    }
    total
}

#[derive(Clone, Debug, Serialize)]
pub struct KnotStatistics {
    pub knot: usize,
    pub time: f64,
    /// Empirical `P[^jY_s >= W_j(s, X_s) - ε]` per player.
    pub probability: [f64; 2],
    pub std_error: [f64; 2],
    /// `1 - ε - 3·std_error`.
    pub threshold: [f64; 2],
    pub pass: [bool; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumCertificate {
    pub start_time: f64,
    pub start: Vec<f64>,
    pub epsilon: f64,
    /// `e_j`: start value of the backward solution under the feedback.
    pub payoffs: [f64; 2],
    /// Monte Carlo reconstruction of `E[J_j]` and its standard error.
    pub mc_payoffs: [f64; 2],
    pub mc_std_errors: [f64; 2],
    pub consistency_pass: [bool; 2],
    pub knots: Vec<KnotStatistics>,
    pub min_probability: [f64; 2],
    pub paths: usize,
    pub seed: u64,
    pub steps: usize,
    pub grid_nodes: usize,
    pub control_grid: (usize, usize),
    pub quadrature_points: usize,
    pub paths_outside_box: usize,
    /// Largest deviation gain per player, when a deviation test was attached.
    pub deviation_gains: Option<[f64; 2]>,
    pub pass: bool,
}

impl EquilibriumCertificate {
    /// `max_j |e_j - Ĵ_j|`: scheme-plus-MC distance between lattice and paths.
    pub fn grid_slack(&self) -> f64 {
        (0..2).map(|j| (self.payoffs[j] - self.mc_payoffs[j]).abs()).fold(0.0, f64::max)
    }

    /// Columns `knot, time, p1, se1, threshold1, pass1, p2, se2, threshold2, pass2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["knot", "time", "p1", "se1", "threshold1", "pass1", "p2", "se2", "threshold2", "pass2"])?;
        for k in &self.knots {
            let mut rec = vec![k.knot.to_string(), format!("{}", k.time)];
            for j in 0..2 {
                rec.push(format!("{}", k.probability[j]));
                rec.push(format!("{}", k.std_error[j]));
                rec.push(format!("{}", k.threshold[j]));
                rec.push(k.pass[j].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates the feedback from `start` at the partition's first knot and
/// checks the probability and start-value conditions.
#[allow(clippy::too_many_arguments)]
pub fn verify_certificate(
    spec: &GameSpec,
    feedback: &FeedbackTable,
    values: &ValueField,
    scheme: &Scheme,
    epsilon: f64,
    start: &[f64],
    paths: usize,
    seed: u64,
) -> Result<EquilibriumCertificate> {
    values.check_scheme(scheme)?;
    if !(epsilon > 0.0) {
        return Err(Error::Usage(format!("epsilon must be positive, got {epsilon}")));
    }
    let partition = scheme.partition();
    let grid = scheme.grid();
    feedback.check(spec, partition.cells(), grid.len())?;
    let sols: Vec<BackwardSolution> = Player::BOTH
        .iter()
        .map(|&p| solve_markov(spec, p, feedback, scheme))
        .collect::<Result<_>>()?;
    let rule = FeedbackRule { table: feedback, grid };
    let bundle = simulate(spec, start, partition, &rule, paths, seed)?;
    let ys = [path_values(&sols[0], &bundle)?, path_values(&sols[1], &bundle)?];

    let knots = partition.knots().len();
    let m = paths as f64;
    let stats: Vec<KnotStatistics> = (0..knots)
        .map(|i| {
            let mut probability = [0.0; 2];
            let mut std_error = [0.0; 2];
            let mut threshold = [0.0; 2];
            let mut pass = [false; 2];
            for j in 0..2 {
                let hits = (0..paths)
                    .filter(|&p| ys[j][p][i] >= grid.interpolate(&values.w[j][i], bundle.state(p, i)) - epsilon)
                    .count();
                let ph = hits as f64 / m;
                probability[j] = ph;
                std_error[j] = (ph * (1.0 - ph) / m).sqrt();
                threshold[j] = 1.0 - epsilon - 3.0 * std_error[j];
                pass[j] = ph >= threshold[j];
            }
            KnotStatistics {
                knot: i,
                time: partition.knot(i),
                probability,
                std_error,
                threshold,
                pass,
            }
        })
        .collect();

    let mut payoffs = [0.0; 2];
    let mut mc_payoffs = [0.0; 2];
    let mut mc_std_errors = [0.0; 2];
    let mut consistency_pass = [false; 2];
    for (j, sol) in sols.iter().enumerate() {
        let player = Player::BOTH[j];
        payoffs[j] = sol.value_at(0, start);
        let js = exec::map(paths, |p| path_payoff(spec, player, grid, &bundle, p, |i| (&sol.y[i], &sol.z[i])));
        let (mean, se) = mean_and_se(&js);
        mc_payoffs[j] = mean;
        mc_std_errors[j] = se;
        consistency_pass[j] = (payoffs[j] - mean).abs() <= 3.0 * se;
    }
    let min_probability = [0, 1].map(|j| stats.iter().map(|s| s.probability[j]).fold(1.0, f64::min));
    let pass = stats.iter().all(|s| s.pass[0] && s.pass[1]) && consistency_pass.iter().all(|&c| c);
    Ok(EquilibriumCertificate {
        start_time: partition.start(),
        start: start.to_vec(),
        epsilon,
        payoffs,
        mc_payoffs,
        mc_std_errors,
        consistency_pass,
        knots: stats,
        min_probability,
        paths,
        seed,
        steps: partition.cells(),
        grid_nodes: grid.len(),
        control_grid: (spec.u().len(), spec.v().len()),
        quadrature_points: scheme.quadrature_points(),
        paths_outside_box: bundle.exits(),
        deviation_gains: None,
        pass,
    })
}

fn knot(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// A unilateral, partition-piecewise-constant deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Deviation {
    /// Play `control` on `[start, end)` (both knots), nominal elsewhere.
    Window { player: Player, start: f64, end: f64, control: usize },
    /// Play `control` on every cell.
    Constant { player: Player, control: usize },
    /// Play a fixed control per cell.
    OpenLoop { player: Player, controls: Vec<usize> },
}

impl Deviation {
    pub fn player(&self) -> Player {
        match self {
            Deviation::Window { player, .. } | Deviation::Constant { player, .. } | Deviation::OpenLoop { player, .. } => *player,
        }
    }

    pub fn label(&self, spec: &GameSpec) -> String {
        let set = |p: Player| if p == Player::One { spec.u() } else { spec.v() };
        match self {
            Deviation::Window { player, start, end, control } => {
                format!("p{player} plays {} on [{}, {})", set(*player).label(*control), knot(*start), knot(*end))
            }
            Deviation::Constant { player, control } => format!("p{player} plays {} throughout", set(*player).label(*control)),
            Deviation::OpenLoop { player, controls } => format!(
                "p{player} open loop {}",
                controls.iter().map(|c| set(*player).label(*c)).collect::<Vec<_>>().join(" ")
            ),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Deviation::Window { .. } => "window",
            Deviation::Constant { .. } => "constant",
            Deviation::OpenLoop { .. } => "open-loop",
        }
    }

    /// Per-cell forced control of the deviator (`None` = nominal).
    fn resolve(&self, spec: &GameSpec, scheme: &Scheme) -> Result<Vec<Option<usize>>> {
        let partition = scheme.partition();
        let cells = partition.cells();
        let size = match self.player() {
            Player::One => spec.u().len(),
            Player::Two => spec.v().len(),
        };
        let check = |c: usize| {
            if c < size {
                Ok(())
            } else {
                Err(Error::Usage(format!("deviation control index {c} out of range")))
            }
        };
        match self {
            Deviation::Window { start, end, control, .. } => {
                check(*control)?;
                let a = partition.knot_index(*start);
                let b = partition.knot_index(*end);
                match (a, b) {
                    (Some(a), Some(b)) if a < b => Ok((0..cells).map(|i| (a..b).contains(&i).then_some(*control)).collect()),
                    _ => Err(Error::Usage(format!(
                        "deviation window [{start}, {end}) is not a union of partition cells"
                    ))),
                }
            }
            Deviation::Constant { control, .. } => {
                check(*control)?;
                Ok(vec![Some(*control); cells])
            }
            Deviation::OpenLoop { controls, .. } => {
                if controls.len() != cells {
                    return Err(Error::Usage(format!(
                        "open-loop deviation has {} cells, the partition has {cells}",
                        controls.len()
                    )));
                }
                controls.iter().try_for_each(|&c| check(c))?;
                Ok(controls.iter().map(|&c| Some(c)).collect())
            }
        }
    }
}

/// All single-window deviations on a coarse sub-partition (every control of
/// both players on each coarse cell) plus every constant deviation.
pub fn standard_deviations(spec: &GameSpec, scheme: &Scheme, coarse_cells: usize) -> Result<Vec<Deviation>> {
    let partition = scheme.partition();
    let cells = partition.cells();
    if coarse_cells == 0 || cells % coarse_cells != 0 {
        return Err(Error::Usage(format!("{coarse_cells} coarse cells do not divide {cells} cells")));
    }
    let coarse = partition.coarsened(cells / coarse_cells)?;
    let mut out = Vec::new();
    for player in Player::BOTH {
        let size = if player == Player::One { spec.u().len() } else { spec.v().len() };
        for w in coarse.knots().windows(2) {
            for control in 0..size {
                out.push(Deviation::Window {
                    player,
                    start: w[0],
                    end: w[1],
                    control,
                });
            }
        }
    }
    for player in Player::BOTH {
        let size = if player == Player::One { spec.u().len() } else { spec.v().len() };
        out.extend((0..size).map(|control| Deviation::Constant { player, control }));
    }
    Ok(out)
}

fn own(pair: (usize, usize), player: Player) -> usize {
    match player {
        Player::One => pair.0,
        Player::Two => pair.1,
    }
}

fn ordered(player: Player, own: usize, other: usize) -> (usize, usize) {
    match player {
        Player::One => (own, other),
        Player::Two => (other, own),
    }
}

/// Deviator's lattice values before and after detection.
struct RegimeFields {
    pre_y: Vec<Vec<f64>>,
    pre_z: Vec<Vec<f64>>,
    post_y: Vec<Vec<f64>>,
    post_z: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn step_slice(
    spec: &GameSpec,
    scheme: &Scheme,
    player: Player,
    i: usize,
    pair_at: impl Fn(usize) -> (usize, usize) + Sync + Send,
    next_at: impl Fn(usize) -> bool + Sync + Send,
    next_a: &[f64],
    next_b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = scheme.grid();
    let n = grid.dim();
    let d = scheme.noise_dim();
    let t = scheme.partition().knot(i);
    let out = exec::try_map(grid.len(), |k| {
        let mut x = vec![0.0; n];
        grid.node_into(k, &mut x);
        let (u, v) = pair_at(k);
        let mut b = vec![0.0; n];
        let mut s = vec![0.0; n * d];
        spec.drift_into(t, &x, u, v, &mut b);
        spec.diffusion_into(t, &x, u, v, &mut s);
        let mut st = Vec::new();
        scheme.transition(i, &x, &b, &s, &mut st);
        let next = if next_at(k) { next_b } else { next_a };
        let mut z = vec![0.0; d];
        let e = scheme.moments(i, &st, next, &mut z);
        let y = scheme.implicit(i, k, e, |y| spec.driver(player, t, &x, y, &z, u, v))?;
        Ok::<_, Error>((y, z))
    })?;
    let mut ys = Vec::with_capacity(grid.len());
    let mut zs = Vec::with_capacity(grid.len() * d);
    for (y, z) in out {
        ys.push(y);
        zs.extend(z);
    }
    Ok((ys, zs))
}

fn regime_fields(
    spec: &GameSpec,
    scheme: &Scheme,
    values: &ValueField,
    nominal: &FeedbackTable,
    player: Player,
    forced: &[Option<usize>],
) -> Result<RegimeFields> {
    let grid = scheme.grid();
    let cells = scheme.partition().cells();
    let terminal: Vec<f64> = grid.nodes().iter().map(|x| spec.terminal(player, x)).collect();
    let zero = vec![0.0; grid.len() * scheme.noise_dim()];
    let punisher = player.other();
    let mut post_y = vec![terminal.clone()];
    let mut post_z = vec![zero.clone()];
    let mut pre_y = vec![terminal];
    let mut pre_z = vec![zero];
    for i in (0..cells).rev() {
        let dev = |k: usize| forced[i].unwrap_or_else(|| own(nominal.get(i, k), player));
        let (y, z) = step_slice(
            spec,
            scheme,
            player,
            i,
            |k| ordered(player, dev(k), values.punish_control(punisher, i, k)),
            |_| false,
            post_y.last().unwrap(),
            post_y.last().unwrap(),
        )?;
        let post_next = post_y.last().unwrap().clone();
        post_y.push(y);
        post_z.push(z);
        let (y, z) = step_slice(
            spec,
            scheme,
            player,
            i,
            |k| ordered(player, dev(k), own(nominal.get(i, k), punisher)),
            |k| dev(k) != own(nominal.get(i, k), player),
            pre_y.last().unwrap(),
            &post_next,
        )?;
        pre_y.push(y);
        pre_z.push(z);
    }
    for f in [&mut pre_y, &mut pre_z, &mut post_y, &mut post_z] {
        f.reverse();
    }
    Ok(RegimeFields {
        pre_y,
        pre_z,
        post_y,
        post_z,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationResult {
    pub label: String,
    pub player: Player,
    pub kind: String,
    /// `J_j(deviation) - e_j` from the lattice regime recursion.
    pub lattice_gain: f64,
    /// Paired Monte Carlo estimate of the same gain (common random numbers).
    pub mc_gain: f64,
    pub mc_std_error: f64,
    /// Paths on which a deviation was detected.
    pub detected_paths: usize,
    /// `max (continuation after detection - W_j)` over the lattice.
    pub punishment_excess: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub epsilon: f64,
    pub nominal_payoffs: [f64; 2],
    pub nominal_mc: [f64; 2],
    /// `max_j |e_j - Ĵ_j|` for the nominal pair.
    pub grid_slack: f64,
    pub results: Vec<DeviationResult>,
    /// Largest lattice gain per player; `-inf` when that player has no deviation.
    pub max_gain: [f64; 2],
    pub paths: usize,
    pub seed: u64,
    pub pass: bool,
}

impl DeviationReport {
    /// Index of the deviation with the largest lattice gain.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.results.iter().enumerate() {
            if best.is_none_or(|b| r.lattice_gain > self.results[b].lattice_gain) {
                best = Some(i);
            }
        }
        best
    }

    /// Columns `label, player, kind, lattice_gain, mc_gain, mc_se, detected_paths,
    /// punishment_excess, margin, pass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "label",
            "player",
            "kind",
            "lattice_gain",
            "mc_gain",
            "mc_se",
            "detected_paths",
            "punishment_excess",
            "margin",
            "pass",
        ])?;
        for r in &self.results {
            w.write_record([
                r.label.clone(),
                r.player.to_string(),
                r.kind.clone(),
                format!("{}", r.lattice_gain),
                format!("{}", r.mc_gain),
                format!("{}", r.mc_std_error),
                r.detected_paths.to_string(),
                format!("{}", r.punishment_excess),
                format!("{}", r.margin),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays each deviation against the opponent's punishment strategy and
/// compares the deviator's payoff with the nominal one.
#[allow(clippy::too_many_arguments)]
pub fn deviation_test(
    spec: &GameSpec,
    scheme: &Scheme,
    values: &ValueField,
    nominal: &FeedbackTable,
    deviations: &[Deviation],
    epsilon: f64,
    start: &[f64],
    paths: usize,
    seed: u64,
) -> Result<DeviationReport> {
    values.check_scheme(scheme)?;
    let partition = scheme.partition();
    let grid = scheme.grid();
    nominal.check(spec, partition.cells(), grid.len())?;
    let resolved: Vec<Vec<Option<usize>>> = deviations.iter().map(|d| d.resolve(spec, scheme)).collect::<Result<_>>()?;

    let sols: Vec<BackwardSolution> = Player::BOTH
        .iter()
        .map(|&p| solve_markov(spec, p, nominal, scheme))
        .collect::<Result<_>>()?;
    let nominal_payoffs = [sols[0].value_at(0, start), sols[1].value_at(0, start)];
    let nominal_bundle = simulate(spec, start, partition, &FeedbackRule { table: nominal, grid }, paths, seed)?;
    let nominal_js: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            exec::map(paths, |p| {
                path_payoff(spec, Player::BOTH[j], grid, &nominal_bundle, p, |i| (&sols[j].y[i], &sols[j].z[i]))
            })
        })
        .collect();
    let nominal_mc = [mean_and_se(&nominal_js[0]).0, mean_and_se(&nominal_js[1]).0];
    let grid_slack = (0..2).map(|j| (nominal_payoffs[j] - nominal_mc[j]).abs()).fold(0.0, f64::max);

    let punishers = [
        punishment_strategy(Player::One, nominal, values),
        punishment_strategy(Player::Two, nominal, values),
    ];
    let mut results = Vec::with_capacity(deviations.len());
    for (dev, forced) in deviations.iter().zip(&resolved) {
        let player = dev.player();
        let j = player.index();
        let fields = regime_fields(spec, scheme, values, nominal, player, forced)?;
        let lattice_gain = grid.interpolate(&fields.pre_y[0], start) - nominal_payoffs[j];
        let punishment_excess = fields
            .post_y
            .iter()
            .zip(&values.w[j])
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q))
            .fold(f64::NEG_INFINITY, f64::max);

        let deviator = {
            let forced = forced.clone();
            let table = nominal.clone();
            let g = grid.clone();
            NadStrategy::new(player, partition.clone(), move |o| {
                forced[o.cell].unwrap_or_else(|| own(table.get(o.cell, g.nearest(o.state())), player))
            })
        };
        let punisher = &punishers[player.other().index()];
        let rule = match player {
            Player::One => StrategyRule {
                alpha: &deviator,
                beta: punisher,
            },
            Player::Two => StrategyRule {
                alpha: punisher,
                beta: &deviator,
            },
        };
        let bundle = simulate(spec, start, partition, &rule, paths, seed)?;
        let per_path = exec::map(paths, |p| {
            // regime on cell i: post-detection iff the deviator left the nominal on an earlier cell
            let mut detected_at = None;
            for k in 0..partition.cells() {
                let expected = own(nominal.get(k, grid.nearest(bundle.state(p, k))), player);
                if own(bundle.control(p, k), player) != expected {
                    detected_at = Some(k);
                    break;
                }
            }
            let jd = path_payoff(spec, player, grid, &bundle, p, |i| match detected_at {
                Some(k) if i > k => (&fields.post_y[i], &fields.post_z[i]),
                _ => (&fields.pre_y[i], &fields.pre_z[i]),
            });
            (jd - nominal_js[j][p], detected_at.is_some())
        });
        let diffs: Vec<f64> = per_path.iter().map(|r| r.0).collect();
        let (mc_gain, mc_std_error) = mean_and_se(&diffs);
        let margin = 3.0 * mc_std_error + 2.0 * grid_slack;
        results.push(DeviationResult {
            label: dev.label(spec),
            player,
            kind: dev.kind().into(),
            lattice_gain,
            mc_gain,
            mc_std_error,
            detected_paths: per_path.iter().filter(|r| r.1).count(),
            punishment_excess,
            margin,
            pass: lattice_gain <= epsilon + margin,
        });
    }
    let max_gain = [0, 1].map(|j| {
        results
            .iter()
            .filter(|r| r.player.index() == j)
            .map(|r| r.lattice_gain)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let pass = results.iter().all(|r| r.pass);
    Ok(DeviationReport {
        epsilon,
        nominal_payoffs,
        nominal_mc,
        grid_slack,
        results,
        max_gain,
        paths,
        seed,
        pass,
    })
}
