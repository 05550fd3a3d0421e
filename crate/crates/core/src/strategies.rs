//! Nonanticipative strategies with delay on a fixed partition, their
//! coupling into control pairs, and the punishment strategies.
//!
//! A strategy answers for cell `i` after seeing the opponent only on cells
//! `< i`, so the delay property holds by construction: [`NadStrategy::respond`]
//! truncates whatever opponent history it is given.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::FeedbackTable;
use crate::game_model::{GameSpec, Player};
use crate::grid::StateGrid;
use crate::partition::TimePartition;
use crate::sde_sim::{ControlRule, PathView};
use crate::value_pde::ValueField;

/// Everything a strategy may use when choosing its control on `cell`.
pub struct Observation<'a> {
    pub cell: usize,
    /// Own controls on cells `< cell`.
    pub own: &'a [usize],
    /// Opponent controls on cells `< cell`.
    pub opponent: &'a [usize],
    state_dim: usize,
    /// States at knots `0..=cell`, flattened.
    states: &'a [f64],
}

impl Observation<'_> {
    pub fn state(&self) -> &[f64] {
        self.state_at(self.cell)
    }

    pub fn state_at(&self, knot: usize) -> &[f64] {
        &self.states[knot * self.state_dim..(knot + 1) * self.state_dim]
    }
}

type Respond = Arc<dyn Fn(&Observation<'_>) -> usize + Send + Sync>;

#[derive(Clone)]
pub struct NadStrategy {
    player: Player,
    partition: TimePartition,
    respond: Respond,
}

impl fmt::Debug for NadStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NadStrategy")
            .field("player", &self.player)
            .field("cells", &self.partition.cells())
            .finish_non_exhaustive()
    }
}

impl NadStrategy {
    pub fn new(
        player: Player,
        partition: TimePartition,
        respond: impl Fn(&Observation<'_>) -> usize + Send + Sync + 'static,
    ) -> Self {
        Self {
            player,
            partition,
            respond: Arc::new(respond),
        }
    }

    /// Ignores everything and plays `control` on every cell.
    pub fn constant(player: Player, partition: TimePartition, control: usize) -> Self {
        Self::new(player, partition, move |_| control)
    }

    /// Plays a fixed per-cell sequence.
    pub fn open_loop(player: Player, partition: TimePartition, controls: Vec<usize>) -> Self {
        Self::new(player, partition, move |o| controls[o.cell])
    }

    /// Plays one side of a lattice feedback at the nearest node.
    pub fn feedback(player: Player, partition: TimePartition, table: FeedbackTable, grid: StateGrid) -> Self {
        Self::new(player, partition, move |o| {
            let pair = table.get(o.cell, grid.nearest(o.state()));
            match player {
                Player::One => pair.0,
                Player::Two => pair.1,
            }
        })
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    /// Control on `cell`. Only the first `cell` entries of the histories are read.
    pub fn respond(&self, cell: usize, own: &[usize], opponent: &[usize], state_dim: usize, states: &[f64]) -> usize {
        let obs = Observation {
            cell,
            own: &own[..cell.min(own.len())],
            opponent: &opponent[..cell.min(opponent.len())],
            state_dim,
            states: &states[..((cell + 1) * state_dim).min(states.len())],
        };
        (self.respond)(&obs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlPair {
    pub u: Vec<usize>,
    pub v: Vec<usize>,
}

impl ControlPair {
    pub fn cells(&self) -> usize {
        self.u.len()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.u.iter().copied().zip(self.v.iter().copied()).collect()
    }
}

/// Supplies the state at knot `cell` given the controls already fixed on
/// the earlier cells.
pub trait StateSource {
    fn state_dim(&self) -> usize;
    fn state(&mut self, cell: usize, fixed: &[(usize, usize)]) -> Vec<f64>;
}

/// A state space of dimension 1 frozen at zero, for strategies that ignore the state.
pub struct NoState;

impl StateSource for NoState {
    fn state_dim(&self) -> usize {
        1
    }
    fn state(&mut self, _: usize, _: &[(usize, usize)]) -> Vec<f64> {
        vec![0.0]
    }
}

/// Euler–Maruyama along one fixed noise realization.
pub struct EulerSource<'a> {
    spec: &'a GameSpec,
    partition: &'a TimePartition,
    increments: &'a [f64],
    states: Vec<Vec<f64>>,
}

impl<'a> EulerSource<'a> {
    /// `increments` holds the Brownian increments, `cells × d`.
    pub fn new(spec: &'a GameSpec, partition: &'a TimePartition, start: &[f64], increments: &'a [f64]) -> Self {
        Self {
            spec,
            partition,
            increments,
            states: vec![start.to_vec()],
        }
    }
}

impl StateSource for EulerSource<'_> {
    fn state_dim(&self) -> usize {
        self.spec.state_dim()
    }

    fn state(&mut self, cell: usize, fixed: &[(usize, usize)]) -> Vec<f64> {
        let n = self.spec.state_dim();
        let d = self.spec.noise_dim();
        while self.states.len() <= cell {
            let i = self.states.len() - 1;
            let (u, v) = fixed[i];
            let t = self.partition.knot(i);
            let dt = self.partition.step(i);
            let x = &self.states[i];
            let mut b = vec![0.0; n];
            let mut s = vec![0.0; n * d];
            self.spec.drift_into(t, x, u, v, &mut b);
            self.spec.diffusion_into(t, x, u, v, &mut s);
            let next = (0..n)
                .map(|r| x[r] + b[r] * dt + (0..d).map(|c| s[r * d + c] * self.increments[i * d + c]).sum::<f64>())
                .collect();
            self.states.push(next);
        }
        self.states[cell].clone()
    }
}

/// Which strategy is evaluated first on each cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupleOrder {
    AlphaFirst,
    BetaFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coupling {
    pub pair: ControlPair,
    /// States at knots `0..=n`.
    pub states: Vec<Vec<f64>>,
}

fn play_cell(alpha: &NadStrategy, beta: &NadStrategy, cell: usize, u: &[usize], v: &[usize], n: usize, states: &[f64], order: CoupleOrder) -> (usize, usize) {
    match order {
        CoupleOrder::AlphaFirst => {
            let a = alpha.respond(cell, u, v, n, states);
            (a, beta.respond(cell, v, u, n, states))
        }
        CoupleOrder::BetaFirst => {
            let b = beta.respond(cell, v, u, n, states);
            (alpha.respond(cell, u, v, n, states), b)
        }
    }
}

fn check_pair(alpha: &NadStrategy, beta: &NadStrategy) -> Result<()> {
    if alpha.player != Player::One || beta.player != Player::Two {
        return Err(Error::Usage("couple needs a player-1 strategy and a player-2 strategy".into()));
    }
    if alpha.partition != beta.partition {
        return Err(Error::Usage("strategies must share their delay partition".into()));
    }
    Ok(())
}

/// The unique control pair with `α(v) = u` and `β(u) = v`, built cell by cell.
pub fn couple(alpha: &NadStrategy, beta: &NadStrategy, source: &mut dyn StateSource, order: CoupleOrder) -> Result<Coupling> {
    check_pair(alpha, beta)?;
    let cells = alpha.partition.cells();
    let n = source.state_dim();
    let (mut u, mut v) = (Vec::with_capacity(cells), Vec::with_capacity(cells));
    let mut fixed = Vec::with_capacity(cells);
    let mut states = Vec::with_capacity((cells + 1) * n);
    for i in 0..cells {
        states.extend(source.state(i, &fixed));
        let (a, b) = play_cell(alpha, beta, i, &u, &v, n, &states, order);
        u.push(a);
        v.push(b);
        fixed.push((a, b));
    }
    states.extend(source.state(cells, &fixed));
    Ok(Coupling {
        pair: ControlPair { u, v },
        states: states.chunks(n).map(<[f64]>::to_vec).collect(),
    })
}

/// Re-applies both strategies to the coupled controls and checks
/// `α(v) = u` and `β(u) = v` on every cell.
pub fn replay_consistent(alpha: &NadStrategy, beta: &NadStrategy, coupling: &Coupling) -> bool {
    let flat: Vec<f64> = coupling.states.iter().flatten().copied().collect();
    let n = coupling.states[0].len();
    let (u, v) = (&coupling.pair.u, &coupling.pair.v);
    (0..u.len()).all(|i| alpha.respond(i, u, v, n, &flat) == u[i] && beta.respond(i, v, u, n, &flat) == v[i])
}

/// Plays a strategy pair along simulated paths.
pub struct StrategyRule<'a> {
    pub alpha: &'a NadStrategy,
    pub beta: &'a NadStrategy,
}

impl ControlRule for StrategyRule<'_> {
    fn select(&self, view: &PathView<'_>) -> (usize, usize) {
        let (u, v): (Vec<usize>, Vec<usize>) = view.controls().iter().copied().unzip();
        let n = view.state().len();
        play_cell(self.alpha, self.beta, view.step, &u, &v, n, view.states(), CoupleOrder::AlphaFirst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointSearch {
    pub name: String,
    /// `φ : V -> U`, player 1's zero-delay reaction.
    pub phi: Vec<usize>,
    /// `ψ : U -> V`, player 2's zero-delay reaction.
    pub psi: Vec<usize>,
    pub candidates_examined: usize,
    pub fixed_points: Vec<(usize, usize)>,
    pub verdict: String,
    pub trace: Vec<String>,
}

/// Exhaustive search for a consistent constant couple of the zero-delay maps
/// `α(v)_s = φ(v_s)`, `β(u)_s = ψ(u_s)`: `v` must be a fixed point of `ψ∘φ`.
pub fn zero_delay_search(name: &str, phi: &[usize], psi: &[usize]) -> FixedPointSearch {
    let mut trace = Vec::new();
    let mut fixed_points = Vec::new();
    for v in 0..phi.len() {
        let u = phi[v];
        let back = psi[u];
        let ok = back == v;
        trace.push(format!(
            "v = {v}: u = phi(v) = {u}, psi(u) = {back} -> {}",
            if ok { "consistent" } else { "inconsistent" }
        ));
        if ok {
            fixed_points.push((u, v));
        }
    }
    let verdict = if fixed_points.is_empty() { "no fixed point" } else { "couple found" };
    FixedPointSearch {
        name: name.into(),
        phi: phi.to_vec(),
        psi: psi.to_vec(),
        candidates_examined: phi.len(),
        fixed_points,
        verdict: verdict.into(),
        trace,
    }
}

/// `φ = id`, `ψ = negation` on `{0, 1}`.
pub fn no_delay_counterexample() -> FixedPointSearch {
    zero_delay_search("phi = id, psi = negation on {0,1}", &[0, 1], &[1, 0])
}

/// The counterexample with two companion cases and the delayed coupling of
/// the same reaction maps.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointDemo {
    pub cases: Vec<FixedPointSearch>,
    /// With one cell of delay the same maps couple: the pair produced on 4 cells.
    pub delayed_coupling: ControlPair,
    pub delayed_replay_consistent: bool,
}

pub fn fixed_point_demo() -> Result<FixedPointDemo> {
    let cases = vec![
        no_delay_counterexample(),
        zero_delay_search("phi = id, psi = id on {0,1}", &[0, 1], &[0, 1]),
        zero_delay_search("phi = id, psi = 3-cycle on {0,1,2}", &[0, 1, 2], &[1, 2, 0]),
    ];
    // the delayed version reacts to the opponent's previous cell
    let partition = TimePartition::uniform(0.0, 1.0, 4)?;
    let alpha = NadStrategy::new(Player::One, partition.clone(), |o| o.opponent.last().copied().unwrap_or(0));
    let beta = NadStrategy::new(Player::Two, partition, |o| 1 - o.opponent.last().copied().unwrap_or(0));
    let coupling = couple(&alpha, &beta, &mut NoState, CoupleOrder::AlphaFirst)?;
    Ok(FixedPointDemo {
        cases,
        delayed_replay_consistent: replay_consistent(&alpha, &beta, &coupling),
        delayed_coupling: coupling.pair,
    })
}

/// Nominal play plus punishment after a detected deviation.
///
/// The punisher follows its side of `nominal` while the opponent's controls
/// match the nominal ones on every completed cell. If the first mismatch is
/// on cell `k`, it plays its punish table from knot `k+1` on.
pub fn punishment_strategy(
    punisher: Player,
    nominal: &FeedbackTable,
    values: &ValueField,
) -> NadStrategy {
    let table = nominal.clone();
    let grid = values.grid.clone();
    let punish = match punisher {
        Player::One => values.punish_1.clone(),
        Player::Two => values.punish_2.clone(),
    };
    NadStrategy::new(punisher, values.partition.clone(), move |o| {
        let detected = (0..o.cell).any(|k| {
            let pair = table.get(k, grid.nearest(o.state_at(k)));
            let expected = match punisher {
                Player::One => pair.1,
                Player::Two => pair.0,
            };
            o.opponent[k] != expected
        });
        let node = grid.nearest(o.state());
        if detected {
            punish[o.cell][node]
        } else {
            let pair = table.get(o.cell, node);
            match punisher {
                Player::One => pair.0,
                Player::Two => pair.1,
            }
        }
    })
}
