//! Euler–Maruyama simulation of the controlled state equation.
//!
//! Path `m` draws its Brownian increments from ChaCha8 seeded with the run
//! seed on stream `m`, so a bundle is independent of scheduling and two
//! runs with the same seed share their noise (common random numbers)
//! whatever controls are played.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::feedback::FeedbackTable;
use crate::game_model::GameSpec;
use crate::grid::StateGrid;
use crate::partition::TimePartition;

/// What a control rule may look at on path `path` when choosing the
/// controls of cell `step`.
pub struct PathView<'a> {
    pub path: usize,
    pub step: usize,
    pub time: f64,
    n: usize,
    states: &'a [f64],
    controls: &'a [(usize, usize)],
}

impl PathView<'_> {
    pub fn state(&self) -> &[f64] {
        self.state_at(self.step)
    }

    pub fn state_at(&self, knot: usize) -> &[f64] {
        &self.states[knot * self.n..(knot + 1) * self.n]
    }

    /// States at knots `0..=step`, flattened.
    pub fn states(&self) -> &[f64] {
        &self.states[..(self.step + 1) * self.n]
    }

    /// Controls played on cells `0..step`.
    pub fn controls(&self) -> &[(usize, usize)] {
        self.controls
    }
}

pub trait ControlRule: Sync {
    fn select(&self, view: &PathView<'_>) -> (usize, usize);
}

impl<F> ControlRule for F
where
    F: Fn(&PathView<'_>) -> (usize, usize) + Sync,
{
    fn select(&self, view: &PathView<'_>) -> (usize, usize) {
        self(view)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantControls(pub usize, pub usize);

impl ControlRule for ConstantControls {
    fn select(&self, _: &PathView<'_>) -> (usize, usize) {
        (self.0, self.1)
    }
}

/// The same per-cell control sequence on every path.
#[derive(Clone, Debug)]
pub struct OpenLoop(pub Vec<(usize, usize)>);

impl ControlRule for OpenLoop {
    fn select(&self, view: &PathView<'_>) -> (usize, usize) {
        self.0[view.step]
    }
}

/// Lattice feedback read at the node nearest to the current state.
#[derive(Clone, Debug)]
pub struct FeedbackRule<'a> {
    pub table: &'a FeedbackTable,
    pub grid: &'a StateGrid,
}

impl ControlRule for FeedbackRule<'_> {
    fn select(&self, view: &PathView<'_>) -> (usize, usize) {
        self.table.get(view.step, self.grid.nearest(view.state()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathBundle {
    partition: TimePartition,
    state_dim: usize,
    noise_dim: usize,
    paths: usize,
    seed: u64,
    start: Vec<f64>,
    /// `[path][knot][coordinate]`, flattened.
    states: Vec<f64>,
    /// `[path][cell][noise coordinate]`, flattened Brownian increments.
    noise: Vec<f64>,
    /// `[path][cell]`.
    controls: Vec<(usize, usize)>,
    exits: usize,
}

impl PathBundle {
    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    pub fn paths(&self) -> usize {
        self.paths
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn start(&self) -> &[f64] {
        &self.start
    }
    /// Number of paths that left the game's state box.
    pub fn exits(&self) -> usize {
        self.exits
    }

    fn knots(&self) -> usize {
        self.partition.knots().len()
    }

    pub fn state(&self, path: usize, knot: usize) -> &[f64] {
        let base = (path * self.knots() + knot) * self.state_dim;
        &self.states[base..base + self.state_dim]
    }

    pub fn increment(&self, path: usize, cell: usize) -> &[f64] {
        let base = (path * self.partition.cells() + cell) * self.noise_dim;
        &self.noise[base..base + self.noise_dim]
    }

    pub fn control(&self, path: usize, cell: usize) -> (usize, usize) {
        self.controls[path * self.partition.cells() + cell]
    }

    pub fn path_controls(&self, path: usize) -> &[(usize, usize)] {
        let c = self.partition.cells();
        &self.controls[path * c..(path + 1) * c]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.paths).map(move |m| self.state(m, self.knots() - 1))
    }

    /// One row per (path, knot): state coordinates and the labels of the
    /// controls played on the cell starting at that knot (empty at T).
    pub fn write_csv<W: Write>(&self, spec: &GameSpec, mut out: W) -> Result<()> {
        let knots: Vec<String> = self.partition.knots().iter().map(|t| format!("{t}")).collect();
        writeln!(out, "# seed={} paths={} knots={}", self.seed, self.paths, knots.join(";"))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path".to_string(), "knot".into(), "time".into()];
        header.extend((1..=self.state_dim).map(|k| format!("x{k}")));
        header.push("u".into());
        header.push("v".into());
        w.write_record(&header)?;
        for m in 0..self.paths {
            for i in 0..self.knots() {
                let mut rec = vec![m.to_string(), i.to_string(), knots[i].clone()];
                rec.extend(self.state(m, i).iter().map(|c| format!("{c}")));
                if i < self.partition.cells() {
                    let (u, v) = self.control(m, i);
                    rec.push(spec.u().label(u).to_string());
                    rec.push(spec.v().label(v).to_string());
                } else {
                    rec.push(String::new());
                    rec.push(String::new());
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

struct SimulatedPath {
    states: Vec<f64>,
    noise: Vec<f64>,
    controls: Vec<(usize, usize)>,
    exited: bool,
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn in_box(spec: &GameSpec, x: &[f64]) -> bool {
    x.iter().zip(spec.state_box()).all(|(c, (lo, hi))| c >= lo && c <= hi)
}

/// Simulates `paths` trajectories from `(partition.start(), start)`.
pub fn simulate(
    spec: &GameSpec,
    start: &[f64],
    partition: &TimePartition,
    rule: &dyn ControlRule,
    paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    let n = spec.state_dim();
    let d = spec.noise_dim();
    if start.len() != n {
        return Err(Error::Usage(format!("start state has dimension {} (expected {n})", start.len())));
    }
    if paths == 0 {
        return Err(Error::Usage("need at least one path".into()));
    }
    let cells = partition.cells();
    let simulated = exec::try_map(paths, |m| {
        let mut rng = path_rng(seed, m);
        let mut states = Vec::with_capacity((cells + 1) * n);
        states.extend_from_slice(start);
        let mut noise = Vec::with_capacity(cells * d);
        let mut controls = Vec::with_capacity(cells);
        let mut b = vec![0.0; n];
        let mut s = vec![0.0; n * d];
        let mut exited = !in_box(spec, start);
        for i in 0..cells {
            let t = partition.knot(i);
            let dt = partition.step(i);
            let sq = dt.sqrt();
            let base = noise.len();
            for _ in 0..d {
                let g: f64 = StandardNormal.sample(&mut rng);
                noise.push(sq * g);
            }
            let view = PathView {
                path: m,
                step: i,
                time: t,
                n,
                states: &states,
                controls: &controls,
            };
            let (u, v) = rule.select(&view);
            if u >= spec.u().len() || v >= spec.v().len() {
                return Err(Error::Usage(format!("control rule chose ({u}, {v}) outside U x V on path {m}, cell {i}")));
            }
            controls.push((u, v));
            let x = &states[i * n..(i + 1) * n];
            spec.drift_into(t, x, u, v, &mut b);
            spec.diffusion_into(t, x, u, v, &mut s);
            let mut next = vec![0.0; n];
            for r in 0..n {
                let mut dw = 0.0;
                for c in 0..d {
                    dw += s[r * d + c] * noise[base + c];
                }
                next[r] = x[r] + b[r] * dt + dw;
            }
            if next.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFiniteState { path: m, step: i + 1 });
            }
            exited |= !in_box(spec, &next);
            states.extend(next);
        }
        Ok::<_, Error>(SimulatedPath {
            states,
            noise,
            controls,
            exited,
        })
    })?;
    let exits = simulated.iter().filter(|p| p.exited).count();
    if exits > 0 {
        log::warn!("{exits} of {paths} paths left the declared state box; lattice values are extrapolated there");
    }
    let mut bundle = PathBundle {
        partition: partition.clone(),
        state_dim: n,
        noise_dim: d,
        paths,
        seed,
        start: start.to_vec(),
        states: Vec::with_capacity(paths * (cells + 1) * n),
        noise: Vec::with_capacity(paths * cells * d),
        controls: Vec::with_capacity(paths * cells),
        exits,
    };
    for p in simulated {
        bundle.states.extend(p.states);
        bundle.noise.extend(p.noise);
        bundle.controls.extend(p.controls);
    }
    Ok(bundle)
}

/// `K = max(L, sup |b(t,0,u,v)|, sup |σ(t,0,u,v)|)` over the knots and controls.
pub fn linear_growth_constant(spec: &GameSpec, partition: &TimePartition) -> f64 {
    let n = spec.state_dim();
    let zero = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut s = vec![0.0; n * spec.noise_dim()];
    let mut k = spec.lipschitz();
    for &t in partition.knots() {
        for u in 0..spec.u().len() {
            for v in 0..spec.v().len() {
                spec.drift_into(t, &zero, u, v, &mut b);
                spec.diffusion_into(t, &zero, u, v, &mut s);
                k = k.max(norm(&b)).max(norm(&s));
            }
        }
    }
    k
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Gronwall constant with `E sup |X|^p <= C_p (1 + |x|^p)` for growth
/// constant `k` over a horizon of length `horizon`.
pub fn gronwall_constant(p: u32, k: f64, horizon: f64) -> f64 {
    let pf = p as f64;
    let a = 3f64.powf(pf - 1.0);
    let kb = 2f64.powf(pf - 1.0) * k.powf(pf) * horizon.powf(pf - 1.0);
    let bdg = (pf / (pf - 1.0)).powf(pf) * (pf * (pf - 1.0) / 2.0).powf(pf / 2.0);
    let ks = bdg * 2f64.powf(pf - 1.0) * k.powf(pf) * horizon.powf(pf / 2.0 - 1.0);
    let rate = a * (kb + ks) * horizon;
    a.max(rate) * rate.exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub p: u32,
    /// Empirical `E[sup_s |X_s|^p]` over the knots.
    pub empirical: f64,
    pub std_error: f64,
    pub growth_constant: f64,
    pub c_p: f64,
    /// `C_p (1 + |x|^p)`.
    pub bound: f64,
    pub pass: bool,
}

pub fn moment_check(spec: &GameSpec, bundle: &PathBundle, p: u32) -> Result<MomentReport> {
    if p != 2 && p != 4 {
        return Err(Error::Usage(format!("moment order must be 2 or 4, got {p}")));
    }
    let knots = bundle.partition.knots().len();
    let sups: Vec<f64> = (0..bundle.paths)
        .map(|m| (0..knots).map(|i| norm(bundle.state(m, i)).powi(p as i32)).fold(0.0, f64::max))
        .collect();
    let (mean, se) = mean_and_se(&sups);
    let k = linear_growth_constant(spec, &bundle.partition);
    let horizon = bundle.partition.end() - bundle.partition.start();
    let c_p = gronwall_constant(p, k, horizon);
    let bound = c_p * (1.0 + norm(&bundle.start).powi(p as i32));
    Ok(MomentReport {
        p,
        empirical: mean,
        std_error: se,
        growth_constant: k,
        c_p,
        bound,
        pass: mean <= bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    /// Empirical `E sup |X - X'|^2 / |x - x'|^2` under common noise.
    pub empirical_c2: f64,
    pub std_error: f64,
    /// Gronwall bound computed with growth constant `L`.
    pub gronwall_c2: f64,
    pub pass: bool,
}

/// Second moment estimate for two starts driven by the same noise.
pub fn divergence_check(
    spec: &GameSpec,
    x: &[f64],
    x_alt: &[f64],
    partition: &TimePartition,
    rule: &dyn ControlRule,
    paths: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    let dist2: f64 = x.iter().zip(x_alt).map(|(a, b)| (a - b) * (a - b)).sum();
    if dist2 == 0.0 {
        return Err(Error::Usage("divergence check needs two distinct starts".into()));
    }
    let a = simulate(spec, x, partition, rule, paths, seed)?;
    let b = simulate(spec, x_alt, partition, rule, paths, seed)?;
    let knots = partition.knots().len();
    let ratios: Vec<f64> = (0..paths)
        .map(|m| {
            (0..knots)
                .map(|i| a.state(m, i).iter().zip(b.state(m, i)).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
                .fold(0.0, f64::max)
                / dist2
        })
        .collect();
    let (mean, se) = mean_and_se(&ratios);
    let horizon = partition.end() - partition.start();
    let gronwall_c2 = gronwall_constant(2, spec.lipschitz(), horizon);
    Ok(DivergenceReport {
        empirical_c2: mean,
        std_error: se,
        gronwall_c2,
        pass: mean <= gronwall_c2,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
