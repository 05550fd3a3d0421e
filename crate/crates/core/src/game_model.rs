//! Game description: dimensions, horizon, finite control sets and the six
//! coefficient functions, plus the sampled regularity audit.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `b(t, x, u, v)` written into `out` (length n).
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `σ(t, x, u, v)` written into `out` (n×d, row-major).
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `f(t, x, y, z, u, v)`.
pub type DriverFn = Arc<dyn Fn(f64, &[f64], f64, &[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
/// `Φ(x)`.
pub type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn from_number(j: usize) -> Result<Player> {
        match j {
            1 => Ok(Player::One),
            2 => Ok(Player::Two),
            _ => Err(Error::Usage(format!("player must be 1 or 2, got {j}"))),
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// A finite, ordered set of control values. Indices are stable identifiers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlSet {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl ControlSet {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("control set must be nonempty".into()));
        }
        if labels.len() != points.len() {
            return Err(Error::InvalidSpec(format!(
                "control set has {} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidSpec("control points must have dimension >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "control point {i} has dimension {} (expected {dim})",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpec(format!("control point {i} is not finite")));
            }
            if points[..i].contains(p) {
                return Err(Error::InvalidSpec(format!("duplicate control point {p:?}")));
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.contains([',', '"', '\n', '\r']) {
                return Err(Error::InvalidSpec(format!("invalid control label {l:?}")));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidSpec(format!("duplicate control label {l:?}")));
            }
        }
        Ok(Self { points, labels })
    }

    /// One-dimensional control set labelled by the formatted values.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(
            values.iter().map(|&v| vec![v]).collect(),
            values.iter().map(|v| format!("{v}")).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Full description of a two-player game. Immutable once built; all
/// evaluation methods are reentrant.
#[derive(Clone)]
pub struct GameSpec {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    horizon: f64,
    u: ControlSet,
    v: ControlSet,
    drift: DriftFn,
    diffusion: DiffusionFn,
    drivers: [DriverFn; 2],
    terminals: [TerminalFn; 2],
    lipschitz: f64,
    bound: f64,
    state_box: Vec<(f64, f64)>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise_dim", &self.noise_dim)
            .field("horizon", &self.horizon)
            .field("u", &self.u.labels)
            .field("v", &self.v.labels)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .field("state_box", &self.state_box)
            .finish_non_exhaustive()
    }
}

pub struct GameSpecBuilder {
    name: String,
    state_dim: usize,
    noise_dim: usize,
    horizon: f64,
    u: Option<ControlSet>,
    v: Option<ControlSet>,
    drift: Option<DriftFn>,
    diffusion: Option<DiffusionFn>,
    drivers: [Option<DriverFn>; 2],
    terminals: [Option<TerminalFn>; 2],
    lipschitz: f64,
    bound: f64,
    state_box: Option<Vec<(f64, f64)>>,
}

impl GameSpecBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn controls(mut self, u: ControlSet, v: ControlSet) -> Self {
        self.u = Some(u);
        self.v = Some(v);
        self
    }

    pub fn drift(
        mut self,
        f: impl Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn diffusion(
        mut self,
        f: impl Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Some(Arc::new(f));
        self
    }

    pub fn driver(
        mut self,
        player: Player,
        f: impl Fn(f64, &[f64], f64, &[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.drivers[player.index()] = Some(Arc::new(f));
        self
    }

    pub fn terminal(mut self, player: Player, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.terminals[player.index()] = Some(Arc::new(f));
        self
    }

    /// Declared Lipschitz constant `L` and uniform bound `M`.
    pub fn constants(mut self, lipschitz: f64, bound: f64) -> Self {
        self.lipschitz = lipschitz;
        self.bound = bound;
        self
    }

    pub fn state_box(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.state_box = Some(bounds);
        self
    }

    /// Missing coefficients default to zero; missing control sets to `{0}`.
    pub fn build(self) -> Result<GameSpec> {
        if self.state_dim == 0 || self.noise_dim == 0 {
            return Err(Error::InvalidSpec("state and noise dimensions must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidSpec(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::InvalidSpec(format!("Lipschitz constant must be positive, got {}", self.lipschitz)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidSpec(format!("bound M must be positive, got {}", self.bound)));
        }
        let state_box = self
            .state_box
            .unwrap_or_else(|| vec![(-10.0, 10.0); self.state_dim]);
        if state_box.len() != self.state_dim || state_box.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidSpec("state box must give lo < hi for every state dimension".into()));
        }
        let zero_vec: DriftFn = Arc::new(|_, _, _, _, out: &mut [f64]| out.fill(0.0));
        let zero_driver: DriverFn = Arc::new(|_, _, _, _, _, _| 0.0);
        let zero_terminal: TerminalFn = Arc::new(|_| 0.0);
        let [d1, d2] = self.drivers;
        let [t1, t2] = self.terminals;
        Ok(GameSpec {
            name: self.name,
            state_dim: self.state_dim,
            noise_dim: self.noise_dim,
            horizon: self.horizon,
            u: match self.u {
                Some(u) => u,
                None => ControlSet::scalar(&[0.0])?,
            },
            v: match self.v {
                Some(v) => v,
                None => ControlSet::scalar(&[0.0])?,
            },
            drift: self.drift.unwrap_or_else(|| zero_vec.clone()),
            diffusion: self.diffusion.unwrap_or(zero_vec),
            drivers: [
                d1.unwrap_or_else(|| zero_driver.clone()),
                d2.unwrap_or(zero_driver),
            ],
            terminals: [
                t1.unwrap_or_else(|| zero_terminal.clone()),
                t2.unwrap_or(zero_terminal),
            ],
            lipschitz: self.lipschitz,
            bound: self.bound,
            state_box,
        })
    }
}

impl GameSpec {
    pub fn builder(state_dim: usize, noise_dim: usize, horizon: f64) -> GameSpecBuilder {
        GameSpecBuilder {
            name: "custom".into(),
            state_dim,
            noise_dim,
            horizon,
            u: None,
            v: None,
            drift: None,
            diffusion: None,
            drivers: [None, None],
            terminals: [None, None],
            lipschitz: 1.0,
            bound: 1.0,
            state_box: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn u(&self) -> &ControlSet {
        &self.u
    }
    pub fn v(&self) -> &ControlSet {
        &self.v
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
    pub fn state_box(&self) -> &[(f64, f64)] {
        &self.state_box
    }

    /// Same game with the declared constants replaced.
    pub fn with_constants(&self, lipschitz: f64, bound: f64) -> Result<GameSpec> {
        if !(lipschitz > 0.0 && bound > 0.0) {
            return Err(Error::InvalidSpec("L and M must be positive".into()));
        }
        let mut spec = self.clone();
        spec.lipschitz = lipschitz;
        spec.bound = bound;
        Ok(spec)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<GameSpec> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidSpec(format!("horizon must be positive, got {horizon}")));
        }
        let mut spec = self.clone();
        spec.horizon = horizon;
        Ok(spec)
    }

    pub fn with_state_box(&self, bounds: Vec<(f64, f64)>) -> Result<GameSpec> {
        if bounds.len() != self.state_dim || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidSpec("state box must give lo < hi for every state dimension".into()));
        }
        let mut spec = self.clone();
        spec.state_box = bounds;
        Ok(spec)
    }

    fn check_indices(&self, u_idx: usize, v_idx: usize) -> Result<()> {
        if u_idx >= self.u.len() {
            return Err(Error::Usage(format!("u index {u_idx} out of range (|U| = {})", self.u.len())));
        }
        if v_idx >= self.v.len() {
            return Err(Error::Usage(format!("v index {v_idx} out of range (|V| = {})", self.v.len())));
        }
        Ok(())
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::Usage(format!(
                "state has dimension {} (expected {})",
                x.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    pub fn eval_dynamics(&self, t: f64, x: &[f64], u_idx: usize, v_idx: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_indices(u_idx, v_idx)?;
        self.check_state(x)?;
        let mut drift = vec![0.0; self.state_dim];
        let mut diffusion = vec![0.0; self.state_dim * self.noise_dim];
        self.drift_into(t, x, u_idx, v_idx, &mut drift);
        self.diffusion_into(t, x, u_idx, v_idx, &mut diffusion);
        Ok((drift, diffusion))
    }

    pub fn eval_driver(
        &self,
        player: Player,
        t: f64,
        x: &[f64],
        y: f64,
        z: &[f64],
        u_idx: usize,
        v_idx: usize,
    ) -> Result<f64> {
        self.check_indices(u_idx, v_idx)?;
        self.check_state(x)?;
        if z.len() != self.noise_dim {
            return Err(Error::Usage(format!("z has dimension {} (expected {})", z.len(), self.noise_dim)));
        }
        Ok(self.driver(player, t, x, y, z, u_idx, v_idx))
    }

    pub fn eval_terminal(&self, player: Player, x: &[f64]) -> Result<f64> {
        self.check_state(x)?;
        Ok(self.terminal(player, x))
    }

    // Unchecked fast paths for the solver loops.

    #[inline]
    pub(crate) fn drift_into(&self, t: f64, x: &[f64], u_idx: usize, v_idx: usize, out: &mut [f64]) {
        (self.drift)(t, x, self.u.point(u_idx), self.v.point(v_idx), out)
    }

    #[inline]
    pub(crate) fn diffusion_into(&self, t: f64, x: &[f64], u_idx: usize, v_idx: usize, out: &mut [f64]) {
        (self.diffusion)(t, x, self.u.point(u_idx), self.v.point(v_idx), out)
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn driver(&self, player: Player, t: f64, x: &[f64], y: f64, z: &[f64], u_idx: usize, v_idx: usize) -> f64 {
        (self.drivers[player.index()])(t, x, y, z, self.u.point(u_idx), self.v.point(v_idx))
    }

    #[inline]
    pub(crate) fn terminal(&self, player: Player, x: &[f64]) -> f64 {
        (self.terminals[player.index()])(x)
    }
}

/// Outcome of one sampled assumption check.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub description: String,
    /// Worst observed quotient, bound or jump.
    pub worst: f64,
    /// Declared limit the worst value is compared against.
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub spec: String,
    pub samples: usize,
    pub seed: u64,
    pub control_grid: (usize, usize),
    pub checks: Vec<AssumptionCheck>,
    /// sup |b| and sup |σ| over the state box (informational).
    pub drift_sup: f64,
    pub diffusion_sup: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

const RELATIVE_SLACK: f64 = 1e-6;
/// Time offset (relative to T) used to look for jumps in t.
const CONTINUITY_PROBE: f64 = 1e-9;
const CONTINUITY_JUMP: f64 = 1e-4;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn finite_or(coefficient: &str, point: String, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::CoefficientEvaluation {
            coefficient: coefficient.into(),
            point,
        })
    }
}

struct Sampler<'a> {
    spec: &'a GameSpec,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn state(&mut self) -> Vec<f64> {
        self.spec
            .state_box
            .iter()
            .map(|&(lo, hi)| self.rng.gen_range(lo..=hi))
            .collect()
    }

    fn perturbation(&mut self, dim: usize) -> Vec<f64> {
        // log-uniform scale so both local slopes and chords are probed
        let scale = 10f64.powf(self.rng.gen_range(-4.0..0.0));
        (0..dim).map(|_| scale * self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn time(&mut self) -> f64 {
        self.rng.gen_range(0.0..=self.spec.horizon)
    }
}

/// Samples the regularity assumptions of the game at pseudo-random points
/// plus the corners and centre of the state box.
pub fn validate_spec(spec: &GameSpec, samples: usize, seed: u64) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::Usage("validate_spec needs at least one sample".into()));
    }
    let n = spec.state_dim;
    let d = spec.noise_dim;
    let y_range = spec.bound * (1.0 + spec.horizon) + spec.bound;
    let mut sampler = Sampler {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    // deterministic anchor points: box corners and centre
    let mut anchors: Vec<Vec<f64>> = Vec::new();
    for mask in 0..(1usize << n) {
        anchors.push(
            (0..n)
                .map(|k| if mask >> k & 1 == 1 { spec.state_box[k].1 } else { spec.state_box[k].0 })
                .collect(),
        );
    }
    anchors.push(spec.state_box.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());

    let mut points: Vec<(f64, Vec<f64>)> = anchors.into_iter().map(|x| (0.0, x)).collect();
    for _ in 0..samples {
        let t = sampler.time();
        points.push((t, sampler.state()));
    }

    let mut b1 = vec![0.0; n];
    let mut b2 = vec![0.0; n];
    let mut s1 = vec![0.0; n * d];
    let mut s2 = vec![0.0; n * d];

    let mut h31_jump: f64 = 0.0;
    let mut h32: f64 = 0.0;
    let mut h33_jump: f64 = 0.0;
    let mut h34: [f64; 2] = [0.0; 2];
    let mut h35: f64 = 0.0;
    let mut drift_sup: f64 = 0.0;
    let mut diffusion_sup: f64 = 0.0;
    let dt_probe = CONTINUITY_PROBE * spec.horizon;

    for (t, x) in &points {
        let t = *t;
        let dx = sampler.perturbation(n);
        let x2: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let dist = norm(&dx);
        let y = sampler.rng.gen_range(-y_range..=y_range);
        let dy = sampler.perturbation(1)[0];
        let z: Vec<f64> = (0..d).map(|_| sampler.rng.gen_range(-y_range..=y_range)).collect();
        let dz = sampler.perturbation(d);
        let z2: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
        let t_shift = if t + dt_probe <= spec.horizon { t + dt_probe } else { t - dt_probe };

        for ui in 0..spec.u.len() {
            for vi in 0..spec.v.len() {
                let at = |tt: f64, xx: &[f64]| format!("t={tt}, x={xx:?}, u={}, v={}", spec.u.label(ui), spec.v.label(vi));
                spec.drift_into(t, x, ui, vi, &mut b1);
                finite_or("b", at(t, x), &b1)?;
                spec.drift_into(t, &x2, ui, vi, &mut b2);
                finite_or("b", at(t, &x2), &b2)?;
                spec.diffusion_into(t, x, ui, vi, &mut s1);
                finite_or("sigma", at(t, x), &s1)?;
                spec.diffusion_into(t, &x2, ui, vi, &mut s2);
                finite_or("sigma", at(t, &x2), &s2)?;
                drift_sup = drift_sup.max(norm(&b1));
                diffusion_sup = diffusion_sup.max(norm(&s1));
                if dist > 0.0 {
                    h32 = h32.max((diff_norm(&b1, &b2) + diff_norm(&s1, &s2)) / dist);
                }

                spec.drift_into(t_shift, x, ui, vi, &mut b2);
                finite_or("b", at(t_shift, x), &b2)?;
                spec.diffusion_into(t_shift, x, ui, vi, &mut s2);
                finite_or("sigma", at(t_shift, x), &s2)?;
                h31_jump = h31_jump.max(diff_norm(&b1, &b2) + diff_norm(&s1, &s2));

                for player in Player::BOTH {
                    let j = player.index();
                    let name = format!("f{}", j + 1);
                    let f_a = spec.driver(player, t, x, y, &z, ui, vi);
                    let f_b = spec.driver(player, t, &x2, y + dy, &z2, ui, vi);
                    let f_t = spec.driver(player, t_shift, x, y, &z, ui, vi);
                    finite_or(&name, at(t, x), &[f_a, f_b, f_t])?;
                    let phi_a = spec.terminal(player, x);
                    let phi_b = spec.terminal(player, &x2);
                    finite_or(&format!("Phi{}", j + 1), format!("x={x:?}"), &[phi_a, phi_b])?;

                    let denom = dist + dy.abs() + diff_norm(&z, &z2);
                    if denom > 0.0 {
                        h34[j] = h34[j].max(((f_a - f_b).abs() + (phi_a - phi_b).abs()) / denom);
                    }
                    // x-only perturbation isolates the terminal slope
                    if dist > 0.0 {
                        let f_x = spec.driver(player, t, &x2, y, &z, ui, vi);
                        h34[j] = h34[j].max(((f_a - f_x).abs() + (phi_a - phi_b).abs()) / dist);
                    }
                    h33_jump = h33_jump.max((f_a - f_t).abs());
                    h35 = h35.max(f_a.abs()).max(f_b.abs()).max(phi_a.abs()).max(phi_b.abs());
                }
            }
        }
    }

    let lim = spec.lipschitz * (1.0 + RELATIVE_SLACK);
    let bound = spec.bound * (1.0 + RELATIVE_SLACK);
    let checks = vec![
        AssumptionCheck {
            id: "H3.1".into(),
            description: "b, sigma continuous in t (largest jump over a tiny t offset)".into(),
            worst: h31_jump,
            limit: CONTINUITY_JUMP,
            pass: h31_jump <= CONTINUITY_JUMP,
        },
        AssumptionCheck {
            id: "H3.2".into(),
            description: "|b(x)-b(x')| + |sigma(x)-sigma(x')| <= L|x-x'|".into(),
            worst: h32,
            limit: spec.lipschitz,
            pass: h32 <= lim,
        },
        AssumptionCheck {
            id: "H3.3".into(),
            description: "f_j continuous in t (largest jump over a tiny t offset)".into(),
            worst: h33_jump,
            limit: CONTINUITY_JUMP,
            pass: h33_jump <= CONTINUITY_JUMP,
        },
        AssumptionCheck {
            id: "H3.4".into(),
            description: "|f_j(x,y,z)-f_j(x',y',z')| + |Phi_j(x)-Phi_j(x')| <= L(|dx|+|dy|+|dz|)".into(),
            worst: h34[0].max(h34[1]),
            limit: spec.lipschitz,
            pass: h34[0].max(h34[1]) <= lim,
        },
        AssumptionCheck {
            id: "H3.5".into(),
            description: "sup |f_j|, sup |Phi_j| <= M".into(),
            worst: h35,
            limit: spec.bound,
            pass: h35 <= bound,
        },
    ];

    Ok(ValidationReport {
        spec: spec.name.clone(),
        samples,
        seed,
        control_grid: (spec.u.len(), spec.v.len()),
        checks,
        drift_sup,
        diffusion_sup,
    })
}
