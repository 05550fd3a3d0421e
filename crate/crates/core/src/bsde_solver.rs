//! Backward lattice scheme for BSDEs driven by a controlled diffusion.
//!
//! One step from `t_{i+1}` to `t_i` at node `x`:
//!
//! ```text
//! X_k   = x + b Δt + σ √Δt ξ_k             (Gauss–Hermite nodes ξ_k)
//! E     = Σ w_k Y_{i+1}(X_k)
//! Z     = Σ w_k (Y_{i+1}(X_k) - E) ξ_k / √Δt
//! Y_i   = E + f(t_i, x, Y_i, Z) Δt          (fixed point in Y_i)
//! ```
//!
//! Off-grid values of `Y_{i+1}` are multilinear interpolations under the
//! grid's boundary policy.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::feedback::FeedbackTable;
use crate::game_model::{GameSpec, Player};
use crate::grid::{StateGrid, Stencil};
use crate::partition::TimePartition;
use crate::quadrature::NormalQuadrature;
use crate::sde_sim::PathBundle;

pub const DEFAULT_QUADRATURE_POINTS: usize = 7;
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 100;

/// Time partition, state lattice and quadrature rule shared by every
/// backward computation.
#[derive(Clone, Debug)]
pub struct Scheme {
    partition: TimePartition,
    grid: StateGrid,
    quadrature: NormalQuadrature,
    points: usize,
}

impl Scheme {
    pub fn new(partition: TimePartition, grid: StateGrid, noise_dim: usize) -> Result<Self> {
        Ok(Self {
            partition,
            grid,
            quadrature: NormalQuadrature::new(DEFAULT_QUADRATURE_POINTS, noise_dim)?,
            points: DEFAULT_QUADRATURE_POINTS,
        })
    }

    /// Scheme for `spec`, checking that the grid lives in its state space.
    pub fn for_spec(spec: &GameSpec, partition: TimePartition, grid: StateGrid) -> Result<Self> {
        if grid.dim() != spec.state_dim() {
            return Err(Error::GridMismatch(format!(
                "grid has dimension {} but the state has dimension {}",
                grid.dim(),
                spec.state_dim()
            )));
        }
        if partition.end() > spec.horizon() * (1.0 + 1e-12) || partition.start() < 0.0 {
            return Err(Error::Usage(format!(
                "partition [{}, {}] leaves [0, T] with T = {}",
                partition.start(),
                partition.end(),
                spec.horizon()
            )));
        }
        Self::new(partition, grid, spec.noise_dim())
    }

    pub fn with_quadrature_points(mut self, points: usize) -> Result<Self> {
        self.quadrature = NormalQuadrature::new(points, self.quadrature.dim())?;
        self.points = points;
        Ok(self)
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn quadrature(&self) -> &NormalQuadrature {
        &self.quadrature
    }

    pub fn quadrature_points(&self) -> usize {
        self.points
    }

    pub fn noise_dim(&self) -> usize {
        self.quadrature.dim()
    }

    /// Same scheme with partition and grid both refined once.
    pub fn refined(&self) -> Result<Scheme> {
        Scheme::new(self.partition.refined(), self.grid.refined(), self.noise_dim())?.with_quadrature_points(self.points)
    }

    /// Stencils of the one-step transition from `(t_i, x)` with drift `b`
    /// and diffusion `sigma` (n×d row-major).
    pub(crate) fn transition(&self, i: usize, x: &[f64], b: &[f64], sigma: &[f64], out: &mut Vec<Stencil>) {
        let n = x.len();
        let d = self.noise_dim();
        let dt = self.partition.step(i);
        let sq = dt.sqrt();
        let mut xk = [0.0; crate::grid::MAX_DIM];
        out.clear();
        for k in 0..self.quadrature.len() {
            let xi = self.quadrature.node(k);
            for r in 0..n {
                let mut noise = 0.0;
                for c in 0..d {
                    noise += sigma[r * d + c] * xi[c];
                }
                xk[r] = x[r] + b[r] * dt + sq * noise;
            }
            out.push(self.grid.stencil(&xk[..n]));
        }
    }

    /// Conditional expectation of `next` and the `Z` estimate (written into `z`).
    pub(crate) fn moments(&self, i: usize, stencils: &[Stencil], next: &[f64], z: &mut [f64]) -> f64 {
        let q = &self.quadrature;
        let e: f64 = stencils.iter().enumerate().map(|(k, st)| q.weight(k) * st.apply(next)).sum();
        let sq = self.partition.step(i).sqrt();
        z.fill(0.0);
        for (k, st) in stencils.iter().enumerate() {
            let w = q.weight(k) * (st.apply(next) - e) / sq;
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += w * q.node(k)[c];
            }
        }
        e
    }

    /// Solves `y = e + Δt f(y)` by fixed-point iteration.
    pub(crate) fn implicit(&self, i: usize, node: usize, e: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        let dt = self.partition.step(i);
        let mut y = e + dt * f(e);
        for _ in 0..FIXED_POINT_MAX_ITERATIONS {
            if !y.is_finite() {
                return Err(Error::CoefficientEvaluation {
                    coefficient: "driver".into(),
                    point: format!("t={}, x={:?}", self.partition.knot(i), self.grid.node(node)),
                });
            }
            let next = e + dt * f(y);
            if (next - y).abs() <= FIXED_POINT_TOLERANCE * (1.0 + next.abs()) {
                return Ok(next);
            }
            y = next;
        }
        Err(Error::FixedPointDivergence {
            step: i,
            node,
            iterations: FIXED_POINT_MAX_ITERATIONS,
        })
    }
}

/// Backward recursion from knot `to` (terminal values) down to knot `from`.
/// Returns `Y` and flattened `Z` slices for knots `from..=to`.
pub(crate) fn backward<C, D>(
    scheme: &Scheme,
    from: usize,
    to: usize,
    terminal: &[f64],
    coeffs: C,
    driver: D,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)>
where
    C: Fn(usize, usize, &[f64], &mut [f64], &mut [f64]) + Sync + Send,
    D: Fn(usize, usize, &[f64], f64, &[f64]) -> f64 + Sync + Send,
{
    let grid = scheme.grid();
    grid.check_field(terminal, "terminal field")?;
    if from > to || to > scheme.partition().cells() {
        return Err(Error::Usage(format!("invalid knot range {from}..={to}")));
    }
    let n = grid.dim();
    let d = scheme.noise_dim();
    let mut ys = vec![terminal.to_vec()];
    let mut zs = vec![vec![0.0; grid.len() * d]];
    for i in (from..to).rev() {
        let next = ys.last().unwrap();
        let slice = exec::try_map(grid.len(), |k| {
            let mut x = vec![0.0; n];
            grid.node_into(k, &mut x);
            let mut b = vec![0.0; n];
            let mut s = vec![0.0; n * d];
            coeffs(i, k, &x, &mut b, &mut s);
            let mut st = Vec::with_capacity(scheme.quadrature().len());
            scheme.transition(i, &x, &b, &s, &mut st);
            let mut z = vec![0.0; d];
            let e = scheme.moments(i, &st, next, &mut z);
            let y = scheme.implicit(i, k, e, |y| driver(i, k, &x, y, &z))?;
            Ok::<_, Error>((y, z))
        })?;
        let mut y = Vec::with_capacity(grid.len());
        let mut z = Vec::with_capacity(grid.len() * d);
        for (yk, zk) in slice {
            y.push(yk);
            z.extend(zk);
        }
        ys.push(y);
        zs.push(z);
    }
    ys.reverse();
    zs.reverse();
    Ok((ys, zs))
}

/// Which controls produced a backward solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ControlSource {
    Feedback(FeedbackTable),
    /// Caller-supplied kernel and driver.
    Generic,
}

#[derive(Clone, Debug, Serialize)]
pub struct BackwardSolution {
    pub partition: TimePartition,
    pub grid: StateGrid,
    pub noise_dim: usize,
    pub player: Option<Player>,
    #[serde(skip)]
    pub source: ControlSource,
    /// `Y[knot][node]`.
    pub y: Vec<Vec<f64>>,
    /// `Z[knot][node * d + c]`; the terminal slice is zero.
    pub z: Vec<Vec<f64>>,
}

impl BackwardSolution {
    pub fn value_at(&self, knot: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.y[knot], x)
    }

    pub fn z_at(&self, knot: usize, x: &[f64], out: &mut [f64]) {
        let st = self.grid.stencil(x);
        let d = self.noise_dim;
        out.fill(0.0);
        for (node, w) in st.iter() {
            for c in 0..d {
                out[c] += w * self.z[knot][node * d + c];
            }
        }
    }

    /// Largest `|Y|` over the lattice.
    pub fn sup_abs(&self) -> f64 {
        self.y.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks `|Y| <= M(1+T) + M`, which holds whenever f and Φ are bounded by M.
    pub fn within_crude_bound(&self, spec: &GameSpec) -> bool {
        self.sup_abs() <= spec.bound() * (2.0 + spec.horizon()) * (1.0 + 1e-9)
    }

    /// CSV with columns `time, x1.., y, z1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.grid.dim();
        let mut header = vec!["time".to_string()];
        header.extend((1..=n).map(|k| format!("x{k}")));
        header.push("y".into());
        header.extend((1..=self.noise_dim).map(|c| format!("z{c}")));
        w.write_record(&header)?;
        for (i, &t) in self.partition.knots().iter().enumerate() {
            for node in 0..self.grid.len() {
                let mut rec = vec![format!("{t}")];
                rec.extend(self.grid.node(node).iter().map(|c| format!("{c}")));
                rec.push(format!("{}", self.y[i][node]));
                for c in 0..self.noise_dim {
                    rec.push(format!("{}", self.z[i][node * self.noise_dim + c]));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves player `j`'s BSDE under a Markov feedback on the lattice.
pub fn solve_markov(spec: &GameSpec, player: Player, feedback: &FeedbackTable, scheme: &Scheme) -> Result<BackwardSolution> {
    let grid = scheme.grid();
    let partition = scheme.partition();
    feedback.check(spec, partition.cells(), grid.len())?;
    let terminal: Vec<f64> = (0..grid.len()).map(|k| spec.terminal(player, &grid.node(k))).collect();
    let (y, z) = backward(
        scheme,
        0,
        partition.cells(),
        &terminal,
        |i, k, x, b, s| {
            let (u, v) = feedback.get(i, k);
            let t = partition.knot(i);
            spec.drift_into(t, x, u, v, b);
            spec.diffusion_into(t, x, u, v, s);
        },
        |i, k, x, y, z| {
            let (u, v) = feedback.get(i, k);
            spec.driver(player, partition.knot(i), x, y, z, u, v)
        },
    )?;
    Ok(BackwardSolution {
        partition: partition.clone(),
        grid: grid.clone(),
        noise_dim: scheme.noise_dim(),
        player: Some(player),
        source: ControlSource::Feedback(feedback.clone()),
        y,
        z,
    })
}

type KernelFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// One-step Gaussian transition kernel given by drift and diffusion fields.
#[derive(Clone)]
pub struct Kernel {
    drift: KernelFn,
    diffusion: KernelFn,
}

impl Kernel {
    pub fn new(
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
        }
    }

    /// Driftless `σ·B` with `σ` times the identity (n = d).
    pub fn brownian(sigma: f64) -> Self {
        Self::new(
            |_, _, b| b.fill(0.0),
            move |_, x, s| {
                let n = x.len();
                s.fill(0.0);
                for r in 0..n {
                    s[r * n + r] = sigma;
                }
            },
        )
    }

    /// The game dynamics frozen at one control pair.
    pub fn from_spec(spec: &GameSpec, u_idx: usize, v_idx: usize) -> Self {
        let (s1, s2) = (spec.clone(), spec.clone());
        Self::new(
            move |t, x, b| s1.drift_into(t, x, u_idx, v_idx, b),
            move |t, x, s| s2.diffusion_into(t, x, u_idx, v_idx, s),
        )
    }
}

/// Generic driver `f(s, x, y, z)`.
pub type GenericDriver<'a> = &'a (dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Sync);

/// Solves the BSDE with data `(f, ξ)` where `ξ` is given on the grid nodes.
pub fn solve_generic(driver: GenericDriver<'_>, terminal: &[f64], scheme: &Scheme, kernel: &Kernel) -> Result<BackwardSolution> {
    let partition = scheme.partition();
    let (y, z) = backward(
        scheme,
        0,
        partition.cells(),
        terminal,
        |i, _, x, b, s| {
            let t = partition.knot(i);
            (kernel.drift)(t, x, b);
            (kernel.diffusion)(t, x, s);
        },
        |i, _, x, y, z| driver(partition.knot(i), x, y, z),
    )?;
    Ok(BackwardSolution {
        partition: partition.clone(),
        grid: scheme.grid().clone(),
        noise_dim: scheme.noise_dim(),
        player: None,
        source: ControlSource::Generic,
        y,
        z,
    })
}

/// Values `Y(t_i, X_{t_i})` along every path of `bundle` (`[path][knot]`).
pub fn path_values(solution: &BackwardSolution, bundle: &PathBundle) -> Result<Vec<Vec<f64>>> {
    if bundle.partition() != &solution.partition {
        return Err(Error::Usage("bundle and solution use different partitions".into()));
    }
    if bundle.state_dim() != solution.grid.dim() {
        return Err(Error::GridMismatch("bundle state dimension differs from the grid".into()));
    }
    let knots = solution.partition.knots().len();
    exec::try_map(bundle.paths(), |m| {
        let mut out = Vec::with_capacity(knots);
        for i in 0..knots {
            let x = bundle.state(m, i);
            if i + 1 < knots {
                if let ControlSource::Feedback(fb) = &solution.source {
                    let expected = fb.get(i, solution.grid.nearest(x));
                    if bundle.control(m, i) != expected {
                        return Err(Error::Usage(format!(
                            "path {m} played {:?} on cell {i} but the solution's feedback gives {expected:?}",
                            bundle.control(m, i)
                        )));
                    }
                }
            }
            out.push(solution.value_at(i, x));
        }
        Ok(out)
    })
}
