//! Pointwise Hamiltonians over the finite control grids and the sampled
//! Isaacs audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::game_model::{GameSpec, Player};

pub const ISAACS_TOLERANCE: f64 = 1e-8;
const MAX_REPORTED_FAILURES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianQuery {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: f64,
    pub p: Vec<f64>,
    /// Symmetric `n×n`, row-major.
    pub a: Vec<f64>,
    pub player: Player,
}

impl HamiltonianQuery {
    pub fn new(t: f64, x: Vec<f64>, y: f64, p: Vec<f64>, a: Vec<f64>, player: Player) -> Result<Self> {
        let n = x.len();
        if p.len() != n || a.len() != n * n {
            return Err(Error::Usage(format!("query needs p in R^{n} and A in R^{n}x{n}")));
        }
        let asym = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| (a[r * n + c] - a[c * n + r]).powi(2))
            .sum::<f64>()
            .sqrt();
        if asym > 1e-12 {
            return Err(Error::Usage(format!("A is not symmetric (asymmetry {asym:e})")));
        }
        Ok(Self { t, x, y, p, a, player })
    }
}

/// `½ tr(σσᵀA) + <p, b> + f_j(t, x, y, pᵀσ, u, v)`.
pub fn h_value(spec: &GameSpec, q: &HamiltonianQuery, u_idx: usize, v_idx: usize) -> f64 {
    let n = spec.state_dim();
    let d = spec.noise_dim();
    let mut b = vec![0.0; n];
    let mut s = vec![0.0; n * d];
    spec.drift_into(q.t, &q.x, u_idx, v_idx, &mut b);
    spec.diffusion_into(q.t, &q.x, u_idx, v_idx, &mut s);
    // tr(σσᵀA) = Σ_{r,c} (σσᵀ)_{rc} A_{cr}
    let mut trace = 0.0;
    for r in 0..n {
        for c in 0..n {
            let ss: f64 = (0..d).map(|k| s[r * d + k] * s[c * d + k]).sum();
            trace += ss * q.a[c * n + r];
        }
    }
    let drift: f64 = q.p.iter().zip(&b).map(|(p, b)| p * b).sum();
    let z: Vec<f64> = (0..d).map(|k| (0..n).map(|r| q.p[r] * s[r * d + k]).sum()).collect();
    0.5 * trace + drift + spec.driver(q.player, q.t, &q.x, q.y, &z, u_idx, v_idx)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsaacsGap {
    /// `max_u min_v h`.
    pub lower: f64,
    /// `min_v max_u h`.
    pub upper: f64,
    pub gap: f64,
    /// Maximizing `u` of the lower value and the minimizing reply `v`.
    pub lower_pair: (usize, usize),
    /// Minimizing `v` of the upper value and the maximizing reply `u`.
    pub upper_pair: (usize, usize),
}

/// Max-min and min-max of a `|U|×|V|` matrix with smallest-index ties.
pub fn maximin(h: &[f64], nu: usize, nv: usize) -> IsaacsGap {
    let argmin_row = |u: usize| {
        let mut best = 0;
        for v in 1..nv {
            if h[u * nv + v] < h[u * nv + best] {
                best = v;
            }
        }
        best
    };
    let argmax_col = |v: usize| {
        let mut best = 0;
        for u in 1..nu {
            if h[u * nv + v] > h[best * nv + v] {
                best = u;
            }
        }
        best
    };
    let mut lower_pair = (0, argmin_row(0));
    for u in 1..nu {
        let v = argmin_row(u);
        if h[u * nv + v] > h[lower_pair.0 * nv + lower_pair.1] {
            lower_pair = (u, v);
        }
    }
    let mut upper_pair = (argmax_col(0), 0);
    for v in 1..nv {
        let u = argmax_col(v);
        if h[u * nv + v] < h[upper_pair.0 * nv + upper_pair.1] {
            upper_pair = (u, v);
        }
    }
    let lower = h[lower_pair.0 * nv + lower_pair.1];
    let upper = h[upper_pair.0 * nv + upper_pair.1];
    IsaacsGap {
        lower,
        upper,
        gap: upper - lower,
        lower_pair,
        upper_pair,
    }
}

pub fn isaacs_gap(spec: &GameSpec, q: &HamiltonianQuery) -> IsaacsGap {
    let (nu, nv) = (spec.u().len(), spec.v().len());
    let mut h = Vec::with_capacity(nu * nv);
    for u in 0..nu {
        for v in 0..nv {
            h.push(h_value(spec, q, u, v));
        }
    }
    maximin(&h, nu, nv)
}

/// Box from which audit queries are drawn uniformly.
#[derive(Clone, Debug, Serialize)]
pub struct QueryBox {
    pub t: (f64, f64),
    pub x: Vec<(f64, f64)>,
    pub y: (f64, f64),
    pub p: (f64, f64),
    /// Range of every entry of the symmetric matrix.
    pub a: (f64, f64),
}

impl QueryBox {
    /// `t ∈ [0,T]`, `x` in the state box, `|y| <= M(1+T)`, `p` and `A` entries in `[-2, 2]`.
    pub fn default_for(spec: &GameSpec) -> Self {
        let ymax = spec.bound() * (1.0 + spec.horizon());
        Self {
            t: (0.0, spec.horizon()),
            x: spec.state_box().to_vec(),
            y: (-ymax, ymax),
            p: (-2.0, 2.0),
            a: (-2.0, 2.0),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>, f64, Vec<f64>, Vec<f64>) {
        let n = self.x.len();
        let t = rng.gen_range(self.t.0..=self.t.1);
        let x = self.x.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        let y = rng.gen_range(self.y.0..=self.y.1);
        let p = (0..n).map(|_| rng.gen_range(self.p.0..=self.p.1)).collect();
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in r..n {
                let e = rng.gen_range(self.a.0..=self.a.1);
                a[r * n + c] = e;
                a[c * n + r] = e;
            }
        }
        (t, x, y, p, a)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FailingQuery {
    pub query: HamiltonianQuery,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsaacsAudit {
    pub queries: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_gap: f64,
    /// Largest gap per player.
    pub max_gap_by_player: [f64; 2],
    pub failures: usize,
    /// First few failing queries.
    pub failing: Vec<FailingQuery>,
    pub pass: bool,
}

/// Samples `queries` points and checks the Isaacs gap for both players at each.
pub fn audit_isaacs(spec: &GameSpec, sampler: &QueryBox, queries: usize, seed: u64) -> Result<IsaacsAudit> {
    if queries == 0 {
        return Err(Error::Usage("the Isaacs audit needs at least one query".into()));
    }
    if sampler.x.len() != spec.state_dim() {
        return Err(Error::Usage("query box dimension differs from the state dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<_> = (0..queries).map(|_| sampler.draw(&mut rng)).collect();
    let gaps = exec::map(queries, |i| {
        let (t, x, y, p, a) = draws[i].clone();
        Player::BOTH.map(|player| {
            let q = HamiltonianQuery {
                t,
                x: x.clone(),
                y,
                p: p.clone(),
                a: a.clone(),
                player,
            };
            let g = isaacs_gap(spec, &q).gap;
            (q, g)
        })
    });
    let mut max_gap_by_player = [0.0f64; 2];
    let mut failing = Vec::new();
    let mut failures = 0;
    for pair in gaps {
        for (q, g) in pair {
            let j = q.player.index();
            max_gap_by_player[j] = max_gap_by_player[j].max(g);
            if g > ISAACS_TOLERANCE {
                failures += 1;
                if failing.len() < MAX_REPORTED_FAILURES {
                    failing.push(FailingQuery { query: q, gap: g });
                }
            }
        }
    }
    let max_gap = max_gap_by_player[0].max(max_gap_by_player[1]);
    if max_gap > ISAACS_TOLERANCE {
        log::warn!(
            "Isaacs condition fails on the control grid (max gap {max_gap:e} over {queries} queries); \
             lower and upper values will bracket rather than coincide"
        );
    }
    Ok(IsaacsAudit {
        queries,
        seed,
        tolerance: ISAACS_TOLERANCE,
        max_gap,
        max_gap_by_player,
        failures,
        failing,
        pass: max_gap <= ISAACS_TOLERANCE,
    })
}
