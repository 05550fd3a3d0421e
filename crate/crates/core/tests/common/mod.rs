#![allow(dead_code)]
//! Reference computations written without the engine's lattice code: a
//! hard-coded Gauss-Hermite rule, clamped linear interpolation, forward
//! propagation of the lattice measure, and a dense backward recursion.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Probabilists' 7-point Gauss-Hermite rule for N(0, 1).
pub const GH7: [(f64, f64); 7] = [
    (-3.750_439_717_725_742_5, 0.000_548_268_855_972_217),
    (-2.366_759_410_734_541, 0.030_757_123_967_586_52),
    (-1.154_405_394_739_968_2, 0.240_123_178_605_012_7),
    (0.0, 0.457_142_857_142_857_24),
    (1.154_405_394_739_968_2, 0.240_123_178_605_012_7),
    (2.366_759_410_734_541, 0.030_757_123_967_586_52),
    (3.750_439_717_725_742_5, 0.000_548_268_855_972_217),
];

/// Uniform 1-d grid.
#[derive(Clone, Copy, Debug)]
pub struct Grid1 {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid1 {
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.h()
    }

    /// Two-point clamped linear interpolation weights.
    pub fn weights(&self, x: f64) -> [(usize, f64); 2] {
        let x = x.clamp(self.lo, self.hi);
        let s = (x - self.lo) / self.h();
        let j = (s.floor() as usize).min(self.count - 2);
        let frac = s - j as f64;
        [(j, 1.0 - frac), (j + 1, frac)]
    }

    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        self.weights(x).iter().map(|&(j, w)| w * values[j]).sum()
    }
}

/// One-step transition rows: from node `k`, the list of `(target, weight,
/// ξ)` triples (one per quadrature node and interpolation end).
pub fn transition_rows(grid: Grid1, dt: f64, b: impl Fn(usize, f64) -> f64, s: impl Fn(usize, f64) -> f64) -> Vec<Vec<(usize, f64, f64)>> {
    (0..grid.count)
        .map(|k| {
            let x = grid.node(k);
            let mut row = Vec::new();
            for &(xi, w) in &GH7 {
                let to = x + b(k, x) * dt + s(k, x) * dt.sqrt() * xi;
                for (j, a) in grid.weights(to) {
                    row.push((j, w * a, xi));
                }
            }
            row
        })
        .collect()
}

/// `μ_{i+1}` from `μ_i` under the given rows.
pub fn push_forward(mu: &[f64], rows: &[Vec<(usize, f64, f64)>]) -> Vec<f64> {
    let mut next = vec![0.0; mu.len()];
    for (k, row) in rows.iter().enumerate() {
        if mu[k] == 0.0 {
            continue;
        }
        for &(j, w, _) in row {
            next[j] += mu[k] * w;
        }
    }
    next
}

/// One implicit step `y = E + f(y, z) dt` at every node, with the centred
/// `z = Σ w (Y' - E) ξ / √dt`.
pub fn backward_step(
    rows: &[Vec<(usize, f64, f64)>],
    next: &[f64],
    dt: f64,
    f: impl Fn(usize, f64, f64) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut ys = Vec::with_capacity(rows.len());
    let mut zs = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let e: f64 = row.iter().map(|&(j, w, _)| w * next[j]).sum();
        let z: f64 = row.iter().map(|&(j, w, xi)| w * (next[j] - e) * xi).sum::<f64>() / dt.sqrt();
        let mut y = e;
        for _ in 0..200 {
            let y_new = e + f(k, y, z) * dt;
            let done = (y_new - y).abs() <= 1e-14 * (1.0 + y.abs());
            y = y_new;
            if done {
                break;
            }
        }
        ys.push(y);
        zs.push(z);
    }
    (ys, zs)
}

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs `body` alone (so wall-clock bounds are not shared with other
/// tests), prints one status line, and asserts both the outcome and the
/// time bound.
pub fn criterion(number: usize, name: &str, limit: Duration, body: impl FnOnce() -> (bool, String)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (pass, detail) = body();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    // the stdout handle bypasses the harness capture, so the line always shows
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {number:>2} [{}] {name}: {detail} ({:.2} s, limit {} s)",
        if pass && in_time { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {number} failed: {detail}");
    assert!(in_time, "criterion {number} exceeded {} s", limit.as_secs());
}
