//! Acceptance suite: one test per criterion, each printing a status line.
//! Run with `cargo test -p sdg-core --test acceptance -- --nocapture`.

mod common;

use std::time::Duration;

use common::{backward_step, criterion, push_forward, transition_rows, Grid1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdg_core::bsde_solver::{solve_generic, Kernel, Scheme};
use sdg_core::families::{instantiate, Parameters};
use sdg_core::hamiltonian::{audit_isaacs, maximin, QueryBox};
use sdg_core::nash_engine::{construct_equilibrium, deviation_test, standard_deviations, verify_certificate, Deviation};
use sdg_core::sde_sim::{mean_and_se, simulate, ConstantControls, FeedbackRule};
use sdg_core::semigroup::{apply, flow_check, TerminalField};
use sdg_core::strategies::{
    couple, fixed_point_demo, punishment_strategy, replay_consistent, CoupleOrder, EulerSource, NadStrategy, NoState,
    StateSource, StrategyRule,
};
use sdg_core::value_pde::{compute_values, one_step_matrices, regularity_check, values_over, ValueField};
use sdg_core::{ControlSet, FeedbackTable, GameSpec, Player, StateGrid, TimePartition};

const EPSILON: f64 = 0.05;
const PATHS: usize = 10_000;
const SEED: u64 = 7;

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn lattice(spec: &GameSpec, steps: usize, nodes: usize, half_width: f64) -> Scheme {
    let p = TimePartition::uniform(0.0, spec.horizon(), steps).unwrap();
    let g = StateGrid::uniform_1d(-half_width, half_width, nodes).unwrap();
    Scheme::for_spec(spec, p, g).unwrap()
}

fn bilinear(steps: usize, nodes: usize) -> (GameSpec, Scheme, ValueField) {
    let spec = instantiate("bilinear-1d", &Parameters::new()).unwrap();
    let scheme = lattice(&spec, steps, nodes, 4.0);
    let values = compute_values(&spec, &scheme).unwrap();
    (spec, scheme, values)
}

fn generic_scheme(steps: usize, grid: Grid1) -> Scheme {
    let p = TimePartition::uniform(0.0, 1.0, steps).unwrap();
    let g = StateGrid::uniform_1d(grid.lo, grid.hi, grid.count).unwrap();
    Scheme::new(p, g, 1).unwrap()
}

#[test]
fn criterion_01_comparison() {
    criterion(1, "comparison of ordered data", secs(30), || {
        let grid = Grid1 {
            lo: -4.0,
            hi: 4.0,
            count: 101,
        };
        let scheme = generic_scheme(50, grid);
        let centre = grid.count / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = f64::NEG_INFINITY;
        let mut strict_cases = 0;
        let mut strict_ok = true;
        for _ in 0..50 {
            let sigma = rng.gen_range(0.5..1.5);
            let a = rng.gen_range(-1.0..1.0);
            let (c1, c2, c3) = (rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let (d, e) = (rng.gen_range(0.0..0.5), rng.gen_range(0.5..2.0));
            let (p, q) = (rng.gen_range(0.2..2.0), rng.gen_range(-1.0..1.0));
            let (r, m) = (rng.gen_range(0.0..1.0), rng.gen_range(-3.0..3.0));
            let kernel = Kernel::new(move |_, x, b| b[0] = a * x[0].sin(), move |_, _, s| s[0] = sigma);
            let f1 = move |t: f64, x: &[f64], y: f64, z: &[f64]| c1 * (x[0] + t).sin() + c2 * y.tanh() + c3 * z[0].sin();
            let f2 = move |t: f64, x: &[f64], y: f64, z: &[f64]| f1(t, x, y, z) + d * (1.0 + (e * x[0] + t).sin());
            let xi1: Vec<f64> = (0..grid.count).map(|k| (p * grid.node(k) + q).tanh()).collect();
            let bump: Vec<f64> = (0..grid.count).map(|k| r * (grid.node(k) - m).cos().max(0.0)).collect();
            let xi2: Vec<f64> = xi1.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let s1 = solve_generic(&f1, &xi1, &scheme, &kernel).unwrap();
            let s2 = solve_generic(&f2, &xi2, &scheme, &kernel).unwrap();
            for (a, b) in s1.y.iter().flatten().zip(s2.y.iter().flatten()) {
                worst = worst.max(a - b);
            }
            let fraction = bump.iter().filter(|&&b| b > 0.0).count() as f64 / grid.count as f64;
            if fraction >= 0.1 {
                strict_cases += 1;
                strict_ok &= s1.y[0][centre] < s2.y[0][centre];
            }
        }
        (
            worst <= 1e-12 && strict_ok,
            format!("max(Y1 - Y2) = {worst:.3e}, strict at start in {strict_cases} ordered-terminal cases: {strict_ok}"),
        )
    });
}

#[test]
fn criterion_02_a_priori_estimate() {
    criterion(2, "a-priori estimate with beta = 32", secs(30), || {
        let beta = 16.0 * (1.0 + 1.0f64.powi(2));
        let grid = Grid1 {
            lo: -4.0,
            hi: 4.0,
            count: 101,
        };
        let steps = 50;
        let dt = 1.0 / steps as f64;
        let scheme = generic_scheme(steps, grid);
        let centre = grid.count / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst = f64::NEG_INFINITY;
        let mut tightest = f64::INFINITY;
        for _ in 0..20 {
            let sigma = rng.gen_range(0.5..1.5);
            let a = rng.gen_range(-1.0..1.0);
            let (g1, g2) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let amp = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let shift = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let omega = rng.gen_range(0.0..6.0);
            let tilt = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
            let offset = rng.gen_range(-0.2..0.2);
            // |f_y|, |f_z| <= 1/2, so L <= 1
            let f = move |x: f64, y: f64, z: f64| g1 * (y + x).sin() + g2 * z.cos();
            let phi = move |j: usize, t: f64, x: f64| amp[j] * (omega * t + x).sin() + shift[j];
            let f1 = move |t: f64, x: &[f64], y: f64, z: &[f64]| f(x[0], y, z[0]) + phi(0, t, x[0]);
            let f2 = move |t: f64, x: &[f64], y: f64, z: &[f64]| f(x[0], y, z[0]) + phi(1, t, x[0]);
            let xi1: Vec<f64> = (0..grid.count).map(|k| (tilt[0] * grid.node(k)).tanh()).collect();
            let xi2: Vec<f64> = (0..grid.count).map(|k| (tilt[1] * grid.node(k)).tanh() + offset).collect();
            let kernel = Kernel::new(move |_, x, b| b[0] = a * x[0].sin(), move |_, _, s| s[0] = sigma);
            let s1 = solve_generic(&f1, &xi1, &scheme, &kernel).unwrap();
            let s2 = solve_generic(&f2, &xi2, &scheme, &kernel).unwrap();

            let rows = transition_rows(grid, dt, |_, x| a * x.sin(), |_, _| sigma);
            let mut mu = vec![0.0; grid.count];
            mu[centre] = 1.0;
            let mut integral_lhs = 0.0;
            let mut integral_rhs = 0.0;
            for i in 0..steps {
                let t = i as f64 * dt;
                let weight = (beta * t).exp() * dt;
                for k in 0..grid.count {
                    let dy = s1.y[i][k] - s2.y[i][k];
                    let dz = s1.z[i][k] - s2.z[i][k];
                    let dphi = phi(0, t, grid.node(k)) - phi(1, t, grid.node(k));
                    integral_lhs += weight * mu[k] * (dy * dy + dz * dz);
                    integral_rhs += weight * mu[k] * dphi * dphi;
                }
                mu = push_forward(&mu, &rows);
            }
            let terminal: f64 = (0..grid.count).map(|k| mu[k] * (xi1[k] - xi2[k]).powi(2)).sum();
            let dy0 = s1.y[0][centre] - s2.y[0][centre];
            let lhs = dy0 * dy0 + 0.5 * integral_lhs;
            let rhs = beta.exp() * terminal + integral_rhs;
            worst = worst.max(lhs - rhs);
            tightest = tightest.min(rhs / lhs.max(f64::MIN_POSITIVE));
        }
        (
            worst <= 1e-8,
            format!("max(lhs - rhs) = {worst:.3e}, smallest rhs/lhs = {tightest:.3e}"),
        )
    });
}

fn random_linear_spec(rng: &mut ChaCha8Rng) -> GameSpec {
    let c = ControlSet::scalar(&[-1.0, 0.0, 1.0]).unwrap();
    let (a1, a2, a3) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let s = rng.gen_range(0.4..1.2);
    let (c1, c2, c3) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (p1, p2) = (rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
    GameSpec::builder(1, 1, 1.0)
        .controls(c.clone(), c)
        .drift(move |_, x, u, v, out| out[0] = a1 * u[0] + a2 * v[0] + a3 * x[0].sin())
        .diffusion(move |_, x, _, _, out| out[0] = s * (1.0 + 0.3 * x[0].cos()))
        .driver(Player::One, move |t, x, _, _, u, v| c1 * (x[0] + t).sin() + c2 * u[0] - c3 * v[0] * v[0])
        .driver(Player::Two, move |t, x, _, _, u, v| c3 * (x[0] - t).cos() + c1 * u[0] * v[0])
        .terminal(Player::One, move |x| (p1 * x[0]).tanh())
        .terminal(Player::Two, move |x| 1.0 / (1.0 + p2 * x[0] * x[0]))
        .constants(2.0, 3.0)
        .build()
        .unwrap()
}

#[test]
fn criterion_03_linear_reduction() {
    criterion(3, "linear reduction to expectation plus running integral", secs(10), || {
        let grid = Grid1 {
            lo: -4.0,
            hi: 4.0,
            count: 101,
        };
        let steps = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let spec = random_linear_spec(&mut rng);
            let scheme = lattice(&spec, steps, grid.count, grid.hi);
            let partition = scheme.partition().clone();
            let feedback = FeedbackTable::from_fn(steps, grid.count, |_, _| (rng.gen_range(0..3), rng.gen_range(0..3)));
            let player = if rng.gen_bool(0.5) { Player::One } else { Player::Two };
            let s1 = rng.gen_range(0..20);
            let s2 = rng.gen_range(s1 + 5..=steps);
            let (w, k) = (rng.gen_range(0.5..3.0), rng.gen_range(-1.0..1.0));
            let eta = TerminalField::from_fn(scheme.grid(), "eta", |x| (w * x[0]).sin() + k).unwrap();
            let out = apply(&spec, player, &feedback, s1, s2, &eta, &scheme).unwrap();

            let rows: Vec<_> = (s1..s2)
                .map(|i| {
                    let t = partition.knot(i);
                    let dyn_at = |node: usize, x: f64| {
                        let (u, v) = feedback.get(i, node);
                        spec.eval_dynamics(t, &[x], u, v).unwrap()
                    };
                    transition_rows(grid, partition.step(i), |n, x| dyn_at(n, x).0[0], |n, x| dyn_at(n, x).1[0])
                })
                .collect();
            for start in 0..grid.count {
                let mut mu = vec![0.0; grid.count];
                mu[start] = 1.0;
                let mut total = 0.0;
                for (r, i) in (s1..s2).enumerate() {
                    let t = partition.knot(i);
                    for node in 0..grid.count {
                        if mu[node] != 0.0 {
                            let (u, v) = feedback.get(i, node);
                            let f = spec.eval_driver(player, t, &[grid.node(node)], 0.0, &[0.0], u, v).unwrap();
                            total += mu[node] * f * partition.step(i);
                        }
                    }
                    mu = push_forward(&mu, &rows[r]);
                }
                total += (0..grid.count).map(|node| mu[node] * eta.values[node]).sum::<f64>();
                worst = worst.max((out.values[start] - total).abs());
            }
        }
        (worst <= 1e-10, format!("max |G[eta] - (E[eta] + sum f dt)| = {worst:.3e} over 10 instances"))
    });
}

#[test]
fn criterion_04_flow_and_dpp() {
    criterion(4, "flow / dynamic programming exactness", secs(20), || {
        let (spec, scheme, values) = bilinear(50, 101);
        let mut recomposition = 0.0f64;
        let mut upper = [values.w[0][50].clone(), values.w[1][50].clone()];
        for (from, to) in [(30, 50), (10, 30), (0, 10)] {
            let part = values_over(&spec, &scheme, from, to, [&upper[0], &upper[1]]).unwrap();
            for j in 0..2 {
                for (r, slice) in part[j].iter().enumerate() {
                    for (a, b) in slice.iter().zip(&values.w[j][from + r]) {
                        recomposition = recomposition.max((a - b).abs());
                    }
                }
            }
            upper = [part[0][0].clone(), part[1][0].clone()];
        }
        let mut one_step = 0.0f64;
        let (nu, nv) = (spec.u().len(), spec.v().len());
        for i in [0, 17, 49] {
            for k in 0..scheme.grid().len() {
                let m = one_step_matrices(
                    &spec,
                    &scheme,
                    i,
                    k,
                    &[(Player::One, &values.w[0][i + 1]), (Player::Two, &values.w[1][i + 1])],
                )
                .unwrap();
                let transposed: Vec<f64> = (0..nv * nu).map(|r| m[1][(r % nu) * nv + r / nu]).collect();
                one_step = one_step.max((maximin(&m[0], nu, nv).lower - values.w[0][i][k]).abs());
                one_step = one_step.max((maximin(&transposed, nv, nu).lower - values.w[1][i][k]).abs());
            }
        }
        let mut flow = 0.0f64;
        for player in Player::BOTH {
            let eta = TerminalField::from_fn(scheme.grid(), "terminal", |x| spec.eval_terminal(player, x).unwrap()).unwrap();
            let fb = &values.saddle[player.index()];
            for (s1, s2, s3) in [(0, 25, 50), (5, 6, 40), (0, 49, 50)] {
                flow = flow.max(flow_check(&spec, player, fb, s1, s2, s3, &eta, &scheme).unwrap());
            }
        }
        let worst = recomposition.max(one_step).max(flow);
        (
            worst <= 1e-12,
            format!("recomposition {recomposition:.1e}, one-step max-min {one_step:.1e}, semigroup flow {flow:.1e}"),
        )
    });
}

#[test]
fn criterion_05_zero_sum_antisymmetry() {
    criterion(5, "zero-sum antisymmetry", secs(60), || {
        let spec = instantiate("antisym-1d", &Parameters::new()).unwrap();
        let scheme = lattice(&spec, 100, 101, 4.0);
        let values = compute_values(&spec, &scheme).unwrap();
        let antisym = values.w[0]
            .iter()
            .flatten()
            .zip(values.w[1].iter().flatten())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        let construction = construct_equilibrium(&spec, &values, &scheme, EPSILON).unwrap();
        let cert = verify_certificate(&spec, &construction.feedback, &values, &scheme, EPSILON, &[0.0], PATHS, SEED).unwrap();
        let payoff_sum = (cert.payoffs[0] + cert.payoffs[1]).abs();
        (
            antisym <= 1e-6 && payoff_sum <= 2e-2,
            format!(
                "max|W1 + W2| = {antisym:.2e}, |e1 + e2| = {payoff_sum:.2e} (certificate pass: {})",
                cert.pass
            ),
        )
    });
}

#[test]
fn criterion_06_control_free_consistency() {
    criterion(6, "control-free values against forward Monte Carlo", secs(60), || {
        let spec = instantiate("control-free", &Parameters::new()).unwrap();
        let steps = 50;
        let scheme = lattice(&spec, steps, 201, 4.0);
        let values = compute_values(&spec, &scheme).unwrap();
        let partition = scheme.partition();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst = 0.0f64;
        let mut all = true;
        for sample in 0..10 {
            let i = rng.gen_range(0..45);
            let x = rng.gen_range(-2.0..2.0);
            let sub = TimePartition::uniform(partition.knot(i), spec.horizon(), steps - i).unwrap();
            let bundle = simulate(&spec, &[x], &sub, &ConstantControls(0, 0), PATHS, 100 + sample).unwrap();
            for player in Player::BOTH {
                let payoffs: Vec<f64> = (0..PATHS)
                    .map(|m| {
                        let running: f64 = (0..sub.cells())
                            .map(|c| {
                                let f = spec.eval_driver(player, sub.knot(c), bundle.state(m, c), 0.0, &[0.0], 0, 0);
                                f.unwrap() * sub.step(c)
                            })
                            .sum();
                        running + spec.eval_terminal(player, bundle.state(m, sub.cells())).unwrap()
                    })
                    .collect();
                let (mean, se) = mean_and_se(&payoffs);
                let w = values.value_at(player, i, &[x]);
                worst = worst.max((w - mean).abs() / se);
                all &= (w - mean).abs() <= 3.0 * se;
            }
        }
        (all, format!("worst |W - MC| = {worst:.2} standard errors over 10 points x 2 players"))
    });
}

#[test]
fn criterion_07_characterization() {
    criterion(7, "equilibrium construction and certificate", secs(120), || {
        let (spec, scheme, values) = bilinear(50, 101);
        let construction = construct_equilibrium(&spec, &values, &scheme, EPSILON).unwrap();
        let cert = verify_certificate(&spec, &construction.feedback, &values, &scheme, EPSILON, &[0.0], PATHS, SEED).unwrap();
        let knots_ok = cert.knots.iter().all(|k| k.pass[0] && k.pass[1]);
        (
            knots_ok && cert.consistency_pass[0] && cert.consistency_pass[1],
            format!(
                "min slack {:?}, min knot probability {:?}, e = {:?}, MC = {:?} +- {:?}",
                construction.min_slack, cert.min_probability, cert.payoffs, cert.mc_payoffs, cert.mc_std_errors
            ),
        )
    });
}

/// Deviator's lattice payoff under the pre/post-detection regimes, computed
/// with dense reference steps; returns the gain over the nominal payoff at `x0`.
fn reference_gain(spec: &GameSpec, values: &ValueField, nominal: &FeedbackTable, dev: &Deviation, x0: f64) -> f64 {
    let partition = &values.partition;
    let cells = partition.cells();
    let lo = values.grid.lower()[0];
    let hi = values.grid.upper()[0];
    let grid = Grid1 {
        lo,
        hi,
        count: values.grid.len(),
    };
    let player = dev.player();
    let j = player.index();
    let own = |pair: (usize, usize), p: Player| if p == Player::One { pair.0 } else { pair.1 };
    let ordered = |mine: usize, theirs: usize| if player == Player::One { (mine, theirs) } else { (theirs, mine) };
    let forced = |i: usize| -> Option<usize> {
        match dev {
            Deviation::Window { start, end, control, .. } => {
                let t = partition.knot(i);
                (t >= *start - 1e-12 && t < *end - 1e-12).then_some(*control)
            }
            Deviation::Constant { control, .. } => Some(*control),
            Deviation::OpenLoop { controls, .. } => Some(controls[i]),
        }
    };
    let punish = |i: usize, k: usize| match player {
        Player::One => values.punish_2[i][k],
        Player::Two => values.punish_1[i][k],
    };
    let terminal: Vec<f64> = (0..grid.count).map(|k| spec.eval_terminal(player, &[grid.node(k)]).unwrap()).collect();
    let step = |i: usize, pair: &dyn Fn(usize) -> (usize, usize), next: &[f64]| {
        let t = partition.knot(i);
        let rows = transition_rows(
            grid,
            partition.step(i),
            |k, x| spec.eval_dynamics(t, &[x], pair(k).0, pair(k).1).unwrap().0[0],
            |k, x| spec.eval_dynamics(t, &[x], pair(k).0, pair(k).1).unwrap().1[0],
        );
        backward_step(&rows, next, partition.step(i), |k, y, z| {
            spec.eval_driver(player, t, &[grid.node(k)], y, &[z], pair(k).0, pair(k).1).unwrap()
        })
        .0
    };
    let (mut nominal_y, mut pre, mut post) = (terminal.clone(), terminal.clone(), terminal);
    for i in (0..cells).rev() {
        let dev_at = |k: usize| forced(i).unwrap_or_else(|| own(nominal.get(i, k), player));
        let post_pair = |k: usize| ordered(dev_at(k), punish(i, k));
        let pre_pair = |k: usize| ordered(dev_at(k), own(nominal.get(i, k), player.other()));
        let nominal_pair = |k: usize| nominal.get(i, k);
        let from_post = step(i, &pre_pair, &post);
        let from_pre = step(i, &pre_pair, &pre);
        pre = (0..grid.count)
            .map(|k| if dev_at(k) != own(nominal.get(i, k), player) { from_post[k] } else { from_pre[k] })
            .collect();
        post = step(i, &post_pair, &post);
        nominal_y = step(i, &nominal_pair, &nominal_y);
    }
    let _ = j;
    grid.interp(&pre, x0) - grid.interp(&nominal_y, x0)
}

fn identity(dev: &Deviation) -> (Player, String, usize) {
    match dev {
        Deviation::Window { player, start, control, .. } => (*player, format!("{:.3}", start), *control),
        Deviation::Constant { player, control } => (*player, "all".into(), *control),
        Deviation::OpenLoop { player, .. } => (*player, "open".into(), 0),
    }
}

#[test]
fn criterion_08_deviation_robustness() {
    criterion(8, "unilateral deviations against punishment", secs(180), || {
        let (spec, scheme, values) = bilinear(50, 101);
        let construction = construct_equilibrium(&spec, &values, &scheme, EPSILON).unwrap();
        let deviations = standard_deviations(&spec, &scheme, 10).unwrap();
        let report = deviation_test(
            &spec,
            &scheme,
            &values,
            &construction.feedback,
            &deviations,
            EPSILON,
            &[0.0],
            PATHS,
            SEED,
        )
        .unwrap();

        let (cspec, cscheme, cvalues) = bilinear(10, 101);
        let coarse_nominal = construct_equilibrium(&cspec, &cvalues, &cscheme, EPSILON).unwrap().feedback;
        let coarse_devs = standard_deviations(&cspec, &cscheme, 10).unwrap();
        let oracle: Vec<f64> = coarse_devs
            .iter()
            .map(|d| reference_gain(&cspec, &cvalues, &coarse_nominal, d, 0.0))
            .collect();
        let coarse = deviation_test(&cspec, &cscheme, &cvalues, &coarse_nominal, &coarse_devs, EPSILON, &[0.0], 200, SEED).unwrap();
        let engine_vs_oracle = coarse
            .results
            .iter()
            .zip(&oracle)
            .map(|(r, o)| (r.lattice_gain - o).abs())
            .fold(0.0, f64::max);
        // per player: the fine argmax must lie in the reference tie set (1e-9) at coarse resolution
        let mut matches = true;
        let mut identities = Vec::new();
        for player in Player::BOTH {
            let best_of = |gains: &mut dyn Iterator<Item = (usize, f64)>| gains.fold((usize::MAX, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let (fine_best, _) = best_of(&mut report.results.iter().enumerate().filter(|(_, r)| r.player == player).map(|(i, r)| (i, r.lattice_gain)));
            let (_, oracle_max) = best_of(&mut oracle.iter().copied().enumerate().filter(|(i, _)| coarse_devs[*i].player() == player));
            let tie_set: Vec<_> = coarse_devs
                .iter()
                .zip(&oracle)
                .filter(|(d, &g)| d.player() == player && g >= oracle_max - 1e-9)
                .map(|(d, _)| identity(d))
                .collect();
            matches &= tie_set.contains(&identity(&deviations[fine_best]));
            identities.push(format!("p{player}: '{}'", report.results[fine_best].label));
        }
        let worst_margin = report
            .results
            .iter()
            .map(|r| r.lattice_gain - EPSILON - r.margin)
            .fold(f64::NEG_INFINITY, f64::max);
        (
            deviations.len() >= 20 && report.pass && engine_vs_oracle <= 1e-9 && matches,
            format!(
                "{} deviations, max gain {:?}, worst gain - eps - margin = {worst_margin:.3e}, argmax {}, \
                 coarse engine vs reference {engine_vs_oracle:.1e}, identity match {matches}",
                deviations.len(),
                report.max_gain,
                identities.join(", ")
            ),
        )
    });
}

#[test]
fn criterion_09_isaacs_audit() {
    criterion(9, "Isaacs audit", secs(10), || {
        let mut gaps = Vec::new();
        let mut ok = true;
        for id in ["separable-1d", "control-free"] {
            let spec = instantiate(id, &Parameters::new()).unwrap();
            let audit = audit_isaacs(&spec, &QueryBox::default_for(&spec), 1000, 0).unwrap();
            ok &= audit.max_gap == 0.0 && audit.pass;
            gaps.push(format!("{id} gap {:.1e}", audit.max_gap));
        }
        let spec = instantiate("pennies-1d", &Parameters::new()).unwrap();
        let audit = audit_isaacs(&spec, &QueryBox::default_for(&spec), 1000, 0).unwrap();
        ok &= audit.max_gap > 0.0 && !audit.pass && audit.failures > 0;
        gaps.push(format!("pennies-1d gap {:.3} flagged on {} queries", audit.max_gap, audit.failures));
        (ok, gaps.join(", "))
    });
}

fn hash_response(seed: u64, o: &sdg_core::strategies::Observation<'_>, size: usize, use_state: bool) -> usize {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut mix = |v: u64| {
        h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
    };
    mix(o.cell as u64);
    o.own.iter().for_each(|&c| mix(c as u64 + 1));
    o.opponent.iter().for_each(|&c| mix(c as u64 + 17));
    if use_state {
        mix((o.state()[0] * 4.0).floor() as i64 as u64);
    }
    (h % size as u64) as usize
}

#[test]
fn criterion_10_strategy_machinery() {
    criterion(10, "strategy coupling, fixed-point demo, punishment replay", secs(20), || {
        let spec = instantiate("bilinear-1d", &Parameters::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut consistent = 0;
        let mut order_free = 0;
        for trial in 0..100 {
            let cells = rng.gen_range(2..30);
            let partition = TimePartition::uniform(0.0, 1.0, cells).unwrap();
            let (sa, sb): (u64, u64) = (rng.gen(), rng.gen());
            let use_state = trial % 2 == 1;
            let alpha = NadStrategy::new(Player::One, partition.clone(), move |o| hash_response(sa, o, 3, use_state));
            let beta = NadStrategy::new(Player::Two, partition.clone(), move |o| hash_response(sb, o, 3, use_state));
            let increments: Vec<f64> = (0..cells).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let run = |order| {
                let mut source: Box<dyn StateSource> = if use_state {
                    Box::new(EulerSource::new(&spec, &partition, &[0.1], &increments))
                } else {
                    Box::new(NoState)
                };
                couple(&alpha, &beta, source.as_mut(), order).unwrap()
            };
            let a = run(CoupleOrder::AlphaFirst);
            let b = run(CoupleOrder::BetaFirst);
            consistent += usize::from(replay_consistent(&alpha, &beta, &a) && replay_consistent(&alpha, &beta, &b));
            order_free += usize::from(a == b);
        }

        let demo = fixed_point_demo().unwrap();
        let verdict = demo.cases[0].verdict.clone();

        let (spec, scheme, values) = bilinear(50, 101);
        let nominal = construct_equilibrium(&spec, &values, &scheme, EPSILON).unwrap().feedback;
        let p1 = punishment_strategy(Player::One, &nominal, &values);
        let p2 = punishment_strategy(Player::Two, &nominal, &values);
        let rule = StrategyRule { alpha: &p1, beta: &p2 };
        let played = simulate(&spec, &[0.0], scheme.partition(), &rule, 2000, SEED).unwrap();
        let feedback = FeedbackRule {
            table: &nominal,
            grid: scheme.grid(),
        };
        let reference = simulate(&spec, &[0.0], scheme.partition(), &feedback, 2000, SEED).unwrap();
        let identical = (0..2000).all(|m| {
            played.path_controls(m) == reference.path_controls(m)
                && (0..=50).all(|k| played.state(m, k).iter().zip(reference.state(m, k)).all(|(a, b)| a.to_bits() == b.to_bits()))
        });
        (
            consistent == 100 && order_free == 100 && verdict == "no fixed point" && identical,
            format!(
                "replay-consistent {consistent}/100, order-independent {order_free}/100, zero-delay demo: '{verdict}', \
                 punishment replay bit-exact: {identical}"
            ),
        )
    });
}

#[test]
fn criterion_11_regularity() {
    criterion(11, "regularity constants under refinement", secs(120), || {
        let (_, _, coarse) = bilinear(50, 101);
        let (_, _, fine) = bilinear(100, 201);
        let a = regularity_check(&coarse);
        let b = regularity_check(&fine);
        let mut worst = 0.0f64;
        let mut detail = Vec::new();
        for j in 0..2 {
            for (name, x, y) in [
                ("lip_x", a.players[j].lipschitz_x, b.players[j].lipschitz_x),
                ("holder_t", a.players[j].holder_t, b.players[j].holder_t),
            ] {
                let change = (y - x).abs() / x.abs();
                worst = worst.max(change);
                detail.push(format!("W{} {name} {x:.4} -> {y:.4}", j + 1));
            }
        }
        (
            a.all_finite() && b.all_finite() && worst <= 0.1,
            format!("{}; largest relative change {:.2}%", detail.join(", "), 100.0 * worst),
        )
    });
}
