//! Registry of parameterized built-in games selectable from configuration.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game_model::{ControlSet, GameSpec, Player};

pub type Parameters = BTreeMap<String, f64>;

#[derive(Clone, Copy)]
pub struct ModelFamily {
    pub id: &'static str,
    pub summary: &'static str,
    /// Parameter names with default values.
    pub defaults: &'static [(&'static str, f64)],
    build: fn(&Resolved, Option<(ControlSet, ControlSet)>) -> Result<GameSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyInfo {
    pub id: &'static str,
    pub summary: &'static str,
    pub defaults: Vec<(&'static str, f64)>,
}

impl ModelFamily {
    pub fn info(&self) -> FamilyInfo {
        FamilyInfo {
            id: self.id,
            summary: self.summary,
            defaults: self.defaults.to_vec(),
        }
    }

    pub fn instantiate(&self, params: &Parameters, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
        let mut values = BTreeMap::new();
        for (name, default) in self.defaults {
            values.insert(*name, *default);
        }
        for (name, value) in params {
            let Some(slot) = values.get_mut(name.as_str()) else {
                return Err(Error::InvalidSpec(format!(
                    "family `{}` has no parameter `{name}` (known: {})",
                    self.id,
                    self.defaults.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                )));
            };
            if !value.is_finite() {
                return Err(Error::InvalidSpec(format!("parameter `{name}` must be finite")));
            }
            *slot = *value;
        }
        let spec = (self.build)(&Resolved(values), controls)?;
        Ok(spec)
    }
}

struct Resolved(BTreeMap<&'static str, f64>);

impl Resolved {
    fn get(&self, name: &str) -> f64 {
        self.0[name]
    }

    fn positive(&self, name: &str) -> Result<f64> {
        let v = self.get(name);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidSpec(format!("parameter `{name}` must be positive, got {v}")))
        }
    }

    fn non_negative(&self, name: &str) -> Result<f64> {
        let v = self.get(name);
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidSpec(format!("parameter `{name}` must be non-negative, got {v}")))
        }
    }
}

fn scalar_controls(
    controls: Option<(ControlSet, ControlSet)>,
    default: &[f64],
) -> Result<(ControlSet, ControlSet)> {
    let (u, v) = match controls {
        Some(c) => c,
        None => (ControlSet::scalar(default)?, ControlSet::scalar(default)?),
    };
    if u.dim() != 1 || v.dim() != 1 {
        return Err(Error::InvalidSpec("this family takes scalar controls".into()));
    }
    Ok((u, v))
}

fn max_abs(c: &ControlSet) -> f64 {
    (0..c.len()).map(|i| c.point(i)[0].abs()).fold(0.0, f64::max)
}

const FAMILIES: &[ModelFamily] = &[
    ModelFamily {
        id: "zero",
        summary: "all coefficients identically zero (n = d = 1)",
        defaults: &[("horizon", 1.0)],
        build: build_zero,
    },
    ModelFamily {
        id: "control-free",
        summary: "b = drift, sigma = sigma, f1 = a1 sin x, f2 = a2 cos x, Phi1 = tanh x, Phi2 = cos x; controls ignored",
        defaults: &[
            ("horizon", 1.0),
            ("drift", 0.0),
            ("sigma", 1.0),
            ("running_1", 0.2),
            ("running_2", 0.1),
        ],
        build: build_control_free,
    },
    ModelFamily {
        id: "bilinear-1d",
        summary: "b = k(u - v), sigma const, Phi1 = tanh x, Phi2 = 1/(1+x^2), \
                  f_j = -c (own control)^2 - rho tanh y + gamma tanh z",
        defaults: &[
            ("horizon", 1.0),
            ("drift_gain", 0.5),
            ("sigma", 1.0),
            ("effort_cost", 0.1),
            ("discount", 0.1),
            ("z_coupling", 0.2),
        ],
        build: build_bilinear,
    },
    ModelFamily {
        id: "antisym-1d",
        summary: "zero-sum: b = k u, Phi2 = -Phi1 = -tanh x, f2(y,z) = -f1(-y,-z), \
                  f1 = -c u^2 + c v^2 + beta v sin x - rho tanh y + gamma tanh z",
        defaults: &[
            ("horizon", 1.0),
            ("drift_gain", 0.5),
            ("sigma", 1.0),
            ("effort_cost", 0.1),
            ("state_coupling", 0.2),
            ("discount", 0.1),
            ("z_coupling", 0.2),
        ],
        build: build_antisym,
    },
    ModelFamily {
        id: "separable-1d",
        summary: "b = a u^3 - c v, sigma = s(1 + 0.2 sin x), f_j additive in u and v",
        defaults: &[("horizon", 1.0), ("sigma", 1.0)],
        build: build_separable,
    },
    ModelFamily {
        id: "pennies-1d",
        summary: "f1 = kappa u v = -f2 on U = V = {-1, 1}; everything else control-free",
        defaults: &[("horizon", 1.0), ("sigma", 1.0), ("kappa", 1.0)],
        build: build_pennies,
    },
    ModelFamily {
        id: "planar-2d",
        summary: "n = d = 2, b = k(u - v) with axis-aligned unit controls, sigma = s I",
        defaults: &[
            ("horizon", 1.0),
            ("drift_gain", 0.5),
            ("sigma", 1.0),
            ("effort_cost", 0.1),
        ],
        build: build_planar,
    },
];

pub fn families() -> &'static [ModelFamily] {
    FAMILIES
}

pub fn family(id: &str) -> Result<&'static ModelFamily> {
    FAMILIES.iter().find(|f| f.id == id).ok_or_else(|| {
        Error::InvalidSpec(format!(
            "unknown model family `{id}` (known: {})",
            FAMILIES.iter().map(|f| f.id).collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Instantiates a built-in family with its default control sets.
pub fn instantiate(id: &str, params: &Parameters) -> Result<GameSpec> {
    family(id)?.instantiate(params, None)
}

fn build_zero(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[0.0])?;
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("zero")
        .controls(u, v)
        .constants(1.0, 1.0)
        .build()
}

fn build_control_free(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[-1.0, 0.0, 1.0])?;
    let drift = p.get("drift");
    let sigma = p.non_negative("sigma")?;
    let a1 = p.get("running_1");
    let a2 = p.get("running_2");
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("control-free")
        .controls(u, v)
        .drift(move |_, _, _, _, out| out[0] = drift)
        .diffusion(move |_, _, _, _, out| out[0] = sigma)
        .driver(Player::One, move |_, x, _, _, _, _| a1 * x[0].sin())
        .driver(Player::Two, move |_, x, _, _, _, _| a2 * x[0].cos())
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| x[0].cos())
        .constants(1f64.max(a1.abs() + 1.0).max(a2.abs() + 1.0), 1f64.max(a1.abs()).max(a2.abs()))
        .build()
}

fn build_bilinear(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[-1.0, 0.0, 1.0])?;
    let k = p.get("drift_gain");
    let sigma = p.non_negative("sigma")?;
    let c = p.non_negative("effort_cost")?;
    let rho = p.get("discount");
    let gamma = p.get("z_coupling");
    let m = 1f64.max(c * max_abs(&u).powi(2).max(max_abs(&v).powi(2)) + rho.abs() + gamma.abs());
    let l = 1f64.max(rho.abs()).max(gamma.abs());
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("bilinear-1d")
        .controls(u, v)
        .drift(move |_, _, u, v, out| out[0] = k * (u[0] - v[0]))
        .diffusion(move |_, _, _, _, out| out[0] = sigma)
        .driver(Player::One, move |_, _, y, z, u, _| -c * u[0] * u[0] - rho * y.tanh() + gamma * z[0].tanh())
        .driver(Player::Two, move |_, _, y, z, _, v| -c * v[0] * v[0] - rho * y.tanh() + gamma * z[0].tanh())
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| 1.0 / (1.0 + x[0] * x[0]))
        .constants(l, m)
        .build()
}

fn build_antisym(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[-1.0, 0.0, 1.0])?;
    let k = p.get("drift_gain");
    let sigma = p.non_negative("sigma")?;
    let c = p.non_negative("effort_cost")?;
    let beta = p.get("state_coupling");
    let rho = p.get("discount");
    let gamma = p.get("z_coupling");
    let f1 = move |x: &[f64], y: f64, z: &[f64], u: &[f64], v: &[f64]| {
        -c * u[0] * u[0] + c * v[0] * v[0] + beta * v[0] * x[0].sin() - rho * y.tanh() + gamma * z[0].tanh()
    };
    let (umax, vmax) = (max_abs(&u), max_abs(&v));
    let m = 1f64.max(c * (umax * umax + vmax * vmax) + beta.abs() * vmax + rho.abs() + gamma.abs());
    let l = (1.0 + beta.abs() * vmax).max(rho.abs()).max(gamma.abs());
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("antisym-1d")
        .controls(u, v)
        .drift(move |_, _, u, _, out| out[0] = k * u[0])
        .diffusion(move |_, _, _, _, out| out[0] = sigma)
        .driver(Player::One, move |_, x, y, z, u, v| f1(x, y, z, u, v))
        .driver(Player::Two, move |_, x, y, z, u, v| {
            let neg_z = [-z[0]];
            -f1(x, -y, &neg_z, u, v)
        })
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| -x[0].tanh())
        .constants(l, m)
        .build()
}

fn build_separable(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[-1.0, -0.5, 0.0, 0.5, 1.0])?;
    let sigma = p.non_negative("sigma")?;
    let (umax, vmax) = (max_abs(&u), max_abs(&v));
    let m = 1f64
        .max(0.2 * umax * umax + 0.3 * vmax + 0.1)
        .max(0.25 * umax + 0.15 * vmax * vmax + 0.1);
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("separable-1d")
        .controls(u, v)
        .drift(|_, _, u, v, out| out[0] = 0.4 * u[0].powi(3) - 0.3 * v[0])
        .diffusion(move |_, x, _, _, out| out[0] = sigma * (1.0 + 0.2 * x[0].sin()))
        .driver(Player::One, |_, _, y, _, u, v| -0.2 * u[0] * u[0] + 0.3 * v[0] - 0.1 * y.tanh())
        .driver(Player::Two, |_, _, y, _, u, v| 0.25 * u[0] - 0.15 * v[0] * v[0] - 0.1 * y.tanh())
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| x[0].sin())
        .constants((0.2 * sigma).max(1.0), m)
        .build()
}

fn build_pennies(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = scalar_controls(controls, &[-1.0, 1.0])?;
    let sigma = p.non_negative("sigma")?;
    let kappa = p.get("kappa");
    let m = 1f64.max(kappa.abs() * max_abs(&u) * max_abs(&v));
    GameSpec::builder(1, 1, p.positive("horizon")?)
        .name("pennies-1d")
        .controls(u, v)
        .diffusion(move |_, _, _, _, out| out[0] = sigma)
        .driver(Player::One, move |_, _, _, _, u, v| kappa * u[0] * v[0])
        .driver(Player::Two, move |_, _, _, _, u, v| -kappa * u[0] * v[0])
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| -x[0].tanh())
        .constants(1.0, m)
        .build()
}

fn build_planar(p: &Resolved, controls: Option<(ControlSet, ControlSet)>) -> Result<GameSpec> {
    let (u, v) = match controls {
        Some(c) => c,
        None => {
            let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
            let labels: Vec<String> = ["o", "e", "w", "n", "s"].iter().map(|s| s.to_string()).collect();
            (ControlSet::new(pts.clone(), labels.clone())?, ControlSet::new(pts, labels)?)
        }
    };
    if u.dim() != 2 || v.dim() != 2 {
        return Err(Error::InvalidSpec("planar-2d takes two-dimensional controls".into()));
    }
    let k = p.get("drift_gain");
    let sigma = p.non_negative("sigma")?;
    let c = p.non_negative("effort_cost")?;
    let m = 1f64.max(c * u.max_norm().powi(2).max(v.max_norm().powi(2)));
    GameSpec::builder(2, 2, p.positive("horizon")?)
        .name("planar-2d")
        .controls(u, v)
        .drift(move |_, _, u, v, out| {
            out[0] = k * (u[0] - v[0]);
            out[1] = k * (u[1] - v[1]);
        })
        .diffusion(move |_, _, _, _, out| {
            out[0] = sigma;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = sigma;
        })
        .driver(Player::One, move |_, _, _, _, u, _| -c * (u[0] * u[0] + u[1] * u[1]))
        .driver(Player::Two, move |_, _, _, _, _, v| -c * (v[0] * v[0] + v[1] * v[1]))
        .terminal(Player::One, |x| x[0].tanh())
        .terminal(Player::Two, |x| 1.0 / (1.0 + x[0] * x[0] + x[1] * x[1]))
        .constants(1.0, m)
        .state_box(vec![(-10.0, 10.0); 2])
        .build()
}
