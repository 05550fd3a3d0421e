//! Lattice engine for two-player nonzero-sum stochastic differential games
//! whose payoffs are given by controlled backward SDEs: value functions,
//! ε-Nash equilibrium construction, and Monte Carlo verification.

pub mod bsde_solver;
pub mod error;
pub mod exec;
pub mod families;
pub mod feedback;
pub mod game_model;
pub mod grid;
pub mod hamiltonian;
pub mod nash_engine;
pub mod partition;
pub mod quadrature;
pub mod sde_sim;
pub mod semigroup;
pub mod strategies;
pub mod value_pde;

pub use bsde_solver::{solve_generic, solve_markov, BackwardSolution, Kernel, Scheme};
pub use error::{Error, Result};
pub use feedback::FeedbackTable;
pub use game_model::{validate_spec, ControlSet, GameSpec, Player, ValidationReport};
pub use grid::{BoundaryPolicy, StateGrid};
pub use partition::TimePartition;
pub use sde_sim::{simulate, PathBundle};
pub use nash_engine::{construct_equilibrium, deviation_test, verify_certificate, Deviation};
pub use value_pde::{compute_values, ValueField};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
