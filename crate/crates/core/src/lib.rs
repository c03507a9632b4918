//! Heuristic predictive flocking control on a Gibbs random field.
//!
//! Robots are double integrators. Each control tick, robot `i` builds a small
//! discrete random field over the predicted states of itself and its
//! neighbours, approximates its posterior with mean-field sweeps and applies
//! the input whose predicted state has the highest belief. The candidate
//! inputs are a spherical grid of accelerations, optionally restricted to a
//! cone around an artificial-potential-field gradient (the "heuristic").
//!
//! Module map:
//!
//! - [`model`]: vectors, robot state, discrete dynamics, parameter sets
//! - [`environment`]: obstacles, beta-agent projection, perception, risk sectors
//! - [`potentials`]: potential energies and the configuration energy
//! - [`heuristic`]: gradient heuristic and the obstacle bypass frame
//! - [`controller`]: candidate generation, mean-field inference, MAP control
//! - [`sim`]: scenarios, lockstep simulation, metrics, trajectory CSV
//! - [`cli`]: run/metrics/sweep orchestration behind the `grf-flock` binary

pub mod cli;
pub mod controller;
pub mod environment;
pub mod error;
pub mod heuristic;
pub mod model;
pub mod potentials;
pub mod sim;

pub use error::{FlockError, Result};
pub use model::{DynamicsParams, ParamBundle, RobotState, Vec3};
