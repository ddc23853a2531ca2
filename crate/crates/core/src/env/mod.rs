//! Finite MDPs, policies, simulation and exact oracles.

pub mod dp;
pub mod mdp;
pub mod policy;
pub mod sim;

pub use dp::{bellman_residual, exact_q_eval, exact_value, integrate, optimal_policy, optimality_residual};
pub use mdp::{MdpShape, TabularMdp};
pub use policy::{Policy, TabularPolicy};
pub use sim::{default_horizon, mc_value, rollout, MonteCarloValue, Step, Trajectory, DEFAULT_TAIL_TOL};
