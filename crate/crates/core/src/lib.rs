//! Online stochastic network resource allocation with dual gradients.
//!
//! The crate models a network as a directed graph whose nodes buffer
//! workload in queues, and allocates resources on the edges one time slot at
//! a time by minimizing a per-slot Lagrangian. Three online controllers are
//! provided:
//!
//! * [`controllers::Sdg`]: classic stochastic dual gradient with a constant
//!   stepsize (the multiplier is a scaled queue).
//! * [`controllers::HeavyBall`]: projected stochastic heavy-ball momentum.
//! * [`controllers::LaSdg`]: learn-and-adapt SDG, which deploys allocations
//!   against an effective multiplier built from a learned empirical
//!   multiplier plus the scaled queue, and spends one extra Lagrangian
//!   minimization per slot on learning.
//!
//! [`distributed`] runs LA-SDG as per-node message passing, [`oracle`]
//! computes the ensemble dual optimum offline, and [`harness`] drives
//! Monte Carlo experiments and writes CSV output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod distributed;
pub mod error;
pub mod harness;
pub mod kv;
pub mod lagrangian;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
