//! Verification toolkit for Markov potential game criteria on finite
//! stochastic games.
//!
//! The crate is organised bottom-up:
//!
//! * [`game`] holds the tabular game model, joint policies and every
//!   discounted / finite-horizon evaluation primitive.
//! * [`potential`] recovers one-shot potentials and decides the qualification
//!   conditions (agent-independent transitions, dummy terms, state
//!   transitivity and complete state transitivity).
//! * [`equilibrium`] builds dual and best-response MDPs, solves them by value
//!   iteration and verifies ε-Nash equilibria.
//! * [`learning`] runs independent projected stochastic gradient ascent.
//! * [`counterexample`] encodes the two-agent continuous counterexample on a
//!   grid and assembles the end-to-end refutation report.
//!
//! Joint actions are flattened with a mixed-radix law, agent 0 varying
//! fastest; see [`game::JointActionSpace`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod equilibrium;
mod error;
pub mod game;
pub mod learning;
pub mod potential;
pub mod tolerance;

pub use error::{Error, Result};
