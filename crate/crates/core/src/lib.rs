//! Discrete laws of `O = (Y, Z, W, X)`, the integral equation
//! `E[g(W, X) | Z, X] = E[Y | Z, X]`, linear functionals of its solution,
//! adversarial weak-dependence sequences, and confidence-set constructions
//! with a Monte Carlo coverage harness.
//!
//! The numerical core (laws, operators, perturbations) is generic over
//! [`Real`]; sampling, confidence sets and simulation work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adversarial;
pub mod confsets;
pub mod error;
pub mod functional;
pub mod law;
pub mod linalg;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Law = law::DiscreteLaw<f64>;
pub type Support = law::SupportSpec<f64>;
pub type Law32 = law::DiscreteLaw<f32>;
pub type Support32 = law::SupportSpec<f32>;
pub type Grid = functional::GridFunction<f64>;
pub type Grid32 = functional::GridFunction<f32>;
pub type Spec = functional::FunctionalSpec<f64>;
pub type Base = adversarial::BaseLawSpec<f64>;
pub type Params = adversarial::PerturbationParams<f64>;
