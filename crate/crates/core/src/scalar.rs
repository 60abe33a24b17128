//! Scalar abstraction shared by the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real field the law, operator and perturbation code is written against.
///
/// Implemented for `f32` and `f64`. The associated tolerances scale the
/// invariant checks to the precision of the type.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance on total mass when a law is constructed.
    fn mass_tol() -> Self;
    /// Tolerance on derived quantities (kernels, marginals, reconstructions).
    fn derived_tol() -> Self;
    /// Default relative residual for the integral-equation consistency test.
    fn solve_tol() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn mass_tol() -> Self {
        1e-12
    }
    fn derived_tol() -> Self {
        1e-10
    }
    fn solve_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn mass_tol() -> Self {
        1e-5
    }
    fn derived_tol() -> Self {
        1e-4
    }
    fn solve_tol() -> Self {
        1e-3
    }
}
