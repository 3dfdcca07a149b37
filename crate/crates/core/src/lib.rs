//! Certified feasible transition paths for AC optimal power flow.
//!
//! Around a solved operating point the engine builds a convex inner
//! approximation of the set of control setpoints for which the AC power flow
//! has a solution satisfying all operating limits. Solving a sequence of such
//! restrictions yields a piecewise-linear path of setpoints that is feasible
//! everywhere along the way.

pub mod case;
pub mod conic;
pub mod envelopes;
pub mod linalg;
pub mod matrices;
pub mod powerflow;
pub mod restriction;
pub mod scalar;
pub mod sequential;
pub mod sparse;

pub use scalar::Scalar;

pub type Network = case::Network<f64>;
pub type NetworkMatrices = matrices::NetworkMatrices<f64>;
pub type OperatingPoint = powerflow::OperatingPoint<f64>;
pub type RestrictionProblem = restriction::RestrictionProblem<f64>;
pub type ConicProgram = conic::ConicProgram<f64>;
pub type SolveResult = conic::SolveResult<f64>;
pub type FeasiblePath = sequential::FeasiblePath<f64>;
