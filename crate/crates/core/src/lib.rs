//! Numerical laboratory for subcritical Caffarelli-Kohn-Nirenberg inequalities.
//!
//! Everything is generic over the scalar ([`Real`]); the aliases below fix it
//! to `f64`.

pub mod cylinder;
pub mod flow;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod radial;
pub mod real;
pub mod special;
pub mod spectral;
pub mod symmetry;

pub use real::Real;

pub type ProblemParams = params::ProblemParams<f64>;
pub type ValidatedParams = params::ValidatedParams<f64>;
pub type CylinderParams = params::CylinderParams<f64>;
pub type RadialProfile = radial::RadialProfile<f64>;
pub type SampledProfile = radial::SampledProfile<f64>;
pub type TrialFunction = spectral::TrialFunction<f64>;
pub type FlowGrid = flow::FlowGrid<f64>;
pub type FlowState = flow::FlowState<f64>;
pub type CylinderFunction = cylinder::CylinderFunction<f64>;
pub type QuadratureConfig = quadrature::QuadratureConfig<f64>;
