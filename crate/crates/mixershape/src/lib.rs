//! Bayesian inference of the inner-boundary shape of an annular Stokes mixer.
//!
//! The crate implements the full forward model (truncated Fourier boundary ->
//! periodic cubic B-spline projection -> structured quadratic-triangle mesh ->
//! Taylor-Hood penalty Stokes -> steady advection-diffusion -> sparse
//! observation operators), a preconditioned Crank-Nicolson sampler over the
//! boundary coefficients with adaptive step-size tuning, and posterior
//! diagnostics for the resulting chains.
//!
//! Modules mirror the pipeline stages:
//!
//! * [`boundary`]: Fourier parameterization, Sobolev norms, radial clamp.
//! * [`bspline`]: periodic cubic B-spline curves and L2 projection.
//! * [`mesh`]: structured isoparametric meshes of the annular domain.
//! * [`stokes`] / [`advdiff`]: the two finite element solves.
//! * [`observe`]: observation operators and the composite forward map.
//! * [`inference`]: prior, misfit, pCN sampler, chain execution.
//! * [`chain`]: sample logs, CSV serialization, checkpoints.
//! * [`diagnostics`]: R-hat, radius quantiles and correlations, running means.
//! * [`config`]: flat key-value problem configuration.

pub mod advdiff;
pub mod boundary;
pub mod bspline;
pub mod chain;
pub mod config;
pub mod diagnostics;
pub mod element;
pub mod exec;
pub mod inference;
pub mod mesh;
pub mod observe;
pub mod quad;
pub mod stokes;
mod system;
