//! Finite-N Monte Carlo laboratory for spherical p-spin models: Gaussian
//! disorder, planted and correlated variants, Langevin dynamics, equilibrium
//! samplers and chaos estimators.
//!
//! Dense tensors have `N^p` entries, so this module is meant for small
//! systems (`N <= 32` at `p = 3`, `N <= 16` at `p = 4`).

mod assignment;
mod disorder;
mod dynamics;
mod estimators;
mod sampler;
mod seeds;
mod tensor;

pub use assignment::{solve_assignment, w2_empirical, MAX_SAMPLES};
pub use disorder::{
    correlate_disorder, eta, gradient, hamiltonian, hessian, plant, sample_disorder, spherical_gradient,
    Correlation, Disorder, Lineage, Spike, MAX_ENTRIES,
};
pub use dynamics::{langevin_run, LangevinConfig, Trajectory, STABILITY_LIMIT};
pub use estimators::{
    batch_means, chaos_estimate, chaos_samples, correlation_curve, mean_stderr, overlap_chaos, step_halving_gap,
    sup_norm_estimate, sup_norm_from, time_below, ChaosConfig, ChaosEstimate, CorrelationPoint,
};
pub use sampler::{
    equilibrium_chain, equilibrium_sample, temperature_ladder, Chain, Diagnostics, SamplerMethod, SamplerSettings,
    MIN_SWAP_RATE,
};
pub use seeds::derive_seed;
pub use tensor::{Configuration, SPHERE_TOL};
