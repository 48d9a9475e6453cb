//! Simulation and weak-error measurement for rough-volatility drivers.
//!
//! The crate simulates the Riemann–Liouville fractional Brownian motion
//! W^H_t = ∫₀^t √(2H)(t−s)^{H−1/2} dW_s jointly with its driving Brownian
//! motion by exact covariance factorization, runs the left-point Euler
//! scheme for stochastic integrals ∫ψ(t, W^H_t) dW_t, and measures weak
//! convergence rates of the scheme against coupled fine-grid references.
//! A Markovian surrogate built from a quadrature mixture of
//! Ornstein–Uhlenbeck factors is provided alongside, with computable
//! L² error bounds, plus a conditional Monte Carlo pricer for
//! rough Bergomi-style call options.
//!
//! Everything is generic over the scalar type (`f32`/`f64`) through the
//! [`Real`] trait; `*64`/`*32` aliases at the crate root pin the common
//! instantiations. All Monte Carlo entry points are deterministic functions
//! of their seed: counter-based RNG streams per path block and fixed-order
//! reductions make results independent of thread count.

pub mod config;
pub mod cov;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hurst;
pub mod markov;
pub mod payoff;
pub mod psd;
pub mod quad;
pub mod real;
pub mod sampler;
pub mod scheme;

pub use config::{
    apply_key, load_config_file, parse_log2_list, parse_payoff, parse_payoff_list, parse_psi,
    parse_real_list, CONFIG_KEYS,
};
pub use cov::{
    build_joint_covariance, cov_fbm_bm, cov_fbm_fbm, rl_kernel, CovBlocks, CovEngine, CovMethod,
    QUAD_TOL,
};
pub use error::{Result, RoughVolError};
pub use experiment::{
    default_mem_budget_mb, emit_report, fit_rate, parse_report, parse_report_file, render_report,
    weak_error_curve, ErrorRow, RateFit, RunConfig, WeakErrorReport, CSV_HEADER, MEM_BUDGET_ENV,
};
pub use grid::TimeGrid;
pub use hurst::HurstParams;
pub use markov::{
    build_theta_grid, l2_error, l2_error_profile, ou_cov, ou_cov_cross, sample_extended,
    surrogate_fbm, tail_variance_bound, y_dw_cov, CrossCovEngine, ExtendedBatch, QuadratureGrid,
    ThetaRule,
};
pub use payoff::{black_scholes_call, eval_payoff, romano_touzi_price, Payoff};
pub use psd::{psd_factor, PsdFactor, DEFAULT_CLIP_TOL};
pub use real::{CompensatedSum, Real};
pub use sampler::{
    dump_batch, empirical_moments, load_batch, sample_joint_paths, subsample, BatchView,
    MomentStats, MomentTable, PathBatch, DEFAULT_STREAM_LAYOUT,
};
pub use scheme::{
    discrete_second_moment, euler_left_point, exact_second_moment, reference_solution,
    EulerResult, PsiSpec,
};

/// Double-precision instantiations — the default working precision.
pub type HurstParams64 = HurstParams<f64>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type PathBatch64 = PathBatch<f64>;
pub type ExtendedBatch64 = ExtendedBatch<f64>;
pub type QuadratureGrid64 = QuadratureGrid<f64>;
pub type PsiSpec64 = PsiSpec<f64>;
pub type Payoff64 = Payoff<f64>;
pub type RunConfig64 = RunConfig<f64>;
pub type WeakErrorReport64 = WeakErrorReport<f64>;
pub type RateFit64 = RateFit<f64>;

/// Single-precision instantiations, for memory-bound sweeps.
pub type HurstParams32 = HurstParams<f32>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type PathBatch32 = PathBatch<f32>;
pub type ExtendedBatch32 = ExtendedBatch<f32>;
pub type QuadratureGrid32 = QuadratureGrid<f32>;
pub type PsiSpec32 = PsiSpec<f32>;
pub type Payoff32 = Payoff<f32>;
pub type RunConfig32 = RunConfig<f32>;
pub type WeakErrorReport32 = WeakErrorReport<f32>;
pub type RateFit32 = RateFit<f32>;
