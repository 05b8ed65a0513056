//! Bayesian change point detection and clustering of time-dependent data
//! with common change points.
//!
//! Latent orders (contiguous partitions of the time axis) carry a restricted
//! Pitman-Yor prior and are explored with split, merge and shuffle
//! Metropolis-Hastings moves. Observations are Gaussian Ornstein-Uhlenbeck
//! series (univariate or multivariate) with integrated block parameters, or
//! daily infection counts scored against an SIR model.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `f64`
//! aliases at the crate root are what most callers want.

pub mod clust;
pub mod detect;
pub mod epi;
pub mod episim;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod linalg;
pub mod orders;
pub mod scalar;
pub mod ts;

pub use clust::{clust_cp, estimate_norm_constants, partition_log_prior, partition_log_prior_given_atoms, propose_order_from_psi, ClustConfig, ClustInit, ClustTrace, DataPartition};
pub use detect::{detect_cp, DetectConfig, DetectInit, DetectTrace, UpdateFlags};
pub use epi::{epi_order_loglik, solve_sir, update_i0, EpiCounts, EpiKernel, EpiKernelParams, EpiLatentState, SirPath};
pub use episim::{bin_daily, sim_epi_data, EpiSimConfig};
pub use error::{Error, Result};
pub use estimate::{binder_loss, change_points, cp_frequency, point_estimate, posterior_similarity, vi_loss, Loss, PosteriorSimilarity};
pub use kernel::{LocalParam, OrderKernel};
pub use orders::{log_eppf_order, log_pochhammer, random_order, LatentOrder, PriorParams, RandomOrderScheme};
pub use scalar::Real;
pub use ts::{block_loglik_multi, block_loglik_uni, order_loglik_ts, MultiTsParams, SeriesView, TsKernel, TsParams, UniTsParams};

pub type Prior = PriorParams<f64>;
pub type Series = SeriesView<f64>;
pub type UniParams = UniTsParams<f64>;
pub type MultiParams = MultiTsParams<f64>;
pub type TsPrior = TsParams<f64>;
pub type EpiParams = EpiKernelParams<f64>;
pub type EpiState = EpiLatentState<f64>;
pub type Trace = DetectTrace<f64>;
pub type ClusterTrace = ClustTrace<f64>;

pub type Prior32 = PriorParams<f32>;
pub type Series32 = SeriesView<f32>;
pub type UniParams32 = UniTsParams<f32>;
pub type MultiParams32 = MultiTsParams<f32>;
