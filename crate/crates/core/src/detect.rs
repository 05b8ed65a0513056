//! Split-merge-shuffle Metropolis-Hastings over the latent order of a single
//! observation, with updates of the prior parameters and of the kernel's
//! local parameter.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, Error, Result};
use crate::kernel::{LocalParam, OrderKernel};
use crate::orders::{log_eppf_sizes, propose_merge, propose_shuffle, propose_split, LatentOrder, PriorParams};
use crate::scalar::Real;

const DELTA_LOG_SD: f64 = 0.5;

/// Which parameter updates run after the order moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateFlags {
    pub sigma: bool,
    pub delta: bool,
    /// `φ` for time series, `I0` for epidemic counts.
    pub local: bool,
}

impl Default for UpdateFlags {
    fn default() -> Self {
        Self {
            sigma: true,
            delta: true,
            local: true,
        }
    }
}

impl UpdateFlags {
    pub fn none() -> Self {
        Self {
            sigma: false,
            delta: false,
            local: false,
        }
    }
}

/// Starting order of the chain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum DetectInit {
    #[default]
    SingleBlock,
    Singletons,
    Order(LatentOrder),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectConfig {
    pub n_iterations: usize,
    pub n_burnin: usize,
    /// Probability of proposing a split rather than a merge.
    pub q: f64,
    pub seed: u64,
    pub updates: UpdateFlags,
    pub init: DetectInit,
}

impl DetectConfig {
    pub fn new(n_iterations: usize, n_burnin: usize, q: f64, seed: u64) -> Self {
        Self {
            n_iterations,
            n_burnin,
            q,
            seed,
            updates: UpdateFlags::default(),
            init: DetectInit::SingleBlock,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return config_err("n_iterations must be positive");
        }
        if self.n_burnin >= self.n_iterations {
            return config_err(format!(
                "n_burnin ({}) must be smaller than n_iterations ({})",
                self.n_burnin, self.n_iterations
            ));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return config_err(format!("q must lie in (0,1), got {}", self.q));
        }
        Ok(())
    }
}

/// Retained draws of one chain. Chains of parameters the kernel does not have
/// are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectTrace<F> {
    pub orders: Vec<LatentOrder>,
    pub sigma_chain: Vec<F>,
    pub sigma_accept: Vec<bool>,
    pub delta_chain: Vec<F>,
    pub delta_accept: Vec<bool>,
    pub phi_chain: Vec<F>,
    pub phi_accept: Vec<bool>,
    pub i0_chain: Vec<F>,
    pub i0_accept: Vec<bool>,
    pub wall_time_seconds: f64,
}

impl<F> DetectTrace<F> {
    pub fn n_draws(&self) -> usize {
        self.orders.len()
    }

    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.orders.iter().map(|o| o.labels().to_vec()).collect()
    }
}

#[inline]
pub(crate) fn accept<F: Real>(log_ratio: F, log_u: F) -> bool {
    log_u < log_ratio
}

fn log_u<F: Real, R: Rng + ?Sized>(rng: &mut R) -> F {
    F::of(rng.random::<f64>().ln())
}

/// One split-or-merge Metropolis-Hastings move. A split is attempted with
/// probability `q`; a move that is impossible from the current order counts as
/// a rejection. `loglik_diff(from, to, rng)` must return the change in the
/// log-likelihood. Returns the accepted order, if any.
pub fn split_merge_step<F, R, D>(
    order: &LatentOrder,
    prior: &PriorParams<F>,
    q: f64,
    rng: &mut R,
    mut loglik_diff: D,
) -> Result<Option<LatentOrder>>
where
    F: Real,
    R: Rng + ?Sized,
    D: FnMut(&LatentOrder, &LatentOrder, &mut R) -> Result<F>,
{
    let split = rng.random::<f64>() < q;
    let (prop, move_ratio) = if split {
        if order.n_splittable() == 0 {
            return Ok(None);
        }
        (propose_split::<F, R>(order, rng)?, F::of((1.0 - q).ln() - q.ln()))
    } else {
        if order.n_blocks() < 2 {
            return Ok(None);
        }
        (propose_merge::<F, R>(order, rng)?, F::of(q.ln() - (1.0 - q).ln()))
    };
    let prior_ratio = log_eppf_sizes(&prop.order.block_sizes(), prior.sigma, prior.delta)
        - log_eppf_sizes(&order.block_sizes(), prior.sigma, prior.delta);
    let lik_ratio = loglik_diff(order, &prop.order, rng)?;
    let log_ratio = prior_ratio + lik_ratio + prop.log_reverse - prop.log_forward + move_ratio;
    Ok(accept(log_ratio, log_u(rng)).then_some(prop.order))
}

/// One shuffle move; `None` when rejected or when the order has one block.
pub fn shuffle_step<F, R, D>(
    order: &LatentOrder,
    prior: &PriorParams<F>,
    rng: &mut R,
    mut loglik_diff: D,
) -> Result<Option<LatentOrder>>
where
    F: Real,
    R: Rng + ?Sized,
    D: FnMut(&LatentOrder, &LatentOrder, &mut R) -> Result<F>,
{
    if order.n_blocks() < 2 {
        return Ok(None);
    }
    let prop = propose_shuffle::<F, R>(order, rng)?;
    if prop.order == *order {
        return Ok(None);
    }
    let prior_ratio = log_eppf_sizes(&prop.order.block_sizes(), prior.sigma, prior.delta)
        - log_eppf_sizes(&order.block_sizes(), prior.sigma, prior.delta);
    let lik_ratio = loglik_diff(order, &prop.order, rng)?;
    let log_ratio = prior_ratio + lik_ratio + prop.log_reverse - prop.log_forward;
    Ok(accept(log_ratio, log_u(rng)).then_some(prop.order))
}

/// Metropolis-Hastings step for `σ` under a Uniform(0,1) prior.
pub fn sigma_step<F: Real>(order: &LatentOrder, prior: PriorParams<F>, proposed: F, log_u: F) -> (PriorParams<F>, bool) {
    if proposed == prior.sigma {
        return (prior, true);
    }
    if !(proposed > F::zero() && proposed < F::one()) || prior.delta <= -proposed {
        return (prior, false);
    }
    let sizes = order.block_sizes();
    let log_ratio = log_eppf_sizes(&sizes, proposed, prior.delta) - log_eppf_sizes(&sizes, prior.sigma, prior.delta);
    if accept(log_ratio, log_u) {
        (PriorParams { sigma: proposed, ..prior }, true)
    } else {
        (prior, false)
    }
}

pub fn update_sigma<F: Real, R: Rng + ?Sized>(order: &LatentOrder, prior: PriorParams<F>, rng: &mut R) -> (PriorParams<F>, bool) {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let proposed = prior.sigma + prior.sigma_proposal_sd * F::of(z);
    sigma_step(order, prior, proposed, log_u(rng))
}

/// Metropolis-Hastings step for `δ` under its `Ga(c, d)` prior, for a walk on
/// `ln δ`.
pub fn delta_step<F: Real>(order: &LatentOrder, prior: PriorParams<F>, proposed: F, log_u: F) -> (PriorParams<F>, bool) {
    if proposed == prior.delta {
        return (prior, true);
    }
    if !(proposed > F::zero()) || !proposed.is_finite() {
        return (prior, false);
    }
    let sizes = order.block_sizes();
    let (c, d) = (prior.delta_prior_c, prior.delta_prior_d);
    let log_ratio = log_eppf_sizes(&sizes, prior.sigma, proposed) - log_eppf_sizes(&sizes, prior.sigma, prior.delta)
        + c * (proposed.ln() - prior.delta.ln())
        - d * (proposed - prior.delta);
    if accept(log_ratio, log_u) {
        (PriorParams { delta: proposed, ..prior }, true)
    } else {
        (prior, false)
    }
}

pub fn update_delta<F: Real, R: Rng + ?Sized>(order: &LatentOrder, prior: PriorParams<F>, rng: &mut R) -> (PriorParams<F>, bool) {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let proposed = prior.delta * F::of(z * DELTA_LOG_SD).exp();
    delta_step(order, prior, proposed, log_u(rng))
}

/// Runs the sampler from the configured initial order.
pub fn detect_cp<F: Real, K: OrderKernel<F>>(kernel: &mut K, prior: &PriorParams<F>, cfg: &DetectConfig) -> Result<DetectTrace<F>> {
    cfg.validate()?;
    prior.validate()?;
    let len = kernel.len();
    if len < 2 {
        return Err(Error::Dimension(format!("need at least two time points, got {len}")));
    }
    if cfg.updates.delta && !(prior.delta > F::zero()) {
        return config_err("delta must be positive when it is updated");
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = match &cfg.init {
        DetectInit::SingleBlock => LatentOrder::single_block(len),
        DetectInit::Singletons => LatentOrder::singletons(len),
        DetectInit::Order(o) if o.len() == len => o.clone(),
        DetectInit::Order(o) => {
            return Err(Error::Dimension(format!(
                "initial order has length {} but the data have {len} time points",
                o.len()
            )))
        }
    };
    let mut prior = *prior;
    let keep = cfg.n_iterations - cfg.n_burnin;
    let local = kernel.local_param();
    let mut trace = DetectTrace {
        orders: Vec::with_capacity(keep),
        sigma_chain: Vec::with_capacity(keep),
        sigma_accept: Vec::with_capacity(keep),
        delta_chain: Vec::with_capacity(keep),
        delta_accept: Vec::with_capacity(keep),
        phi_chain: Vec::new(),
        phi_accept: Vec::new(),
        i0_chain: Vec::new(),
        i0_accept: Vec::new(),
        wall_time_seconds: 0.0,
    };
    let (mut n_sm, mut n_sh) = (0usize, 0usize);
    for it in 0..cfg.n_iterations {
        if let Some(next) = split_merge_step(&order, &prior, cfg.q, &mut rng, |a, b, r| kernel.loglik_difference(a, b, r))? {
            order = next;
            n_sm += 1;
        }
        if let Some(next) = shuffle_step(&order, &prior, &mut rng, |a, b, r| kernel.loglik_difference(a, b, r))? {
            order = next;
            n_sh += 1;
        }
        let mut sigma_acc = false;
        if cfg.updates.sigma {
            (prior, sigma_acc) = update_sigma(&order, prior, &mut rng);
        }
        let mut delta_acc = false;
        if cfg.updates.delta {
            (prior, delta_acc) = update_delta(&order, prior, &mut rng);
        }
        let local_acc = if cfg.updates.local {
            kernel.update_local(&order, &mut rng)?
        } else {
            false
        };
        if it >= cfg.n_burnin {
            trace.orders.push(order.clone());
            trace.sigma_chain.push(prior.sigma);
            trace.sigma_accept.push(sigma_acc);
            trace.delta_chain.push(prior.delta);
            trace.delta_accept.push(delta_acc);
            let (chain, flags) = match local {
                LocalParam::Phi => (&mut trace.phi_chain, &mut trace.phi_accept),
                LocalParam::I0 => (&mut trace.i0_chain, &mut trace.i0_accept),
            };
            chain.push(kernel.local_value());
            flags.push(local_acc);
        }
    }
    trace.wall_time_seconds = start.elapsed().as_secs_f64();
    log::debug!(
        "detect: {} iterations, split/merge accepted {n_sm}, shuffle accepted {n_sh}, {:.2}s",
        cfg.n_iterations,
        trace.wall_time_seconds
    );
    Ok(trace)
}
