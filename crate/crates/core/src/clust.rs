//! Clustering of observations that share a latent order.
//!
//! The target over a partition `λ = {B_1, …, B_k}` of the observations and one
//! order per cluster is
//!
//! ```text
//! p(λ) · Π_l [ L(ρ_l) · Π_{i ∈ B_l} L(y_i | ρ_l) ]
//! ```
//!
//! with `p(λ)` the probability, under a symmetric Dirichlet finite mixture
//! over all `2^{T-1}` orders, that the observations fall into `k` given
//! distinct components, and `L(ρ)` the restricted Pitman-Yor prior of each
//! cluster's order. Each iteration proposes a split or merge of the clusters of two
//! random observations, with orders for the new clusters drawn from the
//! mixture `ψ(ρ) = (1/n) Σ_i L(ρ | y_i)` of single-observation posteriors,
//! then refreshes every cluster's order given all of its members.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detect::{accept, shuffle_step, split_merge_step};
use crate::error::{config_err, Error, Result};
use crate::kernel::{LocalParam, OrderKernel};
use crate::orders::{log_eppf_order, LatentOrder, PriorParams, RandomOrderScheme};
use crate::scalar::{log_sum_exp, KahanSum, Real};

/// Cluster labels, canonical: zero-based and numbered by first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DataPartition {
    labels: Vec<usize>,
    k: usize,
}

impl DataPartition {
    pub fn single_cluster(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            k: n,
        }
    }

    /// Canonicalises arbitrary labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { labels, k: map.len() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    /// Every partition of `0..n` in canonical form.
    pub fn enumerate(n: usize) -> Vec<DataPartition> {
        let mut out = Vec::new();
        let mut labels = vec![0usize; n];
        fn rec(i: usize, k: usize, labels: &mut Vec<usize>, out: &mut Vec<DataPartition>) {
            if i == labels.len() {
                out.push(DataPartition { labels: labels.clone(), k });
                return;
            }
            for l in 0..=k {
                labels[i] = l;
                rec(i + 1, k.max(l + 1), labels, out);
            }
        }
        if n == 0 {
            return vec![DataPartition::single_cluster(0)];
        }
        rec(1, 1, &mut labels, &mut out);
        out
    }
}

/// `ln K` for `K = 2^{T-1}` orders of length `T`.
pub fn log_n_orders<F: Real>(len: usize) -> F {
    F::of_usize(len.saturating_sub(1)) * F::LN_2()
}

/// Log partition law of a symmetric `Dir(α, …, α)` mixture over `K = e^{log_k}`
/// components:
/// `ln[K!/(K-k)!] + Σ_l ln Γ(α + n_l) - k ln Γ(α) + ln Γ(Kα) - ln Γ(Kα + n)`,
/// evaluated without forming `K`.
pub fn partition_log_prior<F: Real>(partition: &DataPartition, alpha: F, log_k: F) -> Result<F> {
    let k = partition.n_clusters();
    let inv_k = (-log_k).exp();
    let mut acc = KahanSum::default();
    acc.add(partition_log_prior_given_atoms(partition, alpha, log_k)?);
    // ln K!/(K-k)! = Σ_{j<k} ln(K - j)
    for j in 0..k {
        acc.add(log_k + (-F::of_usize(j) * inv_k).ln_1p());
    }
    Ok(acc.value())
}

/// Log probability that the observations fall into `k` given distinct
/// components as described by `partition`: [`partition_log_prior`] without
/// the `ln[K!/(K-k)!]` count of component choices.
pub fn partition_log_prior_given_atoms<F: Real>(partition: &DataPartition, alpha: F, log_k: F) -> Result<F> {
    if !(alpha > F::zero()) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let k = partition.n_clusters();
    let n = partition.len();
    if k > 0 && F::of_usize(k).ln() > log_k + F::of(1e-9) {
        return Err(Error::Domain(format!(
            "{k} clusters exceed the {} mixture components",
            log_k.exp()
        )));
    }
    let mut acc = KahanSum::default();
    for size in partition.sizes() {
        // ln Γ(α + n_l) - ln Γ(α)
        for j in 0..size {
            acc.add((alpha + F::of_usize(j)).ln());
        }
    }
    // ln Γ(Kα) - ln Γ(Kα + n) = -Σ_{j<n} ln(Kα + j)
    let ln_alpha = alpha.ln();
    let inv_ka = (-log_k).exp() / alpha;
    for j in 0..n {
        acc.add(-(log_k + ln_alpha + (F::of_usize(j) * inv_ka).ln_1p()));
    }
    Ok(acc.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClustInit {
    #[default]
    SingleCluster,
    Singletons,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClustConfig {
    pub n_iterations: usize,
    pub n_burnin: usize,
    /// Split probability of the order moves.
    pub q: f64,
    /// Order moves per draw from the mixture proposal.
    pub l_steps: usize,
    /// Orders drawn to estimate each normalisation constant.
    pub b_norm: usize,
    /// Dirichlet concentration.
    pub alpha: f64,
    /// Mean block count of the importance density.
    pub avg_blocks: f64,
    pub seed: u64,
    /// Update each observation's local parameter (`I0` or `φ`) every iteration.
    pub update_local: bool,
    pub init: ClustInit,
}

impl ClustConfig {
    pub fn validate(&self, len: usize) -> Result<()> {
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
        if self.l_steps == 0 {
            return config_err("L must be at least 1");
        }
        if self.b_norm == 0 {
            return config_err("B must be at least 1");
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return config_err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.avg_blocks >= 1.0 && self.avg_blocks <= len as f64) {
            return config_err(format!(
                "avg_blocks must lie in [1, {len}], got {}",
                self.avg_blocks
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClustTrace<F> {
    pub partitions: Vec<DataPartition>,
    /// Order of each cluster, indexed by canonical cluster label.
    pub orders: Vec<Vec<LatentOrder>>,
    /// `ln Ẑ_i` for each observation.
    pub norm_vec: Vec<F>,
    /// Set when local parameters were updated.
    pub local_param: Option<LocalParam>,
    /// `local_chain[draw][i]`.
    pub local_chain: Vec<Vec<F>>,
    pub local_accept: Vec<Vec<bool>>,
    pub wall_time_seconds: f64,
}

impl<F> ClustTrace<F> {
    pub fn n_draws(&self) -> usize {
        self.partitions.len()
    }

    pub fn labels(&self) -> Vec<Vec<usize>> {
        self.partitions.iter().map(|p| p.labels().to_vec()).collect()
    }
}

fn check_kernels<F: Real, K: OrderKernel<F>>(kernels: &[K]) -> Result<usize> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::Dimension("no observations".into()))?;
    let len = first.len();
    if let Some(i) = kernels.iter().position(|k| k.len() != len) {
        return Err(Error::Dimension(format!(
            "observation {i} has length {}, expected {len}",
            kernels[i].len()
        )));
    }
    Ok(len)
}

/// `ln Ẑ_i` by importance sampling from the given orders, where `log_q[b]` is
/// the log-density of `orders[b]` under the sampling scheme.
pub fn norm_constants_from_orders<F, K, R>(
    kernels: &mut [K],
    prior: &PriorParams<F>,
    orders: &[LatentOrder],
    log_q: &[F],
    rng: &mut R,
) -> Result<Vec<F>>
where
    F: Real,
    K: OrderKernel<F>,
    R: Rng + ?Sized,
{
    if orders.is_empty() || orders.len() != log_q.len() {
        return Err(Error::Dimension("need one log-density per importance draw".into()));
    }
    let b = orders.len();
    let n = kernels.len();
    let mut weights = vec![Vec::with_capacity(b); n];
    for (o, &lq) in orders.iter().zip(log_q) {
        let e = log_eppf_order(o, prior);
        for (w, k) in weights.iter_mut().zip(kernels.iter_mut()) {
            w.push(k.order_loglik(o, rng)? + e - lq);
        }
    }
    let ln_b = F::of_usize(b).ln();
    let mut out = Vec::with_capacity(n);
    for (i, w) in weights.iter().enumerate() {
        let lse = log_sum_exp(w);
        // ESS = (Σw)² / Σw²
        let lse2 = log_sum_exp(&w.iter().map(|&x| x + x).collect::<Vec<_>>());
        let ess = (lse + lse - lse2).exp();
        if ess < F::of(0.01) * F::of_usize(b) {
            log::warn!(
                "normalisation constant of observation {i}: effective sample size {:.1} of {b} draws",
                ess.as_f64()
            );
        }
        out.push(lse - ln_b);
    }
    Ok(out)
}

/// `ln Ẑ_i` from `b` orders drawn with `avg_blocks` expected blocks.
pub fn estimate_norm_constants<F, K, R>(
    kernels: &mut [K],
    prior: &PriorParams<F>,
    b: usize,
    avg_blocks: f64,
    rng: &mut R,
) -> Result<Vec<F>>
where
    F: Real,
    K: OrderKernel<F>,
    R: Rng + ?Sized,
{
    if b == 0 {
        return config_err("B must be at least 1");
    }
    let len = check_kernels(kernels)?;
    let scheme = RandomOrderScheme::new(len, avg_blocks)?;
    let orders: Vec<LatentOrder> = (0..b).map(|_| scheme.sample(rng)).collect();
    let log_q: Vec<F> = orders.iter().map(|o| scheme.log_pmf(o)).collect();
    norm_constants_from_orders(kernels, prior, &orders, &log_q, rng)
}

/// `ln ψ̂(ρ) = ln Σ_i exp(ln L(y_i | ρ) + ln L(ρ) - ln Ẑ_i) - ln n`.
pub fn psi_log_density<F, K, R>(
    kernels: &mut [K],
    prior: &PriorParams<F>,
    norm: &[F],
    order: &LatentOrder,
    rng: &mut R,
) -> Result<F>
where
    F: Real,
    K: OrderKernel<F>,
    R: Rng + ?Sized,
{
    let e = log_eppf_order(order, prior);
    let mut terms = Vec::with_capacity(kernels.len());
    for (k, &z) in kernels.iter_mut().zip(norm) {
        terms.push(k.order_loglik(order, rng)? + e - z);
    }
    Ok(log_sum_exp(&terms) - F::of_usize(kernels.len()).ln())
}

/// Draws an order by running `l_steps` split-or-merge plus shuffle moves
/// targeting the posterior of one uniformly chosen observation, starting at
/// `current`. Returns the order and its mixture log-density `ln ψ̂`.
#[allow(clippy::too_many_arguments)]
pub fn propose_order_from_psi<F, K, R>(
    kernels: &mut [K],
    prior: &PriorParams<F>,
    norm: &[F],
    current: &LatentOrder,
    l_steps: usize,
    q: f64,
    rng: &mut R,
) -> Result<(LatentOrder, F)>
where
    F: Real,
    K: OrderKernel<F>,
    R: Rng + ?Sized,
{
    if l_steps == 0 {
        return config_err("L must be at least 1");
    }
    let j = rng.random_range(0..kernels.len());
    let mut order = current.clone();
    for _ in 0..l_steps {
        let k = &mut kernels[j];
        if let Some(next) = split_merge_step(&order, prior, q, rng, |a, b, r| k.loglik_difference(a, b, r))? {
            order = next;
        }
        if let Some(next) = shuffle_step(&order, prior, rng, |a, b, r| k.loglik_difference(a, b, r))? {
            order = next;
        }
    }
    let lp = psi_log_density(kernels, prior, norm, &order, rng)?;
    Ok((order, lp))
}

/// `Σ_{i ∈ members} [ln L(y_i | to) - ln L(y_i | from)]`.
fn members_difference<F, K, R>(kernels: &mut [K], members: &[usize], from: &LatentOrder, to: &LatentOrder, rng: &mut R) -> Result<F>
where
    F: Real,
    K: OrderKernel<F>,
    R: Rng + ?Sized,
{
    let mut acc = KahanSum::default();
    for &i in members {
        acc.add(kernels[i].loglik_difference(from, to, rng)?);
    }
    Ok(acc.value())
}

/// Partition with one order per cluster.
#[derive(Clone, Debug)]
struct State {
    labels: Vec<usize>,
    orders: Vec<LatentOrder>,
}

impl State {
    fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect()
    }

    fn canonicalize(&mut self) {
        let mut map = vec![usize::MAX; self.orders.len()];
        let mut orders = Vec::with_capacity(self.orders.len());
        for l in self.labels.iter_mut() {
            if map[*l] == usize::MAX {
                map[*l] = orders.len();
                orders.push(self.orders[*l].clone());
            }
            *l = map[*l];
        }
        self.orders = orders;
    }

    fn partition(&self) -> DataPartition {
        DataPartition {
            labels: self.labels.clone(),
            k: self.orders.len(),
        }
    }
}

struct Sampler<'a, F, K> {
    kernels: &'a mut [K],
    prior: PriorParams<F>,
    norm: Vec<F>,
    cfg: ClustConfig,
    log_k: F,
}

impl<F: Real, K: OrderKernel<F>> Sampler<'_, F, K> {
    /// Cluster orders are independent draws from the order prior, so the
    /// partition enters through the allocation probability alone.
    fn log_prior(&self, labels: &[usize]) -> Result<F> {
        partition_log_prior_given_atoms(&DataPartition::from_labels(labels), F::of(self.cfg.alpha), self.log_k)
    }

    fn psi_draw<R: Rng + ?Sized>(&mut self, start: &LatentOrder, rng: &mut R) -> Result<(LatentOrder, F)> {
        propose_order_from_psi(self.kernels, &self.prior, &self.norm, start, self.cfg.l_steps, self.cfg.q, rng)
    }

    fn psi_density<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<F> {
        psi_log_density(self.kernels, &self.prior, &self.norm, order, rng)
    }

    fn eppf(&self, order: &LatentOrder) -> F {
        log_eppf_order(order, &self.prior)
    }

    /// Split the cluster holding both anchors; returns whether accepted.
    fn split<R: Rng + ?Sized>(&mut self, state: &mut State, i: usize, l: usize, rng: &mut R) -> Result<bool> {
        let s = state.labels[i];
        let members = state.members(s);
        let new_id = state.orders.len();
        let mut labels = state.labels.clone();
        labels[l] = new_id;
        for &j in &members {
            if j != i && j != l && rng.random::<bool>() {
                labels[j] = new_id;
            }
        }
        let (in_a, in_b): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&j| labels[j] == s);
        let rho_s = state.orders[s].clone();
        let (rho_a, lp_a) = self.psi_draw(&rho_s, rng)?;
        let (rho_b, lp_b) = self.psi_draw(&rho_s, rng)?;
        let lp_s = self.psi_density(&rho_s, rng)?;
        let lik = members_difference(self.kernels, &in_a, &rho_s, &rho_a, rng)?
            + members_difference(self.kernels, &in_b, &rho_s, &rho_b, rng)?;
        let reassign = -F::of_usize(members.len() - 2) * F::LN_2();
        let log_ratio = self.log_prior(&labels)? - self.log_prior(&state.labels)?
            + self.eppf(&rho_a) + self.eppf(&rho_b) - self.eppf(&rho_s)
            + lik
            + lp_s - (reassign + lp_a + lp_b);
        let u = F::of(rng.random::<f64>().ln());
        if accept(log_ratio, u) {
            state.labels = labels;
            state.orders[s] = rho_a;
            state.orders.push(rho_b);
            state.canonicalize();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Merge the clusters of the two anchors; returns whether accepted.
    fn merge<R: Rng + ?Sized>(&mut self, state: &mut State, i: usize, l: usize, rng: &mut R) -> Result<bool> {
        let (ci, cl) = (state.labels[i], state.labels[l]);
        let mem_i = state.members(ci);
        let mem_l = state.members(cl);
        let mut labels = state.labels.clone();
        for &j in &mem_l {
            labels[j] = ci;
        }
        let (rho_i, rho_l) = (state.orders[ci].clone(), state.orders[cl].clone());
        let (rho_m, lp_m) = self.psi_draw(&rho_i, rng)?;
        let lp_i = self.psi_density(&rho_i, rng)?;
        let lp_l = self.psi_density(&rho_l, rng)?;
        let lik = members_difference(self.kernels, &mem_i, &rho_i, &rho_m, rng)?
            + members_difference(self.kernels, &mem_l, &rho_l, &rho_m, rng)?;
        let reassign = -F::of_usize(mem_i.len() + mem_l.len() - 2) * F::LN_2();
        let log_ratio = self.log_prior(&labels)? - self.log_prior(&state.labels)?
            + self.eppf(&rho_m) - self.eppf(&rho_i) - self.eppf(&rho_l)
            + lik
            + (reassign + lp_i + lp_l) - lp_m;
        let u = F::of(rng.random::<f64>().ln());
        if accept(log_ratio, u) {
            state.labels = labels;
            state.orders[ci] = rho_m;
            state.canonicalize();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// One split-or-merge and one shuffle move on every cluster's order.
    fn accelerate<R: Rng + ?Sized>(&mut self, state: &mut State, rng: &mut R) -> Result<()> {
        for c in 0..state.orders.len() {
            let members = state.members(c);
            let kernels = &mut *self.kernels;
            let diff = |a: &LatentOrder, b: &LatentOrder, r: &mut R| members_difference(kernels, &members, a, b, r);
            if let Some(next) = split_merge_step(&state.orders[c], &self.prior, self.cfg.q, rng, diff)? {
                state.orders[c] = next;
            }
            let kernels = &mut *self.kernels;
            let diff = |a: &LatentOrder, b: &LatentOrder, r: &mut R| members_difference(kernels, &members, a, b, r);
            if let Some(next) = shuffle_step(&state.orders[c], &self.prior, rng, diff)? {
                state.orders[c] = next;
            }
        }
        Ok(())
    }
}

/// Runs the clustering sampler. `prior` is held fixed.
pub fn clust_cp<F: Real, K: OrderKernel<F>>(kernels: &mut [K], prior: &PriorParams<F>, cfg: &ClustConfig) -> Result<ClustTrace<F>> {
    let len = check_kernels(kernels)?;
    let n = kernels.len();
    if n < 2 {
        return Err(Error::Dimension(format!("clustering needs at least two observations, got {n}")));
    }
    if len < 2 {
        return Err(Error::Dimension(format!("need at least two time points, got {len}")));
    }
    cfg.validate(len)?;
    prior.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm = estimate_norm_constants(kernels, prior, cfg.b_norm, cfg.avg_blocks, &mut rng)?;
    let local_param = cfg.update_local.then(|| kernels[0].local_param());
    let mut sampler = Sampler {
        kernels,
        prior: *prior,
        norm,
        cfg: *cfg,
        log_k: log_n_orders(len),
    };
    let mut state = match cfg.init {
        ClustInit::SingleCluster => State {
            labels: vec![0; n],
            orders: vec![LatentOrder::single_block(len)],
        },
        ClustInit::Singletons => State {
            labels: (0..n).collect(),
            orders: vec![LatentOrder::single_block(len); n],
        },
    };
    let keep = cfg.n_iterations - cfg.n_burnin;
    let mut trace = ClustTrace {
        partitions: Vec::with_capacity(keep),
        orders: Vec::with_capacity(keep),
        norm_vec: Vec::new(),
        local_param,
        local_chain: Vec::new(),
        local_accept: Vec::new(),
        wall_time_seconds: 0.0,
    };
    let (mut n_split, mut n_merge) = (0usize, 0usize);
    for it in 0..cfg.n_iterations {
        let i = rng.random_range(0..n);
        let mut l = rng.random_range(0..n - 1);
        if l >= i {
            l += 1;
        }
        if state.labels[i] == state.labels[l] {
            n_split += usize::from(sampler.split(&mut state, i, l, &mut rng)?);
        } else {
            n_merge += usize::from(sampler.merge(&mut state, i, l, &mut rng)?);
        }
        sampler.accelerate(&mut state, &mut rng)?;
        let mut flags = Vec::new();
        if cfg.update_local {
            for j in 0..n {
                let order = &state.orders[state.labels[j]];
                flags.push(sampler.kernels[j].update_local(order, &mut rng)?);
            }
        }
        if it >= cfg.n_burnin {
            trace.partitions.push(state.partition());
            trace.orders.push(state.orders.clone());
            if cfg.update_local {
                trace.local_chain.push(sampler.kernels.iter().map(|k| k.local_value()).collect());
                trace.local_accept.push(flags);
            }
        }
    }
    trace.norm_vec = sampler.norm;
    trace.wall_time_seconds = start.elapsed().as_secs_f64();
    log::debug!(
        "clust: {} iterations, splits accepted {n_split}, merges accepted {n_merge}, {:.2}s",
        cfg.n_iterations,
        trace.wall_time_seconds
    );
    Ok(trace)
}
