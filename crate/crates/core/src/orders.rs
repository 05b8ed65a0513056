//! Latent orders, the restricted Pitman-Yor prior over them, and the
//! split / merge / shuffle moves used by every sampler in the crate.
//!
//! A latent order partitions the time indices `0..T` into contiguous blocks.
//! It is stored as a non-decreasing vector of zero-based block labels, so
//! `labels()[t]` is the block of time `t` and a change point sits wherever the
//! label increments.

use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{ln_gamma, KahanSum, Real};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatentOrder {
    labels: Vec<usize>,
}

impl LatentOrder {
    pub fn single_block(len: usize) -> Self {
        assert!(len >= 1, "latent order needs at least one time point");
        Self {
            labels: vec![0; len],
        }
    }

    pub fn singletons(len: usize) -> Self {
        assert!(len >= 1, "latent order needs at least one time point");
        Self {
            labels: (0..len).collect(),
        }
    }

    /// Builds an order from a label vector. Labels may start at 0 or 1 and
    /// must be non-decreasing with unit steps.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let first = *labels
            .first()
            .ok_or_else(|| Error::InvalidOrder("empty label vector".into()))?;
        if first > 1 {
            return Err(Error::InvalidOrder(format!(
                "first label must be 0 or 1, got {first}"
            )));
        }
        for (t, w) in labels.windows(2).enumerate() {
            if w[1] != w[0] && w[1] != w[0] + 1 {
                return Err(Error::InvalidOrder(format!(
                    "labels at positions {t} and {} are {} and {}; blocks must be contiguous",
                    t + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            labels: labels.iter().map(|&l| l - first).collect(),
        })
    }

    pub fn from_block_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidOrder(
                "block sizes must be a non-empty list of positive integers".into(),
            ));
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect();
        Ok(Self { labels })
    }

    /// Builds an order of length `len` from one-based change point times
    /// (each in `2..=len`).
    pub fn from_change_points(len: usize, change_points: &[usize]) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidOrder("length must be positive".into()));
        }
        let mut cps = change_points.to_vec();
        cps.sort_unstable();
        cps.dedup();
        if let Some(&bad) = cps.iter().find(|&&t| t < 2 || t > len) {
            return Err(Error::InvalidOrder(format!(
                "change point {bad} outside 2..={len}"
            )));
        }
        let mut labels = Vec::with_capacity(len);
        let mut block = 0;
        let mut next = cps.iter().peekable();
        for t in 1..=len {
            if next.peek() == Some(&&t) {
                block += 1;
                next.next();
            }
            labels.push(block);
        }
        Ok(Self { labels })
    }

    /// Decodes the `mask`-th order of length `len`: bit `g` set means a change
    /// point between times `g` and `g + 1` (zero-based).
    pub fn from_gap_mask(len: usize, mask: u64) -> Self {
        let mut labels = Vec::with_capacity(len);
        let mut block = 0;
        labels.push(0);
        for g in 0..len - 1 {
            if mask >> g & 1 == 1 {
                block += 1;
            }
            labels.push(block);
        }
        Self { labels }
    }

    /// Inverse of [`LatentOrder::from_gap_mask`]; orders of at most 65 points.
    pub fn gap_mask(&self) -> u64 {
        assert!(self.labels.len() <= 65, "gap mask limited to 65 points");
        self.labels
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] != w[0])
            .fold(0u64, |m, (g, _)| m | 1 << g)
    }

    /// Every order of length `len` (there are `2^(len-1)`).
    pub fn enumerate(len: usize) -> impl Iterator<Item = LatentOrder> {
        assert!((1..=40).contains(&len), "enumeration limited to 1..=40 points");
        (0..1u64 << (len - 1)).map(move |mask| Self::from_gap_mask(len, mask))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.labels.last().map_or(0, |l| l + 1)
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_blocks()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Zero-based half-open time ranges of the blocks.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut ranges = Vec::with_capacity(self.n_blocks());
        let mut start = 0;
        for t in 1..=self.labels.len() {
            if t == self.labels.len() || self.labels[t] != self.labels[t - 1] {
                ranges.push(start..t);
                start = t;
            }
        }
        ranges
    }

    /// One-based change point times.
    pub fn change_points(&self) -> Vec<usize> {
        (1..self.labels.len())
            .filter(|&t| self.labels[t] != self.labels[t - 1])
            .map(|t| t + 1)
            .collect()
    }

    pub fn n_splittable(&self) -> usize {
        self.block_sizes().iter().filter(|&&n| n >= 2).count()
    }
}

/// Pitman-Yor discount / strength and the hyperparameters of their updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorParams<F> {
    pub sigma: F,
    pub delta: F,
    /// Shape of the Gamma hyperprior on `delta`.
    pub delta_prior_c: F,
    /// Rate of the Gamma hyperprior on `delta`.
    pub delta_prior_d: F,
    pub sigma_proposal_sd: F,
}

impl<F: Real> PriorParams<F> {
    pub fn new(sigma: F, delta: F, delta_prior_c: F, delta_prior_d: F, sigma_proposal_sd: F) -> Result<Self> {
        let p = Self {
            sigma,
            delta,
            delta_prior_c,
            delta_prior_d,
            sigma_proposal_sd,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > F::zero() && self.sigma < F::one()) {
            return Err(Error::Domain(format!("sigma must lie in (0,1), got {}", self.sigma)));
        }
        if !(self.delta > -self.sigma) || !self.delta.is_finite() {
            return Err(Error::Domain(format!(
                "delta must exceed -sigma = {}, got {}",
                -self.sigma, self.delta
            )));
        }
        for (name, v) in [
            ("delta_prior_c", self.delta_prior_c),
            ("delta_prior_d", self.delta_prior_d),
            ("sigma_proposal_sd", self.sigma_proposal_sd),
        ] {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `ln (x)_n = ln Γ(x + n) - ln Γ(x)`, the log rising factorial.
pub fn log_pochhammer<F: Real>(x: F, n: usize) -> Result<F> {
    if n == 0 {
        return Ok(F::zero());
    }
    if !(x > F::zero()) {
        return Err(Error::Domain(format!(
            "rising factorial needs x > 0 when n >= 1, got x = {x}"
        )));
    }
    Ok(log_pochhammer_unchecked(x, n))
}

fn log_pochhammer_unchecked<F: Real>(x: F, n: usize) -> F {
    if n <= 48 {
        (0..n).map(|i| (x + F::of_usize(i)).ln()).collect::<KahanSum<F>>().value()
    } else {
        ln_gamma(x + F::of_usize(n)) - ln_gamma(x)
    }
}

/// Log prior probability of `order` under the Pitman-Yor partition law
/// restricted to contiguous orders:
///
/// `T!/m! · Π_{j<m}(δ + jσ) / (δ+1)_{T-1} · Π_j (1-σ)_{n_j-1} / n_j!`
pub fn log_eppf_order<F: Real>(order: &LatentOrder, prior: &PriorParams<F>) -> F {
    log_eppf_sizes(&order.block_sizes(), prior.sigma, prior.delta)
}

pub(crate) fn log_eppf_sizes<F: Real>(sizes: &[usize], sigma: F, delta: F) -> F {
    let t: usize = sizes.iter().sum();
    let m = sizes.len();
    let mut acc = KahanSum::default();
    acc.add(ln_gamma(F::of_usize(t + 1)) - ln_gamma(F::of_usize(m + 1)));
    for j in 1..m {
        acc.add((delta + F::of_usize(j) * sigma).ln());
    }
    acc.add(-log_pochhammer_unchecked(delta + F::one(), t - 1));
    let one_minus = F::one() - sigma;
    for &n in sizes {
        acc.add(log_pochhammer_unchecked(one_minus, n - 1) - ln_gamma(F::of_usize(n + 1)));
    }
    acc.value()
}

/// A proposed order with the log-probabilities of the move and of its reverse.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal<F> {
    pub order: LatentOrder,
    pub log_forward: F,
    pub log_reverse: F,
}

/// Cuts block `block` so that its first part keeps `left` points.
pub fn split_block<F: Real>(order: &LatentOrder, block: usize, left: usize) -> Result<Proposal<F>> {
    let sizes = order.block_sizes();
    let n = *sizes
        .get(block)
        .ok_or_else(|| Error::InvalidOrder(format!("block {block} does not exist")))?;
    if n < 2 {
        return Err(Error::NoSplittableBlock);
    }
    if left == 0 || left >= n {
        return Err(Error::InvalidOrder(format!(
            "cut {left} outside 1..{n} for block {block}"
        )));
    }
    let mut new_sizes = Vec::with_capacity(sizes.len() + 1);
    new_sizes.extend_from_slice(&sizes[..block]);
    new_sizes.push(left);
    new_sizes.push(n - left);
    new_sizes.extend_from_slice(&sizes[block + 1..]);

    let splittable = sizes.iter().filter(|&&s| s >= 2).count();
    let log_forward = -F::of_usize(splittable).ln() - F::of_usize(n - 1).ln();
    // the reverse merge picks one of the m adjacent pairs of the new order
    let log_reverse = -F::of_usize(sizes.len()).ln();
    Ok(Proposal {
        order: LatentOrder::from_block_sizes(&new_sizes)?,
        log_forward,
        log_reverse,
    })
}

/// Merges block `j` with block `j + 1`.
pub fn merge_blocks<F: Real>(order: &LatentOrder, j: usize) -> Result<Proposal<F>> {
    let sizes = order.block_sizes();
    if sizes.len() < 2 {
        return Err(Error::SingleBlock);
    }
    if j + 1 >= sizes.len() {
        return Err(Error::InvalidOrder(format!("no block follows block {j}")));
    }
    let merged = sizes[j] + sizes[j + 1];
    let mut new_sizes = Vec::with_capacity(sizes.len() - 1);
    new_sizes.extend_from_slice(&sizes[..j]);
    new_sizes.push(merged);
    new_sizes.extend_from_slice(&sizes[j + 2..]);

    let splittable_after = new_sizes.iter().filter(|&&s| s >= 2).count();
    let log_forward = -F::of_usize(sizes.len() - 1).ln();
    let log_reverse = -F::of_usize(splittable_after).ln() - F::of_usize(merged - 1).ln();
    Ok(Proposal {
        order: LatentOrder::from_block_sizes(&new_sizes)?,
        log_forward,
        log_reverse,
    })
}

/// Moves the boundary between blocks `j` and `j + 1` so that block `j` ends
/// up with `left` points.
pub fn shuffle_boundary<F: Real>(order: &LatentOrder, j: usize, left: usize) -> Result<Proposal<F>> {
    let sizes = order.block_sizes();
    if sizes.len() < 2 {
        return Err(Error::SingleBlock);
    }
    if j + 1 >= sizes.len() {
        return Err(Error::InvalidOrder(format!("no block follows block {j}")));
    }
    let pair = sizes[j] + sizes[j + 1];
    if left == 0 || left >= pair {
        return Err(Error::InvalidOrder(format!(
            "boundary {left} outside 1..{pair} for blocks {j},{}",
            j + 1
        )));
    }
    let mut new_sizes = sizes.clone();
    new_sizes[j] = left;
    new_sizes[j + 1] = pair - left;
    let log_p = -F::of_usize(sizes.len() - 1).ln() - F::of_usize(pair - 1).ln();
    Ok(Proposal {
        order: LatentOrder::from_block_sizes(&new_sizes)?,
        log_forward: log_p,
        log_reverse: log_p,
    })
}

/// Uniformly picks a block with at least two points and a uniform cut inside it.
pub fn propose_split<F: Real, R: Rng + ?Sized>(order: &LatentOrder, rng: &mut R) -> Result<Proposal<F>> {
    let sizes = order.block_sizes();
    let splittable: Vec<usize> = (0..sizes.len()).filter(|&j| sizes[j] >= 2).collect();
    if splittable.is_empty() {
        return Err(Error::NoSplittableBlock);
    }
    let block = splittable[rng.random_range(0..splittable.len())];
    let left = rng.random_range(1..sizes[block]);
    split_block(order, block, left)
}

/// Uniformly picks a block and merges it with the following one.
pub fn propose_merge<F: Real, R: Rng + ?Sized>(order: &LatentOrder, rng: &mut R) -> Result<Proposal<F>> {
    let m = order.n_blocks();
    if m < 2 {
        return Err(Error::SingleBlock);
    }
    merge_blocks(order, rng.random_range(0..m - 1))
}

/// Uniformly picks an adjacent pair of blocks and redraws their boundary.
pub fn propose_shuffle<F: Real, R: Rng + ?Sized>(order: &LatentOrder, rng: &mut R) -> Result<Proposal<F>> {
    let sizes = order.block_sizes();
    if sizes.len() < 2 {
        return Err(Error::SingleBlock);
    }
    let j = rng.random_range(0..sizes.len() - 1);
    let left = rng.random_range(1..sizes[j] + sizes[j + 1]);
    shuffle_boundary(order, j, left)
}

/// Random orders where each gap independently hosts a change point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomOrderScheme {
    len: usize,
    p: f64,
}

impl RandomOrderScheme {
    /// `avg_blocks` is the expected block count, in `[1, len]`.
    pub fn new(len: usize, avg_blocks: f64) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain("order length must be positive".into()));
        }
        if !(avg_blocks >= 1.0 && avg_blocks <= len as f64) {
            return Err(Error::Domain(format!(
                "average block count must lie in [1, {len}], got {avg_blocks}"
            )));
        }
        let p = if len == 1 {
            0.0
        } else {
            (avg_blocks - 1.0) / (len - 1) as f64
        };
        Ok(Self { len, p })
    }

    pub fn change_point_prob(&self) -> f64 {
        self.p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentOrder {
        let mut labels = Vec::with_capacity(self.len);
        let mut block = 0;
        labels.push(0);
        for _ in 1..self.len {
            if rng.random::<f64>() < self.p {
                block += 1;
            }
            labels.push(block);
        }
        LatentOrder { labels }
    }

    /// Exact log-probability that [`RandomOrderScheme::sample`] returns `order`.
    pub fn log_pmf<F: Real>(&self, order: &LatentOrder) -> F {
        let cps = order.n_blocks() - 1;
        let gaps = self.len - 1;
        let p = F::of(self.p);
        let term = |k: usize, q: F| {
            if k == 0 {
                F::zero()
            } else {
                F::of_usize(k) * q.ln()
            }
        };
        term(cps, p) + term(gaps - cps, F::one() - p)
    }
}

pub fn random_order<R: Rng + ?Sized>(len: usize, avg_blocks: f64, rng: &mut R) -> Result<LatentOrder> {
    Ok(RandomOrderScheme::new(len, avg_blocks)?.sample(rng))
}
