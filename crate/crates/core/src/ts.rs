//! Integrated block likelihoods for Gaussian Ornstein-Uhlenbeck series.
//!
//! Within a block every observation follows the discretised process
//! `y_t = φ y_{t-1} + (1-φ) μ + ε_t`, `ε_t ~ N(0, Λ)`, and the block's own
//! `(μ, Λ)` are integrated out under a conjugate prior (Normal-Gamma with `λ`
//! a precision when `d = 1`, Normal-Inverse-Wishart when `d > 1`). Writing
//! `z_t = y_t - φ y_{t-1}` turns each block into a regression of `z_t` on the
//! constant covariate `1-φ`, so the marginal is available in closed form.
//!
//! The first observation of a block conditions on the last observation of the
//! previous block; only time 0 of the series has no predecessor and uses mean
//! `μ` directly.
//!
//! Block ranges are zero-based and half-open.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, is_symmetric, log_det_chol};
use crate::orders::LatentOrder;
use crate::scalar::{ln_gamma, ln_multigamma, KahanSum, Real};

/// A `d × T` series stored time-major: `obs(t)` is the `d`-vector at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesView<F> {
    values: Vec<F>,
    dim: usize,
    len: usize,
}

impl<F: Real> SeriesView<F> {
    pub fn univariate(values: Vec<F>) -> Result<Self> {
        let len = values.len();
        Self::check(&values, 1, len)?;
        Ok(Self { values, dim: 1, len })
    }

    /// Builds a series from `d` rows of equal length (one row per dimension).
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Dimension("series needs at least one dimension".into()));
        }
        let len = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != len) {
            return Err(Error::Dimension(format!(
                "row {i} has {} values, expected {len}",
                r.len()
            )));
        }
        let mut values = Vec::with_capacity(dim * len);
        for t in 0..len {
            values.extend(rows.iter().map(|r| r[t]));
        }
        Self::check(&values, dim, len)?;
        Ok(Self { values, dim, len })
    }

    fn check(values: &[F], dim: usize, len: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::Dimension("series must contain at least one time point".into()));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at dimension {}, time {}",
                p % dim,
                p / dim
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn obs(&self, t: usize) -> &[F] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Values of one dimension over time.
    pub fn row(&self, k: usize) -> Vec<F> {
        (0..self.len).map(|t| self.values[t * self.dim + k]).collect()
    }

    pub fn scaled(&self, factor: F) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
            dim: self.dim,
            len: self.len,
        }
    }
}

/// Normal-Gamma prior `μ | λ ~ N(0, (cλ)^-1)`, `λ ~ Ga(a, b)` and the
/// autoregressive coefficient with its random-walk proposal variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniTsParams<F> {
    pub a: F,
    pub b: F,
    pub c: F,
    pub phi: F,
    pub phi_proposal_var: F,
}

impl<F: Real> UniTsParams<F> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("phi_proposal_var", self.phi_proposal_var),
        ] {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        check_phi(self.phi)
    }
}

/// Normal-Inverse-Wishart prior `μ | Λ ~ N(m0, Λ/k0)`, `Λ ~ IW(ν0, S0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTsParams<F> {
    pub m0: Vec<F>,
    pub k0: F,
    pub nu0: F,
    /// Row-major `d × d` scale matrix.
    pub s0: Vec<F>,
    pub phi: F,
    pub phi_proposal_var: F,
}

impl<F: Real> MultiTsParams<F> {
    pub fn dim(&self) -> usize {
        self.m0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.m0.len();
        if d == 0 {
            return Err(Error::Dimension("m0 must not be empty".into()));
        }
        if self.s0.len() != d * d {
            return Err(Error::Dimension(format!(
                "S0 has {} entries, expected {d}x{d}",
                self.s0.len()
            )));
        }
        if !(self.k0 > F::zero()) {
            return Err(Error::Domain(format!("k0 must be positive, got {}", self.k0)));
        }
        if !(self.nu0 > F::of_usize(d) - F::one()) {
            return Err(Error::Domain(format!(
                "nu0 must exceed d - 1 = {}, got {}",
                d - 1,
                self.nu0
            )));
        }
        if !(self.phi_proposal_var > F::zero()) {
            return Err(Error::Domain("phi_proposal_var must be positive".into()));
        }
        if !is_symmetric(&self.s0, d) || cholesky(&self.s0, d).is_none() {
            return Err(Error::Domain("S0 must be symmetric positive definite".into()));
        }
        check_phi(self.phi)
    }
}

fn check_phi<F: Real>(phi: F) -> Result<()> {
    if phi > F::zero() && phi < F::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("phi must lie in (0,1), got {phi}")))
    }
}

fn check_range<F>(series: &SeriesView<F>, range: &Range<usize>) -> Result<()> {
    if range.start >= range.end || range.end > series.len {
        return Err(Error::InvalidRange {
            start: range.start,
            end: range.end,
            len: series.len,
        });
    }
    Ok(())
}

/// Log marginal likelihood of `range` of a univariate series.
pub fn block_loglik_uni<F: Real>(series: &SeriesView<F>, range: Range<usize>, p: &UniTsParams<F>) -> Result<F> {
    check_range(series, &range)?;
    if series.dim != 1 {
        return Err(Error::Dimension(format!(
            "univariate kernel applied to a {}-dimensional series",
            series.dim
        )));
    }
    let n = range.len();
    let (mut sxx, mut sxz, mut szz) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    let one_minus = F::one() - p.phi;
    for t in range {
        let (x, z) = if t == 0 {
            (F::one(), series.values[0])
        } else {
            (one_minus, series.values[t] - p.phi * series.values[t - 1])
        };
        sxx.add(x * x);
        sxz.add(x * z);
        szz.add(z * z);
    }
    let c_n = p.c + sxx.value();
    let resid = szz.value() - sxz.value() * sxz.value() / c_n;
    let b_n = p.b + F::of(0.5) * resid.max(F::zero());
    let half_n = F::of_usize(n) * F::of(0.5);
    let a_n = p.a + half_n;
    let v = -half_n * F::TAU().ln() + F::of(0.5) * (p.c / c_n).ln() + p.a * p.b.ln() - a_n * b_n.ln()
        + ln_gamma(a_n)
        - ln_gamma(p.a);
    finite(v)
}

/// Log marginal likelihood of `range` of a `d`-dimensional series.
pub fn block_loglik_multi<F: Real>(series: &SeriesView<F>, range: Range<usize>, p: &MultiTsParams<F>) -> Result<F> {
    check_range(series, &range)?;
    let d = series.dim;
    if p.m0.len() != d || p.s0.len() != d * d {
        return Err(Error::Dimension(format!(
            "prior has dimension {} but series has dimension {d}",
            p.m0.len()
        )));
    }
    let n = range.len();
    let one_minus = F::one() - p.phi;
    let mut sxx = KahanSum::default();
    let mut sxz = vec![KahanSum::default(); d];
    let mut szz = vec![KahanSum::default(); d * d];
    let mut z = vec![F::zero(); d];
    for t in range {
        let x = if t == 0 {
            z.copy_from_slice(series.obs(0));
            F::one()
        } else {
            let (cur, prev) = (series.obs(t), series.obs(t - 1));
            for k in 0..d {
                z[k] = cur[k] - p.phi * prev[k];
            }
            one_minus
        };
        sxx.add(x * x);
        for i in 0..d {
            sxz[i].add(x * z[i]);
            for j in 0..=i {
                szz[i * d + j].add(z[i] * z[j]);
            }
        }
    }
    let k_n = p.k0 + sxx.value();
    let m_n: Vec<F> = (0..d).map(|i| (p.k0 * p.m0[i] + sxz[i].value()) / k_n).collect();
    let mut s_n = vec![F::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = p.s0[i * d + j] + szz[i * d + j].value() + p.k0 * p.m0[i] * p.m0[j]
                - k_n * m_n[i] * m_n[j];
            s_n[i * d + j] = v;
            s_n[j * d + i] = v;
        }
    }
    let l0 = cholesky(&p.s0, d).ok_or_else(|| Error::Numerical("S0 is not positive definite".into()))?;
    let ln = cholesky(&s_n, d)
        .ok_or_else(|| Error::Numerical("posterior scale matrix lost positive definiteness".into()))?;
    let nu_n = p.nu0 + F::of_usize(n);
    let half = F::of(0.5);
    let v = -F::of_usize(n * d) * half * F::PI().ln() + F::of_usize(d) * half * (p.k0 / k_n).ln()
        + p.nu0 * half * log_det_chol(&l0, d)
        - nu_n * half * log_det_chol(&ln, d)
        + ln_multigamma(nu_n * half, d)
        - ln_multigamma(p.nu0 * half, d);
    finite(v)
}

fn finite<F: Real>(v: F) -> Result<F> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("block log-likelihood evaluated to {v}")))
    }
}

/// Prior of a time-series kernel, dispatching on the series dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum TsParams<F> {
    Uni(UniTsParams<F>),
    Multi(MultiTsParams<F>),
}

impl<F: Real> TsParams<F> {
    pub fn phi(&self) -> F {
        match self {
            TsParams::Uni(p) => p.phi,
            TsParams::Multi(p) => p.phi,
        }
    }

    pub fn phi_proposal_var(&self) -> F {
        match self {
            TsParams::Uni(p) => p.phi_proposal_var,
            TsParams::Multi(p) => p.phi_proposal_var,
        }
    }

    pub fn with_phi(&self, phi: F) -> Self {
        let mut out = self.clone();
        match &mut out {
            TsParams::Uni(p) => p.phi = phi,
            TsParams::Multi(p) => p.phi = phi,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TsParams::Uni(p) => p.validate(),
            TsParams::Multi(p) => p.validate(),
        }
    }
}

pub fn block_loglik_ts<F: Real>(series: &SeriesView<F>, range: Range<usize>, p: &TsParams<F>) -> Result<F> {
    match p {
        TsParams::Uni(u) => block_loglik_uni(series, range, u),
        TsParams::Multi(m) => block_loglik_multi(series, range, m),
    }
}

/// Sum of block log-likelihoods over the blocks of `order`.
pub fn order_loglik_ts<F: Real>(series: &SeriesView<F>, order: &LatentOrder, p: &TsParams<F>) -> Result<F> {
    if order.len() != series.len() {
        return Err(Error::Dimension(format!(
            "order has length {} but series has length {}",
            order.len(),
            series.len()
        )));
    }
    let mut acc = KahanSum::default();
    for r in order.block_ranges() {
        acc.add(block_loglik_ts(series, r, p)?);
    }
    Ok(acc.value())
}

/// A series with its prior and a block-level likelihood memo for the current `φ`.
#[derive(Clone, Debug)]
pub struct TsKernel<F> {
    series: SeriesView<F>,
    params: TsParams<F>,
    memo: HashMap<(usize, usize), F>,
}

impl<F: Real> TsKernel<F> {
    pub fn new(series: SeriesView<F>, params: TsParams<F>) -> Result<Self> {
        params.validate()?;
        match &params {
            TsParams::Uni(_) if series.dim() != 1 => {
                return Err(Error::Dimension(format!(
                    "univariate prior given for a {}-dimensional series",
                    series.dim()
                )))
            }
            TsParams::Multi(m) if m.dim() != series.dim() => {
                return Err(Error::Dimension(format!(
                    "prior dimension {} does not match series dimension {}",
                    m.dim(),
                    series.dim()
                )))
            }
            _ => {}
        }
        Ok(Self {
            series,
            params,
            memo: HashMap::new(),
        })
    }

    pub fn series(&self) -> &SeriesView<F> {
        &self.series
    }

    pub fn params(&self) -> &TsParams<F> {
        &self.params
    }

    pub fn phi(&self) -> F {
        self.params.phi()
    }

    /// Replaces `φ`, discarding memoised blocks.
    pub fn set_phi(&mut self, phi: F) -> Result<()> {
        check_phi(phi)?;
        if phi != self.params.phi() {
            self.params = self.params.with_phi(phi);
            self.memo.clear();
        }
        Ok(())
    }

    pub fn block_loglik(&mut self, range: Range<usize>) -> Result<F> {
        let key = (range.start, range.end);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = block_loglik_ts(&self.series, range, &self.params)?;
        self.memo.insert(key, v);
        Ok(v)
    }

    pub fn order_loglik(&mut self, order: &LatentOrder) -> Result<F> {
        if order.len() != self.series.len() {
            return Err(Error::Dimension(format!(
                "order has length {} but series has length {}",
                order.len(),
                self.series.len()
            )));
        }
        let mut acc = KahanSum::default();
        for r in order.block_ranges() {
            acc.add(self.block_loglik(r)?);
        }
        Ok(acc.value())
    }

    /// `loglik(to) - loglik(from)` touching only the blocks that differ.
    pub fn loglik_difference(&mut self, from: &LatentOrder, to: &LatentOrder) -> Result<F> {
        let (old, new) = differing_blocks(from, to);
        let mut acc = KahanSum::default();
        for r in new {
            acc.add(self.block_loglik(r)?);
        }
        for r in old {
            acc.add(-self.block_loglik(r)?);
        }
        Ok(acc.value())
    }
}

/// Blocks present in only one of two orders: `(only_in_from, only_in_to)`.
pub(crate) fn differing_blocks(from: &LatentOrder, to: &LatentOrder) -> (Vec<Range<usize>>, Vec<Range<usize>>) {
    let a = from.block_ranges();
    let b = to.block_ranges();
    let (mut i, mut j) = (0, 0);
    let (mut only_a, mut only_b) = (Vec::new(), Vec::new());
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.start < y.start || (x.start == y.start && x.end < y.end) => {
                only_a.push(x.clone());
                i += 1;
            }
            (Some(_), Some(y)) => {
                only_b.push(y.clone());
                j += 1;
            }
            (Some(x), None) => {
                only_a.push(x.clone());
                i += 1;
            }
            (None, Some(y)) => {
                only_b.push(y.clone());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    (only_a, only_b)
}
