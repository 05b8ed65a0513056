//! SIR survival likelihood for daily new-infection counts.
//!
//! The infection rate is piecewise constant over the blocks of a latent order.
//! Block rates are integrated out by plain Monte Carlo: each replicate draws
//! one rate per block from `Ga(a0, b0)`, solves the SIR system with fixed-step
//! RK4, and scores the counts multinomially against the daily infection mass
//! `p_t = (S(t-1) - S(t)) / (S(0) - S(T))`. Replicates are averaged on the
//! likelihood scale with log-sum-exp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::orders::LatentOrder;
use crate::scalar::{expit, log_sum_exp, logit, KahanSum, Real};

/// States may overshoot `[0, 1]` by this much before being clamped.
const CLAMP_TOL: f64 = 1e-9;
/// Overshoot beyond this is reported as a numerical failure.
const FAIL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpiKernelParams<F> {
    /// Monte Carlo replicates per likelihood evaluation.
    pub mc_draws: usize,
    /// Recovery rate.
    pub xi: F,
    /// Gamma shape for block infection rates.
    pub a0: F,
    /// Gamma rate for block infection rates.
    pub b0: F,
    /// Variance of the random-walk increment on `logit(I0)`.
    pub i0_proposal_var: F,
    /// RK4 step in days.
    pub ode_step: F,
}

impl<F: Real> EpiKernelParams<F> {
    pub fn validate(&self) -> Result<()> {
        if self.mc_draws == 0 {
            return Err(Error::Domain("number of Monte Carlo draws must be at least 1".into()));
        }
        for (name, v) in [
            ("xi", self.xi),
            ("a0", self.a0),
            ("b0", self.b0),
            ("i0_proposal_var", self.i0_proposal_var),
            ("ode_step", self.ode_step),
        ] {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ode_step > F::one() {
            return Err(Error::Domain(format!(
                "ode_step must not exceed one day, got {}",
                self.ode_step
            )));
        }
        Ok(())
    }
}

/// Daily new-infection counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpiCounts {
    counts: Vec<u64>,
}

impl EpiCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Dimension("count series must cover at least one day".into()));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Domain("count series needs at least one positive entry".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Initial infected proportion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpiLatentState<F> {
    pub i0: F,
}

impl<F: Real> EpiLatentState<F> {
    pub fn new(i0: F) -> Result<Self> {
        if i0 > F::zero() && i0 < F::one() {
            Ok(Self { i0 })
        } else {
            Err(Error::Domain(format!("I0 must lie in (0,1), got {i0}")))
        }
    }
}

/// Proportions on the integer day grid `0..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SirPath<F> {
    pub s: Vec<F>,
    pub i: Vec<F>,
    pub r: Vec<F>,
}

#[inline]
fn rk4_step<F: Real>(s: F, i: F, beta: F, xi: F, h: F) -> (F, F) {
    let f = |s: F, i: F| {
        let inf = beta * s * i;
        (-inf, inf - xi * i)
    };
    let half = h * F::of(0.5);
    let (k1s, k1i) = f(s, i);
    let (k2s, k2i) = f(s + half * k1s, i + half * k1i);
    let (k3s, k3i) = f(s + half * k2s, i + half * k2i);
    let (k4s, k4i) = f(s + h * k3s, i + h * k3i);
    let sixth = h / F::of(6.0);
    (
        s + sixth * (k1s + F::of(2.0) * (k2s + k3s) + k4s),
        i + sixth * (k1i + F::of(2.0) * (k2i + k3i) + k4i),
    )
}

fn substeps<F: Real>(step: F) -> usize {
    (F::one() / step).ceil().to_usize().unwrap_or(1).max(1)
}

fn clamp_unit<F: Real>(x: F, what: &str, day: usize) -> Result<F> {
    let lo = -F::of(CLAMP_TOL);
    let hi = F::one() + F::of(CLAMP_TOL);
    if x >= lo && x <= hi {
        return Ok(x.max(F::zero()).min(F::one()));
    }
    if x >= -F::of(FAIL_TOL) && x <= F::one() + F::of(FAIL_TOL) {
        return Ok(x.max(F::zero()).min(F::one()));
    }
    Err(Error::Numerical(format!(
        "{what} left [0,1] on day {day}: {x}"
    )))
}

/// Integrates the SIR system in proportions with `β` constant within each day.
/// The step is shrunk so that a whole number of steps covers each day.
pub fn solve_sir<F: Real>(beta_per_day: &[F], xi: F, i0: F, step: F) -> Result<SirPath<F>> {
    if let Some(b) = beta_per_day.iter().find(|b| !(**b >= F::zero())) {
        return Err(Error::Domain(format!("infection rates must be non-negative, got {b}")));
    }
    if !(step > F::zero()) {
        return Err(Error::Domain("ODE step must be positive".into()));
    }
    let n = substeps(step);
    let h = F::one() / F::of_usize(n);
    let days = beta_per_day.len();
    let mut path = SirPath {
        s: Vec::with_capacity(days + 1),
        i: Vec::with_capacity(days + 1),
        r: Vec::with_capacity(days + 1),
    };
    let (mut s, mut i, mut r) = (F::one() - i0, i0, F::zero());
    path.s.push(s);
    path.i.push(i);
    path.r.push(r);
    for (day, &beta) in beta_per_day.iter().enumerate() {
        for _ in 0..n {
            let (s1, i1) = rk4_step(s, i, beta, xi, h);
            // removed compartment closes the system: dR = -(dS + dI)
            r = r - (s1 - s) - (i1 - i);
            s = s1;
            i = i1;
        }
        s = clamp_unit(s, "S", day + 1)?;
        i = clamp_unit(i, "I", day + 1)?;
        if s + i > F::one() + F::of(FAIL_TOL) {
            return Err(Error::Numerical(format!("S + I exceeds 1 on day {}", day + 1)));
        }
        path.s.push(s);
        path.i.push(i);
        path.r.push(r);
    }
    Ok(path)
}

/// Fills `s_out[0..=T]` with `S` on the day grid. Allocation-free inner loop
/// for likelihood evaluation.
fn susceptible_path<F: Real>(beta_per_day: &[F], xi: F, i0: F, n_sub: usize, s_out: &mut [F]) -> Result<()> {
    let h = F::one() / F::of_usize(n_sub);
    let (mut s, mut i) = (F::one() - i0, i0);
    s_out[0] = s;
    for (day, &beta) in beta_per_day.iter().enumerate() {
        for _ in 0..n_sub {
            (s, i) = rk4_step(s, i, beta, xi, h);
        }
        s = clamp_unit(s, "S", day + 1)?;
        i = clamp_unit(i, "I", day + 1)?;
        s_out[day + 1] = s;
    }
    Ok(())
}

/// Daily infection masses `p_t`, `t = 1..=T`, normalised to sum to one.
pub fn day_masses<F: Real>(s: &[F]) -> Vec<F> {
    let total = s[0] - s[s.len() - 1];
    s.windows(2)
        .map(|w| {
            if total > F::zero() {
                ((w[0] - w[1]) / total).max(F::zero())
            } else {
                F::zero()
            }
        })
        .collect()
}

fn multinomial_score<F: Real>(counts: &[u64], s: &[F]) -> F {
    let total = s[0] - s[s.len() - 1];
    if !(total > F::zero()) {
        return F::neg_infinity();
    }
    let ln_total = total.ln();
    let mut acc = KahanSum::default();
    for (t, &y) in counts.iter().enumerate() {
        if y == 0 {
            continue;
        }
        let mass = s[t] - s[t + 1];
        if !(mass > F::zero()) {
            return F::neg_infinity();
        }
        acc.add(F::of(y as f64) * (mass.ln() - ln_total));
    }
    acc.value()
}

fn check_lengths(counts: &EpiCounts, order: &LatentOrder) -> Result<()> {
    if order.len() != counts.len() {
        return Err(Error::Dimension(format!(
            "order has length {} but the count series covers {} days",
            order.len(),
            counts.len()
        )));
    }
    Ok(())
}

/// Monte Carlo log-likelihood from explicit replicate rates: `betas[r][j]` is
/// the infection rate of block `j` in replicate `r`.
pub fn epi_loglik_given_betas<F: Real>(
    counts: &EpiCounts,
    order: &LatentOrder,
    state: &EpiLatentState<F>,
    params: &EpiKernelParams<F>,
    betas: &[Vec<F>],
) -> Result<F> {
    check_lengths(counts, order)?;
    if betas.is_empty() {
        return Err(Error::Domain("at least one Monte Carlo replicate is required".into()));
    }
    let m = order.n_blocks();
    let n_sub = substeps(params.ode_step);
    let labels = order.labels();
    let mut day_beta = vec![F::zero(); counts.len()];
    let mut s = vec![F::zero(); counts.len() + 1];
    let mut scores = Vec::with_capacity(betas.len());
    for rep in betas {
        if rep.len() != m {
            return Err(Error::Dimension(format!(
                "replicate has {} block rates but the order has {m} blocks",
                rep.len()
            )));
        }
        for (d, &l) in day_beta.iter_mut().zip(labels) {
            *d = rep[l];
        }
        susceptible_path(&day_beta, params.xi, state.i0, n_sub, &mut s)?;
        scores.push(multinomial_score(counts.counts(), &s));
    }
    let v = log_sum_exp(&scores) - F::of_usize(betas.len()).ln();
    if v == F::neg_infinity() {
        return Err(Error::Numerical(
            "every Monte Carlo replicate gave zero mass to an observed day".into(),
        ));
    }
    if !v.is_finite() {
        return Err(Error::Numerical(format!("epidemic log-likelihood evaluated to {v}")));
    }
    Ok(v)
}

pub(crate) fn draw_betas<F: Real, R: Rng + ?Sized>(
    params: &EpiKernelParams<F>,
    n_blocks: usize,
    rng: &mut R,
) -> Result<Vec<Vec<F>>> {
    let gamma = Gamma::new(params.a0.as_f64(), 1.0 / params.b0.as_f64())
        .map_err(|e| Error::Domain(format!("invalid Gamma rate prior: {e}")))?;
    Ok((0..params.mc_draws)
        .map(|_| (0..n_blocks).map(|_| F::of(gamma.sample(rng))).collect())
        .collect())
}

/// Replicate `r` of a frozen stream draws its rates from its own generator.
fn frozen_betas<F: Real>(params: &EpiKernelParams<F>, n_blocks: usize, seed: u64) -> Result<Vec<Vec<F>>> {
    let gamma = Gamma::new(params.a0.as_f64(), 1.0 / params.b0.as_f64())
        .map_err(|e| Error::Domain(format!("invalid Gamma rate prior: {e}")))?;
    Ok((0..params.mc_draws)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..n_blocks).map(|_| F::of(gamma.sample(&mut rng))).collect()
        })
        .collect())
}

/// Rates keyed by `(key, replicate, block start)`. Each evaluation still sees
/// i.i.d. Gamma draws, but orders evaluated under one key share the draws of
/// every block that starts on the same day.
pub fn keyed_betas<F: Real>(params: &EpiKernelParams<F>, order: &LatentOrder, key: u64) -> Result<Vec<Vec<F>>> {
    let gamma = Gamma::new(params.a0.as_f64(), 1.0 / params.b0.as_f64())
        .map_err(|e| Error::Domain(format!("invalid Gamma rate prior: {e}")))?;
    let starts: Vec<u64> = order.block_ranges().iter().map(|r| r.start as u64).collect();
    Ok((0..params.mc_draws)
        .map(|r| {
            starts
                .iter()
                .map(|&t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(key ^ (t + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    rng.set_stream(r as u64);
                    F::of(gamma.sample(&mut rng))
                })
                .collect()
        })
        .collect())
}

/// Monte Carlo log-likelihood of the counts under `order`, with fresh rate
/// draws from `rng`.
pub fn epi_order_loglik<F: Real, R: Rng + ?Sized>(
    counts: &EpiCounts,
    order: &LatentOrder,
    state: &EpiLatentState<F>,
    params: &EpiKernelParams<F>,
    rng: &mut R,
) -> Result<F> {
    check_lengths(counts, order)?;
    let betas = draw_betas(params, order.n_blocks(), rng)?;
    epi_loglik_given_betas(counts, order, state, params, &betas)
}

/// One Metropolis-Hastings step on `I0` given the proposed value and
/// `ln u`; the target is the likelihood times a Uniform(0,1) prior, with the
/// walk on the logit scale.
pub fn i0_step<F: Real, L>(state: EpiLatentState<F>, proposed: F, log_u: F, mut loglik: L) -> (EpiLatentState<F>, bool)
where
    L: FnMut(F) -> Result<F>,
{
    if proposed == state.i0 {
        return (state, true);
    }
    if !(proposed > F::zero() && proposed < F::one()) {
        return (state, false);
    }
    let (cur, prop) = match (loglik(state.i0), loglik(proposed)) {
        (Ok(c), Ok(p)) => (c, p),
        // a failed proposal evaluation is a rejection
        (Ok(_), Err(_)) => return (state, false),
        (Err(_), Ok(_)) => return (EpiLatentState { i0: proposed }, true),
        (Err(_), Err(_)) => return (state, false),
    };
    let jac = |x: F| x.ln() + (F::one() - x).ln();
    let log_ratio = prop - cur + jac(proposed) - jac(state.i0);
    if log_u < log_ratio {
        (EpiLatentState { i0: proposed }, true)
    } else {
        (state, false)
    }
}

/// Random-walk update of `I0` on the logit scale with fresh likelihood draws.
pub fn update_i0<F: Real, R: Rng + ?Sized>(
    counts: &EpiCounts,
    order: &LatentOrder,
    state: EpiLatentState<F>,
    params: &EpiKernelParams<F>,
    rng: &mut R,
) -> (EpiLatentState<F>, bool) {
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let proposed = expit(logit(state.i0) + F::of(z) * params.i0_proposal_var.sqrt());
    let log_u = F::of(rng.random::<f64>().ln());
    i0_step(state, proposed, log_u, |i0| {
        epi_order_loglik(counts, order, &EpiLatentState { i0 }, params, rng)
    })
}

/// Count data with its prior, current `I0`, and optionally a frozen replicate
/// stream. With a frozen stream the likelihood is a deterministic function of
/// `(order, I0)`.
#[derive(Clone, Debug)]
pub struct EpiKernel<F> {
    counts: EpiCounts,
    params: EpiKernelParams<F>,
    state: EpiLatentState<F>,
    frozen_seed: Option<u64>,
}

impl<F: Real> EpiKernel<F> {
    pub fn new(counts: EpiCounts, params: EpiKernelParams<F>, state: EpiLatentState<F>) -> Result<Self> {
        params.validate()?;
        EpiLatentState::new(state.i0)?;
        Ok(Self {
            counts,
            params,
            state,
            frozen_seed: None,
        })
    }

    /// Reuses the same replicate rates on every evaluation.
    pub fn with_frozen_replicates(mut self, seed: u64) -> Self {
        self.frozen_seed = Some(seed);
        self
    }

    pub fn counts(&self) -> &EpiCounts {
        &self.counts
    }

    pub fn params(&self) -> &EpiKernelParams<F> {
        &self.params
    }

    pub fn state(&self) -> EpiLatentState<F> {
        self.state
    }

    pub fn set_state(&mut self, state: EpiLatentState<F>) {
        self.state = state;
    }

    /// A replicate key for one comparison; frozen streams need none.
    fn draw_key<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.frozen_seed {
            Some(_) => 0,
            None => rng.random(),
        }
    }

    fn loglik_keyed(&self, order: &LatentOrder, i0: F, key: u64) -> Result<F> {
        check_lengths(&self.counts, order)?;
        let betas = match self.frozen_seed {
            Some(seed) => frozen_betas(&self.params, order.n_blocks(), seed)?,
            None => keyed_betas(&self.params, order, key)?,
        };
        epi_loglik_given_betas(&self.counts, order, &EpiLatentState { i0 }, &self.params, &betas)
    }

    pub fn loglik_at<R: Rng + ?Sized>(&self, order: &LatentOrder, i0: F, rng: &mut R) -> Result<F> {
        let key = self.draw_key(rng);
        self.loglik_keyed(order, i0, key)
    }

    /// `loglik(to) - loglik(from)` with both estimates on common replicates.
    pub fn loglik_difference<R: Rng + ?Sized>(&self, from: &LatentOrder, to: &LatentOrder, rng: &mut R) -> Result<F> {
        let key = self.draw_key(rng);
        let i0 = self.state.i0;
        Ok(self.loglik_keyed(to, i0, key)? - self.loglik_keyed(from, i0, key)?)
    }

    pub fn update_i0<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> bool {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let proposed = expit(logit(self.state.i0) + F::of(z) * self.params.i0_proposal_var.sqrt());
        let log_u = F::of(rng.random::<f64>().ln());
        let key = self.draw_key(rng);
        let (state, accepted) = i0_step(self.state, proposed, log_u, |i0| self.loglik_keyed(order, i0, key));
        self.state = state;
        accepted
    }
}
