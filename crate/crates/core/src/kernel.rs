//! The likelihood interface the samplers run against, with implementations
//! for the time-series and epidemic kernels.

use rand::Rng;

use crate::epi::EpiKernel;
use crate::error::Result;
use crate::orders::LatentOrder;
use crate::scalar::Real;
use crate::ts::TsKernel;

/// Which observation-level parameter a kernel updates between order moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalParam {
    Phi,
    I0,
}

/// Log-likelihood of one observation as a function of its latent order.
///
/// `rng` is only consumed by kernels that integrate by simulation.
pub trait OrderKernel<F: Real> {
    /// Number of time points.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn order_loglik<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<F>;

    /// `loglik(to) - loglik(from)`.
    fn loglik_difference<R: Rng + ?Sized>(&mut self, from: &LatentOrder, to: &LatentOrder, rng: &mut R) -> Result<F> {
        let b = self.order_loglik(to, rng)?;
        let a = self.order_loglik(from, rng)?;
        Ok(b - a)
    }

    fn local_param(&self) -> LocalParam;

    fn local_value(&self) -> F;

    /// One Metropolis-Hastings update of the local parameter given `order`;
    /// returns whether the proposal was accepted.
    fn update_local<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<bool>;
}

/// Metropolis-Hastings step for `φ` under a Uniform(0,1) prior, given the
/// proposed value and `ln u`.
pub fn phi_step<F: Real, L>(current: F, proposed: F, log_u: F, mut loglik: L) -> Result<(F, bool)>
where
    L: FnMut(F) -> Result<F>,
{
    if proposed == current {
        return Ok((current, true));
    }
    if !(proposed > F::zero() && proposed < F::one()) {
        return Ok((current, false));
    }
    let cur = loglik(current)?;
    let prop = match loglik(proposed) {
        Ok(v) => v,
        Err(_) => return Ok((current, false)),
    };
    if log_u < prop - cur {
        Ok((proposed, true))
    } else {
        Ok((current, false))
    }
}

impl<F: Real> OrderKernel<F> for TsKernel<F> {
    fn len(&self) -> usize {
        self.series().len()
    }

    fn order_loglik<R: Rng + ?Sized>(&mut self, order: &LatentOrder, _rng: &mut R) -> Result<F> {
        TsKernel::order_loglik(self, order)
    }

    fn loglik_difference<R: Rng + ?Sized>(&mut self, from: &LatentOrder, to: &LatentOrder, _rng: &mut R) -> Result<F> {
        TsKernel::loglik_difference(self, from, to)
    }

    fn local_param(&self) -> LocalParam {
        LocalParam::Phi
    }

    fn local_value(&self) -> F {
        self.phi()
    }

    fn update_local<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<bool> {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let current = self.phi();
        let proposed = current + F::of(z) * self.params().phi_proposal_var().sqrt();
        let log_u = F::of(rng.random::<f64>().ln());
        let cur_ll = TsKernel::order_loglik(self, order)?;
        let (series, params) = (self.series(), self.params());
        let (phi, accepted) = phi_step(current, proposed, log_u, |phi| {
            if phi == current {
                Ok(cur_ll)
            } else {
                crate::ts::order_loglik_ts(series, order, &params.with_phi(phi))
            }
        })?;
        self.set_phi(phi)?;
        Ok(accepted)
    }
}

impl<F: Real> OrderKernel<F> for EpiKernel<F> {
    fn len(&self) -> usize {
        self.counts().len()
    }

    fn order_loglik<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<F> {
        let i0 = self.state().i0;
        self.loglik_at(order, i0, rng)
    }

    fn loglik_difference<R: Rng + ?Sized>(&mut self, from: &LatentOrder, to: &LatentOrder, rng: &mut R) -> Result<F> {
        EpiKernel::loglik_difference(self, from, to, rng)
    }

    fn local_param(&self) -> LocalParam {
        LocalParam::I0
    }

    fn local_value(&self) -> F {
        self.state().i0
    }

    fn update_local<R: Rng + ?Sized>(&mut self, order: &LatentOrder, rng: &mut R) -> Result<bool> {
        Ok(self.update_i0(order, rng))
    }
}
