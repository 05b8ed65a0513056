//! Exact stochastic SIR simulation with a daily piecewise-constant infection
//! rate (Doob-Gillespie).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::epi::EpiCounts;
use crate::error::{config_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EpiSimConfig {
    /// Population size.
    pub s0: u64,
    /// Initially infected individuals.
    pub i0: u64,
    pub max_time: f64,
    /// Infection rate for each day; day `d` covers `[d, d + 1)`.
    pub beta_per_day: Vec<f64>,
    pub xi: f64,
    pub seed: u64,
}

impl EpiSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s0 == 0 {
            return config_err("s0 must be positive");
        }
        if self.i0 > self.s0 {
            return config_err(format!("i0 ({}) exceeds s0 ({})", self.i0, self.s0));
        }
        if !(self.max_time > 0.0) || !self.max_time.is_finite() {
            return config_err(format!("max_time must be positive, got {}", self.max_time));
        }
        let days = self.max_time.ceil() as usize;
        if self.beta_per_day.len() < days {
            return config_err(format!(
                "beta has {} daily values but max_time needs {days}",
                self.beta_per_day.len()
            ));
        }
        if let Some(b) = self.beta_per_day.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return config_err(format!("beta values must be non-negative, got {b}"));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return config_err(format!("xi must be positive, got {}", self.xi));
        }
        Ok(())
    }
}

/// Sorted infection times in `(0, max_time]`. Infection fires at rate
/// `β(t) S I / S0` and recovery at rate `ξ I`, with `S` starting at
/// `S0 - I0`.
pub fn sim_epi_data(cfg: &EpiSimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.s0 as f64;
    let (mut s, mut i) = (cfg.s0 - cfg.i0, cfg.i0);
    let mut t = 0.0_f64;
    let mut times = Vec::new();
    while i > 0 && t < cfg.max_time {
        let day = t.floor() as usize;
        let boundary = ((day + 1) as f64).min(cfg.max_time);
        let beta = cfg.beta_per_day[day];
        let infect = beta * s as f64 * i as f64 / n;
        let recover = cfg.xi * i as f64;
        let total = infect + recover;
        let wait = -(1.0 - rng.random::<f64>()).ln() / total;
        if t + wait >= boundary {
            // no event before the rate changes; memorylessness lets us restart
            t = boundary;
            continue;
        }
        t += wait;
        if rng.random::<f64>() * total < infect {
            s -= 1;
            i += 1;
            if t > 0.0 {
                times.push(t);
            }
        } else {
            i -= 1;
        }
    }
    Ok(times)
}

/// `counts[t] = #{times in [t, t + 1)}` for zero-based days `t < len`.
pub fn bin_daily_raw(times: &[f64], len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; len];
    for &x in times {
        let d = x.floor();
        if d >= 0.0 && (d as usize) < len {
            counts[d as usize] += 1;
        }
    }
    counts
}

/// Daily counts as an [`EpiCounts`]; fails when no time falls in range.
pub fn bin_daily(times: &[f64], len: usize) -> Result<EpiCounts> {
    EpiCounts::new(bin_daily_raw(times, len))
}
