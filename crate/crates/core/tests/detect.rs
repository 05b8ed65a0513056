mod oracles;

use cpclust::detect::{update_delta, update_sigma};
use cpclust::{
    detect_cp, order_loglik_ts, DetectConfig, EpiCounts, EpiKernel, EpiKernelParams, EpiLatentState,
    LatentOrder, MultiTsParams, OrderKernel, PriorParams, SeriesView, TsKernel, TsParams, UniTsParams, UpdateFlags,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

fn prior(sigma: f64, delta: f64) -> PriorParams<f64> {
    PriorParams::new(sigma, delta, 1.0, 1.0, 0.1).unwrap()
}

fn uni(phi: f64) -> UniTsParams<f64> {
    UniTsParams { a: 1.0, b: 1.0, c: 1.0, phi, phi_proposal_var: 0.01 }
}

fn fixed_config(iterations: usize, seed: u64) -> DetectConfig {
    let mut cfg = DetectConfig::new(iterations, 1000, 0.5, seed);
    cfg.updates = UpdateFlags::none();
    cfg
}

fn step_series(len: usize, jump: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|t| if t < jump { 0.0 } else { 1.5 } + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[test]
fn univariate_chain_matches_enumeration() {
    let p = prior(0.3, 1.0);
    let series = SeriesView::univariate(step_series(6, 3, 1)).unwrap();
    let mut kernel = TsKernel::new(series, TsParams::Uni(uni(0.2))).unwrap();
    let exact = oracles::exact_posterior(&mut kernel, &p);
    let trace = detect_cp(&mut kernel, &p, &fixed_config(200_000, 4)).unwrap();
    let tv = oracles::total_variation(&trace.orders, &exact);
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn multivariate_chain_matches_enumeration() {
    let p = prior(0.5, 0.5);
    let rows = vec![step_series(6, 2, 2), step_series(6, 4, 3)];
    let series = SeriesView::from_rows(&rows).unwrap();
    let params = MultiTsParams {
        m0: vec![0.0, 0.0],
        k0: 1.0,
        nu0: 4.0,
        s0: vec![1.0, 0.2, 0.2, 1.0],
        phi: 0.3,
        phi_proposal_var: 0.01,
    };
    let mut kernel = TsKernel::new(series, TsParams::Multi(params)).unwrap();
    let exact = oracles::exact_posterior(&mut kernel, &p);
    let trace = detect_cp(&mut kernel, &p, &fixed_config(200_000, 5)).unwrap();
    let tv = oracles::total_variation(&trace.orders, &exact);
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn epidemic_chain_matches_enumeration_with_frozen_replicates() {
    let p = prior(0.3, 1.0);
    let counts = EpiCounts::new(vec![4, 9, 15, 6, 3, 2]).unwrap();
    let params = EpiKernelParams { mc_draws: 20, xi: 0.125, a0: 2.0, b0: 4.0, i0_proposal_var: 0.1, ode_step: 0.1 };
    let mut kernel = EpiKernel::new(counts, params, EpiLatentState::new(0.01).unwrap())
        .unwrap()
        .with_frozen_replicates(3);
    let exact = oracles::exact_posterior(&mut kernel, &p);
    let trace = detect_cp(&mut kernel, &p, &fixed_config(200_000, 6)).unwrap();
    let tv = oracles::total_variation(&trace.orders, &exact);
    assert!(tv <= 0.05, "total variation {tv}");
}

#[test]
fn constant_series_prefers_one_block() {
    let p = prior(0.3, 0.3);
    let mut small = TsKernel::new(SeriesView::univariate(vec![0.0; 10]).unwrap(), TsParams::Uni(uni(0.5))).unwrap();
    let exact = oracles::exact_posterior(&mut small, &p);
    let single = LatentOrder::single_block(10);
    assert!(exact.values().all(|&v| v <= exact[&single]));
    assert!(exact[&single] > 0.5);

    let mut kernel = TsKernel::new(SeriesView::univariate(vec![0.0; 20]).unwrap(), TsParams::Uni(uni(0.5))).unwrap();
    let trace = detect_cp(&mut kernel, &p, &fixed_config(20_000, 7)).unwrap();
    let single = LatentOrder::single_block(20);
    let share = trace.orders.iter().filter(|o| **o == single).count() as f64 / trace.n_draws() as f64;
    assert!(share > 0.5, "single-block share {share}");
}

/// Posterior mean of a density known up to a constant on `[lo, hi]`, by the
/// composite Simpson rule.
fn grid_mean(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
    let max = logs.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m) = (0.0, 0.0);
    for (i, (&x, &l)) in xs.iter().zip(&logs).enumerate() {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let f = (l - max).exp();
        z += w * f;
        m += w * f * x;
    }
    m / z
}

fn eppf_oracle(sizes: &[usize], sigma: f64, delta: f64) -> f64 {
    let t: usize = sizes.iter().sum();
    let m = sizes.len();
    let mut v = (1..m).map(|j| (delta + j as f64 * sigma).ln()).sum::<f64>();
    v -= ln_gamma(delta + t as f64) - ln_gamma(delta + 1.0);
    for &n in sizes {
        v += ln_gamma(n as f64 - sigma) - ln_gamma(1.0 - sigma);
    }
    v
}

#[test]
fn sigma_chain_matches_quadrature() {
    let order = LatentOrder::from_block_sizes(&[8, 12, 10]).unwrap();
    let mut state: PriorParams<f64> = PriorParams::new(0.5, 1.0, 1.0, 1.0, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (steps, burn) = (400_000, 1000);
    let mut sum = 0.0;
    for i in 0..steps {
        state = update_sigma(&order, state, &mut rng).0;
        if i >= burn {
            sum += state.sigma;
        }
    }
    let mean = sum / (steps - burn) as f64;
    let oracle = grid_mean(|s| eppf_oracle(&order.block_sizes(), s, 1.0), 1e-9, 1.0 - 1e-9, 20_000);
    assert!((mean - oracle).abs() < 0.02, "chain {mean} quadrature {oracle}");
}

#[test]
fn delta_chain_matches_quadrature() {
    let order = LatentOrder::single_block(15);
    let (c, d) = (2.0, 1.5);
    let mut state: PriorParams<f64> = PriorParams::new(0.3, 1.0, c, d, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (steps, burn) = (400_000, 1000);
    let mut sum = 0.0;
    for i in 0..steps {
        state = update_delta(&order, state, &mut rng).0;
        assert!(state.delta > 0.0);
        if i >= burn {
            sum += state.delta;
        }
    }
    let mean = sum / (steps - burn) as f64;
    let log_post = |x: f64| eppf_oracle(&[15], 0.3, x) + (c - 1.0) * x.ln() - d * x;
    let oracle = grid_mean(log_post, 1e-12, 60.0, 200_000);
    assert!((mean - oracle).abs() < 0.02, "chain {mean} quadrature {oracle}");
}

#[test]
fn delta_concentrates_under_a_tight_prior() {
    let order = LatentOrder::from_block_sizes(&[3, 4]).unwrap();
    let mut state: PriorParams<f64> = PriorParams::new(0.3, 2.0, 2e5, 1e5, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..2000 {
        state = update_delta(&order, state, &mut rng).0;
        assert!((state.delta - 2.0).abs() < 0.05, "delta {}", state.delta);
    }
}

/// `φ` posterior on the single-block order under its Uniform(0,1) prior.
fn phi_posterior(series: &SeriesView<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let order = LatentOrder::single_block(series.len());
    let xs: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
    let logs: Vec<f64> = xs
        .iter()
        .map(|&phi| order_loglik_ts(series, &order, &TsParams::Uni(uni(phi))).unwrap())
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    (xs, w.into_iter().map(|v| v / z).collect())
}

fn phi_chain_mean(series: &SeriesView<f64>, steps: usize, seed: u64) -> f64 {
    let order = LatentOrder::single_block(series.len());
    let mut kernel = TsKernel::new(series.clone(), TsParams::Uni(uni(0.5))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for i in 0..steps {
        kernel.update_local(&order, &mut rng).unwrap();
        if i >= 1000 {
            sum += kernel.phi();
        }
    }
    sum / (steps - 1000) as f64
}

fn ar1(len: usize, phi: f64, seed: u64) -> SeriesView<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![rng.sample::<f64, _>(StandardNormal)];
    for t in 1..len {
        let e: f64 = rng.sample(StandardNormal);
        y.push(phi * y[t - 1] + e);
    }
    SeriesView::univariate(y).unwrap()
}

#[test]
fn phi_posterior_on_white_noise() {
    let series = ar1(50, 0.0, 31);
    let (xs, w) = phi_posterior(&series, 4000);
    let below: f64 = xs.iter().zip(&w).filter(|(x, _)| **x < 0.3).map(|(_, w)| w).sum();
    assert!(below > 0.9, "quadrature mass below 0.3: {below}");
    let oracle: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum();
    let mean = phi_chain_mean(&series, 100_000, 32);
    assert!((mean - oracle).abs() < 0.02, "chain {mean} quadrature {oracle}");
}

#[test]
fn phi_posterior_on_autocorrelated_series() {
    let series = ar1(50, 0.9, 33);
    let (xs, w) = phi_posterior(&series, 4000);
    let oracle: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum();
    assert!(oracle > 0.6, "quadrature mean {oracle}");
    let mean = phi_chain_mean(&series, 100_000, 34);
    assert!(mean > 0.6 && (mean - oracle).abs() < 0.02, "chain {mean} quadrature {oracle}");
}
