mod oracles;

use cpclust::{
    bin_daily, epi_order_loglik, sim_epi_data, solve_sir, EpiCounts, EpiKernel, EpiKernelParams, EpiLatentState,
    EpiSimConfig, LatentOrder, OrderKernel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim(beta: f64, xi: f64, max_time: f64, seed: u64) -> Vec<f64> {
    let days = max_time.ceil() as usize;
    sim_epi_data(&EpiSimConfig { s0: 10_000, i0: 50, max_time, beta_per_day: vec![beta; days], xi, seed }).unwrap()
}

#[test]
fn attack_rate_matches_final_size() {
    let xi = 0.125;
    let r0 = 1.6;
    let runs = 200;
    let mean = (0..runs)
        .map(|seed| (sim(r0 * xi, xi, 1500.0, seed).len() + 50) as f64 / 10_000.0)
        .sum::<f64>()
        / runs as f64;
    let z = oracles::final_size(r0);
    assert!((mean - z).abs() <= 0.05, "attack rate {mean}, final size {z}");
}

#[test]
fn doubling_all_rates_doubles_first_day_events() {
    let runs = 500;
    let day_one = |beta: f64, xi: f64| {
        (0..runs)
            .map(|seed| sim(beta, xi, 1.0, 1000 + seed).len() as f64)
            .collect::<Vec<_>>()
    };
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    // β = ξ keeps the expected prevalence flat over the first day
    let (m1, v1) = stats(&day_one(0.2, 0.2));
    let (m2, v2) = stats(&day_one(0.4, 0.4));
    let ratio = m2 / m1;
    let se = ratio * (v1 / (m1 * m1) + v2 / (m2 * m2)).sqrt();
    assert!((ratio - 2.0).abs() <= 3.0 * se, "ratio {ratio} ± {se}");
}

#[test]
fn binning_matches_naive_recount() {
    let times = sim(0.3, 0.125, 120.0, 9);
    assert!(times.len() > 1000);
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(times.iter().all(|&t| t > 0.0 && t <= 120.0));
    let counts = bin_daily(&times, 120).unwrap();
    for (t, &c) in counts.counts().iter().enumerate() {
        let naive = times.iter().filter(|&&x| x >= t as f64 && x < (t + 1) as f64).count() as u64;
        assert_eq!(c, naive, "day {t}");
    }
}

#[test]
fn simulation_is_deterministic_per_seed() {
    assert_eq!(sim(0.3, 0.125, 50.0, 4), sim(0.3, 0.125, 50.0, 4));
    assert_ne!(sim(0.3, 0.125, 50.0, 4), sim(0.3, 0.125, 50.0, 5));
}

#[test]
fn sir_path_conserves_population() {
    let betas: Vec<f64> = (0..150).map(|d| if d < 60 { 0.25 } else { 0.6 }).collect();
    let path = solve_sir(&betas, 0.125, 0.005, 0.1).unwrap();
    for t in 0..=150 {
        let total = path.s[t] + path.i[t] + path.r[t];
        assert!((total - 1.0).abs() < 1e-8, "day {t}: {total}");
        if t > 0 {
            assert!(path.s[t] <= path.s[t - 1]);
        }
    }
}

fn params(mc_draws: usize, i0_proposal_var: f64) -> EpiKernelParams<f64> {
    EpiKernelParams { mc_draws, xi: 0.125, a0: 3.0, b0: 10.0, i0_proposal_var, ode_step: 0.1 }
}

#[test]
fn wide_i0_proposals_are_mostly_rejected() {
    let counts = EpiCounts::new(vec![5; 50]).unwrap();
    let mut kernel = EpiKernel::new(counts, params(10, 100.0), EpiLatentState::new(0.01).unwrap()).unwrap();
    let order = LatentOrder::single_block(50);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut accepted = 0;
    for _ in 0..1000 {
        let before = kernel.local_value();
        let flag = kernel.update_local(&order, &mut rng).unwrap();
        assert_eq!(flag, kernel.local_value() != before);
        accepted += usize::from(flag);
    }
    assert!(accepted < 500, "accepted {accepted} of 1000");
}

#[test]
fn more_replicates_reduce_likelihood_variance() {
    let times = sim(0.3, 0.125, 80.0, 13);
    let counts = bin_daily(&times, 80).unwrap();
    let order = LatentOrder::from_change_points(80, &[41]).unwrap();
    let state = EpiLatentState::new(0.005).unwrap();
    let variance = |m: usize| {
        let v: Vec<f64> = (0..50)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                epi_order_loglik(&counts, &order, &state, &params(m, 0.1), &mut rng).unwrap()
            })
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (small, large) = (variance(10), variance(100));
    assert!(large < small, "variance at M=100 {large}, at M=10 {small}");
}
