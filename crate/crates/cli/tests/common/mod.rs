//! Synthetic data sets mirroring the generators of the worked examples.

#![allow(dead_code)]

use cpclust::{bin_daily, sim_epi_data, EpiCounts, EpiSimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const PHI: f64 = 0.1;

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).unwrap().sample(rng)
}

/// AR(1) segment continuing from `prev`, innovation sd `(1 - φ²) s`.
fn ar_segment(rng: &mut ChaCha8Rng, out: &mut Vec<f64>, len: usize, mean: f64, s: f64) {
    for _ in 0..len {
        let prev = *out.last().unwrap();
        let v = PHI * prev + (1.0 - PHI) * mean + normal(rng, 0.0, (1.0 - PHI * PHI) * s);
        out.push(v);
    }
}

/// Segment restarted at `(start_mean, start_sd)` and continued around `mean`.
fn segment(rng: &mut ChaCha8Rng, out: &mut Vec<f64>, len: usize, start_mean: f64, start_sd: f64, mean: f64, s: f64) {
    out.push(normal(rng, start_mean, start_sd));
    ar_segment(rng, out, len - 1, mean, s);
}

/// Univariate series with change points at 51 and 151.
pub fn uni_detect(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(200);
    segment(&mut rng, &mut y, 50, 0.0, 0.13, 0.0, 0.13);
    segment(&mut rng, &mut y, 100, 1.5, 0.15, 1.5, 0.15);
    segment(&mut rng, &mut y, 50, 0.0, 0.12, 0.0, 0.12);
    y
}

/// Three-dimensional series with change points at 51 and 151, one row per
/// dimension.
pub fn multi_detect(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = [[1.20, 1.15, 1.10], [0.06, 0.07, 0.08], [0.72, 0.69, 0.75]];
    let sds = [[0.12, 0.15, 0.14], [0.14, 0.12, 0.10], [0.13, 0.10, 0.14]];
    let lens = [50, 100, 50];
    let mut rows = vec![Vec::new(); 3];
    for b in 0..3 {
        for (k, row) in rows.iter_mut().enumerate() {
            row.push(normal(&mut rng, means[b][k], sds[b][k]));
        }
        for _ in 1..lens[b] {
            for (k, row) in rows.iter_mut().enumerate() {
                ar_segment(&mut rng, row, 1, means[b][k], sds[b][k]);
            }
        }
    }
    rows
}

pub fn epi_counts(s0: u64, i0: u64, betas: Vec<f64>, seed: u64) -> EpiCounts {
    let len = betas.len();
    let cfg = EpiSimConfig {
        s0,
        i0,
        max_time: len as f64,
        beta_per_day: betas,
        xi: 1.0 / 8.0,
        seed,
    };
    bin_daily(&sim_epi_data(&cfg).unwrap(), len).unwrap()
}

/// Daily infections with the rate switching from 0.2 to 0.55 at day 131.
pub fn epi_detect(seed: u64) -> EpiCounts {
    let mut betas = vec![0.2; 130];
    betas.extend(vec![0.55; 70]);
    epi_counts(10_000, 50, betas, seed)
}

/// Five univariate series: three with change points at 51 and 151, two with
/// one at 26.
pub fn uni_clust(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = [(0.100, 0.100, 0.230, 0.225), (0.125, 0.125, 0.225, 0.235), (0.175, 0.110, 0.240, 0.100)];
    let mut out = Vec::new();
    for &(s_init, s1, s2, s3) in &first {
        let mut y = vec![normal(&mut rng, 0.0, s_init)];
        ar_segment(&mut rng, &mut y, 49, 0.0, s1);
        segment(&mut rng, &mut y, 100, 1.0, s2, 1.0, s2);
        segment(&mut rng, &mut y, 50, 0.5, s3, 0.0, s3);
        out.push(y);
    }
    for &(s1, s2) in &[(0.135, 0.165), (0.155, 0.185)] {
        let mut y = Vec::new();
        segment(&mut rng, &mut y, 25, 0.0, s1, 0.0, s1);
        segment(&mut rng, &mut y, 175, 1.0, s2, 1.0, s2);
        out.push(y);
    }
    out
}

/// Five bivariate series (rows are dimensions) grouped as in [`uni_clust`].
pub fn multi_clust(seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bivariate = |rng: &mut ChaCha8Rng, rows: &mut [Vec<f64>; 2], len: usize, mean: f64, s: f64| {
        for _ in 0..len {
            for row in rows.iter_mut() {
                ar_segment(rng, row, 1, mean, s);
            }
        }
    };
    let mut out = Vec::new();
    for &(s_init, s1, s2, s3) in &[(0.100, 0.100, 0.230, 0.225), (0.125, 0.125, 0.225, 0.235), (0.175, 0.110, 0.240, 0.100)] {
        let v = normal(&mut rng, 0.0, s_init);
        let mut rows = [vec![v], vec![v]];
        bivariate(&mut rng, &mut rows, 49, 0.0, s1);
        let v = normal(&mut rng, 1.0, s2);
        rows[0].push(v);
        rows[1].push(v);
        bivariate(&mut rng, &mut rows, 99, 1.0, s2);
        for row in rows.iter_mut() {
            row.push(normal(&mut rng, 0.5, s3));
        }
        bivariate(&mut rng, &mut rows, 49, 0.5, s3);
        out.push(rows.to_vec());
    }
    for &(s1, s2) in &[(0.135, 0.165), (0.155, 0.185)] {
        let v = normal(&mut rng, 1.0, s1);
        let mut rows = [vec![v], vec![v]];
        bivariate(&mut rng, &mut rows, 24, 1.0, s1);
        let v = normal(&mut rng, 0.5, s2);
        rows[0].push(v);
        rows[1].push(v);
        bivariate(&mut rng, &mut rows, 174, 0.5, s2);
        out.push(rows.to_vec());
    }
    out
}

/// Three epidemics: two switching at day 121, one at day 31.
pub fn epi_clust(seed: u64) -> Vec<EpiCounts> {
    let rates = [(0.211, 120, 0.55), (0.215, 120, 0.52), (0.193, 30, 0.53)];
    rates
        .iter()
        .enumerate()
        .map(|(i, &(b1, n1, b2))| {
            let mut betas = vec![b1; n1];
            betas.resize(200, b2);
            epi_counts(10_000, 20, betas, seed.wrapping_mul(31).wrapping_add(i as u64))
        })
        .collect()
}
