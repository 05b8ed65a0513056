//! Independent reference computations shared by the test targets.

#![allow(dead_code)]

use std::collections::HashMap;

use cpclust::{
    block_loglik_multi, block_loglik_uni, log_eppf_order, LatentOrder, MultiTsParams, OrderKernel, PriorParams,
    SeriesView, UniTsParams,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

/// Panelled adaptive Gauss-Kronrod, tolerance relative to a first pass.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, panels: usize, rel: f64) -> f64 {
    let w = (b - a) / panels as f64;
    let edges: Vec<(f64, f64)> = (0..panels).map(|i| (a + i as f64 * w, a + (i + 1) as f64 * w)).collect();
    let rough: f64 = edges.iter().map(|&(l, r)| gk15(f, l, r).0.abs()).sum();
    let tol = rel * rough / panels as f64;
    edges.iter().map(|&(l, r)| adaptive(f, l, r, tol, 20)).sum()
}

/// Regression form of an AR(1) block: responses `z` and covariates `x` for `μ`.
pub fn regression(y: &[f64], start: usize, end: usize, phi: f64) -> (Vec<f64>, Vec<f64>) {
    (start..end)
        .map(|t| {
            if t == 0 {
                (y[0], 1.0)
            } else {
                (y[t] - phi * y[t - 1], 1.0 - phi)
            }
        })
        .unzip()
}

fn ln_normal(x: f64, mean: f64, precision: f64) -> f64 {
    0.5 * (precision / (2.0 * std::f64::consts::PI)).ln() - 0.5 * precision * (x - mean).powi(2)
}

/// `ln ∫∫ Π N(z | xμ, 1/λ) N(μ | 0, 1/(cλ)) Ga(λ | a, b) dμ dλ` by nested
/// adaptive quadrature over `μ` and `u = ln λ`.
pub fn quadrature_marginal(z: &[f64], x: &[f64], a: f64, b: f64, c: f64) -> f64 {
    let log_joint = |mu: f64, u: f64| {
        let lam = u.exp();
        let mut s = ln_normal(mu, 0.0, c * lam);
        for (zt, xt) in z.iter().zip(x) {
            s += ln_normal(*zt, xt * mu, lam);
        }
        s + a * b.ln() - ln_gamma(a) + (a - 1.0) * u - b * lam + u
    };
    let sxx: f64 = c + x.iter().map(|v| v * v).sum::<f64>();
    let sxz: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
    let mu_star = sxz / sxx;
    let profile = |u: f64| log_joint(mu_star, u);
    let (mut u_best, mut best) = (0.0, f64::NEG_INFINITY);
    let mut u = -30.0;
    while u <= 30.0 {
        let v = profile(u);
        if v > best {
            best = v;
            u_best = u;
        }
        u += 0.01;
    }
    let mut lo = u_best;
    while profile(lo) > best - 80.0 {
        lo -= 0.25;
    }
    let mut hi = u_best;
    while profile(hi) > best - 80.0 {
        hi += 0.25;
    }
    let mut outer = |u: f64| {
        let sd = 1.0 / (u.exp() * sxx).sqrt();
        let mut inner = |mu: f64| (log_joint(mu, u) - best).exp();
        integrate(&mut inner, mu_star - 14.0 * sd, mu_star + 14.0 * sd, 8, 1e-12)
    };
    best + integrate(&mut outer, lo, hi, 32, 1e-10).ln()
}

/// `Λ ~ IW(ν, S)` through a Bartlett draw of `Λ⁻¹ ~ W(ν, S⁻¹)`.
pub fn inverse_wishart(nu: f64, chol_s_inv: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let d = chol_s_inv.nrows();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = ChiSquared::new(nu - i as f64).unwrap().sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = chol_s_inv * a;
    let w = &la * la.transpose();
    w.try_inverse().unwrap()
}

pub fn mvn_ln_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov_chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let d = x.len() as f64;
    let r = x - mean;
    let sol = cov_chol.solve(&r);
    let log_det: f64 = 2.0 * cov_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + r.dot(&sol))
}

/// Closed-form and quadrature log marginals on 20 random univariate blocks.
pub fn univariate_marginal_cases(seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|case| {
            let len = 10;
            let scale = rng.random_range(0.3..2.0);
            let shift = rng.random_range(-1.0..1.0);
            let y: Vec<f64> = (0..len)
                .map(|_| shift + scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let start = if case % 4 == 0 { 0 } else { rng.random_range(0..len - 1) };
            let end = rng.random_range(start + 1..=len);
            let p = UniTsParams {
                a: rng.random_range(0.5..3.0),
                b: rng.random_range(0.2..2.0),
                c: rng.random_range(0.2..3.0),
                phi: rng.random_range(0.0..0.9),
                phi_proposal_var: 0.1,
            };
            let s = SeriesView::univariate(y.clone()).unwrap();
            let closed = block_loglik_uni(&s, start..end, &p).unwrap();
            let (z, x) = regression(&y, start, end, p.phi);
            (closed, quadrature_marginal(&z, &x, p.a, p.b, p.c))
        })
        .collect()
}

/// Monte Carlo estimates of `exp(marginal - closed form)` with their standard
/// errors on 10 random multivariate blocks.
pub fn multivariate_marginal_cases(seed: u64, draws: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|case| {
            let d = 2 + case % 2;
            let len = 6;
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let start = if case % 3 == 0 { 0 } else { rng.random_range(0..len - 1) };
            let end = (start + 1 + case % 3).min(len);
            let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
            let s0 = &b * b.transpose() + DMatrix::identity(d, d) * rng.random_range(0.5..2.0);
            let m0: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let p = MultiTsParams {
                m0: m0.clone(),
                k0: rng.random_range(0.5..2.0),
                nu0: d as f64 + 1.0 + rng.random_range(0.5..3.0),
                s0: s0.iter().copied().collect(),
                phi: rng.random_range(0.0..0.8),
                phi_proposal_var: 0.1,
            };
            let series = SeriesView::from_rows(&rows).unwrap();
            let closed = block_loglik_multi(&series, start..end, &p).unwrap();

            let obs: Vec<(DVector<f64>, f64)> = (start..end)
                .map(|t| {
                    let cur = DVector::from_fn(d, |k, _| rows[k][t]);
                    if t == 0 {
                        (cur, 1.0)
                    } else {
                        let prev = DVector::from_fn(d, |k, _| rows[k][t - 1]);
                        (cur - prev * p.phi, 1.0 - p.phi)
                    }
                })
                .collect();
            let chol_s_inv = s0.clone().try_inverse().unwrap().cholesky().unwrap().l();
            let m0 = DVector::from_vec(m0);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..draws {
                let lambda = inverse_wishart(p.nu0, &chol_s_inv, &mut rng);
                let chol = lambda.clone().cholesky().unwrap();
                let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mu = &m0 + chol.l() * eps / p.k0.sqrt();
                let ll: f64 = obs.iter().map(|(z, x)| mvn_ln_pdf(z, &(&mu * *x), &chol)).sum();
                let w = (ll - closed).exp();
                sum += w;
                sum_sq += w * w;
            }
            let mean = sum / draws as f64;
            (mean, ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt())
        })
        .collect()
}

/// The order prior written with Gamma functions only.
pub fn eppf_oracle(sizes: &[usize], sigma: f64, delta: f64) -> f64 {
    let t: usize = sizes.iter().sum();
    let m = sizes.len();
    let mut v = ln_gamma(t as f64 + 1.0) - ln_gamma(m as f64 + 1.0);
    v += (1..m).map(|j| (delta + j as f64 * sigma).ln()).sum::<f64>();
    v -= ln_gamma(delta + t as f64) - ln_gamma(delta + 1.0);
    for &n in sizes {
        v += ln_gamma(n as f64 - sigma) - ln_gamma(1.0 - sigma) - ln_gamma(n as f64 + 1.0);
    }
    v
}

/// Exact order posterior by enumeration, keyed by order.
pub fn exact_posterior<K: OrderKernel<f64>>(kernel: &mut K, prior: &PriorParams<f64>) -> HashMap<LatentOrder, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logs: Vec<(LatentOrder, f64)> = LatentOrder::enumerate(kernel.len())
        .map(|o| {
            let v = log_eppf_order(&o, prior) + kernel.order_loglik(&o, &mut rng).unwrap();
            (o, v)
        })
        .collect();
    let max = logs.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|(_, v)| (v - max).exp()).sum();
    logs.into_iter().map(|(o, v)| (o, (v - max).exp() / z)).collect()
}

pub fn total_variation(draws: &[LatentOrder], exact: &HashMap<LatentOrder, f64>) -> f64 {
    let mut freq: HashMap<&LatentOrder, f64> = HashMap::new();
    for d in draws {
        *freq.entry(d).or_default() += 1.0 / draws.len() as f64;
    }
    0.5 * exact.iter().map(|(o, p)| (freq.get(o).copied().unwrap_or(0.0) - p).abs()).sum::<f64>()
}

/// Root of `z = 1 - exp(-r0 z)` in `(0, 1)` by bisection.
pub fn final_size(r0: f64) -> f64 {
    let (mut lo, mut hi) = (1e-9, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - (1.0 - (-r0 * mid).exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
