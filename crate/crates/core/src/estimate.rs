//! Point estimates from posterior draws of allocations.
//!
//! An allocation is a vector of labels; only equality of labels matters, so
//! latent orders and data partitions are handled alike. The estimate is the
//! retained draw with the smallest expected posterior loss.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::orders::LatentOrder;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Binder,
    /// Variation of information, in nats.
    Vi,
}

/// Co-assignment frequencies, row-major `n × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSimilarity {
    n: usize,
    psm: Vec<f64>,
}

impl PosteriorSimilarity {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.psm[u * self.n + v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psm
    }
}

fn check_draws(draws: &[Vec<usize>]) -> Result<usize> {
    let first = draws
        .first()
        .ok_or_else(|| Error::Domain("no posterior draws".into()))?;
    let n = first.len();
    if let Some(i) = draws.iter().position(|d| d.len() != n) {
        return Err(Error::Dimension(format!(
            "draw {i} has length {}, expected {n}",
            draws[i].len()
        )));
    }
    Ok(n)
}

/// Unique draws in order of first appearance with their multiplicities.
fn dedupe(draws: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, d) in draws.iter().enumerate() {
        match index.get(d.as_slice()) {
            Some(&k) => out[k].1 += 1,
            None => {
                index.insert(d, out.len());
                out.push((i, 1));
            }
        }
    }
    out
}

pub fn posterior_similarity(draws: &[Vec<usize>]) -> Result<PosteriorSimilarity> {
    let n = check_draws(draws)?;
    let mut counts = vec![0usize; n * n];
    for (first, mult) in dedupe(draws) {
        let d = &draws[first];
        for u in 0..n {
            for v in u + 1..n {
                if d[u] == d[v] {
                    counts[u * n + v] += mult;
                }
            }
        }
    }
    let total = draws.len() as f64;
    let mut psm = vec![0.0; n * n];
    for u in 0..n {
        psm[u * n + u] = 1.0;
        for v in u + 1..n {
            let p = counts[u * n + v] as f64 / total;
            psm[u * n + v] = p;
            psm[v * n + u] = p;
        }
    }
    Ok(PosteriorSimilarity { n, psm })
}

/// Expected equal-cost Binder loss of `candidate` under the similarity matrix.
pub fn binder_loss(candidate: &[usize], psm: &PosteriorSimilarity) -> Result<f64> {
    let n = psm.len();
    if candidate.len() != n {
        return Err(Error::Dimension(format!(
            "candidate has length {}, similarity matrix is {n} × {n}",
            candidate.len()
        )));
    }
    let mut loss = 0.0;
    for u in 0..n {
        let row = &psm.psm[u * n..(u + 1) * n];
        for v in u + 1..n {
            loss += if candidate[u] == candidate[v] { 1.0 - row[v] } else { row[v] };
        }
    }
    Ok(loss)
}

fn entropy_term(count: usize, n: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        let p = count as f64 / n;
        -p * p.ln()
    }
}

/// Runs of equal consecutive labels, when the allocation is contiguous.
fn runs(a: &[usize]) -> Option<Vec<usize>> {
    let mut seen = std::collections::HashSet::new();
    let mut ends = Vec::new();
    for t in 0..a.len() {
        if t + 1 == a.len() || a[t + 1] != a[t] {
            if !seen.insert(a[t]) {
                return None;
            }
            ends.push(t + 1);
        }
    }
    Some(ends)
}

fn vi_contiguous(a: &[usize], b: &[usize], n: f64) -> f64 {
    let h = |ends: &[usize]| {
        let mut prev = 0;
        ends.iter()
            .map(|&e| {
                let c = e - prev;
                prev = e;
                entropy_term(c, n)
            })
            .sum::<f64>()
    };
    // joint cells are the intervals between the merged boundaries
    let (mut i, mut j, mut prev) = (0, 0, 0);
    let mut hj = 0.0;
    while i < a.len() && j < b.len() {
        let e = a[i].min(b[j]);
        hj += entropy_term(e - prev, n);
        prev = e;
        if a[i] == e {
            i += 1;
        }
        if b[j] == e {
            j += 1;
        }
    }
    2.0 * hj - h(a) - h(b)
}

fn vi_general(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut ca: HashMap<usize, usize> = HashMap::new();
    let mut cb: HashMap<usize, usize> = HashMap::new();
    let mut cj: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *cj.entry((x, y)).or_default() += 1;
    }
    let h = |m: &HashMap<usize, usize>| m.values().map(|&c| entropy_term(c, n)).sum::<f64>();
    let hj: f64 = cj.values().map(|&c| entropy_term(c, n)).sum();
    // H(a) + H(b) - 2 I(a; b) = 2 H(a, b) - H(a) - H(b)
    2.0 * hj - h(&ca) - h(&cb)
}

/// Variation of information between two allocations of equal length.
pub fn vi_distance(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "allocations have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let v = match (runs(a), runs(b)) {
        (Some(ra), Some(rb)) => vi_contiguous(&ra, &rb, a.len() as f64),
        _ => vi_general(a, b),
    };
    Ok(v.max(0.0))
}

/// Mean variation of information between `candidate` and the draws.
pub fn vi_loss(candidate: &[usize], draws: &[Vec<usize>]) -> Result<f64> {
    check_draws(draws)?;
    let mut total = 0.0;
    for (first, mult) in dedupe(draws) {
        total += mult as f64 * vi_distance(candidate, &draws[first])?;
    }
    Ok(total / draws.len() as f64)
}

/// Index of the draw with minimal expected loss, earliest on ties.
pub fn point_estimate_index(draws: &[Vec<usize>], loss: Loss) -> Result<usize> {
    check_draws(draws)?;
    let unique = dedupe(draws);
    let score: Box<dyn Fn(&[usize]) -> Result<f64>> = match loss {
        Loss::Binder => {
            let psm = posterior_similarity(draws)?;
            Box::new(move |c| binder_loss(c, &psm))
        }
        Loss::Vi => {
            let total = draws.len() as f64;
            let unique = unique.clone();
            let contiguous: Vec<Option<Vec<usize>>> = unique.iter().map(|&(i, _)| runs(&draws[i])).collect();
            Box::new(move |c| {
                let rc = runs(c);
                let n = c.len() as f64;
                let mut acc = 0.0;
                for (k, &(i, mult)) in unique.iter().enumerate() {
                    let d = match (&rc, &contiguous[k]) {
                        (Some(a), Some(b)) => vi_contiguous(a, b, n).max(0.0),
                        _ => vi_general(c, &draws[i]).max(0.0),
                    };
                    acc += mult as f64 * d;
                }
                Ok(acc / total)
            })
        }
    };
    let mut best = (unique[0].0, f64::INFINITY);
    for &(i, _) in &unique {
        let s = score(&draws[i])?;
        if s < best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// The retained draw with minimal expected posterior loss.
pub fn point_estimate(draws: &[Vec<usize>], loss: Loss) -> Result<Vec<usize>> {
    Ok(draws[point_estimate_index(draws, loss)?].clone())
}

/// One-based change points of a contiguous allocation: times `t` whose label
/// differs from that of `t - 1`.
pub fn change_points(alloc: &[usize]) -> Vec<usize> {
    (1..alloc.len())
        .filter(|&t| alloc[t] != alloc[t - 1])
        .map(|t| t + 1)
        .collect()
}

/// Fraction of draws in which each time point starts a new block. Entry `t`
/// refers to one-based time `t + 1`.
pub fn cp_frequency(orders: &[LatentOrder]) -> Result<Vec<f64>> {
    let first = orders
        .first()
        .ok_or_else(|| Error::Domain("no posterior draws".into()))?;
    let len = first.len();
    let mut freq = vec![0usize; len];
    for o in orders {
        if o.len() != len {
            return Err(Error::Dimension(format!(
                "orders have lengths {} and {len}",
                o.len()
            )));
        }
        for cp in o.change_points() {
            freq[cp - 1] += 1;
        }
    }
    let total = orders.len() as f64;
    Ok(freq.into_iter().map(|c| c as f64 / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_draw_mirrors_itself() {
        let d = vec![vec![0, 0, 1, 1, 2]];
        let psm = posterior_similarity(&d).unwrap();
        assert_eq!(psm.get(0, 1), 1.0);
        assert_eq!(psm.get(1, 2), 0.0);
        assert_eq!(binder_loss(&d[0], &psm).unwrap(), 0.0);
        // everything together disagrees on the 8 separated pairs
        assert_eq!(binder_loss(&[0, 0, 0, 0, 0], &psm).unwrap(), 8.0);
    }

    #[test]
    fn complementary_draws_give_half() {
        let d = vec![vec![0, 0, 1], vec![0, 1, 1]];
        let psm = posterior_similarity(&d).unwrap();
        assert_eq!(psm.get(0, 1), 0.5);
        assert_eq!(psm.get(1, 2), 0.5);
        assert_eq!(psm.get(0, 2), 0.0);
    }

    #[test]
    fn vi_extremes() {
        let t = 7;
        let single = vec![0; t];
        let singletons: Vec<usize> = (0..t).collect();
        assert!((vi_distance(&single, &singletons).unwrap() - (t as f64).ln()).abs() < 1e-12);
        assert_eq!(vi_loss(&single, &[single.clone(), single.clone()]).unwrap(), 0.0);
    }

    #[test]
    fn vi_contiguous_matches_general() {
        let a = vec![0, 0, 0, 1, 1, 2, 2, 2, 2];
        let b = vec![0, 1, 1, 1, 1, 1, 2, 3, 3];
        let fast = vi_distance(&a, &b).unwrap();
        assert!((fast - vi_general(&a, &b)).abs() < 1e-12);
        // a non-contiguous relabelling takes the general path
        let c = vec![5, 5, 5, 9, 9, 5, 5, 5, 5];
        assert!(vi_distance(&a, &c).unwrap() > 0.0);
    }

    #[test]
    fn ties_break_to_earliest() {
        let d = vec![vec![0, 1], vec![0, 0]];
        assert_eq!(point_estimate_index(&d, Loss::Binder).unwrap(), 0);
        assert_eq!(point_estimate_index(&d, Loss::Vi).unwrap(), 0);
    }

    #[test]
    fn change_point_examples() {
        assert!(change_points(&[0, 0, 0]).is_empty());
        assert_eq!(change_points(&[0, 1, 2, 3]), vec![2, 3, 4]);
        let o = LatentOrder::from_block_sizes(&[50, 100, 50]).unwrap();
        assert_eq!(change_points(o.labels()), vec![51, 151]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(posterior_similarity(&[]).is_err());
        assert!(point_estimate(&[], Loss::Vi).is_err());
        assert!(cp_frequency(&[]).is_err());
    }
}
