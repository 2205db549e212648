//! Hypercube selection.

use rand::seq::index;

use crate::clustering::{cluster_distribution, MiniBatchKMeans};
use crate::entropy::{adjacency_matrix, weighted_sample};
use crate::error::{Error, Result};
use crate::exec;
use crate::seed;

/// Uniform selection of `m` of `n_blocks` without replacement.
pub fn select_hypercubes_random(n_blocks: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > n_blocks {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {n_blocks} hypercubes"
        )));
    }
    let mut rng = seed::rng(seed);
    Ok(index::sample(&mut rng, n_blocks, m).into_vec())
}

fn distinct_values(values: &[f64], limit: usize) -> usize {
    let mut seen: Vec<u64> = Vec::new();
    for v in values {
        let bits = if *v == 0.0 { 0 } else { v.to_bits() };
        if !seen.contains(&bits) {
            seen.push(bits);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// Node strengths of the blocks' cluster distributions.
///
/// The cluster variable is clustered once over all blocks pooled, so every
/// block's label distribution lives on the same label space.
pub fn hypercube_strengths(cluster_values: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<f64>> {
    let lens: Vec<usize> = cluster_values.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = cluster_values.iter().flatten().copied().collect();
    pooled_strengths(&pooled, &lens, k, seed)
}

/// As [`hypercube_strengths`], with the blocks stored back to back in
/// `pooled` and `lens[b]` values for block `b`.
pub(crate) fn pooled_strengths(pooled: &[f64], lens: &[usize], k: usize, seed: u64) -> Result<Vec<f64>> {
    if lens.is_empty() {
        return Err(Error::InvalidArgument("no hypercubes".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("num_clusters must be >= 1".into()));
    }
    if lens.contains(&0) || lens.iter().sum::<usize>() != pooled.len() {
        return Err(Error::InvalidArgument("hypercube value lengths do not match".into()));
    }
    let distinct = distinct_values(pooled, k);
    let k = if distinct < k {
        log::warn!("cluster variable has only {distinct} distinct values; using {distinct} clusters");
        distinct
    } else {
        k
    };
    let model = MiniBatchKMeans::new(k, seed).fit(pooled, 1)?;
    let mut starts = Vec::with_capacity(lens.len());
    let mut at = 0;
    for &l in lens {
        starts.push((at, at + l));
        at += l;
    }
    let dists = exec::map(&starts, |&(a, b)| cluster_distribution(&model.assign(&pooled[a..b])?, k))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(adjacency_matrix(&dists)?.strengths().to_vec())
}

/// Entropy-weighted selection of `m` hypercubes without replacement.
/// `cluster_values[b]` holds block `b`'s cluster-variable values.
pub fn select_hypercubes_maxent(cluster_values: &[Vec<f64>], k: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > cluster_values.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {} hypercubes",
            cluster_values.len()
        )));
    }
    let lens: Vec<usize> = cluster_values.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = cluster_values.iter().flatten().copied().collect();
    select_pooled(&pooled, &lens, k, m, seed)
}

pub(crate) fn select_pooled(pooled: &[f64], lens: &[usize], k: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > lens.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {} hypercubes",
            lens.len()
        )));
    }
    let strengths = pooled_strengths(pooled, lens, k, seed::derive(seed, &[1]))?;
    weighted_sample(&strengths, m, seed::derive(seed, &[2]), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn iid_blocks(n: usize, len: usize, seed: u64, shifted: Option<usize>) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|b| {
                let shift = if Some(b) == shifted { 10.0 } else { 0.0 };
                (0..len).map(|_| normal.sample(&mut rng) + shift).collect()
            })
            .collect()
    }

    #[test]
    fn random_selection_contract() {
        let all = select_hypercubes_random(7, 7, 3).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        assert_eq!(select_hypercubes_random(9, 4, 1).unwrap(), select_hypercubes_random(9, 4, 1).unwrap());
        assert!(select_hypercubes_random(3, 4, 1).is_err());
        let firsts = (0..10_000).filter(|&s| select_hypercubes_random(2, 1, s).unwrap()[0] == 0).count();
        assert!((firsts as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn maxent_selects_all_when_m_equals_n() {
        let blocks = iid_blocks(6, 200, 1, None);
        for seed in 0..5 {
            let mut s = select_hypercubes_maxent(&blocks, 5, 6, seed).unwrap();
            s.sort_unstable();
            assert_eq!(s, (0..6).collect::<Vec<_>>());
        }
        assert!(select_hypercubes_maxent(&blocks, 5, 7, 0).is_err());
    }

    #[test]
    fn maxent_identical_blocks_select_uniformly() {
        let (n, m, trials) = (16usize, 4usize, 200u64);
        let mut hits = vec![0usize; n];
        for seed in 0..trials {
            let blocks = iid_blocks(n, 4096, 10_000 + seed, None);
            for b in select_hypercubes_maxent(&blocks, 10, m, seed).unwrap() {
                hits[b] += 1;
            }
        }
        let p = m as f64 / n as f64;
        // Hypergeometric inclusion: each block appears with probability m/N.
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - p * trials as f64).abs() <= 3.0 * sd, "{h}");
        }
    }

    #[test]
    fn constant_variable_falls_back_to_uniform() {
        let blocks = vec![vec![3.0; 64]; 5];
        let s = select_hypercubes_maxent(&blocks, 20, 2, 0).unwrap();
        assert_eq!(s.len(), 2);
        assert_ne!(s[0], s[1]);
    }

    #[test]
    fn shifted_block_has_the_largest_strength() {
        let blocks = iid_blocks(16, 4096, 3, Some(5));
        let s = hypercube_strengths(&blocks, 20, 1).unwrap();
        let best = (0..16).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(best, 5);
    }
}
