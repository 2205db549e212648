//! Point samplers operating inside one hypercube.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{records_for, SampleRecord};
use crate::clustering::MiniBatchKMeans;
use crate::entropy::{adjacency_matrix, allocate_counts_capped, ClusterDistribution};
use crate::error::{Error, Result};
use crate::grid::HypercubeBlock;
use crate::seed::{self, StreamRng};

/// Shared histogram resolution for per-cluster distributions.
pub const MAXENT_HISTOGRAM_BINS: usize = 100;

const UIPS_BISECTION_ITERS: usize = 30;
const UIPS_TOLERANCE: f64 = 0.01;

fn check_count(block: &HypercubeBlock, n: usize) -> Result<()> {
    if n > block.volume() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} points from a block of {}",
            block.volume()
        )));
    }
    Ok(())
}

fn uniform_indices(rng: &mut StreamRng, volume: usize, n: usize) -> Vec<usize> {
    index::sample(rng, volume, n).into_vec()
}

/// Uniform sampling without replacement.
pub fn sample_random(block: &HypercubeBlock, n: usize, seed: u64) -> Result<Vec<SampleRecord>> {
    check_count(block, n)?;
    let mut rng = seed::rng(seed);
    Ok(records_for(block, uniform_indices(&mut rng, block.volume(), n)))
}

/// Every grid point of the block.
pub fn sample_full(block: &HypercubeBlock) -> Vec<SampleRecord> {
    records_for(block, (0..block.volume()).collect())
}

/// Axis boundaries splitting `extent` points into `parts` nearly equal runs.
fn splits(extent: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|a| a * extent / parts).collect()
}

/// Spatially stratified sampling over a `strata[0] x strata[1] x strata[2]`
/// sub-grid of the block. Counts follow stratum volume (largest remainder);
/// points are uniform without replacement inside each stratum.
pub fn sample_stratified(
    block: &HypercubeBlock,
    n: usize,
    strata: [usize; 3],
    seed: u64,
) -> Result<Vec<SampleRecord>> {
    check_count(block, n)?;
    let ext = block.extents();
    if strata.iter().zip(ext).any(|(&g, e)| g == 0 || g > e) {
        return Err(Error::InvalidArgument(format!(
            "strata {strata:?} do not fit block extents {ext:?}"
        )));
    }
    let count: usize = strata.iter().product();
    if n < count {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot cover {count} strata"
        )));
    }
    let bounds: Vec<Vec<usize>> = (0..3).map(|a| splits(ext[a], strata[a])).collect();
    let mut cells = Vec::with_capacity(count);
    for c in 0..strata[2] {
        for b in 0..strata[1] {
            for a in 0..strata[0] {
                cells.push([
                    (bounds[0][a], bounds[0][a + 1]),
                    (bounds[1][b], bounds[1][b + 1]),
                    (bounds[2][c], bounds[2][c + 1]),
                ]);
            }
        }
    }
    let volumes: Vec<usize> = cells
        .iter()
        .map(|cell| cell.iter().map(|(lo, hi)| hi - lo).product())
        .collect();
    let weights: Vec<f64> = volumes.iter().map(|&v| v as f64).collect();
    let mut counts = allocate_counts_capped(&weights, n, &volumes);
    // Every stratum gets at least one point.
    for i in 0..counts.len() {
        if counts[i] == 0 {
            let donor = (0..counts.len()).max_by_key(|&j| (counts[j], usize::MAX - j)).unwrap();
            counts[donor] -= 1;
            counts[i] = 1;
        }
    }

    let mut rng = seed::rng(seed);
    let mut locals = Vec::with_capacity(n);
    for (cell, &take) in cells.iter().zip(&counts) {
        let [(x0, x1), (y0, y1), (z0, z1)] = *cell;
        let (w, h) = (x1 - x0, y1 - y0);
        let vol = w * h * (z1 - z0);
        for p in uniform_indices(&mut rng, vol, take) {
            let (i, j, k) = (x0 + p % w, y0 + (p / w) % h, z0 + p / (w * h));
            locals.push(block.local_flat([i, j, k]));
        }
    }
    Ok(records_for(block, locals))
}

/// An `n`-point Latin hypercube in `[0, 1)^3`: along each axis the `n`
/// intervals `[m/n, (m+1)/n)` hold exactly one point.
pub fn lhs_design<R: Rng>(n: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let mut perms: Vec<Vec<usize>> = (0..3).map(|_| (0..n).collect()).collect();
    for p in perms.iter_mut() {
        p.shuffle(rng);
    }
    (0..n)
        .map(|s| {
            std::array::from_fn(|a| {
                let u: f64 = rng.random();
                ((perms[a][s] as f64 + u) / n as f64).min(1.0 - f64::EPSILON)
            })
        })
        .collect()
}

/// Latin hypercube over the block's spatial extent, snapped to distinct grid
/// points. A collision moves to the nearest unused grid point (Euclidean in
/// index space, lowest flat index on ties).
pub fn sample_lhs(block: &HypercubeBlock, n: usize, seed: u64) -> Result<Vec<SampleRecord>> {
    check_count(block, n)?;
    let ext = block.extents();
    let mut rng = seed::rng(seed);
    let design = lhs_design(n, &mut rng);
    let mut used = vec![false; block.volume()];
    let mut locals = Vec::with_capacity(n);
    for point in design {
        let pos: [f64; 3] = std::array::from_fn(|a| point[a] * ext[a] as f64 - 0.5);
        let snapped: [usize; 3] =
            std::array::from_fn(|a| ((point[a] * ext[a] as f64) as usize).min(ext[a] - 1));
        let flat = block.local_flat(snapped);
        let chosen = if !used[flat] {
            flat
        } else {
            nearest_unused(block, &used, pos, snapped)
        };
        used[chosen] = true;
        locals.push(chosen);
    }
    Ok(records_for(block, locals))
}

fn nearest_unused(block: &HypercubeBlock, used: &[bool], pos: [f64; 3], center: [usize; 3]) -> usize {
    let ext = block.extents();
    let max_r = *ext.iter().max().unwrap();
    let dist2 = |g: [usize; 3]| -> f64 { (0..3).map(|a| (g[a] as f64 - pos[a]).powi(2)).sum() };
    let mut best: Option<(f64, usize)> = None;
    let consider = |g: [usize; 3], best: &mut Option<(f64, usize)>| {
        let flat = block.local_flat(g);
        if used[flat] {
            return;
        }
        let d = dist2(g);
        let better = match *best {
            None => true,
            Some((bd, bf)) => d < bd || (d == bd && flat < bf),
        };
        if better {
            *best = Some((d, flat));
        }
    };
    for r in 1..=max_r {
        if let Some((bd, _)) = best {
            // Every point in shell r is at least r - 0.5 away per axis.
            if (r as f64 - 0.5).powi(2) > bd {
                break;
            }
        }
        let lo: [usize; 3] = std::array::from_fn(|a| center[a].saturating_sub(r));
        let hi: [usize; 3] = std::array::from_fn(|a| (center[a] + r).min(ext[a] - 1));
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let cheb = [i.abs_diff(center[0]), j.abs_diff(center[1]), k.abs_diff(center[2])]
                        .into_iter()
                        .max()
                        .unwrap();
                    if cheb == r {
                        consider([i, j, k], &mut best);
                    }
                }
            }
        }
    }
    best.expect("fewer draws than grid points").1
}

/// Uniform-in-phase-space sampling with a binned density estimate.
///
/// Each point is accepted with probability `min(1, c / density)`; `c` is
/// bisected so the expected count is within 1% of `n`, and the Bernoulli
/// outcome is then trimmed or topped up uniformly to exactly `n`. Features
/// with zero range are ignored; if all are constant the sampler degrades to
/// uniform random sampling.
pub fn sample_uips(
    block: &HypercubeBlock,
    n: usize,
    bins_per_dim: usize,
    feature_vars: &[String],
    seed: u64,
) -> Result<Vec<SampleRecord>> {
    check_count(block, n)?;
    if feature_vars.is_empty() || feature_vars.len() > 4 {
        return Err(Error::InvalidArgument(format!(
            "phase-space sampling takes 1 to 4 features, got {}",
            feature_vars.len()
        )));
    }
    if bins_per_dim == 0 {
        return Err(Error::InvalidArgument("bins_per_dim must be positive".into()));
    }
    let features = feature_vars
        .iter()
        .map(|v| block.var(v))
        .collect::<Result<Vec<_>>>()?;
    let mut axes = Vec::new();
    for f in &features {
        let (lo, hi) = f
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if hi > lo {
            axes.push((*f, lo, hi));
        }
    }
    let mut rng = seed::rng(seed);
    let volume = block.volume();
    if axes.is_empty() {
        log::warn!("phase-space features are constant in this block; using random sampling");
        return Ok(records_for(block, uniform_indices(&mut rng, volume, n)));
    }

    let bin_of = |p: usize| -> u64 {
        axes.iter().fold(0u64, |acc, (f, lo, hi)| {
            let b = (((f[p] - lo) / (hi - lo)) * bins_per_dim as f64) as usize;
            acc * bins_per_dim as u64 + b.min(bins_per_dim - 1) as u64
        })
    };
    let bins: Vec<u64> = (0..volume).map(bin_of).collect();
    let mut counts: HashMap<u64, u32> = HashMap::new();
    for &b in &bins {
        *counts.entry(b).or_default() += 1;
    }
    let bin_volume: f64 = axes
        .iter()
        .map(|(_, lo, hi)| (hi - lo) / bins_per_dim as f64)
        .product();
    let density: Vec<f64> = bins
        .iter()
        .map(|b| counts[b] as f64 / (volume as f64 * bin_volume))
        .collect();

    let expected = |c: f64| -> f64 { density.iter().map(|&d| (c / d).min(1.0)).sum() };
    let target = n as f64;
    let (mut lo, mut hi) = (0.0, density.iter().cloned().fold(0.0, f64::max));
    let mut c = hi;
    for _ in 0..UIPS_BISECTION_ITERS {
        c = 0.5 * (lo + hi);
        let e = expected(c);
        if (e - target).abs() <= UIPS_TOLERANCE * target {
            break;
        }
        if e < target {
            lo = c;
        } else {
            hi = c;
        }
    }

    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (p, &d) in density.iter().enumerate() {
        if rng.random::<f64>() < (c / d).min(1.0) {
            accepted.push(p);
        } else {
            rejected.push(p);
        }
    }
    if accepted.len() > n {
        accepted = index::sample(&mut rng, accepted.len(), n)
            .into_iter()
            .map(|i| accepted[i])
            .collect();
    } else if accepted.len() < n {
        let extra = n - accepted.len();
        accepted.extend(
            index::sample(&mut rng, rejected.len(), extra)
                .into_iter()
                .map(|i| rejected[i]),
        );
    }
    Ok(records_for(block, accepted))
}

/// Histogram counts of `values` over `bins` equal bins spanning `[lo, hi]`.
fn histogram_counts(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let width = hi - lo;
    for v in values {
        let b = if width > 0.0 {
            (((v - lo) / width) * bins as f64) as usize
        } else {
            0
        };
        h[b.min(bins - 1)] += 1.0;
    }
    h
}

fn distinct_up_to(values: &[f64], limit: usize) -> usize {
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

/// Entropy-guided point selection inside one block.
///
/// The block's cluster variable is clustered into `k` groups; each group's
/// histogram of the cluster variable over shared bins is its distribution;
/// the groups' node strengths in the divergence graph set how many points
/// each group contributes (capped by group size), and points are drawn
/// uniformly within each group.
pub fn sample_maxent_points(
    block: &HypercubeBlock,
    cluster_var: &str,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<SampleRecord>> {
    check_count(block, n)?;
    if k == 0 {
        return Err(Error::InvalidArgument("num_clusters must be >= 1".into()));
    }
    let values = block.var(cluster_var)?;
    let distinct = distinct_up_to(values, k);
    let k = if distinct < k {
        log::warn!("only {distinct} distinct `{cluster_var}` values in block; reducing clusters from {k}");
        distinct
    } else {
        k
    };
    let model = MiniBatchKMeans::new(k, seed::derive(seed, &[1])).fit(values, 1)?;
    let labels = model.assign(values)?;

    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, &l) in labels.iter().enumerate() {
        members[l].push(p);
    }
    let occupied: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
    let dists = occupied
        .iter()
        .map(|&c| {
            let h = histogram_counts(members[c].iter().map(|&p| values[p]), lo, hi, MAXENT_HISTOGRAM_BINS);
            ClusterDistribution::from_counts(&h)
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = adjacency_matrix(&dists)?;
    if graph.strengths().iter().all(|&s| s == 0.0) {
        log::warn!("all cluster strengths are zero; sampling uniformly across clusters");
    }
    let capacity: Vec<usize> = occupied.iter().map(|&c| members[c].len()).collect();
    let counts = allocate_counts_capped(graph.strengths(), n, &capacity);

    let mut rng = seed::stream(seed, &[2]);
    let mut locals = Vec::with_capacity(n);
    for (&c, &take) in occupied.iter().zip(&counts) {
        let group = &members[c];
        locals.extend(
            index::sample(&mut rng, group.len(), take)
                .into_iter()
                .map(|i| group[i]),
        );
    }
    Ok(records_for(block, locals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::allocate_counts;
    use crate::grid::{extract_block, BlockDescriptor, GridDataset, GridDims};
    use rand_distr::{Distribution, LogNormal, Normal};
    use std::collections::{BTreeMap, HashSet};

    fn block_from(values: Vec<f64>, ext: [usize; 3]) -> HypercubeBlock {
        let dims = GridDims::new(ext[0], ext[1], ext[2], 1).unwrap();
        let fields = BTreeMap::from([("s".to_string(), values)]);
        let ds = GridDataset::new(dims, fields, vec!["s".into()], vec![], "s").unwrap();
        extract_block(
            &ds,
            &BlockDescriptor {
                origin: [0; 3],
                extents: ext,
                timestep: 0,
            },
        )
        .unwrap()
    }

    fn ramp_block(ext: [usize; 3]) -> HypercubeBlock {
        let n: usize = ext.iter().product();
        block_from((0..n).map(|i| i as f64).collect(), ext)
    }

    fn assert_distinct_and_faithful(block: &HypercubeBlock, recs: &[SampleRecord]) {
        let mut seen = HashSet::new();
        for r in recs {
            assert!(seen.insert(r.index), "duplicate point {:?}", r.index);
            let local = block.local_flat(r.index);
            assert_eq!(r.values[0], block.values[0][local]);
        }
    }

    #[test]
    fn random_counts_and_exhaustion() {
        let b = ramp_block([32, 32, 32]);
        let recs = sample_random(&b, 3277, 1).unwrap();
        assert_eq!(recs.len(), 3277);
        assert_distinct_and_faithful(&b, &recs);
        let small = ramp_block([3, 3, 2]);
        let all = sample_random(&small, 18, 5).unwrap();
        assert_eq!(all, sample_full(&small));
        assert!(sample_random(&small, 19, 5).is_err());
    }

    #[test]
    fn random_inclusion_is_uniform() {
        let b = ramp_block([10, 10, 1]);
        let (n, trials) = (10usize, 1000u64);
        let mut hits = [0usize; 100];
        for seed in 0..trials {
            for r in sample_random(&b, n, seed).unwrap() {
                hits[b.local_flat(r.index)] += 1;
            }
        }
        let p = n as f64 / 100.0;
        let mean = p * trials as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        // 4 sigma per point keeps the family-wise false alarm rate small over 100 points.
        for h in hits {
            assert!((h as f64 - mean).abs() < 4.0 * sd, "{h} vs {mean}");
        }
    }

    #[test]
    fn full_is_seed_free_and_ordered() {
        let b = ramp_block([2, 2, 2]);
        let recs = sample_full(&b);
        assert_eq!(recs.len(), 8);
        let vals: Vec<f64> = recs.iter().map(|r| r.values[0]).collect();
        assert_eq!(vals, b.values[0]);
        let big = ramp_block([32, 32, 32]);
        assert_eq!(sample_full(&big).len(), 32768);
    }

    #[test]
    fn stratified_examples() {
        let b = ramp_block([8, 8, 8]);
        let recs = sample_stratified(&b, 8, [2, 2, 2], 3).unwrap();
        let mut per = [0usize; 8];
        for r in &recs {
            let s = (r.index[0] / 4) + 2 * (r.index[1] / 4) + 4 * (r.index[2] / 4);
            per[s] += 1;
        }
        assert_eq!(per, [1; 8]);

        let recs = sample_stratified(&b, 64, [2, 2, 2], 4).unwrap();
        let mut per = [0usize; 8];
        for r in &recs {
            per[(r.index[0] / 4) + 2 * (r.index[1] / 4) + 4 * (r.index[2] / 4)] += 1;
        }
        assert_eq!(per, [8; 8]);
        assert_distinct_and_faithful(&b, &recs);
        assert!(sample_stratified(&b, 7, [2, 2, 2], 4).is_err());
    }

    #[test]
    fn stratified_records_stay_in_their_strata() {
        let b = ramp_block([10, 7, 5]);
        let strata = [3, 2, 2];
        let recs = sample_stratified(&b, 100, strata, 9).unwrap();
        let bounds: Vec<Vec<usize>> = (0..3).map(|a| splits(b.extents()[a], strata[a])).collect();
        let mut counts = vec![0usize; 12];
        for r in &recs {
            let cell: Vec<usize> = (0..3)
                .map(|a| {
                    (0..strata[a])
                        .find(|&s| bounds[a][s] <= r.index[a] && r.index[a] < bounds[a][s + 1])
                        .unwrap()
                })
                .collect();
            counts[cell[0] + 3 * (cell[1] + 2 * cell[2])] += 1;
        }
        // Allocation by stratum volume, rounded by largest remainder.
        let vols: Vec<f64> = (0..12)
            .map(|s| {
                let c = [s % 3, (s / 3) % 2, s / 6];
                (0..3).map(|a| (bounds[a][c[a] + 1] - bounds[a][c[a]]) as f64).product()
            })
            .collect();
        assert_eq!(counts, allocate_counts(&vols, 100));
    }

    #[test]
    fn lhs_design_is_latin() {
        let mut rng = seed::rng(4);
        for n in [1usize, 7, 100] {
            let d = lhs_design(n, &mut rng);
            for a in 0..3 {
                let mut seen = vec![false; n];
                for p in &d {
                    let bin = (p[a] * n as f64) as usize;
                    assert!(!seen[bin]);
                    seen[bin] = true;
                }
            }
        }
    }

    #[test]
    fn lhs_snaps_to_distinct_points() {
        let b = ramp_block([8, 8, 8]);
        for seed in 0..5 {
            let recs = sample_lhs(&b, 400, seed).unwrap();
            assert_eq!(recs.len(), 400);
            assert_distinct_and_faithful(&b, &recs);
        }
        assert_eq!(sample_lhs(&b, 1, 0).unwrap().len(), 1);
        assert_eq!(sample_lhs(&b, 512, 0).unwrap().len(), 512);
    }

    fn histogram_cv(values: &[f64], lo: f64, hi: f64, bins: usize, mask: &[bool]) -> f64 {
        let h = histogram_counts(values.iter().copied(), lo, hi, bins);
        let kept: Vec<f64> = h.iter().zip(mask).filter(|(_, &m)| m).map(|(c, _)| *c).collect();
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let var = kept.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / kept.len() as f64;
        var.sqrt() / mean
    }

    #[test]
    fn uips_exact_count_and_uniform_degeneracy() {
        let mut rng = seed::rng(0xDA7A);
        let vals: Vec<f64> = (0..4096).map(|_| rng.random::<f64>()).collect();
        let b = block_from(vals.clone(), [16, 16, 16]);
        let feats = vec!["s".to_string()];
        let mut cv_u = 0.0;
        let mut cv_r = 0.0;
        let mask = vec![true; 20];
        for seed in 0..20 {
            let u = sample_uips(&b, 410, 20, &feats, seed).unwrap();
            assert_eq!(u.len(), 410);
            assert_distinct_and_faithful(&b, &u);
            let r = sample_random(&b, 410, seed + 100).unwrap();
            let uv: Vec<f64> = u.iter().map(|r| r.values[0]).collect();
            let rv: Vec<f64> = r.iter().map(|r| r.values[0]).collect();
            cv_u += histogram_cv(&uv, 0.0, 1.0, 20, &mask);
            cv_r += histogram_cv(&rv, 0.0, 1.0, 20, &mask);
        }
        // Flat density: both are uniform subsamples, so mean CVs agree within noise.
        assert!((cv_u - cv_r).abs() / cv_r < 0.35, "{cv_u} vs {cv_r}");

        let constant = block_from(vec![2.0; 64], [4, 4, 4]);
        assert_eq!(sample_uips(&constant, 10, 5, &feats, 0).unwrap().len(), 10);
        assert!(sample_uips(&constant, 10, 5, &[], 0).is_err());
    }

    #[test]
    fn uips_flattens_bimodal_features() {
        let mut wins = 0;
        for seed in 0..20u64 {
            let mut rng = seed::rng(500 + seed);
            let lo_mode = Normal::new(-5.0, 0.5).unwrap();
            let hi_mode = Normal::new(5.0, 0.5).unwrap();
            let vals: Vec<f64> = (0..32768)
                .map(|_| {
                    if rng.random::<f64>() < 0.9 {
                        lo_mode.sample(&mut rng)
                    } else {
                        hi_mode.sample(&mut rng)
                    }
                })
                .collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let full = histogram_counts(vals.iter().copied(), lo, hi, 50);
            let mask: Vec<bool> = full.iter().map(|&c| c > 0.0).collect();
            let b = block_from(vals, [32, 32, 32]);
            let feats = vec!["s".to_string()];
            let u: Vec<f64> = sample_uips(&b, 3277, 50, &feats, seed).unwrap().iter().map(|r| r.values[0]).collect();
            let r: Vec<f64> = sample_random(&b, 3277, seed).unwrap().iter().map(|r| r.values[0]).collect();
            if histogram_cv(&u, lo, hi, 50, &mask) < histogram_cv(&r, lo, hi, 50, &mask) {
                wins += 1;
            }
        }
        assert!(wins >= 18, "{wins}/20");
    }

    #[test]
    fn maxent_constant_field_degrades_to_uniform() {
        let b = block_from(vec![1.5; 512], [8, 8, 8]);
        let recs = sample_maxent_points(&b, "s", 20, 50, 3).unwrap();
        assert_eq!(recs.len(), 50);
        assert_distinct_and_faithful(&b, &recs);
    }

    #[test]
    fn maxent_exact_count_and_tail_coverage() {
        let mut better = 0.0;
        for seed in 0..5u64 {
            let mut rng = seed::rng(900 + seed);
            let ln = LogNormal::new(0.0, 1.0).unwrap();
            let vals: Vec<f64> = (0..32768).map(|_| ln.sample(&mut rng)).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let b = block_from(vals, [32, 32, 32]);
            let m = sample_maxent_points(&b, "s", 20, 3277, seed).unwrap();
            assert_eq!(m.len(), 3277);
            assert_distinct_and_faithful(&b, &m);
            let r = sample_random(&b, 3277, seed).unwrap();
            let occ = |recs: &[SampleRecord]| {
                histogram_counts(recs.iter().map(|r| r.values[0]), lo, hi, 100)
                    .iter()
                    .filter(|&&c| c > 0.0)
                    .count() as f64
            };
            better += occ(&m) - occ(&r);
        }
        assert!(better >= 0.0);
    }

    #[test]
    fn maxent_reduces_k_for_few_distinct_values() {
        let vals: Vec<f64> = (0..512).map(|i| (i % 3) as f64).collect();
        let b = block_from(vals, [8, 8, 8]);
        let recs = sample_maxent_points(&b, "s", 20, 30, 1).unwrap();
        assert_eq!(recs.len(), 30);
    }
}
