//! Mini-batch k-means.
//!
//! Features are min-max normalized per dimension before clustering; the
//! fitted model keeps the normalization so assignment happens in the same
//! space. Centroids are reported in original units.

use rand::seq::index;
use rand::Rng;

use crate::entropy::ClusterDistribution;
use crate::error::{Error, Result};
use crate::exec;
use crate::seed;

pub const MAX_FEATURES: usize = 8;
const CONVERGENCE_TOL: f64 = 1e-6;
const ASSIGN_CHUNK: usize = 8192;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    k: usize,
    dim: usize,
    /// Row-major `k x dim`, original units.
    centroids: Vec<f64>,
    feature_names: Vec<String>,
    seed: u64,
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl ClusterModel {
    /// A model with fixed centroids and no feature scaling.
    pub fn from_centroids(centroids: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(
                "centroid buffer must be a non-empty multiple of dim".into(),
            ));
        }
        Ok(ClusterModel {
            k: centroids.len() / dim,
            dim,
            centroids,
            feature_names: (0..dim).map(|d| format!("f{d}")).collect(),
            seed: 0,
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        if names.len() == self.dim {
            self.feature_names = names;
        }
        self
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    fn normalized_centroids(&self) -> Vec<f64> {
        normalize(&self.centroids, self.dim, &self.offset, &self.scale)
    }

    /// Nearest-centroid labels; ties go to the lowest index.
    pub fn assign(&self, points: &[f64]) -> Result<Vec<usize>> {
        if !points.len().is_multiple_of(self.dim) {
            return Err(Error::InvalidArgument(format!(
                "point buffer of length {} is not a multiple of model dim {}",
                points.len(),
                self.dim
            )));
        }
        let z = normalize(points, self.dim, &self.offset, &self.scale);
        Ok(assign_all(&z, &self.normalized_centroids(), self.dim).0)
    }

    /// Sum of squared distances (in the model's normalized space) from each
    /// point to its nearest centroid.
    pub fn inertia(&self, points: &[f64]) -> Result<f64> {
        if !points.len().is_multiple_of(self.dim) {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let z = normalize(points, self.dim, &self.offset, &self.scale);
        Ok(assign_all(&z, &self.normalized_centroids(), self.dim).1)
    }
}

/// Mini-batch k-means settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiniBatchKMeans {
    pub k: usize,
    /// Defaults to `min(1024, n)`.
    pub batch_size: Option<usize>,
    pub max_iters: usize,
    pub seed: u64,
}

impl MiniBatchKMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        MiniBatchKMeans {
            k,
            batch_size: None,
            max_iters: 100,
            seed,
        }
    }

    /// Fits `k` centroids to `points` (row-major, `dim` features per point).
    ///
    /// Seeding is k-means++ on the first mini-batch; each batch then moves
    /// every assigned centroid toward its points with learning rate
    /// `1 / count`. A closing full-data Lloyd step is applied, and the
    /// result is never worse (in inertia) than the k-means++ start.
    pub fn fit(&self, points: &[f64], dim: usize) -> Result<ClusterModel> {
        let k = self.k;
        if dim == 0 || dim > MAX_FEATURES {
            return Err(Error::InvalidArgument(format!(
                "feature dimension must be in 1..={MAX_FEATURES}, got {dim}"
            )));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(
                "point buffer is not a multiple of dim".into(),
            ));
        }
        let n = points.len() / dim;
        if k == 0 || n < k {
            return Err(Error::InvalidArgument(format!(
                "need at least k = {k} points (and k >= 1), got {n}"
            )));
        }
        if let Some(p) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at point {}",
                p / dim
            )));
        }
        let batch = self.batch_size.unwrap_or(1024).clamp(1, n);

        let (offset, scale) = min_max(points, dim);
        let z = normalize(points, dim, &offset, &scale);
        let mut rng = seed::rng(self.seed);

        let first = index::sample(&mut rng, n, batch).into_vec();
        let init = kmeans_plus_plus(&z, dim, &first, k, &mut rng);
        let mut centroids = init.clone();
        let mut counts = vec![0u64; k];

        for iter in 0..self.max_iters {
            let members = if iter == 0 {
                first.clone()
            } else {
                index::sample(&mut rng, n, batch).into_vec()
            };
            let labels: Vec<usize> = exec::map_chunks(&members, ASSIGN_CHUNK, |chunk| {
                chunk
                    .iter()
                    .map(|&p| nearest(&z[p * dim..(p + 1) * dim], &centroids, dim).0)
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect();

            let previous = centroids.clone();
            for (&p, &c) in members.iter().zip(&labels) {
                counts[c] += 1;
                let eta = 1.0 / counts[c] as f64;
                let x = &z[p * dim..(p + 1) * dim];
                for (cv, &xv) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                    *cv += eta * (xv - *cv);
                }
            }
            repair_unused(&z, dim, &members, &mut centroids, &counts);

            let shift = (0..k)
                .map(|c| sq_dist(&centroids[c * dim..(c + 1) * dim], &previous[c * dim..(c + 1) * dim]).sqrt())
                .fold(0.0, f64::max);
            if shift < CONVERGENCE_TOL {
                break;
            }
        }

        let init_inertia = assign_all(&z, &init, dim).1;
        let (labels, batch_inertia) = assign_all(&z, &centroids, dim);
        let refined = lloyd_update(&z, dim, &labels, &centroids);
        let chosen = if batch_inertia <= init_inertia {
            refined
        } else {
            let refined_inertia = assign_all(&z, &refined, dim).1;
            if refined_inertia <= init_inertia {
                refined
            } else {
                init
            }
        };

        let centroids = denormalize(&chosen, dim, &offset, &scale);
        Ok(ClusterModel {
            k,
            dim,
            centroids,
            feature_names: (0..dim).map(|d| format!("f{d}")).collect(),
            seed: self.seed,
            offset,
            scale,
        })
    }
}

/// Convenience wrapper over [`MiniBatchKMeans::fit`].
pub fn kmeans_fit(
    points: &[f64],
    dim: usize,
    k: usize,
    batch_size: Option<usize>,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterModel> {
    MiniBatchKMeans {
        k,
        batch_size,
        max_iters,
        seed,
    }
    .fit(points, dim)
}

/// Empirical label frequencies over `k` labels.
pub fn cluster_distribution(labels: &[usize], k: usize) -> Result<ClusterDistribution> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty label list".into()));
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..{k}")));
        }
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    ClusterDistribution::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

fn min_max(points: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points.chunks_exact(dim) {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let scale = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if h > l { h - l } else { 1.0 })
        .collect();
    (lo, scale)
}

fn normalize(points: &[f64], dim: usize, offset: &[f64], scale: &[f64]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - offset[i % dim]) / scale[i % dim])
        .collect()
}

fn denormalize(points: &[f64], dim: usize, offset: &[f64], scale: &[f64]) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, &v)| v * scale[i % dim] + offset[i % dim])
        .collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Labels and total inertia. Partial sums are combined in chunk order, so
/// the result does not depend on the worker count.
fn assign_all(z: &[f64], centroids: &[f64], dim: usize) -> (Vec<usize>, f64) {
    let parts = exec::map_chunks(z, ASSIGN_CHUNK * dim, |chunk| {
        let mut labels = Vec::with_capacity(chunk.len() / dim);
        let mut inertia = 0.0;
        for x in chunk.chunks_exact(dim) {
            let (c, d) = nearest(x, centroids, dim);
            labels.push(c);
            inertia += d;
        }
        (labels, inertia)
    });
    let mut labels = Vec::with_capacity(z.len() / dim);
    let mut inertia = 0.0;
    for (l, i) in parts {
        labels.extend(l);
        inertia += i;
    }
    (labels, inertia)
}

fn kmeans_plus_plus<R: Rng>(z: &[f64], dim: usize, batch: &[usize], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centroids = Vec::with_capacity(k * dim);
    let first = batch[rng.random_range(0..batch.len())];
    centroids.extend_from_slice(&z[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = batch
        .iter()
        .map(|&p| sq_dist(&z[p * dim..(p + 1) * dim], &centroids[..dim]))
        .collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen: &[f64] = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = batch.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            // Guard against landing on a zero-weight point through rounding.
            if d2[pick] == 0.0 {
                pick = d2
                    .iter()
                    .enumerate()
                    .rev()
                    .find(|(_, &w)| w > 0.0)
                    .map(|(i, _)| i)
                    .unwrap_or(pick);
            }
            let p = batch[pick];
            &z[p * dim..(p + 1) * dim]
        } else {
            // The batch has fewer distinct points than k; look at all data.
            let (p, _) = farthest_point(z, dim, &centroids);
            &z[p * dim..(p + 1) * dim]
        };
        let chosen = chosen.to_vec();
        for (w, &p) in d2.iter_mut().zip(batch) {
            *w = w.min(sq_dist(&z[p * dim..(p + 1) * dim], &chosen));
        }
        centroids.extend_from_slice(&chosen);
    }
    centroids
}

/// Point with the largest distance to its nearest centroid (lowest index on ties).
fn farthest_point(z: &[f64], dim: usize, centroids: &[f64]) -> (usize, f64) {
    let mut best = (0, -1.0);
    for (p, x) in z.chunks_exact(dim).enumerate() {
        let d = nearest(x, centroids, dim).1;
        if d > best.1 {
            best = (p, d);
        }
    }
    best
}

/// Re-seeds centroids that have never received an assignment to the batch
/// point farthest from its nearest centroid.
fn repair_unused(z: &[f64], dim: usize, batch: &[usize], centroids: &mut [f64], counts: &[u64]) {
    for c in 0..counts.len() {
        if counts[c] != 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &p in batch {
            let d = nearest(&z[p * dim..(p + 1) * dim], centroids, dim).1;
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((p, d));
            }
        }
        if let Some((p, d)) = best {
            if d > 0.0 {
                centroids[c * dim..(c + 1) * dim].copy_from_slice(&z[p * dim..(p + 1) * dim]);
            }
        }
    }
}

fn lloyd_update(z: &[f64], dim: usize, labels: &[usize], centroids: &[f64]) -> Vec<f64> {
    let k = centroids.len() / dim;
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &c) in z.chunks_exact(dim).zip(labels) {
        counts[c] += 1;
        for d in 0..dim {
            sums[c * dim + d] += x[d];
        }
    }
    let mut out = centroids.to_vec();
    for c in 0..k {
        if counts[c] > 0 {
            for d in 0..dim {
                out[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[f64], per: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        centers
            .iter()
            .flat_map(|&c| (0..per).map(|_| c).collect::<Vec<_>>())
            .map(|c| c + noise.sample(&mut rng))
            .collect()
    }

    /// Full-batch Lloyd's iteration, used as an independent reference.
    fn lloyd_oracle(points: &[f64], init: &[f64], iters: usize) -> Vec<f64> {
        let mut c = init.to_vec();
        for _ in 0..iters {
            let mut sum = vec![0.0; c.len()];
            let mut cnt = vec![0usize; c.len()];
            for &x in points {
                let (best, _) = c.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &v)| {
                    let d = (x - v).abs();
                    if d < b.1 {
                        (i, d)
                    } else {
                        b
                    }
                });
                sum[best] += x;
                cnt[best] += 1;
            }
            for i in 0..c.len() {
                if cnt[i] > 0 {
                    c[i] = sum[i] / cnt[i] as f64;
                }
            }
        }
        c
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = blobs(&[3.0], 500, 2.0, 4);
        let model = kmeans_fit(&pts, 1, 1, None, 100, 9).unwrap();
        let mean = pts.iter().sum::<f64>() / pts.len() as f64;
        assert!((model.centroid(0)[0] - mean).abs() < 1e-9);
    }

    #[test]
    fn two_blobs_match_lloyd_reference() {
        let pts = blobs(&[-10.0, 10.0], 1000, 0.1, 1);
        let oracle = lloyd_oracle(&pts, &[-1.0, 1.0], 50);
        let model = kmeans_fit(&pts, 1, 2, None, 100, 3).unwrap();
        let mut got = [model.centroid(0)[0], model.centroid(1)[0]];
        got.sort_by(f64::total_cmp);
        assert!((got[0] - oracle[0]).abs() < 0.1 && (got[0] + 10.0).abs() < 0.1);
        assert!((got[1] - oracle[1]).abs() < 0.1 && (got[1] - 10.0).abs() < 0.1);
    }

    #[test]
    fn too_few_points_or_bad_values() {
        assert!(kmeans_fit(&[1.0, 2.0, 3.0], 1, 5, None, 10, 0).is_err());
        assert!(kmeans_fit(&[1.0, f64::NAN, 3.0], 1, 2, None, 10, 0).is_err());
        assert!(kmeans_fit(&[1.0; 18], 9, 1, None, 10, 0).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let pts = blobs(&[0.0, 5.0, 9.0], 300, 1.0, 2);
        let a = kmeans_fit(&pts, 1, 4, Some(128), 50, 77).unwrap();
        let b = kmeans_fit(&pts, 1, 4, Some(128), 50, 77).unwrap();
        let bits = |m: &ClusterModel| m.centroids().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let w = exec::with_workers(3, || kmeans_fit(&pts, 1, 4, Some(128), 50, 77).unwrap());
        assert_eq!(bits(&a), bits(&w));
    }

    #[test]
    fn centroids_are_distinct_and_finite() {
        let pts: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        let m = kmeans_fit(&pts, 1, 7, Some(8), 30, 5).unwrap();
        let mut c: Vec<f64> = m.centroids().to_vec();
        assert!(c.iter().all(|v| v.is_finite()));
        c.sort_by(f64::total_cmp);
        for w in c.windows(2) {
            assert!(w[1] - w[0] > 1e-12);
        }
    }

    #[test]
    fn refinement_never_worse_than_seeding() {
        for seed in 0..10 {
            let pts = blobs(&[0.0, 1.0, 2.5, 7.0], 250, 0.6, seed);
            let fit = MiniBatchKMeans {
                k: 5,
                batch_size: Some(64),
                max_iters: 40,
                seed,
            };
            let model = fit.fit(&pts, 1).unwrap();
            // Rebuild the k-means++ start with the same RNG stream.
            let (offset, scale) = min_max(&pts, 1);
            let z = normalize(&pts, 1, &offset, &scale);
            let mut rng = seed::rng(seed);
            let first = index::sample(&mut rng, pts.len(), 64).into_vec();
            let init = kmeans_plus_plus(&z, 1, &first, 5, &mut rng);
            let init_inertia = assign_all(&z, &init, 1).1;
            assert!(model.inertia(&pts).unwrap() <= init_inertia * (1.0 + 1e-9));
        }
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let centers = [0.0, 25.0, 50.0, 75.0];
        let mut agree = 0;
        for seed in 0..20 {
            let pts = blobs(&centers, 200, 1.0, 100 + seed);
            let model = kmeans_fit(&pts, 1, 4, None, 100, seed).unwrap();
            let labels = model.assign(&pts).unwrap();
            // Majority label per blob must be distinct and cover >= 99% of points.
            let mut used = Vec::new();
            let mut hits = 0;
            for b in 0..4 {
                let mut tally = [0usize; 4];
                for &l in &labels[b * 200..(b + 1) * 200] {
                    tally[l] += 1;
                }
                let (best, &n) = tally.iter().enumerate().max_by_key(|(_, &n)| n).unwrap();
                used.push(best);
                hits += n;
            }
            used.sort_unstable();
            used.dedup();
            if used.len() == 4 && hits * 100 >= 99 * 800 {
                agree += 1;
            }
        }
        assert_eq!(agree, 20);
    }

    #[test]
    fn assign_rules() {
        let m = ClusterModel::from_centroids(vec![0.0, 0.0, 4.0, 0.0, 1.0, 1.0, 9.0, 9.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(m.assign(&[9.0, 9.0]).unwrap(), vec![3]);
        // Equidistant from centroid 1 (4,0) and centroid 4 (2,0).
        assert_eq!(m.assign(&[3.0, 0.0]).unwrap(), vec![1]);
        assert!(m.assign(&[1.0, 2.0, 3.0]).is_err());
        let pts = [0.2, 0.1, 3.9, 3.0];
        assert_eq!(m.assign(&pts).unwrap(), m.assign(&pts).unwrap());
    }

    #[test]
    fn assign_matches_brute_force() {
        let pts = blobs(&[0.0, 3.0, 6.0], 100, 1.5, 8);
        let pts2: Vec<f64> = pts.chunks(2).flat_map(|c| [c[0], c[1] * 0.5]).collect();
        let model = kmeans_fit(&pts2, 2, 6, None, 50, 1).unwrap();
        let labels = model.assign(&pts2).unwrap();
        let (offset, scale) = min_max(&pts2, 2);
        for (p, &l) in pts2.chunks(2).zip(&labels) {
            let zp = [(p[0] - offset[0]) / scale[0], (p[1] - offset[1]) / scale[1]];
            let mut best = (usize::MAX, f64::INFINITY);
            for c in 0..model.k() {
                let cc = model.centroid(c);
                let zc = [(cc[0] - offset[0]) / scale[0], (cc[1] - offset[1]) / scale[1]];
                let d = (zp[0] - zc[0]).powi(2) + (zp[1] - zc[1]).powi(2);
                if d < best.1 {
                    best = (c, d);
                }
            }
            assert_eq!(l, best.0);
        }
    }

    #[test]
    fn distributions_from_labels() {
        let d = cluster_distribution(&[0, 0, 0, 1], 2).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
        let d = cluster_distribution(&[2; 9], 4).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.0, 1.0, 0.0]);
        let d = cluster_distribution(&[0, 1, 2, 3, 4, 4, 3, 2, 1, 0], 5).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.2).abs() < 1e-15));
        assert!(cluster_distribution(&[], 3).is_err());
        assert!(cluster_distribution(&[3], 3).is_err());
    }
}
