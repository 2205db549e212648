//! Relative-entropy kernel: KL divergence, the pairwise divergence graph and
//! its node strengths, strength-weighted selection and proportional count
//! allocation. All logarithms are natural (nats).

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::seed;

pub const DEFAULT_EPSILON: f64 = 1e-10;

/// Discrete probability vector over a shared label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDistribution {
    p: Vec<f64>,
}

impl ClusterDistribution {
    /// Validates that entries are non-negative and sum to 1 within 1e-9.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "distribution entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "distribution sums to {total}, not 1"
            )));
        }
        Ok(ClusterDistribution { p })
    }

    /// Normalizes non-negative counts or weights. All-zero input is rejected.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("counts sum to zero".into()));
        }
        Self::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }
}

/// `D(p || q) = sum_c p'_c ln(p'_c / q'_c)` with `v' = (v + eps) / (1 + k eps)`.
pub fn kl_divergence(p: &ClusterDistribution, q: &ClusterDistribution, epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidArgument(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    Ok(kl_smoothed(&p.p, &q.p, epsilon))
}

#[inline]
fn kl_smoothed(p: &[f64], q: &[f64], epsilon: f64) -> f64 {
    let norm = 1.0 + p.len() as f64 * epsilon;
    let d: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let a = (a + epsilon) / norm;
            let b = (b + epsilon) / norm;
            a * (a / b).ln()
        })
        .sum();
    // Gibbs' inequality holds exactly; only rounding can push it negative.
    d.max(0.0)
}

/// Pairwise divergence matrix plus row-sum node strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyGraph {
    n: usize,
    /// Row-major `n x n`.
    adjacency: Vec<f64>,
    strengths: Vec<f64>,
}

impl EntropyGraph {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }
}

/// `A_ij = D(dists[i] || dists[j])`, `A_ii = 0`, strengths are row sums.
/// Rows are computed in parallel; placement is by index.
pub fn adjacency_matrix(dists: &[ClusterDistribution]) -> Result<EntropyGraph> {
    adjacency_matrix_with_epsilon(dists, DEFAULT_EPSILON)
}

pub fn adjacency_matrix_with_epsilon(dists: &[ClusterDistribution], epsilon: f64) -> Result<EntropyGraph> {
    let n = dists.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no distributions".into()));
    }
    let k = dists[0].len();
    if dists.iter().any(|d| d.len() != k) {
        return Err(Error::InvalidArgument(
            "distributions have inconsistent lengths".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let rows = exec::map_range(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    kl_smoothed(&dists[i].p, &dists[j].p, epsilon)
                }
            })
            .collect::<Vec<f64>>()
    });
    let strengths = rows.iter().map(|r| r.iter().sum()).collect();
    Ok(EntropyGraph {
        n,
        adjacency: rows.into_iter().flatten().collect(),
        strengths,
    })
}

/// Draws `n` indices with probability proportional to `weights`.
///
/// Without replacement, each draw removes the chosen index and renormalizes
/// the rest. If the remaining weight is zero (including the all-zero input)
/// draws fall back to uniform over the remaining indices. Indices are
/// returned in draw order.
pub fn weighted_sample(weights: &[f64], n: usize, seed: u64, with_replacement: bool) -> Result<Vec<usize>> {
    let mut rng = seed::rng(seed);
    weighted_sample_with(weights, n, with_replacement, &mut rng)
}

pub fn weighted_sample_with<R: Rng>(
    weights: &[f64],
    n: usize,
    with_replacement: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }
    let len = weights.len();
    if len == 0 && n > 0 {
        return Err(Error::InvalidArgument("no weights to sample from".into()));
    }
    if !with_replacement && n > len {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} of {len} without replacement"
        )));
    }
    if weights.iter().all(|&w| w == 0.0) && n > 0 {
        log::warn!("all selection weights are zero; falling back to uniform selection");
    }

    if with_replacement {
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            return Ok((0..n).map(|_| rng.random_range(0..len)).collect());
        }
        let mut cumulative = Vec::with_capacity(len);
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        return Ok((0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let pos = cumulative.partition_point(|&c| c <= u).min(len - 1);
                // Never return a zero-weight index because of rounding at the top.
                if weights[pos] > 0.0 {
                    pos
                } else {
                    (0..=pos).rev().find(|&i| weights[i] > 0.0).unwrap_or(pos)
                }
            })
            .collect());
    }

    let mut remaining: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let slot = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut slot = None;
            for (s, &i) in remaining.iter().enumerate() {
                let w = weights[i];
                if w > 0.0 {
                    slot = Some(s);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            slot.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..remaining.len())
        };
        out.push(remaining.remove(slot));
    }
    Ok(out)
}

/// Splits `n_total` into integer counts proportional to `strengths` using the
/// largest-remainder method (ties to the lowest index). Zero-strength entries
/// get nothing unless every strength is zero, in which case the split is
/// uniform.
pub fn allocate_counts(strengths: &[f64], n_total: usize) -> Vec<usize> {
    let k = strengths.len();
    if k == 0 || n_total == 0 {
        return vec![0; k];
    }
    let w: Vec<f64> = strengths
        .iter()
        .map(|&s| if s.is_finite() && s > 0.0 { s } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    let w = if total > 0.0 { w } else { vec![1.0; k] };
    largest_remainder(&w, n_total)
}

/// Like [`allocate_counts`] but no entry exceeds `capacity[i]`; overflow is
/// redistributed over entries with room, by their strengths (uniformly if
/// all of those strengths are zero). If the total capacity is below
/// `n_total`, every entry is filled to capacity.
pub fn allocate_counts_capped(strengths: &[f64], n_total: usize, capacity: &[usize]) -> Vec<usize> {
    let k = strengths.len();
    assert_eq!(k, capacity.len(), "one capacity per strength");
    let room: usize = capacity.iter().sum();
    if n_total >= room {
        return capacity.to_vec();
    }
    let w: Vec<f64> = strengths
        .iter()
        .map(|&s| if s.is_finite() && s > 0.0 { s } else { 0.0 })
        .collect();
    let mut counts = vec![0usize; k];
    let mut left = n_total;
    while left > 0 {
        let open: Vec<usize> = (0..k).filter(|&i| counts[i] < capacity[i]).collect();
        let mut weights: Vec<f64> = open.iter().map(|&i| w[i]).collect();
        if weights.iter().all(|&x| x == 0.0) {
            weights = vec![1.0; open.len()];
        }
        let share = largest_remainder(&weights, left);
        for (&i, s) in open.iter().zip(share) {
            let take = s.min(capacity[i] - counts[i]);
            counts[i] += take;
            left -= take;
        }
    }
    counts
}

fn largest_remainder(weights: &[f64], n_total: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|&w| w / total * n_total as f64).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // Rounding in `ideal` can overshoot by a unit in pathological cases.
    if assigned > n_total {
        let mut excess = assigned - n_total;
        for c in counts.iter_mut().rev() {
            while excess > 0 && *c > 0 {
                *c -= 1;
                excess -= 1;
            }
        }
        return counts;
    }
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n_total - assigned) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dist(v: &[f64]) -> ClusterDistribution {
        ClusterDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_hand_values() {
        let p = dist(&[0.5, 0.5]);
        assert!(kl_divergence(&p, &p, DEFAULT_EPSILON).unwrap().abs() < 1e-9);
        let q = dist(&[0.25, 0.75]);
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&p, &q, DEFAULT_EPSILON).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 0.14384).abs() < 1e-5);
        let one_hot = dist(&[1.0, 0.0]);
        let d = kl_divergence(&one_hot, &p, 1e-10).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn kl_errors() {
        let a = dist(&[1.0]);
        let b = dist(&[0.5, 0.5]);
        assert!(kl_divergence(&a, &b, 1e-10).is_err());
        assert!(kl_divergence(&b, &b, 0.0).is_err());
        assert!(ClusterDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ClusterDistribution::new(vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn adjacency_examples() {
        let same = vec![dist(&[0.2, 0.3, 0.5]); 4];
        let g = adjacency_matrix(&same).unwrap();
        assert!(g.strengths().iter().all(|&s| s == 0.0));
        let g = adjacency_matrix(&[dist(&[0.75, 0.25]), dist(&[0.25, 0.75])]).unwrap();
        let expect = 0.5 * 3f64.ln();
        assert!((g.get(0, 1) - expect).abs() < 1e-9);
        assert!((g.get(1, 0) - expect).abs() < 1e-9);
        assert_eq!(g.get(0, 0), 0.0);
        assert_eq!(g.get(1, 1), 0.0);
        assert!((g.strengths()[0] - 0.54931).abs() < 1e-5);
        assert!(adjacency_matrix(&[dist(&[1.0]), dist(&[0.5, 0.5])]).is_err());
        assert!(adjacency_matrix(&[]).is_err());
    }

    #[test]
    fn weighted_sample_examples() {
        for seed in 0..20 {
            assert_eq!(weighted_sample(&[0.0, 0.0, 1.0, 0.0], 1, seed, false).unwrap(), vec![2]);
            assert_eq!(weighted_sample(&[0.0, 0.0, 1.0, 0.0], 3, seed, true).unwrap(), vec![2; 3]);
            let mut perm = weighted_sample(&[1.0; 4], 4, seed, false).unwrap();
            perm.sort_unstable();
            assert_eq!(perm, vec![0, 1, 2, 3]);
        }
        assert!(weighted_sample(&[1.0, -1.0], 1, 0, false).is_err());
        assert!(weighted_sample(&[1.0, 1.0], 3, 0, false).is_err());
        let mut z = weighted_sample(&[0.0; 5], 5, 3, false).unwrap();
        z.sort_unstable();
        assert_eq!(z, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn weighted_sample_frequencies() {
        let draws = weighted_sample(&[1.0, 2.0, 3.0], 30_000, 11, true).unwrap();
        let mut counts = [0usize; 3];
        for d in draws {
            counts[d] += 1;
        }
        let expect = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        let chi2: f64 = counts
            .iter()
            .zip(expect)
            .map(|(&c, e)| {
                let e = e * 30_000.0;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 99.9th percentile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 13.82, "chi2 = {chi2}");
        for (c, e) in counts.iter().zip(expect) {
            assert!((*c as f64 / 30_000.0 - e).abs() < 0.01);
        }
    }

    #[test]
    fn first_draw_follows_weight_order() {
        let weights = [1.0, 4.0, 2.0, 3.0];
        let mut first = [0usize; 4];
        for seed in 0..10_000 {
            first[weighted_sample(&weights, 2, seed, false).unwrap()[0]] += 1;
        }
        let mut by_freq: Vec<usize> = (0..4).collect();
        by_freq.sort_by_key(|&i| first[i]);
        let mut by_weight: Vec<usize> = (0..4).collect();
        by_weight.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
        assert_eq!(by_freq, by_weight);
    }

    #[test]
    fn seed_changes_selection() {
        let w: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a = weighted_sample(&w, 10, 1, false).unwrap();
        assert_eq!(a, weighted_sample(&w, 10, 1, false).unwrap());
        assert_ne!(a, weighted_sample(&w, 10, 2, false).unwrap());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_counts(&[1.0, 1.0], 10), vec![5, 5]);
        assert_eq!(allocate_counts(&[3.0, 1.0], 2), vec![2, 0]);
        assert_eq!(allocate_counts(&[0.0, 0.0, 0.0], 3), vec![1, 1, 1]);
        assert_eq!(allocate_counts(&[0.0, 2.0, 0.0], 7), vec![0, 7, 0]);
        assert_eq!(allocate_counts(&[1.0, 2.0], 0), vec![0, 0]);
        assert_eq!(allocate_counts_capped(&[10.0, 1.0, 1.0], 9, &[2, 100, 100]), vec![2, 4, 3]);
        assert_eq!(allocate_counts_capped(&[1.0, 0.0], 5, &[3, 10]), vec![3, 2]);
        assert_eq!(allocate_counts_capped(&[1.0, 1.0], 50, &[3, 10]), vec![3, 10]);
    }

    fn arb_dist(k: usize) -> impl Strategy<Value = ClusterDistribution> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("zero", |v| {
            ClusterDistribution::from_counts(&v).ok()
        })
    }

    proptest! {
        #[test]
        fn gibbs_inequality((p, q) in (1usize..30).prop_flat_map(|k| (arb_dist(k), arb_dist(k)))) {
            let d = kl_divergence(&p, &q, DEFAULT_EPSILON).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(kl_divergence(&p, &p, DEFAULT_EPSILON).unwrap().abs() < 1e-12);
        }

        #[test]
        fn allocation_conserves_total(
            strengths in prop::collection::vec(0.0f64..10.0, 1..40),
            n in 0usize..5000,
        ) {
            let c = allocate_counts(&strengths, n);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            if strengths.iter().any(|&s| s > 0.0) {
                for (ci, si) in c.iter().zip(&strengths) {
                    if *si == 0.0 { prop_assert_eq!(*ci, 0); }
                }
            }
        }

        #[test]
        fn capped_allocation_respects_capacity(
            pairs in prop::collection::vec((0.0f64..10.0, 0usize..50), 1..30),
            n in 0usize..800,
        ) {
            let (s, cap): (Vec<f64>, Vec<usize>) = pairs.into_iter().unzip();
            let c = allocate_counts_capped(&s, n, &cap);
            let room: usize = cap.iter().sum();
            prop_assert_eq!(c.iter().sum::<usize>(), n.min(room));
            for (ci, capi) in c.iter().zip(&cap) {
                prop_assert!(ci <= capi);
            }
        }
    }

    #[test]
    fn asymmetry_is_witnessed() {
        let mut rng = seed::rng(5);
        let mut witnessed = false;
        for _ in 0..100 {
            let a: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let p = ClusterDistribution::from_counts(&a).unwrap();
            let q = ClusterDistribution::from_counts(&b).unwrap();
            let fwd = kl_divergence(&p, &q, DEFAULT_EPSILON).unwrap();
            let back = kl_divergence(&q, &p, DEFAULT_EPSILON).unwrap();
            witnessed |= (fwd - back).abs() > 1e-6;
        }
        assert!(witnessed);
    }
}
