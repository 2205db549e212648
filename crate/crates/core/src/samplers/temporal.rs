//! Greedy novelty-driven timestep selection.

use crate::entropy::{kl_divergence, ClusterDistribution};
use crate::error::{Error, Result};

/// Gains closer than this are treated as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Picks `m` of the snapshot histograms (all on shared bins).
///
/// Starts from the snapshot with the highest Shannon entropy, then
/// repeatedly adds the snapshot with the largest divergence from the
/// equal-weight mixture of those already chosen. Ties go to the lowest
/// index. Returned in selection order.
pub fn temporal_select(snapshots: &[ClusterDistribution], m: usize, epsilon: f64) -> Result<Vec<usize>> {
    let t = snapshots.len();
    if m > t {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {t} timesteps"
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let bins = snapshots[0].len();
    if snapshots.iter().any(|s| s.len() != bins) {
        return Err(Error::InvalidArgument(
            "snapshot histograms must share bins".into(),
        ));
    }

    let first = argmax(snapshots.iter().map(|s| Some(s.entropy())));
    let mut chosen = vec![first];
    let mut mixture_sum = snapshots[first].probs().to_vec();
    while chosen.len() < m {
        let n = chosen.len() as f64;
        let mixture = ClusterDistribution::new(mixture_sum.iter().map(|v| v / n).collect())
            .or_else(|_| ClusterDistribution::from_counts(&mixture_sum))?;
        let gains = (0..t)
            .map(|i| {
                if chosen.contains(&i) {
                    Ok(None)
                } else {
                    kl_divergence(&snapshots[i], &mixture, epsilon).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let next = argmax(gains.into_iter());
        for (acc, v) in mixture_sum.iter_mut().zip(snapshots[next].probs()) {
            *acc += v;
        }
        chosen.push(next);
    }
    Ok(chosen)
}

fn argmax(values: impl Iterator<Item = Option<f64>>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let Some(v) = v else { continue };
        match best {
            Some((_, b)) if v <= b + TIE_TOLERANCE => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).expect("at least one candidate")
}
