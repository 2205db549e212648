//! Strong-scaling study over worker counts.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::GridDataset;
use crate::output::format_float;
use crate::samplers::{run_pipeline_with, SampleSet};

/// Efficiency below which the pool counts as starved.
pub const DEFAULT_KNEE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub workers: usize,
    pub wall_seconds: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    pub knee_workers: Option<usize>,
}

/// Powers of two from 1 up to `max`.
pub fn default_worker_counts(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |w| w.checked_mul(2))
        .take_while(|&w| w <= max.max(1))
        .collect()
}

/// First worker count whose efficiency is strictly below `threshold`.
/// Rows must be sorted by worker count.
pub fn detect_knee(rows: &[ScalingRow], threshold: f64) -> Result<Option<usize>> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "knee detection needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    if rows.windows(2).any(|w| w[1].workers <= w[0].workers) {
        return Err(Error::InvalidArgument("rows must be sorted by worker count".into()));
    }
    Ok(rows.iter().find(|r| r.efficiency < threshold).map(|r| r.workers))
}

/// Times the pipeline at each worker count, keeping the minimum of
/// `repeats` runs. Every run's output must equal the single-worker output.
pub fn run_scaling_study(
    config: &RunConfig,
    dataset: &GridDataset,
    worker_counts: &[usize],
    repeats: usize,
) -> Result<ScalingResult> {
    let seed = config.resolved_seed();
    run_scaling_study_with(worker_counts, repeats, |w| run_pipeline_with(config, dataset, seed, w))
}

/// [`run_scaling_study`] over an arbitrary runner, called once per
/// (worker count, repeat).
pub fn run_scaling_study_with<F>(worker_counts: &[usize], repeats: usize, mut runner: F) -> Result<ScalingResult>
where
    F: FnMut(usize) -> Result<SampleSet>,
{
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let mut counts = worker_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if counts.first() != Some(&1) {
        return Err(Error::InvalidArgument("worker counts must include 1".into()));
    }

    let mut reference: Option<SampleSet> = None;
    let mut best = Vec::with_capacity(counts.len());
    for &w in &counts {
        let mut fastest = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            let out = runner(w)?;
            fastest = fastest.min(start.elapsed().as_secs_f64());
            match &reference {
                None => reference = Some(out),
                Some(r) if !r.same_output(&out) => {
                    return Err(Error::EquivalenceViolation { workers: w });
                }
                Some(_) => {}
            }
        }
        log::info!("{w} workers: {fastest:.4} s");
        best.push((w, fastest));
    }

    let t1 = best[0].1;
    let rows: Vec<ScalingRow> = best
        .into_iter()
        .map(|(workers, wall_seconds)| {
            let speedup = if workers == 1 { 1.0 } else { t1 / wall_seconds };
            ScalingRow {
                workers,
                wall_seconds,
                speedup,
                efficiency: speedup / workers as f64,
            }
        })
        .collect();
    let knee_workers = if rows.len() >= 3 {
        detect_knee(&rows, DEFAULT_KNEE_THRESHOLD)?
    } else {
        None
    };
    Ok(ScalingResult { rows, knee_workers })
}

/// `workers,wall_seconds,speedup,efficiency`.
pub fn scaling_csv(result: &ScalingResult) -> String {
    let mut out = String::from("workers,wall_seconds,speedup,efficiency\n");
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.workers,
            format_float(r.wall_seconds),
            format_float(r.speedup),
            format_float(r.efficiency)
        )
        .expect("write to string");
    }
    out
}

/// Knee summary as JSON.
pub fn knee_json(result: &ScalingResult) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "knee_workers": result.knee_workers,
        "threshold": DEFAULT_KNEE_THRESHOLD,
        "rows": result.rows,
    }))
    .expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{PhaseTimings, Provenance, SampleRecord};

    fn row(workers: usize, efficiency: f64) -> ScalingRow {
        ScalingRow {
            workers,
            wall_seconds: 1.0,
            speedup: efficiency * workers as f64,
            efficiency,
        }
    }

    fn set(v: f64) -> SampleSet {
        SampleSet {
            variables: vec!["s".into()],
            records: vec![SampleRecord {
                timestep: 0,
                index: [0, 0, 0],
                coords: [0.0; 4],
                values: vec![v],
            }],
            provenance: Provenance {
                method: "random".into(),
                hypercube_method: "random".into(),
                seed: 0,
                config_hash: String::new(),
                cubes: vec![],
                timings: PhaseTimings::default(),
            },
        }
    }

    #[test]
    fn knee_examples() {
        let rows: Vec<_> = [1.0, 0.95, 0.9, 0.4, 0.1]
            .iter()
            .zip([1, 2, 4, 8, 16])
            .map(|(&e, w)| row(w, e))
            .collect();
        assert_eq!(detect_knee(&rows, 0.5).unwrap(), Some(8));
        let flat: Vec<_> = [1, 2, 4].iter().map(|&w| row(w, 0.95)).collect();
        assert_eq!(detect_knee(&flat, 0.5).unwrap(), None);
        let edge: Vec<_> = [(1, 1.0), (2, 0.5), (4, 0.49)].iter().map(|&(w, e)| row(w, e)).collect();
        assert_eq!(detect_knee(&edge, 0.5).unwrap(), Some(4));
        assert!(detect_knee(&flat[..2], 0.5).is_err());
    }

    #[test]
    fn single_worker_row() {
        let r = run_scaling_study_with(&[1], 2, |_| Ok(set(1.0))).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].speedup, 1.0);
        assert_eq!(r.rows[0].efficiency, 1.0);
        assert_eq!(r.knee_workers, None);
    }

    #[test]
    fn mismatch_is_a_hard_failure() {
        let err = run_scaling_study_with(&[1, 2, 4], 1, |w| Ok(set(if w == 4 { 2.0 } else { 1.0 }))).unwrap_err();
        assert!(matches!(err, Error::EquivalenceViolation { workers: 4 }));
        assert!(err.is_invariant_violation());
        assert!(run_scaling_study_with(&[2, 4], 1, |_| Ok(set(1.0))).is_err());
        assert!(run_scaling_study_with(&[1], 0, |_| Ok(set(1.0))).is_err());
    }

    #[test]
    fn worker_counts() {
        assert_eq!(default_worker_counts(8), vec![1, 2, 4, 8]);
        assert_eq!(default_worker_counts(6), vec![1, 2, 4]);
        assert_eq!(default_worker_counts(1), vec![1]);
    }

    #[test]
    fn csv_layout() {
        let r = ScalingResult { rows: vec![row(1, 1.0)], knee_workers: None };
        assert_eq!(scaling_csv(&r), "workers,wall_seconds,speedup,efficiency\n1,1,1,1\n");
        assert!(knee_json(&r).contains("\"knee_workers\": null"));
    }
}
