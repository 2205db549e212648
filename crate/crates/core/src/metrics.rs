//! Sampling-quality metrics, method comparison and the training cost proxy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{PointMethod, RunConfig};
use crate::entropy::{kl_divergence, ClusterDistribution, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::grid::{BlockDescriptor, GridDataset};
use crate::output::format_float as ff;
use crate::samplers::{run_pipeline_with, SampleSet};

/// Default scale of the training term in [`cost_estimate`].
pub const DEFAULT_KAPPA: f64 = 1e-9;

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfHistogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Values that fell inside the range.
    pub count: usize,
}

impl PdfHistogram {
    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    /// Probability mass per bin.
    pub fn masses(&self) -> Vec<f64> {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .collect()
    }

    pub fn occupied(&self) -> Vec<bool> {
        self.densities.iter().map(|&d| d > 0.0).collect()
    }
}

fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> Option<usize> {
    if !(lo..=hi).contains(&v) {
        return None;
    }
    let b = ((v - lo) / (hi - lo) * bins as f64) as usize;
    Some(b.min(bins - 1))
}

fn value_range(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Histogram of `values` over `bins` equal bins.
///
/// `range = None` uses the observed min-max (a single distinct value is
/// centered in a unit-wide range). Values outside an explicit range are
/// not counted.
pub fn histogram_pdf(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<PdfHistogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "histogram range requires lo < hi, got ({lo}, {hi})"
                )));
            }
            (lo, hi)
        }
        None => match value_range(values) {
            None => (0.0, 1.0),
            Some((lo, hi)) if hi > lo => (lo, hi),
            Some((v, _)) => (v - 0.5, v + 0.5),
        },
    };
    let mut counts = vec![0usize; bins];
    let mut count = 0;
    for &v in values {
        if let Some(b) = bin_index(v, lo, hi, bins) {
            counts[b] += 1;
            count += 1;
        }
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|b| if b == bins { hi } else { lo + (hi - lo) * b as f64 / bins as f64 })
        .collect();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| {
            if count == 0 {
                0.0
            } else {
                c as f64 / (count as f64 * (e[1] - e[0]))
            }
        })
        .collect();
    Ok(PdfHistogram {
        edges,
        densities,
        count,
    })
}

/// Percentile by linear interpolation between order statistics.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Coverage of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCoverage {
    pub variable: String,
    /// D(full || sample) over the shared bins, in nats.
    pub kl_full_to_sample: f64,
    pub occupied_bin_fraction: f64,
    pub span_ratio: f64,
    pub tail_capture: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub variables: Vec<VariableCoverage>,
    pub sampling_seconds: f64,
    pub points_emitted: usize,
}

impl CoverageReport {
    pub fn get(&self, variable: &str) -> Option<&VariableCoverage> {
        self.variables.iter().find(|v| v.variable == variable)
    }
}

/// Coverage of one variable's sampled values against its full values, on
/// bins spanning the full data's min-max.
pub fn variable_coverage(variable: &str, sample: &[f64], full: &[f64], bins: usize) -> Result<VariableCoverage> {
    if sample.is_empty() || full.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "coverage of `{variable}` needs nonempty sample and reference"
        )));
    }
    let (flo, fhi) = value_range(full).expect("nonempty");
    let range = if fhi > flo { (flo, fhi) } else { (flo - 0.5, flo + 0.5) };
    let hf = histogram_pdf(full, bins, Some(range))?;
    let hs = histogram_pdf(sample, bins, Some(range))?;
    let p = ClusterDistribution::from_counts(&hf.masses())?;
    let kl = if hs.count == 0 {
        f64::INFINITY
    } else {
        kl_divergence(&p, &ClusterDistribution::from_counts(&hs.masses())?, DEFAULT_EPSILON)?
    };
    let occupied = hs.occupied();
    let occupied_bin_fraction = occupied.iter().filter(|&&o| o).count() as f64 / bins as f64;

    let (slo, shi) = value_range(sample).expect("nonempty");
    let span_ratio = if fhi > flo {
        ((shi.min(fhi) - slo.max(flo)) / (fhi - flo)).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let mut sorted = full.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (p1, p99) = (percentile(&sorted, 1.0), percentile(&sorted, 99.0));
    let (mut tail, mut captured) = (0usize, 0usize);
    for &v in full {
        if v < p1 || v > p99 {
            tail += 1;
            if bin_index(v, range.0, range.1, bins).is_some_and(|b| occupied[b]) {
                captured += 1;
            }
        }
    }
    let tail_capture = if tail == 0 { 1.0 } else { captured as f64 / tail as f64 };

    Ok(VariableCoverage {
        variable: variable.to_string(),
        kl_full_to_sample: kl,
        occupied_bin_fraction,
        span_ratio,
        tail_capture,
    })
}

/// Coverage of every variable of `sample` that has a reference in `full`.
pub fn coverage_report(sample: &SampleSet, full: &[(String, Vec<f64>)], bins: usize) -> Result<CoverageReport> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let variables = full
        .iter()
        .map(|(name, values)| {
            let column = sample
                .column(name)
                .ok_or_else(|| Error::InvalidArgument(format!("sample has no variable `{name}`")))?;
            variable_coverage(name, &column, values, bins)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageReport {
        variables,
        sampling_seconds: sample.provenance.timings.total(),
        points_emitted: sample.len(),
    })
}

/// Full-resolution values of every role variable inside the cubes a sample
/// was drawn from.
pub fn reference_values(dataset: &GridDataset, sample: &SampleSet) -> Result<Vec<(String, Vec<f64>)>> {
    sample
        .variables
        .iter()
        .map(|var| {
            let mut values = Vec::new();
            for cube in &sample.provenance.cubes {
                let t = dataset
                    .timesteps()
                    .iter()
                    .position(|&l| l == cube.timestep)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown timestep {}", cube.timestep)))?;
                let desc = BlockDescriptor {
                    origin: cube.origin,
                    extents: cube.extents,
                    timestep: t,
                };
                values.extend(dataset.block_values(&desc, var)?);
            }
            Ok((var.clone(), values))
        })
        .collect()
}

/// One line of a comparison table. Summary lines carry `seed` "mean" or "std".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub seed: String,
    pub variable: String,
    pub kl_nats: f64,
    pub occupied_bin_fraction: f64,
    pub span_ratio: f64,
    pub tail_capture: f64,
    pub sampling_seconds: f64,
    pub points: f64,
}

/// Full-data and sampled histograms of one variable for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodHistogram {
    pub method: String,
    pub variable: String,
    pub full: PdfHistogram,
    pub sample: PdfHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Cluster-variable histograms from each method's first seed.
    pub histograms: Vec<MethodHistogram>,
}

impl Comparison {
    pub fn data_rows(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| r.seed != "mean" && r.seed != "std")
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every method under every seed and scores each run against the full
/// data of the cubes it selected. Rows are ordered method, then seed, then
/// variable, followed by each method's mean and (population) standard
/// deviation rows.
pub fn compare_methods(
    config: &RunConfig,
    dataset: &GridDataset,
    methods: &[PointMethod],
    seeds: &[u64],
    workers: usize,
) -> Result<Comparison> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("compare needs at least one method and one seed".into()));
    }
    let bins = config.sampling.bins;
    let mut rows = Vec::new();
    let mut histograms = Vec::new();
    for &method in methods {
        let mut cfg = config.clone();
        cfg.sampling.method = method;
        let mut per_seed: Vec<Vec<ComparisonRow>> = Vec::new();
        for (s, &seed) in seeds.iter().enumerate() {
            let sample = run_pipeline_with(&cfg, dataset, seed, workers)?;
            let reference = reference_values(dataset, &sample)?;
            let report = coverage_report(&sample, &reference, bins)?;
            if s == 0 {
                let var = dataset.cluster_var();
                let full = &reference.iter().find(|(n, _)| n == var).expect("role variable").1;
                let column = sample.column(var).expect("role variable");
                let (lo, hi) = value_range(full).expect("nonempty");
                let range = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
                histograms.push(MethodHistogram {
                    method: method.as_str().to_string(),
                    variable: var.to_string(),
                    full: histogram_pdf(full, bins, Some(range))?,
                    sample: histogram_pdf(&column, bins, Some(range))?,
                });
            }
            per_seed.push(
                report
                    .variables
                    .iter()
                    .map(|v| ComparisonRow {
                        method: method.as_str().to_string(),
                        seed: seed.to_string(),
                        variable: v.variable.clone(),
                        kl_nats: v.kl_full_to_sample,
                        occupied_bin_fraction: v.occupied_bin_fraction,
                        span_ratio: v.span_ratio,
                        tail_capture: v.tail_capture,
                        sampling_seconds: report.sampling_seconds,
                        points: report.points_emitted as f64,
                    })
                    .collect(),
            );
        }
        for run in &per_seed {
            rows.extend(run.iter().cloned());
        }
        let nvars = per_seed[0].len();
        let mut means = Vec::with_capacity(nvars);
        let mut stds = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let col = |f: fn(&ComparisonRow) -> f64| -> (f64, f64) {
                mean_std(&per_seed.iter().map(|run| f(&run[v])).collect::<Vec<_>>())
            };
            let kl = col(|r| r.kl_nats);
            let occ = col(|r| r.occupied_bin_fraction);
            let span = col(|r| r.span_ratio);
            let tail = col(|r| r.tail_capture);
            let secs = col(|r| r.sampling_seconds);
            let pts = col(|r| r.points);
            let base = |seed: &str, pick: fn((f64, f64)) -> f64| ComparisonRow {
                method: method.as_str().to_string(),
                seed: seed.to_string(),
                variable: per_seed[0][v].variable.clone(),
                kl_nats: pick(kl),
                occupied_bin_fraction: pick(occ),
                span_ratio: pick(span),
                tail_capture: pick(tail),
                sampling_seconds: pick(secs),
                points: pick(pts),
            };
            means.push(base("mean", |p| p.0));
            stds.push(base("std", |p| p.1));
        }
        rows.extend(means);
        rows.extend(stds);
    }
    Ok(Comparison { rows, histograms })
}

/// Comparison table as CSV. Wall-clock seconds vary between runs, so the
/// `sampling_seconds` column is left empty unless `with_timings` is set.
pub fn comparison_csv(comparison: &Comparison, with_timings: bool) -> String {
    let mut out = String::from(
        "method,seed,variable,kl_nats,occupied_bin_fraction,span_ratio,tail_capture,sampling_seconds,points\n",
    );
    for r in &comparison.rows {
        let secs = if with_timings {
            ff(r.sampling_seconds)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.variable,
            ff(r.kl_nats),
            ff(r.occupied_bin_fraction),
            ff(r.span_ratio),
            ff(r.tail_capture),
            secs,
            ff(r.points)
        )
        .expect("write to string");
    }
    out
}

/// Plot-ready histogram pair: `bin_lo,bin_hi,density_full,density_sample`.
pub fn histogram_csv(h: &MethodHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,density_full,density_sample\n");
    for b in 0..h.full.bins() {
        writeln!(
            out,
            "{},{},{},{}",
            ff(h.full.edges[b]),
            ff(h.full.edges[b + 1]),
            ff(h.full.densities[b]),
            ff(h.sample.densities[b])
        )
        .expect("write to string");
    }
    out
}

/// Sampling cost plus a training-cost proxy proportional to
/// samples x parameters x epochs. Units are proxy units, not joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub sampling_cost: f64,
    pub training_cost_proxy: f64,
    pub total: f64,
}

pub fn cost_estimate(m: f64, p: f64, e: f64, c_m: f64) -> CostEstimate {
    cost_estimate_with_kappa(m, p, e, c_m, DEFAULT_KAPPA)
}

pub fn cost_estimate_with_kappa(m: f64, p: f64, e: f64, c_m: f64, kappa: f64) -> CostEstimate {
    let training_cost_proxy = kappa * m * p * e;
    CostEstimate {
        sampling_cost: c_m,
        training_cost_proxy,
        total: c_m + training_cost_proxy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn uniform_histogram_is_flat() {
        let mut rng = crate::seed::rng(77);
        let v: Vec<f64> = (0..1_000_000).map(|_| rng.random::<f64>()).collect();
        let h = histogram_pdf(&v, 100, Some((0.0, 1.0))).unwrap();
        assert!(h.densities.iter().all(|d| (d - 1.0).abs() < 0.05));
    }

    #[test]
    fn degenerate_histograms() {
        let h = histogram_pdf(&[3.0; 10], 5, None).unwrap();
        assert_eq!(h.occupied().iter().filter(|&&o| o).count(), 1);
        assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let h = histogram_pdf(&[0.1, 0.7, 2.9], 1, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.densities, vec![0.25]);

        let h = histogram_pdf(&[], 4, None).unwrap();
        assert_eq!(h.count, 0);
        assert!(h.densities.iter().all(|&d| d == 0.0));

        assert!(histogram_pdf(&[1.0], 4, Some((1.0, 1.0))).is_err());
        assert!(histogram_pdf(&[1.0], 0, None).is_err());
    }

    proptest! {
        #[test]
        fn histogram_mass_is_conserved(v in prop::collection::vec(-1e3f64..1e3, 1..300), bins in 1usize..120) {
            let h = histogram_pdf(&v, bins, None).unwrap();
            prop_assert_eq!(h.count, v.len());
            prop_assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(h.edges.windows(2).all(|e| e[1] > e[0]));
        }

        #[test]
        fn cost_is_monotone(m in 0.0f64..1e6, p in 0.0f64..1e7, e in 0.0f64..1e4, c in 0.0f64..1e3, d in 0.0f64..1e3) {
            let base = cost_estimate(m, p, e, c).total;
            prop_assert!(cost_estimate(m + d, p, e, c).total >= base);
            prop_assert!(cost_estimate(m, p + d, e, c).total >= base);
            prop_assert!(cost_estimate(m, p, e + d, c).total >= base);
            prop_assert!(cost_estimate(m, p, e, c + d).total >= base);
        }
    }

    #[test]
    fn identity_coverage() {
        let mut rng = crate::seed::rng(3);
        let v: Vec<f64> = (0..5000).map(|_| rng.random::<f64>().powi(3)).collect();
        let c = variable_coverage("s", &v, &v, 100).unwrap();
        assert_eq!(c.kl_full_to_sample, 0.0);
        assert_eq!(c.span_ratio, 1.0);
        assert_eq!(c.tail_capture, 1.0);
        let own = histogram_pdf(&v, 100, None).unwrap().occupied().iter().filter(|&&o| o).count();
        assert_eq!(c.occupied_bin_fraction, own as f64 / 100.0);
    }

    #[test]
    fn missing_upper_tail_halves_capture() {
        let full: Vec<f64> = (0..1000).map(f64::from).collect();
        let sample: Vec<f64> = (0..990).map(f64::from).collect();
        let c = variable_coverage("s", &sample, &full, 100).unwrap();
        assert!(c.tail_capture <= 0.5, "{}", c.tail_capture);
        assert!(c.kl_full_to_sample > 0.0);
        assert!(c.span_ratio < 1.0);
        for f in [c.occupied_bin_fraction, c.span_ratio, c.tail_capture] {
            assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn percentile_interpolates() {
        let s = [0.0, 10.0, 20.0];
        assert_eq!(percentile(&s, 50.0), 10.0);
        assert_eq!(percentile(&s, 25.0), 5.0);
        assert_eq!(percentile(&s, 100.0), 20.0);
    }

    #[test]
    fn cost_examples() {
        let c = cost_estimate(0.0, 1e6, 1000.0, 2.5);
        assert_eq!(c.total, 2.5);
        let full = cost_estimate(104_864.0, 1e6, 1000.0, 0.0);
        let half = cost_estimate(52_432.0, 1e6, 1000.0, 0.0);
        assert_eq!(half.training_cost_proxy * 2.0, full.training_cost_proxy);
        // 104,864 samples x 10^6 parameters x 1000 epochs x 1e-9.
        assert!((full.training_cost_proxy - 1.04864e5).abs() < 1e-6);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
