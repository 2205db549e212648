//! Two-phase orchestration: hypercube selection, then point selection.

use std::time::Instant;

use super::hypercubes::{select_hypercubes_random, select_pooled};
use super::points::{
    sample_full, sample_lhs, sample_maxent_points, sample_random, sample_stratified, sample_uips,
};
use super::{CubeRange, PhaseTimings, Provenance, SampleRecord, SampleSet};
use crate::config::{HypercubeMethod, PointMethod, RunConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{extract_block, partition_hypercubes, BlockDescriptor, GridDataset, HypercubeBlock};
use crate::seed::{self, tag};

/// Runs the configured point sampler on one block.
pub fn sample_block(block: &HypercubeBlock, config: &RunConfig, seed: u64) -> Result<Vec<SampleRecord>> {
    let s = &config.sampling;
    let n = s.num_samples;
    match s.method {
        PointMethod::Full => Ok(sample_full(block)),
        PointMethod::Random => sample_random(block, n, seed),
        PointMethod::Stratified => {
            let e = block.extents();
            let strata = std::array::from_fn(|a| s.strata[a].min(e[a]));
            sample_stratified(block, n, strata, seed)
        }
        PointMethod::Lhs => sample_lhs(block, n, seed),
        PointMethod::Uips => sample_uips(block, n, s.uips_bins, &config.dataset.input_vars, seed),
        PointMethod::Maxent => {
            sample_maxent_points(block, &config.dataset.cluster_var, s.num_clusters, n, seed)
        }
    }
}

/// Runs the pipeline with the config's seed and worker count.
pub fn run_pipeline(config: &RunConfig, dataset: &GridDataset) -> Result<SampleSet> {
    run_pipeline_with(config, dataset, config.resolved_seed(), config.workers())
}

struct Selected {
    label: u64,
    cube_index: usize,
    desc: BlockDescriptor,
}

fn phase1(config: &RunConfig, dataset: &GridDataset, seed: u64) -> Result<Vec<Selected>> {
    let s = &config.sampling;
    let mut selected = Vec::new();
    for (t, &label) in dataset.timesteps().iter().enumerate() {
        if !config.dataset.timesteps.includes(label) {
            continue;
        }
        let blocks = partition_hypercubes(&dataset.dims(), s.cube, t)?;
        let m = s.num_hypercubes;
        if m > blocks.len() {
            return Err(Error::InvalidArgument(format!(
                "num_hypercubes {m} exceeds the {} hypercubes of timestep {label}",
                blocks.len()
            )));
        }
        let phase_seed = seed::derive(seed, &[tag::PHASE1, label]);
        let mut picks = if m == blocks.len() {
            (0..m).collect()
        } else {
            match s.hypercubes {
                HypercubeMethod::Random => select_hypercubes_random(blocks.len(), m, phase_seed)?,
                HypercubeMethod::Maxent => {
                    let var = dataset.cluster_var();
                    let per_block = exec::map(&blocks, |d| dataset.block_values(d, var));
                    let mut pooled = Vec::with_capacity(blocks.len() * blocks[0].volume());
                    let mut lens = Vec::with_capacity(blocks.len());
                    for values in per_block {
                        let values = values?;
                        lens.push(values.len());
                        pooled.extend_from_slice(&values);
                    }
                    select_pooled(&pooled, &lens, s.num_clusters, m, phase_seed)?
                }
            }
        };
        picks.sort_unstable();
        selected.extend(picks.into_iter().map(|c| Selected {
            label,
            cube_index: c,
            desc: blocks[c],
        }));
    }
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no timesteps selected".into()));
    }
    Ok(selected)
}

/// Runs the pipeline with an explicit seed and worker count.
///
/// Each cube draws from its own stream keyed on (seed, timestep, cube), so
/// the output is identical for every worker count.
pub fn run_pipeline_with(
    config: &RunConfig,
    dataset: &GridDataset,
    seed: u64,
    workers: usize,
) -> Result<SampleSet> {
    if dataset.cluster_var() != config.dataset.cluster_var {
        return Err(Error::InvalidArgument(format!(
            "dataset cluster variable `{}` differs from config `{}`",
            dataset.cluster_var(),
            config.dataset.cluster_var
        )));
    }
    let (selected, per_cube, timings) = exec::with_workers(workers, || -> Result<_> {
        let start = Instant::now();
        let selected = phase1(config, dataset, seed)?;
        let phase1_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let per_cube = exec::map(&selected, |sel| {
            let block = extract_block(dataset, &sel.desc)?;
            let cube_seed = seed::derive(seed, &[tag::PHASE2, sel.label, sel.cube_index as u64]);
            sample_block(&block, config, cube_seed)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let phase2_seconds = start.elapsed().as_secs_f64();
        Ok((
            selected,
            per_cube,
            PhaseTimings {
                phase1_seconds,
                phase2_seconds,
            },
        ))
    })?;

    let mut records = Vec::with_capacity(per_cube.iter().map(Vec::len).sum());
    let mut cubes = Vec::with_capacity(selected.len());
    for (sel, recs) in selected.iter().zip(per_cube) {
        let start = records.len();
        records.extend(recs);
        cubes.push(CubeRange {
            timestep: sel.label,
            cube_index: sel.cube_index,
            origin: sel.desc.origin,
            extents: sel.desc.extents,
            start,
            end: records.len(),
        });
    }
    Ok(SampleSet {
        variables: dataset.role_vars(),
        records,
        provenance: Provenance {
            method: config.sampling.method.as_str().to_string(),
            hypercube_method: config.sampling.hypercubes.as_str().to_string(),
            seed,
            config_hash: config.content_hash(),
            cubes,
            timings,
        },
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;
    use crate::config::parse_config;
    use crate::grid::GridDims;

    fn config(extra: &str, n: usize) -> RunConfig {
        parse_config(&format!(
            "shared:\n  dims: 3\n  nx: {n}\n  ny: {n}\n  nz: {n}\n  input_vars: [a, b]\n  output_vars: c\n  cluster_var: b\nsubsample:\n{extra}"
        ))
        .unwrap()
    }

    fn dataset(n: usize, nt: usize) -> GridDataset {
        let dims = GridDims::new(n, n, n, nt).unwrap();
        let len = dims.len();
        let mut fields = BTreeMap::new();
        fields.insert("a".to_string(), (0..len).map(|p| p as f64).collect());
        fields.insert("b".to_string(), (0..len).map(|p| ((p * 7919) % 1009) as f64).collect());
        fields.insert("c".to_string(), (0..len).map(|p| (p as f64).sin()).collect());
        GridDataset::new(dims, fields, vec!["a".into(), "b".into()], vec!["c".into()], "b").unwrap()
    }

    #[test]
    fn random_full_gives_whole_cubes() {
        let cfg = config("  hypercubes: random\n  method: full\n  num_hypercubes: 2\n  nxsl: 32\n  nysl: 32\n  nzsl: 32\n", 64);
        let set = run_pipeline_with(&cfg, &dataset(64, 1), 4, 1).unwrap();
        assert_eq!(set.len(), 2 * 32768);
        assert_eq!(set.provenance.cubes.len(), 2);
        assert_eq!(set.provenance.cubes[1].end - set.provenance.cubes[1].start, 32768);
    }

    #[test]
    fn records_match_dataset_values_and_are_distinct() {
        let ds = dataset(32, 2);
        for method in ["random", "stratified", "lhs", "uips", "maxent"] {
            let cfg = config(&format!("  method: {method}\n  num_hypercubes: 3\n  nxsl: 8\n  nysl: 8\n  nzsl: 8\n  num_samples: 70\n"), 32);
            let set = run_pipeline_with(&cfg, &ds, 11, 2).unwrap();
            assert_eq!(set.len(), 2 * 3 * 70, "{method}");
            let mut seen = HashSet::new();
            for r in &set.records {
                assert!(seen.insert((r.timestep, r.index)), "{method}");
                let t = r.timestep as usize;
                for (v, name) in set.variables.iter().enumerate() {
                    let [i, j, k] = r.index;
                    let f = ds.field(name).unwrap();
                    assert_eq!(r.values[v], f[ds.dims().flat(t, i, j, k)]);
                }
            }
            for c in &set.provenance.cubes {
                for r in &set.records[c.start..c.end] {
                    for a in 0..3 {
                        assert!(r.index[a] >= c.origin[a] && r.index[a] < c.origin[a] + c.extents[a]);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_and_worker_invariant() {
        let ds = dataset(32, 1);
        let cfg = config("  num_hypercubes: 5\n  nxsl: 8\n  nysl: 8\n  nzsl: 8\n  num_samples: 40\n", 32);
        let a = run_pipeline_with(&cfg, &ds, 9, 1).unwrap();
        let b = run_pipeline_with(&cfg, &ds, 9, 8).unwrap();
        let c = run_pipeline_with(&cfg, &ds, 9, 1).unwrap();
        assert!(a.same_output(&b));
        assert!(a.same_output(&c));
        let d = run_pipeline_with(&cfg, &ds, 10, 1).unwrap();
        assert!(!a.same_output(&d));
    }

    #[test]
    fn too_many_hypercubes_is_an_error() {
        let cfg = config("  num_hypercubes: 9\n  nxsl: 8\n  nysl: 8\n  nzsl: 8\n  num_samples: 4\n", 16);
        assert!(run_pipeline_with(&cfg, &dataset(16, 1), 0, 1).is_err());
    }

    #[test]
    fn timestep_selector_filters() {
        let mut cfg = config("  num_hypercubes: 1\n  nxsl: 8\n  nysl: 8\n  nzsl: 8\n  num_samples: 4\n", 16);
        cfg.dataset.timesteps = crate::config::TimestepSelector::List(vec![1]);
        let set = run_pipeline_with(&cfg, &dataset(16, 3), 0, 1).unwrap();
        assert!(set.records.iter().all(|r| r.timestep == 1));
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn appendix_shape_record_count() {
        let dims = GridDims::new(512, 512, 256, 1).unwrap();
        let len = dims.len();
        let mut fields = BTreeMap::new();
        fields.insert(
            "pv".to_string(),
            (0..len).map(|p| ((p % 512) as f64 * 0.01).sin() + (p / 262_144) as f64 * 0.001).collect(),
        );
        let ds = GridDataset::new(dims, fields, vec!["pv".into()], vec![], "pv").unwrap();
        let cfg = parse_config(
            "shared:\n  dims: 3\n  nx: 512\n  ny: 512\n  nz: 256\n  input_vars: [pv]\n  cluster_var: pv\nsubsample:\n  hypercubes: maxent\n  method: random\n  num_hypercubes: 32\n  num_clusters: 20\n  num_samples: 3277\n  nxsl: 32\n  nysl: 32\n  nzsl: 32\n",
        )
        .unwrap();
        let set = run_pipeline_with(&cfg, &ds, 0, 1).unwrap();
        assert_eq!(set.len(), 104_864);
        assert_eq!(set.provenance.cubes.len(), 32);
    }
}
