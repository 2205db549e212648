//! Point- and hypercube-selection strategies and the two-phase pipeline.

mod hypercubes;
mod pipeline;
mod points;
mod temporal;

use serde::{Deserialize, Serialize};

use crate::grid::{GridDims, HypercubeBlock};

pub use hypercubes::{hypercube_strengths, select_hypercubes_maxent, select_hypercubes_random};
pub use pipeline::{run_pipeline, run_pipeline_with, sample_block};
pub use points::{
    lhs_design, sample_full, sample_lhs, sample_maxent_points, sample_random, sample_stratified,
    sample_uips, MAXENT_HISTOGRAM_BINS,
};
pub use temporal::temporal_select;

/// One selected grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Timestep label.
    pub timestep: u64,
    /// Global grid indices.
    pub index: [usize; 3],
    /// Normalized `x, y, z, t`, each in `[0, 1]`.
    pub coords: [f64; 4],
    /// One value per entry of [`SampleSet::variables`].
    pub values: Vec<f64>,
}

impl SampleRecord {
    pub(crate) fn from_block(block: &HypercubeBlock, local: usize) -> Self {
        let index = block.global_ijk(local);
        let g: GridDims = block.grid;
        SampleRecord {
            timestep: block.timestep_label,
            index,
            coords: [
                GridDims::normalized(index[0], g.nx),
                GridDims::normalized(index[1], g.ny),
                GridDims::normalized(index[2], g.nz),
                GridDims::normalized(block.descriptor.timestep, g.nt),
            ],
            values: block.values.iter().map(|v| v[local]).collect(),
        }
    }
}

/// Builds records for the given local indices, in ascending index order.
pub(crate) fn records_for(block: &HypercubeBlock, mut locals: Vec<usize>) -> Vec<SampleRecord> {
    locals.sort_unstable();
    locals
        .into_iter()
        .map(|l| SampleRecord::from_block(block, l))
        .collect()
}

/// Which records came from which cube.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeRange {
    pub timestep: u64,
    pub cube_index: usize,
    pub origin: [usize; 3],
    pub extents: [usize; 3],
    /// Half-open record range `[start, end)`.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub phase1_seconds: f64,
    pub phase2_seconds: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.phase1_seconds + self.phase2_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub hypercube_method: String,
    pub seed: u64,
    pub config_hash: String,
    pub cubes: Vec<CubeRange>,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub variables: Vec<String>,
    pub records: Vec<SampleRecord>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_output(&self, other: &SampleSet) -> bool {
        let strip = |s: &SampleSet| {
            let mut p = s.provenance.clone();
            p.timings = PhaseTimings::default();
            p
        };
        self.variables == other.variables
            && self.records == other.records
            && strip(self) == strip(other)
    }

    /// Values of one variable across all records.
    pub fn column(&self, var: &str) -> Option<Vec<f64>> {
        let p = self.variables.iter().position(|v| v == var)?;
        Some(self.records.iter().map(|r| r.values[p]).collect())
    }
}
