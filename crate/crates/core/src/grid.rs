//! Gridded dataset model and hypercube partitioning.
//!
//! All field arrays use x-fastest ordering: the flat index of grid point
//! `(t, i, j, k)` is `i + nx * (j + ny * (k + nz * t))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    /// Spatial dimensionality, 2 or 3. 2D grids are stored with `nz == 1`.
    pub dims: u8,
}

impl GridDims {
    pub fn new(nx: usize, ny: usize, nz: usize, nt: usize) -> Result<Self> {
        Self::validated(GridDims {
            nx,
            ny,
            nz,
            nt,
            dims: 3,
        })
    }

    pub fn planar(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::validated(GridDims {
            nx,
            ny,
            nz: 1,
            nt,
            dims: 2,
        })
    }

    pub fn validated(d: GridDims) -> Result<Self> {
        if d.nx == 0 || d.ny == 0 || d.nz == 0 || d.nt == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid extents must be positive, got {}x{}x{} with {} timesteps",
                d.nx, d.ny, d.nz, d.nt
            )));
        }
        match d.dims {
            3 => Ok(d),
            2 if d.nz == 1 => Ok(d),
            2 => Err(Error::InvalidArgument(format!(
                "2D grid must have nz = 1, got {}",
                d.nz
            ))),
            other => Err(Error::InvalidArgument(format!(
                "dims must be 2 or 3, got {other}"
            ))),
        }
    }

    /// Points in one spatial snapshot.
    pub fn spatial_len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flat(&self, t: usize, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * (k + self.nz * t))
    }

    /// Normalized coordinate in `[0, 1]` of index `i` along an axis of `n` points.
    #[inline]
    pub fn normalized(i: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        }
    }
}

/// Named scalar fields on a regular grid plus the variable roles.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    dims: GridDims,
    fields: BTreeMap<String, Vec<f64>>,
    /// Label of each stored timestep (file index on disk).
    timesteps: Vec<u64>,
    input_vars: Vec<String>,
    output_vars: Vec<String>,
    cluster_var: String,
}

impl GridDataset {
    pub fn new(
        dims: GridDims,
        fields: BTreeMap<String, Vec<f64>>,
        input_vars: Vec<String>,
        output_vars: Vec<String>,
        cluster_var: impl Into<String>,
    ) -> Result<Self> {
        let timesteps = (0..dims.nt as u64).collect();
        Self::with_timesteps(dims, fields, timesteps, input_vars, output_vars, cluster_var)
    }

    pub fn with_timesteps(
        dims: GridDims,
        fields: BTreeMap<String, Vec<f64>>,
        timesteps: Vec<u64>,
        input_vars: Vec<String>,
        output_vars: Vec<String>,
        cluster_var: impl Into<String>,
    ) -> Result<Self> {
        let dims = GridDims::validated(dims)?;
        let cluster_var = cluster_var.into();
        if timesteps.len() != dims.nt {
            return Err(Error::InvalidArgument(format!(
                "{} timestep labels for nt = {}",
                timesteps.len(),
                dims.nt
            )));
        }
        for (name, values) in &fields {
            if values.len() != dims.len() {
                return Err(Error::InvalidArgument(format!(
                    "field `{name}` has {} values, grid needs {}",
                    values.len(),
                    dims.len()
                )));
            }
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    var: name.clone(),
                    timestep: index / dims.spatial_len(),
                    index,
                });
            }
        }
        let ds = GridDataset {
            dims,
            fields,
            timesteps,
            input_vars,
            output_vars,
            cluster_var,
        };
        for name in ds.role_vars() {
            if !ds.fields.contains_key(&name) {
                return Err(Error::InvalidArgument(format!(
                    "role variable `{name}` has no field"
                )));
            }
        }
        Ok(ds)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn timesteps(&self) -> &[u64] {
        &self.timesteps
    }

    pub fn input_vars(&self) -> &[String] {
        &self.input_vars
    }

    pub fn output_vars(&self) -> &[String] {
        &self.output_vars
    }

    pub fn cluster_var(&self) -> &str {
        &self.cluster_var
    }

    pub fn fields(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("no field named `{name}`")))
    }

    /// Input, output and cluster variables in that order, deduplicated.
    pub fn role_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = self
            .input_vars
            .iter()
            .chain(&self.output_vars)
            .chain(std::iter::once(&self.cluster_var));
        for v in all {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }

    /// One spatial snapshot of a field.
    pub fn snapshot(&self, name: &str, t: usize) -> Result<&[f64]> {
        let n = self.dims.spatial_len();
        if t >= self.dims.nt {
            return Err(Error::OutOfBounds(format!(
                "timestep {t} >= nt {}",
                self.dims.nt
            )));
        }
        Ok(&self.field(name)?[t * n..(t + 1) * n])
    }

    /// Copies the values of `var` inside the block described by `desc`.
    pub fn block_values(&self, desc: &BlockDescriptor, var: &str) -> Result<Vec<f64>> {
        desc.check_within(&self.dims)?;
        let field = self.field(var)?;
        let [sx, sy, sz] = desc.extents;
        let [i0, j0, k0] = desc.origin;
        let mut out = Vec::with_capacity(desc.volume());
        for k in k0..k0 + sz {
            for j in j0..j0 + sy {
                let start = self.dims.flat(desc.timestep, i0, j, k);
                out.extend_from_slice(&field[start..start + sx]);
            }
        }
        Ok(out)
    }
}

/// Location of an axis-aligned sub-block: origin, extents and timestep index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDescriptor {
    pub origin: [usize; 3],
    pub extents: [usize; 3],
    pub timestep: usize,
}

impl BlockDescriptor {
    pub fn volume(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn check_within(&self, dims: &GridDims) -> Result<()> {
        let limits = [dims.nx, dims.ny, dims.nz];
        for axis in 0..3 {
            if self.extents[axis] == 0 || self.origin[axis] + self.extents[axis] > limits[axis] {
                return Err(Error::OutOfBounds(format!(
                    "block origin {:?} extents {:?} exceeds grid {}x{}x{}",
                    self.origin, self.extents, dims.nx, dims.ny, dims.nz
                )));
            }
        }
        if self.timestep >= dims.nt {
            return Err(Error::OutOfBounds(format!(
                "timestep {} >= nt {}",
                self.timestep, dims.nt
            )));
        }
        Ok(())
    }
}

/// A self-contained copy of one hypercube: location plus the role variables'
/// values in local x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct HypercubeBlock {
    pub descriptor: BlockDescriptor,
    /// Dimensions of the parent grid, for coordinate normalization.
    pub grid: GridDims,
    /// Label of the block's timestep.
    pub timestep_label: u64,
    pub variables: Vec<String>,
    /// One array per entry of `variables`, each of length `volume()`.
    pub values: Vec<Vec<f64>>,
}

impl HypercubeBlock {
    pub fn volume(&self) -> usize {
        self.descriptor.volume()
    }

    pub fn extents(&self) -> [usize; 3] {
        self.descriptor.extents
    }

    pub fn var(&self, name: &str) -> Result<&[f64]> {
        self.variables
            .iter()
            .position(|v| v == name)
            .map(|p| self.values[p].as_slice())
            .ok_or_else(|| Error::InvalidArgument(format!("block has no variable `{name}`")))
    }

    /// Local `(i, j, k)` of a local flat index.
    #[inline]
    pub fn local_ijk(&self, local: usize) -> [usize; 3] {
        let [sx, sy, _] = self.descriptor.extents;
        [local % sx, (local / sx) % sy, local / (sx * sy)]
    }

    #[inline]
    pub fn local_flat(&self, [i, j, k]: [usize; 3]) -> usize {
        let [sx, sy, _] = self.descriptor.extents;
        i + sx * (j + sy * k)
    }

    /// Global grid indices of a local flat index.
    #[inline]
    pub fn global_ijk(&self, local: usize) -> [usize; 3] {
        let l = self.local_ijk(local);
        let o = self.descriptor.origin;
        [o[0] + l[0], o[1] + l[1], o[2] + l[2]]
    }
}

/// Number of blocks per axis for a partition with the given extents.
pub fn blocks_per_axis(dims: &GridDims, extents: [usize; 3]) -> Result<[usize; 3]> {
    let limits = [dims.nx, dims.ny, dims.nz];
    let mut counts = [0; 3];
    for axis in 0..3 {
        if extents[axis] == 0 {
            return Err(Error::InvalidArgument("cube extents must be >= 1".into()));
        }
        if extents[axis] > limits[axis] {
            return Err(Error::OutOfBounds(format!(
                "cube extents {:?} larger than grid {}x{}x{}",
                extents, dims.nx, dims.ny, dims.nz
            )));
        }
        counts[axis] = limits[axis] / extents[axis];
    }
    Ok(counts)
}

/// Tiles the largest extent-aligned prefix of the grid with disjoint blocks,
/// x-fastest over block indices. Trailing points that do not fill a whole
/// block are dropped, with a warning.
pub fn partition_hypercubes(
    dims: &GridDims,
    extents: [usize; 3],
    timestep: usize,
) -> Result<Vec<BlockDescriptor>> {
    let [bx, by, bz] = blocks_per_axis(dims, extents)?;
    if timestep >= dims.nt {
        return Err(Error::OutOfBounds(format!(
            "timestep {timestep} >= nt {}",
            dims.nt
        )));
    }
    let covered = bx * by * bz * extents.iter().product::<usize>();
    let dropped = dims.spatial_len() - covered;
    if dropped > 0 {
        log::warn!(
            "grid {}x{}x{} not divisible by cube {:?}: {} boundary points excluded",
            dims.nx,
            dims.ny,
            dims.nz,
            extents,
            dropped
        );
    }
    let mut out = Vec::with_capacity(bx * by * bz);
    for c in 0..bz {
        for b in 0..by {
            for a in 0..bx {
                out.push(BlockDescriptor {
                    origin: [a * extents[0], b * extents[1], c * extents[2]],
                    extents,
                    timestep,
                });
            }
        }
    }
    Ok(out)
}

/// Copies a block's role variables out of the dataset.
pub fn extract_block(dataset: &GridDataset, desc: &BlockDescriptor) -> Result<HypercubeBlock> {
    desc.check_within(&dataset.dims())?;
    let variables = dataset.role_vars();
    let values = variables
        .iter()
        .map(|v| dataset.block_values(desc, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(HypercubeBlock {
        descriptor: *desc,
        grid: dataset.dims(),
        timestep_label: dataset.timesteps()[desc.timestep],
        variables,
        values,
    })
}
