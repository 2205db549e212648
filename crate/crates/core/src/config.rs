//! YAML run configuration.
//!
//! The document has a `shared` section describing the dataset, a `subsample`
//! section describing the sampling run, an optional `train` section that is
//! kept verbatim but otherwise ignored, and an optional `generate` section
//! consumed by the synthetic data generators.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_NUM_CLUSTERS: usize = 20;
pub const DEFAULT_CUBE_EXTENT: usize = 32;
pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_UIPS_BINS: usize = 10;
pub const DEFAULT_STRATA: usize = 4;
pub const DEFAULT_RATE: f64 = 0.1;

macro_rules! name_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn valid_names() -> String {
                Self::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::UnknownName {
                        kind: $kind,
                        name: s.to_string(),
                        valid: Self::valid_names(),
                    }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

name_enum!(
    /// Point-selection strategy applied inside each selected hypercube.
    PointMethod, "method", {
        Full => "full",
        Random => "random",
        Stratified => "stratified",
        Lhs => "lhs",
        Uips => "uips",
        Maxent => "maxent",
    }
);

name_enum!(
    /// Hypercube-selection strategy.
    HypercubeMethod, "hypercube method", {
        Maxent => "maxent",
        Random => "random",
    }
);

name_enum!(
    /// On-disk dataset format.
    DataFormat, "dtype", {
        SstBinary => "sst-binary",
        Csv => "csv",
    }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TimestepSelector {
    #[default]
    All,
    List(Vec<u64>),
}

impl TimestepSelector {
    pub fn includes(&self, label: u64) -> bool {
        match self {
            TimestepSelector::All => true,
            TimestepSelector::List(l) => l.contains(&label),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSetting {
    Fixed(u64),
    /// Draw a fresh seed from the OS at run time.
    Unseeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub dims: u8,
    pub dtype: DataFormat,
    pub path: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub input_vars: Vec<String>,
    pub output_vars: Vec<String>,
    pub cluster_var: String,
    pub gravity: Option<String>,
    pub timesteps: TimestepSelector,
    /// Keep every s-th point along x, y, z.
    pub skip: [usize; 3],
    pub precision: Precision,
}

impl DatasetConfig {
    /// Grid extents after skip strides.
    pub fn strided_extents(&self) -> [usize; 3] {
        let n = [self.nx, self.ny, self.nz];
        std::array::from_fn(|a| n[a].div_ceil(self.skip[a]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub hypercubes: HypercubeMethod,
    pub method: PointMethod,
    pub num_hypercubes: usize,
    /// Points per hypercube.
    pub num_samples: usize,
    pub num_clusters: usize,
    /// Cube extents (nxsl, nysl, nzsl).
    pub cube: [usize; 3],
    /// Stratum grid for stratified sampling.
    pub strata: [usize; 3],
    /// Histogram bins per feature axis for UIPS.
    pub uips_bins: usize,
    /// Histogram bins for coverage metrics.
    pub bins: usize,
}

impl SamplingConfig {
    pub fn cube_volume(&self) -> usize {
        self.cube.iter().product()
    }

    /// Rows one cube contributes to the output.
    pub fn points_per_cube(&self) -> usize {
        match self.method {
            PointMethod::Full => self.cube_volume(),
            _ => self.num_samples,
        }
    }
}

/// Raw `generate` section, validated by the synthetic module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GenerateSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vortices: Option<usize>,
    /// Flip the sign of every vortex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub sampling: SamplingConfig,
    pub seed: Option<SeedSetting>,
    /// Worker count; `None` uses every available core.
    pub workers: Option<usize>,
    pub fileprefix: Option<String>,
    /// Training section, retained verbatim.
    pub train: Option<serde_yaml::Mapping>,
    pub generate: Option<GenerateSection>,
}

impl RunConfig {
    pub fn resolved_seed(&self) -> u64 {
        match self.seed {
            Some(SeedSetting::Fixed(s)) => s,
            Some(SeedSetting::Unseeded) => rand::random(),
            None => 0,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(crate::exec::available_workers)
    }

    /// `train.window`, echoed into output names.
    pub fn window(&self) -> i64 {
        self.train
            .as_ref()
            .and_then(|t| t.get("window"))
            .and_then(serde_yaml::Value::as_i64)
            .unwrap_or(1)
    }

    fn train_number(&self, key: &str) -> Option<f64> {
        self.train
            .as_ref()
            .and_then(|t| t.get(key))
            .and_then(serde_yaml::Value::as_f64)
    }

    /// `train.epochs`, used only by the cost proxy. Defaults to 1000.
    pub fn train_epochs(&self) -> f64 {
        self.train_number("epochs").unwrap_or(1000.0)
    }

    /// `train.parameters`, used only by the cost proxy. Defaults to 10^6.
    pub fn train_parameters(&self) -> f64 {
        self.train_number("parameters").unwrap_or(1e6)
    }

    /// Expands `{hypercubes}`, `{num_hypercubes}`, `{method}`,
    /// `{num_samples}` and `{window}` in the configured file prefix.
    pub fn file_prefix(&self) -> String {
        let template = self.fileprefix.as_deref().unwrap_or(
            "SST-P1-H{hypercubes}-C{num_hypercubes}-X{method}-ns{num_samples}-window{window}",
        );
        template
            .replace("{hypercubes}", self.sampling.hypercubes.as_str())
            .replace("{num_hypercubes}", &self.sampling.num_hypercubes.to_string())
            .replace("{method}", self.sampling.method.as_str())
            .replace("{num_samples}", &self.sampling.num_samples.to_string())
            .replace("{window}", &self.window().to_string())
    }

    /// SHA-256 of the emitted config with the worker count removed, so runs
    /// that differ only in parallelism share a hash.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        hex::encode(Sha256::digest(emit_config(&c).as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.dims != 2 && d.dims != 3 {
            return Err(Error::Config(format!("dims must be 2 or 3, got {}", d.dims)));
        }
        for (key, v) in [("nx", d.nx), ("ny", d.ny), ("nz", d.nz)] {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        if d.dims == 2 && d.nz != 1 {
            return Err(Error::Config(format!("2D dataset requires nz = 1, got {}", d.nz)));
        }
        if d.skip.contains(&0) {
            return Err(Error::Config("skip strides must be positive".into()));
        }
        if d.input_vars.is_empty() {
            return Err(Error::Config("`input_vars` is empty".into()));
        }
        let s = &self.sampling;
        for (key, v) in [
            ("num_hypercubes", s.num_hypercubes),
            ("num_clusters", s.num_clusters),
            ("nxsl", s.cube[0]),
            ("nysl", s.cube[1]),
            ("nzsl", s.cube[2]),
            ("bins", s.bins),
            ("uips_bins", s.uips_bins),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        if s.strata.contains(&0) {
            return Err(Error::Config("`strata` entries must be positive".into()));
        }
        if s.method != PointMethod::Full {
            if s.num_samples == 0 {
                return Err(Error::Config("`num_samples` must be positive".into()));
            }
            if s.num_samples > s.cube_volume() {
                return Err(Error::Config(format!(
                    "num_samples {} exceeds cube volume {}",
                    s.num_samples,
                    s.cube_volume()
                )));
            }
        }
        if let Some(0) = self.workers {
            return Err(Error::Config("`workers` must be positive".into()));
        }
        Ok(())
    }
}

/// Number of points kept at sampling rate `rate` in a cube of `volume`
/// points, rounding half up.
pub fn samples_for_rate(volume: usize, rate: f64) -> usize {
    (volume as f64 * rate + 0.5).floor() as usize
}

// ---- raw document ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RawTimesteps {
    List(Vec<u64>),
    One(u64),
    Text(String),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawShared {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dims: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_vars: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_vars: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nx: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ny: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nz: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fileprefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timesteps: Option<RawTimesteps>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<RawScalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nxskip: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nyskip: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nzskip: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<RawScalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawSubsample {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hypercubes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_hypercubes: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_samples: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_clusters: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nxsl: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nysl: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nzsl: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strata: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uips_bins: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<RawScalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    workers: Option<i64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shared: Option<RawShared>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subsample: Option<RawSubsample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train: Option<serde_yaml::Mapping>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generate: Option<GenerateSection>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(key.to_string()))
}

fn positive(v: i64, key: &str) -> Result<usize> {
    if v <= 0 {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    } else {
        Ok(v as usize)
    }
}

fn opt_positive(v: Option<i64>, key: &str, default: usize) -> Result<usize> {
    v.map_or(Ok(default), |v| positive(v, key))
}

fn parse_seed(raw: RawScalar) -> Result<SeedSetting> {
    match raw {
        RawScalar::Int(v) => Ok(SeedSetting::Fixed(v as u64)),
        RawScalar::Text(t) if t.eq_ignore_ascii_case("unseeded") => Ok(SeedSetting::Unseeded),
        RawScalar::Text(t) => t
            .parse::<u64>()
            .map(SeedSetting::Fixed)
            .map_err(|_| Error::Config(format!("seed must be an integer or \"unseeded\", got `{t}`"))),
    }
}

fn parse_precision(raw: RawScalar) -> Result<Precision> {
    match raw {
        RawScalar::Int(4) => Ok(Precision::F32),
        RawScalar::Int(8) => Ok(Precision::F64),
        RawScalar::Text(t) if t == "f32" || t == "single" => Ok(Precision::F32),
        RawScalar::Text(t) if t == "f64" || t == "double" => Ok(Precision::F64),
        other => Err(Error::Config(format!(
            "precision must be 4 or 8 bytes, got {other:?}"
        ))),
    }
}

fn parse_timesteps(raw: RawTimesteps) -> Result<TimestepSelector> {
    match raw {
        RawTimesteps::List(l) => Ok(TimestepSelector::List(l)),
        RawTimesteps::One(t) => Ok(TimestepSelector::List(vec![t])),
        RawTimesteps::Text(t) if t.eq_ignore_ascii_case("all") => Ok(TimestepSelector::All),
        RawTimesteps::Text(t) => Err(Error::Config(format!(
            "timesteps must be \"all\" or a list of integers, got `{t}`"
        ))),
    }
}

/// Parses a YAML run configuration, applying defaults and validating.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawDocument =
        serde_yaml::from_str(text).map_err(|e| Error::Config(format!("YAML: {e}")))?;
    let shared = required(raw.shared, "shared")?;
    if raw.subsample.is_none() && raw.train.is_none() {
        return Err(Error::MissingKey("subsample".into()));
    }
    let sub = raw.subsample.unwrap_or_default();

    let dims = required(shared.dims, "dims")?;
    if dims != 2 && dims != 3 {
        return Err(Error::Config(format!("dims must be 2 or 3, got {dims}")));
    }
    let dims = dims as u8;
    let nx = positive(required(shared.nx, "nx")?, "nx")?;
    let ny = positive(required(shared.ny, "ny")?, "ny")?;
    let nz = if dims == 3 {
        positive(required(shared.nz, "nz")?, "nz")?
    } else {
        opt_positive(shared.nz, "nz", 1)?
    };
    let dataset = DatasetConfig {
        dims,
        dtype: shared
            .dtype
            .as_deref()
            .map_or(Ok(DataFormat::SstBinary), str::parse)?,
        path: sub.path.or(shared.path),
        nx,
        ny,
        nz,
        input_vars: required(shared.input_vars, "input_vars")?.into_vec(),
        output_vars: shared.output_vars.map(OneOrMany::into_vec).unwrap_or_default(),
        cluster_var: required(shared.cluster_var, "cluster_var")?,
        gravity: shared.gravity,
        timesteps: shared
            .timesteps
            .map_or(Ok(TimestepSelector::All), parse_timesteps)?,
        skip: [
            opt_positive(shared.nxskip, "nxskip", 1)?,
            opt_positive(shared.nyskip, "nyskip", 1)?,
            opt_positive(shared.nzskip, "nzskip", 1)?,
        ],
        precision: shared
            .precision
            .map_or(Ok(Precision::F64), parse_precision)?,
    };

    let default_extent = |n: usize| DEFAULT_CUBE_EXTENT.min(n);
    let strided = dataset.strided_extents();
    let cube = [
        opt_positive(sub.nxsl, "nxsl", default_extent(strided[0]))?,
        opt_positive(sub.nysl, "nysl", default_extent(strided[1]))?,
        opt_positive(sub.nzsl, "nzsl", default_extent(strided[2]))?,
    ];
    let method = sub
        .method
        .as_deref()
        .map_or(Ok(PointMethod::Maxent), str::parse)?;
    let volume: usize = cube.iter().product();
    let strata = match sub.strata {
        Some(v) if v.len() == 3 => [
            positive(v[0], "strata")?,
            positive(v[1], "strata")?,
            positive(v[2], "strata")?,
        ],
        Some(v) => {
            return Err(Error::Config(format!(
                "`strata` needs 3 entries, got {}",
                v.len()
            )))
        }
        None => std::array::from_fn(|a| DEFAULT_STRATA.min(cube[a])),
    };
    let sampling = SamplingConfig {
        hypercubes: sub
            .hypercubes
            .as_deref()
            .map_or(Ok(HypercubeMethod::Maxent), str::parse)?,
        method,
        num_hypercubes: opt_positive(sub.num_hypercubes, "num_hypercubes", 1)?,
        num_samples: opt_positive(
            sub.num_samples,
            "num_samples",
            samples_for_rate(volume, DEFAULT_RATE).max(1),
        )?,
        num_clusters: opt_positive(sub.num_clusters, "num_clusters", DEFAULT_NUM_CLUSTERS)?,
        cube,
        strata,
        uips_bins: opt_positive(sub.uips_bins, "uips_bins", DEFAULT_UIPS_BINS)?,
        bins: opt_positive(sub.bins, "bins", DEFAULT_BINS)?,
    };
    let seed = sub.seed.or(shared.seed).map(parse_seed).transpose()?;
    let workers = sub
        .workers
        .or(shared.workers)
        .map(|w| positive(w, "workers"))
        .transpose()?;

    let config = RunConfig {
        dataset,
        sampling,
        seed,
        workers,
        fileprefix: shared.fileprefix,
        train: raw.train,
        generate: raw.generate,
    };
    config.validate()?;
    Ok(config)
}

/// Serializes a config back to YAML. `parse_config(emit_config(c)) == c`.
pub fn emit_config(config: &RunConfig) -> String {
    let d = &config.dataset;
    let s = &config.sampling;
    let seed = config.seed.map(|s| match s {
        SeedSetting::Fixed(v) => RawScalar::Int(v as i64),
        SeedSetting::Unseeded => RawScalar::Text("unseeded".into()),
    });
    let raw = RawDocument {
        shared: Some(RawShared {
            dims: Some(d.dims as i64),
            dtype: Some(d.dtype.as_str().into()),
            input_vars: Some(OneOrMany::Many(d.input_vars.clone())),
            output_vars: Some(OneOrMany::Many(d.output_vars.clone())),
            cluster_var: Some(d.cluster_var.clone()),
            nx: Some(d.nx as i64),
            ny: Some(d.ny as i64),
            nz: Some(d.nz as i64),
            gravity: d.gravity.clone(),
            fileprefix: config.fileprefix.clone(),
            timesteps: Some(match &d.timesteps {
                TimestepSelector::All => RawTimesteps::Text("all".into()),
                TimestepSelector::List(l) => RawTimesteps::List(l.clone()),
            }),
            precision: Some(RawScalar::Int(d.precision.bytes() as i64)),
            nxskip: Some(d.skip[0] as i64),
            nyskip: Some(d.skip[1] as i64),
            nzskip: Some(d.skip[2] as i64),
            ..Default::default()
        }),
        subsample: Some(RawSubsample {
            hypercubes: Some(s.hypercubes.as_str().into()),
            num_hypercubes: Some(s.num_hypercubes as i64),
            method: Some(s.method.as_str().into()),
            path: d.path.clone(),
            num_samples: Some(s.num_samples as i64),
            num_clusters: Some(s.num_clusters as i64),
            nxsl: Some(s.cube[0] as i64),
            nysl: Some(s.cube[1] as i64),
            nzsl: Some(s.cube[2] as i64),
            strata: Some(s.strata.iter().map(|&v| v as i64).collect()),
            uips_bins: Some(s.uips_bins as i64),
            bins: Some(s.bins as i64),
            seed,
            workers: config.workers.map(|w| w as i64),
        }),
        train: config.train.clone(),
        generate: config.generate.clone(),
    };
    serde_yaml::to_string(&raw).expect("config serializes")
}
