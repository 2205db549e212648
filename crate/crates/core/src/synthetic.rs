//! Deterministic synthetic datasets.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::config::{GenerateSection, RunConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDataset, GridDims};
use crate::seed::{self, tag};

/// Kinematic viscosity of the Taylor-Green decay factor.
pub const TG_VISCOSITY: f64 = 0.01;

/// Scalar-field variable name (input and cluster variable).
pub const SCALAR_VAR: &str = "s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarKind {
    /// `exp(N(mu, sigma))`.
    Lognormal { mu: f64, sigma: f64 },
    /// Two-component Gaussian mixture with a shared sigma.
    Bimodal { means: [f64; 2], sigma: f64, weights: [f64; 2] },
    Gaussian { mean: f64, sigma: f64 },
}

impl ScalarKind {
    fn validate(&self) -> Result<()> {
        let sigma = match *self {
            ScalarKind::Lognormal { sigma, .. } | ScalarKind::Gaussian { sigma, .. } => sigma,
            ScalarKind::Bimodal { sigma, weights, .. } => {
                if weights.iter().any(|w| !(0.0..=1.0).contains(w)) || (weights[0] + weights[1] - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "mixture weights must be nonnegative and sum to 1, got {weights:?}"
                    )));
                }
                sigma
            }
        };
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakeParams {
    pub n_vortices: usize,
    pub time: f64,
    /// Negates every vortex strength.
    pub mirror: bool,
}

impl Default for WakeParams {
    fn default() -> Self {
        WakeParams {
            n_vortices: 8,
            time: 0.0,
            mirror: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    TaylorGreen { time: f64 },
    CylinderWake(WakeParams),
    Scalar(ScalarKind),
}

impl GeneratorKind {
    pub const NAMES: &'static [&'static str] =
        &["taylor_green", "cylinder_wake", "lognormal_field", "bimodal_field", "gaussian_field"];

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::TaylorGreen { .. } => "taylor_green",
            GeneratorKind::CylinderWake(_) => "cylinder_wake",
            GeneratorKind::Scalar(ScalarKind::Lognormal { .. }) => "lognormal_field",
            GeneratorKind::Scalar(ScalarKind::Bimodal { .. }) => "bimodal_field",
            GeneratorKind::Scalar(ScalarKind::Gaussian { .. }) => "gaussian_field",
        }
    }

    /// Input variables, output variables and cluster variable produced.
    pub fn roles(&self) -> (Vec<String>, Vec<String>, String) {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        match self {
            GeneratorKind::TaylorGreen { .. } => (s(&["u", "v", "w"]), vec![], "wz".into()),
            GeneratorKind::CylinderWake(_) => (s(&["u", "v"]), vec![], "wz".into()),
            GeneratorKind::Scalar(_) => (s(&[SCALAR_VAR]), vec![], SCALAR_VAR.into()),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A generator with its grid and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dims: GridDims,
    pub seed: u64,
}

/// Kind names accepted in a `generate` section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KindName {
    TaylorGreen,
    CylinderWake,
    Lognormal,
    Bimodal,
    Gaussian,
}

impl FromStr for KindName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "taylor_green" => KindName::TaylorGreen,
            "cylinder_wake" => KindName::CylinderWake,
            "lognormal_field" | "lognormal" => KindName::Lognormal,
            "bimodal_field" | "bimodal" => KindName::Bimodal,
            "gaussian_field" | "gaussian" => KindName::Gaussian,
            other => {
                return Err(Error::UnknownName {
                    kind: "generator",
                    name: other.to_string(),
                    valid: GeneratorKind::NAMES.join(", "),
                })
            }
        })
    }
}

impl GeneratorSpec {
    /// Builds a spec from a `generate` section and the dataset's grid.
    pub fn from_section(section: &GenerateSection, dims: u8, n: [usize; 3], fallback_seed: u64) -> Result<Self> {
        let nt = section.nt.unwrap_or(1);
        let grid = if dims == 2 {
            GridDims::planar(n[0], n[1], nt)?
        } else {
            GridDims::new(n[0], n[1], n[2], nt)?
        };
        let time = section.time.unwrap_or(0.0);
        let kind = match section.kind.parse::<KindName>()? {
            KindName::TaylorGreen => GeneratorKind::TaylorGreen { time },
            KindName::CylinderWake => GeneratorKind::CylinderWake(WakeParams {
                n_vortices: section.n_vortices.unwrap_or(WakeParams::default().n_vortices),
                time,
                mirror: section.mirror.unwrap_or(false),
            }),
            KindName::Lognormal => GeneratorKind::Scalar(ScalarKind::Lognormal {
                mu: section.mean.unwrap_or(0.0),
                sigma: section.sigma.unwrap_or(1.0),
            }),
            KindName::Gaussian => GeneratorKind::Scalar(ScalarKind::Gaussian {
                mean: section.mean.unwrap_or(0.0),
                sigma: section.sigma.unwrap_or(1.0),
            }),
            KindName::Bimodal => {
                let pair = |v: &Option<Vec<f64>>, default: [f64; 2], key: &str| -> Result<[f64; 2]> {
                    match v {
                        None => Ok(default),
                        Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
                        Some(v) => Err(Error::InvalidArgument(format!(
                            "`{key}` needs 2 entries, got {}",
                            v.len()
                        ))),
                    }
                };
                GeneratorKind::Scalar(ScalarKind::Bimodal {
                    means: pair(&section.means, [-5.0, 5.0], "means")?,
                    sigma: section.sigma.unwrap_or(0.5),
                    weights: pair(&section.weights, [0.9, 0.1], "weights")?,
                })
            }
        };
        Ok(GeneratorSpec {
            kind,
            dims: grid,
            seed: section.seed.unwrap_or(fallback_seed),
        })
    }

    /// Builds a spec from a config's `generate` section and `shared` grid.
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let section = config
            .generate
            .as_ref()
            .ok_or_else(|| Error::MissingKey("generate".into()))?;
        let d = &config.dataset;
        Self::from_section(section, d.dims, [d.nx, d.ny, d.nz], config.resolved_seed())
    }

    pub fn generate(&self) -> Result<GridDataset> {
        match self.kind {
            GeneratorKind::TaylorGreen { time } => gen_taylor_green(self.dims, time),
            GeneratorKind::CylinderWake(p) => gen_cylinder_wake(self.dims, p, self.seed),
            GeneratorKind::Scalar(k) => gen_scalar_field(k, self.dims, self.seed),
        }
    }
}

fn dataset(dims: GridDims, fields: Vec<(&str, Vec<f64>)>, kind: GeneratorKind) -> Result<GridDataset> {
    let (input, output, cluster) = kind.roles();
    let fields: BTreeMap<String, Vec<f64>> = fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    GridDataset::new(dims, fields, input, output, cluster)
}

/// Taylor-Green vortex on `[0, 2pi)^3`, decayed by `exp(-2 nu t)`:
///
/// u = sin x cos y cos z, v = -cos x sin y cos z, w = 0,
/// wz = dv/dx - du/dy = 2 sin x sin y cos z.
///
/// Timestep `s` of the grid is evaluated at time `t + s`.
pub fn gen_taylor_green(dims: GridDims, t: f64) -> Result<GridDataset> {
    if dims.dims != 3 {
        return Err(Error::InvalidArgument("Taylor-Green needs a 3D grid".into()));
    }
    let coord = |i: usize, n: usize| 2.0 * PI * i as f64 / n as f64;
    let len = dims.len();
    let (mut u, mut v, mut wz) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for s in 0..dims.nt {
        let decay = (-2.0 * TG_VISCOSITY * (t + s as f64)).exp();
        for k in 0..dims.nz {
            let cz = coord(k, dims.nz).cos();
            for j in 0..dims.ny {
                let (sy, cy) = coord(j, dims.ny).sin_cos();
                for i in 0..dims.nx {
                    let (sx, cx) = coord(i, dims.nx).sin_cos();
                    let p = dims.flat(s, i, j, k);
                    u[p] = decay * sx * cy * cz;
                    v[p] = -decay * cx * sy * cz;
                    wz[p] = 2.0 * decay * sx * sy * cz;
                }
            }
        }
    }
    let w = vec![0.0; len];
    dataset(
        dims,
        vec![("u", u), ("v", v), ("w", w), ("wz", wz)],
        GeneratorKind::TaylorGreen { time: t },
    )
}

const WAKE_LENGTH: f64 = 8.0;
const WAKE_HEIGHT: f64 = 4.0;
const WAKE_ORIGIN: f64 = 1.5;
const WAKE_SPACING: f64 = 0.8;
const WAKE_OFFSET: f64 = 0.3;
const WAKE_CORE: f64 = 0.2;
const WAKE_CIRCULATION: f64 = 1.0;
const WAKE_SPEED: f64 = 0.5;
const WAKE_JITTER: f64 = 0.05;

/// Vortex centers and circulations of a staggered street.
fn wake_vortices(params: WakeParams, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = seed::stream(seed, &[tag::GENERATOR, 0]);
    let sign = if params.mirror { -1.0 } else { 1.0 };
    (0..params.n_vortices)
        .map(|k| {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            let jx = WAKE_JITTER * (2.0 * rng.random::<f64>() - 1.0);
            let jy = WAKE_JITTER * (2.0 * rng.random::<f64>() - 1.0);
            let x = WAKE_ORIGIN + k as f64 * WAKE_SPACING + WAKE_SPEED * params.time + jx;
            let y = alt * WAKE_OFFSET + jy;
            (x, y, sign * alt * WAKE_CIRCULATION)
        })
        .collect()
}

/// Cylinder-wake stand-in on `[0, 8) x [-2, 2)`: a staggered street of
/// alternating Gaussian (Lamb-Oseen) vortices downstream of the origin,
/// advected by the mean flow. Fields are the induced velocity `u, v` and
/// the vorticity `wz`.
pub fn gen_cylinder_wake(dims: GridDims, params: WakeParams, seed: u64) -> Result<GridDataset> {
    if dims.dims != 2 {
        return Err(Error::InvalidArgument("cylinder wake needs a 2D grid".into()));
    }
    let len = dims.len();
    let (mut u, mut v, mut wz) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let rc2 = WAKE_CORE * WAKE_CORE;
    for s in 0..dims.nt {
        let vortices = wake_vortices(
            WakeParams {
                time: params.time + s as f64,
                ..params
            },
            seed,
        );
        for j in 0..dims.ny {
            let y = WAKE_HEIGHT * j as f64 / dims.ny as f64 - WAKE_HEIGHT / 2.0;
            for i in 0..dims.nx {
                let x = WAKE_LENGTH * i as f64 / dims.nx as f64;
                let p = dims.flat(s, i, j, 0);
                for &(xc, yc, gamma) in &vortices {
                    let (dx, dy) = (x - xc, y - yc);
                    let r2 = dx * dx + dy * dy;
                    let g = (-r2 / rc2).exp();
                    wz[p] += gamma / (PI * rc2) * g;
                    // Tangential speed over r: gamma (1 - g) / (2 pi r^2).
                    let k = if r2 > 0.0 { gamma * (1.0 - g) / (2.0 * PI * r2) } else { 0.0 };
                    u[p] -= k * dy;
                    v[p] += k * dx;
                }
            }
        }
    }
    dataset(
        dims,
        vec![("u", u), ("v", v), ("wz", wz)],
        GeneratorKind::CylinderWake(params),
    )
}

/// I.i.d. draws from `kind` at every grid point, stored as variable `s`.
/// Each `(timestep, z-plane)` uses its own derived stream.
pub fn gen_scalar_field(kind: ScalarKind, dims: GridDims, seed: u64) -> Result<GridDataset> {
    kind.validate()?;
    let plane = dims.nx * dims.ny;
    let planes = dims.nt * dims.nz;
    let draw = |p: usize| -> Vec<f64> {
        let mut rng = seed::stream(seed, &[tag::GENERATOR, p as u64]);
        match kind {
            ScalarKind::Gaussian { mean, sigma } => {
                let d = Normal::new(mean, sigma).expect("validated");
                (0..plane).map(|_| d.sample(&mut rng)).collect()
            }
            ScalarKind::Lognormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).expect("validated");
                (0..plane).map(|_| d.sample(&mut rng)).collect()
            }
            ScalarKind::Bimodal { means, sigma, weights } => {
                let lo = Normal::new(means[0], sigma).expect("validated");
                let hi = Normal::new(means[1], sigma).expect("validated");
                (0..plane)
                    .map(|_| {
                        if rng.random::<f64>() < weights[0] {
                            lo.sample(&mut rng)
                        } else {
                            hi.sample(&mut rng)
                        }
                    })
                    .collect()
            }
        }
    };
    let values: Vec<f64> = exec::map_range(planes, draw).into_iter().flatten().collect();
    dataset(dims, vec![(SCALAR_VAR, values)], GeneratorKind::Scalar(kind))
}
