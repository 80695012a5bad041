//! Weight generators: constants, power singularities, dyadic martingale
//! cascades, single-cell spikes and weights read from files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mesh::{DyadicMesh, GridFunction, Weight};

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    Const(f64),
    /// `|x − c|^α` about the center `c` of the unit cube, clipped at half a
    /// cell width.
    Power(f64),
    /// Multiplicative dyadic martingale: sibling factors come in pairs
    /// `1 ± ηξ` with `ξ` uniform on `[0,1]`, so every factor is uniform on
    /// `[1−η, 1+η]` and every parent average is exactly preserved.
    Cascade { eta: f64, seed: u64 },
    /// 1 everywhere except `value` on one cell.
    Spike { cell: usize, value: f64 },
    File(PathBuf),
}

impl WeightSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let args: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        let num = |k: usize, what: &str| -> Result<f64> {
            args.get(k)
                .ok_or_else(|| Error::spec(spec, format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|_| Error::spec(spec, format!("{what} is not a number")))
        };
        let int = |k: usize, what: &str| -> Result<u64> {
            args.get(k)
                .ok_or_else(|| Error::spec(spec, format!("missing {what}")))?
                .parse::<u64>()
                .map_err(|_| Error::spec(spec, format!("{what} is not a nonnegative integer")))
        };
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::spec(spec, format!("expected {n} argument(s), got {}", args.len())))
            }
        };
        let parsed = match kind {
            "const" => {
                want(1)?;
                Self::Const(num(0, "constant")?)
            }
            "power" => {
                want(1)?;
                Self::Power(num(0, "alpha")?)
            }
            "cascade" => {
                want(2)?;
                Self::Cascade {
                    eta: num(0, "eta")?,
                    seed: int(1, "seed")?,
                }
            }
            "spike" => {
                want(2)?;
                Self::Spike {
                    cell: int(0, "cell")? as usize,
                    value: num(1, "mass")?,
                }
            }
            "file" => {
                if rest.is_empty() {
                    return Err(Error::spec(spec, "missing path"));
                }
                Self::File(PathBuf::from(rest))
            }
            _ => return Err(Error::spec(spec, "unknown weight generator")),
        };
        parsed.validate().map_err(|e| match e {
            Error::InvalidSpec { .. } => e,
            other => Error::spec(spec, other.to_string()),
        })?;
        Ok(parsed)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Const(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Domain(format!("constant {c} must be positive")))
            }
            Self::Power(a) if !a.is_finite() => Err(Error::Domain("alpha must be finite".into())),
            Self::Cascade { eta, .. } if !(0.0..1.0).contains(&eta) => {
                Err(Error::Domain(format!("cascade needs 0 <= eta < 1, got {eta}")))
            }
            Self::Spike { value, .. } if !(value > 0.0 && value.is_finite()) => {
                Err(Error::Domain(format!("spike value {value} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn generate(&self, mesh: DyadicMesh) -> Result<Weight> {
        self.validate()?;
        match self {
            Self::Const(c) => Weight::constant(mesh, *c),
            Self::Power(alpha) => power_weight(mesh, *alpha),
            Self::Cascade { eta, seed } => Ok(cascade(mesh, *eta, *seed, 1.0)),
            Self::Spike { cell, value } => {
                if *cell >= mesh.cell_count() {
                    return Err(Error::Domain(format!(
                        "spike cell {cell} outside a mesh of {} cells",
                        mesh.cell_count()
                    )));
                }
                let mut v = vec![1.0; mesh.cell_count()];
                v[*cell] = *value;
                Weight::new(GridFunction::new(mesh, v)?)
            }
            Self::File(path) => {
                let f = GridFunction::read_file(path)?;
                if f.mesh() != mesh {
                    return Err(Error::MeshMismatch(format!(
                        "{} holds a d={} L={} grid, expected d={} L={}",
                        path.display(),
                        f.mesh().dim(),
                        f.mesh().depth(),
                        mesh.dim(),
                        mesh.depth()
                    )));
                }
                Weight::new(f)
            }
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(c) => write!(f, "const:{c}"),
            Self::Power(a) => write!(f, "power:{a}"),
            Self::Cascade { eta, seed } => write!(f, "cascade:{eta},{seed}"),
            Self::Spike { cell, value } => write!(f, "spike:{cell},{value}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for WeightSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `generate_weight("cascade:0.5,7")` and friends in one call.
pub fn generate_weight(spec: &str, mesh: DyadicMesh) -> Result<Weight> {
    WeightSpec::parse(spec)?.generate(mesh)
}

fn power_weight(mesh: DyadicMesh, alpha: f64) -> Result<Weight> {
    let d = mesh.dim() as f64;
    if alpha <= -d {
        return Err(Error::Domain(format!(
            "|x|^{alpha} is not locally integrable in dimension {d}"
        )));
    }
    let floor = 0.5 / mesh.cells_per_side() as f64;
    let f = GridFunction::from_fn(mesh, |x| {
        let r = if mesh.dim() == 1 {
            (x[0] - 0.5).abs()
        } else {
            (x[0] - 0.5).hypot(x[1] - 0.5)
        };
        r.max(floor).powf(alpha)
    });
    Weight::new(f)
}

/// Seed of the independent stream that splits cube `(level, index)`.
fn cube_seed(seed: u64, level: u32, index: usize) -> u64 {
    // splitmix64 finalizer over the packed triple
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(u64::from(level) + 1))
        .wrapping_add((index as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The cascade of `cascade:eta,seed` with every sibling sign flipped, so the
/// two weights are large on complementary halves at every split.
pub fn opposed_cascade(mesh: DyadicMesh, eta: f64, seed: u64) -> Result<Weight> {
    WeightSpec::Cascade { eta, seed }.validate()?;
    Ok(cascade(mesh, eta, seed, -1.0))
}

fn cascade(mesh: DyadicMesh, eta: f64, seed: u64, orientation: f64) -> Weight {
    let mut level = vec![1.0];
    for j in 0..mesh.depth() {
        let mut next = vec![0.0; mesh.cubes_at_level(j + 1)];
        for (idx, &v) in level.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cube_seed(seed, j, idx));
            let parent = mesh.cube_at(j, idx);
            let kids: Vec<usize> = parent.children().map(|c| c.index_in_level()).collect();
            for pair in kids.chunks(2) {
                let xi: f64 = if eta > 0.0 { rng.gen_range(0.0..=1.0) } else { 0.0 };
                let sign = orientation * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                next[pair[0]] = v * (1.0 + sign * eta * xi);
                next[pair[1]] = v * (1.0 - sign * eta * xi);
            }
        }
        level = next;
    }
    Weight::new(GridFunction::new(mesh, level).expect("one value per cell"))
        .expect("cascade factors stay positive for eta < 1")
}
