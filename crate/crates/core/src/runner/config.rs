//! Flat `key = value` scenario files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Vectors
//! are comma separated (`center = 1.5, -2`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QhdError, Result};
use crate::evolve::{KappaMode, SolverConfig};
use crate::fields::Grid;
use crate::functionals::MorawetzMode;

/// Parsed key-value pairs with the line each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| QhdError::Config {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(QhdError::Config {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(QhdError::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.insert(key, (line, value));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Canonical `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, (_, v))| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn as_json(&self) -> serde_json::Value {
        self.entries
            .iter()
            .map(|(k, (_, v))| (k.clone(), serde_json::Value::String(v.clone())))
            .collect::<serde_json::Map<_, _>>()
            .into()
    }

    fn err(&self, key: &str, message: String) -> QhdError {
        QhdError::Config {
            line: self.line(key),
            message: format!("`{key}`: {message}"),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|e| self.err(key, format!("cannot parse `{}`: {e}", p.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(self.err(key, format!("expected true or false, found `{v}`"))),
            })
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case")]
pub enum Recipe {
    /// `(background + A e^{-|x-c|^2/2w^2}) e^{i chirp e^{-|x-c|^2/2w^2}} e^{i 2 pi m.x / L}`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 3],
        background: f64,
        chirp: f64,
        kick: [i64; 3],
    },
    PlaneWave { amplitude: f64, modes: [i64; 3] },
    /// Vortex `+1` at `(-s/2, 0)` and `-1` at `(s/2, 0)`, lifted from hydrodynamic data.
    VortexPair { amplitude: f64, separation: f64, core: f64 },
    /// Checkerboard of alternating windings, optionally jittered from `seed`.
    VortexLattice {
        amplitude: f64,
        rows: usize,
        cols: usize,
        core: f64,
        jitter: f64,
    },
    /// Radial Gaussian with velocity `chirp r`, lifted with regularization `n_reg`.
    RadialProfile {
        amplitude: f64,
        width: f64,
        chirp: f64,
        n_reg: u32,
    },
    /// Planar vortex pair times a Gaussian profile of width `width_z` along `x_3`.
    PlanarProduct {
        amplitude: f64,
        separation: f64,
        core: f64,
        width_z: f64,
    },
    FromFile { path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPolicy {
    /// One snapshot per observation.
    #[default]
    Every,
    Final,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub recipe: Recipe,
    /// Absent only for `from-file`, where the file decides.
    pub grid: Option<Grid>,
    pub solver: SolverConfig,
    pub morawetz: MorawetzMode,
    pub track_vortices: bool,
    pub circulation_radius: Option<f64>,
    pub snapshots: SnapshotPolicy,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub config: ConfigMap,
}

const COMMON: &[&str] = &[
    "name", "recipe", "dim", "n", "length", "gamma", "dt", "t_end", "snapshot_stride", "pressure",
    "kappa", "morawetz", "track_vortices", "circulation_radius", "snapshots", "seed", "output_dir",
];

fn recipe_keys(recipe: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    // (required, optional)
    Some(match recipe {
        "gaussian" => (&["amplitude", "width"], &["center", "background", "chirp", "kick"]),
        "plane-wave" => (&["amplitude", "modes"], &[]),
        "vortex-pair" => (&["separation", "core"], &["amplitude"]),
        "vortex-lattice" => (&["rows", "cols", "core"], &["amplitude", "jitter"]),
        "radial-profile" => (&["amplitude", "width"], &["chirp", "n_reg"]),
        "planar-product" => (&["separation", "core", "width_z"], &["amplitude"]),
        "from-file" => (&["path"], &[]),
        _ => return None,
    })
}

fn padded<T: Copy + Default>(v: &[T]) -> [T; 3] {
    let mut out = [T::default(); 3];
    for (o, x) in out.iter_mut().zip(v) {
        *o = *x;
    }
    out
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(ConfigMap::parse(text)?)
    }

    pub fn from_map(map: ConfigMap) -> Result<Self> {
        let recipe_name = map.get("recipe").unwrap_or("");
        let recipe_spec = recipe_keys(recipe_name);
        if !recipe_name.is_empty() && recipe_spec.is_none() {
            return Err(map.err(
                "recipe",
                format!(
                    "unknown recipe `{recipe_name}`; expected one of gaussian, plane-wave, vortex-pair, \
                     vortex-lattice, radial-profile, planar-product, from-file"
                ),
            ));
        }
        let (req, opt) = recipe_spec.unwrap_or((&[], &[]));
        for key in map.keys() {
            if !COMMON.contains(&key) && !req.contains(&key) && !opt.contains(&key) {
                return Err(map.err(key, "unknown key for this recipe".into()));
            }
        }

        let from_file = recipe_name == "from-file";
        let grid_keys: &[&str] = match recipe_name {
            "from-file" => &[],
            "vortex-pair" | "vortex-lattice" | "planar-product" => &["n", "length"],
            _ => &["dim", "n", "length"],
        };
        let mut missing: Vec<&str> = ["name", "recipe", "gamma", "dt", "t_end", "output_dir"]
            .iter()
            .chain(grid_keys)
            .chain(req)
            .copied()
            .filter(|k| map.get(k).is_none())
            .collect();
        missing.sort_unstable();
        if !missing.is_empty() {
            return Err(QhdError::Schema(format!("missing fields: {}", missing.join(", "))));
        }

        let f = |k: &str| -> Result<f64> {
            map.parsed::<f64>(k)?
                .ok_or_else(|| QhdError::Schema(format!("missing fields: {k}")))
        };
        let f_or = |k: &str, d: f64| -> Result<f64> { Ok(map.parsed::<f64>(k)?.unwrap_or(d)) };
        let positive = |k: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(map.err(k, format!("must be positive, got {v}")))
            }
        };

        let grid = if from_file {
            None
        } else {
            let n: usize = map.parsed("n")?.unwrap_or(0);
            let length = positive("length", f("length")?)?;
            let dim: usize = match recipe_name {
                "vortex-pair" | "vortex-lattice" => 2,
                "planar-product" => 3,
                _ => map.parsed("dim")?.unwrap_or(0),
            };
            if map.get("dim").is_some() && grid_keys.len() == 2 {
                let given: usize = map.parsed("dim")?.unwrap_or(0);
                if given != dim {
                    return Err(map.err("dim", format!("recipe `{recipe_name}` requires dim = {dim}")));
                }
            }
            let g = if recipe_name == "radial-profile" {
                Grid::radial(dim, n, length)
            } else {
                Grid::periodic(dim, n, length)
            };
            Some(g.map_err(|e| map.err("n", e.to_string()))?)
        };

        let recipe = match recipe_name {
            "gaussian" => {
                let center = map.list("center")?.unwrap_or_default();
                let kick = map.list("kick")?.unwrap_or_default();
                if kick.iter().any(|k| k.fract() != 0.0) {
                    return Err(map.err("kick", "mode numbers must be integers".into()));
                }
                let kick: Vec<i64> = kick.iter().map(|k| *k as i64).collect();
                Recipe::Gaussian {
                    amplitude: positive("amplitude", f("amplitude")?)?,
                    width: positive("width", f("width")?)?,
                    center: padded(&center),
                    background: f_or("background", 0.0)?,
                    chirp: f_or("chirp", 0.0)?,
                    kick: padded(&kick),
                }
            }
            "plane-wave" => {
                let modes = map.list("modes")?.unwrap_or_default();
                if modes.iter().any(|k| k.fract() != 0.0) {
                    return Err(map.err("modes", "mode numbers must be integers".into()));
                }
                let modes: Vec<i64> = modes.iter().map(|k| *k as i64).collect();
                Recipe::PlaneWave {
                    amplitude: positive("amplitude", f("amplitude")?)?,
                    modes: padded(&modes),
                }
            }
            "vortex-pair" => Recipe::VortexPair {
                amplitude: positive("amplitude", f_or("amplitude", 1.0)?)?,
                separation: positive("separation", f("separation")?)?,
                core: positive("core", f("core")?)?,
            },
            "vortex-lattice" => {
                let rows: usize = map.parsed("rows")?.unwrap_or(0);
                let cols: usize = map.parsed("cols")?.unwrap_or(0);
                if rows == 0 || cols == 0 || cols % 2 != 0 {
                    return Err(map.err("cols", "rows must be positive and cols positive and even".into()));
                }
                let jitter = f_or("jitter", 0.0)?;
                if !(0.0..0.5).contains(&jitter) {
                    return Err(map.err("jitter", format!("must lie in [0, 0.5), got {jitter}")));
                }
                Recipe::VortexLattice {
                    amplitude: positive("amplitude", f_or("amplitude", 1.0)?)?,
                    rows,
                    cols,
                    core: positive("core", f("core")?)?,
                    jitter,
                }
            }
            "radial-profile" => Recipe::RadialProfile {
                amplitude: positive("amplitude", f("amplitude")?)?,
                width: positive("width", f("width")?)?,
                chirp: f_or("chirp", 0.0)?,
                n_reg: map.parsed("n_reg")?.unwrap_or(10_000),
            },
            "planar-product" => Recipe::PlanarProduct {
                amplitude: positive("amplitude", f_or("amplitude", 1.0)?)?,
                separation: positive("separation", f("separation")?)?,
                core: positive("core", f("core")?)?,
                width_z: positive("width_z", f("width_z")?)?,
            },
            _ => Recipe::FromFile {
                path: PathBuf::from(map.get("path").unwrap_or_default()),
            },
        };

        let kappa: KappaMode = match map.get("kappa") {
            None => KappaMode::Qhd,
            Some(v) => v.parse().map_err(|e: String| map.err("kappa", e))?,
        };
        let morawetz: MorawetzMode = match map.get("morawetz") {
            None => MorawetzMode::Auto,
            Some(v) => v.parse().map_err(|e: String| map.err("morawetz", e))?,
        };
        let snapshots = match map.get("snapshots") {
            None | Some("every") => SnapshotPolicy::Every,
            Some("final") => SnapshotPolicy::Final,
            Some(v) => return Err(map.err("snapshots", format!("expected every or final, found `{v}`"))),
        };
        let solver = SolverConfig {
            gamma: f("gamma")?,
            dt: f("dt")?,
            t_end: f("t_end")?,
            snapshot_stride: map.parsed("snapshot_stride")?.unwrap_or(1),
            pressure_enabled: map.boolean("pressure")?.unwrap_or(true),
            kappa_mode: kappa,
            keep_snapshots: false,
        };
        if let Some(g) = &grid {
            solver.validate(g).map_err(|e| map.err("gamma", e.to_string()))?;
        }
        let vortex_recipe = matches!(recipe_name, "vortex-pair" | "vortex-lattice");
        let track_vortices = map.boolean("track_vortices")?.unwrap_or(vortex_recipe);
        if track_vortices && !vortex_recipe {
            return Err(map.err("track_vortices", "only planar vortex recipes can track vortices".into()));
        }
        let circulation_radius = map.parsed::<f64>("circulation_radius")?;
        if let Some(r) = circulation_radius {
            positive("circulation_radius", r)?;
        }
        let name = map.get("name").unwrap_or_default().to_string();
        if name.is_empty() {
            return Err(map.err("name", "must not be empty".into()));
        }
        Ok(Self {
            name,
            recipe,
            grid,
            solver,
            morawetz,
            track_vortices,
            circulation_radius,
            snapshots,
            seed: map.parsed("seed")?.unwrap_or(0),
            output_dir: PathBuf::from(map.get("output_dir").unwrap_or_default()),
            config: map,
        })
    }
}
