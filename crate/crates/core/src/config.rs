//! TOML run configuration.
//!
//! ```toml
//! case = "kidder"
//! degree = 3
//! cfl = 0.9
//! output_dir = "out/kidder"
//! snapshot_interval = 0.1
//! write_vtk = true
//!
//! [mesh]
//! kind = "annulus"
//! inner = 0.9
//! outer = 1.0
//! n_r = 3
//! n_theta = 180
//!
//! [correction]
//! inner = true
//! outer = false
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cases::MeshRecipe;
use crate::error::{Error, Result};

pub const DEFAULT_CFL: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    Manufactured,
    Kidder,
    CylinderHorizontal,
    CylinderVertical,
}

impl CaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::Manufactured => "manufactured",
            CaseName::Kidder => "kidder",
            CaseName::CylinderHorizontal => "cylinder_horizontal",
            CaseName::CylinderVertical => "cylinder_vertical",
        }
    }
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseName,
    pub degree: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Overrides the case's own final time.
    pub final_time: Option<f64>,
    pub output_dir: Option<PathBuf>,
    /// Snapshot spacing in time; `None` records only the final state.
    pub snapshot_interval: Option<f64>,
    #[serde(default)]
    pub write_vtk: bool,
    #[serde(default)]
    pub write_scatter: bool,
    pub mesh: MeshRecipe,
    /// Correction state for every tag that has a boundary descriptor.
    #[serde(default = "default_true")]
    pub correction_default: bool,
    /// Per-tag overrides of `correction_default`.
    #[serde(default)]
    pub correction: BTreeMap<String, bool>,
    /// Mesh sequence for `convergence_sweep`, coarse to fine.
    #[serde(default)]
    pub sweep: Vec<MeshRecipe>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative mesh-file and output paths are resolved
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut String| {
            if Path::new(p.as_str()).is_relative() {
                *p = base.join(&*p).to_string_lossy().into_owned();
            }
        };
        for recipe in std::iter::once(&mut cfg.mesh).chain(cfg.sweep.iter_mut()) {
            if let MeshRecipe::File { path } = recipe {
                resolve(path);
            }
        }
        if let Some(dir) = &cfg.output_dir {
            if dir.is_relative() {
                cfg.output_dir = Some(base.join(dir));
            }
        }
        Ok(cfg)
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.degree) {
            return Err(Error::Config(format!("degree {} not in 1..=3", self.degree)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl {} outside (0, 1]", self.cfl)));
        }
        if let Some(t) = self.final_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("final_time {t} must be positive")));
            }
        }
        if let Some(dt) = self.snapshot_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("snapshot_interval {dt} must be positive")));
            }
        }
        Ok(())
    }
}
