//! Geometry and project configuration files.

use std::path::{Path, PathBuf};

use cusp_atlas::atlas::{Window, DEFAULT_CONTOUR_GRID};
use cusp_atlas::cs::{default_window, CsOptions, DEFAULT_CS_GRID};
use cusp_atlas::dk::DkOptions;
use cusp_atlas::Geometry;
use serde::{Deserialize, Serialize};

use crate::{Failure, OpResult};

pub const SIDE_CONVENTION: &str = "B1B2-B2B3-B3B1";

fn side_convention() -> String {
    SIDE_CONVENTION.into()
}

/// On-disk form of a manipulator design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub a2x: f64,
    pub a3: [f64; 2],
    pub d: [f64; 3],
    #[serde(default = "side_convention")]
    pub side_convention: String,
    /// Sign tying `S` to `det A`; calibrated numerically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl GeometryConfig {
    pub fn of(g: &Geometry) -> Self {
        GeometryConfig { a2x: g.a2x(), a3: g.a3(), d: g.sides(), side_convention: side_convention(), sigma: Some(g.sigma()) }
    }

    pub fn geometry(&self) -> OpResult<Geometry> {
        if self.side_convention != SIDE_CONVENTION {
            return Err(Failure::Usage(format!("side_convention must be {SIDE_CONVENTION:?}")));
        }
        let bad = |e: cusp_atlas::Error| Failure::Usage(e.to_string());
        let g = Geometry::new(self.a2x, self.a3, self.d).map_err(bad)?;
        Ok(match self.sigma {
            Some(s) => g.with_sigma(s).map_err(bad)?,
            None => g.calibrated(),
        })
    }

    pub fn load(path: &Path) -> OpResult<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tol_sing: Option<f64>,
    pub dedup_tol: Option<f64>,
    pub root_cluster_tol: Option<f64>,
    pub sheet_jump: Option<f64>,
    pub boundary_band: Option<f64>,
}

impl Tolerances {
    fn all(&self) -> [Option<f64>; 5] {
        [self.tol_sing, self.dedup_tol, self.root_cluster_tol, self.sheet_jump, self.boundary_band]
    }

    pub fn dk(&self) -> DkOptions {
        let d = DkOptions::default();
        DkOptions {
            tol_sing: self.tol_sing.unwrap_or(d.tol_sing),
            dedup_tol: self.dedup_tol.unwrap_or(d.dedup_tol),
            root_cluster_tol: self.root_cluster_tol.unwrap_or(d.root_cluster_tol),
        }
    }

    pub fn cs(&self) -> CsOptions {
        let d = CsOptions::default();
        CsOptions {
            sheet_jump: self.sheet_jump.unwrap_or(d.sheet_jump),
            boundary_band: self.boundary_band.unwrap_or(d.boundary_band),
            dedup_tol: self.dedup_tol.unwrap_or(d.dedup_tol),
            ..d
        }
    }
}

fn default_rho1() -> f64 {
    17.0
}
fn default_cs_grid() -> usize {
    DEFAULT_CS_GRID
}
fn default_contour_grid() -> usize {
    DEFAULT_CONTOUR_GRID
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Project file: which design to analyze and the defaults used by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// Geometry file, relative to the project file; the reference design when absent.
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_rho1")]
    pub rho1: f64,
    #[serde(default = "default_cs_grid")]
    pub cs_grid: usize,
    #[serde(default = "default_window")]
    pub cs_window: Window,
    #[serde(default = "default_contour_grid")]
    pub contour_grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> OpResult<Self> {
        let mut c: ProjectConfig = read_json(path)?;
        if let (Some(g), Some(dir)) = (&c.geometry, path.parent()) {
            if g.is_relative() {
                c.geometry = Some(dir.join(g));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> OpResult<()> {
        if let Some(g) = &self.geometry {
            if !g.is_file() {
                return Err(Failure::Usage(format!("geometry file {} does not exist", g.display())));
            }
        }
        if self.tolerances.all().iter().flatten().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Failure::Usage("tolerances must be positive".into()));
        }
        if !(self.rho1 > 0.0) || !self.cs_window.is_valid() {
            return Err(Failure::Usage("rho1 and the mesh window must be positive".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> OpResult<Geometry> {
        match &self.geometry {
            Some(p) => GeometryConfig::load(p)?.geometry(),
            None => Ok(Geometry::canonical()),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> OpResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}
