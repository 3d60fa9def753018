//! Scene and parameter files.
//!
//! Two TOML files drive every run. The scene file describes the world (gripper
//! geometry, fiber response, friction, pose noise, the object set) and the params
//! file describes the procedures (optimizer tolerances, calibration sizes, the
//! shake schedule, the master seed). Both defaults are checked in under
//! `configs/` and compiled into the binary, so a bare invocation works anywhere.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationParams;
use crate::error::{Error, Result};
use crate::harness::DisturbanceSpec;
use crate::optimizer::OptimizationParams;
use crate::scene::{GripperGeometry, ObjectShape, Pose2, PoseNoiseSpec, ShapeKind};
use crate::sensor::ResponseParams;

pub const DEFAULT_SCENE: &str = include_str!("../../../configs/default_scene.toml");
pub const DEFAULT_PARAMS: &str = include_str!("../../../configs/default_params.toml");

/// Writes `bytes` to a sibling temp file and renames it over `path`, so readers
/// never see a half-written file. Missing parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = parent.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// What the object is, as far as the gripper's prior is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Sphere,
    Circle,
    Cylinder,
    Cube,
    Square,
    Cuboid,
    Rectangle,
    Prism,
    Triangle,
    Unknown,
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    /// Shape prior handed to the optimizer. Absent means tactile sensing alone decides.
    #[serde(default)]
    pub class: Option<ShapeClass>,
    pub shape: ShapeKind,
    #[serde(default = "origin")]
    pub pose: Pose2,
}

fn origin() -> Pose2 {
    Pose2::new(0.0, 0.0, 0.0)
}

impl SceneObject {
    pub fn object(&self) -> Result<ObjectShape> {
        ObjectShape::new(self.shape, self.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Coulomb friction coefficient between pads and objects.
    pub mu: f64,
    /// Initial grip command per finger, N.
    pub grip: f64,
    #[serde(default)]
    pub geometry: GripperGeometry,
    #[serde(default)]
    pub noise: PoseNoiseSpec,
    #[serde(default)]
    pub response: ResponseParams,
    pub objects: Vec<SceneObject>,
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SCENE, Path::new("<default scene>")).expect("default scene is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config("mu must be positive".into()));
        }
        if !(self.grip > 0.0 && self.grip.is_finite()) {
            return Err(Error::Config("grip must be positive".into()));
        }
        self.geometry.validate()?;
        self.noise.validate()?;
        self.response.validate()?;
        if self.objects.is_empty() {
            return Err(Error::Config("scene has no objects".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::Config(format!("duplicate object id {:?}", o.id)));
            }
            o.object()
                .map_err(|e| Error::Config(format!("object {:?}: {e}", o.id)))?;
        }
        Ok(())
    }

    pub fn find(&self, id: &str) -> Result<&SceneObject> {
        self.objects.iter().find(|o| o.id == id).ok_or_else(|| {
            let known: Vec<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
            Error::Usage(format!(
                "unknown object {id:?}; the scene has: {}",
                known.join(", ")
            ))
        })
    }

    /// Keeps only the listed objects, in the listed order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<SceneObject>> {
        ids.iter().map(|id| self.find(id).cloned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessParams {
    pub trials_per_object: usize,
    pub disturbance: DisturbanceSpec,
}

impl Default for HarnessParams {
    fn default() -> Self {
        Self {
            trials_per_object: 20,
            disturbance: DisturbanceSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub seed: u64,
    #[serde(default)]
    pub optimization: OptimizationParams,
    #[serde(default)]
    pub calibration: CalibrationParams,
    #[serde(default)]
    pub harness: HarnessParams,
}

impl ParamsConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PARAMS, Path::new("<default params>"))
            .expect("default params are valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.optimization.validate()?;
        self.calibration.validate()?;
        if self.harness.trials_per_object == 0 {
            return Err(Error::Config("trials_per_object must be >= 1".into()));
        }
        self.harness.disturbance.validate()
    }
}
