//! Input schemas. Complex numbers are `[re, im]` pairs throughout.

use std::path::Path as FsPath;

use isofol::fuchsian::SystemJson;
use isofol::paths::Path;
use isofol::torus::TorusJson;
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub fn load<T: DeserializeOwned>(path: &FsPath) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn default_radius_factor() -> f64 {
    isofol::paths::DEFAULT_RADIUS_FACTOR
}

fn default_collision_margin() -> f64 {
    isofol::schlesinger::DEFAULT_COLLISION_MARGIN
}

/// `{"poles": …, "residues": …, "basepoint": [re, im], "radius_factor": 0.4}`
#[derive(Debug, Deserialize)]
pub struct MonodromyConfig {
    #[serde(flatten)]
    pub system: SystemJson,
    pub basepoint: [f64; 2],
    #[serde(default = "default_radius_factor")]
    pub radius_factor: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Motion {
    /// One pole moves along a straight segment.
    Segment { pole: usize, displacement: [f64; 2] },
    /// One path per pole; stationary poles use zero-length paths.
    Paths { paths: Vec<Path> },
}

/// `{"poles": …, "residues": …, "motion": {"pole": 0, "displacement": [re, im]}}`
#[derive(Debug, Deserialize)]
pub struct SchlesingerConfig {
    #[serde(flatten)]
    pub system: SystemJson,
    pub motion: Motion,
    #[serde(default = "default_collision_margin")]
    pub collision_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    /// Three-pole commuting nilpotent family, 12 coordinates.
    Eq11,
    /// Torus foliations in the finite slope chart, 18 coordinates.
    Torus,
}

fn default_basepoint() -> [f64; 2] {
    [-3.0, -2.0]
}

fn default_min_separation() -> f64 {
    0.3
}

/// Explicit `points` plus, with `--samples`, seeded draws from `domain`.
#[derive(Debug, Deserialize)]
pub struct DetectConfig {
    pub family: FamilyName,
    #[serde(default = "default_basepoint")]
    pub basepoint: [f64; 2],
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
    /// Sampled poles keep at least this distance from each other and from
    /// the basepoint.
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
}

/// A torus foliation, plus an optional sampling box for `--samples`.
#[derive(Debug, Deserialize)]
pub struct TorusCheckConfig {
    #[serde(flatten)]
    pub torus: TorusJson,
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
}
