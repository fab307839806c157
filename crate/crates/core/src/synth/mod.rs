//! Deterministic synthetic scenes with known geometry and a hidden affine
//! corruption of inverse depth, used as end-to-end ground truth.

mod bundle;
mod render;
mod rng;
mod scene;

pub use bundle::{truth_json, write_bundle, BundlePaths};
pub use render::{render, Aabb, CameraRig, Render, Surface, World, EDGE_PAD};
pub use rng::SplitMix64;
pub use scene::{
    corrupt_to_relative, generate_scene, GroundTruth, HiddenParams, PersonSize, PlacementVolume, SceneBundle,
    SceneSpec,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible scene spec: {0}")]
    InfeasibleSpec(String),
    #[error("corruption needs a > 0 and finite b, got a = {a}, b = {b}")]
    InvalidCorruption { a: f64, b: f64 },
    #[error("relative value {x} at ({u}, {v}) is not positive")]
    NonPositiveRelative { u: u32, v: u32, x: f64 },
}
