//! Deterministic two-stage text-to-3D asset pipeline.
//!
//! Stage I turns a prompt into an initial textured mesh: multi-view
//! generation, truncated-SDF depth fusion, marching cubes, UV atlas
//! extraction, view baking and texture consolidation. Stage II refines or
//! replaces the texture of an existing mesh from geometry-conditioned
//! views. Neural view generators are replaced by pluggable backends: a
//! seeded procedural backend by default, an optional remote HTTP service.

pub mod atlas;
pub mod camera;
pub mod error;
pub mod image2d;
pub mod marching;
pub mod material;
pub mod math;
mod mc_tables;
pub mod mesh;
pub mod obj;
pub mod primitives;
pub mod raster;
pub mod sdf;
pub mod seam;
pub mod texture;
mod uvrast;

pub use error::{Error, Result};
pub use mesh::{Mesh, ValidationReport};
