use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("mesh has no UV coordinates but the operation requires them")]
    MissingUvs,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("buffer shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("point {point:?} is outside the grid bounds")]
    OutOfBounds { point: [f32; 3] },

    #[error("no iso-surface crossing found in the grid")]
    EmptySurface,

    #[error("UV charts cannot be packed into the atlas even after halving the scale; increase texture resolution or padding budget")]
    PackingOverflow,

    #[error("texture has zero covered texels; nothing to fill from")]
    ZeroCoverage,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("generator backend error: {0}")]
    Backend(String),

    #[error("remote protocol error: {0}")]
    Protocol(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("glTF error: {0}")]
    Gltf(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
