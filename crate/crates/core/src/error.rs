use std::fmt;
use std::path::PathBuf;

/// Pipeline stage, used to tag errors that propagate out of [`crate::pipeline::run_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Silhouette,
    SparseCarve,
    NoiseFilter,
    DenseCarve,
    Polygonize,
    DepthImage,
    Visibility,
    Bundle,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Silhouette => "silhouette",
            Stage::SparseCarve => "B-1 sparse carve",
            Stage::NoiseFilter => "B-2 noise filter & ROI",
            Stage::DenseCarve => "B-3 dense carve",
            Stage::Polygonize => "C polygonization",
            Stage::DepthImage => "D-1 depth image",
            Stage::Visibility => "D-2 visibility",
            Stage::Bundle => "bundle",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("camera {id}: {reason}")]
    InvalidCamera { id: u32, reason: String },

    #[error("duplicate camera id {0}")]
    DuplicateCameraId(u32),

    #[error("camera rig is empty")]
    EmptyRig,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need at least 2 background frames, got {0}")]
    TooFewFrames(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid of {requested} voxels exceeds budget of {budget}")]
    VoxelBudget { requested: u64, budget: u64 },

    #[error("missing frame for camera {0}")]
    MissingFrame(u32),

    #[error("degenerate object: {0}")]
    DegenerateObject(String),

    #[error("bundle: {0}")]
    Bundle(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
