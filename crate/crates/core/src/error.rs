use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::ParamSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("spatial index is empty")]
    EmptyIndex,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("voxel grid of {cells} cells exceeds the 512^3 resolution limit")]
    ResolutionLimit { cells: u128 },

    #[error("surface voxels form {components} disconnected components")]
    DisconnectedSurface { components: usize },

    #[error("count mismatch: expected {expected} points, found {found}")]
    Alignment { expected: usize, found: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),

    #[error("point ({x}, {y}, {z}) lies outside the build chamber")]
    OutOfChamber { x: f64, y: f64, z: f64 },

    #[error("numeric fault at epoch {epoch}: {message}")]
    NumericFault {
        epoch: usize,
        message: String,
        last_good: Option<Box<ParamSet>>,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
