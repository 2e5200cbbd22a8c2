use thiserror::Error;

use crate::clusterlib::ClusterError;
use crate::neuralnet::NnError;
use crate::pipeline::PipelineError;
use crate::synthgen::SynthError;
use crate::validity::ValidityError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
