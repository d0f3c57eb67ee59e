use thiserror::Error;

use crate::cloud::CloudError;
use crate::dump::DumpError;
use crate::estimators::EstimateError;
use crate::knn::KnnError;
use crate::lipschitz::NetError;
use crate::synth::SynthError;

/// Umbrella error for callers that drive several stages at once.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
