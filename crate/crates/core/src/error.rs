use thiserror::Error;

use crate::dimension::DimensionError;
use crate::embedding::EmbedError;
use crate::generators::GeneratorError;
use crate::io::IoError;
use crate::metric_space::MetricError;
use crate::nets::NetError;
use crate::params::ParamError;
use crate::verify::VerifyError;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl Error {
    /// True when the inputs were valid but the construction's hypotheses fail
    /// (no admissible `tau`, budget or lattice exhausted, selection stuck).
    pub fn is_mathematical(&self) -> bool {
        match self {
            Error::Param(e) => matches!(
                e,
                ParamError::NoFeasibleTau { .. } | ParamError::BudgetOverflow { .. } | ParamError::Underflow { .. }
            ),
            Error::Net(e) | Error::Embed(EmbedError::Net(e)) => matches!(e, NetError::BudgetExceeded { .. }),
            Error::Embed(e) => matches!(
                e,
                EmbedError::SelectionFailed { .. }
                    | EmbedError::CountingFailed { .. }
                    | EmbedError::Lattice(_)
                    | EmbedError::OverlappingSupports { .. }
            ),
            Error::Generator(GeneratorError::RejectionExhausted { .. }) => true,
            _ => false,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Metric(_) | Error::Io(IoError::Metric { .. }) => "InvalidMetric",
            Error::Dimension(_) => "Dimension",
            Error::Param(ParamError::NoFeasibleTau { .. }) => "NoFeasibleTau",
            Error::Param(ParamError::BudgetOverflow { .. }) => "BudgetExceeded",
            Error::Param(ParamError::Underflow { .. }) => "Underflow",
            Error::Param(_) => "InvalidParameter",
            Error::Net(NetError::BudgetExceeded { .. }) | Error::Embed(EmbedError::Net(NetError::BudgetExceeded { .. })) => {
                "BudgetExceeded"
            }
            Error::Net(_) => "InvalidParameter",
            Error::Embed(EmbedError::SelectionFailed { .. }) => "SelectionFailed",
            Error::Embed(EmbedError::CountingFailed { .. }) | Error::Embed(EmbedError::Lattice(_)) => "SelectionFailed",
            Error::Embed(EmbedError::OverlappingSupports { .. }) => "OverlappingSupports",
            Error::Embed(_) => "NotNormalized",
            Error::Verify(VerifyError::SpaceMismatch { .. }) => "SpaceMismatch",
            Error::Verify(_) => "InvalidEmbedding",
            Error::Generator(GeneratorError::RejectionExhausted { .. }) => "RejectionExhausted",
            Error::Generator(_) => "BadParameters",
            Error::Io(_) => "Io",
        }
    }
}
