use sarf::evaluate::EvalError;
use sarf::features::FeatureError;
use sarf::forest::ForestError;
use sarf::indicators::IndicatorError;
use sarf::market_data::MarketDataError;
use sarf::preprocess::PreprocessError;
use sarf::sentiment::SentimentError;
use thiserror::Error;

/// Every failure maps to one stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: exit 1.
    #[error("{0}")]
    Usage(String),
    /// Invalid input data or configuration: exit 2.
    #[error("{0}")]
    Data(String),
    /// Network or remote provider failure: exit 3.
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Remote(_) => 3,
        }
    }
}

impl From<MarketDataError> for CliError {
    fn from(e: MarketDataError) -> Self {
        if e.is_remote() {
            Self::Remote(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

impl From<SentimentError> for CliError {
    fn from(e: SentimentError) -> Self {
        if e.is_remote() {
            Self::Remote(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Data(e.to_string())
            }
        }
    )*};
}

data_error!(PreprocessError, IndicatorError, FeatureError, ForestError, EvalError);
