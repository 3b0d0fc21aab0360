//! Sentiment-augmented random forest (SARF) pipeline for daily index
//! direction prediction.
//!
//! The crate is organised along the data flow:
//!
//! * [`market_data`]: OHLCV bars, CSV I/O, Alpha Vantage client with cache.
//! * [`preprocess`]: exponential smoothing and up/down labels.
//! * [`indicators`]: fifteen scale-free technical indicator columns.
//! * [`sentiment`]: pluggable news scoring and daily aggregation.
//! * [`features`]: frame assembly, correlation pruning, PCA, ridge, splits.
//! * [`forest`]: CART trees and the bagged random forest.
//! * [`evaluate`]: metrics, ROC/PR, blocked CV, random search, comparisons.

pub mod evaluate;
pub mod features;
pub mod forest;
pub mod indicators;
pub mod market_data;
pub mod preprocess;
pub mod rng;
pub mod sentiment;
