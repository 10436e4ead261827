//! Phase-linked discrete Bayesian networks for flight-delay propagation.
//!
//! The pipeline runs from flight-leg records ([`data`], [`cases`]) through regression priors
//! ([`regression`]) and discretized conditional tables ([`discretize`], [`network`]) to exact
//! what-if queries ([`inference`]) and model evaluation ([`eval`]). [`synth`] generates
//! datasets from a known ground-truth network.
//!
//! The math is generic over [`Real`] (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod cases;
pub mod data;
pub mod discretize;
pub mod error;
pub mod eval;
pub mod factor;
pub mod inference;
pub mod json;
pub mod network;
pub mod regression;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type BinScheme = discretize::BinScheme<f64>;
pub type Network = network::Network<f64>;
pub type NetworkSpec = network::NetworkSpec<f64>;
pub type NodeSpec = network::NodeSpec<f64>;
pub type Domain = network::Domain<f64>;
pub type Prior = network::Prior<f64>;
pub type ConditionalTable = network::ConditionalTable<f64>;
pub type ModelDocument = network::ModelDocument<f64>;
pub type PiecewiseRegression = regression::PiecewiseRegression<f64>;
pub type PosteriorSet = inference::PosteriorSet<f64>;
