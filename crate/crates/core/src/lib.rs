//! Weak snowflake embeddings of finite metric spaces.
//!
//! Given a finite metric space `(X, d)` and `eps` in `(1/2, 1)`, the crate
//! builds a map `F: X -> R^(2 N M)` that is Hölder-`eps` from above at all
//! scales and from below for pairs at distance at least `4 tau^(2n)`, using
//! only a quasidoubling bound (finite Assouad spectrum) rather than the
//! doubling property. It also estimates the box-counting dimension, the
//! Assouad spectrum and the quasidoubling constant that feed the parameters,
//! and verifies the resulting bounds pair by pair.
//!
//! Geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! `f64`, which the file formats use.

// Index loops mirror the matrix notation; `!(a > b)` deliberately treats NaN as failure.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dimension;
pub mod embedding;
pub mod error;
pub mod generators;
pub mod io;
pub mod metric_space;
pub mod nets;
pub mod params;
pub mod scalar;
pub mod verify;

pub use error::Error;
pub use scalar::Scalar;

pub type MetricSpace = metric_space::FiniteMetricSpace<f64>;
pub type Embedding = embedding::Embedding<f64>;
pub type CoordinateMap = embedding::CoordinateMap<f64>;
pub type NetHierarchy = nets::NetHierarchy<f64>;
pub type Net = nets::Net<f64>;
pub type Coloring = nets::Coloring<f64>;
