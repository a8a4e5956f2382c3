//! Procedural generation of semantics-consistent scene variants and
//! object-navigation episodes from static indoor scenes, together with a
//! simulation harness for two memory-based navigation baselines.
//!
//! The crate is organised bottom-up:
//!
//! - [`scene`], [`raycast`], [`camera`]: scene representation, fixtures, rendering.
//! - [`navgrid`]: floors, top-down navigable maps, erosion and A*.
//! - [`coverage`]: coverage-driven observation sampling.
//! - [`perception`], [`fusion`]: detection, lifting to 3D, multi-view fusion.
//! - [`planes`]: receptacle plane detection and projected hulls.
//! - [`semantics`]: region maps, relevance providers and the JSON LLM protocol.
//! - [`placement`]: object placement onto receptacle planes.
//! - [`episodes`]: goal viewpoints and episode datasets.
//! - [`agents`], [`metrics`], [`benchmark`]: baselines, metrics and evaluation.
//! - [`pipeline`]: end-to-end dataset generation.
//!
//! Data-parallel loops go through [`par::Exec`]; with the `parallel` feature
//! disabled every fan-out runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod agents;
pub mod benchmark;
pub mod camera;
pub mod config;
pub mod coverage;
pub mod episodes;
mod error;
pub mod fusion;
pub mod geom;
pub mod http;
pub mod metrics;
pub mod navgrid;
pub mod par;
pub mod perception;
pub mod pipeline;
pub mod placement;
pub mod planes;
pub mod raycast;
pub mod rng;
pub mod scene;
pub mod semantics;

pub use error::{Error, Result};

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;
pub type Vector2 = nalgebra::Vector2<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
