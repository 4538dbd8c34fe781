//! Engine behind the Pacific Islands web atlas.
//!
//! * [`geo`]: coordinate types, transverse Mercator, datum shifts, GCP
//!   fitting, spherical measurement and line generalization.
//! * [`warehouse`]: per-country vector stores with ingestion, topology
//!   cleaning, sheet merging and validation.
//! * [`smartcache`]: immutable, spatially indexed, projected caches built
//!   from a warehouse.
//! * [`catalog`]: the twelve member countries plus the region.
//! * [`service`]: the map-server operations (render, identify, search,
//!   measure, legend, offline bundles), independent of HTTP.

pub mod catalog;
pub mod fixtures;
mod fsutil;
pub mod geo;
pub mod service;
pub mod smartcache;
pub mod tolerances;
pub mod warehouse;

pub use fsutil::{atomic_write, lock_for_write, WriterLock};
