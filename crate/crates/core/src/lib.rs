//! q-dependent detrended cross-correlation (`ρ_q`) and the minimum spanning
//! trees built from it.
//!
//! Pipeline: [`ingest`] turns prices into returns and applies randomizing
//! transforms; [`fluct`] detrends box-wise and forms q-order fluctuation
//! functions; [`rho`] assembles `ρ_q` and distance matrices; [`tree`] runs
//! Kruskal and measures topology; [`significance`] estimates surrogate
//! thresholds and prunes trees; [`compare`] relates `ρ_q` to Pearson
//! correlations; [`synth`] generates test panels; [`pipeline`] ties it all
//! together over an `(s, q)` grid.

pub mod compare;
pub mod config;
pub mod error;
pub mod export;
pub mod fluct;
pub mod ingest;
pub mod matrix;
pub mod panel;
pub mod pipeline;
pub mod rho;
pub mod rng;
pub mod significance;
pub mod synth;
pub mod tree;

pub use error::{Error, ErrorClass, Result};
pub use panel::{PricePanel, Provenance, SeriesPanel};
