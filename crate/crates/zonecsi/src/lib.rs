//! Geometry-driven zone CSI estimation toolkit.
//!
//! The crate models the offline half of a hybrid massive-MIMO link setup:
//! a quantized indoor scene is ray traced into a multipath database, paths
//! are grouped by RSS-weighted fuzzy clustering, user-terminal zones are
//! formed from the cluster sets, learned surrogates (a 1-D CNN existence
//! classifier plus bagged regression trees) stand in for the tracer, and
//! the resulting zone-level CSI drives an analog/digital precoder whose
//! sum rate is compared against fully digital zero forcing.
//!
//! Modules mirror the pipeline stages; [`pipeline`] glues them behind a
//! manifest-checked artifact store and the `zonecsi` CLI.

pub mod cluster;
pub mod error;
pub mod geom;
pub mod pipeline;
pub mod precode;
pub mod raytrace;
pub mod scene;
pub mod seed;
pub mod surrogate;
pub mod zones;

pub use error::{Error, Result};
