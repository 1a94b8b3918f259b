//! Cancelable fingerprint template protection.
//!
//! The pipeline turns a minutiae set plus a thinned ridge skeleton into a
//! revocable protected template:
//!
//! 1. [`fpdata`] parses minutiae records and skeleton images.
//! 2. [`sectoring`] partitions the neighborhood of each minutia into angular
//!    sectors aligned with the minutia's own orientation and picks the nearest
//!    neighbor per sector.
//! 3. [`ridgefeat`] counts ridge crossings along each minutia-neighbor segment
//!    and averages the crossing tangents, producing a feature matrix of
//!    (count, orientation) pairs.
//! 4. [`coprime`] scatters the flattened feature matrix over a square grid of
//!    seeded random filler, along a position cycle determined by a secret key
//!    whose step sizes are coprime to the grid side. Matching happens after
//!    re-extracting features with the key; compromised templates are revoked
//!    by changing the key.
//! 5. [`matcher`] scores two protected templates (given their keys) with a
//!    per-minutia local distance and a greedy one-to-one global pairing.
//! 6. [`evalkit`] runs verification protocols (EER/ROC), revocability,
//!    unlinkability and key diversity experiments over datasets.
//! 7. [`synthgen`] generates synthetic fingerprints with concentric-ring
//!    skeletons whose ridge counts are known in closed form, used as ground
//!    truth throughout the test suite.
//!
//! Batch entry points parallelize with rayon when the `parallel` feature
//! (default) is enabled; results are identical either way.

pub mod angle;
pub mod coprime;
pub mod evalkit;
pub mod fpdata;
pub mod matcher;
pub(crate) mod par;
pub mod ridgefeat;
pub mod rng;
pub mod sectoring;
pub mod synthgen;

pub use coprime::{KeySet, ProtectedTemplate};
pub use fpdata::{DatasetEntry, Minutia, MinutiaeRecord, SkeletonImage};
pub use matcher::{MatchParams, MatchResult};
pub use ridgefeat::{FeatureMatrix, SectorFeature};
pub use sectoring::SectorConfig;
