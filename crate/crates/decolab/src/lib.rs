//! Decoding laboratory for 2D topological stabilizer codes.
//!
//! The crate builds triangular color-code and twisted toric-code lattices,
//! samples Pauli noise, decodes syndromes with a two-step neural decoder or a
//! minimum-weight perfect-matching baseline, and estimates error-correction
//! thresholds by Monte Carlo.

pub mod codes;
pub mod exgraph;
pub mod mlp;
pub mod noise;
pub mod pauli;
