//! Inverse systems of metric measure graphs, with exact dyadic arithmetic.
//!
//! The crate builds finite approximations of diamond-type inverse limits
//! (interval-and-circle subdivision systems and their generalizations inside
//! normed spaces), certifies the structural axioms and quantitative
//! inequalities they are supposed to satisfy, and runs the measure-theoretic
//! differentiation calculus on them: conditional expectations along the
//! system, martingale derivatives, a fundamental-theorem-of-calculus bound,
//! maximal functions with covering certificates, and differentiability
//! residuals at small scales.
//!
//! Everything geometric is computed in exact dyadic rationals (`p / 2^k`);
//! ratios are exact rationals; floating point appears only where Euclidean
//! norms make values irrational, and those code paths say so.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the
//! `diamondlim` binary for the command-line surface.

pub mod banach;
pub mod calculus;
pub mod cli;
pub mod dyadic;
pub mod graph;
pub mod io;
pub mod system;
pub mod laakso;
pub mod oracle;

pub use dyadic::Dyadic;
pub use graph::{ball, doubling_ratio, Edge, GraphPoint, MetricGraph, PathWitness, SegmentSet};
