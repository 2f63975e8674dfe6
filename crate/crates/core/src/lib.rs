//! Distributed gradient descent over a strongly connected digraph where nodes
//! only exchange codes of a few-bit mid-rise quantizer.
//!
//! Each optimization step runs a local gradient step, then a finite-time
//! quantized average consensus, then an adaptive zoom: when the agreed
//! estimate repeats, the quantizer re-centers on it and either shrinks its
//! level (zoom-in) or, if the estimate sits outside the quantizer's window,
//! grows it (zoom-out).
//!
//! The math is generic over [`Scalar`]. [`Rational`] is the reference type so
//! every equality test in the zoom logic is exact; `f64`/`f32` also work.

pub mod consensus;
pub mod graph;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod quantizer;
pub mod runner;
pub mod scalar;

pub use consensus::{ConsensusOptions, ConsensusOutcome, ConsensusStats, Frame};
pub use graph::{Digraph, NodeId};
pub use metrics::Accounting;
pub use objective::{CostSuite, LocalCost, QuadraticCost};
pub use optimizer::{Optimizer, OptimizerState, RunRecord, StopRule, ZoomEvent, ZoomPolicy};
pub use quantizer::QuantizerState;
pub use scalar::{Rational, Scalar};

pub type ExactQuantizer = QuantizerState<Rational>;
pub type ExactCostSuite = CostSuite<Rational>;
pub type ExactOptimizerState = OptimizerState<Rational>;
pub type ExactRunRecord = RunRecord<Rational>;
pub type ExactZoomPolicy = ZoomPolicy<Rational>;

pub type FloatQuantizer = QuantizerState<f64>;
pub type FloatCostSuite = CostSuite<f64>;
pub type FloatOptimizerState = OptimizerState<f64>;
pub type FloatRunRecord = RunRecord<f64>;
pub type FloatZoomPolicy = ZoomPolicy<f64>;
