//! Outer optimization loop: local gradient step, quantized consensus, zoom.
//!
//! Every node runs the same zoom logic on the same consensus output, so a
//! single [`QuantizerState`] stands in for all per-node copies.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::{run_consensus_observed, ConsensusEngine, ConsensusError, ConsensusOptions};
use crate::graph::Digraph;
use crate::metrics::{error_metric, Accounting, MetricsError};
use crate::objective::{CostSuite, LocalCost};
use crate::quantizer::QuantizerState;
use crate::scalar::Scalar;

/// How the quantizer reacts when the estimate stops moving.
#[derive(Debug, Clone, PartialEq)]
pub enum ZoomPolicy<S> {
    /// Zoom out when the repeated estimate saturates the quantizer, zoom in otherwise.
    Adaptive,
    /// Divide the level by `factor` and keep the basis. The code width grows so
    /// the window still spans `[-coverage, coverage)`.
    RefineOnly { factor: S, coverage: S },
    /// Never touch the quantizer.
    FixedLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoomEvent {
    None,
    ZoomIn,
    ZoomOut,
    Refine,
}

impl fmt::Display for ZoomEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoomEvent::None => "none",
            ZoomEvent::ZoomIn => "zoom-in",
            ZoomEvent::ZoomOut => "zoom-out",
            ZoomEvent::Refine => "refine",
        })
    }
}

/// One optimization step. `delta`, `basis` and `bits` are the quantizer
/// settings the step's consensus ran with, before any zoom it triggered.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<S> {
    pub k: u64,
    pub x: S,
    pub error: f64,
    pub delta: S,
    pub basis: S,
    pub bits: u32,
    pub event: ZoomEvent,
    pub consensus_rounds: u64,
    pub mass_transmissions: u64,
    pub self_deliveries: u64,
    pub flood_broadcasts: u64,
    pub measured_width: u32,
    pub bits_paper: u64,
    pub bits_measured: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("consensus failed at step {step}: {source}")]
    Consensus {
        step: u64,
        #[source]
        source: ConsensusError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0} initial values for {1} nodes")]
    InitLength(usize, usize),
    #[error("stop rule needs max_steps or target_error")]
    UnboundedStop,
}

#[derive(Debug, Clone)]
pub struct OptimizerState<S> {
    x: Vec<S>,
    x_init: Vec<S>,
    q: QuantizerState<S>,
    k: u64,
    history: Vec<RunRecord<S>>,
}

impl<S: Scalar> OptimizerState<S> {
    pub fn new(x_init: Vec<S>, q: QuantizerState<S>) -> Self {
        Self {
            x: x_init.clone(),
            x_init,
            q,
            k: 0,
            history: Vec::new(),
        }
    }

    pub fn x(&self) -> &[S] {
        &self.x
    }

    pub fn x_init(&self) -> &[S] {
        &self.x_init
    }

    pub fn quantizer(&self) -> &QuantizerState<S> {
        &self.q
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn history(&self) -> &[RunRecord<S>] {
        &self.history
    }

    pub fn into_history(self) -> Vec<RunRecord<S>> {
        self.history
    }

    /// Shared estimate, if every node holds the same value.
    pub fn common_value(&self) -> Option<&S> {
        let first = self.x.first()?;
        self.x.iter().all(|v| v == first).then_some(first)
    }
}

/// `x_i - alpha * grad f_i(x_i)` at every node.
pub fn gradient_step<S: Scalar, C: LocalCost<S>>(x: &[S], costs: &[C], alpha: &S) -> Vec<S> {
    x.iter()
        .zip(costs)
        .map(|(xi, c)| xi.clone() - alpha.clone() * c.grad(xi))
        .collect()
}

/// Zoom rule applied after each consensus. Nothing happens unless the new
/// estimate equals the previous one exactly.
pub fn zoom_decide<S: Scalar>(
    q: &QuantizerState<S>,
    x_new: &S,
    x_old: &S,
    policy: &ZoomPolicy<S>,
) -> (QuantizerState<S>, ZoomEvent) {
    let mut next = q.clone();
    if x_new != x_old {
        return (next, ZoomEvent::None);
    }
    let event = match policy {
        ZoomPolicy::Adaptive => {
            // Saturation is judged against the level in force before this zoom.
            if q.in_range(x_new) {
                next.zoom_in(x_new.clone());
                ZoomEvent::ZoomIn
            } else {
                next.zoom_out(x_new.clone());
                ZoomEvent::ZoomOut
            }
        }
        ZoomPolicy::RefineOnly { factor, coverage } => {
            let finer = q.delta().clone() / factor.clone();
            // Past the widest code the window would no longer span the range.
            match QuantizerState::try_bits_to_cover(&finer, coverage) {
                Some(bits) => {
                    next.refine(factor);
                    next.set_bits_unchecked(bits.max(q.bits()));
                    ZoomEvent::Refine
                }
                None => ZoomEvent::None,
            }
        }
        ZoomPolicy::FixedLevel => ZoomEvent::None,
    };
    (next, event)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopRule {
    pub max_steps: Option<u64>,
    pub target_error: Option<f64>,
}

/// Everything fixed for the duration of a run.
#[derive(Debug, Clone)]
pub struct Optimizer<'a, S> {
    pub graph: &'a Digraph,
    pub costs: &'a CostSuite<S>,
    pub alpha: S,
    pub policy: ZoomPolicy<S>,
    pub consensus: ConsensusOptions,
    pub accounting: Accounting,
    x_star: S,
}

impl<'a, S: Scalar> Optimizer<'a, S> {
    pub fn new(graph: &'a Digraph, costs: &'a CostSuite<S>, alpha: S, policy: ZoomPolicy<S>) -> Self {
        Self {
            graph,
            costs,
            alpha,
            policy,
            consensus: ConsensusOptions::default(),
            accounting: Accounting::default(),
            x_star: costs.global_optimum(),
        }
    }

    pub fn with_consensus(mut self, consensus: ConsensusOptions) -> Self {
        self.consensus = consensus;
        self
    }

    pub fn with_accounting(mut self, accounting: Accounting) -> Self {
        self.accounting = accounting;
        self
    }

    pub fn x_star(&self) -> &S {
        &self.x_star
    }

    pub fn error_of(&self, state: &OptimizerState<S>) -> Result<f64, MetricsError> {
        error_metric(state.x(), state.x_init(), &self.x_star)
    }

    /// One full iteration; appends and returns the step's record.
    pub fn step<'s, R: Rng + ?Sized>(
        &self,
        state: &'s mut OptimizerState<S>,
        rng: &mut R,
    ) -> Result<&'s RunRecord<S>, OptimizerError> {
        self.step_observed(state, rng, |_| {})
    }

    /// [`Optimizer::step`], calling `observe` after every consensus round.
    pub fn step_observed<'s, R, F>(
        &self,
        state: &'s mut OptimizerState<S>,
        rng: &mut R,
        observe: F,
    ) -> Result<&'s RunRecord<S>, OptimizerError>
    where
        R: Rng + ?Sized,
        F: FnMut(&ConsensusEngine<'_, S>),
    {
        let n = self.graph.node_count();
        if state.x.len() != n {
            return Err(OptimizerError::InitLength(state.x.len(), n));
        }
        let k = state.k + 1;
        let x_half = gradient_step(&state.x, self.costs.costs(), &self.alpha);
        let outcome = run_consensus_observed(self.graph, &x_half, &state.q, &self.consensus, rng, observe)
            .map_err(|source| OptimizerError::Consensus { step: k, source })?;
        let x_new = outcome.value().clone();

        // Before the first step the nodes may disagree; the shared quantizer
        // only moves when every node sees its estimate repeat.
        let (q_next, event) = match state.common_value() {
            Some(prev) => zoom_decide(&state.q, &x_new, prev, &self.policy),
            None => (state.q.clone(), ZoomEvent::None),
        };

        let stats = &outcome.stats;
        let paper_width = self.accounting.paper_width(state.q.bits());
        let measured_width = stats.measured_width();
        let record = RunRecord {
            k,
            x: x_new.clone(),
            error: 0.0,
            delta: state.q.delta().clone(),
            basis: state.q.basis().clone(),
            bits: state.q.bits(),
            event,
            consensus_rounds: stats.rounds,
            mass_transmissions: stats.mass_transmissions,
            self_deliveries: stats.self_deliveries,
            flood_broadcasts: stats.flood_broadcasts,
            measured_width,
            bits_paper: stats.mass_transmissions * paper_width as u64,
            bits_measured: stats.mass_transmissions * measured_width as u64,
        };

        state.x = outcome.values;
        state.q = q_next;
        state.k = k;
        let error = self.error_of(state)?;
        state.history.push(RunRecord { error, ..record });
        Ok(state.history.last().expect("just pushed"))
    }

    /// Steps until the error target or the step budget is reached.
    pub fn run_until<R: Rng + ?Sized>(
        &self,
        state: &mut OptimizerState<S>,
        stop: StopRule,
        rng: &mut R,
    ) -> Result<(), OptimizerError> {
        // A non-finite target can never be met, so it does not bound the run.
        let target = stop.target_error.filter(|t| t.is_finite());
        if stop.max_steps.is_none() && target.is_none() {
            return Err(OptimizerError::UnboundedStop);
        }
        // Fail fast on an initial value sitting on the optimum.
        self.error_of(state)?;
        loop {
            if stop.max_steps.is_some_and(|m| state.k >= m) {
                return Ok(());
            }
            let error = self.step(state, rng)?.error;
            if target.is_some_and(|t| error <= t) {
                return Ok(());
            }
        }
    }
}
