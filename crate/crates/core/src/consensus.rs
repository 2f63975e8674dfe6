//! Finite-time quantized average consensus over a digraph.
//!
//! Each node starts with mass `(y, z) = (2 * q / delta, 2)` where `q` is its
//! quantized input. In every synchronous round a node
//!
//! 1. restarts its flood pair `(M, m) = (ceil(y/z), floor(y/z))` at the start of
//!    each epoch of `D` rounds,
//! 2. broadcasts `(M, m)` and keeps the max/min of what it hears,
//! 3. peels off tokens `floor(y/z)` until one unit of `z` is left, sending each
//!    to itself or a uniformly chosen out-neighbor,
//! 4. absorbs every token addressed to it.
//!
//! At each epoch end, if `M - m <= 1` everywhere, every node outputs `m * delta`
//! (shifted back by the basis in [`Frame::BasisRelative`]). All sends of a
//! round are computed before any delivery, so node iteration order never
//! matters.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Digraph, NodeId};
use crate::quantizer::QuantizerState;
use crate::scalar::Scalar;

pub const DEFAULT_ROUND_CAP: u64 = 100_000;

/// Coordinates in which masses are expressed.
///
/// `Absolute` uses `y = 2 * Q(x) / delta` and outputs `m * delta`, so estimates
/// live on integer multiples of `delta`. `BasisRelative` uses
/// `y = 2 * (Q(x) - b_q) / delta`, which is exactly the odd integer
/// `2c - (2^w - 1)` of the transmitted code, and outputs `b_q + m * delta`.
/// The two coincide whenever `b_q` is a multiple of `delta`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    #[default]
    BasisRelative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassState<S> {
    pub y: S,
    pub z: u64,
}

impl<S: Scalar> MassState<S> {
    fn ratio(&self) -> S {
        self.y.clone() / S::from_int(self.z as i64)
    }
}

/// Running `(max ceil, min floor)` for the current epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodState<S> {
    pub max: S,
    pub min: S,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage<S> {
    Mass(S),
    Flood { max: S, min: S },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<S> {
    pub from: NodeId,
    pub to: NodeId,
    pub message: WireMessage<S>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConsensusStats {
    pub rounds: u64,
    /// Mass tokens sent across an edge to an out-neighbor.
    pub mass_transmissions: u64,
    /// Mass tokens a node addressed to itself; never cross a channel.
    pub self_deliveries: u64,
    /// `(M, m)` messages, one per out-edge per round.
    pub flood_broadcasts: u64,
    /// Distinct token payloads `c_y` seen on the wire.
    pub alphabet: BTreeSet<i128>,
}

impl ConsensusStats {
    /// Bits per token needed to distinguish every payload actually sent.
    pub fn measured_width(&self) -> u32 {
        match self.alphabet.len() {
            0 | 1 => 1,
            k => usize::BITS - (k - 1).leading_zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConsensusError {
    #[error("consensus did not terminate within {0} rounds")]
    RoundCapExceeded(u64),
    #[error("nodes disagree on termination at round {0}")]
    Disagreement(u64),
    #[error("expected {expected} inputs, got {got}")]
    InputLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsensusOptions {
    pub round_cap: u64,
    pub frame: Frame,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        Self {
            round_cap: DEFAULT_ROUND_CAP,
            frame: Frame::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusOutcome<S> {
    pub values: Vec<S>,
    pub stats: ConsensusStats,
}

impl<S: Scalar> ConsensusOutcome<S> {
    /// The common output; every entry of `values` is identical.
    pub fn value(&self) -> &S {
        &self.values[0]
    }
}

/// Initial masses: `z = 2`, `y = 2 * (Q(x) - origin) / delta`.
pub fn init_consensus<S: Scalar>(x_half: &[S], q: &QuantizerState<S>, frame: Frame) -> Vec<MassState<S>> {
    let origin = frame_origin(q, frame);
    let two = S::from_int(2);
    x_half
        .iter()
        .map(|x| MassState {
            y: two.clone() * (q.quantize(x) - origin.clone()) / q.delta().clone(),
            z: 2,
        })
        .collect()
}

fn frame_origin<S: Scalar>(q: &QuantizerState<S>, frame: Frame) -> S {
    match frame {
        Frame::Absolute => S::zero(),
        Frame::BasisRelative => q.basis().clone(),
    }
}

/// Uniform choice over `{node} ∪ out-neighbors(node)`.
pub fn sample_out_target<R: Rng + ?Sized>(node: NodeId, g: &Digraph, rng: &mut R) -> NodeId {
    let outs = g.out_neighbors(node);
    match rng.gen_range(0..=outs.len()) {
        0 => node,
        i => outs[i - 1],
    }
}

/// Epoch length actually used: `D = 1` would make the restart test
/// `lambda mod D == 1` unreachable, so it is lifted to 2.
pub fn effective_epoch(diameter: usize) -> u64 {
    diameter.max(2) as u64
}

/// Single consensus execution, advanced one round at a time.
#[derive(Debug, Clone)]
pub struct ConsensusEngine<'g, S> {
    graph: &'g Digraph,
    epoch: u64,
    masses: Vec<MassState<S>>,
    flood: Vec<FloodState<S>>,
    lambda: u64,
    stats: ConsensusStats,
    unit: S,
    origin: S,
    outbox: Vec<Envelope<S>>,
}

impl<'g, S: Scalar> ConsensusEngine<'g, S> {
    pub fn new(
        graph: &'g Digraph,
        x_half: &[S],
        q: &QuantizerState<S>,
        frame: Frame,
    ) -> Result<Self, ConsensusError> {
        if x_half.len() != graph.node_count() {
            return Err(ConsensusError::InputLength {
                expected: graph.node_count(),
                got: x_half.len(),
            });
        }
        let masses = init_consensus(x_half, q, frame);
        let flood = masses
            .iter()
            .map(|s| {
                let r = s.ratio();
                FloodState {
                    max: r.ceil(),
                    min: r.floor(),
                }
            })
            .collect();
        Ok(Self {
            graph,
            epoch: effective_epoch(graph.diameter()),
            masses,
            flood,
            lambda: 0,
            stats: ConsensusStats::default(),
            unit: q.delta().clone(),
            origin: frame_origin(q, frame),
            outbox: Vec::new(),
        })
    }

    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn masses(&self) -> &[MassState<S>] {
        &self.masses
    }

    pub fn flood(&self) -> &[FloodState<S>] {
        &self.flood
    }

    pub fn stats(&self) -> &ConsensusStats {
        &self.stats
    }

    /// Mass tokens sent during the most recent round.
    pub fn last_messages(&self) -> &[Envelope<S>] {
        &self.outbox
    }

    /// `(sum y, sum z)` over all nodes; nothing is in flight between rounds.
    pub fn totals(&self) -> (S, u64) {
        self.masses
            .iter()
            .fold((S::zero(), 0), |(y, z), m| (y + m.y.clone(), z + m.z))
    }

    pub fn round<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.lambda += 1;

        if self.lambda % self.epoch == 1 {
            for (mass, flood) in self.masses.iter().zip(&mut self.flood) {
                if mass.z >= 1 {
                    let r = mass.ratio();
                    flood.max = r.ceil();
                    flood.min = r.floor();
                }
            }
        }

        let heard = self.flood.clone();
        for v in self.graph.nodes() {
            let flood = &mut self.flood[v.0];
            for u in self.graph.in_neighbors(v) {
                if heard[u.0].max > flood.max {
                    flood.max = heard[u.0].max.clone();
                }
                if heard[u.0].min < flood.min {
                    flood.min = heard[u.0].min.clone();
                }
            }
        }
        self.stats.flood_broadcasts += self.graph.edge_count() as u64;

        self.outbox.clear();
        for v in self.graph.nodes() {
            let mass = &mut self.masses[v.0];
            while mass.z > 1 {
                let token = mass.ratio().floor();
                mass.y = mass.y.clone() - token.clone();
                mass.z -= 1;
                let to = sample_out_target(v, self.graph, rng);
                if to == v {
                    self.stats.self_deliveries += 1;
                } else {
                    self.stats.mass_transmissions += 1;
                }
                if let Some(code) = token.to_i128() {
                    self.stats.alphabet.insert(code);
                }
                self.outbox.push(Envelope {
                    from: v,
                    to,
                    message: WireMessage::Mass(token),
                });
            }
        }

        for env in &self.outbox {
            if let WireMessage::Mass(token) = &env.message {
                let mass = &mut self.masses[env.to.0];
                mass.y = mass.y.clone() + token.clone();
                mass.z += 1;
            }
        }
        self.stats.rounds = self.lambda;
    }

    /// Stopping test, meaningful only at epoch ends (`lambda mod D == 0`).
    pub fn check_stop(&self) -> Result<Option<Vec<S>>, ConsensusError> {
        if self.lambda == 0 || self.lambda % self.epoch != 0 {
            return Ok(None);
        }
        let done: Vec<bool> = self
            .flood
            .iter()
            .map(|f| f.max.clone() - f.min.clone() <= S::one())
            .collect();
        if done.iter().all(|d| !d) {
            return Ok(None);
        }
        let first = &self.flood[0];
        if !done.iter().all(|&d| d) || self.flood.iter().any(|f| f != first) {
            return Err(ConsensusError::Disagreement(self.lambda));
        }
        Ok(Some(
            self.flood
                .iter()
                .map(|f| self.origin.clone() + f.min.clone() * self.unit.clone())
                .collect(),
        ))
    }
}

/// Runs rounds until the stopping test fires, calling `observe` after each round.
pub fn run_consensus_observed<S, R, F>(
    g: &Digraph,
    x_half: &[S],
    q: &QuantizerState<S>,
    opts: &ConsensusOptions,
    rng: &mut R,
    mut observe: F,
) -> Result<ConsensusOutcome<S>, ConsensusError>
where
    S: Scalar,
    R: Rng + ?Sized,
    F: FnMut(&ConsensusEngine<'_, S>),
{
    let mut engine = ConsensusEngine::new(g, x_half, q, opts.frame)?;
    while engine.lambda() < opts.round_cap {
        engine.round(rng);
        observe(&engine);
        if let Some(values) = engine.check_stop()? {
            return Ok(ConsensusOutcome {
                values,
                stats: engine.stats,
            });
        }
    }
    Err(ConsensusError::RoundCapExceeded(opts.round_cap))
}

pub fn run_consensus<S: Scalar, R: Rng + ?Sized>(
    g: &Digraph,
    x_half: &[S],
    q: &QuantizerState<S>,
    opts: &ConsensusOptions,
    rng: &mut R,
) -> Result<ConsensusOutcome<S>, ConsensusError> {
    run_consensus_observed(g, x_half, q, opts, rng, |_| {})
}

/// Long-format per-round trace: one row per node per round.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub const HEADER: [&'static str; 7] = ["lambda", "node", "y", "z", "max", "min", "sent"];

    pub fn new(w: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(Self::HEADER)?;
        Ok(Self { inner })
    }

    pub fn record<S: Scalar>(&mut self, engine: &ConsensusEngine<'_, S>) -> csv::Result<()> {
        let mut sent = vec![0u64; engine.masses().len()];
        for env in engine.last_messages() {
            sent[env.from.0] += 1;
        }
        for (i, (mass, flood)) in engine.masses().iter().zip(engine.flood()).enumerate() {
            self.inner.write_record([
                engine.lambda().to_string(),
                i.to_string(),
                mass.y.to_string(),
                mass.z.to_string(),
                flood.max.to_string(),
                flood.min.to_string(),
                sent[i].to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> csv::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}
