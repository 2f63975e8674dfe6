//! Experiment orchestration behind the CLI: single runs, seed sweeps,
//! baseline comparisons and the reference bit table, all written as CSV.
//!
//! Randomness is split into independent ChaCha8 streams derived from the run
//! seed, so changing one ingredient (say, the cost draw) never perturbs another.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::consensus::{ConsensusOptions, TraceWriter};
use crate::graph::{generate_random_digraph, Digraph, GraphError};
use crate::metrics::{self, contraction_envelope, format_fixed, reference, EnvelopePoint, MetricsError};
use crate::objective::{random_cost_suite, CostSuite, ObjectiveError, QuadraticCost};
use crate::optimizer::{Optimizer, OptimizerError, OptimizerState, RunRecord, StopRule, ZoomEvent, ZoomPolicy};
use crate::quantizer::{QuantizerError, QuantizerState};
use crate::scalar::{format_rational, Rational, Scalar};

pub use config::{exact, CompareSpec, CostEntry, CostSpec, Exact, InitRange, PolicySpec, RunConfig, StopSpec};

/// Error targets tracked in every summary.
pub const TARGETS: [f64; 3] = [1e-2, 1e-3, 1e-5];

/// Step budget for `compare` when the config sets none.
const COMPARE_DEFAULT_STEPS: u64 = 200;

const STREAM_COSTS: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_CONSENSUS: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    ConfigParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("every initial value on the grid equals the optimum {0}")]
    InitOnOptimum(String),
    #[error("no seeds given")]
    NoSeeds,
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Everything a run needs that is drawn once from the seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub graph: Digraph,
    pub costs: CostSuite<Rational>,
    pub x_init: Vec<Rational>,
}

impl Experiment {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let graph = match &config.graph_file {
            Some(path) => Digraph::read_edge_list(std::io::BufReader::new(File::open(path)?))?,
            None => generate_random_digraph(config.nodes, config.edge_prob, config.seed)?,
        };
        if graph.node_count() != config.nodes {
            return Err(RunnerError::Config {
                field: "nodes".into(),
                reason: format!("graph file has {} nodes", graph.node_count()),
            });
        }
        let costs = match &config.costs {
            CostSpec::Random { values, shared_x0 } => {
                let values: Vec<Rational> = values.iter().map(|v| v.0.clone()).collect();
                random_cost_suite(config.nodes, &values, *shared_x0, &mut stream(config.seed, STREAM_COSTS))?
            }
            CostSpec::Explicit { costs } => CostSuite::new(
                costs
                    .iter()
                    .map(|c| QuadraticCost::new(c.beta.0.clone(), c.x0.0.clone()))
                    .collect::<Result<_, _>>()?,
            )?,
        };
        let x_init = draw_init(config, &costs.global_optimum())?;
        Ok(Self {
            config: config.clone(),
            graph,
            costs,
            x_init,
        })
    }

    pub fn x_star(&self) -> Rational {
        self.costs.global_optimum()
    }

    pub fn zoom_policy(&self, spec: &PolicySpec) -> ZoomPolicy<Rational> {
        match spec {
            PolicySpec::Adaptive => ZoomPolicy::Adaptive,
            PolicySpec::RefineOnly { factor, coverage } => ZoomPolicy::RefineOnly {
                factor: factor.0.clone(),
                coverage: coverage.as_ref().map_or_else(|| self.config.coverage(), |c| c.0.clone()),
            },
            PolicySpec::FixedLevel => ZoomPolicy::FixedLevel,
        }
    }

    /// Initial quantizer. Baselines widen the code until it spans the initial range.
    pub fn quantizer(&self, spec: &PolicySpec, delta0: &Rational) -> Result<QuantizerState<Rational>> {
        let c = &self.config;
        let bits = match spec {
            PolicySpec::Adaptive => c.bits,
            PolicySpec::RefineOnly { coverage, .. } => {
                let cover = coverage.as_ref().map_or_else(|| c.coverage(), |v| v.0.clone());
                c.bits.max(QuantizerState::bits_to_cover(delta0, &cover))
            }
            PolicySpec::FixedLevel => c.bits.max(QuantizerState::bits_to_cover(delta0, &c.coverage())),
        };
        Ok(QuantizerState::new(c.basis0.0.clone(), delta0.clone(), c.c_in.0.clone(), c.c_out.0.clone())?.with_bits(bits)?)
    }

    pub fn optimizer(&self, spec: &PolicySpec) -> Optimizer<'_, Rational> {
        Optimizer::new(&self.graph, &self.costs, self.config.alpha.0.clone(), self.zoom_policy(spec))
            .with_consensus(ConsensusOptions {
                round_cap: self.config.round_cap,
                frame: self.config.frame,
            })
            .with_accounting(self.config.accounting)
    }

    /// Runs one policy from the shared initial values. With `trace`, the
    /// consensus rounds of step `k` are written to `w`.
    pub fn run_policy(
        &self,
        spec: &PolicySpec,
        delta0: &Rational,
        stop: StopRule,
        trace: Option<(u64, &mut dyn Write)>,
    ) -> Result<Vec<RunRecord<Rational>>> {
        let opt = self.optimizer(spec);
        let mut state = OptimizerState::new(self.x_init.clone(), self.quantizer(spec, delta0)?);
        let mut rng = stream(self.config.seed, STREAM_CONSENSUS);
        match trace {
            None => opt.run_until(&mut state, stop, &mut rng)?,
            Some((trace_k, w)) => {
                // Step by hand so the traced step can carry an observer.
                let target = stop.target_error.filter(|t| t.is_finite());
                if stop.max_steps.is_none() && target.is_none() {
                    return Err(OptimizerError::UnboundedStop.into());
                }
                opt.error_of(&state)?;
                let mut writer = TraceWriter::new(w)?;
                let mut trace_err = None;
                while !stop.max_steps.is_some_and(|m| state.k() >= m) {
                    let error = if state.k() + 1 == trace_k {
                        opt.step_observed(&mut state, &mut rng, |e| {
                            if trace_err.is_none() {
                                trace_err = writer.record(e).err();
                            }
                        })?
                        .error
                    } else {
                        opt.step(&mut state, &mut rng)?.error
                    };
                    if let Some(e) = trace_err.take() {
                        return Err(e.into());
                    }
                    if target.is_some_and(|t| error <= t) {
                        break;
                    }
                }
                writer.finish()?;
            }
        }
        Ok(state.into_history())
    }

    pub fn run(&self) -> Result<Vec<RunRecord<Rational>>> {
        self.run_policy(&self.config.policy, &self.config.delta0.0, self.stop_rule(), None)
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_steps: self.config.stop.max_steps,
            target_error: self.config.stop.target_error,
        }
    }

    /// Largest initial distance `max_i |x_i^0 - x*|`.
    pub fn initial_distance(&self) -> Rational {
        let x_star = self.x_star();
        self.x_init
            .iter()
            .map(|x| (x.clone() - x_star.clone()).abs())
            .fold(Rational::zero(), |a, b| if b > a { b } else { a })
    }

    /// Distance bound for every step of `history`, next to the measured distance.
    pub fn envelope(&self, history: &[RunRecord<Rational>]) -> (Vec<EnvelopePoint<Rational>>, bool) {
        let x_star = self.x_star();
        let deltas: Vec<Rational> = history.iter().map(|h| h.delta.clone()).collect();
        let d0 = self.initial_distance();
        let env = contraction_envelope(
            &self.config.alpha.0,
            &self.costs.strong_convexity(),
            &self.costs.lipschitz(),
            self.graph.node_count(),
            &deltas,
            &d0,
        );
        let empirical: Vec<Rational> = std::iter::once(d0)
            .chain(history.iter().map(|h| (h.x.clone() - x_star.clone()).abs()))
            .collect();
        (metrics::envelope_points(&env, &empirical), env.admissible)
    }

    pub fn summarize(&self, policy: &str, history: &[RunRecord<Rational>]) -> RunSummary {
        RunSummary::new(self.config.seed, policy, &self.x_star(), history)
    }
}

/// Uniform draw from the grid `lo, lo + res, ..., <= hi`, redrawing any value
/// equal to `x_star` (the normalized error would be undefined).
fn draw_init(config: &RunConfig, x_star: &Rational) -> Result<Vec<Rational>> {
    let InitRange { lo, hi, resolution } = &config.x_init;
    let span = ((hi.0.clone() - lo.0.clone()) / resolution.0.clone()).floor().to_integer();
    let points = span.to_u64().and_then(|s| s.checked_add(1)).ok_or_else(|| RunnerError::Config {
        field: "x_init.resolution".into(),
        reason: "grid is too fine".into(),
    })?;
    if points == 1 && lo.0 == *x_star {
        return Err(RunnerError::InitOnOptimum(format_rational(x_star)));
    }
    let mut rng = stream(config.seed, STREAM_INIT);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let j = rng.gen_range(0..points);
        let x = lo.0.clone() + resolution.0.clone() * Rational::from_int(j as i64);
        if x != *x_star {
            return x;
        }
    };
    Ok((0..config.nodes).map(|_| draw(&mut rng)).collect())
}

/// Per-run figures reported by `run`, `sweep` and `compare`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub policy: String,
    pub steps: u64,
    pub final_error: f64,
    pub x_star: Rational,
    pub final_x: Option<Rational>,
    /// First step whose error is at or below each of [`TARGETS`].
    pub steps_to: [Option<u64>; 3],
    pub zoom_ins: u64,
    pub zoom_outs: u64,
    pub refines: u64,
    pub consensus_rounds: u64,
    pub mass_transmissions: u64,
    pub bits_paper: u64,
    pub bits_measured: u64,
}

impl RunSummary {
    pub const HEADER: [&'static str; 17] = [
        "seed",
        "policy",
        "steps",
        "final_error",
        "x_star",
        "final_x",
        "steps_to_1e-2",
        "steps_to_1e-3",
        "steps_to_1e-5",
        "zoom_ins",
        "zoom_outs",
        "refines",
        "consensus_rounds",
        "mass_transmissions",
        "mean_mass_transmissions",
        "bits_paper",
        "bits_measured",
    ];

    pub fn new(seed: u64, policy: &str, x_star: &Rational, history: &[RunRecord<Rational>]) -> Self {
        let count = |ev| history.iter().filter(|h| h.event == ev).count() as u64;
        let sum = |f: fn(&RunRecord<Rational>) -> u64| history.iter().map(f).sum::<u64>();
        let steps_to = TARGETS.map(|t| history.iter().find(|h| h.error <= t).map(|h| h.k));
        Self {
            seed,
            policy: policy.to_string(),
            steps: history.len() as u64,
            final_error: history.last().map_or(f64::NAN, |h| h.error),
            x_star: x_star.clone(),
            final_x: history.last().map(|h| h.x.clone()),
            steps_to,
            zoom_ins: count(ZoomEvent::ZoomIn),
            zoom_outs: count(ZoomEvent::ZoomOut),
            refines: count(ZoomEvent::Refine),
            consensus_rounds: sum(|h| h.consensus_rounds),
            mass_transmissions: sum(|h| h.mass_transmissions),
            bits_paper: sum(|h| h.bits_paper),
            bits_measured: sum(|h| h.bits_measured),
        }
    }

    /// Mean mass transmissions per consensus execution.
    pub fn mean_mass_transmissions(&self) -> Option<f64> {
        (self.steps > 0).then(|| self.mass_transmissions as f64 / self.steps as f64)
    }

    pub fn record(&self) -> Vec<String> {
        let opt = |v: Option<u64>| v.map_or_else(String::new, |v| v.to_string());
        vec![
            self.seed.to_string(),
            self.policy.clone(),
            self.steps.to_string(),
            self.final_error.to_string(),
            format_rational(&self.x_star),
            self.final_x.as_ref().map_or_else(String::new, format_rational),
            opt(self.steps_to[0]),
            opt(self.steps_to[1]),
            opt(self.steps_to[2]),
            self.zoom_ins.to_string(),
            self.zoom_outs.to_string(),
            self.refines.to_string(),
            self.consensus_rounds.to_string(),
            self.mass_transmissions.to_string(),
            self.mean_mass_transmissions().map_or_else(String::new, |m| m.to_string()),
            self.bits_paper.to_string(),
            self.bits_measured.to_string(),
        ]
    }
}

pub const HISTORY_HEADER: [&str; 16] = [
    "k",
    "x",
    "x_approx",
    "error",
    "delta",
    "basis",
    "bits",
    "event",
    "consensus_rounds",
    "mass_transmissions",
    "self_deliveries",
    "flood_broadcasts",
    "measured_width",
    "bits_paper",
    "bits_measured",
    "delta_approx",
];

pub fn write_history<W: Write>(w: W, history: &[RunRecord<Rational>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTORY_HEADER)?;
    for h in history {
        out.write_record([
            h.k.to_string(),
            format_rational(&h.x),
            h.x.to_f64_lossy().to_string(),
            h.error.to_string(),
            format_rational(&h.delta),
            format_rational(&h.basis),
            h.bits.to_string(),
            h.event.to_string(),
            h.consensus_rounds.to_string(),
            h.mass_transmissions.to_string(),
            h.self_deliveries.to_string(),
            h.flood_broadcasts.to_string(),
            h.measured_width.to_string(),
            h.bits_paper.to_string(),
            h.bits_measured.to_string(),
            h.delta.to_f64_lossy().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summaries<W: Write>(w: W, rows: &[RunSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RunSummary::HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_envelope<W: Write>(w: W, points: &[EnvelopePoint<Rational>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "bound", "empirical", "within"])?;
    for p in points {
        out.write_record([
            p.k.to_string(),
            p.bound.to_f64_lossy().to_string(),
            p.empirical.to_f64_lossy().to_string(),
            (p.empirical <= p.bound).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn policy_name(spec: &PolicySpec) -> &'static str {
    match spec {
        PolicySpec::Adaptive => "adaptive",
        PolicySpec::RefineOnly { .. } => "refine-only",
        PolicySpec::FixedLevel => "fixed-level",
    }
}

/// Output of [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub history: Vec<RunRecord<Rational>>,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// Single run: `history.csv`, `summary.csv`, `envelope.csv`, the resolved
/// `config.toml`, the `graph.txt` edge list and, with `trace_step`, `trace.csv`.
pub fn cmd_run(config: &RunConfig, out: &Path, trace_step: Option<u64>) -> Result<RunReport> {
    let exp = Experiment::build(config)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), config.to_toml()?)?;
    let mut graph_file = create(out, "graph.txt")?;
    exp.graph.write_edge_list(&mut graph_file)?;
    graph_file.flush()?;

    let history = match trace_step {
        Some(k) => {
            let mut trace = create(out, "trace.csv")?;
            let h = exp.run_policy(&config.policy, &config.delta0.0, exp.stop_rule(), Some((k, &mut trace)))?;
            trace.flush()?;
            h
        }
        None => exp.run()?,
    };
    write_history(create(out, "history.csv")?, &history)?;
    let summary = exp.summarize(policy_name(&config.policy), &history);
    write_summaries(create(out, "summary.csv")?, std::slice::from_ref(&summary))?;
    let (points, _) = exp.envelope(&history);
    write_envelope(create(out, "envelope.csv")?, &points)?;

    let mut files: Vec<PathBuf> = ["config.toml", "graph.txt", "history.csv", "summary.csv", "envelope.csv"]
        .iter()
        .map(|f| out.join(f))
        .collect();
    if trace_step.is_some() {
        files.push(out.join("trace.csv"));
    }
    Ok(RunReport { history, summary, files })
}

/// Aggregate over a seed sweep. Medians count runs that never reached the
/// target as infinitely slow, so a median is absent when half or more missed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub seeds: usize,
    pub failures: usize,
    pub reached: [usize; 3],
    pub median_steps: [Option<f64>; 3],
    pub max_steps: [Option<u64>; 3],
    pub mean_mass_transmissions: Option<f64>,
    pub envelope_violations: usize,
}

/// One seed of a sweep; failures are kept as messages.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub seed: u64,
    pub result: std::result::Result<SeedResult, String>,
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub summary: RunSummary,
    pub envelope_violations: usize,
    pub envelope_admissible: bool,
}

fn median(mut values: Vec<Option<u64>>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    // `None` sorts last, acting as +infinity.
    values.sort_by_key(|v| (v.is_none(), *v));
    let n = values.len();
    let (a, b) = if n % 2 == 1 { (n / 2, n / 2) } else { (n / 2 - 1, n / 2) };
    Some((values[a]? as f64 + values[b]? as f64) / 2.0)
}

impl SweepAggregate {
    pub fn from_outcomes(outcomes: &[SweepOutcome]) -> Self {
        let ok: Vec<&SeedResult> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
        let per_target = |i: usize| ok.iter().map(|r| r.summary.steps_to[i]).collect::<Vec<_>>();
        let (steps, transmissions) = ok.iter().fold((0u64, 0u64), |(s, t), r| {
            (s + r.summary.steps, t + r.summary.mass_transmissions)
        });
        Self {
            seeds: outcomes.len(),
            failures: outcomes.len() - ok.len(),
            reached: [0, 1, 2].map(|i| per_target(i).iter().flatten().count()),
            median_steps: [0, 1, 2].map(|i| median(per_target(i))),
            max_steps: [0, 1, 2].map(|i| {
                let v = per_target(i);
                if v.iter().any(Option::is_none) {
                    None
                } else {
                    v.into_iter().flatten().max()
                }
            }),
            mean_mass_transmissions: (steps > 0).then(|| transmissions as f64 / steps as f64),
            envelope_violations: ok.iter().map(|r| r.envelope_violations).sum(),
        }
    }
}

/// Runs `config` once per seed (in parallel), then writes `sweep.csv`
/// (per-seed rows in seed-list order) and `sweep_aggregate.csv`.
pub fn cmd_sweep(config: &RunConfig, seeds: &[u64], out: &Path) -> Result<(Vec<SweepOutcome>, SweepAggregate)> {
    if seeds.is_empty() {
        return Err(RunnerError::NoSeeds);
    }
    config.validate()?;
    let outcomes: Vec<SweepOutcome> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RunConfig { seed, ..config.clone() };
            let result = Experiment::build(&cfg)
                .and_then(|exp| {
                    let history = exp.run()?;
                    let (points, admissible) = exp.envelope(&history);
                    Ok(SeedResult {
                        summary: exp.summarize(policy_name(&cfg.policy), &history),
                        envelope_violations: points.iter().filter(|p| p.empirical > p.bound).count(),
                        envelope_admissible: admissible,
                    })
                })
                .map_err(|e| e.to_string());
            SweepOutcome { seed, result }
        })
        .collect();
    let aggregate = SweepAggregate::from_outcomes(&outcomes);

    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_writer(create(out, "sweep.csv")?);
    let mut header: Vec<&str> = RunSummary::HEADER.to_vec();
    header.extend(["envelope_violations", "status"]);
    w.write_record(&header)?;
    for o in &outcomes {
        let row = match &o.result {
            Ok(r) => {
                let mut row = r.summary.record();
                row.extend([r.envelope_violations.to_string(), "ok".to_string()]);
                row
            }
            Err(msg) => {
                let mut row = vec![String::new(); header.len()];
                row[0] = o.seed.to_string();
                row[1] = policy_name(&config.policy).to_string();
                *row.last_mut().expect("non-empty header") = format!("error: {msg}");
                row
            }
        };
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(out, "sweep_aggregate.csv")?);
    w.write_record([
        "seeds",
        "failures",
        "target",
        "reached",
        "median_steps",
        "max_steps",
        "mean_mass_transmissions",
        "envelope_violations",
    ])?;
    for (i, t) in reference::TARGETS.iter().enumerate() {
        w.write_record([
            aggregate.seeds.to_string(),
            aggregate.failures.to_string(),
            t.to_string(),
            aggregate.reached[i].to_string(),
            aggregate.median_steps[i].map_or_else(String::new, |m| m.to_string()),
            aggregate.max_steps[i].map_or_else(String::new, |m| m.to_string()),
            aggregate.mean_mass_transmissions.map_or_else(String::new, |m| m.to_string()),
            aggregate.envelope_violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok((outcomes, aggregate))
}

/// One column of `compare`.
#[derive(Debug, Clone)]
pub struct CompareColumn {
    pub name: String,
    pub history: Vec<RunRecord<Rational>>,
    pub summary: RunSummary,
}

/// The baselines `compare` runs, as `(column name, policy, initial level)`.
pub fn compare_lineup(config: &RunConfig) -> Vec<(String, PolicySpec, Rational)> {
    let c = &config.compare;
    let mut lineup = vec![
        ("adaptive".to_string(), PolicySpec::Adaptive, config.delta0.0.clone()),
        (
            format!("refine-only-{}", format_rational(&c.refine_factor)),
            PolicySpec::RefineOnly {
                factor: c.refine_factor.clone(),
                coverage: None,
            },
            c.refine_delta0.0.clone(),
        ),
    ];
    for d in &c.fixed_levels {
        let name = format!("fixed-{}", d.0.to_f64_lossy());
        lineup.push((name, PolicySpec::FixedLevel, d.0.clone()));
    }
    lineup
}

/// Runs every baseline on the same graph, costs, initial values and consensus
/// stream for the same number of steps. Writes `compare.csv` (error per step,
/// one column per policy, starting at `k = 0`) and `compare_summary.csv`.
pub fn cmd_compare(config: &RunConfig, out: &Path) -> Result<Vec<CompareColumn>> {
    let exp = Experiment::build(config)?;
    let stop = StopRule {
        max_steps: Some(config.stop.max_steps.unwrap_or(COMPARE_DEFAULT_STEPS)),
        target_error: None,
    };
    let columns = compare_lineup(config)
        .into_iter()
        .map(|(name, spec, delta0)| {
            let history = exp.run_policy(&spec, &delta0, stop, None)?;
            let summary = exp.summarize(&name, &history);
            Ok(CompareColumn { name, history, summary })
        })
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(out)?;
    let e0 = metrics::error_metric(&exp.x_init, &exp.x_init, &exp.x_star())?;
    let mut w = csv::Writer::from_writer(create(out, "compare.csv")?);
    let mut header = vec!["k".to_string()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    let rows = columns.iter().map(|c| c.history.len()).max().unwrap_or(0);
    for k in 0..=rows {
        let mut row = vec![k.to_string()];
        for c in &columns {
            row.push(match k {
                0 => e0.to_string(),
                _ => c.history.get(k - 1).map_or_else(String::new, |h| h.error.to_string()),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let summaries: Vec<RunSummary> = columns.iter().map(|c| c.summary.clone()).collect();
    write_summaries(create(out, "compare_summary.csv")?, &summaries)?;
    Ok(columns)
}

/// A rendered cell of the bit table: exact total and two-decimal text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub name: &'static str,
    pub cells: [Option<Rational>; 3],
}

pub fn table1_rows() -> Vec<Table1Row> {
    reference::ROWS
        .iter()
        .map(|row| Table1Row {
            name: row.name,
            cells: row.cells.map(|c| c.map(reference::schedule_total)),
        })
        .collect()
}

/// Average bits per node per step for each cell of the bit table.
pub fn remark2_rows() -> Vec<(&'static str, &'static str, Rational)> {
    let mut rows = Vec::new();
    for row in reference::ROWS.iter() {
        for (target, cell) in reference::TARGETS.iter().zip(row.cells) {
            if let Some(schedule) = cell {
                rows.push((row.name, *target, reference::schedule_average(schedule)));
            }
        }
    }
    rows
}

/// Truncates (rather than rounds) to two decimals, the convention of the
/// reference figures for averages.
fn truncate2(value: &Rational) -> String {
    let hundred = Rational::from_int(100);
    let t = (value.clone() * hundred.clone()).trunc() / hundred;
    format_fixed(&t, 2)
}

/// Writes `table1.csv` (totals, `--` for empty cells) and `remark2.csv`.
pub fn cmd_table1(out: &Path) -> Result<Vec<Table1Row>> {
    fs::create_dir_all(out)?;
    let rows = table1_rows();
    let mut w = csv::Writer::from_writer(create(out, "table1.csv")?);
    let mut header = vec!["algorithm"];
    header.extend(reference::TARGETS);
    w.write_record(&header)?;
    for row in &rows {
        let mut rec = vec![row.name.to_string()];
        rec.extend(row.cells.iter().map(|c| c.as_ref().map_or_else(|| "--".to_string(), |v| format_fixed(v, 2))));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(out, "remark2.csv")?);
    w.write_record(["algorithm", "target", "avg_bits_per_node_per_step", "truncated"])?;
    for (name, target, avg) in remark2_rows() {
        w.write_record([name.to_string(), target.to_string(), format_fixed(&avg, 3), truncate2(&avg)])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Parses a seed list: `"0..100"` (half-open), `"1,2,5"`, or a mix such as `"0..3,10"`.
pub fn parse_seeds(spec: &str) -> std::result::Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                seeds.extend(a..b);
            }
            None => seeds.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}
