use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use zoomquant::consensus::Frame;
use zoomquant::metrics::Accounting;
use zoomquant::runner::{self, Exact, PolicySpec, RunConfig, RunnerError};
use zoomquant::scalar::parse_rational;

#[derive(Parser)]
#[command(name = "zoomquant", version, about = "Quantized distributed optimization with an adaptive zooming quantizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: history, summary, envelope, resolved config and graph.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Also write every consensus round of step K to trace.csv.
        #[arg(long, value_name = "K")]
        trace_step: Option<u64>,
    },
    /// The same config over many seeds, with aggregate statistics.
    Sweep {
        #[command(flatten)]
        opts: RunOpts,
        /// Seed list such as `0..100` or `1,4,9`.
        #[arg(long, default_value = "0..100")]
        seeds: String,
    },
    /// Adaptive zooming against refine-only and fixed-level baselines.
    Compare {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Reference bit-budget table and average bits per node per step.
    Table1 {
        #[arg(long, env = "ZOOMQUANT_OUT", default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Adaptive,
    RefineOnly,
    FixedLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    BasisRelative,
    Absolute,
}

#[derive(Args)]
struct RunOpts {
    /// TOML config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Step size, e.g. `3/25` or `0.12`.
    #[arg(long, value_parser = parse_exact)]
    alpha: Option<Exact>,
    #[arg(long, value_parser = parse_exact)]
    delta0: Option<Exact>,
    #[arg(long, value_parser = parse_exact)]
    c_in: Option<Exact>,
    #[arg(long, value_parser = parse_exact)]
    c_out: Option<Exact>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long, value_enum)]
    frame: Option<FrameArg>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    target_error: Option<f64>,
    /// `paper`, `paper:BITS` or `measured`.
    #[arg(long, value_parser = parse_accounting)]
    accounting: Option<Accounting>,
    #[arg(long, env = "ZOOMQUANT_OUT", default_value = "out")]
    out: PathBuf,
}

fn parse_exact(s: &str) -> Result<Exact, String> {
    parse_rational(s).map(Exact).map_err(|e| e.to_string())
}

fn parse_accounting(s: &str) -> Result<Accounting, String> {
    match s.split_once(':') {
        None if s == "paper" => Ok(Accounting::PaperFaithful { bits_per_message: None }),
        None if s == "measured" => Ok(Accounting::Measured),
        Some(("paper", bits)) => bits
            .parse()
            .map(|b| Accounting::PaperFaithful { bits_per_message: Some(b) })
            .map_err(|_| format!("bad bit count `{bits}`")),
        _ => Err(format!("expected `paper`, `paper:BITS` or `measured`, got `{s}`")),
    }
}

impl RunOpts {
    fn resolve(&self) -> Result<RunConfig, RunnerError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.nodes {
            cfg.nodes = v;
        }
        if let Some(v) = self.edge_prob {
            cfg.edge_prob = v;
        }
        for (dst, src) in [
            (&mut cfg.alpha, &self.alpha),
            (&mut cfg.delta0, &self.delta0),
            (&mut cfg.c_in, &self.c_in),
            (&mut cfg.c_out, &self.c_out),
        ] {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        if let Some(p) = self.policy {
            cfg.policy = match p {
                PolicyArg::Adaptive => PolicySpec::Adaptive,
                PolicyArg::RefineOnly => PolicySpec::RefineOnly {
                    factor: cfg.compare.refine_factor.clone(),
                    coverage: None,
                },
                PolicyArg::FixedLevel => PolicySpec::FixedLevel,
            };
        }
        if let Some(f) = self.frame {
            cfg.frame = match f {
                FrameArg::BasisRelative => Frame::BasisRelative,
                FrameArg::Absolute => Frame::Absolute,
            };
        }
        if let Some(v) = self.max_steps {
            cfg.stop.max_steps = Some(v);
        }
        if let Some(v) = self.target_error {
            cfg.stop.target_error = Some(v);
        }
        if let Some(a) = self.accounting {
            cfg.accounting = a;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn execute(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Run { opts, trace_step } => {
            let cfg = opts.resolve()?;
            let report = runner::cmd_run(&cfg, &opts.out, trace_step)?;
            let s = &report.summary;
            println!(
                "steps={} final_error={:e} zoom_ins={} zoom_outs={} bits_paper={} bits_measured={}",
                s.steps, s.final_error, s.zoom_ins, s.zoom_outs, s.bits_paper, s.bits_measured
            );
            println!("wrote {}", opts.out.display());
        }
        Command::Sweep { opts, seeds } => {
            let cfg = opts.resolve()?;
            let seeds = runner::parse_seeds(&seeds).map_err(|reason| RunnerError::Config {
                field: "seeds".into(),
                reason,
            })?;
            let (_, agg) = runner::cmd_sweep(&cfg, &seeds, &opts.out)?;
            println!("seeds={} failures={}", agg.seeds, agg.failures);
            for (i, t) in ["1e-2", "1e-3", "1e-5"].iter().enumerate() {
                println!(
                    "target={t} reached={} median_steps={} max_steps={}",
                    agg.reached[i],
                    fmt_opt(agg.median_steps[i]),
                    fmt_opt(agg.max_steps[i])
                );
            }
            println!("mean_mass_transmissions={}", fmt_opt(agg.mean_mass_transmissions));
            println!("wrote {}", opts.out.display());
        }
        Command::Compare { opts } => {
            let cfg = opts.resolve()?;
            for c in runner::cmd_compare(&cfg, &opts.out)? {
                println!("{:<18} final_error={:e} bits_paper={}", c.name, c.summary.final_error, c.summary.bits_paper);
            }
            println!("wrote {}", opts.out.display());
        }
        Command::Table1 { out } => {
            runner::cmd_table1(&out)?;
            print!("{}", std::fs::read_to_string(out.join("table1.csv"))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
