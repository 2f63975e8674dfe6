//! Error metric, bit accounting, the linear-rate envelope and the zoom-out bound.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("initial value of node {0} equals the optimum; the normalized error is undefined")]
    InitialOnOptimum(usize),
    #[error("{0} estimates but {1} initial values")]
    LengthMismatch(usize, usize),
}

/// Normalized distance to the optimum:
/// `sqrt(sum_j (x_j - x*)^2 / (x_j^0 - x*)^2)`.
///
/// Differences are taken exactly before converting to `f64`, so tiny errors
/// keep their precision.
pub fn error_metric<S: Scalar>(x: &[S], x_init: &[S], x_star: &S) -> Result<f64, MetricsError> {
    if x.len() != x_init.len() {
        return Err(MetricsError::LengthMismatch(x.len(), x_init.len()));
    }
    let mut sum = 0.0;
    for (j, (xj, x0)) in x.iter().zip(x_init).enumerate() {
        let d0 = x0.clone() - x_star.clone();
        if d0.is_zero() {
            return Err(MetricsError::InitialOnOptimum(j));
        }
        let ratio = ((xj.clone() - x_star.clone()) / d0).to_f64_lossy();
        sum += ratio * ratio;
    }
    Ok(sum.sqrt())
}

/// Which bit count is treated as the headline total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Accounting {
    /// Fixed bits per token. `None` charges the quantizer's code width.
    PaperFaithful { bits_per_message: Option<u32> },
    /// `ceil(log2(#distinct payloads))` bits per token, from the run itself.
    Measured,
}

impl Default for Accounting {
    fn default() -> Self {
        Accounting::PaperFaithful {
            bits_per_message: None,
        }
    }
}

impl Accounting {
    pub fn paper_width(&self, quantizer_bits: u32) -> u32 {
        match self {
            Accounting::PaperFaithful {
                bits_per_message: Some(b),
            } => *b,
            _ => quantizer_bits,
        }
    }
}

/// `total_bits = c_s * b_pm * n_tt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitAccount<S> {
    pub c_s: u64,
    pub b_pm: u64,
    pub n_tt: S,
    pub total_bits: S,
}

impl<S: Scalar> BitAccount<S> {
    pub fn new(c_s: u64, b_pm: u64, n_tt: S) -> Self {
        let total_bits = bits_total(c_s, b_pm, &n_tt);
        Self {
            c_s,
            b_pm,
            n_tt,
            total_bits,
        }
    }
}

pub fn bits_total<S: Scalar>(c_s: u64, b_pm: u64, n_tt: &S) -> S {
    S::from_int(c_s as i64) * S::from_int(b_pm as i64) * n_tt.clone()
}

pub fn avg_bits_per_node_per_step<S: Scalar>(b_pm: u64, n_tt: &S, n: usize) -> S {
    assert!(n >= 1, "need at least one node");
    S::from_int(b_pm as i64) * n_tt.clone() / S::from_int(n as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint<S> {
    pub k: usize,
    pub bound: S,
    pub empirical: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<S> {
    /// `bounds[k]` bounds the distance after `k` steps; `bounds[0] = d0`.
    pub bounds: Vec<S>,
    /// Whether `alpha` lies in `(0, 2n/(mu+L)]`.
    pub admissible: bool,
}

/// Linear-rate recursion
/// `b_{k+1} = (1 - alpha*mu/n) * b_k + (4*alpha*L/n + 2) * delta_k`, `b_0 = d0`,
/// where `delta_k` is the level used during step `k`.
pub fn contraction_envelope<S: Scalar>(
    alpha: &S,
    mu: &S,
    lipschitz: &S,
    n: usize,
    deltas: &[S],
    d0: &S,
) -> Envelope<S> {
    let n_s = S::from_int(n as i64);
    let rate = S::one() - alpha.clone() * mu.clone() / n_s.clone();
    let gain = S::from_int(4) * alpha.clone() * lipschitz.clone() / n_s.clone() + S::from_int(2);
    let limit = S::from_int(2) * n_s / (mu.clone() + lipschitz.clone());
    let admissible = *alpha > S::zero() && *alpha <= limit;
    let mut bounds = Vec::with_capacity(deltas.len() + 1);
    bounds.push(d0.clone());
    for delta in deltas {
        let prev = bounds.last().expect("seeded with d0").clone();
        bounds.push(rate.clone() * prev + gain.clone() * delta.clone());
    }
    Envelope { bounds, admissible }
}

/// Pairs each bound with the measured distance; `empirical[k]` must be the
/// distance after `k` steps.
pub fn envelope_points<S: Scalar>(env: &Envelope<S>, empirical: &[S]) -> Vec<EnvelopePoint<S>> {
    env.bounds
        .iter()
        .zip(empirical)
        .enumerate()
        .map(|(k, (b, e))| EnvelopePoint {
            k,
            bound: b.clone(),
            empirical: e.clone(),
        })
        .collect()
}

/// Bound on the number of zoom-outs needed before the optimum enters the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoomOutBound {
    /// `ceil((x* - ln(3*delta0)) / ln(c_out))`, evaluated literally.
    pub as_printed: i64,
    /// `ceil(log_{c_out}(|x*| / (3*delta0)))`, clamped at 0; `None` when `x* = 0`.
    pub corrected: Option<u64>,
}

pub fn zoom_out_bound<S: Scalar>(x_star: &S, delta0: &S, c_out: &S) -> ZoomOutBound {
    assert!(*delta0 > S::zero() && *c_out > S::one(), "need delta0 > 0 and c_out > 1");
    let three_delta = S::from_int(3) * delta0.clone();
    let as_printed = ((x_star.to_f64_lossy() - three_delta.to_f64_lossy().ln()) / c_out.to_f64_lossy().ln()).ceil() as i64;
    let corrected = (!x_star.is_zero()).then(|| {
        // Smallest nu >= 0 with 3*delta0*c_out^nu >= |x*|, found exactly.
        let target = x_star.abs();
        let mut reach = three_delta;
        let mut nu = 0;
        while reach < target {
            reach = reach * c_out.clone();
            nu += 1;
        }
        nu
    });
    ZoomOutBound {
        as_printed,
        corrected,
    }
}

/// Rounds half away from zero to `places` decimals, using exact arithmetic.
pub fn format_fixed(value: &Rational, places: usize) -> String {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::Signed;

    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = value.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + Rational::new(1.into(), 2.into())).floor().to_integer();
    let (whole, frac) = rounded.div_rem(&scale);
    let sign = if value.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac:0>places$}")
    }
}

/// Reference bit-budget comparison: convergence steps and per-step message
/// widths for three error targets, with a fixed transmissions-per-consensus figure.
pub mod reference {
    use super::{avg_bits_per_node_per_step, bits_total};
    use crate::scalar::{Rational, Scalar};

    pub const TARGETS: [&str; 3] = ["1e-2", "1e-3", "1e-5"];

    /// Transmissions per consensus execution used for the table.
    pub fn transmissions_per_consensus() -> Rational {
        Rational::from_ratio(21188, 100)
    }

    pub const NODES: usize = 20;

    /// `(steps, bits_per_message)` segments spent to reach a target.
    pub type Schedule = &'static [(u64, u64)];

    pub struct Row {
        pub name: &'static str,
        pub cells: [Option<Schedule>; 3],
    }

    pub const ROWS: [Row; 5] = [
        Row {
            name: "adaptive-zoom (3-bit)",
            cells: [Some(&[(18, 3)]), Some(&[(27, 3)]), Some(&[(40, 3)])],
        },
        Row {
            name: "refine-only (c_r=10)",
            cells: [
                Some(&[(3, 7)]),
                Some(&[(3, 7), (5, 10)]),
                Some(&[(3, 7), (5, 10), (8, 14)]),
            ],
        },
        Row {
            name: "fixed-level (delta=0.1)",
            cells: [Some(&[(3, 7)]), None, None],
        },
        Row {
            name: "fixed-level (delta=0.01)",
            cells: [Some(&[(3, 10)]), Some(&[(5, 10)]), None],
        },
        Row {
            name: "fixed-level (delta=0.001)",
            cells: [Some(&[(3, 14)]), Some(&[(5, 14)]), Some(&[(11, 14)])],
        },
    ];

    pub fn schedule_total(schedule: Schedule) -> Rational {
        let n_tt = transmissions_per_consensus();
        schedule
            .iter()
            .fold(Rational::from_int(0), |acc, &(c_s, b_pm)| acc + bits_total(c_s, b_pm, &n_tt))
    }

    pub fn schedule_steps(schedule: Schedule) -> u64 {
        schedule.iter().map(|&(c, _)| c).sum()
    }

    /// Average bits per node per optimization step over a schedule.
    pub fn schedule_average(schedule: Schedule) -> Rational {
        let steps = schedule_steps(schedule);
        let weighted = schedule.iter().fold(Rational::from_int(0), |acc, &(c_s, b_pm)| {
            acc + Rational::from_int(c_s as i64) * avg_bits_per_node_per_step(b_pm, &transmissions_per_consensus(), NODES)
        });
        weighted / Rational::from_int(steps as i64)
    }
}
