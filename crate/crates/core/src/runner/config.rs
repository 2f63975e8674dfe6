//! Run configuration: a TOML file with every rational written as `"num/den"`.

use std::ops::Deref;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::consensus::{Frame, DEFAULT_ROUND_CAP};
use crate::metrics::Accounting;
use crate::quantizer::MAX_BITS;
use num_traits::Signed;

use crate::scalar::{rational_str, Rational, Scalar};

use super::RunnerError;

/// Rational that (de)serializes as a `"num/den"` string. Decimal strings such
/// as `"0.12"` are accepted on input and converted exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Exact(#[serde(with = "rational_str")] pub Rational);

impl Deref for Exact {
    type Target = Rational;
    fn deref(&self) -> &Rational {
        &self.0
    }
}

impl From<Rational> for Exact {
    fn from(r: Rational) -> Self {
        Exact(r)
    }
}

pub fn exact(n: i64, d: i64) -> Exact {
    Exact(Rational::from_ratio(n, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Adaptive,
    RefineOnly {
        factor: Exact,
        /// Half-width the code must cover; defaults to the larger endpoint of `x_init`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coverage: Option<Exact>,
    },
    FixedLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub beta: Exact,
    pub x0: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostSpec {
    /// `beta_i` and `x0` drawn uniformly from `values`.
    Random {
        values: Vec<Exact>,
        /// One `x0` for every node (default) or an independent draw per node.
        shared_x0: bool,
    },
    Explicit {
        costs: Vec<CostEntry>,
    },
}

/// Initial estimates are drawn uniformly from the grid `lo, lo + resolution, ..., hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitRange {
    pub lo: Exact,
    pub hi: Exact,
    pub resolution: Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_error: Option<f64>,
}

/// Baseline settings for `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub refine_factor: Exact,
    pub refine_delta0: Exact,
    pub fixed_levels: Vec<Exact>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            refine_factor: exact(10, 1),
            refine_delta0: exact(1, 10),
            fixed_levels: vec![exact(1, 10), exact(1, 100), exact(1, 1000)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nodes: usize,
    pub edge_prob: f64,
    pub seed: u64,
    /// Edge-list file to load instead of generating a random digraph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<PathBuf>,
    pub alpha: Exact,
    pub delta0: Exact,
    pub c_in: Exact,
    pub c_out: Exact,
    pub basis0: Exact,
    pub bits: u32,
    pub frame: Frame,
    pub policy: PolicySpec,
    pub x_init: InitRange,
    pub costs: CostSpec,
    pub stop: StopSpec,
    pub accounting: Accounting,
    pub round_cap: u64,
    #[serde(default)]
    pub compare: CompareSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nodes: 20,
            edge_prob: 0.2,
            seed: 0,
            graph_file: None,
            alpha: exact(3, 25),
            delta0: exact(1, 2),
            c_in: exact(4, 3),
            c_out: exact(2, 1),
            basis0: exact(0, 1),
            bits: 3,
            frame: Frame::BasisRelative,
            policy: PolicySpec::Adaptive,
            x_init: InitRange {
                lo: exact(1, 1),
                hi: exact(5, 1),
                resolution: exact(1, 100),
            },
            costs: CostSpec::Random {
                values: (1..=5).map(|v| exact(v, 1)).collect(),
                shared_x0: true,
            },
            stop: StopSpec {
                max_steps: Some(200),
                target_error: Some(1e-5),
            },
            accounting: Accounting::default(),
            round_cap: DEFAULT_ROUND_CAP,
            compare: CompareSpec::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> RunnerError {
    RunnerError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| RunnerError::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, RunnerError> {
        toml::to_string(self).map_err(|e| RunnerError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Half-width that baseline quantizers centered at zero must reach.
    pub fn coverage(&self) -> Rational {
        let (lo, hi) = (self.x_init.lo.0.abs(), self.x_init.hi.0.abs());
        if lo > hi {
            lo
        } else {
            hi
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let one = Rational::from_int(1);
        if self.nodes < 2 {
            return Err(invalid("nodes", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(invalid("edge_prob", "must lie in [0, 1]"));
        }
        if self.delta0.0 <= Rational::from_int(0) {
            return Err(invalid("delta0", "must be positive"));
        }
        if self.c_in.0 <= one {
            return Err(invalid("c_in", "must exceed 1"));
        }
        if self.c_out.0 <= one {
            return Err(invalid("c_out", "must exceed 1"));
        }
        if self.alpha.0 < Rational::from_int(0) {
            return Err(invalid("alpha", "must be non-negative"));
        }
        if self.bits == 0 || self.bits > MAX_BITS {
            return Err(invalid("bits", format!("must be in 1..={MAX_BITS}")));
        }
        if self.x_init.lo > self.x_init.hi {
            return Err(invalid("x_init", "lo must not exceed hi"));
        }
        if self.x_init.resolution.0 <= Rational::from_int(0) {
            return Err(invalid("x_init.resolution", "must be positive"));
        }
        if let PolicySpec::RefineOnly { factor, .. } = &self.policy {
            if factor.0 <= one {
                return Err(invalid("policy.factor", "must exceed 1"));
            }
        }
        match &self.costs {
            CostSpec::Random { values, .. } => {
                if values.is_empty() {
                    return Err(invalid("costs.values", "must not be empty"));
                }
                if values.iter().any(|v| v.0 <= Rational::from_int(0)) {
                    return Err(invalid("costs.values", "curvatures are drawn from this set and must be positive"));
                }
            }
            CostSpec::Explicit { costs } => {
                if costs.len() != self.nodes {
                    return Err(invalid("costs.costs", format!("expected {} entries, got {}", self.nodes, costs.len())));
                }
                if costs.iter().any(|c| c.beta.0 <= Rational::from_int(0)) {
                    return Err(invalid("costs.costs.beta", "must be positive"));
                }
            }
        }
        if self.stop.max_steps.is_none() && self.stop.target_error.is_none() {
            return Err(invalid("stop", "needs max_steps or target_error"));
        }
        if self.round_cap == 0 {
            return Err(invalid("round_cap", "must be positive"));
        }
        if self.compare.refine_factor.0 <= one {
            return Err(invalid("compare.refine_factor", "must exceed 1"));
        }
        if self.compare.refine_delta0.0 <= Rational::from_int(0)
            || self.compare.fixed_levels.iter().any(|d| d.0 <= Rational::from_int(0))
        {
            return Err(invalid("compare", "levels must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("alpha = \"3/25\""), "{text}");
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn decimals_are_read_exactly() {
        let text = RunConfig::default().to_toml().unwrap().replace("\"3/25\"", "\"0.12\"");
        assert_eq!(RunConfig::from_toml(&text).unwrap().alpha, exact(3, 25));
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.c_in = exact(1, 1);
        match cfg.validate() {
            Err(RunnerError::Config { field, .. }) => assert_eq!(field, "c_in"),
            other => panic!("{other:?}"),
        }
        let mut cfg = RunConfig::default();
        cfg.costs = CostSpec::Explicit { costs: vec![] };
        assert!(matches!(cfg.validate(), Err(RunnerError::Config { field, .. }) if field == "costs.costs"));
        let mut cfg = RunConfig::default();
        cfg.x_init.lo = exact(6, 1);
        assert!(matches!(cfg.validate(), Err(RunnerError::Config { field, .. }) if field == "x_init"));
    }

    #[test]
    fn policies_parse() {
        let base = RunConfig::default().to_toml().unwrap();
        let text = base.replace("[policy]\nkind = \"adaptive\"", "[policy]\nkind = \"refine-only\"\nfactor = \"10\"");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.policy, PolicySpec::RefineOnly { factor: exact(10, 1), coverage: None });
        assert!(RunConfig::from_toml(&base.replace("nodes = 20", "nodes = 20\nbogus = 1")).is_err());
    }
}
