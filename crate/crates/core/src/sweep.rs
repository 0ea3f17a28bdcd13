//! One-parameter sweeps over a base configuration.

use serde::{Deserialize, Serialize};

use crate::model::{validate, Buyer, GameConfig, ValidationError};
use crate::payments::{check_feasibility, solve_for_buyer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "commitment_prior")]
    CommitmentPrior,
    #[serde(rename = "epsilon")]
    Epsilon,
    #[serde(rename = "delta_l")]
    DeltaL,
    #[serde(rename = "delta_h")]
    DeltaH,
    #[serde(rename = "cost_bound")]
    CostBound,
    /// Strategic probability of top effort, for both buyers.
    #[serde(rename = "strategic_qM_prob")]
    StrategicTopEffortProb,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::CommitmentPrior => "commitment_prior",
            SweepParameter::Epsilon => "epsilon",
            SweepParameter::DeltaL => "delta_l",
            SweepParameter::DeltaH => "delta_h",
            SweepParameter::CostBound => "cost_bound",
            SweepParameter::StrategicTopEffortProb => "strategic_qM_prob",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("a sweep needs at least 2 steps, got {0}")]
    TooFewSteps(usize),
    #[error("sweep bounds must be finite")]
    NonFiniteBounds,
    #[error("{parameter} = {value}: {source}")]
    Invalid {
        parameter: &'static str,
        value: f64,
        source: ValidationError,
    },
}

impl SweepSpec {
    /// Evenly spaced grid including both endpoints exactly.
    pub fn grid(&self) -> Result<Vec<f64>, SweepError> {
        if self.steps < 2 {
            return Err(SweepError::TooFewSteps(self.steps));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err(SweepError::NonFiniteBounds);
        }
        let last = self.steps - 1;
        Ok((0..self.steps)
            .map(|k| {
                if k == last {
                    self.to
                } else {
                    self.from + (self.to - self.from) * (k as f64 / last as f64)
                }
            })
            .collect())
    }
}

/// Re-validated copy of `base` with `parameter` set to `value`.
///
/// Setting the strategic top-effort probability rescales the remaining
/// effort levels proportionally; if they carried no mass, the remainder is
/// spread evenly over them.
pub fn apply(
    base: &GameConfig,
    parameter: SweepParameter,
    value: f64,
) -> Result<GameConfig, ValidationError> {
    let mut raw = base.to_raw();
    match parameter {
        SweepParameter::CommitmentPrior => raw.seller.commitment_prior = value,
        SweepParameter::Epsilon => raw.econ.epsilon = value,
        SweepParameter::DeltaL => raw.econ.delta_l = value,
        SweepParameter::DeltaH => raw.econ.delta_h = value,
        SweepParameter::CostBound => raw.econ.cost_bound = value,
        SweepParameter::StrategicTopEffortProb => {
            for s in [
                &mut raw.seller.strategy_buyer1,
                &mut raw.seller.strategy_buyer2,
            ] {
                *s = with_top_effort_prob(s, value);
            }
        }
    }
    validate(&raw)
}

fn with_top_effort_prob(strategy: &[f64], top: f64) -> Vec<f64> {
    let m = strategy.len();
    let rest: f64 = strategy[..m - 1].iter().sum();
    let mut out: Vec<f64> = if rest > 0.0 {
        strategy[..m - 1]
            .iter()
            .map(|p| p / rest * (1.0 - top))
            .collect()
    } else {
        vec![(1.0 - top) / (m - 1) as f64; m - 1]
    };
    out.push(top);
    // Absorb rounding into the largest lower entry so the vector sums to 1.
    let err = 1.0 - out.iter().sum::<f64>();
    if let Some(k) = (0..m - 1).max_by(|&a, &b| out[a].total_cmp(&out[b])) {
        out[k] += err;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub feasible: bool,
    pub budget_buyer1: Option<f64>,
    pub budget_buyer2: Option<f64>,
    /// Buyer 1's `g(h|h) - g(h|l)`.
    pub g_gap: f64,
}

pub fn run_sweep(base: &GameConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    spec.grid()?
        .into_iter()
        .map(|value| {
            let cfg = apply(base, spec.parameter, value).map_err(|source| SweepError::Invalid {
                parameter: spec.parameter.name(),
                value,
                source,
            })?;
            let g_gap = check_feasibility(&cfg, Buyer::One).g_gap;
            let budgets =
                Buyer::ALL.map(|b| solve_for_buyer(&cfg, b).ok().map(|s| s.scheme.budget));
            let feasible = budgets.iter().all(Option::is_some);
            Ok(SweepRow {
                value,
                feasible,
                budget_buyer1: budgets[0].filter(|_| feasible),
                budget_buyer2: budgets[1].filter(|_| feasible),
                g_gap,
            })
        })
        .collect()
}
