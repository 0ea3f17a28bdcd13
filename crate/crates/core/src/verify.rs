//! Truthfulness certificates.
//!
//! With the seller playing its given strategy and the peer reporting
//! truthfully, a buyer's expected payoff is linear in her reporting
//! strategy, so enumerating the four pure strategies decides whether honest
//! reporting is a strict best response.

use serde::{Deserialize, Serialize};

use crate::beliefs::{belief_set, BeliefSet};
use crate::model::{Buyer, GameConfig, Signal};
use crate::payments::{
    check_feasibility, expected_payment, FeasibilityReason, FeasibilityReport, PaymentScheme,
};

/// Numerical floor for calling a margin strictly positive.
pub const STRICTNESS_FLOOR: f64 = 1e-12;

/// What to announce after each possible signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportingStrategy {
    pub on_low: Signal,
    pub on_high: Signal,
}

impl ReportingStrategy {
    pub const HONEST: ReportingStrategy = ReportingStrategy {
        on_low: Signal::Low,
        on_high: Signal::High,
    };

    pub fn all() -> [ReportingStrategy; 4] {
        let s = |on_low, on_high| ReportingStrategy { on_low, on_high };
        [
            s(Signal::Low, Signal::Low),
            s(Signal::Low, Signal::High),
            s(Signal::High, Signal::Low),
            s(Signal::High, Signal::High),
        ]
    }

    pub fn report(&self, received: Signal) -> Signal {
        match received {
            Signal::Low => self.on_low,
            Signal::High => self.on_high,
        }
    }

    pub fn is_honest(&self) -> bool {
        *self == Self::HONEST
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyValue {
    pub strategy: ReportingStrategy,
    /// Ex-ante expected payment plus lying benefits (and consumption value).
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthfulnessCertificate {
    pub buyer: Buyer,
    pub honest_is_strict_best: bool,
    /// Per received signal `[l, h]`: honest payment minus dishonest payment
    /// minus the lying benefit of the dishonest report.
    pub honesty_margins: [f64; 2],
    pub ir_satisfied: bool,
    /// Per received signal `[l, h]`: honest payment minus the cost bound.
    pub ir_slacks: [f64; 2],
    /// Every pure reporting strategy with its ex-ante utility.
    pub strategies: Vec<StrategyValue>,
}

impl TruthfulnessCertificate {
    pub fn passes(&self) -> bool {
        self.honest_is_strict_best && self.ir_satisfied
    }

    /// Holds the certificate to the LP's `ε` standard, up to `tol`.
    pub fn meets_margin(&self, epsilon: f64, tol: f64) -> bool {
        self.honesty_margins
            .iter()
            .chain(&self.ir_slacks)
            .all(|&m| m >= epsilon - tol)
    }

    pub fn min_honesty_margin(&self) -> f64 {
        self.honesty_margins[0].min(self.honesty_margins[1])
    }
}

pub fn best_response_check(
    config: &GameConfig,
    buyer: Buyer,
    scheme: &PaymentScheme,
) -> TruthfulnessCertificate {
    best_response_check_with_valuation(config, buyer, scheme, [0.0, 0.0])
}

/// As [`best_response_check`], with the buyer also enjoying a consumption
/// value per received signal `[l, h]` that does not depend on her report.
pub fn best_response_check_with_valuation(
    config: &GameConfig,
    buyer: Buyer,
    scheme: &PaymentScheme,
    consumption_value: [f64; 2],
) -> TruthfulnessCertificate {
    let beliefs =
        belief_set(config, buyer).expect("beliefs of a validated config are well defined");
    certify(config, &beliefs, scheme, consumption_value)
}

fn certify(
    config: &GameConfig,
    beliefs: &BeliefSet,
    scheme: &PaymentScheme,
    consumption_value: [f64; 2],
) -> TruthfulnessCertificate {
    let econ = config.econ();
    // Interim utility of announcing `report` after receiving `received`.
    let interim = |report: Signal, received: Signal| {
        let benefit = if report == received {
            0.0
        } else {
            econ.lying_benefit(report)
        };
        consumption_value[received.index()]
            + expected_payment(scheme, beliefs, report, received)
            + benefit
    };

    let mut honesty_margins = [0.0; 2];
    let mut ir_slacks = [0.0; 2];
    for received in Signal::ALL {
        let honest = interim(received, received);
        let dishonest = interim(received.flip(), received);
        honesty_margins[received.index()] = honest - dishonest;
        ir_slacks[received.index()] =
            expected_payment(scheme, beliefs, received, received) - econ.cost_bound();
    }

    let strategies = ReportingStrategy::all()
        .into_iter()
        .map(|strategy| StrategyValue {
            strategy,
            utility: Signal::ALL
                .iter()
                .map(|&s| beliefs.signal_prior(s) * interim(strategy.report(s), s))
                .sum(),
        })
        .collect();

    TruthfulnessCertificate {
        buyer: beliefs.buyer,
        honest_is_strict_best: honesty_margins.iter().all(|&m| m > STRICTNESS_FLOOR),
        honesty_margins,
        ir_satisfied: ir_slacks.iter().all(|&m| m > STRICTNESS_FLOOR),
        ir_slacks,
        strategies,
    }
}

/// The seller side is not recomputed: its strategy under truthful feedback
/// is an input of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SellerCondition {
    GivenUnderTruthfulFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub certificates: [TruthfulnessCertificate; 2],
    pub feasibility: [FeasibilityReport; 2],
    pub seller_condition: SellerCondition,
    pub nondegenerate: bool,
    /// First structural reason preventing a truthful equilibrium, if any.
    pub failure: Option<FeasibilityReason>,
    pub overall_pass: bool,
}

/// Combines both buyers' certificates into the truthful-equilibrium verdict.
pub fn equilibrium_condition_report(
    config: &GameConfig,
    schemes: [&PaymentScheme; 2],
) -> EquilibriumReport {
    let certificates = Buyer::ALL.map(|b| best_response_check(config, b, schemes[b.index()]));
    let feasibility = Buyer::ALL.map(|b| check_feasibility(config, b));
    let failure = feasibility
        .iter()
        .map(|r| r.reason)
        .find(|r| *r != FeasibilityReason::Ok);
    let overall_pass =
        failure.is_none() && certificates.iter().all(TruthfulnessCertificate::passes);
    EquilibriumReport {
        certificates,
        feasibility,
        seller_condition: SellerCondition::GivenUnderTruthfulFeedback,
        nondegenerate: config.is_nondegenerate(),
        failure,
        overall_pass,
    }
}
