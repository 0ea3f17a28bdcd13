//! Minimal-budget peer-prediction payments for one buyer.
//!
//! Buyer `i` is paid `τ(own report, peer report)`. The payment LP asks that,
//! given the peer reports truthfully, honest reporting beats the other report
//! by more than the external lying benefit, that participation beats the cost
//! bound after either signal, and that payments are nonnegative; among such
//! schemes it minimizes the ex-ante expected payment.
//!
//! LP variables are ordered `τ(l,l), τ(l,h), τ(h,l), τ(h,h)`.

use serde::{Deserialize, Serialize};

use crate::beliefs::{belief_set, BeliefSet};
use crate::lp::{self, LpError, Row};
use crate::model::{Buyer, EconomicParams, GameConfig, Signal};

/// Minimal |g(h|h) - g(h|l)| for which a scheme is reported as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Per-row tolerance used by the vertex-enumeration oracle.
pub const VERTEX_FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// `τ[own][peer]`, indexed by [`Signal::index`].
pub type Tau = [[f64; 2]; 2];

fn var(own: Signal, peer: Signal) -> usize {
    2 * own.index() + peer.index()
}

fn tau_from_vars(x: &[f64]) -> Tau {
    [[x[0], x[1]], [x[2], x[3]]]
}

fn vars_from_tau(tau: &Tau) -> [f64; 4] {
    [tau[0][0], tau[0][1], tau[1][0], tau[1][1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentScheme {
    pub buyer: Buyer,
    pub tau: Tau,
    /// Ex-ante expected payment under truthful play.
    pub budget: f64,
}

impl PaymentScheme {
    /// Scheme for `tau` with its budget evaluated under `beliefs`.
    pub fn from_tau(tau: Tau, beliefs: &BeliefSet) -> PaymentScheme {
        let budget = Signal::ALL
            .iter()
            .map(|&own| beliefs.signal_prior(own) * expected_payment_tau(&tau, beliefs, own, own))
            .sum();
        PaymentScheme {
            buyer: beliefs.buyer,
            tau,
            budget,
        }
    }

    pub fn pay(&self, own_report: Signal, peer_report: Signal) -> f64 {
        self.tau[own_report.index()][peer_report.index()]
    }

    /// `γ·τ + shift`, re-budgeted under `beliefs`.
    pub fn affine(&self, gamma: f64, shift: f64, beliefs: &BeliefSet) -> PaymentScheme {
        let tau = self.tau.map(|row| row.map(|v| gamma * v + shift));
        PaymentScheme::from_tau(tau, beliefs)
    }
}

fn expected_payment_tau(tau: &Tau, beliefs: &BeliefSet, report: Signal, received: Signal) -> f64 {
    Signal::ALL
        .iter()
        .map(|&peer| beliefs.g(peer, received) * tau[report.index()][peer.index()])
        .sum()
}

/// Expected payment for announcing `report` after receiving `received`,
/// when the peer reports truthfully.
pub fn expected_payment(
    scheme: &PaymentScheme,
    beliefs: &BeliefSet,
    report: Signal,
    received: Signal,
) -> f64 {
    debug_assert_eq!(scheme.buyer, beliefs.buyer);
    expected_payment_tau(&scheme.tau, beliefs, report, received)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeasibilityReason {
    Ok,
    PriorDegenerate,
    StrategyDegenerate,
    GGapBelowTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub buyer: Buyer,
    pub feasible: bool,
    /// `g(h|h) - g(h|l)`.
    pub g_gap: f64,
    pub reason: FeasibilityReason,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PaymentError {
    #[error("no truthful payment scheme exists{}", match .report {
        Some(r) => format!(" for buyer {} ({:?}, g gap {:e})", r.buyer, r.reason, r.g_gap),
        None => String::new(),
    })]
    Infeasible { report: Option<FeasibilityReport> },
    #[error(transparent)]
    Solver(LpError),
}

impl From<LpError> for PaymentError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Infeasible => PaymentError::Infeasible { report: None },
            other => PaymentError::Solver(other),
        }
    }
}

// Valid configs have fully mixed signals, so every conditioning event in
// the belief cascade has positive probability.
fn beliefs(config: &GameConfig, buyer: Buyer) -> BeliefSet {
    belief_set(config, buyer).expect("beliefs of a validated config are well defined")
}

pub fn check_feasibility(config: &GameConfig, buyer: Buyer) -> FeasibilityReport {
    feasibility_from(config, &beliefs(config, buyer))
}

fn feasibility_from(config: &GameConfig, beliefs: &BeliefSet) -> FeasibilityReport {
    let seller = config.seller_model();
    let g_gap = beliefs.g_gap();
    let reason = if seller.prior_is_degenerate() {
        FeasibilityReason::PriorDegenerate
    } else if seller.strategy_is_degenerate() {
        FeasibilityReason::StrategyDegenerate
    } else if g_gap.abs() < FEASIBILITY_TOLERANCE {
        FeasibilityReason::GGapBelowTolerance
    } else {
        FeasibilityReason::Ok
    };
    FeasibilityReport {
        buyer: beliefs.buyer,
        feasible: reason == FeasibilityReason::Ok,
        g_gap,
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Truth beats announcing `misreport` after receiving `received`.
    Honesty {
        received: Signal,
        misreport: Signal,
    },
    /// Interim participation after receiving `received`.
    Participation {
        received: Signal,
    },
    NonNegative {
        own: Signal,
        peer: Signal,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub kind: ConstraintKind,
    pub row: Row,
}

/// The payment LP for one buyer: `min objective·τ` s.t. every row `≥`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    pub buyer: Buyer,
    pub objective: [f64; 4],
    pub constraints: Vec<LpConstraint>,
    beliefs: BeliefSet,
}

impl LpInstance {
    pub fn beliefs(&self) -> &BeliefSet {
        &self.beliefs
    }

    pub fn constraint(&self, kind: ConstraintKind) -> Option<&LpConstraint> {
        self.constraints.iter().find(|c| c.kind == kind)
    }

    /// `lhs - rhs` for every constraint at `tau`.
    pub fn slacks(&self, tau: &Tau) -> Vec<(ConstraintKind, f64)> {
        let x = vars_from_tau(tau);
        self.constraints
            .iter()
            .map(|c| (c.kind, c.row.slack(&x)))
            .collect()
    }

    pub fn is_satisfied_by(&self, tau: &Tau, tol: f64) -> bool {
        let x = vars_from_tau(tau);
        self.constraints
            .iter()
            .all(|c| c.row.slack(&x) >= -c.row.tolerance(&x, tol))
    }

    /// Constraints holding with equality (up to `tol`, scaled) at `tau`.
    pub fn binding_constraints(&self, tau: &Tau, tol: f64) -> Vec<ConstraintKind> {
        let x = vars_from_tau(tau);
        self.constraints
            .iter()
            .filter(|c| c.row.slack(&x).abs() <= c.row.tolerance(&x, tol))
            .map(|c| c.kind)
            .collect()
    }

    fn rows(&self) -> Vec<Row> {
        self.constraints.iter().map(|c| c.row.clone()).collect()
    }
}

pub fn build_lp(config: &GameConfig, buyer: Buyer) -> LpInstance {
    build_lp_from(beliefs(config, buyer), config.econ())
}

pub fn build_lp_from(beliefs: BeliefSet, econ: &EconomicParams) -> LpInstance {
    let eps = econ.epsilon();
    let mut constraints = Vec::with_capacity(8);

    for received in Signal::ALL {
        let misreport = received.flip();
        let mut coeffs = vec![0.0; 4];
        for peer in Signal::ALL {
            let g = beliefs.g(peer, received);
            coeffs[var(received, peer)] += g;
            coeffs[var(misreport, peer)] -= g;
        }
        constraints.push(LpConstraint {
            kind: ConstraintKind::Honesty {
                received,
                misreport,
            },
            row: Row::new(coeffs, econ.lying_benefit(misreport) + eps),
        });
    }
    for received in Signal::ALL {
        let mut coeffs = vec![0.0; 4];
        for peer in Signal::ALL {
            coeffs[var(received, peer)] = beliefs.g(peer, received);
        }
        constraints.push(LpConstraint {
            kind: ConstraintKind::Participation { received },
            row: Row::new(coeffs, econ.cost_bound() + eps),
        });
    }
    for own in Signal::ALL {
        for peer in Signal::ALL {
            let mut coeffs = vec![0.0; 4];
            coeffs[var(own, peer)] = 1.0;
            constraints.push(LpConstraint {
                kind: ConstraintKind::NonNegative { own, peer },
                row: Row::new(coeffs, 0.0),
            });
        }
    }

    let mut objective = [0.0; 4];
    for own in Signal::ALL {
        for peer in Signal::ALL {
            objective[var(own, peer)] = beliefs.signal_prior(own) * beliefs.g(peer, own);
        }
    }

    LpInstance {
        buyer: beliefs.buyer,
        objective,
        constraints,
        beliefs,
    }
}

/// Budget-minimizing scheme via the simplex method.
pub fn solve_lp(lp: &LpInstance) -> Result<PaymentScheme, PaymentError> {
    let sol = lp::simplex_minimize(&lp.objective, &lp.rows())?;
    Ok(PaymentScheme::from_tau(tau_from_vars(&sol.x), &lp.beliefs))
}

/// Budget-minimizing scheme by exhaustive enumeration of the 70 candidate
/// vertices; independent of [`solve_lp`].
pub fn vertex_enumeration_oracle(lp: &LpInstance) -> Result<PaymentScheme, PaymentError> {
    let sol =
        lp::vertex_enumeration_minimize(&lp.objective, &lp.rows(), VERTEX_FEASIBILITY_TOLERANCE)?;
    Ok(PaymentScheme::from_tau(tau_from_vars(&sol.x), &lp.beliefs))
}

/// An optimal scheme together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedScheme {
    pub scheme: PaymentScheme,
    pub feasibility: FeasibilityReport,
    pub binding: Vec<ConstraintKind>,
}

/// Checks feasibility, then solves the buyer's LP.
///
/// Instances whose g gap is below [`FEASIBILITY_TOLERANCE`] are reported as
/// infeasible rather than solved with enormous payments.
pub fn solve_for_buyer(config: &GameConfig, buyer: Buyer) -> Result<SolvedScheme, PaymentError> {
    let beliefs = beliefs(config, buyer);
    let feasibility = feasibility_from(config, &beliefs);
    if !feasibility.feasible {
        return Err(PaymentError::Infeasible {
            report: Some(feasibility),
        });
    }
    let lp = build_lp_from(beliefs, config.econ());
    let scheme = solve_lp(&lp).map_err(|e| match e {
        PaymentError::Infeasible { .. } => PaymentError::Infeasible {
            report: Some(feasibility),
        },
        other => other,
    })?;
    let binding = lp.binding_constraints(&scheme.tau, 1e-9);
    Ok(SolvedScheme {
        scheme,
        feasibility,
        binding,
    })
}

/// Both buyers' optimal schemes. With identical strategies the two are
/// computed by the same arithmetic and coincide exactly.
pub fn solve_both(config: &GameConfig) -> Result<[SolvedScheme; 2], PaymentError> {
    let first = solve_for_buyer(config, Buyer::One)?;
    let second = solve_for_buyer(config, Buyer::Two)?;
    let seller = config.seller_model();
    if seller.strategy(Buyer::One) == seller.strategy(Buyer::Two) {
        debug_assert_eq!(first.scheme.tau, second.scheme.tau);
    }
    Ok([first, second])
}

/// Feasible scheme assembled by hand: separate the two rows of `g` at their
/// midpoint, scale until the honesty margins cover the largest lying benefit
/// plus `ε`, then shift so every payment is at least `C + ε`.
pub fn constructive_scheme(
    config: &GameConfig,
    buyer: Buyer,
) -> Result<PaymentScheme, PaymentError> {
    let beliefs = beliefs(config, buyer);
    let report = feasibility_from(config, &beliefs);
    if !report.feasible {
        return Err(PaymentError::Infeasible {
            report: Some(report),
        });
    }
    let econ = config.econ();
    let g_hh = beliefs.g(Signal::High, Signal::High);
    let g_hl = beliefs.g(Signal::High, Signal::Low);
    let mid = 0.5 * (g_hh + g_hl);

    // τ1 = τ(h,h) - τ(l,h), τ2 = τ(h,l) - τ(l,l), realized with τ(l,·) = 0.
    let (tau1, tau2) = if g_hh > g_hl {
        (1.0 - mid, -mid)
    } else {
        (mid - 1.0, mid)
    };
    let base: Tau = [[0.0, 0.0], [tau2, tau1]];

    // Both honesty margins of `base` equal |g_hh - mid| = |mid - g_hl|.
    let margin = Signal::ALL
        .iter()
        .map(|&s| {
            expected_payment_tau(&base, &beliefs, s, s)
                - expected_payment_tau(&base, &beliefs, s.flip(), s)
        })
        .fold(f64::INFINITY, f64::min);
    let gamma = (econ.max_lying_benefit() + econ.epsilon()) / margin;
    let scaled = base.map(|row| row.map(|v| gamma * v));

    let most_negative = scaled.iter().flatten().copied().fold(0.0, f64::min);
    let shift = -most_negative + econ.cost_bound() + econ.epsilon();
    let tau = scaled.map(|row| row.map(|v| v + shift));
    Ok(PaymentScheme::from_tau(tau, &beliefs))
}
