//! Validated configuration for the Feedback Game.
//!
//! A [`GameConfig`] bundles the signal technology (how seller effort maps to
//! the probability of a high buyer signal), the seller model (prior on the
//! commitment type and the strategic type's per-buyer effort distributions)
//! and the economic bounds used by the payment LP. The only way to obtain a
//! `GameConfig` is through [`validate`], which rejects rather than repairs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance for a strategy vector summing to one.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A binary buyer signal (also used for reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signal {
    #[serde(rename = "l")]
    Low,
    #[serde(rename = "h")]
    High,
}

impl Signal {
    pub const ALL: [Signal; 2] = [Signal::Low, Signal::High];

    pub fn index(self) -> usize {
        match self {
            Signal::Low => 0,
            Signal::High => 1,
        }
    }

    pub fn flip(self) -> Signal {
        match self {
            Signal::Low => Signal::High,
            Signal::High => Signal::Low,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Signal::Low => 'l',
            Signal::High => 'h',
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One of the two buyers of a Feedback Game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Buyer {
    One,
    Two,
}

impl Buyer {
    pub const ALL: [Buyer; 2] = [Buyer::One, Buyer::Two];

    /// The peer whose report this buyer is scored against.
    pub fn other(self) -> Buyer {
        match self {
            Buyer::One => Buyer::Two,
            Buyer::Two => Buyer::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Buyer::One => 0,
            Buyer::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl From<Buyer> for u8 {
    fn from(b: Buyer) -> u8 {
        b.number()
    }
}

impl TryFrom<u8> for Buyer {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Buyer::One),
            2 => Ok(Buyer::Two),
            other => Err(format!("buyer must be 1 or 2, got {other}")),
        }
    }
}

impl fmt::Display for Buyer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// The seller's private type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellerType {
    /// Behaviourally committed to the highest effort level.
    Commitment,
    /// Plays the given strategic effort distributions.
    Strategic,
}

/// Machine-readable reason for a rejected configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    NonMonotoneF,
    FNotMixed,
    StrategyNotSimplex,
    BadPrior,
    NonpositiveEpsilon,
    TooFewEfforts,
    NegativeEconParam,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::NonMonotoneF => "NON_MONOTONE_F",
            ReasonCode::FNotMixed => "F_NOT_MIXED",
            ReasonCode::StrategyNotSimplex => "STRATEGY_NOT_SIMPLEX",
            ReasonCode::BadPrior => "BAD_PRIOR",
            ReasonCode::NonpositiveEpsilon => "NONPOSITIVE_EPSILON",
            ReasonCode::TooFewEfforts => "TOO_FEW_EFFORTS",
            ReasonCode::NegativeEconParam => "NEGATIVE_ECON_PARAM",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ReasonCode,
    pub detail: String,
}

/// Every invariant violated by a raw configuration, in field order.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration: {}", summary(.violations))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

fn summary(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{} ({})", v.code, v.detail))
        .collect::<Vec<_>>()
        .join("; ")
}

impl ValidationError {
    pub fn codes(&self) -> Vec<ReasonCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn has(&self, code: ReasonCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

// Raw, unvalidated configuration as it appears on disk.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSignalModel {
    pub f_high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSeller {
    pub commitment_prior: f64,
    pub strategy_buyer1: Vec<f64>,
    pub strategy_buyer2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEcon {
    pub delta_l: f64,
    pub delta_h: f64,
    pub cost_bound: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub signal_model: RawSignalModel,
    pub seller: RawSeller,
    pub econ: RawEcon,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<RawConfig, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Effort levels and the noisy signal technology `f(h | q_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    high_signal_prob: Vec<f64>,
}

impl SignalModel {
    pub fn num_efforts(&self) -> usize {
        self.high_signal_prob.len()
    }

    /// `f(h | q_m)` for every effort level, lowest effort first.
    pub fn high_signal_probs(&self) -> &[f64] {
        &self.high_signal_prob
    }

    /// `f(signal | q_effort)` with a zero-based effort index.
    pub fn prob(&self, signal: Signal, effort: usize) -> f64 {
        let h = self.high_signal_prob[effort];
        match signal {
            Signal::High => h,
            Signal::Low => 1.0 - h,
        }
    }

    pub fn top_effort(&self) -> usize {
        self.num_efforts() - 1
    }
}

/// Commitment prior plus the strategic type's per-buyer effort marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct SellerModel {
    commitment_prior: f64,
    strategies: [Vec<f64>; 2],
    is_nondegenerate: bool,
}

impl SellerModel {
    pub fn commitment_prior(&self) -> f64 {
        self.commitment_prior
    }

    pub fn strategic_prior(&self) -> f64 {
        1.0 - self.commitment_prior
    }

    pub fn type_prior(&self, ty: SellerType) -> f64 {
        match ty {
            SellerType::Commitment => self.commitment_prior(),
            SellerType::Strategic => self.strategic_prior(),
        }
    }

    /// `Pr(q̄_m^i)` for the strategic type.
    pub fn strategy(&self, buyer: Buyer) -> &[f64] {
        &self.strategies[buyer.index()]
    }

    /// Both types have positive prior and the strategic type does not
    /// always play top effort for either buyer.
    pub fn is_nondegenerate(&self) -> bool {
        self.is_nondegenerate
    }

    /// True if some buyer faces a strategic type that always plays top effort.
    pub fn strategy_is_degenerate(&self) -> bool {
        self.strategies
            .iter()
            .any(|s| s.last().copied().unwrap_or(0.0) >= 1.0)
    }

    pub fn prior_is_degenerate(&self) -> bool {
        self.commitment_prior <= 0.0 || self.commitment_prior >= 1.0
    }
}

/// Lying-benefit bounds, participation-cost bound and LP strictness margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomicParams {
    delta_l: f64,
    delta_h: f64,
    cost_bound: f64,
    epsilon: f64,
}

impl EconomicParams {
    pub fn delta_l(&self) -> f64 {
        self.delta_l
    }

    pub fn delta_h(&self) -> f64 {
        self.delta_h
    }

    /// External benefit from falsely announcing `misreport`.
    pub fn lying_benefit(&self, misreport: Signal) -> f64 {
        match misreport {
            Signal::Low => self.delta_l,
            Signal::High => self.delta_h,
        }
    }

    pub fn max_lying_benefit(&self) -> f64 {
        self.delta_l.max(self.delta_h)
    }

    pub fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// A fully validated Feedback Game configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    signal_model: SignalModel,
    seller_model: SellerModel,
    econ: EconomicParams,
}

impl GameConfig {
    pub fn signal_model(&self) -> &SignalModel {
        &self.signal_model
    }

    pub fn seller_model(&self) -> &SellerModel {
        &self.seller_model
    }

    pub fn econ(&self) -> &EconomicParams {
        &self.econ
    }

    pub fn num_efforts(&self) -> usize {
        self.signal_model.num_efforts()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.seller_model.is_nondegenerate()
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            signal_model: RawSignalModel {
                f_high: self.signal_model.high_signal_prob.clone(),
            },
            seller: RawSeller {
                commitment_prior: self.seller_model.commitment_prior,
                strategy_buyer1: self.seller_model.strategies[0].clone(),
                strategy_buyer2: self.seller_model.strategies[1].clone(),
            },
            econ: RawEcon {
                delta_l: self.econ.delta_l,
                delta_h: self.econ.delta_h,
                cost_bound: self.econ.cost_bound,
                epsilon: self.econ.epsilon,
            },
        }
    }

    /// Re-validated copy with a different commitment prior.
    pub fn with_commitment_prior(&self, prior: f64) -> Result<GameConfig, ValidationError> {
        let mut raw = self.to_raw();
        raw.seller.commitment_prior = prior;
        validate(&raw)
    }

    /// Re-validated copy with different strategic effort distributions.
    pub fn with_strategies(
        &self,
        buyer1: Vec<f64>,
        buyer2: Vec<f64>,
    ) -> Result<GameConfig, ValidationError> {
        let mut raw = self.to_raw();
        raw.seller.strategy_buyer1 = buyer1;
        raw.seller.strategy_buyer2 = buyer2;
        validate(&raw)
    }
}

/// Checks every invariant of a raw configuration and reports all violations.
pub fn validate(raw: &RawConfig) -> Result<GameConfig, ValidationError> {
    let mut violations = Vec::new();
    let mut fail = |code, detail: String| violations.push(Violation { code, detail });

    let f = &raw.signal_model.f_high;
    let m = f.len();
    if m < 2 {
        fail(
            ReasonCode::TooFewEfforts,
            format!("need at least 2 effort levels, got {m}"),
        );
    }
    for (idx, &p) in f.iter().enumerate() {
        // NaN fails this comparison too.
        if !(p > 0.0 && p < 1.0) {
            fail(
                ReasonCode::FNotMixed,
                format!("f(h|q_{}) = {p} is not strictly inside (0,1)", idx + 1),
            );
        }
    }
    for (idx, pair) in f.windows(2).enumerate() {
        // Written so that NaN also fails.
        if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Greater) {
            fail(
                ReasonCode::NonMonotoneF,
                format!(
                    "f(h|q_{}) = {} does not exceed f(h|q_{}) = {}",
                    idx + 2,
                    pair[1],
                    idx + 1,
                    pair[0]
                ),
            );
        }
    }

    let prior = raw.seller.commitment_prior;
    if !(0.0..=1.0).contains(&prior) {
        fail(
            ReasonCode::BadPrior,
            format!("commitment prior {prior} is outside [0,1]"),
        );
    }

    for (name, strategy) in [
        ("strategy_buyer1", &raw.seller.strategy_buyer1),
        ("strategy_buyer2", &raw.seller.strategy_buyer2),
    ] {
        if strategy.len() != m {
            fail(
                ReasonCode::StrategyNotSimplex,
                format!("{name} has {} entries, expected {m}", strategy.len()),
            );
            continue;
        }
        if let Some(bad) = strategy.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            fail(
                ReasonCode::StrategyNotSimplex,
                format!("{name} has invalid entry {bad}"),
            );
            continue;
        }
        let total: f64 = strategy.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            fail(
                ReasonCode::StrategyNotSimplex,
                format!("{name} sums to {total}, not 1"),
            );
        }
    }

    let econ = &raw.econ;
    for (name, value) in [
        ("delta_l", econ.delta_l),
        ("delta_h", econ.delta_h),
        ("cost_bound", econ.cost_bound),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            fail(
                ReasonCode::NegativeEconParam,
                format!("{name} = {value} must be a finite nonnegative number"),
            );
        }
    }
    if !(econ.epsilon > 0.0 && econ.epsilon.is_finite()) {
        fail(
            ReasonCode::NonpositiveEpsilon,
            format!("epsilon = {} must be strictly positive", econ.epsilon),
        );
    }

    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }

    let strategies = [
        raw.seller.strategy_buyer1.clone(),
        raw.seller.strategy_buyer2.clone(),
    ];
    let is_nondegenerate = prior > 0.0 && prior < 1.0 && strategies.iter().all(|s| s[m - 1] < 1.0);

    Ok(GameConfig {
        signal_model: SignalModel {
            high_signal_prob: f.clone(),
        },
        seller_model: SellerModel {
            commitment_prior: prior,
            strategies,
            is_nondegenerate,
        },
        econ: EconomicParams {
            delta_l: econ.delta_l,
            delta_h: econ.delta_h,
            cost_bound: econ.cost_bound,
            epsilon: econ.epsilon,
        },
    })
}

/// Effort distribution of the commitment type: all mass on the top effort.
pub fn commitment_strategy(config: &GameConfig) -> Vec<f64> {
    let m = config.num_efforts();
    let mut v = vec![0.0; m];
    v[m - 1] = 1.0;
    v
}

/// The worked two-effort example used throughout the tests and docs.
pub fn canonical_raw() -> RawConfig {
    RawConfig {
        signal_model: RawSignalModel {
            f_high: vec![0.3, 0.9],
        },
        seller: RawSeller {
            commitment_prior: 0.2,
            strategy_buyer1: vec![0.2, 0.8],
            strategy_buyer2: vec![0.2, 0.8],
        },
        econ: RawEcon {
            delta_l: 0.0,
            delta_h: 0.0,
            cost_bound: 0.0,
            epsilon: 0.01,
        },
    }
}
