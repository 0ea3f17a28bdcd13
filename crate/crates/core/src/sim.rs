//! Seeded Monte Carlo simulation of a sequence of Feedback Games.
//!
//! The seller's type is drawn once per sequence. Each game samples efforts
//! for both buyers (independently given the type), then signals, pays the
//! truthful reports, and folds both reports into the public type belief,
//! which becomes the prior of the next game.
//!
//! # Random streams
//!
//! All randomness comes from ChaCha8 seeded with `seed`: stream 0 draws the
//! seller type and stream `t` (1-based game index) drives game `t`. A game's
//! draws are, in order: effort for buyer 1, effort for buyer 2, signal for
//! buyer 1, signal for buyer 2. Replication `r` of a batch runs with seed
//! [`replication_seed`]`(seed, r)`. Traces are therefore identical across
//! platforms and independent of thread scheduling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::{belief_set, report_log_likelihood_ratio, BeliefError, BeliefSet};
use crate::model::{Buyer, GameConfig, SellerType, Signal, ValidationError};
use crate::payments::{expected_payment, solve_both, PaymentError, PaymentScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TypeMode {
    Draw,
    FixedCommitment,
    FixedStrategic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PaymentMode {
    SolveEachGame,
    FreezeFirstGame,
}

/// Maps the public commitment belief at the start of a game to the strategic
/// seller's effort distributions for buyer 1 and buyer 2.
pub trait StrategyPolicy: Send + Sync + fmt::Debug {
    fn strategies(&self, base: &GameConfig, commitment_prior: f64) -> [Vec<f64>; 2];
}

/// Always plays the base configuration's strategies.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantPolicy;

impl StrategyPolicy for ConstantPolicy {
    fn strategies(&self, base: &GameConfig, _commitment_prior: f64) -> [Vec<f64>; 2] {
        Buyer::ALL.map(|b| base.seller_model().strategy(b).to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub base: GameConfig,
    pub num_games: usize,
    pub seed: u64,
    pub type_mode: TypeMode,
    pub strategy_policy: Arc<dyn StrategyPolicy>,
    pub payment_mode: PaymentMode,
}

impl SimConfig {
    pub fn new(base: GameConfig, num_games: usize, seed: u64) -> SimConfig {
        SimConfig {
            base,
            num_games,
            seed,
            type_mode: TypeMode::Draw,
            strategy_policy: Arc::new(ConstantPolicy),
            payment_mode: PaymentMode::SolveEachGame,
        }
    }

    pub fn with_type_mode(mut self, mode: TypeMode) -> SimConfig {
        self.type_mode = mode;
        self
    }

    pub fn with_payment_mode(mut self, mode: PaymentMode) -> SimConfig {
        self.payment_mode = mode;
        self
    }

    pub fn with_policy(mut self, policy: Arc<dyn StrategyPolicy>) -> SimConfig {
        self.strategy_policy = policy;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SimConfig {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("number of games must be at least 1")]
    NoGames,
    #[error("strategy policy produced an invalid configuration in game {game}: {source}")]
    Policy {
        game: usize,
        source: ValidationError,
    },
    #[error("game {game}: {source}")]
    Payment { game: usize, source: PaymentError },
    #[error("game {game}: {source}")]
    Belief { game: usize, source: BeliefError },
}

/// Public belief about the seller's type, held as log-odds of commitment so
/// that neither type probability rounds to zero over long horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeBelief {
    pub log_odds: f64,
    commitment: f64,
}

impl TypeBelief {
    pub fn from_prior(commitment: f64) -> TypeBelief {
        TypeBelief {
            log_odds: commitment.ln() - (1.0 - commitment).ln(),
            commitment,
        }
    }

    pub fn from_log_odds(log_odds: f64) -> TypeBelief {
        TypeBelief {
            log_odds,
            commitment: logistic(log_odds),
        }
    }

    pub fn commitment(&self) -> f64 {
        self.commitment
    }

    /// `Pr(θ_s)`, computed without cancellation.
    pub fn strategic(&self) -> f64 {
        if self.log_odds.is_finite() {
            logistic(-self.log_odds)
        } else {
            1.0 - self.commitment
        }
    }

    /// Both types keep positive probability.
    pub fn is_interior(&self) -> bool {
        self.log_odds.is_finite()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    /// 1-based game index.
    pub game: usize,
    /// `Pr(θ_c)` at game start.
    pub prior: f64,
    pub prior_log_odds: f64,
    /// The game's configuration is degenerate (no truthful scheme exists).
    pub degenerate: bool,
    /// 1-based effort levels played for buyer 1 and buyer 2.
    pub efforts: [usize; 2],
    pub signals: [Signal; 2],
    pub reports: [Signal; 2],
    pub payments: [f64; 2],
    /// Sum of both buyers' ex-ante expected payments under the game's beliefs.
    pub budget: f64,
    /// Honesty margin of each buyer at the signal she actually received.
    pub honesty_margins: [f64; 2],
    /// `Pr(θ_c)` after both reports; the next game's prior.
    pub posterior: f64,
    /// `Pr(θ_s)` after both reports.
    pub posterior_strategic: f64,
    pub posterior_log_odds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub seed: u64,
    pub type_mode: TypeMode,
    pub payment_mode: PaymentMode,
    pub seller_type: SellerType,
    pub initial_prior: f64,
    pub records: Vec<GameRecord>,
    /// Sum of every payment disbursed, accumulated in game order.
    pub cumulative_payments: f64,
}

/// Everything [`run_game`] needs besides the random stream.
#[derive(Debug, Clone, Copy)]
pub struct GameState<'a> {
    pub base: &'a GameConfig,
    pub policy: &'a dyn StrategyPolicy,
    pub seller_type: SellerType,
    pub belief: TypeBelief,
    /// Schemes to reuse instead of solving the game's own LPs.
    pub frozen: Option<&'a [PaymentScheme; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub record: GameRecord,
    pub schemes: [PaymentScheme; 2],
    pub next: TypeBelief,
}

pub fn game_rng(seed: u64, game: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(game as u64);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` in a batch started from `seed`.
pub fn replication_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left u above the accumulated mass; take the last supported index.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

fn game_config(state: &GameState, game: usize) -> Result<GameConfig, SimError> {
    let prior = state.belief.commitment();
    let [s1, s2] = state.policy.strategies(state.base, prior);
    state
        .base
        .with_commitment_prior(prior)
        .and_then(|c| c.with_strategies(s1, s2))
        .map_err(|source| SimError::Policy { game, source })
}

/// Plays one Feedback Game with truthful reports.
pub fn run_game<R: Rng + ?Sized>(
    state: &GameState,
    game: usize,
    rng: &mut R,
) -> Result<GameOutcome, SimError> {
    let config = game_config(state, game)?;
    let schemes = match state.frozen {
        Some(s) => s.clone(),
        None => solve_both(&config)
            .map(|solved| solved.map(|s| s.scheme))
            .map_err(|source| SimError::Payment { game, source })?,
    };
    let beliefs: [BeliefSet; 2] = [
        belief_set(&config, Buyer::One).map_err(|source| SimError::Belief { game, source })?,
        belief_set(&config, Buyer::Two).map_err(|source| SimError::Belief { game, source })?,
    ];

    let sm = config.signal_model();
    let efforts = Buyer::ALL.map(|b| match state.seller_type {
        SellerType::Commitment => sm.top_effort(),
        SellerType::Strategic => sample_index(rng, config.seller_model().strategy(b)),
    });
    let signals = efforts.map(|m| {
        if rng.random::<f64>() < sm.prob(Signal::High, m) {
            Signal::High
        } else {
            Signal::Low
        }
    });
    let reports = signals;

    let payments =
        Buyer::ALL.map(|b| schemes[b.index()].pay(reports[b.index()], reports[b.other().index()]));
    let budget = Buyer::ALL
        .iter()
        .map(|&b| PaymentScheme::from_tau(schemes[b.index()].tau, &beliefs[b.index()]).budget)
        .sum();
    let econ = config.econ();
    let honesty_margins = Buyer::ALL.map(|b| {
        let (scheme, bel, s) = (&schemes[b.index()], &beliefs[b.index()], signals[b.index()]);
        expected_payment(scheme, bel, s, s)
            - expected_payment(scheme, bel, s.flip(), s)
            - econ.lying_benefit(s.flip())
    });

    let next = TypeBelief::from_log_odds(
        state.belief.log_odds
            + report_log_likelihood_ratio(&config, Buyer::One, reports[0])
            + report_log_likelihood_ratio(&config, Buyer::Two, reports[1]),
    );

    let record = GameRecord {
        game,
        prior: state.belief.commitment(),
        prior_log_odds: state.belief.log_odds,
        degenerate: !config.is_nondegenerate(),
        efforts: efforts.map(|m| m + 1),
        signals,
        reports,
        payments,
        budget,
        honesty_margins,
        posterior: next.commitment(),
        posterior_strategic: next.strategic(),
        posterior_log_odds: next.log_odds,
    };
    Ok(GameOutcome {
        record,
        schemes,
        next,
    })
}

pub fn run_sequence(config: &SimConfig) -> Result<SimTrace, SimError> {
    if config.num_games == 0 {
        return Err(SimError::NoGames);
    }
    let initial_prior = config.base.seller_model().commitment_prior();
    let seller_type = match config.type_mode {
        TypeMode::FixedCommitment => SellerType::Commitment,
        TypeMode::FixedStrategic => SellerType::Strategic,
        TypeMode::Draw => {
            let u: f64 = game_rng(config.seed, 0).random();
            if u < initial_prior {
                SellerType::Commitment
            } else {
                SellerType::Strategic
            }
        }
    };

    let mut belief = TypeBelief::from_prior(initial_prior);
    let mut frozen: Option<[PaymentScheme; 2]> = None;
    let mut records = Vec::with_capacity(config.num_games);
    let mut cumulative_payments = 0.0;
    for game in 1..=config.num_games {
        let state = GameState {
            base: &config.base,
            policy: config.strategy_policy.as_ref(),
            seller_type,
            belief,
            frozen: frozen.as_ref(),
        };
        let outcome = run_game(&state, game, &mut game_rng(config.seed, game))?;
        if config.payment_mode == PaymentMode::FreezeFirstGame && frozen.is_none() {
            frozen = Some(outcome.schemes);
        }
        for p in outcome.record.payments {
            cumulative_payments += p;
        }
        belief = outcome.next;
        records.push(outcome.record);
    }

    Ok(SimTrace {
        seed: config.seed,
        type_mode: config.type_mode,
        payment_mode: config.payment_mode,
        seller_type,
        initial_prior,
        records,
        cumulative_payments,
    })
}

/// Independent replications, in replication order.
pub fn run_replications(
    config: &SimConfig,
    replications: usize,
) -> Result<Vec<SimTrace>, SimError> {
    (0..replications)
        .into_par_iter()
        .map(|r| {
            run_sequence(
                &config
                    .clone()
                    .with_seed(replication_seed(config.seed, r as u64)),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
}

/// Joint frequencies of `(s¹, s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairFrequencies {
    pub ll: f64,
    pub lh: f64,
    pub hl: f64,
    pub hh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub games: usize,
    pub seller_type: SellerType,
    pub total_payments: f64,
    pub mean_payments_per_game: f64,
    pub total_budget: f64,
    pub mean_budget_per_game: f64,
    pub final_posterior: f64,
    pub posterior_quantiles: Vec<Quantile>,
    pub high_signal_rate: [f64; 2],
    pub high_signal_rate_overall: f64,
    pub signal_pairs: PairFrequencies,
    pub mean_honesty_margin: [f64; 2],
    pub min_honesty_margin: f64,
    pub degenerate_games: usize,
}

pub const SUMMARY_QUANTILES: [f64; 7] = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0];

// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aggregate statistics of a trace. Panics on an empty trace, which
/// [`run_sequence`] never produces.
pub fn summarize(trace: &SimTrace) -> SimSummary {
    let recs = &trace.records;
    assert!(!recs.is_empty(), "cannot summarize an empty trace");
    let n = recs.len() as f64;

    let total_budget: f64 = recs.iter().map(|r| r.budget).sum();
    let mut posteriors: Vec<f64> = recs.iter().map(|r| r.posterior).collect();
    posteriors.sort_by(f64::total_cmp);

    let highs = |k: usize| recs.iter().filter(|r| r.signals[k] == Signal::High).count() as f64;
    let mut pairs = PairFrequencies::default();
    for r in recs {
        let slot = match (r.signals[0], r.signals[1]) {
            (Signal::Low, Signal::Low) => &mut pairs.ll,
            (Signal::Low, Signal::High) => &mut pairs.lh,
            (Signal::High, Signal::Low) => &mut pairs.hl,
            (Signal::High, Signal::High) => &mut pairs.hh,
        };
        *slot += 1.0;
    }
    for v in [&mut pairs.ll, &mut pairs.lh, &mut pairs.hl, &mut pairs.hh] {
        *v /= n;
    }

    let mean_margin = |k: usize| recs.iter().map(|r| r.honesty_margins[k]).sum::<f64>() / n;

    SimSummary {
        games: recs.len(),
        seller_type: trace.seller_type,
        total_payments: trace.cumulative_payments,
        mean_payments_per_game: trace.cumulative_payments / n,
        total_budget,
        mean_budget_per_game: total_budget / n,
        final_posterior: recs
            .last()
            .map(|r| r.posterior)
            .unwrap_or(trace.initial_prior),
        posterior_quantiles: SUMMARY_QUANTILES
            .iter()
            .map(|&q| Quantile {
                q,
                value: quantile(&posteriors, q),
            })
            .collect(),
        high_signal_rate: [highs(0) / n, highs(1) / n],
        high_signal_rate_overall: (highs(0) + highs(1)) / (2.0 * n),
        signal_pairs: pairs,
        mean_honesty_margin: [mean_margin(0), mean_margin(1)],
        min_honesty_margin: recs
            .iter()
            .flat_map(|r| r.honesty_margins)
            .fold(f64::INFINITY, f64::min),
        degenerate_games: recs.iter().filter(|r| r.degenerate).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::type_posterior_after_game;
    use crate::model::{canonical_raw, validate};
    use approx::assert_abs_diff_eq;

    fn canonical() -> GameConfig {
        validate(&canonical_raw()).unwrap()
    }

    #[test]
    fn commitment_seller_always_plays_top_effort() {
        let cfg = SimConfig::new(canonical(), 200, 7).with_type_mode(TypeMode::FixedCommitment);
        let trace = run_sequence(&cfg).unwrap();
        assert_eq!(trace.seller_type, SellerType::Commitment);
        assert!(trace.records.iter().all(|r| r.efforts == [2, 2]));
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = SimConfig::new(canonical(), 50, 42);
        let a = serde_json::to_string(&run_sequence(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sequence(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&run_sequence(&cfg.clone().with_seed(43)).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_games_rejected() {
        let cfg = SimConfig::new(canonical(), 0, 1);
        assert_eq!(run_sequence(&cfg), Err(SimError::NoGames));
    }

    #[test]
    fn posterior_chain_follows_sequential_bayes() {
        let base = canonical();
        let cfg = SimConfig::new(base.clone(), 30, 3).with_type_mode(TypeMode::FixedStrategic);
        let trace = run_sequence(&cfg).unwrap();
        for pair in trace.records.windows(2) {
            assert_eq!(pair[1].prior, pair[0].posterior);
        }
        for r in &trace.records {
            let game_cfg = base.with_commitment_prior(r.prior).unwrap();
            let expected = type_posterior_after_game(&game_cfg, r.reports).unwrap();
            assert!((r.posterior - expected).abs() <= 1e-12 * expected.max(1e-300).max(1.0));
            assert!(r.posterior > 0.0 && r.posterior < 1.0);
        }
    }

    #[test]
    fn conservation_of_payments() {
        let cfg = SimConfig::new(canonical(), 100, 11);
        let trace = run_sequence(&cfg).unwrap();
        let mut total = 0.0;
        for r in &trace.records {
            for p in r.payments {
                total += p;
            }
        }
        assert_eq!(total, trace.cumulative_payments);
    }

    #[test]
    fn infeasible_game_is_an_error_when_solving_each_game() {
        let base = canonical().with_commitment_prior(0.0).unwrap();
        let err = run_sequence(&SimConfig::new(base, 3, 1)).unwrap_err();
        assert!(matches!(err, SimError::Payment { game: 1, .. }));
    }

    #[test]
    fn single_game_summary_equals_the_game() {
        let trace = run_sequence(&SimConfig::new(canonical(), 1, 5)).unwrap();
        let s = summarize(&trace);
        let r = &trace.records[0];
        assert_eq!(s.games, 1);
        assert_eq!(s.total_payments, r.payments[0] + r.payments[1]);
        assert_eq!(s.total_budget, r.budget);
        assert_eq!(s.final_posterior, r.posterior);
        assert!(s.posterior_quantiles.iter().all(|q| q.value == r.posterior));
    }

    #[test]
    fn hundred_game_trace_has_hundred_records() {
        let trace = run_sequence(&SimConfig::new(canonical(), 100, 9)).unwrap();
        assert_eq!(trace.records.len(), 100);
        assert_eq!(summarize(&trace).games, 100);
    }

    #[test]
    fn frozen_schemes_are_reused() {
        let cfg =
            SimConfig::new(canonical(), 20, 2).with_payment_mode(PaymentMode::FreezeFirstGame);
        let trace = run_sequence(&cfg).unwrap();
        let first = solve_both(&canonical()).unwrap();
        for r in &trace.records {
            for b in Buyer::ALL {
                let k = b.index();
                assert_eq!(
                    r.payments[k],
                    first[k]
                        .scheme
                        .pay(r.reports[k], r.reports[b.other().index()])
                );
            }
        }
    }

    #[derive(Debug)]
    struct ShirkWhenTrusted;

    impl StrategyPolicy for ShirkWhenTrusted {
        fn strategies(&self, _base: &GameConfig, prior: f64) -> [Vec<f64>; 2] {
            let top = if prior > 0.2 { 0.5 } else { 0.8 };
            [vec![1.0 - top, top], vec![1.0 - top, top]]
        }
    }

    #[test]
    fn policy_drives_strategies() {
        let cfg = SimConfig::new(canonical(), 40, 8)
            .with_type_mode(TypeMode::FixedCommitment)
            .with_policy(Arc::new(ShirkWhenTrusted));
        let trace = run_sequence(&cfg).unwrap();
        // Under the commitment type the belief rises, flipping the policy.
        assert!(trace.records.iter().any(|r| r.prior > 0.2));
        for r in &trace.records {
            let strat = ShirkWhenTrusted.strategies(&cfg.base, r.prior);
            let game_cfg = cfg
                .base
                .with_commitment_prior(r.prior)
                .unwrap()
                .with_strategies(strat[0].clone(), strat[1].clone())
                .unwrap();
            let expected = type_posterior_after_game(&game_cfg, r.reports).unwrap();
            assert_abs_diff_eq!(r.posterior, expected, epsilon = 1e-12);
        }
    }

    #[derive(Debug)]
    struct Broken;

    impl StrategyPolicy for Broken {
        fn strategies(&self, _base: &GameConfig, _prior: f64) -> [Vec<f64>; 2] {
            [vec![0.5, 0.6], vec![0.5, 0.5]]
        }
    }

    #[test]
    fn invalid_policy_output_is_reported() {
        let cfg = SimConfig::new(canonical(), 2, 1).with_policy(Arc::new(Broken));
        assert!(matches!(
            run_sequence(&cfg),
            Err(SimError::Policy { game: 1, .. })
        ));
    }

    #[test]
    fn type_belief_keeps_both_types_positive() {
        let b = TypeBelief::from_log_odds(60.0);
        assert_eq!(b.commitment(), 1.0);
        assert!(b.strategic() > 0.0);
        assert!(b.is_interior());
        assert!(!TypeBelief::from_prior(0.0).is_interior());
        assert_eq!(TypeBelief::from_prior(0.2).commitment(), 0.2);
    }

    #[test]
    fn replication_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|r| replication_seed(42, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 1.5);
        assert_eq!(quantile(&v, 1.0), 3.0);
        assert_eq!(quantile(&v, 0.0), 0.0);
    }
}
