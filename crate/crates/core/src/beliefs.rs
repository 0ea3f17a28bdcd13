//! Bayesian belief cascade for a designated buyer.
//!
//! Everything here is computed from the point of view of buyer `i` with peer
//! `r(i) = i.other()`, assuming the seller follows the given strategies and
//! the peer reports truthfully. Efforts for the two buyers are independent
//! given the seller's type, so the only cross-buyer information flows
//! through the type.
//!
//! Effort indices are zero-based: effort `m` here is `q_{m+1}`.

use serde::{Deserialize, Serialize};

use crate::model::{Buyer, GameConfig, SellerType, Signal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefError {
    /// Bayes' rule was asked to condition on a probability-zero event.
    #[error("degenerate belief: conditioning on {event}, which has probability {prob}")]
    DegenerateBelief { event: String, prob: f64 },
}

fn condition(
    numerator: f64,
    denominator: f64,
    event: impl FnOnce() -> String,
) -> Result<f64, BeliefError> {
    if denominator > 0.0 {
        Ok(numerator / denominator)
    } else {
        Err(BeliefError::DegenerateBelief {
            event: event(),
            prob: denominator,
        })
    }
}

/// `Pr(q_m^i | θ)` for every effort level.
pub fn effort_given_type(config: &GameConfig, buyer: Buyer, ty: SellerType) -> Vec<f64> {
    match ty {
        SellerType::Commitment => crate::model::commitment_strategy(config),
        SellerType::Strategic => config.seller_model().strategy(buyer).to_vec(),
    }
}

/// `Pr(q_m^i)`, the type-mixed effort prior for one buyer.
pub fn effort_prior(config: &GameConfig, buyer: Buyer) -> Vec<f64> {
    let seller = config.seller_model();
    let pc = seller.commitment_prior();
    let ps = seller.strategic_prior();
    let top = config.signal_model().top_effort();
    seller
        .strategy(buyer)
        .iter()
        .enumerate()
        .map(|(m, &strategic)| {
            let committed = if m == top { pc } else { 0.0 };
            committed + strategic * ps
        })
        .collect()
}

fn signal_under(config: &GameConfig, signal: Signal, efforts: &[f64]) -> f64 {
    let sm = config.signal_model();
    efforts
        .iter()
        .enumerate()
        .map(|(m, p)| sm.prob(signal, m) * p)
        .sum()
}

/// `Pr(s^i = signal)`.
pub fn signal_prior(config: &GameConfig, buyer: Buyer, signal: Signal) -> f64 {
    signal_under(config, signal, &effort_prior(config, buyer))
}

/// `Pr(s^i = signal | θ)`.
pub fn signal_given_type(config: &GameConfig, buyer: Buyer, signal: Signal, ty: SellerType) -> f64 {
    signal_under(config, signal, &effort_given_type(config, buyer, ty))
}

/// `Pr(θ_c | s^i = signal)`.
pub fn type_posterior(
    config: &GameConfig,
    buyer: Buyer,
    signal: Signal,
) -> Result<f64, BeliefError> {
    let pc = config.seller_model().commitment_prior();
    let likelihood = signal_given_type(config, buyer, signal, SellerType::Commitment);
    condition(likelihood * pc, signal_prior(config, buyer, signal), || {
        format!("s^{buyer} = {signal}")
    })
}

/// `Pr(θ_c | q_m^{peer})`: what the effort played for `peer` says about the type.
pub fn type_given_effort(
    config: &GameConfig,
    peer: Buyer,
    effort: usize,
) -> Result<f64, BeliefError> {
    let pc = config.seller_model().commitment_prior();
    let committed = effort_given_type(config, peer, SellerType::Commitment)[effort];
    let prior = effort_prior(config, peer)[effort];
    condition(committed * pc, prior, || {
        format!("q^{peer} = q_{}", effort + 1)
    })
}

/// `Pr(s^i = signal | q_m^{r(i)})`, routed through the seller's type.
pub fn cross_signal_given_effort(
    config: &GameConfig,
    buyer: Buyer,
    signal: Signal,
    effort: usize,
) -> Result<f64, BeliefError> {
    let commit = type_given_effort(config, buyer.other(), effort)?;
    let own_c = signal_given_type(config, buyer, signal, SellerType::Commitment);
    let own_s = signal_given_type(config, buyer, signal, SellerType::Strategic);
    Ok(own_c * commit + own_s * (1.0 - commit))
}

/// `Pr(q_m^{r(i)} | s^i = signal)`.
///
/// Efforts the peer never receives have posterior zero without consulting
/// the type-given-effort term, which is undefined for them.
pub fn effort_posterior(
    config: &GameConfig,
    buyer: Buyer,
    effort: usize,
    signal: Signal,
) -> Result<f64, BeliefError> {
    let peer_prior = effort_prior(config, buyer.other())[effort];
    let evidence = signal_prior(config, buyer, signal);
    if peer_prior == 0.0 {
        return condition(0.0, evidence, || format!("s^{buyer} = {signal}"));
    }
    let likelihood = cross_signal_given_effort(config, buyer, signal, effort)?;
    condition(likelihood * peer_prior, evidence, || {
        format!("s^{buyer} = {signal}")
    })
}

/// `g^i(peer_signal | own_signal) = Pr(s^{r(i)} = peer_signal | s^i = own_signal)`.
pub fn signal_posterior(
    config: &GameConfig,
    buyer: Buyer,
    peer_signal: Signal,
    own_signal: Signal,
) -> Result<f64, BeliefError> {
    let sm = config.signal_model();
    let mut total = 0.0;
    for m in 0..config.num_efforts() {
        total += sm.prob(peer_signal, m) * effort_posterior(config, buyer, m, own_signal)?;
    }
    Ok(total)
}

/// The 2×2 table `g^i(s_k | s_j)`; field `g_kj` holds `g(k | j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeerSignalPosterior {
    pub g_ll: f64,
    pub g_hl: f64,
    pub g_lh: f64,
    pub g_hh: f64,
}

impl PeerSignalPosterior {
    /// `g(peer | own)`.
    pub fn get(&self, peer: Signal, own: Signal) -> f64 {
        match (peer, own) {
            (Signal::Low, Signal::Low) => self.g_ll,
            (Signal::High, Signal::Low) => self.g_hl,
            (Signal::Low, Signal::High) => self.g_lh,
            (Signal::High, Signal::High) => self.g_hh,
        }
    }

    /// `g(h|h) - g(h|l)`; zero exactly when no peer-prediction scheme exists.
    pub fn gap(&self) -> f64 {
        self.g_hh - self.g_hl
    }
}

/// All beliefs the payment LP needs for one buyer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSet {
    pub buyer: Buyer,
    pub effort_prior: Vec<f64>,
    /// `Pr(s^i = h)`.
    pub signal_prior_high: f64,
    /// `Pr(s^i = h | θ_c)`.
    pub signal_given_commitment_high: f64,
    /// `Pr(s^i = h | θ_s)`.
    pub signal_given_strategic_high: f64,
    /// `Pr(θ_c | s^i = h)`.
    pub type_posterior_high: f64,
    /// `Pr(θ_c | s^i = l)`.
    pub type_posterior_low: f64,
    #[serde(flatten)]
    pub g: PeerSignalPosterior,
}

impl BeliefSet {
    pub fn signal_prior(&self, signal: Signal) -> f64 {
        match signal {
            Signal::High => self.signal_prior_high,
            Signal::Low => 1.0 - self.signal_prior_high,
        }
    }

    pub fn g(&self, peer: Signal, own: Signal) -> f64 {
        self.g.get(peer, own)
    }

    pub fn type_posterior(&self, signal: Signal) -> f64 {
        match signal {
            Signal::High => self.type_posterior_high,
            Signal::Low => self.type_posterior_low,
        }
    }

    pub fn g_gap(&self) -> f64 {
        self.g.gap()
    }
}

pub fn belief_set(config: &GameConfig, buyer: Buyer) -> Result<BeliefSet, BeliefError> {
    let g = |peer, own| signal_posterior(config, buyer, peer, own);
    Ok(BeliefSet {
        buyer,
        effort_prior: effort_prior(config, buyer),
        signal_prior_high: signal_prior(config, buyer, Signal::High),
        signal_given_commitment_high: signal_given_type(
            config,
            buyer,
            Signal::High,
            SellerType::Commitment,
        ),
        signal_given_strategic_high: signal_given_type(
            config,
            buyer,
            Signal::High,
            SellerType::Strategic,
        ),
        type_posterior_high: type_posterior(config, buyer, Signal::High)?,
        type_posterior_low: type_posterior(config, buyer, Signal::Low)?,
        g: PeerSignalPosterior {
            g_ll: g(Signal::Low, Signal::Low)?,
            g_hl: g(Signal::High, Signal::Low)?,
            g_lh: g(Signal::Low, Signal::High)?,
            g_hh: g(Signal::High, Signal::High)?,
        },
    })
}

/// Log likelihood ratio `ln(Pr(s^i | θ_c) / Pr(s^i | θ_s))` of one report.
///
/// Adding it to the log-odds of the commitment type is the same update as
/// Bayes' rule on `Pr(θ_c)`, but stays finite when the posterior is within
/// rounding of 0 or 1.
pub fn report_log_likelihood_ratio(config: &GameConfig, buyer: Buyer, report: Signal) -> f64 {
    let c = signal_given_type(config, buyer, report, SellerType::Commitment);
    let s = signal_given_type(config, buyer, report, SellerType::Strategic);
    c.ln() - s.ln()
}

/// Type posterior after both reports, applying the single-report update for
/// buyer 1 and then for buyer 2. Exact because reports are independent given
/// the type.
pub fn type_posterior_after_game(
    config: &GameConfig,
    reports: [Signal; 2],
) -> Result<f64, BeliefError> {
    let after_first = type_posterior(config, Buyer::One, reports[0])?;
    let mid = config
        .with_commitment_prior(after_first)
        .expect("posterior of a valid prior is a valid prior");
    type_posterior(&mid, Buyer::Two, reports[1])
}
