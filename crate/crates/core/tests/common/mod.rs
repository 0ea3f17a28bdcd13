//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here deliberately avoid the library's belief and LP code:
//! beliefs come from enumerating the full joint distribution of
//! (type, efforts, signals), and the LP optimum from a separate vertex
//! enumeration over the 4-variable payment program.

#![allow(dead_code)]

use rand::Rng;
use sanction_feedback::model::{RawConfig, RawEcon, RawSeller, RawSignalModel};

pub const CANONICAL_JSON: &str = r#"{
  "signal_model": { "f_high": [0.3, 0.9] },
  "seller": { "commitment_prior": 0.2, "strategy_buyer1": [0.2, 0.8], "strategy_buyer2": [0.2, 0.8] },
  "econ": { "delta_l": 0.0, "delta_h": 0.0, "cost_bound": 0.0, "epsilon": 0.01 }
}"#;

pub fn canonical() -> RawConfig {
    RawConfig::from_json(CANONICAL_JSON).unwrap()
}

/// Strategy over `m` efforts with `top` mass on the highest one and random
/// weights on the rest.
pub fn random_strategy<R: Rng>(rng: &mut R, m: usize, top: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut s: Vec<f64> = w.iter().map(|x| x / total * (1.0 - top)).collect();
    s.push(top);
    let err = 1.0 - s.iter().sum::<f64>();
    s[0] += err;
    s
}

/// Strictly increasing `f(h|q)` in (0.05, 0.95) with spacing at least 0.01.
pub fn random_signal_model<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let mut f: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.95)).collect();
        f.sort_by(f64::total_cmp);
        if f.windows(2).all(|w| w[1] - w[0] >= 0.01) {
            return f;
        }
    }
}

/// A random valid, nondegenerate configuration.
pub fn random_config<R: Rng>(rng: &mut R) -> RawConfig {
    let m = rng.random_range(2..=5);
    let top1 = rng.random_range(0.0..=0.99);
    let top2 = rng.random_range(0.0..=0.99);
    RawConfig {
        signal_model: RawSignalModel {
            f_high: random_signal_model(rng, m),
        },
        seller: RawSeller {
            commitment_prior: rng.random_range(0.01..0.99),
            strategy_buyer1: random_strategy(rng, m, top1),
            strategy_buyer2: random_strategy(rng, m, top2),
        },
        econ: RawEcon {
            delta_l: rng.random_range(0.0..0.5),
            delta_h: rng.random_range(0.0..0.5),
            cost_bound: rng.random_range(0.0..0.5),
            epsilon: rng.random_range(0.001..0.1),
        },
    }
}

/// Beliefs of one buyer from the brute-force joint distribution.
#[derive(Debug, Clone, Copy)]
pub struct JointBeliefs {
    /// `Pr(s^i = h)`.
    pub signal_high: f64,
    /// `Pr(s^i = h | commitment)` and `Pr(s^i = h | strategic)`.
    pub signal_high_given_type: [f64; 2],
    /// `Pr(commitment | s^i = l)`, `Pr(commitment | s^i = h)`.
    pub type_posterior: [f64; 2],
    /// `g[own][peer] = Pr(s^{peer buyer} = peer | s^i = own)`, 0 = l, 1 = h.
    pub g: [[f64; 2]; 2],
    /// `Pr(s^{peer buyer} = h | commitment)`, `... | strategic)`.
    pub peer_high_given_type: [f64; 2],
}

/// Enumerates every (type, q^1, q^2, s^1, s^2) outcome. `buyer` is 0 or 1.
pub fn joint_beliefs(raw: &RawConfig, buyer: usize) -> JointBeliefs {
    let f = &raw.signal_model.f_high;
    let m = f.len();
    let pc = raw.seller.commitment_prior;
    let strategies = [&raw.seller.strategy_buyer1, &raw.seller.strategy_buyer2];
    let point_mass: Vec<f64> = (0..m).map(|k| if k == m - 1 { 1.0 } else { 0.0 }).collect();

    // p[type][own signal][peer signal]
    let mut p = [[[0.0f64; 2]; 2]; 2];
    for (ty, type_prob) in [(0usize, pc), (1usize, 1.0 - pc)] {
        let effort = |b: usize| if ty == 0 { &point_mass } else { strategies[b] };
        for q1 in 0..m {
            for q2 in 0..m {
                let pq = effort(0)[q1] * effort(1)[q2];
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        let ps = |q: usize, s: usize| if s == 1 { f[q] } else { 1.0 - f[q] };
                        let w = type_prob * pq * ps(q1, s1) * ps(q2, s2);
                        let (own, peer) = if buyer == 0 { (s1, s2) } else { (s2, s1) };
                        p[ty][own][peer] += w;
                    }
                }
            }
        }
    }

    let marg_own = |own: usize| p[0][own][0] + p[0][own][1] + p[1][own][0] + p[1][own][1];
    let type_mass = |ty: usize| p[ty][0][0] + p[ty][0][1] + p[ty][1][0] + p[ty][1][1];
    let own_high_given = |ty: usize| (p[ty][1][0] + p[ty][1][1]) / type_mass(ty);
    let peer_high_given = |ty: usize| (p[ty][0][1] + p[ty][1][1]) / type_mass(ty);
    let mut g = [[0.0; 2]; 2];
    for own in 0..2 {
        for peer in 0..2 {
            g[own][peer] = (p[0][own][peer] + p[1][own][peer]) / marg_own(own);
        }
    }
    let post = |own: usize| (p[0][own][0] + p[0][own][1]) / marg_own(own);
    JointBeliefs {
        signal_high: marg_own(1),
        signal_high_given_type: [own_high_given(0), own_high_given(1)],
        type_posterior: [post(0), post(1)],
        g,
        peer_high_given_type: [peer_high_given(0), peer_high_given(1)],
    }
}

/// Minimum of the payment LP by vertex enumeration.
///
/// Variables are `x = [τ(l,l), τ(l,h), τ(h,l), τ(h,h)]`. Returns the optimal
/// `x` and budget, or `None` if no vertex is feasible.
pub fn oracle_lp(b: &JointBeliefs, econ: &RawEcon) -> Option<([f64; 4], f64)> {
    let pr = [1.0 - b.signal_high, b.signal_high];
    let delta = [econ.delta_l, econ.delta_h];
    let eps = econ.epsilon;
    let idx = |own: usize, peer: usize| 2 * own + peer;

    let mut rows: Vec<([f64; 4], f64)> = Vec::new();
    for j in 0..2 {
        let d = 1 - j;
        let mut a = [0.0; 4];
        for k in 0..2 {
            a[idx(j, k)] += b.g[j][k];
            a[idx(d, k)] -= b.g[j][k];
        }
        rows.push((a, delta[d] + eps));
    }
    for j in 0..2 {
        let mut a = [0.0; 4];
        for k in 0..2 {
            a[idx(j, k)] = b.g[j][k];
        }
        rows.push((a, econ.cost_bound + eps));
    }
    for v in 0..4 {
        let mut a = [0.0; 4];
        a[v] = 1.0;
        rows.push((a, 0.0));
    }
    let mut c = [0.0; 4];
    for j in 0..2 {
        for k in 0..2 {
            c[idx(j, k)] = pr[j] * b.g[j][k];
        }
    }

    let mut best: Option<([f64; 4], f64)> = None;
    let n = rows.len();
    for a in 0..n {
        for bb in a + 1..n {
            for cc in bb + 1..n {
                for dd in cc + 1..n {
                    let pick = [a, bb, cc, dd];
                    let mut mat = [[0.0; 5]; 4];
                    for (r, &i) in pick.iter().enumerate() {
                        mat[r][..4].copy_from_slice(&rows[i].0);
                        mat[r][4] = rows[i].1;
                    }
                    let Some(x) = gauss4(mat) else { continue };
                    let ok = rows.iter().all(|(row, rhs)| {
                        let lhs: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
                        lhs >= rhs - 1e-9 * (1.0 + rhs.abs())
                    });
                    if !ok {
                        continue;
                    }
                    let obj: f64 = c.iter().zip(&x).map(|(c, v)| c * v).sum();
                    if best.is_none_or(|(_, o)| obj < o) {
                        best = Some((x, obj));
                    }
                }
            }
        }
    }
    best
}

fn gauss4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        let pivot = m[col];
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let factor = row[col] / pivot[col];
                for (v, p) in row.iter_mut().zip(pivot).skip(col) {
                    *v -= factor * p;
                }
            }
        }
    }
    Some([
        m[0][4] / m[0][0],
        m[1][4] / m[1][1],
        m[2][4] / m[2][2],
        m[3][4] / m[3][3],
    ])
}
