//! Successive channel decomposition into geometric power levels.

use serde::{Deserialize, Serialize};

use crate::capacity::cap_hat_unchecked as chat;
use crate::error::{Error, Result};
use crate::scalar::{guarded_floor_ratio, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    P2P,
    ManyToOne,
    OneToMany,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Decode,
    Compute,
    Neutralize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SubChannelPlan<T> {
    pub gamma: T,
    pub topology: Topology,
    /// Sub-channel count per user, strongest first.
    pub counts: Vec<u32>,
    /// Inclusive `[1, N_i]`.
    pub uplink_access: Vec<(u32, u32)>,
    /// Inclusive `[N_1 - N_i + 1, N_1]`.
    pub downlink_access: Vec<(u32, u32)>,
    /// `p_l = gamma^l - gamma^(l-1)` for `l = 1..=N_1`.
    pub powers: Vec<T>,
}

impl<T: Scalar> SubChannelPlan<T> {
    pub fn total_power(&self) -> T {
        self.powers.iter().fold(T::one(), |a, &p| a + p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct StrategyRate<T> {
    pub strategy: Strategy,
    pub kappa: u32,
    pub kappa_prime: Option<u32>,
    pub mu: u8,
    pub rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Decomposition<T> {
    pub plan: SubChannelPlan<T>,
    pub rate: StrategyRate<T>,
    /// Lowest level at which the weaker receiver of a two-receiver
    /// one-to-many channel can decode.
    pub q: Option<u32>,
}

fn powers<T: Scalar>(gamma: T, top: T, n: u32) -> Vec<T> {
    let mut out = Vec::with_capacity(n as usize);
    let mut prev = T::one();
    for l in 1..=n {
        let cur = if l == n { top } else { gamma.powi(l as i32) };
        out.push(cur - prev);
        prev = cur;
    }
    out
}

fn plan<T: Scalar>(topology: Topology, gammas: &[T], n1: u32) -> Result<SubChannelPlan<T>> {
    if gammas.is_empty() || gammas.len() > 3 {
        return Err(Error::Validity {
            what: format!("need 1 to 3 users, got {}", gammas.len()),
        });
    }
    if n1 == 0 {
        return Err(Error::Validity { what: "N1 must be positive".into() });
    }
    if gammas.iter().any(|&g| !(g > T::one()) || !g.is_finite()) {
        return Err(Error::Validity { what: "every SNR must exceed 1".into() });
    }
    if gammas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Validity { what: "SNRs must be in descending order".into() });
    }
    let top = gammas[0];
    let gamma = top.powf(T::one() / T::lit(n1 as f64));
    let lg = gamma.ln();
    let mut counts = vec![n1];
    for &g in &gammas[1..] {
        counts.push(guarded_floor_ratio(g.ln(), lg).clamp(0, n1 as i64) as u32);
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Validity {
            what: format!("user {} gets no sub-channel at gamma={gamma}", i + 1),
        });
    }
    Ok(SubChannelPlan {
        gamma,
        topology,
        uplink_access: counts.iter().map(|&c| (1, c)).collect(),
        downlink_access: counts.iter().map(|&c| (n1 - c + 1, n1)).collect(),
        counts,
        powers: powers(gamma, top, n1),
    })
}

pub fn decompose_p2p<T: Scalar>(snr: T, n: u32) -> Result<Decomposition<T>> {
    let plan = plan(Topology::P2P, &[snr], n)?;
    let rate = strategy_rate(plan.gamma, Strategy::Decode, 1, None, 0)?;
    Ok(Decomposition { plan, rate, q: None })
}

pub fn decompose_many_to_one<T: Scalar>(gammas: &[T], n1: u32, kappa: u32) -> Result<Decomposition<T>> {
    if kappa == 0 {
        return Err(Error::Validity { what: "kappa must be positive".into() });
    }
    if let Some(&g1) = gammas.first() {
        let lim = T::lit(kappa as f64).powi(n1 as i32);
        if !(g1 > lim) {
            return Err(Error::Validity {
                what: format!("need Gamma1 > kappa^N1 = {lim}, got {g1}"),
            });
        }
    }
    let plan = plan(Topology::ManyToOne, gammas, n1)?;
    let rate = strategy_rate(plan.gamma, Strategy::Decode, kappa, None, 0)?;
    Ok(Decomposition { plan, rate, q: None })
}

pub fn decompose_one_to_many<T: Scalar>(gammas: &[T], n1: u32) -> Result<Decomposition<T>> {
    if let Some(&g1) = gammas.first() {
        let lim = T::lit(2.0).powi(n1 as i32);
        if !(g1 > lim) {
            return Err(Error::Validity {
                what: format!("need Gamma1 > 2^N1 = {lim}, got {g1}"),
            });
        }
    }
    let plan = plan(Topology::OneToMany, gammas, n1)?;
    let mu = u8::from(gammas.len() > 1);
    let rate = strategy_rate(plan.gamma, Strategy::Decode, 1, None, mu)?;
    let q = if gammas.len() > 1 {
        let sigma2 = gammas[0] / gammas[1];
        let q = if sigma2 > T::lit(2.0) {
            let x = (sigma2 - T::one()).ln() / plan.gamma.ln() + T::one();
            (x - T::lit(T::FLOOR_GUARD)).ceil().to_i64().unwrap_or(i64::MAX).max(1) as u32
        } else {
            1
        };
        if n1 + 1 < q + plan.counts[1] {
            return Err(Error::Internal {
                what: format!("N1 + 1 - q = {} < N2 = {}", n1 as i64 + 1 - q as i64, plan.counts[1]),
            });
        }
        Some(q)
    } else {
        None
    };
    Ok(Decomposition { plan, rate, q })
}

/// Per-sub-channel rate of a strategy with `kappa` simultaneous users and
/// `mu = 1` when the relay serves more than one receiver.
pub fn strategy_rate<T: Scalar>(
    gamma: T,
    strategy: Strategy,
    kappa: u32,
    kappa_prime: Option<u32>,
    mu: u8,
) -> Result<StrategyRate<T>> {
    if kappa == 0 || mu > 1 {
        return Err(Error::domain(format!("need kappa >= 1 and mu in {{0,1}}; got {kappa}, {mu}")));
    }
    let kp = match (strategy, kappa_prime) {
        (Strategy::Compute, None) => Some(kappa),
        (Strategy::Compute, Some(k)) if k == 0 || k > kappa => {
            return Err(Error::domain(format!("kappa' must be in 1..={kappa}, got {k}")));
        }
        (_, k) => k,
    };
    let snr = gamma / T::lit((kappa + mu as u32) as f64);
    let rate = match strategy {
        Strategy::Decode => chat(snr),
        Strategy::Compute => chat(T::one() / T::lit(kp.unwrap() as f64) + snr),
        Strategy::Neutralize => chat(T::lit(0.5) + snr),
    };
    Ok(StrategyRate {
        strategy,
        kappa,
        kappa_prime: kp,
        mu,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2p_exact_powers() {
        let d = decompose_p2p(64.0f64, 3).unwrap();
        assert!((d.plan.gamma - 4.0).abs() < 1e-12);
        let p = &d.plan.powers;
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 12.0).abs() < 1e-12 && p[2] == 64.0 - d.plan.gamma.powi(2));
        assert!((d.rate.rate - 1.0).abs() < 1e-12);
        let one = decompose_p2p(64.0f64, 1).unwrap();
        assert_eq!(one.plan.powers, vec![63.0]);
        assert!((one.rate.rate - 3.0).abs() < 1e-12);
        assert!(decompose_p2p(1.0f64, 2).is_err());
    }

    #[test]
    fn many_to_one() {
        let d = decompose_many_to_one(&[64.0f64, 16.0], 3, 2).unwrap();
        assert_eq!(d.plan.counts, vec![3, 2]);
        assert_eq!(d.plan.uplink_access[1], (1, 2));
        assert!((d.rate.rate - 0.5).abs() < 1e-12);
        let d = decompose_many_to_one(&[64.0f64, 16.0], 3, 1).unwrap();
        assert!((d.rate.rate - 1.0).abs() < 1e-12);
        assert!(matches!(
            decompose_many_to_one(&[64.0f64, 16.0], 7, 2),
            Err(Error::Validity { .. })
        ));
    }

    #[test]
    fn one_to_many() {
        let d = decompose_one_to_many(&[64.0f64, 16.0], 3).unwrap();
        assert_eq!(d.q, Some(2));
        assert_eq!(d.plan.downlink_access[1], (2, 3));
        assert!((d.rate.rate - 0.5).abs() < 1e-12);
        let d = decompose_one_to_many(&[64.0f64], 3).unwrap();
        assert_eq!((d.rate.mu, d.q), (0, None));
        assert!((d.rate.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strategy_examples() {
        let r = strategy_rate(4.0f64, Strategy::Decode, 2, None, 0).unwrap();
        assert!((r.rate - 0.5).abs() < 1e-12);
        let r = strategy_rate(4.0f64, Strategy::Compute, 2, Some(2), 0).unwrap();
        assert!((r.rate - 0.5 * 2.5f64.log2()).abs() < 1e-12);
        let r = strategy_rate(4.0f64, Strategy::Neutralize, 2, None, 1).unwrap();
        assert!((r.rate - 0.5 * (11.0f64 / 6.0).log2()).abs() < 1e-12);
    }
}
