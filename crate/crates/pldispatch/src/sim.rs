//! Discrete-event simulation of list-driven dispatching.
//!
//! Customers arrive as a Poisson stream, are dispatched to the first
//! available entry of their type's list and are lost when no ambulance is
//! free or the first available entry is `Idle`. Service is non-preemptive,
//! so an ambulance's state is just the time it becomes free again.

use pldispatch_core::{CustomerType, ListEntry, PriorityLists, Scenario};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ServiceDistribution {
    Exponential,
    /// Lognormal with the model's mean and the given coefficient of variation.
    Lognormal {
        cv: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// End of each replication, in arrival-rate time units.
    pub horizon: f64,
    /// Statistics start here.
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    pub service: ServiceDistribution,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { horizon: 1e5, warmup: 100.0, replications: 20, seed: 42, service: ServiceDistribution::Exponential }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup >= 0.0 && self.horizon > self.warmup && self.horizon.is_finite()) {
            return Err(Error::Format(format!(
                "need horizon > warmup >= 0, got horizon {} and warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::Format("need at least one replication".into()));
        }
        if let ServiceDistribution::Lognormal { cv } = self.service {
            if !(cv > 0.0 && cv.is_finite()) {
                return Err(Error::Format(format!("lognormal cv must be positive, got {cv}")));
            }
        }
        Ok(())
    }
}

/// Counters of one replication over the post-warmup window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub reward_per_time: f64,
    /// Per arrival type (index `t - 1`).
    pub arrivals: Vec<u64>,
    /// Arrivals finding every ambulance busy.
    pub lost: Vec<u64>,
    /// Arrivals idled on purpose.
    pub idled: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub customer: String,
    pub arrivals: u64,
    pub loss_fraction: f64,
    pub idle_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// Mean over replications of reward per unit time.
    pub mean: f64,
    /// 95% Student-t half-width; `None` with a single replication.
    pub half_width: Option<f64>,
    pub loss_fraction: f64,
    pub idle_fraction: f64,
    pub per_type: Vec<TypeStats>,
    pub replications: Vec<Replication>,
}

fn rng_for(seed: u64, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

enum Service {
    Exp(Vec<Exp<f64>>),
    LogNormal(Vec<LogNormal<f64>>),
}

impl Service {
    fn new(scenario: &Scenario, dist: ServiceDistribution) -> Result<Self> {
        let (m, n) = (scenario.m, scenario.n());
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("service distribution: {e}"));
        Ok(match dist {
            ServiceDistribution::Exponential => Service::Exp(
                (0..n * m)
                    .map(|k| Exp::new(scenario.service_rate(k / m, k % m)).map_err(|e| bad(&e)))
                    .collect::<Result<_>>()?,
            ),
            ServiceDistribution::Lognormal { cv } => {
                let s2 = (1.0 + cv * cv).ln();
                Service::LogNormal(
                    (0..n * m)
                        .map(|k| {
                            let mean = 1.0 / scenario.service_rate(k / m, k % m);
                            LogNormal::new(mean.ln() - s2 / 2.0, s2.sqrt()).map_err(|e| bad(&e))
                        })
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    fn sample(&self, k: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Service::Exp(d) => d[k].sample(rng),
            Service::LogNormal(d) => d[k].sample(rng),
        }
    }
}

fn replicate(
    scenario: &Scenario,
    lists: &PriorityLists,
    config: &SimConfig,
    service: &Service,
    types: &WeightedIndex<f64>,
    replication: usize,
) -> Replication {
    let (m, n) = (scenario.m, scenario.n());
    let mut rng = rng_for(config.seed, replication);
    let gap = Exp::new(scenario.lambda).expect("arrival rate is positive");
    let mut free_at = vec![0.0f64; m];
    let mut arrivals = vec![0u64; 2 * n];
    let mut lost = vec![0u64; 2 * n];
    let mut idled = vec![0u64; 2 * n];
    let mut reward = 0.0;
    let mut now = 0.0;
    loop {
        now += gap.sample(&mut rng);
        if now >= config.horizon {
            break;
        }
        let k = types.sample(&mut rng);
        let CustomerType::Arrival { location, level } = CustomerType::from_index(k + 1, n) else {
            unreachable!("arrival types start at 1")
        };
        let counted = now >= config.warmup;
        if counted {
            arrivals[k] += 1;
        }
        if free_at.iter().all(|&f| f > now) {
            if counted {
                lost[k] += 1;
            }
            continue;
        }
        let choice = lists.lists[k].iter().find(|e| match e {
            ListEntry::Idle => true,
            ListEntry::Ambulance(j) => free_at[*j] <= now,
        });
        match choice {
            Some(ListEntry::Ambulance(j)) => {
                free_at[*j] = now + service.sample(location * m + j, &mut rng);
                if counted {
                    reward += scenario.reward(location, level, *j);
                }
            }
            _ => {
                if counted {
                    idled[k] += 1;
                }
            }
        }
    }
    Replication { reward_per_time: reward / (config.horizon - config.warmup), arrivals, lost, idled }
}

/// Simulates the policy induced by `lists` and summarizes the replications.
pub fn simulate(scenario: &Scenario, lists: &PriorityLists, config: &SimConfig) -> Result<SimEstimate> {
    config.validate()?;
    lists.validate()?;
    if lists.m != scenario.m || lists.n != scenario.n() {
        return Err(Error::Format(format!("lists do not fit scenario {}", scenario.id)));
    }
    let n = scenario.n();
    let service = Service::new(scenario, config.service)?;
    let weights: Vec<f64> = (1..=2 * n)
        .map(|t| match CustomerType::from_index(t, n) {
            CustomerType::Arrival { location, level } => scenario.arrival_rate(location, level),
            CustomerType::Null => 0.0,
        })
        .collect();
    let types = WeightedIndex::new(&weights).map_err(|e| Error::Format(format!("arrival mix: {e}")))?;
    let replications: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(scenario, lists, config, &service, &types, r))
        .collect();

    let k = replications.len() as f64;
    let mean = replications.iter().map(|r| r.reward_per_time).sum::<f64>() / k;
    let half_width = (replications.len() > 1).then(|| {
        let var = replications.iter().map(|r| (r.reward_per_time - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let t = StudentsT::new(0.0, 1.0, k - 1.0).expect("positive degrees of freedom").inverse_cdf(0.975);
        t * (var / k).sqrt()
    });
    let sum = |f: fn(&Replication) -> &Vec<u64>, t: usize| replications.iter().map(|r| f(r)[t]).sum::<u64>();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_type: Vec<TypeStats> = (0..2 * n)
        .map(|t| {
            let a = sum(|r| &r.arrivals, t);
            TypeStats {
                customer: CustomerType::from_index(t + 1, n).label(),
                arrivals: a,
                loss_fraction: ratio(sum(|r| &r.lost, t), a),
                idle_fraction: ratio(sum(|r| &r.idled, t), a),
            }
        })
        .collect();
    let total = |f: fn(&Replication) -> &Vec<u64>| (0..2 * n).map(|t| sum(f, t)).sum::<u64>();
    let all = total(|r| &r.arrivals);
    Ok(SimEstimate {
        mean,
        half_width,
        loss_fraction: ratio(total(|r| &r.lost), all),
        idle_fraction: ratio(total(|r| &r.idled), all),
        per_type,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pldispatch_core::{make_scenario, CaseId, RegionId};

    #[test]
    fn streams_differ_per_replication() {
        use rand::RngCore;
        let a = rng_for(7, 0).next_u64();
        let b = rng_for(7, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, rng_for(7, 0).next_u64());
    }

    #[test]
    fn config_checks() {
        let mut c = SimConfig { horizon: 10.0, warmup: 10.0, ..SimConfig::default() };
        assert!(c.validate().is_err());
        c.warmup = 0.0;
        assert!(c.validate().is_ok());
        c.replications = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lognormal_mean_matches_model() {
        let sc = make_scenario(RegionId::R1, CaseId::C1, 3.0, 2).unwrap();
        let s = Service::new(&sc, ServiceDistribution::Lognormal { cv: 0.5 }).unwrap();
        let mut rng = rng_for(1, 0);
        let k = 200_000;
        let mean = (0..k).map(|_| s.sample(0, &mut rng)).sum::<f64>() / k as f64;
        let expect = 1.0 / sc.service_rate(0, 0);
        assert!((mean / expect - 1.0).abs() < 0.01, "{mean} vs {expect}");
    }
}
