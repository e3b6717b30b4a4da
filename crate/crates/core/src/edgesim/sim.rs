use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::{steady_latency, EdgesimError, LatencyModel};

/// `count` requests arriving together at `at_ms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub at_ms: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadScenario {
    pub arrivals: Vec<Arrival>,
    pub duration_ms: f64,
    pub rng_seed: u64,
}

impl LoadScenario {
    /// Poisson arrivals at `rate_per_s`, each a batch of `batch` requests.
    pub fn poisson(rate_per_s: f64, duration_ms: f64, batch: usize, rng_seed: u64) -> Result<Self, EdgesimError> {
        if !(rate_per_s.is_finite() && rate_per_s > 0.0) {
            return Err(EdgesimError::InvalidScenario(format!("rate must be positive, got {rate_per_s}")));
        }
        let gap = Exp::new(rate_per_s / 1000.0).map_err(|e| EdgesimError::InvalidScenario(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut arrivals = Vec::new();
        let mut t = gap.sample(&mut rng);
        while t < duration_ms {
            arrivals.push(Arrival { at_ms: t, count: batch });
            t += gap.sample(&mut rng);
        }
        let scenario = Self {
            arrivals,
            duration_ms,
            rng_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// A single burst of `count` simultaneous requests.
    pub fn burst(count: usize) -> Self {
        Self {
            arrivals: vec![Arrival { at_ms: 0.0, count }],
            duration_ms: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EdgesimError> {
        if !(self.duration_ms.is_finite() && self.duration_ms >= 0.0) {
            return Err(EdgesimError::InvalidScenario("duration must be nonnegative".into()));
        }
        let mut last = 0.0;
        for (i, a) in self.arrivals.iter().enumerate() {
            if !(a.at_ms.is_finite() && a.at_ms >= last) {
                return Err(EdgesimError::InvalidScenario(format!(
                    "arrival {i} at {} ms is before {last} ms",
                    a.at_ms
                )));
            }
            last = a.at_ms;
        }
        Ok(())
    }

    pub fn request_count(&self) -> usize {
        self.arrivals.iter().map(|a| a.count).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadStats {
    pub requests: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub cold_starts: usize,
    pub max_in_flight: usize,
    pub containers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Completion(f64);

impl Eq for Completion {}

impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Replays `scenario` against `model`.
///
/// A request holds a container and counts towards concurrency for its warm
/// latency, fixed at arrival from the in-flight count including its own
/// batch. A request that finds no idle container starts a new one and pays
/// `cold_start_ms` on top of its response time. Containers are never
/// reclaimed, so warm capacity is the larger of the provisioned count and
/// the peak concurrency so far.
pub fn run_load(scenario: &LoadScenario, model: &LatencyModel) -> Result<LoadStats, EdgesimError> {
    scenario.validate()?;
    model.validate()?;
    let mut containers = model.provisioned_concurrency;
    let mut busy: BinaryHeap<Reverse<Completion>> = BinaryHeap::new();
    let mut latencies = Vec::with_capacity(scenario.request_count());
    let (mut max_in_flight, mut cold_starts) = (0usize, 0usize);
    for arrival in &scenario.arrivals {
        let now = arrival.at_ms;
        while busy.peek().is_some_and(|Reverse(Completion(at))| *at <= now) {
            busy.pop();
        }
        let in_flight = busy.len() + arrival.count;
        max_in_flight = max_in_flight.max(in_flight);
        let warm = steady_latency(in_flight, model);
        let cold = in_flight.saturating_sub(containers);
        containers += cold;
        cold_starts += cold;
        latencies.extend(std::iter::repeat_n(warm + model.cold_start_ms, cold));
        latencies.extend(std::iter::repeat_n(warm, arrival.count - cold));
        busy.extend(std::iter::repeat_n(Reverse(Completion(now + warm)), arrival.count));
    }
    if latencies.is_empty() {
        return Ok(LoadStats {
            containers,
            ..LoadStats::default()
        });
    }
    let mean_ms = latencies.iter().sum::<f64>() / latencies.len() as f64;
    latencies.sort_by(f64::total_cmp);
    Ok(LoadStats {
        requests: latencies.len(),
        mean_ms,
        p50_ms: percentile(&latencies, 0.50),
        p95_ms: percentile(&latencies, 0.95),
        p99_ms: percentile(&latencies, 0.99),
        max_ms: *latencies.last().expect("nonempty"),
        cold_starts,
        max_in_flight,
        containers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_warm_request() {
        let model = LatencyModel {
            provisioned_concurrency: 1,
            ..LatencyModel::default()
        };
        let stats = run_load(&LoadScenario::burst(1), &model).unwrap();
        assert_eq!(stats.p50_ms, steady_latency(1, &model));
        assert_eq!(stats.p99_ms, stats.p50_ms);
        assert_eq!(stats.cold_starts, 0);
    }

    #[test]
    fn enough_provisioning_means_no_cold_starts() {
        let scenario = LoadScenario::poisson(20.0, 5_000.0, 3, 4).unwrap();
        let probe = run_load(&scenario, &LatencyModel::default()).unwrap();
        assert!(probe.cold_starts > 0);
        let model = LatencyModel {
            provisioned_concurrency: probe.max_in_flight,
            ..LatencyModel::default()
        };
        assert_eq!(run_load(&scenario, &model).unwrap().cold_starts, 0);
    }

    #[test]
    fn containers_are_reused() {
        let scenario = LoadScenario {
            arrivals: vec![
                Arrival { at_ms: 0.0, count: 2 },
                Arrival { at_ms: 100.0, count: 1 },
                Arrival { at_ms: 5_000.0, count: 2 },
                Arrival { at_ms: 100_000.0, count: 1 },
            ],
            duration_ms: 100_000.0,
            rng_seed: 0,
        };
        let stats = run_load(&scenario, &LatencyModel::default()).unwrap();
        assert_eq!(stats.cold_starts, 3);
        assert_eq!(stats.containers, 3);
        assert_eq!(stats.max_in_flight, 3);
    }

    #[test]
    fn unordered_arrivals_are_rejected() {
        let scenario = LoadScenario {
            arrivals: vec![Arrival { at_ms: 5.0, count: 1 }, Arrival { at_ms: 1.0, count: 1 }],
            duration_ms: 10.0,
            rng_seed: 0,
        };
        assert!(run_load(&scenario, &LatencyModel::default()).is_err());
    }
}
