use std::fmt;

use serde::{Deserialize, Serialize};

use super::EdgesimError;

/// How the concurrency term is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMode {
    /// `k · log_b(n)`.
    Formula,
    /// Piecewise linear in `n` through measured points, flat past the last.
    Fitted,
}

/// Concurrency increments over `n = 1` behind the published scalability table.
const FITTED_POINTS: [(f64, f64); 5] = [(1.0, 0.0), (10.0, 10.0), (100.0, 25.0), (1000.0, 45.0), (10000.0, 47.0)];

pub const TABLE2_CONCURRENCY: [usize; 5] = [1, 10, 100, 1000, 10000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub base_inference_ms: f64,
    pub network_overhead_ms: f64,
    pub mode: ProfileMode,
    pub scaling_factor: f64,
    pub log_base: f64,
    pub cold_start_ms: f64,
    pub provisioned_concurrency: usize,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            base_inference_ms: 400.0,
            network_overhead_ms: 50.0,
            mode: ProfileMode::Fitted,
            scaling_factor: 10.0,
            log_base: 10.0,
            cold_start_ms: 900.0,
            provisioned_concurrency: 0,
        }
    }
}

impl LatencyModel {
    /// Pure-formula model with the given scaling factor and log base.
    pub fn formula(scaling_factor: f64, log_base: f64) -> Self {
        Self {
            mode: ProfileMode::Formula,
            scaling_factor,
            log_base,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EdgesimError> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        for (name, v) in [
            ("base_inference_ms", self.base_inference_ms),
            ("network_overhead_ms", self.network_overhead_ms),
            ("scaling_factor", self.scaling_factor),
            ("cold_start_ms", self.cold_start_ms),
        ] {
            if !nonneg(v) {
                return Err(EdgesimError::InvalidModel(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.log_base.is_finite() && self.log_base > 1.0) {
            return Err(EdgesimError::InvalidModel(format!(
                "log_base must exceed 1, got {}",
                self.log_base
            )));
        }
        Ok(())
    }

    fn concurrency_term(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        match self.mode {
            ProfileMode::Formula => self.scaling_factor * n.log(self.log_base),
            ProfileMode::Fitted => {
                let (last_n, last_ms) = FITTED_POINTS[FITTED_POINTS.len() - 1];
                if n >= last_n {
                    return last_ms;
                }
                let i = FITTED_POINTS.iter().rposition(|&(x, _)| x <= n).expect("n >= 1");
                let ((x0, y0), (x1, y1)) = (FITTED_POINTS[i], FITTED_POINTS[i + 1]);
                y0 + (y1 - y0) * (n - x0) / (x1 - x0)
            }
        }
    }
}

/// Warm-container latency with `n` requests in flight.
pub fn steady_latency(n: usize, model: &LatencyModel) -> f64 {
    model.base_inference_ms + model.network_overhead_ms + model.concurrency_term(n)
}

/// One row of the scalability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub requests: usize,
    pub response_ms: f64,
    /// Percentage over the single-request latency; `None` for `n = 1`.
    pub increase_pct: Option<f64>,
}

pub fn table2(model: &LatencyModel) -> Vec<Table2Row> {
    let base = steady_latency(1, model);
    TABLE2_CONCURRENCY
        .iter()
        .map(|&n| {
            let ms = steady_latency(n, model);
            Table2Row {
                requests: n,
                response_ms: ms,
                increase_pct: (n > 1).then(|| 100.0 * (ms - base) / base),
            }
        })
        .collect()
}

impl fmt::Display for Table2Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let increase = self
            .increase_pct
            .map(|p| format!("{p:.1}%"))
            .unwrap_or_else(|| "--".into());
        write!(f, "{:>19} | {:>18.0} | {:>16}", self.requests, self.response_ms, increase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_profile_hits_the_table() {
        let rows = table2(&LatencyModel::default());
        let ms: Vec<f64> = rows.iter().map(|r| r.response_ms).collect();
        assert_eq!(ms, [450.0, 460.0, 475.0, 495.0, 497.0]);
        let last = rows[4].increase_pct.unwrap();
        assert!((last - 10.444).abs() < 1e-3, "{last}");
        assert_eq!(steady_latency(50_000, &LatencyModel::default()), 497.0);
    }

    #[test]
    fn formula_mode() {
        for k in [0.0, 3.0, 10.0, 250.0] {
            assert_eq!(steady_latency(1, &LatencyModel::formula(k, 10.0)), 450.0);
        }
        assert!((steady_latency(10, &LatencyModel::formula(10.0, 10.0)) - 460.0).abs() < 1e-12);
        assert!(LatencyModel::formula(1.0, 1.0).validate().is_err());
    }
}
