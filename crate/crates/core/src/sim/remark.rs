use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Analytic lower bound on the probability that some queue reaches length 3
/// within `[0, T]`, starting from all servers holding one job with
/// `lambda_n = 1`.
///
/// The bound is the probability that `d + 1` arrivals precede the first
/// departure, that the last of them samples only the `d` queues of length 2,
/// and that all of this happens before `T`:
/// `(1/2)^(d+1) / C(n, d) * P(Gamma(d + 1, rate 2n) <= T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemarkBound {
    pub n: u64,
    pub d: u64,
    pub horizon: f64,
    pub log_binomial: f64,
    /// `ln P(Gamma(d + 1, 2n) <= T)`.
    pub log_time_factor: f64,
    pub log_lower_bound: f64,
    /// `log_lower_bound / n`.
    pub per_n_rate: f64,
}

impl RemarkBound {
    /// The bound normalised by an arbitrary speed `scale` instead of `n`.
    pub fn rate_at_scale(&self, scale: f64) -> f64 {
        self.log_lower_bound / scale
    }
}

pub fn remark_bound(n: u64, d: u64, horizon: f64) -> Result<RemarkBound> {
    if d == 0 || d > n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= d <= n, got n = {n}, d = {d}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon = {horizon}")));
    }
    let (nf, df) = (n as f64, d as f64);
    let log_binomial = ln_gamma(nf + 1.0) - ln_gamma(df + 1.0) - ln_gamma(nf - df + 1.0);
    let log_time_factor = gamma_lr(df + 1.0, 2.0 * nf * horizon).ln();
    let log_lower_bound = -(df + 1.0) * std::f64::consts::LN_2 - log_binomial + log_time_factor;
    Ok(RemarkBound {
        n,
        d,
        horizon,
        log_binomial,
        log_time_factor,
        log_lower_bound,
        per_n_rate: log_lower_bound / nf,
    })
}
