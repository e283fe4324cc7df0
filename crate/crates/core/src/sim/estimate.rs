use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{replica_rng, simulate_with, BetaTable, RareEvent, TiltSpec};
use crate::error::{Error, Result};
use crate::occupancy::SystemParams;

/// Importance-sampling estimate of an event probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub std_err: f64,
    /// `-(1/n) ln p_hat`; infinite when no replica hit (`null` in JSON).
    #[serde(with = "infinite_as_null")]
    pub neg_log_rate: f64,
    pub hits: u64,
    pub replications: u64,
}

impl Estimate {
    pub fn relative_error(&self) -> f64 {
        if self.p_hat > 0.0 {
            self.std_err / self.p_hat
        } else {
            f64::INFINITY
        }
    }

    /// Standard error of `neg_log_rate` by the delta method.
    pub fn neg_log_rate_std_err(&self, n: u64) -> f64 {
        self.relative_error() / n as f64
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Mean of `1{hit} * dP/dQ` over `replications` independent replicas run
/// under the tilted law. Replica `r` uses stream `r` of `seed0`, and the
/// average is folded in replica order, so the result does not depend on
/// the number of worker threads.
pub fn estimate_probability(
    params: &SystemParams,
    event: &RareEvent,
    tilt: TiltSpec,
    replications: u64,
    seed0: u64,
) -> Result<Estimate> {
    let beta = BetaTable::new(params.n, params.d)?;
    estimate_with(params, &beta, event, tilt, replications, seed0)
}

pub fn estimate_with(
    params: &SystemParams,
    beta: &BetaTable,
    event: &RareEvent,
    tilt: TiltSpec,
    replications: u64,
    seed0: u64,
) -> Result<Estimate> {
    if replications < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 replications, got {replications}"
        )));
    }
    let samples: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let res = simulate_with(params, beta, tilt, Some(event), replica_rng(seed0, r), None)?;
            Ok(if res.hit { res.weight } else { 0.0 })
        })
        .collect::<Result<_>>()?;

    let count = replications as f64;
    let hits = samples.iter().filter(|&&w| w > 0.0).count() as u64;
    let p_hat = samples.iter().sum::<f64>() / count;
    let var = samples.iter().map(|w| (w - p_hat).powi(2)).sum::<f64>() / (count - 1.0);
    let std_err = (var / count).sqrt();
    let neg_log_rate = if p_hat > 0.0 {
        -p_hat.ln() / params.n as f64
    } else {
        log::warn!("no replica hit {event:?} in {replications} runs; rate reported as +inf");
        f64::INFINITY
    };
    Ok(Estimate {
        p_hat,
        std_err,
        neg_log_rate,
        hits,
        replications,
    })
}
