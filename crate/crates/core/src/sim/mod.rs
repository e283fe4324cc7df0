//! Exact simulation of the `n`-server occupancy chain.
//!
//! The state is the vector of tail counts `k_i = #{queues with >= i jobs}`;
//! every jump changes exactly one of them by one. Arrivals (rate
//! `n lambda_n a`) join a queue of length `i - 1` with probability
//! `beta_n(x_{i-1}) - beta_n(x_i)`; busy servers complete at rate `b` each.
//! Under a tilt `(a, b) != (1, 1)` the run accumulates `log dP/dQ` so that
//! `1{hit} * exp(log_lr)` is an unbiased estimator under the original law.

mod beta;
mod engine;
mod estimate;
mod remark;

pub use beta::{beta_n, BetaTable};
pub use engine::{replica_rng, simulate, simulate_with, Engine, Jump, SimResult};
pub use estimate::{estimate_probability, estimate_with, Estimate};
pub use remark::{remark_bound, RemarkBound};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant exponential tilt: arrivals at `a` times their rate, each busy
/// server at `b` times its rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub a: f64,
    pub b: f64,
}

impl TiltSpec {
    pub const UNTILTED: TiltSpec = TiltSpec { a: 1.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite() && b >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tilt ({a}, {b}) must be finite and non-negative"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn is_identity(&self) -> bool {
        self.a == 1.0 && self.b == 1.0
    }
}

impl Default for TiltSpec {
    fn default() -> Self {
        Self::UNTILTED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RareEventKind {
    /// Total scaled job count exceeds its initial value by more than `epsilon`.
    #[serde(rename = "G_eps")]
    GEps,
    /// Total scaled job count exceeds its initial value by at least `epsilon`.
    #[serde(rename = "F_eps")]
    FEps,
    /// Some queue reaches length `j`.
    #[serde(rename = "U_j")]
    UJ,
    /// Every queue reaches length `j - 1`.
    #[serde(rename = "V_j")]
    VJ,
}

/// Stopping event, checked at time 0 and after every jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RareEvent {
    pub kind: RareEventKind,
    /// `epsilon` for `G_eps`/`F_eps`, `j` for `U_j`/`V_j`.
    pub threshold: f64,
}

impl RareEvent {
    pub fn new(kind: RareEventKind, threshold: f64) -> Result<Self> {
        let ok = match kind {
            RareEventKind::GEps | RareEventKind::FEps => threshold > 0.0 && threshold.is_finite(),
            RareEventKind::UJ | RareEventKind::VJ => {
                threshold >= 3.0 && threshold.fract() == 0.0 && threshold < 1e9
            }
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "invalid threshold {threshold} for {kind:?}"
            )));
        }
        Ok(Self { kind, threshold })
    }

    pub fn g_eps(epsilon: f64) -> Result<Self> {
        Self::new(RareEventKind::GEps, epsilon)
    }

    pub fn f_eps(epsilon: f64) -> Result<Self> {
        Self::new(RareEventKind::FEps, epsilon)
    }

    pub fn u_j(j: u32) -> Result<Self> {
        Self::new(RareEventKind::UJ, j as f64)
    }

    pub fn v_j(j: u32) -> Result<Self> {
        Self::new(RareEventKind::VJ, j as f64)
    }

    pub(crate) fn compile(&self, n: u64) -> EventTest {
        match self.kind {
            RareEventKind::GEps | RareEventKind::FEps => {
                let mut t = n as f64 * self.threshold;
                if (t - t.round()).abs() <= 1e-9 * t.max(1.0) {
                    t = t.round();
                }
                let min_excess = if self.kind == RareEventKind::GEps {
                    t.floor() + 1.0
                } else {
                    t.ceil()
                };
                EventTest::JobExcess(min_excess as u64)
            }
            RareEventKind::UJ => EventTest::LevelOccupied(self.threshold as usize),
            RareEventKind::VJ => EventTest::LevelFull(self.threshold as usize - 1),
        }
    }
}

/// Event in integer form for a system of `n` servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EventTest {
    /// `jobs - initial_jobs >= m`.
    JobExcess(u64),
    /// `k_j > 0`.
    LevelOccupied(usize),
    /// `k_j == n`.
    LevelFull(usize),
}

/// Number of choices per arrival as a function of the server count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DSchedule {
    /// `d = n` (join the shortest queue).
    Full,
    /// `d = ceil(sqrt n)`.
    Sqrt,
    /// `d = ceil(ln n)`.
    Log,
    /// `d = ceil(n^gamma)`.
    Power(f64),
    Fixed(u64),
}

impl DSchedule {
    pub fn resolve(&self, n: u64) -> u64 {
        let nf = n as f64;
        let d = match *self {
            DSchedule::Full => n,
            DSchedule::Sqrt => {
                // exact integer ceil of sqrt
                let mut r = nf.sqrt() as u64;
                while r * r < n {
                    r += 1;
                }
                while r > 0 && (r - 1) * (r - 1) >= n {
                    r -= 1;
                }
                r
            }
            DSchedule::Log => nf.ln().ceil() as u64,
            DSchedule::Power(g) => nf.powf(g).ceil() as u64,
            DSchedule::Fixed(d) => d,
        };
        d.clamp(1, n.max(1))
    }

    pub fn label(&self) -> String {
        match self {
            DSchedule::Full => "d=n".into(),
            DSchedule::Sqrt => "d=ceil(sqrt n)".into(),
            DSchedule::Log => "d=ceil(log n)".into(),
            DSchedule::Power(g) => format!("d=ceil(n^{g})"),
            DSchedule::Fixed(d) => format!("d={d}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(DSchedule::Full.resolve(100), 100);
        assert_eq!(DSchedule::Sqrt.resolve(100), 10);
        assert_eq!(DSchedule::Sqrt.resolve(101), 11);
        assert_eq!(DSchedule::Sqrt.resolve(1_000_000), 1000);
        assert_eq!(DSchedule::Log.resolve(100), 5);
        assert_eq!(DSchedule::Log.resolve(1), 1);
        assert_eq!(DSchedule::Power(0.5).resolve(10_000), 100);
        assert_eq!(DSchedule::Fixed(500).resolve(30), 30);
    }

    #[test]
    fn event_thresholds() {
        assert_eq!(
            RareEvent::g_eps(1.0).unwrap().compile(100),
            EventTest::JobExcess(101)
        );
        assert_eq!(
            RareEvent::f_eps(1.0).unwrap().compile(100),
            EventTest::JobExcess(100)
        );
        // 30 * 0.1 = 3.0000000000000004 snaps to 3
        assert_eq!(
            RareEvent::g_eps(0.1).unwrap().compile(30),
            EventTest::JobExcess(4)
        );
        assert_eq!(
            RareEvent::f_eps(0.1).unwrap().compile(30),
            EventTest::JobExcess(3)
        );
        assert_eq!(
            RareEvent::f_eps(0.015).unwrap().compile(100),
            EventTest::JobExcess(2)
        );
        assert_eq!(
            RareEvent::u_j(3).unwrap().compile(10),
            EventTest::LevelOccupied(3)
        );
        assert_eq!(
            RareEvent::v_j(3).unwrap().compile(10),
            EventTest::LevelFull(2)
        );
        assert!(RareEvent::u_j(2).is_err());
        assert!(RareEvent::g_eps(0.0).is_err());
    }

    #[test]
    fn serde_names() {
        let e = RareEvent::g_eps(0.5).unwrap();
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"kind":"G_eps","threshold":0.5}"#
        );
        let s: Vec<DSchedule> =
            serde_json::from_str(r#"["full","sqrt",{"power":0.5},{"fixed":3}]"#).unwrap();
        assert_eq!(s[2], DSchedule::Power(0.5));
    }
}
