use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{BetaTable, EventTest, RareEvent, TiltSpec};
use crate::error::{Error, Result};
use crate::occupancy::{Interpolation, OccupancyState, PiecewisePath, SystemParams};

/// Generator for replica `r` of a study seeded with `seed0`: the ChaCha
/// stream number is the replica index, so replicas are independent of
/// scheduling order.
pub fn replica_rng(seed0: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed0);
    rng.set_stream(replica);
    rng
}

/// A single jump of the occupancy chain. `level` is the queue length after
/// an arrival, or before a departure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jump {
    Arrival { level: usize },
    Departure { level: usize },
}

/// Event-driven simulator of one replica.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    n: u64,
    base_arrival: f64,
    tilt: TiltSpec,
    log_a: f64,
    log_b: f64,
    horizon: f64,
    beta: &'a BetaTable,
    tails: Vec<u64>,
    initial_jobs: u64,
    jobs: u64,
    time: f64,
    log_lr: f64,
    arrivals: u64,
    departures: u64,
    rng: ChaCha8Rng,
}

impl<'a> Engine<'a> {
    pub fn new(
        params: &SystemParams,
        tilt: TiltSpec,
        beta: &'a BetaTable,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        if beta.n() != params.n || beta.d() != params.d {
            return Err(Error::InvalidParameter(format!(
                "routing table is for (n, d) = ({}, {}), params have ({}, {})",
                beta.n(),
                beta.d(),
                params.n,
                params.d
            )));
        }
        let state = &params.initial.state;
        Ok(Self {
            n: params.n,
            base_arrival: params.n as f64 * params.lambda_n,
            tilt,
            log_a: tilt.a.ln(),
            log_b: tilt.b.ln(),
            horizon: params.horizon,
            beta,
            tails: state.tail_counts(),
            initial_jobs: state.total_jobs(),
            jobs: state.total_jobs(),
            time: 0.0,
            log_lr: 0.0,
            arrivals: 0,
            departures: 0,
            rng,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn log_lr(&self) -> f64 {
        self.log_lr
    }

    pub fn jobs(&self) -> u64 {
        self.jobs
    }

    /// `k_i` for `i = 1..`, trailing zeros trimmed.
    pub fn tail_counts(&self) -> &[u64] {
        &self.tails
    }

    pub fn state(&self) -> OccupancyState {
        OccupancyState::from_tail_counts(self.n, &self.tails).expect("engine keeps a valid state")
    }

    fn busy(&self) -> u64 {
        self.tails.first().copied().unwrap_or(0)
    }

    /// `int (n lambda (a - 1) + k_1 (b - 1)) ds` over a stretch with constant state.
    fn compensate(&mut self, dt: f64) {
        let busy = self.busy() as f64;
        self.log_lr += (self.base_arrival * (self.tilt.a - 1.0) + busy * (self.tilt.b - 1.0)) * dt;
    }

    /// Advance to the next jump. Returns `None` (with the clock at the
    /// horizon) when no jump occurs before the horizon.
    pub fn step(&mut self) -> Option<(f64, Jump)> {
        let remaining = self.horizon - self.time;
        if remaining <= 0.0 {
            return None;
        }
        let arrival_rate = self.base_arrival * self.tilt.a;
        let total = arrival_rate + self.tilt.b * self.busy() as f64;
        let wait = if total > 0.0 {
            self.rng.sample::<f64, _>(Exp1) / total
        } else {
            f64::INFINITY
        };
        if wait >= remaining {
            self.compensate(remaining);
            self.time = self.horizon;
            return None;
        }
        self.compensate(wait);
        self.time += wait;
        let jump = if self.rng.gen::<f64>() * total < arrival_rate {
            self.arrive()
        } else {
            self.depart()
        };
        Some((self.time, jump))
    }

    fn arrive(&mut self) -> Jump {
        let u: f64 = self.rng.gen();
        // beta(k_i) is non-increasing in i and beta(k_0) = 1 > u, beta(0) = 0 <= u.
        let mut level = 1;
        while self
            .beta
            .get(self.tails.get(level - 1).copied().unwrap_or(0))
            > u
        {
            level += 1;
        }
        if level > self.tails.len() {
            self.tails.push(0);
        }
        self.tails[level - 1] += 1;
        self.jobs += 1;
        self.arrivals += 1;
        self.log_lr -= self.log_a;
        Jump::Arrival { level }
    }

    fn depart(&mut self) -> Jump {
        let mut r = self.rng.gen_range(0..self.busy());
        let mut level = 1;
        loop {
            let above = self.tails.get(level).copied().unwrap_or(0);
            let count = self.tails[level - 1] - above;
            if r < count {
                break;
            }
            r -= count;
            level += 1;
        }
        self.tails[level - 1] -= 1;
        while self.tails.last() == Some(&0) {
            self.tails.pop();
        }
        self.jobs -= 1;
        self.departures += 1;
        self.log_lr -= self.log_b;
        Jump::Departure { level }
    }

    pub(crate) fn satisfies(&self, test: EventTest) -> bool {
        match test {
            EventTest::JobExcess(m) => self.jobs >= self.initial_jobs + m,
            EventTest::LevelOccupied(j) => self.tails.get(j - 1).is_some_and(|&k| k > 0),
            EventTest::LevelFull(j) => j == 0 || self.tails.get(j - 1) == Some(&self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub hit: bool,
    pub hit_time: Option<f64>,
    pub log_lr: f64,
    /// `exp(log_lr)`: `dP/dQ` at the stopping time; 1 for untilted runs.
    pub weight: f64,
    pub final_state: OccupancyState,
    pub arrivals: u64,
    pub departures: u64,
    /// Scaled tails sampled on a reporting grid, when requested.
    pub path: Option<PiecewisePath>,
}

/// Run one replica with a freshly built routing table and the stream-0
/// generator of `seed`.
pub fn simulate(
    params: &SystemParams,
    tilt: TiltSpec,
    event: Option<&RareEvent>,
    seed: u64,
) -> Result<SimResult> {
    let beta = BetaTable::new(params.n, params.d)?;
    simulate_with(params, &beta, tilt, event, replica_rng(seed, 0), None)
}

/// Run one replica until the horizon or the first time `event` holds.
/// With `report_dt`, the scaled tails are recorded at `0, report_dt, ...`
/// up to the stopping time.
pub fn simulate_with(
    params: &SystemParams,
    beta: &BetaTable,
    tilt: TiltSpec,
    event: Option<&RareEvent>,
    rng: ChaCha8Rng,
    report_dt: Option<f64>,
) -> Result<SimResult> {
    let mut engine = Engine::new(params, tilt, beta, rng)?;
    let test = event.map(|e| e.compile(params.n));
    let grid: Vec<f64> = match report_dt {
        Some(dt) if dt > 0.0 => {
            let steps = (params.horizon / dt + 1e-9).floor() as usize;
            (0..=steps)
                .map(|k| (k as f64 * dt).min(params.horizon))
                .collect()
        }
        Some(dt) => return Err(Error::InvalidParameter(format!("report_dt = {dt}"))),
        None => Vec::new(),
    };
    let mut recorded: Vec<Vec<u64>> = Vec::with_capacity(grid.len());
    let mut before: Vec<u64> = Vec::new();

    let mut hit_time = None;
    if test.is_some_and(|t| engine.satisfies(t)) {
        hit_time = Some(0.0);
    } else {
        loop {
            if !grid.is_empty() {
                before.clear();
                before.extend_from_slice(engine.tail_counts());
            }
            let Some((t, _)) = engine.step() else { break };
            while recorded.len() < grid.len() && grid[recorded.len()] < t {
                recorded.push(before.clone());
            }
            if test.is_some_and(|x| engine.satisfies(x)) {
                hit_time = Some(t);
                break;
            }
        }
    }
    let stop = hit_time.unwrap_or(params.horizon);
    while recorded.len() < grid.len() && grid[recorded.len()] <= stop {
        recorded.push(engine.tail_counts().to_vec());
    }

    let path = if grid.is_empty() {
        None
    } else {
        let m = recorded.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let n = params.n as f64;
        let rows = recorded
            .iter()
            .map(|k| {
                let mut x: Vec<f64> = k.iter().map(|&v| v as f64 / n).collect();
                x.resize(m, 0.0);
                x
            })
            .collect();
        Some(PiecewisePath::new(
            grid[..recorded.len()].to_vec(),
            rows,
            Interpolation::Step,
        )?)
    };

    Ok(SimResult {
        hit: hit_time.is_some(),
        hit_time,
        log_lr: engine.log_lr,
        weight: engine.log_lr.exp(),
        final_state: engine.state(),
        arrivals: engine.arrivals,
        departures: engine.departures,
        path,
    })
}
