//! Shared domain types: occupancy vectors, piecewise trajectories and the
//! system parameter record.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum of absolute values.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Total number of jobs in the system, `sum_i i * c_i`.
pub fn total_jobs(state: &OccupancyState) -> u64 {
    state.total_jobs()
}

/// Exact occupancy of an `n`-server system.
///
/// `counts[i - 1]` is the number of queues holding exactly `i` jobs. The
/// scaled tail `x_i = (1/n) sum_{j >= i} c_j` is derived on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawOccupancy", into = "RawOccupancy")]
pub struct OccupancyState {
    n: u64,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawOccupancy {
    n: u64,
    counts: Vec<u64>,
}

impl TryFrom<RawOccupancy> for OccupancyState {
    type Error = Error;
    fn try_from(raw: RawOccupancy) -> Result<Self> {
        OccupancyState::new(raw.n, raw.counts)
    }
}

impl From<OccupancyState> for RawOccupancy {
    fn from(s: OccupancyState) -> Self {
        RawOccupancy {
            n: s.n,
            counts: s.counts,
        }
    }
}

impl OccupancyState {
    pub fn new(n: u64, mut counts: Vec<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "server count must be positive".into(),
            ));
        }
        let busy: u64 = counts.iter().sum();
        if busy > n {
            return Err(Error::InvalidParameter(format!(
                "{busy} busy queues exceed the server count {n}"
            )));
        }
        while counts.last() == Some(&0) {
            counts.pop();
        }
        Ok(Self { n, counts })
    }

    pub fn empty(n: u64) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    /// Build from tail counts `k_i = #{queues with length >= i}`, `i >= 1`.
    pub fn from_tail_counts(n: u64, tails: &[u64]) -> Result<Self> {
        if let Some(w) = tails.windows(2).find(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(format!(
                "tail counts must be non-increasing, found {} < {}",
                w[0], w[1]
            )));
        }
        let counts = tails
            .iter()
            .enumerate()
            .map(|(i, &k)| k - tails.get(i + 1).copied().unwrap_or(0))
            .collect();
        Self::new(n, counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Per-level counts, `counts()[i - 1] = c_i`. Trailing zeros are trimmed.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Highest occupied level (0 for an empty system).
    pub fn max_level(&self) -> usize {
        self.counts.len()
    }

    pub fn tail_counts(&self) -> Vec<u64> {
        let mut tails = vec![0; self.counts.len()];
        let mut acc = 0;
        for (i, &c) in self.counts.iter().enumerate().rev() {
            acc += c;
            tails[i] = acc;
        }
        tails
    }

    /// Scaled tails `x_1, x_2, ...` up to the highest occupied level.
    pub fn tails(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.tail_counts()
            .into_iter()
            .map(|k| k as f64 / n)
            .collect()
    }

    /// Scaled tails padded with zeros (or truncated) to `m` levels.
    pub fn tails_truncated(&self, m: usize) -> Vec<f64> {
        let mut x = self.tails();
        x.resize(m, 0.0);
        x
    }

    pub fn busy(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_jobs(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64 + 1) * c)
            .sum()
    }
}

/// Initial condition: exact counts for the finite system together with the
/// limiting vector used by the fluid solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialOccupancy {
    pub state: OccupancyState,
    pub limit: Vec<f64>,
}

impl InitialOccupancy {
    /// Round `n * x_i` to the nearest integer for every level. Rounding keeps
    /// the tail sequence non-increasing.
    pub fn from_limit(n: u64, limit: &[f64]) -> Result<Self> {
        check_l1_down(limit)?;
        let tails: Vec<u64> = limit
            .iter()
            .map(|&x| (x * n as f64).round() as u64)
            .collect();
        let state = OccupancyState::from_tail_counts(n, &tails)?;
        Ok(Self {
            state,
            limit: limit.to_vec(),
        })
    }

    pub fn new(state: OccupancyState, limit: Vec<f64>) -> Result<Self> {
        check_l1_down(&limit)?;
        Ok(Self { state, limit })
    }

    /// `||x^n - x||_1` between the scaled exact counts and the limit.
    pub fn l1_gap(&self) -> f64 {
        let m = self.limit.len().max(self.state.max_level());
        let xn = self.state.tails_truncated(m);
        xn.iter()
            .zip(self.limit.iter().chain(std::iter::repeat(&0.0)))
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Checks membership in the non-increasing, `[0, 1]`-valued sequence space.
pub fn check_l1_down(x: &[f64]) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "occupancy entry {v} outside [0, 1]"
        )));
    }
    if x.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "occupancy vector must be non-increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: u64,
    pub d: u64,
    pub lambda_n: f64,
    pub horizon: f64,
    pub initial: InitialOccupancy,
}

impl SystemParams {
    pub fn new(
        n: u64,
        d: u64,
        lambda_n: f64,
        horizon: f64,
        initial: InitialOccupancy,
    ) -> Result<Self> {
        let p = Self {
            n,
            d,
            lambda_n,
            horizon,
            initial,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.d > self.n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= d <= n, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        // lambda_n = 0 is accepted: pure-departure systems are useful test cases.
        if !(self.lambda_n >= 0.0 && self.lambda_n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda_n = {}",
                self.lambda_n
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon = {}",
                self.horizon
            )));
        }
        if self.initial.state.n() != self.n {
            return Err(Error::InvalidParameter(format!(
                "initial state has {} servers, expected {}",
                self.initial.state.n(),
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Step,
    Linear,
}

/// Time-indexed trajectory of fixed-dimension vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct PiecewisePath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    interpolation: Interpolation,
}

#[derive(Serialize, Deserialize)]
struct RawPath {
    interpolation: Interpolation,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawPath> for PiecewisePath {
    type Error = Error;
    fn try_from(raw: RawPath) -> Result<Self> {
        PiecewisePath::new(raw.times, raw.values, raw.interpolation)
    }
}

impl From<PiecewisePath> for RawPath {
    fn from(p: PiecewisePath) -> Self {
        RawPath {
            interpolation: p.interpolation,
            times: p.times,
            values: p.values,
        }
    }
}

impl PiecewisePath {
    pub fn new(
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPath("empty time grid".into()));
        }
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} value rows",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!(
                "grid starts at {} instead of 0",
                times[0]
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPath(
                "times must be finite and strictly increasing".into(),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidPath("value rows differ in dimension".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite path value".into()));
        }
        Ok(Self {
            times,
            values,
            interpolation,
        })
    }

    /// Build from per-coordinate columns sharing one grid.
    pub fn from_columns(
        times: Vec<f64>,
        columns: &[Vec<f64>],
        interpolation: Interpolation,
    ) -> Result<Self> {
        if columns.iter().any(|c| c.len() != times.len()) {
            return Err(Error::InvalidPath(
                "column length differs from grid length".into(),
            ));
        }
        let values = (0..times.len())
            .map(|k| columns.iter().map(|c| c[k]).collect())
            .collect();
        Self::new(times, values, interpolation)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[i]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.column(i)).collect()
    }

    /// Index `k` of the segment `[t_k, t_{k+1})` containing `t`, clamped to the grid.
    fn segment(&self, t: f64) -> usize {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => p - 1,
        }
    }

    /// Value at time `t`; constant extrapolation outside the grid.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let k = self.segment(t);
        if k + 1 >= self.times.len()
            || self.interpolation == Interpolation::Step
            || t <= self.times[k]
        {
            return self.values[k].clone();
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let f = (t - t0) / (t1 - t0);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| a + f * (b - a))
            .collect()
    }

    /// Exact integral of coordinate `i` over `[from, to]` under the path's
    /// interpolation rule. The last value is held beyond the final grid time.
    pub fn integrate(&self, i: usize, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let at = |t: f64| self.value_at(t)[i];
        let mut total = 0.0;
        let mut left = from;
        let mut k = self.segment(from);
        loop {
            let right = match self.times.get(k + 1) {
                Some(&t) if t < to => t,
                _ => to,
            };
            if right > left {
                total += match self.interpolation {
                    Interpolation::Step => self.values[k][i] * (right - left),
                    Interpolation::Linear if k + 1 < self.times.len() => {
                        0.5 * (at(left) + at(right)) * (right - left)
                    }
                    Interpolation::Linear => self.values[k][i] * (right - left),
                };
            }
            if right >= to {
                break;
            }
            left = right;
            k += 1;
        }
        total
    }

    /// `sup_k ||self(t_k) - other(t_k)||_1` over a shared grid.
    pub fn sup_l1_distance(&self, other: &PiecewisePath) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::GridMismatch(
                "paths are defined on different grids".into(),
            ));
        }
        if self.dim() != other.dim() {
            return Err(Error::GridMismatch("paths differ in dimension".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max))
    }

    /// `sup_t ||self(t) - other(t)||_1` evaluated on the union of both grids.
    /// Exact for two linear (or two step) paths because the distance is convex
    /// between consecutive union breakpoints.
    pub fn sup_l1_distance_union(&self, other: &PiecewisePath) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::GridMismatch("paths differ in dimension".into()));
        }
        let mut grid: Vec<f64> = self.times.iter().chain(&other.times).copied().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid
            .into_iter()
            .map(|t| {
                let (a, b) = (self.value_at(t), other.value_at(t));
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max))
    }
}
