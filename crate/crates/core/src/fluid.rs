//! Controlled fluid trajectories.
//!
//! With arrival control `alpha(s)` and band-constant service control
//! `theta(s)`, the free process evolves as
//!
//! ```text
//! psi_1' = lambda * alpha - theta * (zeta_1 - zeta_2)
//! psi_i' = -theta * (zeta_i - zeta_{i+1}),   i >= 2
//! ```
//!
//! and `zeta` is the chained reflection of `psi` below the barrier 1. The
//! integrator is a first-order split step: an explicit Euler increment of
//! `psi` followed by an incremental reflection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{check_l1_down, l1_norm, Interpolation, PiecewisePath};
use crate::skorokhod::ChainReflector;

/// Piecewise-constant arrival and service controls on a shared grid of
/// breakpoints `0 = s_0 < s_1 < ... < s_m`. Piece `k` covers `[s_k, s_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawControl", into = "RawControl")]
pub struct MasterControl {
    breakpoints: Vec<f64>,
    alpha: Vec<f64>,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawControl {
    breakpoints: Vec<f64>,
    alpha: Vec<f64>,
    theta: Vec<f64>,
}

impl TryFrom<RawControl> for MasterControl {
    type Error = Error;
    fn try_from(r: RawControl) -> Result<Self> {
        MasterControl::new(r.breakpoints, r.alpha, r.theta)
    }
}

impl From<MasterControl> for RawControl {
    fn from(c: MasterControl) -> Self {
        RawControl {
            breakpoints: c.breakpoints,
            alpha: c.alpha,
            theta: c.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPiece {
    pub start: f64,
    pub end: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl MasterControl {
    pub fn new(breakpoints: Vec<f64>, alpha: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2
            || alpha.len() + 1 != breakpoints.len()
            || theta.len() != alpha.len()
        {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} alpha and theta values, got {} and {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                alpha.len(),
                theta.len()
            )));
        }
        if breakpoints[0] != 0.0
            || breakpoints
                .windows(2)
                .any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan())
            || !breakpoints.iter().all(|t| t.is_finite())
        {
            return Err(Error::InvalidParameter(
                "breakpoints must start at 0 and increase strictly".into(),
            ));
        }
        for (name, vals) in [("alpha", &alpha), ("theta", &theta)] {
            if let Some(&v) = vals.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::NegativeControl { name, value: v });
            }
        }
        Ok(Self {
            breakpoints,
            alpha,
            theta,
        })
    }

    pub fn constant(alpha: f64, theta: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![alpha], vec![theta])
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("at least two breakpoints")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> impl Iterator<Item = ControlPiece> + '_ {
        self.breakpoints
            .windows(2)
            .enumerate()
            .map(|(k, w)| ControlPiece {
                start: w[0],
                end: w[1],
                alpha: self.alpha[k],
                theta: self.theta[k],
            })
    }

    /// `(alpha(t), theta(t))`, right-continuous; the last piece is held
    /// beyond the horizon.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let k = self
            .breakpoints
            .partition_point(|&s| s <= t)
            .saturating_sub(1)
            .min(self.alpha.len() - 1);
        (self.alpha[k], self.theta[k])
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().copied().fold(0.0, f64::max)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta.iter().copied().fold(0.0, f64::max)
    }
}

/// Trajectory `(zeta, psi, eta)` on a common grid. `zeta` is the reflected
/// occupancy, `psi` the free process and `eta` the cumulative reflection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSolution {
    pub zeta: PiecewisePath,
    pub psi: PiecewisePath,
    pub eta: PiecewisePath,
    pub truncation: usize,
    pub dt: f64,
}

impl FluidSolution {
    /// `||zeta(t)||_1` at every grid time.
    pub fn mass(&self) -> Vec<f64> {
        self.zeta.values().iter().map(|r| l1_norm(r)).collect()
    }
}

/// Smallest level with `x0_M = 0`, plus room for `lambda * alpha_max * T`
/// units of arrivals and a margin of two levels.
pub fn default_truncation(x0: &[f64], lambda: f64, alpha_max: f64, horizon: f64) -> usize {
    let support = x0.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1);
    support + 1 + (lambda * alpha_max * horizon).ceil() as usize + 2
}

/// `zeta_M` may not come closer than this to the barrier.
const TRUNCATION_MARGIN: f64 = 1e-9;

pub fn integrate_fluid(
    x0: &[f64],
    lambda: f64,
    control: &MasterControl,
    horizon: f64,
    dt: f64,
    truncation: Option<usize>,
) -> Result<FluidSolution> {
    check_l1_down(x0)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need T > 0 and dt > 0, got {horizon}, {dt}"
        )));
    }
    if control.horizon() < horizon * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "control ends at {} before T = {horizon}",
            control.horizon()
        )));
    }
    if control.theta_max() * dt > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} too large for theta_max = {}; need theta_max * dt <= 1",
            control.theta_max()
        )));
    }
    let support = x0.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1);
    let m =
        truncation.unwrap_or_else(|| default_truncation(x0, lambda, control.alpha_max(), horizon));
    if m == 0 || m < support {
        return Err(Error::InvalidParameter(format!(
            "truncation {m} drops initial mass at level {support}"
        )));
    }

    let times = time_grid(horizon, dt, control.breakpoints());
    let mut psi = x0.to_vec();
    psi.resize(m, 0.0);
    let mut reflector = ChainReflector::new(m);
    let mut zeta = vec![0.0; m];
    reflector.reflect(&psi, &mut zeta);
    check_truncation(&zeta, 0.0)?;

    let mut zeta_rows = Vec::with_capacity(times.len());
    let mut psi_rows = Vec::with_capacity(times.len());
    let mut eta_rows = Vec::with_capacity(times.len());
    zeta_rows.push(zeta.clone());
    psi_rows.push(psi.clone());
    eta_rows.push(reflector.eta().to_vec());

    for w in times.windows(2) {
        let h = w[1] - w[0];
        let (alpha, theta) = control.at(0.5 * (w[0] + w[1]));
        for i in 0..m {
            let above = zeta.get(i + 1).copied().unwrap_or(0.0);
            let service = theta * (zeta[i] - above) * h;
            psi[i] -= service;
        }
        psi[0] += lambda * alpha * h;
        reflector.reflect(&psi, &mut zeta);
        check_truncation(&zeta, w[1])?;
        zeta_rows.push(zeta.clone());
        psi_rows.push(psi.clone());
        eta_rows.push(reflector.eta().to_vec());
    }

    Ok(FluidSolution {
        zeta: PiecewisePath::new(times.clone(), zeta_rows, Interpolation::Linear)?,
        psi: PiecewisePath::new(times.clone(), psi_rows, Interpolation::Linear)?,
        eta: PiecewisePath::new(times, eta_rows, Interpolation::Linear)?,
        truncation: m,
        dt,
    })
}

fn check_truncation(zeta: &[f64], time: f64) -> Result<()> {
    let level = zeta.len();
    let top = zeta[level - 1];
    if top > 1.0 - TRUNCATION_MARGIN {
        return Err(Error::TruncationTooSmall {
            level,
            value: top,
            time,
        });
    }
    Ok(())
}

/// Uniform grid `k * dt` with `T` appended and control breakpoints merged in.
fn time_grid(horizon: f64, dt: f64, breakpoints: &[f64]) -> Vec<f64> {
    let tol = 1e-12 * horizon.max(1.0);
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps)
        .map(|k| k as f64 * dt)
        .filter(|&t| t < horizon - tol)
        .collect();
    grid.push(horizon);
    grid.extend(
        breakpoints
            .iter()
            .copied()
            .filter(|&t| t > tol && t < horizon - tol),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= tol);
    grid
}

/// Law-of-large-numbers trajectory: all controls equal to 1.
pub fn lln_trajectory(
    x0: &[f64],
    lambda: f64,
    horizon: f64,
    dt: f64,
    truncation: Option<usize>,
) -> Result<FluidSolution> {
    let control = MasterControl::constant(1.0, 1.0, horizon)?;
    integrate_fluid(x0, lambda, &control, horizon, dt, truncation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    /// `sup_t ||zeta^{dt} - zeta^{dt/2}||_1` over the coarse grid, per `dt`.
    pub errors: Vec<f64>,
    /// Successive error ratios `errors[k + 1] / errors[k]`.
    pub ratios: Vec<f64>,
}

/// Errors below this are treated as exact (no measurable discretisation error).
pub const EXACT_ERROR: f64 = 1e-12;

impl ConvergenceReport {
    pub fn is_exact(&self) -> bool {
        self.errors.iter().all(|&e| e <= EXACT_ERROR)
    }

    /// Every measurable ratio lies in `[lo, hi]`.
    pub fn ratios_within(&self, lo: f64, hi: f64) -> bool {
        self.errors
            .windows(2)
            .zip(&self.ratios)
            .filter(|(e, _)| e[0] > EXACT_ERROR)
            .all(|(_, r)| (lo..=hi).contains(r))
    }
}

/// Integrate at every `dt` and `dt / 2` and measure the gap between the pair.
/// For a first-order scheme the gap halves with `dt`.
pub fn wellposedness_check(
    x0: &[f64],
    lambda: f64,
    control: &MasterControl,
    horizon: f64,
    dts: &[f64],
    truncation: Option<usize>,
) -> Result<ConvergenceReport> {
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("dt list must be decreasing".into()));
    }
    let m =
        truncation.unwrap_or_else(|| default_truncation(x0, lambda, control.alpha_max(), horizon));
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let coarse = integrate_fluid(x0, lambda, control, horizon, dt, Some(m))?;
        let fine = integrate_fluid(x0, lambda, control, horizon, dt / 2.0, Some(m))?;
        let err = coarse
            .zeta
            .times()
            .iter()
            .zip(coarse.zeta.values())
            .map(|(&t, row)| {
                l1_norm(
                    &row.iter()
                        .zip(fine.zeta.value_at(t))
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                )
            })
            .fold(0.0, f64::max);
        errors.push(err);
    }
    let ratios = errors.windows(2).map(|e| e[1] / e[0]).collect();
    Ok(ConvergenceReport {
        dts: dts.to_vec(),
        errors,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratefn::optimal_tilt;
    use proptest::prelude::*;

    #[test]
    fn control_validation() {
        assert!(matches!(
            MasterControl::constant(-1.0, 1.0, 1.0),
            Err(Error::NegativeControl { name: "alpha", .. })
        ));
        assert!(MasterControl::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(MasterControl::new(vec![0.1, 1.0], vec![1.0], vec![1.0]).is_err());
        let c = MasterControl::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(c.at(0.0), (1.0, 3.0));
        assert_eq!(c.at(0.5), (2.0, 4.0));
        assert_eq!(c.at(5.0), (2.0, 4.0));
    }

    #[test]
    fn grid_includes_breakpoints_and_horizon() {
        let g = time_grid(1.0, 0.3, &[0.0, 0.5, 1.0]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.contains(&0.5));
    }

    #[test]
    fn lln_fixed_point_at_lambda_one() {
        let sol = lln_trajectory(&[1.0], 1.0, 1.0, 1e-3, None).unwrap();
        let x0 = [1.0];
        for row in sol.zeta.values() {
            let dist: f64 = row
                .iter()
                .zip(x0.iter().chain(std::iter::repeat(&0.0)))
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(dist <= 1e-8);
        }
    }

    #[test]
    fn lln_relaxes_to_lambda() {
        let dt = 1e-4;
        let sol = lln_trajectory(&[1.0], 0.5, 2.0, dt, None).unwrap();
        for (t, row) in sol.zeta.times().iter().zip(sol.zeta.values()) {
            // scalar ODE zeta_1' = 0.5 - zeta_1 from zeta_1(0) = 1
            let exact = 0.5 + 0.5 * (-t).exp();
            assert!(
                (row[0] - exact).abs() < 1e-4,
                "t = {t}: {} vs {exact}",
                row[0]
            );
            assert!(row[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn lln_two_full_levels_against_refined_grid() {
        let a = lln_trajectory(&[1.0, 1.0], 1.0, 1.0, 1e-3, None).unwrap();
        let b = lln_trajectory(&[1.0, 1.0], 1.0, 1.0, 1e-4, None).unwrap();
        for (t, row) in a.zeta.times().iter().zip(a.zeta.values()) {
            let diff: f64 = row
                .iter()
                .zip(b.zeta.value_at(*t))
                .map(|(x, y)| (x - y).abs())
                .sum();
            assert!(diff <= 1e-5, "t = {t}: {diff}");
        }
    }

    #[test]
    fn frozen_without_flow() {
        let x0 = [0.8, 0.5, 0.2];
        let ctrl = MasterControl::constant(0.0, 0.0, 1.0).unwrap();
        let sol = integrate_fluid(&x0, 1.0, &ctrl, 1.0, 1e-2, None).unwrap();
        for row in sol.zeta.values() {
            assert_eq!(&row[..3], &x0);
        }
    }

    #[test]
    fn optimal_trajectory_reaches_target() {
        let tilt = optimal_tilt(1.0, 1.0).unwrap();
        let ctrl = MasterControl::constant(tilt.a_star, tilt.b_star, 1.0).unwrap();
        let sol = integrate_fluid(&[1.0], 1.0, &ctrl, 1.0, 1e-4, None).unwrap();
        assert!(sol
            .zeta
            .values()
            .iter()
            .all(|r| (r[0] - 1.0).abs() <= 1e-10));
        let mass = *sol.mass().last().unwrap();
        assert!((mass - 2.0).abs() <= 1e-4, "mass {mass}");
    }

    #[test]
    fn truncation_too_small_is_reported() {
        let ctrl = MasterControl::constant(3.0, 0.5, 1.0).unwrap();
        let err = integrate_fluid(&[1.0], 1.0, &ctrl, 1.0, 1e-3, Some(2)).unwrap_err();
        assert!(
            matches!(err, Error::TruncationTooSmall { level: 2, .. }),
            "{err}"
        );
        assert!(integrate_fluid(&[1.0, 0.5, 0.2], 1.0, &ctrl, 1.0, 1e-3, Some(2)).is_err());
    }

    #[test]
    fn first_order_convergence_smooth() {
        let ctrl = MasterControl::constant(1.0, 1.0, 1.0).unwrap();
        let rep = wellposedness_check(
            &[1.0],
            0.5,
            &ctrl,
            1.0,
            &[1e-2, 5e-3, 2.5e-3, 1.25e-3],
            None,
        )
        .unwrap();
        assert!(!rep.is_exact());
        assert!(rep.ratios_within(0.4, 0.6), "{rep:?}");
    }

    #[test]
    fn pinned_trajectory_is_exact() {
        let tilt = optimal_tilt(1.0, 1.0).unwrap();
        let ctrl = MasterControl::constant(tilt.a_star, tilt.b_star, 1.0).unwrap();
        // zeta_1 pinned at 1 and zeta_2 linear until it reaches the barrier
        let rep = wellposedness_check(&[1.0], 1.0, &ctrl, 0.5, &[1e-2, 5e-3], None).unwrap();
        assert!(rep.errors.iter().all(|&e| e < 1e-10), "{rep:?}");
    }

    #[test]
    fn discontinuous_control_keeps_first_order() {
        let ctrl = MasterControl::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0], vec![1.0, 0.5]).unwrap();
        let rep =
            wellposedness_check(&[0.9, 0.3], 0.6, &ctrl, 1.0, &[1e-2, 5e-3, 2.5e-3], None).unwrap();
        assert!(rep.ratios_within(0.4, 0.6), "{rep:?}");
    }

    #[test]
    fn integration_is_deterministic() {
        let ctrl = MasterControl::new(vec![0.0, 0.3, 1.0], vec![1.3, 0.7], vec![0.8, 1.2]).unwrap();
        let a = integrate_fluid(&[1.0, 0.4], 1.0, &ctrl, 1.0, 1e-3, None).unwrap();
        let b = integrate_fluid(&[1.0, 0.4], 1.0, &ctrl, 1.0, 1e-3, None).unwrap();
        assert_eq!(a, b);
    }

    fn arb_x0() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 1..5).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold(x0 in arb_x0(), lambda in 0.1f64..2.0, a1 in 0.0f64..3.0, a2 in 0.0f64..3.0,
                           t1 in 0.0f64..3.0, t2 in 0.0f64..3.0, cut in 0.1f64..0.9) {
            let ctrl = MasterControl::new(vec![0.0, cut, 1.0], vec![a1, a2], vec![t1, t2]).unwrap();
            let dt = 1e-3;
            let sol = integrate_fluid(&x0, lambda, &ctrl, 1.0, dt, None).unwrap();
            // monotone in level
            for row in sol.zeta.values() {
                prop_assert!(row.windows(2).all(|w| w[0] >= w[1] - 1e-12));
                prop_assert!(row.iter().all(|&v| v <= 1.0 + 1e-12));
            }
            // mass balance of the free process
            let times = sol.psi.times();
            let mut expected: f64 = sol.psi.row(0).iter().sum();
            for k in 0..times.len() - 1 {
                let h = times[k + 1] - times[k];
                let (alpha, theta) = ctrl.at(0.5 * (times[k] + times[k + 1]));
                expected += (lambda * alpha - theta * sol.zeta.row(k)[0]) * h;
            }
            let got: f64 = sol.psi.row(times.len() - 1).iter().sum();
            prop_assert!((got - expected).abs() <= 1e-10);
            // eta non-decreasing
            for k in 1..times.len() {
                prop_assert!(sol.eta.row(k).iter().zip(sol.eta.row(k - 1)).all(|(a, b)| a >= b));
            }
        }
    }
}
