//! Poisson tilting cost, control costs and decay rates for large total job
//! counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::MasterControl;
use crate::occupancy::PiecewisePath;

/// `l(z) = z log z - z + 1`, with `l(0) = 1`. Returns NaN for negative `z`.
///
/// Near `z = 1` the value is of order `(z - 1)^2` and the direct formula
/// cancels badly, so a short Taylor series is used for `|z - 1| < 1e-4` and
/// a `ln_1p` form on `(0.5, 2)`.
pub fn ell(z: f64) -> f64 {
    if z < 0.0 || z.is_nan() {
        return f64::NAN;
    }
    if z == 0.0 {
        return 1.0;
    }
    let u = z - 1.0;
    if u.abs() < 1e-4 {
        let u2 = u * u;
        return u2 / 2.0 - u2 * u / 6.0 + u2 * u2 / 12.0;
    }
    if (0.5..2.0).contains(&z) {
        return z * u.ln_1p() - u;
    }
    z * z.ln() - z + 1.0
}

/// Checked variant of [`ell`].
pub fn ell_checked(z: f64) -> Result<f64> {
    if z < 0.0 || z.is_nan() {
        return Err(Error::Domain(format!("l(z) undefined for z = {z}")));
    }
    Ok(ell(z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllBoundsReport {
    pub k: f64,
    /// `K / l(K)`.
    pub gamma: f64,
    /// Samples violating `x <= l(x) + 2`.
    pub additive_violations: Vec<f64>,
    /// Samples `x >= K` violating `x <= gamma * l(x)`.
    pub ratio_violations: Vec<f64>,
}

impl EllBoundsReport {
    pub fn holds(&self) -> bool {
        self.additive_violations.is_empty() && self.ratio_violations.is_empty()
    }
}

/// Relative slack allowed in the bound checks; equality cases such as
/// `x = K` must not fail on rounding.
const BOUND_SLACK: f64 = 1e-12;

/// Check the growth bounds `x <= l(x) + 2` and, for `x >= K`,
/// `x <= (K / l(K)) l(x)`. Requires `K > e^2` so that `x / l(x)` is
/// decreasing beyond `K`.
pub fn ell_bounds_check(k: f64, samples: &[f64]) -> Result<EllBoundsReport> {
    let e2 = std::f64::consts::E * std::f64::consts::E;
    if k.is_nan() || k <= e2 {
        return Err(Error::Domain(format!("K = {k} must exceed e^2")));
    }
    if let Some(x) = samples.iter().find(|x| x.is_nan() || **x < 0.0) {
        return Err(Error::Domain(format!("sample {x} is negative")));
    }
    let gamma = k / ell(k);
    let within = |lhs: f64, rhs: f64| lhs <= rhs + BOUND_SLACK * rhs.abs().max(1.0);
    let additive_violations = samples
        .iter()
        .copied()
        .filter(|&x| !within(x, ell(x) + 2.0))
        .collect();
    let ratio_violations = samples
        .iter()
        .copied()
        .filter(|&x| x >= k && !within(x, gamma * ell(x)))
        .collect();
    Ok(EllBoundsReport {
        k,
        gamma,
        additive_violations,
        ratio_violations,
    })
}

/// Weights of the cost: `lambda` on the arrival control, 1 on every service
/// control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub lambda: f64,
}

impl CostWeights {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda}")));
        }
        Ok(Self { lambda })
    }
}

/// Cost of band-constant controls along a trajectory:
/// `lambda * int l(alpha) + int zeta_1 * l(theta)`.
///
/// Service controls equal `theta(s)` on the occupied bands (which tile a set
/// of measure `zeta_1(s)`) and 1 elsewhere, where `l(1) = 0`. Integrals are
/// exact: the controls are piecewise constant and `zeta_1` is integrated
/// under the path's own interpolation rule. `zeta1` is the first coordinate
/// of `zeta`.
pub fn control_cost(
    control: &MasterControl,
    zeta: &PiecewisePath,
    weights: CostWeights,
) -> Result<f64> {
    if zeta.end_time() + 1e-12 < control.horizon() {
        return Err(Error::GridMismatch(format!(
            "trajectory ends at {} before the control horizon {}",
            zeta.end_time(),
            control.horizon()
        )));
    }
    let mut total = 0.0;
    for piece in control.pieces() {
        let len = piece.end - piece.start;
        total += weights.lambda * ell(piece.alpha) * len;
        let service = ell(piece.theta);
        if service != 0.0 {
            total += service * zeta.integrate(0, piece.start, piece.end);
        }
    }
    Ok(total)
}

/// Tilt that drives the total job count up by `epsilon` over `[0, T]` at
/// least cost: `a* b* = 1`, `a* - b* = epsilon / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalTilt {
    pub a_star: f64,
    pub b_star: f64,
    pub epsilon: f64,
    pub horizon: f64,
}

pub fn optimal_tilt(epsilon: f64, horizon: f64) -> Result<OptimalTilt> {
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need epsilon > 0 and T > 0, got {epsilon}, {horizon}"
        )));
    }
    let c = epsilon / horizon;
    let a_star = (c + (4.0 + c * c).sqrt()) / 2.0;
    Ok(OptimalTilt {
        a_star,
        b_star: 1.0 / a_star,
        epsilon,
        horizon,
    })
}

/// Decay rate `T l(a*) + T l(b*)` of the probability that the total scaled
/// job count rises by `epsilon` within `[0, T]`, for `lambda = 1` and all
/// servers initially busy.
pub fn optimal_rate(epsilon: f64, horizon: f64) -> Result<(f64, OptimalTilt)> {
    let tilt = optimal_tilt(epsilon, horizon)?;
    Ok((horizon * (ell(tilt.a_star) + ell(tilt.b_star)), tilt))
}

/// `f(c) = l(a(c)) + l(1 / a(c))` with `a(c) = (c + sqrt(c^2 + 4)) / 2`.
pub fn reduced_objective(c: f64) -> f64 {
    let a = (c + (c * c + 4.0).sqrt()) / 2.0;
    ell(a) + ell(1.0 / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceRate {
    pub rate: f64,
    /// Minimising service multiplier `b`.
    pub b: f64,
    /// Minimising drift `c = a - b`.
    pub c: f64,
}

/// Search box for [`brute_force_rate`]: `b in [0, B_MAX]`,
/// `c in [epsilon / T, epsilon / T + C_SPAN]`.
pub const B_MAX: f64 = 10.0;
pub const C_SPAN: f64 = 10.0;
const COARSE_STEP: f64 = 1e-2;
const FINE_WINDOW: f64 = 4.0 * COARSE_STEP;

/// Grid minimum of `T (l(b + c) + l(b))` over the search box.
///
/// The objective is jointly convex, so a full grid at spacing 1e-2 locates
/// the minimiser's cell and a second grid at `grid_step` covers a window of
/// four coarse cells around it. Both grids are anchored at the box corners,
/// so the boundary `c = epsilon / T` is always sampled.
pub fn brute_force_rate(epsilon: f64, horizon: f64, grid_step: f64) -> Result<BruteForceRate> {
    if [grid_step, epsilon, horizon]
        .iter()
        .any(|v| v.is_nan() || *v <= 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "need positive epsilon, T, step; got {epsilon}, {horizon}, {grid_step}"
        )));
    }
    let c_lo = epsilon / horizon;
    let objective = |b: f64, c: f64| ell(b + c) + ell(b);
    let (_, b0, c0) = grid_min(
        &objective,
        (0.0, B_MAX),
        (c_lo, c_lo + C_SPAN),
        COARSE_STEP.max(grid_step),
    );
    if grid_step >= COARSE_STEP {
        return Ok(BruteForceRate {
            rate: horizon * objective(b0, c0),
            b: b0,
            c: c0,
        });
    }
    let b_rng = ((b0 - FINE_WINDOW).max(0.0), (b0 + FINE_WINDOW).min(B_MAX));
    let c_rng = (
        (c0 - FINE_WINDOW).max(c_lo),
        (c0 + FINE_WINDOW).min(c_lo + C_SPAN),
    );
    let (v, b, c) = grid_min(&objective, b_rng, c_rng, grid_step);
    Ok(BruteForceRate {
        rate: horizon * v,
        b,
        c,
    })
}

fn grid_min(
    f: &impl Fn(f64, f64) -> f64,
    b: (f64, f64),
    c: (f64, f64),
    step: f64,
) -> (f64, f64, f64) {
    let nb = ((b.1 - b.0) / step).floor() as usize;
    let nc = ((c.1 - c.0) / step).floor() as usize;
    let mut best = (f64::INFINITY, b.0, c.0);
    for i in 0..=nb {
        let bv = b.0 + i as f64 * step;
        for j in 0..=nc {
            let cv = c.0 + j as f64 * step;
            let v = f(bv, cv);
            if v < best.0 {
                best = (v, bv, cv);
            }
        }
    }
    best
}
