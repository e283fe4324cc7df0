//! Chained one-sided Skorokhod problem with upper barrier 1.
//!
//! Given `psi` with `psi_i(0) <= 1`, find `(phi, eta)` such that
//! `phi_1 = psi_1 - eta_1`, `phi_i = psi_i + eta_{i-1} - eta_i` for `i >= 2`,
//! `phi_i <= 1`, every `eta_i` starts at 0 and is non-decreasing, and
//! `eta_i` only increases while `phi_i = 1`.
//!
//! The reflection matrix is lower bidiagonal, so the coordinates are solved
//! in order with the one-dimensional formula
//! `eta_i(t) = sup_{s <= t} (psi_i(s) + eta_{i-1}(s) - 1)^+`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::occupancy::{Interpolation, PiecewisePath};

/// A path to be reflected. Every coordinate must start at or below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorokhodInput {
    psi: PiecewisePath,
}

impl SkorokhodInput {
    pub fn new(psi: PiecewisePath) -> Result<Self> {
        if let Some((i, &v)) = psi.row(0).iter().enumerate().find(|(_, &v)| v > 1.0) {
            return Err(Error::InitialAboveBarrier {
                coord: i + 1,
                value: v,
            });
        }
        Ok(Self { psi })
    }

    pub fn psi(&self) -> &PiecewisePath {
        &self.psi
    }

    pub fn into_path(self) -> PiecewisePath {
        self.psi
    }
}

/// Output of [`solve_skorokhod`]. For linear inputs the grid may be finer than
/// the input grid (barrier crossings are inserted); `psi` is the input
/// re-sampled on that grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorokhodSolution {
    pub psi: PiecewisePath,
    pub phi: PiecewisePath,
    pub eta: PiecewisePath,
}

pub fn solve_skorokhod(input: &SkorokhodInput) -> Result<SkorokhodSolution> {
    let psi = input.psi();
    let interp = psi.interpolation();
    let m = psi.dim();
    let mut times = psi.times().to_vec();
    let mut psi_cols = psi.columns();
    let mut eta_cols: Vec<Vec<f64>> = Vec::with_capacity(m);

    for i in 0..m {
        let mut z = chain_input(&psi_cols[i], eta_cols.last());
        if interp == Interpolation::Linear {
            let inserts = barrier_crossings(&times, &z);
            if !inserts.is_empty() {
                times = refine(&times, &inserts);
                for col in psi_cols.iter_mut().chain(eta_cols.iter_mut()) {
                    *col = refine(col, &inserts);
                }
                z = chain_input(&psi_cols[i], eta_cols.last());
            }
        }
        let mut eta = Vec::with_capacity(z.len());
        let mut running = 0.0f64;
        for &zk in &z {
            running = running.max(zk - 1.0);
            eta.push(running);
        }
        eta_cols.push(eta);
    }

    let phi_cols: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let z = chain_input(
                &psi_cols[i],
                if i == 0 { None } else { Some(&eta_cols[i - 1]) },
            );
            z.iter().zip(&eta_cols[i]).map(|(zk, ek)| zk - ek).collect()
        })
        .collect();

    Ok(SkorokhodSolution {
        psi: PiecewisePath::from_columns(times.clone(), &psi_cols, interp)?,
        phi: PiecewisePath::from_columns(times.clone(), &phi_cols, interp)?,
        eta: PiecewisePath::from_columns(times, &eta_cols, interp)?,
    })
}

/// `z_i = psi_i + eta_{i-1}`, with `eta_0 = 0`.
fn chain_input(psi: &[f64], eta_below: Option<&Vec<f64>>) -> Vec<f64> {
    match eta_below {
        None => psi.to_vec(),
        Some(e) => psi.iter().zip(e).map(|(p, e)| p + e).collect(),
    }
}

/// Points `(segment, fraction)` where the linear interpolant of `z` crosses
/// its running level `max(1, max_{s <= t} z(s))` from below.
fn barrier_crossings(times: &[f64], z: &[f64]) -> Vec<(usize, f64)> {
    let mut level = z[0].max(1.0);
    let mut out = Vec::new();
    for k in 0..z.len() - 1 {
        let (z0, z1) = (z[k], z[k + 1]);
        if z0 < level && z1 > level {
            let f = (level - z0) / (z1 - z0);
            let s = times[k] + f * (times[k + 1] - times[k]);
            if s > times[k] && s < times[k + 1] {
                out.push((k, f));
            }
        }
        level = level.max(z1);
    }
    out
}

fn refine(col: &[f64], inserts: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(col.len() + inserts.len());
    let mut next = inserts.iter().peekable();
    for k in 0..col.len() {
        out.push(col[k]);
        if let Some(&&(seg, f)) = next.peek() {
            if seg == k {
                out.push(col[k] + f * (col[k + 1] - col[k]));
                next.next();
            }
        }
    }
    out
}

/// `sum_i sum_k (1 - phi_i(t_k)) * (eta_i(t_{k+1}) - eta_i(t_k))`, a left-point
/// discretisation of the complementarity integral.
pub fn complementarity_residual(sol: &SkorokhodSolution) -> f64 {
    let (phi, eta) = (sol.phi.values(), sol.eta.values());
    let mut total = 0.0;
    for k in 0..phi.len().saturating_sub(1) {
        for i in 0..sol.phi.dim() {
            total += (1.0 - phi[k][i]).abs() * (eta[k + 1][i] - eta[k][i]);
        }
    }
    total
}

/// `(sup_t ||psi_a - psi_b||_1, sup_t ||phi_a - phi_b||_1)`.
///
/// The ratio is an empirical lower bound on the Lipschitz constant of the
/// reflection map; no constant is certified.
pub fn lipschitz_gap(a: &SkorokhodInput, b: &SkorokhodInput) -> Result<(f64, f64)> {
    if a.psi().interpolation() != b.psi().interpolation() {
        return Err(Error::GridMismatch(
            "inputs use different interpolation".into(),
        ));
    }
    let gap_in = a.psi().sup_l1_distance(b.psi())?;
    let (sa, sb) = (solve_skorokhod(a)?, solve_skorokhod(b)?);
    let gap_out = sa.phi.sup_l1_distance_union(&sb.phi)?;
    Ok((gap_in, gap_out))
}

/// Incremental reflection for time-stepping schemes: each call advances the
/// running suprema by one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReflector {
    eta: Vec<f64>,
}

impl ChainReflector {
    pub fn new(m: usize) -> Self {
        Self { eta: vec![0.0; m] }
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Reflect the free-process value `psi` at the next grid time and write
    /// the constrained value into `zeta`.
    pub fn reflect(&mut self, psi: &[f64], zeta: &mut [f64]) {
        let mut below = 0.0;
        for ((p, e), out) in psi.iter().zip(self.eta.iter_mut()).zip(zeta.iter_mut()) {
            let z = p + below;
            *e = e.max(z - 1.0);
            *out = z - *e;
            below = *e;
        }
    }
}

/// Random piecewise-linear input with `segments` pieces on `[0, 1]`; used by
/// property checks and the self-test runner. Coordinates start in `[0, 1]`
/// and move with slopes in `[-3, 3]`.
pub fn random_input<R: Rng>(rng: &mut R, m: usize, segments: usize) -> SkorokhodInput {
    let mut cuts: Vec<f64> = (0..segments.saturating_sub(1))
        .map(|_| rng.gen::<f64>())
        .collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut values = Vec::with_capacity(cuts.len());
    let mut current: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    values.push(current.clone());
    for w in cuts.windows(2) {
        let dt = w[1] - w[0];
        for v in current.iter_mut() {
            *v += rng.gen_range(-3.0..3.0) * dt;
        }
        values.push(current.clone());
    }
    let psi = PiecewisePath::new(cuts, values, Interpolation::Linear).expect("valid grid");
    SkorokhodInput::new(psi).expect("starts below barrier")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(times: &[f64], rows: Vec<Vec<f64>>) -> SkorokhodInput {
        SkorokhodInput::new(
            PiecewisePath::new(times.to_vec(), rows, Interpolation::Linear).unwrap(),
        )
        .unwrap()
    }

    /// One-dimensional sup formula evaluated on a dense sample.
    fn sup_formula(psi: impl Fn(f64) -> f64, t: f64) -> f64 {
        let steps = 10_000;
        (0..=steps)
            .map(|k| psi(t * k as f64 / steps as f64) - 1.0)
            .fold(0.0, f64::max)
    }

    #[test]
    fn starts_on_barrier() {
        let sol = solve_skorokhod(&linear(&[0.0, 1.0], vec![vec![1.0], vec![2.0]])).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!((sol.eta.value_at(t)[0] - t).abs() < 1e-15);
            assert!((sol.phi.value_at(t)[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_crossing_matches_sup_formula() {
        let sol = solve_skorokhod(&linear(&[0.0, 1.0], vec![vec![0.5], vec![1.5]])).unwrap();
        assert_eq!(sol.phi.times(), &[0.0, 0.5, 1.0]);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let oracle = sup_formula(|s| 0.5 + s, t);
            assert!((sol.eta.value_at(t)[0] - oracle).abs() < 1e-12, "t = {t}");
            assert!((sol.phi.value_at(t)[0] - (0.5 + t).min(1.0)).abs() < 1e-12);
        }
        assert!(complementarity_residual(&sol) < 1e-15);
    }

    #[test]
    fn two_dimensional_chain() {
        let sol =
            solve_skorokhod(&linear(&[0.0, 1.0], vec![vec![1.0, 0.9], vec![2.0, 0.9]])).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let eta2 = sup_formula(|s| 0.9 + s, t);
            let (eta, phi) = (sol.eta.value_at(t), sol.phi.value_at(t));
            assert!((eta[0] - t).abs() < 1e-12);
            assert!((phi[0] - 1.0).abs() < 1e-12);
            assert!((eta[1] - eta2).abs() < 1e-12, "t = {t}");
            assert!((eta2 - (t - 0.1).max(0.0)).abs() < 1e-12);
            assert!((phi[1] - (0.9 + t).min(1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_initial_above_barrier() {
        let p = PiecewisePath::new(vec![0.0], vec![vec![0.2, 1.5]], Interpolation::Step).unwrap();
        assert!(matches!(
            SkorokhodInput::new(p),
            Err(Error::InitialAboveBarrier { coord: 2, .. })
        ));
    }

    #[test]
    fn residual_examples() {
        let quiet = solve_skorokhod(&linear(&[0.0, 1.0], vec![vec![0.1], vec![0.3]])).unwrap();
        assert_eq!(complementarity_residual(&quiet), 0.0);

        let mut bad = quiet.clone();
        // push eta up by 0.1 at t = 1 while phi(0) = 0.1 < 1
        let mut rows = bad.eta.values().to_vec();
        rows[1][0] += 0.1;
        bad.eta =
            PiecewisePath::new(bad.eta.times().to_vec(), rows, Interpolation::Linear).unwrap();
        assert!(complementarity_residual(&bad) >= 0.1 * (1.0 - 0.1) - 1e-15);
    }

    #[test]
    fn step_residual_bounded_by_grid() {
        let k = 100;
        let times: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        let rows = times.iter().map(|t| vec![0.5 + t]).collect();
        let input =
            SkorokhodInput::new(PiecewisePath::new(times, rows, Interpolation::Step).unwrap())
                .unwrap();
        let sol = solve_skorokhod(&input).unwrap();
        assert!(complementarity_residual(&sol) <= 1.0 / k as f64);
    }

    #[test]
    fn lipschitz_examples() {
        let a = linear(&[0.0, 1.0], vec![vec![0.5], vec![1.5]]);
        let b = linear(&[0.0, 1.0], vec![vec![0.6], vec![1.6]]);
        assert_eq!(lipschitz_gap(&a, &a).unwrap(), (0.0, 0.0));
        let (gin, gout) = lipschitz_gap(&a, &b).unwrap();
        assert!((gin - 0.1).abs() < 1e-12);
        assert!((gout - 0.1).abs() <= 1e-12);

        let c = linear(&[0.0, 0.5, 1.0], vec![vec![0.5], vec![1.0], vec![1.5]]);
        assert!(lipschitz_gap(&a, &c).is_err());
    }

    #[test]
    fn empirical_lipschitz_ratio_m5() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let a = random_input(&mut rng, 5, 6);
            let rows: Vec<Vec<f64>> = a
                .psi()
                .values()
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|v| (v - rng.gen_range(0.0..0.2)).min(1.0))
                        .collect()
                })
                .collect();
            let b = SkorokhodInput::new(
                PiecewisePath::new(a.psi().times().to_vec(), rows, Interpolation::Linear).unwrap(),
            )
            .unwrap();
            let (gin, gout) = lipschitz_gap(&a, &b).unwrap();
            if gin > 0.0 {
                worst = worst.max(gout / gin);
            }
        }
        // |d eta_i| <= sum_{j <= i} sup|d psi_j| <= M * gap_in, so the l1 gap of
        // phi is at most M * (2M + 1) * gap_in.
        assert!(worst.is_finite() && worst <= 55.0, "worst ratio {worst}");
        eprintln!("max observed l1 Lipschitz ratio (M = 5): {worst:.4}");
    }

    #[test]
    fn incremental_reflector_matches_step_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 4;
        let k = 200;
        let times: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        let mut cur: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let mut rows = Vec::new();
        for _ in 0..=k {
            rows.push(cur.clone());
            for v in cur.iter_mut() {
                *v += rng.gen_range(-0.02..0.03);
            }
        }
        let input = SkorokhodInput::new(
            PiecewisePath::new(times, rows.clone(), Interpolation::Step).unwrap(),
        )
        .unwrap();
        let sol = solve_skorokhod(&input).unwrap();
        let mut refl = ChainReflector::new(m);
        let mut zeta = vec![0.0; m];
        for (row, expected) in rows.iter().zip(sol.phi.values()) {
            refl.reflect(row, &mut zeta);
            assert_eq!(&zeta, expected);
        }
        assert_eq!(refl.eta(), sol.eta.values().last().unwrap().as_slice());
    }
}
