use jsqd_core::fluid::wellposedness_check;
use jsqd_core::skorokhod::random_input;
use jsqd_core::{
    brute_force_rate, complementarity_residual, control_cost, estimate_probability,
    integrate_fluid, lipschitz_gap, lln_trajectory, optimal_rate, remark_bound, replica_rng,
    simulate_with, solve_skorokhod, BetaTable, CostWeights, Estimate, InitialOccupancy,
    Interpolation, MasterControl, PiecewisePath, RareEvent, RareEventKind, RemarkBound,
    SkorokhodInput, SystemParams, TiltSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};

/// One grid point: its parameters and either a result or the error that
/// stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point<P, R> {
    pub index: usize,
    pub params: P,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<R>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<P, R> Point<P, R> {
    fn new(index: usize, params: P, outcome: Result<R, String>) -> Self {
        match outcome {
            Ok(r) => Self {
                index,
                params,
                result: Some(r),
                error: None,
            },
            Err(e) => Self {
                index,
                params,
                result: None,
                error: Some(e),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnParams {
    pub n: u64,
    pub d: u64,
    pub d_schedule: String,
    pub lambda: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnResult {
    /// `sup_t ||X^n(t) - zeta(t)||_1` over the reporting grid, per replica.
    pub sup_distances: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    pub p95: f64,
    pub max: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub epsilon: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub a_star: f64,
    pub b_star: f64,
    pub rate: f64,
    pub brute_force_rate: f64,
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub n: u64,
    pub d: u64,
    pub d_schedule: String,
    pub lambda: f64,
    pub horizon: f64,
    pub event: RareEvent,
    pub tilt: TiltSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayResult {
    #[serde(flatten)]
    pub estimate: Estimate,
    /// Absent when no replica hit.
    pub relative_error: Option<f64>,
    pub neg_log_rate_std_err: Option<f64>,
    /// Limiting decay rate, when the grid point is in the regime where it
    /// is known in closed form.
    pub target_rate: Option<f64>,
}

/// Least-squares slope of `ln p_hat` against `n` over one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub d_schedule: String,
    pub event: RareEvent,
    pub lambda: f64,
    pub horizon: f64,
    pub ns: Vec<u64>,
    pub slope: Option<f64>,
    pub target_rate: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodParams {
    pub m: usize,
    pub cases: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodResult {
    pub max_residual: f64,
    pub max_refinement_gap: f64,
    pub identity_mismatches: u64,
    /// Largest observed `sup|phi - phi'| / sup|psi - psi'|` over perturbed pairs.
    pub max_lipschitz_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub epsilon: f64,
    pub horizon: f64,
    pub initial: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidResult {
    pub a_star: f64,
    pub b_star: f64,
    pub truncation: usize,
    pub mass_at_horizon: f64,
    pub target_mass: f64,
    pub max_first_level_gap: f64,
    pub cost: f64,
    pub rate: f64,
    pub convergence_dts: Vec<f64>,
    pub convergence_errors: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkParams {
    pub n: u64,
    pub d: u64,
    pub d_schedule: String,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkResult {
    pub bound: RemarkBound,
    /// Bound normalised by `d |ln(d / n)|` instead of `n`; absent for `d = n`.
    pub finer_scale_rate: Option<f64>,
    pub monte_carlo: Option<Estimate>,
    /// `p_hat + 3 std_err >= exp(log_lower_bound)`.
    pub consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Results {
    Lln {
        points: Vec<Point<LlnParams, LlnResult>>,
    },
    RateTable {
        points: Vec<Point<RateParams, RateResult>>,
    },
    RareDecay {
        points: Vec<Point<DecayParams, DecayResult>>,
        regressions: Vec<Regression>,
    },
    SkorokhodSelftest {
        points: Vec<Point<SkorokhodParams, SkorokhodResult>>,
    },
    FluidSelftest {
        points: Vec<Point<FluidParams, FluidResult>>,
    },
    RemarkBound {
        points: Vec<Point<RemarkParams, RemarkResult>>,
    },
}

impl Results {
    /// Grid points that errored or missed a threshold.
    pub fn failures(&self) -> usize {
        fn count<P, R>(points: &[Point<P, R>], pass: impl Fn(&R) -> bool) -> usize {
            points
                .iter()
                .filter(|p| p.result.as_ref().is_none_or(|r| !pass(r)))
                .count()
        }
        match self {
            Results::Lln { points } => count(points, |r| r.pass),
            Results::RateTable { points } => count(points, |r| r.pass),
            Results::RareDecay {
                points,
                regressions,
            } => {
                count(points, |_| true)
                    + regressions.iter().filter(|r| r.pass == Some(false)).count()
            }
            Results::SkorokhodSelftest { points } => count(points, |r| r.pass),
            Results::FluidSelftest { points } => count(points, |r| r.pass),
            Results::RemarkBound { points } => count(points, |r| r.consistent != Some(false)),
        }
    }
}

/// Base seed of grid point `index`; replica `r` then uses stream `r`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

pub fn run(cfg: &ExperimentConfig) -> Results {
    match cfg.kind {
        ExperimentKind::Lln => lln(cfg),
        ExperimentKind::RateTable => rate_table(cfg),
        ExperimentKind::RareDecay => rare_decay(cfg),
        ExperimentKind::SkorokhodSelftest => skorokhod_selftest(cfg),
        ExperimentKind::FluidSelftest => fluid_selftest(cfg),
        ExperimentKind::RemarkBound => remark(cfg),
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn lln(cfg: &ExperimentConfig) -> Results {
    let g = &cfg.grid;
    let mut params = Vec::new();
    for &n in &g.n {
        for sched in &g.d_schedule {
            for &lambda in &g.lambda {
                for &horizon in &g.horizon {
                    params.push(LlnParams {
                        n,
                        d: sched.resolve(n),
                        d_schedule: sched.label(),
                        lambda,
                        horizon,
                    });
                }
            }
        }
    }
    let points = params
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let outcome = lln_point(cfg, &p, point_seed(cfg.seed, index));
            Point::new(index, p, outcome)
        })
        .collect();
    Results::Lln { points }
}

fn lln_point(cfg: &ExperimentConfig, p: &LlnParams, seed: u64) -> Result<LlnResult, String> {
    let initial = InitialOccupancy::from_limit(p.n, &cfg.initial).map_err(err)?;
    let params = SystemParams::new(p.n, p.d, p.lambda, p.horizon, initial).map_err(err)?;
    let fluid =
        lln_trajectory(&cfg.initial, p.lambda, p.horizon, cfg.fluid_dt, None).map_err(err)?;
    let beta = BetaTable::new(p.n, p.d).map_err(err)?;
    let sup_distances = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let res = simulate_with(
                &params,
                &beta,
                TiltSpec::UNTILTED,
                None,
                replica_rng(seed, r),
                Some(cfg.report_dt),
            )
            .map_err(err)?;
            let path = res.path.ok_or("simulator returned no path")?;
            Ok(sup_distance(&path, &fluid.zeta))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let mut sorted = sup_distances.clone();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / count;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let p95 = percentile(&sorted, 0.95);
    Ok(LlnResult {
        sup_distances,
        mean,
        std_err: (var / count).sqrt(),
        p95,
        max: *sorted.last().unwrap(),
        pass: p95 <= cfg.tolerances.lln_p95,
    })
}

fn sup_distance(path: &PiecewisePath, fluid: &PiecewisePath) -> f64 {
    path.times()
        .iter()
        .zip(path.values())
        .map(|(&t, row)| {
            let z = fluid.value_at(t);
            (0..row.len().max(z.len()))
                .map(|i| (row.get(i).unwrap_or(&0.0) - z.get(i).unwrap_or(&0.0)).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn rate_table(cfg: &ExperimentConfig) -> Results {
    let mut params = Vec::new();
    for &epsilon in &cfg.grid.epsilon {
        for &horizon in &cfg.grid.horizon {
            params.push(RateParams { epsilon, horizon });
        }
    }
    let tol = &cfg.tolerances;
    let points = params
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let outcome = (|| {
                let (rate, tilt) = optimal_rate(p.epsilon, p.horizon).map_err(err)?;
                let brute =
                    brute_force_rate(p.epsilon, p.horizon, tol.brute_force_step).map_err(err)?;
                let gap = (rate - brute.rate).abs();
                Ok(RateResult {
                    a_star: tilt.a_star,
                    b_star: tilt.b_star,
                    rate,
                    brute_force_rate: brute.rate,
                    gap,
                    pass: gap <= tol.rate_gap * p.horizon,
                })
            })();
            Point::new(index, p, outcome)
        })
        .collect();
    Results::RateTable { points }
}

/// Job-count excess that an event forces: `epsilon` itself, or `j - 2` for
/// the queue-length events (a queue of length `j` under full join-shortest
/// routing needs `n (j - 2)` extra jobs on top of one per server).
fn event_excess(event: &RareEvent) -> f64 {
    match event.kind {
        RareEventKind::GEps | RareEventKind::FEps => event.threshold,
        RareEventKind::UJ | RareEventKind::VJ => event.threshold - 2.0,
    }
}

fn rare_decay(cfg: &ExperimentConfig) -> Results {
    let g = &cfg.grid;
    let lambdas = if g.lambda.is_empty() {
        vec![1.0]
    } else {
        g.lambda.clone()
    };
    let mut events = Vec::new();
    for &eps in &g.epsilon {
        events.push(RareEvent::new(cfg.epsilon_event, eps));
    }
    for &j in &g.j {
        events.push(RareEvent::new(cfg.j_event, j as f64));
    }
    // series-major order so that each regression reads a contiguous block
    let mut params = Vec::new();
    let mut series = Vec::new();
    for sched in &g.d_schedule {
        for event in &events {
            for &lambda in &lambdas {
                for &horizon in &g.horizon {
                    let start = params.len();
                    for &n in &g.n {
                        let (event, tilt) = match event {
                            Ok(e) => {
                                let tilt = match cfg.tilt {
                                    Some(t) => t,
                                    None => optimal_rate(event_excess(e), horizon)
                                        .map(|(_, t)| TiltSpec {
                                            a: t.a_star,
                                            b: t.b_star,
                                        })
                                        .unwrap_or(TiltSpec::UNTILTED),
                                };
                                (*e, tilt)
                            }
                            Err(_) => (
                                RareEvent {
                                    kind: cfg.epsilon_event,
                                    threshold: f64::NAN,
                                },
                                TiltSpec::UNTILTED,
                            ),
                        };
                        params.push((
                            DecayParams {
                                n,
                                d: sched.resolve(n),
                                d_schedule: sched.label(),
                                lambda,
                                horizon,
                                event,
                                tilt,
                            },
                            event.threshold.is_nan(),
                        ));
                    }
                    series.push(start..params.len());
                }
            }
        }
    }
    let regime = cfg.initial == [1.0];
    let points: Vec<Point<DecayParams, DecayResult>> = params
        .into_par_iter()
        .enumerate()
        .map(|(index, (p, bad_event))| {
            let outcome = if bad_event {
                Err("invalid event threshold".to_string())
            } else {
                decay_point(cfg, &p, point_seed(cfg.seed, index), regime)
            };
            Point::new(index, p, outcome)
        })
        .collect();
    let regressions = series
        .into_iter()
        .map(|range| {
            let block = &points[range];
            let first = &block[0].params;
            let fitted: Vec<(f64, f64)> = block
                .iter()
                .filter_map(|p| {
                    p.result
                        .as_ref()
                        .filter(|r| r.estimate.p_hat > 0.0)
                        .map(|r| (p.params.n as f64, r.estimate.p_hat.ln()))
                })
                .collect();
            let slope = slope(&fitted);
            let target_rate = block
                .iter()
                .find_map(|p| p.result.as_ref().and_then(|r| r.target_rate));
            let pass = match (slope, target_rate) {
                (Some(s), Some(t)) => Some((s + t).abs() <= cfg.tolerances.slope_rel * t),
                _ => None,
            };
            Regression {
                d_schedule: first.d_schedule.clone(),
                event: first.event,
                lambda: first.lambda,
                horizon: first.horizon,
                ns: block.iter().map(|p| p.params.n).collect(),
                slope,
                target_rate,
                pass,
            }
        })
        .collect();
    Results::RareDecay {
        points,
        regressions,
    }
}

fn decay_point(
    cfg: &ExperimentConfig,
    p: &DecayParams,
    seed: u64,
    regime: bool,
) -> Result<DecayResult, String> {
    let initial = InitialOccupancy::from_limit(p.n, &cfg.initial).map_err(err)?;
    let params = SystemParams::new(p.n, p.d, p.lambda, p.horizon, initial).map_err(err)?;
    let estimate =
        estimate_probability(&params, &p.event, p.tilt, cfg.replications, seed).map_err(err)?;
    // the closed form covers the large-total events from a fully busy
    // critical system, and the long-queue events only when d = n
    let covered = match p.event.kind {
        RareEventKind::GEps | RareEventKind::FEps => true,
        RareEventKind::UJ | RareEventKind::VJ => p.d == p.n,
    };
    let target_rate = if regime && p.lambda == 1.0 && covered {
        optimal_rate(event_excess(&p.event), p.horizon)
            .ok()
            .map(|(r, _)| r)
    } else {
        None
    };
    Ok(DecayResult {
        relative_error: Some(estimate.relative_error()).filter(|v| v.is_finite()),
        neg_log_rate_std_err: Some(estimate.neg_log_rate_std_err(p.n)).filter(|v| v.is_finite()),
        estimate,
        target_rate,
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn refine(input: &SkorokhodInput) -> Result<SkorokhodInput, String> {
    let psi = input.psi();
    let mut times = Vec::with_capacity(2 * psi.len());
    for w in psi.times().windows(2) {
        times.push(w[0]);
        times.push(0.5 * (w[0] + w[1]));
    }
    times.push(psi.end_time());
    let values = times.iter().map(|&t| psi.value_at(t)).collect();
    SkorokhodInput::new(PiecewisePath::new(times, values, Interpolation::Linear).map_err(err)?)
        .map_err(err)
}

fn perturb(input: &SkorokhodInput, rng: &mut ChaCha8Rng) -> Result<SkorokhodInput, String> {
    let psi = input.psi();
    let scale = rng.gen_range(1e-3..1e-1);
    let values = psi
        .values()
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .map(|&v| {
                    let w = v + scale * rng.gen_range(-1.0..1.0);
                    if k == 0 {
                        w.min(1.0)
                    } else {
                        w
                    }
                })
                .collect()
        })
        .collect();
    SkorokhodInput::new(
        PiecewisePath::new(psi.times().to_vec(), values, Interpolation::Linear).map_err(err)?,
    )
    .map_err(err)
}

fn skorokhod_selftest(cfg: &ExperimentConfig) -> Results {
    let tol = &cfg.tolerances;
    let points = cfg
        .grid
        .m
        .par_iter()
        .enumerate()
        .map(|(index, &m)| {
            let p = SkorokhodParams {
                m,
                cases: cfg.cases,
                segments: cfg.segments,
            };
            let outcome = (|| {
                let mut rng = ChaCha8Rng::seed_from_u64(point_seed(cfg.seed, index));
                let mut out = SkorokhodResult {
                    max_residual: 0.0,
                    max_refinement_gap: 0.0,
                    identity_mismatches: 0,
                    max_lipschitz_ratio: 0.0,
                    pass: false,
                };
                for _ in 0..cfg.cases {
                    let segments = rng.gen_range(1..=cfg.segments);
                    let input = random_input(&mut rng, m, segments);
                    let sol = solve_skorokhod(&input).map_err(err)?;
                    out.max_residual = out.max_residual.max(complementarity_residual(&sol));
                    for k in 0..sol.phi.len() {
                        let (psi, phi, eta) = (sol.psi.row(k), sol.phi.row(k), sol.eta.row(k));
                        for i in 0..m {
                            let below = if i == 0 { 0.0 } else { eta[i - 1] };
                            if phi[i] != psi[i] + below - eta[i] {
                                out.identity_mismatches += 1;
                            }
                        }
                    }
                    let fine = solve_skorokhod(&refine(&input)?).map_err(err)?;
                    let gap = sol
                        .phi
                        .sup_l1_distance_union(&fine.phi)
                        .map_err(err)?
                        .max(sol.eta.sup_l1_distance_union(&fine.eta).map_err(err)?);
                    out.max_refinement_gap = out.max_refinement_gap.max(gap);
                    let (gap_in, gap_out) =
                        lipschitz_gap(&input, &perturb(&input, &mut rng)?).map_err(err)?;
                    if gap_in > 0.0 {
                        out.max_lipschitz_ratio = out.max_lipschitz_ratio.max(gap_out / gap_in);
                    }
                }
                out.pass = out.max_residual <= tol.residual
                    && out.max_refinement_gap <= tol.refinement
                    && out.identity_mismatches == 0;
                Ok(out)
            })();
            Point::new(index, p, outcome)
        })
        .collect();
    Results::SkorokhodSelftest { points }
}

fn fluid_selftest(cfg: &ExperimentConfig) -> Results {
    let tol = &cfg.tolerances;
    let mut params = Vec::new();
    for &epsilon in &cfg.grid.epsilon {
        for &horizon in &cfg.grid.horizon {
            params.push(FluidParams {
                epsilon,
                horizon,
                initial: cfg.initial.clone(),
                dt: cfg.fluid_dt,
            });
        }
    }
    let points = params
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let outcome = (|| {
                let (rate, tilt) = optimal_rate(p.epsilon, p.horizon).map_err(err)?;
                let control =
                    MasterControl::constant(tilt.a_star, tilt.b_star, p.horizon).map_err(err)?;
                let sol = integrate_fluid(&p.initial, 1.0, &control, p.horizon, p.dt, None)
                    .map_err(err)?;
                let mass_at_horizon = *sol.mass().last().unwrap();
                let target_mass = p.initial.iter().sum::<f64>() + p.epsilon;
                let max_first_level_gap = sol
                    .zeta
                    .values()
                    .iter()
                    .map(|r| (r[0] - 1.0).abs())
                    .fold(0.0, f64::max);
                let cost = control_cost(&control, &sol.zeta, CostWeights::new(1.0).map_err(err)?)
                    .map_err(err)?;
                let dts = [4.0 * p.dt, 2.0 * p.dt];
                let conv = wellposedness_check(
                    &p.initial,
                    1.0,
                    &control,
                    p.horizon,
                    &dts,
                    Some(sol.truncation),
                )
                .map_err(err)?;
                Ok(FluidResult {
                    a_star: tilt.a_star,
                    b_star: tilt.b_star,
                    truncation: sol.truncation,
                    mass_at_horizon,
                    target_mass,
                    max_first_level_gap,
                    cost,
                    rate,
                    convergence_dts: conv.dts,
                    convergence_errors: conv.errors,
                    pass: (mass_at_horizon - target_mass).abs() <= tol.fluid_mass
                        && max_first_level_gap <= tol.fluid_pinned
                        && (cost - rate).abs() <= tol.fluid_cost,
                })
            })();
            Point::new(index, p, outcome)
        })
        .collect();
    Results::FluidSelftest { points }
}

fn remark(cfg: &ExperimentConfig) -> Results {
    let g = &cfg.grid;
    let mut params = Vec::new();
    for sched in &g.d_schedule {
        for &n in &g.n {
            for &horizon in &g.horizon {
                params.push(RemarkParams {
                    n,
                    d: sched.resolve(n),
                    d_schedule: sched.label(),
                    horizon,
                });
            }
        }
    }
    let points = params
        .into_par_iter()
        .enumerate()
        .map(|(index, p)| {
            let outcome = (|| {
                let bound = remark_bound(p.n, p.d, p.horizon).map_err(err)?;
                let finer_scale_rate = (p.d < p.n).then(|| {
                    let scale = p.d as f64 * (p.d as f64 / p.n as f64).ln().abs();
                    bound.rate_at_scale(scale)
                });
                let (monte_carlo, consistent) = if cfg.replications >= 2 {
                    let initial = InitialOccupancy::from_limit(p.n, &[1.0]).map_err(err)?;
                    let params =
                        SystemParams::new(p.n, p.d, 1.0, p.horizon, initial).map_err(err)?;
                    let event = RareEvent::u_j(3).map_err(err)?;
                    let est = estimate_probability(
                        &params,
                        &event,
                        TiltSpec::UNTILTED,
                        cfg.replications,
                        point_seed(cfg.seed, index),
                    )
                    .map_err(err)?;
                    let ok = est.p_hat + 3.0 * est.std_err >= bound.log_lower_bound.exp();
                    (Some(est), Some(ok))
                } else {
                    (None, None)
                };
                Ok(RemarkResult {
                    bound,
                    finer_scale_rate,
                    monte_carlo,
                    consistent,
                })
            })();
            Point::new(index, p, outcome)
        })
        .collect();
    Results::RemarkBound { points }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Results {
    /// Flat per-grid-point summary table.
    pub fn summary_table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        fn error<P, R>(p: &Point<P, R>) -> String {
            p.error.clone().unwrap_or_default()
        }
        match self {
            Results::Lln { points } => (
                vec![
                    "index", "n", "d", "lambda", "horizon", "mean", "std_err", "p95", "max",
                    "pass", "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        vec![
                            p.index.to_string(),
                            p.params.n.to_string(),
                            p.params.d.to_string(),
                            p.params.lambda.to_string(),
                            p.params.horizon.to_string(),
                            fmt_opt(r.map(|r| r.mean)),
                            fmt_opt(r.map(|r| r.std_err)),
                            fmt_opt(r.map(|r| r.p95)),
                            fmt_opt(r.map(|r| r.max)),
                            r.map(|r| r.pass.to_string()).unwrap_or_default(),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
            Results::RateTable { points } => (
                vec![
                    "index",
                    "epsilon",
                    "horizon",
                    "a_star",
                    "b_star",
                    "rate",
                    "brute_force_rate",
                    "gap",
                    "pass",
                    "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        vec![
                            p.index.to_string(),
                            p.params.epsilon.to_string(),
                            p.params.horizon.to_string(),
                            fmt_opt(r.map(|r| r.a_star)),
                            fmt_opt(r.map(|r| r.b_star)),
                            fmt_opt(r.map(|r| r.rate)),
                            fmt_opt(r.map(|r| r.brute_force_rate)),
                            fmt_opt(r.map(|r| r.gap)),
                            r.map(|r| r.pass.to_string()).unwrap_or_default(),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
            Results::RareDecay { points, .. } => (
                vec![
                    "index",
                    "n",
                    "d",
                    "lambda",
                    "horizon",
                    "event",
                    "threshold",
                    "tilt_a",
                    "tilt_b",
                    "p_hat",
                    "std_err",
                    "relative_error",
                    "neg_log_rate",
                    "neg_log_rate_std_err",
                    "hits",
                    "replications",
                    "target_rate",
                    "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        let event = serde_json::to_value(p.params.event.kind)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default();
                        vec![
                            p.index.to_string(),
                            p.params.n.to_string(),
                            p.params.d.to_string(),
                            p.params.lambda.to_string(),
                            p.params.horizon.to_string(),
                            event,
                            p.params.event.threshold.to_string(),
                            p.params.tilt.a.to_string(),
                            p.params.tilt.b.to_string(),
                            fmt_opt(r.map(|r| r.estimate.p_hat)),
                            fmt_opt(r.map(|r| r.estimate.std_err)),
                            fmt_opt(r.and_then(|r| r.relative_error)),
                            fmt_opt(r.map(|r| r.estimate.neg_log_rate).filter(|v| v.is_finite())),
                            fmt_opt(r.and_then(|r| r.neg_log_rate_std_err)),
                            r.map(|r| r.estimate.hits.to_string()).unwrap_or_default(),
                            r.map(|r| r.estimate.replications.to_string())
                                .unwrap_or_default(),
                            fmt_opt(r.and_then(|r| r.target_rate)),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
            Results::SkorokhodSelftest { points } => (
                vec![
                    "index",
                    "m",
                    "cases",
                    "max_residual",
                    "max_refinement_gap",
                    "identity_mismatches",
                    "max_lipschitz_ratio",
                    "pass",
                    "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        vec![
                            p.index.to_string(),
                            p.params.m.to_string(),
                            p.params.cases.to_string(),
                            fmt_opt(r.map(|r| r.max_residual)),
                            fmt_opt(r.map(|r| r.max_refinement_gap)),
                            r.map(|r| r.identity_mismatches.to_string())
                                .unwrap_or_default(),
                            fmt_opt(r.map(|r| r.max_lipschitz_ratio)),
                            r.map(|r| r.pass.to_string()).unwrap_or_default(),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
            Results::FluidSelftest { points } => (
                vec![
                    "index",
                    "epsilon",
                    "horizon",
                    "mass_at_horizon",
                    "target_mass",
                    "max_first_level_gap",
                    "cost",
                    "rate",
                    "pass",
                    "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        vec![
                            p.index.to_string(),
                            p.params.epsilon.to_string(),
                            p.params.horizon.to_string(),
                            fmt_opt(r.map(|r| r.mass_at_horizon)),
                            fmt_opt(r.map(|r| r.target_mass)),
                            fmt_opt(r.map(|r| r.max_first_level_gap)),
                            fmt_opt(r.map(|r| r.cost)),
                            fmt_opt(r.map(|r| r.rate)),
                            r.map(|r| r.pass.to_string()).unwrap_or_default(),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
            Results::RemarkBound { points } => (
                vec![
                    "index",
                    "n",
                    "d",
                    "horizon",
                    "log_lower_bound",
                    "per_n_rate",
                    "finer_scale_rate",
                    "mc_p_hat",
                    "mc_std_err",
                    "consistent",
                    "error",
                ],
                points
                    .iter()
                    .map(|p| {
                        let r = p.result.as_ref();
                        let mc = r.and_then(|r| r.monte_carlo.as_ref());
                        vec![
                            p.index.to_string(),
                            p.params.n.to_string(),
                            p.params.d.to_string(),
                            p.params.horizon.to_string(),
                            fmt_opt(r.map(|r| r.bound.log_lower_bound)),
                            fmt_opt(r.map(|r| r.bound.per_n_rate)),
                            fmt_opt(r.and_then(|r| r.finer_scale_rate)),
                            fmt_opt(mc.map(|m| m.p_hat)),
                            fmt_opt(mc.map(|m| m.std_err)),
                            r.and_then(|r| r.consistent)
                                .map(|c| c.to_string())
                                .unwrap_or_default(),
                            error(p),
                        ]
                    })
                    .collect(),
            ),
        }
    }
}
