use std::path::Path;

use crate::error::{CliError, Result};
use crate::experiments::Results;

/// One row of long-format plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub stderr: Option<f64>,
}

pub fn load_results(path: &Path) -> Result<Results> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Results {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Results {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn event_label(event: &jsqd_core::RareEvent) -> String {
    let kind = serde_json::to_value(event.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    format!("{kind}={}", event.threshold)
}

pub fn plot_rows(results: &Results) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    match results {
        Results::Lln { points } => {
            for p in points {
                if let Some(r) = &p.result {
                    let tag = format!(
                        "[{}, lambda={}, T={}]",
                        p.params.d_schedule, p.params.lambda, p.params.horizon
                    );
                    let x = p.params.n as f64;
                    rows.push(PlotRow {
                        series: format!("sup l1 distance vs n {tag}"),
                        x,
                        y: r.mean,
                        stderr: Some(r.std_err),
                    });
                    rows.push(PlotRow {
                        series: format!("p95 sup l1 distance vs n {tag}"),
                        x,
                        y: r.p95,
                        stderr: None,
                    });
                }
            }
        }
        Results::RateTable { points } => {
            for p in points {
                if let Some(r) = &p.result {
                    let series = format!("rate vs epsilon [T={}]", p.params.horizon);
                    rows.push(PlotRow {
                        series,
                        x: p.params.epsilon,
                        y: r.rate,
                        stderr: None,
                    });
                }
            }
        }
        Results::RareDecay { points, .. } => {
            for p in points {
                let Some(r) = &p.result else { continue };
                if !r.estimate.neg_log_rate.is_finite() {
                    continue;
                }
                let tag = format!(
                    "[{}, {}, lambda={}, T={}]",
                    p.params.d_schedule,
                    event_label(&p.params.event),
                    p.params.lambda,
                    p.params.horizon
                );
                let x = p.params.n as f64;
                rows.push(PlotRow {
                    series: format!("neg_log_rate vs n {tag}"),
                    x,
                    y: r.estimate.neg_log_rate,
                    stderr: r.neg_log_rate_std_err,
                });
                rows.push(PlotRow {
                    series: format!("log p_hat vs n {tag}"),
                    x,
                    y: r.estimate.p_hat.ln(),
                    stderr: r.relative_error,
                });
            }
        }
        Results::SkorokhodSelftest { points } => {
            for p in points {
                if let Some(r) = &p.result {
                    let x = p.params.m as f64;
                    rows.push(PlotRow {
                        series: "max residual vs m".into(),
                        x,
                        y: r.max_residual,
                        stderr: None,
                    });
                    rows.push(PlotRow {
                        series: "max lipschitz ratio vs m".into(),
                        x,
                        y: r.max_lipschitz_ratio,
                        stderr: None,
                    });
                }
            }
        }
        Results::FluidSelftest { points } => {
            for p in points {
                if let Some(r) = &p.result {
                    let series = format!("cost vs epsilon [T={}]", p.params.horizon);
                    rows.push(PlotRow {
                        series,
                        x: p.params.epsilon,
                        y: r.cost,
                        stderr: None,
                    });
                }
            }
        }
        Results::RemarkBound { points } => {
            for p in points {
                if let Some(r) = &p.result {
                    let tag = format!("[{}, T={}]", p.params.d_schedule, p.params.horizon);
                    let x = p.params.n as f64;
                    rows.push(PlotRow {
                        series: format!("per_n_rate vs n {tag}"),
                        x,
                        y: r.bound.per_n_rate,
                        stderr: None,
                    });
                    if let Some(mc) = &r.monte_carlo {
                        rows.push(PlotRow {
                            series: format!("monte carlo probability vs n {tag}"),
                            x,
                            y: mc.p_hat,
                            stderr: Some(mc.std_err),
                        });
                    }
                }
            }
        }
    }
    rows
}

pub fn write_plot_csv(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "y", "stderr"])?;
    for r in rows {
        w.write_record([
            r.series.clone(),
            r.x.to_string(),
            r.y.to_string(),
            r.stderr.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
