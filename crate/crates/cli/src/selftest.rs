use std::path::Path;

use jsqd_core::{
    estimate_probability, BetaTable, InitialOccupancy, RareEvent, SystemParams, TiltSpec,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiments;

const RATE_TABLE: &str = r#"
kind = "rate-table"
seed = 0
output_dir = "."
[grid]
epsilon = [0.25, 0.5, 1.0]
horizon = [1.0, 2.0]
"#;

const SKOROKHOD: &str = r#"
kind = "skorokhod-selftest"
seed = 1
output_dir = "."
cases = 100
[grid]
m = [1, 2, 5, 8]
"#;

const FLUID: &str = r#"
kind = "fluid-selftest"
seed = 2
output_dir = "."
[grid]
epsilon = [0.5, 1.0]
horizon = [1.0]
"#;

fn experiment(text: &str) -> std::result::Result<String, String> {
    let cfg = ExperimentConfig::from_toml_str(text, Path::new(".")).map_err(|e| e.to_string())?;
    let results = experiments::run(&cfg);
    let failed = results.failures();
    let total = results.summary_table().1.len();
    if failed == 0 {
        Ok(format!("{total} grid points"))
    } else {
        Err(format!("{failed} of {total} grid points failed"))
    }
}

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn routing_table() -> std::result::Result<String, String> {
    let mut worst = 0.0f64;
    for n in 1..=20u64 {
        for d in 1..=n {
            let t = BetaTable::new(n, d).map_err(|e| e.to_string())?;
            for k in 0..=n {
                worst = worst.max((t.get(k) - binom(k, d) as f64 / binom(n, d) as f64).abs());
            }
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max error {worst:.1e}"))
    } else {
        Err(format!("max error {worst:.1e}"))
    }
}

/// Importance sampling and crude Monte Carlo agree on a non-rare event.
fn tilted_vs_crude() -> std::result::Result<String, String> {
    let n = 20;
    let initial = InitialOccupancy::from_limit(n, &[1.0]).map_err(|e| e.to_string())?;
    let params = SystemParams::new(n, 2, 1.0, 1.0, initial).map_err(|e| e.to_string())?;
    let event = RareEvent::g_eps(0.2).map_err(|e| e.to_string())?;
    let crude = estimate_probability(&params, &event, TiltSpec::UNTILTED, 20_000, 3)
        .map_err(|e| e.to_string())?;
    let tilt = TiltSpec::new(1.3, 0.8).map_err(|e| e.to_string())?;
    let tilted =
        estimate_probability(&params, &event, tilt, 20_000, 4).map_err(|e| e.to_string())?;
    let z = (crude.p_hat - tilted.p_hat).abs()
        / (crude.std_err.powi(2) + tilted.std_err.powi(2)).sqrt();
    let detail = format!(
        "crude {:.4}, tilted {:.4}, {z:.2} sigma apart",
        crude.p_hat, tilted.p_hat
    );
    if z <= 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type Check = fn() -> std::result::Result<String, String>;

pub fn run() -> Result<()> {
    let checks: [(&str, Check); 5] = [
        ("rate table against grid search", || experiment(RATE_TABLE)),
        ("routing table against binomial ratios", routing_table),
        ("reflection map properties", || experiment(SKOROKHOD)),
        ("optimal fluid trajectory", || experiment(FLUID)),
        ("tilted and crude estimators agree", tilted_vs_crude),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(CliError::SelfTest { failed });
    }
    Ok(())
}
