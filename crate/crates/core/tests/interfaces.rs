use jsqd_core::io::{read_path_csv, read_path_json, write_path_csv, write_path_json, PathRecord};
use jsqd_core::{
    integrate_fluid, optimal_tilt, simulate, InitialOccupancy, MasterControl, RareEvent,
    SystemParams, TiltSpec,
};

fn params(n: u64, d: u64) -> SystemParams {
    SystemParams::new(
        n,
        d,
        1.0,
        1.0,
        InitialOccupancy::from_limit(n, &[1.0]).unwrap(),
    )
    .unwrap()
}

#[test]
fn simulated_path_survives_csv() {
    let p = params(20, 4);
    let beta = jsqd_core::BetaTable::new(20, 4).unwrap();
    let res = jsqd_core::simulate_with(
        &p,
        &beta,
        TiltSpec::UNTILTED,
        None,
        jsqd_core::replica_rng(3, 0),
        Some(0.1),
    )
    .unwrap();
    let path = res.path.unwrap();
    let mut buf = Vec::new();
    write_path_csv(&path, &mut buf).unwrap();
    assert_eq!(read_path_csv(buf.as_slice()).unwrap(), path);
}

#[test]
fn fluid_solution_survives_json_with_params() {
    let tilt = optimal_tilt(0.5, 1.0).unwrap();
    let ctrl = MasterControl::constant(tilt.a_star, tilt.b_star, 1.0).unwrap();
    let sol = integrate_fluid(&[1.0, 0.3], 1.0, &ctrl, 1.0, 1e-2, None).unwrap();
    let record = PathRecord {
        params: ctrl.clone(),
        path: sol.zeta.clone(),
    };
    let mut buf = Vec::new();
    write_path_json(&record, &mut buf).unwrap();
    let back: PathRecord<MasterControl> = read_path_json(buf.as_slice()).unwrap();
    assert_eq!(back.params, ctrl);
    assert_eq!(back.path, sol.zeta);
}

#[test]
fn system_params_json_is_validated() {
    let p = params(10, 2);
    let text = serde_json::to_string(&p).unwrap();
    let back: SystemParams = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
    assert!(back.validate().is_ok());
    let bad = text.replace("\"d\":2", "\"d\":11");
    let parsed: SystemParams = serde_json::from_str(&bad).unwrap();
    assert!(parsed.validate().is_err());
}

#[test]
fn seeded_runs_are_reproducible() {
    let p = params(50, 50);
    let tilt = optimal_tilt(1.0, 1.0).unwrap();
    let tilt = TiltSpec::new(tilt.a_star, tilt.b_star).unwrap();
    let event = RareEvent::g_eps(1.0).unwrap();
    let a = simulate(&p, tilt, Some(&event), 99).unwrap();
    let b = simulate(&p, tilt, Some(&event), 99).unwrap();
    assert_eq!(a, b);
    assert!(a.log_lr.is_finite());
}
