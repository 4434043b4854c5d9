use std::path::PathBuf;

use angle_rigidity::control::FormationSpec;
use angle_rigidity::io::{read_json, SimulationFile};
use angle_rigidity::sim::*;
use angle_rigidity::{Error, Point};

fn load(name: &str) -> (FormationSpec, Vec<Point>, SimConfig) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name);
    let f: SimulationFile = read_json(&path).unwrap();
    (
        f.spec.to_spec().unwrap(),
        f.initial(),
        f.config.to_config().unwrap(),
    )
}

#[test]
fn shipped_runs_stay_in_the_valid_region() {
    for name in [
        "triangle_sim.json",
        "four_agent_sim.json",
        "six_agent_sim.json",
    ] {
        let (spec, init, cfg) = load(name);
        let traj = simulate(&spec, &init, &cfg).unwrap();
        assert!(traj.events.is_empty(), "{name}: {:?}", traj.events);
        assert!(traj.converged, "{name}");
        let inv = monitor_invariants(&traj, &spec);
        assert!(inv.violations.is_empty(), "{name}: {:?}", inv.violations);
        assert_eq!(inv.horizon, cfg.duration);
    }
}

#[test]
fn error_norm_stays_under_its_envelope() {
    // individual errors may cross zero, the norm is bounded by its earlier values
    for name in [
        "triangle_sim.json",
        "four_agent_sim.json",
        "six_agent_sim.json",
    ] {
        let (spec, init, cfg) = load(name);
        let traj = simulate(&spec, &init, &cfg).unwrap();
        let norms: Vec<f64> = traj
            .angle_errors
            .iter()
            .map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut tail = f64::NEG_INFINITY;
        let mut envelope = vec![0.0; norms.len()];
        for k in (0..norms.len()).rev() {
            tail = tail.max(norms[k]);
            envelope[k] = tail;
        }
        for k in 0..norms.len() {
            assert!(
                envelope[k] <= 10.0 * norms[k].max(1e-12),
                "{name} t = {}",
                traj.times[k]
            );
        }
        assert!(norms.last().unwrap() < &(1e-3 * norms[0]), "{name}");
    }
}

#[test]
fn triangle_decay_matches_the_linearization() {
    let (spec, init, cfg) = load("triangle_sim.json");
    let traj = simulate(&spec, &init, &cfg).unwrap();
    let lin =
        angle_rigidity::control::linearize_triangle(&spec, &spec.canonical_realization().unwrap())
            .unwrap();
    for fit in traj.fitted_rates.iter().flatten() {
        assert!(fit.r_squared > 0.95);
        assert!((fit.rate - lin.min_abs_real()).abs() <= 0.3 * lin.min_abs_real());
    }
}

#[test]
fn collision_between_constrained_agents_halts() {
    let (spec, _, mut cfg) = load("triangle_sim.json");
    // agents 1 and 2 close in to about 0.0496 from 0.1 on this start
    let init = vec![
        Point::new(0.0, 0.0),
        Point::new(0.1, 0.0),
        Point::new(3.0, 0.5),
    ];
    cfg.collision_epsilon = 0.06;
    cfg.duration = 5.0;
    match simulate(&spec, &init, &cfg) {
        Err(Error::EventHalt(traj)) => {
            let e = traj.events.last().unwrap();
            assert_eq!(e.kind, EventKind::Collision);
            assert_eq!(e.agents, vec![0, 1]);
            assert!(traj.times.len() < 5001);
        }
        Ok(traj) => panic!("no halt, final positions {:?}", traj.final_positions()),
        Err(e) => panic!("unexpected {e}"),
    }
}

#[test]
fn six_agent_frames_agree() {
    let (spec, init, cfg) = load("six_agent_sim.json");
    let (_, _, dev) = local_frame_experiment(
        &spec,
        &init,
        &SimConfig {
            duration: 10.0,
            ..cfg
        },
        4,
    )
    .unwrap();
    assert!(dev <= 1e-8, "{dev}");
}
