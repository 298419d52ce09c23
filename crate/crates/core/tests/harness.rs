use std::fs::File;

use proptest::prelude::*;
use uavmec::env::{Cell, Lattice};
use uavmec::harness::{
    offloading_count, read_metrics, run_experiment, ExperimentConfig, Registry, METRICS_FILE,
};
use uavmec::traffic::{
    generate_grid_traces, write_trace_csv, GridSpec, TraceFrame, VehicleSample,
};

/// Counts UAVs that win at least one vehicle when every (vehicle, UAV) pair is
/// checked against every rival UAV.
fn serving_uavs_oracle(l: &Lattice, cells: &[Cell], frame: &TraceFrame, radius: f64) -> usize {
    let dist = |c: &Cell, v: &VehicleSample| {
        let s = l.cell_size / 2.0;
        ((c.x as f64 * s - v.x).powi(2) + (c.y as f64 * s - v.y).powi(2)).sqrt()
    };
    (0..cells.len())
        .filter(|&u| {
            frame.vehicles.iter().any(|v| {
                let du = dist(&cells[u], v);
                du <= radius
                    && (0..cells.len()).all(|w| {
                        let dw = dist(&cells[w], v);
                        w == u || dw > radius || dw > du || (dw == du && w > u)
                    })
            })
        })
        .count()
}

proptest! {
    #[test]
    fn offloading_count_matches_assignment_oracle(
        uavs in prop::collection::vec((0u16..6, 0u16..6), 1..6),
        vehicles in prop::collection::vec((0.0f64..600.0, 0.0f64..600.0), 0..40),
        radius in 10.0f64..300.0,
    ) {
        let l = Lattice::new(6, 6, 1, 200.0).unwrap();
        let cells: Vec<Cell> = uavs.iter().map(|&(x, y)| Cell::new(x, y, 0)).collect();
        let frame = TraceFrame {
            t: 0,
            vehicles: vehicles
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| VehicleSample { vehicle_id: i as u32, x, y, lane_id: 0 })
                .collect(),
        };
        let got = offloading_count(&l, &cells, &frame, radius);
        prop_assert_eq!(got, serving_uavs_oracle(&l, &cells, &frame, radius));
        prop_assert!(got <= cells.len());
    }
}

fn small(algo: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        algo: algo.into(),
        uavs: 3,
        vehicles: 30,
        episodes: 6,
        seed: 21,
        ..Default::default()
    };
    cfg.neural.warmup = 40;
    cfg
}

#[test]
fn reruns_give_byte_identical_metrics() {
    let reg = Registry::default();
    for algo in ["q-multi", "magcdrl"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&small(algo), &reg, a.path()).unwrap();
        run_experiment(&small(algo), &reg, b.path()).unwrap();
        let x = std::fs::read(a.path().join(METRICS_FILE)).unwrap();
        let y = std::fs::read(b.path().join(METRICS_FILE)).unwrap();
        assert_eq!(x, y, "{algo}");
    }
}

#[test]
fn trace_scenario_resolves_paths_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(4, 4);
    let frames = generate_grid_traces(&spec, 12, 8, 3).unwrap();
    std::fs::create_dir(dir.path().join("data")).unwrap();
    write_trace_csv(File::create(dir.path().join("data/trace.csv")).unwrap(), &frames).unwrap();
    std::fs::write(dir.path().join("data/net.json"), spec.network().to_json().unwrap()).unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{
            "scenario": {"kind": "trace", "path": "data/trace.csv", "network": "data/net.json"},
            "lattice": {"x_max": 4, "y_max": 4},
            "shortage_threshold": 1e-6,
            "uavs": 2,
            "algo": "q-single",
            "episodes": 4
        }"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&dir.path().join("exp.json")).unwrap();
    let out = dir.path().join("out");
    let art = run_experiment(&cfg, &Registry::default(), &out).unwrap();
    let rows = read_metrics(File::open(art.metrics).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    // 12 vehicles over 9 slots, each scored at least 1.
    assert!(rows.iter().all(|r| r.mos_total >= 12.0 * 9.0 && r.offloading_uav_count <= 2.0));
}

#[test]
fn monitoring_runs_report_no_vehicle_scores() {
    let cfg = ExperimentConfig::from_json(
        r#"{"scenario": {"kind": "monitor"}, "uavs": 2, "algo": "ac", "episodes": 3,
            "monitor": {"map": {"kind": "grid", "width": 6, "height": 5}, "horizon": 10}}"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let art = run_experiment(&cfg, &Registry::default(), dir.path()).unwrap();
    assert!(art.rows.iter().all(|r| r.mean_mos == 0.0 && r.total_reward < 0.0));
    assert!(art.checkpoint.ends_with("policy.magc"));
}

#[test]
fn bundled_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["grid.json", "monitor.json", "trace.json"] {
        let cfg = ExperimentConfig::load(&dir.join(name)).unwrap();
        cfg.environment().unwrap();
    }
}
