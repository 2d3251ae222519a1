//! Library-level runs through the whole chain on a coarse bar layout.

use warpcomp::eval::deviation_report;
use warpcomp::oracle::{simulate_print, WarpSpec};
use warpcomp::synth::{bar_graph, bar_layout, build_dataset, HELD_OUT};
use warpcomp::trainer::{compensate, iterate_loop, train_compensator, train_predictor, Dataset, TrainingConfig};

fn coarse(spec: &WarpSpec) -> Dataset {
    let graph = bar_graph(5.0, 0).unwrap();
    build_dataset(&graph, &bar_layout(&spec.chamber), &HELD_OUT, spec).unwrap()
}

fn config(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        ..Default::default()
    }
}

fn best_validation(o: &warpcomp::trainer::TrainingOutcome) -> f64 {
    o.history[o.best_epoch].validation.as_ref().unwrap().total
}

#[test]
fn compensation_halves_held_out_deviation() {
    let spec = WarpSpec::default();
    let ds = coarse(&spec);
    let cfg = config(400);
    let pred = train_predictor(&ds, &cfg).unwrap();
    assert!(pred.min_train_loss() < 0.2 * pred.initial_train_loss());
    let comp = train_compensator(&ds, &pred.engine.clone().frozen(), &cfg).unwrap();
    for s in ds.validation() {
        let before = deviation_report(&s.cad, &simulate_print(&s.cad, &spec).unwrap(), &s.graph).unwrap().0;
        let printed = simulate_print(&compensate(s, &comp.engine).unwrap(), &spec).unwrap();
        let after = deviation_report(&s.cad, &printed, &s.graph).unwrap().0;
        assert!(after.abs_mean <= 0.5 * before.abs_mean, "part {}: {} -> {}", s.part_id, before.abs_mean, after.abs_mean);
    }
}

#[test]
fn augmented_second_round_does_not_validate_worse() {
    let spec = WarpSpec::default();
    let ds = coarse(&spec);
    let rounds = iterate_loop(&ds, &config(60), 2, Some(&spec)).unwrap();
    let (first, second) = (best_validation(&rounds[0].predictor), best_validation(&rounds[1].predictor));
    assert!(second <= first, "round 1 {first}, round 2 {second}");
}

#[test]
fn dataset_survives_a_disk_round_trip_into_identical_training() {
    let spec = WarpSpec::default();
    let ds = coarse(&spec);
    let dir = tempfile::tempdir().unwrap();
    let csv = ds.save(dir.path()).unwrap();
    let back = Dataset::load(&csv).unwrap();
    assert_eq!(back.hash(), ds.hash());
    let cfg = config(3);
    let a = train_predictor(&ds, &cfg).unwrap();
    let b = train_predictor(&back, &cfg).unwrap();
    assert_eq!(a.engine.to_bytes(), b.engine.to_bytes());
}
