use std::path::Path;

use layerpeel::config::RunConfig;
use layerpeel::driver::{Refinement, Termination};
use layerpeel::geometry::{build_disk_mesh, thin, Mesh, Region};
use layerpeel::ndmap::{BoundaryBasis, NdMatrix};
use layerpeel::order::DeltaPolicy;
use layerpeel::phantom::{simulate_data, PclcCoefficient, PhantomSpec};
use layerpeel::pipeline;
use layerpeel::shape::{reconstruct_layer, ShapeParams};

const H: f64 = 0.05;
const TAU: f64 = 0.2;

struct Case {
    mesh: Mesh,
    basis: BoundaryBasis,
    truth: PclcCoefficient,
    data: NdMatrix,
    delta: f64,
}

fn first_layer_case(spec: &PhantomSpec) -> Case {
    let mesh = build_disk_mesh(1.0, H).unwrap();
    let basis = BoundaryBasis::new(&mesh, 16).unwrap();
    let truth = spec.rasterize(&mesh).unwrap();
    let raw = simulate_data(&truth, &mesh.refine().unwrap(), &mesh, &basis, 0.0, 0).unwrap();
    let g0 = PclcCoefficient::background(spec.c0, TAU).unwrap();
    let data = Refinement::new(&mesh, &basis).unwrap().correct(&raw, &g0, &mesh, &basis).unwrap();
    let delta = DeltaPolicy::default().delta(data.norm(), 0.0, H);
    Case { mesh, basis, truth, data, delta }
}

fn layer(case: &Case, delta: f64, params: &ShapeParams) -> Region {
    let g0 = PclcCoefficient::background(case.truth.c0(), TAU).unwrap();
    reconstruct_layer(&g0, &case.data, &case.mesh, &case.basis, delta, params).unwrap()
}

#[test]
fn interior_of_the_true_layer_is_kept() {
    for offset in [2.0, -0.5] {
        let case = first_layer_case(&PhantomSpec::concentric(1.0, TAU, &[(0.4, offset)]));
        let found = layer(&case, case.delta, &ShapeParams::default());
        let inner = Region::from_predicate(&case.mesh, |p| p[0].hypot(p[1]) < 0.4 - H);
        assert!(inner.is_subset(&found), "offset {offset}: {} of {} interior cells kept", inner.intersection(&found).len(), inner.len());
        assert!(found.is_subset(&thin(&Region::all(&case.mesh), TAU / 2.0, &case.mesh)));
        assert!(found.jaccard(&case.truth.layers()[0].region) > 0.9);
    }
}

fn run(config: &RunConfig, spec: &PhantomSpec, dir: &Path) -> layerpeel::driver::ReconResult {
    let sim = pipeline::simulate(config, spec, &dir.join("sim")).unwrap();
    pipeline::reconstruct(config, &sim.data, &dir.join("out"), Some(&dir.join("sim").join(pipeline::TRUTH_DIR))).unwrap()
}

#[test]
fn pipeline_writes_layers_summary_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { h_recon: H, ..Default::default() };
    let result = run(&config, &PhantomSpec::concentric(1.0, TAU, &[(0.4, 2.0)]), dir.path());
    // the value carries a small discrete bias, so the second pass cannot
    // match the data to the exact-data tolerance and stops early
    assert_eq!(result.layer_history.len(), 1);
    assert_ne!(result.termination, Termination::MaxLayers);
    let out = dir.path().join("out");
    for f in ["layer_01.region", "layer_01.values", "layer_01.pgm", "summary.json", "metrics.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination_reason"], result.termination.as_str());
    assert_eq!(summary["config"]["h_recon"], H);
    let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["layers"][0]["jaccard"].as_f64().unwrap() > 0.9);
    let value = metrics["layers"][0]["values"][0]["recovered"].as_f64().unwrap();
    assert!((value - 2.0).abs() < 0.05 * 2.0, "value {value}");
}

#[test]
fn homogeneous_data_stops_with_the_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { h_recon: 0.08, m: 8, ..Default::default() };
    let result = run(&config, &PhantomSpec::concentric(1.0, TAU, &[]), dir.path());
    assert!(result.layer_history.is_empty());
    assert_eq!(result.termination, Termination::EmptySet);
}

#[test]
fn noisy_runs_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig { h_recon: 0.08, m: 8, noise_eps: 1e-3, seed: 5, max_layers: 2, ..Default::default() };
    let spec = PhantomSpec::concentric(1.0, TAU, &[(0.5, 1.0)]);
    run(&config, &spec, &dir.path().join("a"));
    run(&config, &spec, &dir.path().join("b"));
    for sub in ["sim", "out"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a").join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for n in names {
            let a = dir.path().join("a").join(sub).join(&n);
            if a.is_file() {
                assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(dir.path().join("b").join(sub).join(&n)).unwrap(), "{n:?}");
            }
        }
    }
}
