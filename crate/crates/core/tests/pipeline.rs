use gffm::fps::{fps_laplace_estimate, metric_ball, nested_fps, LevelSchedule};
use gffm::fieldsim::Subdivision;
use gffm::laws::FpsLawParams;
use gffm::lattice::{grid, grid_resistance, GridShape};
use gffm::network::GraphDocument;
use gffm::verify::{fixtures, lattice_probe, run_suite, Suite, SuiteConfig};
use gffm::load_network;

const KITE: &str = r#"{
  "vertices": ["a", "x", "y", "b"],
  "edges": [
    {"u": "a", "v": "x", "conductance": 1.0},
    {"u": "x", "v": "y", "conductance": 2.0},
    {"u": "y", "v": "b", "conductance": 0.5},
    {"u": "a", "v": "y", "conductance": 1.5}
  ],
  "boundary": {"a": 0.4, "b": 0.0},
  "partition": {"hat": ["a"], "check": ["b"]}
}"#;

#[test]
fn document_round_trip() {
    let (net, bc) = load_network(KITE).unwrap();
    let doc = GraphDocument::from_parts(&net, &bc);
    let (net2, bc2) = load_network(&doc.to_json()).unwrap();
    assert_eq!(net, net2);
    assert_eq!(bc, bc2);
}

#[test]
fn laplace_estimate_brackets_closed_form_on_loaded_graph() {
    let (net, bc) = load_network(KITE).unwrap();
    let est = fps_laplace_estimate(&net, &bc, -0.5, &[1.0], Subdivision::Uniform(16), 20_000, 3).unwrap();
    let closed = FpsLawParams::from_network(&net, &bc).unwrap().laplace(-0.5, 1.0).unwrap();
    assert_eq!(est[0].closed_form, closed);
    assert!(est[0].covers(4.0), "{:?}", est[0]);
}

#[test]
fn nested_and_ball_rows_are_reproducible() {
    let (net, bc) = fixtures::diamond();
    let x0 = net.vertex("x").unwrap();
    let schedule = LevelSchedule::new(vec![-0.2, -0.6]).unwrap();
    let a = nested_fps(&net, &bc, &schedule, x0, Subdivision::Uniform(4), 50, 11).unwrap();
    let b = nested_fps(&net, &bc, &schedule, x0, Subdivision::Uniform(4), 50, 11).unwrap();
    assert_eq!(a, b);
    for row in &a {
        assert!(row.drops[0].lower <= row.drops[1].lower + 1e-12);
    }
    let balls = metric_ball(&net, &bc, &[0.1, 0.5], x0, Subdivision::Uniform(4), 50, 11).unwrap();
    for row in &balls {
        assert!(row.drops[0].lower <= row.drops[1].lower + 1e-12);
        assert!(row.drops[0].lower <= row.drops[0].upper + 1e-12);
    }
}

#[test]
fn connection_probability_suite_passes() {
    let out = run_suite(Suite::Connect, &SuiteConfig { seed: 7, replicates: Some(20_000), refinement: None }).unwrap();
    for r in &out.reports {
        assert!(r.pass, "{}", r.summary());
    }
}

#[test]
fn suites_are_deterministic() {
    let cfg = SuiteConfig { seed: 9, replicates: Some(2_000), refinement: None };
    let a = run_suite(Suite::Rewire, &cfg).unwrap();
    let b = run_suite(Suite::Rewire, &cfg).unwrap();
    assert_eq!(a.data, b.data);
    let values = |o: &gffm::verify::SuiteOutcome| o.reports.iter().map(|r| r.value).collect::<Vec<_>>();
    assert_eq!(values(&a), values(&b));
}

#[test]
fn annulus_probe_runs() {
    let shape = GridShape { rows: 8, cols: 10, periodic: true };
    let (net, bc) = grid(shape).unwrap();
    let r = grid_resistance(&net, &bc).unwrap();
    let (xs, r2) = lattice_probe(shape, 200, 1).unwrap();
    assert_eq!(r, r2);
    assert_eq!(xs.len(), 200);
    assert!(xs.iter().all(|&x| x >= 0.0));
}

#[test]
fn unknown_suite_is_rejected() {
    assert!("eq2".parse::<Suite>().is_err());
}
