mod common;

use capillary_core::capillary::{build_capillary, hunt_bottlenecks, FixedLoads};
use capillary_core::lpcore::{FlowLp, LpStatus, EPS_LOAD};
use capillary_core::manetgen::{generate_samples, ManetConfig};
use capillary_core::netmodel::Network;
use capillary_core::CapillaryResult;

fn assert_invariants(net: &Network, r: &CapillaryResult) {
    assert!(!r.layers.is_empty());
    assert_eq!(r.layer_patterns.len(), r.layers.len());
    let mut seen = vec![false; net.link_count()];
    for (i, layer) in r.layers.iter().enumerate() {
        assert_eq!(layer.k, i + 1);
        if i > 0 {
            assert!(
                layer.u <= r.layers[i - 1].u + EPS_LOAD,
                "u not monotone: {:?}",
                r.layers
            );
        }
        assert!(layer.hunting_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(
            *layer.hunting_trace.last().unwrap(),
            layer.bottlenecks.len()
        );
        for &l in &layer.bottlenecks {
            assert!(!seen[l], "link {l} frozen twice");
            seen[l] = true;
        }
    }
    for (i, pattern) in r.layer_patterns.iter().enumerate() {
        pattern
            .check(net, 1e-7)
            .unwrap_or_else(|e| panic!("layer {}: {e}", i + 1));
        for layer in &r.layers[..=i] {
            for &l in &layer.bottlenecks {
                assert!((pattern.loads[l] - layer.u).abs() <= EPS_LOAD);
            }
        }
    }
}

#[test]
fn first_layer_is_reciprocal_max_flow() {
    let mut rng = common::rng(0x5eed_0101);
    for _ in 0..100 {
        let net = common::random_connected(&mut rng, 20, 0.2);
        let flow = common::unit_max_flow(net.node_count(), net.links(), net.source(), net.sink());
        let r = build_capillary(&net, 1).unwrap();
        assert!((r.layers[0].u - 1.0 / flow as f64).abs() <= 1e-7);
    }
}

#[test]
fn invariants_hold_on_random_graphs() {
    let mut rng = common::rng(0x5eed_0102);
    for _ in 0..60 {
        let net = common::random_connected(&mut rng, 18, 0.25);
        let r = build_capillary(&net, 10).unwrap();
        assert_invariants(&net, &r);
    }
}

#[test]
fn series_bundles_freeze_one_bundle_per_layer() {
    let net = common::series_bundles(&[2, 3, 4]);
    let r = build_capillary(&net, 10).unwrap();
    assert_invariants(&net, &r);
    let us: Vec<f64> = r.layers.iter().map(|l| l.u).collect();
    assert_eq!(us.len(), 3);
    for (u, d) in us.iter().zip([2.0, 3.0, 4.0]) {
        assert!((u - 1.0 / d).abs() <= 1e-9, "{us:?}");
    }
    let counts: Vec<usize> = r.layers.iter().map(|l| l.bottlenecks.len()).collect();
    assert_eq!(counts, vec![4, 9, 16]);
    assert!(r.complete);
}

#[test]
fn bundle_order_does_not_matter() {
    let net = common::series_bundles(&[4, 2, 3]);
    let r = build_capillary(&net, 10).unwrap();
    let counts: Vec<usize> = r.layers.iter().map(|l| l.bottlenecks.len()).collect();
    assert_eq!(counts, vec![4, 9, 16]);
}

/// Smallest load a link can carry while every non-fixed load stays at most
/// `u`. A link is a true bottleneck iff this minimum equals `u`.
fn min_load_on_optimal_face(net: &Network, u: f64, link: usize) -> f64 {
    let mut lp = FlowLp::new(net);
    for l in 0..net.link_count() {
        lp.cap_load(l, u);
    }
    lp.add_load_cost(link, 1.0);
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective_value
}

#[test]
fn hunting_separates_true_bottlenecks() {
    let net = common::detour_fixture();
    let truth: Vec<usize> = (0..net.link_count())
        .filter(|&l| min_load_on_optimal_face(&net, 0.5, l) >= 0.5 - EPS_LOAD)
        .collect();
    assert_eq!(truth, vec![0, 1, 3]);

    let fixed = FixedLoads::new(net.link_count());
    let all: Vec<usize> = (0..net.link_count()).collect();
    let hunt = hunt_bottlenecks(&net, &fixed, 0.5, all, 1).unwrap();
    assert_eq!(hunt.bottlenecks, truth);
    assert_eq!(hunt.trace[0], 7);
    assert_eq!(*hunt.trace.last().unwrap(), 3);
    assert!(hunt.trace.windows(2).all(|w| w[1] <= w[0]));

    let r = build_capillary(&net, 10).unwrap();
    assert_invariants(&net, &r);
    assert_eq!(r.layers[0].bottlenecks, truth);
    assert_eq!(r.layers.len(), 2);
    assert!((r.layers[1].u - 0.25).abs() <= 1e-9);
    assert_eq!(r.layers[1].bottlenecks, vec![2, 4, 5, 6]);
    assert!(r.complete);
}

#[test]
fn bridge_stays_empty_in_every_pattern() {
    let net = common::bridge();
    let r = build_capillary(&net, 10).unwrap();
    assert_invariants(&net, &r);
    assert!(r.layer_patterns.iter().all(|p| p.loads[4] == 0.0));
}

#[test]
fn pattern_past_last_layer_is_final() {
    let r = build_capillary(&common::diamond(), 10).unwrap();
    assert_eq!(r.pattern_at(7), &r.pattern);
    assert_eq!(r.pattern_at(1), &r.pattern);
}

#[test]
fn fifty_node_sample_regression() {
    let cfg = ManetConfig::with_defaults(50, 1, 42);
    let sample = &generate_samples(&cfg).unwrap()[0];
    assert!(sample.accepted);
    let net = &sample.network;
    let r = build_capillary(net, 10).unwrap();
    assert_invariants(net, &r);
    let us: Vec<f64> = r.layers.iter().map(|l| l.u).collect();
    let counts: Vec<usize> = r.layers.iter().map(|l| l.bottlenecks.len()).collect();
    assert_eq!(r.layers.len(), PINNED_LAYERS);
    assert_eq!(counts, PINNED_COUNTS);
    assert!(!r.complete);
    for (u, e) in us.iter().zip(PINNED_U) {
        assert!((u - e).abs() <= 1e-9, "{us:?}");
    }
}

const PINNED_LAYERS: usize = 10;
const PINNED_COUNTS: [usize; 10] = [18, 33, 6, 6, 3, 6, 3, 3, 6, 3];
const PINNED_U: [f64; 10] = [
    0.11111111111111105,
    0.03703703703703704,
    0.030864197530864158,
    0.02983539094650213,
    0.024691358024691357,
    0.01851851851851851,
    0.016803840877914894,
    0.012345679012345668,
    0.008230452674897155,
    0.006172839506172822,
];

#[test]
fn larger_sample_mixes_fixed_and_residual_links() {
    let cfg = ManetConfig::with_defaults(150, 1, 7);
    let sample = &generate_samples(&cfg).unwrap()[0];
    let net = &sample.network;
    let r = build_capillary(net, 10).unwrap();
    assert_invariants(net, &r);
    let fixed = r.fixed.count();
    let footprint = r.pattern.footprint(EPS_LOAD).len();
    println!(
        "150 nodes: {} links, {} layers, {fixed} fixed, {} residual",
        net.link_count(),
        r.layers.len(),
        footprint - fixed
    );
    assert!(footprint >= fixed);
}
