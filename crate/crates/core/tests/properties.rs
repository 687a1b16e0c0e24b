use nalgebra::DMatrix;
use proptest::prelude::*;

use lasdg::controllers::{theta_default, Controller, EtaSchedule, HeavyBall, LaSdg};
use lasdg::harness::SimulationConfig;
use lasdg::lagrangian::{
    dual_value, minimize_lagrangian, minimize_lagrangian_iterative, stochastic_dual_gradient, IterativeOptions,
    QuadraticCost, SlotProblem,
};
use lasdg::network::{parse_network, queue_update, write_network, BoxSet, Edge, NetworkGraph};

/// Graphs where every node has an outgoing edge: node `i` either drains to
/// the sink or points at a random other node, plus extra random links.
fn graph_strategy() -> impl Strategy<Value = NetworkGraph> {
    (1usize..6)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((any::<bool>(), 0usize..n), n),
                prop::collection::vec((0usize..n, 0usize..n), 0..6),
            )
        })
        .prop_map(|(n, first, extra)| {
            let mut edges = Vec::new();
            for (i, (drain, to)) in first.into_iter().enumerate() {
                if drain || n == 1 || to == i {
                    edges.push(Edge::to_virtual(i));
                } else {
                    edges.push(Edge::new(i, to));
                }
            }
            for (s, d) in extra {
                if s != d {
                    edges.push(Edge::new(s, d));
                }
            }
            NetworkGraph::new(n, edges).unwrap()
        })
}

fn slot_strategy(g: &NetworkGraph) -> impl Strategy<Value = SlotProblem> {
    let (n, m) = (g.node_count(), g.edge_count());
    let g = g.clone();
    (
        prop::collection::vec(0.05f64..5.0, m),
        prop::collection::vec(0.0f64..10.0, n),
        prop::collection::vec(0.1f64..50.0, m),
    )
        .prop_map(move |(a, c, u)| SlotProblem::new(QuadraticCost::new(a, 0.0).unwrap(), c, u, &g).unwrap())
}

fn instance() -> impl Strategy<Value = (NetworkGraph, SlotProblem, Vec<f64>, Vec<f64>)> {
    graph_strategy().prop_flat_map(|g| {
        let n = g.node_count();
        (
            slot_strategy(&g),
            prop::collection::vec(0.0f64..200.0, n),
            prop::collection::vec(0.0f64..200.0, n),
            Just(g),
        )
            .prop_map(|(s, l1, l2, g)| (g, s, l1, l2))
    })
}

fn dense_incidence(g: &NetworkGraph) -> DMatrix<f64> {
    DMatrix::from_fn(g.node_count(), g.edge_count(), |i, e| f64::from(g.incidence(i, e)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn queue_update_is_projected_dense_balance(
        (g, slot, q, _) in instance(),
        x_frac in prop::collection::vec(0.0f64..1.0, 16),
    ) {
        let x: Vec<f64> = slot.upper.iter().enumerate().map(|(e, u)| u * x_frac[e % 16]).collect();
        let next = queue_update(&q, &x, &slot.arrivals, &g).unwrap();
        let ax = dense_incidence(&g) * DMatrix::from_column_slice(x.len(), 1, &x);
        for i in 0..g.node_count() {
            let raw = q[i] + ax[(i, 0)] + slot.arrivals[i];
            prop_assert!(next[i] >= 0.0);
            prop_assert!((next[i] - raw.max(0.0)).abs() <= 1e-9 * (1.0 + raw.abs()));
        }
    }

    #[test]
    fn spectral_radius_matches_dense_eigensolver(g in graph_strategy()) {
        let a = dense_incidence(&g);
        let ata = a.transpose() * &a;
        let exact = ata.symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max);
        let power = g.spectral_radius_ata().unwrap();
        prop_assert!((power - exact).abs() <= 1e-8 * exact.max(1.0), "power {} vs eigen {}", power, exact);
    }

    #[test]
    fn closed_form_matches_projected_gradient((g, slot, lam, _) in instance()) {
        let a = minimize_lagrangian(&lam, &slot, &g).unwrap();
        let b = minimize_lagrangian_iterative(&lam, &slot.cost, &slot.upper, &g, IterativeOptions::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        prop_assert!(BoxSet::new(slot.upper.clone()).unwrap().contains(&a));
    }

    #[test]
    fn dual_is_concave_with_smooth_gradient((g, slot, l1, l2) in instance()) {
        let mid: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| 0.5 * (a + b)).collect();
        let d1 = dual_value(&l1, &slot, &g).unwrap();
        let d2 = dual_value(&l2, &slot, &g).unwrap();
        let dm = dual_value(&mid, &slot, &g).unwrap();
        prop_assert!(dm >= 0.5 * (d1 + d2) - 1e-9 * (1.0 + dm.abs()));

        let g1 = stochastic_dual_gradient(&l1, &slot, &g).unwrap();
        let g2 = stochastic_dual_gradient(&l2, &slot, &g).unwrap();
        let num = g1.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = l1.iter().zip(&l2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let sigma = 2.0 * slot.cost.coeffs().iter().copied().fold(f64::INFINITY, f64::min);
        let bound = g.spectral_radius_ata().unwrap() / sigma;
        prop_assert!(num <= bound * den + 1e-8);
    }

    #[test]
    fn la_sdg_state_stays_nonnegative(
        (g, slot, _, _) in instance(),
        mu in 0.01f64..1.0,
        scale in 0.0f64..200.0,
    ) {
        let theta = theta_default(mu, scale, g.node_count()).unwrap();
        let mut c = LaSdg::new(&g, mu, theta, EtaSchedule::InvSqrt).unwrap();
        for _ in 0..50 {
            let x = c.step(&slot, &g).unwrap().to_vec();
            prop_assert!(BoxSet::new(slot.upper.clone()).unwrap().contains(&x));
            prop_assert!(c.queue().iter().chain(c.lambda_hat()).all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn heavy_ball_stays_nonnegative((g, slot, lam, _) in instance(), beta in 0.0f64..0.999) {
        let mut c = HeavyBall::with_initial(&g, 0.3, beta, lam).unwrap();
        for _ in 0..50 {
            c.step(&slot, &g).unwrap();
            prop_assert!(c.multipliers().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn network_text_round_trips((g, slot, _, _) in instance()) {
        let caps = BoxSet::new(slot.upper.clone()).unwrap();
        let text = write_network(&g, &caps).unwrap();
        let (g2, caps2) = parse_network(&text).unwrap();
        prop_assert_eq!(g.edges(), g2.edges());
        prop_assert_eq!(g.node_count(), g2.node_count());
        for (a, b) in caps.upper().iter().zip(caps2.upper()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn simulation_config_round_trips(
        horizon in 1u64..1_000_000,
        realizations in 1usize..100,
        seed in any::<u64>(),
        mu in 1e-4f64..2.0,
        beta in 0.0f64..0.999,
        frac in 0.01f64..1.0,
        price_lo in 0.0f64..30.0,
        sweep in prop::collection::vec(1e-3f64..1.0, 0..4),
    ) {
        let mut cfg = SimulationConfig { horizon, realizations, seed, window_fraction: frac, sweep_mu: sweep, ..SimulationConfig::default() };
        cfg.controller.mu = mu;
        cfg.controller.beta = beta;
        cfg.scenario.price.lo = price_lo;
        let back = SimulationConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
