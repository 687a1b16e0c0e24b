use lasdg::harness::oracle_solve;
use lasdg::lagrangian::{stochastic_dual_gradient, SlotProblem};
use lasdg::oracle::{
    growth_ratio, saa_dual_solve, sample_average_with, solve_ensemble_dual, FiniteSupportDistribution, SolverOptions,
};
use lasdg::rng::{self, Purpose};
use lasdg::scenario::{GeoInstance, ScenarioConfig};
use rand::Rng;

fn small_instance() -> GeoInstance {
    GeoInstance::new(ScenarioConfig {
        mapping_nodes: 2,
        data_centers: 2,
        ..ScenarioConfig::default()
    })
    .unwrap()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn four_atom_gradient_matches_monte_carlo() {
    let inst = small_instance();
    let g = inst.graph();
    let mut rng = rng::stream(21, Purpose::Probe);
    let atoms: Vec<SlotProblem> = (0..4).map(|_| inst.slot_problem(&inst.sample_state(&mut rng)).unwrap()).collect();
    let probs = [0.1, 0.2, 0.3, 0.4];
    let dist = FiniteSupportDistribution::new(&atoms, &probs, g).unwrap();
    let lam: Vec<f64> = (0..g.node_count()).map(|_| rng::uniform(&mut rng, 1500.0, 2500.0)).collect();
    let exact = dist.exact_expected_gradient(&lam, g).unwrap();

    let per_atom: Vec<Vec<f64>> = atoms.iter().map(|a| stochastic_dual_gradient(&lam, a, g).unwrap()).collect();
    let draws = 1_000_000;
    let n = g.node_count();
    let (mut sum, mut sq) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..draws {
        let u: f64 = rng.gen();
        let k = probs.iter().scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        });
        let idx = k.take_while(|c| *c <= u).count().min(3);
        for i in 0..n {
            sum[i] += per_atom[idx][i];
            sq[i] += per_atom[idx][i] * per_atom[idx][i];
        }
    }
    for i in 0..n {
        let mean = sum[i] / draws as f64;
        let var = (sq[i] / draws as f64 - mean * mean).max(0.0);
        let se = (var / draws as f64).sqrt();
        assert!((mean - exact[i]).abs() <= 3.0 * se + 1e-9, "node {i}: mc {mean} ± {se}, exact {}", exact[i]);
    }
}

#[test]
fn opposite_arrival_perturbations_cancel() {
    let inst = small_instance();
    let g = inst.graph();
    let base = inst.slot_problem(&inst.sample_state(&mut rng::stream(2, Purpose::State))).unwrap();
    let shifted = |delta: f64| {
        let c: Vec<f64> = base.arrivals.iter().map(|c| c + delta).collect();
        SlotProblem::new(base.cost.clone(), c, base.upper.clone(), g).unwrap()
    };
    let dist = FiniteSupportDistribution::uniform(&[shifted(7.5), shifted(-7.5)], g).unwrap();
    let lam = vec![1800.0, 2100.0, 1900.0, 2000.0];
    let expected = stochastic_dual_gradient(&lam, &base, g).unwrap();
    for (a, b) in dist.exact_expected_gradient(&lam, g).unwrap().iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
    }
}

#[test]
fn single_sample_solve_maximizes_that_slot_dual() {
    let inst = small_instance();
    let g = inst.graph();
    let atom = inst.slot_problem(&inst.sample_state(&mut rng::stream(6, Purpose::State))).unwrap();
    let report = saa_dual_solve(std::slice::from_ref(&atom), g, &SolverOptions::default()).unwrap();
    assert_eq!(report.sample_count, 1);
    let grad = stochastic_dual_gradient(&report.lambda, &atom, g).unwrap();
    let projected: Vec<f64> =
        report.lambda.iter().zip(&grad).map(|(l, gi)| if *l > 0.0 { *gi } else { gi.max(0.0) }).collect();
    assert!(norm(&projected) <= 1e-8, "{projected:?}");
    assert_eq!(growth_ratio(&FiniteSupportDistribution::uniform(&[atom], g).unwrap(), g, &report.lambda, report.dual_value, &report.lambda).unwrap(), None);
}

#[test]
fn sixty_four_atom_solve_is_stationary() {
    let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
    let (_, report) = oracle_solve(&inst, 64, 17, 1e-9).unwrap();
    assert!(report.stationarity <= 1e-8, "{}", report.stationarity);
    assert!(report.primal_violation <= 1e-8, "{}", report.primal_violation);
    assert_eq!(report.clip_events, 0);
    assert!(report.lambda.iter().all(|l| *l > 0.0));
}

#[test]
fn disjoint_sample_sets_agree() {
    let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
    let g = inst.graph();
    let mut rng = rng::stream(17, Purpose::Oracle);
    let a = sample_average_with(&inst, 10_000, &mut rng).unwrap();
    let b = sample_average_with(&inst, 10_000, &mut rng).unwrap();
    let la = solve_ensemble_dual(&a, g, &SolverOptions::default()).unwrap().lambda;
    let lb = solve_ensemble_dual(&b, g, &SolverOptions::default()).unwrap().lambda;
    let rel = distance(&la, &lb) / norm(&la);
    assert!(rel <= 0.05, "relative difference {rel}");
}

#[test]
fn nested_sample_averages_settle() {
    let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
    let g = inst.graph();
    let mut rng = rng::stream(29, Purpose::Oracle);
    let atoms: Vec<SlotProblem> =
        (0..10_000).map(|_| inst.slot_problem(&inst.sample_state(&mut rng)).unwrap()).collect();
    let solve = |n: usize| saa_dual_solve(&atoms[..n], g, &SolverOptions::default()).unwrap().lambda;
    let (l2, l3, l4) = (solve(100), solve(1000), solve(10_000));
    let (d23, d34) = (distance(&l2, &l3), distance(&l3, &l4));
    assert!(d34 < d23, "{d23} then {d34}");
}

#[test]
fn uniform_and_weighted_builders_agree() {
    let inst = small_instance();
    let g = inst.graph();
    let mut rng = rng::stream(13, Purpose::Probe);
    let atoms: Vec<SlotProblem> = (0..8).map(|_| inst.slot_problem(&inst.sample_state(&mut rng)).unwrap()).collect();
    let u = FiniteSupportDistribution::uniform(&atoms, g).unwrap();
    let w = FiniteSupportDistribution::new(&atoms, &[0.125; 8], g).unwrap();
    let lam = vec![2000.0; g.node_count()];
    assert_eq!(u.exact_expected_gradient(&lam, g).unwrap(), w.exact_expected_gradient(&lam, g).unwrap());
}
