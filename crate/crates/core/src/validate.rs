//! Quick invariant suite behind `lasdg validate`.

use crate::controllers::{theta_default, Controller, EtaSchedule, LaSdg, Sdg};
use crate::distributed::DistributedLaSdg;
use crate::error::Result;
use crate::lagrangian::{
    dual_value, minimize_lagrangian, minimize_lagrangian_iterative, stochastic_dual_gradient, IterativeOptions,
};
use crate::network::queue_update;
use crate::rng::{self, Purpose};
use crate::scenario::{GeoInstance, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs every check on the default instance drawn from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let inst = GeoInstance::new(ScenarioConfig {
        instance_seed: seed,
        ..ScenarioConfig::default()
    })?;
    Ok(vec![
        minimizers_agree(&inst, seed)?,
        sdg_queue_identity(&inst, seed)?,
        distributed_matches(seed)?,
        envelope(&inst, seed)?,
        queues_nonnegative(&inst, seed)?,
        slater(&inst),
    ])
}

fn random_prices<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng::uniform(rng, 0.0, 4000.0)).collect()
}

fn minimizers_agree(inst: &GeoInstance, seed: u64) -> Result<Check> {
    let mut rng = rng::stream(seed, Purpose::Probe);
    let g = inst.graph();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let slot = inst.slot_problem(&inst.sample_state(&mut rng))?;
        let lam = random_prices(&mut rng, g.node_count());
        let a = minimize_lagrangian(&lam, &slot, g)?;
        let b = minimize_lagrangian_iterative(&lam, &slot.cost, &slot.upper, g, IterativeOptions::default())?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(check("closed_form_vs_iterative", worst <= 1e-8, format!("max |Δx| = {worst:e}")))
}

fn sdg_queue_identity(inst: &GeoInstance, seed: u64) -> Result<Check> {
    let g = inst.graph();
    let mu = 0.25;
    let mut sdg = Sdg::new(g, mu)?;
    let mut q = vec![0.0; g.node_count()];
    let mut rng = rng::stream(seed, Purpose::State);
    let mut worst = 0.0_f64;
    for _ in 0..2000 {
        let slot = inst.slot_problem(&inst.sample_state(&mut rng))?;
        let x = sdg.step(&slot, g)?;
        q = queue_update(&q, x, &slot.arrivals, g)?;
        for (l, qi) in sdg.multipliers().iter().zip(&q) {
            worst = worst.max((l - mu * qi).abs());
        }
    }
    Ok(check("sdg_virtual_queue", worst == 0.0, format!("max |λ − μq| = {worst:e}")))
}

fn distributed_matches(seed: u64) -> Result<Check> {
    let inst = GeoInstance::new(ScenarioConfig {
        mapping_nodes: 2,
        data_centers: 2,
        instance_seed: seed,
        ..ScenarioConfig::default()
    })?;
    let g = inst.graph();
    let theta = theta_default(0.2, 100.0, g.node_count())?;
    let mut central = LaSdg::new(g, 0.2, theta.clone(), EtaSchedule::InvSqrt)?;
    let mut dist = DistributedLaSdg::new(g, 0.2, &theta, EtaSchedule::InvSqrt)?;
    let mut rng = rng::stream(seed, Purpose::State);
    let mut same = true;
    for _ in 0..500 {
        let slot = inst.slot_problem(&inst.sample_state(&mut rng))?;
        central.step(&slot, g)?;
        dist.step(&slot, g)?;
        same &= central.queue() == dist.queues().as_slice() && central.lambda_hat() == dist.lambda_hats().as_slice();
    }
    Ok(check("distributed_equals_centralized", same, "500 slots, J = K = 2".into()))
}

fn envelope(inst: &GeoInstance, seed: u64) -> Result<Check> {
    let mut rng = rng::stream(seed ^ 0x5eed, Purpose::Probe);
    let g = inst.graph();
    let delta = 1e-5;
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let slot = inst.slot_problem(&inst.sample_state(&mut rng))?;
        let lam = random_prices(&mut rng, g.node_count());
        let grad = stochastic_dual_gradient(&lam, &slot, g)?;
        let mut u: Vec<f64> = (0..lam.len()).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        let plus: Vec<f64> = lam.iter().zip(&u).map(|(l, d)| l + delta * d).collect();
        let minus: Vec<f64> = lam.iter().zip(&u).map(|(l, d)| l - delta * d).collect();
        let fd = (dual_value(&plus, &slot, g)? - dual_value(&minus, &slot, g)?) / (2.0 * delta);
        let exact: f64 = grad.iter().zip(&u).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    Ok(check("dual_envelope", worst <= 1e-4, format!("max relative error = {worst:e}")))
}

fn queues_nonnegative(inst: &GeoInstance, seed: u64) -> Result<Check> {
    let g = inst.graph();
    let mut c = LaSdg::new(g, 0.2, theta_default(0.2, 100.0, g.node_count())?, EtaSchedule::InvSqrt)?;
    let mut rng = rng::stream(seed, Purpose::State);
    let mut ok = true;
    for _ in 0..2000 {
        let slot = inst.slot_problem(&inst.sample_state(&mut rng))?;
        c.step(&slot, g)?;
        ok &= c.queue().iter().chain(c.lambda_hat()).all(|v| *v >= 0.0);
    }
    Ok(check("nonnegative_state", ok, "2000 LA-SDG slots".into()))
}

fn slater(inst: &GeoInstance) -> Check {
    let zeta = inst.slater_slack();
    check("slater_slack", zeta > 0.0, format!("ζ = {zeta}"))
}
