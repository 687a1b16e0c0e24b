//! Geographic load balancing instance and its random states.
//!
//! `J` mapping nodes (indices `0..J`) forward workload to `K` data centers
//! (indices `J..J+K`) over a full bipartite set of mapping links, and each
//! data center drains into the virtual sink. Edge `j·K + k` is the link from
//! mapping node `j` to data center `k`; edge `J·K + k` is the drain of data
//! center `k`.
//!
//! Per slot the cost is `Σ_k p_k (x_k0² − e_k) + Σ_jk b_jk x_jk²` with
//! energy prices `p`, renewable supply `e` and per-unit bandwidth costs `b`.
//! Bandwidth limits are drawn once per instance; by default so are
//! data-center capacities, and with `per_slot_capacity` they are redrawn
//! every slot inside the static box `[0, capacity_max]`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::lagrangian::{QuadraticCost, SlotProblem};
use crate::network::{BoxSet, Edge, NetworkGraph};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn validate(&self, name: &str, strictly_positive: bool) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.hi < self.lo {
            return Err(Error::InvalidInterval {
                name: name.to_string(),
                lower: self.lo,
                upper: self.hi,
            });
        }
        if strictly_positive && !(self.lo > 0.0) {
            return Err(Error::invalid(format!("{name}_min"), "must be positive"));
        }
        if self.lo < 0.0 {
            return Err(Error::invalid(format!("{name}_min"), "must be nonnegative"));
        }
        Ok(())
    }
}

/// How per-unit bandwidth costs derive from link limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthCost {
    /// `b_jk = numerator / x̄_jk`.
    Inverse { numerator: f64 },
    /// `b_jk = value` for every link.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mapping_nodes: usize,
    pub data_centers: usize,
    /// Energy price, $ per squared workload unit.
    pub price: Interval,
    /// Renewable supply, workload units.
    pub renewable: Interval,
    /// Arrivals per mapping node per slot, workload units.
    pub arrival: Interval,
    /// Mapping link limits, workload units per slot.
    pub bandwidth_limit: Interval,
    /// Data-center service capacity, workload units per slot.
    pub capacity: Interval,
    pub bandwidth_cost: BandwidthCost,
    pub per_slot_capacity: bool,
    /// Seed for the one-off instance draws.
    pub instance_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mapping_nodes: 10,
            data_centers: 10,
            price: Interval::new(10.0, 30.0),
            renewable: Interval::new(10.0, 100.0),
            arrival: Interval::new(10.0, 100.0),
            bandwidth_limit: Interval::new(100.0, 200.0),
            capacity: Interval::new(100.0, 200.0),
            bandwidth_cost: BandwidthCost::Inverse { numerator: 40.0 },
            per_slot_capacity: false,
            instance_seed: 1,
        }
    }
}

pub const SCENARIO_KEYS: &[&str] = &[
    "mapping_nodes",
    "data_centers",
    "price_min",
    "price_max",
    "renewable_min",
    "renewable_max",
    "arrival_min",
    "arrival_max",
    "bandwidth_limit_min",
    "bandwidth_limit_max",
    "capacity_min",
    "capacity_max",
    "bandwidth_cost_rule",
    "bandwidth_cost_value",
    "per_slot_capacity",
    "instance_seed",
];

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mapping_nodes == 0 {
            return Err(Error::invalid("mapping_nodes", "must be at least 1"));
        }
        if self.data_centers == 0 {
            return Err(Error::invalid("data_centers", "must be at least 1"));
        }
        self.price.validate("price", true)?;
        self.renewable.validate("renewable", false)?;
        self.arrival.validate("arrival", false)?;
        self.bandwidth_limit.validate("bandwidth_limit", true)?;
        self.capacity.validate("capacity", false)?;
        match self.bandwidth_cost {
            BandwidthCost::Inverse { numerator: v } | BandwidthCost::Constant { value: v } => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid("bandwidth_cost_value", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Parses a standalone scenario file; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let cfg = Self::take_from(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    /// Claims the scenario keys from `kv`, leaving the rest.
    pub fn take_from(kv: &mut KvFile) -> Result<Self> {
        let d = Self::default();
        let interval = |kv: &mut KvFile, name: &str, def: Interval| -> Result<Interval> {
            Ok(Interval::new(
                kv.take(&format!("{name}_min"))?.unwrap_or(def.lo),
                kv.take(&format!("{name}_max"))?.unwrap_or(def.hi),
            ))
        };
        let price = interval(kv, "price", d.price)?;
        let renewable = interval(kv, "renewable", d.renewable)?;
        let arrival = interval(kv, "arrival", d.arrival)?;
        let bandwidth_limit = interval(kv, "bandwidth_limit", d.bandwidth_limit)?;
        let capacity = interval(kv, "capacity", d.capacity)?;
        let rule = kv.take_raw("bandwidth_cost_rule");
        let value: Option<f64> = kv.take("bandwidth_cost_value")?;
        let bandwidth_cost = match rule {
            None => BandwidthCost::Inverse {
                numerator: value.unwrap_or(40.0),
            },
            Some((_, r)) if r == "inverse" => BandwidthCost::Inverse {
                numerator: value.unwrap_or(40.0),
            },
            Some((_, r)) if r == "constant" => BandwidthCost::Constant {
                value: value.unwrap_or(0.25),
            },
            Some((line, r)) => {
                return Err(Error::Parse {
                    line,
                    message: format!("bandwidth_cost_rule must be `inverse` or `constant`, got `{r}`"),
                })
            }
        };
        let cfg = Self {
            mapping_nodes: kv.take("mapping_nodes")?.unwrap_or(d.mapping_nodes),
            data_centers: kv.take("data_centers")?.unwrap_or(d.data_centers),
            price,
            renewable,
            arrival,
            bandwidth_limit,
            capacity,
            bandwidth_cost,
            per_slot_capacity: kv.take_bool("per_slot_capacity")?.unwrap_or(d.per_slot_capacity),
            instance_seed: kv.take("instance_seed")?.unwrap_or(d.instance_seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_to(&self, out: &mut String) {
        let _ = writeln!(out, "mapping_nodes = {}", self.mapping_nodes);
        let _ = writeln!(out, "data_centers = {}", self.data_centers);
        for (name, iv) in [
            ("price", self.price),
            ("renewable", self.renewable),
            ("arrival", self.arrival),
            ("bandwidth_limit", self.bandwidth_limit),
            ("capacity", self.capacity),
        ] {
            let _ = writeln!(out, "{name}_min = {:?}", iv.lo);
            let _ = writeln!(out, "{name}_max = {:?}", iv.hi);
        }
        let (rule, value) = match self.bandwidth_cost {
            BandwidthCost::Inverse { numerator } => ("inverse", numerator),
            BandwidthCost::Constant { value } => ("constant", value),
        };
        let _ = writeln!(out, "bandwidth_cost_rule = {rule}");
        let _ = writeln!(out, "bandwidth_cost_value = {value:?}");
        let _ = writeln!(out, "per_slot_capacity = {}", self.per_slot_capacity);
        let _ = writeln!(out, "instance_seed = {}", self.instance_seed);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_to(&mut s);
        s
    }
}

/// One slot's random state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    /// Energy price per data center.
    pub prices: Vec<f64>,
    /// Renewable supply per data center.
    pub renewables: Vec<f64>,
    /// Per-unit bandwidth cost per mapping link, `j·K + k` order.
    pub bandwidth_coeffs: Vec<f64>,
    /// Arrivals per node; zero at data centers.
    pub arrivals: Vec<f64>,
    /// Per-slot edge capacities overriding the static box.
    pub slot_capacities: Option<Vec<f64>>,
}

/// A drawn instance: topology, static box and bandwidth costs.
#[derive(Debug, Clone)]
pub struct GeoInstance {
    config: ScenarioConfig,
    graph: NetworkGraph,
    capacity: BoxSet,
    bandwidth_limits: Vec<f64>,
    bandwidth_coeffs: Vec<f64>,
}

impl GeoInstance {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let (j_count, k_count) = (config.mapping_nodes, config.data_centers);
        let mut edges = Vec::with_capacity(j_count * k_count + k_count);
        for j in 0..j_count {
            for k in 0..k_count {
                edges.push(Edge::new(j, j_count + k));
            }
        }
        for k in 0..k_count {
            edges.push(Edge::to_virtual(j_count + k));
        }
        let graph = NetworkGraph::new(j_count + k_count, edges)?;

        let mut rng = rng::stream(config.instance_seed, Purpose::Instance);
        let bl = config.bandwidth_limit;
        let bandwidth_limits: Vec<f64> = (0..j_count * k_count)
            .map(|_| rng::uniform(&mut rng, bl.lo, bl.hi))
            .collect();
        let cap = config.capacity;
        let dc_caps: Vec<f64> = (0..k_count)
            .map(|_| {
                if config.per_slot_capacity {
                    cap.hi
                } else {
                    rng::uniform(&mut rng, cap.lo, cap.hi)
                }
            })
            .collect();
        let bandwidth_coeffs = bandwidth_limits
            .iter()
            .map(|&limit| match config.bandwidth_cost {
                BandwidthCost::Inverse { numerator } => numerator / limit,
                BandwidthCost::Constant { value } => value,
            })
            .collect();
        let mut upper = bandwidth_limits.clone();
        upper.extend_from_slice(&dc_caps);
        let capacity = BoxSet::new(upper)?;
        Ok(Self {
            config,
            graph,
            capacity,
            bandwidth_limits,
            bandwidth_coeffs,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn capacity(&self) -> &BoxSet {
        &self.capacity
    }

    pub fn bandwidth_limits(&self) -> &[f64] {
        &self.bandwidth_limits
    }

    pub fn bandwidth_coeffs(&self) -> &[f64] {
        &self.bandwidth_coeffs
    }

    pub fn mapping_nodes(&self) -> usize {
        self.config.mapping_nodes
    }

    pub fn data_centers(&self) -> usize {
        self.config.data_centers
    }

    pub fn drain_edge(&self, k: usize) -> usize {
        self.config.mapping_nodes * self.config.data_centers + k
    }

    /// Draws one slot. Order: prices, renewables, arrivals, then per-slot
    /// capacities when enabled.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> StateSample {
        let (j_count, k_count) = (self.config.mapping_nodes, self.config.data_centers);
        let c = &self.config;
        let prices = (0..k_count).map(|_| rng::uniform(rng, c.price.lo, c.price.hi)).collect();
        let renewables = (0..k_count)
            .map(|_| rng::uniform(rng, c.renewable.lo, c.renewable.hi))
            .collect();
        let mut arrivals = vec![0.0; j_count + k_count];
        for a in arrivals.iter_mut().take(j_count) {
            *a = rng::uniform(rng, c.arrival.lo, c.arrival.hi);
        }
        let slot_capacities = self.config.per_slot_capacity.then(|| {
            let mut caps = self.capacity.upper().to_vec();
            for k in 0..k_count {
                caps[j_count * k_count + k] = rng::uniform(rng, c.capacity.lo, c.capacity.hi);
            }
            caps
        });
        StateSample {
            prices,
            renewables,
            bandwidth_coeffs: self.bandwidth_coeffs.clone(),
            arrivals,
            slot_capacities,
        }
    }

    /// Per-slot Lagrangian data. The `−Σ p e` term becomes the cost constant.
    pub fn slot_problem(&self, state: &StateSample) -> Result<SlotProblem> {
        let (j_count, k_count) = (self.config.mapping_nodes, self.config.data_centers);
        crate::error::check_len("prices", k_count, state.prices.len())?;
        crate::error::check_len("renewables", k_count, state.renewables.len())?;
        crate::error::check_len("bandwidth coefficients", j_count * k_count, state.bandwidth_coeffs.len())?;
        let mut coeffs = state.bandwidth_coeffs.clone();
        coeffs.extend_from_slice(&state.prices);
        let constant = -state
            .prices
            .iter()
            .zip(&state.renewables)
            .map(|(p, e)| p * e)
            .sum::<f64>();
        let upper = match &state.slot_capacities {
            Some(caps) => {
                crate::error::check_len("slot capacities", self.graph.edge_count(), caps.len())?;
                caps.iter()
                    .zip(self.capacity.upper())
                    .map(|(s, u)| s.min(*u))
                    .collect()
            }
            None => self.capacity.upper().to_vec(),
        };
        SlotProblem::new(QuadraticCost::new(coeffs, constant)?, state.arrivals.clone(), upper, &self.graph)
    }

    /// `Σ_k p_k (x_k0² − e_k) + Σ_jk b_jk x_jk²`.
    pub fn evaluate_cost(&self, x: &[f64], state: &StateSample) -> Result<f64> {
        crate::error::check_len("allocation", self.graph.edge_count(), x.len())?;
        let (j_count, k_count) = (self.config.mapping_nodes, self.config.data_centers);
        let mut power = 0.0;
        for k in 0..k_count {
            let served = x[j_count * k_count + k];
            power += state.prices[k] * (served * served - state.renewables[k]);
        }
        let mut bandwidth = 0.0;
        for (b, xe) in state.bandwidth_coeffs.iter().zip(&x[..j_count * k_count]) {
            bandwidth += b * xe * xe;
        }
        Ok(power + bandwidth)
    }

    /// Bounds on the realized cost's curvature over the whole support:
    /// `(σ, L_p)` with `σ = 2·min a_e`, `L_p = 2·max a_e`.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        let bmin = self.bandwidth_coeffs.iter().copied().fold(f64::INFINITY, f64::min);
        let bmax = self.bandwidth_coeffs.iter().copied().fold(0.0, f64::max);
        (
            2.0 * bmin.min(self.config.price.lo),
            2.0 * bmax.max(self.config.price.hi),
        )
    }

    /// Upper bound on arrivals per node.
    pub fn arrival_bounds(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.node_count()];
        for a in out.iter_mut().take(self.config.mapping_nodes) {
            *a = self.config.arrival.hi;
        }
        out
    }

    /// Certified Slater slack `ζ`.
    ///
    /// Checks the stationary policy "send a fraction `α` of every mapping
    /// link limit and serve each data center at its capacity lower bound".
    /// Node slacks are affine in `α`: `α·U_j − E[c_j]` at mapping nodes and
    /// `C_k − α·In_k` at data centers, so the best `α` sits at a pairwise
    /// crossing and the maximum over crossings is exact for this policy
    /// family. Expected arrivals are interval midpoints (exact for uniform
    /// draws); capacities use their lower bound when redrawn per slot. A
    /// nonpositive return means this family certifies nothing.
    pub fn slater_slack(&self) -> f64 {
        let (j_count, k_count) = (self.config.mapping_nodes, self.config.data_centers);
        let limits = &self.bandwidth_limits;
        let out_cap: Vec<f64> = (0..j_count)
            .map(|j| limits[j * k_count..(j + 1) * k_count].iter().sum())
            .collect();
        let in_cap: Vec<f64> = (0..k_count)
            .map(|k| (0..j_count).map(|j| limits[j * k_count + k]).sum())
            .collect();
        let serve: Vec<f64> = (0..k_count)
            .map(|k| {
                if self.config.per_slot_capacity {
                    self.config.capacity.lo
                } else {
                    self.capacity.upper()[self.drain_edge(k)]
                }
            })
            .collect();
        let mean_arrival = self.config.arrival.mean();
        let slack_at = |alpha: f64| -> f64 {
            let mapping = out_cap
                .iter()
                .map(|u| alpha * u - mean_arrival)
                .fold(f64::INFINITY, f64::min);
            let centers = serve
                .iter()
                .zip(&in_cap)
                .map(|(c, inflow)| c - alpha * inflow)
                .fold(f64::INFINITY, f64::min);
            mapping.min(centers)
        };
        let mut candidates = vec![0.0, 1.0];
        for u in &out_cap {
            for (c, inflow) in serve.iter().zip(&in_cap) {
                let alpha = (c + mean_arrival) / (u + inflow);
                if (0.0..=1.0).contains(&alpha) {
                    candidates.push(alpha);
                }
            }
        }
        candidates
            .into_iter()
            .map(slack_at)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::ConvexCost;

    #[test]
    fn paper_sized_instance_shape() {
        let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
        assert_eq!(inst.graph().node_count(), 20);
        assert_eq!(inst.graph().edge_count(), 110);
    }

    #[test]
    fn smallest_instance() {
        let cfg = ScenarioConfig {
            mapping_nodes: 1,
            data_centers: 1,
            ..ScenarioConfig::default()
        };
        let inst = GeoInstance::new(cfg).unwrap();
        let g = inst.graph();
        assert_eq!((g.node_count(), g.edge_count()), (2, 2));
        assert_eq!([g.incidence(0, 0), g.incidence(0, 1)], [-1, 0]);
        assert_eq!([g.incidence(1, 0), g.incidence(1, 1)], [1, -1]);
    }

    #[test]
    fn inverse_bandwidth_rule() {
        let cfg = ScenarioConfig {
            bandwidth_limit: Interval::new(160.0, 160.0),
            ..ScenarioConfig::default()
        };
        let inst = GeoInstance::new(cfg).unwrap();
        assert!(inst.bandwidth_coeffs().iter().all(|&b| b == 0.25));
    }

    #[test]
    fn degenerate_intervals_give_constant_state() {
        let cfg = ScenarioConfig {
            mapping_nodes: 2,
            data_centers: 3,
            price: Interval::new(12.0, 12.0),
            renewable: Interval::new(5.0, 5.0),
            arrival: Interval::new(7.0, 7.0),
            ..ScenarioConfig::default()
        };
        let inst = GeoInstance::new(cfg).unwrap();
        let mut rng = rng::stream(3, Purpose::State);
        for _ in 0..5 {
            let s = inst.sample_state(&mut rng);
            assert!(s.prices.iter().all(|&p| p == 12.0));
            assert!(s.renewables.iter().all(|&e| e == 5.0));
            assert_eq!(s.arrivals, vec![7.0, 7.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
        let mut a = rng::stream(11, Purpose::State);
        let mut b = rng::stream(11, Purpose::State);
        for _ in 0..20 {
            assert_eq!(inst.sample_state(&mut a), inst.sample_state(&mut b));
        }
    }

    #[test]
    fn samples_stay_in_support() {
        let cfg = ScenarioConfig {
            per_slot_capacity: true,
            ..ScenarioConfig::default()
        };
        let inst = GeoInstance::new(cfg.clone()).unwrap();
        let mut rng = rng::stream(5, Purpose::State);
        for _ in 0..200 {
            let s = inst.sample_state(&mut rng);
            assert!(s.prices.iter().all(|p| (10.0..=30.0).contains(p)));
            assert!(s.renewables.iter().all(|e| (10.0..=100.0).contains(e)));
            assert!(s.arrivals[..10].iter().all(|c| (10.0..=100.0).contains(c)));
            assert!(s.arrivals[10..].iter().all(|c| *c == 0.0));
            let slot = inst.slot_problem(&s).unwrap();
            for (u, outer) in slot.upper.iter().zip(inst.capacity().upper()) {
                assert!(u <= outer);
            }
            for k in 0..10 {
                assert!((100.0..=200.0).contains(&slot.upper[inst.drain_edge(k)]));
            }
        }
    }

    #[test]
    fn cost_examples() {
        let cfg = ScenarioConfig {
            mapping_nodes: 1,
            data_centers: 1,
            ..ScenarioConfig::default()
        };
        let inst = GeoInstance::new(cfg).unwrap();
        let state = StateSample {
            prices: vec![10.0],
            renewables: vec![0.0],
            bandwidth_coeffs: inst.bandwidth_coeffs().to_vec(),
            arrivals: vec![0.0, 0.0],
            slot_capacities: None,
        };
        assert_eq!(inst.evaluate_cost(&[0.0, 2.0], &state).unwrap(), 40.0);
        let with_credit = StateSample {
            renewables: vec![3.0],
            ..state
        };
        assert_eq!(inst.evaluate_cost(&[0.0, 0.0], &with_credit).unwrap(), -30.0);
    }

    #[test]
    fn direct_cost_matches_slot_cost() {
        let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
        let mut rng = rng::stream(9, Purpose::Probe);
        for _ in 0..50 {
            let s = inst.sample_state(&mut rng);
            let slot = inst.slot_problem(&s).unwrap();
            let x: Vec<f64> = slot.upper.iter().map(|u| rng::uniform(&mut rng, 0.0, *u)).collect();
            let a = inst.evaluate_cost(&x, &s).unwrap();
            let b = slot.cost.value(&x);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = ScenarioConfig {
            price: Interval::new(30.0, 10.0),
            ..ScenarioConfig::default()
        };
        assert!(matches!(GeoInstance::new(bad), Err(Error::InvalidInterval { .. })));
        let bad = ScenarioConfig {
            data_centers: 0,
            ..ScenarioConfig::default()
        };
        assert!(GeoInstance::new(bad).is_err());
        let bad = ScenarioConfig {
            price: Interval::new(0.0, 10.0),
            ..ScenarioConfig::default()
        };
        assert!(GeoInstance::new(bad).is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = ScenarioConfig {
            mapping_nodes: 3,
            price: Interval::new(10.5, 0.1 + 29.9),
            per_slot_capacity: true,
            bandwidth_cost: BandwidthCost::Constant { value: 0.3 },
            ..ScenarioConfig::default()
        };
        assert_eq!(ScenarioConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(matches!(
            ScenarioConfig::parse("mapping_nodes = 2\nfoo = 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn slater_slack_positive_for_defaults() {
        let inst = GeoInstance::new(ScenarioConfig::default()).unwrap();
        let zeta = inst.slater_slack();
        assert!(zeta > 0.0, "ζ = {zeta}");
        // Overloaded: arrivals far beyond any capacity.
        let heavy = GeoInstance::new(ScenarioConfig {
            arrival: Interval::new(400.0, 500.0),
            ..ScenarioConfig::default()
        })
        .unwrap();
        assert!(heavy.slater_slack() <= 0.0);
    }
}
