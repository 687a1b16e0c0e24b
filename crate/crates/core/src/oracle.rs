//! Offline ground truth for the ensemble dual `D(λ) = E[D_t(λ)]`.
//!
//! A [`FiniteSupportDistribution`] holds weighted slot problems. Quantities
//! that are the same in every atom are stored once, and per-atom columns
//! are kept only for the edges and nodes that vary, so a sample average over
//! 10⁵ geographic load balancing states needs a column per data center
//! rather than a copy of the whole network per state.
//!
//! Because the dual gradient is `A·E[x(λ)] + E[c]` and the slot cost is
//! separable, expectations are reduced per edge in atom order and then
//! combined, which is exact up to rounding and deterministic.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::kv::{join, KvFile};
use crate::lagrangian::{edge_response, QuadraticCost, SlotProblem};
use crate::network::{dest_price, positive_part, NetworkGraph};
use crate::rng::{self, Purpose};
use crate::scenario::GeoInstance;

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Const(f64),
    Varying(Vec<f64>),
}

impl Column {
    #[inline]
    fn at(&self, n: usize) -> f64 {
        match self {
            Column::Const(v) => *v,
            Column::Varying(col) => col[n],
        }
    }

    fn push(&mut self, value: f64, seen: usize) {
        match self {
            Column::Const(v) if v.to_bits() == value.to_bits() => {}
            Column::Const(v) => {
                let mut col = vec![*v; seen];
                col.push(value);
                *self = Column::Varying(col);
            }
            Column::Varying(col) => col.push(value),
        }
    }

    fn is_const(&self) -> bool {
        matches!(self, Column::Const(_))
    }
}

/// Weighted finite support of slot problems on one graph.
#[derive(Debug, Clone)]
pub struct FiniteSupportDistribution {
    edge_count: usize,
    node_count: usize,
    probabilities: Vec<f64>,
    coeffs: Vec<Column>,
    upper: Vec<Column>,
    arrivals: Vec<Column>,
    constants: Vec<f64>,
    mean_arrivals: Vec<f64>,
    mean_constant: f64,
    min_coeff: f64,
    /// Edges with a varying coefficient or capacity.
    varying_edges: Vec<usize>,
}

/// Incremental construction of a [`FiniteSupportDistribution`].
#[derive(Debug, Clone)]
pub struct DistributionBuilder {
    edge_count: usize,
    node_count: usize,
    probabilities: Vec<f64>,
    coeffs: Vec<Column>,
    upper: Vec<Column>,
    arrivals: Vec<Column>,
    constants: Vec<f64>,
}

impl DistributionBuilder {
    pub fn new(graph: &NetworkGraph) -> Self {
        Self {
            edge_count: graph.edge_count(),
            node_count: graph.node_count(),
            probabilities: Vec::new(),
            coeffs: Vec::new(),
            upper: Vec::new(),
            arrivals: Vec::new(),
            constants: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn push(&mut self, atom: &SlotProblem, probability: f64) -> Result<()> {
        check_len("atom cost", self.edge_count, atom.cost.coeffs().len())?;
        check_len("atom capacity", self.edge_count, atom.upper.len())?;
        check_len("atom arrivals", self.node_count, atom.arrivals.len())?;
        if !(probability >= 0.0 && probability.is_finite()) {
            return Err(Error::invalid("probability", format!("must be nonnegative, got {probability}")));
        }
        let seen = self.probabilities.len();
        if seen == 0 {
            self.coeffs = atom.cost.coeffs().iter().map(|&v| Column::Const(v)).collect();
            self.upper = atom.upper.iter().map(|&v| Column::Const(v)).collect();
            self.arrivals = atom.arrivals.iter().map(|&v| Column::Const(v)).collect();
        } else {
            for (col, &v) in self.coeffs.iter_mut().zip(atom.cost.coeffs()) {
                col.push(v, seen);
            }
            for (col, &v) in self.upper.iter_mut().zip(&atom.upper) {
                col.push(v, seen);
            }
            for (col, &v) in self.arrivals.iter_mut().zip(&atom.arrivals) {
                col.push(v, seen);
            }
        }
        self.constants.push(atom.cost.constant());
        self.probabilities.push(probability);
        Ok(())
    }

    pub fn finish(self) -> Result<FiniteSupportDistribution> {
        if self.probabilities.is_empty() {
            return Err(Error::invalid("distribution", "needs at least one atom"));
        }
        let total = compensated_sum(&self.probabilities);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("probabilities", format!("must sum to 1, got {total}")));
        }
        let p = &self.probabilities;
        let mean = |col: &Column| -> f64 {
            match col {
                Column::Const(v) => *v,
                Column::Varying(vals) => vals.iter().zip(p).map(|(v, w)| w * v).sum(),
            }
        };
        let mean_arrivals = self.arrivals.iter().map(mean).collect();
        let mean_constant = self.constants.iter().zip(p).map(|(v, w)| w * v).sum();
        let min_coeff = self
            .coeffs
            .iter()
            .map(|c| match c {
                Column::Const(v) => *v,
                Column::Varying(vals) => vals.iter().copied().fold(f64::INFINITY, f64::min),
            })
            .fold(f64::INFINITY, f64::min);
        let varying_edges = (0..self.edge_count)
            .filter(|&e| !(self.coeffs[e].is_const() && self.upper[e].is_const()))
            .collect();
        Ok(FiniteSupportDistribution {
            edge_count: self.edge_count,
            node_count: self.node_count,
            probabilities: self.probabilities,
            coeffs: self.coeffs,
            upper: self.upper,
            arrivals: self.arrivals,
            constants: self.constants,
            mean_arrivals,
            mean_constant,
            min_coeff,
            varying_edges,
        })
    }
}

/// Neumaier summation, so that `N` copies of `1/N` add up to one within
/// rounding of a single term.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

impl FiniteSupportDistribution {
    pub fn new(atoms: &[SlotProblem], probabilities: &[f64], graph: &NetworkGraph) -> Result<Self> {
        check_len("probabilities", atoms.len(), probabilities.len())?;
        let mut b = DistributionBuilder::new(graph);
        for (atom, p) in atoms.iter().zip(probabilities) {
            b.push(atom, *p)?;
        }
        b.finish()
    }

    /// Equal weights.
    pub fn uniform(atoms: &[SlotProblem], graph: &NetworkGraph) -> Result<Self> {
        let p = vec![1.0 / atoms.len().max(1) as f64; atoms.len()];
        Self::new(atoms, &p, graph)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Rebuilds atom `n`.
    pub fn atom(&self, n: usize, graph: &NetworkGraph) -> Result<SlotProblem> {
        let coeffs = self.coeffs.iter().map(|c| c.at(n)).collect();
        let upper = self.upper.iter().map(|c| c.at(n)).collect();
        let arrivals = self.arrivals.iter().map(|c| c.at(n)).collect();
        SlotProblem::new(QuadraticCost::new(coeffs, self.constants[n])?, arrivals, upper, graph)
    }

    pub fn mean_arrivals(&self) -> &[f64] {
        &self.mean_arrivals
    }

    /// `σ = 2·min a_e` over all atoms.
    pub fn strong_convexity(&self) -> f64 {
        2.0 * self.min_coeff
    }

    /// Number of edges whose data differ between atoms.
    pub fn varying_edge_count(&self) -> usize {
        self.varying_edges.len()
    }

    fn check_graph(&self, graph: &NetworkGraph) -> Result<()> {
        check_len("distribution edges", graph.edge_count(), self.edge_count)?;
        check_len("distribution nodes", graph.node_count(), self.node_count)
    }

    /// `E[x(λ)]` and `E[Ψ(x(λ))]`.
    fn expected_allocation(&self, prices: &[f64], graph: &NetworkGraph, ex: &mut [f64]) -> f64 {
        let mut cost = 0.0;
        let p = &self.probabilities;
        for (e, edge) in graph.edges().iter().enumerate() {
            let src = prices[edge.source];
            let dst = dest_price(edge.dest, prices);
            match (&self.coeffs[e], &self.upper[e]) {
                (Column::Const(a), Column::Const(u)) => {
                    let x = edge_response(src, dst, *a, *u);
                    ex[e] = x;
                    cost += a * x * x;
                }
                (ca, cu) => {
                    let mut sx = 0.0;
                    let mut sc = 0.0;
                    for (n, w) in p.iter().enumerate() {
                        let a = ca.at(n);
                        let x = edge_response(src, dst, a, cu.at(n));
                        sx += w * x;
                        sc += w * (a * x * x);
                    }
                    ex[e] = sx;
                    cost += sc;
                }
            }
        }
        cost + self.mean_constant
    }

    /// `Σ_n p_n (A·x(λ; s_n) + c_n)`.
    pub fn exact_expected_gradient(&self, prices: &[f64], graph: &NetworkGraph) -> Result<Vec<f64>> {
        Ok(self.dual_value_and_gradient(prices, graph)?.1)
    }

    pub fn expected_dual_value(&self, prices: &[f64], graph: &NetworkGraph) -> Result<f64> {
        Ok(self.dual_value_and_gradient(prices, graph)?.0)
    }

    /// `D(λ)` and `∇D(λ)` from one pass over the atoms.
    pub fn dual_value_and_gradient(&self, prices: &[f64], graph: &NetworkGraph) -> Result<(f64, Vec<f64>)> {
        self.check_graph(graph)?;
        check_len("multiplier", graph.node_count(), prices.len())?;
        let mut ex = vec![0.0; self.edge_count];
        let mut grad = vec![0.0; self.node_count];
        let value = self.value_gradient_into(prices, graph, &mut ex, &mut grad);
        Ok((value, grad))
    }

    /// Expected primal cost `E[Ψ(x(λ))]` of the minimizers at `λ`.
    pub fn expected_primal_cost(&self, prices: &[f64], graph: &NetworkGraph) -> Result<f64> {
        self.check_graph(graph)?;
        check_len("multiplier", graph.node_count(), prices.len())?;
        let mut ex = vec![0.0; self.edge_count];
        Ok(self.expected_allocation(prices, graph, &mut ex))
    }

    fn value_gradient_into(&self, prices: &[f64], graph: &NetworkGraph, ex: &mut [f64], grad: &mut [f64]) -> f64 {
        let cost = self.expected_allocation(prices, graph, ex);
        graph.net_flow_into(ex, &self.mean_arrivals, grad);
        let coupling: f64 = prices.iter().zip(grad.iter()).map(|(l, g)| l * g).sum();
        cost + coupling
    }
}

/// Draws `n` states from `instance` on the oracle stream of `seed` and
/// weights them equally.
pub fn sample_average(instance: &GeoInstance, n: usize, seed: u64) -> Result<FiniteSupportDistribution> {
    let mut rng = rng::stream(seed, Purpose::Oracle);
    sample_average_with(instance, n, &mut rng)
}

pub fn sample_average_with<R: Rng + ?Sized>(
    instance: &GeoInstance,
    n: usize,
    rng: &mut R,
) -> Result<FiniteSupportDistribution> {
    if n == 0 {
        return Err(Error::invalid("oracle_samples", "must be at least 1"));
    }
    let mut b = DistributionBuilder::new(instance.graph());
    let w = 1.0 / n as f64;
    for _ in 0..n {
        let state = instance.sample_state(rng);
        b.push(&instance.slot_problem(&state)?, w)?;
    }
    b.finish()
}

/// Uniform-weight distribution over the given samples, solved as is.
pub fn saa_dual_solve(
    samples: &[SlotProblem],
    graph: &NetworkGraph,
    options: &SolverOptions,
) -> Result<OracleReport> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one"));
    }
    let dist = FiniteSupportDistribution::uniform(samples, graph)?;
    solve_ensemble_dual(&dist, graph, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscentMethod {
    /// Projected gradient ascent with step `1/L_d`.
    Projected,
    /// Accelerated projected gradient with adaptive restart, step `1/L_d`.
    Accelerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once the projected gradient norm is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: AscentMethod,
    /// Iterates are kept inside `‖λ‖ ≤ radius` when set.
    pub clip_radius: Option<f64>,
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 500_000,
            method: AscentMethod::Accelerated,
            clip_radius: None,
            initial: None,
        }
    }
}

/// Result of an ensemble dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub lambda: Vec<f64>,
    /// `D(λ*)`, which equals the offline optimal cost under strong duality.
    pub dual_value: f64,
    /// `E[Ψ(x(λ*))]`.
    pub primal_cost: f64,
    /// `∇D(λ*)`.
    pub gradient: Vec<f64>,
    /// Norm of `∇D(λ*)` over coordinates with `λ*_i > 0`.
    pub stationarity: f64,
    /// `|λ*ᵀ ∇D(λ*)|`.
    pub complementary_slackness: f64,
    /// `max_i [∇D(λ*)_i]⁺`.
    pub primal_violation: f64,
    /// `stationarity + complementary_slackness`.
    pub kkt_residual: f64,
    pub projected_gradient_norm: f64,
    pub iterations: usize,
    pub clip_events: usize,
    pub clip_radius: Option<f64>,
    pub sigma: f64,
    pub rho: f64,
    /// `L_d = ρ(AᵀA)/σ`.
    pub dual_smoothness: f64,
    pub sample_count: usize,
}

fn projected_gradient_norm(lambda: &[f64], grad: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(grad)
        .map(|(l, g)| if *l > 0.0 { *g } else { positive_part(*g) })
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Projection onto `{λ ≥ 0, ‖λ‖ ≤ radius}`; returns whether the ball clipped.
fn project(v: &mut [f64], radius: Option<f64>) -> bool {
    for x in v.iter_mut() {
        *x = positive_part(*x);
    }
    if let Some(r) = radius {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > r {
            let s = r / norm;
            v.iter_mut().for_each(|x| *x *= s);
            return true;
        }
    }
    false
}

/// Maximizes `D` over `λ ≥ 0` with step `1/L_d`, `L_d = ρ(AᵀA)/σ`.
pub fn solve_ensemble_dual(
    dist: &FiniteSupportDistribution,
    graph: &NetworkGraph,
    options: &SolverOptions,
) -> Result<OracleReport> {
    dist.check_graph(graph)?;
    let n = graph.node_count();
    let rho = graph.spectral_radius_ata()?;
    let sigma = dist.strong_convexity();
    let smooth = rho / sigma;
    if !(options.tolerance > 0.0) {
        return Err(Error::invalid("oracle_tol", "must be positive"));
    }
    let mut lambda = match &options.initial {
        Some(init) => {
            check_len("initial multiplier", n, init.len())?;
            init.clone()
        }
        None => vec![0.0; n],
    };
    let mut clip_events = 0;
    if project(&mut lambda, options.clip_radius) {
        clip_events += 1;
    }

    let mut ex = vec![0.0; graph.edge_count()];
    let mut grad = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut y = lambda.clone();
    let mut momentum_t = 1.0_f64;
    let step = 1.0 / smooth;
    let mut iterations = 0;
    let mut converged = false;

    if smooth.is_finite() && smooth > 0.0 {
        while iterations < options.max_iterations {
            iterations += 1;
            dist.value_gradient_into(&y, graph, &mut ex, &mut grad);
            if options.method == AscentMethod::Projected
                && projected_gradient_norm(&y, &grad) <= options.tolerance
            {
                lambda.copy_from_slice(&y);
                converged = true;
                break;
            }
            for i in 0..n {
                next[i] = y[i] + step * grad[i];
            }
            if project(&mut next, options.clip_radius) {
                clip_events += 1;
            }
            match options.method {
                AscentMethod::Projected => {
                    std::mem::swap(&mut y, &mut next);
                    lambda.copy_from_slice(&y);
                }
                AscentMethod::Accelerated => {
                    let mapping = smooth
                        * next
                            .iter()
                            .zip(&y)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                    if mapping <= options.tolerance {
                        let mut g2 = vec![0.0; n];
                        dist.value_gradient_into(&next, graph, &mut ex, &mut g2);
                        if projected_gradient_norm(&next, &g2) <= options.tolerance {
                            lambda.copy_from_slice(&next);
                            converged = true;
                            break;
                        }
                    }
                    let restart: f64 = y
                        .iter()
                        .zip(&next)
                        .zip(&lambda)
                        .map(|((yi, ni), li)| (yi - ni) * (ni - li))
                        .sum();
                    if restart > 0.0 {
                        momentum_t = 1.0;
                        y.copy_from_slice(&next);
                    } else {
                        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum_t * momentum_t).sqrt());
                        let beta = (momentum_t - 1.0) / t_next;
                        for i in 0..n {
                            y[i] = next[i] + beta * (next[i] - lambda[i]);
                        }
                        momentum_t = t_next;
                    }
                    lambda.copy_from_slice(&next);
                }
            }
        }
    } else {
        // No coupling at all: every multiplier is optimal.
        converged = true;
    }

    let value = dist.value_gradient_into(&lambda, graph, &mut ex, &mut grad);
    let pg = projected_gradient_norm(&lambda, &grad);
    if !converged && pg > options.tolerance {
        return Err(Error::DualSolverStalled {
            iterations,
            residual: pg,
        });
    }
    let stationarity = lambda
        .iter()
        .zip(&grad)
        .filter(|(l, _)| **l > 0.0)
        .map(|(_, g)| g * g)
        .sum::<f64>()
        .sqrt();
    let complementary_slackness = lambda.iter().zip(&grad).map(|(l, g)| l * g).sum::<f64>().abs();
    let primal_violation = grad.iter().copied().map(positive_part).fold(0.0, f64::max);
    let primal_cost = dist.expected_primal_cost(&lambda, graph)?;
    Ok(OracleReport {
        dual_value: value,
        primal_cost,
        stationarity,
        complementary_slackness,
        primal_violation,
        kkt_residual: stationarity + complementary_slackness,
        projected_gradient_norm: pg,
        gradient: grad,
        lambda,
        iterations,
        clip_events,
        clip_radius: options.clip_radius,
        sigma,
        rho,
        dual_smoothness: smooth,
        sample_count: dist.len(),
    })
}

/// Bound on `‖λ*‖₁` from a Slater slack `ζ > 0`: every multiplier with
/// `D(λ) ≥ D(0)` satisfies `ζ·Σλ ≤ E[Ψ(x̂)] − D(0)`, and `E[Ψ(x̂)] − D(0)`
/// is at most `Σ_e max_n a_e x̄_e²`.
pub fn slater_multiplier_bound(dist: &FiniteSupportDistribution, zeta: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(Error::invalid("slater slack", format!("must be positive, got {zeta}")));
    }
    let mut spread = 0.0;
    for e in 0..dist.edge_count {
        let mut worst = 0.0_f64;
        for n in 0..dist.len() {
            let (a, u) = (dist.coeffs[e].at(n), dist.upper[e].at(n));
            worst = worst.max(a * u * u);
            if dist.coeffs[e].is_const() && dist.upper[e].is_const() {
                break;
            }
        }
        spread += worst;
    }
    if !spread.is_finite() {
        return Err(Error::invalid("capacity", "multiplier bound needs a finite box"));
    }
    Ok(spread / zeta)
}

impl OracleReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda = {}", join(&self.lambda));
        let _ = writeln!(s, "dual_value = {}", self.dual_value);
        let _ = writeln!(s, "primal_cost = {}", self.primal_cost);
        let _ = writeln!(s, "gradient = {}", join(&self.gradient));
        let _ = writeln!(s, "stationarity = {}", self.stationarity);
        let _ = writeln!(s, "complementary_slackness = {}", self.complementary_slackness);
        let _ = writeln!(s, "primal_violation = {}", self.primal_violation);
        let _ = writeln!(s, "kkt_residual = {}", self.kkt_residual);
        let _ = writeln!(s, "projected_gradient_norm = {}", self.projected_gradient_norm);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "clip_events = {}", self.clip_events);
        match self.clip_radius {
            Some(r) => {
                let _ = writeln!(s, "clip_radius = {r}");
            }
            None => {
                let _ = writeln!(s, "clip_radius = none");
            }
        }
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "dual_smoothness = {}", self.dual_smoothness);
        let _ = writeln!(s, "sample_count = {}", self.sample_count);
        s
    }

    /// Reads [`to_text`](Self::to_text) output; structural-constant lines
    /// appended by the CLI are accepted and ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        fn need<T>(kv: &mut KvFile, key: &str) -> Result<T>
        where
            T: std::str::FromStr,
            T::Err: std::fmt::Display,
        {
            kv.take(key)?
                .ok_or_else(|| Error::invalid(key.to_string(), "missing from oracle report"))
        }
        let lambda = kv
            .take_list("lambda")?
            .ok_or_else(|| Error::invalid("lambda", "missing from oracle report"))?;
        let gradient = kv
            .take_list("gradient")?
            .ok_or_else(|| Error::invalid("gradient", "missing from oracle report"))?;
        let clip_radius = match kv.take_raw("clip_radius") {
            None => None,
            Some((_, v)) if v == "none" => None,
            Some((line, v)) => Some(v.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("bad value for `clip_radius`: {e}"),
            })?),
        };
        let report = Self {
            lambda,
            gradient,
            dual_value: need(&mut kv, "dual_value")?,
            primal_cost: need(&mut kv, "primal_cost")?,
            stationarity: need(&mut kv, "stationarity")?,
            complementary_slackness: need(&mut kv, "complementary_slackness")?,
            primal_violation: need(&mut kv, "primal_violation")?,
            kkt_residual: need(&mut kv, "kkt_residual")?,
            projected_gradient_norm: need(&mut kv, "projected_gradient_norm")?,
            iterations: need(&mut kv, "iterations")?,
            clip_events: need(&mut kv, "clip_events")?,
            clip_radius,
            sigma: need(&mut kv, "sigma")?,
            rho: need(&mut kv, "rho")?,
            dual_smoothness: need(&mut kv, "dual_smoothness")?,
            sample_count: need(&mut kv, "sample_count")?,
        };
        for key in STRUCTURAL_KEYS {
            let _ = kv.take_raw(key);
        }
        kv.finish()?;
        Ok(report)
    }
}

const STRUCTURAL_KEYS: [&str; 5] = ["smoothness_ratio", "smoothness_bound", "growth_eps", "pl_xi", "growth_samples"];

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralOptions {
    pub pairs: usize,
    pub growth_samples: usize,
    pub seed: u64,
}

impl Default for StructuralOptions {
    fn default() -> Self {
        Self {
            pairs: 200,
            growth_samples: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralReport {
    /// Largest sampled `‖∇D(λ₁) − ∇D(λ₂)‖ / ‖λ₁ − λ₂‖`.
    pub smoothness_ratio: f64,
    /// `ρ(AᵀA)/σ`.
    pub smoothness_bound: f64,
    /// Smallest sampled `2(D(λ*) − D(λ))/‖λ* − λ‖²`.
    pub growth_eps: f64,
    /// Smallest `ξ` with `D(λ*) − D(λ) ≤ (L_d ξ²/2)‖∇̃D(λ)‖²` on the samples,
    /// `∇̃` the projected gradient.
    pub pl_xi: f64,
    pub growth_samples: usize,
}

impl StructuralReport {
    pub fn to_text(&self) -> String {
        format!(
            "smoothness_ratio = {}\nsmoothness_bound = {}\ngrowth_eps = {}\npl_xi = {}\ngrowth_samples = {}\n",
            self.smoothness_ratio, self.smoothness_bound, self.growth_eps, self.pl_xi, self.growth_samples
        )
    }
}

/// `2(D(λ*) − D(λ))/‖λ* − λ‖²`, or `None` when `λ = λ*`.
pub fn growth_ratio(
    dist: &FiniteSupportDistribution,
    graph: &NetworkGraph,
    lambda_star: &[f64],
    dual_star: f64,
    lambda: &[f64],
) -> Result<Option<f64>> {
    check_len("multiplier", lambda_star.len(), lambda.len())?;
    let dist_sq: f64 = lambda_star.iter().zip(lambda).map(|(a, b)| (a - b) * (a - b)).sum();
    if dist_sq == 0.0 {
        return Ok(None);
    }
    let d = dist.expected_dual_value(lambda, graph)?;
    Ok(Some(2.0 * (dual_star - d) / dist_sq))
}

/// Samples the dual around `λ*` to estimate smoothness, quadratic growth
/// and the error-bound constant.
///
/// Smoothness pairs are uniform in `[0, 2·max λ* + 1]^I`; growth points are
/// `[λ* + s·u]⁺` for a random unit `u` and `s` log-uniform between 1% and
/// 100% of `max(1, ‖λ*‖∞)`, which keeps the value gap well above rounding.
pub fn verify_structural_constants(
    dist: &FiniteSupportDistribution,
    graph: &NetworkGraph,
    oracle: &OracleReport,
    options: &StructuralOptions,
) -> Result<StructuralReport> {
    let n = graph.node_count();
    let mut rng = rng::stream(options.seed, Purpose::Probe);
    let star = &oracle.lambda;
    let scale = star.iter().copied().fold(1.0, f64::max);
    let box_hi = 2.0 * scale + 1.0;

    let mut ratio = 0.0_f64;
    for _ in 0..options.pairs {
        let a: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, 0.0, box_hi)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, 0.0, box_hi)).collect();
        let ga = dist.exact_expected_gradient(&a, graph)?;
        let gb = dist.exact_expected_gradient(&b, graph)?;
        let num: f64 = ga.iter().zip(&gb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if den > 0.0 {
            ratio = ratio.max(num / den);
        }
    }

    let mut eps = f64::INFINITY;
    let mut xi = 0.0_f64;
    let mut counted = 0;
    for _ in 0..options.growth_samples {
        let mut u: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, -1.0, 1.0)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let s = scale * 10f64.powf(rng::uniform(&mut rng, -2.0, 0.0));
        u.iter_mut().for_each(|v| *v *= s / norm);
        let lambda: Vec<f64> = star.iter().zip(&u).map(|(l, d)| positive_part(l + d)).collect();
        let dist_sq: f64 = star.iter().zip(&lambda).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist_sq == 0.0 {
            continue;
        }
        let (d, g) = dist.dual_value_and_gradient(&lambda, graph)?;
        let gap = oracle.dual_value - d;
        eps = eps.min(2.0 * gap / dist_sq);
        let pg = projected_gradient_norm(&lambda, &g);
        if pg > 0.0 && gap > 0.0 {
            xi = xi.max((2.0 * gap / (oracle.dual_smoothness * pg * pg)).sqrt());
        }
        counted += 1;
    }
    Ok(StructuralReport {
        smoothness_ratio: ratio,
        smoothness_bound: oracle.dual_smoothness,
        growth_eps: eps,
        pl_xi: xi,
        growth_samples: counted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub checkpoints: Vec<u64>,
    /// `D(λ*) − D(λ̂_t)` averaged over realizations, per checkpoint.
    pub mean_gap: Vec<f64>,
    /// Least-squares slope of `ln(mean gap)` against `ln t`; NaN when a mean
    /// gap is not positive.
    pub exponent: f64,
}

impl ConvergenceReport {
    /// `mean_gap(from) / mean_gap(to)` for two listed checkpoints.
    pub fn reduction(&self, from: u64, to: u64) -> Option<f64> {
        let i = self.checkpoints.iter().position(|&t| t == from)?;
        let j = self.checkpoints.iter().position(|&t| t == to)?;
        Some(self.mean_gap[i] / self.mean_gap[j])
    }
}

/// Measures the dual gap of logged empirical multipliers.
///
/// `snapshots[r][k]` is `λ̂` of realization `r` at `checkpoints[k]`.
pub fn empirical_convergence_probe(
    dist: &FiniteSupportDistribution,
    graph: &NetworkGraph,
    dual_star: f64,
    checkpoints: &[u64],
    snapshots: &[Vec<Vec<f64>>],
) -> Result<ConvergenceReport> {
    if snapshots.is_empty() {
        return Err(Error::invalid("snapshots", "need at least one realization"));
    }
    let mut mean_gap = vec![0.0; checkpoints.len()];
    for run in snapshots {
        check_len("checkpoint snapshots", checkpoints.len(), run.len())?;
        for (k, lambda) in run.iter().enumerate() {
            mean_gap[k] += dual_star - dist.expected_dual_value(lambda, graph)?;
        }
    }
    let r = snapshots.len() as f64;
    mean_gap.iter_mut().for_each(|g| *g /= r);
    let exponent = if mean_gap.iter().all(|g| *g > 0.0) && checkpoints.len() >= 2 {
        let xs: Vec<f64> = checkpoints.iter().map(|&t| (t as f64).ln()).collect();
        let ys: Vec<f64> = mean_gap.iter().map(|g| g.ln()).collect();
        slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport {
        checkpoints: checkpoints.to_vec(),
        mean_gap,
        exponent,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
