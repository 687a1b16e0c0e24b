//! Online dual controllers advanced one slot at a time.
//!
//! Each controller owns its dual-side state and, given the slot's problem,
//! returns the allocation it deploys. The physical queue driven by that
//! allocation is tracked by the caller; LA-SDG additionally keeps its own
//! copy because its prices depend on it.

use crate::error::{check_len, Error, Result};
use crate::kv::KvFile;
use crate::lagrangian::{minimize_lagrangian_into, SlotProblem};
use crate::network::{positive_part, NetworkGraph};

pub trait Controller: Send {
    /// Advances one slot and returns the deployed allocation.
    fn step(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<&[f64]>;

    /// The controller's learned multiplier: `λ` for SDG and heavy-ball,
    /// `λ̂` for LA-SDG.
    fn multipliers(&self) -> &[f64];

    fn name(&self) -> &'static str;

    /// Named multiplier vectors for trajectory snapshots.
    fn snapshot(&self) -> Vec<(&'static str, Vec<f64>)> {
        vec![("lambda", self.multipliers().to_vec())]
    }
}

/// `[λ + μ·g]⁺` entrywise.
pub fn sdg_update(lambda: &mut [f64], gradient: &[f64], mu: f64) {
    for (l, g) in lambda.iter_mut().zip(gradient) {
        *l = positive_part(*l + mu * g);
    }
}

/// `[λ + μ·g + β(λ − λ_prev)]⁺` entrywise; `previous` receives the old `λ`.
pub fn heavy_ball_update(current: &mut [f64], previous: &mut [f64], gradient: &[f64], mu: f64, beta: f64) {
    for ((l, p), g) in current.iter_mut().zip(previous.iter_mut()).zip(gradient) {
        let next = positive_part((*l + mu * g) + beta * (*l - *p));
        *p = *l;
        *l = next;
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("mu", format!("must be positive, got {mu}")))
    }
}

fn check_slot(slot: &SlotProblem, graph: &NetworkGraph) -> Result<()> {
    check_len("slot capacity", graph.edge_count(), slot.upper.len())?;
    check_len("slot arrivals", graph.node_count(), slot.arrivals.len())?;
    check_len("slot cost", graph.edge_count(), slot.cost.coeffs().len())
}

/// Stochastic dual gradient with constant step `μ`.
#[derive(Debug, Clone)]
pub struct Sdg {
    lambda: Vec<f64>,
    mu: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

impl Sdg {
    pub fn new(graph: &NetworkGraph, mu: f64) -> Result<Self> {
        Self::with_initial(graph, mu, vec![0.0; graph.node_count()])
    }

    pub fn with_initial(graph: &NetworkGraph, mu: f64, lambda: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        check_len("multiplier", graph.node_count(), lambda.len())?;
        Ok(Self {
            lambda,
            mu,
            x: vec![0.0; graph.edge_count()],
            grad: vec![0.0; graph.node_count()],
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Controller for Sdg {
    fn step(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<&[f64]> {
        check_slot(slot, graph)?;
        minimize_lagrangian_into(&self.lambda, slot, graph, &mut self.x);
        graph.net_flow_into(&self.x, &slot.arrivals, &mut self.grad);
        sdg_update(&mut self.lambda, &self.grad, self.mu);
        Ok(&self.x)
    }

    fn multipliers(&self) -> &[f64] {
        &self.lambda
    }

    fn name(&self) -> &'static str {
        "sdg"
    }
}

/// Projected stochastic heavy-ball. Starts with `λ_prev = λ_curr`.
#[derive(Debug, Clone)]
pub struct HeavyBall {
    current: Vec<f64>,
    previous: Vec<f64>,
    mu: f64,
    beta: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

impl HeavyBall {
    pub fn new(graph: &NetworkGraph, mu: f64, beta: f64) -> Result<Self> {
        Self::with_initial(graph, mu, beta, vec![0.0; graph.node_count()])
    }

    pub fn with_initial(graph: &NetworkGraph, mu: f64, beta: f64, lambda: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("must lie in [0, 1), got {beta}")));
        }
        check_len("multiplier", graph.node_count(), lambda.len())?;
        Ok(Self {
            previous: lambda.clone(),
            current: lambda,
            mu,
            beta,
            x: vec![0.0; graph.edge_count()],
            grad: vec![0.0; graph.node_count()],
        })
    }

    pub fn previous(&self) -> &[f64] {
        &self.previous
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Controller for HeavyBall {
    fn step(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<&[f64]> {
        check_slot(slot, graph)?;
        minimize_lagrangian_into(&self.current, slot, graph, &mut self.x);
        graph.net_flow_into(&self.x, &slot.arrivals, &mut self.grad);
        heavy_ball_update(&mut self.current, &mut self.previous, &self.grad, self.mu, self.beta);
        Ok(&self.x)
    }

    fn multipliers(&self) -> &[f64] {
        &self.current
    }

    fn name(&self) -> &'static str {
        "heavy_ball"
    }
}

/// `scale·√μ·(ln μ)²` for every node.
pub fn theta_default(mu: f64, scale: f64, nodes: usize) -> Result<Vec<f64>> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid("mu", format!("bias control needs 0 < mu < 1, got {mu}")));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid("theta_scale", format!("must be nonnegative, got {scale}")));
    }
    let ln = mu.ln();
    Ok(vec![scale * mu.sqrt() * ln * ln; nodes])
}

/// Step sizes for the empirical multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSchedule {
    /// `η_t = 1/√t`.
    InvSqrt,
    /// `η_t = α·D/(M·√t)`.
    Scaled { alpha: f64, diameter: f64, bound: f64 },
}

impl EtaSchedule {
    pub fn validate(&self) -> Result<()> {
        if let EtaSchedule::Scaled { alpha, diameter, bound } = *self {
            for (name, v) in [("alpha", alpha), ("D", diameter), ("gradient bound", bound)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(name, format!("step schedule needs a positive value, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// `η_t` for slot `t ≥ 1`.
    pub fn eta(&self, t: u64) -> f64 {
        let root = (t as f64).sqrt();
        match *self {
            EtaSchedule::InvSqrt => 1.0 / root,
            EtaSchedule::Scaled { alpha, diameter, bound } => alpha * diameter / (bound * root),
        }
    }
}

/// Learn-and-adapt SDG.
///
/// Deploys `x(γ)` with `γ = λ̂ + μq − θ` (not projected), updates `q` with
/// that allocation and learns `λ̂` from the virtual allocation `x(λ̂)` with a
/// diminishing step.
#[derive(Debug, Clone)]
pub struct LaSdg {
    lambda_hat: Vec<f64>,
    queue: Vec<f64>,
    theta: Vec<f64>,
    mu: f64,
    eta: EtaSchedule,
    t: u64,
    minimizations: u64,
    gamma: Vec<f64>,
    x: Vec<f64>,
    x_hat: Vec<f64>,
    grad: Vec<f64>,
}

/// Per-slot record of one LA-SDG step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLog {
    pub slot: u64,
    pub gamma: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub queue: Vec<f64>,
    /// `A·x(γ) + c`.
    pub gradient_at_gamma: Vec<f64>,
    /// Whether the queue update clamped node `i`.
    pub queue_clamped: Vec<bool>,
    /// Whether the `λ̂` update clamped node `i`.
    pub hat_clamped: Vec<bool>,
}

impl LaSdg {
    pub fn new(graph: &NetworkGraph, mu: f64, theta: Vec<f64>, eta: EtaSchedule) -> Result<Self> {
        let n = graph.node_count();
        Self::with_initial(graph, mu, theta, eta, vec![0.0; n], vec![0.0; n])
    }

    /// `mu = 0` is allowed here so the learning part can run alone.
    pub fn with_initial(
        graph: &NetworkGraph,
        mu: f64,
        theta: Vec<f64>,
        eta: EtaSchedule,
        lambda_hat: Vec<f64>,
        queue: Vec<f64>,
    ) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be nonnegative, got {mu}")));
        }
        eta.validate()?;
        let n = graph.node_count();
        check_len("theta", n, theta.len())?;
        check_len("empirical multiplier", n, lambda_hat.len())?;
        check_len("queue", n, queue.len())?;
        if lambda_hat.iter().chain(&queue).any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("initial state", "multipliers and queues must be nonnegative"));
        }
        Ok(Self {
            lambda_hat,
            queue,
            theta,
            mu,
            eta,
            t: 1,
            minimizations: 0,
            gamma: vec![0.0; n],
            x: vec![0.0; graph.edge_count()],
            x_hat: vec![0.0; graph.edge_count()],
            grad: vec![0.0; n],
        })
    }

    pub fn lambda_hat(&self) -> &[f64] {
        &self.lambda_hat
    }

    pub fn queue(&self) -> &[f64] {
        &self.queue
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eta_schedule(&self) -> EtaSchedule {
        self.eta
    }

    /// Index of the next slot, starting at 1.
    pub fn slot(&self) -> u64 {
        self.t
    }

    /// Lagrangian minimizations performed so far.
    pub fn minimizations(&self) -> u64 {
        self.minimizations
    }

    /// `γ = λ̂ + μq − θ` for the current state.
    pub fn effective_multiplier(&self) -> Vec<f64> {
        let mut gamma = vec![0.0; self.queue.len()];
        self.fill_gamma(&mut gamma);
        gamma
    }

    fn fill_gamma(&self, out: &mut [f64]) {
        for (i, g) in out.iter_mut().enumerate() {
            *g = (self.lambda_hat[i] + self.mu * self.queue[i]) - self.theta[i];
        }
    }

    /// The virtual allocation of the last step.
    pub fn virtual_allocation(&self) -> &[f64] {
        &self.x_hat
    }

    /// Steps and returns the log of the slot just taken.
    pub fn step_detailed(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<SlotLog> {
        let n = graph.node_count();
        let mut log = SlotLog {
            slot: self.t,
            gamma: Vec::new(),
            lambda_hat: self.lambda_hat.clone(),
            queue: self.queue.clone(),
            gradient_at_gamma: Vec::new(),
            queue_clamped: vec![false; n],
            hat_clamped: vec![false; n],
        };
        self.advance(slot, graph, Some(&mut log))?;
        log.gamma = self.gamma.clone();
        Ok(log)
    }

    fn advance(&mut self, slot: &SlotProblem, graph: &NetworkGraph, mut log: Option<&mut SlotLog>) -> Result<()> {
        check_slot(slot, graph)?;
        let mut gamma = std::mem::take(&mut self.gamma);
        self.fill_gamma(&mut gamma);
        self.gamma = gamma;

        minimize_lagrangian_into(&self.gamma, slot, graph, &mut self.x);
        graph.net_flow_into(&self.x, &slot.arrivals, &mut self.grad);
        if let Some(log) = log.as_deref_mut() {
            log.gradient_at_gamma = self.grad.clone();
        }
        for (i, q) in self.queue.iter_mut().enumerate() {
            let raw = *q + self.grad[i];
            if let Some(log) = log.as_deref_mut() {
                log.queue_clamped[i] = raw < 0.0;
            }
            *q = positive_part(raw);
        }

        minimize_lagrangian_into(&self.lambda_hat, slot, graph, &mut self.x_hat);
        graph.net_flow_into(&self.x_hat, &slot.arrivals, &mut self.grad);
        let eta = self.eta.eta(self.t);
        for (i, l) in self.lambda_hat.iter_mut().enumerate() {
            let raw = *l + eta * self.grad[i];
            if let Some(log) = log.as_deref_mut() {
                log.hat_clamped[i] = raw < 0.0;
            }
            *l = positive_part(raw);
        }
        self.minimizations += 2;
        self.t += 1;
        Ok(())
    }
}

impl Controller for LaSdg {
    fn step(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<&[f64]> {
        self.advance(slot, graph, None)?;
        Ok(&self.x)
    }

    fn multipliers(&self) -> &[f64] {
        &self.lambda_hat
    }

    fn name(&self) -> &'static str {
        "la_sdg"
    }

    fn snapshot(&self) -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("lambda_hat", self.lambda_hat.clone()),
            ("gamma", self.effective_multiplier()),
        ]
    }
}

/// Largest deviation from `γ_{t+1} = γ_t + μ∇D_t(γ_t) + (λ̂_{t+1} − λ̂_t)`
/// over consecutive logs, skipping nodes whose queue or `λ̂` update was
/// clamped. Also returns how many node-slots were checked.
pub fn gamma_recursion_residual(logs: &[SlotLog], mu: f64) -> (f64, usize) {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for pair in logs.windows(2) {
        let (now, next) = (&pair[0], &pair[1]);
        for i in 0..now.gamma.len() {
            if now.queue_clamped[i] || now.hat_clamped[i] {
                continue;
            }
            let predicted =
                now.gamma[i] + mu * now.gradient_at_gamma[i] + (next.lambda_hat[i] - now.lambda_hat[i]);
            worst = worst.max((next.gamma[i] - predicted).abs());
            checked += 1;
        }
    }
    (worst, checked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sdg,
    HeavyBall,
    LaSdg,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sdg" => Some(Algorithm::Sdg),
            "heavy_ball" => Some(Algorithm::HeavyBall),
            "la_sdg" => Some(Algorithm::LaSdg),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Sdg => "sdg",
            Algorithm::HeavyBall => "heavy_ball",
            Algorithm::LaSdg => "la_sdg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMode {
    InvSqrt,
    Scaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub algo: Algorithm,
    pub mu: f64,
    pub beta: f64,
    pub theta_scale: f64,
    pub eta_mode: EtaMode,
    pub alpha: f64,
    /// `D` in `η_t = αD/(M√t)`.
    pub diameter: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::LaSdg,
            mu: 0.2,
            beta: 0.5,
            theta_scale: 100.0,
            eta_mode: EtaMode::InvSqrt,
            alpha: 1.0,
            diameter: 1.0,
        }
    }
}

pub const CONTROLLER_KEYS: &[&str] = &["algo", "mu", "beta", "theta_scale", "eta_mode", "alpha", "D"];

impl ControllerConfig {
    pub fn take_from(kv: &mut KvFile) -> Result<Self> {
        let d = Self::default();
        let algo = match kv.take_raw("algo") {
            None => d.algo,
            Some((line, v)) => Algorithm::parse(&v).ok_or_else(|| Error::Parse {
                line,
                message: format!("algo must be sdg, heavy_ball or la_sdg, got `{v}`"),
            })?,
        };
        let eta_mode = match kv.take_raw("eta_mode") {
            None => d.eta_mode,
            Some((_, v)) if v == "inv_sqrt" => EtaMode::InvSqrt,
            Some((_, v)) if v == "scaled" => EtaMode::Scaled,
            Some((line, v)) => {
                return Err(Error::Parse {
                    line,
                    message: format!("eta_mode must be inv_sqrt or scaled, got `{v}`"),
                })
            }
        };
        Ok(Self {
            algo,
            mu: kv.take("mu")?.unwrap_or(d.mu),
            beta: kv.take("beta")?.unwrap_or(d.beta),
            theta_scale: kv.take("theta_scale")?.unwrap_or(d.theta_scale),
            eta_mode,
            alpha: kv.take("alpha")?.unwrap_or(d.alpha),
            diameter: kv.take("D")?.unwrap_or(d.diameter),
        })
    }

    pub fn write_to(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = writeln!(out, "algo = {}", self.algo.as_str());
        let _ = writeln!(out, "mu = {:?}", self.mu);
        let _ = writeln!(out, "beta = {:?}", self.beta);
        let _ = writeln!(out, "theta_scale = {:?}", self.theta_scale);
        let mode = match self.eta_mode {
            EtaMode::InvSqrt => "inv_sqrt",
            EtaMode::Scaled => "scaled",
        };
        let _ = writeln!(out, "eta_mode = {mode}");
        let _ = writeln!(out, "alpha = {:?}", self.alpha);
        let _ = writeln!(out, "D = {:?}", self.diameter);
    }

    /// Builds the controller. `gradient_bound` is `M`, used only by the
    /// scaled step schedule.
    pub fn build(&self, graph: &NetworkGraph, gradient_bound: f64) -> Result<Box<dyn Controller>> {
        Ok(match self.algo {
            Algorithm::Sdg => Box::new(Sdg::new(graph, self.mu)?),
            Algorithm::HeavyBall => Box::new(HeavyBall::new(graph, self.mu, self.beta)?),
            Algorithm::LaSdg => Box::new(self.build_la_sdg(graph, gradient_bound)?),
        })
    }

    pub fn build_la_sdg(&self, graph: &NetworkGraph, gradient_bound: f64) -> Result<LaSdg> {
        let theta = theta_default(self.mu, self.theta_scale, graph.node_count())?;
        LaSdg::new(graph, self.mu, theta, self.eta_schedule(gradient_bound))
    }

    pub fn eta_schedule(&self, gradient_bound: f64) -> EtaSchedule {
        match self.eta_mode {
            EtaMode::InvSqrt => EtaSchedule::InvSqrt,
            EtaMode::Scaled => EtaSchedule::Scaled {
                alpha: self.alpha,
                diameter: self.diameter,
                bound: gradient_bound,
            },
        }
    }

    /// Short label such as `sdg`, `heavy_ball(0.5)` or `la_sdg`.
    pub fn label(&self) -> String {
        match self.algo {
            Algorithm::HeavyBall => format!("heavy_ball({})", self.beta),
            other => other.as_str().to_string(),
        }
    }
}
