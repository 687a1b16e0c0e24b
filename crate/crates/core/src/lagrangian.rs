//! Per-slot Lagrangian: primal recovery, dual value and dual gradient.
//!
//! For multipliers `λ` the instantaneous Lagrangian is
//! `Ψ_t(x) + λᵀ(A·x + c_t)` over the slot box. With a separable quadratic
//! cost `Σ a_e x_e² + k` the minimizer is closed form per edge; a generic
//! strongly convex cost is handled by projected gradient descent.
//!
//! Multipliers passed here are not required to be nonnegative: the LA-SDG
//! effective multiplier can go negative, and the closed form is well
//! defined for any real prices.

use crate::error::{check_len, Error, Result};
use crate::network::{dest_price, NetworkGraph};

/// Separable quadratic cost `Σ_e a_e x_e² + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    coeffs: Vec<f64>,
    constant: f64,
}

impl QuadraticCost {
    pub fn new(coeffs: Vec<f64>, constant: f64) -> Result<Self> {
        if let Some((edge, &value)) = coeffs.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(Error::NonPositiveCoefficient { edge, value });
        }
        Ok(Self { coeffs, constant })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

/// A strongly convex, smooth cost over edge allocations.
pub trait ConvexCost {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
    /// Strong convexity modulus σ.
    fn strong_convexity(&self) -> f64;
    /// Lipschitz constant of the gradient.
    fn gradient_lipschitz(&self) -> f64;
}

impl ConvexCost for QuadraticCost {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, v) in self.coeffs.iter().zip(x) {
            acc += a * v * v;
        }
        acc + self.constant
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, a), v) in grad.iter_mut().zip(&self.coeffs).zip(x) {
            *g = 2.0 * a * v;
        }
    }

    fn strong_convexity(&self) -> f64 {
        2.0 * self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn gradient_lipschitz(&self) -> f64 {
        2.0 * self.coeffs.iter().copied().fold(0.0, f64::max)
    }
}

/// Everything the Lagrangian needs about one slot: the realized cost, the
/// arrivals, and the effective edge capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProblem {
    pub cost: QuadraticCost,
    pub arrivals: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SlotProblem {
    pub fn new(cost: QuadraticCost, arrivals: Vec<f64>, upper: Vec<f64>, graph: &NetworkGraph) -> Result<Self> {
        check_len("cost coefficients", graph.edge_count(), cost.dim())?;
        check_len("arrivals", graph.node_count(), arrivals.len())?;
        check_len("capacity", graph.edge_count(), upper.len())?;
        if let Some((edge, &value)) = upper.iter().enumerate().find(|(_, u)| u.is_nan() || **u < 0.0) {
            return Err(Error::InvalidCapacity { edge, value });
        }
        Ok(Self { cost, arrivals, upper })
    }
}

/// Closed-form minimizer of `a·x² + (p_dst − p_src)·x` over `[0, upper]`.
#[inline]
pub fn edge_response(src_price: f64, dst_price: f64, coeff: f64, upper: f64) -> f64 {
    let x = (src_price - dst_price) / (2.0 * coeff);
    if !(x > 0.0) {
        0.0
    } else if x > upper {
        upper
    } else {
        x
    }
}

/// `argmin_x L_t(x, λ)` for the quadratic slot cost.
pub fn minimize_lagrangian(prices: &[f64], slot: &SlotProblem, graph: &NetworkGraph) -> Result<Vec<f64>> {
    check_len("multiplier", graph.node_count(), prices.len())?;
    check_len("allocation", graph.edge_count(), slot.upper.len())?;
    let mut x = vec![0.0; graph.edge_count()];
    minimize_lagrangian_into(prices, slot, graph, &mut x);
    Ok(x)
}

/// Unchecked closed form writing into `out`.
#[inline]
pub fn minimize_lagrangian_into(prices: &[f64], slot: &SlotProblem, graph: &NetworkGraph, out: &mut [f64]) {
    let coeffs = slot.cost.coeffs();
    for (e, edge) in graph.edges().iter().enumerate() {
        out[e] = edge_response(prices[edge.source], dest_price(edge.dest, prices), coeffs[e], slot.upper[e]);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterativeOptions {
    /// Stop once the gradient-map norm is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 1_000_000,
        }
    }
}

/// Projected gradient descent on `Ψ(x) + λᵀA·x` over `0 ≤ x ≤ upper`,
/// step `1/L_p`, coordinates updated in index order, started at `x = 0`.
pub fn minimize_lagrangian_iterative<C: ConvexCost + ?Sized>(
    prices: &[f64],
    cost: &C,
    upper: &[f64],
    graph: &NetworkGraph,
    options: IterativeOptions,
) -> Result<Vec<f64>> {
    check_len("multiplier", graph.node_count(), prices.len())?;
    check_len("cost", graph.edge_count(), cost.dim())?;
    check_len("capacity", graph.edge_count(), upper.len())?;
    let lipschitz = cost.gradient_lipschitz();
    if !(lipschitz > 0.0) {
        return Err(Error::invalid("gradient_lipschitz", "must be positive"));
    }
    let step = 1.0 / lipschitz;
    // Aᵀλ is constant across iterations.
    let price_gap = graph.transpose_apply(prices)?;
    let mut x = vec![0.0; graph.edge_count()];
    let mut grad = vec![0.0; graph.edge_count()];
    let mut residual = f64::INFINITY;
    for _ in 0..options.max_iterations {
        cost.gradient(&x, &mut grad);
        let mut sq = 0.0;
        for e in 0..x.len() {
            let trial = x[e] - step * (grad[e] + price_gap[e]);
            let projected = trial.max(0.0).min(upper[e]);
            let g = (x[e] - projected) / step;
            sq += g * g;
            x[e] = projected;
        }
        residual = sq.sqrt();
        if residual <= options.tolerance {
            return Ok(x);
        }
    }
    Err(Error::MinimizerStalled {
        iterations: options.max_iterations,
        residual,
    })
}

/// `∇D_t(λ) = A·x(λ) + c_t`.
pub fn stochastic_dual_gradient(prices: &[f64], slot: &SlotProblem, graph: &NetworkGraph) -> Result<Vec<f64>> {
    let x = minimize_lagrangian(prices, slot, graph)?;
    graph.net_flow(&x, &slot.arrivals)
}

/// `D_t(λ) = min_x L_t(x, λ)`, including the cost constant.
pub fn dual_value(prices: &[f64], slot: &SlotProblem, graph: &NetworkGraph) -> Result<f64> {
    let x = minimize_lagrangian(prices, slot, graph)?;
    let g = graph.net_flow(&x, &slot.arrivals)?;
    Ok(lagrangian_value(&x, prices, &g, slot))
}

/// `D_t(λ)` and `∇D_t(λ)` from one minimization.
pub fn dual_value_and_gradient(prices: &[f64], slot: &SlotProblem, graph: &NetworkGraph) -> Result<(f64, Vec<f64>)> {
    let x = minimize_lagrangian(prices, slot, graph)?;
    let g = graph.net_flow(&x, &slot.arrivals)?;
    Ok((lagrangian_value(&x, prices, &g, slot), g))
}

fn lagrangian_value(x: &[f64], prices: &[f64], balance: &[f64], slot: &SlotProblem) -> f64 {
    let coupling: f64 = prices.iter().zip(balance).map(|(l, g)| l * g).sum();
    slot.cost.value(x) + coupling
}

/// Certified bound `M ≥ sup_{x ∈ box} ‖A·x + c‖` for `0 ≤ c ≤ c_max`.
///
/// Row `i` of `A·x + c` ranges over `[−Σ_out x̄, Σ_in x̄ + c_max_i]`, so the
/// per-node bound is the larger endpoint magnitude; `M` is the Euclidean
/// norm of those bounds.
pub fn gradient_bound(graph: &NetworkGraph, upper: &[f64], arrival_max: &[f64]) -> Result<f64> {
    check_len("capacity", graph.edge_count(), upper.len())?;
    check_len("arrival bound", graph.node_count(), arrival_max.len())?;
    if let Some(edge) = upper.iter().position(|u| !u.is_finite()) {
        return Err(Error::UnboundedBox { edge });
    }
    let mut sq = 0.0;
    for (i, amax) in arrival_max.iter().enumerate() {
        let inflow: f64 = graph.in_edges(i).iter().map(|&e| upper[e]).sum();
        let outflow: f64 = graph.out_edges(i).iter().map(|&e| upper[e]).sum();
        let bound = outflow.max(inflow + amax);
        sq += bound * bound;
    }
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn one_node(a: f64, c: f64, upper: f64) -> (NetworkGraph, SlotProblem) {
        let g = NetworkGraph::new(1, vec![Edge::to_virtual(0)]).unwrap();
        let slot = SlotProblem::new(QuadraticCost::new(vec![a], 0.0).unwrap(), vec![c], vec![upper], &g).unwrap();
        (g, slot)
    }

    /// Grid oracle for a one-dimensional minimization.
    fn grid_argmin(f: impl Fn(f64) -> f64, upper: f64, step: f64) -> f64 {
        let n = (upper / step).round() as usize;
        (0..=n)
            .map(|k| k as f64 * step)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_prices_give_zero_allocation() {
        let g = NetworkGraph::new(2, vec![Edge::new(0, 1), Edge::to_virtual(1)]).unwrap();
        let slot = SlotProblem::new(
            QuadraticCost::new(vec![0.3, 10.0], -5.0).unwrap(),
            vec![4.0, 0.0],
            vec![100.0, 50.0],
            &g,
        )
        .unwrap();
        assert_eq!(minimize_lagrangian(&[0.0, 0.0], &slot, &g).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mapping_link_matches_grid_search() {
        let (b, lj, lk, cap) = (0.2, 10.0, 2.0, 100.0);
        let closed = edge_response(lj, lk, b, cap);
        let grid = grid_argmin(|x| b * x * x + (lk - lj) * x, cap, 1e-4);
        assert!((closed - 20.0).abs() < 1e-12);
        assert!((grid - 20.0).abs() <= 1e-4);
    }

    #[test]
    fn data_center_link_clamps_at_capacity() {
        let (g, slot) = one_node(10.0, 0.0, 20.0);
        let closed = minimize_lagrangian(&[500.0], &slot, &g).unwrap();
        assert_eq!(closed, vec![20.0]);
        let iterative =
            minimize_lagrangian_iterative(&[500.0], &slot.cost, &slot.upper, &g, IterativeOptions::default()).unwrap();
        assert!((iterative[0] - 20.0).abs() < 1e-10);
    }

    #[test]
    fn negative_prices_drive_to_lower_bound() {
        let (g, slot) = one_node(1.0, 0.0, 5.0);
        assert_eq!(minimize_lagrangian(&[-3.0], &slot, &g).unwrap(), vec![0.0]);
    }

    #[test]
    fn non_positive_coefficient_rejected() {
        assert!(matches!(
            QuadraticCost::new(vec![1.0, 0.0], 0.0),
            Err(Error::NonPositiveCoefficient { edge: 1, .. })
        ));
    }

    #[test]
    fn iterative_reports_stall() {
        // Condition number 100 needs far more than three steps.
        let g = NetworkGraph::new(2, vec![Edge::new(0, 1), Edge::to_virtual(1)]).unwrap();
        let cost = QuadraticCost::new(vec![0.01, 1.0], 0.0).unwrap();
        let opts = IterativeOptions {
            tolerance: 1e-10,
            max_iterations: 3,
        };
        assert!(matches!(
            minimize_lagrangian_iterative(&[3.0, 1.0], &cost, &[1e3, 1e3], &g, opts),
            Err(Error::MinimizerStalled { .. })
        ));
    }

    #[test]
    fn stochastic_gradient_examples() {
        let (g, slot) = one_node(1.0, 0.0, 10.0);
        assert_eq!(stochastic_dual_gradient(&[0.0], &slot, &g).unwrap(), vec![0.0]);
        // x(λ) = λ/2 = 3 with c = 5.
        let (g, slot) = one_node(1.0, 5.0, 10.0);
        assert_eq!(stochastic_dual_gradient(&[6.0], &slot, &g).unwrap(), vec![2.0]);
    }

    #[test]
    fn dual_value_at_zero_is_cost_at_zero() {
        let g = NetworkGraph::new(2, vec![Edge::new(0, 1), Edge::to_virtual(1)]).unwrap();
        let slot = SlotProblem::new(
            QuadraticCost::new(vec![0.3, 10.0], -7.5).unwrap(),
            vec![4.0, 0.0],
            vec![100.0, 50.0],
            &g,
        )
        .unwrap();
        assert_eq!(dual_value(&[0.0, 0.0], &slot, &g).unwrap(), -7.5);
    }

    #[test]
    fn single_edge_dual_closed_form() {
        // D(λ) = −λ²/(4a) + λc below the kink λ = 2a·x̄, and
        // a·x̄² − λx̄ + λc above it.
        let (a, c, cap) = (1.5, 2.0, 4.0);
        let (g, slot) = one_node(a, c, cap);
        for &lambda in &[0.0, 0.7, 3.0, 11.9, 12.0, 12.1, 40.0] {
            let expected = if lambda <= 2.0 * a * cap {
                -lambda * lambda / (4.0 * a) + lambda * c
            } else {
                a * cap * cap - lambda * cap + lambda * c
            };
            let got = dual_value(&[lambda], &slot, &g).unwrap();
            assert!((got - expected).abs() < 1e-12 * (1.0 + expected.abs()), "λ={lambda}");
        }
    }

    #[test]
    fn gradient_bound_examples() {
        let g = NetworkGraph::new(2, vec![Edge::new(0, 1), Edge::to_virtual(1)]).unwrap();
        // Only the first edge matters for node-level bounds when the drain
        // has zero capacity.
        let m = gradient_bound(&g, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(gradient_bound(&g, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            gradient_bound(&g, &[1.0, f64::INFINITY], &[1.0, 0.0]),
            Err(Error::UnboundedBox { edge: 1 })
        ));
    }

    #[test]
    fn gradient_bound_covers_box_corners() {
        let g = NetworkGraph::new(3, vec![Edge::new(0, 2), Edge::new(1, 2), Edge::to_virtual(2)]).unwrap();
        let upper = [3.0, 2.0, 4.0];
        let cmax = [5.0, 1.0, 0.0];
        let m = gradient_bound(&g, &upper, &cmax).unwrap();
        // Enumerate every corner of the (x, c) box.
        let mut worst: f64 = 0.0;
        for mask in 0..(1 << 6) {
            let pick = |bit: usize, hi: f64| if mask & (1 << bit) != 0 { hi } else { 0.0 };
            let x = [pick(0, upper[0]), pick(1, upper[1]), pick(2, upper[2])];
            let c = [pick(3, cmax[0]), pick(4, cmax[1]), pick(5, cmax[2])];
            let r = g.net_flow(&x, &c).unwrap();
            worst = worst.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        assert!(worst <= m + 1e-12);
    }
}
