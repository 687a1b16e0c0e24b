//! Directed-graph network model.
//!
//! Nodes are indexed `0..node_count`. An edge leaves a real node and enters
//! either another real node or the virtual sink, which sits outside the node
//! set and whose multiplier is identically zero. The node-edge incidence
//! matrix `A` has `A[i][e] = +1` when `e` enters `i` and `-1` when it leaves.
//!
//! Products with `A` are computed from sorted adjacency lists: for node `i`
//! the inflows are summed in ascending source order, then the outflows are
//! subtracted in ascending destination order (virtual last), then the
//! arrival is added. Every path that needs `A·x + c`, centralized or
//! per-node, goes through [`node_balance`] so results agree bit for bit.

use std::fmt::Write as _;

use crate::error::{check_len, Error, Result};

/// Where an edge ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Node(usize),
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: usize,
    pub dest: Endpoint,
}

impl Edge {
    pub fn new(source: usize, dest: usize) -> Self {
        Self {
            source,
            dest: Endpoint::Node(dest),
        }
    }

    pub fn to_virtual(source: usize) -> Self {
        Self {
            source,
            dest: Endpoint::Virtual,
        }
    }
}

/// Immutable network topology with its incidence structure.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    node_count: usize,
    edges: Vec<Edge>,
    /// Row-major `node_count × edges.len()`.
    incidence: Vec<i8>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
}

impl NetworkGraph {
    /// Builds the incidence structure. Fails on out-of-range ids, self
    /// loops, and nodes without an outgoing edge.
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let edge_count = edges.len();
        let mut incidence = vec![0i8; node_count * edge_count];
        let mut in_edges = vec![Vec::new(); node_count];
        let mut out_edges = vec![Vec::new(); node_count];
        for (e, edge) in edges.iter().enumerate() {
            if edge.source >= node_count {
                return Err(Error::NodeOutOfRange {
                    edge: e,
                    id: edge.source,
                    nodes: node_count,
                });
            }
            incidence[edge.source * edge_count + e] = -1;
            out_edges[edge.source].push(e);
            if let Endpoint::Node(dest) = edge.dest {
                if dest >= node_count {
                    return Err(Error::NodeOutOfRange {
                        edge: e,
                        id: dest,
                        nodes: node_count,
                    });
                }
                if dest == edge.source {
                    return Err(Error::ConflictingMarks {
                        edge: e,
                        node: dest,
                    });
                }
                incidence[dest * edge_count + e] = 1;
                in_edges[dest].push(e);
            }
        }
        if let Some(node) = out_edges.iter().position(|list| list.is_empty()) {
            return Err(Error::NoOutgoingEdge { node });
        }
        for list in &mut in_edges {
            list.sort_by_key(|&e| (edges[e].source, e));
        }
        for list in &mut out_edges {
            list.sort_by_key(|&e| (edges[e].dest, e));
        }
        Ok(Self {
            node_count,
            edges,
            incidence,
            in_edges,
            out_edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges between two real nodes.
    pub fn real_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.dest, Endpoint::Node(_)))
            .count()
    }

    pub fn incidence(&self, node: usize, edge: usize) -> i8 {
        self.incidence[node * self.edges.len() + edge]
    }

    /// Edges entering `node`, sorted by source id.
    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// Edges leaving `node`, sorted by destination (virtual last).
    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    /// Row `i` of `A·x + c`.
    #[inline]
    pub fn node_balance(&self, node: usize, x: &[f64], arrival: f64) -> f64 {
        node_balance(
            self.in_edges[node].iter().map(|&e| x[e]),
            self.out_edges[node].iter().map(|&e| x[e]),
            arrival,
        )
    }

    /// `A·x + c` in canonical accumulation order.
    pub fn net_flow(&self, x: &[f64], arrivals: &[f64]) -> Result<Vec<f64>> {
        check_len("allocation", self.edges.len(), x.len())?;
        check_len("arrivals", self.node_count, arrivals.len())?;
        let mut out = vec![0.0; self.node_count];
        self.net_flow_into(x, arrivals, &mut out);
        Ok(out)
    }

    /// Unchecked version of [`net_flow`](Self::net_flow) writing into `out`.
    pub fn net_flow_into(&self, x: &[f64], arrivals: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.node_balance(i, x, arrivals[i]);
        }
    }

    /// `A·x` from the dense matrix, summing each row in column order.
    pub fn apply_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        let edge_count = self.edges.len();
        check_len("allocation", edge_count, x.len())?;
        Ok((0..self.node_count)
            .map(|i| {
                let row = &self.incidence[i * edge_count..(i + 1) * edge_count];
                let mut acc = 0.0;
                for (a, xe) in row.iter().zip(x) {
                    match a {
                        1 => acc += xe,
                        -1 => acc -= xe,
                        _ => {}
                    }
                }
                acc
            })
            .collect())
    }

    /// `Aᵀ·λ`: for each edge, destination multiplier minus source multiplier.
    pub fn transpose_apply(&self, prices: &[f64]) -> Result<Vec<f64>> {
        check_len("multiplier", self.node_count, prices.len())?;
        Ok(self
            .edges
            .iter()
            .map(|edge| dest_price(edge.dest, prices) - prices[edge.source])
            .collect())
    }

    /// Spectral radius of `AᵀA` by power iteration.
    ///
    /// Runs from the all-ones edge vector and from a low-discrepancy vector
    /// `1 + frac(e·φ)`, stopping each once the eigen-residual `‖AᵀA v − ρ v‖`
    /// falls below `1e-11·ρ` for the unit iterate `v`, and returns the larger
    /// Rayleigh quotient. A symmetric start can be an exact eigenvector of a
    /// smaller eigenvalue (or lie in the null space of `A`); the second start
    /// breaks that symmetry.
    pub fn spectral_radius_ata(&self) -> Result<f64> {
        self.spectral_radius_ata_with_cap(POWER_ITERATION_CAP)
    }

    pub fn spectral_radius_ata_with_cap(&self, cap: usize) -> Result<f64> {
        let edge_count = self.edges.len();
        if edge_count == 0 {
            return Ok(0.0);
        }
        let starts: [Vec<f64>; 2] = [
            vec![1.0; edge_count],
            (1..=edge_count)
                .map(|k| 1.0 + (k as f64 * 0.618_033_988_749_894_9).fract())
                .collect(),
        ];
        let zeros = vec![0.0; self.node_count];
        let mut node_buf = vec![0.0; self.node_count];
        let mut best: Option<f64> = None;
        let mut residual = f64::INFINITY;
        'start: for start in starts {
            let mut v = start;
            normalize(&mut v);
            let mut w = vec![0.0; edge_count];
            for _ in 0..cap {
                self.net_flow_into(&v, &zeros, &mut node_buf);
                for (e, edge) in self.edges.iter().enumerate() {
                    w[e] = dest_price(edge.dest, &node_buf) - node_buf[edge.source];
                }
                let rho: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                if rho <= f64::MIN_POSITIVE {
                    continue 'start;
                }
                residual = v
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (b - rho * a).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / rho;
                if residual <= 1e-11 {
                    best = Some(best.map_or(rho, |b: f64| b.max(rho)));
                    continue 'start;
                }
                std::mem::swap(&mut v, &mut w);
                normalize(&mut v);
            }
            return Err(Error::PowerIterationStalled {
                iterations: cap,
                residual,
            });
        }
        best.ok_or(Error::PowerIterationStalled {
            iterations: cap,
            residual,
        })
    }
}

pub const POWER_ITERATION_CAP: usize = 100_000;

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
}

#[inline]
pub(crate) fn dest_price(dest: Endpoint, prices: &[f64]) -> f64 {
    match dest {
        Endpoint::Node(j) => prices[j],
        Endpoint::Virtual => 0.0,
    }
}

/// Net inflow of one node: inflows added in order, outflows subtracted in
/// order, then the arrival.
#[inline]
pub fn node_balance(
    inflows: impl Iterator<Item = f64>,
    outflows: impl Iterator<Item = f64>,
    arrival: f64,
) -> f64 {
    let mut acc = 0.0;
    for x in inflows {
        acc += x;
    }
    for x in outflows {
        acc -= x;
    }
    acc + arrival
}

/// `[v]⁺`. NaN maps to zero.
#[inline]
pub fn positive_part(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Static box `0 ≤ x ≤ upper`. Entries may be `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(upper: Vec<f64>) -> Result<Self> {
        if let Some((edge, &value)) = upper
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v < 0.0)
        {
            return Err(Error::InvalidCapacity { edge, value });
        }
        Ok(Self { upper })
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.upper.len() && x.iter().zip(&self.upper).all(|(v, u)| *v >= 0.0 && v <= u)
    }
}

/// `q' = [q + A·x + c]⁺`.
pub fn queue_update(q: &[f64], x: &[f64], arrivals: &[f64], graph: &NetworkGraph) -> Result<Vec<f64>> {
    check_len("queue", graph.node_count(), q.len())?;
    check_len("allocation", graph.edge_count(), x.len())?;
    check_len("arrivals", graph.node_count(), arrivals.len())?;
    Ok(q.iter()
        .enumerate()
        .map(|(i, qi)| positive_part(qi + graph.node_balance(i, x, arrivals[i])))
        .collect())
}

/// Writes the line-oriented network format:
///
/// ```text
/// nodes 3
/// 1 3 120
/// 2 3 80.5
/// 3 virtual 150
/// ```
///
/// Node ids are 1-based. Capacities use the shortest decimal that reads
/// back to the same `f64`, so parse/write round-trips bit for bit.
pub fn write_network(graph: &NetworkGraph, capacity: &BoxSet) -> Result<String> {
    check_len("capacity", graph.edge_count(), capacity.dim())?;
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", graph.node_count());
    for (edge, cap) in graph.edges().iter().zip(capacity.upper()) {
        let dest = match edge.dest {
            Endpoint::Node(j) => (j + 1).to_string(),
            Endpoint::Virtual => "virtual".to_string(),
        };
        let _ = writeln!(out, "{} {} {}", edge.source + 1, dest, format_capacity(*cap));
    }
    Ok(out)
}

fn format_capacity(cap: f64) -> String {
    if cap.is_infinite() {
        "inf".to_string()
    } else {
        format!("{cap:?}")
    }
}

/// Reads the format produced by [`write_network`]. Blank lines and `#`
/// comments are skipped.
pub fn parse_network(text: &str) -> Result<(NetworkGraph, BoxSet)> {
    let mut node_count: Option<usize> = None;
    let mut edges = Vec::new();
    let mut upper = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line, message };
        match (node_count, fields.as_slice()) {
            (None, ["nodes", n]) => {
                let n: usize = n
                    .parse()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                node_count = Some(n);
            }
            (None, _) => return Err(parse_err("expected `nodes <count>` header".into())),
            (Some(n), [src, dst, cap]) => {
                let node_id = |s: &str| -> Result<usize> {
                    let id: usize = s
                        .parse()
                        .map_err(|e| parse_err(format!("bad node id `{s}`: {e}")))?;
                    if id == 0 || id > n {
                        return Err(parse_err(format!("node id {id} outside 1..={n}")));
                    }
                    Ok(id - 1)
                };
                let source = node_id(src)?;
                let dest = if *dst == "virtual" {
                    Endpoint::Virtual
                } else {
                    Endpoint::Node(node_id(dst)?)
                };
                let cap: f64 = cap
                    .parse()
                    .map_err(|e| parse_err(format!("bad capacity `{cap}`: {e}")))?;
                edges.push(Edge { source, dest });
                upper.push(cap);
            }
            (Some(_), _) => return Err(parse_err("expected `src dst|virtual capacity`".into())),
        }
    }
    let node_count = node_count.ok_or(Error::Parse {
        line: 0,
        message: "missing `nodes <count>` header".into(),
    })?;
    let graph = NetworkGraph::new(node_count, edges)?;
    let capacity = BoxSet::new(upper)?;
    Ok((graph, capacity))
}
