//! Per-node LA-SDG with synchronous message rounds.
//!
//! Every slot runs four phases separated by barriers:
//!
//! 1. each node sends `γ^i` and `λ̂^i` to the source of every real edge
//!    entering it;
//! 2. each node prices its outgoing edges from the received multipliers
//!    (the virtual sink prices at zero) and solves its local subproblem for
//!    both multipliers;
//! 3. each node sends both flows on every real outgoing edge to the
//!    receiving node;
//! 4. each node updates `q^i` from the deployed flows and `λ̂^i` from the
//!    virtual flows.
//!
//! A node sees only its own fields, its slice of the slot state and the
//! messages addressed to it. Inflows are summed by (sender, edge) and
//! outflows by (receiver, edge), the order the centralized controller uses,
//! so both paths agree bit for bit.

use std::io::Write;

use crate::controllers::{Controller, EtaSchedule};
use crate::error::{check_len, Error, Result};
use crate::lagrangian::{edge_response, SlotProblem};
use crate::network::{node_balance, positive_part, Endpoint, NetworkGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    Multiplier,
    Flow,
}

/// Which multiplier a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Basis {
    /// `γ` and the deployed allocation `x(γ)`.
    Effective,
    /// `λ̂` and the virtual allocation `x(λ̂)`.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub basis: Basis,
    pub sender: usize,
    pub receiver: usize,
    pub slot: u64,
    pub edge: usize,
    pub value: f64,
}

impl Message {
    pub fn kind_token(&self) -> &'static str {
        match (self.kind, self.basis) {
            (MessageKind::Multiplier, Basis::Effective) => "multiplier_gamma",
            (MessageKind::Multiplier, Basis::Empirical) => "multiplier_lambda_hat",
            (MessageKind::Flow, Basis::Effective) => "flow_gamma",
            (MessageKind::Flow, Basis::Empirical) => "flow_lambda_hat",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OutLink {
    edge: usize,
    dest: Endpoint,
}

#[derive(Debug, Clone, Copy)]
struct InLink {
    edge: usize,
    source: usize,
}

/// The part of a slot's state observed at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSlot {
    pub arrival: f64,
    /// Cost coefficients of the outgoing edges, in link order.
    pub coeffs: Vec<f64>,
    /// Capacities of the outgoing edges, in link order.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    id: usize,
    lambda_hat: f64,
    queue: f64,
    theta: f64,
    gamma: f64,
    /// Sorted by (receiver, edge); virtual last.
    out_links: Vec<OutLink>,
    /// Sorted by (sender, edge).
    in_links: Vec<InLink>,
    x_gamma: Vec<f64>,
    x_hat: Vec<f64>,
}

impl NodeState {
    fn new(graph: &NetworkGraph, id: usize, theta: f64, lambda_hat: f64, queue: f64) -> Self {
        let edges = graph.edges();
        let out_links: Vec<OutLink> = graph
            .out_edges(id)
            .iter()
            .map(|&e| OutLink {
                edge: e,
                dest: edges[e].dest,
            })
            .collect();
        let in_links = graph
            .in_edges(id)
            .iter()
            .map(|&e| InLink {
                edge: e,
                source: edges[e].source,
            })
            .collect();
        let n_out = out_links.len();
        Self {
            id,
            lambda_hat,
            queue,
            theta,
            gamma: 0.0,
            out_links,
            in_links,
            x_gamma: vec![0.0; n_out],
            x_hat: vec![0.0; n_out],
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn queue(&self) -> f64 {
        self.queue
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Outgoing allocations `x(γ)` in link order.
    pub fn allocations(&self) -> &[f64] {
        &self.x_gamma
    }

    fn local_slot(&self, slot: &SlotProblem) -> LocalSlot {
        let coeffs = slot.cost.coeffs();
        LocalSlot {
            arrival: slot.arrivals[self.id],
            coeffs: self.out_links.iter().map(|l| coeffs[l.edge]).collect(),
            upper: self.out_links.iter().map(|l| slot.upper[l.edge]).collect(),
        }
    }

    /// Phase 1.
    fn broadcast_multipliers(&mut self, mu: f64, t: u64, outbox: &mut Vec<Message>) {
        self.gamma = (self.lambda_hat + mu * self.queue) - self.theta;
        for link in &self.in_links {
            for (basis, value) in [(Basis::Effective, self.gamma), (Basis::Empirical, self.lambda_hat)] {
                outbox.push(Message {
                    kind: MessageKind::Multiplier,
                    basis,
                    sender: self.id,
                    receiver: link.source,
                    slot: t,
                    edge: link.edge,
                    value,
                });
            }
        }
    }

    /// Phase 2.
    fn local_allocate(&mut self, inbox: &[Message], local: &LocalSlot, t: u64) -> Result<()> {
        for (k, link) in self.out_links.iter().enumerate() {
            let (neighbor_gamma, neighbor_hat) = match link.dest {
                Endpoint::Virtual => (0.0, 0.0),
                Endpoint::Node(j) => (
                    find(inbox, MessageKind::Multiplier, Basis::Effective, link.edge, j, self.id, t)?,
                    find(inbox, MessageKind::Multiplier, Basis::Empirical, link.edge, j, self.id, t)?,
                ),
            };
            self.x_gamma[k] = edge_response(self.gamma, neighbor_gamma, local.coeffs[k], local.upper[k]);
            self.x_hat[k] = edge_response(self.lambda_hat, neighbor_hat, local.coeffs[k], local.upper[k]);
        }
        Ok(())
    }

    /// Phase 3.
    fn send_flows(&self, t: u64, outbox: &mut Vec<Message>) {
        for (k, link) in self.out_links.iter().enumerate() {
            if let Endpoint::Node(j) = link.dest {
                for (basis, value) in [(Basis::Effective, self.x_gamma[k]), (Basis::Empirical, self.x_hat[k])] {
                    outbox.push(Message {
                        kind: MessageKind::Flow,
                        basis,
                        sender: self.id,
                        receiver: j,
                        slot: t,
                        edge: link.edge,
                        value,
                    });
                }
            }
        }
    }

    /// Phase 4.
    fn local_update(&mut self, inbox: &[Message], local: &LocalSlot, eta: f64, t: u64) -> Result<()> {
        let mut in_gamma = Vec::with_capacity(self.in_links.len());
        let mut in_hat = Vec::with_capacity(self.in_links.len());
        for link in &self.in_links {
            in_gamma.push(find(inbox, MessageKind::Flow, Basis::Effective, link.edge, link.source, self.id, t)?);
            in_hat.push(find(inbox, MessageKind::Flow, Basis::Empirical, link.edge, link.source, self.id, t)?);
        }
        self.queue = local_queue_update(self.queue, &in_gamma, &self.x_gamma, local.arrival);
        self.lambda_hat = local_empirical_update(self.lambda_hat, &in_hat, &self.x_hat, local.arrival, eta);
        Ok(())
    }
}

fn find(
    inbox: &[Message],
    kind: MessageKind,
    basis: Basis,
    edge: usize,
    from: usize,
    node: usize,
    slot: u64,
) -> Result<f64> {
    inbox
        .iter()
        .find(|m| m.kind == kind && m.basis == basis && m.edge == edge && m.sender == from)
        .map(|m| m.value)
        .ok_or(Error::MissingMessage {
            slot,
            node,
            from,
            kind: match kind {
                MessageKind::Multiplier => "multiplier",
                MessageKind::Flow => "flow",
            },
        })
}

/// `[q + Σ in − Σ out + c]⁺` for one node.
pub fn local_queue_update(queue: f64, inflows: &[f64], outflows: &[f64], arrival: f64) -> f64 {
    positive_part(queue + node_balance(inflows.iter().copied(), outflows.iter().copied(), arrival))
}

/// `[λ̂ + η(Σ in − Σ out + c)]⁺` for one node.
pub fn local_empirical_update(lambda_hat: f64, inflows: &[f64], outflows: &[f64], arrival: f64, eta: f64) -> f64 {
    positive_part(lambda_hat + eta * node_balance(inflows.iter().copied(), outflows.iter().copied(), arrival))
}

/// One node's subproblem: prices each outgoing edge by `γ^i − γ^j` with the
/// same closed form as the centralized minimizer.
pub fn local_allocate(own: f64, neighbor_prices: &[f64], local: &LocalSlot) -> Result<Vec<f64>> {
    check_len("neighbor prices", local.coeffs.len(), neighbor_prices.len())?;
    check_len("local capacity", local.coeffs.len(), local.upper.len())?;
    Ok(neighbor_prices
        .iter()
        .zip(&local.coeffs)
        .zip(&local.upper)
        .map(|((p, a), u)| edge_response(own, *p, *a, *u))
        .collect())
}

type DropFilter = Box<dyn FnMut(&Message) -> bool + Send>;

/// All nodes plus the synchronous round engine.
pub struct DistributedLaSdg {
    nodes: Vec<NodeState>,
    mu: f64,
    eta: EtaSchedule,
    t: u64,
    inboxes: Vec<Vec<Message>>,
    outbox: Vec<Message>,
    deployed: Vec<f64>,
    /// Copy of every node's `λ̂` after the last slot.
    hats: Vec<f64>,
    last_message_count: usize,
    drop: Option<DropFilter>,
    trace: Option<Box<dyn Write + Send>>,
}

impl DistributedLaSdg {
    pub fn new(graph: &NetworkGraph, mu: f64, theta: &[f64], eta: EtaSchedule) -> Result<Self> {
        let n = graph.node_count();
        Self::with_initial(graph, mu, theta, eta, &vec![0.0; n], &vec![0.0; n])
    }

    pub fn with_initial(
        graph: &NetworkGraph,
        mu: f64,
        theta: &[f64],
        eta: EtaSchedule,
        lambda_hat: &[f64],
        queue: &[f64],
    ) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be nonnegative, got {mu}")));
        }
        eta.validate()?;
        let n = graph.node_count();
        check_len("theta", n, theta.len())?;
        check_len("empirical multiplier", n, lambda_hat.len())?;
        check_len("queue", n, queue.len())?;
        Ok(Self {
            nodes: (0..n)
                .map(|i| NodeState::new(graph, i, theta[i], lambda_hat[i], queue[i]))
                .collect(),
            mu,
            eta,
            t: 1,
            inboxes: vec![Vec::new(); n],
            outbox: Vec::new(),
            deployed: vec![0.0; graph.edge_count()],
            hats: lambda_hat.to_vec(),
            last_message_count: 0,
            drop: None,
            trace: None,
        })
    }

    /// Messages for which `filter` returns `false` are not delivered.
    pub fn set_drop_filter(&mut self, filter: impl FnMut(&Message) -> bool + Send + 'static) {
        self.drop = Some(Box::new(filter));
    }

    /// Streams every delivered message as CSV
    /// `slot,phase,sender,receiver,kind,value` with 1-based node ids.
    pub fn set_trace(&mut self, mut writer: Box<dyn Write + Send>) -> Result<()> {
        writeln!(writer, "slot,phase,sender,receiver,kind,value")?;
        self.trace = Some(writer);
        Ok(())
    }

    pub fn flush_trace(&mut self) -> Result<()> {
        if let Some(w) = self.trace.as_mut() {
            w.flush()?;
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn queues(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.queue).collect()
    }

    pub fn lambda_hats(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.lambda_hat).collect()
    }

    /// Messages delivered in the last slot.
    pub fn last_message_count(&self) -> usize {
        self.last_message_count
    }

    /// Deployed edge allocation of the last slot.
    pub fn deployed(&self) -> &[f64] {
        &self.deployed
    }

    fn deliver(&mut self, phase: u8) -> Result<()> {
        for inbox in &mut self.inboxes {
            inbox.clear();
        }
        for msg in self.outbox.drain(..) {
            if let Some(filter) = self.drop.as_mut() {
                if !filter(&msg) {
                    continue;
                }
            }
            if let Some(w) = self.trace.as_mut() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    msg.slot,
                    phase,
                    msg.sender + 1,
                    msg.receiver + 1,
                    msg.kind_token(),
                    msg.value
                )?;
            }
            self.last_message_count += 1;
            self.inboxes[msg.receiver].push(msg);
        }
        for inbox in &mut self.inboxes {
            inbox.sort_by_key(|m| (m.sender, m.edge, m.basis));
        }
        Ok(())
    }

    pub fn step_slot(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<()> {
        check_len("slot capacity", graph.edge_count(), slot.upper.len())?;
        check_len("slot arrivals", graph.node_count(), slot.arrivals.len())?;
        check_len("slot cost", graph.edge_count(), slot.cost.coeffs().len())?;
        let t = self.t;
        let locals: Vec<LocalSlot> = self.nodes.iter().map(|n| n.local_slot(slot)).collect();
        self.last_message_count = 0;

        for node in &mut self.nodes {
            node.broadcast_multipliers(self.mu, t, &mut self.outbox);
        }
        self.deliver(1)?;

        for (node, local) in self.nodes.iter_mut().zip(&locals) {
            node.local_allocate(&self.inboxes[node.id], local, t)?;
        }

        for node in &self.nodes {
            node.send_flows(t, &mut self.outbox);
        }
        self.deliver(3)?;

        let eta = self.eta.eta(t);
        for (node, local) in self.nodes.iter_mut().zip(&locals) {
            node.local_update(&self.inboxes[node.id], local, eta, t)?;
        }
        for node in &self.nodes {
            for (link, x) in node.out_links.iter().zip(&node.x_gamma) {
                self.deployed[link.edge] = *x;
            }
        }
        for (h, node) in self.hats.iter_mut().zip(&self.nodes) {
            *h = node.lambda_hat;
        }
        self.t += 1;
        Ok(())
    }
}

impl Controller for DistributedLaSdg {
    fn step(&mut self, slot: &SlotProblem, graph: &NetworkGraph) -> Result<&[f64]> {
        self.step_slot(slot, graph)?;
        Ok(&self.deployed)
    }

    fn multipliers(&self) -> &[f64] {
        &self.hats
    }

    fn name(&self) -> &'static str {
        "la_sdg_distributed"
    }

    fn snapshot(&self) -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("lambda_hat", self.lambda_hats()),
            ("gamma", self.nodes.iter().map(|n| n.gamma).collect()),
        ]
    }
}

impl std::fmt::Debug for DistributedLaSdg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistributedLaSdg")
            .field("nodes", &self.nodes)
            .field("mu", &self.mu)
            .field("eta", &self.eta)
            .field("t", &self.t)
            .finish_non_exhaustive()
    }
}
