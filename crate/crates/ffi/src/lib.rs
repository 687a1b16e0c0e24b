//! C ABI over `lasdg`.
//!
//! Every fallible function returns a [`LasdgStatus`] and writes results
//! through out-pointers. On failure, [`lasdg_last_error_message`] returns
//! a description owned by the calling thread, valid until that thread's
//! next failing call. Handles are opaque and must be released with their
//! `_free` function; passing NULL to a `_free` function is a no-op.
//! Panics are caught at the boundary and reported as
//! [`LasdgStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lasdg::controllers::Controller;
use lasdg::harness::SimulationConfig;
use lasdg::lagrangian::gradient_bound;
use lasdg::network::{parse_network, queue_update, BoxSet, NetworkGraph};
use lasdg::rng::{self, Purpose, SimRng};
use lasdg::scenario::GeoInstance;
use lasdg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LasdgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LasdgStatus {
    match err {
        Error::Parse { .. } => LasdgStatus::Parse,
        Error::Io(_) => LasdgStatus::Io,
        Error::PowerIterationStalled { .. } | Error::MinimizerStalled { .. } | Error::DualSolverStalled { .. } => {
            LasdgStatus::Numerical
        }
        Error::Slot { source, .. } => status_of(source),
        _ => LasdgStatus::InvalidArgument,
    }
}

struct Failure(LasdgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LasdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LasdgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal error: {message}"));
            LasdgStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LasdgStatus::NullPointer, format!("`{what}` is NULL"))
}

unsafe fn text_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LasdgStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < values.len() {
        return Err(Failure(
            LasdgStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Message of the last failing call on this thread, or NULL if none.
#[no_mangle]
pub extern "C" fn lasdg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn lasdg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A network with per-edge capacities.
pub struct LasdgGraph {
    graph: NetworkGraph,
    capacity: BoxSet,
}

/// Parses the `nodes N` / `src dst|virtual capacity` text format.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_graph_parse(text: *const c_char, out: *mut *mut LasdgGraph) -> LasdgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (graph, capacity) = parse_network(text_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(LasdgGraph { graph, capacity }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a handle from [`lasdg_graph_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lasdg_graph_free(graph: *mut LasdgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `nodes` and `edges` writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_graph_dimensions(
    graph: *const LasdgGraph,
    nodes: *mut usize,
    edges: *mut usize,
) -> LasdgStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        *out_arg(nodes, "nodes")? = g.graph.node_count();
        *out_arg(edges, "edges")? = g.graph.edge_count();
        Ok(())
    })
}

/// `ρ(AᵀA)` of the incidence matrix.
///
/// # Safety
/// `graph` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_graph_spectral_radius(graph: *const LasdgGraph, out: *mut f64) -> LasdgStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        *out_arg(out, "out")? = g.graph.spectral_radius_ata()?;
        Ok(())
    })
}

/// Copies the edge capacities into `buf`, which must hold the edge count.
///
/// # Safety
/// `graph` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lasdg_graph_capacities(graph: *const LasdgGraph, buf: *mut f64, len: usize) -> LasdgStatus {
    guard(|| {
        let g = graph.as_ref().ok_or_else(|| null("graph"))?;
        copy_out(g.capacity.upper(), buf, len)
    })
}

/// Metrics of one simulated slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LasdgSlotRecord {
    pub t: u64,
    pub inst_cost: f64,
    pub avg_cost: f64,
    pub total_queue: f64,
}

/// One controller advancing on one realization's state stream.
pub struct LasdgSimulation {
    instance: GeoInstance,
    controller: Box<dyn Controller>,
    rng: SimRng,
    queues: Vec<f64>,
    t: u64,
    cost_sum: f64,
}

impl LasdgSimulation {
    fn step(&mut self) -> lasdg::Result<LasdgSlotRecord> {
        let t = self.t + 1;
        let graph = self.instance.graph();
        let state = self.instance.sample_state(&mut self.rng);
        let slot = self.instance.slot_problem(&state).map_err(|e| at(e, t))?;
        let x = self.controller.step(&slot, graph).map_err(|e| at(e, t))?;
        let inst_cost = self.instance.evaluate_cost(x, &state).map_err(|e| at(e, t))?;
        self.queues = queue_update(&self.queues, x, &slot.arrivals, graph).map_err(|e| at(e, t))?;
        self.cost_sum += inst_cost;
        self.t = t;
        Ok(LasdgSlotRecord {
            t,
            inst_cost,
            avg_cost: self.cost_sum / t as f64,
            total_queue: self.queues.iter().sum(),
        })
    }
}

fn at(e: Error, slot: u64) -> Error {
    Error::Slot {
        slot,
        source: Box::new(e),
    }
}

/// Builds the configured scenario and controller from `key = value`
/// config text. Realization `r` uses state seed `seed + r`, matching the
/// Monte Carlo harness.
///
/// # Safety
/// `config` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_new(
    config: *const c_char,
    realization: u64,
    out: *mut *mut LasdgSimulation,
) -> LasdgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = SimulationConfig::parse(text_arg(config, "config")?)?;
        let instance = GeoInstance::new(cfg.scenario.clone())?;
        let graph = instance.graph();
        let m = gradient_bound(graph, instance.capacity().upper(), &instance.arrival_bounds())?;
        let controller = cfg.controller.build(graph, m)?;
        let queues = vec![0.0; graph.node_count()];
        let sim = LasdgSimulation {
            rng: rng::stream(cfg.seed.wrapping_add(realization), Purpose::State),
            instance,
            controller,
            queues,
            t: 0,
            cost_sum: 0.0,
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from [`lasdg_simulation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_free(sim: *mut LasdgSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances one slot and writes its metrics to `record`.
///
/// # Safety
/// `sim` must be a live handle; `record` writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_step(sim: *mut LasdgSimulation, record: *mut LasdgSlotRecord) -> LasdgStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        let r = sim.step()?;
        *out_arg(record, "record")? = r;
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_node_count(sim: *const LasdgSimulation, out: *mut usize) -> LasdgStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        *out_arg(out, "out")? = sim.instance.graph().node_count();
        Ok(())
    })
}

/// Physical queue per node after the last slot.
///
/// # Safety
/// `sim` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_queues(sim: *const LasdgSimulation, buf: *mut f64, len: usize) -> LasdgStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        copy_out(&sim.queues, buf, len)
    })
}

/// The controller's multipliers (`λ̂` for LA-SDG).
///
/// # Safety
/// `sim` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lasdg_simulation_multipliers(
    sim: *const LasdgSimulation,
    buf: *mut f64,
    len: usize,
) -> LasdgStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("sim"))?;
        copy_out(sim.controller.multipliers(), buf, len)
    })
}

/// Scalar part of an oracle solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LasdgOracleSummary {
    pub dual_value: f64,
    pub primal_cost: f64,
    pub kkt_residual: f64,
    pub complementary_slackness: f64,
    pub primal_violation: f64,
    pub dual_smoothness: f64,
    pub iterations: u64,
    pub sample_count: u64,
}

/// Solves the sample-average dual of the configured scenario with the
/// config's `oracle_samples`, `oracle_seed` and `oracle_tol`, writing `λ*`
/// into `lambda` (node count entries).
///
/// # Safety
/// `config` must be NUL-terminated; `summary` writable; `lambda` must point
/// to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lasdg_oracle_solve(
    config: *const c_char,
    summary: *mut LasdgOracleSummary,
    lambda: *mut f64,
    len: usize,
) -> LasdgStatus {
    guard(|| {
        let cfg = SimulationConfig::parse(text_arg(config, "config")?)?;
        let summary = out_arg(summary, "summary")?;
        let instance = GeoInstance::new(cfg.scenario.clone())?;
        if len < instance.graph().node_count() {
            return Err(Failure(
                LasdgStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", instance.graph().node_count()),
            ));
        }
        let (_, r) = lasdg::harness::oracle_solve(&instance, cfg.oracle_samples, cfg.oracle_seed, cfg.oracle_tol)?;
        copy_out(&r.lambda, lambda, len)?;
        *summary = LasdgOracleSummary {
            dual_value: r.dual_value,
            primal_cost: r.primal_cost,
            kkt_residual: r.kkt_residual,
            complementary_slackness: r.complementary_slackness,
            primal_violation: r.primal_violation,
            dual_smoothness: r.dual_smoothness,
            iterations: r.iterations as u64,
            sample_count: r.sample_count as u64,
        };
        Ok(())
    })
}
