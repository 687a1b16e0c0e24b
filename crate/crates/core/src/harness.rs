//! Simulation loop, Monte Carlo orchestration and CSV output.
//!
//! All controllers of a run advance in lockstep on one state stream per
//! realization, so compared algorithms see identical states and adding an
//! algorithm never changes another one's trajectory. Realization `r` uses
//! seed `base_seed + r`; per-realization results are reduced in index order.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::controllers::{Algorithm, Controller, ControllerConfig};
use crate::error::{Error, Result};
use crate::kv::{join, KvFile};
use crate::lagrangian::gradient_bound;
use crate::network::queue_update;
use crate::oracle::{self, FiniteSupportDistribution, OracleReport, SolverOptions};
use crate::rng::{self, Purpose};
use crate::scenario::{GeoInstance, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scenario: ScenarioConfig,
    pub controller: ControllerConfig,
    /// Slots per realization.
    pub horizon: u64,
    pub realizations: usize,
    pub seed: u64,
    /// Fraction of final slots averaged for steady-state summaries.
    pub window_fraction: f64,
    /// Multiplier snapshots every this many slots; 0 disables them.
    pub snapshot_stride: u64,
    /// Adds `node_q_1..node_q_I` columns to trajectory CSV.
    pub node_queues: bool,
    pub out_dir: Option<PathBuf>,
    /// `compare` runs every algorithm at each of these stepsizes.
    pub sweep_mu: Vec<f64>,
    /// `compare` runs heavy-ball at each of these momentum factors.
    pub sweep_beta: Vec<f64>,
    pub oracle_samples: usize,
    pub oracle_seed: u64,
    pub oracle_tol: f64,
    /// Realizations `0..n` write trajectory CSV when `out_dir` is set.
    pub trajectory_realizations: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            controller: ControllerConfig::default(),
            horizon: 200_000,
            realizations: 20,
            seed: 1,
            window_fraction: 0.25,
            snapshot_stride: 0,
            node_queues: false,
            out_dir: None,
            sweep_mu: Vec::new(),
            sweep_beta: Vec::new(),
            oracle_samples: 100_000,
            oracle_seed: 17,
            oracle_tol: 1e-9,
            trajectory_realizations: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be at least 1"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::invalid("window_fraction", "must lie in (0, 1]"));
        }
        if !(self.oracle_tol > 0.0) {
            return Err(Error::invalid("oracle_tol", "must be positive"));
        }
        if self.oracle_samples == 0 {
            return Err(Error::invalid("oracle_samples", "must be at least 1"));
        }
        Ok(())
    }

    /// Reads a flat `key = value` file with scenario, controller and
    /// simulation keys. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let d = Self::default();
        let scenario = ScenarioConfig::take_from(&mut kv)?;
        let controller = ControllerConfig::take_from(&mut kv)?;
        let out_dir = kv.take_raw("out_dir").map(|(_, v)| PathBuf::from(v));
        let cfg = Self {
            scenario,
            controller,
            horizon: kv.take("horizon")?.unwrap_or(d.horizon),
            realizations: kv.take("realizations")?.unwrap_or(d.realizations),
            seed: kv.take("seed")?.unwrap_or(d.seed),
            window_fraction: kv.take("window_fraction")?.unwrap_or(d.window_fraction),
            snapshot_stride: kv.take("snapshot_stride")?.unwrap_or(d.snapshot_stride),
            node_queues: kv.take_bool("node_queues")?.unwrap_or(d.node_queues),
            out_dir,
            sweep_mu: kv.take_list("sweep_mu")?.unwrap_or(d.sweep_mu),
            sweep_beta: kv.take_list("sweep_beta")?.unwrap_or(d.sweep_beta),
            oracle_samples: kv.take("oracle_samples")?.unwrap_or(d.oracle_samples),
            oracle_seed: kv.take("oracle_seed")?.unwrap_or(d.oracle_seed),
            oracle_tol: kv.take("oracle_tol")?.unwrap_or(d.oracle_tol),
            trajectory_realizations: kv
                .take("trajectory_realizations")?
                .unwrap_or(d.trajectory_realizations),
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# scenario");
        self.scenario.write_to(&mut s);
        let _ = writeln!(s, "# controller");
        self.controller.write_to(&mut s);
        let _ = writeln!(s, "# simulation");
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "realizations = {}", self.realizations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "window_fraction = {:?}", self.window_fraction);
        let _ = writeln!(s, "snapshot_stride = {}", self.snapshot_stride);
        let _ = writeln!(s, "node_queues = {}", self.node_queues);
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {}", dir.display());
        }
        let _ = writeln!(s, "sweep_mu = {}", join(&self.sweep_mu));
        let _ = writeln!(s, "sweep_beta = {}", join(&self.sweep_beta));
        let _ = writeln!(s, "oracle_samples = {}", self.oracle_samples);
        let _ = writeln!(s, "oracle_seed = {}", self.oracle_seed);
        let _ = writeln!(s, "oracle_tol = {:?}", self.oracle_tol);
        let _ = writeln!(s, "trajectory_realizations = {}", self.trajectory_realizations);
        s
    }

    /// Number of final slots in the steady-state window.
    pub fn window_len(&self) -> u64 {
        window_len(self.horizon, self.window_fraction)
    }

    /// The single algorithm of `simulate`.
    pub fn simulate_specs(&self) -> Vec<AlgoSpec> {
        vec![AlgoSpec::new(self.controller.clone())]
    }

    /// The sweep of `compare`: SDG, LA-SDG and heavy-ball per momentum
    /// factor, at every stepsize.
    pub fn compare_specs(&self) -> Vec<AlgoSpec> {
        let mus = if self.sweep_mu.is_empty() {
            vec![self.controller.mu]
        } else {
            self.sweep_mu.clone()
        };
        let betas = if self.sweep_beta.is_empty() {
            vec![self.controller.beta]
        } else {
            self.sweep_beta.clone()
        };
        let tag = mus.len() > 1;
        let mut specs = Vec::new();
        for &mu in &mus {
            let base = ControllerConfig {
                mu,
                ..self.controller.clone()
            };
            let mut push = |cfg: ControllerConfig| {
                let mut spec = AlgoSpec::new(cfg);
                if tag {
                    spec.label = format!("{}@mu={}", spec.label, mu);
                }
                specs.push(spec);
            };
            push(ControllerConfig {
                algo: Algorithm::Sdg,
                ..base.clone()
            });
            push(ControllerConfig {
                algo: Algorithm::LaSdg,
                ..base.clone()
            });
            for &beta in &betas {
                push(ControllerConfig {
                    algo: Algorithm::HeavyBall,
                    beta,
                    ..base.clone()
                });
            }
        }
        specs
    }
}

pub fn window_len(horizon: u64, fraction: f64) -> u64 {
    ((horizon as f64 * fraction).ceil() as u64).clamp(1, horizon.max(1))
}

/// One algorithm of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSpec {
    pub label: String,
    pub config: ControllerConfig,
}

impl AlgoSpec {
    pub fn new(config: ControllerConfig) -> Self {
        Self {
            label: config.label(),
            config,
        }
    }
}

/// Per-slot metrics for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub algo: String,
    pub realization: usize,
    pub inst_cost: f64,
    /// `(1/t)·Σ_{τ≤t} inst_cost`.
    pub avg_cost: f64,
    /// `Σ_i q^i` at the end of slot `t`.
    pub total_queue: f64,
    pub node_queues: Option<Vec<f64>>,
}

/// What an observer sees after one controller's slot.
pub struct SlotView<'a> {
    pub t: u64,
    pub inst_cost: f64,
    pub avg_cost: f64,
    pub total_queue: f64,
    /// Physical queues at the end of the slot.
    pub queues: &'a [f64],
    pub controller: &'a dyn Controller,
}

/// Advances `controllers` in lockstep for `horizon` slots on the state
/// stream of `seed`, tracking each one's physical queue from its deployed
/// allocations. `observe(k, view)` runs after controller `k`'s slot.
pub fn run_lockstep<F>(
    instance: &GeoInstance,
    controllers: &mut [Box<dyn Controller>],
    horizon: u64,
    seed: u64,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &SlotView<'_>) -> Result<()>,
{
    let graph = instance.graph();
    let n = graph.node_count();
    let mut rng = rng::stream(seed, Purpose::State);
    let mut queues = vec![vec![0.0; n]; controllers.len()];
    let mut cost_sums = vec![0.0; controllers.len()];
    for t in 1..=horizon {
        let state = instance.sample_state(&mut rng);
        let slot = instance.slot_problem(&state).map_err(|e| e.at_slot(t))?;
        for (k, ctrl) in controllers.iter_mut().enumerate() {
            let x = ctrl.step(&slot, graph).map_err(|e| e.at_slot(t))?;
            let inst_cost = instance.evaluate_cost(x, &state).map_err(|e| e.at_slot(t))?;
            queues[k] = queue_update(&queues[k], x, &slot.arrivals, graph).map_err(|e| e.at_slot(t))?;
            cost_sums[k] += inst_cost;
            let view = SlotView {
                t,
                inst_cost,
                avg_cost: cost_sums[k] / t as f64,
                total_queue: queues[k].iter().sum(),
                queues: &queues[k],
                controller: ctrl.as_ref(),
            };
            observe(k, &view)?;
        }
    }
    Ok(())
}

fn build_controllers(instance: &GeoInstance, specs: &[AlgoSpec]) -> Result<Vec<Box<dyn Controller>>> {
    let m = gradient_bound(instance.graph(), instance.capacity().upper(), &instance.arrival_bounds())?;
    specs.iter().map(|s| s.config.build(instance.graph(), m)).collect()
}

/// In-memory trajectory of every spec for one seed. Meant for short runs.
pub fn run_trajectory(
    instance: &GeoInstance,
    specs: &[AlgoSpec],
    horizon: u64,
    seed: u64,
    realization: usize,
    node_queues: bool,
) -> Result<Vec<TrajectoryRecord>> {
    let mut controllers = build_controllers(instance, specs)?;
    let mut out = Vec::with_capacity(horizon as usize * specs.len());
    run_lockstep(instance, &mut controllers, horizon, seed, |k, v| {
        out.push(TrajectoryRecord {
            t: v.t,
            algo: specs[k].label.clone(),
            realization,
            inst_cost: v.inst_cost,
            avg_cost: v.avg_cost,
            total_queue: v.total_queue,
            node_queues: node_queues.then(|| v.queues.to_vec()),
        });
        Ok(())
    })?;
    Ok(out)
}

/// Options for one realization beyond the algorithm list.
#[derive(Debug, Clone, Default)]
pub struct RealizationOptions {
    pub horizon: u64,
    pub window_len: u64,
    /// Slots after which each controller's multipliers are recorded.
    pub checkpoints: Vec<u64>,
    pub trajectory_path: Option<PathBuf>,
    pub node_queues: bool,
    pub snapshot_path: Option<PathBuf>,
    pub snapshot_stride: u64,
}

/// Tail statistics and checkpoints of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub realization: usize,
    /// Steady-state mean cost per algorithm.
    pub tail_cost: Vec<f64>,
    /// Steady-state mean aggregate queue per algorithm.
    pub tail_queue: Vec<f64>,
    /// `checkpoint_multipliers[k][c]`: multipliers of algorithm `k` after
    /// checkpoint slot `c`.
    pub checkpoint_multipliers: Vec<Vec<Vec<f64>>>,
}

pub fn run_realization(
    instance: &GeoInstance,
    specs: &[AlgoSpec],
    seed: u64,
    realization: usize,
    options: &RealizationOptions,
) -> Result<RealizationOutcome> {
    let mut controllers = build_controllers(instance, specs)?;
    let node_count = instance.graph().node_count();
    let mut traj = match &options.trajectory_path {
        Some(p) => Some(TrajectoryWriter::new(
            BufWriter::new(File::create(p)?),
            options.node_queues.then_some(node_count),
        )?),
        None => None,
    };
    let mut snaps = match (&options.snapshot_path, options.snapshot_stride) {
        (Some(p), stride) if stride > 0 => {
            let mut w = BufWriter::new(File::create(p)?);
            let mut header = String::from("t,algo,realization,kind");
            for i in 1..=node_count {
                let _ = write!(header, ",node_{i}");
            }
            writeln!(w, "{header}")?;
            Some(w)
        }
        _ => None,
    };
    let start = options.horizon - options.window_len.min(options.horizon);
    let mut tail_cost = vec![0.0; specs.len()];
    let mut tail_queue = vec![0.0; specs.len()];
    let mut checkpoint_multipliers = vec![Vec::new(); specs.len()];
    run_lockstep(instance, &mut controllers, options.horizon, seed, |k, v| {
        if v.t > start {
            tail_cost[k] += v.inst_cost;
            tail_queue[k] += v.total_queue;
        }
        if options.checkpoints.contains(&v.t) {
            checkpoint_multipliers[k].push(v.controller.multipliers().to_vec());
        }
        if let Some(w) = traj.as_mut() {
            w.write_row(
                v.t,
                &specs[k].label,
                realization,
                v.inst_cost,
                v.avg_cost,
                v.total_queue,
                Some(v.queues),
            )?;
        }
        if let Some(w) = snaps.as_mut() {
            if v.t % options.snapshot_stride == 0 {
                for (kind, values) in v.controller.snapshot() {
                    writeln!(w, "{},{},{},{},{}", v.t, specs[k].label, realization, kind, join(&values))?;
                }
            }
        }
        Ok(())
    })?;
    if let Some(w) = traj {
        w.finish()?;
    }
    if let Some(mut w) = snaps {
        w.flush()?;
    }
    let len = (options.horizon - start) as f64;
    tail_cost.iter_mut().for_each(|c| *c /= len);
    tail_queue.iter_mut().for_each(|q| *q /= len);
    Ok(RealizationOutcome {
        realization,
        tail_cost,
        tail_queue,
        checkpoint_multipliers,
    })
}

/// Steady-state summary of one algorithm across realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub algo: String,
    pub mu: f64,
    pub beta: Option<f64>,
    pub theta_scale: Option<f64>,
    pub mean_cost: f64,
    /// `1.96·sd/√R`; zero for a single realization.
    pub cost_halfwidth: f64,
    pub mean_queue: f64,
    pub queue_halfwidth: f64,
    pub realizations: usize,
}

/// Mean and normal-approximation 95% halfwidth, summed in index order.
pub fn mean_halfwidth(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

pub fn summarize(specs: &[AlgoSpec], outcomes: &[RealizationOutcome]) -> Vec<SummaryRecord> {
    specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let costs: Vec<f64> = outcomes.iter().map(|o| o.tail_cost[k]).collect();
            let queues: Vec<f64> = outcomes.iter().map(|o| o.tail_queue[k]).collect();
            let (mean_cost, cost_halfwidth) = mean_halfwidth(&costs);
            let (mean_queue, queue_halfwidth) = mean_halfwidth(&queues);
            SummaryRecord {
                algo: spec.label.clone(),
                mu: spec.config.mu,
                beta: (spec.config.algo == Algorithm::HeavyBall).then_some(spec.config.beta),
                theta_scale: (spec.config.algo == Algorithm::LaSdg).then_some(spec.config.theta_scale),
                mean_cost,
                cost_halfwidth,
                mean_queue,
                queue_halfwidth,
                realizations: outcomes.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub specs: Vec<AlgoSpec>,
    pub outcomes: Vec<RealizationOutcome>,
    pub summaries: Vec<SummaryRecord>,
}

/// Runs `config.realizations` realizations of `specs`, concurrently when
/// more than one core is available.
pub fn monte_carlo(config: &SimulationConfig, specs: &[AlgoSpec], checkpoints: &[u64]) -> Result<MonteCarloResult> {
    config.validate()?;
    let instance = GeoInstance::new(config.scenario.clone())?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let options_for = |r: usize| RealizationOptions {
        horizon: config.horizon,
        window_len: config.window_len(),
        checkpoints: checkpoints.to_vec(),
        trajectory_path: config
            .out_dir
            .as_ref()
            .filter(|_| r < config.trajectory_realizations)
            .map(|d| d.join(format!("trajectory_r{r}.csv"))),
        node_queues: config.node_queues,
        snapshot_path: config
            .out_dir
            .as_ref()
            .filter(|_| config.snapshot_stride > 0 && r < config.trajectory_realizations)
            .map(|d| d.join(format!("snapshots_r{r}.csv"))),
        snapshot_stride: config.snapshot_stride,
    };
    let outcomes = parallel_map(config.realizations, |r| {
        run_realization(&instance, specs, config.seed.wrapping_add(r as u64), r, &options_for(r))
    })?;
    let summaries = summarize(specs, &outcomes);
    if let Some(dir) = &config.out_dir {
        let mut w = BufWriter::new(File::create(dir.join("summary.csv"))?);
        write_summary_csv(&summaries, &mut w)?;
        w.flush()?;
    }
    Ok(MonteCarloResult {
        specs: specs.to_vec(),
        outcomes,
        summaries,
    })
}

/// `f(0..n)` with results in index order.
fn parallel_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
    if workers <= 1 {
        return (0..n).map(&f).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let chunks: Vec<_> = slots
            .chunks_mut(n.div_ceil(workers))
            .enumerate()
            .map(|(c, chunk)| {
                let base = c * n.div_ceil(workers);
                scope.spawn(move || {
                    for (i, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(f(base + i));
                    }
                })
            })
            .collect();
        for h in chunks {
            h.join().expect("realization worker panicked");
        }
    });
    slots.into_iter().map(|s| s.expect("every realization ran")).collect()
}

/// SAA oracle for an instance. Iterates are clipped to ten times the
/// Slater multiplier bound when the instance certifies a positive slack.
pub fn oracle_solve(
    instance: &GeoInstance,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<(FiniteSupportDistribution, OracleReport)> {
    let dist = oracle::sample_average(instance, samples, seed)?;
    let zeta = instance.slater_slack();
    let clip_radius = if zeta > 0.0 {
        Some(10.0 * oracle::slater_multiplier_bound(&dist, zeta)?)
    } else {
        None
    };
    let report = oracle::solve_ensemble_dual(
        &dist,
        instance.graph(),
        &SolverOptions {
            tolerance,
            clip_radius,
            ..SolverOptions::default()
        },
    )?;
    Ok((dist, report))
}

/// Streaming writer for trajectory CSV.
#[derive(Debug)]
pub struct TrajectoryWriter<W: Write> {
    out: W,
    node_columns: Option<usize>,
    line: String,
}

impl<W: Write> TrajectoryWriter<W> {
    /// Writes the header. `node_columns` adds `node_q_1..node_q_I`.
    pub fn new(mut out: W, node_columns: Option<usize>) -> Result<Self> {
        let mut header = String::from("t,algo,realization,inst_cost,avg_cost,total_queue");
        if let Some(n) = node_columns {
            for i in 1..=n {
                let _ = write!(header, ",node_q_{i}");
            }
        }
        writeln!(out, "{header}")?;
        Ok(Self {
            out,
            node_columns,
            line: String::new(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn write_row(
        &mut self,
        t: u64,
        algo: &str,
        realization: usize,
        inst_cost: f64,
        avg_cost: f64,
        total_queue: f64,
        queues: Option<&[f64]>,
    ) -> Result<()> {
        self.line.clear();
        let _ = write!(self.line, "{t},{algo},{realization},{inst_cost},{avg_cost},{total_queue}");
        if let Some(n) = self.node_columns {
            let q = queues.ok_or_else(|| Error::invalid("node_queues", "row lacks per-node queues"))?;
            crate::error::check_len("node queues", n, q.len())?;
            for v in q {
                let _ = write!(self.line, ",{v}");
            }
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        Ok(())
    }

    pub fn write_record(&mut self, r: &TrajectoryRecord) -> Result<()> {
        self.write_row(
            r.t,
            &r.algo,
            r.realization,
            r.inst_cost,
            r.avg_cost,
            r.total_queue,
            r.node_queues.as_deref(),
        )
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn emit_csv(records: &[TrajectoryRecord], path: &Path, node_columns: Option<usize>) -> Result<()> {
    let mut w = TrajectoryWriter::new(BufWriter::new(File::create(path)?), node_columns)?;
    for r in records {
        w.write_record(r)?;
    }
    w.finish()?;
    Ok(())
}

/// Reads trajectory CSV written by [`TrajectoryWriter`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    let fixed = ["t", "algo", "realization", "inst_cost", "avg_cost", "total_queue"];
    if columns.len() < fixed.len() || columns[..fixed.len()] != fixed {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header `{header}`"),
        });
    }
    let node_cols = columns.len() - fixed.len();
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let bad = |m: String| Error::Parse { line: lineno, message: m };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(format!("expected {} fields, found {}", columns.len(), fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number `{s}`: {e}")));
        let node_queues = if node_cols > 0 {
            Some(fields[6..].iter().map(|s| num(s)).collect::<Result<Vec<f64>>>()?)
        } else {
            None
        };
        out.push(TrajectoryRecord {
            t: fields[0].parse().map_err(|e| bad(format!("bad slot: {e}")))?,
            algo: fields[1].to_string(),
            realization: fields[2].parse().map_err(|e| bad(format!("bad realization: {e}")))?,
            inst_cost: num(fields[3])?,
            avg_cost: num(fields[4])?,
            total_queue: num(fields[5])?,
            node_queues,
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(summaries: &[SummaryRecord], out: &mut W) -> Result<()> {
    writeln!(
        out,
        "algo,mu,beta,theta_scale,mean_cost,cost_halfwidth,mean_queue,queue_halfwidth,realizations"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.algo,
            s.mu,
            opt(s.beta),
            opt(s.theta_scale),
            s.mean_cost,
            s.cost_halfwidth,
            s.mean_queue,
            s.queue_halfwidth,
            s.realizations
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Interval;

    fn small() -> SimulationConfig {
        SimulationConfig {
            scenario: ScenarioConfig {
                mapping_nodes: 2,
                data_centers: 2,
                ..ScenarioConfig::default()
            },
            horizon: 300,
            realizations: 3,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn single_slot_average_is_instantaneous() {
        let cfg = small();
        let inst = GeoInstance::new(cfg.scenario.clone()).unwrap();
        let recs = run_trajectory(&inst, &cfg.simulate_specs(), 1, 5, 0, false).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].avg_cost, recs[0].inst_cost);
    }

    #[test]
    fn constant_state_queue_settles_at_fixed_point() {
        // One mapping node, one data center, constant state. SDG's fixed
        // point: λ_k = 2p·c, λ_j = λ_k + 2b·c, queue = λ/μ.
        let cfg = SimulationConfig {
            scenario: ScenarioConfig {
                mapping_nodes: 1,
                data_centers: 1,
                price: Interval::new(10.0, 10.0),
                renewable: Interval::new(20.0, 20.0),
                arrival: Interval::new(30.0, 30.0),
                bandwidth_limit: Interval::new(160.0, 160.0),
                ..ScenarioConfig::default()
            },
            controller: ControllerConfig {
                algo: Algorithm::Sdg,
                mu: 0.25,
                ..ControllerConfig::default()
            },
            ..SimulationConfig::default()
        };
        let inst = GeoInstance::new(cfg.scenario.clone()).unwrap();
        let recs = run_trajectory(&inst, &cfg.simulate_specs(), 20_000, 1, 0, true).unwrap();
        let q = recs.last().unwrap().node_queues.clone().unwrap();
        let lk = 2.0 * 10.0 * 30.0;
        let lj = lk + 2.0 * 0.25 * 30.0;
        assert!((q[1] - lk / 0.25).abs() < 1e-6 * lk, "{q:?}");
        assert!((q[0] - lj / 0.25).abs() < 1e-6 * lj, "{q:?}");
    }

    #[test]
    fn monte_carlo_is_deterministic_and_single_run_summary_matches() {
        let cfg = small();
        let specs = cfg.compare_specs();
        let a = monte_carlo(&cfg, &specs, &[]).unwrap();
        let b = monte_carlo(&cfg, &specs, &[]).unwrap();
        assert_eq!(a.summaries, b.summaries);
        let one = SimulationConfig {
            realizations: 1,
            ..cfg.clone()
        };
        let r = monte_carlo(&one, &specs, &[]).unwrap();
        assert_eq!(r.summaries[0].mean_cost, r.outcomes[0].tail_cost[0]);
        assert_eq!(r.summaries[0].cost_halfwidth, 0.0);
    }

    #[test]
    fn adding_an_algorithm_leaves_others_unchanged() {
        let cfg = small();
        let inst = GeoInstance::new(cfg.scenario.clone()).unwrap();
        let specs = cfg.compare_specs();
        let alone = run_trajectory(&inst, &specs[..1], 200, 9, 0, true).unwrap();
        let together = run_trajectory(&inst, &specs, 200, 9, 0, true).unwrap();
        let filtered: Vec<_> = together.into_iter().filter(|r| r.algo == specs[0].label).collect();
        assert_eq!(alone, filtered);
    }

    #[test]
    fn config_round_trip() {
        let cfg = SimulationConfig {
            sweep_mu: vec![0.05, 0.1],
            sweep_beta: vec![0.4, 0.99],
            out_dir: Some(PathBuf::from("/tmp/out")),
            window_fraction: 0.3,
            ..small()
        };
        assert_eq!(SimulationConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(matches!(
            SimulationConfig::parse("horizon = 10\nbogus = 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(SimulationConfig::parse("window_fraction = 0\n").is_err());
        assert!(SimulationConfig::parse("horizon = ten\n").is_err());
    }

    #[test]
    fn empty_csv_is_header_only() {
        let w = TrajectoryWriter::new(Vec::new(), None).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text, "t,algo,realization,inst_cost,avg_cost,total_queue\n");
        assert!(parse_trajectory_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn window_length() {
        assert_eq!(window_len(200_000, 0.25), 50_000);
        assert_eq!(window_len(1, 0.25), 1);
        assert_eq!(window_len(10, 1.0), 10);
    }

    #[test]
    fn halfwidth() {
        assert_eq!(mean_halfwidth(&[3.0]), (3.0, 0.0));
        let (m, h) = mean_halfwidth(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
    }
}
