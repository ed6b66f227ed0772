//! The slot loop: sample links, decide, move traffic, update the data and
//! virtual power queues, and accumulate run metrics.

use crate::channel::{ChannelSampler, ChannelState};
use crate::dlsa::{decide, SlotDecision, DEFAULT_EXACT_LIMIT};
use crate::model::{build_graph, Graph, NetworkConfig, NodeId};
use crate::{Error, Result};

/// Slack for floating-point comparisons inside the per-slot checks.
const CHECK_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance on cumulative packet conservation.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

/// Data backlogs `Q[n][k]` (commodity index `k`) and virtual power queues.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub backlog: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

impl QueueState {
    pub fn empty(node_count: usize, commodity_count: usize) -> Self {
        QueueState {
            backlog: vec![vec![0.0; commodity_count]; node_count],
            z: vec![0.0; node_count],
        }
    }

    pub fn total_backlog(&self) -> f64 {
        self.backlog.iter().flatten().sum()
    }
}

/// Result of moving one slot's traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueUpdate {
    pub backlog: Vec<Vec<f64>>,
    /// Packets absorbed at their destination this slot, per commodity.
    pub delivered: Vec<f64>,
    /// Actual transfers `x[i][j][k]`, never above the allocated rate.
    pub transfers: Vec<Vec<Vec<f64>>>,
}

/// Applies one slot of service, routing and admission.
///
/// Transfers are computed from the slot-start backlog: when a node's
/// allocated outgoing rates for a commodity exceed what it holds, the
/// backlog is split across those links in proportion to their rates and
/// the rest of the service is idle. Arrivals become usable next slot.
/// `destinations[k]` is the node absorbing commodity `k`.
pub fn update_queues(backlog: &[Vec<f64>], decision: &SlotDecision, destinations: &[NodeId]) -> Result<QueueUpdate> {
    let n = backlog.len();
    let c = destinations.len();
    let rates = &decision.commodity_rates;
    let mut transfers = vec![vec![vec![0.0; c]; n]; n];
    for i in 0..n {
        for k in 0..c {
            let allocated: f64 = (0..n).map(|j| rates[i][j][k]).sum();
            if allocated <= 0.0 {
                continue;
            }
            let share = (backlog[i][k] / allocated).min(1.0);
            for j in 0..n {
                transfers[i][j][k] = rates[i][j][k] * share;
            }
        }
    }

    let mut next = vec![vec![0.0; c]; n];
    let mut delivered = vec![0.0; c];
    for i in 0..n {
        for k in 0..c {
            let sent: f64 = (0..n).map(|j| transfers[i][j][k]).sum();
            let received: f64 = (0..n).map(|a| transfers[a][i][k]).sum();
            if destinations[k] == i {
                delivered[k] += received + decision.admissions[i][k];
                continue;
            }
            let mut q = backlog[i][k] - sent;
            if q < 0.0 {
                if q < -CHECK_TOLERANCE * (1.0 + backlog[i][k]) {
                    return Err(Error::Fault {
                        slot: 0,
                        message: format!("node {i} commodity {k} sent {sent} from backlog {}", backlog[i][k]),
                    });
                }
                q = 0.0;
            }
            next[i][k] = q + received + decision.admissions[i][k];
        }
    }
    Ok(QueueUpdate {
        backlog: next,
        delivered,
        transfers,
    })
}

/// `Z'_n = max(Z_n - P_tot, 0) + sum_b p_nb g_nb`
pub fn update_virtual(z: &[f64], decision: &SlotDecision, avg_power_budget: f64) -> Vec<f64> {
    z.iter()
        .enumerate()
        .map(|(node, &zn)| (zn - avg_power_budget).max(0.0) + decision.node_power(node))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Largest undirected edge count solved by exhaustive selection.
    pub exact_limit: usize,
    /// Verify every per-slot invariant and abort with a fault on failure.
    pub check_invariants: bool,
    pub record_trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            exact_limit: DEFAULT_EXACT_LIMIT,
            check_invariants: false,
            record_trace: false,
        }
    }
}

/// Per-slot summary for traces.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    /// Total backlog after the update.
    pub total_backlog: f64,
    /// Virtual queues after the update.
    pub z: Vec<f64>,
    pub objective: f64,
    pub admitted_sum: f64,
    /// `sum U(R_n^c(t))` of this slot's admissions.
    pub instant_utility: f64,
}

/// Output of a single slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub channel: ChannelState,
    pub decision: SlotDecision,
    pub record: SlotRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub horizon: u64,
    pub control_v: f64,
    pub seed: u64,
    /// Time-average admitted rate per `(node, commodity index)`.
    pub avg_admitted: Vec<Vec<f64>>,
    /// Sum of utilities of the time-average admitted rates.
    pub avg_utility: f64,
    /// Time average of the per-slot utility sum (never above `avg_utility`).
    pub avg_instant_utility: f64,
    /// Time average of the total backlog.
    pub avg_backlog: f64,
    /// Time-average output power per node.
    pub avg_power: Vec<f64>,
    /// Cumulative packets delivered, per commodity.
    pub delivered: Vec<f64>,
    /// Cumulative packets admitted, per commodity.
    pub admitted: Vec<f64>,
    pub final_state: QueueState,
    /// `max Q(T) / T`
    pub stability_stat: f64,
    /// Slots solved by the greedy selection.
    pub approximate_slots: u64,
    pub trace: Option<Vec<SlotRecord>>,
}

impl RunMetrics {
    pub fn max_avg_power(&self) -> f64 {
        self.avg_power.iter().copied().fold(0.0, f64::max)
    }

    /// `Z_n(T) / T` per node.
    pub fn power_excess(&self) -> Vec<f64> {
        let t = self.horizon.max(1) as f64;
        self.final_state.z.iter().map(|z| z / t).collect()
    }
}

/// Steps a configuration forward one slot at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: NetworkConfig,
    graph: Graph,
    sampler: ChannelSampler,
    destinations: Vec<NodeId>,
    options: SimOptions,
    state: QueueState,
    slot: u64,
    sum_admitted: Vec<Vec<f64>>,
    sum_backlog: f64,
    sum_power: Vec<f64>,
    sum_instant_utility: f64,
    delivered: Vec<f64>,
    admitted: Vec<f64>,
    approximate_slots: u64,
    trace: Vec<SlotRecord>,
}

impl Simulator {
    pub fn new(cfg: &NetworkConfig, options: SimOptions) -> Result<Self> {
        let graph = build_graph(cfg)?;
        let n = cfg.node_count;
        let c = cfg.commodity_count();
        Ok(Simulator {
            cfg: cfg.clone(),
            graph,
            sampler: ChannelSampler::new(cfg),
            destinations: cfg.commodity_ids(),
            options,
            state: QueueState::empty(n, c),
            slot: 0,
            sum_admitted: vec![vec![0.0; c]; n],
            sum_backlog: 0.0,
            sum_power: vec![0.0; n],
            sum_instant_utility: 0.0,
            delivered: vec![0.0; c],
            admitted: vec![0.0; c],
            approximate_slots: 0,
            trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &QueueState {
        &self.state
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn step(&mut self) -> Result<SlotOutcome> {
        let slot = self.slot;
        let channel = self.sampler.sample(slot);
        let decision = decide(
            &self.cfg,
            &self.graph,
            &self.state.backlog,
            &self.state.z,
            &channel,
            self.options.exact_limit,
        )?;
        let update = update_queues(&self.state.backlog, &decision, &self.destinations).map_err(|e| match e {
            Error::Fault { message, .. } => Error::Fault { slot, message },
            other => other,
        })?;
        let z = update_virtual(&self.state.z, &decision, self.cfg.avg_power_budget);
        let next = QueueState {
            backlog: update.backlog,
            z,
        };

        let admitted_sum: f64 = decision.admissions.iter().flatten().sum();
        for (k, d) in update.delivered.iter().enumerate() {
            self.delivered[k] += d;
        }
        let mut instant_utility = 0.0;
        for &(node, commodity) in &self.cfg.admitting_pairs {
            let k = self.destinations.binary_search(&commodity).expect("validated commodity");
            let r = decision.admissions[node][k];
            self.sum_admitted[node][k] += r;
            self.admitted[k] += r;
            instant_utility += self.cfg.utility.value(r);
        }
        self.sum_instant_utility += instant_utility;
        for node in 0..self.cfg.node_count {
            self.sum_power[node] += decision.node_power(node);
        }
        let total_backlog = next.total_backlog();
        self.sum_backlog += total_backlog;
        if !decision.exact {
            self.approximate_slots += 1;
        }

        if self.options.check_invariants {
            self.check(&decision, &next).map_err(|message| Error::Fault {
                slot,
                message: format!(
                    "{message}\nstate before: {:?}\nstate after: {:?}\ndecision: {:?}",
                    self.state, next, decision
                ),
            })?;
        }

        let record = SlotRecord {
            slot,
            total_backlog,
            z: next.z.clone(),
            objective: decision.objective_value,
            admitted_sum,
            instant_utility,
        };
        if self.options.record_trace {
            self.trace.push(record.clone());
        }
        self.state = next;
        self.slot += 1;
        Ok(SlotOutcome {
            channel,
            decision,
            record,
        })
    }

    fn check(&self, d: &SlotDecision, next: &QueueState) -> std::result::Result<(), String> {
        let cfg = &self.cfg;
        let n = cfg.node_count;
        let tol = CHECK_TOLERANCE;
        for i in 0..n {
            if d.gamma[i][i] {
                return Err(format!("gamma[{i}][{i}] set"));
            }
            let out = d.gamma[i].iter().filter(|&&g| g).count();
            let inn = (0..n).filter(|&a| d.gamma[a][i]).count();
            if out > cfg.out_degree_limit || inn > cfg.in_degree_limit {
                return Err(format!("node {i} degree out {out} in {inn} over limit"));
            }
            for j in 0..n {
                if d.gamma[i][j] != d.gamma[j][i] {
                    return Err(format!("gamma asymmetric at ({i},{j})"));
                }
                if d.gamma[i][j] && !cfg.links.contains(&(i, j)) {
                    return Err(format!("gamma set on non-link ({i},{j})"));
                }
                let p = d.power[i][j];
                if !(0.0..=cfg.power_cap).contains(&p) || (!d.gamma[i][j] && p != 0.0) {
                    return Err(format!("power[{i}][{j}] = {p} invalid"));
                }
                let allocated: f64 = d.commodity_rates[i][j].iter().sum();
                if allocated > d.link_rates[i][j] + tol {
                    return Err(format!("commodity rates {allocated} exceed link rate on ({i},{j})"));
                }
            }
        }
        for (i, row) in d.admissions.iter().enumerate() {
            for (k, &r) in row.iter().enumerate() {
                let admitting = cfg.admitting_pairs.contains(&(i, self.destinations[k]));
                if !(0.0..=cfg.admission_cap).contains(&r) || (!admitting && r != 0.0) {
                    return Err(format!("admission[{i}][{k}] = {r} invalid"));
                }
            }
        }
        let q = &self.state.backlog;
        for i in 0..n {
            for k in 0..self.destinations.len() {
                let next_q = next.backlog[i][k];
                if next_q < 0.0 || !next_q.is_finite() {
                    return Err(format!("Q[{i}][{k}] = {next_q}"));
                }
                if self.destinations[k] == i && next_q != 0.0 {
                    return Err(format!("destination queue Q[{i}][{k}] = {next_q}"));
                }
                let out: f64 = (0..n).map(|j| d.commodity_rates[i][j][k]).sum();
                let inn: f64 = (0..n).map(|a| d.commodity_rates[a][i][k]).sum();
                let bound = (q[i][k] - out).max(0.0) + inn + d.admissions[i][k];
                if self.destinations[k] != i && next_q > bound + tol * (1.0 + bound) {
                    return Err(format!("Q[{i}][{k}] = {next_q} exceeds queue bound {bound}"));
                }
            }
        }
        if next.z.iter().any(|&z| z < 0.0) {
            return Err("negative virtual queue".to_string());
        }
        for k in 0..self.destinations.len() {
            let held: f64 = next.backlog.iter().map(|row| row[k]).sum();
            let gap = self.admitted[k] - self.delivered[k] - held;
            if gap.abs() > CONSERVATION_TOLERANCE {
                return Err(format!("commodity {k} conservation off by {gap}"));
            }
        }
        Ok(())
    }

    /// Time averages over the slots stepped so far.
    pub fn metrics(&self) -> RunMetrics {
        let t = self.slot;
        let scale = if t == 0 { 0.0 } else { 1.0 / t as f64 };
        let avg_admitted: Vec<Vec<f64>> = self
            .sum_admitted
            .iter()
            .map(|row| row.iter().map(|s| s * scale).collect())
            .collect();
        let avg_utility = if t == 0 {
            0.0
        } else {
            self.cfg
                .admitting_pairs
                .iter()
                .map(|&(node, commodity)| {
                    let k = self.destinations.binary_search(&commodity).expect("validated commodity");
                    self.cfg.utility.value(avg_admitted[node][k])
                })
                .sum()
        };
        let stability_stat = if t == 0 {
            0.0
        } else {
            self.state.backlog.iter().flatten().copied().fold(0.0, f64::max) * scale
        };
        RunMetrics {
            horizon: t,
            control_v: self.cfg.control_v,
            seed: self.cfg.seed,
            avg_admitted,
            avg_utility,
            avg_instant_utility: self.sum_instant_utility * scale,
            avg_backlog: self.sum_backlog * scale,
            avg_power: self.sum_power.iter().map(|p| p * scale).collect(),
            delivered: self.delivered.clone(),
            admitted: self.admitted.clone(),
            final_state: self.state.clone(),
            stability_stat,
            approximate_slots: self.approximate_slots,
            trace: self.options.record_trace.then(|| self.trace.clone()),
        }
    }

    /// Steps until `cfg.horizon` slots have run.
    pub fn run_to_horizon(&mut self) -> Result<RunMetrics> {
        while self.slot < self.cfg.horizon {
            self.step()?;
        }
        Ok(self.metrics())
    }
}

pub fn run(cfg: &NetworkConfig) -> Result<RunMetrics> {
    run_with(cfg, SimOptions::default())
}

pub fn run_with(cfg: &NetworkConfig, options: SimOptions) -> Result<RunMetrics> {
    Simulator::new(cfg, options)?.run_to_horizon()
}
