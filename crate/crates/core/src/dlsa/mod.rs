//! Per-slot control decisions: admission, power and link selection, and
//! backpressure routing.

mod admission;
mod power;
mod routing;
pub mod search;
pub mod selection;
mod weights;

pub use admission::{admission_objective, solve_admission};
pub use power::{optimal_link_power, optimal_link_power_with, LinkPower};
pub use routing::route_commodities;
pub use selection::{
    select_links, select_links_exact, select_links_greedy, LinkSelection, SelectionInput, DEFAULT_EXACT_LIMIT,
};
pub use weights::{compute_weights, WeightMatrix};

use crate::channel::ChannelState;
use crate::model::{Graph, NetworkConfig};
use crate::{Error, Result};

/// One slot's control output.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    /// `admissions[n][k]`, commodity index `k`.
    pub admissions: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    /// Full link rate `rate(a_ij, p_ij, g_ij)`.
    pub link_rates: Vec<Vec<f64>>,
    /// `commodity_rates[i][j][k]`
    pub commodity_rates: Vec<Vec<Vec<f64>>>,
    /// Power/link-selection objective.
    pub link_objective: f64,
    /// `sum (V U(R) - Q R)` over admitting pairs.
    pub admission_objective: f64,
    pub objective_value: f64,
    pub exact: bool,
}

impl SlotDecision {
    /// Output power of `node` this slot.
    pub fn node_power(&self, node: usize) -> f64 {
        self.power[node]
            .iter()
            .zip(&self.gamma[node])
            .filter(|(_, &g)| g)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Runs the three control steps against the slot-start queues.
pub fn decide(
    cfg: &NetworkConfig,
    graph: &Graph,
    backlog: &[Vec<f64>],
    z: &[f64],
    state: &ChannelState,
    exact_limit: usize,
) -> Result<SlotDecision> {
    let n = cfg.node_count;
    let commodities = cfg.commodity_ids();
    let mut admissions = vec![vec![0.0; commodities.len()]; n];
    let mut admission_total = 0.0;
    for &(node, commodity) in &cfg.admitting_pairs {
        let k = commodities.binary_search(&commodity).expect("validated commodity");
        let q = backlog[node][k];
        let r = solve_admission(cfg.control_v, q, &cfg.utility, cfg.admission_cap)
            .map_err(|_| Error::NonConcaveUtility { node, commodity })?;
        admissions[node][k] = r;
        admission_total += admission_objective(cfg.control_v, q, &cfg.utility, r);
    }

    let weights = compute_weights(backlog);
    let input = SelectionInput {
        graph,
        weights: &weights,
        z,
        state,
        budget: cfg.degree_budget(),
        power_cap: cfg.power_cap,
        rate: cfg.rate,
    };
    let selection = select_links(&input, exact_limit)?;
    let commodity_rates = route_commodities(&selection.gamma, &selection.power, &weights, state, &cfg.rate);
    let link_rates = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| cfg.rate.eval(state.alpha[i][j], selection.power[i][j], selection.gamma[i][j]))
                .collect()
        })
        .collect();

    Ok(SlotDecision {
        admissions,
        gamma: selection.gamma,
        power: selection.power,
        link_rates,
        commodity_rates,
        link_objective: selection.objective,
        admission_objective: admission_total,
        objective_value: selection.objective + admission_total,
        exact: selection.exact,
    })
}
