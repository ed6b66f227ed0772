//! Network description shared by every other module: the configuration,
//! its validation, and the static link graph derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use crate::channel::RateSpec;
use crate::{Error, Result};

pub type NodeId = usize;

/// Directed link `(from, to)`.
pub type Link = (NodeId, NodeId);

const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Per-pair utility of the admitted rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum UtilitySpec {
    /// `ln(1 + r)`
    #[default]
    Log1p,
    /// `r^exponent`; concave only for exponents in `(0, 1]`.
    Power { exponent: f64 },
}

impl UtilitySpec {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            UtilitySpec::Log1p => r.ln_1p(),
            UtilitySpec::Power { exponent } => r.max(0.0).powf(exponent),
        }
    }
}

/// One entry of the finite channel-state alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStateDef {
    pub label: String,
    /// Link-state factor applied inside the rate function.
    pub alpha: f64,
}

/// Independent categorical state distribution per link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub states: Vec<ChannelStateDef>,
    /// Distribution used by every link without an override.
    pub default_probabilities: Vec<f64>,
    pub overrides: BTreeMap<Link, Vec<f64>>,
}

impl ChannelSpec {
    pub fn probabilities(&self, link: Link) -> &[f64] {
        self.overrides
            .get(&link)
            .unwrap_or(&self.default_probabilities)
    }

    pub fn alpha_max(&self) -> f64 {
        self.states.iter().map(|s| s.alpha).fold(0.0, f64::max)
    }

    /// The good/bad/common/unreachable alphabet with factors 3, 1, 2, 0,
    /// all equally likely.
    pub fn four_state_uniform() -> Self {
        let states = [("G", 3.0), ("B", 1.0), ("C", 2.0), ("U", 0.0)]
            .into_iter()
            .map(|(label, alpha)| ChannelStateDef {
                label: label.to_string(),
                alpha,
            })
            .collect();
        ChannelSpec {
            states,
            default_probabilities: vec![0.25; 4],
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub node_count: usize,
    pub links: BTreeSet<Link>,
    pub out_degree_limit: usize,
    pub in_degree_limit: usize,
    /// Per-pair admission cap `R_max` (packets/slot).
    pub admission_cap: f64,
    /// Per-link transmit power cap `P_max`.
    pub power_cap: f64,
    /// Per-node time-average output power budget `P_tot`.
    pub avg_power_budget: f64,
    /// Destination nodes, one commodity each, ascending.
    pub commodities: BTreeSet<NodeId>,
    pub admitting_pairs: BTreeSet<(NodeId, NodeId)>,
    pub utility: UtilitySpec,
    pub rate: RateSpec,
    pub channel: ChannelSpec,
    pub control_v: f64,
    pub horizon: u64,
    pub seed: u64,
}

impl NetworkConfig {
    /// Fully meshed network where every node is a destination and every
    /// other node admits traffic for it.
    pub fn full_mesh(node_count: usize, channel: ChannelSpec) -> Self {
        let links = (0..node_count)
            .flat_map(|i| (0..node_count).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .collect();
        let commodities: BTreeSet<_> = (0..node_count).collect();
        let admitting_pairs = all_admitting_pairs(node_count, &commodities);
        NetworkConfig {
            node_count,
            links,
            out_degree_limit: 1,
            in_degree_limit: 1,
            admission_cap: 1.0,
            power_cap: 1.0,
            avg_power_budget: 1.0,
            commodities,
            admitting_pairs,
            utility: UtilitySpec::Log1p,
            rate: RateSpec::LogLinear,
            channel,
            control_v: 1.0,
            horizon: 0,
            seed: 0,
        }
    }

    /// The four-satellite reference scenario: full mesh, four equiprobable
    /// link states, `R_max = P_max = 6`, `P_tot = 4`, degree limit 2,
    /// log utilities and the `ln(1 + a p g)` rate.
    pub fn reference_mesh() -> Self {
        NetworkConfig {
            out_degree_limit: 2,
            in_degree_limit: 2,
            admission_cap: 6.0,
            power_cap: 6.0,
            avg_power_budget: 4.0,
            control_v: 100.0,
            horizon: 100_000,
            seed: 1,
            ..NetworkConfig::full_mesh(4, ChannelSpec::four_state_uniform())
        }
    }

    pub fn commodity_count(&self) -> usize {
        self.commodities.len()
    }

    /// Commodity ids in index order.
    pub fn commodity_ids(&self) -> Vec<NodeId> {
        self.commodities.iter().copied().collect()
    }

    pub fn commodity_index(&self, commodity: NodeId) -> Option<usize> {
        self.commodities.iter().position(|&c| c == commodity)
    }

    /// Per-node link budget: a symmetric link uses one unit of both the
    /// out-degree and the in-degree limit at each endpoint.
    pub fn degree_budget(&self) -> usize {
        self.out_degree_limit.min(self.in_degree_limit)
    }

    pub fn alpha_max(&self) -> f64 {
        self.channel.alpha_max()
    }

    /// Upper bound on any single link rate.
    pub fn mu_max(&self) -> f64 {
        self.rate.bound(self.alpha_max(), self.power_cap)
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.control_v = v;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }
}

pub(crate) fn all_admitting_pairs(
    node_count: usize,
    commodities: &BTreeSet<NodeId>,
) -> BTreeSet<(NodeId, NodeId)> {
    (0..node_count)
        .flat_map(|n| commodities.iter().map(move |&c| (n, c)))
        .filter(|(n, c)| n != c)
        .collect()
}

/// A single failed configuration rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl Violation {
    fn new(field: &'static str, rule: impl Into<String>) -> Self {
        Violation {
            field,
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every configuration rule and returns the ones that fail.
pub fn validate_config(cfg: &NetworkConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = cfg.node_count;

    if n == 0 {
        out.push(Violation::new("node_count", "must be positive"));
    }
    for &(i, j) in &cfg.links {
        if i == j {
            out.push(Violation::new("links", format!("self-loop ({i},{j})")));
        }
        if i >= n || j >= n {
            out.push(Violation::new(
                "links",
                format!("({i},{j}) references a node outside [0, {n})"),
            ));
        }
    }
    if cfg.out_degree_limit == 0 {
        out.push(Violation::new("out_degree_limit", "must be positive"));
    }
    if cfg.in_degree_limit == 0 {
        out.push(Violation::new("in_degree_limit", "must be positive"));
    }
    for (field, value) in [
        ("admission_cap", cfg.admission_cap),
        ("power_cap", cfg.power_cap),
        ("avg_power_budget", cfg.avg_power_budget),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            out.push(Violation::new(field, format!("must be finite and >= 0, got {value}")));
        }
    }
    if !(cfg.control_v >= 1.0 && cfg.control_v.is_finite()) {
        out.push(Violation::new(
            "control_v",
            format!("must be finite and >= 1, got {}", cfg.control_v),
        ));
    }
    for &c in &cfg.commodities {
        if c >= n {
            out.push(Violation::new(
                "commodities",
                format!("destination {c} is not a node id"),
            ));
        }
    }
    for &(node, c) in &cfg.admitting_pairs {
        if node >= n {
            out.push(Violation::new(
                "admitting_pairs",
                format!("({node},{c}): node is not a node id"),
            ));
        }
        if !cfg.commodities.contains(&c) {
            out.push(Violation::new(
                "admitting_pairs",
                format!("({node},{c}): commodity is not configured"),
            ));
        }
        if node == c {
            out.push(Violation::new(
                "admitting_pairs",
                format!("({node},{c}): a node cannot admit traffic for itself"),
            ));
        }
    }
    if let UtilitySpec::Power { exponent } = cfg.utility {
        if !(exponent > 0.0 && exponent.is_finite()) {
            out.push(Violation::new(
                "utility",
                format!("power exponent must be positive, got {exponent}"),
            ));
        }
    }

    let states = &cfg.channel.states;
    if states.is_empty() {
        out.push(Violation::new("channel_spec", "no states defined"));
    }
    for s in states {
        if !(s.alpha >= 0.0 && s.alpha.is_finite()) {
            out.push(Violation::new(
                "channel_spec",
                format!("state {} has invalid factor {}", s.label, s.alpha),
            ));
        }
    }
    let mut check_distribution = |what: String, probs: &[f64]| {
        if probs.len() != states.len() {
            out.push(Violation::new(
                "channel_spec",
                format!(
                    "{what}: {} probabilities for {} states",
                    probs.len(),
                    states.len()
                ),
            ));
            return;
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            out.push(Violation::new(
                "channel_spec",
                format!("{what}: negative or non-finite probability"),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            out.push(Violation::new(
                "channel_spec",
                format!("{what}: probabilities sum {sum}"),
            ));
        }
    };
    check_distribution("default".to_string(), &cfg.channel.default_probabilities);
    for (link, probs) in &cfg.channel.overrides {
        check_distribution(format!("link ({},{})", link.0, link.1), probs);
    }
    for link in cfg.channel.overrides.keys() {
        if !cfg.links.contains(link) {
            out.push(Violation::new(
                "channel_spec",
                format!("override for ({},{}) which is not a link", link.0, link.1),
            ));
        }
    }
    out
}

/// Neighbor lists and symmetric edges derived from the directed link set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub node_count: usize,
    pub out_neighbors: Vec<Vec<NodeId>>,
    pub in_neighbors: Vec<Vec<NodeId>>,
    /// Pairs `(i, j)`, `i < j`, with both directions present; ascending.
    pub undirected_edges: Vec<(NodeId, NodeId)>,
}

impl Graph {
    pub fn max_out_degree(&self) -> usize {
        self.out_neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }
}

pub fn build_graph(cfg: &NetworkConfig) -> Result<Graph> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    let n = cfg.node_count;
    let mut out_neighbors = vec![Vec::new(); n];
    let mut in_neighbors = vec![Vec::new(); n];
    // BTreeSet iteration is sorted by (from, to), so both lists come out ascending.
    for &(i, j) in &cfg.links {
        out_neighbors[i].push(j);
        in_neighbors[j].push(i);
    }
    for list in &mut in_neighbors {
        list.sort_unstable();
    }
    let undirected_edges = cfg
        .links
        .iter()
        .filter(|&&(i, j)| i < j && cfg.links.contains(&(j, i)))
        .copied()
        .collect();
    Ok(Graph {
        node_count: n,
        out_neighbors,
        in_neighbors,
        undirected_edges,
    })
}
