//! Joint power allocation and symmetric link selection.
//!
//! With per-link separable rates and a symmetric connection matrix, the
//! per-slot objective splits into one weight per undirected edge (the sum of
//! the best power gains in both directions). What remains is a maximum-weight
//! edge subset in which every node touches at most `b` selected edges.

use super::power::{optimal_link_power_with, LinkPower};
use super::weights::WeightMatrix;
use crate::channel::{ChannelState, RateSpec};
use crate::model::{Graph, NodeId};
use crate::{Error, Result};

/// Default cap on undirected edges for exhaustive selection.
pub const DEFAULT_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: f64,
}

/// Exact maximum-weight degree-bounded edge subset.
///
/// Only strictly positive edges are considered. The search branches on
/// "take" before "skip" in input order and only replaces the incumbent on
/// strict improvement, so among equal-weight optima the one preferring
/// earlier edges wins. Returns the selected indices, ascending.
pub fn max_weight_degree_bounded(node_count: usize, edges: &[WeightedEdge], budget: usize) -> Vec<usize> {
    let candidates: Vec<usize> = (0..edges.len()).filter(|&k| edges[k].weight > 0.0).collect();
    // suffix sums give an optimistic bound for pruning
    let mut remaining = vec![0.0; candidates.len() + 1];
    for (pos, &k) in candidates.iter().enumerate().rev() {
        remaining[pos] = remaining[pos + 1] + edges[k].weight;
    }

    struct Search<'a> {
        edges: &'a [WeightedEdge],
        candidates: &'a [usize],
        remaining: &'a [f64],
        budget: usize,
        degree: Vec<usize>,
        chosen: Vec<usize>,
        best: Vec<usize>,
        best_weight: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, pos: usize, weight: f64) {
            if weight > self.best_weight {
                self.best_weight = weight;
                self.best.clone_from(&self.chosen);
            }
            if pos == self.candidates.len() || weight + self.remaining[pos] <= self.best_weight {
                return;
            }
            let k = self.candidates[pos];
            let e = self.edges[k];
            if self.degree[e.a] < self.budget && self.degree[e.b] < self.budget {
                self.degree[e.a] += 1;
                self.degree[e.b] += 1;
                self.chosen.push(k);
                self.visit(pos + 1, weight + e.weight);
                self.chosen.pop();
                self.degree[e.a] -= 1;
                self.degree[e.b] -= 1;
            }
            self.visit(pos + 1, weight);
        }
    }

    let mut search = Search {
        edges,
        candidates: &candidates,
        remaining: &remaining,
        budget,
        degree: vec![0; node_count],
        chosen: Vec::new(),
        best: Vec::new(),
        best_weight: 0.0,
    };
    search.visit(0, 0.0);
    search.best
}

/// Greedy degree-bounded selection: heaviest positive edge first, ties by
/// input position. Returns the selected indices, ascending.
pub fn greedy_degree_bounded(node_count: usize, edges: &[WeightedEdge], budget: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..edges.len()).filter(|&k| edges[k].weight > 0.0).collect();
    order.sort_by(|&x, &y| edges[y].weight.total_cmp(&edges[x].weight).then(x.cmp(&y)));
    let mut degree = vec![0; node_count];
    let mut chosen = Vec::new();
    for k in order {
        let e = edges[k];
        if degree[e.a] < budget && degree[e.b] < budget {
            degree[e.a] += 1;
            degree[e.b] += 1;
            chosen.push(k);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Everything link selection reads for one slot.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInput<'a> {
    pub graph: &'a Graph,
    pub weights: &'a WeightMatrix,
    pub z: &'a [f64],
    pub state: &'a ChannelState,
    /// Per-node budget `min(d_out, d_in)`.
    pub budget: usize,
    pub power_cap: f64,
    pub rate: RateSpec,
}

/// Best powers in both directions of an undirected edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGain {
    pub a: NodeId,
    pub b: NodeId,
    pub forward: LinkPower,
    pub reverse: LinkPower,
}

impl EdgeGain {
    pub fn weight(&self) -> f64 {
        self.forward.gain + self.reverse.gain
    }
}

/// Per-edge gains in the graph's canonical edge order.
pub fn edge_gains(input: &SelectionInput<'_>) -> Result<Vec<EdgeGain>> {
    let best = &input.weights.best;
    let alpha = &input.state.alpha;
    input
        .graph
        .undirected_edges
        .iter()
        .map(|&(a, b)| {
            let forward = optimal_link_power_with(&input.rate, best[a][b], input.z[a], alpha[a][b], input.power_cap)?;
            let reverse = optimal_link_power_with(&input.rate, best[b][a], input.z[b], alpha[b][a], input.power_cap)?;
            Ok(EdgeGain { a, b, forward, reverse })
        })
        .collect()
}

/// Connection and power matrices chosen for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSelection {
    pub gamma: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
    /// Achieved `sum_ij (rate_ij W_ij - Z_i p_ij)`.
    pub objective: f64,
    /// `false` when the greedy approximation produced this selection.
    pub exact: bool,
}

fn assemble(node_count: usize, gains: &[EdgeGain], chosen: &[usize], exact: bool) -> LinkSelection {
    let mut gamma = vec![vec![false; node_count]; node_count];
    let mut power = vec![vec![0.0; node_count]; node_count];
    let mut objective = 0.0;
    for &k in chosen {
        let g = &gains[k];
        gamma[g.a][g.b] = true;
        gamma[g.b][g.a] = true;
        power[g.a][g.b] = g.forward.power;
        power[g.b][g.a] = g.reverse.power;
        objective += g.weight();
    }
    LinkSelection {
        gamma,
        power,
        objective,
        exact,
    }
}

fn weighted(gains: &[EdgeGain]) -> Vec<WeightedEdge> {
    gains
        .iter()
        .map(|g| WeightedEdge {
            a: g.a,
            b: g.b,
            weight: g.weight(),
        })
        .collect()
}

/// Exhaustive selection; refuses graphs with more than `edge_limit`
/// undirected edges.
pub fn select_links_exact(input: &SelectionInput<'_>, edge_limit: usize) -> Result<LinkSelection> {
    let edges = input.graph.undirected_edges.len();
    if edges > edge_limit {
        return Err(Error::EnumerationLimit { edges, limit: edge_limit });
    }
    let gains = edge_gains(input)?;
    let n = input.graph.node_count;
    let chosen = max_weight_degree_bounded(n, &weighted(&gains), input.budget);
    Ok(assemble(n, &gains, &chosen, true))
}

pub fn select_links_greedy(input: &SelectionInput<'_>) -> Result<LinkSelection> {
    let gains = edge_gains(input)?;
    let n = input.graph.node_count;
    let chosen = greedy_degree_bounded(n, &weighted(&gains), input.budget);
    Ok(assemble(n, &gains, &chosen, false))
}

/// Exact selection when the graph is small enough, greedy otherwise.
pub fn select_links(input: &SelectionInput<'_>, edge_limit: usize) -> Result<LinkSelection> {
    if input.graph.undirected_edges.len() <= edge_limit {
        select_links_exact(input, edge_limit)
    } else {
        select_links_greedy(input)
    }
}
