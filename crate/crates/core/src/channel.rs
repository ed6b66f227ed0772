//! Per-slot link-state sampling and the rate-power function.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{Link, NetworkConfig};
use crate::{Error, Result};

/// Sampled link states for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// `alpha[i][j]`, zero where `(i, j)` is not a link.
    pub alpha: Vec<Vec<f64>>,
    /// Index into the configured state alphabet; `None` where no link.
    pub labels: Vec<Vec<Option<usize>>>,
}

impl ChannelState {
    /// State with the given factors on every listed link (tests, demos).
    pub fn from_alpha(alpha: Vec<Vec<f64>>) -> Self {
        let labels = alpha.iter().map(|row| vec![None; row.len()]).collect();
        ChannelState { alpha, labels }
    }
}

/// Draws independent per-link states from a single seed.
///
/// The draw for link `(i, j)` at slot `t` is read from ChaCha stream `t` at
/// word offset `2 (i N + j)`, so a sample depends only on `(seed, slot, link)`
/// and never on how many other links were sampled before it.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    seed: u64,
    node_count: usize,
    links: Vec<(Link, Vec<f64>)>,
    alphas: Vec<f64>,
}

impl ChannelSampler {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let links = cfg
            .links
            .iter()
            .map(|&link| {
                let cumulative = cfg
                    .channel
                    .probabilities(link)
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect();
                (link, cumulative)
            })
            .collect();
        ChannelSampler {
            seed: cfg.seed,
            node_count: cfg.node_count,
            links,
            alphas: cfg.channel.states.iter().map(|s| s.alpha).collect(),
        }
    }

    pub fn sample(&self, slot: u64) -> ChannelState {
        let n = self.node_count;
        let mut alpha = vec![vec![0.0; n]; n];
        let mut labels = vec![vec![None; n]; n];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(slot);
        for ((i, j), cumulative) in &self.links {
            rng.set_word_pos(2 * (*i as u128 * n as u128 + *j as u128));
            let u = unit_interval(rng.next_u64());
            let state = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1);
            alpha[*i][*j] = self.alphas[state];
            labels[*i][*j] = Some(state);
        }
        ChannelState { alpha, labels }
    }
}

fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Samples the link states of `slot` for `cfg.seed`.
pub fn sample_state(cfg: &NetworkConfig, slot: u64) -> ChannelState {
    ChannelSampler::new(cfg).sample(slot)
}

/// Rate-power function family. All members are per-link separable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateSpec {
    /// `ln(1 + a p g)`
    #[default]
    LogLinear,
    /// `a p g`
    Linear,
}

impl RateSpec {
    pub fn eval(&self, alpha: f64, p: f64, connected: bool) -> f64 {
        if !connected {
            return 0.0;
        }
        match self {
            RateSpec::LogLinear => (alpha * p).ln_1p(),
            RateSpec::Linear => alpha * p,
        }
    }

    /// Largest rate reachable with factor at most `alpha_max` and power at
    /// most `p_max`.
    pub fn bound(&self, alpha_max: f64, p_max: f64) -> f64 {
        self.eval(alpha_max, p_max, true)
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateSpec::LogLinear => "log-linear",
            RateSpec::Linear => "linear",
        }
    }
}

/// Checked evaluation of the default `ln(1 + a p g)` rate.
pub fn rate(alpha: f64, p: f64, connected: bool, p_max: f64) -> Result<f64> {
    if !(0.0..=p_max).contains(&p) {
        return Err(Error::Domain(format!("power {p} outside [0, {p_max}]")));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Domain(format!("negative link-state factor {alpha}")));
    }
    Ok(RateSpec::LogLinear.eval(alpha, p, connected))
}

/// Inputs for one link when evaluating a rate model jointly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkInput {
    pub alpha: f64,
    pub power: f64,
    pub connected: bool,
}

/// A rate-power function over a set of links evaluated together, which
/// allows coupled (interfering) models to be checked as well.
pub trait RateModel {
    fn rates(&self, links: &[LinkInput]) -> Vec<f64>;
}

impl RateModel for RateSpec {
    fn rates(&self, links: &[LinkInput]) -> Vec<f64> {
        links
            .iter()
            .map(|l| self.eval(l.alpha, l.power, l.connected))
            .collect()
    }
}

/// Adapts a per-link closure `(alpha, p, connected) -> rate`.
pub struct PerLink<F>(pub F);

impl<F: Fn(f64, f64, bool) -> f64> RateModel for PerLink<F> {
    fn rates(&self, links: &[LinkInput]) -> Vec<f64> {
        links
            .iter()
            .map(|l| (self.0)(l.alpha, l.power, l.connected))
            .collect()
    }
}

/// Sample grid for the rate-property checks.
#[derive(Debug, Clone)]
pub struct RateGrid {
    pub alphas: Vec<f64>,
    pub powers: Vec<f64>,
    /// The linear slope the model must stay under for the first property.
    pub delta_cap: f64,
}

impl RateGrid {
    /// Integer grid over `[0, alpha_max] x [0, p_max]` with the cap set to
    /// `alpha_max`, which bounds `ln(1 + a p)` by `a p`.
    pub fn integer(alpha_max: u32, p_max: u32) -> Self {
        RateGrid {
            alphas: (0..=alpha_max).map(f64::from).collect(),
            powers: (0..=p_max).map(f64::from).collect(),
            delta_cap: f64::from(alpha_max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePropertyReport {
    /// Largest `(mu(p) - mu(0)) / p` seen on the grid.
    pub delta_witness: f64,
    /// Rate grows at most linearly in the link's own power.
    pub linear_bound: bool,
    /// Zeroing one link's power never lowers another link's rate.
    pub no_gain_from_others: bool,
    /// Power on a disconnected link changes no rate.
    pub disconnected_power_inert: bool,
}

impl RatePropertyReport {
    pub fn all_pass(&self) -> bool {
        self.linear_bound && self.no_gain_from_others && self.disconnected_power_inert
    }
}

/// Checks the three structural rate properties on every two-link
/// combination drawn from the grid.
pub fn check_rate_properties(model: &dyn RateModel, grid: &RateGrid) -> RatePropertyReport {
    let mut points = Vec::new();
    for &alpha in &grid.alphas {
        for &power in &grid.powers {
            for connected in [false, true] {
                points.push(LinkInput {
                    alpha,
                    power,
                    connected,
                });
            }
        }
    }

    let mut delta_witness: f64 = 0.0;
    let mut no_gain_from_others = true;
    let mut disconnected_power_inert = true;
    let tol = 1e-12;
    for &a in &points {
        for &b in &points {
            let base = model.rates(&[a, b]);
            let a_off = model.rates(&[LinkInput { power: 0.0, ..a }, b]);
            let b_off = model.rates(&[a, LinkInput { power: 0.0, ..b }]);
            if a.power > 0.0 {
                let slope = (base[0] - a_off[0]) / a.power;
                delta_witness = if slope.is_finite() {
                    delta_witness.max(slope)
                } else {
                    f64::INFINITY
                };
            }
            if base[0] > b_off[0] + tol || base[1] > a_off[1] + tol {
                no_gain_from_others = false;
            }
            if !b.connected && (base[0] - b_off[0]).abs() > tol {
                disconnected_power_inert = false;
            }
            if !a.connected && (base[1] - a_off[1]).abs() > tol {
                disconnected_power_inert = false;
            }
        }
    }

    RatePropertyReport {
        delta_witness,
        linear_bound: delta_witness.is_finite() && delta_witness <= grid.delta_cap + tol,
        no_gain_from_others,
        disconnected_power_inert,
    }
}
