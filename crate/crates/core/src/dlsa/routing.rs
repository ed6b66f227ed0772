use super::weights::WeightMatrix;
use crate::channel::{ChannelState, RateSpec};

/// Gives the full rate of every active link to its heaviest commodity.
///
/// Links whose best differential is zero carry nothing. Returns
/// `rates[i][j][k]` for commodity index `k`.
pub fn route_commodities(
    gamma: &[Vec<bool>],
    power: &[Vec<f64>],
    weights: &WeightMatrix,
    state: &ChannelState,
    rate: &RateSpec,
) -> Vec<Vec<Vec<f64>>> {
    let n = gamma.len();
    let c = weights.per_commodity.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut out = vec![vec![vec![0.0; c]; n]; n];
    for i in 0..n {
        for j in 0..n {
            if !gamma[i][j] || weights.best[i][j] <= 0.0 {
                continue;
            }
            out[i][j][weights.best_commodity[i][j]] = rate.eval(state.alpha[i][j], power[i][j], true);
        }
    }
    out
}
