/// Backpressure differentials for every ordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    /// `per_commodity[i][j][k] = max(Q_i^k - Q_j^k, 0)`
    pub per_commodity: Vec<Vec<Vec<f64>>>,
    /// Largest differential over commodities.
    pub best: Vec<Vec<f64>>,
    /// Commodity index achieving `best`; lowest index wins ties.
    pub best_commodity: Vec<Vec<usize>>,
}

/// Builds the weights from an `N x C` backlog matrix.
pub fn compute_weights(backlog: &[Vec<f64>]) -> WeightMatrix {
    let n = backlog.len();
    let c = backlog.first().map_or(0, Vec::len);
    let mut per_commodity = vec![vec![vec![0.0; c]; n]; n];
    let mut best = vec![vec![0.0; n]; n];
    let mut best_commodity = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..c {
                let w = (backlog[i][k] - backlog[j][k]).max(0.0);
                per_commodity[i][j][k] = w;
                if w > best[i][j] {
                    best[i][j] = w;
                    best_commodity[i][j] = k;
                }
            }
        }
    }
    WeightMatrix {
        per_commodity,
        best,
        best_commodity,
    }
}
