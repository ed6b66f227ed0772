use super::search::golden_section_max;
use crate::model::UtilitySpec;
use crate::Result;

const SEARCH_TOLERANCE: f64 = 1e-9;

/// Admitted rate maximizing `V U(r) - Q r` on `[0, R_max]`.
///
/// Log utilities use the closed form `clamp(V/Q - 1, 0, R_max)` (and
/// `R_max` for an empty queue); anything else goes through a
/// concavity-checked golden-section search.
pub fn solve_admission(v: f64, backlog: f64, utility: &UtilitySpec, r_max: f64) -> Result<f64> {
    match utility {
        UtilitySpec::Log1p => {
            if backlog <= 0.0 {
                Ok(r_max)
            } else {
                Ok((v / backlog - 1.0).clamp(0.0, r_max))
            }
        }
        _ => {
            let objective = |r: f64| v * utility.value(r) - backlog * r;
            golden_section_max(objective, 0.0, r_max, SEARCH_TOLERANCE).map(|(r, _)| r)
        }
    }
}

/// `V U(r) - Q r` at `r`.
pub fn admission_objective(v: f64, backlog: f64, utility: &UtilitySpec, r: f64) -> f64 {
    v * utility.value(r) - backlog * r
}
