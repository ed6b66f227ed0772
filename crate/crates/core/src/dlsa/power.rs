use super::search::golden_section_max;
use crate::channel::RateSpec;
use crate::Result;

/// Optimal transmit power for one direction of a link and the value it
/// achieves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkPower {
    pub power: f64,
    /// `W rate(a, p) - Z p` at `power`; never negative.
    pub gain: f64,
}

/// Maximizes `W ln(1 + a p) - Z p` over `p` in `[0, P_max]`.
///
/// The stationary point is `W/Z - 1/a`; with no power pressure (`Z = 0`)
/// the whole cap is used as long as the link carries any weight.
pub fn optimal_link_power(weight: f64, z: f64, alpha: f64, p_max: f64) -> LinkPower {
    if weight <= 0.0 || alpha <= 0.0 || p_max <= 0.0 {
        return LinkPower::default();
    }
    let power = if z <= 0.0 {
        p_max
    } else {
        (weight / z - 1.0 / alpha).clamp(0.0, p_max)
    };
    let gain = weight * (alpha * power).ln_1p() - z * power;
    if power > 0.0 && gain > 0.0 {
        LinkPower { power, gain }
    } else {
        LinkPower::default()
    }
}

/// Same optimization for any rate family; non-log rates are solved by
/// golden-section search.
pub fn optimal_link_power_with(
    rate: &RateSpec,
    weight: f64,
    z: f64,
    alpha: f64,
    p_max: f64,
) -> Result<LinkPower> {
    if let RateSpec::LogLinear = rate {
        return Ok(optimal_link_power(weight, z, alpha, p_max));
    }
    if weight <= 0.0 || alpha <= 0.0 || p_max <= 0.0 {
        return Ok(LinkPower::default());
    }
    let objective = |p: f64| weight * rate.eval(alpha, p, true) - z * p;
    let (power, gain) = golden_section_max(objective, 0.0, p_max, 1e-10)?;
    Ok(if power > 0.0 && gain > 0.0 {
        LinkPower { power, gain }
    } else {
        LinkPower::default()
    })
}
