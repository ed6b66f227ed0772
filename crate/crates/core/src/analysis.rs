//! Drift constant, utility-gap bound, and sweep diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::channel::{check_rate_properties, RateGrid};
use crate::experiment::SweepRow;
use crate::model::NetworkConfig;
use crate::{Error, Result};

/// Relative drop in seed-mean utility tolerated between consecutive V.
pub const UTILITY_NOISE_TOLERANCE: f64 = 0.02;

/// Drift-plus-penalty constant
/// `B = N^2 (1.5 d_in^2 mu_max^2 + R_max^2) + N (P_max + P_tot)^2 / 2`.
pub fn compute_b(cfg: &NetworkConfig) -> f64 {
    drift_constant(
        cfg.node_count,
        cfg.in_degree_limit,
        cfg.mu_max(),
        cfg.admission_cap,
        cfg.power_cap,
        cfg.avg_power_budget,
    )
}

pub fn drift_constant(nodes: usize, in_degree: usize, mu_max: f64, r_max: f64, p_max: f64, p_tot: f64) -> f64 {
    let n = nodes as f64;
    let d = in_degree as f64;
    n * n * (1.5 * d * d * mu_max * mu_max + r_max * r_max) + n * 0.5 * (p_max + p_tot).powi(2)
}

/// Seed-mean results for one V.
#[derive(Debug, Clone, PartialEq)]
pub struct VSummary {
    pub v: f64,
    pub seeds: usize,
    pub avg_utility: f64,
    pub avg_backlog: f64,
    pub stability_stat: f64,
    pub max_avg_power: f64,
    /// `B / V`
    pub gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    /// Utility dropped by more than the noise tolerance as V grew.
    UtilityDecrease { from_v: f64, to_v: f64, from: f64, to: f64 },
    /// Backlog did not grow as V grew.
    BacklogNotGrowing { from_v: f64, to_v: f64, from: f64, to: f64 },
}

/// `utility(V) >= utility(V_max) - B/V`, with the largest-V run standing in
/// for the unknown optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCheck {
    pub v: f64,
    pub utility: f64,
    pub proxy_optimum: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub b: f64,
    pub mu_max: f64,
    /// Smallest linear slope bounding the rate function on the check grid.
    pub delta_witness: f64,
    pub rows: Vec<VSummary>,
    pub flags: Vec<Flag>,
    pub gap_checks: Vec<GapCheck>,
}

/// Aggregates sweep rows per V (seed means) and checks them against the
/// expected trends and the utility-gap bound.
pub fn diagnose_sweep(results: &[SweepRow], cfg: &NetworkConfig) -> Result<TheoryReport> {
    let mut by_v: BTreeMap<u64, Vec<&SweepRow>> = BTreeMap::new();
    for row in results {
        // V >= 1, so the bit pattern orders like the value
        by_v.entry(row.v.to_bits()).or_default().push(row);
    }
    if by_v.len() < 2 {
        return Err(Error::Domain("need >= 2 sweep points (distinct V values)".to_string()));
    }
    let b = compute_b(cfg);
    let mean = |rows: &[&SweepRow], f: fn(&SweepRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
    let rows: Vec<VSummary> = by_v
        .values()
        .map(|rows| {
            let v = rows[0].v;
            VSummary {
                v,
                seeds: rows.len(),
                avg_utility: mean(rows, |r| r.avg_utility),
                avg_backlog: mean(rows, |r| r.avg_backlog),
                stability_stat: mean(rows, |r| r.stability_stat),
                max_avg_power: mean(rows, |r| r.max_avg_power),
                gap_bound: b / v,
            }
        })
        .collect();

    let mut flags = Vec::new();
    for pair in rows.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if hi.avg_utility < lo.avg_utility - UTILITY_NOISE_TOLERANCE * lo.avg_utility.abs() {
            flags.push(Flag::UtilityDecrease {
                from_v: lo.v,
                to_v: hi.v,
                from: lo.avg_utility,
                to: hi.avg_utility,
            });
        }
        if hi.avg_backlog <= lo.avg_backlog {
            flags.push(Flag::BacklogNotGrowing {
                from_v: lo.v,
                to_v: hi.v,
                from: lo.avg_backlog,
                to: hi.avg_backlog,
            });
        }
    }

    let proxy = rows.last().expect("at least two rows").avg_utility;
    let gap_checks = rows
        .iter()
        .map(|r| {
            let lower_bound = proxy - r.gap_bound;
            GapCheck {
                v: r.v,
                utility: r.avg_utility,
                proxy_optimum: proxy,
                lower_bound,
                holds: r.avg_utility >= lower_bound,
            }
        })
        .collect();

    let grid = rate_grid(cfg);
    let delta_witness = check_rate_properties(&cfg.rate, &grid).delta_witness;

    Ok(TheoryReport {
        b,
        mu_max: cfg.mu_max(),
        delta_witness,
        rows,
        flags,
        gap_checks,
    })
}

/// Configured state factors against 13 power levels on `[0, P_max]`.
pub fn rate_grid(cfg: &NetworkConfig) -> RateGrid {
    RateGrid {
        alphas: cfg.channel.states.iter().map(|s| s.alpha).collect(),
        powers: (0..=12).map(|k| cfg.power_cap * k as f64 / 12.0).collect(),
        delta_cap: cfg.alpha_max(),
    }
}

impl TheoryReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "B            = {:.4}", self.b);
        let _ = writeln!(s, "mu_max       = {:.6}", self.mu_max);
        let _ = writeln!(s, "delta (grid) = {:.6}", self.delta_witness);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>10} {:>6} {:>12} {:>14} {:>14} {:>10} {:>12} {:>6}",
            "V", "seeds", "utility", "backlog", "stability", "max_power", "B/V", "gap"
        );
        for (r, g) in self.rows.iter().zip(&self.gap_checks) {
            let _ = writeln!(
                s,
                "{:>10} {:>6} {:>12.6} {:>14.4} {:>14.6e} {:>10.4} {:>12.4} {:>6}",
                r.v,
                r.seeds,
                r.avg_utility,
                r.avg_backlog,
                r.stability_stat,
                r.max_avg_power,
                r.gap_bound,
                if g.holds { "ok" } else { "miss" }
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "optimum proxy: utility at the largest V (diagnostic, not the true optimum)");
        if self.flags.is_empty() {
            let _ = writeln!(s, "flags: none");
        }
        for f in &self.flags {
            match f {
                Flag::UtilityDecrease { from_v, to_v, from, to } => {
                    let _ = writeln!(s, "flag: utility fell from {from:.6} (V={from_v}) to {to:.6} (V={to_v})");
                }
                Flag::BacklogNotGrowing { from_v, to_v, from, to } => {
                    let _ = writeln!(s, "flag: backlog did not grow from {from:.4} (V={from_v}) to {to:.4} (V={to_v})");
                }
            }
        }
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record([
            "V",
            "seeds",
            "avg_utility",
            "avg_backlog",
            "stability_stat",
            "max_avg_power",
            "B",
            "gap_bound",
            "gap_lower_bound",
            "gap_holds",
        ])?;
        for (r, g) in self.rows.iter().zip(&self.gap_checks) {
            w.write_record([
                r.v.to_string(),
                r.seeds.to_string(),
                r.avg_utility.to_string(),
                r.avg_backlog.to_string(),
                r.stability_stat.to_string(),
                r.max_avg_power.to_string(),
                self.b.to_string(),
                r.gap_bound.to_string(),
                g.lower_bound.to_string(),
                g.holds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
