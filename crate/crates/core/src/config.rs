//! Plain-text configuration files.
//!
//! ```text
//! # comments start with '#'
//! nodes = 4
//! links = full-mesh            # or list the links in a [links] table
//! out_degree_limit = 2
//! in_degree_limit = 2
//! admission_cap = 6
//! power_cap = 6
//! avg_power_budget = 4
//! V = 100
//! horizon = 100000             # default 100000
//! seed = 1                     # default 1
//! utility = log1p              # or power:<exponent>
//! rate = log-linear            # or linear
//! commodities = all            # or destination ids: 0 2 3
//! admitting = all              # or node:commodity pairs: 0:1 2:1
//!
//! [states]
//! # label  alpha  probability
//! G 3 0.25
//! B 1 0.25
//! C 2 0.25
//! U 0 0.25
//!
//! [links]
//! # from to [per-state probabilities overriding [states]]
//! 0 1
//! 1 0 0.5 0.5 0 0
//! ```
//!
//! Keys are case-sensitive; unknown keys and sections are errors. Parsing
//! only checks syntax, [`crate::model::validate_config`] checks the rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::channel::RateSpec;
use crate::model::{all_admitting_pairs, ChannelSpec, ChannelStateDef, NetworkConfig, UtilitySpec};
use crate::{Error, Result};

pub const DEFAULT_HORIZON: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

/// The bundled four-satellite reference experiment.
pub const REFERENCE_CONFIG: &str = include_str!("../../../configs/paper_fig2.cfg");

#[derive(PartialEq)]
enum Section {
    Main,
    States,
    Links,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse '{s}'")))
}

pub fn parse_config(text: &str) -> Result<NetworkConfig> {
    let mut section = Section::Main;
    let mut keys: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut states = Vec::new();
    let mut probabilities = Vec::new();
    let mut links = BTreeSet::new();
    let mut overrides = BTreeMap::new();
    let mut saw_links_section = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[states]" => Section::States,
                "[links]" => {
                    saw_links_section = true;
                    Section::Links
                }
                other => return Err(parse_err(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Main => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "expected key = value"))?;
                let key = key.trim().to_string();
                if keys.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                    return Err(parse_err(line_no, format!("duplicate key {key}")));
                }
            }
            Section::States => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                let [label, alpha, prob] = fields[..] else {
                    return Err(parse_err(line_no, "state rows are: label alpha probability"));
                };
                states.push(ChannelStateDef {
                    label: label.to_string(),
                    alpha: number(line_no, "alpha", alpha)?,
                });
                probabilities.push(number(line_no, "probability", prob)?);
            }
            Section::Links => {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() < 2 {
                    return Err(parse_err(line_no, "link rows are: from to [probabilities...]"));
                }
                let link = (number(line_no, "from", fields[0])?, number(line_no, "to", fields[1])?);
                if !links.insert(link) {
                    return Err(parse_err(line_no, format!("duplicate link {} {}", link.0, link.1)));
                }
                if fields.len() > 2 {
                    let probs = fields[2..]
                        .iter()
                        .map(|s| number(line_no, "probability", s))
                        .collect::<Result<Vec<f64>>>()?;
                    overrides.insert(link, probs);
                }
            }
        }
    }

    let mut take = |key: &str| keys.remove(key);
    let required = |v: Option<(usize, String)>, key: &str| v.ok_or_else(|| parse_err(0, format!("missing key {key}")));

    let (l, v) = required(take("nodes"), "nodes")?;
    let node_count: usize = number(l, "nodes", &v)?;
    let mut cfg = NetworkConfig::full_mesh(
        node_count,
        ChannelSpec {
            states,
            default_probabilities: probabilities,
            overrides,
        },
    );

    match take("links") {
        Some((l, v)) if v == "full-mesh" => {
            if saw_links_section {
                return Err(parse_err(l, "links = full-mesh conflicts with a [links] table"));
            }
        }
        Some((l, v)) => return Err(parse_err(l, format!("links: expected full-mesh, got '{v}'"))),
        None if saw_links_section => cfg.links = links,
        None => return Err(parse_err(0, "missing links = full-mesh or a [links] table")),
    }

    let (l, v) = required(take("out_degree_limit"), "out_degree_limit")?;
    cfg.out_degree_limit = number(l, "out_degree_limit", &v)?;
    let (l, v) = required(take("in_degree_limit"), "in_degree_limit")?;
    cfg.in_degree_limit = number(l, "in_degree_limit", &v)?;
    let (l, v) = required(take("admission_cap"), "admission_cap")?;
    cfg.admission_cap = number(l, "admission_cap", &v)?;
    let (l, v) = required(take("power_cap"), "power_cap")?;
    cfg.power_cap = number(l, "power_cap", &v)?;
    let (l, v) = required(take("avg_power_budget"), "avg_power_budget")?;
    cfg.avg_power_budget = number(l, "avg_power_budget", &v)?;
    let (l, v) = required(take("V"), "V")?;
    cfg.control_v = number(l, "V", &v)?;
    cfg.horizon = match take("horizon") {
        Some((l, v)) => number(l, "horizon", &v)?,
        None => DEFAULT_HORIZON,
    };
    cfg.seed = match take("seed") {
        Some((l, v)) => number(l, "seed", &v)?,
        None => DEFAULT_SEED,
    };
    if let Some((l, v)) = take("utility") {
        cfg.utility = match v.split_once(':') {
            None if v == "log1p" => UtilitySpec::Log1p,
            Some(("power", e)) => UtilitySpec::Power {
                exponent: number(l, "utility exponent", e)?,
            },
            _ => return Err(parse_err(l, format!("unknown utility '{v}'"))),
        };
    }
    if let Some((l, v)) = take("rate") {
        cfg.rate = match v.as_str() {
            "log-linear" => RateSpec::LogLinear,
            "linear" => RateSpec::Linear,
            _ => return Err(parse_err(l, format!("unknown rate '{v}'"))),
        };
    }
    if let Some((l, v)) = take("commodities") {
        if v != "all" {
            cfg.commodities = v
                .split_whitespace()
                .map(|s| number(l, "commodity", s))
                .collect::<Result<_>>()?;
        }
    }
    cfg.admitting_pairs = all_admitting_pairs(node_count, &cfg.commodities);
    if let Some((l, v)) = take("admitting") {
        if v != "all" {
            cfg.admitting_pairs = v
                .split_whitespace()
                .map(|pair| {
                    let (n, c) = pair
                        .split_once(':')
                        .ok_or_else(|| parse_err(l, format!("admitting pair '{pair}' is not node:commodity")))?;
                    Ok((number(l, "node", n)?, number(l, "commodity", c)?))
                })
                .collect::<Result<_>>()?;
        }
    }
    if let Some((key, (l, _))) = keys.into_iter().next() {
        return Err(parse_err(l, format!("unknown key {key}")));
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<NetworkConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_config(&text)
}

/// Canonical text form; `parse_config(&render_config(c)) == c`.
pub fn render_config(cfg: &NetworkConfig) -> String {
    let mut s = String::new();
    let n = cfg.node_count;
    let full_mesh = cfg.links.len() == n * n.saturating_sub(1) && cfg.links.iter().all(|(i, j)| i != j && *i < n && *j < n);
    let all_commodities = cfg.commodities == (0..n).collect();
    let default_pairs = cfg.admitting_pairs == all_admitting_pairs(n, &cfg.commodities);

    let _ = writeln!(s, "nodes = {n}");
    if full_mesh && cfg.channel.overrides.is_empty() {
        let _ = writeln!(s, "links = full-mesh");
    }
    let _ = writeln!(s, "out_degree_limit = {}", cfg.out_degree_limit);
    let _ = writeln!(s, "in_degree_limit = {}", cfg.in_degree_limit);
    let _ = writeln!(s, "admission_cap = {}", cfg.admission_cap);
    let _ = writeln!(s, "power_cap = {}", cfg.power_cap);
    let _ = writeln!(s, "avg_power_budget = {}", cfg.avg_power_budget);
    let _ = writeln!(s, "V = {}", cfg.control_v);
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    match cfg.utility {
        UtilitySpec::Log1p => {
            let _ = writeln!(s, "utility = log1p");
        }
        UtilitySpec::Power { exponent } => {
            let _ = writeln!(s, "utility = power:{exponent}");
        }
    }
    let _ = writeln!(s, "rate = {}", cfg.rate.name());
    if all_commodities {
        let _ = writeln!(s, "commodities = all");
    } else {
        let ids: Vec<String> = cfg.commodities.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "commodities = {}", ids.join(" "));
    }
    if default_pairs {
        let _ = writeln!(s, "admitting = all");
    } else {
        let pairs: Vec<String> = cfg.admitting_pairs.iter().map(|(n, c)| format!("{n}:{c}")).collect();
        let _ = writeln!(s, "admitting = {}", pairs.join(" "));
    }
    let _ = writeln!(s, "\n[states]");
    for (state, p) in cfg.channel.states.iter().zip(&cfg.channel.default_probabilities) {
        let _ = writeln!(s, "{} {} {}", state.label, state.alpha, p);
    }
    if !(full_mesh && cfg.channel.overrides.is_empty()) {
        let _ = writeln!(s, "\n[links]");
        for link in &cfg.links {
            let _ = write!(s, "{} {}", link.0, link.1);
            if let Some(probs) = cfg.channel.overrides.get(link) {
                for p in probs {
                    let _ = write!(s, " {p}");
                }
            }
            s.push('\n');
        }
    }
    s
}

/// Short stable fingerprint of everything in the configuration except
/// `V`, the seed and the horizon, which are keyed separately in outputs.
pub fn config_hash(cfg: &NetworkConfig) -> String {
    let base = cfg.clone().with_v(1.0).with_seed(0).with_horizon(0);
    let digest = Sha256::digest(render_config(&base).as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
