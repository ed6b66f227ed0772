//! Browser bindings for the simulator. Every export takes plain numbers or
//! strings and returns a JSON document for the page to plot.

use dlsa_core::engine::{run_with, SimOptions, Simulator};
use dlsa_core::experiment::queue_paths;
use dlsa_core::NetworkConfig;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_HORIZON: u64 = 200_000;

fn reference(v: f64, seed: u64) -> Result<NetworkConfig, String> {
    let cfg = NetworkConfig::reference_mesh().with_v(v).with_seed(seed);
    let violations = dlsa_core::model::validate_config(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    }
}

fn check_horizon(h: u64) -> Result<u64, String> {
    if h > MAX_HORIZON {
        return Err(format!("horizon {h} exceeds {MAX_HORIZON}"));
    }
    Ok(h)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| format!("bad {what} '{x}'")))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("no {what} given"));
    }
    Ok(items)
}

pub fn v_sweep_json(v_list: &str, horizon: u64, seed: u64) -> Result<String, String> {
    let horizon = check_horizon(horizon)?;
    let mut rows = Vec::new();
    for v in parse_list::<f64>(v_list, "V")? {
        let cfg = reference(v, seed)?.with_horizon(horizon);
        let m = run_with(&cfg, SimOptions::default()).map_err(|e| e.to_string())?;
        rows.push(json!({
            "v": v,
            "utility": m.avg_utility,
            "backlog": m.avg_backlog,
            "max_avg_power": m.max_avg_power(),
        }));
    }
    Ok(Value::Array(rows).to_string())
}

pub fn queue_paths_json(pairs: &str, v: f64, slots: u64, seed: u64) -> Result<String, String> {
    let slots = check_horizon(slots)?;
    let pairs: Vec<(usize, usize)> = parse_list::<String>(pairs, "pair")?
        .iter()
        .map(|p| {
            let (n, c) = p.split_once(':').ok_or_else(|| format!("bad pair '{p}'"))?;
            Ok((n.parse().map_err(|_| format!("bad pair '{p}'"))?, c.parse().map_err(|_| format!("bad pair '{p}'"))?))
        })
        .collect::<Result<_, String>>()?;
    let cfg = reference(v, seed)?;
    let rows = queue_paths(&cfg, &pairs, slots, SimOptions::default()).map_err(|e| e.to_string())?;
    let series: Vec<Value> = pairs
        .iter()
        .enumerate()
        .map(|(k, (n, c))| {
            json!({
                "node": n,
                "commodity": c,
                "backlog": rows.iter().map(|r| r[k]).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Value::Array(series).to_string())
}

pub fn slot_snapshot_json(v: f64, seed: u64, slot: u64) -> Result<String, String> {
    let slot = check_horizon(slot)?;
    let cfg = reference(v, seed)?;
    let mut sim = Simulator::new(&cfg, SimOptions::default()).map_err(|e| e.to_string())?;
    for _ in 0..slot {
        sim.step().map_err(|e| e.to_string())?;
    }
    let backlog = sim.state().backlog.clone();
    let z = sim.state().z.clone();
    let out = sim.step().map_err(|e| e.to_string())?;
    let labels: Vec<Vec<Option<&str>>> = out
        .channel
        .labels
        .iter()
        .map(|row| row.iter().map(|l| l.map(|s| cfg.channel.states[s].label.as_str())).collect())
        .collect();
    Ok(json!({
        "slot": slot,
        "backlog": backlog,
        "z": z,
        "alpha": out.channel.alpha,
        "labels": labels,
        "gamma": out.decision.gamma,
        "power": out.decision.power,
        "link_rates": out.decision.link_rates,
        "admissions": out.decision.admissions,
        "objective": out.decision.objective_value,
    })
    .to_string())
}

/// Average utility and backlog of the reference network for each V in a
/// comma-separated list.
#[wasm_bindgen]
pub fn v_sweep(v_list: &str, horizon: u32, seed: u32) -> Result<String, JsError> {
    v_sweep_json(v_list, horizon.into(), seed.into()).map_err(|e| JsError::new(&e))
}

/// Per-slot backlog of each `node:commodity` queue.
#[wasm_bindgen]
pub fn queue_sample_paths(pairs: &str, v: f64, slots: u32, seed: u32) -> Result<String, JsError> {
    queue_paths_json(pairs, v, slots.into(), seed.into()).map_err(|e| JsError::new(&e))
}

/// Channel, queues and the controller's decision at one slot.
#[wasm_bindgen]
pub fn slot_snapshot(v: f64, seed: u32, slot: u32) -> Result<String, JsError> {
    slot_snapshot_json(v, seed.into(), slot.into()).map_err(|e| JsError::new(&e))
}
