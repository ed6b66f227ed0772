//! V sweeps, queue sample paths, and their CSV forms.
//!
//! All CSV output is comma-separated with a header row, LF line endings and
//! Rust's shortest round-trip float formatting, so identical inputs give
//! byte-identical files.

use std::io::{Read, Write};

use crate::config::config_hash;
use crate::engine::{run_with, RunMetrics, SimOptions, Simulator, SlotRecord};
use crate::model::{NetworkConfig, NodeId};
use crate::{Error, Result};

/// The control-parameter values of the reference experiment.
pub const REFERENCE_V_VALUES: [f64; 6] = [1.0, 10.0, 100.0, 200.0, 1000.0, 5000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub v_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub horizon: Option<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.v_values.is_empty() {
            return Err(Error::Domain("sweep needs at least one V value".into()));
        }
        if let Some(v) = self.v_values.iter().find(|v| !(**v >= 1.0 && v.is_finite())) {
            return Err(Error::Domain(format!("V values must be >= 1, got {v}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain("sweep needs at least one seed".into()));
        }
        Ok(())
    }

    /// `(V, seed)` in output order: V ascending, then seed ascending.
    pub fn points(&self) -> Vec<(f64, u64)> {
        let mut vs = self.v_values.clone();
        vs.sort_by(f64::total_cmp);
        vs.dedup();
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        vs.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect()
    }
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub v: f64,
    pub seed: u64,
    pub avg_utility: f64,
    pub avg_backlog: f64,
    pub stability_stat: f64,
    pub max_avg_power: f64,
}

impl SweepRow {
    pub fn from_metrics(m: &RunMetrics) -> Self {
        SweepRow {
            v: m.control_v,
            seed: m.seed,
            avg_utility: m.avg_utility,
            avg_backlog: m.avg_backlog,
            stability_stat: m.stability_stat,
            max_avg_power: m.max_avg_power(),
        }
    }
}

/// A finished sweep: full metrics for every successful point, in
/// [`SweepSpec::points`] order, plus the points that failed.
#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<RunMetrics>,
    pub failures: Vec<(f64, u64, Error)>,
}

impl SweepOutcome {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.runs.iter().map(SweepRow::from_metrics).collect()
    }
}

/// Runs every `(V, seed)` point on up to `workers` threads. A failing point
/// does not stop the others.
pub fn run_sweep(cfg: &NetworkConfig, spec: &SweepSpec, options: SimOptions, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let configs: Vec<NetworkConfig> = spec
        .points()
        .into_iter()
        .map(|(v, seed)| {
            let c = cfg.clone().with_v(v).with_seed(seed);
            match spec.horizon {
                Some(h) => c.with_horizon(h),
                None => c,
            }
        })
        .collect();
    let results = run_all(&configs, options, workers);

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (c, r) in configs.iter().zip(results) {
        match r {
            Ok(m) => runs.push(m),
            Err(e) => failures.push((c.control_v, c.seed, e)),
        }
    }
    Ok(SweepOutcome { runs, failures })
}

#[cfg(feature = "parallel")]
fn run_all(configs: &[NetworkConfig], options: SimOptions, workers: usize) -> Vec<Result<RunMetrics>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build();
    match pool {
        Ok(pool) => pool.install(|| configs.par_iter().map(|c| run_with(c, options)).collect()),
        Err(_) => configs.iter().map(|c| run_with(c, options)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(configs: &[NetworkConfig], options: SimOptions, _workers: usize) -> Vec<Result<RunMetrics>> {
    configs.iter().map(|c| run_with(c, options)).collect()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub const SWEEP_HEADER: [&str; 6] = ["V", "seed", "avg_utility", "avg_backlog", "stability_stat", "max_avg_power"];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.v.to_string(),
            r.seed.to_string(),
            r.avg_utility.to_string(),
            r.avg_backlog.to_string(),
            r.stability_stat.to_string(),
            r.max_avg_power.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(Error::Domain(format!("unexpected sweep header {:?}", header)));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad number '{}' in sweep csv", &rec[i])))
            };
            Ok(SweepRow {
                v: field(0)?,
                seed: rec[1]
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad seed '{}' in sweep csv", &rec[1])))?,
                avg_utility: field(2)?,
                avg_backlog: field(3)?,
                stability_stat: field(4)?,
                max_avg_power: field(5)?,
            })
        })
        .collect()
}

/// One summary row keyed by configuration hash, V and seed.
pub fn write_summary_csv<W: Write>(cfg: &NetworkConfig, m: &RunMetrics, out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "config_hash",
        "V",
        "seed",
        "horizon",
        "avg_utility",
        "avg_instant_utility",
        "avg_backlog",
        "stability_stat",
        "max_avg_power",
        "max_power_excess",
        "delivered",
        "approximate_slots",
    ])?;
    let excess = m.power_excess().into_iter().fold(0.0, f64::max);
    w.write_record([
        config_hash(cfg),
        m.control_v.to_string(),
        m.seed.to_string(),
        m.horizon.to_string(),
        m.avg_utility.to_string(),
        m.avg_instant_utility.to_string(),
        m.avg_backlog.to_string(),
        m.stability_stat.to_string(),
        m.max_avg_power().to_string(),
        excess.to_string(),
        m.delivered.iter().sum::<f64>().to_string(),
        m.approximate_slots.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Per-slot trace: slot, total backlog, each node's Z, objective, admitted sum.
pub fn write_trace_csv<W: Write>(records: &[SlotRecord], node_count: usize, out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["slot".to_string(), "total_backlog".to_string()];
    header.extend((0..node_count).map(|n| format!("z_{n}")));
    header.extend(["objective".to_string(), "admitted_sum".to_string(), "instant_utility".to_string()]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.slot.to_string(), r.total_backlog.to_string()];
        row.extend(r.z.iter().map(f64::to_string));
        row.extend([r.objective.to_string(), r.admitted_sum.to_string(), r.instant_utility.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Backlog of selected `(node, commodity)` queues after each of the first
/// `slots` slots. Row `t` holds the queues at the end of slot `t`.
pub fn queue_paths(cfg: &NetworkConfig, pairs: &[(NodeId, NodeId)], slots: u64, options: SimOptions) -> Result<Vec<Vec<f64>>> {
    let mut indices = Vec::with_capacity(pairs.len());
    for &(node, commodity) in pairs {
        if node == commodity {
            return Err(Error::Domain(format!(
                "pair ({node},{commodity}): destination queue is identically zero"
            )));
        }
        let k = cfg
            .commodity_index(commodity)
            .filter(|_| node < cfg.node_count)
            .ok_or_else(|| Error::Domain(format!("unknown pair ({node},{commodity})")))?;
        indices.push((node, k));
    }
    let mut sim = Simulator::new(cfg, options)?;
    let mut rows = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        sim.step()?;
        let q = &sim.state().backlog;
        rows.push(indices.iter().map(|&(n, k)| q[n][k]).collect());
    }
    Ok(rows)
}

pub fn write_queue_paths_csv<W: Write>(pairs: &[(NodeId, NodeId)], rows: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["slot".to_string()];
    header.extend(pairs.iter().map(|(n, c)| format!("q_{n}_{c}")));
    w.write_record(&header)?;
    for (t, row) in rows.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            v_values: vec![100.0, 10.0],
            seeds: vec![2, 1],
            horizon: Some(500),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec { v_values: vec![], seeds: vec![1], horizon: None }.validate().is_err());
        assert!(SweepSpec { v_values: vec![0.5], seeds: vec![1], horizon: None }.validate().is_err());
        assert_eq!(small_spec().points(), vec![(10.0, 1), (10.0, 2), (100.0, 1), (100.0, 2)]);
    }

    #[test]
    fn sweep_rows_ordered_and_roundtrip() {
        let cfg = NetworkConfig::reference_mesh();
        let out = run_sweep(&cfg, &small_spec(), SimOptions::default(), 2).unwrap();
        assert!(out.failures.is_empty());
        let rows = out.rows();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[0].v, rows[0].seed), (10.0, 1));
        assert_eq!((rows[3].v, rows[3].seed), (100.0, 2));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
        assert!(!buf.contains(&b'\r'));
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = NetworkConfig::reference_mesh();
        let a = run_sweep(&cfg, &small_spec(), SimOptions::default(), 1).unwrap().rows();
        let b = run_sweep(&cfg, &small_spec(), SimOptions::default(), 4).unwrap().rows();
        assert_eq!(a, b);
    }

    #[test]
    fn queue_paths_shape_and_errors() {
        let cfg = NetworkConfig::reference_mesh();
        let pairs = [(0, 1), (2, 3)];
        let rows = queue_paths(&cfg, &pairs, 50, SimOptions::default()).unwrap();
        assert_eq!(rows.len(), 50);
        assert_eq!(rows[0], vec![6.0, 6.0]);
        let mut buf = Vec::new();
        write_queue_paths_csv(&pairs, &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("slot,q_0_1,q_2_3"));
        assert_eq!(text.lines().count(), 51);

        assert!(queue_paths(&cfg, &[(1, 1)], 1, SimOptions::default()).unwrap_err().to_string().contains("identically zero"));
        assert!(queue_paths(&cfg, &[(9, 1)], 1, SimOptions::default()).is_err());
    }

    #[test]
    fn trace_csv_columns() {
        let cfg = NetworkConfig::reference_mesh().with_horizon(10);
        let m = run_with(&cfg, SimOptions { record_trace: true, ..SimOptions::default() }).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(m.trace.as_deref().unwrap(), 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("slot,total_backlog,z_0,z_1,z_2,z_3,objective,admitted_sum,instant_utility")
        );
        assert_eq!(text.lines().count(), 11);
    }
}
