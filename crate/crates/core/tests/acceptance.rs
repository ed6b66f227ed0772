//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use dlsa_core::analysis::compute_b;
use dlsa_core::channel::{check_rate_properties, ChannelState, PerLink, RateGrid, RateSpec};
use dlsa_core::dlsa::{
    compute_weights, optimal_link_power, select_links_exact, select_links_greedy,
    solve_admission, SelectionInput,
};
use dlsa_core::engine::{run_with, RunMetrics, SimOptions};
use dlsa_core::experiment::{run_sweep, write_sweep_csv, SweepRow, SweepSpec, REFERENCE_V_VALUES};
use dlsa_core::model::build_graph;
use dlsa_core::{config, NetworkConfig, UtilitySpec};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const HORIZON: u64 = 100_000;
const SEEDS: [u64; 3] = [1, 2, 3];
const UTILITY_REL_TOL: f64 = 0.02;
const BACKLOG_RATIO_MIN: f64 = 10.0;
const STABILITY_FRACTION: f64 = 0.01;
const POWER_EXCESS_FRACTION: f64 = 0.05;
const SOLVER_INSTANCES: usize = 200;
const POWER_GRID: usize = 200;
const SOLVER_TOL: f64 = 0.05;
const CLOSED_FORM_DRAWS: usize = 1000;
const SEARCH_GRID: usize = 10_000;
const CLOSED_FORM_TOL: f64 = 1e-3;
const INVARIANT_SLOTS: u64 = 10_000;

type Outcome = Result<String, String>;

fn reference() -> NetworkConfig {
    config::parse_config(config::REFERENCE_CONFIG).expect("bundled config parses")
}

fn sweep_spec() -> SweepSpec {
    SweepSpec {
        v_values: REFERENCE_V_VALUES.to_vec(),
        seeds: SEEDS.to_vec(),
        horizon: Some(HORIZON),
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn sweep() -> &'static [RunMetrics] {
    static RUNS: OnceLock<Vec<RunMetrics>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let out = run_sweep(&reference(), &sweep_spec(), SimOptions::default(), workers()).expect("valid sweep");
        assert!(out.failures.is_empty(), "sweep failures: {:?}", out.failures);
        out.runs
    })
}

/// Seed means `(V, utility, backlog)` in ascending V.
fn seed_means() -> Vec<(f64, f64, f64)> {
    REFERENCE_V_VALUES
        .iter()
        .map(|&v| {
            let runs: Vec<_> = sweep().iter().filter(|m| m.control_v == v).collect();
            let k = runs.len() as f64;
            (
                v,
                runs.iter().map(|m| m.avg_utility).sum::<f64>() / k,
                runs.iter().map(|m| m.avg_backlog).sum::<f64>() / k,
            )
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let means = seed_means();
    let mut detail = String::new();
    for (v, u, q) in &means {
        detail.push_str(&format!(" V={v}: U={u:.4} Q={q:.1};"));
    }
    for w in means.windows(2) {
        let ((v0, u0, q0), (v1, u1, q1)) = (w[0], w[1]);
        if u1 < u0 * (1.0 - UTILITY_REL_TOL) {
            return Err(format!("utility fell from {u0} (V={v0}) to {u1} (V={v1});{detail}"));
        }
        if q1 <= q0 {
            return Err(format!("backlog not increasing from V={v0} to V={v1};{detail}"));
        }
    }
    let q = |v: f64| means.iter().find(|m| m.0 == v).unwrap().2;
    let ratio = q(5000.0) / q(100.0);
    if ratio <= BACKLOG_RATIO_MIN {
        return Err(format!("backlog ratio 5000/100 = {ratio:.2};{detail}"));
    }
    Ok(format!("backlog ratio 5000/100 = {ratio:.1};{detail}"))
}

fn criterion_2() -> Outcome {
    let means = seed_means();
    let u = |v: f64| means.iter().find(|m| m.0 == v).unwrap().1;
    let b = compute_b(&reference());
    let proxy = u(5000.0);
    for v in [1000.0, 100.0] {
        if u(v) < proxy - b / v {
            return Err(format!("U({v}) = {} < U(5000) - B/{v} = {}", u(v), proxy - b / v));
        }
    }
    Ok(format!(
        "B = {b:.2}; U(1000) = {:.4} >= {:.4}; U(100) = {:.4} >= {:.4}",
        u(1000.0),
        proxy - b / 1000.0,
        u(100.0),
        proxy - b / 100.0
    ))
}

fn criterion_3() -> Outcome {
    let cfg = reference().with_v(100.0).with_seed(SEEDS[0]);
    let long = sweep()
        .iter()
        .find(|m| m.control_v == 100.0 && m.seed == SEEDS[0])
        .unwrap()
        .stability_stat;
    let short = run_with(&cfg.with_horizon(10_000), SimOptions::default())
        .map_err(|e| e.to_string())?
        .stability_stat;
    let cap = STABILITY_FRACTION * reference().admission_cap;
    if long >= cap {
        return Err(format!("max Q(T)/T = {long} at T=1e5, needs < {cap}"));
    }
    if long >= short {
        return Err(format!("stat at T=1e5 ({long}) not below T=1e4 ({short})"));
    }
    Ok(format!("T=1e4: {short:.3e}, T=1e5: {long:.3e} < {cap}"))
}

fn criterion_4() -> Outcome {
    let p_tot = reference().avg_power_budget;
    let mut worst_excess: f64 = 0.0;
    for m in sweep() {
        let excess = m.power_excess();
        for (node, (&p, &e)) in m.avg_power.iter().zip(&excess).enumerate() {
            if p > p_tot + e + 1e-9 {
                return Err(format!("V={} seed={} node {node}: power {p} > {p_tot} + {e}", m.control_v, m.seed));
            }
            if e >= POWER_EXCESS_FRACTION * p_tot {
                return Err(format!("V={} seed={} node {node}: Z/T = {e}", m.control_v, m.seed));
            }
            worst_excess = worst_excess.max(e);
        }
    }
    Ok(format!("largest Z_n(T)/T = {worst_excess:.4e} < {}", POWER_EXCESS_FRACTION * p_tot))
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn below(rng: &mut ChaCha8Rng, n: u32) -> usize {
    (rng.next_u32() % n) as usize
}

/// Every degree-feasible symmetric connection set, each selected direction
/// searched over a uniform power grid. Weights are recomputed here from the
/// raw backlogs.
fn brute_force_objective(
    n: usize,
    edges: &[(usize, usize)],
    backlog: &[Vec<f64>],
    z: &[f64],
    alpha: &[Vec<f64>],
    d_out: usize,
    d_in: usize,
    p_max: f64,
) -> f64 {
    let weight = |i: usize, j: usize| {
        backlog[i]
            .iter()
            .zip(&backlog[j])
            .map(|(a, b)| (a - b).max(0.0))
            .fold(0.0, f64::max)
    };
    let direction = |i: usize, j: usize| {
        (0..POWER_GRID)
            .map(|k| p_max * k as f64 / (POWER_GRID - 1) as f64)
            .map(|p| weight(i, j) * (alpha[i][j] * p).ln_1p() - z[i] * p)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut best = 0.0f64;
    for mask in 0u32..(1 << edges.len()) {
        let mut gamma = vec![vec![false; n]; n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                gamma[a][b] = true;
                gamma[b][a] = true;
            }
        }
        let feasible = (0..n).all(|i| {
            gamma[i].iter().filter(|&&g| g).count() <= d_out && (0..n).filter(|&a| gamma[a][i]).count() <= d_in
        });
        if !feasible {
            continue;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if gamma[i][j] {
                    total += direction(i, j);
                }
            }
        }
        best = best.max(total);
    }
    best
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let alphas = [3.0, 1.0, 2.0, 0.0];
    let mut worst_gap: f64 = 0.0;
    for instance in 0..SOLVER_INSTANCES {
        let n = 2 + below(&mut rng, 4);
        let mut all_pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        // keep a random subset of at most 8 undirected edges
        let mut edges = Vec::new();
        while let Some(pos) = (!all_pairs.is_empty()).then(|| below(&mut rng, all_pairs.len() as u32)) {
            let e = all_pairs.remove(pos);
            if edges.len() < 8 && rng.next_u32() % 4 != 0 {
                edges.push(e);
            }
        }
        edges.sort_unstable();
        let c = 1 + below(&mut rng, n as u32);
        let backlog: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..c).map(|k| if i == k { 0.0 } else { 50.0 * unit(&mut rng) }).collect())
            .collect();
        let z: Vec<f64> = (0..n).map(|_| 50.0 * unit(&mut rng)).collect();
        let mut alpha = vec![vec![0.0; n]; n];
        for &(a, b) in &edges {
            alpha[a][b] = alphas[below(&mut rng, 4)];
            alpha[b][a] = alphas[below(&mut rng, 4)];
        }
        let d_out = 1 + below(&mut rng, 3);
        let d_in = 1 + below(&mut rng, 3);
        let p_max = 6.0;

        let mut cfg = NetworkConfig::reference_mesh();
        cfg.node_count = n;
        cfg.links = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        cfg.commodities = (0..c).collect::<BTreeSet<_>>();
        cfg.admitting_pairs = BTreeSet::new();
        cfg.out_degree_limit = d_out;
        cfg.in_degree_limit = d_in;
        let graph = build_graph(&cfg).map_err(|e| e.to_string())?;
        let weights = compute_weights(&backlog);
        let state = ChannelState::from_alpha(alpha.clone());
        let input = SelectionInput {
            graph: &graph,
            weights: &weights,
            z: &z,
            state: &state,
            budget: cfg.degree_budget(),
            power_cap: p_max,
            rate: RateSpec::LogLinear,
        };
        let exact = select_links_exact(&input, 20).map_err(|e| e.to_string())?.objective;
        let greedy = select_links_greedy(&input).map_err(|e| e.to_string())?.objective;
        let brute = brute_force_objective(n, &edges, &backlog, &z, &alpha, d_out, d_in, p_max);
        let gap = (exact - brute).abs();
        worst_gap = worst_gap.max(gap);
        if gap > SOLVER_TOL {
            return Err(format!("instance {instance}: exact {exact} vs brute force {brute}"));
        }
        if greedy > exact + 1e-12 {
            return Err(format!("instance {instance}: greedy {greedy} > exact {exact}"));
        }
    }
    Ok(format!("{SOLVER_INSTANCES} instances, worst |exact - brute force| = {worst_gap:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let r_max = 6.0;
    let grid = |hi: f64| (0..SEARCH_GRID).map(move |k| hi * k as f64 / (SEARCH_GRID - 1) as f64);
    let mut worst_r: f64 = 0.0;
    for _ in 0..CLOSED_FORM_DRAWS {
        let v = 1.0 + 999.0 * unit(&mut rng);
        let q = if rng.next_u32() % 10 == 0 { 0.0 } else { 200.0 * unit(&mut rng) };
        let r = solve_admission(v, q, &UtilitySpec::Log1p, r_max).map_err(|e| e.to_string())?;
        let oracle = grid(r_max)
            .map(|x| (x, v * x.ln_1p() - q * x))
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
            .0;
        worst_r = worst_r.max((r - oracle).abs());
        if (r - oracle).abs() > CLOSED_FORM_TOL {
            return Err(format!("admission V={v} Q={q}: closed form {r}, grid {oracle}"));
        }
    }
    let mut worst_gain: f64 = 0.0;
    let p_max = 6.0;
    for _ in 0..CLOSED_FORM_DRAWS {
        let w = 50.0 * unit(&mut rng);
        let z = if rng.next_u32() % 10 == 0 { 0.0 } else { 50.0 * unit(&mut rng) };
        let alpha = 3.0 * unit(&mut rng);
        let lp = optimal_link_power(w, z, alpha, p_max);
        let oracle = grid(p_max)
            .map(|p| w * (alpha * p).ln_1p() - z * p)
            .fold(f64::NEG_INFINITY, f64::max);
        worst_gain = worst_gain.max((lp.gain - oracle).abs());
        if (lp.gain - oracle).abs() > CLOSED_FORM_TOL || lp.gain < 0.0 {
            return Err(format!("power W={w} Z={z} a={alpha}: closed form {}, grid {oracle}", lp.gain));
        }
    }
    Ok(format!("worst admission gap {worst_r:.2e}, worst power-gain gap {worst_gain:.2e}"))
}

fn criterion_7() -> Outcome {
    let cfg = reference().with_v(100.0).with_horizon(INVARIANT_SLOTS);
    let options = SimOptions {
        check_invariants: true,
        ..SimOptions::default()
    };
    let m = run_with(&cfg, options).map_err(|e| e.to_string())?;
    let admitted: f64 = m.admitted.iter().sum();
    let delivered: f64 = m.delivered.iter().sum();
    Ok(format!(
        "{INVARIANT_SLOTS} slots checked; admitted {admitted:.1}, delivered {delivered:.1}, held {:.1}",
        m.final_state.total_backlog()
    ))
}

fn criterion_8() -> Outcome {
    let grid = RateGrid::integer(3, 6);
    let report = check_rate_properties(&RateSpec::LogLinear, &grid);
    if !report.all_pass() || report.delta_witness > 3.0 {
        return Err(format!("default rate: {report:?}"));
    }
    let broken = PerLink(|_a: f64, p: f64, g: bool| if g { p.exp() } else { 0.0 });
    let bad = check_rate_properties(&broken, &grid);
    if bad.linear_bound {
        return Err(format!("superlinear fixture passed: {bad:?}"));
    }
    Ok(format!(
        "default rate passes with delta = {:.4}; exp fixture fails (delta = {:.1})",
        report.delta_witness, bad.delta_witness
    ))
}

fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf).expect("in-memory write");
    buf
}

fn criterion_9() -> Outcome {
    let first: Vec<SweepRow> = sweep().iter().map(SweepRow::from_metrics).collect();
    let again = run_sweep(&reference(), &sweep_spec(), SimOptions::default(), 3).map_err(|e| e.to_string())?;
    let (a, b) = (sweep_csv(&first), sweep_csv(&again.rows()));
    if a != b {
        return Err("sweep CSVs differ".into());
    }
    Ok(format!("{} rows, {} bytes identical", first.len(), a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 utility/backlog trend over V", criterion_1),
        ("2 diminishing utility gap", criterion_2),
        ("3 mean-rate stability", criterion_3),
        ("4 average-power constraint", criterion_4),
        ("5 link-selection oracle", criterion_5),
        ("6 closed-form oracles", criterion_6),
        ("7 per-slot invariants", criterion_7),
        ("8 rate properties", criterion_8),
        ("9 deterministic sweep CSV", criterion_9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
