use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dlsa_core::analysis::{compute_b, diagnose_sweep, rate_grid, TheoryReport};
use dlsa_core::channel::check_rate_properties;
use dlsa_core::config::{config_hash, load_config};
use dlsa_core::engine::{run_with, SimOptions};
use dlsa_core::experiment::{
    queue_paths, read_sweep_csv, run_sweep, write_queue_paths_csv, write_summary_csv, write_sweep_csv,
    write_trace_csv, SweepSpec, REFERENCE_V_VALUES,
};
use dlsa_core::model::{build_graph, validate_config};
use dlsa_core::{Error, NetworkConfig};

// A closed pipe (e.g. `dlsa check-config x | head`) is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Degree-limited scheduling simulator for multihop satellite networks.
#[derive(Parser, Debug)]
#[command(name = "dlsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write a summary CSV.
    Run(RunArgs),
    /// Run every (V, seed) combination and write the sweep CSV and report.
    Sweep(SweepArgs),
    /// Write per-slot backlogs of selected queues.
    Trace(TraceArgs),
    /// Validate a configuration and print its derived constants.
    CheckConfig {
        config: PathBuf,
    },
    /// Rebuild the theory report from an existing sweep CSV.
    Report {
        config: PathBuf,
        sweep_csv: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Args, Debug)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "DLSA_OUTPUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct Overrides {
    /// Control parameter V (>= 1).
    #[arg(long = "V")]
    v: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of slots.
    #[arg(long)]
    horizon: Option<u64>,
    /// Largest undirected edge count solved exactly; larger graphs use the greedy.
    #[arg(long, default_value_t = dlsa_core::dlsa::DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Also write the per-slot trace here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Verify per-slot invariants (slower).
    #[arg(long)]
    check: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug)]
struct SweepArgs {
    config: PathBuf,
    /// Comma-separated V values.
    #[arg(long = "V", value_delimiter = ',', default_values_t = REFERENCE_V_VALUES)]
    v: Vec<f64>,
    /// Comma-separated seeds; defaults to the config's seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Concurrent runs.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, default_value_t = dlsa_core::dlsa::DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args, Debug)]
struct TraceArgs {
    config: PathBuf,
    /// Queue to record as node:commodity; repeatable or comma-separated.
    #[arg(long = "pair", value_delimiter = ',', required = true, value_parser = parse_pair)]
    pairs: Vec<(usize, usize)>,
    /// Number of slots to record.
    #[arg(long, default_value_t = 1000)]
    slots: u64,
    #[command(flatten)]
    overrides: Overrides,
    /// Output CSV; defaults to <out-dir>/queues.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    out_dir: OutDir,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (n, c) = s.split_once(':').ok_or_else(|| format!("'{s}' is not node:commodity"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("'{x}' is not a node id"));
    Ok((parse(n)?, parse(c)?))
}

/// Usage and configuration problems exit 1, runtime faults exit 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::Domain(_) => Failure::Usage(e.into()),
            Error::Io(_) | Error::Csv(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path, o: Option<&Overrides>) -> Result<NetworkConfig, Failure> {
    let mut cfg = read_config(path)?;
    if let Some(o) = o {
        if let Some(v) = o.v {
            cfg.control_v = v;
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(h) = o.horizon {
            cfg.horizon = h;
        }
    }
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations).into());
    }
    Ok(cfg)
}

fn read_config(path: &Path) -> Result<NetworkConfig, Failure> {
    load_config(path).map_err(|e| match e {
        Error::Io(_) => Failure::Usage(e.into()),
        e => Failure::Usage(anyhow!(e).context(format!("in {}", path.display()))),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::Usage)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Usage)
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let cfg = load(&args.config, Some(&args.overrides))?;
    let options = SimOptions {
        exact_limit: args.overrides.exact_limit,
        check_invariants: args.check,
        record_trace: args.trace_out.is_some(),
    };
    let metrics = match run_with(&cfg, options) {
        Ok(m) => m,
        Err(e @ Error::Fault { .. }) => {
            let path = args.out.out_dir.join("fault.txt");
            fs::create_dir_all(&args.out.out_dir).ok();
            fs::write(&path, e.to_string()).ok();
            return Err(Failure::Runtime(anyhow!("{}", e.to_string().lines().next().unwrap_or_default())
                .context(format!("diagnostic dump written to {}", path.display()))));
        }
        Err(e) => return Err(e.into()),
    };

    let summary = args.out.out_dir.join("summary.csv");
    write_summary_csv(&cfg, &metrics, create(&summary)?)?;
    if let (Some(path), Some(trace)) = (&args.trace_out, &metrics.trace) {
        write_trace_csv(trace, cfg.node_count, create(path)?)?;
    }

    out!("config        {}", config_hash(&cfg));
    out!("V             {}", cfg.control_v);
    out!("seed          {}", cfg.seed);
    out!("horizon       {}", metrics.horizon);
    out!("avg_utility   {:.6}", metrics.avg_utility);
    out!("avg_backlog   {:.4}", metrics.avg_backlog);
    out!("stability     {:.6e}", metrics.stability_stat);
    out!("max avg power {:.4} (budget {})", metrics.max_avg_power(), cfg.avg_power_budget);
    if metrics.approximate_slots > 0 {
        out!("approximate   {} slots used greedy link selection", metrics.approximate_slots);
    }
    out!("summary       {}", summary.display());
    Ok(())
}

fn write_report(report: &TheoryReport, dir: &Path) -> CmdResult {
    let text = report.render_text();
    let _ = std::io::stdout().write_all(text.as_bytes());
    let txt = dir.join("report.txt");
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::Usage)?;
    fs::write(&txt, &text).with_context(|| format!("writing {}", txt.display()))?;
    report.write_csv(create(&dir.join("report.csv"))?)?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let cfg = load(&args.config, None)?;
    let spec = SweepSpec {
        v_values: args.v,
        seeds: if args.seeds.is_empty() { vec![cfg.seed] } else { args.seeds },
        horizon: args.horizon,
    };
    let options = SimOptions {
        exact_limit: args.exact_limit,
        ..SimOptions::default()
    };
    let outcome = run_sweep(&cfg, &spec, options, args.workers.max(1))?;
    let rows = outcome.rows();
    let dir = &args.out.out_dir;
    let sweep_path = dir.join("sweep.csv");
    write_sweep_csv(&rows, create(&sweep_path)?)?;
    out!("wrote {} rows to {}", rows.len(), sweep_path.display());

    match diagnose_sweep(&rows, &cfg) {
        Ok(report) => write_report(&report, dir)?,
        Err(e) => eprintln!("no report: {e}"),
    }

    if !outcome.failures.is_empty() {
        for (v, seed, e) in &outcome.failures {
            eprintln!("run V={v} seed={seed} failed: {e}");
        }
        return Err(Failure::Runtime(anyhow!("{} of {} runs failed", outcome.failures.len(), spec.points().len())));
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> CmdResult {
    let cfg = load(&args.config, Some(&args.overrides))?;
    let options = SimOptions {
        exact_limit: args.overrides.exact_limit,
        ..SimOptions::default()
    };
    let rows = queue_paths(&cfg, &args.pairs, args.slots, options)?;
    let path = args.out.unwrap_or_else(|| args.out_dir.out_dir.join("queues.csv"));
    write_queue_paths_csv(&args.pairs, &rows, create(&path)?)?;
    out!("wrote {} slots to {}", rows.len(), path.display());
    Ok(())
}

fn cmd_check_config(path: &Path) -> CmdResult {
    let cfg = read_config(path)?;
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        for v in &violations {
            out!("violation: {v}");
        }
        return Err(Failure::Usage(anyhow!("{} violation(s)", violations.len())));
    }
    let graph = build_graph(&cfg)?;
    let rates = check_rate_properties(&cfg.rate, &rate_grid(&cfg));
    out!("ok: {}", path.display());
    out!("config hash      {}", config_hash(&cfg));
    out!("nodes            {}", cfg.node_count);
    out!("directed links   {}", cfg.links.len());
    out!("symmetric edges  {}", graph.undirected_edges.len());
    out!("max out/in deg   {}/{}", graph.max_out_degree(), graph.max_in_degree());
    out!("degree limits    out {} in {} (budget {})", cfg.out_degree_limit, cfg.in_degree_limit, cfg.degree_budget());
    out!("commodities      {}", cfg.commodity_count());
    out!("admitting pairs  {}", cfg.admitting_pairs.len());
    out!("mu_max           {:.6}", cfg.mu_max());
    out!("B                {:.4}", compute_b(&cfg));
    out!("B/V              {:.4}", compute_b(&cfg) / cfg.control_v);
    out!(
        "rate properties  linear bound {} (delta {:.4}), independence {}, disconnected inert {}",
        rates.linear_bound, rates.delta_witness, rates.no_gain_from_others, rates.disconnected_power_inert
    );
    Ok(())
}

fn cmd_report(config: &Path, sweep_csv: &Path, out: &OutDir) -> CmdResult {
    let cfg = load(config, None)?;
    let file = File::open(sweep_csv)
        .with_context(|| format!("opening {}", sweep_csv.display()))
        .map_err(Failure::Usage)?;
    let rows = read_sweep_csv(file)?;
    let report = diagnose_sweep(&rows, &cfg)?;
    write_report(&report, &out.out_dir)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Trace(a) => cmd_trace(a),
        Command::CheckConfig { config } => cmd_check_config(&config),
        Command::Report { config, sweep_csv, out } => cmd_report(&config, &sweep_csv, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("fault: {e:#}");
            ExitCode::from(2)
        }
    }
}
