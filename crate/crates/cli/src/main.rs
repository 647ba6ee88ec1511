use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use greenlb::config::{ConfigFile, SnapshotFile};
use greenlb::design::run_sweep;
use greenlb::engine::{simulate, SimOptions};
use greenlb::metrics::summarize;
use greenlb::policy::{check_params, select_server, NdResolution, ServerSnapshot};
use greenlb::report::{self, GroupBy, ResultRow, RowKey};
use greenlb::rng::policy_stream;
use greenlb::validation::compare;
use greenlb::{parse_policy, PowerModel};

/// Simulate energy-aware load balancing policies.
#[derive(Parser)]
#[command(name = "greenlb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a policy file and print its canonical form and tree.
    Parse { file: PathBuf },
    /// Evaluate a policy against a snapshot of server states.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_parser = parse_nd, default_value = "random")]
        nd: NdResolution,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write the event trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overrides `scenario.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run every design of the `study` section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `scenario.seed` as the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two result tables design by design.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Export (AP_total, AL, group) points for plotting.
    PlotData {
        results: PathBuf,
        #[arg(long, value_parser = parse_group, default_value = "q")]
        group_by: GroupBy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_nd(s: &str) -> Result<NdResolution, String> {
    s.parse().map_err(|e: greenlb::Error| e.to_string())
}

fn parse_group(s: &str) -> Result<GroupBy, String> {
    s.parse().map_err(|e: greenlb::Error| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(path: &Path) -> Result<(ConfigFile, PathBuf)> {
    ConfigFile::load(path).with_context(|| format!("reading {}", path.display()))
}

fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    report::read_rows(f).with_context(|| format!("reading {}", path.display()))
}

fn cmd_parse(file: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let expr = parse_policy(&text)?;
    println!("{expr}");
    print!("{}", expr.tree());
    Ok(())
}

fn cmd_eval(policy: &Path, state: &Path, nd: NdResolution, seed: u64) -> Result<()> {
    let expr = parse_policy(
        &std::fs::read_to_string(policy)
            .with_context(|| format!("cannot read {}", policy.display()))?,
    )?;
    let snap = SnapshotFile::parse(
        &std::fs::read_to_string(state)
            .with_context(|| format!("cannot read {}", state.display()))?,
    )?;
    check_params(&expr, &snap.params)?;
    let power = PowerModel::from(&snap.power);
    let n = snap.server.len();
    let snaps: Vec<ServerSnapshot> = snap
        .server
        .iter()
        .enumerate()
        .map(|(id, s)| ServerSnapshot {
            id,
            num_servers: n,
            queue_size: s.queue_size,
            power_state: s.state,
            power: &power,
            params: &snap.params,
        })
        .collect();
    let sel = select_server(&expr, &snaps, nd, &mut policy_stream(seed))?;
    println!("server,value,resolved");
    for id in 0..n {
        println!("{id},{},{}", sel.base[id], sel.resolved[id]);
    }
    println!("selected,{}", sel.server);
    Ok(())
}

fn cmd_run(config: &Path, trace: Option<&Path>, seed: Option<u64>, format: Format) -> Result<()> {
    let (file, dir) = load_config(config)?;
    let mut cfg = file.to_sim_config(&dir)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = simulate(
        &cfg,
        SimOptions {
            trace: trace.is_some(),
        },
    )?;
    if let Some(p) = trace {
        report::write_trace(output(Some(p))?, &sim.trace)?;
    }
    let result = summarize(&cfg, &sim)?;
    let mut out = output(None)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &result)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let key = RowKey {
                q: cfg.params.get("q").copied(),
                to: Some(cfg.power.timeout),
                nd: cfg.nd.name().to_string(),
                replication: 0,
                seed: cfg.seed,
            };
            report::write_rows(out, &[ResultRow::ok(key, &result)])?;
        }
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<()> {
    let (file, dir) = load_config(config)?;
    let space = file.design_space()?;
    let mut base = file.to_sim_config(&dir)?;
    if let Some(s) = seed {
        base.seed = s;
    }
    let rows: Vec<ResultRow> = run_sweep(&space, &base, jobs)?
        .iter()
        .map(|r| r.to_result_row())
        .collect();
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed", rows.len());
    }
    report::write_rows(output(Some(out))?, &rows)?;
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path, json: Option<&Path>) -> Result<()> {
    let report = compare(&read_results(a)?, &read_results(b)?)?;
    print!("{}", report.to_table());
    if let Some(p) = json {
        let mut w = output(Some(p))?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
    }
    Ok(())
}

fn cmd_plot_data(results: &Path, group_by: GroupBy, out: Option<&Path>) -> Result<()> {
    let points = report::plot_points(&read_results(results)?, group_by);
    report::write_plot_points(output(out)?, &points)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { file } => cmd_parse(&file),
        Command::Eval {
            policy,
            state,
            nd,
            seed,
        } => cmd_eval(&policy, &state, nd, seed),
        Command::Run {
            config,
            trace,
            seed,
            format,
        } => cmd_run(&config, trace.as_deref(), seed, format),
        Command::Sweep {
            config,
            out,
            jobs,
            seed,
        } => cmd_sweep(&config, &out, jobs, seed),
        Command::Compare { a, b, json } => cmd_compare(&a, &b, json.as_deref()),
        Command::PlotData {
            results,
            group_by,
            out,
        } => cmd_plot_data(&results, group_by, out.as_deref()),
    }
}

/// `error[<kind>]: <context>: <cause>` on a single line.
fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<greenlb::Error>())
        .map(greenlb::Error::kind)
        .unwrap_or("io");
    let msg = err
        .chain()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .replace(['\n', '\r'], " ");
    format!("error[{kind}]: {msg}")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GREENLB_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
