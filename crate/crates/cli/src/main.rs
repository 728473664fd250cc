//! `qmesh`: success curves, oracle verification, single routing sessions and
//! Monte Carlo sweeps for the quantum mesh simulator.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use qmesh::chain::{enumerate_chain, CorrectionTable, EXACT_HOP_LIMIT};
use qmesh::experiments::{
    fig2_csv, fig2_data, format_float, packet_comparison, packet_csv, sweep_csv,
    sweep_with_threads, Fig2Row, SuccessMode, SweepConfig,
};
use qmesh::topology::{generate, TopologyDump};
use qmesh::{
    analytic_success, format_trace, random_input, run_session, BellOutcome, BitOutcome,
    EntanglementDegree, HopMeasurement, Mode, NodeId, PauliOp, QuantumMode, SimConfig, Topology,
    TopologyConfig,
};

use config::{overlay, read_config, CountList, FloatList};

#[derive(Parser, Debug)]
#[command(name = "qmesh", version, about = "Quantum mesh routing simulator")]
struct Cli {
    /// JSON object with defaults for the subcommand's flags; flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Teleportation success probability over a chain of partially
    /// entangled triples.
    Prob(ProbArgs),
    /// Check the closed form against exhaustive state-vector enumeration.
    Verify(VerifyArgs),
    /// Run one routing session and print its report.
    Route(RouteArgs),
    /// Monte Carlo sweep over random meshes, written as CSV.
    Sweep(SweepArgs),
    /// Packet counts of both result modes on straight routes.
    Packets(PacketArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ProbArgs {
    /// Degree of entanglement, or a comma list.
    #[arg(long)]
    n: Option<FloatList>,
    /// Single hop count.
    #[arg(long, conflicts_with = "max_hops")]
    hops: Option<usize>,
    /// Table for every hop count from 1 to this value.
    #[arg(long)]
    max_hops: Option<usize>,
    /// Cross-check hop counts up to 6 against the state-vector oracle.
    #[arg(long)]
    oracle: bool,
    /// Write the table as CSV instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct VerifyArgs {
    /// Longest chain to enumerate (at most 6).
    #[arg(long)]
    max_hops: Option<usize>,
    /// Seed for the random input states.
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt one correction-table entry (self-test of the checks).
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct RouteArgs {
    /// Backbone nodes (clients excluded).
    #[arg(long)]
    nodes: Option<usize>,
    /// Transmission range in meters.
    #[arg(long)]
    range: Option<f64>,
    /// Link establishment probability.
    #[arg(long)]
    p: Option<f64>,
    /// Degree of entanglement.
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// piggyback or separate.
    #[arg(long)]
    mode: Option<String>,
    /// tracked or exact.
    #[arg(long)]
    quantum: Option<String>,
    /// Ticks the selecting edge node waits for more requests.
    #[arg(long)]
    window: Option<u64>,
    /// Side of the square area in meters.
    #[arg(long)]
    area: Option<f64>,
    /// Let a client try further backbone nodes when its nearest link fails.
    #[arg(long)]
    fallback_attach: bool,
    /// Write the event trace here (`-` for stdout).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the topology as JSON here.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Load the topology from a JSON dump instead of generating one.
    #[arg(long, conflicts_with = "golden_example")]
    topology: Option<PathBuf>,
    /// Use the eight-node walkthrough network A..H.
    #[arg(long)]
    golden_example: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct SweepArgs {
    /// Backbone node counts, `start:stop:step` or a comma list.
    #[arg(long)]
    nodes: Option<CountList>,
    #[arg(long)]
    range: Option<f64>,
    #[arg(long)]
    p: Option<FloatList>,
    #[arg(long)]
    n: Option<FloatList>,
    /// Runs per point.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// analytic or sampled.
    #[arg(long)]
    success: Option<String>,
    #[arg(long)]
    area: Option<f64>,
    #[arg(long)]
    fallback_attach: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct PacketArgs {
    /// Hop counts, `start:stop:step` or a comma list.
    #[arg(long)]
    hops: Option<CountList>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    VerificationFailed,
}

fn degree(n: f64) -> Result<EntanglementDegree> {
    EntanglementDegree::new(n).map_err(|e| anyhow!("--n: {e}"))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
        }
        _ => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_prob(args: ProbArgs) -> Result<Outcome> {
    let ns = args.n.ok_or_else(|| anyhow!("--n is required"))?.0;
    let degrees = ns.iter().map(|&n| degree(n)).collect::<Result<Vec<_>>>()?;
    let top = match (args.hops, args.max_hops) {
        (Some(h), None) | (None, Some(h)) => h,
        (None, None) => bail!("one of --hops or --max-hops is required"),
        (Some(_), Some(_)) => bail!("--hops and --max-hops are exclusive"),
    };
    if top == 0 {
        bail!("hop count must be at least 1");
    }

    let rows: Vec<(usize, f64, f64)> = if args.hops.is_some() {
        ns.iter()
            .zip(&degrees)
            .map(|(&n, &d)| Ok((top, n, analytic_success(top, d)?)))
            .collect::<Result<_>>()?
    } else {
        fig2_data(&ns, top)?
            .into_iter()
            .map(|r| (r.i, r.n, r.p))
            .collect()
    };

    if args.hops.is_some() && rows.len() == 1 && args.out.is_none() {
        let mut text = format_float(rows[0].2);
        if !text.contains(['.', 'e']) {
            text.push_str(".0");
        }
        println!("{text}");
    } else {
        let table: Vec<_> = rows.iter().map(|&(i, n, p)| Fig2Row { i, n, p }).collect();
        write_output(args.out.as_deref(), &fig2_csv(&table))?;
    }

    if !args.oracle {
        return Ok(Outcome::Done);
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mut worst, mut checked) = (0.0f64, 0);
    for &(i, n, p) in rows.iter().filter(|r| r.0 <= EXACT_HOP_LIMIT) {
        let exact = qmesh::exact_chain_success(i, degree(n)?, one, zero)?;
        worst = worst.max((exact - p).abs());
        checked += 1;
    }
    let skipped = rows.len() - checked;
    eprintln!(
        "oracle: {checked} values checked, max deviation {worst:.3e}{}",
        if skipped > 0 {
            format!(", {skipped} beyond {EXACT_HOP_LIMIT} hops skipped")
        } else {
            String::new()
        }
    );
    Ok(if worst > 1e-9 {
        Outcome::VerificationFailed
    } else {
        Outcome::Done
    })
}

struct CheckResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verify_suites(max_hops: usize, seed: u64, table: &CorrectionTable) -> Result<Vec<CheckResult>> {
    let grid = [0.3, 0.5, 0.7, 0.9, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = vec![(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))];
    for _ in 0..2 {
        let s = random_input(&mut rng);
        inputs.push((s.amplitude(0), s.amplitude(1)));
    }

    let (mut dev, mut spread, mut fid, mut total_dev) = (0.0f64, 0.0f64, 1.0f64, 0.0f64);
    let mut exact = Vec::new();
    for i in 1..=max_hops {
        for n in grid {
            let d = degree(n)?;
            let formula = analytic_success(i, d)?;
            let mut seen = Vec::new();
            for &(a, b) in &inputs {
                let s = enumerate_chain(i, d, a, b, table)?;
                dev = dev.max((s.success - formula).abs());
                fid = fid.min(s.min_fidelity);
                total_dev = total_dev.max((s.total_prob - 1.0).abs());
                seen.push(s.success);
            }
            let lo = seen.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            spread = spread.max(hi - lo);
            exact.push(((i, n), seen[0]));
        }
    }

    let mut pair_dev = 0.0f64;
    let mut oracle_pair_dev = 0.0f64;
    for n in grid {
        let d = degree(n)?;
        for t in 1..=5 {
            pair_dev =
                pair_dev.max((analytic_success(2 * t - 1, d)? - analytic_success(2 * t, d)?).abs());
            let odd = exact.iter().find(|e| e.0 == (2 * t - 1, n));
            let even = exact.iter().find(|e| e.0 == (2 * t, n));
            if let (Some(o), Some(e)) = (odd, even) {
                oracle_pair_dev = oracle_pair_dev.max((o.1 - e.1).abs());
            }
        }
    }

    let mut unity = 0.0f64;
    for i in 1..=10 {
        unity = unity.max((analytic_success(i, EntanglementDegree::MAXIMAL)? - 1.0).abs());
    }
    let mut rises = 0;
    for n in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let d = degree(n)?;
        for i in 1..150 {
            if analytic_success(i + 1, d)? > analytic_success(i, d)? + 1e-12 {
                rises += 1;
            }
        }
    }

    Ok(vec![
        CheckResult {
            name: "oracle equivalence",
            passed: dev <= 1e-9,
            detail: format!("max |formula - oracle| = {dev:.3e} over hops 1..={max_hops}"),
        },
        CheckResult {
            name: "branch probabilities",
            passed: total_dev <= 1e-9,
            detail: format!("max |sum - 1| = {total_dev:.3e}"),
        },
        CheckResult {
            name: "input independence",
            passed: spread <= 1e-9,
            detail: format!("max spread across inputs = {spread:.3e}"),
        },
        CheckResult {
            name: "fidelity",
            passed: fid >= 1.0 - 1e-9,
            detail: format!("min fidelity on successful branches = {fid:.12}"),
        },
        CheckResult {
            name: "unity at n = 1",
            passed: unity <= 1e-12,
            detail: format!("max |P - 1| = {unity:.3e} for hops 1..=10"),
        },
        CheckResult {
            name: "monotonicity",
            passed: rises == 0,
            detail: format!("{rises} increases over hops 1..=150"),
        },
        CheckResult {
            name: "pairing",
            passed: pair_dev <= 1e-12 && oracle_pair_dev <= 1e-9,
            detail: format!(
                "formula max {pair_dev:.3e} (t <= 5), oracle max {oracle_pair_dev:.3e}"
            ),
        },
    ])
}

fn cmd_verify(args: VerifyArgs) -> Result<Outcome> {
    let max_hops = args.max_hops.unwrap_or(EXACT_HOP_LIMIT);
    if max_hops == 0 || max_hops > EXACT_HOP_LIMIT {
        bail!("--max-hops must be between 1 and {EXACT_HOP_LIMIT}");
    }
    let mut table = CorrectionTable::STANDARD;
    if args.inject_fault {
        let h = HopMeasurement::new(BellOutcome::PhiPlus, BitOutcome::Zero);
        table = table.with_entry(h, PauliOp::X);
    }
    let checks = verify_suites(max_hops, args.seed.unwrap_or(0), &table)?;
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        println!("{failed} check(s) failed");
        return Ok(Outcome::VerificationFailed);
    }
    println!("all {} checks passed", checks.len());
    Ok(Outcome::Done)
}

fn cmd_route(args: RouteArgs) -> Result<Outcome> {
    let seed = args.seed.unwrap_or(0);
    let mode: Mode = args.mode.as_deref().unwrap_or("piggyback").parse()?;
    let quantum: QuantumMode = args.quantum.as_deref().unwrap_or("tracked").parse()?;
    let cfg = SimConfig {
        mode,
        quantum,
        n: degree(args.n.unwrap_or(1.0))?,
        selection_window: args.window.unwrap_or(0),
        trace: args.trace.is_some(),
        ..SimConfig::default()
    };
    let topo_cfg = TopologyConfig {
        area_side: args.area.unwrap_or(1000.0),
        fallback_attach: args.fallback_attach,
        ..TopologyConfig::new(
            args.nodes.unwrap_or(50),
            args.range.unwrap_or(200.0),
            args.p.unwrap_or(0.8),
            seed,
        )
    };
    topo_cfg.validate()?;

    let (topo, src, dst) = if args.golden_example {
        Topology::walkthrough()
    } else if let Some(path) = &args.topology {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read topology {}", path.display()))?;
        let dump: TopologyDump = serde_json::from_str(&text)
            .with_context(|| format!("topology {} is malformed", path.display()))?;
        let (Some(s), Some(d)) = (dump.source, dump.dest) else {
            bail!("topology {} names no source and dest", path.display());
        };
        (Topology::from_dump(&dump)?, s, d)
    } else {
        let g = generate(&topo_cfg)?;
        (g.topology, g.source, g.dest)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let input = random_input(&mut rng);
    let report = run_session(&topo, src, dst, &input, &cfg, &mut rng)?;

    let name = |id: NodeId| topo.name(id);
    println!(
        "topology: {} nodes, {} links, source {}, dest {}",
        topo.len(),
        topo.established_links().count(),
        name(src),
        name(dst)
    );
    print!("{}", report.summary(&topo));

    if let Some(path) = &args.trace {
        write_output(Some(path), &format_trace(&report.trace, &topo))?;
    }
    if let Some(path) = &args.dump {
        let json = serde_json::to_string_pretty(&topo.to_dump(Some(src), Some(dst)))?;
        write_output(Some(path), &(json + "\n"))?;
    }
    Ok(Outcome::Done)
}

fn cmd_sweep(args: SweepArgs, threads: usize) -> Result<Outcome> {
    let defaults = SweepConfig::default();
    let cfg = SweepConfig {
        node_counts: args.nodes.map_or(defaults.node_counts, |c| c.0),
        range: args.range.unwrap_or(defaults.range),
        p_values: args.p.map_or(defaults.p_values, |l| l.0),
        n_values: args.n.map_or(defaults.n_values, |l| l.0),
        runs: args.runs.unwrap_or(defaults.runs),
        master_seed: args.seed.unwrap_or(0),
        success_mode: args
            .success
            .as_deref()
            .unwrap_or("analytic")
            .parse::<SuccessMode>()?,
        area_side: args.area.unwrap_or(defaults.area_side),
        fallback_attach: args.fallback_attach,
    };
    cfg.validate()?;
    if let Some(out) = &args.out {
        // fail on an unwritable path before spending time on the sweep
        fs::write(out, "").with_context(|| format!("cannot write {}", out.display()))?;
    }
    let rows = sweep_with_threads(&cfg, threads)?;
    write_output(args.out.as_deref(), &sweep_csv(&rows))?;
    let found = rows.iter().map(|r| r.route_found_rate).sum::<f64>() / rows.len() as f64;
    let summary = format!(
        "{} rows, {} runs each, mean route-found rate {}",
        rows.len(),
        cfg.runs,
        format_float(found)
    );
    match &args.out {
        Some(out) => println!("{summary}; wrote {}", out.display()),
        // stdout carries the CSV
        None => eprintln!("{summary}"),
    }
    Ok(Outcome::Done)
}

fn cmd_packets(args: PacketArgs) -> Result<Outcome> {
    let hops = args.hops.map_or_else(|| (1..=6).collect(), |c| c.0);
    if hops.contains(&0) {
        bail!("hop counts must be at least 1");
    }
    let rows = packet_comparison(hops)?;
    write_output(args.out.as_deref(), &packet_csv(&rows))?;
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut file = match &cli.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let file_threads = file.remove("threads");
    let threads = match (cli.threads, file_threads) {
        (Some(t), _) => t,
        (None, Some(v)) => serde_json::from_value(v).context("config: threads")?,
        (None, None) => 0,
    };
    match cli.command {
        Command::Prob(a) => cmd_prob(overlay(&a, &file)?),
        Command::Verify(a) => cmd_verify(overlay(&a, &file)?),
        Command::Route(a) => cmd_route(overlay(&a, &file)?),
        Command::Sweep(a) => cmd_sweep(overlay(&a, &file)?, threads),
        Command::Packets(a) => cmd_packets(overlay(&a, &file)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(Outcome::Done)) => ExitCode::SUCCESS,
        Ok(Ok(Outcome::VerificationFailed)) => ExitCode::from(2),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        // the panic message is already on stderr
        Err(_) => ExitCode::from(1),
    }
}
