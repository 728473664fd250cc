//! Seeded Monte Carlo sweeps over random meshes, success-curve tables and
//! packet-count comparisons, with CSV output.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{analytic_success, random_input, EntanglementDegree};
use crate::error::{Error, Result};
use crate::quantum::{BitOutcome, StateVector};
use crate::routing::{run_session, Mode, SimConfig};
use crate::topology::{generate_with, Topology, TopologyConfig};

pub const SWEEP_HEADER: &str = "node_count,R,p,n,runs,route_found_rate,mean_hops,mean_P_suc,stderr,packets_piggyback,packets_separate";
pub const FIG2_HEADER: &str = "i,n,P";
pub const PACKET_HEADER: &str = "hops,qrr,piggyback,separate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessMode {
    /// Closed-form success probability of the found route.
    #[default]
    Analytic,
    /// One simulated session per run; contributes 0 or 1.
    Sampled,
}

impl FromStr for SuccessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(SuccessMode::Analytic),
            "sampled" => Ok(SuccessMode::Sampled),
            _ => Err(Error::Parameter(format!(
                "unknown success mode {s:?} (expected analytic or sampled)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub node_counts: Vec<usize>,
    pub range: f64,
    pub p_values: Vec<f64>,
    pub n_values: Vec<f64>,
    pub runs: usize,
    pub master_seed: u64,
    pub success_mode: SuccessMode,
    pub area_side: f64,
    pub fallback_attach: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            node_counts: (10..=200).step_by(10).collect(),
            range: 200.0,
            p_values: vec![0.3, 0.5, 0.8],
            n_values: vec![0.5, 0.7, 0.9, 1.0],
            runs: 100,
            master_seed: 0,
            success_mode: SuccessMode::Analytic,
            area_side: 1000.0,
            fallback_attach: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Parameter("runs per point must be at least 1".into()));
        }
        if self.node_counts.is_empty() || self.p_values.is_empty() || self.n_values.is_empty() {
            return Err(Error::Parameter(
                "node counts, p and n lists must be non-empty".into(),
            ));
        }
        for &n in &self.n_values {
            EntanglementDegree::new(n)?;
        }
        for &count in &self.node_counts {
            for &p in &self.p_values {
                self.topology_config(count, p, 0).validate()?;
            }
        }
        Ok(())
    }

    fn topology_config(&self, count: usize, p: f64, seed: u64) -> TopologyConfig {
        TopologyConfig {
            backbone_count: count,
            range: self.range,
            link_prob: p,
            area_side: self.area_side,
            seed,
            fallback_attach: self.fallback_attach,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub node_count: usize,
    pub range: f64,
    pub p: f64,
    pub n: f64,
    pub runs: usize,
    pub route_found_rate: f64,
    /// Over runs that found a route; 0 when none did.
    pub mean_hops: f64,
    pub mean_p_suc: f64,
    pub stderr: f64,
    pub packets_piggyback: f64,
    pub packets_separate: f64,
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one run, independent of the order runs execute in.
pub fn child_seed(master: u64, node_count: usize, p_idx: usize, n_idx: usize, run: usize) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    [node_count as u64, p_idx as u64, n_idx as u64, run as u64]
        .iter()
        .fold(mix64(master), |h, &part| {
            mix64(h ^ part.wrapping_add(GOLDEN))
        })
}

struct RunOutcome {
    hops: Option<usize>,
    contribution: f64,
    piggyback: u64,
    separate: u64,
}

fn one_run(
    cfg: &SweepConfig,
    count: usize,
    p: f64,
    n: EntanglementDegree,
    seed: u64,
) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate_with(&cfg.topology_config(count, p, seed), &mut rng)?;
    let hops = g
        .topology
        .min_hop_path(g.source, g.dest)?
        .map(|path| path.len() - 1);

    // sessions draw from their own stream so placement is unaffected by them
    rng.set_stream(1);
    let input = random_input(&mut rng);
    let mut sim = SimConfig {
        n,
        ..SimConfig::default()
    };
    let pig = run_session(&g.topology, g.source, g.dest, &input, &sim, &mut rng)?;
    sim.mode = Mode::Separate;
    let sep = run_session(&g.topology, g.source, g.dest, &input, &sim, &mut rng)?;
    if pig.route.is_some() != hops.is_some() {
        return Err(Error::Protocol(
            "protocol and BFS disagree on reachability".into(),
        ));
    }

    let contribution = match (hops, cfg.success_mode) {
        (None, _) => 0.0,
        (Some(h), SuccessMode::Analytic) => analytic_success(h, n)?,
        (Some(_), SuccessMode::Sampled) => f64::from(u8::from(pig.success)),
    };
    Ok(RunOutcome {
        hops,
        contribution,
        piggyback: pig.packets.total(),
        separate: sep.packets.total(),
    })
}

fn row(cfg: &SweepConfig, count: usize, p_idx: usize, n_idx: usize) -> Result<RowRecord> {
    let p = cfg.p_values[p_idx];
    let n_val = cfg.n_values[n_idx];
    let n = EntanglementDegree::new(n_val)?;
    let outcomes = (0..cfg.runs)
        .map(|r| {
            one_run(
                cfg,
                count,
                p,
                n,
                child_seed(cfg.master_seed, count, p_idx, n_idx, r),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let runs = cfg.runs as f64;
    let found: Vec<usize> = outcomes.iter().filter_map(|o| o.hops).collect();
    let mean = outcomes.iter().map(|o| o.contribution).sum::<f64>() / runs;
    let var = if cfg.runs > 1 {
        outcomes
            .iter()
            .map(|o| (o.contribution - mean).powi(2))
            .sum::<f64>()
            / (runs - 1.0)
    } else {
        0.0
    };
    Ok(RowRecord {
        node_count: count,
        range: cfg.range,
        p,
        n: n_val,
        runs: cfg.runs,
        route_found_rate: found.len() as f64 / runs,
        mean_hops: if found.is_empty() {
            0.0
        } else {
            found.iter().sum::<usize>() as f64 / found.len() as f64
        },
        mean_p_suc: mean,
        stderr: (var / runs).sqrt(),
        packets_piggyback: outcomes.iter().map(|o| o.piggyback as f64).sum::<f64>() / runs,
        packets_separate: outcomes.iter().map(|o| o.separate as f64).sum::<f64>() / runs,
    })
}

/// Every (node_count, p, n) point, sorted by R, p, n, then node_count.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<RowRecord>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &count in &cfg.node_counts {
        for p_idx in 0..cfg.p_values.len() {
            for n_idx in 0..cfg.n_values.len() {
                points.push((count, p_idx, n_idx));
            }
        }
    }
    let mut rows = points
        .par_iter()
        .map(|&(count, p_idx, n_idx)| row(cfg, count, p_idx, n_idx))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.range
            .total_cmp(&b.range)
            .then(a.p.total_cmp(&b.p))
            .then(a.n.total_cmp(&b.n))
            .then(a.node_count.cmp(&b.node_count))
    });
    Ok(rows)
}

/// [`sweep`] on a dedicated pool; `threads == 0` uses the global pool.
pub fn sweep_with_threads(cfg: &SweepConfig, threads: usize) -> Result<Vec<RowRecord>> {
    if threads == 0 {
        return sweep(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| sweep(cfg))
}

/// `%g`-style rendering with 12 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sweep_csv(rows: &[RowRecord]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.node_count,
            format_float(r.range),
            format_float(r.p),
            format_float(r.n),
            r.runs,
            format_float(r.route_found_rate),
            format_float(r.mean_hops),
            format_float(r.mean_p_suc),
            format_float(r.stderr),
            format_float(r.packets_piggyback),
            format_float(r.packets_separate),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub i: usize,
    pub n: f64,
    pub p: f64,
}

/// Success probability for `i = 1..=max_i`, grouped by `n` in input order.
pub fn fig2_data(n_values: &[f64], max_i: usize) -> Result<Vec<Fig2Row>> {
    if max_i == 0 {
        return Err(Error::Parameter("max_i must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(n_values.len() * max_i);
    for &n in n_values {
        let deg = EntanglementDegree::new(n)?;
        for i in 1..=max_i {
            rows.push(Fig2Row {
                i,
                n,
                p: analytic_success(i, deg)?,
            });
        }
    }
    Ok(rows)
}

pub fn fig2_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::from(FIG2_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.i, format_float(r.n), format_float(r.p));
    }
    out
}

/// Packets on a straight route. `piggyback` and `separate` exclude the
/// request flood, which is the same in both modes and counted in `qrr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRow {
    pub hops: usize,
    pub qrr: u64,
    pub piggyback: u64,
    pub separate: u64,
}

pub fn packet_comparison(hops: impl IntoIterator<Item = usize>) -> Result<Vec<PacketRow>> {
    let mut rows = Vec::new();
    for h in hops {
        let (t, s, d) = Topology::linear(h)?;
        let input = StateVector::basis(BitOutcome::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(h as u64);
        let mut cfg = SimConfig::default();
        let pig = run_session(&t, s, d, &input, &cfg, &mut rng)?;
        cfg.mode = Mode::Separate;
        let sep = run_session(&t, s, d, &input, &cfg, &mut rng)?;
        rows.push(PacketRow {
            hops: h,
            qrr: pig.packets.qrr,
            piggyback: pig.packets.total() - pig.packets.qrr,
            separate: sep.packets.total() - sep.packets.qrr,
        });
    }
    Ok(rows)
}

pub fn packet_csv(rows: &[PacketRow]) -> String {
    let mut out = String::from(PACKET_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.hops, r.qrr, r.piggyback, r.separate);
    }
    out
}
