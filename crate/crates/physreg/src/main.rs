use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use physreg::bench::{run_forecast, run_interpolation, write_results, BenchOptions, ConfigRecord, NodeCounts, RandomNodes};
use physreg::config::RunConfig;
use physreg::error::{AppError, Result};
use physreg::grid::{predict_grid, predict_points, GridPrediction};
use physreg::io::{self, DataKind, ManifestHeader};
use physreg_core::sim::{grid_indices, sample_grid, sample_random, simulate};
use physreg_core::{l2_relative_error, predict, SpatioTemporalPoint};

#[derive(Parser)]
#[command(name = "physreg", version, about = "Physics-informed pointwise regression without training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reference solver and store every snapshot.
    Simulate(SimulateArgs),
    /// Draw a GRID or RAND training set from a ground-truth directory.
    MakeDataset(DatasetArgs),
    /// Predict at one point, or on a lattice at one time.
    Predict(PredictArgs),
    /// Interpolation or forecast benchmark against ground truth.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Grid,
    Rand,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Interp,
    Forecast,
}

/// Options shared by every command; flags override the file.
#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all logical cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    physics: Option<Toggle>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(p) = self.physics {
            cfg.physics = matches!(p, Toggle::On);
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Nodes per axis of the truth grid.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Last snapshot index.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    dt_sim: Option<f64>,
    /// Output directory (default: <output root>/truth-<hash>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Nodes per axis for `grid`, samples per snapshot for `rand`.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Training data directory.
    #[arg(long)]
    data: PathBuf,
    /// Single query `p1,p2,t`.
    #[arg(long, conflicts_with = "grid")]
    point: Option<String>,
    /// Lattice nodes per axis.
    #[arg(long, requires = "t")]
    grid: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    /// Ground truth; lattice nodes are then truth nodes and errors are reported.
    #[arg(long, requires = "grid")]
    truth: Option<PathBuf>,
    /// Neighbour count, or an inclusive range `A..B` to sweep (needs --truth).
    #[arg(long)]
    k: Option<String>,
    /// CSV output for lattice predictions (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-node solver records as JSON lines.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Forecast initial-condition indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    k_start: Vec<usize>,
    /// Forecast steps per initial condition (default: up to the last snapshot).
    #[arg(long)]
    horizon: Option<usize>,
    /// Score every `stride`-th truth node per axis.
    #[arg(long)]
    stride: Option<usize>,
    /// Snapshots to score in interpolation mode, comma separated.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
    /// Score this many random truth nodes per snapshot (drawn from `--seed`)
    /// instead of the strided lattice.
    #[arg(long)]
    random_nodes: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Results root (default: the configured output root).
    #[arg(long)]
    out_root: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::MakeDataset(a) => cmd_make_dataset(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8> {
    let mut cfg = a.common.load()?;
    if let Some(n) = a.grid_n {
        cfg.sim.grid_n = n;
    }
    if let Some(h) = a.horizon {
        cfg.sim.horizon = h;
    }
    if let Some(dt) = a.dt_sim {
        cfg.sim.dt_sim = dt;
    }
    cfg.validate()?;
    let out = a.out.unwrap_or_else(|| cfg.resolved_output_root().join(format!("truth-{}", &cfg.hash()[..12])));
    let truth = simulate(&cfg.sim, &cfg.rds)?;
    let header = ManifestHeader {
        kind: DataKind::Truth,
        domain: cfg.sim.domain,
        grid_n: cfg.sim.grid_n,
        config: cfg,
        size: None,
        seed: None,
        exact_grid: None,
        source: None,
    };
    let m = io::write_snapshot_dir(&out, header, &truth.snapshots)?;
    println!("{} snapshots of {}x{} written to {}", m.snapshots.len(), m.grid_n, m.grid_n, out.display());
    Ok(0)
}

fn cmd_make_dataset(a: DatasetArgs) -> Result<u8> {
    let mut cfg = a.common.load()?;
    let (tm, truth) = io::read_truth(&a.truth)?;
    // the simulation part of the config describes the truth actually on disk
    cfg.sim = tm.config.sim.clone();
    cfg.rds = tm.config.rds;
    let (kind, snaps, exact, seed) = match a.kind {
        Kind::Grid => {
            let (snaps, exact) = sample_grid(&truth, a.size)?;
            if !exact {
                eprintln!("warning: {} nodes per axis do not divide the {} truth grid; nearest nodes used", a.size, truth.grid_n);
            }
            (DataKind::Grid, snaps, Some(exact), None)
        }
        Kind::Rand => (DataKind::Rand, sample_random(&truth, a.size, cfg.seed)?, None, Some(cfg.seed)),
    };
    let name = match kind {
        DataKind::Grid => format!("grid{}", a.size),
        _ => format!("rand{}-seed{}", a.size, cfg.seed),
    };
    let out = a.out.unwrap_or_else(|| cfg.resolved_output_root().join(name));
    let header = ManifestHeader {
        kind,
        domain: truth.domain,
        grid_n: truth.grid_n,
        config: cfg,
        size: Some(a.size),
        seed,
        exact_grid: exact,
        source: Some(io::manifest_hash(&a.truth)?),
    };
    let m = io::write_snapshot_dir(&out, header, &snaps)?;
    println!("{} snapshots x {} samples written to {}", m.snapshots.len(), snaps[0].len(), out.display());
    Ok(0)
}

fn parse_k(text: &str) -> Result<(usize, usize)> {
    let bad = || AppError::Config(format!("--k expects N or A..B, got {text:?}"));
    match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok((a, b))
        }
        None => {
            let k = text.trim().parse().map_err(|_| bad())?;
            Ok((k, k))
        }
    }
}

fn parse_point(text: &str) -> Result<SpatioTemporalPoint> {
    let v: Vec<f64> = text.split(',').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| AppError::Config(format!("--point expects p1,p2,t, got {text:?}")))?;
    match v[..] {
        [p1, p2, t] => Ok(SpatioTemporalPoint::new(p1, p2, t)),
        _ => Err(AppError::Config(format!("--point expects p1,p2,t, got {text:?}"))),
    }
}

fn cmd_predict(a: PredictArgs) -> Result<u8> {
    let mut cfg = a.common.load()?;
    let (dm, data) = io::read_snapshot_dir(&a.data)?;
    if dm.kind != DataKind::Truth {
        // physics coefficients travel with the data
        cfg.rds = dm.config.rds;
    }
    let (k_lo, k_hi) = match &a.k {
        Some(s) => parse_k(s)?,
        None => (cfg.neighbors.k, cfg.neighbors.k),
    };
    cfg.neighbors.k = k_lo;
    cfg.validate()?;

    if let Some(text) = &a.point {
        let q = parse_point(text)?;
        let r = predict(&q, &data, &cfg.rds, &cfg.predict_config())?;
        let out = serde_json::json!({
            "query": q,
            "u_prime": r.u_prime,
            "status": r.report.status,
            "degraded": r.degraded,
            "field_vars": r.field_vars_query,
            "slack_summary": r.slack_summary,
            "neighbor_ids": r.neighbor_ids,
            "kkt": [r.report.kkt_stationarity, r.report.kkt_feasibility, r.report.kkt_complementarity],
            "iterations": r.report.iterations,
            "outer_iterations": r.report.outer_iterations,
            "config_hash": cfg.hash(),
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        return Ok(if r.degraded { 3 } else { 0 });
    }

    let (Some(m), Some(t)) = (a.grid, a.t) else {
        return Err(AppError::Config("give either --point or --grid with --t".into()));
    };
    let truth_nodes = match &a.truth {
        Some(dir) => {
            let (_, truth) = io::read_truth(dir)?;
            let k = truth
                .snapshots
                .iter()
                .position(|s| (s.t - t).abs() <= 1e-9)
                .ok_or_else(|| AppError::Config(format!("no truth snapshot at t = {t}")))?;
            let (idx, exact) = grid_indices(truth.grid_n, m);
            if !exact {
                eprintln!("warning: lattice snapped to the nearest truth nodes");
            }
            let snap = &truth.snapshots[k];
            Some((
                idx.iter().flat_map(|&j| idx.iter().map(move |&i| (i, j))).map(|(i, j)| snap.samples[truth.node_index(i, j)]).collect::<Vec<_>>(),
                snap.t,
            ))
        }
        None => None,
    };
    // query at the stored snapshot time so nodes compare equal to the truth
    let t = truth_nodes.as_ref().map_or(t, |(_, ts)| *ts);
    let truth_nodes = truth_nodes.map(|(nodes, _)| nodes);

    let run = |cfg: &RunConfig| -> Result<GridPrediction> {
        match &truth_nodes {
            Some(nodes) => {
                let pts: Vec<(f64, f64)> = nodes.iter().map(|s| (s.point.p1, s.point.p2)).collect();
                predict_points(&pts, t, 0, &data, &cfg.rds, &cfg.predict_config(), cfg.worker_count())
            }
            None => predict_grid(&dm.domain, m, t, &data, &cfg.rds, &cfg.predict_config(), cfg.worker_count()),
        }
    };

    if k_hi > k_lo {
        let Some(nodes) = &truth_nodes else {
            return Err(AppError::Config("a --k sweep needs --truth".into()));
        };
        let target = physreg_core::Snapshot { index: 0, t, samples: nodes.clone() };
        let mut table = String::from("k,error,degraded,mean_ms\n");
        for k in k_lo..=k_hi {
            let mut c = cfg.clone();
            c.neighbors.k = k;
            let p = run(&c)?;
            let err = l2_relative_error(&p.snapshot, &target)?;
            let ms = p.outcomes.iter().map(|o| o.wall_ms).sum::<f64>() / p.outcomes.len() as f64;
            writeln!(table, "{k},{err},{},{ms:.3}", p.degraded()).unwrap();
        }
        emit(a.out.as_deref(), &table)?;
        return Ok(0);
    }

    let p = run(&cfg)?;
    let mut csv = String::from(if truth_nodes.is_some() { "p1,p2,t,u_pred,u_true,status\n" } else { "p1,p2,t,u_pred,status\n" });
    for (i, (s, o)) in p.snapshot.samples.iter().zip(&p.outcomes).enumerate() {
        let status = if o.degraded { "degraded" } else { o.status.as_str() };
        match &truth_nodes {
            Some(n) => writeln!(csv, "{},{},{},{},{},{status}", s.point.p1, s.point.p2, s.point.t, s.u, n[i].u),
            None => writeln!(csv, "{},{},{},{},{status}", s.point.p1, s.point.p2, s.point.t, s.u),
        }
        .unwrap();
    }
    emit(a.out.as_deref(), &csv)?;
    if let Some(path) = &a.diagnostics {
        let mut lines = String::new();
        for (s, o) in p.snapshot.samples.iter().zip(&p.outcomes) {
            let rec = serde_json::json!({ "p1": s.point.p1, "p2": s.point.p2, "t": s.point.t, "outcome": o });
            lines.push_str(&rec.to_string());
            lines.push('\n');
        }
        std::fs::write(path, lines).map_err(AppError::io(path))?;
    }
    let error = match &truth_nodes {
        Some(n) => Some(l2_relative_error(&p.snapshot, &physreg_core::Snapshot { index: 0, t, samples: n.clone() })?),
        None => None,
    };
    let counts = NodeCounts { scored: p.outcomes.len(), degraded: p.degraded(), kkt_violations: 0 };
    let sidecar = serde_json::json!({
        "config_hash": cfg.hash(),
        "config": cfg,
        "nodes": counts.scored,
        "degraded": counts.degraded,
        "l2_relative_error": error,
        "mean_ms": p.outcomes.iter().map(|o| o.wall_ms).sum::<f64>() / p.outcomes.len() as f64,
    });
    match &a.out {
        Some(path) => io::write_json(&path.with_extension("json"), &sidecar)?,
        None => eprintln!("{}", sidecar),
    }
    Ok(0)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(AppError::io(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let mut cfg = a.common.load()?;
    if let Some(s) = a.stride {
        cfg.score_stride = s;
    }
    if let Some(k) = a.k {
        cfg.neighbors.k = k;
    }
    let (tm, truth) = io::read_truth(&a.truth)?;
    let (_, data) = io::read_snapshot_dir(&a.data)?;
    cfg.sim = tm.config.sim.clone();
    cfg.rds = tm.config.rds;
    cfg.validate()?;
    let mut opts = BenchOptions::from_config(&cfg);
    if !a.snapshots.is_empty() {
        opts.snapshots = Some(a.snapshots.clone());
    }
    opts.random_nodes = a.random_nodes.map(|count| RandomNodes { count, seed: cfg.seed });
    let pcfg = cfg.predict_config();
    let root = a.out_root.clone().unwrap_or_else(|| cfg.resolved_output_root());
    let mut record = ConfigRecord {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        truth: io::manifest_hash(&a.truth)?,
        data: io::manifest_hash(&a.data)?,
        mode: String::new(),
        k_starts: Vec::new(),
        horizon: None,
        snapshots: opts.snapshots.clone(),
        random_nodes: a.random_nodes,
    };
    let (dir, counts, timing) = match a.mode {
        Mode::Interp => {
            record.mode = "interp".into();
            let run = run_interpolation(&truth, &data, &cfg.rds, &pcfg, &opts)?;
            for p in &run.curve.points {
                println!("k'={:>3} t={:.2} error={:.6e}", p.k_prime, p.t, p.error);
            }
            println!("median error {:.6e}", run.curve.median());
            (write_results(&root, &record, Some(&run.curve), None, &run.timing, run.counts)?, run.counts, run.timing)
        }
        Mode::Forecast => {
            if a.k_start.is_empty() {
                return Err(AppError::Config("forecast mode needs --k-start".into()));
            }
            record.mode = "forecast".into();
            record.k_starts = a.k_start.clone();
            record.horizon = a.horizon;
            let run = run_forecast(&truth, &data, &a.k_start, a.horizon, &cfg.rds, &pcfg, &opts)?;
            for (k0, c) in &run.curves {
                let row: Vec<String> = c.points.iter().map(|p| format!("{:.3e}", p.error)).collect();
                println!("k_start={k0:>3}: {}", row.join(" "));
            }
            (write_results(&root, &record, None, Some(&run.curves), &run.timing, run.counts)?, run.counts, run.timing)
        }
    };
    println!(
        "{} nodes, {} degraded, per-query {:.2} ms mean; results in {}",
        counts.scored,
        counts.degraded,
        timing.per_query_ms.mean,
        dir.display()
    );
    if !counts.is_valid() {
        eprintln!("error: run invalid ({} degraded of {}, {} KKT violations)", counts.degraded, counts.scored, counts.kkt_violations);
        return Ok(3);
    }
    Ok(0)
}
