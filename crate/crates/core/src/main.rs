//! Benchmark CLI: run experiments, simulate scenarios, score track files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use gomtrack::harness::{
    load_config, run_experiment, simulate_truth_and_frames, write_outputs, write_simulation,
    FilterKind,
};
use gomtrack::metrics::{ospa, OspaParams};

#[derive(Parser)]
#[command(name = "gomtrack", version, about = "Multi-object tracking benchmark for generic observation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write aggregate outputs.
    Run {
        /// Scenario file (TOML, or JSON echo of a previous run).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured filter (lmo-gom | lmb-gom | g-lmb-gom).
        #[arg(long)]
        filter: Option<String>,
        /// Override the per-hypothesis particle count.
        #[arg(long)]
        particles: Option<usize>,
        /// Override the Monte-Carlo run count.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for parallel runs (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Simulate ground truth and sensor frames without filtering.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score an estimated track file against a truth track file.
    Ospa {
        /// Estimates: tracks.jsonl or a CSV with step,x,y columns.
        #[arg(long)]
        est: PathBuf,
        /// Truth: same formats.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 1.0)]
        order: f64,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            filter,
            particles,
            runs,
            seed,
            out,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(name) = filter {
                cfg.filter = name.parse::<FilterKind>()?;
            }
            if let Some(n) = particles {
                cfg.filter_config.particles_per_hypothesis = n;
            }
            if let Some(n) = runs {
                cfg.runs = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let result = run_experiment(&cfg, threads)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let written = write_outputs(&result, &cfg, &out)?;
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Simulate { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (truth, frames) = simulate_truth_and_frames(&cfg, 0)?;
            let written = write_simulation(&cfg, &truth, &frames, &out)?;
            println!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Ospa {
            est,
            truth,
            cutoff,
            order,
        } => {
            if cutoff <= 0.0 || order < 1.0 {
                bail!("cutoff must be positive and order at least 1");
            }
            let params = OspaParams { cutoff, order };
            let est_tracks = read_track_file(&est)?;
            let truth_tracks = read_track_file(&truth)?;
            let mut all_steps: Vec<usize> = est_tracks.keys().chain(truth_tracks.keys()).copied().collect();
            all_steps.sort_unstable();
            all_steps.dedup();
            let empty = Vec::new();
            println!("step,ospa_m");
            let mut total = 0.0;
            for &k in &all_steps {
                let e = est_tracks.get(&k).unwrap_or(&empty);
                let t = truth_tracks.get(&k).unwrap_or(&empty);
                let v = ospa(e, t, &params);
                total += v;
                println!("{k},{v:.6}");
            }
            if !all_steps.is_empty() {
                println!("mean,{:.6}", total / all_steps.len() as f64);
            }
            Ok(())
        }
    }
}

/// Reads per-step positions from tracks.jsonl or a step,x,y CSV.
fn read_track_file(path: &Path) -> anyhow::Result<BTreeMap<usize, Vec<[f64; 2]>>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut by_step: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
    if path.extension().is_some_and(|e| e == "jsonl") {
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(line)
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
            let step = v["step"]
                .as_u64()
                .with_context(|| format!("{}:{}: missing step", path.display(), lineno + 1))?
                as usize;
            let entry = by_step.entry(step).or_default();
            if let Some(tracks) = v["tracks"].as_array() {
                for t in tracks {
                    let p = &t["position"];
                    if let (Some(x), Some(y)) = (p[0].as_f64(), p[1].as_f64()) {
                        entry.push([x, y]);
                    }
                }
            }
        }
    } else {
        let mut lines = text.lines();
        let header = lines.next().context("empty track file")?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| {
            columns
                .iter()
                .position(|c| *c == name)
                .with_context(|| format!("{}: no {name} column", path.display()))
        };
        let (step_col, x_col, y_col) = (find("step")?, find("x")?, find("y")?);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |col: usize| -> anyhow::Result<f64> {
                fields
                    .get(col)
                    .with_context(|| format!("{}:{}: short row", path.display(), lineno + 2))?
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}", path.display(), lineno + 2))
            };
            let step = parse(step_col)? as usize;
            by_step
                .entry(step)
                .or_default()
                .push([parse(x_col)?, parse(y_col)?]);
        }
    }
    Ok(by_step)
}
