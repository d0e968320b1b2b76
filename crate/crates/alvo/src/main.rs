//! Command-line front end: run episodes, compare lighting modes, evaluate
//! trajectories, run the focus stage over saved frames, and plot results.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use alvo::eval::{self, Alignment, TrajectoryKind};
use alvo::frame::{load_pgm, Frame};
use alvo::pipeline::{self, config::PipelineConfig};

#[derive(Parser)]
#[command(name = "alvo", version, about = "Active-light visual odometry testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode and write its artifacts.
    Simulate {
        /// Pipeline config file (TOML). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Lighting mode: AL, FL or LO (overrides the config).
        #[arg(long)]
        mode: Option<String>,
        /// Output directory for gt.tum, est.tum, report.csv,
        /// summary.toml, arm_trace.csv.
        #[arg(long)]
        out: PathBuf,
        /// Scene file or preset:<name> (overrides the config).
        #[arg(long)]
        scene: Option<String>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump frames into <out>/frames (every Nth, from the
        /// config's dump_every, default every 30th).
        #[arg(long)]
        dump_frames: bool,
    },
    /// Evaluate an estimated trajectory against ground truth.
    Evaluate {
        /// Ground-truth trajectory, TUM format.
        #[arg(long)]
        gt: PathBuf,
        /// Estimated trajectory, TUM format.
        #[arg(long)]
        est: PathBuf,
        /// Output CSV of per-timestamp errors (a summary.toml is written
        /// next to it).
        #[arg(long)]
        out: PathBuf,
        /// Association tolerance, seconds.
        #[arg(long, default_value_t = 0.02)]
        max_dt: f64,
        /// Rigidly pre-align the estimate to the ground truth first.
        #[arg(long)]
        align: bool,
    },
    /// Run several modes with identical seeds and emit a comparison table.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated mode list.
        #[arg(long, default_value = "AL,FL,LO")]
        modes: String,
        /// Output directory: comparison.csv plus per-mode subdirectories.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scene: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the focus stage over a directory of PGM frames.
    Focus {
        /// Directory of .pgm frames, processed in sorted order.
        #[arg(long)]
        frames: PathBuf,
        /// Output CSV: frame, target_x, target_y, centroid_count, score.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a top-down SVG overlay of ground truth vs estimate.
    Plot {
        /// Episode directory containing gt.tum and est.tum.
        #[arg(long)]
        report: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        svg: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => {
            PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn apply_overrides(
    cfg: &mut PipelineConfig,
    mode: &Option<String>,
    scene: &Option<String>,
    seed: &Option<u64>,
) {
    if let Some(m) = mode {
        cfg.mode = m.clone();
    }
    if let Some(s) = scene {
        cfg.scene = s.clone();
    }
    if let Some(s) = seed {
        cfg.seed = *s;
    }
}

fn print_summary(artifacts: &pipeline::EpisodeArtifacts) {
    let r = &artifacts.report;
    println!(
        "{}: ate_rmse={:.4} m  are_rmse={:.4} rad  r_t={:.3}  t_lost={}  tracked={}/{} frames",
        artifacts.mode,
        r.ate_rmse,
        r.are_rmse,
        r.r_t,
        r.t_lost,
        artifacts.stats.tracked_frames,
        artifacts.stats.frames
    );
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            mode,
            out,
            scene,
            seed,
            dump_frames,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &mode, &scene, &seed);
            if dump_frames && cfg.dump_every.is_none() {
                cfg.dump_every = Some(30);
            }
            let dump_dir = dump_frames.then(|| out.join("frames"));
            let artifacts =
                pipeline::run_episode(&cfg, dump_dir.as_deref()).context("episode failed")?;
            pipeline::write_artifacts(&out, &cfg, &artifacts)?;
            print_summary(&artifacts);
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Evaluate {
            gt,
            est,
            out,
            max_dt,
            align,
        } => {
            let gt_traj = eval::load_tum(&gt, TrajectoryKind::GroundTruth)
                .with_context(|| format!("loading {}", gt.display()))?;
            let est_traj = eval::load_tum(&est, TrajectoryKind::Estimate)
                .with_context(|| format!("loading {}", est.display()))?;
            let alignment = if align {
                Alignment::Rigid
            } else {
                Alignment::None
            };
            let report = eval::evaluate(&gt_traj, &est_traj, max_dt, 0, alignment)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&out, pipeline::report_csv(&report))?;
            println!(
                "ate_rmse={:.6} m  are_rmse={:.6} rad  r_t={:.4}  pairs={}",
                report.ate_rmse,
                report.are_rmse,
                report.r_t,
                report.errors.len()
            );
            Ok(())
        }
        Command::Compare {
            config,
            modes,
            out,
            scene,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &None, &scene, &seed);
            let mode_list: Vec<String> = modes
                .split(',')
                .map(|m| m.trim().to_string())
                .filter(|m| !m.is_empty())
                .collect();
            if mode_list.is_empty() {
                bail!("no modes given");
            }
            let rows = pipeline::compare_modes(&cfg, &mode_list)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("comparison.csv"), pipeline::comparison_csv(&rows))?;
            for artifacts in &rows {
                let mut mode_cfg = cfg.clone();
                mode_cfg.mode = artifacts.mode.clone();
                pipeline::write_artifacts(&out.join(&artifacts.mode), &mode_cfg, artifacts)?;
                print_summary(artifacts);
            }
            println!(
                "comparison written to {}",
                out.join("comparison.csv").display()
            );
            Ok(())
        }
        Command::Focus {
            frames,
            out,
            config,
        } => {
            let cfg = load_config(&config)?;
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&frames)
                .with_context(|| format!("reading {}", frames.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
                .collect();
            paths.sort();
            if paths.is_empty() {
                bail!("no .pgm frames in {}", frames.display());
            }
            let mut loaded = Vec::new();
            for (i, p) in paths.iter().enumerate() {
                let (w, h, data) =
                    load_pgm(p).with_context(|| format!("loading {}", p.display()))?;
                let frame = Frame::new(i as u64, i as f64, w, h, data, None)
                    .map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
                loaded.push((i as u64, frame));
            }
            let csv = pipeline::focus_over_frames(&cfg, &loaded)?;
            std::fs::write(&out, csv)?;
            println!(
                "focus targets for {} frames written to {}",
                loaded.len(),
                out.display()
            );
            Ok(())
        }
        Command::Plot { report, svg } => {
            let gt = eval::load_tum(report.join("gt.tum"), TrajectoryKind::GroundTruth)
                .with_context(|| format!("loading {}/gt.tum", report.display()))?;
            let est = eval::load_tum(report.join("est.tum"), TrajectoryKind::Estimate)
                .with_context(|| format!("loading {}/est.tum", report.display()))?;
            let rendered = eval::svg_overlay(&gt, &est);
            write_with_parents(&svg, rendered.as_bytes())?;
            println!("plot written to {}", svg.display());
            Ok(())
        }
    }
}

fn write_with_parents(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
