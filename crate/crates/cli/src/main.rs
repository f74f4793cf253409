use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tactile_loco::batch::par_map;
use tactile_loco::geometry::ContactModel;
use tactile_loco::replay::{
    fidelity_report, gait_metrics, read_trajectory, replay_rewards, replay_tactile, run_episode, write_fidelity,
    write_gait, write_gait_summary, write_rewards, write_trajectory,
};
use tactile_loco::signal::write_stream;
use tactile_loco::{ConfigError, ReplayError, SimConfig};

#[derive(Parser)]
#[command(name = "tactile-loco", version, about = "Tactile replay, reward streams and gait metrics")]
struct Cli {
    /// JSON config; missing sections use defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Contact model, overrides the config
    #[arg(long, global = true, value_enum)]
    model: Option<Model>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Intersect,
    Filtered,
    Expanded,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate tactile frames for object-pose trajectories
    Tactile {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        /// Apply flip noise and latency (seeded by --seed)
        #[arg(long)]
        noisy: bool,
    },
    /// Per-tick reward breakdown from logged robot states
    Rewards {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Diagonal-pair air-time statistics from foot contacts
    Gait {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Scripted episode through the full pipeline
    Episode {
        #[arg(long, default_value_t = 2000)]
        ticks: usize,
    },
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(m) = cli.model {
        cfg.contact_model = match (m, cfg.contact_model) {
            (Model::Intersect, _) => ContactModel::Intersect,
            (Model::Expanded, _) => ContactModel::Expanded,
            (Model::Filtered, f @ ContactModel::Filtered { .. }) => f,
            (Model::Filtered, _) => ContactModel::filtered_default(),
        };
    }
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectory".into())
}

fn load_trajectory(path: &Path, cfg: &SimConfig) -> Result<tactile_loco::replay::Trajectory> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trajectory(BufReader::new(f), cfg).with_context(|| format!("reading {}", path.display()))
}

fn tactile(cfg: &SimConfig, path: &Path, out: &Path, seed: Option<u64>) -> Result<String> {
    let traj = load_trajectory(path, cfg)?;
    let name = stem(path);
    let replay = replay_tactile(&traj, cfg, &cfg.contact_model, seed);
    write_stream(create(out, &format!("{name}_tactile.csv"))?, &replay.frames, cfg.grid.rows, cfg.grid.cols)?;
    let mut line = format!("{}: {} frames ({})", path.display(), replay.frames.len(), cfg.contact_model.name());
    if traj.has_reference() {
        let report = fidelity_report(&traj, cfg)?;
        write_fidelity(create(out, &format!("{name}_fidelity.csv"))?, &report)?;
        for m in &report.models {
            line.push_str(&format!(", {} mean IoU {:.4}", m.model, m.mean_iou));
        }
    }
    Ok(line)
}

fn rewards(cfg: &SimConfig, path: &Path, out: &Path) -> Result<String> {
    let traj = load_trajectory(path, cfg)?;
    let rows = replay_rewards(&traj, cfg).with_context(|| format!("replaying {}", path.display()))?;
    write_rewards(create(out, &format!("{}_rewards.csv", stem(path)))?, &rows)?;
    let total: f64 = rows.iter().map(|r| r.breakdown.total).sum();
    let end = match rows.last().and_then(|r| r.termination.map(|t| (r.timestamp, t))) {
        Some((t, reason)) => format!(", terminated at {t} s ({})", reason.as_str()),
        None => String::new(),
    };
    Ok(format!("{}: {} ticks, return {total:.4}{end}", path.display(), rows.len()))
}

fn gait(cfg: &SimConfig, path: &Path, out: &Path) -> Result<String> {
    let traj = load_trajectory(path, cfg)?;
    let contacts = traj
        .contacts()
        .ok_or_else(|| ReplayError::Schema("gait metrics need foot contact columns c_fr, c_fl, c_rr, c_rl".into()))?;
    let Some(dt) = traj.dt() else {
        bail!(ReplayError::Schema("gait metrics need at least two rows".into()));
    };
    let report = gait_metrics(&contacts, dt);
    let name = stem(path);
    write_gait(create(out, &format!("{name}_gait.csv"))?, &report)?;
    write_gait_summary(create(out, &format!("{name}_gait_summary.csv"))?, &report)?;
    let flag = if report.insufficient_data { " (insufficient data)" } else { "" };
    Ok(format!(
        "{}: symmetry ratio {:.4}, stepping {:.3} Hz{flag}",
        path.display(),
        report.symmetry_ratio,
        report.stepping_frequency
    ))
}

fn episode(cfg: &SimConfig, seed: u64, ticks: usize, out: &Path) -> Result<String> {
    let run = run_episode(cfg, seed, ticks)?;
    write_trajectory(create(out, "trajectory.csv")?, &run.trajectory, cfg.grid.rows, cfg.grid.cols)?;
    write_stream(create(out, "tactile.csv")?, &run.frames, cfg.grid.rows, cfg.grid.cols)?;
    write_rewards(create(out, "rewards.csv")?, &run.rewards)?;
    write_gait(create(out, "gait.csv")?, &run.gait)?;
    write_gait_summary(create(out, "gait_summary.csv")?, &run.gait)?;
    let total: f64 = run.rewards.iter().map(|r| r.breakdown.total).sum();
    Ok(format!(
        "episode seed {seed}: {} ticks, return {total:.4}, gait symmetry {:.4}",
        run.rewards.len(),
        run.gait.symmetry_ratio
    ))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    let lines: Vec<Result<String>> = match &cli.cmd {
        Cmd::Tactile { trajectories, noisy } => {
            let seed = noisy.then_some(cli.seed);
            par_map(trajectories, |p| tactile(&cfg, p, out, seed))
        }
        Cmd::Rewards { trajectories } => par_map(trajectories, |p| rewards(&cfg, p, out)),
        Cmd::Gait { trajectories } => par_map(trajectories, |p| gait(&cfg, p, out)),
        Cmd::Episode { ticks } => vec![episode(&cfg, cli.seed, *ticks, out)],
    };
    for l in lines {
        println!("{}", l?);
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 3;
        }
        if let Some(r) = cause.downcast_ref::<ReplayError>() {
            return match r {
                ReplayError::Config(_) => 3,
                r if r.is_schema() => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
