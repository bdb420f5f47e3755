use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use itrack_core::trajopt::TrajOptParams;
use itrack_sim::trace::{self, Summary};
use itrack_sim::{run_scenario_with, RunOutput, Scenario, ScenarioConfig, SimError, SimResult};

#[derive(Parser)]
#[command(name = "itrack", version, about = "Intention-aware tracking planner simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// `on` runs the intention-blind ablation.
        #[arg(long, value_enum)]
        ablation: Option<Switch>,
        /// Directory for trace.csv and summary.txt; without it the summary goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-iteration optimizer logs and report per-replan timing.
        #[arg(long)]
        verbose: bool,
    },
    /// Run a scenario at several target speeds, full planner and ablation, R seeds each.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        speeds: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        repeats: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a trace back.
    Replay {
        trace: PathBuf,
        /// Print the summary metrics derivable from the trace.
        #[arg(long)]
        summary: bool,
    },
}

fn io_err(path: &Path, e: std::io::Error) -> SimError {
    SimError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> SimResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_run(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput, verbose: bool) -> SimResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write(&dir.join("trace.csv"), &trace::write_csv(&out.rows))?;
    write(&dir.join("summary.txt"), &out.summary.to_text())?;
    write(&dir.join("config.toml"), &cfg.to_toml())?;
    if verbose {
        let mut text = String::from("replan_t,iter,cost,grad_norm,step\n");
        for log in &out.opt_logs {
            for r in &log.records {
                text.push_str(&format!("{:.2},{},{:.9e},{:.6e},{:.6e}\n", log.t, r.iter, r.cost, r.grad_norm, r.step));
            }
        }
        write(&dir.join("opt_trace.csv"), &text)?;
    }
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, ablation: Option<Switch>, out: Option<&Path>, verbose: bool) -> SimResult<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(a) = ablation {
        cfg.blind = a == Switch::On;
    }
    let sc = Scenario::build(cfg.clone())?;
    let output = run_scenario_with(&sc, verbose)?;
    if verbose {
        for (k, t) in output.plan_times.iter().enumerate() {
            eprintln!(
                "replan {k}: prediction {:.2} ms, corridor {:.2} ms, optimization {:.2} ms",
                t.prediction * 1e3,
                t.corridor * 1e3,
                t.optimization * 1e3
            );
        }
    }
    match out {
        Some(dir) => write_run(dir, &cfg, &output, verbose),
        None => {
            print!("{}", output.summary.to_text());
            Ok(())
        }
    }
}

struct SweepJob {
    speed: f64,
    repeat: u64,
    blind: bool,
    cfg: ScenarioConfig,
}

fn sweep(config: &Path, speeds: &[f64], repeats: u64, out: &Path) -> SimResult<()> {
    let base = ScenarioConfig::load(config)?;
    if speeds.iter().any(|v| !(*v > 0.0)) {
        return Err(SimError::Config("speeds must be > 0".into()));
    }
    let mut jobs = Vec::new();
    for &speed in speeds {
        for repeat in 0..repeats {
            for blind in [false, true] {
                let mut cfg = base.clone();
                // Same distance covered at every speed.
                cfg.duration = base.duration * base.target.speed / speed;
                cfg.target.speed = speed;
                cfg.seed = base.seed + repeat;
                cfg.blind = blind;
                jobs.push(SweepJob { speed, repeat, blind, cfg });
            }
        }
    }

    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(jobs.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<SimResult<Summary>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        let dir = out.join(format!(
                            "v{:.2}_r{}_{}",
                            job.speed,
                            job.repeat,
                            if job.blind { "blind" } else { "aware" }
                        ));
                        let res = Scenario::build(job.cfg.clone())
                            .and_then(|sc| run_scenario_with(&sc, false))
                            .and_then(|o| write_run(&dir, &job.cfg, &o, false).map(|_| o.summary));
                        done.push((i, res));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });

    let mut table = String::from(
        "speed,repeat,seed,mode,occlusion_fraction,occluded_time,min_distance,mean_distance,steady_in_band,failed_replans,mean_planning_ms,status\n",
    );
    let mut failures = 0;
    for (job, res) in jobs.iter().zip(results) {
        let mode = if job.blind { "blind" } else { "aware" };
        match res.expect("every job ran") {
            Ok(s) => table.push_str(&format!(
                "{:.2},{},{},{mode},{:.5},{:.2},{:.4},{:.4},{:.4},{},{:.3},ok\n",
                job.speed,
                job.repeat,
                job.cfg.seed,
                s.occlusion_fraction,
                s.occluded_time,
                s.min_distance,
                s.mean_distance,
                s.steady_in_band,
                s.failed_replans,
                s.mean_planning_ms.unwrap_or(f64::NAN)
            )),
            Err(e) => {
                failures += 1;
                eprintln!("speed {} repeat {} {mode}: {e}", job.speed, job.repeat);
                table.push_str(&format!("{:.2},{},{},{mode},,,,,,,,error\n", job.speed, job.repeat, job.cfg.seed));
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write(&out.join("sweep.csv"), &table)?;
    if failures > 0 {
        return Err(SimError::Collision(format!("{failures} sweep runs aborted")));
    }
    Ok(())
}

fn replay(path: &Path, summary: bool) -> SimResult<()> {
    let rows = trace::read_csv(path)?;
    if summary {
        let dt = match rows.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        };
        let p = TrajOptParams::default();
        print!("{}", Summary::from_rows(&rows, dt, (p.d0 - p.d_tau, p.d0 + p.d_tau)).to_text());
    } else {
        println!("rows: {}", rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { config, seed, ablation, out, verbose } => run(config, *seed, *ablation, out.as_deref(), *verbose),
        Command::Sweep { config, speeds, repeats, out } => sweep(config, speeds, *repeats, out),
        Command::Replay { trace, summary } => replay(trace, *summary),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
