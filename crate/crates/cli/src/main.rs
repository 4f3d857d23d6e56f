use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nmfbandit::harness::{
    build_instance, check_rip, run_experiment, run_sweep, summarize, write_instance,
    ExperimentConfig, InstanceSource, PolicyKind, Summary,
};
use nmfbandit::Error;

#[derive(Parser, Debug)]
#[command(name = "nmfbandit", version, about = "Latent contextual bandit experiments")]
struct Cli {
    /// Print the fully resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured instance as `<out>/instance.csv` plus metadata.
    Generate(Common),
    /// Run every configured policy on every seed.
    Run(Common),
    /// Grid over theta and m' for NMF-Bandit, baselines alongside.
    Sweep(Common),
    /// Empirical WStRIP frequencies of the instance's factors.
    CheckRip(Common),
    /// Rebuild summary.json from the trace files in `--out`.
    Summarize(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed replacing the configured list (instance seed for `generate`,
    /// subset seed for `check-rip`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to these policies (repeatable).
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<u64>,
    #[arg(long, env = "NMFBANDIT_THREADS")]
    threads: Option<usize>,
}

fn instance_seed(src: &mut InstanceSource) -> Option<&mut u64> {
    match src {
        InstanceSource::Simple { seed, .. } | InstanceSource::LowerBound { seed, .. } => Some(seed),
        InstanceSource::Theory(p) => Some(&mut p.seed),
        InstanceSource::File { .. } => None,
    }
}

fn resolve(cmd: &Command, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(t) = c.horizon {
        cfg.horizon = t;
    }
    if !c.policies.is_empty() {
        cfg.policies = c
            .policies
            .iter()
            .map(|p| PolicyKind::parse(p))
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = c.seed {
        match cmd {
            Command::Generate(_) => {
                if let Some(s) = instance_seed(&mut cfg.instance) {
                    *s = seed;
                }
            }
            Command::CheckRip(_) => cfg.rip.seed = seed,
            _ => cfg.seeds = vec![seed],
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &Summary) -> Result<(), Error> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let common = match &cli.command {
        Command::Generate(c)
        | Command::Run(c)
        | Command::Sweep(c)
        | Command::CheckRip(c)
        | Command::Summarize(c) => c,
    };
    let cfg = resolve(&cli.command, common)?;
    if cli.print_config {
        return emit(&cfg.to_json());
    }
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Generate(_) => {
            let inst = build_instance(&cfg)?;
            let path = cfg.out_dir.join("instance.csv");
            write_instance(&inst, &path)?;
            eprintln!(
                "wrote {} ({}x{}, gap {:.6})",
                path.display(),
                inst.num_contexts(),
                inst.num_arms(),
                inst.gap()
            );
        }
        Command::Run(_) => print_json(&run_experiment(&cfg)?)?,
        Command::Sweep(_) => {
            let summary = run_sweep(&cfg)?;
            print_json(&summary)?;
            if let Some((label, mean)) = summary.best_with_prefix("nmf_bandit") {
                eprintln!("best NMF-Bandit setting: {label} (mean final regret {mean:.3})");
            }
        }
        Command::CheckRip(_) => {
            let report = check_rip(&cfg)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(
                cfg.out_dir.join("rip.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            eprintln!(
                "l1 (W): failure frequency {:.3} at threshold {:.4}, 5th percentile {:.4}",
                report.l1_w.failure_frequency, report.l1_w.threshold, report.l1_w.empirical_rho
            );
            eprintln!(
                "l2 (A): failure frequency {:.3} at threshold {:.4}, 5th percentile {:.4}",
                report.l2_a.failure_frequency, report.l2_a.threshold, report.l2_a.empirical_rho
            );
        }
        Command::Summarize(_) => {
            let summary = summarize(&cfg.out_dir)?;
            summary.write(&cfg.out_dir.join("summary.json"))?;
            print_json(&summary)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
