use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmwave_ho::harness::checks;
use mmwave_ho::harness::csv_io::{self, SummaryRow};
use mmwave_ho::harness::experiment::{self, PolicySidecar, TrainedPolicy};
use mmwave_ho::harness::{PolicyKind, SimConfig, World};
use mmwave_ho::learning::{read_qtable, write_qtable};
use mmwave_ho::{Error, Result};

#[derive(Parser)]
#[command(name = "mmwave-ho", version, about = "Beamforming and handover simulator for mobile mmWave links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the backup-BS table and write it to a policy file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ours")]
        policy: PolicyKind,
        #[arg(long)]
        episodes: Option<u64>,
        /// Skip tuning and use this skeleton-distance threshold.
        #[arg(long)]
        t_d: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run evaluation replications and write the metrics CSV.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Policies to run; all of them when omitted.
        #[arg(long, value_delimiter = ',')]
        policy: Vec<PolicyKind>,
        /// Policy file written by `train`; trained in-process when omitted.
        #[arg(long)]
        policy_file: Option<PathBuf>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        t_d: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
        /// Summary CSV; also writes `<stem>.profile.csv` and `<stem>.histogram.csv` beside it.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run full experiments over a grid of densities or handover thresholds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', conflicts_with = "t_ho")]
        density: Vec<f64>,
        /// Handover threshold values, dB.
        #[arg(long, value_delimiter = ',')]
        t_ho: Vec<f64>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Tune the skeleton-distance threshold and print it.
    TuneThreshold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Run the built-in invariant and oracle checks.
    Validate,
    /// Print the resolved scenario as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn load(config: Option<&Path>, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = match config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    Ok(cfg)
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p)?))
}

fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn train(common: Common, policy: PolicyKind, episodes: Option<u64>, t_d: Option<f64>, out: &Path) -> Result<()> {
    let mut cfg = load(common.config.as_deref(), common.seed)?;
    if let Some(n) = episodes {
        cfg.learning.episodes = n;
    }
    if t_d.is_some() {
        cfg.skeleton.t_d = t_d;
    }
    cfg.validate()?;
    let world = World::build(&cfg)?;
    let t_d = experiment::resolve_t_d(&world, &cfg)?;
    let (trained, returns) = experiment::train(&world, &cfg, policy, t_d)?;
    let mut w = create(out)?;
    write_qtable(&mut w, &trained.space, &trained.q)?;
    w.flush()?;
    let meta = PolicySidecar { t_d, seed: cfg.experiment.seed, episodes: cfg.learning.episodes };
    std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&meta)?)?;
    let tail = &returns[returns.len().saturating_sub(1000)..];
    let avg = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    println!("trained {} episodes, T_D = {t_d}, mean return of last {} = {:.4} Gbps", returns.len(), tail.len(), avg * 1e-9);
    Ok(())
}

fn load_policy(path: &Path) -> Result<TrainedPolicy> {
    let (space, q) = read_qtable(BufReader::new(File::open(path)?))?;
    let meta: PolicySidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    Ok(TrainedPolicy { space, q, t_d: meta.t_d })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    config: Option<&Path>,
    seed: u64,
    policies: Vec<PolicyKind>,
    policy_file: Option<&Path>,
    replications: Option<u64>,
    t_d: Option<f64>,
    out: &Path,
    summary: Option<&Path>,
) -> Result<()> {
    let mut cfg = load(config, Some(seed))?;
    if let Some(r) = replications {
        cfg.experiment.replications = r;
    }
    if !policies.is_empty() {
        cfg.experiment.policies = policies;
    }
    cfg.validate()?;
    let world = World::build(&cfg)?;
    let trained = policy_file.map(load_policy).transpose()?;
    let t_d = match (t_d, &trained) {
        (Some(t), _) => t,
        (None, Some(p)) => p.t_d,
        (None, None) => experiment::resolve_t_d(&world, &cfg)?,
    };
    let mut own: Option<TrainedPolicy> = None;
    let mut w = create(out)?;
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for &policy in &cfg.experiment.policies {
        let table = if policy.needs_q_table() {
            match &trained {
                Some(t) => Some(t),
                None => {
                    if own.is_none() {
                        eprintln!("no policy file given, training {} episodes", cfg.learning.episodes);
                        own = Some(experiment::train(&world, &cfg, PolicyKind::Ours, t_d)?.0);
                    }
                    own.as_ref()
                }
            }
        } else {
            None
        };
        let run = experiment::evaluate(&world, &cfg, policy, table, t_d, cfg.experiment.replications)?;
        rows.extend(csv_io::metrics_rows(&run));
        summaries.push(experiment::summarize(&run, cfg.skeleton.budget.u_max)?);
    }
    csv_io::write_metrics(&mut w, rows)?;
    w.flush()?;
    for s in &summaries {
        println!(
            "{:<20} R_traj {:>8.3} Gbps (sd {:.3})  handovers mean {:.2} median {}  U {:.2}",
            s.policy.key(),
            s.mean_r_traj * 1e-9,
            s.std_r_traj * 1e-9,
            s.mean_handovers,
            s.median_handovers,
            s.mean_renewals
        );
    }
    if let Some(p) = summary {
        csv_io::write_summary(create(p)?, summaries.iter().map(SummaryRow::from))?;
        csv_io::write_profile(create(&sibling(p, "profile"))?, &summaries)?;
        csv_io::write_histogram(create(&sibling(p, "histogram"))?, &summaries)?;
    }
    Ok(())
}

fn sweep(
    common: Common,
    density: Vec<f64>,
    t_ho: Vec<f64>,
    replications: Option<u64>,
    episodes: Option<u64>,
    out: &Path,
) -> Result<()> {
    let base = load(common.config.as_deref(), common.seed)?;
    let (name, values) = match (density.is_empty(), t_ho.is_empty()) {
        (false, true) => ("density", density),
        (true, false) => ("t_ho_db", t_ho),
        _ => return Err(Error::InvalidConfig("sweep needs exactly one of --density or --t-ho".into())),
    };
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["parameter", "value", "policy", "mean_Rtraj_bps", "std_Rtraj_bps", "mean_handovers"])?;
    for v in values {
        let mut cfg = base.clone();
        if name == "density" {
            cfg.scenario.density = v;
            cfg.scenario.base_stations.clear();
        } else {
            cfg.handover.boundaries_db = vec![v];
            cfg.handover.t_ho_level = 1;
        }
        if let Some(r) = replications {
            cfg.experiment.replications = r;
        }
        if let Some(n) = episodes {
            cfg.learning.episodes = n;
        }
        cfg.validate()?;
        let outcome = experiment::run_experiment(&cfg)?;
        println!("{name} = {v} (T_D = {})", outcome.t_d);
        for s in &outcome.summaries {
            println!("  {:<20} {:>8.3} Gbps  handovers {:.2}", s.policy.key(), s.mean_r_traj * 1e-9, s.mean_handovers);
            w.write_record([
                name.to_string(),
                v.to_string(),
                s.policy.key().to_string(),
                s.mean_r_traj.to_string(),
                s.std_r_traj.to_string(),
                s.mean_handovers.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn tune(common: Common, episodes: Option<u64>) -> Result<()> {
    let mut cfg = load(common.config.as_deref(), common.seed)?;
    if let Some(n) = episodes {
        cfg.skeleton.tune_episodes = n;
    }
    cfg.validate()?;
    let world = World::build(&cfg)?;
    let o = experiment::tune_threshold(&world, &cfg)?;
    println!("T_D* = {}", o.t_d);
    println!("mean trajectory rate = {:.4} Gbps", o.objective * 1e-9);
    println!("Pr{{U > {}}} = {}", cfg.skeleton.budget.u_max, o.exceed_prob);
    println!("evaluations = {}", o.evaluations);
    Ok(())
}

fn validate() -> Result<bool> {
    let results = checks::run_all();
    for c in &results {
        println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(results.iter().all(|c| c.passed))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { common, policy, episodes, t_d, out } => train(common, policy, episodes, t_d, &out)?,
        Command::Evaluate { config, seed, policy, policy_file, replications, t_d, out, summary } => evaluate(
            config.as_deref(),
            seed,
            policy,
            policy_file.as_deref(),
            replications,
            t_d,
            &out,
            summary.as_deref(),
        )?,
        Command::Sweep { common, density, t_ho, replications, episodes, out } => {
            sweep(common, density, t_ho, replications, episodes, &out)?
        }
        Command::TuneThreshold { common, episodes } => tune(common, episodes)?,
        Command::Validate => return validate(),
        Command::Config { common } => print!("{}", load(common.config.as_deref(), common.seed)?.to_toml_string()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
