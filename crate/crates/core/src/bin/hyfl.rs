use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyfl::attacks::AttackKind;
use hyfl::data::{generate, write_dataset, Sampling};
use hyfl::federation::RoundSchedule;
use hyfl::harness::{run_attack, run_preset, ExperimentConfig, Preset, Session, Setting};
use hyfl::models::{ClassifierConfig, ClassifierKind};
use hyfl::transport::RouteMode;

#[derive(Parser)]
#[command(name = "hyfl", version, about = "Hybrid federated learning experiments on synthetic payment data")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags override fields of the `--config` file (or of the defaults).
#[derive(Args)]
struct Overrides {
    /// JSON experiment config
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for both the data generator and the experiment
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    noise_var: Option<f64>,
    /// Number of account clients
    #[arg(long, global = true)]
    clients: Option<usize>,
    /// Local epochs per round
    #[arg(long, global = true)]
    interval: Option<usize>,
    /// Communication rounds
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// gbdt, logreg, svm or mlp
    #[arg(long, global = true, value_parser = parse_kind)]
    classifier: Option<ClassifierKind>,
    /// none, under, over, smote or reweight
    #[arg(long, global = true, value_parser = parse_sampling)]
    sampling: Option<Sampling>,
    /// server or p2p
    #[arg(long, global = true, value_parser = parse_route)]
    route: Option<RouteMode>,
    /// centralized, vanilla or hyfl
    #[arg(long, global = true, value_parser = parse_setting)]
    setting: Option<Setting>,
    /// Share of the training split to use
    #[arg(long, global = true)]
    fraction: Option<f64>,
    /// Training rows to generate
    #[arg(long, global = true)]
    n_train: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the frame transcript of a `run` as JSON lines
    #[arg(long, global = true)]
    dump_transcript: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into --out
    GenData,
    /// Run one experiment
    Run,
    /// Sweep one of the table1..table5, fig4 or attacks grids
    Preset {
        #[arg(value_parser = parse_preset)]
        name: Preset,
    },
    /// Run one attack scenario
    Attack {
        #[arg(value_parser = parse_attack)]
        kind: AttackKind,
    },
}

fn parse_kind(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: hyfl::Error| e.to_string())
}

fn parse_route(s: &str) -> Result<RouteMode, String> {
    s.parse().map_err(|e: hyfl::Error| e.to_string())
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse().map_err(|e: hyfl::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: hyfl::Error| e.to_string())
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    s.parse().map_err(|e: hyfl::Error| e.to_string())
}

fn parse_sampling(s: &str) -> Result<Sampling, String> {
    Ok(match s {
        "none" => Sampling::None,
        "under" => Sampling::RandomUnder,
        "over" => Sampling::RandomOver,
        "smote" => Sampling::Smote,
        "reweight" => Sampling::Reweight,
        other => return Err(format!("unknown sampling {other:?}")),
    })
}

impl Overrides {
    fn config(&self) -> hyfl::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
            c.data.seed = s;
        }
        if let Some(v) = self.noise_var {
            c.noise_var = v;
        }
        if let Some(m) = self.clients {
            c.clients = m;
        }
        if self.interval.is_some() || self.rounds.is_some() {
            c.schedule = RoundSchedule::new(
                self.interval.unwrap_or(c.schedule.interval),
                self.rounds.unwrap_or(c.schedule.rounds),
            )?;
        }
        if let Some(k) = self.classifier {
            c.classifier = ClassifierConfig::for_kind(k);
        }
        if let Some(s) = self.sampling {
            c.sampling = s;
        }
        if let Some(r) = self.route {
            c.route = r;
        }
        if let Some(s) = self.setting {
            c.setting = s;
        }
        if let Some(f) = self.fraction {
            c.data_fraction = f;
        }
        if let Some(n) = self.n_train {
            c.data.n_train = n;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> hyfl::Result<()> {
    let o = &cli.overrides;
    let config = o.config()?;
    match cli.command {
        Command::GenData => {
            let dir = o.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            let ds = generate(&config.data)?;
            write_dataset(&ds, &dir)?;
            eprintln!(
                "wrote {} transactions and {} accounts to {}",
                ds.transactions.len(),
                ds.accounts.len(),
                dir.display()
            );
        }
        Command::Run => {
            let mut session = Session::prepare(&config)?;
            let report = session.evaluate(&config.eval_spec())?.report;
            if let Some(path) = &o.dump_transcript {
                match session.federation() {
                    Some(f) => {
                        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
                        f.transcript().write_jsonl(&mut w)?;
                    }
                    None => eprintln!("centralized run: no transcript to dump"),
                }
            }
            if let Some(dir) = &o.out {
                report.write_to(dir)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Preset { name } => {
            let report = run_preset(name, &config)?;
            if let Some(dir) = &o.out {
                report.write_to(dir)?;
            }
            print!("{}", report.to_csv()?);
        }
        Command::Attack { kind } => {
            let report = run_attack(kind, &config)?;
            let json = report.to_json()?;
            if let Some(dir) = &o.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("attack_{kind}.json")), &json)?;
            }
            println!("{json}");
        }
    }
    Ok(())
}
