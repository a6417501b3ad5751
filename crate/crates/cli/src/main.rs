use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idnc_game::equilibrium::analyze_stage;
use idnc_game::experiment::{
    emit_outputs, iteration_rng, iteration_setup, run_cde_from, run_sweep,
    ExperimentConfig, Sweep,
};
use idnc_game::game::{Channel, ChannelMode, Session, StageRecord};
use idnc_game::snapshot::Snapshot;
use idnc_game::verify::{run_all, CorpusConfig};
use idnc_game::{Error, Result};

#[derive(Parser)]
#[command(name = "idnc-game", version, about = "Cooperative IDNC recovery games: simulation and equilibrium analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one recovery episode and print its stage log.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Start from this snapshot instead of a random broadcast.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Closed-form analysis of the stage in a snapshot file.
    AnalyzeStage {
        snapshot: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Completion time against the number of players.
    SweepM {
        #[command(flatten)]
        common: Common,
        /// Comma-separated player counts.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Completion time against the player-to-base-station erasure ratio.
    SweepRatio {
        #[command(flatten)]
        common: Common,
        /// Comma-separated P/Q ratios.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Check the closed forms against exhaustive search on a random corpus.
    Verify {
        /// States per player count.
        #[arg(long, default_value_t = 200)]
        per_size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// States used for the potential identity.
        #[arg(long, default_value_t = 100)]
        potential_states: usize,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    players: Option<usize>,
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    p_mean: Option<f64>,
    #[arg(long)]
    q_mean: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    punishment: Option<usize>,
    #[arg(long, value_parser = ["1", "2"])]
    game: Option<String>,
    #[arg(long, value_parser = ["realized", "deterministic", "expected"])]
    channel_mode: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["on", "off"])]
    liveness: Option<String>,
    #[arg(long)]
    single_sweep: bool,
}

impl Common {
    fn resolve(&self, mut config: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        let flags: [(&str, Option<String>); 12] = [
            ("players", self.players.map(|v| v.to_string())),
            ("packets", self.packets.map(|v| v.to_string())),
            ("p-mean", self.p_mean.map(|v| v.to_string())),
            ("q-mean", self.q_mean.map(|v| v.to_string())),
            ("spread", self.spread.map(|v| v.to_string())),
            ("punishment", self.punishment.map(|v| v.to_string())),
            ("game", self.game.clone()),
            ("channel-mode", self.channel_mode.clone()),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("liveness", self.liveness.clone()),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        if self.single_sweep {
            config.single_sweep = true;
        }
        Ok(config)
    }
}

fn simulate(common: &Common, snapshot: Option<&PathBuf>) -> Result<()> {
    let config = common.resolve(ExperimentConfig::default())?;
    config.validate()?;
    let session = match snapshot {
        Some(path) => Snapshot::parse(&fs::read_to_string(path)?)?.session(config.session_config())?,
        None => {
            let (model, state) = iteration_setup(&config, 0, 0)?;
            Session::new(state, model, config.session_config())?
        }
    };
    let mut sink: Box<dyn Write> = match &config.out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut failure = None;
    let mut rng = iteration_rng(config.seed, 0, 0, 2);
    let (summary, _) = run_cde_from(session, &config.learning_config(), &mut rng, config.slot_cap(), |outcome, s| {
        if failure.is_none() {
            if let Err(e) = writeln!(sink, "{}", StageRecord::new(outcome, &s.ledger).to_line()) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    sink.flush()?;
    eprintln!(
        "slots {} mean_estimate {:.6} total_delay {} censored {}",
        summary.slots, summary.mean_estimate, summary.total_delay, summary.censored
    );
    Ok(())
}

fn analyze(path: &PathBuf, common: &Common) -> Result<()> {
    let config = ExperimentConfig {
        channel_mode: ChannelMode::Deterministic,
        ..ExperimentConfig::default()
    };
    let config = common.resolve(config)?;
    let channel = match config.channel_mode {
        ChannelMode::Deterministic => Channel::Deterministic,
        ChannelMode::Expected => Channel::Expected,
        ChannelMode::Realized => {
            return Err(Error::ChannelMode("stage analysis needs deterministic or expected".into()))
        }
    };
    let session = Snapshot::parse(&fs::read_to_string(path)?)?.session(config.session_config())?;
    let a = analyze_stage(&session, channel, config.game)?;
    let profiles = |set: &std::collections::BTreeSet<_>| {
        set.iter().map(|p: &idnc_game::game::ActionProfile| p.to_string()).collect::<Vec<_>>().join(" ")
    };
    println!("stage {}", a.stage);
    println!("critical {:?}", a.critical.ones().collect::<Vec<_>>());
    println!("helpers {:?}", a.helpers.ones().collect::<Vec<_>>());
    println!("y0 {:.9}", a.y.y0);
    println!("y {:?}", a.y.per_player);
    println!("cost_prev {:.9}", a.cost_prev);
    println!("equilibria {}", profiles(&a.equilibria));
    println!("pone {}", profiles(&a.pone));
    println!("poa {:.9}", a.poa);
    if let Some(lb) = a.poa_lower_bound {
        println!("poa_lower_bound {lb:.9}");
    }
    if let (Some(e), Some(p)) = (&a.published_equilibria, a.published_poa) {
        println!("published_equilibria {}", profiles(e));
        println!("published_poa {p:.9}");
    }
    let csv = format!("{}\n{}\n", idnc_game::equilibrium::StageAnalysis::CSV_HEADER, a.csv_row());
    match &config.out {
        Some(out) => fs::write(out, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn sweep(common: &Common, defaults: (Sweep, ExperimentConfig), grid: Option<&Vec<f64>>, name: &str) -> Result<()> {
    let (mut sweep, base) = defaults;
    if let Some(grid) = grid {
        sweep.grid = grid.clone();
    }
    let config = common.resolve(base)?;
    config.validate()?;
    let table = run_sweep(&sweep, &config)?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    let dat = emit_outputs(&table, &out)?;
    print!("{}", table.to_csv());
    eprintln!("wrote {} and {}", out.display(), dat.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Simulate { common, snapshot } => simulate(common, snapshot.as_ref())?,
        Command::AnalyzeStage { snapshot, common } => analyze(snapshot, common)?,
        Command::SweepM { common, grid } => sweep(common, Sweep::players_default(), grid.as_ref(), "sweep-m")?,
        Command::SweepRatio { common, grid } => {
            sweep(common, Sweep::ratio_default(), grid.as_ref(), "sweep-ratio")?
        }
        Command::Verify {
            per_size,
            seed,
            potential_states,
        } => {
            let corpus = CorpusConfig {
                per_size: *per_size,
                seed: *seed,
                ..CorpusConfig::default()
            };
            let reports = run_all(&corpus, *potential_states)?;
            for r in &reports {
                println!("{r}");
                for s in &r.samples {
                    println!("    {s}");
                }
            }
            return Ok(reports.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
