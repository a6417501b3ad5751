//! Monte-Carlo sweeps comparing cooperative recovery against the
//! base-station baseline.
//!
//! Every iteration owns a seed derived from the master seed, the grid point
//! and the iteration index, split into independent streams for the erasure
//! draw, the initial broadcast and the two recovery channels. The
//! cooperative and baseline runs of one iteration start from the same
//! initial state, and results never depend on thread scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{advance_stage, ChannelMode, GameMode, Session, SessionConfig, StageOutcome};
use crate::learning::{resolve_stage_action, LearningConfig};
use crate::pmp::run_pmp_from;
use crate::session::{run_init_phase, ErasureModel, SideInformationState, DEFAULT_RETRANSMISSION_CAP};

const STREAM_ERASURES: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_CDE: u64 = 2;
const STREAM_PMP: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub players: usize,
    pub packets: usize,
    /// Mean base-station erasure.
    pub q_mean: f64,
    /// Mean player-to-player erasure.
    pub p_mean: f64,
    /// Half-width of the uniform law around each mean.
    pub spread: f64,
    pub punishment: usize,
    pub game: GameMode,
    /// Channel used by the best-response sweeps.
    pub channel_mode: ChannelMode,
    pub iterations: usize,
    pub seed: u64,
    pub liveness: bool,
    pub single_sweep: bool,
    /// Episodes are cut off after this many slots per packet.
    pub slot_cap_per_packet: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            players: 20,
            packets: 30,
            q_mean: 0.2,
            p_mean: 0.1,
            spread: 0.1,
            punishment: 2,
            game: GameMode::Game2,
            channel_mode: ChannelMode::Expected,
            iterations: 500,
            seed: 1,
            liveness: true,
            single_sweep: false,
            slot_cap_per_packet: 100,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

pub fn parse_game(value: &str) -> Result<GameMode> {
    match value.trim() {
        "1" => Ok(GameMode::Game1),
        "2" => Ok(GameMode::Game2),
        other => Err(Error::Config(format!("game must be 1 or 2, got {other:?}"))),
    }
}

pub fn parse_channel_mode(value: &str) -> Result<ChannelMode> {
    match value.trim() {
        "realized" => Ok(ChannelMode::Realized),
        "deterministic" => Ok(ChannelMode::Deterministic),
        "expected" => Ok(ChannelMode::Expected),
        other => Err(Error::Config(format!("unknown channel mode {other:?}"))),
    }
}

pub fn parse_switch(value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("expected on or off, got {other:?}"))),
    }
}

impl ExperimentConfig {
    /// Sets one option by its flag name, with or without leading dashes;
    /// underscores and dashes are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        match key.as_str() {
            "players" => self.players = parse(&key, value)?,
            "packets" => self.packets = parse(&key, value)?,
            "q-mean" => self.q_mean = parse(&key, value)?,
            "p-mean" => self.p_mean = parse(&key, value)?,
            "spread" => self.spread = parse(&key, value)?,
            "punishment" => self.punishment = parse(&key, value)?,
            "game" => self.game = parse_game(value)?,
            "channel-mode" => self.channel_mode = parse_channel_mode(value)?,
            "iterations" => self.iterations = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "liveness" => self.liveness = parse_switch(value)?,
            "single-sweep" => self.single_sweep = parse_switch(value)?,
            "slot-cap" => self.slot_cap_per_packet = parse(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are
    /// skipped.
    pub fn apply_file_contents(&mut self, contents: &str) -> Result<()> {
        for (n, line) in contents.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected key=value".into(),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_file_contents(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.players == 0 {
            return Err(Error::Config("players must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        for (what, v) in [("q-mean", self.q_mean), ("p-mean", self.p_mean)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{what} must lie in [0, 1), got {v}")));
            }
        }
        if self.spread.is_nan() || self.spread < 0.0 {
            return Err(Error::Config(format!("spread must be non-negative, got {}", self.spread)));
        }
        if self.channel_mode == ChannelMode::Realized {
            return Err(Error::ChannelMode(
                "the sweeps choose actions before sampling; use deterministic or expected".into(),
            ));
        }
        Ok(())
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            game: self.game,
            punishment: self.punishment,
            ..SessionConfig::default()
        }
    }

    pub fn learning_config(&self) -> LearningConfig {
        LearningConfig {
            liveness: self.liveness,
            single_sweep: self.single_sweep,
            channel: self.channel_mode,
            order: None,
        }
    }

    pub fn slot_cap(&self) -> u64 {
        self.slot_cap_per_packet * self.packets as u64
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one purpose of one iteration at one grid point.
pub fn iteration_rng(seed: u64, point: u64, iteration: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ point) ^ iteration));
    rng.set_stream(stream);
    rng
}

/// Uniform law on `[max(0.001, mean - spread), min(0.99, mean + spread)]`.
pub fn erasure_law(mean: f64, spread: f64) -> Result<Uniform<f64>> {
    let lo = (mean - spread).max(0.001);
    let hi = (mean + spread).min(0.99);
    if lo > hi {
        return Err(Error::Config(format!(
            "erasure mean {mean} with spread {spread} leaves an empty interval"
        )));
    }
    Uniform::new_inclusive(lo, hi).map_err(|e| Error::Config(e.to_string()))
}

/// Exact mean of [`erasure_law`].
pub fn erasure_law_mean(mean: f64, spread: f64) -> f64 {
    ((mean - spread).max(0.001) + (mean + spread).min(0.99)) / 2.0
}

/// Draws every off-diagonal link and every base-station link independently
/// around the configured means.
pub fn sample_erasure_model<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<ErasureModel> {
    let m = config.players;
    let p_law = erasure_law(config.p_mean, config.spread)?;
    let q_law = erasure_law(config.q_mean, config.spread)?;
    let player = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 0.0 } else { p_law.sample(rng) })
                .collect()
        })
        .collect();
    let bs = (0..m).map(|_| q_law.sample(rng)).collect();
    ErasureModel::new(player, bs)
}

/// Outcome of one recovery episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    /// Slots until every player finished, or the cap when censored.
    pub slots: u64,
    /// Mean completion estimate over players at the end.
    pub mean_estimate: f64,
    pub total_delay: u64,
    pub censored: bool,
}

/// Plays the cooperative game from `session` until completion or
/// `slot_cap`, calling `on_stage` after every stage.
pub fn run_cde_from<R: Rng + ?Sized>(
    mut session: Session,
    learning: &LearningConfig,
    rng: &mut R,
    slot_cap: u64,
    mut on_stage: impl FnMut(&StageOutcome, &Session),
) -> Result<(EpisodeSummary, Session)> {
    let mut slots = 0;
    while !session.is_complete() && slots < slot_cap {
        let profile = resolve_stage_action(&session, learning)?.profile;
        let outcome = advance_stage(&mut session, &profile, rng)?;
        on_stage(&outcome, &session);
        slots += 1;
    }
    let summary = EpisodeSummary {
        slots,
        mean_estimate: session.completion().mean(),
        total_delay: session.ledger.cumulative_delay.iter().sum(),
        censored: !session.is_complete(),
    };
    Ok((summary, session))
}

/// Erasure model and initial state of one iteration.
pub fn iteration_setup(
    config: &ExperimentConfig,
    point: u64,
    iteration: u64,
) -> Result<(ErasureModel, SideInformationState)> {
    let model = sample_erasure_model(config, &mut iteration_rng(config.seed, point, iteration, STREAM_ERASURES))?;
    let state = run_init_phase(
        config.players,
        config.packets,
        model.bs_erasures(),
        &mut iteration_rng(config.seed, point, iteration, STREAM_INIT),
        DEFAULT_RETRANSMISSION_CAP,
    )?;
    Ok((model, state))
}

/// One cooperative episode of the configured experiment.
pub fn run_cde_episode(config: &ExperimentConfig, point: u64, iteration: u64) -> Result<EpisodeSummary> {
    let (model, state) = iteration_setup(config, point, iteration)?;
    let session = Session::new(state, model, config.session_config())?;
    let mut rng = iteration_rng(config.seed, point, iteration, STREAM_CDE);
    Ok(run_cde_from(session, &config.learning_config(), &mut rng, config.slot_cap(), |_, _| {})?.0)
}

/// Cooperative and baseline episodes of one iteration, from a shared start.
pub fn run_paired(config: &ExperimentConfig, point: u64, iteration: u64) -> Result<(EpisodeSummary, EpisodeSummary)> {
    let (model, state) = iteration_setup(config, point, iteration)?;
    let bs = model.bs_erasures().to_vec();
    let mut pmp_rng = iteration_rng(config.seed, point, iteration, STREAM_PMP);
    let pmp = run_pmp_from(state.clone(), &bs, &mut pmp_rng, config.slot_cap())?;
    let session = Session::new(state, model, config.session_config())?;
    let mut cde_rng = iteration_rng(config.seed, point, iteration, STREAM_CDE);
    let (cde, _) = run_cde_from(session, &config.learning_config(), &mut cde_rng, config.slot_cap(), |_, _| {})?;
    Ok((cde, pmp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Number of players.
    Players,
    /// Ratio of the player-to-player mean erasure to the base-station mean.
    Ratio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

impl Sweep {
    /// Players 20 to 60 with N = 30, Q = 0.2, P = 0.1.
    pub fn players_default() -> (Self, ExperimentConfig) {
        (
            Sweep {
                variable: SweepVariable::Players,
                grid: vec![20.0, 30.0, 40.0, 50.0, 60.0],
            },
            ExperimentConfig::default(),
        )
    }

    /// P/Q from 0.1 to 1.2 with M = 60, N = 30, Q = 0.3.
    pub fn ratio_default() -> (Self, ExperimentConfig) {
        (
            Sweep {
                variable: SweepVariable::Ratio,
                grid: vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.2],
            },
            ExperimentConfig {
                players: 60,
                q_mean: 0.3,
                ..ExperimentConfig::default()
            },
        )
    }

    /// The configuration at one grid value.
    pub fn configure(&self, base: &ExperimentConfig, x: f64) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        match self.variable {
            SweepVariable::Players => {
                if x < 1.0 || x.fract() != 0.0 {
                    return Err(Error::Config(format!("player count must be a positive integer, got {x}")));
                }
                c.players = x as usize;
            }
            SweepVariable::Ratio => c.p_mean = x * base.q_mean,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Cde,
    Pmp,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cde => "cde",
            Scheme::Pmp => "pmp",
        }
    }
}

/// Aggregate of one scheme at one grid point. Means and the standard error
/// cover uncensored episodes only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub x: f64,
    pub scheme: Scheme,
    pub mean_t: f64,
    pub stderr: f64,
    pub mean_estimate: f64,
    pub censored: usize,
    pub iterations: usize,
}

impl ResultRow {
    pub fn aggregate(x: f64, scheme: Scheme, episodes: &[EpisodeSummary]) -> Self {
        let kept: Vec<&EpisodeSummary> = episodes.iter().filter(|e| !e.censored).collect();
        let n = kept.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeSummary) -> f64| kept.iter().map(|e| f(e)).sum::<f64>() / n;
        let mean_t = mean(&|e| e.slots as f64);
        let stderr = if kept.len() < 2 {
            0.0
        } else {
            let var = kept.iter().map(|e| (e.slots as f64 - mean_t).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        ResultRow {
            x,
            scheme,
            mean_t,
            stderr,
            mean_estimate: mean(&|e| e.mean_estimate),
            censored: episodes.len() - kept.len(),
            iterations: episodes.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const CSV_HEADER: &str = "x,scheme,mean_T,stderr,mean_estimate,censored,iterations";

impl ResultTable {
    pub fn row(&self, x: f64, scheme: Scheme) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.x == x && r.scheme == scheme)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{}",
                r.x,
                r.scheme.name(),
                r.mean_t,
                r.stderr,
                r.mean_estimate,
                r.censored,
                r.iterations
            )
            .unwrap();
        }
        out
    }

    /// Whitespace-separated columns, one line per grid point.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::from("# x cde_mean_T cde_stderr pmp_mean_T pmp_stderr\n");
        let mut xs: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !xs.contains(&r.x) {
                xs.push(r.x);
            }
        }
        let cell = |r: Option<&ResultRow>| match r {
            Some(r) => format!("{:.6} {:.6}", r.mean_t, r.stderr),
            None => "? ?".to_string(),
        };
        for x in xs {
            writeln!(out, "{} {} {}", x, cell(self.row(x, Scheme::Cde)), cell(self.row(x, Scheme::Pmp))).unwrap();
        }
        out
    }
}

/// Runs every grid point with paired episodes, iterations in parallel.
pub fn run_sweep(sweep: &Sweep, base: &ExperimentConfig) -> Result<ResultTable> {
    if sweep.grid.is_empty() {
        return Err(Error::Config("the sweep grid is empty".into()));
    }
    let mut table = ResultTable::default();
    for (point, &x) in sweep.grid.iter().enumerate() {
        let config = sweep.configure(base, x)?;
        let pairs = (0..config.iterations as u64)
            .into_par_iter()
            .map(|it| run_paired(&config, point as u64, it))
            .collect::<Result<Vec<_>>>()?;
        let (cde, pmp): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        table.rows.push(ResultRow::aggregate(x, Scheme::Cde, &cde));
        table.rows.push(ResultRow::aggregate(x, Scheme::Pmp, &pmp));
    }
    Ok(table)
}

/// Writes the CSV to `path` and the gnuplot data next to it with a `.dat`
/// extension. Returns the data-file path.
pub fn emit_outputs(table: &ResultTable, path: &Path) -> Result<PathBuf> {
    fs::write(path, table.to_csv())?;
    let dat = path.with_extension("dat");
    fs::write(&dat, table.to_gnuplot())?;
    Ok(dat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_is_constant() {
        let config = ExperimentConfig {
            players: 4,
            spread: 0.0,
            ..ExperimentConfig::default()
        };
        let m = sample_erasure_model(&config, &mut iteration_rng(1, 0, 0, 0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.erasure(i, j), if i == j { 0.0 } else { 0.1 });
            }
            assert_eq!(m.bs_erasure(i), 0.2);
        }
    }

    #[test]
    fn clipped_law_mean() {
        let law = erasure_law(0.1, 0.1).unwrap();
        let mut rng = iteration_rng(5, 0, 0, 0);
        let n = 10_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        let exact = erasure_law_mean(0.1, 0.1);
        assert!((exact - 0.1005).abs() < 1e-12);
        assert!((mean - exact).abs() < 0.005);
        assert!(erasure_law(0.0, 0.0).is_err());
    }

    #[test]
    fn identical_seeds_identical_models() {
        let config = ExperimentConfig::default();
        let a = sample_erasure_model(&config, &mut iteration_rng(7, 1, 3, 0)).unwrap();
        let b = sample_erasure_model(&config, &mut iteration_rng(7, 1, 3, 0)).unwrap();
        assert_eq!(a, b);
        let c = sample_erasure_model(&config, &mut iteration_rng(7, 1, 4, 0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nothing_to_recover() {
        let config = ExperimentConfig {
            q_mean: 0.0,
            spread: 0.0,
            ..ExperimentConfig::default()
        };
        // the law's floor of 0.001 exceeds its ceiling
        assert!(run_cde_episode(&config, 0, 0).is_err());
        let state = SideInformationState::complete(3, 4);
        let session = Session::new(state, ErasureModel::uniform(3, 0.1, 0.0).unwrap(), SessionConfig::game2()).unwrap();
        let (r, _) = run_cde_from(session, &LearningConfig::default(), &mut iteration_rng(1, 0, 0, 2), 400, |_, _| {}).unwrap();
        assert_eq!(r.slots, 0);
        assert!(!r.censored);
    }

    #[test]
    fn crossed_pair_with_a_clean_channel_takes_two_slots() {
        let state = SideInformationState::from_rows(&[[0u8, 1], [1, 0]]).unwrap();
        let model = ErasureModel::uniform(2, 0.0, 0.0).unwrap();
        let session = Session::new(state, model, SessionConfig::game2()).unwrap();
        let mut seen = Vec::new();
        let (r, done) = run_cde_from(session, &LearningConfig::default(), &mut iteration_rng(1, 0, 0, 2), 200, |o, _| {
            seen.push(o.profile.transmitters())
        })
        .unwrap();
        assert_eq!(r.slots, 2);
        assert_eq!(seen, vec![1, 1]);
        assert!(done.is_complete());
    }

    #[test]
    fn config_file_and_overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_file_contents("# fig 2\nplayers = 60\nq_mean=0.3\n\ngame=1\nliveness = off\nchannel-mode=deterministic\n")
            .unwrap();
        assert_eq!(c.players, 60);
        assert_eq!(c.q_mean, 0.3);
        assert_eq!(c.game, GameMode::Game1);
        assert!(!c.liveness);
        c.set("--players", "7").unwrap();
        assert_eq!(c.players, 7);
        assert!(matches!(c.apply_file_contents("players"), Err(Error::Parse { line: 1, .. })));
        assert!(c.apply_file_contents("colour = red").is_err());
        c.channel_mode = ChannelMode::Realized;
        assert!(c.validate().is_err());
    }

    #[test]
    fn table_formats() {
        let empty = ResultTable::default();
        assert_eq!(empty.to_csv(), format!("{CSV_HEADER}\n"));
        let eps = [
            EpisodeSummary { slots: 10, mean_estimate: 9.0, total_delay: 3, censored: false },
            EpisodeSummary { slots: 12, mean_estimate: 11.0, total_delay: 4, censored: false },
            EpisodeSummary { slots: 3000, mean_estimate: 0.0, total_delay: 0, censored: true },
        ];
        let table = ResultTable {
            rows: vec![ResultRow::aggregate(20.0, Scheme::Cde, &eps), ResultRow::aggregate(20.0, Scheme::Pmp, &eps[..2])],
        };
        let csv = table.to_csv();
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "20,cde,11.000000,1.000000,10.000000,1,3"
        );
        assert_eq!(
            table.to_gnuplot().lines().nth(1).unwrap(),
            "20 11.000000 1.000000 11.000000 1.000000"
        );
    }

    #[test]
    fn sweep_is_deterministic_and_paired() {
        let base = ExperimentConfig {
            players: 6,
            packets: 8,
            iterations: 12,
            ..ExperimentConfig::default()
        };
        let sweep = Sweep { variable: SweepVariable::Players, grid: vec![4.0, 6.0] };
        let a = run_sweep(&sweep, &base).unwrap();
        let b = run_sweep(&sweep, &base).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig.csv");
        let dat = emit_outputs(&a, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), a.to_csv());
        assert!(fs::read_to_string(dat).unwrap().starts_with("# x"));
        assert!(run_sweep(&Sweep { variable: SweepVariable::Ratio, grid: vec![] }, &base).is_err());
    }
}
