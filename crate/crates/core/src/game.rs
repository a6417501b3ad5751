//! Action profiles, the two utility functions, collision punishment and the
//! stage-advance state machine.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{
    select_combination_exact, select_combination_greedy, target_set, wants_indicator,
    PacketCombination, DEFAULT_EXHAUSTIVE_CAP,
};
use crate::delay::{
    accumulate_delay, completion_estimate, completion_time, stage_delay, stage_delay_with,
    CompletionEstimate, StageDelay,
};
use crate::error::{Error, Result};
use crate::session::{
    sample_channel, ChannelRealization, CollisionWindow, ErasureModel, GameLedger, PlayerSet,
    SideInformationState,
};

/// Who transmits this stage: bit `i` set means player `i` sends its
/// combination, clear means it listens.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionProfile(Vec<bool>);

impl ActionProfile {
    pub fn silent(players: usize) -> Self {
        ActionProfile(vec![false; players])
    }

    pub fn singleton(players: usize, transmitter: usize) -> Self {
        let mut p = Self::silent(players);
        p.0[transmitter] = true;
        p
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        ActionProfile(bits.iter().map(|&b| b != 0).collect())
    }

    /// Bit `i` of `mask` is player `i`.
    pub fn from_mask(players: usize, mask: u64) -> Self {
        ActionProfile((0..players).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn transmits(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, transmit: bool) {
        self.0[i] = transmit;
    }

    /// The same profile with player `i` switched to `transmit`.
    pub fn with(&self, i: usize, transmit: bool) -> Self {
        let mut p = self.clone();
        p.0[i] = transmit;
        p
    }

    /// Number of transmitting players.
    pub fn transmitters(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// The transmitter when exactly one player transmits.
    pub fn sole_transmitter(&self) -> Option<usize> {
        let mut it = self.0.iter().enumerate().filter(|(_, &b)| b);
        match (it.next(), it.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    pub fn bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }
}

impl fmt::Debug for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, &b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", u8::from(b))?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GameMode {
    /// Completion-time utility, no punishment.
    #[serde(rename = "1")]
    Game1,
    /// Completion time plus transmitter count and delay regularizers, with
    /// collision back-off.
    #[default]
    #[serde(rename = "2")]
    Game2,
}

/// How the reception of a hypothetical transmission is modelled when
/// evaluating utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// A sampled realization.
    Realized,
    /// Every link succeeds.
    #[default]
    Deterministic,
    /// Reception indicators replaced by their success probabilities.
    Expected,
}

/// Reception model used by one utility evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Channel<'a> {
    Realized(&'a ChannelRealization),
    Deterministic,
    Expected,
}

impl Channel<'_> {
    pub fn mode(&self) -> ChannelMode {
        match self {
            Channel::Realized(_) => ChannelMode::Realized,
            Channel::Deterministic => ChannelMode::Deterministic,
            Channel::Expected => ChannelMode::Expected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    #[default]
    Greedy,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    pub game: GameMode,
    /// Back-off length V after a collision. Ignored under Game 1.
    pub punishment: usize,
    pub selector: Selector,
    pub exhaustive_cap: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            game: GameMode::Game2,
            punishment: 2,
            selector: Selector::Greedy,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl SessionConfig {
    pub fn game1() -> Self {
        SessionConfig {
            game: GameMode::Game1,
            ..Self::default()
        }
    }

    pub fn game2() -> Self {
        Self::default()
    }
}

/// A cooperative recovery session in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub state: SideInformationState,
    pub model: ErasureModel,
    pub ledger: GameLedger,
    pub config: SessionConfig,
}

impl Session {
    /// Starts the recovery phase from `state`.
    pub fn new(state: SideInformationState, model: ErasureModel, config: SessionConfig) -> Result<Self> {
        let ledger = GameLedger::start(&state, effective_window(&config));
        Self::with_ledger(state, model, ledger, config)
    }

    /// Resumes a session from a snapshot of its bookkeeping.
    pub fn with_ledger(
        state: SideInformationState,
        model: ErasureModel,
        mut ledger: GameLedger,
        config: SessionConfig,
    ) -> Result<Self> {
        let m = state.players();
        if model.players() != m {
            return Err(Error::Dimension(format!(
                "state has {m} players, erasure model {}",
                model.players()
            )));
        }
        if ledger.cumulative_delay.len() != m || ledger.initial_wants.len() != m {
            return Err(Error::Dimension("ledger does not match the player count".into()));
        }
        if ledger.collisions.players() != m {
            return Err(Error::Dimension("collision window does not match the player count".into()));
        }
        if config.game == GameMode::Game1 {
            ledger.collisions = CollisionWindow::new(m, 0);
        }
        Ok(Session {
            state,
            model,
            ledger,
            config,
        })
    }

    pub fn players(&self) -> usize {
        self.state.players()
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    pub fn wanting(&self) -> PlayerSet {
        wants_indicator(&self.state)
    }

    /// Completion estimates after the stages played so far.
    pub fn completion(&self) -> CompletionEstimate {
        completion_estimate(
            &self.ledger.initial_wants,
            &self.ledger.cumulative_delay,
            self.model.avg_erasures(),
        )
        .expect("erasure model guarantees average erasures below 1")
    }

    /// Completion estimate of player `i` if it accrues `extra` more delay.
    pub fn completion_with(&self, i: usize, extra: f64) -> f64 {
        completion_time(
            self.ledger.initial_wants[i] as f64,
            self.ledger.cumulative_delay[i] as f64 + extra,
            self.model.avg_erasure(i),
        )
    }

    /// Wanting players whose estimate would exceed the current maximum if
    /// they accrued one more unit of delay.
    pub fn critical_set(&self) -> PlayerSet {
        let cmax = self.completion().max_norm;
        let mut out = PlayerSet::with_capacity(self.players());
        out.extend(
            self.wanting()
                .ones()
                .filter(|&i| self.completion_with(i, 1.0) > cmax),
        );
        out
    }

    /// Back-off counters of every player; zero under Game 1.
    pub fn backoff(&self) -> Vec<u32> {
        backoff_vector(&self.ledger.collisions)
    }

    /// Every player's combination for this stage, prioritising the critical
    /// set. All players compute the same vector.
    pub fn combinations(&self) -> Result<Vec<PacketCombination>> {
        let priority = self.critical_set();
        (0..self.players())
            .map(|i| match self.config.selector {
                Selector::Greedy => Ok(select_combination_greedy(
                    i,
                    &self.state,
                    &self.model,
                    Some(&priority),
                )),
                Selector::Exact => select_combination_exact(
                    i,
                    &self.state,
                    &self.model,
                    Some(&priority),
                    self.config.exhaustive_cap,
                ),
            })
            .collect()
    }

    /// Precomputes everything needed to evaluate utilities of this stage.
    pub fn evaluator(&self, channel: Channel<'_>) -> Result<StageEvaluator> {
        StageEvaluator::new(self, self.combinations()?, channel)
    }
}

fn effective_window(config: &SessionConfig) -> usize {
    match config.game {
        GameMode::Game1 => 0,
        GameMode::Game2 => config.punishment,
    }
}

/// Utilities of every action profile of one stage under one channel mode.
///
/// The utility of a profile depends only on its transmitter count and, for
/// a single transmitter, on who it is; those values are precomputed.
#[derive(Debug, Clone)]
pub struct StageEvaluator {
    players: usize,
    mode: ChannelMode,
    combinations: Vec<PacketCombination>,
    wanting: PlayerSet,
    prev_max: f64,
    silent_delay: StageDelay,
    silent_peak: f64,
    single_delay: Vec<StageDelay>,
    single_peak: Vec<f64>,
    backoff: Vec<u32>,
    game: GameMode,
}

impl StageEvaluator {
    pub fn new(session: &Session, combinations: Vec<PacketCombination>, channel: Channel<'_>) -> Result<Self> {
        let m = session.players();
        if combinations.len() != m {
            return Err(Error::Dimension("one combination per player is required".into()));
        }
        if let Channel::Realized(omega) = channel {
            if omega.players() != m {
                return Err(Error::Dimension("realization does not match the player count".into()));
            }
        }
        let wanting = session.wanting();
        let current = session.completion();
        let peak = |delay: &StageDelay| {
            (0..m)
                .map(|i| session.completion_with(i, delay.0[i]))
                .fold(0.0, f64::max)
        };
        let silent_delay = StageDelay::from_wanting(&wanting, m);
        let silent_peak = peak(&silent_delay);
        let single_delay: Vec<StageDelay> = (0..m)
            .map(|j| {
                let kappa = &combinations[j];
                match channel {
                    Channel::Realized(omega) => stage_delay(j, kappa, &session.state, omega),
                    Channel::Deterministic => stage_delay_with(j, kappa, &session.state, |_| 1.0),
                    Channel::Expected => {
                        stage_delay_with(j, kappa, &session.state, |k| session.model.success(k, j))
                    }
                }
            })
            .collect();
        let single_peak = single_delay.iter().map(peak).collect();
        Ok(StageEvaluator {
            players: m,
            mode: channel.mode(),
            combinations,
            wanting,
            prev_max: current.max_norm,
            silent_delay,
            silent_peak,
            single_delay,
            single_peak,
            backoff: session.backoff(),
            game: session.config.game,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn mode(&self) -> ChannelMode {
        self.mode
    }

    pub fn game(&self) -> GameMode {
        self.game
    }

    pub fn combinations(&self) -> &[PacketCombination] {
        &self.combinations
    }

    pub fn wanting(&self) -> &PlayerSet {
        &self.wanting
    }

    /// Largest completion estimate before this stage.
    pub fn previous_max(&self) -> f64 {
        self.prev_max
    }

    pub fn backoff(&self) -> &[u32] {
        &self.backoff
    }

    /// Delay increments charged for `profile`.
    pub fn delay_increment(&self, profile: &ActionProfile) -> &StageDelay {
        match profile.sole_transmitter() {
            Some(j) => &self.single_delay[j],
            None => &self.silent_delay,
        }
    }

    /// The delay vector if `j` transmits alone.
    pub fn single_delay(&self, j: usize) -> &StageDelay {
        &self.single_delay[j]
    }

    /// Largest completion estimate after `profile` is played.
    pub fn peak(&self, profile: &ActionProfile) -> f64 {
        match profile.sole_transmitter() {
            Some(j) => self.single_peak[j],
            None => self.silent_peak,
        }
    }

    /// Peak after `j` transmits alone.
    pub fn single_peak(&self, j: usize) -> f64 {
        self.single_peak[j]
    }

    /// Peak when not exactly one player transmits.
    pub fn silent_peak(&self) -> f64 {
        self.silent_peak
    }

    /// Completion estimates after `profile`.
    pub fn completion_after(&self, session: &Session, profile: &ActionProfile) -> CompletionEstimate {
        let delay = self.delay_increment(profile);
        CompletionEstimate::from_values(
            (0..self.players)
                .map(|i| session.completion_with(i, delay.0[i]))
                .collect(),
        )
    }

    /// Common Game 1 utility: minus the largest completion estimate.
    pub fn utility_game1(&self, profile: &ActionProfile) -> f64 {
        -self.peak(profile)
    }

    /// Common Game 2 utility: Game 1 minus the transmitter count minus the
    /// mean delay increment.
    pub fn utility_game2(&self, profile: &ActionProfile) -> f64 {
        -self.peak(profile)
            - profile.transmitters() as f64
            - self.delay_increment(profile).l1() / self.players as f64
    }

    pub fn utility(&self, game: GameMode, profile: &ActionProfile) -> f64 {
        match game {
            GameMode::Game1 => self.utility_game1(profile),
            GameMode::Game2 => self.utility_game2(profile),
        }
    }

    /// Utility seen by player `i`. Identical for every player: the game is
    /// its own coordination game.
    pub fn utility_for(&self, _player: usize, game: GameMode, profile: &ActionProfile) -> f64 {
        self.utility(game, profile)
    }

    /// Actions open to player `i` this stage.
    pub fn allowed_actions(&self, i: usize) -> &'static [Action] {
        allowed_actions(i, &self.backoff, self.game)
    }
}

/// Game 1 utility of `profile` in `session` under `channel`.
pub fn utility_game1(profile: &ActionProfile, session: &Session, channel: Channel<'_>) -> Result<f64> {
    Ok(session.evaluator(channel)?.utility_game1(profile))
}

/// Game 2 utility of `profile` in `session` under `channel`.
pub fn utility_game2(profile: &ActionProfile, session: &Session, channel: Channel<'_>) -> Result<f64> {
    Ok(session.evaluator(channel)?.utility_game2(profile))
}

/// Players that transmitted into a collision.
pub fn collision_indicator(profile: &ActionProfile) -> Vec<bool> {
    let collided = profile.transmitters() > 1;
    (0..profile.len())
        .map(|i| collided && profile.transmits(i))
        .collect()
}

/// Row sums of the collision window; player `i` may transmit iff its entry
/// is zero.
pub fn backoff_vector(window: &CollisionWindow) -> Vec<u32> {
    let mut out = vec![0u32; window.players()];
    for column in window.columns() {
        for (acc, &c) in out.iter_mut().zip(column) {
            *acc += u32::from(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Transmit,
    Silent,
}

/// Action set of player `i` given the back-off counters.
pub fn allowed_actions(i: usize, backoff: &[u32], game: GameMode) -> &'static [Action] {
    const BOTH: &[Action] = &[Action::Silent, Action::Transmit];
    const SILENT: &[Action] = &[Action::Silent];
    match game {
        GameMode::Game1 => BOTH,
        GameMode::Game2 if backoff.get(i).copied().unwrap_or(0) == 0 => BOTH,
        GameMode::Game2 => SILENT,
    }
}

/// What happened in one played stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: u64,
    pub profile: ActionProfile,
    pub realization: ChannelRealization,
    /// (player, packet) pairs decoded this stage.
    pub decoded: Vec<(usize, usize)>,
    pub delay: StageDelay,
    pub collided: Vec<bool>,
}

/// Plays one stage against a freshly sampled channel.
pub fn advance_stage<R: Rng + ?Sized>(
    session: &mut Session,
    profile: &ActionProfile,
    rng: &mut R,
) -> Result<StageOutcome> {
    let omega = sample_channel(&session.model, rng);
    advance_stage_with(session, profile, omega)
}

/// Plays one stage against a given channel realization.
pub fn advance_stage_with(
    session: &mut Session,
    profile: &ActionProfile,
    omega: ChannelRealization,
) -> Result<StageOutcome> {
    let m = session.players();
    if session.is_complete() {
        return Err(Error::SessionComplete);
    }
    if profile.len() != m || omega.players() != m {
        return Err(Error::Dimension(format!(
            "stage needs {m} players, got profile {} and realization {}",
            profile.len(),
            omega.players()
        )));
    }
    let backoff = session.backoff();
    if let Some(i) = (0..m).find(|&i| {
        profile.transmits(i) && !allowed_actions(i, &backoff, session.config.game).contains(&Action::Transmit)
    }) {
        return Err(Error::BackedOff(i));
    }

    let wanting = session.wanting();
    let mut decoded = Vec::new();
    let delay = match profile.sole_transmitter() {
        Some(sender) => {
            let kappa = session.combinations()?.swap_remove(sender);
            let targets = target_set(&kappa, &session.state);
            let delay = stage_delay(sender, &kappa, &session.state, &omega);
            for k in targets.players().filter(|&k| omega.received(k, sender)) {
                let packet = kappa
                    .packets()
                    .find(|&p| session.state.is_wanted(k, p))
                    .expect("a targeted player wants exactly one packet of the combination");
                decoded.push((k, packet));
            }
            for &(k, p) in &decoded {
                session.state.set_wanted(k, p, false);
            }
            accumulate_delay(&mut session.ledger, profile, Some(&delay), &wanting)?;
            delay
        }
        None => {
            accumulate_delay(&mut session.ledger, profile, None, &wanting)?;
            StageDelay::from_wanting(&wanting, m)
        }
    };
    let collided = collision_indicator(profile);
    session.ledger.collisions.shift(collided.clone());
    let stage = session.ledger.stage;
    session.ledger.stage += 1;
    Ok(StageOutcome {
        stage,
        profile: profile.clone(),
        realization: omega,
        decoded,
        delay,
        collided,
    })
}

/// One line of the episode replay log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: u64,
    pub profile: String,
    /// Row-major reception bits.
    pub omega: String,
    pub decoded: Vec<(usize, usize)>,
    pub cumulative_delay: Vec<u64>,
}

impl StageRecord {
    pub fn new(outcome: &StageOutcome, ledger: &GameLedger) -> Self {
        let bits = |v: Vec<u8>| v.into_iter().map(|b| char::from(b'0' + b)).collect();
        StageRecord {
            stage: outcome.stage,
            profile: bits(outcome.profile.bits()),
            omega: bits(outcome.realization.bits()),
            decoded: outcome.decoded.clone(),
            cumulative_delay: ledger.cumulative_delay.clone(),
        }
    }

    /// The record as one JSON line (without the trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("stage records always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::crossed_pair as e1_session;

    const TOL: f64 = 1e-9;

    #[test]
    fn profile_basics() {
        let p = ActionProfile::from_mask(3, 0b101);
        assert_eq!(p.bits(), vec![1, 0, 1]);
        assert_eq!(p.transmitters(), 2);
        assert_eq!(p.sole_transmitter(), None);
        assert_eq!(ActionProfile::singleton(3, 1).sole_transmitter(), Some(1));
        assert_eq!(p.mask(), 0b101);
        assert_eq!(p.to_string(), "(1,0,1)");
    }

    #[test]
    fn game1_utilities_on_the_crossed_instance() {
        let s = e1_session(SessionConfig::game1());
        let ev = s.evaluator(Channel::Deterministic).unwrap();
        let u = ev.utility_game1(&ActionProfile::from_bits(&[0, 1]));
        assert!((u + (1.0 + 1.0 - 0.05) / 0.95).abs() < TOL);
        assert!((u + 2.052_631_578_947_368).abs() < TOL);
        let u = ev.utility_game1(&ActionProfile::from_bits(&[1, 1]));
        assert!((u + 2.25).abs() < TOL);
        let after = ev.completion_after(&s, &ActionProfile::from_bits(&[1, 1]));
        assert!((after.per_player[0] - 2.25).abs() < TOL);
        assert!((after.per_player[1] - 2.052_631_578_947_368).abs() < TOL);
    }

    #[test]
    fn game2_utilities_on_the_crossed_instance() {
        let s = e1_session(SessionConfig::game2());
        let ev = s.evaluator(Channel::Deterministic).unwrap();
        let u = ev.utility_game2(&ActionProfile::from_bits(&[0, 1]));
        assert!((u + 3.552_631_578_947_368).abs() < TOL);
        let u = ev.utility_game2(&ActionProfile::from_bits(&[0, 0]));
        assert!((u + 3.25).abs() < TOL);
        assert!((utility_game2(&ActionProfile::from_bits(&[0, 0]), &s, Channel::Deterministic).unwrap() + 3.25).abs() < TOL);
    }

    #[test]
    fn game2_substitution_example() {
        // -||C||inf - ||a||1 - ||dD||1 / M with C = (1, 2.5, 2), a = (0,1,0), dD = (1,0,1)
        let u: f64 = -2.5 - 1.0 - 2.0 / 3.0;
        assert!((u + 4.166_666_666_666_667).abs() < 1e-12);
    }

    #[test]
    fn collision_indicator_cases() {
        assert_eq!(collision_indicator(&ActionProfile::from_bits(&[1, 1, 0])), vec![true, true, false]);
        assert_eq!(collision_indicator(&ActionProfile::from_bits(&[1, 0, 0])), vec![false; 3]);
        assert_eq!(collision_indicator(&ActionProfile::from_bits(&[0, 0, 0])), vec![false; 3]);
    }

    #[test]
    fn backoff_cases() {
        let w = CollisionWindow::from_columns(3, vec![vec![true, true, false], vec![false; 3]]).unwrap();
        assert_eq!(backoff_vector(&w), vec![1, 1, 0]);
        assert_eq!(backoff_vector(&CollisionWindow::new(3, 2)), vec![0; 3]);
        assert_eq!(backoff_vector(&CollisionWindow::new(3, 0)), vec![0; 3]);
    }

    #[test]
    fn allowed_action_cases() {
        assert_eq!(allowed_actions(0, &[0], GameMode::Game2).len(), 2);
        assert_eq!(allowed_actions(0, &[2], GameMode::Game2), &[Action::Silent]);
        assert_eq!(allowed_actions(0, &[2], GameMode::Game1).len(), 2);
    }

    #[test]
    fn single_delivery() {
        let mut s = e1_session(SessionConfig::game2());
        let out = advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 0]), ChannelRealization::all_ones(2)).unwrap();
        assert_eq!(out.decoded, vec![(1, 0)]);
        assert_eq!(s.state.row(0), vec![0, 1]);
        assert_eq!(s.state.row(1), vec![0, 0]);
        assert_eq!(s.ledger.cumulative_delay, vec![1, 0]);
        assert_eq!(s.ledger.stage, 2);
    }

    #[test]
    fn collision_backs_both_off() {
        let mut s = e1_session(SessionConfig::game2());
        let out = advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 1]), ChannelRealization::all_ones(2)).unwrap();
        assert!(out.decoded.is_empty());
        assert_eq!(s.ledger.cumulative_delay, vec![1, 1]);
        assert_eq!(out.collided, vec![true, true]);
        assert_eq!(s.backoff(), vec![1, 1]);
        let again = advance_stage_with(&mut s, &ActionProfile::from_bits(&[0, 1]), ChannelRealization::all_ones(2));
        assert_eq!(again, Err(Error::BackedOff(1)));
        // silence for V = 2 stages clears the window
        advance_stage_with(&mut s, &ActionProfile::silent(2), ChannelRealization::all_ones(2)).unwrap();
        assert_eq!(s.backoff(), vec![1, 1]);
        advance_stage_with(&mut s, &ActionProfile::silent(2), ChannelRealization::all_ones(2)).unwrap();
        assert_eq!(s.backoff(), vec![0, 0]);
    }

    #[test]
    fn game1_never_backs_off() {
        let mut s = e1_session(SessionConfig::game1());
        advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 1]), ChannelRealization::all_ones(2)).unwrap();
        assert_eq!(s.backoff(), vec![0, 0]);
        advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 1]), ChannelRealization::all_ones(2)).unwrap();
    }

    #[test]
    fn erased_delivery_decodes_nothing() {
        let mut s = e1_session(SessionConfig::game2());
        let mut omega = ChannelRealization::all_ones(2);
        omega.set_received(1, 0, false);
        let before = s.state.clone();
        let out = advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 0]), omega).unwrap();
        assert!(out.decoded.is_empty());
        assert_eq!(s.state, before);
        assert_eq!(s.ledger.cumulative_delay, vec![1, 0]);
    }

    #[test]
    fn completed_sessions_cannot_advance() {
        let mut s = e1_session(SessionConfig::game2());
        advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 0]), ChannelRealization::all_ones(2)).unwrap();
        advance_stage_with(&mut s, &ActionProfile::from_bits(&[0, 1]), ChannelRealization::all_ones(2)).unwrap();
        assert!(s.is_complete());
        assert_eq!(
            advance_stage_with(&mut s, &ActionProfile::silent(2), ChannelRealization::all_ones(2)),
            Err(Error::SessionComplete)
        );
    }

    #[test]
    fn stage_record_round_trip() {
        let mut s = e1_session(SessionConfig::game2());
        let out = advance_stage_with(&mut s, &ActionProfile::from_bits(&[1, 0]), ChannelRealization::all_ones(2)).unwrap();
        let rec = StageRecord::new(&out, &s.ledger);
        assert_eq!(rec.profile, "10");
        assert_eq!(rec.omega, "1111");
        assert_eq!(StageRecord::from_line(&rec.to_line()).unwrap(), rec);
    }
}
