//! Closed-form equilibrium structure of one stage: the critical and helper
//! sets, the cost increments `Y`, equilibrium sets and prices of anarchy.
//!
//! Costs are negated utilities. Write `c` for the largest completion
//! estimate before the stage. Any profile that does not have exactly one
//! transmitter raises the largest estimate to `c + Y0`; a lone transmitter
//! `j` raises it to `c + Y_j <= c + Y0`. Only critical players can move the
//! maximum, so `Y0` and `Y_j` are maxima over the critical set. They are
//! computed here as exact increments of the largest estimate; when every
//! critical player sits at `c` they reduce to the familiar
//! `max 1 / (1 - p_i)` expressions returned by [`nominal_y_values`].

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::game::{allowed_actions, Action, ActionProfile, Channel, GameMode, Session, StageEvaluator};
use crate::oracle::ENUMERATION_CAP;
use crate::session::PlayerSet;

/// Players that can raise the largest completion estimate this stage.
pub fn critical_set(session: &Session) -> PlayerSet {
    session.critical_set()
}

/// Cost increments of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct YValues {
    /// Increment when not exactly one player transmits.
    pub y0: f64,
    /// False when the critical set is empty; `y0` is then 0.
    pub defined: bool,
    /// Increment when player `j` transmits alone; 0 when `j` leaves every
    /// critical player satisfied.
    pub per_player: Vec<f64>,
}

/// Exact cost increments of the stage described by `ev`.
pub fn y_values(ev: &StageEvaluator, critical: &PlayerSet) -> YValues {
    let base = ev.previous_max();
    YValues {
        y0: ev.silent_peak() - base,
        defined: !critical.is_clear(),
        per_player: (0..ev.players()).map(|j| ev.single_peak(j) - base).collect(),
    }
}

/// The increments as maxima of `1 / (1 - p_i)` over the critical set and
/// over its intersection with each transmitter's delayed set. They match
/// [`y_values`] whenever every critical player sits at the current maximum.
pub fn nominal_y_values(session: &Session, ev: &StageEvaluator, critical: &PlayerSet) -> YValues {
    let weight = |i: usize| 1.0 / (1.0 - session.model.avg_erasure(i));
    let max_over = |set: &mut dyn Iterator<Item = usize>| set.map(weight).fold(0.0, f64::max);
    YValues {
        y0: max_over(&mut critical.ones()),
        defined: !critical.is_clear(),
        per_player: (0..ev.players())
            .map(|j| {
                let delayed = ev.single_delay(j).delayed();
                max_over(&mut critical.intersection(&delayed))
            })
            .collect(),
    }
}

/// Players whose lone transmission raises the cost less than anything else.
pub fn helper_set(y0: f64, y: &[f64]) -> PlayerSet {
    let mut out = PlayerSet::with_capacity(y.len());
    out.extend(y.iter().enumerate().filter(|(_, &yj)| yj < y0).map(|(j, _)| j));
    out
}

// Compared on the peaks themselves so the test agrees bit for bit with a
// direct utility comparison.
fn helpers(ev: &StageEvaluator) -> PlayerSet {
    let mut out = PlayerSet::with_capacity(ev.players());
    out.extend((0..ev.players()).filter(|&j| ev.single_peak(j) < ev.silent_peak()));
    out
}

fn may_transmit(ev: &StageEvaluator, game: GameMode) -> Vec<bool> {
    (0..ev.players())
        .map(|i| allowed_actions(i, ev.backoff(), game).contains(&Action::Transmit))
        .collect()
}

fn check_cap(m: usize) -> Result<()> {
    if m > ENUMERATION_CAP {
        Err(Error::EnumerationCap {
            players: m,
            cap: ENUMERATION_CAP,
        })
    } else {
        Ok(())
    }
}

fn profiles_where(
    ev: &StageEvaluator,
    game: GameMode,
    keep: impl Fn(&ActionProfile) -> bool,
) -> Result<BTreeSet<ActionProfile>> {
    let m = ev.players();
    check_cap(m)?;
    let allowed = may_transmit(ev, game);
    Ok((0..(1u64 << m))
        .map(|mask| ActionProfile::from_mask(m, mask))
        .filter(|p| (0..m).all(|i| allowed[i] || !p.transmits(i)))
        .filter(|p| keep(p))
        .collect())
}

/// Game 1 equilibria: every profile when no helper exists; otherwise every
/// lone transmitter, every profile with more than two transmitters, and the
/// pairs made of two non-helpers.
pub fn ne_set_game1(ev: &StageEvaluator) -> Result<BTreeSet<ActionProfile>> {
    let z = helpers(ev);
    if z.is_clear() {
        return profiles_where(ev, GameMode::Game1, |_| true);
    }
    profiles_where(ev, GameMode::Game1, |p| match p.transmitters() {
        0 => false,
        1 => true,
        2 => (0..p.len()).filter(|&i| p.transmits(i)).all(|i| !z.contains(i)),
        _ => true,
    })
}

/// Equilibrium members of Game 2: lone transmitters that do at least as
/// well as silence, and silence itself when no lone transmitter beats it.
///
/// With two or more transmitters, withdrawing one saves at least one unit of
/// cost, so those profiles are never equilibria. A lone transmitter `j`
/// can only deviate to silence (anyone joining collides), which is a strict
/// improvement exactly when `Y0 - Y_j + targeted_j / M < 1`.
fn game2_members(ev: &StageEvaluator) -> (Vec<usize>, bool) {
    let m = ev.players();
    let allowed = may_transmit(ev, GameMode::Game2);
    let silent = ActionProfile::silent(m);
    let silent_cost = -ev.utility_game2(&silent);
    let single_cost =
        |j: usize| -ev.utility_game2(&ActionProfile::singleton(m, j));
    let singles: Vec<usize> = (0..m)
        .filter(|&j| allowed[j] && single_cost(j) <= silent_cost)
        .collect();
    let silent_stable = (0..m)
        .filter(|&j| allowed[j])
        .all(|j| single_cost(j) >= silent_cost);
    (singles, silent_stable)
}

/// Game 2 equilibria, see [`game2_members`]. Never contains a profile with
/// more than one transmitter.
pub fn ne_set_game2(ev: &StageEvaluator) -> Result<BTreeSet<ActionProfile>> {
    let m = ev.players();
    check_cap(m)?;
    let (singles, silent) = game2_members(ev);
    let mut out: BTreeSet<ActionProfile> = singles
        .into_iter()
        .map(|j| ActionProfile::singleton(m, j))
        .collect();
    if silent {
        out.insert(ActionProfile::silent(m));
    }
    Ok(out)
}

/// The published Game 2 characterization: lone helpers when helpers exist,
/// otherwise every lone transmitter. It ignores the unit transmit penalty
/// when comparing a lone transmitter against silence, so it disagrees with
/// [`ne_set_game2`] whenever silence is cheaper.
pub fn ne_set_game2_published(ev: &StageEvaluator) -> Result<BTreeSet<ActionProfile>> {
    let m = ev.players();
    check_cap(m)?;
    let allowed = may_transmit(ev, GameMode::Game2);
    let z = helpers(ev);
    let use_helpers = (0..m).any(|j| allowed[j] && z.contains(j));
    Ok((0..m)
        .filter(|&j| allowed[j] && (!use_helpers || z.contains(j)))
        .map(|j| ActionProfile::singleton(m, j))
        .collect())
}

/// Game 1 price of anarchy, `1 - (Y0 - min_Z Y_j) / (c + Y0)`, or 1 without
/// helpers.
pub fn poa_game1(ev: &StageEvaluator) -> f64 {
    let z = helpers(ev);
    if z.is_clear() {
        return 1.0;
    }
    let base = ev.previous_max();
    let y0 = ev.silent_peak() - base;
    let min_y = z.ones().map(|j| ev.single_peak(j) - base).fold(f64::INFINITY, f64::min);
    1.0 - (y0 - min_y) / (base + y0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Game2Poa {
    /// Best-to-worst cost ratio over the Game 2 equilibria.
    pub poa: f64,
    /// Lower bound `1 - (1 + Y0 - min_Z Y_j) / (c + 2 + Y0)`, or
    /// `1 - 1 / (c + 2 + Y0)` without helpers.
    pub lower_bound: f64,
    /// The ratio over the published equilibrium set, with terms
    /// `c + |D_i| / M + 1 + Y_i` (`Y0` in place of `Y_i` without helpers).
    pub published: f64,
}

pub fn poa_game2(ev: &StageEvaluator) -> Game2Poa {
    let m = ev.players();
    let base = ev.previous_max();
    let y0 = ev.silent_peak() - base;
    let z = helpers(ev);

    let (singles, silent) = game2_members(ev);
    let mut costs: Vec<f64> = singles
        .iter()
        .map(|&j| -ev.utility_game2(&ActionProfile::singleton(m, j)))
        .collect();
    if silent {
        costs.push(-ev.utility_game2(&ActionProfile::silent(m)));
    }
    let poa = ratio(&costs);

    let allowed = may_transmit(ev, GameMode::Game2);
    let use_helpers = (0..m).any(|j| allowed[j] && z.contains(j));
    let published_terms: Vec<f64> = (0..m)
        .filter(|&j| allowed[j] && (!use_helpers || z.contains(j)))
        .map(|j| {
            let y = if use_helpers { ev.single_peak(j) - base } else { y0 };
            base + ev.single_delay(j).l1() / m as f64 + 1.0 + y
        })
        .collect();

    let lower_bound = if z.is_clear() {
        1.0 - 1.0 / (base + 2.0 + y0)
    } else {
        let min_y = z.ones().map(|j| ev.single_peak(j) - base).fold(f64::INFINITY, f64::min);
        1.0 - (1.0 + y0 - min_y) / (base + 2.0 + y0)
    };
    Game2Poa {
        poa,
        lower_bound,
        published: ratio(&published_terms),
    }
}

fn ratio(costs: &[f64]) -> f64 {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if costs.is_empty() || max == 0.0 {
        1.0
    } else {
        min / max
    }
}

/// Everything known in closed form about one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageAnalysis {
    pub stage: u64,
    pub game: GameMode,
    pub critical: PlayerSet,
    pub helpers: PlayerSet,
    pub y: YValues,
    pub nominal_y: YValues,
    /// Largest completion estimate before the stage.
    pub cost_prev: f64,
    pub equilibria: BTreeSet<ActionProfile>,
    pub pone: BTreeSet<ActionProfile>,
    pub poa: f64,
    /// Game 2 only.
    pub poa_lower_bound: Option<f64>,
    /// Game 2 only: the published equilibrium set and its ratio.
    pub published_equilibria: Option<BTreeSet<ActionProfile>>,
    pub published_poa: Option<f64>,
}

impl StageAnalysis {
    pub fn min_helper_y(&self) -> Option<f64> {
        self.helpers
            .ones()
            .map(|j| self.y.per_player[j])
            .reduce(f64::min)
    }

    pub const CSV_HEADER: &'static str = "t,critical,helpers,y0,min_y,poa,poa_lower_bound,equilibria,pone";

    /// One row of the stage-analysis export.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
        let pone: Vec<String> = self
            .pone
            .iter()
            .map(|p| p.bits().iter().map(u8::to_string).collect())
            .collect();
        format!(
            "{},{},{},{:.9},{},{:.9},{},{},{}",
            self.stage,
            self.critical.count_ones(..),
            self.helpers.count_ones(..),
            self.y.y0,
            opt(self.min_helper_y()),
            self.poa,
            opt(self.poa_lower_bound),
            self.equilibria.len(),
            pone.join(";"),
        )
    }
}

/// Closed-form analysis of the current stage of `session` under `game`.
/// The channel must be deterministic or expected: nothing has been
/// transmitted yet.
pub fn analyze_stage(session: &Session, channel: Channel<'_>, game: GameMode) -> Result<StageAnalysis> {
    if let Channel::Realized(_) = channel {
        return Err(Error::ChannelMode(
            "stage analysis runs before transmission; use deterministic or expected".into(),
        ));
    }
    let ev = session.evaluator(channel)?;
    let critical = critical_set(session);
    let y = y_values(&ev, &critical);
    let nominal_y = nominal_y_values(session, &ev, &critical);
    let (equilibria, poa, poa_lower_bound, published_equilibria, published_poa) = match game {
        GameMode::Game1 => (ne_set_game1(&ev)?, poa_game1(&ev), None, None, None),
        GameMode::Game2 => {
            let p = poa_game2(&ev);
            (
                ne_set_game2(&ev)?,
                p.poa,
                Some(p.lower_bound),
                Some(ne_set_game2_published(&ev)?),
                Some(p.published),
            )
        }
    };
    let best = equilibria
        .iter()
        .map(|p| ev.utility(game, p))
        .fold(f64::NEG_INFINITY, f64::max);
    let pone = equilibria
        .iter()
        .filter(|p| ev.utility(game, p) == best)
        .cloned()
        .collect();
    Ok(StageAnalysis {
        stage: session.ledger.stage,
        game,
        critical,
        helpers: helpers(&ev),
        y,
        nominal_y,
        cost_prev: ev.previous_max(),
        equilibria,
        pone,
        poa,
        poa_lower_bound,
        published_equilibria,
        published_poa,
    })
}
