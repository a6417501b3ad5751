//! Best-response dynamics run before each transmission to pick the stage's
//! action profile.

use crate::coding::target_set;
use crate::error::{Error, Result};
use crate::game::{Action, ActionProfile, Channel, ChannelMode, GameMode, Session, StageEvaluator};

/// Utility of `profile` with every reception indicator replaced by its
/// success probability.
pub fn expected_utility(profile: &ActionProfile, session: &Session, game: GameMode) -> Result<f64> {
    Ok(session.evaluator(Channel::Expected)?.utility(game, profile))
}

/// Default sweep cap: four passes per player.
pub fn sweep_cap(players: usize) -> usize {
    4 * players.max(1)
}

/// Result of [`best_response_sweep`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    pub profile: ActionProfile,
    pub sweeps: usize,
}

/// Starting from silence, lets the players in `order` best-respond in turn
/// until a full pass changes nothing. A player transmits only when that is
/// strictly better; ties go to silence. Players whose combination is empty
/// have nothing to send and stay silent. With `single_sweep` only one pass
/// is made.
pub fn best_response_sweep(
    ev: &StageEvaluator,
    order: &[usize],
    game: GameMode,
    single_sweep: bool,
) -> Result<SweepResult> {
    let m = ev.players();
    if order.len() != m || {
        let mut seen = vec![false; m];
        !order.iter().all(|&i| i < m && !std::mem::replace(&mut seen[i], true))
    } {
        return Err(Error::Dimension(format!("sweep order must be a permutation of 0..{m}")));
    }
    let may_transmit: Vec<bool> = (0..m)
        .map(|i| {
            !ev.combinations()[i].is_empty()
                && crate::game::allowed_actions(i, ev.backoff(), game).contains(&Action::Transmit)
        })
        .collect();
    let mut profile = ActionProfile::silent(m);
    let cap = sweep_cap(m);
    for sweep in 1..=cap {
        let mut changed = false;
        for &i in order {
            let transmit = may_transmit[i]
                && ev.utility(game, &profile.with(i, true)) > ev.utility(game, &profile.with(i, false));
            if transmit != profile.transmits(i) {
                profile.set(i, transmit);
                changed = true;
            }
        }
        if !changed || single_sweep {
            return Ok(SweepResult { profile, sweeps: sweep });
        }
    }
    Err(Error::NoConvergence(cap))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningConfig {
    /// Replace an all-silent outcome by the best lone transmitter when one
    /// can reach somebody.
    pub liveness: bool,
    pub single_sweep: bool,
    /// Channel used for the virtual sweeps; deterministic or expected.
    pub channel: ChannelMode,
    /// Sweep order; ascending index when `None`.
    pub order: Option<Vec<usize>>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            liveness: true,
            single_sweep: false,
            channel: ChannelMode::Expected,
            order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub profile: ActionProfile,
    /// The liveness rule replaced a silent fixed point.
    pub overridden: bool,
    pub sweeps: usize,
}

/// The profile the players settle on this stage.
pub fn resolve_stage_action(session: &Session, config: &LearningConfig) -> Result<Resolution> {
    if session.is_complete() {
        return Err(Error::SessionComplete);
    }
    let channel = match config.channel {
        ChannelMode::Deterministic => Channel::Deterministic,
        ChannelMode::Expected => Channel::Expected,
        ChannelMode::Realized => {
            return Err(Error::ChannelMode(
                "actions are chosen before the channel is sampled".into(),
            ))
        }
    };
    let ev = session.evaluator(channel)?;
    let m = session.players();
    let order: Vec<usize> = config.order.clone().unwrap_or_else(|| (0..m).collect());
    let game = session.config.game;
    let SweepResult { profile, sweeps } = best_response_sweep(&ev, &order, game, config.single_sweep)?;

    if config.liveness && profile.transmitters() == 0 {
        if let Some(j) = liveness_choice(session, &ev) {
            return Ok(Resolution {
                profile: ActionProfile::singleton(m, j),
                overridden: true,
                sweeps,
            });
        }
    }
    Ok(Resolution {
        profile,
        overridden: false,
        sweeps,
    })
}

/// The eligible player with the most targets, then the least reliable
/// incoming links, then the lowest index.
fn liveness_choice(session: &Session, ev: &StageEvaluator) -> Option<usize> {
    (0..session.players())
        .filter(|&j| ev.allowed_actions(j).contains(&Action::Transmit))
        .map(|j| {
            let targets = target_set(&ev.combinations()[j], &session.state).count();
            (j, targets, 1.0 / (1.0 - session.model.avg_erasure(j)))
        })
        .filter(|&(_, targets, _)| targets > 0)
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.2.total_cmp(&b.2))
                .then(b.0.cmp(&a.0))
        })
        .map(|(j, _, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{crossed_pair, stalled_trio};
    use crate::game::SessionConfig;
    use crate::session::{CollisionWindow, ErasureModel, SideInformationState};

    fn fidelity() -> LearningConfig {
        LearningConfig {
            liveness: false,
            channel: ChannelMode::Deterministic,
            ..LearningConfig::default()
        }
    }

    #[test]
    fn expected_matches_deterministic_when_only_the_sender_is_delayed() {
        let s = crossed_pair(SessionConfig::game2());
        let u = expected_utility(&ActionProfile::from_bits(&[0, 1]), &s, GameMode::Game2).unwrap();
        assert!((u + 1.0 / 0.95 + 1.0 + 1.0 + 0.5).abs() < 1e-9);
        let silent = expected_utility(&ActionProfile::silent(2), &s, GameMode::Game2).unwrap();
        assert!((silent + 3.25).abs() < 1e-12);
    }

    #[test]
    fn zero_erasure_expected_equals_deterministic() {
        let state = SideInformationState::from_rows(&[[0u8, 1, 1], [1, 0, 0], [0, 1, 0]]).unwrap();
        let s = Session::new(state, ErasureModel::uniform(3, 0.0, 0.0).unwrap(), SessionConfig::game2()).unwrap();
        let det = s.evaluator(Channel::Deterministic).unwrap();
        let exp = s.evaluator(Channel::Expected).unwrap();
        for mask in 0..8 {
            let p = ActionProfile::from_mask(3, mask);
            assert_eq!(det.utility_game2(&p), exp.utility_game2(&p));
        }
    }

    #[test]
    fn crossed_pair_sweeps_settle_on_silence() {
        // each lone transmission costs more than one silent stage
        let s = crossed_pair(SessionConfig::game2());
        let ev = s.evaluator(Channel::Deterministic).unwrap();
        for order in [[0, 1], [1, 0]] {
            let r = best_response_sweep(&ev, &order, GameMode::Game2, false).unwrap();
            assert_eq!(r.profile, ActionProfile::silent(2));
            assert_eq!(r.sweeps, 1);
        }
        let r = best_response_sweep(&ev, &[0, 1], GameMode::Game1, false).unwrap();
        assert_eq!(r.profile, ActionProfile::from_bits(&[0, 1]));
    }

    #[test]
    fn liveness_breaks_the_silent_fixed_point() {
        let s = crossed_pair(SessionConfig::game2());
        let r = resolve_stage_action(&s, &fidelity()).unwrap();
        assert_eq!(r.profile, ActionProfile::silent(2));
        assert!(!r.overridden);
        let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
        // both reach one player; player 0 has the worse incoming links
        assert_eq!(r.profile, ActionProfile::from_bits(&[1, 0]));
        assert!(r.overridden);
    }

    #[test]
    fn stall_state_override_picks_most_targets() {
        let s = stalled_trio(SessionConfig::game2());
        assert!(s.critical_set().is_clear());
        let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
        assert!(r.overridden);
        assert_eq!(r.profile, ActionProfile::from_bits(&[1, 0, 0]));
    }

    #[test]
    fn backed_off_players_stay_silent() {
        let mut s = crossed_pair(SessionConfig::game2());
        s.ledger.collisions = CollisionWindow::from_columns(2, vec![vec![true, true], vec![false, false]]).unwrap();
        let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
        assert_eq!(r.profile, ActionProfile::silent(2));
        assert!(!r.overridden);
    }

    #[test]
    fn single_player_stays_silent() {
        let state = SideInformationState::from_rows(&[[1u8, 0]]).unwrap();
        let s = Session::new(state, ErasureModel::uniform(1, 0.0, 0.0).unwrap(), SessionConfig::game2()).unwrap();
        let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
        assert_eq!(r.profile, ActionProfile::silent(1));
        assert!(!r.overridden);
    }

    #[test]
    fn nothing_to_send_means_silence() {
        // players 0 and 1 want the packet only player 2 holds
        let state = SideInformationState::from_rows(&[[1u8, 0], [1, 0], [0, 0]]).unwrap();
        let model = ErasureModel::uniform(3, 0.3, 0.0).unwrap();
        let s = Session::new(state, model, SessionConfig::game1()).unwrap();
        let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
        assert_eq!(r.profile, ActionProfile::from_bits(&[0, 0, 1]));
        assert!(!r.overridden);
    }

    #[test]
    fn order_must_be_a_permutation() {
        let s = crossed_pair(SessionConfig::game2());
        let ev = s.evaluator(Channel::Deterministic).unwrap();
        assert!(best_response_sweep(&ev, &[0, 0], GameMode::Game2, false).is_err());
        assert!(best_response_sweep(&ev, &[0], GameMode::Game2, false).is_err());
    }

    #[test]
    fn realized_channel_is_rejected() {
        let s = crossed_pair(SessionConfig::game2());
        let cfg = LearningConfig {
            channel: ChannelMode::Realized,
            ..LearningConfig::default()
        };
        assert!(matches!(resolve_stage_action(&s, &cfg), Err(Error::ChannelMode(_))));
    }
}
