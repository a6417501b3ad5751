//! Exhaustive equilibrium search, used to check the closed forms in
//! [`crate::equilibrium`].
//!
//! Every profile's utility is recomputed from scratch by replaying the
//! stage on a copy of the ledger, so the oracle shares no code with the
//! cached stage evaluator beyond the utility definitions themselves.

use std::collections::BTreeSet;

use crate::coding::PacketCombination;
use crate::delay::{accumulate_delay, completion_estimate, completion_time, stage_delay_with};
use crate::error::{Error, Result};
use crate::game::{allowed_actions, Action, ActionProfile, Channel, GameMode, Session};

/// Largest player count the oracle will enumerate.
pub const ENUMERATION_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Pure Nash equilibria: no unilateral deviation strictly raises the
    /// common utility.
    pub equilibria: BTreeSet<ActionProfile>,
    /// Equilibria attaining the highest utility among equilibria.
    pub pone: BTreeSet<ActionProfile>,
    pub best_utility: f64,
    pub worst_utility: f64,
}

impl OracleResult {
    /// Best-to-worst equilibrium cost ratio.
    pub fn poa(&self) -> f64 {
        // costs are the negated utilities
        let (min_cost, max_cost) = (-self.best_utility, -self.worst_utility);
        if max_cost == 0.0 {
            1.0
        } else {
            min_cost / max_cost
        }
    }
}

/// Utility of `profile`, recomputed from the session without caching.
pub fn reference_utility(
    session: &Session,
    combinations: &[PacketCombination],
    channel: Channel<'_>,
    game: GameMode,
    profile: &ActionProfile,
) -> Result<f64> {
    let m = session.players();
    let wanting = session.wanting();
    let (peak, increment) = match channel {
        Channel::Expected => {
            // fractional increments cannot go through the integer ledger
            let delay: Vec<f64> = match profile.sole_transmitter() {
                Some(j) => stage_delay_with(j, &combinations[j], &session.state, |k| {
                    session.model.success(k, j)
                })
                .0,
                None => (0..m).map(|i| f64::from(u8::from(wanting.contains(i)))).collect(),
            };
            let peak = (0..m)
                .map(|i| {
                    completion_time(
                        session.ledger.initial_wants[i] as f64,
                        session.ledger.cumulative_delay[i] as f64 + delay[i],
                        session.model.avg_erasure(i),
                    )
                })
                .fold(0.0, f64::max);
            (peak, delay.iter().sum::<f64>())
        }
        Channel::Deterministic | Channel::Realized(_) => {
            let mut ledger = session.ledger.clone();
            let single = profile.sole_transmitter().map(|j| {
                stage_delay_with(j, &combinations[j], &session.state, |k| match channel {
                    Channel::Realized(omega) => f64::from(u8::from(omega.received(k, j))),
                    _ => 1.0,
                })
            });
            accumulate_delay(&mut ledger, profile, single.as_ref(), &wanting)?;
            let after = completion_estimate(
                &ledger.initial_wants,
                &ledger.cumulative_delay,
                session.model.avg_erasures(),
            )?;
            let increment: u64 = ledger
                .cumulative_delay
                .iter()
                .zip(&session.ledger.cumulative_delay)
                .map(|(a, b)| a - b)
                .sum();
            (after.max_norm, increment as f64)
        }
    };
    Ok(match game {
        GameMode::Game1 => -peak,
        GameMode::Game2 => -peak - profile.transmitters() as f64 - increment / m as f64,
    })
}

/// Enumerates every profile allowed by the back-off counters and keeps the
/// pure Nash equilibria and the Pareto-optimal ones among them.
pub fn brute_force_ne(session: &Session, channel: Channel<'_>, game: GameMode) -> Result<OracleResult> {
    let m = session.players();
    if m > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            players: m,
            cap: ENUMERATION_CAP,
        });
    }
    let combinations = session.combinations()?;
    let backoff = session.backoff();
    let may_transmit: Vec<bool> = (0..m)
        .map(|i| allowed_actions(i, &backoff, game).contains(&Action::Transmit))
        .collect();
    let allowed_mask = may_transmit
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .fold(0u64, |acc, (i, _)| acc | 1 << i);

    let mut utility = vec![f64::NAN; 1 << m];
    for mask in 0..(1u64 << m) {
        if mask & !allowed_mask == 0 {
            let profile = ActionProfile::from_mask(m, mask);
            utility[mask as usize] = reference_utility(session, &combinations, channel, game, &profile)?;
        }
    }

    let mut equilibria = BTreeSet::new();
    for mask in 0..(1u64 << m) {
        if mask & !allowed_mask != 0 {
            continue;
        }
        let here = utility[mask as usize];
        let stable = (0..m)
            .filter(|&i| may_transmit[i])
            .all(|i| utility[(mask ^ (1 << i)) as usize] <= here);
        if stable {
            equilibria.insert(ActionProfile::from_mask(m, mask));
        }
    }
    let values: Vec<f64> = equilibria.iter().map(|p| utility[p.mask() as usize]).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    let pone = equilibria
        .iter()
        .filter(|p| utility[p.mask() as usize] == best)
        .cloned()
        .collect();
    Ok(OracleResult {
        equilibria,
        pone,
        best_utility: best,
        worst_utility: worst,
    })
}
