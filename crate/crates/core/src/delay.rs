//! Decoding-delay accounting and completion-time estimates.

use crate::coding::{target_set, wants_indicator, PacketCombination};
use crate::error::{check_probability, Error, Result};
use crate::game::ActionProfile;
use crate::session::{ChannelRealization, GameLedger, PlayerSet, SideInformationState};

/// Per-player delay increments of one stage. Entries are 0/1 for realized
/// or deterministic channels and fractional under expected reception.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDelay(pub Vec<f64>);

impl StageDelay {
    /// Unit delay for every wanting player, as charged when not exactly one
    /// player transmits.
    pub fn from_wanting(wanting: &PlayerSet, players: usize) -> Self {
        StageDelay((0..players).map(|i| f64::from(u8::from(wanting.contains(i)))).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Players with a strictly positive increment.
    pub fn delayed(&self) -> PlayerSet {
        let mut out = PlayerSet::with_capacity(self.0.len());
        out.extend(self.0.iter().enumerate().filter(|(_, &d)| d > 0.0).map(|(i, _)| i));
        out
    }
}

/// Delay caused by `sender` transmitting `kappa`: a player accrues one unit
/// when it wants packets, hears the transmission and is not targeted.
/// The sender hears its own slot.
pub fn stage_delay(
    sender: usize,
    kappa: &PacketCombination,
    state: &SideInformationState,
    omega: &ChannelRealization,
) -> StageDelay {
    stage_delay_with(sender, kappa, state, |k| {
        f64::from(u8::from(omega.received(k, sender)))
    })
}

/// [`stage_delay`] with the reception indicator replaced by an arbitrary
/// weight per receiver (1 for deterministic, `1 - p` for expected).
pub fn stage_delay_with(
    sender: usize,
    kappa: &PacketCombination,
    state: &SideInformationState,
    reception: impl Fn(usize) -> f64,
) -> StageDelay {
    let targets = target_set(kappa, state);
    let wanting = wants_indicator(state);
    StageDelay(
        (0..state.players())
            .map(|k| {
                if k == sender {
                    // self-link: always heard, never targeted
                    f64::from(u8::from(wanting.contains(k)))
                } else if wanting.contains(k) && !targets.is_targeted(k) {
                    reception(k)
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Adds one stage's delay to the ledger: the wanting indicator when not
/// exactly one player transmitted, otherwise the transmitter's stage delay.
pub fn accumulate_delay(
    ledger: &mut GameLedger,
    profile: &ActionProfile,
    per_stage: Option<&StageDelay>,
    wanting: &PlayerSet,
) -> Result<()> {
    let m = ledger.cumulative_delay.len();
    if profile.len() != m {
        return Err(Error::Dimension(format!(
            "profile has {} entries, ledger has {m}",
            profile.len()
        )));
    }
    match (profile.transmitters(), per_stage) {
        (1, Some(delay)) => {
            if delay.0.len() != m {
                return Err(Error::DelayPairing(format!(
                    "stage delay has {} entries, expected {m}",
                    delay.0.len()
                )));
            }
            if let Some(bad) = delay.0.iter().find(|&&d| d != 0.0 && d != 1.0) {
                return Err(Error::DelayPairing(format!(
                    "realized stage delay must be 0/1, got {bad}"
                )));
            }
            for (acc, &d) in ledger.cumulative_delay.iter_mut().zip(&delay.0) {
                *acc += d as u64;
            }
        }
        (1, None) => {
            return Err(Error::DelayPairing(
                "a single transmitter needs its stage delay".into(),
            ))
        }
        (_, Some(_)) => {
            return Err(Error::DelayPairing(
                "stage delay given but not exactly one player transmitted".into(),
            ))
        }
        (_, None) => {
            for i in wanting.ones() {
                ledger.cumulative_delay[i] += 1;
            }
        }
    }
    Ok(())
}

/// Estimated completion time of one player, `(W + D - p) / (1 - p)`,
/// floored at zero for players that never wanted anything.
pub fn completion_time(initial_wants: f64, delay: f64, avg_erasure: f64) -> f64 {
    ((initial_wants + delay - avg_erasure) / (1.0 - avg_erasure)).max(0.0)
}

/// Per-player completion estimates and their maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionEstimate {
    pub per_player: Vec<f64>,
    pub max_norm: f64,
}

impl CompletionEstimate {
    pub fn from_values(per_player: Vec<f64>) -> Self {
        let max_norm = per_player.iter().copied().fold(0.0, f64::max);
        CompletionEstimate {
            per_player,
            max_norm,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.per_player.is_empty() {
            0.0
        } else {
            self.per_player.iter().sum::<f64>() / self.per_player.len() as f64
        }
    }
}

/// Completion estimate of every player in a cooperative session.
pub fn completion_estimate(
    initial_wants: &[u64],
    cumulative_delay: &[u64],
    avg_erasure: &[f64],
) -> Result<CompletionEstimate> {
    let m = initial_wants.len();
    if cumulative_delay.len() != m || avg_erasure.len() != m {
        return Err(Error::Dimension("completion estimate inputs differ in length".into()));
    }
    for (i, &p) in avg_erasure.iter().enumerate() {
        check_probability(format!("average erasure of player {i}"), p)?;
    }
    Ok(CompletionEstimate::from_values(
        (0..m)
            .map(|i| completion_time(initial_wants[i] as f64, cumulative_delay[i] as f64, avg_erasure[i]))
            .collect(),
    ))
}

/// Completion estimate of one player served by the base station alone.
pub fn pmp_completion_estimate(initial_wants: u64, cumulative_delay: u64, q: f64) -> Result<f64> {
    check_probability("base-station erasure", q)?;
    Ok(completion_time(initial_wants as f64, cumulative_delay as f64, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::ChannelRealization;

    fn e1() -> SideInformationState {
        SideInformationState::from_rows(&[[0u8, 1], [1, 0]]).unwrap()
    }

    #[test]
    fn transmitter_is_charged_and_target_is_not() {
        let s = e1();
        let k = PacketCombination::from_packets(2, [0]);
        let d = stage_delay(0, &k, &s, &ChannelRealization::all_ones(2));
        assert_eq!(d.values(), &[1.0, 0.0]);
        let mut omega = ChannelRealization::all_ones(2);
        omega.set_received(1, 0, false);
        assert_eq!(stage_delay(0, &k, &s, &omega).values(), &[1.0, 0.0]);
    }

    #[test]
    fn finished_transmitter_reaching_everyone_costs_nothing() {
        let s = SideInformationState::from_rows(&[[0u8, 0], [1, 0], [0, 1]]).unwrap();
        let k = PacketCombination::from_packets(2, [0, 1]);
        let d = stage_delay(0, &k, &s, &ChannelRealization::all_ones(3));
        assert_eq!(d.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn accumulate_branches() {
        let s = e1();
        let wanting = wants_indicator(&s);
        let mut ledger = GameLedger::start(&s, 2);
        accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[1, 1]), None, &wanting).unwrap();
        assert_eq!(ledger.cumulative_delay, vec![1, 1]);

        let mut ledger = GameLedger::start(&s, 2);
        let mut half = PlayerSet::with_capacity(2);
        half.insert(0);
        accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[0, 0]), None, &half).unwrap();
        assert_eq!(ledger.cumulative_delay, vec![1, 0]);

        let mut ledger = GameLedger::start(&s, 2);
        let d = StageDelay(vec![1.0, 0.0]);
        accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[1, 0]), Some(&d), &wanting)
            .unwrap();
        assert_eq!(ledger.cumulative_delay, vec![1, 0]);
    }

    #[test]
    fn accumulate_rejects_bad_pairings() {
        let s = e1();
        let wanting = wants_indicator(&s);
        let mut ledger = GameLedger::start(&s, 0);
        let d = StageDelay(vec![1.0, 0.0]);
        assert!(accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[1, 1]), Some(&d), &wanting).is_err());
        assert!(accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[1, 0]), None, &wanting).is_err());
        let frac = StageDelay(vec![0.5, 0.0]);
        assert!(accumulate_delay(&mut ledger, &ActionProfile::from_bits(&[1, 0]), Some(&frac), &wanting).is_err());
        assert_eq!(ledger.cumulative_delay, vec![0, 0]);
    }

    #[test]
    fn completion_substitutions() {
        let c = completion_estimate(&[2], &[1], &[0.5]).unwrap();
        assert_eq!(c.per_player, vec![5.0]);
        let c = completion_estimate(&[1], &[0], &[0.2]).unwrap();
        assert!((c.per_player[0] - 1.0).abs() < 1e-12);
        let c = completion_estimate(&[1, 1], &[0, 0], &[0.2, 0.05]).unwrap();
        assert!((c.per_player[0] - 1.0).abs() < 1e-12);
        assert!((c.per_player[1] - 1.0).abs() < 1e-12);
        assert!((c.max_norm - 1.0).abs() < 1e-12);
        assert!(completion_estimate(&[1], &[0], &[1.0]).is_err());
    }

    #[test]
    fn pmp_substitutions() {
        assert!((pmp_completion_estimate(3, 2, 0.2).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(pmp_completion_estimate(0, 0, 0.0).unwrap(), 0.0);
        assert_eq!(pmp_completion_estimate(1, 0, 0.5).unwrap(), 1.0);
        assert!(pmp_completion_estimate(1, 0, 1.0).is_err());
    }
}
