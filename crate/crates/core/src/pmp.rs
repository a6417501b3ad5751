//! Point-to-multipoint baseline: the base station holds the whole frame and
//! serves every player itself with instantly decodable combinations.

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::coding::{exact_combination, greedy_combination, target_set, PacketCombination};
use crate::delay::completion_time;
use crate::error::{check_probability, Error, Result};
use crate::experiment::EpisodeSummary;
use crate::session::{run_init_phase, PlayerSet, SideInformationState, DEFAULT_RETRANSMISSION_CAP};

/// Frames up to this many packets are searched exhaustively.
pub const PMP_EXHAUSTIVE_PACKETS: usize = 20;

/// Recovery state of a base-station-only session.
#[derive(Debug, Clone, PartialEq)]
pub struct PmpSession {
    pub state: SideInformationState,
    pub bs_erasure: Vec<f64>,
    pub initial_wants: Vec<u64>,
    pub cumulative_delay: Vec<u64>,
    pub slots: u64,
}

impl PmpSession {
    pub fn new(state: SideInformationState, bs_erasure: Vec<f64>) -> Result<Self> {
        if bs_erasure.len() != state.players() {
            return Err(Error::Dimension(format!(
                "{} players but {} base-station erasures",
                state.players(),
                bs_erasure.len()
            )));
        }
        for (i, &q) in bs_erasure.iter().enumerate() {
            check_probability(format!("q[{i}]"), q)?;
        }
        Ok(PmpSession {
            initial_wants: state.wants_counts(),
            cumulative_delay: vec![0; state.players()],
            state,
            bs_erasure,
            slots: 0,
        })
    }

    pub fn completion(&self) -> Vec<f64> {
        (0..self.state.players())
            .map(|i| {
                completion_time(
                    self.initial_wants[i] as f64,
                    self.cumulative_delay[i] as f64,
                    self.bs_erasure[i],
                )
            })
            .collect()
    }

    /// Wanting players whose estimate would pass the current maximum after
    /// one more unit of delay.
    pub fn critical_set(&self) -> PlayerSet {
        let c = self.completion();
        let cmax = c.iter().copied().fold(0.0, f64::max);
        let mut out = PlayerSet::with_capacity(c.len());
        out.extend((0..c.len()).filter(|&i| {
            self.state.wants_count(i) > 0
                && completion_time(
                    self.initial_wants[i] as f64,
                    self.cumulative_delay[i] as f64 + 1.0,
                    self.bs_erasure[i],
                ) > cmax
        }));
        out
    }

    /// The base station's combination for the next slot.
    pub fn select(&self) -> PacketCombination {
        let m = self.state.players();
        let priority = self.critical_set();
        let mut wanted = FixedBitSet::with_capacity(self.state.packets());
        for i in 0..m {
            wanted.union_with(self.state.wants(i));
        }
        if self.state.packets() <= PMP_EXHAUSTIVE_PACKETS {
            let success: Vec<f64> = self.bs_erasure.iter().map(|q| 1.0 - q).collect();
            if let Ok(kappa) =
                exact_combination(&wanted, None, &self.state, &success, Some(&priority), PMP_EXHAUSTIVE_PACKETS)
            {
                return kappa;
            }
        }
        let weights: Vec<f64> = self.bs_erasure.iter().map(|q| 1.0 / (1.0 - q)).collect();
        greedy_combination(&wanted, None, &self.state, &weights, Some(&priority))
    }
}

/// What one base-station slot did.
#[derive(Debug, Clone, PartialEq)]
pub struct PmpStep {
    pub kappa: PacketCombination,
    pub decoded: Vec<(usize, usize)>,
    pub delayed: Vec<usize>,
}

/// One broadcast: targeted receivers decode, other wanting receivers accrue
/// a unit of delay.
pub fn pmp_step<R: Rng + ?Sized>(session: &mut PmpSession, rng: &mut R) -> Result<PmpStep> {
    if session.state.is_complete() {
        return Err(Error::SessionComplete);
    }
    let kappa = session.select();
    let targets = target_set(&kappa, &session.state);
    let mut decoded = Vec::new();
    let mut delayed = Vec::new();
    for i in 0..session.state.players() {
        if session.state.wants_count(i) == 0 || rng.random_bool(session.bs_erasure[i]) {
            continue;
        }
        if targets.is_targeted(i) {
            let p = kappa
                .packets()
                .find(|&p| session.state.is_wanted(i, p))
                .expect("a targeted player wants exactly one packet of the combination");
            decoded.push((i, p));
        } else {
            delayed.push(i);
        }
    }
    for &(i, p) in &decoded {
        session.state.set_wanted(i, p, false);
    }
    for &i in &delayed {
        session.cumulative_delay[i] += 1;
    }
    session.slots += 1;
    Ok(PmpStep {
        kappa,
        decoded,
        delayed,
    })
}

/// Serves `state` until it is complete or `slot_cap` slots have passed.
pub fn run_pmp_from<R: Rng + ?Sized>(
    state: SideInformationState,
    bs_erasure: &[f64],
    rng: &mut R,
    slot_cap: u64,
) -> Result<EpisodeSummary> {
    let mut session = PmpSession::new(state, bs_erasure.to_vec())?;
    while !session.state.is_complete() && session.slots < slot_cap {
        pmp_step(&mut session, rng)?;
    }
    let estimate = session.completion();
    Ok(EpisodeSummary {
        slots: session.slots,
        mean_estimate: if estimate.is_empty() {
            0.0
        } else {
            estimate.iter().sum::<f64>() / estimate.len() as f64
        },
        total_delay: session.cumulative_delay.iter().sum(),
        censored: !session.state.is_complete(),
    })
}

/// Initial broadcast followed by base-station recovery.
pub fn run_pmp_episode<R: Rng + ?Sized>(
    players: usize,
    packets: usize,
    bs_erasure: &[f64],
    rng: &mut R,
    slot_cap: u64,
) -> Result<EpisodeSummary> {
    let state = run_init_phase(players, packets, bs_erasure, rng, DEFAULT_RETRANSMISSION_CAP)?;
    run_pmp_from(state, bs_erasure, rng, slot_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn crossed_wants_finish_in_one_slot() {
        let state = SideInformationState::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        let mut s = PmpSession::new(state, vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let step = pmp_step(&mut s, &mut rng).unwrap();
        assert_eq!(step.kappa.bits(), vec![1, 1]);
        assert!(s.state.is_complete());
        assert!(pmp_step(&mut s, &mut rng).is_err());
    }

    #[test]
    fn distinct_single_wants_finish_in_one_slot() {
        let state = SideInformationState::from_rows(&[[1u8, 0, 0], [0, 1, 0], [0, 0, 1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = run_pmp_from(state, &[0.0; 3], &mut rng, 300).unwrap();
        assert_eq!(r.slots, 1);
        assert!(!r.censored);
        assert_eq!(r.total_delay, 0);
    }

    #[test]
    fn empty_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = run_pmp_episode(4, 0, &[0.3; 4], &mut rng, 0).unwrap();
        assert_eq!(r.slots, 0);
        assert!(!r.censored);
    }

    #[test]
    fn large_frames_use_the_greedy() {
        let rows: Vec<Vec<u8>> = (0..3).map(|i| (0..25).map(|p| u8::from(p % 3 == i)).collect()).collect();
        let state = SideInformationState::from_rows(&rows).unwrap();
        let s = PmpSession::new(state, vec![0.1; 3]).unwrap();
        let kappa = s.select();
        assert_eq!(target_set(&kappa, &s.state).count(), 3);
    }

    #[test]
    fn episodes_are_reproducible() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_pmp_episode(10, 12, &[0.3; 10], &mut rng, 1200).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert!(!run(9).censored);
    }

    #[test]
    fn slot_cap_censors() {
        let state = SideInformationState::from_rows(&[[1u8, 1], [1, 0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = run_pmp_from(state, &[0.5, 0.5], &mut rng, 0).unwrap();
        assert!(r.censored);
        assert_eq!(r.slots, 0);
    }
}
