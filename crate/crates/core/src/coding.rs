//! Binary XOR packet combinations and who can instantly decode them.

use std::cmp::Ordering;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::session::{ErasureModel, PlayerSet, SideInformationState};

/// Default cap on the Has-set size for exhaustive selection.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 20;

/// The packets XORed into one coded transmission. The empty mask means
/// "nothing to send".
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketCombination(FixedBitSet);

impl PacketCombination {
    pub fn empty(packets: usize) -> Self {
        PacketCombination(FixedBitSet::with_capacity(packets))
    }

    pub fn from_packets(packets: usize, included: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = FixedBitSet::with_capacity(packets);
        mask.extend(included);
        PacketCombination(mask)
    }

    pub fn mask(&self) -> &FixedBitSet {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn contains(&self, packet: usize) -> bool {
        self.0.contains(packet)
    }

    pub fn packets(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    /// The combination as 0/1 bytes.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.0.len()).map(|j| u8::from(self.0.contains(j))).collect()
    }
}

impl std::fmt::Debug for PacketCombination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}

/// Players able to instantly decode a combination: exactly one of its
/// packets is in their Wants set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TargetVector(PlayerSet);

impl TargetVector {
    pub fn is_targeted(&self, player: usize) -> bool {
        self.0.contains(player)
    }

    pub fn set(&self) -> &PlayerSet {
        &self.0
    }

    pub fn count(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn players(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }
}

impl std::fmt::Debug for TargetVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.0.ones()).finish()
    }
}

/// Players whose Wants set is non-empty.
pub fn wants_indicator(state: &SideInformationState) -> PlayerSet {
    let mut out = PlayerSet::with_capacity(state.players());
    out.extend((0..state.players()).filter(|&i| state.wants_count(i) > 0));
    out
}

/// Exact evaluation of the instant-decodability test for every player.
pub fn target_set(kappa: &PacketCombination, state: &SideInformationState) -> TargetVector {
    let mut out = PlayerSet::with_capacity(state.players());
    out.extend(
        (0..state.players()).filter(|&i| state.wants(i).intersection_count(kappa.mask()) == 1),
    );
    TargetVector(out)
}

/// Greedy combination for player `i`: critical players first, then the
/// least reliable receivers, then by index.
pub fn select_combination_greedy(
    i: usize,
    state: &SideInformationState,
    model: &ErasureModel,
    priority: Option<&PlayerSet>,
) -> PacketCombination {
    let weights: Vec<f64> = model
        .avg_erasures()
        .iter()
        .map(|p| 1.0 / (1.0 - p))
        .collect();
    greedy_combination(&state.has(i), Some(i), state, &weights, priority)
}

/// Exhaustive combination for player `i`. Maximises, in order, the number
/// of targeted priority players, the number of targeted players and the
/// summed delivery probability; ties go to the smallest mask.
pub fn select_combination_exact(
    i: usize,
    state: &SideInformationState,
    model: &ErasureModel,
    priority: Option<&PlayerSet>,
    cap: usize,
) -> Result<PacketCombination> {
    let success: Vec<f64> = (0..state.players()).map(|j| model.success(j, i)).collect();
    exact_combination(&state.has(i), Some(i), state, &success, priority, cap).map_err(|holds| {
        Error::SearchCap {
            player: i,
            holds,
            cap,
        }
    })
}

pub(crate) fn greedy_combination(
    has: &FixedBitSet,
    sender: Option<usize>,
    state: &SideInformationState,
    weights: &[f64],
    priority: Option<&PlayerSet>,
) -> PacketCombination {
    let in_priority = |j: usize| priority.is_some_and(|p| p.contains(j));
    let mut order: Vec<usize> = (0..state.players())
        .filter(|&j| Some(j) != sender && state.wants_count(j) > 0)
        .collect();
    order.sort_by(|&a, &b| {
        in_priority(b)
            .cmp(&in_priority(a))
            .then_with(|| weights[b].total_cmp(&weights[a]))
            .then_with(|| a.cmp(&b))
    });

    let mut chosen = FixedBitSet::with_capacity(state.packets());
    // packets held by the sender and by every player targeted so far
    let mut usable = has.clone();
    for j in order {
        let wants = state.wants(j);
        if !chosen.is_disjoint(wants) {
            continue;
        }
        if let Some(p) = wants.intersection(&usable).next() {
            chosen.insert(p);
            usable.difference_with(wants);
        }
    }
    PacketCombination(chosen)
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) struct Objective {
    pub priority_hits: usize,
    pub hits: usize,
    pub reliability: f64,
}

impl Objective {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority_hits
            .cmp(&other.priority_hits)
            .then(self.hits.cmp(&other.hits))
            .then(self.reliability.total_cmp(&other.reliability))
    }
}

/// Exhaustive search over subsets of `has`; `Err` carries the Has-set size
/// when it exceeds `cap`.
pub(crate) fn exact_combination(
    has: &FixedBitSet,
    sender: Option<usize>,
    state: &SideInformationState,
    success: &[f64],
    priority: Option<&PlayerSet>,
    cap: usize,
) -> std::result::Result<PacketCombination, usize> {
    let held: Vec<usize> = has.ones().collect();
    if held.len() > cap || held.len() >= 32 {
        return Err(held.len());
    }
    // Each receiver's Wants set projected onto the sender's Has set, as a
    // bit mask over positions in `held`. Ascending packet order keeps the
    // numeric order of sub-masks equal to the order of combination masks.
    let receivers: Vec<(usize, u32)> = (0..state.players())
        .filter(|&j| Some(j) != sender)
        .map(|j| {
            let wanted = held
                .iter()
                .enumerate()
                .filter(|&(_, &p)| state.is_wanted(j, p))
                .fold(0u32, |acc, (b, _)| acc | (1 << b));
            (j, wanted)
        })
        .filter(|&(_, w)| w != 0)
        .collect();

    let mut best_sub = 0u32;
    let mut best = Objective {
        priority_hits: 0,
        hits: 0,
        reliability: 0.0,
    };
    for sub in 1..(1u32 << held.len()) {
        let mut score = Objective {
            priority_hits: 0,
            hits: 0,
            reliability: 0.0,
        };
        for &(j, wanted) in &receivers {
            if (sub & wanted).count_ones() == 1 {
                score.hits += 1;
                score.reliability += success[j];
                if priority.is_some_and(|p| p.contains(j)) {
                    score.priority_hits += 1;
                }
            }
        }
        if score.cmp(&best) == Ordering::Greater {
            best = score;
            best_sub = sub;
        }
    }
    Ok(PacketCombination::from_packets(
        state.packets(),
        held.iter()
            .enumerate()
            .filter(|&(b, _)| best_sub & (1 << b) != 0)
            .map(|(_, &p)| p),
    ))
}
