//! Session data: who has what, how lossy the links are, and the running
//! bookkeeping of the recovery phase.
//!
//! Players and packets are indexed from zero throughout the crate.

use std::collections::VecDeque;
use std::fmt;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// A set of player indices.
pub type PlayerSet = FixedBitSet;

/// Broadcast attempts allowed per packet during the initial phase.
pub const DEFAULT_RETRANSMISSION_CAP: u32 = 10_000;

/// The M x N state matrix: entry (i, j) is set when player `i` still wants
/// packet `j`, and clear when the packet sits in its Has set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SideInformationState {
    packets: usize,
    wants: Vec<FixedBitSet>,
}

impl SideInformationState {
    /// A state where every player already holds every packet.
    pub fn complete(players: usize, packets: usize) -> Self {
        SideInformationState {
            packets,
            wants: vec![FixedBitSet::with_capacity(packets); players],
        }
    }

    /// Builds a state from 0/1 rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let packets = rows.first().map_or(0, |r| r.as_ref().len());
        let mut state = Self::complete(rows.len(), packets);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != packets {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {packets}",
                    row.len()
                )));
            }
            for (j, &bit) in row.iter().enumerate() {
                match bit {
                    0 => {}
                    1 => state.wants[i].insert(j),
                    other => {
                        return Err(Error::Dimension(format!(
                            "entry ({i}, {j}) is {other}, expected 0 or 1"
                        )))
                    }
                }
            }
        }
        Ok(state)
    }

    pub fn players(&self) -> usize {
        self.wants.len()
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    /// The Wants set of player `i`.
    pub fn wants(&self, i: usize) -> &FixedBitSet {
        &self.wants[i]
    }

    /// The Has set of player `i`.
    pub fn has(&self, i: usize) -> FixedBitSet {
        let mut has = self.wants[i].clone();
        has.toggle_range(..);
        has
    }

    pub fn is_wanted(&self, player: usize, packet: usize) -> bool {
        self.wants[player].contains(packet)
    }

    pub fn wants_count(&self, i: usize) -> usize {
        self.wants[i].count_ones(..)
    }

    pub fn set_wanted(&mut self, player: usize, packet: usize, wanted: bool) {
        self.wants[player].set(packet, wanted);
    }

    /// Every packet must be held by at least one player.
    pub fn check_column_condition(&self) -> Result<()> {
        for j in 0..self.packets {
            if self.wants.iter().all(|w| w.contains(j)) && !self.wants.is_empty() {
                return Err(Error::UnheldPacket(j));
            }
        }
        Ok(())
    }

    /// True once every Wants set is empty.
    pub fn is_complete(&self) -> bool {
        self.wants.iter().all(|w| w.is_clear())
    }

    /// Row sums of the state matrix.
    pub fn wants_counts(&self) -> Vec<u64> {
        self.wants.iter().map(|w| w.count_ones(..) as u64).collect()
    }

    /// Row `i` as 0/1 bytes.
    pub fn row(&self, i: usize) -> Vec<u8> {
        (0..self.packets)
            .map(|j| u8::from(self.wants[i].contains(j)))
            .collect()
    }
}

impl fmt::Debug for SideInformationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SideInformationState[")?;
        for i in 0..self.players() {
            if i > 0 {
                write!(f, ",")?;
            }
            for b in self.row(i) {
                write!(f, "{b}")?;
            }
        }
        write!(f, "]")
    }
}

/// True iff the state matrix is all zeros.
pub fn is_complete(state: &SideInformationState) -> bool {
    state.is_complete()
}

/// Which erasures are averaged into a player's mean erasure probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgErasureDirection {
    /// Row `i` of the erasure matrix: links into player `i`.
    #[default]
    Incoming,
    /// Column `i`: links out of player `i`.
    Outgoing,
}

/// Link erasure probabilities between players and from the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureModel {
    players: usize,
    // row-major, entry (i, j): packet sent by j lost at i
    player: Vec<f64>,
    bs: Vec<f64>,
    avg: Vec<f64>,
    direction: AvgErasureDirection,
}

impl ErasureModel {
    pub fn new(player: Vec<Vec<f64>>, bs: Vec<f64>) -> Result<Self> {
        Self::with_direction(player, bs, AvgErasureDirection::Incoming)
    }

    pub fn with_direction(
        player: Vec<Vec<f64>>,
        bs: Vec<f64>,
        direction: AvgErasureDirection,
    ) -> Result<Self> {
        let m = player.len();
        if bs.len() != m {
            return Err(Error::Dimension(format!(
                "{m} players but {} base-station erasures",
                bs.len()
            )));
        }
        let mut flat = Vec::with_capacity(m * m);
        for (i, row) in player.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "erasure row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                check_probability(format!("p[{i}][{j}]"), p)?;
                if i == j && p != 0.0 {
                    return Err(Error::SelfLink(i));
                }
            }
            flat.extend_from_slice(row);
        }
        for (i, &q) in bs.iter().enumerate() {
            check_probability(format!("q[{i}]"), q)?;
        }
        let avg = (0..m)
            .map(|i| {
                let sum: f64 = match direction {
                    AvgErasureDirection::Incoming => (0..m).map(|j| flat[i * m + j]).sum(),
                    AvgErasureDirection::Outgoing => (0..m).map(|j| flat[j * m + i]).sum(),
                };
                sum / m as f64
            })
            .collect::<Vec<_>>();
        for (i, &a) in avg.iter().enumerate() {
            check_probability(format!("average erasure of player {i}"), a)?;
        }
        Ok(ErasureModel {
            players: m,
            player: flat,
            bs,
            avg,
            direction,
        })
    }

    /// Every off-diagonal link loses with probability `p`, every base-station
    /// link with probability `q`.
    pub fn uniform(players: usize, p: f64, q: f64) -> Result<Self> {
        let matrix = (0..players)
            .map(|i| {
                (0..players)
                    .map(|j| if i == j { 0.0 } else { p })
                    .collect()
            })
            .collect();
        Self::new(matrix, vec![q; players])
    }

    pub fn players(&self) -> usize {
        self.players
    }

    /// Probability that a packet sent by `sender` is lost at `receiver`.
    pub fn erasure(&self, receiver: usize, sender: usize) -> f64 {
        self.player[receiver * self.players + sender]
    }

    pub fn success(&self, receiver: usize, sender: usize) -> f64 {
        1.0 - self.erasure(receiver, sender)
    }

    pub fn bs_erasure(&self, i: usize) -> f64 {
        self.bs[i]
    }

    pub fn bs_erasures(&self) -> &[f64] {
        &self.bs
    }

    /// Mean erasure probability of player `i`, including the zero self-term.
    pub fn avg_erasure(&self, i: usize) -> f64 {
        self.avg[i]
    }

    pub fn avg_erasures(&self) -> &[f64] {
        &self.avg
    }

    pub fn direction(&self) -> AvgErasureDirection {
        self.direction
    }

    /// The matrix as nested rows.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.player
            .chunks(self.players.max(1))
            .take(self.players)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// One draw of every player-to-player link. Entry (i, j) is set when a
/// packet sent by `j` reaches `i`; the diagonal is always set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRealization {
    received: Vec<FixedBitSet>,
}

impl ChannelRealization {
    /// The erasure-free realization.
    pub fn all_ones(players: usize) -> Self {
        let mut row = FixedBitSet::with_capacity(players);
        row.insert_range(..);
        ChannelRealization {
            received: vec![row; players],
        }
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let mut out = Self::all_ones(m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "realization row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, &bit) in row.iter().enumerate() {
                if i != j {
                    out.received[i].set(j, bit != 0);
                }
            }
        }
        Ok(out)
    }

    pub fn players(&self) -> usize {
        self.received.len()
    }

    pub fn received(&self, receiver: usize, sender: usize) -> bool {
        self.received[receiver].contains(sender)
    }

    pub fn set_received(&mut self, receiver: usize, sender: usize, ok: bool) {
        if receiver != sender {
            self.received[receiver].set(sender, ok);
        }
    }

    /// Row-major 0/1 entries.
    pub fn bits(&self) -> Vec<u8> {
        let m = self.players();
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| u8::from(self.received(i, j)))
            .collect()
    }
}

/// Draws every off-diagonal link independently: received with probability
/// `1 - p_ij`.
pub fn sample_channel<R: Rng + ?Sized>(model: &ErasureModel, rng: &mut R) -> ChannelRealization {
    let m = model.players();
    let mut omega = ChannelRealization::all_ones(m);
    for i in 0..m {
        for j in 0..m {
            if i != j && rng.random_bool(model.erasure(i, j)) {
                omega.set_received(i, j, false);
            }
        }
    }
    omega
}

/// Base-station broadcast of the whole frame. A packet nobody received is
/// broadcast again, up to `cap` attempts.
pub fn run_init_phase<R: Rng + ?Sized>(
    players: usize,
    packets: usize,
    bs_erasure: &[f64],
    rng: &mut R,
    cap: u32,
) -> Result<SideInformationState> {
    if players == 0 {
        return Err(Error::Dimension("at least one player is required".into()));
    }
    if bs_erasure.len() != players {
        return Err(Error::Dimension(format!(
            "{players} players but {} base-station erasures",
            bs_erasure.len()
        )));
    }
    for (i, &q) in bs_erasure.iter().enumerate() {
        check_probability(format!("q[{i}]"), q)?;
    }
    let mut state = SideInformationState::complete(players, packets);
    let mut lost = vec![false; players];
    for j in 0..packets {
        let mut attempts = 0;
        loop {
            if attempts == cap {
                return Err(Error::RetransmissionCap { packet: j, attempts });
            }
            attempts += 1;
            for (slot, &q) in lost.iter_mut().zip(bs_erasure) {
                *slot = rng.random_bool(q);
            }
            if lost.iter().any(|&l| !l) {
                break;
            }
        }
        for (i, &l) in lost.iter().enumerate() {
            state.set_wanted(i, j, l);
        }
    }
    Ok(state)
}

/// The last `V` collision indicators, oldest first. Stages before the first
/// one count as collision-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionWindow {
    players: usize,
    columns: VecDeque<Vec<bool>>,
}

impl CollisionWindow {
    pub fn new(players: usize, length: usize) -> Self {
        CollisionWindow {
            players,
            columns: std::iter::repeat_n(vec![false; players], length).collect(),
        }
    }

    /// Builds a window from explicit columns, oldest first.
    pub fn from_columns(players: usize, columns: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != players) {
            return Err(Error::Dimension(format!(
                "collision column has {} entries, expected {players}",
                c.len()
            )));
        }
        Ok(CollisionWindow {
            players,
            columns: columns.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn columns(&self) -> impl Iterator<Item = &[bool]> {
        self.columns.iter().map(Vec::as_slice)
    }

    /// Drops the oldest column and appends `latest`.
    pub fn shift(&mut self, latest: Vec<bool>) {
        if self.columns.is_empty() {
            return;
        }
        self.columns.pop_front();
        self.columns.push_back(latest);
    }
}

/// Running bookkeeping of the recovery phase. Together with the state
/// matrix this is everything the engine needs from the history.
#[derive(Debug, Clone, PartialEq)]
pub struct GameLedger {
    pub cumulative_delay: Vec<u64>,
    pub initial_wants: Vec<u64>,
    /// Index of the stage about to be played, starting at 1.
    pub stage: u64,
    pub collisions: CollisionWindow,
}

impl GameLedger {
    /// Fresh ledger at the start of the recovery phase.
    pub fn start(state: &SideInformationState, punishment: usize) -> Self {
        let m = state.players();
        GameLedger {
            cumulative_delay: vec![0; m],
            initial_wants: state.wants_counts(),
            stage: 1,
            collisions: CollisionWindow::new(m, punishment),
        }
    }

    pub fn punishment(&self) -> usize {
        self.collisions.len()
    }
}
