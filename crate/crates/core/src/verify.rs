//! Checks of the closed-form analysis against exhaustive search on a
//! seeded corpus of random stage states.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{
    critical_set, ne_set_game1, ne_set_game2, ne_set_game2_published, poa_game1, poa_game2,
};
use crate::error::Result;
use crate::game::{ActionProfile, Channel, ChannelMode, GameMode, Session, SessionConfig};
use crate::learning::{resolve_stage_action, LearningConfig};
use crate::oracle::{brute_force_ne, reference_utility};
use crate::session::{ErasureModel, SideInformationState};
use crate::snapshot::Snapshot;

pub const POA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusConfig {
    pub players: std::ops::RangeInclusive<usize>,
    pub packets: std::ops::RangeInclusive<usize>,
    /// States per player count.
    pub per_size: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            players: 2..=6,
            packets: 4..=10,
            per_size: 200,
            seed: 7,
        }
    }
}

/// A random mid-recovery state: every packet held by someone, at least one
/// player still wanting, delays up to 4 and initial wants at least the
/// current ones.
pub fn random_stage_state<R: Rng + ?Sized>(players: usize, packets: usize, rng: &mut R) -> Result<Snapshot> {
    let density = rng.random_range(0.15..0.6);
    let mut rows: Vec<Vec<u8>> = (0..players)
        .map(|_| (0..packets).map(|_| u8::from(rng.random_bool(density))).collect())
        .collect();
    for j in 0..packets {
        if rows.iter().all(|r| r[j] == 1) {
            rows[rng.random_range(0..players)][j] = 0;
        }
    }
    if rows.iter().all(|r| r.iter().all(|&b| b == 0)) && packets > 0 && players > 1 {
        rows[rng.random_range(0..players)][rng.random_range(0..packets)] = 1;
    }
    let state = SideInformationState::from_rows(&rows)?;
    let matrix = (0..players)
        .map(|i| {
            (0..players)
                .map(|j| if i == j { 0.0 } else { rng.random_range(0.0..0.6) })
                .collect()
        })
        .collect();
    let q = (0..players).map(|_| rng.random_range(0.0..0.5)).collect();
    let model = ErasureModel::new(matrix, q)?;
    let cumulative_delay = (0..players).map(|_| rng.random_range(0..=4)).collect();
    let initial_wants = state
        .wants_counts()
        .into_iter()
        .map(|w| w + rng.random_range(0..=2))
        .collect();
    Ok(Snapshot {
        state,
        model,
        cumulative_delay,
        initial_wants,
    })
}

/// The corpus, in a fixed order.
pub fn corpus(config: &CorpusConfig) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    for m in config.players.clone() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(m as u64);
        for _ in 0..config.per_size {
            let n = rng.random_range(config.packets.clone());
            out.push(random_stage_state(m, n, &mut rng)?);
        }
    }
    Ok(out)
}

/// Outcome of one check over the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: String,
    pub checked: usize,
    pub failures: usize,
    /// States outside the check's scope.
    pub excluded: usize,
    /// Failures among the excluded states, when they were examined anyway.
    pub excluded_failures: usize,
    /// A few failing cases for diagnosis.
    pub samples: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures == 0
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.samples.len() < 3 {
                self.samples.push(describe());
            }
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} ok",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checked - self.failures,
            self.checked
        )?;
        if self.excluded > 0 {
            write!(f, ", {} excluded ({} mismatched)", self.excluded, self.excluded_failures)?;
        }
        Ok(())
    }
}

fn analysis_session(snap: &Snapshot) -> Result<Session> {
    snap.session(SessionConfig::game2())
}

fn show(set: &std::collections::BTreeSet<ActionProfile>) -> String {
    set.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// Closed-form equilibrium sets against exhaustive search. States without
/// critical players are reported separately.
pub fn check_ne_sets(corpus: &[Snapshot]) -> Result<Vec<SuiteReport>> {
    let mut g1 = SuiteReport::new("game 1 equilibria");
    let mut g2 = SuiteReport::new("game 2 equilibria");
    let mut published = SuiteReport::new("game 2 equilibria, published form");
    for (k, snap) in corpus.iter().enumerate() {
        let s = analysis_session(snap)?;
        let ev = s.evaluator(Channel::Deterministic)?;
        let o1 = brute_force_ne(&s, Channel::Deterministic, GameMode::Game1)?.equilibria;
        let o2 = brute_force_ne(&s, Channel::Deterministic, GameMode::Game2)?.equilibria;
        let c1 = ne_set_game1(&ev)?;
        let c2 = ne_set_game2(&ev)?;
        let p2 = ne_set_game2_published(&ev)?;
        if critical_set(&s).is_clear() {
            for (report, ok) in [(&mut g1, c1 == o1), (&mut g2, c2 == o2), (&mut published, p2 == o2)] {
                report.excluded += 1;
                report.excluded_failures += usize::from(!ok);
            }
            continue;
        }
        g1.record(c1 == o1, || format!("state {k}: closed {} oracle {}", show(&c1), show(&o1)));
        g2.record(c2 == o2, || format!("state {k}: closed {} oracle {}", show(&c2), show(&o2)));
        published.record(p2 == o2, || format!("state {k}: published {} oracle {}", show(&p2), show(&o2)));
    }
    Ok(vec![g1, g2, published])
}

/// Closed-form prices of anarchy against the oracle's best-to-worst cost
/// ratio.
pub fn check_poa(corpus: &[Snapshot]) -> Result<Vec<SuiteReport>> {
    let mut g1 = SuiteReport::new("game 1 price of anarchy");
    let mut g2 = SuiteReport::new("game 2 price of anarchy");
    for (k, snap) in corpus.iter().enumerate() {
        let s = analysis_session(snap)?;
        let ev = s.evaluator(Channel::Deterministic)?;
        let o1 = brute_force_ne(&s, Channel::Deterministic, GameMode::Game1)?.poa();
        let o2 = brute_force_ne(&s, Channel::Deterministic, GameMode::Game2)?.poa();
        let (c1, c2) = (poa_game1(&ev), poa_game2(&ev).poa);
        if critical_set(&s).is_clear() {
            g1.excluded += 1;
            g2.excluded += 1;
            g1.excluded_failures += usize::from((c1 - o1).abs() > POA_TOLERANCE);
            g2.excluded_failures += usize::from((c2 - o2).abs() > POA_TOLERANCE);
            continue;
        }
        g1.record((c1 - o1).abs() <= POA_TOLERANCE, || format!("state {k}: closed {c1} oracle {o1}"));
        g2.record((c2 - o2).abs() <= POA_TOLERANCE, || format!("state {k}: closed {c2} oracle {o2}"));
    }
    Ok(vec![g1, g2])
}

/// `1 >= PoA' >= bound` everywhere, and `PoA' > PoA` whenever a helper
/// exists.
pub fn check_bounds(corpus: &[Snapshot]) -> Result<Vec<SuiteReport>> {
    let mut bound = SuiteReport::new("game 2 price of anarchy bound");
    let mut dominance = SuiteReport::new("game 2 dominates game 1");
    for (k, snap) in corpus.iter().enumerate() {
        let s = analysis_session(snap)?;
        let ev = s.evaluator(Channel::Deterministic)?;
        let p2 = poa_game2(&ev);
        bound.record(p2.poa <= 1.0 && p2.poa >= p2.lower_bound, || {
            format!("state {k}: poa {} bound {}", p2.poa, p2.lower_bound)
        });
        let z = (0..ev.players()).any(|j| ev.single_peak(j) < ev.silent_peak());
        if z {
            let p1 = poa_game1(&ev);
            dominance.record(p2.poa > p1, || format!("state {k}: game 2 {} game 1 {p1}", p2.poa));
        } else {
            dominance.excluded += 1;
        }
    }
    Ok(vec![bound, dominance])
}

/// Every player sees the same utility, and every unilateral deviation
/// changes it by exactly the potential difference. The recomputed utility
/// must also agree bit for bit with the cached evaluator.
pub fn check_potential(corpus: &[Snapshot]) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("exact potential identity");
    for (k, snap) in corpus.iter().enumerate() {
        let s = analysis_session(snap)?;
        let m = s.players();
        let combos = s.combinations()?;
        for channel in [Channel::Deterministic, Channel::Expected] {
            let ev = s.evaluator(channel)?;
            for game in [GameMode::Game1, GameMode::Game2] {
                let potential = |p: &ActionProfile| reference_utility(&s, &combos, channel, game, p);
                for mask in 0..(1u64 << m) {
                    let a = ActionProfile::from_mask(m, mask);
                    let phi_a = potential(&a)?;
                    let mut ok = (0..m).all(|i| ev.utility_for(i, game, &a).to_bits() == phi_a.to_bits());
                    for i in 0..m {
                        let b = a.with(i, !a.transmits(i));
                        let phi_b = potential(&b)?;
                        let du = ev.utility_for(i, game, &b) - ev.utility_for(i, game, &a);
                        ok &= du.to_bits() == (phi_b - phi_a).to_bits();
                    }
                    report.record(ok, || format!("state {k}: profile {a} {game:?} {:?}", channel.mode()));
                }
            }
        }
    }
    Ok(report)
}

/// Best-response learning (deterministic channel, no liveness rule) lands
/// on a payoff-optimal equilibrium of Game 2 whenever someone is critical.
pub fn check_pone(corpus: &[Snapshot]) -> Result<Vec<SuiteReport>> {
    let mut pone = SuiteReport::new("best response reaches the optimal equilibrium");
    let mut single = SuiteReport::new("best response picks a lone transmitter");
    let learning = LearningConfig {
        liveness: false,
        single_sweep: false,
        channel: ChannelMode::Deterministic,
        order: None,
    };
    for (k, snap) in corpus.iter().enumerate() {
        let s = analysis_session(snap)?;
        if critical_set(&s).is_clear() {
            pone.excluded += 1;
            single.excluded += 1;
            continue;
        }
        let oracle = brute_force_ne(&s, Channel::Deterministic, GameMode::Game2)?;
        let chosen = resolve_stage_action(&s, &learning)?.profile;
        pone.record(oracle.pone.contains(&chosen), || {
            format!("state {k}: chose {chosen}, optimal {}", show(&oracle.pone))
        });
        single.record(chosen.transmitters() == 1, || format!("state {k}: chose {chosen}"));
    }
    Ok(vec![pone, single])
}

/// Every suite, in a fixed order.
pub fn run_all(config: &CorpusConfig, potential_states: usize) -> Result<Vec<SuiteReport>> {
    let corpus = corpus(config)?;
    let mut out = check_ne_sets(&corpus)?;
    out.extend(check_poa(&corpus)?);
    out.extend(check_bounds(&corpus)?);
    let sample: Vec<Snapshot> = corpus
        .iter()
        .step_by((corpus.len() / potential_states.max(1)).max(1))
        .take(potential_states)
        .cloned()
        .collect();
    out.push(check_potential(&sample)?);
    out.extend(check_pone(&corpus)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Vec<Snapshot> {
        corpus(&CorpusConfig {
            players: 2..=4,
            packets: 4..=6,
            per_size: 15,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn corpus_is_valid_and_reproducible() {
        let c = small();
        assert_eq!(c.len(), 45);
        assert_eq!(c, small());
        for snap in &c {
            snap.state.check_column_condition().unwrap();
            assert!(!snap.state.is_complete());
            for i in 0..snap.state.players() {
                assert!(snap.initial_wants[i] >= snap.state.wants_count(i) as u64);
            }
        }
    }

    #[test]
    fn closed_forms_agree_on_a_small_corpus() {
        let c = small();
        for r in check_ne_sets(&c).unwrap().iter().take(2) {
            assert!(r.passed(), "{r} {:?}", r.samples);
            assert_eq!(r.excluded_failures, 0, "{r}");
        }
        for r in check_poa(&c).unwrap() {
            assert!(r.passed(), "{r} {:?}", r.samples);
        }
        for r in check_bounds(&c).unwrap() {
            assert_eq!(r.failures, 0, "{r} {:?}", r.samples);
        }
        let r = check_potential(&c[..10]).unwrap();
        assert!(r.passed(), "{r}");
    }
}
