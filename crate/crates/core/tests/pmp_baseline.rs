//! Base-station baseline at M = 60, N = 30, q = 0.3.

use idnc_game::experiment::{iteration_rng, EpisodeSummary};
use idnc_game::pmp::run_pmp_episode;
use rayon::prelude::*;

const PLAYERS: usize = 60;
const PACKETS: usize = 30;
const EPISODES: u64 = 500;

fn episodes(seed: u64) -> Vec<EpisodeSummary> {
    let q = vec![0.3; PLAYERS];
    (0..EPISODES)
        .into_par_iter()
        .map(|i| run_pmp_episode(PLAYERS, PACKETS, &q, &mut iteration_rng(seed, 0, i, 3), 100 * PACKETS as u64).unwrap())
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn fixed_seed_reproduces_every_episode() {
    assert_eq!(episodes(11), episodes(11));
}

#[test]
fn mean_completion_is_stable_across_seeds() {
    let means: Vec<f64> = [1, 2, 3]
        .iter()
        .map(|&s| {
            let e = episodes(s);
            assert!(e.iter().all(|r| !r.censored));
            mean(e.iter().map(|r| r.slots as f64))
        })
        .collect();
    let centre = mean(means.iter().copied());
    for m in &means {
        assert!((m - centre).abs() / centre < 0.02, "{means:?}");
    }
}

#[test]
fn completion_estimate_tracks_realized_time() {
    let e = episodes(5);
    let t = mean(e.iter().map(|r| r.slots as f64));
    let est = mean(e.iter().map(|r| r.mean_estimate));
    let gap = (est - t).abs() / t;
    assert!(gap <= 0.15, "mean estimate {est:.2} vs mean T {t:.2} ({:.0}% apart)", gap * 100.0);
}
