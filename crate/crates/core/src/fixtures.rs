//! Small hand-built sessions used in tests, the guide and the CLI.

use crate::game::{Session, SessionConfig};
use crate::session::{CollisionWindow, ErasureModel, GameLedger, SideInformationState};

/// Two players, two packets, each holding what the other wants. Average
/// erasures are 0.2 and 0.05 (p[0][1] = 0.4, p[1][0] = 0.1).
pub fn crossed_pair(config: SessionConfig) -> Session {
    let state = SideInformationState::from_rows(&[[0u8, 1], [1, 0]]).expect("valid rows");
    let model = ErasureModel::new(vec![vec![0.0, 0.4], vec![0.1, 0.0]], vec![0.0, 0.0])
        .expect("valid erasures");
    Session::new(state, model, config).expect("consistent session")
}

/// Three players where player 0 is finished but carries the largest
/// completion estimate, so nobody is critical. Players 1 and 2 each want a
/// packet that player 0 holds.
pub fn stalled_trio(config: SessionConfig) -> Session {
    let state = SideInformationState::from_rows(&[[0u8, 0], [1, 0], [0, 1]]).expect("valid rows");
    let model = ErasureModel::uniform(3, 0.1, 0.0).expect("valid erasures");
    let ledger = GameLedger {
        cumulative_delay: vec![5, 0, 0],
        initial_wants: vec![1, 1, 1],
        stage: 7,
        collisions: CollisionWindow::new(3, config.punishment),
    };
    Session::with_ledger(state, model, ledger, config).expect("consistent session")
}

/// `m` players where player `i` wants packet `i` and holds the rest.
pub fn ring(m: usize, config: SessionConfig) -> Session {
    let rows: Vec<Vec<u8>> = (0..m)
        .map(|i| (0..m).map(|j| u8::from(i == j)).collect())
        .collect();
    let state = SideInformationState::from_rows(&rows).expect("valid rows");
    let model = ErasureModel::uniform(m, 0.1, 0.2).expect("valid erasures");
    Session::new(state, model, config).expect("consistent session")
}
