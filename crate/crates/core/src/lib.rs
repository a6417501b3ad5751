//! Game-theoretic cooperative recovery with instantly decodable network
//! coding.
//!
//! After a lossy base-station broadcast, players exchange coded packets
//! among themselves. Each slot is a small common-interest game deciding who
//! transmits. The crate models sessions, combination selection, delay and
//! completion estimates ([`session`], [`coding`], [`delay`], [`game`]). It
//! analyses the stage games in closed form, checked against exhaustive
//! search ([`equilibrium`], [`oracle`], [`verify`]). It plays them with
//! best-response learning ([`learning`]) and compares against a base-station
//! baseline ([`pmp`]) in seeded Monte-Carlo sweeps ([`experiment`]).
//!
//! ```
//! use idnc_game::fixtures::crossed_pair;
//! use idnc_game::game::SessionConfig;
//! use idnc_game::learning::{resolve_stage_action, LearningConfig};
//!
//! let s = crossed_pair(SessionConfig::game2());
//! let r = resolve_stage_action(&s, &LearningConfig::default()).unwrap();
//! assert_eq!(r.profile.transmitters(), 1);
//! ```

pub mod coding;
pub mod delay;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod game;
pub mod learning;
pub mod oracle;
pub mod pmp;
pub mod session;
pub mod snapshot;
pub mod verify;

pub use error::{Error, Result};

macro_rules! guide {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[cfg(doctest)]
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        )*
    };
}

guide! {
    guide_introduction => "introduction.md",
    guide_model => "model.md",
    guide_coding => "coding.md",
    guide_delay => "delay.md",
    guide_games => "games.md",
    guide_equilibria => "equilibria.md",
    guide_learning => "learning.md",
    guide_experiments => "experiments.md",
    guide_cli => "cli.md",
}
