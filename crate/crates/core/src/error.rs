use thiserror::Error;

/// Everything that can go wrong while building, playing or analysing a session.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("probability {value} for {what} is outside [0, 1)")]
    Probability { what: String, value: f64 },

    #[error("self-link erasure p[{0}][{0}] must be 0")]
    SelfLink(usize),

    #[error("packet {packet} was broadcast {attempts} times without reaching any player")]
    RetransmissionCap { packet: usize, attempts: u32 },

    #[error("packet {0} is not held by any player")]
    UnheldPacket(usize),

    #[error("player {player} holds {holds} packets, exhaustive search is capped at {cap}")]
    SearchCap {
        player: usize,
        holds: usize,
        cap: usize,
    },

    #[error("{players} players exceed the enumeration cap of {cap}")]
    EnumerationCap { players: usize, cap: usize },

    #[error("profile/stage-delay mismatch: {0}")]
    DelayPairing(String),

    #[error("player {0} is backed off and cannot transmit")]
    BackedOff(usize),

    #[error("the session is already complete")]
    SessionComplete,

    #[error("slot cap of {0} exceeded")]
    SlotCap(usize),

    #[error("best-response dynamics did not settle within {0} sweeps")]
    NoConvergence(usize),

    #[error("channel mode mismatch: {0}")]
    ChannelMode(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_probability(what: impl Into<String>, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability {
            what: what.into(),
            value,
        })
    }
}
