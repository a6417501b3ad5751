//! Plain-text stage snapshots.
//!
//! ```text
//! M N
//! <M lines of N bits: the wants matrix>
//! <M lines of M erasure probabilities>
//! <one line of M base-station erasures>
//! <one line of M cumulative delays>
//! <one line of M initial wants counts>
//! ```
//!
//! Bits may be written `0 1 1` or `011`. Blank lines and `#` comments are
//! ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{Session, SessionConfig};
use crate::session::{CollisionWindow, ErasureModel, GameLedger, SideInformationState};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: SideInformationState,
    pub model: ErasureModel,
    pub cumulative_delay: Vec<u64>,
    pub initial_wants: Vec<u64>,
}

impl Snapshot {
    /// Starts a session at stage 1 with an empty collision window.
    pub fn session(&self, config: SessionConfig) -> Result<Session> {
        let m = self.state.players();
        let ledger = GameLedger {
            cumulative_delay: self.cumulative_delay.clone(),
            initial_wants: self.initial_wants.clone(),
            stage: 1,
            collisions: CollisionWindow::new(m, config.punishment),
        };
        Session::with_ledger(self.state.clone(), self.model.clone(), ledger, config)
    }

    pub fn from_session(session: &Session) -> Self {
        Snapshot {
            state: session.state.clone(),
            model: session.model.clone(),
            cumulative_delay: session.ledger.cumulative_delay.clone(),
            initial_wants: session.ledger.initial_wants.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing {what}"),
            })
        };

        let (n, header) = next("header")?;
        let dims: Vec<usize> = numbers(n, header)?;
        let [m, packets] = dims[..] else {
            return Err(parse_error(n, "header must be `M N`"));
        };

        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let (n, line) = next(&format!("wants row {i}"))?;
            let row = bits(n, line)?;
            if row.len() != packets {
                return Err(parse_error(n, format!("expected {packets} bits, got {}", row.len())));
            }
            rows.push(row);
        }
        let state = if m == 0 {
            SideInformationState::complete(0, packets)
        } else {
            SideInformationState::from_rows(&rows)?
        };

        let mut matrix = Vec::with_capacity(m);
        for i in 0..m {
            let (n, line) = next(&format!("erasure row {i}"))?;
            matrix.push(sized(n, line, m)?);
        }
        let (n, line) = next("base-station erasures")?;
        let q: Vec<f64> = sized(n, line, m)?;
        let model = ErasureModel::new(matrix, q)?;
        let (n, line) = next("cumulative delays")?;
        let cumulative_delay = sized(n, line, m)?;
        let (n, line) = next("initial wants")?;
        let initial_wants = sized(n, line, m)?;
        if let Some((n, _)) = lines.next() {
            return Err(parse_error(n, "trailing content"));
        }
        Ok(Snapshot {
            state,
            model,
            cumulative_delay,
            initial_wants,
        })
    }

    pub fn format(&self) -> String {
        let m = self.state.players();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        let mut out = format!("{m} {}\n", self.state.packets());
        for i in 0..m {
            writeln!(out, "{}", join(&mut self.state.row(i).iter().map(u8::to_string))).unwrap();
        }
        for row in self.model.matrix() {
            writeln!(out, "{}", join(&mut row.iter().map(f64::to_string))).unwrap();
        }
        writeln!(out, "{}", join(&mut self.model.bs_erasures().iter().map(f64::to_string))).unwrap();
        writeln!(out, "{}", join(&mut self.cumulative_delay.iter().map(u64::to_string))).unwrap();
        writeln!(out, "{}", join(&mut self.initial_wants.iter().map(u64::to_string))).unwrap();
        out
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn numbers<T: FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_error(line, format!("cannot parse {t:?}"))))
        .collect()
}

fn sized<T: FromStr>(line: usize, text: &str, len: usize) -> Result<Vec<T>> {
    let v = numbers(line, text)?;
    if v.len() != len {
        return Err(parse_error(line, format!("expected {len} values, got {}", v.len())));
    }
    Ok(v)
}

fn bits(line: usize, text: &str) -> Result<Vec<u8>> {
    text.split_whitespace()
        .flat_map(str::chars)
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(parse_error(line, format!("{other:?} is not a bit"))),
        })
        .collect()
}
