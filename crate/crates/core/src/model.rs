//! Domain types and the per-slot age dynamics.
//!
//! A slot proceeds as follows. The generation event for the slot has already
//! been applied to `delta_s`, the scheduling rule reads that state and picks an
//! [`Operation`], the active links succeed or fail, and the relay and
//! destination ages are updated at the boundary together with the generation
//! event of the next slot.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_closed_unit(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

/// Link success probabilities: `p1` source to destination, `p2` source to
/// relay, `p3` relay to destination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl ChannelParams {
    /// Builds a channel usable by the simulator (every probability in `[0, 1]`).
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        Ok(Self {
            p1: check_closed_unit("p1", p1)?,
            p2: check_closed_unit("p2", p2)?,
            p3: check_closed_unit("p3", p3)?,
        })
    }

    /// Builds a channel and additionally enforces the closed-form domain.
    pub fn analytic(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let ch = Self::new(p1, p2, p3)?;
        ch.check_analytic()?;
        Ok(ch)
    }

    /// `0 < p1 < p2 < 1` and `0 < p1 < p3 < 1`.
    pub fn check_analytic(&self) -> Result<()> {
        let Self { p1, p2, p3 } = *self;
        let ok = p1 > 0.0 && p1 < p2 && p2 < 1.0 && p1 < p3 && p3 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::OutsideAnalyticDomain { p1, p2, p3 })
        }
    }
}

impl fmt::Display for ChannelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.p1, self.p2, self.p3)
    }
}

/// Per-slot generation probability, `0 < p <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GenProb(f64);

impl GenProb {
    pub const ALWAYS: GenProb = GenProb(1.0);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 && p <= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidProbability {
                name: "p",
                value: p,
                range: "(0, 1]",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for GenProb {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<GenProb> for f64 {
    fn from(p: GenProb) -> f64 {
        p.0
    }
}

/// Ages (in slots) of the freshest update held at the source, relay and
/// destination.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct AoiState {
    pub delta_s: u32,
    pub delta_r: u32,
    pub delta_d: u32,
}

impl AoiState {
    pub const ZERO: AoiState = AoiState::new(0, 0, 0);

    pub const fn new(delta_s: u32, delta_r: u32, delta_d: u32) -> Self {
        Self {
            delta_s,
            delta_r,
            delta_d,
        }
    }

    /// The source is never staler than the relay or the destination.
    pub fn is_valid(&self) -> bool {
        self.delta_s <= self.delta_r && self.delta_s <= self.delta_d
    }

    /// Componentwise saturation at the given caps.
    pub fn saturate(&self, cap_s: u32, cap_r: u32, cap_d: u32) -> Self {
        Self::new(
            self.delta_s.min(cap_s),
            self.delta_r.min(cap_r),
            self.delta_d.min(cap_d),
        )
    }
}

impl fmt::Display for AoiState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.delta_s, self.delta_r, self.delta_d)
    }
}

/// The three per-slot operations.
///
/// The derived ordering (`Idle < Relay < Source`) is the tie-break order used
/// when several operations are equally good.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    /// Nobody transmits.
    Idle,
    /// The relay forwards its update to the destination.
    Relay,
    /// The source broadcasts to relay and destination.
    Source,
}

impl Operation {
    pub const ALL: [Operation; 3] = [Operation::Idle, Operation::Relay, Operation::Source];

    /// Single-letter code used in traces and policy files.
    pub fn symbol(self) -> char {
        match self {
            Operation::Source => 'S',
            Operation::Relay => 'R',
            Operation::Idle => 'N',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'S' => Some(Operation::Source),
            'R' => Some(Operation::Relay),
            'N' => Some(Operation::Idle),
            _ => None,
        }
    }

    const fn bit(self) -> u8 {
        match self {
            Operation::Idle => 1,
            Operation::Relay => 2,
            Operation::Source => 4,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A small set of operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpSet(u8);

impl OpSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, op: Operation) {
        self.0 |= op.bit();
    }

    pub fn contains(&self, op: Operation) -> bool {
        self.0 & op.bit() != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Members in tie-break order.
    pub fn iter(self) -> impl Iterator<Item = Operation> {
        Operation::ALL
            .into_iter()
            .filter(move |op| self.contains(*op))
    }
}

impl FromIterator<Operation> for OpSet {
    fn from_iter<I: IntoIterator<Item = Operation>>(iter: I) -> Self {
        let mut set = OpSet::empty();
        for op in iter {
            set.insert(op);
        }
        set
    }
}

/// Random events of one slot. `generated` is the generation event at the
/// next slot boundary; link flags are ignored for links that are not active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotOutcome {
    pub generated: bool,
    pub sd_success: bool,
    pub sr_success: bool,
    pub rd_success: bool,
}

/// Operations that make sense in `state`.
pub fn feasible_ops(state: AoiState) -> OpSet {
    let mut set = OpSet::empty();
    set.insert(Operation::Idle);
    if state.delta_s < state.delta_d {
        set.insert(Operation::Source);
    }
    if state.delta_r < state.delta_d {
        set.insert(Operation::Relay);
    }
    set
}

/// Source-prioritised rule: a fresh source update preempts the relay.
pub fn decide_sp(state: AoiState) -> Operation {
    let AoiState {
        delta_s: s,
        delta_r: r,
        delta_d: d,
    } = state;
    if s == d {
        Operation::Idle
    } else if s < r {
        Operation::Source
    } else {
        Operation::Relay
    }
}

/// Relay-prioritised rule: the relay keeps forwarding until delivery.
pub fn decide_rp(state: AoiState) -> Operation {
    if state.delta_r < state.delta_d {
        Operation::Relay
    } else if state.delta_s < state.delta_d {
        Operation::Source
    } else {
        Operation::Idle
    }
}

/// One-slot transition. Rejects an operation that has nothing fresher to send.
pub fn step(state: AoiState, op: Operation, outcome: SlotOutcome) -> Result<AoiState> {
    let infeasible = match op {
        Operation::Source => state.delta_s >= state.delta_d,
        Operation::Relay => state.delta_r >= state.delta_d,
        Operation::Idle => false,
    };
    if infeasible {
        return Err(Error::InfeasibleOperation { op, state });
    }
    Ok(advance(state, op, outcome))
}

/// [`step`] without the feasibility check, for hot loops whose operation
/// comes from a rule that only emits feasible operations.
#[inline]
pub fn advance(state: AoiState, op: Operation, outcome: SlotOutcome) -> AoiState {
    let AoiState {
        delta_s: s,
        delta_r: r,
        delta_d: d,
    } = state;
    let (next_r, next_d) = match op {
        Operation::Source => (
            if outcome.sr_success { s + 1 } else { r + 1 },
            if outcome.sd_success { s + 1 } else { d + 1 },
        ),
        Operation::Relay => (
            r + 1,
            if outcome.rd_success && r < d {
                r + 1
            } else {
                d + 1
            },
        ),
        Operation::Idle => (r + 1, d + 1),
    };
    let next_s = if outcome.generated { 0 } else { s + 1 };
    AoiState::new(next_s, next_r, next_d)
}
