//! Shared domain vocabulary: identifiers, simulated time, token sequences,
//! sessions, requests and the event alphabet of the simulator.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated time in integer microseconds since the start of a run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn plus(self, micros: u64) -> SimTime {
        SimTime(self.0 + micros)
    }

    pub fn since(self, earlier: SimTime) -> u64 {
        self.0 - earlier.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_newtype!(
    /// Identity of a fine-tuned (task-specific) model.
    ModelId,
    "m"
);
id_newtype!(SessionId, "s");
id_newtype!(WorkerId, "w");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Synthetic token id. Tokens carry identity only.
pub type Token = u64;

/// An ordered token sequence. Prefix identity drives every caching decision.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<Token>);

impl TokenSeq {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    /// True iff `self` is a (not necessarily strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &TokenSeq) -> bool {
        is_prefix_of(&self.0, &other.0)
    }

    pub fn extend_from(&mut self, more: &TokenSeq) {
        self.0.extend_from_slice(&more.0);
    }

    pub fn concat(&self, more: &TokenSeq) -> TokenSeq {
        let mut out = Vec::with_capacity(self.len() + more.len());
        out.extend_from_slice(&self.0);
        out.extend_from_slice(&more.0);
        TokenSeq(out)
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(v: Vec<Token>) -> Self {
        Self(v)
    }
}

impl AsRef<[Token]> for TokenSeq {
    fn as_ref(&self) -> &[Token] {
        &self.0
    }
}

pub fn is_prefix_of(a: &[Token], b: &[Token]) -> bool {
    a.len() <= b.len() && a == &b[..a.len()]
}

/// One agent in a session's chain: which model runs and how many tokens it
/// appends and generates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub model_id: ModelId,
    pub input_extension_len: u32,
    pub output_len: u32,
}

/// How agent outputs enter the session context.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Each agent sees the previous agent's output: `X(i) = [X(i-1); ext; Y(i)]`.
    #[default]
    Chained,
    /// Every agent of a turn reads the same turn-start context plus its own
    /// extension; all extensions and outputs are appended when the turn ends.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub session_id: SessionId,
    pub arrival_time: SimTime,
    pub initial_prompt_len: u32,
    pub turns: u32,
    pub agent_chain: Vec<AgentProfile>,
    #[serde(default)]
    pub context_mode: ContextMode,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("session {0}: turns must be >= 1")]
    NoTurns(SessionId),
    #[error("session {0}: agent chain is empty")]
    EmptyChain(SessionId),
    #[error("session {0}: agent {1} has output_len 0")]
    ZeroOutput(SessionId, usize),
}

impl SessionSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.turns == 0 {
            return Err(SpecError::NoTurns(self.session_id));
        }
        if self.agent_chain.is_empty() {
            return Err(SpecError::EmptyChain(self.session_id));
        }
        if let Some(i) = self.agent_chain.iter().position(|a| a.output_len == 0) {
            return Err(SpecError::ZeroOutput(self.session_id, i));
        }
        Ok(())
    }

    pub fn steps_per_turn(&self) -> u32 {
        self.agent_chain.len() as u32
    }

    pub fn total_requests(&self) -> u32 {
        self.turns * self.steps_per_turn()
    }

    /// Context length once every turn has completed.
    pub fn final_context_len(&self) -> u64 {
        let per_turn: u64 = self
            .agent_chain
            .iter()
            .map(|a| u64::from(a.input_extension_len) + u64::from(a.output_len))
            .sum();
        u64::from(self.initial_prompt_len) + u64::from(self.turns) * per_turn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    WaitingAdmission,
    Active,
    Done,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("session {0} is not active")]
pub struct InactiveSession(pub SessionId);

/// Mutable per-session state owned by the event loop.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub spec: SessionSpec,
    pub context: TokenSeq,
    pub turn_index: u32,
    pub step_index: u32,
    pub pinned_prefill_worker: Option<WorkerId>,
    pub status: SessionStatus,
    /// Parallel mode: segments produced during the current turn, appended at turn end.
    pub pending_turn_tokens: TokenSeq,
}

impl SessionState {
    pub fn new(spec: SessionSpec) -> Self {
        Self {
            spec,
            context: TokenSeq::new(),
            turn_index: 0,
            step_index: 0,
            pinned_prefill_worker: None,
            status: SessionStatus::WaitingAdmission,
            pending_turn_tokens: TokenSeq::new(),
        }
    }

    /// Appends `new_tokens` to the context. Contexts are append-only.
    pub fn extend_context(&mut self, new_tokens: &TokenSeq) -> Result<(), InactiveSession> {
        if self.status != SessionStatus::Active {
            return Err(InactiveSession(self.spec.session_id));
        }
        self.context.extend_from(new_tokens);
        Ok(())
    }

    pub fn current_agent(&self) -> &AgentProfile {
        &self.spec.agent_chain[self.step_index as usize]
    }

    pub fn is_last_step_of_turn(&self) -> bool {
        self.step_index + 1 == self.spec.steps_per_turn()
    }

    pub fn is_last_turn(&self) -> bool {
        self.turn_index + 1 == self.spec.turns
    }
}

/// One model invocation issued by a session.
#[derive(Debug, Clone)]
pub struct Request {
    pub request_id: RequestId,
    pub session_id: SessionId,
    pub model_id: ModelId,
    pub context_snapshot: TokenSeq,
    pub output_len: u32,
    pub issue_time: SimTime,
    pub turn_index: u32,
    pub step_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionArrival,
    PrefillStart,
    PrefillComplete,
    HandoffComplete,
    DecodeStep,
    RequestComplete,
    SessionComplete,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SessionArrival => "SessionArrival",
            EventKind::PrefillStart => "PrefillStart",
            EventKind::PrefillComplete => "PrefillComplete",
            EventKind::HandoffComplete => "HandoffComplete",
            EventKind::DecodeStep => "DecodeStep",
            EventKind::RequestComplete => "RequestComplete",
            EventKind::SessionComplete => "SessionComplete",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Payload of a scheduled event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventPayload {
    SessionArrival { session: SessionId },
    PrefillStart { worker: WorkerId, request: RequestId },
    PrefillComplete { worker: WorkerId, request: RequestId },
    HandoffComplete { worker: WorkerId, request: RequestId },
    DecodeStep { worker: WorkerId },
    RequestComplete { worker: WorkerId, request: RequestId },
    SessionComplete { session: SessionId },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::SessionArrival { .. } => EventKind::SessionArrival,
            EventPayload::PrefillStart { .. } => EventKind::PrefillStart,
            EventPayload::PrefillComplete { .. } => EventKind::PrefillComplete,
            EventPayload::HandoffComplete { .. } => EventKind::HandoffComplete,
            EventPayload::DecodeStep { .. } => EventKind::DecodeStep,
            EventPayload::RequestComplete { .. } => EventKind::RequestComplete,
            EventPayload::SessionComplete { .. } => EventKind::SessionComplete,
        }
    }
}

/// A timestamped event. `(time, seq)` is a strict total order; `seq` is
/// assigned in scheduling order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub payload: EventPayload,
}

impl SimEvent {
    pub fn key(&self) -> (SimTime, u64) {
        (self.time, self.seq)
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(v: &[u64]) -> TokenSeq {
        TokenSeq::from(v.to_vec())
    }

    fn active_state(context: &[u64]) -> SessionState {
        let spec = SessionSpec {
            session_id: SessionId(0),
            arrival_time: SimTime::ZERO,
            initial_prompt_len: context.len() as u32,
            turns: 1,
            agent_chain: vec![AgentProfile {
                model_id: ModelId(0),
                input_extension_len: 64,
                output_len: 128,
            }],
            context_mode: ContextMode::Chained,
        };
        let mut s = SessionState::new(spec);
        s.status = SessionStatus::Active;
        s.context = seq(context);
        s
    }

    #[test]
    fn prefix_examples() {
        assert!(seq(&[]).is_prefix_of(&seq(&[1, 2])));
        assert!(seq(&[1, 2]).is_prefix_of(&seq(&[1, 2])));
        assert!(!seq(&[1, 3]).is_prefix_of(&seq(&[1, 2, 3])));
        assert!(!seq(&[1, 2, 3]).is_prefix_of(&seq(&[1, 2])));
    }

    #[test]
    fn extend_context_examples() {
        let mut s = active_state(&[1, 2]);
        s.extend_context(&seq(&[7])).unwrap();
        assert_eq!(s.context, seq(&[1, 2, 7]));

        let mut s = active_state(&[]);
        s.extend_context(&seq(&[])).unwrap();
        assert!(s.context.is_empty());

        let mut s = active_state(&vec![0; 512]);
        s.extend_context(&seq(&vec![1; 64])).unwrap();
        s.extend_context(&seq(&vec![2; 128])).unwrap();
        assert_eq!(s.context.len(), 704);
    }

    #[test]
    fn extend_context_rejects_done_session() {
        let mut s = active_state(&[1]);
        s.status = SessionStatus::Done;
        assert_eq!(
            s.extend_context(&seq(&[2])),
            Err(InactiveSession(SessionId(0)))
        );
        s.status = SessionStatus::WaitingAdmission;
        assert!(s.extend_context(&seq(&[2])).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = active_state(&[]).spec;
        assert!(s.validate().is_ok());
        s.agent_chain[0].output_len = 0;
        assert_eq!(s.validate(), Err(SpecError::ZeroOutput(SessionId(0), 0)));
        s.agent_chain.clear();
        assert_eq!(s.validate(), Err(SpecError::EmptyChain(SessionId(0))));
        s.turns = 0;
        assert_eq!(s.validate(), Err(SpecError::NoTurns(SessionId(0))));
    }

    #[test]
    fn events_order_by_time_then_seq() {
        let e = |t, s| SimEvent {
            time: SimTime(t),
            seq: s,
            payload: EventPayload::DecodeStep { worker: WorkerId(0) },
        };
        let mut v = [e(5, 2), e(3, 9), e(5, 1), e(0, 10)];
        v.sort();
        let keys: Vec<_> = v.iter().map(|x| (x.time.0, x.seq)).collect();
        assert_eq!(keys, vec![(0, 10), (3, 9), (5, 1), (5, 2)]);
    }

    proptest! {
        #[test]
        fn prefix_is_reflexive_and_transitive(
            a in proptest::collection::vec(0u64..4, 0..8),
            b_ext in proptest::collection::vec(0u64..4, 0..8),
            c_ext in proptest::collection::vec(0u64..4, 0..8),
        ) {
            let a = TokenSeq::from(a);
            let b = a.concat(&TokenSeq::from(b_ext));
            let c = b.concat(&TokenSeq::from(c_ext));
            prop_assert!(a.is_prefix_of(&a));
            prop_assert!(a.is_prefix_of(&b));
            prop_assert!(b.is_prefix_of(&c));
            prop_assert!(a.is_prefix_of(&c));
        }

        #[test]
        fn prefix_matches_definition(
            a in proptest::collection::vec(0u64..3, 0..6),
            b in proptest::collection::vec(0u64..3, 0..6),
        ) {
            let expected = a.len() <= b.len() && (0..a.len()).all(|i| a[i] == b[i]);
            prop_assert_eq!(is_prefix_of(&a, &b), expected);
        }
    }
}
