//! Live teaching sessions: a human plays the teacher through a JSON message
//! protocol while the student plans against its nested model.
//!
//! Every frame is a JSON object with `"v": 1` and a `"type"`. Clients send
//! `create_session`, `signal` and `snapshot_request`; the server replies with
//! `session_created`, `state` or `error`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{build_student_ipomdp, DomainConfig, TeacherSignal, Turn};
use crate::error::Error;
use crate::harness::{Channel, Episode, StepRecord};

pub const PROTOCOL_VERSION: u64 = 1;

/// Student view after a step, as sent to the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub session_id: String,
    /// 0 for the initial state, then one more per accepted signal.
    pub seq: u64,
    pub step: usize,
    pub turn: Turn,
    pub hypotheses: Vec<String>,
    pub belief: Vec<f64>,
    pub entropy_bits: f64,
    /// Student's estimate of the teacher's belief about the pending question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<Vec<f64>>,
    /// The teacher step produced by the signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<StepRecord>,
    /// The student's reply, with its action and q-values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student: Option<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    CreateSession {
        #[serde(default)]
        config: Option<Value>,
    },
    SessionCreated {
        session_id: String,
        state: StatePayload,
    },
    Signal {
        session_id: String,
        signal: TeacherSignal,
    },
    State(StatePayload),
    SnapshotRequest {
        session_id: String,
    },
    Error {
        code: String,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session_id: Option<String>,
    },
}

/// A message together with the mandatory version field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub v: u64,
    #[serde(flatten)]
    pub message: Message,
}

impl Frame {
    pub fn new(message: Message) -> Self {
        Frame {
            v: PROTOCOL_VERSION,
            message,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

const CLIENT_TYPES: [&str; 3] = ["create_session", "signal", "snapshot_request"];
const SERVER_TYPES: [&str; 3] = ["session_created", "state", "error"];

fn error(code: &str, message: impl Into<String>, session_id: Option<&str>) -> Frame {
    Frame::new(Message::Error {
        code: code.into(),
        message: message.into(),
        session_id: session_id.map(str::to_string),
    })
}

/// Parses one client frame, or returns the error frame to send back.
pub fn parse_frame(text: &str) -> std::result::Result<Message, Frame> {
    let value: Value = serde_json::from_str(text).map_err(|e| error("parse", e.to_string(), None))?;
    let obj = value
        .as_object()
        .ok_or_else(|| error("parse", "frame must be a JSON object", None))?;
    match obj.get("v").and_then(Value::as_u64) {
        Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(error("version", format!("unsupported protocol version {v}"), None)),
        None => return Err(error("version", "missing protocol version", None)),
    }
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| error("parse", "missing message type", None))?;
    if SERVER_TYPES.contains(&ty) {
        return Err(error("unexpected_type", format!("{ty} is sent by the server"), None));
    }
    if !CLIENT_TYPES.contains(&ty) {
        return Err(error("unknown_type", format!("unknown message type {ty}"), None));
    }
    serde_json::from_value::<Frame>(value)
        .map(|f| f.message)
        .map_err(|e| error("parse", e.to_string(), None))
}

fn error_code(e: &Error) -> &'static str {
    match e {
        Error::Turn { .. } => "turn",
        Error::AtStep { source, .. } | Error::AtSeed { source, .. } => error_code(source),
        Error::IndexOutOfRange { .. } => "bad_signal",
        Error::ZeroNormalizer => "inconsistent",
        _ => "internal",
    }
}

pub struct Session {
    id: String,
    channel: Channel,
    episode: Mutex<Episode>,
    latest: RwLock<StatePayload>,
}

impl Session {
    fn new(id: String, cfg: DomainConfig) -> crate::Result<Self> {
        cfg.validate()?;
        let channel = if cfg.human_channel_noiseless {
            Channel::Clean
        } else {
            Channel::Noisy
        };
        let seed = cfg.seed;
        let episode = Episode::new(Arc::new(build_student_ipomdp(&cfg)?), seed)?;
        let state = payload(&id, 0, &episode, None, None);
        Ok(Session {
            id,
            channel,
            episode: Mutex::new(episode),
            latest: RwLock::new(state),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Latest state; never waits for planning in progress.
    pub fn snapshot(&self) -> StatePayload {
        self.latest.read().expect("state lock").clone()
    }

    /// Applies the teacher's signal, lets the student plan and act, and
    /// returns the new state. On error the session is unchanged.
    pub fn handle_signal(&self, signal: TeacherSignal) -> crate::Result<StatePayload> {
        let mut guard = self.episode.lock().expect("episode lock");
        let mut ep = guard.clone();
        let teacher = ep.teacher_step(Some(signal), self.channel)?.clone();
        let student = ep.student_step(None)?.clone();
        let seq = self.snapshot().seq + 1;
        let state = payload(&self.id, seq, &ep, Some(teacher), Some(student));
        *guard = ep;
        *self.latest.write().expect("state lock") = state.clone();
        Ok(state)
    }

    pub fn trace(&self) -> crate::harness::EpisodeTrace {
        self.episode.lock().expect("episode lock").trace().clone()
    }
}

fn payload(
    id: &str,
    seq: u64,
    ep: &Episode,
    teacher: Option<StepRecord>,
    student: Option<StepRecord>,
) -> StatePayload {
    let agent = ep.agent();
    let belief = agent.concept_belief();
    StatePayload {
        session_id: id.to_string(),
        seq,
        step: ep.step(),
        turn: ep.turn(),
        hypotheses: ep.trace().header.hypotheses.clone(),
        entropy_bits: crate::pomdp::entropy_bits(&belief),
        belief,
        nested: agent.nested_summary(),
        teacher,
        student,
    }
}

/// Registry of live sessions. Each session processes its signals one at a
/// time; different sessions run independently.
#[derive(Default)]
pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl SessionManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("registry lock").get(id).cloned()
    }

    pub fn create(&self, config: Option<Value>) -> std::result::Result<StatePayload, Frame> {
        let cfg = match config {
            None => DomainConfig::default(),
            Some(v) => serde_json::from_value::<DomainConfig>(v)
                .map_err(|e| error("bad_config", e.to_string(), None))?,
        };
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n:04x}");
        let session = Session::new(id.clone(), cfg).map_err(|e| error("bad_config", e.to_string(), None))?;
        let state = session.snapshot();
        self.sessions
            .write()
            .expect("registry lock")
            .insert(id, Arc::new(session));
        Ok(state)
    }

    /// Handles one parsed client message and returns the reply frame.
    pub fn handle(&self, msg: Message) -> Frame {
        match msg {
            Message::CreateSession { config } => match self.create(config) {
                Ok(state) => Frame::new(Message::SessionCreated {
                    session_id: state.session_id.clone(),
                    state,
                }),
                Err(f) => f,
            },
            Message::Signal { session_id, signal } => match self.get(&session_id) {
                None => error("session", format!("unknown session {session_id}"), Some(&session_id)),
                Some(s) => match s.handle_signal(signal) {
                    Ok(state) => Frame::new(Message::State(state)),
                    Err(e) => {
                        log::warn!("session {session_id}: {e}");
                        error(error_code(&e), e.to_string(), Some(&session_id))
                    }
                },
            },
            Message::SnapshotRequest { session_id } => match self.get(&session_id) {
                None => error("session", format!("unknown session {session_id}"), Some(&session_id)),
                Some(s) => Frame::new(Message::State(s.snapshot())),
            },
            other => error(
                "unexpected_type",
                format!("{other:?} is not a client message"),
                None,
            ),
        }
    }

    /// Parses, handles and serializes one text frame.
    pub fn handle_text(&self, text: &str) -> String {
        match parse_frame(text) {
            Ok(msg) => self.handle(msg),
            Err(f) => f,
        }
        .to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reply(m: &SessionManager, text: &str) -> Value {
        serde_json::from_str(&m.handle_text(text)).unwrap()
    }

    #[test]
    fn default_session_has_two_bits() {
        let m = SessionManager::new();
        let r = reply(&m, r#"{"v":1,"type":"create_session"}"#);
        assert_eq!(r["type"], "session_created");
        assert_eq!(r["v"], 1);
        assert_eq!(r["state"]["entropy_bits"], 2.0);
        assert_eq!(r["state"]["seq"], 0);
    }

    #[test]
    fn protocol_errors() {
        let m = SessionManager::new();
        assert_eq!(reply(&m, "{nope")["code"], "parse");
        assert_eq!(reply(&m, r#"{"type":"create_session"}"#)["code"], "version");
        assert_eq!(reply(&m, r#"{"v":1,"type":"dance"}"#)["code"], "unknown_type");
        assert_eq!(reply(&m, r#"{"v":1,"type":"state"}"#)["code"], "unexpected_type");
        assert_eq!(
            reply(&m, r#"{"v":1,"type":"snapshot_request","session_id":"zz"}"#)["code"],
            "session"
        );
        assert_eq!(
            reply(&m, r#"{"v":1,"type":"create_session","config":{"n_objects":0}}"#)["code"],
            "bad_config"
        );
        assert!(m.is_empty());
    }

    #[test]
    fn frame_roundtrip() {
        let f = Frame::new(Message::Signal {
            session_id: "s0".into(),
            signal: TeacherSignal::Point { object: 2 },
        });
        let back: Frame = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }
}
