//! The objects game: a student learns a target concept (color, shape) from a
//! teacher who utters features, points at objects and answers questions.
//!
//! Physical state is `(concept, turn, pending, last)`: the hidden concept, whose
//! turn it is, the student question awaiting an answer, and a coarse record of
//! the teacher's last act. The teacher acts on even steps, the student on odd
//! steps; the off-turn agent can only wait.

mod scenario;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nesting::{
    AgentFrame, AgentModel, InteractiveBelief, InteractiveProblem, InteractiveState, JointModel,
    JointModelParts, Level0Policy, LevelKModel, NestedBelief, NestingConfig,
};
use crate::planner::PlanConfig;
use crate::pomdp::{
    sparse_from_dense, Belief, PomdpModel, SparseRow, StateComponent, StateFactors, UtilitySpec,
};

pub use scenario::{scenario_library, Expectation, Scenario, ScriptStep};

pub const DOMAIN_FORMAT: &str = "teachdomain/1";

pub const FEATURES: [&str; 4] = ["red", "blue", "ball", "box"];

/// Probability that a volunteering teacher points rather than speaks.
pub const VOLUNTEER_POINT: f64 = 0.3;

/// Reward the level-1 teacher attaches to the `last` slot.
pub const TEACHER_REWARD_TRUTHFUL: f64 = 1.0;
pub const TEACHER_REWARD_IDLE: f64 = 0.2;

/// Feature dimension: 0 for color, 1 for shape.
pub fn feature_dim(f: usize) -> usize {
    f / 2
}

/// The other feature of the same dimension.
pub fn confused_feature(f: usize) -> usize {
    f ^ 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Concept {
    pub color: usize,
    pub shape: usize,
}

impl Concept {
    pub const ALL: [Concept; 4] = [
        Concept { color: 0, shape: 0 },
        Concept { color: 0, shape: 1 },
        Concept { color: 1, shape: 0 },
        Concept { color: 1, shape: 1 },
    ];

    pub fn value(&self, dim: usize) -> usize {
        if dim == 0 {
            self.color
        } else {
            self.shape
        }
    }

    pub fn has(&self, f: usize) -> bool {
        self.value(feature_dim(f)) == f % 2
    }

    pub fn feature(&self, dim: usize) -> usize {
        dim * 2 + self.value(dim)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", FEATURES[self.color], FEATURES[2 + self.shape])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub epsilon_speak: f64,
    pub epsilon_hear: f64,
    pub epsilon_point: f64,
    pub epsilon_answer: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            epsilon_speak: 0.10,
            epsilon_hear: 0.05,
            epsilon_point: 0.05,
            epsilon_answer: 0.02,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            epsilon_speak: 0.0,
            epsilon_hear: 0.0,
            epsilon_point: 0.0,
            epsilon_answer: 0.0,
        }
    }
}

fn out_of_range(what: &'static str, index: usize, len: usize) -> Error {
    Error::IndexOutOfRange { what, index, len }
}

fn default_format() -> String {
    DOMAIN_FORMAT.into()
}
fn default_objects() -> usize {
    4
}
fn default_hypotheses() -> Vec<Concept> {
    Concept::ALL.to_vec()
}
fn default_horizon() -> usize {
    2
}
fn default_discount() -> f64 {
    0.95
}
fn default_max_steps() -> usize {
    16
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(default = "default_format")]
    pub format: String,
    /// Objects on a line; object `i` carries concept `Concept::ALL[i % 4]`.
    #[serde(default = "default_objects")]
    pub n_objects: usize,
    #[serde(default = "default_hypotheses")]
    pub hypothesis_space: Vec<Concept>,
    /// Student prior over the hypothesis space; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Index into the hypothesis space; sampled from the prior when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_concept: Option<usize>,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Probability that a volunteering teacher follows an utterance with a
    /// point at a matching object.
    #[serde(default)]
    pub follow_up_point: f64,
    #[serde(default)]
    pub teacher_level: usize,
    /// Student lookahead in rounds; one round is a student move and the
    /// teacher's reply.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub seed: u64,
    /// Episode length in joint steps.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_branch_cap: Option<usize>,
    #[serde(default = "default_true")]
    pub human_channel_noiseless: bool,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            format: default_format(),
            n_objects: default_objects(),
            hypothesis_space: default_hypotheses(),
            prior: None,
            true_concept: None,
            noise: NoiseConfig::default(),
            follow_up_point: 0.0,
            teacher_level: 0,
            horizon: default_horizon(),
            discount: default_discount(),
            seed: 0,
            max_steps: default_max_steps(),
            observation_branch_cap: None,
            human_channel_noiseless: true,
        }
    }
}

impl DomainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.format != DOMAIN_FORMAT {
            return bad(format!("expected format {DOMAIN_FORMAT}, found {}", self.format));
        }
        let n = &self.noise;
        for (name, e) in [
            ("epsilon_speak", n.epsilon_speak),
            ("epsilon_hear", n.epsilon_hear),
            ("epsilon_point", n.epsilon_point),
            ("epsilon_answer", n.epsilon_answer),
        ] {
            if !(0.0..0.5).contains(&e) {
                return bad(format!("{name} = {e} outside [0, 0.5)"));
            }
        }
        if !(0.0..=1.0).contains(&self.follow_up_point) {
            return bad("follow_up_point outside [0, 1]".into());
        }
        if self.hypothesis_space.is_empty() {
            return bad("hypothesis space is empty".into());
        }
        for (i, h) in self.hypothesis_space.iter().enumerate() {
            if h.color > 1 || h.shape > 1 {
                return bad(format!("hypothesis {i} has out-of-range features"));
            }
            if self.hypothesis_space[..i].contains(h) {
                return bad(format!("hypothesis {} listed twice", h.label()));
            }
            if !(0..self.n_objects).any(|o| Concept::ALL[o % 4] == *h) {
                return bad(format!("no object matches hypothesis {}", h.label()));
            }
        }
        if let Some(p) = &self.prior {
            if p.len() != self.hypothesis_space.len() {
                return bad("prior length differs from hypothesis space".into());
            }
            Belief::new(p.clone())?;
        }
        if let Some(t) = self.true_concept {
            if t >= self.hypothesis_space.len() {
                return bad(format!("true_concept {t} out of range"));
            }
        }
        if self.teacher_level > 1 {
            return bad("teacher_level must be 0 or 1".into());
        }
        if self.horizon < 1 {
            return bad("horizon must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount outside [0, 1]".into());
        }
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1".into());
        }
        if self.observation_branch_cap == Some(0) {
            return bad("observation_branch_cap must be >= 1".into());
        }
        Ok(())
    }

    pub fn student_level(&self) -> usize {
        self.teacher_level + 1
    }

    pub fn prior_belief(&self) -> Belief {
        match &self.prior {
            Some(p) => Belief::new(p.clone()).expect("validated prior"),
            None => Belief::uniform(self.hypothesis_space.len()),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: DomainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            horizon: 2 * self.horizon,
            discount_override: None,
            observation_branch_cap: self.observation_branch_cap,
            action_priority: None,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Teacher,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pending {
    None,
    Feature { feature: usize },
    Object { object: usize },
    Clarify,
    Declared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Last {
    None,
    Idle,
    UtteredColor,
    UtteredShape,
    Pointed,
    TruthfulAnswer,
    FalseAnswer,
}

impl Last {
    const ALL: [Last; 7] = [
        Last::None,
        Last::Idle,
        Last::UtteredColor,
        Last::UtteredShape,
        Last::Pointed,
        Last::TruthfulAnswer,
        Last::FalseAnswer,
    ];

    fn index(self) -> usize {
        Last::ALL.iter().position(|l| *l == self).expect("listed")
    }

    fn label(self) -> &'static str {
        match self {
            Last::None => "none",
            Last::Idle => "idle",
            Last::UtteredColor => "uttered_color",
            Last::UtteredShape => "uttered_shape",
            Last::Pointed => "pointed",
            Last::TruthfulAnswer => "truthful_answer",
            Last::FalseAnswer => "false_answer",
        }
    }

    fn uttered_dim(self) -> Option<usize> {
        match self {
            Last::UtteredColor => Some(0),
            Last::UtteredShape => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    /// Index into the hypothesis space.
    pub concept: usize,
    pub turn: Turn,
    pub pending: Pending,
    pub last: Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudentAction {
    /// Announce the current MAP concept.
    Declare,
    Listen,
    AskFeature { feature: usize },
    AskObject { object: usize },
    AskClarify,
    LookAtTeacher,
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TeacherSignal {
    UtterFeature { feature: usize },
    Point { object: usize },
    Answer { yes: bool },
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudentObservation {
    HeardFeature { feature: usize },
    SeenPoint { object: usize },
    HeardYes,
    HeardNo,
    Silence,
}

/// A built instance of the game: index maps between typed values and the
/// flat indices used by the models.
#[derive(Debug, Clone)]
pub struct Domain {
    cfg: DomainConfig,
    factors: StateFactors,
}

impl Domain {
    pub fn new(cfg: DomainConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_objects;
        let mut pending = vec!["none".to_string()];
        pending.extend(FEATURES.iter().map(|f| format!("feature:{f}")));
        pending.extend((0..n).map(|i| format!("object:{i}")));
        pending.push("clarify".into());
        pending.push("declared".into());
        let factors = StateFactors::new(vec![
            StateComponent {
                name: "concept".into(),
                values: cfg.hypothesis_space.iter().map(Concept::label).collect(),
            },
            StateComponent {
                name: "turn".into(),
                values: vec!["teacher".into(), "student".into()],
            },
            StateComponent {
                name: "pending".into(),
                values: pending,
            },
            StateComponent {
                name: "last".into(),
                values: Last::ALL.iter().map(|l| l.label().to_string()).collect(),
            },
        ]);
        Ok(Domain { cfg, factors })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.cfg
    }

    pub fn factors(&self) -> &StateFactors {
        &self.factors
    }

    pub fn n_objects(&self) -> usize {
        self.cfg.n_objects
    }

    pub fn object(&self, i: usize) -> Concept {
        Concept::ALL[i % 4]
    }

    pub fn hypotheses(&self) -> &[Concept] {
        &self.cfg.hypothesis_space
    }

    pub fn num_states(&self) -> usize {
        self.factors.num_states()
    }

    pub fn num_student_actions(&self) -> usize {
        self.n_objects() + 9
    }

    pub fn num_teacher_actions(&self) -> usize {
        self.n_objects() + 7
    }

    pub fn num_student_observations(&self) -> usize {
        self.n_objects() + 7
    }

    pub fn num_teacher_observations(&self) -> usize {
        self.n_objects() + 7
    }

    // ---- state encoding

    fn pending_index(&self, p: Pending) -> usize {
        let n = self.n_objects();
        match p {
            Pending::None => 0,
            Pending::Feature { feature } => 1 + feature,
            Pending::Object { object } => 5 + object,
            Pending::Clarify => 5 + n,
            Pending::Declared => 6 + n,
        }
    }

    fn pending_from(&self, i: usize) -> Pending {
        let n = self.n_objects();
        match i {
            0 => Pending::None,
            1..=4 => Pending::Feature { feature: i - 1 },
            _ if i < 5 + n => Pending::Object { object: i - 5 },
            _ if i == 5 + n => Pending::Clarify,
            _ => Pending::Declared,
        }
    }

    pub fn encode(&self, st: &GameState) -> usize {
        self.factors.compose(&[
            st.concept,
            match st.turn {
                Turn::Teacher => 0,
                Turn::Student => 1,
            },
            self.pending_index(st.pending),
            st.last.index(),
        ])
    }

    pub fn decode(&self, s: usize) -> GameState {
        let p = self.factors.decompose(s);
        GameState {
            concept: p[0],
            turn: if p[1] == 0 { Turn::Teacher } else { Turn::Student },
            pending: self.pending_from(p[2]),
            last: Last::ALL[p[3]],
        }
    }

    pub fn initial_state(&self, concept: usize) -> usize {
        self.encode(&GameState {
            concept,
            turn: Turn::Teacher,
            pending: Pending::None,
            last: Last::None,
        })
    }

    // ---- action and observation encoding

    pub fn student_action_index(&self, a: StudentAction) -> Result<usize> {
        let n = self.n_objects();
        let idx = match a {
            StudentAction::Declare => 0,
            StudentAction::Listen => 1,
            StudentAction::AskFeature { feature } if feature < 4 => 2 + feature,
            StudentAction::AskObject { object } if object < n => 6 + object,
            StudentAction::AskClarify => 6 + n,
            StudentAction::LookAtTeacher => 7 + n,
            StudentAction::Wait => 8 + n,
            StudentAction::AskFeature { feature } => return Err(out_of_range("feature", feature, 4)),
            StudentAction::AskObject { object } => return Err(out_of_range("object", object, n)),
        };
        Ok(idx)
    }

    pub fn student_action(&self, i: usize) -> StudentAction {
        let n = self.n_objects();
        match i {
            0 => StudentAction::Declare,
            1 => StudentAction::Listen,
            2..=5 => StudentAction::AskFeature { feature: i - 2 },
            _ if i < 6 + n => StudentAction::AskObject { object: i - 6 },
            _ if i == 6 + n => StudentAction::AskClarify,
            _ if i == 7 + n => StudentAction::LookAtTeacher,
            _ => StudentAction::Wait,
        }
    }

    pub fn student_wait(&self) -> usize {
        8 + self.n_objects()
    }

    pub fn teacher_signal_index(&self, sig: TeacherSignal) -> Result<usize> {
        let n = self.n_objects();
        let idx = match sig {
            TeacherSignal::UtterFeature { feature } if feature < 4 => feature,
            TeacherSignal::Point { object } if object < n => 4 + object,
            TeacherSignal::Answer { yes: true } => 4 + n,
            TeacherSignal::Answer { yes: false } => 5 + n,
            TeacherSignal::Wait => 6 + n,
            TeacherSignal::UtterFeature { feature } => return Err(out_of_range("feature", feature, 4)),
            TeacherSignal::Point { object } => return Err(out_of_range("object", object, n)),
        };
        Ok(idx)
    }

    pub fn teacher_signal(&self, i: usize) -> TeacherSignal {
        let n = self.n_objects();
        match i {
            0..=3 => TeacherSignal::UtterFeature { feature: i },
            _ if i < 4 + n => TeacherSignal::Point { object: i - 4 },
            _ if i == 4 + n => TeacherSignal::Answer { yes: true },
            _ if i == 5 + n => TeacherSignal::Answer { yes: false },
            _ => TeacherSignal::Wait,
        }
    }

    pub fn teacher_wait(&self) -> usize {
        6 + self.n_objects()
    }

    pub fn observation_index(&self, o: StudentObservation) -> Result<usize> {
        let n = self.n_objects();
        let idx = match o {
            StudentObservation::HeardFeature { feature } if feature < 4 => feature,
            StudentObservation::SeenPoint { object } if object < n => 4 + object,
            StudentObservation::HeardYes => 4 + n,
            StudentObservation::HeardNo => 5 + n,
            StudentObservation::Silence => 6 + n,
            StudentObservation::HeardFeature { feature } => return Err(out_of_range("feature", feature, 4)),
            StudentObservation::SeenPoint { object } => return Err(out_of_range("object", object, n)),
        };
        Ok(idx)
    }

    pub fn observation(&self, i: usize) -> StudentObservation {
        let n = self.n_objects();
        match i {
            0..=3 => StudentObservation::HeardFeature { feature: i },
            _ if i < 4 + n => StudentObservation::SeenPoint { object: i - 4 },
            _ if i == 4 + n => StudentObservation::HeardYes,
            _ if i == 5 + n => StudentObservation::HeardNo,
            _ => StudentObservation::Silence,
        }
    }

    /// The observation a teacher signal produces when nothing corrupts it.
    pub fn clean_observation(&self, sig: TeacherSignal) -> StudentObservation {
        match sig {
            TeacherSignal::UtterFeature { feature } => StudentObservation::HeardFeature { feature },
            TeacherSignal::Point { object } => StudentObservation::SeenPoint { object },
            TeacherSignal::Answer { yes: true } => StudentObservation::HeardYes,
            TeacherSignal::Answer { yes: false } => StudentObservation::HeardNo,
            TeacherSignal::Wait => StudentObservation::Silence,
        }
    }

    pub fn student_action_label(&self, i: usize) -> String {
        match self.student_action(i) {
            StudentAction::Declare => "declare".into(),
            StudentAction::Listen => "listen".into(),
            StudentAction::AskFeature { feature } => format!("ask_feature:{}", FEATURES[feature]),
            StudentAction::AskObject { object } => format!("ask_object:{object}"),
            StudentAction::AskClarify => "ask_clarify".into(),
            StudentAction::LookAtTeacher => "look_at_teacher".into(),
            StudentAction::Wait => "wait".into(),
        }
    }

    pub fn teacher_signal_label(&self, i: usize) -> String {
        match self.teacher_signal(i) {
            TeacherSignal::UtterFeature { feature } => format!("utter:{}", FEATURES[feature]),
            TeacherSignal::Point { object } => format!("point:{object}"),
            TeacherSignal::Answer { yes: true } => "answer:yes".into(),
            TeacherSignal::Answer { yes: false } => "answer:no".into(),
            TeacherSignal::Wait => "wait".into(),
        }
    }

    pub fn observation_label(&self, i: usize) -> String {
        match self.observation(i) {
            StudentObservation::HeardFeature { feature } => format!("heard:{}", FEATURES[feature]),
            StudentObservation::SeenPoint { object } => format!("seen:{object}"),
            StudentObservation::HeardYes => "heard_yes".into(),
            StudentObservation::HeardNo => "heard_no".into(),
            StudentObservation::Silence => "silence".into(),
        }
    }

    /// Teacher observations mirror the pending slot: what the teacher
    /// perceived the student to ask.
    pub fn teacher_observation_label(&self, i: usize) -> String {
        match self.pending_from(i) {
            Pending::None => "no_question".into(),
            Pending::Feature { feature } => format!("heard_ask:{}", FEATURES[feature]),
            Pending::Object { object } => format!("seen_ask:{object}"),
            Pending::Clarify => "heard_clarify".into(),
            Pending::Declared => "heard_declare".into(),
        }
    }

    pub fn state_label(&self, s: usize) -> String {
        let p = self.factors.decompose(s);
        self.factors
            .components
            .iter()
            .zip(p)
            .map(|(c, v)| c.values[v].as_str())
            .collect::<Vec<_>>()
            .join("/")
    }

    // ---- dynamics

    fn matching_objects(&self, concept: Concept) -> Vec<usize> {
        (0..self.n_objects())
            .filter(|&i| self.object(i) == concept)
            .collect()
    }

    fn objects_sharing(&self, concept: Concept, dim: usize) -> Vec<usize> {
        (0..self.n_objects())
            .filter(|&i| self.object(i).value(dim) == concept.value(dim))
            .collect()
    }

    fn classify(&self, st: &GameState, a_j: usize) -> Last {
        let concept = self.hypotheses()[st.concept];
        match self.teacher_signal(a_j) {
            TeacherSignal::Wait => Last::Idle,
            TeacherSignal::UtterFeature { feature } => {
                if feature_dim(feature) == 0 {
                    Last::UtteredColor
                } else {
                    Last::UtteredShape
                }
            }
            TeacherSignal::Point { object } => match (st.pending, st.last.uttered_dim()) {
                (Pending::Clarify, Some(d)) => {
                    if self.object(object).value(d) == concept.value(d) {
                        Last::TruthfulAnswer
                    } else {
                        Last::FalseAnswer
                    }
                }
                _ => Last::Pointed,
            },
            TeacherSignal::Answer { yes } => {
                let truth = match st.pending {
                    Pending::Feature { feature } => concept.has(feature),
                    Pending::Object { object } => self.object(object) == concept,
                    _ => return Last::FalseAnswer,
                };
                if yes == truth {
                    Last::TruthfulAnswer
                } else {
                    Last::FalseAnswer
                }
            }
        }
    }

    /// Deterministic successor of `s` under the joint action.
    pub fn next_state(&self, s: usize, a_i: usize, a_j: usize) -> usize {
        let st = self.decode(s);
        let next = match st.turn {
            Turn::Teacher => GameState {
                turn: Turn::Student,
                pending: Pending::None,
                last: self.classify(&st, a_j),
                ..st
            },
            Turn::Student => {
                let pending = match self.student_action(a_i) {
                    StudentAction::Declare => Pending::Declared,
                    StudentAction::AskFeature { feature } => Pending::Feature { feature },
                    StudentAction::AskObject { object } => Pending::Object { object },
                    StudentAction::AskClarify => Pending::Clarify,
                    _ => Pending::None,
                };
                GameState {
                    turn: Turn::Teacher,
                    pending,
                    ..st
                }
            }
        };
        self.encode(&next)
    }

    fn seen_object_row(&self, object: usize, offset: usize, eps: f64) -> SparseRow {
        let n = self.n_objects();
        let neighbors: Vec<usize> = [object.wrapping_sub(1), object + 1]
            .into_iter()
            .filter(|&k| k < n)
            .collect();
        if eps == 0.0 || neighbors.is_empty() {
            return vec![(offset + object, 1.0)];
        }
        let mut row = vec![(offset + object, 1.0 - eps)];
        for k in neighbors.iter() {
            row.push((offset + k, eps / neighbors.len() as f64));
        }
        row.sort_by_key(|&(i, _)| i);
        row
    }

    fn heard_feature_row(&self, feature: usize, offset: usize) -> SparseRow {
        let e = self.cfg.noise.epsilon_hear;
        if e == 0.0 {
            return vec![(offset + feature, 1.0)];
        }
        let mut row = vec![(offset + feature, 1.0 - e), (offset + confused_feature(feature), e)];
        row.sort_by_key(|&(i, _)| i);
        row
    }

    /// O_i(· | a_j): the student's perception of each teacher signal.
    pub fn signal_rows(&self) -> Vec<SparseRow> {
        let n = self.n_objects();
        (0..self.num_teacher_actions())
            .map(|a_j| match self.teacher_signal(a_j) {
                TeacherSignal::UtterFeature { feature } => self.heard_feature_row(feature, 0),
                TeacherSignal::Point { object } => {
                    self.seen_object_row(object, 4, self.cfg.noise.epsilon_point)
                }
                TeacherSignal::Answer { yes: true } => vec![(4 + n, 1.0)],
                TeacherSignal::Answer { yes: false } => vec![(5 + n, 1.0)],
                TeacherSignal::Wait => vec![(6 + n, 1.0)],
            })
            .collect()
    }

    /// O_j(· | s'): the teacher's perception of the pending question.
    pub fn question_row(&self, s_next: usize) -> SparseRow {
        match self.decode(s_next).pending {
            Pending::Feature { feature } => self.heard_feature_row(feature, 1),
            Pending::Object { object } => {
                self.seen_object_row(object, 5, self.cfg.noise.epsilon_point)
            }
            p => vec![(self.pending_index(p), 1.0)],
        }
    }

    fn volunteer(&self, st: &GameState, out: &mut [f64], mass: f64) {
        let concept = self.hypotheses()[st.concept];
        let point_at_match = |out: &mut [f64], m: f64| {
            let targets = self.matching_objects(concept);
            for &i in &targets {
                out[4 + i] += m / targets.len() as f64;
            }
        };
        let follow = if st.last.uttered_dim().is_some() {
            self.cfg.follow_up_point
        } else {
            0.0
        };
        point_at_match(out, mass * follow);
        let base = mass * (1.0 - follow);
        point_at_match(out, base * VOLUNTEER_POINT);
        let es = self.cfg.noise.epsilon_speak;
        for dim in 0..2 {
            let m = base * (1.0 - VOLUNTEER_POINT) / 2.0;
            let f = concept.feature(dim);
            for g in 0..4 {
                out[g] += m * if g == f { 1.0 - es } else { es / 3.0 };
            }
        }
    }

    /// Level-0 teacher row at state `s`.
    pub fn level0_teacher_row(&self, s: usize) -> SparseRow {
        let st = self.decode(s);
        let n = self.n_objects();
        let mut out = vec![0.0; self.num_teacher_actions()];
        if st.turn == Turn::Student {
            out[self.teacher_wait()] = 1.0;
            return sparse_from_dense(&out);
        }
        let concept = self.hypotheses()[st.concept];
        let ea = self.cfg.noise.epsilon_answer;
        let answer = |out: &mut [f64], truth: bool| {
            let (yes, no) = if truth { (1.0 - ea, ea) } else { (ea, 1.0 - ea) };
            out[4 + n] = yes;
            out[5 + n] = no;
        };
        match (st.pending, st.last.uttered_dim()) {
            (Pending::Feature { feature }, _) => answer(&mut out, concept.has(feature)),
            (Pending::Object { object }, _) => answer(&mut out, self.object(object) == concept),
            (Pending::Clarify, Some(d)) => {
                let targets = self.objects_sharing(concept, d);
                for &i in &targets {
                    out[4 + i] = 1.0 / targets.len() as f64;
                }
            }
            (Pending::Declared, _) => out[self.teacher_wait()] = 1.0,
            _ => self.volunteer(&st, &mut out, 1.0),
        }
        sparse_from_dense(&out)
    }

    /// Level-0 student row used to ground the level-1 teacher.
    pub fn level0_student_row(&self, s: usize) -> SparseRow {
        let n = self.n_objects();
        let mut out = vec![0.0; self.num_student_actions()];
        if self.decode(s).turn == Turn::Teacher {
            out[self.student_wait()] = 1.0;
            return sparse_from_dense(&out);
        }
        out[0] = 0.05;
        out[1] = 0.25;
        for f in 0..4 {
            out[2 + f] = 0.1;
        }
        for i in 0..n {
            out[6 + i] = 0.15 / n as f64;
        }
        out[6 + n] = 0.05;
        out[7 + n] = 0.05;
        out[8 + n] = 0.05;
        sparse_from_dense(&out)
    }

    pub fn level0_teacher_policy(&self) -> Result<Level0Policy> {
        Level0Policy::new(
            (0..self.num_states()).map(|s| self.level0_teacher_row(s)).collect(),
            self.num_teacher_actions(),
        )
    }

    pub fn level0_student_policy(&self) -> Result<Level0Policy> {
        Level0Policy::new(
            (0..self.num_states()).map(|s| self.level0_student_row(s)).collect(),
            self.num_student_actions(),
        )
    }

    fn state_labels(&self) -> Vec<String> {
        (0..self.num_states()).map(|s| self.state_label(s)).collect()
    }

    /// The teacher's own POMDP frame: the student's moves are marginalized
    /// through the level-0 student policy, observations are the perceived
    /// questions, and reward favours truthful answers, then idling.
    pub fn teacher_frame(&self) -> Result<PomdpModel> {
        let ns = self.num_states();
        let student = self.level0_student_policy()?;
        let transition = (0..ns)
            .map(|s| {
                (0..self.num_teacher_actions())
                    .map(|a_j| {
                        let mut dense = std::collections::BTreeMap::new();
                        for &(a_i, p) in student.row(s) {
                            *dense.entry(self.next_state(s, a_i, a_j)).or_insert(0.0) += p;
                        }
                        dense.into_iter().collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..ns)
            .map(|s| match self.decode(s).last {
                Last::TruthfulAnswer => TEACHER_REWARD_TRUTHFUL,
                Last::Idle => TEACHER_REWARD_IDLE,
                _ => 0.0,
            })
            .collect();
        PomdpModel::new(
            self.state_labels(),
            (0..self.num_teacher_actions())
                .map(|a| self.teacher_signal_label(a))
                .collect(),
            (0..self.num_teacher_observations())
                .map(|o| self.teacher_observation_label(o))
                .collect(),
            transition,
            (0..ns).map(|s| self.question_row(s)).collect(),
            UtilitySpec::ExpectedStateReward { rewards },
            self.cfg.discount,
            Some(self.factors.clone()),
        )
    }

    pub fn joint_model(&self) -> Result<JointModel> {
        let ns = self.num_states();
        let (na, nb) = (self.num_student_actions(), self.num_teacher_actions());
        let signal = self.signal_rows();
        let mut transition = Vec::with_capacity(ns);
        let mut own_available = Vec::with_capacity(ns);
        let mut other_available = Vec::with_capacity(ns);
        for s in 0..ns {
            transition.push(
                (0..na)
                    .map(|a_i| {
                        (0..nb)
                            .map(|a_j| vec![(self.next_state(s, a_i, a_j), 1.0)])
                            .collect()
                    })
                    .collect(),
            );
            match self.decode(s).turn {
                Turn::Teacher => {
                    own_available.push(vec![self.student_wait()]);
                    other_available.push(Vec::new());
                }
                Turn::Student => {
                    own_available.push(Vec::new());
                    other_available.push(vec![self.teacher_wait()]);
                }
            }
        }
        JointModel::new(JointModelParts {
            states: self.state_labels(),
            own_actions: (0..na).map(|a| self.student_action_label(a)).collect(),
            other_actions: (0..nb).map(|a| self.teacher_signal_label(a)).collect(),
            own_observations: (0..self.num_student_observations())
                .map(|o| self.observation_label(o))
                .collect(),
            other_observations: (0..self.num_teacher_observations())
                .map(|o| self.teacher_observation_label(o))
                .collect(),
            transition,
            own_obs: (0..ns).map(|_| signal.clone()).collect(),
            other_obs: (0..ns).map(|s| vec![self.question_row(s); na]).collect(),
            own_available,
            other_available,
            utility: Some(UtilitySpec::NegEntropyOverSubset { mask: vec![0] }),
            discount: self.cfg.discount,
            factors: Some(self.factors.clone()),
        })
    }

    /// Posterior over the hypothesis space from a physical marginal.
    pub fn concept_marginal(&self, physical: &[f64]) -> Vec<f64> {
        self.factors
            .marginal(physical, &[0])
            .expect("concept component exists")
    }

    /// Distribution over the pending slot, used to summarize what a level-1
    /// teacher believes the student asked.
    pub fn pending_marginal(&self, physical: &[f64]) -> Vec<f64> {
        self.factors
            .marginal(physical, &[2])
            .expect("pending component exists")
    }
}

/// Everything the student needs to act in one game instance.
#[derive(Debug, Clone)]
pub struct StudentProblem {
    pub domain: Domain,
    pub model: Arc<JointModel>,
    pub initial: InteractiveBelief,
    pub nesting: NestingConfig,
    pub plan: PlanConfig,
    /// Teacher model per hypothesis; the true teacher uses its entry.
    pub teacher_models: Vec<Arc<AgentModel>>,
}

impl StudentProblem {
    pub fn to_interactive(&self) -> InteractiveProblem {
        InteractiveProblem {
            model: (*self.model).clone(),
            initial: self.initial.clone(),
            nesting: self.nesting,
        }
    }

    pub fn concept_belief(&self, ib: &InteractiveBelief) -> Vec<f64> {
        self.domain
            .concept_marginal(&ib.physical_marginal(self.domain.num_states()))
    }
}

/// Level-0 teacher model.
pub fn level0_teacher_policy(cfg: &DomainConfig) -> Result<AgentModel> {
    Ok(AgentModel::Level0(Arc::new(
        Domain::new(cfg.clone())?.level0_teacher_policy()?,
    )))
}

/// Student perception of each teacher signal, indexed by teacher action.
pub fn signal_observation_model(cfg: &DomainConfig) -> Result<Vec<SparseRow>> {
    Ok(Domain::new(cfg.clone())?.signal_rows())
}

pub fn build_student_ipomdp(cfg: &DomainConfig) -> Result<StudentProblem> {
    let domain = Domain::new(cfg.clone())?;
    let model = Arc::new(domain.joint_model()?);
    let nh = domain.hypotheses().len();
    let teacher_models: Vec<Arc<AgentModel>> = match cfg.teacher_level {
        0 => {
            let shared = Arc::new(AgentModel::Level0(Arc::new(domain.level0_teacher_policy()?)));
            vec![shared; nh]
        }
        _ => {
            let frame = Arc::new(AgentFrame::Pomdp(domain.teacher_frame()?));
            let grounding = Arc::new(domain.level0_student_policy()?);
            let plan = PlanConfig {
                discount_override: None,
                ..PlanConfig::with_horizon(1)
            };
            (0..nh)
                .map(|h| {
                    Arc::new(AgentModel::LevelK(LevelKModel {
                        level: 1,
                        frame: frame.clone(),
                        belief: NestedBelief::Flat {
                            belief: Belief::delta(domain.num_states(), domain.initial_state(h)),
                            grounding: grounding.clone(),
                        },
                        plan: plan.clone(),
                        softness: None,
                    }))
                })
                .collect()
        }
    };
    let prior = cfg.prior_belief();
    let branches = prior
        .support()
        .map(|(h, p)| {
            (
                InteractiveState {
                    physical: domain.initial_state(h),
                    other: teacher_models[h].clone(),
                },
                p,
            )
        })
        .collect();
    let nesting = NestingConfig::default();
    let initial = InteractiveBelief::new(branches)?;
    initial.validate_models(nesting.depth_cap)?;
    Ok(StudentProblem {
        plan: cfg.plan_config(),
        domain,
        model,
        initial,
        nesting,
        teacher_models,
    })
}
