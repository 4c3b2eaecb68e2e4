//! Scripted situations in which a particular student move is expected.

use serde::{Deserialize, Serialize};

use super::{Concept, DomainConfig, NoiseConfig, StudentAction, TeacherSignal};

/// One joint step of a script, in turn order starting with the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "turn", rename_all = "snake_case")]
pub enum ScriptStep {
    /// The teacher sends `signal`; the student perceives it unaltered.
    Teacher { signal: TeacherSignal },
    /// The student takes a fixed action.
    Student { action: StudentAction },
    /// The student plans and acts.
    Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    /// The action the final planning step must choose.
    pub chosen: StudentAction,
    /// The family of acceptable behaviours the scenario illustrates.
    pub family: Vec<StudentAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub config: DomainConfig,
    pub script: Vec<ScriptStep>,
    pub expect: Expectation,
}

const RED: usize = 0;
const BLUE: usize = 1;
const BALL: usize = 2;
const BOX: usize = 3;

fn utter(feature: usize) -> ScriptStep {
    ScriptStep::Teacher {
        signal: TeacherSignal::UtterFeature { feature },
    }
}

fn ask(feature: usize) -> StudentAction {
    StudentAction::AskFeature { feature }
}

fn object_questions(n: usize) -> Vec<StudentAction> {
    (0..n).map(|object| StudentAction::AskObject { object }).collect()
}

/// CLARIFICATION, INTERRUPTION, CORRECTION and SILENCE.
pub fn scenario_library() -> Vec<Scenario> {
    let base = DomainConfig {
        true_concept: Some(0),
        seed: 7,
        ..DomainConfig::default()
    };
    vec![
        Scenario {
            name: "clarification".into(),
            description: "The student hears \"red\" over a poor channel and asks the teacher \
                          to show what was meant."
                .into(),
            config: DomainConfig {
                noise: NoiseConfig {
                    epsilon_hear: 0.3,
                    epsilon_answer: 0.1,
                    ..NoiseConfig::default()
                },
                prior: Some(vec![0.49, 0.01, 0.49, 0.01]),
                horizon: 2,
                ..base.clone()
            },
            script: vec![utter(RED), ScriptStep::Plan],
            expect: Expectation {
                chosen: StudentAction::AskClarify,
                family: vec![StudentAction::AskClarify],
            },
        },
        Scenario {
            name: "interruption".into(),
            description: "The color is settled, the teacher keeps naming it, and the student \
                          interrupts to ask about the shape."
                .into(),
            config: DomainConfig {
                prior: Some(vec![0.49, 0.49, 0.01, 0.01]),
                horizon: 1,
                ..base.clone()
            },
            script: vec![
                utter(RED),
                ScriptStep::Student {
                    action: StudentAction::Listen,
                },
                utter(RED),
                ScriptStep::Plan,
            ],
            expect: Expectation {
                chosen: ask(BALL),
                family: vec![
                    ask(BALL),
                    ask(BOX),
                    StudentAction::AskObject { object: 0 },
                    StudentAction::AskObject { object: 1 },
                ],
            },
        },
        Scenario {
            name: "correction".into(),
            description: "A level-1 teacher mishears the student's question and answers the \
                          wrong one; the student asks again instead of accepting the answer."
                .into(),
            config: DomainConfig {
                teacher_level: 1,
                noise: NoiseConfig {
                    epsilon_hear: 0.3,
                    ..NoiseConfig::default()
                },
                prior: Some(vec![0.49, 0.01, 0.49, 0.01]),
                horizon: 1,
                ..base.clone()
            },
            script: vec![
                ScriptStep::Teacher {
                    signal: TeacherSignal::Wait,
                },
                ScriptStep::Student { action: ask(RED) },
                ScriptStep::Teacher {
                    signal: TeacherSignal::Answer { yes: false },
                },
                ScriptStep::Plan,
            ],
            expect: Expectation {
                chosen: StudentAction::AskObject { object: 0 },
                family: {
                    let mut f = vec![ask(RED), ask(BLUE), StudentAction::AskClarify];
                    f.extend(object_questions(4));
                    f
                },
            },
        },
        Scenario {
            name: "silence".into(),
            description: "The teacher has just named the color and is about to point; the \
                          student keeps quiet and lets the demonstration finish."
                .into(),
            config: DomainConfig {
                noise: NoiseConfig {
                    epsilon_answer: 0.02,
                    ..NoiseConfig::noiseless()
                },
                follow_up_point: 1.0,
                horizon: 1,
                ..base
            },
            script: vec![utter(RED), ScriptStep::Plan],
            expect: Expectation {
                chosen: StudentAction::Listen,
                family: vec![
                    StudentAction::Listen,
                    StudentAction::LookAtTeacher,
                    StudentAction::Wait,
                ],
            },
        },
    ]
}

impl Scenario {
    pub fn true_concept(&self) -> Concept {
        self.config.hypothesis_space[self.config.true_concept.unwrap_or(0)]
    }
}
