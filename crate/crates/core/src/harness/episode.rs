//! Seeded episodes: a true teacher (simulated or scripted) and the planning
//! student alternate turns over a hidden concept.

use std::sync::Arc;

use crate::domain::{build_student_ipomdp, DomainConfig, StudentAction, StudentProblem, TeacherSignal, Turn};
use crate::error::{Error, Result};
use crate::nesting::{advance_model, teacher_action_distribution, AgentModel};
use crate::pomdp::entropy_bits;

use super::agent::StudentAgent;
use super::rng::{sample_sparse, stream, Stream};
use super::trace::{Actor, EpisodeTrace, StepRecord, TraceHeader, TRACE_FORMAT};

/// How a teacher signal reaches the student.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Through the configured perception noise.
    Noisy,
    /// Exactly as sent.
    Clean,
}

#[derive(Debug, Clone)]
pub struct Episode {
    seed: u64,
    agent: StudentAgent,
    state: usize,
    teacher: Arc<AgentModel>,
    trace: EpisodeTrace,
    last_view: Option<(usize, usize)>,
}

impl Episode {
    pub fn new(problem: Arc<StudentProblem>, seed: u64) -> Result<Self> {
        let cfg = problem.domain.config().clone();
        let concept = match cfg.true_concept {
            Some(c) => c,
            None => sample_sparse(
                &mut stream(seed, 0, Stream::Concept),
                &cfg.prior_belief().support().collect::<Vec<_>>(),
            ),
        };
        let agent = StudentAgent::new(problem.clone());
        let header = TraceHeader {
            format: TRACE_FORMAT.into(),
            config_hash: cfg.config_hash(),
            seed,
            true_concept: cfg.hypothesis_space[concept].label(),
            hypotheses: cfg.hypothesis_space.iter().map(|h| h.label()).collect(),
            initial_belief: agent.concept_belief(),
            initial_entropy_bits: agent.entropy_bits(),
        };
        Ok(Episode {
            seed,
            state: problem.domain.initial_state(concept),
            teacher: problem.teacher_models[concept].clone(),
            agent,
            trace: EpisodeTrace {
                header,
                steps: Vec::new(),
            },
            last_view: None,
        })
    }

    pub fn from_config(cfg: &DomainConfig, seed: u64) -> Result<Self> {
        Episode::new(Arc::new(build_student_ipomdp(cfg)?), seed)
    }

    pub fn step(&self) -> usize {
        self.trace.steps.len()
    }

    pub fn turn(&self) -> Turn {
        self.agent.domain().decode(self.state).turn
    }

    pub fn agent(&self) -> &StudentAgent {
        &self.agent
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EpisodeTrace {
        self.trace
    }

    pub fn true_state(&self) -> usize {
        self.state
    }

    /// Student action and observation indices of the latest step.
    pub fn last_view(&self) -> Option<(usize, usize)> {
        self.last_view
    }

    fn problem(&self) -> &StudentProblem {
        self.agent.problem()
    }

    /// Advances the world one joint step and updates the student.
    fn advance(&mut self, a_i: usize, a_j: usize, o_i: Option<usize>) -> Result<(usize, usize)> {
        let step = self.step() as u64;
        let jm = self.problem().model.clone();
        let s2 = sample_sparse(
            &mut stream(self.seed, step, Stream::Transition),
            jm.transition_row(self.state, a_i, a_j),
        );
        let o_i = match o_i {
            Some(o) => o,
            None => sample_sparse(
                &mut stream(self.seed, step, Stream::StudentChannel),
                jm.own_obs_row(s2, a_j),
            ),
        };
        let o_j = sample_sparse(
            &mut stream(self.seed, step, Stream::TeacherChannel),
            jm.other_obs_row(s2, a_i),
        );
        let mut agent = self.agent.clone();
        agent.observe(a_i, o_i)?;
        self.teacher = advance_model(&self.teacher, a_j, o_j, &self.problem().nesting)?;
        self.agent = agent;
        self.state = s2;
        self.last_view = Some((a_i, o_i));
        Ok((s2, o_i))
    }

    fn record(&mut self, actor: Actor, action: String, declared: Option<String>, o_i: usize, q: Option<Vec<f64>>) {
        let d = self.agent.domain();
        let belief = self.agent.concept_belief();
        let rec = StepRecord {
            step: self.step(),
            actor,
            action,
            declared,
            true_state: d.state_label(self.state),
            observation: d.observation_label(o_i),
            entropy_bits: entropy_bits(&belief),
            belief,
            nested: self.agent.nested_summary(),
            q_values: q,
        };
        self.trace.steps.push(rec);
    }

    fn require_turn(&self, turn: Turn) -> Result<()> {
        if self.turn() != turn {
            return Err(Error::Turn {
                expected: match turn {
                    Turn::Teacher => "teacher",
                    Turn::Student => "student",
                },
            });
        }
        Ok(())
    }

    /// Teacher turn. With `signal = None` the simulated teacher samples its
    /// action; otherwise the given signal is used and delivered over
    /// `channel`.
    pub fn teacher_step(&mut self, signal: Option<TeacherSignal>, channel: Channel) -> Result<&StepRecord> {
        self.require_turn(Turn::Teacher)?;
        let step = self.step();
        let domain = self.agent.domain().clone();
        let jm = self.problem().model.clone();
        let a_j = match signal {
            Some(sig) => domain.teacher_signal_index(sig)?,
            None => {
                let dist = teacher_action_distribution(
                    &self.teacher,
                    &[(self.state, 1.0)],
                    &jm.other_available(self.state),
                    domain.num_teacher_actions(),
                    self.problem().nesting.depth_cap,
                )
                .map_err(|e| e.at_step(step))?;
                let row: Vec<(usize, f64)> = dist.into_iter().enumerate().collect();
                sample_sparse(&mut stream(self.seed, step as u64, Stream::Teacher), &row)
            }
        };
        let forced_obs = match channel {
            Channel::Clean => Some(domain.observation_index(domain.clean_observation(domain.teacher_signal(a_j)))?),
            Channel::Noisy => None,
        };
        let (_, o_i) = self
            .advance(domain.student_wait(), a_j, forced_obs)
            .map_err(|e| e.at_step(step))?;
        self.record(Actor::Teacher, domain.teacher_signal_label(a_j), None, o_i, None);
        Ok(self.trace.steps.last().expect("just pushed"))
    }

    /// Student turn: plans unless `forced` is given.
    pub fn student_step(&mut self, forced: Option<StudentAction>) -> Result<&StepRecord> {
        self.require_turn(Turn::Student)?;
        let step = self.step();
        let domain = self.agent.domain().clone();
        let (a_i, q) = match forced {
            Some(a) => (domain.student_action_index(a)?, None),
            None => {
                let plan = self.agent.plan().map_err(|e| e.at_step(step))?;
                (plan.chosen_action, Some(plan.q_values))
            }
        };
        let declared = (domain.student_action(a_i) == StudentAction::Declare)
            .then(|| domain.hypotheses()[self.agent.map_concept()].label());
        let (_, o_i) = self
            .advance(a_i, domain.teacher_wait(), None)
            .map_err(|e| e.at_step(step))?;
        self.record(Actor::Student, domain.student_action_label(a_i), declared, o_i, q);
        Ok(self.trace.steps.last().expect("just pushed"))
    }
}

/// Simulates both agents for `max_steps` joint steps.
pub fn run_episode(cfg: &DomainConfig, seed: u64) -> Result<EpisodeTrace> {
    run_episode_with(Arc::new(build_student_ipomdp(cfg)?), seed)
}

pub fn run_episode_with(problem: Arc<StudentProblem>, seed: u64) -> Result<EpisodeTrace> {
    let max_steps = problem.domain.config().max_steps;
    let mut ep = Episode::new(problem, seed)?;
    for _ in 0..max_steps {
        match ep.turn() {
            Turn::Teacher => {
                ep.teacher_step(None, Channel::Noisy)?;
            }
            Turn::Student => {
                ep.student_step(None)?;
            }
        }
    }
    Ok(ep.into_trace())
}
