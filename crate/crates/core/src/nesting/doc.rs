//! `ipomdp/1` documents: a joint model plus the nesting spec and the initial
//! interactive belief. Level-k models with interactive frames are not
//! serializable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    AgentFrame, AgentModel, InteractiveBelief, InteractiveState, JointModel, JointModelParts,
    Level0Policy, LevelKModel, NestedBelief, NestingConfig,
};
use crate::error::{Error, Result};
use crate::planner::PlanConfig;
use crate::pomdp::{Belief, PomdpDoc, PomdpModel, RowDoc, StateFactors, UtilitySpec};

pub const IPOMDP_FORMAT: &str = "ipomdp/1";

#[derive(Debug, Clone, PartialEq)]
pub struct InteractiveProblem {
    pub model: JointModel,
    pub initial: InteractiveBelief,
    pub nesting: NestingConfig,
}

#[derive(Serialize, Deserialize)]
struct TeacherDoc {
    actions: Vec<String>,
    observations: Vec<String>,
    /// `[s'][a_student]` rows over teacher observations.
    observation_model: Vec<Vec<RowDoc>>,
}

#[derive(Serialize, Deserialize, Default)]
struct AvailabilityDoc {
    #[serde(default)]
    student: Vec<Vec<usize>>,
    #[serde(default)]
    teacher: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelDoc {
    Level0 {
        policy: usize,
    },
    LevelK {
        level: usize,
        frame: usize,
        grounding: usize,
        belief: RowDoc,
        plan: PlanConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        softness: Option<f64>,
    },
}

#[derive(Serialize, Deserialize)]
struct PolicyDoc {
    num_actions: usize,
    rows: Vec<RowDoc>,
}

#[derive(Serialize, Deserialize)]
struct BranchDoc {
    physical: usize,
    model: usize,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct NestingDoc {
    prune_epsilon: f64,
    merge_l1: f64,
    depth_cap: usize,
    policies: Vec<PolicyDoc>,
    frames: Vec<PomdpDoc>,
    models: Vec<ModelDoc>,
    initial_belief: Vec<BranchDoc>,
}

#[derive(Serialize, Deserialize)]
struct IpomdpDoc {
    format: String,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    /// `[s][a_student][a_teacher]` rows over next states.
    transition: Vec<Vec<Vec<RowDoc>>>,
    /// `[s'][a_teacher]` rows over student observations.
    observation_model: Vec<Vec<RowDoc>>,
    utility: UtilitySpec,
    discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_components: Option<StateFactors>,
    teacher: TeacherDoc,
    #[serde(default)]
    available: AvailabilityDoc,
    nesting: NestingDoc,
}

fn index_of<T>(pool: &mut Vec<Arc<T>>, item: &Arc<T>) -> usize {
    match pool.iter().position(|p| Arc::ptr_eq(p, item)) {
        Some(i) => i,
        None => {
            pool.push(item.clone());
            pool.len() - 1
        }
    }
}

impl InteractiveProblem {
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let jm = &self.model;
        let ns = jm.num_states();
        let mut policies: Vec<Arc<Level0Policy>> = Vec::new();
        let mut frames: Vec<Arc<AgentFrame>> = Vec::new();
        let mut models: Vec<Arc<AgentModel>> = Vec::new();
        let mut model_docs = Vec::new();
        let mut branches = Vec::new();
        for (st, w) in self.initial.branches() {
            let before = models.len();
            let idx = index_of(&mut models, &st.other);
            if idx == before {
                let doc = match &*st.other {
                    AgentModel::Level0(p) => ModelDoc::Level0 {
                        policy: index_of(&mut policies, p),
                    },
                    AgentModel::LevelK(m) => match (&*m.frame, &m.belief) {
                        (AgentFrame::Pomdp(_), NestedBelief::Flat { belief, grounding }) => {
                            ModelDoc::LevelK {
                                level: m.level,
                                frame: index_of(&mut frames, &m.frame),
                                grounding: index_of(&mut policies, grounding),
                                belief: RowDoc::encode(
                                    &crate::pomdp::sparse_from_dense(belief.probs()),
                                    belief.len(),
                                ),
                                plan: m.plan.clone(),
                                softness: m.softness,
                            }
                        }
                        _ => {
                            return Err(Error::Format(
                                "interactive frames cannot be serialized in ipomdp/1".into(),
                            ))
                        }
                    },
                };
                model_docs.push(doc);
            }
            branches.push(BranchDoc {
                physical: st.physical,
                model: idx,
                weight: *w,
            });
        }
        let frame_docs = frames
            .iter()
            .map(|f| match &**f {
                AgentFrame::Pomdp(m) => PomdpDoc::from(m),
                AgentFrame::Interactive(_) => unreachable!("filtered above"),
            })
            .collect();
        let policy_docs = policies
            .iter()
            .map(|p| PolicyDoc {
                num_actions: p.num_actions(),
                rows: p
                    .rows()
                    .iter()
                    .map(|r| RowDoc::encode(r, p.num_actions()))
                    .collect(),
            })
            .collect();
        let doc = IpomdpDoc {
            format: IPOMDP_FORMAT.into(),
            states: jm.states.clone(),
            actions: jm.own_actions.clone(),
            observations: jm.own_observations.clone(),
            transition: jm
                .transition
                .iter()
                .map(|a| {
                    a.iter()
                        .map(|b| b.iter().map(|r| RowDoc::encode(r, ns)).collect())
                        .collect()
                })
                .collect(),
            observation_model: jm
                .own_obs
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|r| RowDoc::encode(r, jm.own_observations.len()))
                        .collect()
                })
                .collect(),
            utility: jm.utility.clone(),
            discount: jm.discount,
            state_components: jm.factors.clone(),
            teacher: TeacherDoc {
                actions: jm.other_actions.clone(),
                observations: jm.other_observations.clone(),
                observation_model: jm
                    .other_obs
                    .iter()
                    .map(|rows| {
                        rows.iter()
                            .map(|r| RowDoc::encode(r, jm.other_observations.len()))
                            .collect()
                    })
                    .collect(),
            },
            available: AvailabilityDoc {
                student: jm.own_available.clone(),
                teacher: jm.other_available.clone(),
            },
            nesting: NestingDoc {
                prune_epsilon: self.nesting.prune_epsilon,
                merge_l1: self.nesting.merge_l1,
                depth_cap: self.nesting.depth_cap,
                policies: policy_docs,
                frames: frame_docs,
                models: model_docs,
                initial_belief: branches,
            },
        };
        Ok(serde_json::to_value(doc)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: IpomdpDoc = serde_json::from_str(text)?;
        if doc.format != IPOMDP_FORMAT {
            return Err(Error::Format(format!(
                "expected format {IPOMDP_FORMAT}, found {}",
                doc.format
            )));
        }
        let ns = doc.states.len();
        let no = doc.observations.len();
        let np = doc.teacher.observations.len();
        let transition = doc
            .transition
            .into_iter()
            .map(|a| {
                a.into_iter()
                    .map(|b| {
                        b.into_iter()
                            .map(|r| r.into_sparse(ns, "transition"))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let own_obs = doc
            .observation_model
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|r| r.into_sparse(no, "observation_model"))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let other_obs = doc
            .teacher
            .observation_model
            .into_iter()
            .map(|rows| {
                rows.into_iter()
                    .map(|r| r.into_sparse(np, "teacher.observation_model"))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let model = JointModel::new(JointModelParts {
            states: doc.states,
            own_actions: doc.actions,
            other_actions: doc.teacher.actions,
            own_observations: doc.observations,
            other_observations: doc.teacher.observations,
            transition,
            own_obs,
            other_obs,
            own_available: doc.available.student,
            other_available: doc.available.teacher,
            utility: Some(doc.utility),
            discount: doc.discount,
            factors: doc.state_components,
        })?;
        let nest = doc.nesting;
        let policies: Vec<Arc<Level0Policy>> = nest
            .policies
            .into_iter()
            .map(|p| {
                let rows = p
                    .rows
                    .into_iter()
                    .map(|r| r.into_sparse(p.num_actions, "policy"))
                    .collect::<Result<Vec<_>>>()?;
                Level0Policy::new(rows, p.num_actions).map(Arc::new)
            })
            .collect::<Result<_>>()?;
        let frames: Vec<Arc<AgentFrame>> = nest
            .frames
            .into_iter()
            .map(|f| Ok(Arc::new(AgentFrame::Pomdp(PomdpModel::try_from(f)?))))
            .collect::<Result<_>>()?;
        let get = |pool_len: usize, i: usize, what: &'static str| {
            if i < pool_len {
                Ok(i)
            } else {
                Err(Error::IndexOutOfRange {
                    what,
                    index: i,
                    len: pool_len,
                })
            }
        };
        let mut models: Vec<Arc<AgentModel>> = Vec::new();
        for m in nest.models {
            let model = match m {
                ModelDoc::Level0 { policy } => {
                    AgentModel::Level0(policies[get(policies.len(), policy, "policy")?].clone())
                }
                ModelDoc::LevelK {
                    level,
                    frame,
                    grounding,
                    belief,
                    plan,
                    softness,
                } => {
                    let frame = frames[get(frames.len(), frame, "frame")?].clone();
                    let n = match &*frame {
                        AgentFrame::Pomdp(f) => f.num_states(),
                        AgentFrame::Interactive(_) => unreachable!(),
                    };
                    let probs = belief.into_sparse(n, "belief")?;
                    let mut dense = vec![0.0; n];
                    for (i, p) in probs {
                        *dense.get_mut(i).ok_or(Error::IndexOutOfRange {
                            what: "belief",
                            index: i,
                            len: n,
                        })? = p;
                    }
                    AgentModel::LevelK(LevelKModel {
                        level,
                        frame,
                        belief: NestedBelief::Flat {
                            belief: Belief::new(dense)?,
                            grounding: policies[get(policies.len(), grounding, "policy")?].clone(),
                        },
                        plan,
                        softness,
                    })
                }
            };
            models.push(Arc::new(model));
        }
        let branches = nest
            .initial_belief
            .into_iter()
            .map(|b| {
                if b.physical >= ns {
                    return Err(Error::IndexOutOfRange {
                        what: "state",
                        index: b.physical,
                        len: ns,
                    });
                }
                Ok((
                    InteractiveState {
                        physical: b.physical,
                        other: models[get(models.len(), b.model, "model")?].clone(),
                    },
                    b.weight,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let initial = InteractiveBelief::new(branches)?;
        let nesting = NestingConfig {
            prune_epsilon: nest.prune_epsilon,
            merge_l1: nest.merge_l1,
            depth_cap: nest.depth_cap,
        };
        initial.validate_models(nesting.depth_cap)?;
        Ok(InteractiveProblem {
            model,
            initial,
            nesting,
        })
    }
}
