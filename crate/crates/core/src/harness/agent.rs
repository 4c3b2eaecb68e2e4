//! The planning student, shared by the simulator and the session service.

use std::sync::Arc;

use crate::domain::{Domain, StudentProblem};
use crate::error::Result;
use crate::nesting::{interactive_belief_update, solve_level_k, AgentModel, InteractiveBelief};
use crate::planner::PlanResult;
use crate::pomdp::entropy_bits;

#[derive(Debug, Clone)]
pub struct StudentAgent {
    problem: Arc<StudentProblem>,
    belief: InteractiveBelief,
}

impl StudentAgent {
    pub fn new(problem: Arc<StudentProblem>) -> Self {
        let belief = problem.initial.clone();
        StudentAgent { problem, belief }
    }

    pub fn problem(&self) -> &StudentProblem {
        &self.problem
    }

    pub fn domain(&self) -> &Domain {
        &self.problem.domain
    }

    pub fn belief(&self) -> &InteractiveBelief {
        &self.belief
    }

    pub fn concept_belief(&self) -> Vec<f64> {
        self.problem.concept_belief(&self.belief)
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.concept_belief())
    }

    /// Index of the most probable concept, lowest index on ties.
    pub fn map_concept(&self) -> usize {
        let b = self.concept_belief();
        let mut best = 0;
        for (i, &p) in b.iter().enumerate() {
            if p > b[best] {
                best = i;
            }
        }
        best
    }

    pub fn plan(&self) -> Result<PlanResult> {
        solve_level_k(
            &self.problem.model,
            &self.belief,
            &self.problem.plan,
            &self.problem.nesting,
        )
    }

    pub fn observe(&mut self, a_own: usize, o_own: usize) -> Result<()> {
        self.belief = interactive_belief_update(
            &self.problem.model,
            &self.belief,
            a_own,
            o_own,
            &self.problem.nesting,
        )?;
        Ok(())
    }

    /// What the student thinks a level-1 teacher believes the pending
    /// question is, averaged over branches. `None` for a level-0 teacher.
    pub fn nested_summary(&self) -> Option<Vec<f64>> {
        let domain = self.domain();
        let mut acc: Option<Vec<f64>> = None;
        for (st, w) in self.belief.branches() {
            let b = match &*st.other {
                AgentModel::LevelK(_) => st.other.flat_belief()?,
                AgentModel::Level0(_) => return None,
            };
            let m = domain.pending_marginal(b.probs());
            let acc = acc.get_or_insert_with(|| vec![0.0; m.len()]);
            for (a, v) in acc.iter_mut().zip(m) {
                *a += w * v;
            }
        }
        acc
    }
}
