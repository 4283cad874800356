use std::time::Instant;

use super::{Backend, BackendError, Capabilities, ModelRequest, ModelResponse, RequestContext, RequestKind};
use crate::prompts::{render_response, PlannedStep};
use crate::scenarios::{plan_from, Scenario};
use crate::world::{Skill, WorldState};

/// Answers from the symbolic planner: the rest of the reference plan while
/// the episode follows it, a fresh plan from the current state otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl OracleBackend {
    /// Skills the oracle would execute next, given what was executed so far.
    pub fn remaining_plan(scenario: &Scenario, history: &[Skill], state: &WorldState) -> Vec<Skill> {
        let reference = &scenario.reference_plan;
        let n = history.len();
        if n < reference.len() && reference[..n] == *history {
            return reference[n..].to_vec();
        }
        plan_from(state, &scenario.initial_state, &scenario.goal).unwrap_or_else(|_| vec![Skill::Done])
    }

    pub fn respond(ctx: &RequestContext) -> String {
        let plan = Self::remaining_plan(&ctx.scenario, &ctx.history, &ctx.state);
        match &ctx.kind {
            RequestKind::Plan => {
                let steps: Vec<PlannedStep> = plan
                    .into_iter()
                    .enumerate()
                    .map(|(i, skill)| PlannedStep {
                        iteration: ctx.iteration + i as u32,
                        skill,
                    })
                    .collect();
                let description = describe(&steps[0].skill, &ctx.scenario.instruction);
                render_response(&description, &steps, &ctx.labels)
            }
            RequestKind::Resolve { proposed, majority } => {
                let pick = if plan.first() == Some(proposed) { proposed } else { majority };
                format!(
                    "Description: {} matches the remaining plan.\nOutput: {}",
                    pick.spoken_name(),
                    ctx.labels.labelled(pick)
                )
            }
        }
    }
}

fn describe(next: &Skill, instruction: &str) -> String {
    let goal = instruction.trim_end_matches('.');
    match next {
        Skill::Done => format!("The task \"{goal}\" is complete."),
        Skill::PullBowlCloser => format!("A bowl is out of reach or in the way; pull it closer, then continue: {goal}."),
        Skill::PutSpoonBack => format!("Return the spoon to the holder before the next step of: {goal}."),
        _ => format!("Next sub-goal is to {}, working toward: {goal}.", next.spoken_name()),
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            multimodal: false,
            concurrent: true,
        }
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let started = Instant::now();
        let ctx = request.context.as_ref().ok_or(BackendError::MissingContext)?;
        Ok(ModelResponse {
            text: Self::respond(ctx),
            latency_ms: started.elapsed().as_millis() as u64,
            backend_id: self.id(),
        })
    }
}
