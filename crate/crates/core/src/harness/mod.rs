//! Judging episodes, aggregating results into per-category tables, batch
//! runs, and trace replay.

mod report;
mod run;

pub use report::{aggregate, CellStats, ConsistencyStats, Report, ReportRow};
pub use run::{
    load_run, replay_trace, run_batch, HarnessError, ReplayError, ReplaySummary, RunEntry, RunManifest,
    RUN_MANIFEST_FILE,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::OracleBackend;
use crate::planner::EpisodeTrace;
use crate::scenarios::{goal_report, Scenario, TaskCategory};
use crate::world::{Skill, AMOUNT_EPSILON};

/// Executed steps (DONE excluded) allowed beyond the reference plan.
pub const STEP_ALLOWANCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ExceededStepBudget,
    BowlSpilled,
    UninstructedTransfer,
    UninstructedDumbwaiterOp,
    GoalNotMet,
    NonTermination,
}

impl FailureReason {
    pub const ALL: [FailureReason; 6] = [
        FailureReason::ExceededStepBudget,
        FailureReason::BowlSpilled,
        FailureReason::UninstructedTransfer,
        FailureReason::UninstructedDumbwaiterOp,
        FailureReason::GoalNotMet,
        FailureReason::NonTermination,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::ExceededStepBudget => "exceeded_step_budget",
            FailureReason::BowlSpilled => "bowl_spilled",
            FailureReason::UninstructedTransfer => "uninstructed_transfer",
            FailureReason::UninstructedDumbwaiterOp => "uninstructed_dumbwaiter_op",
            FailureReason::GoalNotMet => "goal_not_met",
            FailureReason::NonTermination => "non_termination",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessJudgment {
    pub scenario_id: String,
    pub category: TaskCategory,
    pub config: String,
    pub success: bool,
    pub failure_reasons: Vec<FailureReason>,
    /// Executed skills, DONE excluded.
    pub executed_steps: usize,
    pub reference_steps: usize,
    pub gated_attempts: usize,
    pub conflicts: usize,
    pub conflicts_toward_majority: usize,
    /// Conflicts whose chosen skill matched the oracle's next skill.
    pub conflicts_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("trace is for scenario {trace}, not {scenario}")]
    ScenarioMismatch { trace: String, scenario: String },
    #[error("trace for {0} starts from a different initial state")]
    InitialStateMismatch(String),
}

pub fn judge(trace: &EpisodeTrace, scenario: &Scenario) -> Result<SuccessJudgment, JudgeError> {
    if trace.scenario_id != scenario.id {
        return Err(JudgeError::ScenarioMismatch {
            trace: trace.scenario_id.clone(),
            scenario: scenario.id.clone(),
        });
    }
    if trace.initial_state != scenario.initial_state {
        return Err(JudgeError::InitialStateMismatch(scenario.id.clone()));
    }
    let initial = &scenario.initial_state;
    let last = &trace.final_state;
    let executed = trace.executed_skills();
    let steps = executed.iter().filter(|s| **s != Skill::Done).count();
    let reference_steps = scenario.reference_steps();
    let forbidden = scenario.goal.forbidden();

    let mut reasons = Vec::new();
    if steps > reference_steps + STEP_ALLOWANCE {
        reasons.push(FailureReason::ExceededStepBudget);
    }
    if !last.spill_events.is_empty() {
        reasons.push(FailureReason::BowlSpilled);
    }
    let moved = forbidden.foods.iter().any(|food| {
        let bowls_changed = initial.bowls.iter().any(|b0| {
            let now = last.bowl(b0.id).map_or(0.0, |b| b.portion(*food));
            (now - b0.portion(*food)).abs() > AMOUNT_EPSILON
        });
        let on_spoon = last.manipulator.spoon_contents.is_some_and(|l| l.food == *food);
        bowls_changed || on_spoon
    });
    if moved {
        reasons.push(FailureReason::UninstructedTransfer);
    }
    let uninstructed_op = executed.iter().any(|s| match s {
        Skill::OpenDumbwaiter => forbidden.open,
        Skill::CloseDumbwaiter => forbidden.close,
        Skill::StartDumbwaiter => forbidden.start,
        Skill::PutBowlIntoDumbwaiter => forbidden.insert,
        _ => false,
    });
    if uninstructed_op {
        reasons.push(FailureReason::UninstructedDumbwaiterOp);
    }
    if !goal_report(last, initial, &scenario.goal).satisfied {
        reasons.push(FailureReason::GoalNotMet);
    }
    if trace.termination != crate::planner::TerminationReason::Done {
        reasons.push(FailureReason::NonTermination);
    }

    let (mut conflicts, mut toward, mut correct) = (0, 0, 0);
    let mut state = initial.clone();
    let mut history: Vec<Skill> = Vec::new();
    for record in &trace.records {
        for attempt in &record.attempts {
            let Some(c) = &attempt.consistency else { continue };
            let (crate::planner::Consistency::Conflict { majority }, Some(r)) = (&c.result, &c.resolution) else {
                continue;
            };
            conflicts += 1;
            if &r.chosen == majority {
                toward += 1;
            }
            let oracle_next = OracleBackend::remaining_plan(scenario, &history, &state);
            if oracle_next.first() == Some(&r.chosen) {
                correct += 1;
            }
        }
        if let (Some(skill), Some(after)) = (&record.executed, &record.state_after) {
            history.push(skill.clone());
            state = after.clone();
        }
    }

    Ok(SuccessJudgment {
        scenario_id: scenario.id.clone(),
        category: scenario.category,
        config: trace.config.label(),
        success: reasons.is_empty(),
        failure_reasons: reasons,
        executed_steps: steps,
        reference_steps,
        gated_attempts: trace.attempts().filter(|a| a.gated).count(),
        conflicts,
        conflicts_toward_majority: toward,
        conflicts_correct: correct,
    })
}
