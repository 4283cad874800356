//! Symbolic planner over the simulator. Every emitted step is checked by the
//! affordance gate and executed on a scratch copy of the state, so a plan that
//! comes back `Ok` is feasible by construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::goal::{remaining_scoops, GoalSpec};
use crate::affordance;
use crate::world::{apply_skill, BowlId, DoorState, OutcomeStatus, Skill, WorldState, AMOUNT_EPSILON, SCOOP_CAPACITY};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum PlanError {
    #[error("goal is unsatisfiable: {0}")]
    Unsatisfiable(String),
    #[error("planned step {step} ({skill}) is infeasible: {feedback}")]
    Infeasible { step: usize, skill: String, feedback: String },
}

struct Sim {
    state: WorldState,
    plan: Vec<Skill>,
}

impl Sim {
    fn push(&mut self, skill: Skill) -> Result<(), PlanError> {
        let verdict = affordance::check(&self.state, &skill);
        if !verdict.feasible {
            return Err(PlanError::Infeasible {
                step: self.plan.len() + 1,
                skill: skill.snake_name(),
                feedback: verdict.feedback.join(" "),
            });
        }
        let (next, _) = apply_skill(&self.state, &skill);
        self.state = next;
        self.plan.push(skill);
        Ok(())
    }

    fn color(&self, id: BowlId) -> Result<String, PlanError> {
        self.state
            .bowl(id)
            .filter(|b| b.usable())
            .map(|b| b.color.clone())
            .ok_or_else(|| PlanError::Unsatisfiable(format!("bowl {id} is not usable")))
    }

    fn move_to(&mut self, id: BowlId) -> Result<(), PlanError> {
        if self.state.bowl_at_arm().map(|b| b.id) != Some(id) {
            let color = self.color(id)?;
            self.push(Skill::move_to(&color))?;
        }
        Ok(())
    }

    fn pull(&mut self, id: BowlId) -> Result<(), PlanError> {
        self.move_to(id)?;
        self.push(Skill::PullBowlCloser)
    }

    fn unreachable(&self, id: BowlId) -> bool {
        self.state
            .bowl(id)
            .is_some_and(|b| b.usable() && !self.state.is_reachable(b))
    }
}

/// Reference plan for a fresh scenario.
pub fn oracle_plan(initial: &WorldState, goal: &GoalSpec) -> Result<Vec<Skill>, PlanError> {
    plan_from(initial, initial, goal)
}

/// Plans the rest of the task from `state`, crediting whatever progress has
/// been made since `initial`. Always ends with DONE.
pub fn plan_from(state: &WorldState, initial: &WorldState, goal: &GoalSpec) -> Result<Vec<Skill>, PlanError> {
    let mut sim = Sim {
        state: state.clone(),
        plan: Vec::new(),
    };
    let mut owed: Vec<u32> = goal
        .transfers
        .iter()
        .map(|t| remaining_scoops(state, initial, t))
        .collect();

    // Food already on the spoon goes where it is owed, else back where it came from.
    if let Some(load) = sim.state.manipulator.spoon_contents {
        let pending = goal
            .transfers
            .iter()
            .enumerate()
            .find(|(i, t)| t.food == load.food && owed[*i] > 0);
        let target = match pending {
            Some((i, t)) => {
                owed[i] -= 1;
                t.destination.bowl
            }
            None => goal
                .transfers
                .iter()
                .find(|t| t.food == load.food)
                .map(|t| t.source.bowl)
                .or_else(|| {
                    sim.state
                        .bowls
                        .iter()
                        .find(|b| b.usable() && b.contents == load.food)
                        .map(|b| b.id)
                })
                .ok_or_else(|| PlanError::Unsatisfiable(format!("no bowl to return {} to", load.food)))?,
        };
        sim.move_to(target)?;
        sim.push(Skill::DropFood)?;
    }

    for (t, n) in goal.transfers.iter().zip(&owed) {
        let available = sim.state.bowl(t.source.bowl).map_or(0.0, |b| b.portion(t.food));
        if f64::from(*n) * SCOOP_CAPACITY > available + AMOUNT_EPSILON {
            return Err(PlanError::Unsatisfiable(format!(
                "{n} scoops of {} owed but only {available:.2} left in the source",
                t.food
            )));
        }
    }
    let scooping = owed.iter().any(|n| *n > 0);
    if scooping {
        let mut far: Vec<BowlId> = Vec::new();
        let involved = goal
            .transfers
            .iter()
            .zip(&owed)
            .filter(|(_, n)| **n > 0)
            .flat_map(|(t, _)| [t.source.bowl, t.destination.bowl])
            .chain(goal.dumbwaiter.insert);
        for id in involved {
            if sim.unreachable(id) && !far.contains(&id) {
                far.push(id);
            }
        }
        if sim.state.manipulator.holding_spoon && !far.is_empty() {
            sim.push(Skill::PutSpoonBack)?;
        }
        if !sim.state.manipulator.holding_spoon {
            for id in sim.state.holder_blockers() {
                sim.pull(id)?;
            }
            for id in far {
                if sim.unreachable(id) {
                    sim.pull(id)?;
                }
            }
            sim.push(Skill::GraspSpoon)?;
        }
        for (t, n) in goal.transfers.iter().zip(&owed) {
            for _ in 0..*n {
                sim.move_to(t.source.bowl)?;
                sim.push(Skill::Scoop)?;
                sim.move_to(t.destination.bowl)?;
                sim.push(Skill::DropFood)?;
            }
        }
    }

    let d = &goal.dumbwaiter;
    let insert_pending = d
        .insert
        .filter(|id| sim.state.bowl(*id).is_some_and(|b| b.on_table()));
    if sim.state.manipulator.holding_spoon && (goal.return_spoon || insert_pending.is_some()) {
        sim.push(Skill::PutSpoonBack)?;
    }
    if let Some(id) = insert_pending {
        if sim.state.dumbwaiter.door == DoorState::Closed {
            for blocker in sim.state.door_blockers() {
                sim.pull(blocker)?;
            }
            if sim.unreachable(id) {
                sim.pull(id)?;
            }
            sim.push(Skill::OpenDumbwaiter)?;
        } else if sim.unreachable(id) {
            sim.pull(id)?;
        }
        sim.move_to(id)?;
        sim.push(Skill::PutBowlIntoDumbwaiter)?;
    }
    if d.close && sim.state.dumbwaiter.door == DoorState::Open {
        sim.push(Skill::CloseDumbwaiter)?;
    }
    if d.start && !sim.state.dumbwaiter.running {
        sim.push(Skill::StartDumbwaiter)?;
    }
    sim.push(Skill::Done)?;
    Ok(sim.plan)
}

/// Result of executing a plan without a planner in the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReplay {
    pub final_state: WorldState,
    /// Steps (1-based) the affordance gate would have rejected.
    pub gated_steps: Vec<usize>,
    pub spill_steps: Vec<usize>,
}

pub fn replay_plan(initial: &WorldState, plan: &[Skill]) -> PlanReplay {
    let mut state = initial.clone();
    let mut gated_steps = Vec::new();
    let mut spill_steps = Vec::new();
    for (i, skill) in plan.iter().enumerate() {
        if !affordance::check(&state, skill).feasible {
            gated_steps.push(i + 1);
        }
        let (next, outcome) = apply_skill(&state, skill);
        if outcome.status == OutcomeStatus::Spill {
            spill_steps.push(i + 1);
        }
        state = next;
    }
    PlanReplay {
        final_state: state,
        gated_steps,
        spill_steps,
    }
}
