//! Helpers shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kitchenplan::affordance;
use kitchenplan::backend::ScriptedBackend;
use kitchenplan::harness::{replay_trace, FailureReason};
use kitchenplan::planner::EpisodeTrace;
use kitchenplan::prompts::{render_response, PlannedStep, SkillLabels};
use kitchenplan::scenarios::{generate_all, plan_from, replay_plan, GeneratorOptions, Scenario, TaskCategory};
use kitchenplan::world::{apply_skill, BowlId, OutcomeStatus, Skill, WorldState};

pub const SEED: u64 = 2024;

pub fn benchmark() -> Vec<Scenario> {
    generate_all(SEED, 30, GeneratorOptions::default()).expect("benchmark generates")
}

pub fn of_category(all: &[Scenario], category: TaskCategory) -> Vec<Scenario> {
    all.iter().filter(|s| s.category == category).cloned().collect()
}

pub fn steps_from(start: u32, skills: &[Skill]) -> Vec<PlannedStep> {
    skills
        .iter()
        .enumerate()
        .map(|(i, skill)| PlannedStep {
            iteration: start + i as u32,
            skill: skill.clone(),
        })
        .collect()
}

/// One reply per iteration, each proposing only that iteration's skill.
pub fn single_step_script(scenario: &Scenario, skills: &[Skill]) -> ScriptedBackend {
    let labels = SkillLabels::for_state(&scenario.initial_state);
    let replies = skills
        .iter()
        .enumerate()
        .map(|(i, s)| render_response("next step", &steps_from(i as u32 + 1, std::slice::from_ref(s)), &labels))
        .collect();
    ScriptedBackend::new(format!("script:{}", scenario.id), replies)
}

fn color(state: &WorldState, id: BowlId) -> String {
    state.bowl(id).expect("bowl exists").color.clone()
}

pub fn far_task_bowl(s: &Scenario) -> Option<BowlId> {
    let st = &s.initial_state;
    s.goal
        .task_bowls()
        .into_iter()
        .find(|id| st.bowl(*id).is_some_and(|b| !st.is_reachable(b)))
}

/// Replies for a planner that first scoops at the far bowl, then, once
/// gated, plans the recovery and sticks to it.
pub fn recovery_script(s: &Scenario) -> Vec<String> {
    let labels = SkillLabels::for_state(&s.initial_state);
    let far = far_task_bowl(s).expect("scenario has a far bowl");
    let t = &s.goal.transfers[0];
    let naive = [
        Skill::GraspSpoon,
        Skill::move_to(&color(&s.initial_state, far)),
        Skill::Scoop,
        Skill::move_to(&color(&s.initial_state, t.destination.bowl)),
        Skill::DropFood,
        Skill::Done,
    ];
    let mut replies: Vec<String> = (0..3)
        .map(|i| render_response("scoop and drop", &steps_from(i as u32 + 1, &naive[i..]), &labels))
        .collect();
    let state = replay_plan(&s.initial_state, &naive[..2]).final_state;
    let plan = plan_from(&state, &s.initial_state, &s.goal).expect("recoverable");
    for k in 0..plan.len() {
        replies.push(render_response(
            "pull the far bowl closer first",
            &steps_from(3 + k as u32, &plan[k..]),
            &labels,
        ));
    }
    replies
}

/// One infeasible-execution pattern from the consequence table.
pub struct Pattern {
    pub name: &'static str,
    pub scenario: Scenario,
    pub script: Vec<Skill>,
    /// 1-based iteration at which the infeasible skill runs.
    pub at: usize,
    pub status: OutcomeStatus,
    pub reason: FailureReason,
}

pub fn consequence_patterns(all: &[Scenario]) -> Vec<Pattern> {
    let find = |f: &dyn Fn(&Scenario) -> bool| all.iter().find(|s| f(s)).cloned().expect("pattern scenario");
    let plain = find(&|s| s.category == TaskCategory::SemanticReasoning && !s.goal.dumbwaiter.any());
    let src = |s: &Scenario| Skill::move_to(&color(&s.initial_state, s.goal.transfers[0].source.bowl));
    let dst = |s: &Scenario| Skill::move_to(&color(&s.initial_state, s.goal.transfers[0].destination.bowl));
    let far_src = find(&|s| {
        let id = s.goal.transfers[0].source.bowl;
        !s.initial_state.is_reachable(s.initial_state.bowl(id).unwrap())
    });
    let holder = find(&|s| !s.initial_state.holder_blockers().is_empty());
    let door = find(&|s| !s.initial_state.door_blockers().is_empty());
    use Skill::*;
    vec![
        Pattern {
            name: "scoop away from any bowl",
            script: vec![GraspSpoon, Scoop, Done],
            at: 2,
            status: OutcomeStatus::NoOp,
            reason: FailureReason::GoalNotMet,
            scenario: plain.clone(),
        },
        Pattern {
            name: "scoop beyond reach",
            script: vec![GraspSpoon, src(&far_src), Scoop, Done],
            at: 3,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: far_src,
        },
        Pattern {
            name: "pull while holding the spoon",
            script: vec![GraspSpoon, src(&plain), PullBowlCloser, Done],
            at: 3,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: plain.clone(),
        },
        Pattern {
            name: "grasp with the holder blocked",
            script: vec![GraspSpoon, Done],
            at: 1,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: holder,
        },
        Pattern {
            name: "open with the door sweep blocked",
            script: vec![OpenDumbwaiter, Done],
            at: 1,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: door,
        },
        Pattern {
            name: "insert with the door closed",
            script: vec![dst(&plain), PutBowlIntoDumbwaiter, Done],
            at: 2,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: plain.clone(),
        },
        Pattern {
            name: "scoop with food on the spoon",
            script: vec![GraspSpoon, src(&plain), Scoop, Scoop, Done],
            at: 4,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: plain.clone(),
        },
        Pattern {
            name: "put the spoon back loaded",
            script: vec![GraspSpoon, src(&plain), Scoop, PutSpoonBack, Done],
            at: 4,
            status: OutcomeStatus::Spill,
            reason: FailureReason::BowlSpilled,
            scenario: plain.clone(),
        },
        Pattern {
            name: "start with the door open",
            script: vec![OpenDumbwaiter, StartDumbwaiter, Done],
            at: 2,
            status: OutcomeStatus::NoOp,
            reason: FailureReason::UninstructedDumbwaiterOp,
            scenario: plain,
        },
    ]
}

/// States reached by seeded random walks from the given starts, any skill
/// allowed, spills included.
pub fn random_reachable_states(starts: &[Scenario], count: usize, seed: u64) -> Vec<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = &starts[rng.random_range(0..starts.len())];
        let labels = SkillLabels::for_state(&s.initial_state);
        let mut state = s.initial_state.clone();
        for _ in 0..rng.random_range(1..30) {
            let skill = &labels.entries[rng.random_range(0..labels.entries.len())].1;
            state = apply_skill(&state, skill).0;
            out.push(state.clone());
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Every (state, skill) pair the gate admits but the simulator spills on.
pub fn gate_counterexamples<'a>(states: impl IntoIterator<Item = &'a WorldState>) -> Vec<(WorldState, Skill)> {
    let mut bad = Vec::new();
    for state in states {
        let mut skills: Vec<Skill> = Skill::FIXED.to_vec();
        skills.extend(state.bowls.iter().map(|b| Skill::move_to(&b.color)));
        for skill in skills {
            if affordance::check(state, &skill).feasible && apply_skill(state, &skill).1.status == OutcomeStatus::Spill {
                bad.push((state.clone(), skill));
            }
        }
    }
    bad
}

/// Replays a trace (states and per-food conservation) and, when the trace
/// ran with the gate on, re-checks every executed skill against it.
pub fn audit_trace(trace: &EpisodeTrace) -> Result<(), String> {
    replay_trace(trace).map_err(|e| format!("{}: {e}", trace.scenario_id))?;
    if trace.config.use_sa {
        let mut state = trace.initial_state.clone();
        for skill in trace.executed_skills() {
            if !affordance::check(&state, &skill).feasible {
                return Err(format!("{}: executed {} past the gate", trace.scenario_id, skill.snake_name()));
            }
            state = apply_skill(&state, &skill).0;
        }
    }
    Ok(())
}
