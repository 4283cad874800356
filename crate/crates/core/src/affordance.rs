//! Binary predicates over the world state, per-skill preconditions built from
//! them, and the feedback sentences handed back to the planner when a skill is
//! rejected.

use serde::{Deserialize, Serialize};

use crate::world::{nearest_bowl, Bowl, BowlId, DoorState, Skill, WorldState, SCOOP_CAPACITY};

/// The seven predicates, evaluated for one candidate skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSet {
    pub spoon_on_hand: bool,
    pub food_on_hand: bool,
    pub dumbwaiter_opened: bool,
    pub close_to_target: bool,
    pub obstacle_blocked_holder: bool,
    pub obstacle_blocked_dumbwaiter: bool,
    pub reachable: bool,
}

/// Conditions a precondition may test. The first seven mirror
/// [`PredicateSet`]; the rest read properties of the skill's target bowl.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    SpoonOnHand,
    FoodOnHand,
    DumbwaiterOpened,
    CloseToTarget,
    ObstacleBlockedHolder,
    ObstacleBlockedDumbwaiter,
    Reachable,
    TargetExists,
    SufficientFood,
    DumbwaiterRunning,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::SpoonOnHand => "spoon_on_hand",
            Condition::FoodOnHand => "food_on_hand",
            Condition::DumbwaiterOpened => "dumbwaiter_opened",
            Condition::CloseToTarget => "close_to_target",
            Condition::ObstacleBlockedHolder => "obstacle_blocked_holder",
            Condition::ObstacleBlockedDumbwaiter => "obstacle_blocked_dumbwaiter",
            Condition::Reachable => "reachable",
            Condition::TargetExists => "target_exists",
            Condition::SufficientFood => "sufficient_food",
            Condition::DumbwaiterRunning => "dumbwaiter_running",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub predicate: Condition,
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffordanceVerdict {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub feedback: Vec<String>,
}

/// The bowl a skill acts on: the bowl under the arm for spoon work, the
/// nearest bowl for pulling and inserting, the named bowl for moves.
pub fn implied_target(state: &WorldState, skill: &Skill) -> Option<BowlId> {
    match skill {
        Skill::Scoop | Skill::DropFood | Skill::Stir => state.bowl_at_arm().map(|b| b.id),
        Skill::PullBowlCloser | Skill::PutBowlIntoDumbwaiter => nearest_bowl(state).ok(),
        Skill::MoveToBowl(color) => state.bowl_by_color(color).map(|b| b.id),
        _ => None,
    }
}

pub fn eval_predicates(state: &WorldState, skill: &Skill) -> PredicateSet {
    let target = implied_target(state, skill).and_then(|id| state.bowl(id));
    let m = &state.manipulator;
    PredicateSet {
        spoon_on_hand: m.holding_spoon,
        food_on_hand: m.spoon_contents.is_some(),
        dumbwaiter_opened: state.dumbwaiter.door == DoorState::Open,
        close_to_target: target.is_some_and(|b| b.usable() && state.bowl_at_arm().map(|a| a.id) == Some(b.id)),
        obstacle_blocked_holder: !state.holder_blockers().is_empty(),
        obstacle_blocked_dumbwaiter: !state.door_blockers().is_empty(),
        reachable: target.is_some_and(|b| state.is_reachable(b)),
    }
}

/// Precondition conjunction for a skill, as (condition, required value).
pub fn precondition(skill: &Skill) -> &'static [(Condition, bool)] {
    use Condition::*;
    match skill {
        Skill::GraspSpoon => &[(SpoonOnHand, false), (ObstacleBlockedHolder, false)],
        Skill::PutSpoonBack => &[(SpoonOnHand, true), (FoodOnHand, false), (ObstacleBlockedHolder, false)],
        Skill::Scoop => &[
            (SpoonOnHand, true),
            (FoodOnHand, false),
            (CloseToTarget, true),
            (Reachable, true),
            (SufficientFood, true),
        ],
        Skill::DropFood => &[(SpoonOnHand, true), (FoodOnHand, true), (CloseToTarget, true)],
        Skill::Stir => &[(SpoonOnHand, true), (CloseToTarget, true)],
        Skill::PullBowlCloser => &[(SpoonOnHand, false), (TargetExists, true)],
        Skill::OpenDumbwaiter => &[(DumbwaiterOpened, false), (ObstacleBlockedDumbwaiter, false)],
        Skill::CloseDumbwaiter => &[(DumbwaiterOpened, true), (ObstacleBlockedDumbwaiter, false)],
        Skill::PutBowlIntoDumbwaiter => &[(DumbwaiterOpened, true), (SpoonOnHand, false), (Reachable, true)],
        Skill::StartDumbwaiter => &[(DumbwaiterOpened, false), (DumbwaiterRunning, false)],
        Skill::MoveToBowl(_) => &[(TargetExists, true)],
        Skill::Done => &[],
    }
}

fn condition_value(state: &WorldState, p: &PredicateSet, target: Option<&Bowl>, c: Condition) -> bool {
    match c {
        Condition::SpoonOnHand => p.spoon_on_hand,
        Condition::FoodOnHand => p.food_on_hand,
        Condition::DumbwaiterOpened => p.dumbwaiter_opened,
        Condition::CloseToTarget => p.close_to_target,
        Condition::ObstacleBlockedHolder => p.obstacle_blocked_holder,
        Condition::ObstacleBlockedDumbwaiter => p.obstacle_blocked_dumbwaiter,
        Condition::Reachable => p.reachable,
        Condition::TargetExists => target.is_some_and(Bowl::usable),
        Condition::SufficientFood => target
            .and_then(Bowl::scoopable)
            .is_some_and(|(_, amount)| amount >= SCOOP_CAPACITY),
        Condition::DumbwaiterRunning => state.dumbwaiter.running,
    }
}

pub fn check(state: &WorldState, skill: &Skill) -> AffordanceVerdict {
    let predicates = eval_predicates(state, skill);
    let target = implied_target(state, skill).and_then(|id| state.bowl(id));
    let violations: Vec<Violation> = precondition(skill)
        .iter()
        .filter(|(c, want)| condition_value(state, &predicates, target, *c) != *want)
        .map(|(c, want)| Violation {
            predicate: *c,
            expected: *want,
        })
        .collect();
    let feedback = violations
        .iter()
        .map(|v| feedback_line(state, skill, target, v))
        .collect();
    AffordanceVerdict {
        feasible: violations.is_empty(),
        violations,
        feedback,
    }
}

fn describe_bowl(b: Option<&Bowl>) -> String {
    b.map_or_else(|| "target bowl".to_string(), |b| format!("{} bowl", b.color))
}

fn blocker_names(state: &WorldState, ids: &[BowlId]) -> String {
    let names: Vec<String> = ids
        .iter()
        .filter_map(|id| state.bowl(*id))
        .map(|b| format!("{} bowl", b.color))
        .collect();
    names.join(" and ")
}

/// "Cannot do {skill} because {reason}, {suggestion}."
fn feedback_line(state: &WorldState, skill: &Skill, target: Option<&Bowl>, v: &Violation) -> String {
    let (reason, suggestion) = match (v.predicate, v.expected) {
        (Condition::SpoonOnHand, false) => ("spoon is on hand".to_string(), "please put it back first"),
        (Condition::SpoonOnHand, true) => ("spoon is not on hand".to_string(), "please grasp the spoon first"),
        (Condition::FoodOnHand, false) => ("there is food on the spoon".to_string(), "please drop the food first"),
        (Condition::FoodOnHand, true) => ("there is no food on the spoon".to_string(), "please scoop some food first"),
        (Condition::DumbwaiterOpened, false) => (
            "the dumbwaiter door is already open".to_string(),
            if matches!(skill, Skill::StartDumbwaiter) {
                "please close it first"
            } else {
                "please do not open it again"
            },
        ),
        (Condition::DumbwaiterOpened, true) => (
            "the dumbwaiter door is closed".to_string(),
            if matches!(skill, Skill::CloseDumbwaiter) {
                "please do not close it again"
            } else {
                "please open it first"
            },
        ),
        (Condition::CloseToTarget, _) => (
            "the robot is not at a bowl".to_string(),
            "please move to the target bowl first",
        ),
        (Condition::ObstacleBlockedHolder, _) => (
            format!(
                "the {} is blocking the spoon holder",
                blocker_names(state, &state.holder_blockers())
            ),
            "please move the blocking bowl first",
        ),
        (Condition::ObstacleBlockedDumbwaiter, _) => (
            format!(
                "the {} is blocking the dumbwaiter door",
                blocker_names(state, &state.door_blockers())
            ),
            "please move the blocking bowl first",
        ),
        (Condition::Reachable, _) => match target {
            Some(b) if b.on_table() => (
                format!("the target {} is too far", describe_bowl(Some(b))),
                "please pull it closer",
            ),
            _ => ("there is no target bowl".to_string(), "please move to a bowl first"),
        },
        (Condition::TargetExists, _) => (
            match skill {
                Skill::MoveToBowl(c) => format!("the {c} bowl is not available"),
                _ => "there is no bowl on the table".to_string(),
            },
            "please choose another action",
        ),
        (Condition::SufficientFood, _) => (
            format!("the target {} has insufficient food", describe_bowl(target)),
            "please choose another bowl",
        ),
        (Condition::DumbwaiterRunning, _) => (
            "the dumbwaiter is already running".to_string(),
            "please do not start it again",
        ),
    };
    format!("Cannot do {} because {reason}, {suggestion}.", skill.snake_name())
}
