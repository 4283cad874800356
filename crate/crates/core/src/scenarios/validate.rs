use super::generate::PALETTE;
use super::goal::goal_report;
use super::grounding::{ground, BowlRef, GroundingError, Knowledge};
use super::oracle::replay_plan;
use super::{Scenario, TaskCategory};
use crate::world::{FoodKind, Skill, GEOMETRY};

/// Checks a scenario against its category constraints and the general
/// scenario invariants. Returns every violated rule.
pub fn validate(s: &Scenario) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let state = &s.initial_state;
    let bowls = &state.bowls;

    if !(2..=4).contains(&bowls.len()) {
        errs.push(format!("{} bowls, expected 2 to 4", bowls.len()));
    }
    let mut colors: Vec<&str> = bowls.iter().map(|b| b.color.as_str()).collect();
    colors.sort();
    colors.dedup();
    if colors.len() != bowls.len() {
        errs.push("bowl colors are not unique".into());
    }
    if bowls.iter().filter(|b| b.contents == FoodKind::TofuPudding).count() != 1 {
        errs.push("expected exactly one tofu pudding bowl".into());
    }
    for b in bowls {
        if !GEOMETRY.table.contains(b.position) {
            errs.push(format!("{} is off the table", b.name()));
        }
        if b.amount < 0.0 || b.spilled || !b.on_table() {
            errs.push(format!("{} does not start as a fresh bowl", b.name()));
        }
    }
    for color in PALETTE {
        if s.instruction.contains(&format!("{color} bowl")) && state.bowl_by_color(color).is_none() {
            errs.push(format!("instruction mentions absent {color} bowl"));
        }
    }
    for food in FoodKind::ALL {
        if s.instruction.contains(food.display_name()) && !bowls.iter().any(|b| b.contents == food) {
            errs.push(format!("instruction mentions absent {food}"));
        }
    }

    // Referents resolve to exactly the bound bowls.
    for t in &s.goal.transfers {
        for (binding, role) in [(&t.source, "source"), (&t.destination, "destination")] {
            match ground(&binding.referent, state, Knowledge::Scene) {
                Ok(id) if id == binding.bowl => {}
                Ok(id) => errs.push(format!("{role} grounds to bowl {id}, bound to {}", binding.bowl)),
                Err(e) => errs.push(format!("{role}: {e}")),
            }
        }
        if state.bowl(t.source.bowl).is_some_and(|b| b.contents != t.food) {
            errs.push("source bowl does not hold the transferred food".into());
        }
    }

    let task = s.goal.task_bowls();
    let far: Vec<_> = task
        .iter()
        .filter_map(|id| state.bowl(*id))
        .filter(|b| !state.is_reachable(b))
        .collect();
    let holder = state.holder_blockers();
    let door = state.door_blockers();
    let referents: Vec<&BowlRef> = s
        .goal
        .transfers
        .iter()
        .flat_map(|t| [&t.source.referent, &t.destination.referent])
        .collect();
    let needs_scene = |r: &BowlRef| matches!(ground(r, state, Knowledge::ObjectList), Err(GroundingError::NeedsObservation(_)));

    match s.category {
        TaskCategory::SemanticReasoning => {
            if bowls.iter().any(|b| !state.is_reachable(b)) {
                errs.push("semantic scenario has an unreachable bowl".into());
            }
            if !holder.is_empty() || !door.is_empty() {
                errs.push("semantic scenario has a blocking bowl".into());
            }
            if referents.iter().any(|r| ground(r, state, Knowledge::ObjectList).is_err()) {
                errs.push("semantic referent needs scene data".into());
            }
        }
        TaskCategory::QuantityEstimation => {
            let ok = s.goal.transfers.iter().any(|t| {
                let BowlRef::Fuller { food } = t.source.referent else {
                    return false;
                };
                let mut amounts: Vec<f64> = bowls.iter().filter(|b| b.contents == food).map(|b| b.amount).collect();
                amounts.sort_by(|a, b| b.total_cmp(a));
                amounts.len() >= 2
                    && amounts[0] - amounts[1] >= 2.0
                    && crate::world::FillLevel::from_amount(amounts[0])
                        != crate::world::FillLevel::from_amount(amounts[1])
                    && needs_scene(&t.source.referent)
            });
            if !ok {
                errs.push("quantity scenario lacks two separable same-food sources".into());
            }
        }
        TaskCategory::RelativePositioning => {
            let ok = s.goal.transfers.iter().any(|t| {
                matches!(
                    t.source.referent,
                    BowlRef::Leftmost { .. } | BowlRef::Rightmost { .. } | BowlRef::NearestTo { .. }
                ) && needs_scene(&t.source.referent)
            });
            if !ok {
                errs.push("relative scenario lacks a spatial referent".into());
            }
        }
        TaskCategory::ReachabilityAnalysis => {
            if far.is_empty() {
                errs.push("reachability scenario has every task bowl within reach".into());
            }
        }
        TaskCategory::CollisionAvoidance => {
            if holder.is_empty() && door.is_empty() {
                errs.push("collision scenario has no blocking bowl".into());
            }
            if !door.is_empty() && s.goal.dumbwaiter.insert.is_none() {
                errs.push("door blocker without a dumbwaiter task".into());
            }
        }
    }

    // Reference plan replays cleanly.
    if s.reference_plan.last() != Some(&Skill::Done) {
        errs.push("reference plan does not end with done".into());
    }
    let replay = replay_plan(state, &s.reference_plan);
    if !replay.gated_steps.is_empty() {
        errs.push(format!("reference plan steps {:?} fail the gate", replay.gated_steps));
    }
    if !replay.spill_steps.is_empty() || !replay.final_state.spill_events.is_empty() {
        errs.push("reference plan spills".into());
    }
    let check = goal_report(&replay.final_state, state, &s.goal);
    if !check.satisfied {
        errs.push(format!("reference plan misses the goal: {}", check.unmet.join("; ")));
    }

    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
