use serde::{Deserialize, Serialize};

use super::grounding::BowlRef;
use crate::world::{BowlId, BowlLocation, DoorState, FoodKind, WorldState};

/// Tolerance for comparing delivered food against the instructed count.
const DELIVERY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoopCount {
    Exactly(u32),
    /// "some": one scoop or more.
    AtLeastOne,
}

/// The referent used in the instruction and the bowl it grounds to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowlBinding {
    pub referent: BowlRef,
    pub bowl: BowlId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub food: FoodKind,
    pub source: BowlBinding,
    pub destination: BowlBinding,
    pub scoops: ScoopCount,
}

/// Dumbwaiter operations the instruction asks for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumbwaiterOps {
    pub open: bool,
    pub close: bool,
    pub start: bool,
    pub insert: Option<BowlId>,
}

impl DumbwaiterOps {
    /// The full open, insert, close, start routine for one bowl.
    pub fn deliver(bowl: BowlId) -> Self {
        DumbwaiterOps {
            open: true,
            close: true,
            start: true,
            insert: Some(bowl),
        }
    }

    pub fn any(&self) -> bool {
        self.open || self.close || self.start || self.insert.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub transfers: Vec<Transfer>,
    pub dumbwaiter: DumbwaiterOps,
    /// The instruction asks for the spoon to end in the holder.
    #[serde(default)]
    pub return_spoon: bool,
}

/// Everything the goal does not ask for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forbidden {
    pub foods: Vec<FoodKind>,
    pub open: bool,
    pub close: bool,
    pub start: bool,
    pub insert: bool,
}

impl GoalSpec {
    pub fn forbidden(&self) -> Forbidden {
        let foods = FoodKind::ALL
            .into_iter()
            .filter(|f| !self.transfers.iter().any(|t| t.food == *f))
            .collect();
        let d = &self.dumbwaiter;
        Forbidden {
            foods,
            open: !d.open,
            close: !d.close,
            start: !d.start,
            insert: d.insert.is_none(),
        }
    }

    /// Bowls the goal refers to.
    pub fn task_bowls(&self) -> Vec<BowlId> {
        let mut ids: Vec<BowlId> = self
            .transfers
            .iter()
            .flat_map(|t| [t.source.bowl, t.destination.bowl])
            .chain(self.dumbwaiter.insert)
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Food of the transfer's kind that reached its destination since `initial`.
pub fn transfer_progress(state: &WorldState, initial: &WorldState, t: &Transfer) -> f64 {
    let portion = |s: &WorldState| s.bowl(t.destination.bowl).map_or(0.0, |b| b.portion(t.food));
    portion(state) - portion(initial)
}

/// Whole scoops still owed for a transfer.
pub fn remaining_scoops(state: &WorldState, initial: &WorldState, t: &Transfer) -> u32 {
    let delivered = (transfer_progress(state, initial, t) + DELIVERY_TOLERANCE).floor().max(0.0) as u32;
    match t.scoops {
        ScoopCount::Exactly(n) => n.saturating_sub(delivered),
        ScoopCount::AtLeastOne => u32::from(delivered == 0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalCheck {
    pub satisfied: bool,
    pub unmet: Vec<String>,
}

/// Checks the goal against `state`, reached from `initial`.
pub fn goal_report(state: &WorldState, initial: &WorldState, goal: &GoalSpec) -> GoalCheck {
    let mut unmet = Vec::new();
    for t in &goal.transfers {
        let delivered = transfer_progress(state, initial, t);
        let enough = match t.scoops {
            ScoopCount::Exactly(n) => (delivered - f64::from(n)).abs() <= DELIVERY_TOLERANCE,
            ScoopCount::AtLeastOne => delivered >= 1.0 - DELIVERY_TOLERANCE,
        };
        if !enough {
            unmet.push(format!("{delivered:.2} scoop-units of {} delivered", t.food));
        }
        let src = |s: &WorldState| s.bowl(t.source.bowl).map_or(0.0, |b| b.portion(t.food));
        let taken = src(initial) - src(state);
        if (taken - delivered).abs() > DELIVERY_TOLERANCE {
            unmet.push(format!(
                "{taken:.2} scoop-units of {} left the source but {delivered:.2} arrived",
                t.food
            ));
        }
        for id in [t.source.bowl, t.destination.bowl] {
            if state.bowl(id).is_none_or(|b| b.spilled) {
                unmet.push(format!("task bowl {id} is spilled or missing"));
            }
        }
    }
    let d = &goal.dumbwaiter;
    if let Some(id) = d.insert {
        if state.bowl(id).is_none_or(|b| b.location != BowlLocation::Dumbwaiter) {
            unmet.push(format!("bowl {id} is not in the dumbwaiter"));
        }
    }
    if d.close && state.dumbwaiter.door != DoorState::Closed {
        unmet.push("dumbwaiter door is not closed".into());
    }
    if d.start && !state.dumbwaiter.running {
        unmet.push("dumbwaiter is not running".into());
    }
    if goal.return_spoon && state.manipulator.holding_spoon {
        unmet.push("spoon was not put back".into());
    }
    GoalCheck {
        satisfied: unmet.is_empty(),
        unmet,
    }
}
