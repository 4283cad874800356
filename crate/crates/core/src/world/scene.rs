use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BowlLocation, DoorState, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillLevel {
    Empty,
    Low,
    Half,
    Full,
}

impl FillLevel {
    pub fn from_amount(amount: f64) -> Self {
        if amount < 0.5 {
            FillLevel::Empty
        } else if amount < 3.0 {
            FillLevel::Low
        } else if amount < 6.0 {
            FillLevel::Half
        } else {
            FillLevel::Full
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FillLevel::Empty => "empty",
            FillLevel::Low => "low",
            FillLevel::Half => "half",
            FillLevel::Full => "full",
        }
    }
}

/// Textual scene: one line per bowl (ordered by id), then the dumbwaiter and
/// the spoon holder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub lines: Vec<String>,
}

impl SceneDescription {
    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

impl fmt::Display for SceneDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

pub fn describe_scene(state: &WorldState) -> SceneDescription {
    let mut bowls: Vec<_> = state.bowls.iter().collect();
    bowls.sort_by_key(|b| b.id);
    let mut lines = Vec::with_capacity(bowls.len() + 2);
    for b in bowls {
        let mut line = format!(
            "{} (with {}) at ({:.3}, {:.3}), fill level: {}",
            b.name(),
            b.contents,
            b.position.x,
            b.position.y,
            FillLevel::from_amount(b.amount).as_str()
        );
        if b.location == BowlLocation::Dumbwaiter {
            line.push_str(", inside dumbwaiter");
        }
        if b.spilled {
            line.push_str(", spilled");
        }
        lines.push(line);
    }
    let dw = &state.dumbwaiter;
    lines.push(format!(
        "dumbwaiter: door {}, {}, at ({:.3}, {:.3})",
        match dw.door {
            DoorState::Open => "open",
            DoorState::Closed => "closed",
        },
        if dw.running { "running" } else { "idle" },
        dw.position.x,
        dw.position.y
    ));
    lines.push(format!(
        "holder: {}, at ({:.3}, {:.3})",
        if state.manipulator.holding_spoon {
            "empty (spoon in gripper)"
        } else {
            "spoon in holder"
        },
        state.holder_position.x,
        state.holder_position.y
    ));
    SceneDescription { lines }
}
