use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{BowlId, FoodKind, WorldState};

/// Minimum amount gap between the fuller bowl and the runner-up.
pub const QUANTITY_GAP: f64 = 2.0;
/// Minimum x gap for left/right referents.
pub const LATERAL_GAP: f64 = 0.1;
/// Minimum distance gap for nearest-to referents.
pub const NEAREST_GAP: f64 = 0.08;

/// How an instruction refers to a bowl.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BowlRef {
    Color { color: String },
    WithFood { food: FoodKind },
    Fuller { food: FoodKind },
    Leftmost { food: FoodKind },
    Rightmost { food: FoodKind },
    NearestTo { food: FoodKind, landmark: String },
}

impl BowlRef {
    /// Noun phrase used in instruction templates.
    pub fn phrase(&self) -> String {
        match self {
            BowlRef::Color { color } => format!("the {color} bowl"),
            BowlRef::WithFood { food } => format!("the bowl with {food}"),
            BowlRef::Fuller { food } => format!("the fuller bowl of {food}"),
            BowlRef::Leftmost { food } => format!("the {food} bowl on the left"),
            BowlRef::Rightmost { food } => format!("the {food} bowl on the right"),
            BowlRef::NearestTo { food, landmark } => format!("the {food} bowl nearest to the {landmark} bowl"),
        }
    }

    /// Whether resolving the referent can require scene data beyond colors and foods.
    pub fn needs_scene(&self) -> bool {
        !matches!(self, BowlRef::Color { .. } | BowlRef::WithFood { .. })
    }
}

/// What the resolver may look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    /// Colors and foods only, as in the object list.
    ObjectList,
    /// Full geometry and amounts.
    Scene,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("no bowl matches {0}")]
    NoMatch(String),
    #[error("{0} matches more than one bowl")]
    Ambiguous(String),
    #[error("{0} cannot be resolved without scene data")]
    NeedsObservation(String),
}

type SortKey = Box<dyn Fn(&crate::world::Bowl) -> f64>;

pub fn ground(referent: &BowlRef, state: &WorldState, knowledge: Knowledge) -> Result<BowlId, GroundingError> {
    let phrase = referent.phrase();
    let of_food = |food: FoodKind| -> Vec<_> { state.bowls.iter().filter(|b| b.contents == food).collect() };

    let (mut candidates, key): (Vec<_>, SortKey) = match referent {
        BowlRef::Color { color } => {
            return state
                .bowl_by_color(color)
                .map(|b| b.id)
                .ok_or(GroundingError::NoMatch(phrase));
        }
        BowlRef::WithFood { food } => {
            let c = of_food(*food);
            return match c.len() {
                0 => Err(GroundingError::NoMatch(phrase)),
                1 => Ok(c[0].id),
                _ => Err(GroundingError::Ambiguous(phrase)),
            };
        }
        BowlRef::Fuller { food } => (of_food(*food), Box::new(|b| -b.amount)),
        BowlRef::Leftmost { food } => (of_food(*food), Box::new(|b| b.position.x)),
        BowlRef::Rightmost { food } => (of_food(*food), Box::new(|b| -b.position.x)),
        BowlRef::NearestTo { food, landmark } => {
            let mark = state
                .bowl_by_color(landmark)
                .ok_or_else(|| GroundingError::NoMatch(format!("the {landmark} bowl")))?;
            let at = mark.position;
            let c = of_food(*food).into_iter().filter(|b| b.id != mark.id).collect();
            (c, Box::new(move |b| b.position.distance(at)))
        }
    };
    match candidates.len() {
        0 => return Err(GroundingError::NoMatch(phrase)),
        1 => return Ok(candidates[0].id),
        _ => {}
    }
    if knowledge == Knowledge::ObjectList {
        return Err(GroundingError::NeedsObservation(phrase));
    }
    candidates.sort_by(|a, b| key(a).total_cmp(&key(b)));
    let gap = match referent {
        BowlRef::Fuller { .. } => QUANTITY_GAP,
        BowlRef::NearestTo { .. } => NEAREST_GAP,
        _ => LATERAL_GAP,
    };
    if key(candidates[1]) - key(candidates[0]) + 1e-9 < gap {
        return Err(GroundingError::Ambiguous(phrase));
    }
    Ok(candidates[0].id)
}
