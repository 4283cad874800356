//! Symbolic tabletop food-serving world.
//!
//! The state is a plain value: bowls on a table, a spoon holder, a dumbwaiter
//! with a swinging door, and a manipulator that may carry the spoon. Skills are
//! applied with [`apply_skill`], which never fails. Infeasible executions are
//! modelled as `no_op` or `spill` outcomes so that ungated planners can still be
//! run and scored.

mod geometry;
mod render;
mod scene;
mod skill;

pub use geometry::{Geometry, Position, Rect, GEOMETRY};
pub use render::{render_topdown, RenderConfig};
pub use scene::{describe_scene, FillLevel, SceneDescription};
pub use skill::{Skill, SkillKind};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag written into serialized world documents.
pub const STATE_SCHEMA_VERSION: u32 = 1;

/// Amount comparisons below this are treated as zero.
pub const AMOUNT_EPSILON: f64 = 1e-9;

/// Maximum scoop-units a single scoop can carry.
pub const SCOOP_CAPACITY: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("no bowl is available on the table")]
    NoBowls,
    #[error("unsupported world schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed world document: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoodKind {
    TofuPudding,
    MungBeans,
    KidneyBeans,
    RedBeans,
    BlackBeans,
    Soybeans,
    Peanuts,
    Chickpeas,
}

impl FoodKind {
    pub const TOPPINGS: [FoodKind; 7] = [
        FoodKind::MungBeans,
        FoodKind::KidneyBeans,
        FoodKind::RedBeans,
        FoodKind::BlackBeans,
        FoodKind::Soybeans,
        FoodKind::Peanuts,
        FoodKind::Chickpeas,
    ];

    pub const ALL: [FoodKind; 8] = [
        FoodKind::TofuPudding,
        FoodKind::MungBeans,
        FoodKind::KidneyBeans,
        FoodKind::RedBeans,
        FoodKind::BlackBeans,
        FoodKind::Soybeans,
        FoodKind::Peanuts,
        FoodKind::Chickpeas,
    ];

    /// Human-readable name used in object lists and instructions.
    pub fn display_name(self) -> &'static str {
        match self {
            FoodKind::TofuPudding => "tofu pudding",
            FoodKind::MungBeans => "mung beans",
            FoodKind::KidneyBeans => "kidney beans",
            FoodKind::RedBeans => "red beans",
            FoodKind::BlackBeans => "black beans",
            FoodKind::Soybeans => "soybeans",
            FoodKind::Peanuts => "peanuts",
            FoodKind::Chickpeas => "chickpeas",
        }
    }

    pub fn is_topping(self) -> bool {
        self != FoodKind::TofuPudding
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            FoodKind::TofuPudding => [250, 244, 215],
            FoodKind::MungBeans => [96, 160, 64],
            FoodKind::KidneyBeans => [128, 24, 40],
            FoodKind::RedBeans => [200, 48, 48],
            FoodKind::BlackBeans => [30, 30, 30],
            FoodKind::Soybeans => [222, 196, 90],
            FoodKind::Peanuts => [184, 134, 80],
            FoodKind::Chickpeas => [230, 200, 140],
        }
    }
}

impl fmt::Display for FoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BowlId(pub u32);

impl fmt::Display for BowlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BowlLocation {
    Table,
    Dumbwaiter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bowl {
    pub id: BowlId,
    pub color: String,
    /// Food the bowl was served with.
    pub contents: FoodKind,
    /// Total scoop-units in the bowl, including anything dropped in.
    pub amount: f64,
    /// Foods other than `contents` that were dropped into the bowl.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mixed_in: BTreeMap<FoodKind, f64>,
    pub position: Position,
    pub spilled: bool,
    pub location: BowlLocation,
}

impl Bowl {
    pub fn new(id: u32, color: &str, contents: FoodKind, amount: f64, position: Position) -> Self {
        Bowl {
            id: BowlId(id),
            color: color.to_string(),
            contents,
            amount,
            mixed_in: BTreeMap::new(),
            position,
            spilled: false,
            location: BowlLocation::Table,
        }
    }

    /// `yellow_bowl`, the identifier used in object lists and feedback.
    pub fn name(&self) -> String {
        format!("{}_bowl", self.color)
    }

    pub fn portion(&self, food: FoodKind) -> f64 {
        if food == self.contents {
            let other: f64 = self.mixed_in.values().sum();
            (self.amount - other).max(0.0)
        } else {
            self.mixed_in.get(&food).copied().unwrap_or(0.0)
        }
    }

    /// Food a scoop would pick up: the served food while any is left,
    /// otherwise the largest mixed-in portion.
    pub fn scoopable(&self) -> Option<(FoodKind, f64)> {
        let base = self.portion(self.contents);
        if base > AMOUNT_EPSILON {
            return Some((self.contents, base));
        }
        self.mixed_in
            .iter()
            .filter(|(_, a)| **a > AMOUNT_EPSILON)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(k, a)| (*k, *a))
    }

    pub fn on_table(&self) -> bool {
        self.location == BowlLocation::Table
    }

    /// On the table and not spilled.
    pub fn usable(&self) -> bool {
        self.on_table() && !self.spilled
    }

    fn add(&mut self, food: FoodKind, amount: f64) {
        self.amount += amount;
        if food != self.contents {
            *self.mixed_in.entry(food).or_insert(0.0) += amount;
        }
    }

    fn take(&mut self, food: FoodKind, amount: f64) {
        self.amount -= amount;
        if self.amount.abs() < AMOUNT_EPSILON {
            self.amount = 0.0;
        }
        if food != self.contents {
            if let Some(v) = self.mixed_in.get_mut(&food) {
                *v -= amount;
                if *v <= AMOUNT_EPSILON {
                    self.mixed_in.remove(&food);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dumbwaiter {
    pub door: DoorState,
    pub running: bool,
    pub position: Position,
    pub sweep_zone: Rect,
}

impl Default for Dumbwaiter {
    fn default() -> Self {
        Dumbwaiter {
            door: DoorState::Closed,
            running: false,
            position: GEOMETRY.dumbwaiter_position,
            sweep_zone: GEOMETRY.sweep_zone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmLocation {
    Home,
    Holder,
    Bowl(BowlId),
    Dumbwaiter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpoonLoad {
    pub food: FoodKind,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manipulator {
    pub at: ArmLocation,
    pub holding_spoon: bool,
    pub spoon_contents: Option<SpoonLoad>,
}

impl Default for Manipulator {
    fn default() -> Self {
        Manipulator {
            at: ArmLocation::Home,
            holding_spoon: false,
            spoon_contents: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpillEvent {
    pub step: u64,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bowl: Option<BowlId>,
    /// Food that left the spoon and ended up outside any bowl.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food: Option<SpoonLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub bowls: Vec<Bowl>,
    pub dumbwaiter: Dumbwaiter,
    pub holder_position: Position,
    pub manipulator: Manipulator,
    pub step_count: u64,
    pub spill_events: Vec<SpillEvent>,
}

#[derive(Serialize, Deserialize)]
struct VersionedState {
    version: u32,
    state: WorldState,
}

impl WorldState {
    /// Fresh state with the given bowls, spoon in the holder, door closed.
    pub fn new(bowls: Vec<Bowl>) -> Self {
        WorldState {
            bowls,
            dumbwaiter: Dumbwaiter::default(),
            holder_position: GEOMETRY.holder_position,
            manipulator: Manipulator::default(),
            step_count: 0,
            spill_events: Vec::new(),
        }
    }

    pub fn bowl(&self, id: BowlId) -> Option<&Bowl> {
        self.bowls.iter().find(|b| b.id == id)
    }

    fn bowl_mut(&mut self, id: BowlId) -> Option<&mut Bowl> {
        self.bowls.iter_mut().find(|b| b.id == id)
    }

    pub fn bowl_by_color(&self, color: &str) -> Option<&Bowl> {
        self.bowls.iter().find(|b| b.color == color)
    }

    /// Cartesian position of the end effector.
    pub fn arm_position(&self) -> Position {
        match self.manipulator.at {
            ArmLocation::Home => Position::ORIGIN,
            ArmLocation::Holder => self.holder_position,
            ArmLocation::Dumbwaiter => self.dumbwaiter.position,
            ArmLocation::Bowl(id) => self
                .bowl(id)
                .map(|b| {
                    if b.on_table() {
                        b.position
                    } else {
                        self.dumbwaiter.position
                    }
                })
                .unwrap_or(Position::ORIGIN),
        }
    }

    /// Bowl the arm is currently positioned over, if any.
    pub fn bowl_at_arm(&self) -> Option<&Bowl> {
        match self.manipulator.at {
            ArmLocation::Bowl(id) => self.bowl(id),
            _ => None,
        }
    }

    pub fn is_reachable(&self, bowl: &Bowl) -> bool {
        bowl.on_table() && bowl.position.norm() <= GEOMETRY.reach_radius + AMOUNT_EPSILON
    }

    /// Usable bowls close enough to the spoon holder to be hit when the spoon moves.
    pub fn holder_blockers(&self) -> Vec<BowlId> {
        self.bowls
            .iter()
            .filter(|b| b.usable())
            .filter(|b| b.position.distance(self.holder_position) < GEOMETRY.blocking_radius)
            .map(|b| b.id)
            .collect()
    }

    /// Usable bowls inside (or within the blocking radius of) the door sweep area.
    pub fn door_blockers(&self) -> Vec<BowlId> {
        self.bowls
            .iter()
            .filter(|b| b.usable())
            .filter(|b| self.dumbwaiter.sweep_zone.distance_to(b.position) < GEOMETRY.blocking_radius)
            .map(|b| b.id)
            .collect()
    }

    /// Total of `food` held in bowls, on the spoon, and recorded in spill events.
    pub fn food_total(&self, food: FoodKind) -> f64 {
        let bowls: f64 = self.bowls.iter().map(|b| b.portion(food)).sum();
        let spoon = self
            .manipulator
            .spoon_contents
            .filter(|l| l.food == food)
            .map_or(0.0, |l| l.amount);
        let spilled: f64 = self
            .spill_events
            .iter()
            .filter_map(|e| e.food)
            .filter(|l| l.food == food)
            .map(|l| l.amount)
            .sum();
        bowls + spoon + spilled
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VersionedState {
            version: STATE_SCHEMA_VERSION,
            state: self.clone(),
        })
        .expect("world state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let doc: VersionedState =
            serde_json::from_str(text).map_err(|e| WorldError::Json(e.to_string()))?;
        if doc.version != STATE_SCHEMA_VERSION {
            return Err(WorldError::SchemaVersion(doc.version));
        }
        Ok(doc.state)
    }

    fn record_spill(&mut self, description: String, bowl: Option<BowlId>, food: Option<SpoonLoad>) {
        self.spill_events.push(SpillEvent {
            step: self.step_count,
            description,
            bowl,
            food,
        });
    }

    fn spill_bowl(&mut self, id: BowlId, why: &str) {
        let Some(bowl) = self.bowl_mut(id) else { return };
        if bowl.spilled {
            return;
        }
        bowl.spilled = true;
        let name = bowl.name();
        self.record_spill(format!("{name} spilled: {why}"), Some(id), None);
    }

    fn dump_spoon(&mut self, why: &str) {
        if let Some(load) = self.manipulator.spoon_contents.take() {
            self.record_spill(
                format!("{} of {} fell off the spoon: {why}", load.amount, load.food),
                None,
                Some(load),
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Ok,
    NoOp,
    Spill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: OutcomeStatus,
    pub detail: String,
}

/// Closest usable table bowl to the end effector; ties go to the lowest id.
pub fn nearest_bowl(state: &WorldState) -> Result<BowlId, WorldError> {
    let from = state.arm_position();
    state
        .bowls
        .iter()
        .filter(|b| b.usable())
        .min_by(|a, b| {
            a.position
                .distance(from)
                .total_cmp(&b.position.distance(from))
                .then(a.id.cmp(&b.id))
        })
        .map(|b| b.id)
        .ok_or(WorldError::NoBowls)
}

/// Applies one skill and returns the successor state.
pub fn apply_skill(state: &WorldState, skill: &Skill) -> (WorldState, ExecutionOutcome) {
    let mut next = state.clone();
    next.step_count += 1;
    let spills_before = next.spill_events.len();
    let (status, detail) = transition(&mut next, skill);
    let status = if next.spill_events.len() > spills_before {
        OutcomeStatus::Spill
    } else {
        status
    };
    (next, ExecutionOutcome { status, detail })
}

fn ok(detail: impl Into<String>) -> (OutcomeStatus, String) {
    (OutcomeStatus::Ok, detail.into())
}

fn no_op(detail: impl Into<String>) -> (OutcomeStatus, String) {
    (OutcomeStatus::NoOp, detail.into())
}

fn transition(s: &mut WorldState, skill: &Skill) -> (OutcomeStatus, String) {
    match skill {
        Skill::Done => no_op("done"),
        Skill::GraspSpoon => {
            if s.manipulator.holding_spoon {
                return no_op("spoon already in hand");
            }
            for id in s.holder_blockers() {
                s.spill_bowl(id, "knocked over while grasping the spoon");
            }
            s.manipulator.holding_spoon = true;
            s.manipulator.at = ArmLocation::Holder;
            ok("grasped spoon")
        }
        Skill::PutSpoonBack => {
            if !s.manipulator.holding_spoon {
                return no_op("no spoon in hand");
            }
            for id in s.holder_blockers() {
                s.spill_bowl(id, "knocked over while returning the spoon");
            }
            s.dump_spoon("spoon returned while loaded");
            s.manipulator.holding_spoon = false;
            s.manipulator.at = ArmLocation::Holder;
            ok("spoon returned to holder")
        }
        Skill::Scoop => scoop(s),
        Skill::DropFood => drop_food(s),
        Skill::Stir => {
            let at_bowl = s.bowl_at_arm().is_some_and(Bowl::usable);
            if s.manipulator.holding_spoon && at_bowl {
                ok("stirred")
            } else {
                no_op("nothing to stir")
            }
        }
        Skill::PullBowlCloser => {
            let Ok(id) = nearest_bowl(s) else {
                return no_op("no bowl to pull");
            };
            if s.manipulator.holding_spoon {
                s.spill_bowl(id, "pulled while holding the spoon");
                return no_op("pull failed");
            }
            s.manipulator.at = ArmLocation::Bowl(id);
            let bowl = s.bowl_mut(id).expect("nearest bowl exists");
            match GEOMETRY.pulled_position(bowl.position) {
                Some(p) => {
                    bowl.position = p;
                    ok(format!("pulled {} to ({:.3}, {:.3})", bowl.name(), p.x, p.y))
                }
                None => no_op(format!("{} is already close", bowl.name())),
            }
        }
        Skill::OpenDumbwaiter => {
            if s.dumbwaiter.door == DoorState::Open {
                return no_op("door already open");
            }
            for id in s.door_blockers() {
                s.spill_bowl(id, "hit by the dumbwaiter door");
            }
            s.dumbwaiter.door = DoorState::Open;
            s.dumbwaiter.running = false;
            s.manipulator.at = ArmLocation::Dumbwaiter;
            ok("door opened")
        }
        Skill::CloseDumbwaiter => {
            if s.dumbwaiter.door == DoorState::Closed {
                return no_op("door already closed");
            }
            for id in s.door_blockers() {
                s.spill_bowl(id, "hit by the dumbwaiter door");
            }
            s.dumbwaiter.door = DoorState::Closed;
            s.manipulator.at = ArmLocation::Dumbwaiter;
            ok("door closed")
        }
        Skill::PutBowlIntoDumbwaiter => {
            let Ok(id) = nearest_bowl(s) else {
                return no_op("no bowl to place");
            };
            if s.dumbwaiter.door == DoorState::Closed {
                s.spill_bowl(id, "pushed into a closed dumbwaiter door");
                return no_op("door closed");
            }
            if s.manipulator.holding_spoon {
                s.spill_bowl(id, "grabbed while holding the spoon");
                return no_op("gripper occupied");
            }
            let reachable = s.bowl(id).is_some_and(|b| s.is_reachable(b));
            if !reachable {
                s.spill_bowl(id, "dragged from beyond reach");
                return no_op("bowl out of reach");
            }
            let dock = s.dumbwaiter.position;
            let bowl = s.bowl_mut(id).expect("nearest bowl exists");
            bowl.location = BowlLocation::Dumbwaiter;
            bowl.position = dock;
            let name = bowl.name();
            s.manipulator.at = ArmLocation::Dumbwaiter;
            ok(format!("{name} placed into the dumbwaiter"))
        }
        Skill::StartDumbwaiter => {
            s.manipulator.at = ArmLocation::Dumbwaiter;
            if s.dumbwaiter.door == DoorState::Open {
                no_op("door open")
            } else if s.dumbwaiter.running {
                no_op("already running")
            } else {
                s.dumbwaiter.running = true;
                ok("dumbwaiter started")
            }
        }
        Skill::MoveToBowl(color) => {
            match s.bowl_by_color(color).filter(|b| b.usable()).map(|b| (b.id, b.name())) {
                Some((id, name)) => {
                    s.manipulator.at = ArmLocation::Bowl(id);
                    ok(format!("moved to {name}"))
                }
                None => no_op(format!("no usable {color} bowl")),
            }
        }
    }
}

fn scoop(s: &mut WorldState) -> (OutcomeStatus, String) {
    if !s.manipulator.holding_spoon {
        return no_op("no spoon in hand");
    }
    let Some(bowl) = s.bowl_at_arm().filter(|b| b.usable()) else {
        return no_op("not above a bowl");
    };
    let id = bowl.id;
    if !s.is_reachable(bowl) {
        s.spill_bowl(id, "scooped from beyond reach");
        return no_op("bowl out of reach");
    }
    s.dump_spoon("scooped again with a loaded spoon");
    let bowl = s.bowl(id).expect("bowl exists");
    let Some((food, available)) = bowl.scoopable() else {
        return no_op(format!("{} is empty", bowl.name()));
    };
    let taken = available.min(SCOOP_CAPACITY);
    let name = bowl.name();
    s.bowl_mut(id).expect("bowl exists").take(food, taken);
    s.manipulator.spoon_contents = Some(SpoonLoad {
        food,
        amount: taken,
    });
    ok(format!("scooped {taken} of {food} from {name}"))
}

fn drop_food(s: &mut WorldState) -> (OutcomeStatus, String) {
    if !s.manipulator.holding_spoon {
        return no_op("no spoon in hand");
    }
    let Some(load) = s.manipulator.spoon_contents else {
        return no_op("spoon is empty");
    };
    match s.bowl_at_arm().filter(|b| b.usable()).map(|b| b.id) {
        Some(id) => {
            s.manipulator.spoon_contents = None;
            let bowl = s.bowl_mut(id).expect("bowl exists");
            bowl.add(load.food, load.amount);
            ok(format!("dropped {} of {} into {}", load.amount, load.food, bowl.name()))
        }
        None => {
            s.dump_spoon("dropped away from any bowl");
            no_op("no bowl below the spoon")
        }
    }
}
