use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::goal::{BowlBinding, DumbwaiterOps, GoalSpec, ScoopCount, Transfer};
use super::grounding::{ground, BowlRef, Knowledge};
use super::oracle::oracle_plan;
use super::{validate, Scenario, ScenarioError, TaskCategory};
use crate::world::{Bowl, BowlId, FoodKind, Position, WorldState, GEOMETRY};

/// Bowl colors the generator draws from. Single words, so skill names stay
/// unambiguous.
pub const PALETTE: [&str; 10] = [
    "white", "green", "blue", "yellow", "red", "purple", "pink", "orange", "brown", "gray",
];

const MAX_ATTEMPTS: usize = 1000;
const PLACEMENT_TRIES: usize = 400;
const GRID: f64 = 0.005;
const MIN_SEPARATION: f64 = 0.15;
/// Clearance from the holder and door zones for bowls that must not block.
const CLEARANCE: f64 = 0.17;
/// Bowls that should block sit at most this far from the holder or zone.
const BLOCK_DISTANCE: f64 = 0.09;
const REACH_MARGIN: f64 = 0.03;
const FAR_MARGIN: f64 = 0.04;
const MIN_NORM: f64 = 0.2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GeneratorOptions {
    /// Combine reachability and collision constraints in the same scenario.
    pub mixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Normal,
    Far,
    HolderBlock,
    DoorBlock,
}

impl Slot {
    fn accepts(self, p: Position) -> bool {
        let g = &GEOMETRY;
        let holder = p.distance(g.holder_position);
        let door = g.sweep_zone.distance_to(p);
        let r = p.norm();
        match self {
            Slot::Normal => {
                (MIN_NORM..=g.reach_radius - REACH_MARGIN).contains(&r) && holder >= CLEARANCE && door >= CLEARANCE
            }
            Slot::Far => r >= g.reach_radius + FAR_MARGIN && holder >= CLEARANCE && door >= CLEARANCE,
            Slot::HolderBlock => holder <= BLOCK_DISTANCE,
            Slot::DoorBlock => door <= BLOCK_DISTANCE,
        }
    }
}

struct Proto {
    food: FoodKind,
    amount: f64,
    slot: Slot,
}

/// One sampled task before placement: bowls by index plus how the instruction
/// refers to them.
struct Draft {
    bowls: Vec<Proto>,
    food: FoodKind,
    source: RefSpec,
    destination: usize,
    dest_by_color: bool,
    scoops: ScoopCount,
    template: Template,
    dumbwaiter: bool,
    return_spoon: bool,
}

/// Referent kinds that still need colors and positions to be fixed.
enum RefSpec {
    Index { index: usize, by_color: bool },
    Fuller,
    Leftmost,
    Rightmost,
    NearestTo { landmark: usize },
}

#[derive(Clone, Copy)]
enum Template {
    PlaceInto,
    TransferFrom,
    Some,
    OneGoodScoop,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one scenario, derived from the batch seed, category and index.
pub(super) fn scenario_seed(seed: u64, category: TaskCategory, index: usize) -> u64 {
    splitmix(splitmix(seed ^ category.index().rotate_left(48)) ^ index as u64)
}

pub fn generate(category: TaskCategory, seed: u64, count: usize) -> Result<Vec<Scenario>, ScenarioError> {
    generate_with(category, seed, count, GeneratorOptions::default())
}

pub fn generate_with(
    category: TaskCategory,
    seed: u64,
    count: usize,
    options: GeneratorOptions,
) -> Result<Vec<Scenario>, ScenarioError> {
    if count == 0 {
        return Err(ScenarioError::EmptyCount);
    }
    (0..count)
        .into_par_iter()
        .map(|i| generate_one(category, i, scenario_seed(seed, category, i), options))
        .collect()
}

/// `count` scenarios of every category, grouped by category.
pub fn generate_all(seed: u64, count: usize, options: GeneratorOptions) -> Result<Vec<Scenario>, ScenarioError> {
    let mut out = Vec::with_capacity(count * TaskCategory::ALL.len());
    for category in TaskCategory::ALL {
        out.extend(generate_with(category, seed, count, options)?);
    }
    Ok(out)
}

pub fn generate_one(
    category: TaskCategory,
    index: usize,
    seed: u64,
    options: GeneratorOptions,
) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let draft = draft(category, options, &mut rng);
        if let Some(mut scenario) = realize(&draft, &mut rng) {
            scenario.id = format!("{}_{index:03}", category.as_str());
            scenario.category = category;
            scenario.seed = seed;
            if validate(&scenario).is_ok() {
                return Ok(scenario);
            }
        }
    }
    Err(ScenarioError::GenerationInfeasible {
        category,
        attempts: MAX_ATTEMPTS,
    })
}

fn toppings(rng: &mut ChaCha8Rng, n: usize) -> Vec<FoodKind> {
    let mut foods = FoodKind::TOPPINGS.to_vec();
    foods.shuffle(rng);
    foods.truncate(n);
    foods
}

fn source_amount(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.random_range(4..=9u32))
}

fn draft(category: TaskCategory, options: GeneratorOptions, rng: &mut ChaCha8Rng) -> Draft {
    let tofu = Proto {
        food: FoodKind::TofuPudding,
        amount: f64::from(rng.random_range(3..=6u32)),
        slot: Slot::Normal,
    };
    let dumbwaiter = rng.random_bool(0.3);
    let return_spoon = rng.random_bool(0.25);
    let count = |rng: &mut ChaCha8Rng| ScoopCount::Exactly(rng.random_range(1..=3u32));

    match category {
        TaskCategory::SemanticReasoning | TaskCategory::ReachabilityAnalysis | TaskCategory::CollisionAvoidance => {
            let n_toppings = match category {
                TaskCategory::SemanticReasoning => rng.random_range(1..=3),
                _ => rng.random_range(2..=3),
            };
            let foods = toppings(rng, n_toppings);
            let mut bowls = vec![tofu];
            for food in &foods {
                bowls.push(Proto {
                    food: *food,
                    amount: source_amount(rng),
                    slot: Slot::Normal,
                });
            }
            let source = rng.random_range(1..bowls.len());
            let mut dumbwaiter = dumbwaiter;
            match category {
                TaskCategory::ReachabilityAnalysis => {
                    if rng.random_bool(0.3) {
                        bowls[0].slot = Slot::Far;
                        dumbwaiter = true;
                    } else {
                        bowls[source].slot = Slot::Far;
                    }
                    if options.mixed {
                        let other = (1..bowls.len()).find(|i| *i != source).unwrap();
                        bowls[other].slot = Slot::HolderBlock;
                    }
                }
                TaskCategory::CollisionAvoidance => {
                    let blocker = (1..bowls.len()).find(|i| *i != source).unwrap();
                    if rng.random_bool(0.5) {
                        bowls[blocker].slot = Slot::HolderBlock;
                    } else {
                        bowls[blocker].slot = Slot::DoorBlock;
                        dumbwaiter = true;
                    }
                    if options.mixed {
                        bowls[source].slot = Slot::Far;
                    }
                }
                _ => {}
            }
            let (template, scoops, src_by_color, dest_by_color) = match rng.random_range(0..3) {
                0 => (Template::PlaceInto, count(rng), false, true),
                1 => (Template::TransferFrom, count(rng), true, false),
                _ => (Template::Some, ScoopCount::AtLeastOne, true, true),
            };
            Draft {
                food: bowls[source].food,
                bowls,
                source: RefSpec::Index {
                    index: source,
                    by_color: src_by_color,
                },
                destination: 0,
                dest_by_color,
                scoops,
                template,
                dumbwaiter,
                return_spoon,
            }
        }
        TaskCategory::QuantityEstimation => {
            let foods = toppings(rng, 2);
            let low = rng.random_range(4..=5u32);
            let high = rng.random_range(6.max(low + 2)..=9u32);
            let mut bowls = vec![
                tofu,
                Proto {
                    food: foods[0],
                    amount: f64::from(low),
                    slot: Slot::Normal,
                },
                Proto {
                    food: foods[0],
                    amount: f64::from(high),
                    slot: Slot::Normal,
                },
            ];
            if rng.random_bool(0.5) {
                bowls.push(Proto {
                    food: foods[1],
                    amount: source_amount(rng),
                    slot: Slot::Normal,
                });
            }
            let (template, scoops) = if rng.random_bool(0.5) {
                (Template::OneGoodScoop, ScoopCount::Exactly(1))
            } else {
                (Template::TransferFrom, count(rng))
            };
            Draft {
                bowls,
                food: foods[0],
                source: RefSpec::Fuller,
                destination: 0,
                dest_by_color: rng.random_bool(0.5),
                scoops,
                template,
                dumbwaiter,
                return_spoon,
            }
        }
        TaskCategory::RelativePositioning => {
            let foods = toppings(rng, 2);
            let mut bowls = vec![tofu];
            for _ in 0..2 {
                bowls.push(Proto {
                    food: foods[0],
                    amount: source_amount(rng),
                    slot: Slot::Normal,
                });
            }
            let extra = rng.random_bool(0.5);
            if extra {
                bowls.push(Proto {
                    food: foods[1],
                    amount: source_amount(rng),
                    slot: Slot::Normal,
                });
            }
            let source = match rng.random_range(0..3) {
                0 => RefSpec::Leftmost,
                1 => RefSpec::Rightmost,
                _ => RefSpec::NearestTo {
                    landmark: if extra && rng.random_bool(0.5) { 3 } else { 0 },
                },
            };
            let (template, scoops) = if rng.random_bool(0.7) {
                (Template::TransferFrom, count(rng))
            } else {
                (Template::Some, ScoopCount::AtLeastOne)
            };
            Draft {
                bowls,
                food: foods[0],
                source,
                destination: 0,
                dest_by_color: rng.random_bool(0.5),
                scoops,
                template,
                dumbwaiter,
                return_spoon,
            }
        }
    }
}

fn sample_position(rng: &mut ChaCha8Rng, slot: Slot, placed: &[Position]) -> Option<Position> {
    let quantize = |v: f64| (v / GRID).round() * GRID;
    for _ in 0..PLACEMENT_TRIES {
        let p = Position::new(
            quantize(rng.random_range(-0.54..=0.54)),
            quantize(rng.random_range(0.10..=0.74)),
        );
        if slot.accepts(p) && placed.iter().all(|q| q.distance(p) >= MIN_SEPARATION) {
            return Some(p);
        }
    }
    None
}

fn number_word(n: u32) -> &'static str {
    match n {
        1 => "one",
        2 => "two",
        3 => "three",
        _ => "several",
    }
}

/// Places the draft's bowls, grounds its referents, writes the instruction,
/// and plans. `None` when any of that fails and the attempt should be redrawn.
fn realize(d: &Draft, rng: &mut ChaCha8Rng) -> Option<Scenario> {
    let mut colors: Vec<&str> = PALETTE.to_vec();
    colors.shuffle(rng);
    let mut ids: Vec<u32> = (1..=d.bowls.len() as u32).collect();
    ids.shuffle(rng);

    let mut placed = Vec::new();
    let mut bowls = Vec::new();
    for (i, proto) in d.bowls.iter().enumerate() {
        let p = sample_position(rng, proto.slot, &placed)?;
        placed.push(p);
        bowls.push(Bowl::new(ids[i], colors[i], proto.food, proto.amount, p));
    }
    bowls.sort_by_key(|b| b.id);
    let state = WorldState::new(bowls);
    let id_of = |i: usize| BowlId(ids[i]);
    let color_of = |i: usize| colors[i].to_string();

    let food = d.food;
    let source_ref = match &d.source {
        RefSpec::Index { index, by_color } => {
            if *by_color {
                BowlRef::Color { color: color_of(*index) }
            } else {
                BowlRef::WithFood { food }
            }
        }
        RefSpec::Fuller => BowlRef::Fuller { food },
        RefSpec::Leftmost => BowlRef::Leftmost { food },
        RefSpec::Rightmost => BowlRef::Rightmost { food },
        RefSpec::NearestTo { landmark } => BowlRef::NearestTo {
            food,
            landmark: color_of(*landmark),
        },
    };
    let dest_ref = if d.dest_by_color {
        BowlRef::Color {
            color: color_of(d.destination),
        }
    } else {
        BowlRef::WithFood {
            food: FoodKind::TofuPudding,
        }
    };
    let source = ground(&source_ref, &state, Knowledge::Scene).ok()?;
    let destination = ground(&dest_ref, &state, Knowledge::Scene).ok()?;
    if destination != id_of(d.destination) {
        return None;
    }
    if let RefSpec::Index { index, .. } = d.source {
        if source != id_of(index) {
            return None;
        }
    }

    let (src, dst) = (source_ref.phrase(), dest_ref.phrase());
    let mut instruction = match (d.template, d.scoops) {
        (Template::OneGoodScoop, _) => format!("Try your best to get more {food} into {dst} in one scoop."),
        (Template::Some, _) => format!("Put some {food} from {src} into {dst}."),
        (Template::PlaceInto, ScoopCount::Exactly(n)) => {
            format!("Place {} scoop{} of {food} into {dst}.", number_word(n), plural(n))
        }
        (Template::TransferFrom, ScoopCount::Exactly(n)) => format!(
            "Transfer {} scoop{} of {food} from {src} into {dst}.",
            number_word(n),
            plural(n)
        ),
        (_, ScoopCount::AtLeastOne) => format!("Put some {food} from {src} into {dst}."),
    };
    let dumbwaiter = if d.dumbwaiter {
        instruction.push_str(&format!(
            " Put the {} bowl into the dumbwaiter after scooping.",
            color_of(d.destination)
        ));
        DumbwaiterOps::deliver(destination)
    } else {
        DumbwaiterOps::default()
    };
    if d.return_spoon {
        instruction.push_str(" Put the spoon back when you finish.");
    }

    let goal = GoalSpec {
        transfers: vec![Transfer {
            food,
            source: BowlBinding {
                referent: source_ref,
                bowl: source,
            },
            destination: BowlBinding {
                referent: dest_ref,
                bowl: destination,
            },
            scoops: d.scoops,
        }],
        dumbwaiter,
        return_spoon: d.return_spoon,
    };
    let reference_plan = oracle_plan(&state, &goal).ok()?;
    Some(Scenario {
        id: String::new(),
        category: TaskCategory::SemanticReasoning,
        seed: 0,
        instruction,
        initial_state: state,
        goal,
        reference_plan,
    })
}

fn plural(n: u32) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}
