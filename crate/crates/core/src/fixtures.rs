//! Hand-built scenarios shared by unit tests.

use crate::scenarios::{
    oracle_plan, BowlBinding, BowlRef, DumbwaiterOps, GoalSpec, Scenario, ScoopCount, TaskCategory, Transfer,
};
use crate::world::{Bowl, BowlId, FoodKind, Position, WorldState};

fn binding(referent: BowlRef, id: u32) -> BowlBinding {
    BowlBinding {
        referent,
        bowl: BowlId(id),
    }
}

fn color(c: &str) -> BowlRef {
    BowlRef::Color { color: c.into() }
}

fn finish(id: &str, category: TaskCategory, instruction: &str, state: WorldState, goal: GoalSpec) -> Scenario {
    let reference_plan = oracle_plan(&state, &goal).expect("fixture is plannable");
    Scenario {
        id: id.into(),
        category,
        seed: 0,
        instruction: instruction.into(),
        initial_state: state,
        goal,
        reference_plan,
    }
}

/// Two scoops of mung beans from the red bowl into the purple tofu bowl.
pub fn two_scoops() -> Scenario {
    let state = WorldState::new(vec![
        Bowl::new(1, "red", FoodKind::MungBeans, 6.0, Position::new(0.15, 0.35)),
        Bowl::new(2, "purple", FoodKind::TofuPudding, 4.0, Position::new(-0.15, 0.35)),
    ]);
    let goal = GoalSpec {
        transfers: vec![Transfer {
            food: FoodKind::MungBeans,
            source: binding(BowlRef::WithFood { food: FoodKind::MungBeans }, 1),
            destination: binding(color("purple"), 2),
            scoops: ScoopCount::Exactly(2),
        }],
        dumbwaiter: DumbwaiterOps::default(),
        return_spoon: false,
    };
    finish(
        "semantic_reasoning_900",
        TaskCategory::SemanticReasoning,
        "Place two scoops of mung beans into the purple bowl.",
        state,
        goal,
    )
}

/// Fuller of two mung bean bowls into the blue tofu bowl, then deliver it;
/// the green bowl sits in the dumbwaiter door's sweep.
pub fn fuller_then_deliver() -> Scenario {
    let state = WorldState::new(vec![
        Bowl::new(1, "white", FoodKind::MungBeans, 8.0, Position::new(0.0, 0.35)),
        Bowl::new(2, "green", FoodKind::MungBeans, 5.0, Position::new(0.30, 0.50)),
        Bowl::new(3, "blue", FoodKind::TofuPudding, 4.0, Position::new(-0.2, 0.3)),
    ]);
    let goal = GoalSpec {
        transfers: vec![Transfer {
            food: FoodKind::MungBeans,
            source: binding(BowlRef::Fuller { food: FoodKind::MungBeans }, 1),
            destination: binding(color("blue"), 3),
            scoops: ScoopCount::Exactly(1),
        }],
        dumbwaiter: DumbwaiterOps::deliver(BowlId(3)),
        return_spoon: false,
    };
    finish(
        "quantity_estimation_900",
        TaskCategory::QuantityEstimation,
        "Try your best to get more mung beans into the blue bowl in one scoop. Put the blue bowl into the dumbwaiter after scooping.",
        state,
        goal,
    )
}

/// Kidney beans out of reach in the white bowl.
pub fn far_source() -> Scenario {
    let state = WorldState::new(vec![
        Bowl::new(1, "white", FoodKind::KidneyBeans, 6.0, Position::new(0.1, 0.7)),
        Bowl::new(2, "blue", FoodKind::TofuPudding, 4.0, Position::new(-0.1, 0.3)),
    ]);
    let goal = GoalSpec {
        transfers: vec![Transfer {
            food: FoodKind::KidneyBeans,
            source: binding(BowlRef::WithFood { food: FoodKind::KidneyBeans }, 1),
            destination: binding(color("blue"), 2),
            scoops: ScoopCount::AtLeastOne,
        }],
        dumbwaiter: DumbwaiterOps::default(),
        return_spoon: false,
    };
    finish(
        "reachability_analysis_900",
        TaskCategory::ReachabilityAnalysis,
        "Place some kidney beans into the blue bowl.",
        state,
        goal,
    )
}
