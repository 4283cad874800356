//! Benchmark scenarios: five task categories, seeded generation, goal
//! specifications, and the symbolic planner that produces reference plans.

mod generate;
mod goal;
mod grounding;
mod oracle;

pub use generate::{generate, generate_all, generate_one, generate_with, GeneratorOptions, PALETTE};
pub use goal::{
    goal_report, remaining_scoops, transfer_progress, DumbwaiterOps, Forbidden, GoalCheck, GoalSpec, ScoopCount, BowlBinding,
    Transfer,
};
pub use grounding::{ground, BowlRef, GroundingError, Knowledge};
pub use oracle::{oracle_plan, plan_from, replay_plan, PlanError, PlanReplay};
pub use validate::validate;

mod validate;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Skill, WorldState};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    SemanticReasoning,
    QuantityEstimation,
    RelativePositioning,
    ReachabilityAnalysis,
    CollisionAvoidance,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 5] = [
        TaskCategory::SemanticReasoning,
        TaskCategory::QuantityEstimation,
        TaskCategory::RelativePositioning,
        TaskCategory::ReachabilityAnalysis,
        TaskCategory::CollisionAvoidance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskCategory::SemanticReasoning => "semantic_reasoning",
            TaskCategory::QuantityEstimation => "quantity_estimation",
            TaskCategory::RelativePositioning => "relative_positioning",
            TaskCategory::ReachabilityAnalysis => "reachability_analysis",
            TaskCategory::CollisionAvoidance => "collision_avoidance",
        }
    }

    /// Column heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            TaskCategory::SemanticReasoning => "Semantic Reasoning",
            TaskCategory::QuantityEstimation => "Quantity Estimation",
            TaskCategory::RelativePositioning => "Relative Positioning",
            TaskCategory::ReachabilityAnalysis => "Reachability Analysis",
            TaskCategory::CollisionAvoidance => "Collision Avoidance",
        }
    }

    fn index(self) -> u64 {
        TaskCategory::ALL.iter().position(|c| *c == self).unwrap() as u64
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub category: TaskCategory,
    pub seed: u64,
    pub instruction: String,
    pub initial_state: WorldState,
    pub goal: GoalSpec,
    pub reference_plan: Vec<Skill>,
}

impl Scenario {
    /// Reference plan length without the terminal DONE.
    pub fn reference_steps(&self) -> usize {
        self.reference_plan.iter().filter(|s| **s != Skill::Done).count()
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not place bowls for {category} after {attempts} attempts")]
    GenerationInfeasible { category: TaskCategory, attempts: usize },
    #[error("count must be at least 1")]
    EmptyCount,
    #[error("unsupported scenario schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario document {path}: {message}")]
    Json { path: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    version: u32,
    #[serde(flatten)]
    scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub category: TaskCategory,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub scenarios: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioDoc {
            version: SCENARIO_SCHEMA_VERSION,
            scenario: self.clone(),
        })
        .expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
        if doc.version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(doc.version));
        }
        Ok(doc.scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Scenario::from_json(&text).map_err(|e| match e {
            ScenarioError::Json { message, .. } => ScenarioError::Json {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

/// Writes one JSON file per scenario plus `manifest.json`.
pub fn write_scenarios(dir: &Path, seed: u64, scenarios: &[Scenario]) -> Result<Manifest, ScenarioError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        let file = format!("{}.json", s.id);
        let path = dir.join(&file);
        fs::write(&path, s.to_json()).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            category: s.category,
            seed: s.seed,
            file,
        });
    }
    let manifest = Manifest {
        version: SCENARIO_SCHEMA_VERSION,
        seed,
        scenarios: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Loads every scenario listed in a directory's manifest, in manifest order.
pub fn load_scenarios(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| ScenarioError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    manifest
        .scenarios
        .iter()
        .map(|e| Scenario::load(&dir.join(&e.file)))
        .collect()
}
