use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{judge, JudgeError, SuccessJudgment};
use crate::backend::BackendSpec;
use crate::planner::{run_episode, EpisodeTrace, PipelineConfig, TraceError};
use crate::scenarios::{Scenario, ScenarioError};
use crate::world::{apply_skill, FoodKind, WorldState, AMOUNT_EPSILON};

pub const RUN_MANIFEST_FILE: &str = "run.json";
const RUN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Json { path: String, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Trace {
        path: String,
        #[source]
        source: TraceError,
    },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("no scenario with id {0}")]
    MissingScenario(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEntry {
    pub scenario_id: String,
    /// Trace file relative to the run directory, absent when the episode
    /// could not start.
    pub trace: Option<String>,
    pub success: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub backend: String,
    pub config: PipelineConfig,
    pub scenario_dir: Option<PathBuf>,
    pub entries: Vec<RunEntry>,
}

impl RunManifest {
    pub fn errors(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

/// Runs every scenario, writing `traces/<id>.json` as each finishes, then
/// `judgments.json` and the run manifest. An episode that cannot start is
/// recorded in the manifest and the batch carries on.
pub fn run_batch(
    scenarios: &[Scenario],
    spec: &BackendSpec,
    config: &PipelineConfig,
    out_dir: &Path,
    scenario_dir: Option<&Path>,
) -> Result<(RunManifest, Vec<SuccessJudgment>), HarnessError> {
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir).map_err(io(&traces_dir))?;

    let one = |s: &Scenario| -> (RunEntry, Option<SuccessJudgment>) {
        let mut entry = RunEntry {
            scenario_id: s.id.clone(),
            trace: None,
            success: None,
            error: None,
        };
        let backend = match spec.instantiate(s) {
            Ok(b) => b,
            Err(e) => {
                entry.error = Some(e.to_string());
                return (entry, None);
            }
        };
        let trace = run_episode(s, backend.as_ref(), config);
        let file = format!("traces/{}.json", s.id);
        let path = out_dir.join(&file);
        if let Err(e) = fs::write(&path, trace.to_json()) {
            entry.error = Some(format!("writing {}: {e}", path.display()));
        } else {
            entry.trace = Some(file);
        }
        match judge(&trace, s) {
            Ok(j) => {
                entry.success = Some(j.success);
                (entry, Some(j))
            }
            Err(e) => {
                entry.error = Some(e.to_string());
                (entry, None)
            }
        }
    };
    let results: Vec<(RunEntry, Option<SuccessJudgment>)> = if spec.capabilities().concurrent {
        scenarios.par_iter().map(one).collect()
    } else {
        scenarios.iter().map(one).collect()
    };

    let (entries, judgments): (Vec<RunEntry>, Vec<Option<SuccessJudgment>>) = results.into_iter().unzip();
    let judgments: Vec<SuccessJudgment> = judgments.into_iter().flatten().collect();
    let manifest = RunManifest {
        version: RUN_SCHEMA_VERSION,
        backend: spec.to_string(),
        config: *config,
        scenario_dir: scenario_dir.map(|p| p.canonicalize().unwrap_or_else(|_| p.to_path_buf())),
        entries,
    };
    let path = out_dir.join("judgments.json");
    fs::write(&path, serde_json::to_string_pretty(&judgments).expect("judgments serialize")).map_err(io(&path))?;
    let path = out_dir.join(RUN_MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes")).map_err(io(&path))?;
    Ok((manifest, judgments))
}

/// Reads a run directory: its manifest and every trace it lists.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<EpisodeTrace>), HarnessError> {
    let path = dir.join(RUN_MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| HarnessError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut traces = Vec::new();
    for file in manifest.entries.iter().filter_map(|e| e.trace.as_ref()) {
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let trace = EpisodeTrace::from_json(&text).map_err(|source| HarnessError::Trace {
            path: path.display().to_string(),
            source,
        })?;
        traces.push(trace);
    }
    Ok((manifest, traces))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("state after iteration {iteration} differs from the recorded state")]
    Diverged { iteration: u32 },
    #[error("final state differs from the recorded final state")]
    FinalStateDiverged,
    #[error("{food} is not conserved after iteration {iteration}")]
    Conservation { iteration: u32, food: FoodKind },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub executed: usize,
}

fn conserved(initial: &WorldState, state: &WorldState) -> Option<FoodKind> {
    FoodKind::ALL
        .into_iter()
        .find(|f| (initial.food_total(*f) - state.food_total(*f)).abs() > 1e3 * AMOUNT_EPSILON)
}

/// Re-executes the trace's skills from its initial state and checks every
/// recorded state and per-food conservation along the way.
pub fn replay_trace(trace: &EpisodeTrace) -> Result<ReplaySummary, ReplayError> {
    let mut state = trace.initial_state.clone();
    let mut executed = 0;
    for record in &trace.records {
        let Some(skill) = &record.executed else { continue };
        let (next, _) = apply_skill(&state, skill);
        state = next;
        executed += 1;
        if record.state_after.as_ref() != Some(&state) {
            return Err(ReplayError::Diverged {
                iteration: record.iteration,
            });
        }
        if let Some(food) = conserved(&trace.initial_state, &state) {
            return Err(ReplayError::Conservation {
                iteration: record.iteration,
                food,
            });
        }
    }
    if state != trace.final_state {
        return Err(ReplayError::FinalStateDiverged);
    }
    Ok(ReplaySummary { executed })
}
