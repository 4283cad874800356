use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{consistency_check, Consistency, PipelineConfig, SequenceBuffer};
use crate::affordance::{self, AffordanceVerdict};
use crate::backend::{Backend, ModelRequest, RequestContext, RequestKind};
use crate::prompts::{
    build_conflict_prompt, build_system_prompt, build_user_prompt, parse_choice, parse_response, FeedbackLog,
    Observation, ParseError, PlannedStep, PromptBundle, ProposedSequence, SkillLabels, TaskView, FORMAT_REMINDER,
};
use crate::scenarios::Scenario;
use crate::world::{apply_skill, describe_scene, render_topdown, ExecutionOutcome, RenderConfig, Skill, WorldState};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Done,
    MaxIterations,
    ParseFailure,
    ReplanExhausted,
    BackendError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    Plan,
    Resolve,
}

/// One model call as sent and received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub kind: ExchangeKind,
    pub user_text: String,
    /// Size of the attached image, if one was sent.
    pub image_bytes: Option<usize>,
    pub response: Option<String>,
    pub latency_ms: u64,
    pub backend_id: String,
    pub backend_error: Option<String>,
    pub parse_error: Option<ParseError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub chosen: Skill,
    /// The model never gave a usable answer, so the majority was taken.
    pub defaulted: bool,
    pub exchanges: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRecord {
    pub proposed: Skill,
    pub votes: Vec<Skill>,
    pub result: Consistency,
    pub resolution: Option<Resolution>,
}

/// One pass through plan, verify, gate. Gated attempts are followed by
/// another attempt for the same iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub exchanges: Vec<Exchange>,
    pub sequence: Option<ProposedSequence>,
    /// Buffered sequences visible to the consistency check.
    pub buffer_len: usize,
    pub consistency: Option<ConsistencyRecord>,
    pub chosen: Option<Skill>,
    pub verdict: Option<AffordanceVerdict>,
    pub gated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub attempts: Vec<Attempt>,
    pub executed: Option<Skill>,
    pub outcome: Option<ExecutionOutcome>,
    pub state_after: Option<WorldState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub version: u32,
    pub scenario_id: String,
    pub backend_id: String,
    pub config: PipelineConfig,
    pub system_prompt: String,
    pub labels: SkillLabels,
    pub initial_state: WorldState,
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub feedback: FeedbackLog,
    pub final_state: WorldState,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unsupported trace schema version {0}")]
    SchemaVersion(u32),
    #[error("malformed trace: {0}")]
    Json(String),
}

impl EpisodeTrace {
    pub fn executed_skills(&self) -> Vec<Skill> {
        self.records.iter().filter_map(|r| r.executed.clone()).collect()
    }

    /// Executed skills, DONE included.
    pub fn executed_steps(&self) -> usize {
        self.records.iter().filter(|r| r.executed.is_some()).count()
    }

    pub fn attempts(&self) -> impl Iterator<Item = &Attempt> {
        self.records.iter().flat_map(|r| &r.attempts)
    }

    pub fn model_calls(&self) -> usize {
        self.attempts()
            .map(|a| {
                a.exchanges.len()
                    + a.consistency
                        .as_ref()
                        .and_then(|c| c.resolution.as_ref())
                        .map_or(0, |r| r.exchanges.len())
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| TraceError::Json(e.to_string()))?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != TRACE_SCHEMA_VERSION {
            return Err(TraceError::SchemaVersion(version));
        }
        serde_json::from_value(value).map_err(|e| TraceError::Json(e.to_string()))
    }
}

/// Mutable state of one running episode.
struct Episode<'a> {
    scenario: Arc<Scenario>,
    backend: &'a dyn Backend,
    config: PipelineConfig,
    labels: SkillLabels,
    system_prompt: String,
    state: WorldState,
    history: Vec<Skill>,
    feedback: FeedbackLog,
    buffer: SequenceBuffer,
}

impl Episode<'_> {
    fn observation(&self) -> Option<Observation> {
        self.config.use_observation.then(|| Observation {
            scene: describe_scene(&self.state),
            image: self
                .backend
                .capabilities()
                .multimodal
                .then(|| render_topdown(&self.state, RenderConfig::default())),
        })
    }

    fn task(&self) -> TaskView<'_> {
        TaskView {
            instruction: &self.scenario.instruction,
            initial_state: &self.scenario.initial_state,
            labels: &self.labels,
        }
    }

    fn request(&self, bundle: PromptBundle, kind: RequestKind) -> ModelRequest {
        ModelRequest {
            system_text: bundle.system_text,
            user_text: bundle.user_text,
            image: bundle.image,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            context: Some(self.context(kind)),
        }
    }

    fn context(&self, kind: RequestKind) -> RequestContext {
        RequestContext {
            scenario: Arc::clone(&self.scenario),
            state: self.state.clone(),
            history: self.history.clone(),
            iteration: self.iteration(),
            feedback: self.feedback.clone(),
            labels: self.labels.clone(),
            kind,
        }
    }

    fn iteration(&self) -> u32 {
        self.history.len() as u32 + 1
    }

    fn call(&self, kind: ExchangeKind, request: &ModelRequest) -> (Exchange, Option<String>) {
        let mut exchange = Exchange {
            kind,
            user_text: request.user_text.clone(),
            image_bytes: request.image.as_ref().map(Vec::len),
            response: None,
            latency_ms: 0,
            backend_id: self.backend.id(),
            backend_error: None,
            parse_error: None,
        };
        match self.backend.complete(request) {
            Ok(r) => {
                exchange.latency_ms = r.latency_ms;
                exchange.backend_id = r.backend_id;
                exchange.response = Some(r.text.clone());
                (exchange, Some(r.text))
            }
            Err(e) => {
                log::warn!("{}: backend error: {e}", self.scenario.id);
                exchange.backend_error = Some(e.to_string());
                (exchange, None)
            }
        }
    }

    /// Asks for a plan, re-prompting with a format reminder on parse errors.
    fn plan(&self, exchanges: &mut Vec<Exchange>) -> Result<ProposedSequence, TerminationReason> {
        let iteration = self.iteration();
        for retry in 0..=self.config.parse_retries {
            let mut bundle = build_user_prompt(self.task(), &self.config, &self.history, &self.feedback, self.observation());
            if retry > 0 {
                bundle.user_text.push('\n');
                bundle.user_text.push_str(FORMAT_REMINDER);
            }
            let request = self.request(bundle, RequestKind::Plan);
            let (mut exchange, text) = self.call(ExchangeKind::Plan, &request);
            let Some(text) = text else {
                exchanges.push(exchange);
                return Err(TerminationReason::BackendError);
            };
            match parse_response(&text, &self.labels, iteration) {
                Ok(seq) => {
                    exchanges.push(exchange);
                    return Ok(seq);
                }
                Err(e) => {
                    log::debug!("{}: unparseable plan at iteration {iteration}: {e}", self.scenario.id);
                    exchange.parse_error = Some(e);
                    exchanges.push(exchange);
                }
            }
        }
        Err(TerminationReason::ParseFailure)
    }
}

/// Asks the model to choose between the proposal and the buffered majority.
/// Falls back to the majority when no usable answer arrives.
pub fn resolve_conflict(
    backend: &dyn Backend,
    context: &RequestContext,
    config: &PipelineConfig,
    observation: Option<Observation>,
    proposed: &Skill,
    majority: &Skill,
) -> Resolution {
    let task = TaskView {
        instruction: &context.scenario.instruction,
        initial_state: &context.scenario.initial_state,
        labels: &context.labels,
    };
    let bundle = build_conflict_prompt(task, config, &context.history, &context.feedback, observation, proposed, majority);
    let mut ctx = context.clone();
    ctx.kind = RequestKind::Resolve {
        proposed: proposed.clone(),
        majority: majority.clone(),
    };
    let request = ModelRequest {
        system_text: bundle.system_text,
        user_text: bundle.user_text,
        image: bundle.image,
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        context: Some(ctx),
    };
    let options = [proposed.clone(), majority.clone()];
    let mut exchanges = Vec::new();
    for _ in 0..=config.parse_retries {
        let mut exchange = Exchange {
            kind: ExchangeKind::Resolve,
            user_text: request.user_text.clone(),
            image_bytes: request.image.as_ref().map(Vec::len),
            response: None,
            latency_ms: 0,
            backend_id: backend.id(),
            backend_error: None,
            parse_error: None,
        };
        match backend.complete(&request) {
            Ok(r) => {
                exchange.latency_ms = r.latency_ms;
                exchange.response = Some(r.text.clone());
                match parse_choice(&r.text, &context.labels, &options) {
                    Ok(chosen) => {
                        exchanges.push(exchange);
                        return Resolution {
                            chosen,
                            defaulted: false,
                            exchanges,
                        };
                    }
                    Err(e) => exchange.parse_error = Some(e),
                }
                exchanges.push(exchange);
            }
            Err(e) => {
                exchange.backend_error = Some(e.to_string());
                exchanges.push(exchange);
                break;
            }
        }
    }
    log::info!("conflict resolution defaulted to majority {}", majority.snake_name());
    Resolution {
        chosen: majority.clone(),
        defaulted: true,
        exchanges,
    }
}

/// Runs one episode to termination. Backend and parse failures end the
/// episode with the matching termination reason; they never panic.
pub fn run_episode(scenario: &Scenario, backend: &dyn Backend, config: &PipelineConfig) -> EpisodeTrace {
    let scenario = Arc::new(scenario.clone());
    let labels = SkillLabels::for_state(&scenario.initial_state);
    let mut ep = Episode {
        backend,
        config: *config,
        system_prompt: build_system_prompt(config),
        state: scenario.initial_state.clone(),
        history: Vec::new(),
        feedback: FeedbackLog::default(),
        buffer: SequenceBuffer::default(),
        labels,
        scenario,
    };
    let mut records = Vec::new();
    let termination = loop {
        let iteration = ep.iteration();
        if iteration > config.max_iterations {
            break TerminationReason::MaxIterations;
        }
        let mut record = IterationRecord {
            iteration,
            attempts: Vec::new(),
            executed: None,
            outcome: None,
            state_after: None,
        };
        let mut replans = 0;
        let stop = loop {
            let mut attempt = Attempt {
                exchanges: Vec::new(),
                sequence: None,
                buffer_len: ep.buffer.len(),
                consistency: None,
                chosen: None,
                verdict: None,
                gated: false,
            };
            let seq = match ep.plan(&mut attempt.exchanges) {
                Ok(seq) => seq,
                Err(reason) => {
                    record.attempts.push(attempt);
                    break Some(reason);
                }
            };
            let proposed = seq.first().skill.clone();
            let mut chosen = proposed.clone();

            if config.use_sc {
                let votes = ep.buffer.votes_at(iteration);
                let result = consistency_check(&ep.buffer, iteration, &proposed);
                let resolution = match &result {
                    Consistency::Conflict { majority } => {
                        let ctx = ep.context(RequestKind::Plan);
                        let r = resolve_conflict(ep.backend, &ctx, &ep.config, ep.observation(), &proposed, majority);
                        chosen = r.chosen.clone();
                        Some(r)
                    }
                    Consistency::Consistent => None,
                };
                attempt.consistency = Some(ConsistencyRecord {
                    proposed: proposed.clone(),
                    votes,
                    result,
                    resolution,
                });
            }
            attempt.chosen = Some(chosen.clone());

            if config.use_sa {
                let verdict = affordance::check(&ep.state, &chosen);
                let gated = !verdict.feasible;
                if gated {
                    for line in &verdict.feedback {
                        ep.feedback.push(iteration, line.clone());
                    }
                }
                attempt.verdict = Some(verdict);
                attempt.gated = gated;
            }
            attempt.sequence = Some(seq);
            if attempt.gated {
                record.attempts.push(attempt);
                ep.buffer.clear();
                replans += 1;
                if replans > config.max_replans_per_iteration {
                    break Some(TerminationReason::ReplanExhausted);
                }
                continue;
            }

            let (next, outcome) = apply_skill(&ep.state, &chosen);
            ep.state = next;
            ep.history.push(chosen.clone());
            if config.use_sc {
                let mut stored = attempt.sequence.clone().expect("sequence");
                stored.steps[0] = PlannedStep {
                    iteration,
                    skill: chosen.clone(),
                };
                ep.buffer.push(stored);
            }
            record.attempts.push(attempt);
            record.executed = Some(chosen.clone());
            record.outcome = Some(outcome);
            record.state_after = Some(ep.state.clone());
            break (chosen == Skill::Done).then_some(TerminationReason::Done);
        };
        records.push(record);
        if let Some(reason) = stop {
            break reason;
        }
    };

    EpisodeTrace {
        version: TRACE_SCHEMA_VERSION,
        scenario_id: ep.scenario.id.clone(),
        backend_id: backend.id(),
        config: *config,
        system_prompt: ep.system_prompt,
        labels: ep.labels,
        initial_state: ep.scenario.initial_state.clone(),
        records,
        termination,
        feedback: ep.feedback,
        final_state: ep.state,
    }
}
