//! The closed planning loop: prompt, parse, check the proposal against earlier
//! plans, gate it on its preconditions, execute, repeat until DONE.

mod episode;

pub use episode::{
    resolve_conflict, run_episode, Attempt, ConsistencyRecord, EpisodeTrace, Exchange, ExchangeKind,
    IterationRecord, Resolution, TerminationReason, TraceError, TRACE_SCHEMA_VERSION,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prompts::ProposedSequence;
use crate::world::Skill;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub use_observation: bool,
    pub use_cot: bool,
    pub use_sc: bool,
    pub use_sa: bool,
    pub max_iterations: u32,
    pub max_replans_per_iteration: u32,
    pub parse_retries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::full()
    }
}

impl PipelineConfig {
    fn with_flags(use_observation: bool, use_cot: bool, use_sc: bool, use_sa: bool) -> Self {
        PipelineConfig {
            use_observation,
            use_cot,
            use_sc,
            use_sa,
            max_iterations: 30,
            max_replans_per_iteration: 3,
            parse_retries: 2,
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    pub fn naive_llm() -> Self {
        Self::with_flags(false, false, false, false)
    }

    pub fn naive_mllm() -> Self {
        Self::with_flags(true, false, false, false)
    }

    pub fn cot() -> Self {
        Self::with_flags(true, true, false, false)
    }

    pub fn cot_sc() -> Self {
        Self::with_flags(true, true, true, false)
    }

    pub fn full() -> Self {
        Self::with_flags(true, true, true, true)
    }

    pub const PRESETS: [&'static str; 5] = ["naive_llm", "naive_mllm", "cot", "cot_sc", "full"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "naive_llm" => Some(Self::naive_llm()),
            "naive_mllm" => Some(Self::naive_mllm()),
            "cot" => Some(Self::cot()),
            "cot_sc" => Some(Self::cot_sc()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }

    /// Preset name when the flags match one, else `obs=1,cot=0,...`.
    pub fn label(&self) -> String {
        let flags = (self.use_observation, self.use_cot, self.use_sc, self.use_sa);
        match flags {
            (false, false, false, false) => "naive_llm".into(),
            (true, false, false, false) => "naive_mllm".into(),
            (true, true, false, false) => "cot".into(),
            (true, true, true, false) => "cot_sc".into(),
            (true, true, true, true) => "full".into(),
            (o, c, s, a) => format!("obs={},cot={},sc={},sa={}", o as u8, c as u8, s as u8, a as u8),
        }
    }

    /// Human-readable row title for reports.
    pub fn title(&self) -> String {
        match self.label().as_str() {
            "naive_llm" => "Naive LLM".into(),
            "naive_mllm" => "Naive MLLM".into(),
            "cot" => "CoT".into(),
            "cot_sc" => "CoT + SC".into(),
            "full" => "CoT + SC + SA".into(),
            other => other.into(),
        }
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Accepts a preset name or four comma-separated flags `obs,cot,sc,sa`
/// written as 0/1 or true/false.
impl FromStr for PipelineConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(c) = PipelineConfig::preset(s.trim()) {
            return Ok(c);
        }
        let flags: Vec<bool> = s
            .split(',')
            .map(|f| match f.trim().to_ascii_lowercase().as_str() {
                "1" | "t" | "true" => Ok(true),
                "0" | "f" | "false" => Ok(false),
                other => Err(format!("bad flag `{other}`")),
            })
            .collect::<Result<_, _>>()?;
        match flags[..] {
            [o, c, sc, sa] => Ok(PipelineConfig::with_flags(o, c, sc, sa)),
            _ => Err(format!(
                "expected a preset ({}) or four flags obs,cot,sc,sa",
                PipelineConfig::PRESETS.join(", ")
            )),
        }
    }
}

/// Outcome of comparing a proposal against the buffered plans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    Conflict { majority: Skill },
}

/// Plans from earlier iterations whose selected skill was executed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceBuffer {
    pub sequences: Vec<ProposedSequence>,
}

impl SequenceBuffer {
    pub fn push(&mut self, sequence: ProposedSequence) {
        self.sequences.push(sequence);
    }

    pub fn clear(&mut self) {
        self.sequences.clear();
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// One vote per buffered sequence for `iteration`. A sequence that ended
    /// before it votes DONE.
    pub fn votes_at(&self, iteration: u32) -> Vec<Skill> {
        self.sequences
            .iter()
            .filter(|s| s.start_iteration() <= iteration)
            .map(|s| s.skill_at(iteration).cloned().unwrap_or(Skill::Done))
            .collect()
    }
}

/// Conflict iff a unique most-voted skill exists and differs from `proposed`.
pub fn consistency_check(buffer: &SequenceBuffer, iteration: u32, proposed: &Skill) -> Consistency {
    let mut counts: BTreeMap<String, (usize, Skill)> = BTreeMap::new();
    for vote in buffer.votes_at(iteration) {
        counts.entry(vote.snake_name()).or_insert((0, vote)).0 += 1;
    }
    let Some(top) = counts.values().map(|(n, _)| *n).max() else {
        return Consistency::Consistent;
    };
    let mut leaders = counts.values().filter(|(n, _)| *n == top);
    let (_, mode) = leaders.next().expect("max exists");
    if leaders.next().is_some() || mode == proposed {
        Consistency::Consistent
    } else {
        Consistency::Conflict { majority: mode.clone() }
    }
}

#[cfg(test)]
mod tests;
