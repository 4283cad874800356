use std::fmt;
use std::str::FromStr;

use super::{Backend, BackendError, Capabilities, ModelRequest, ModelResponse, RequestKind};
use crate::prompts::{parse_response, render_response};
use crate::world::Skill;

/// A perturbation applied to planning replies of the wrapped backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultRule {
    /// Replace the skill for `iteration` in the reply requested at that
    /// iteration. Without a replacement, DONE is used (STIR if the original
    /// already was DONE).
    Swap { iteration: u32, replacement: Option<Skill> },
    /// Drop a trailing DONE from every plan.
    OmitDone,
    /// Reply with unparseable text at `iteration`.
    Garbage { iteration: u32 },
}

impl fmt::Display for FaultRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultRule::Swap {
                iteration,
                replacement: None,
            } => write!(f, "swap@{iteration}"),
            FaultRule::Swap {
                iteration,
                replacement: Some(s),
            } => write!(f, "swap@{iteration}={}", s.snake_name()),
            FaultRule::OmitDone => f.write_str("omit-done"),
            FaultRule::Garbage { iteration } => write!(f, "garbage@{iteration}"),
        }
    }
}

impl FromStr for FaultRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "omit-done" {
            return Ok(FaultRule::OmitDone);
        }
        let iteration = |n: &str| n.parse::<u32>().map_err(|_| format!("bad iteration in fault rule `{s}`"));
        if let Some(rest) = s.strip_prefix("swap@") {
            let (n, replacement) = match rest.split_once('=') {
                Some((n, skill)) => (n, Some(skill.parse::<Skill>().map_err(|e| e.to_string())?)),
                None => (rest, None),
            };
            return Ok(FaultRule::Swap {
                iteration: iteration(n)?,
                replacement,
            });
        }
        if let Some(n) = s.strip_prefix("garbage@") {
            return Ok(FaultRule::Garbage {
                iteration: iteration(n)?,
            });
        }
        Err(format!("unknown fault rule `{s}` (swap@N[=skill], omit-done, garbage@N)"))
    }
}

pub const GARBAGE_REPLY: &str = "I am not sure what to do next.";

/// Wraps another backend and perturbs its planning replies. Conflict
/// resolution requests pass through untouched.
pub struct FaultyBackend {
    inner: Box<dyn Backend>,
    rules: Vec<FaultRule>,
}

impl FaultyBackend {
    pub fn new(inner: Box<dyn Backend>, rules: Vec<FaultRule>) -> Self {
        FaultyBackend { inner, rules }
    }
}

impl Backend for FaultyBackend {
    fn id(&self) -> String {
        let rules: Vec<String> = self.rules.iter().map(|r| r.to_string()).collect();
        format!("faulty({}; {})", self.inner.id(), rules.join(","))
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let mut response = self.inner.complete(request)?;
        let Some(ctx) = request.context.as_ref() else {
            return Ok(response);
        };
        if ctx.kind != RequestKind::Plan {
            return Ok(response);
        }
        for rule in &self.rules {
            if let FaultRule::Garbage { iteration } = rule {
                if *iteration == ctx.iteration {
                    response.text = GARBAGE_REPLY.into();
                    return Ok(response);
                }
            }
        }
        let Ok(mut seq) = parse_response(&response.text, &ctx.labels, ctx.iteration) else {
            return Ok(response);
        };
        let mut changed = false;
        for rule in &self.rules {
            match rule {
                FaultRule::Swap { iteration, replacement } if *iteration == ctx.iteration => {
                    if let Some(step) = seq.steps.iter_mut().find(|s| s.iteration == *iteration) {
                        step.skill = match replacement {
                            Some(r) => r.clone(),
                            None if step.skill == Skill::Done => Skill::Stir,
                            None => Skill::Done,
                        };
                        changed = true;
                    }
                }
                FaultRule::OmitDone if seq.steps.len() > 1 && seq.terminated => {
                    seq.steps.pop();
                    changed = true;
                }
                _ => {}
            }
        }
        if changed {
            response.text = render_response(&seq.description, &seq.steps, &ctx.labels);
        }
        Ok(response)
    }
}
