//! Model backends. The planner talks to every model through [`Backend`]; the
//! oracle, scripted and faulty backends make the loop testable offline, the
//! remote one speaks a chat-completions style HTTP protocol.

mod faulty;
mod oracle;
mod remote;
mod scripted;

pub use faulty::{FaultRule, FaultyBackend};
pub use oracle::OracleBackend;
pub use remote::{RemoteBackend, RemoteConfig, DEFAULT_API_KEY_ENV};
pub use scripted::ScriptedBackend;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::{FeedbackLog, SkillLabels};
use crate::scenarios::Scenario;
use crate::world::{Skill, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    /// Accepts an image with the request.
    pub multimodal: bool,
    /// Safe to call from several episodes at once.
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequestKind {
    Plan,
    Resolve { proposed: Skill, majority: Skill },
}

/// Structured view of the episode behind a request. Real models only see the
/// prompt text; the offline backends plan from this instead.
#[derive(Debug, Clone)]
pub struct RequestContext {
    pub scenario: Arc<Scenario>,
    pub state: WorldState,
    pub history: Vec<Skill>,
    pub iteration: u32,
    pub feedback: FeedbackLog,
    pub labels: SkillLabels,
    pub kind: RequestKind,
}

#[derive(Debug, Clone)]
pub struct ModelRequest {
    pub system_text: String,
    pub user_text: String,
    pub image: Option<Vec<u8>>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub context: Option<RequestContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub latency_ms: u64,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
    #[error("script exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("request carries no episode context")]
    MissingContext,
    #[error("cannot load script {path}: {message}")]
    Script { path: String, message: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<BackendError> },
}

impl BackendError {
    /// Errors worth retrying: transport failures, rate limits, server errors.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn capabilities(&self) -> Capabilities;
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError>;
}

/// Parsed `--backend` value; builds one backend per episode.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle,
    /// A JSON script file, or a directory holding `<scenario id>.json` scripts.
    Scripted(PathBuf),
    Faulty { inner: Box<BackendSpec>, rules: Vec<FaultRule> },
    Remote(RemoteConfig),
}

impl BackendSpec {
    pub fn capabilities(&self) -> Capabilities {
        match self {
            BackendSpec::Oracle => OracleBackend.capabilities(),
            BackendSpec::Scripted(_) => ScriptedBackend::CAPABILITIES,
            BackendSpec::Faulty { inner, .. } => inner.capabilities(),
            BackendSpec::Remote(_) => RemoteBackend::CAPABILITIES,
        }
    }

    pub fn instantiate(&self, scenario: &Scenario) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendSpec::Oracle => Box::new(OracleBackend),
            BackendSpec::Scripted(path) => {
                let file = if path.is_dir() {
                    path.join(format!("{}.json", scenario.id))
                } else {
                    path.clone()
                };
                Box::new(ScriptedBackend::load(&file)?)
            }
            BackendSpec::Faulty { inner, rules } => Box::new(FaultyBackend::new(inner.instantiate(scenario)?, rules.clone())),
            BackendSpec::Remote(cfg) => Box::new(RemoteBackend::new(cfg.clone())),
        })
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Oracle => f.write_str("oracle"),
            BackendSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
            BackendSpec::Faulty { inner, rules } => {
                let rules: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
                write!(f, "faulty:{inner}:{}", rules.join(","))
            }
            BackendSpec::Remote(cfg) => write!(f, "remote:{}:{}", cfg.url, cfg.model),
        }
    }
}

/// `oracle`, `scripted:<path>`, `faulty:<inner>:<rule>[,<rule>]`, or
/// `remote:<url>:<model>`. For `faulty` the rules follow the last colon;
/// for `remote` the model follows the last colon.
impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "oracle" {
            return Ok(BackendSpec::Oracle);
        }
        if let Some(path) = s.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted backend needs a path".into());
            }
            return Ok(BackendSpec::Scripted(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("faulty:") {
            let (inner, rules) = rest
                .rsplit_once(':')
                .ok_or("faulty backend needs `faulty:<inner>:<rules>`")?;
            let inner: BackendSpec = if inner == "oracle" || inner.contains(':') {
                inner.parse()?
            } else {
                BackendSpec::Scripted(PathBuf::from(inner))
            };
            let rules = rules
                .split(',')
                .map(str::parse)
                .collect::<Result<Vec<FaultRule>, _>>()?;
            return Ok(BackendSpec::Faulty {
                inner: Box::new(inner),
                rules,
            });
        }
        if let Some(rest) = s.strip_prefix("remote:") {
            let (url, model) = rest
                .rsplit_once(':')
                .ok_or("remote backend needs `remote:<url>:<model>`")?;
            if url.is_empty() || model.is_empty() || model.contains('/') {
                return Err("remote backend needs `remote:<url>:<model>`".into());
            }
            return Ok(BackendSpec::Remote(RemoteConfig::new(url, model)));
        }
        Err(format!("unknown backend `{s}`"))
    }
}

#[cfg(test)]
mod tests;
