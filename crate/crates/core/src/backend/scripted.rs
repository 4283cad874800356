use std::fs;
use std::path::Path;
use std::sync::Mutex;

use super::{Backend, BackendError, Capabilities, ModelRequest, ModelResponse};

/// Replays canned replies in order, one per call. Script files are JSON
/// arrays of strings.
#[derive(Debug)]
pub struct ScriptedBackend {
    name: String,
    replies: Vec<String>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub const CAPABILITIES: Capabilities = Capabilities {
        multimodal: false,
        concurrent: false,
    };

    pub fn new(name: impl Into<String>, replies: Vec<String>) -> Self {
        ScriptedBackend {
            name: name.into(),
            replies,
            cursor: Mutex::new(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Script {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let replies: Vec<String> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self::new(format!("scripted:{}", path.display()), replies))
    }

    /// Replies handed out so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn capabilities(&self) -> Capabilities {
        Self::CAPABILITIES
    }

    fn complete(&self, _request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let text = self
            .replies
            .get(*cursor)
            .cloned()
            .ok_or(BackendError::ScriptExhausted(*cursor))?;
        *cursor += 1;
        Ok(ModelResponse {
            text,
            latency_ms: 0,
            backend_id: self.name.clone(),
        })
    }
}
