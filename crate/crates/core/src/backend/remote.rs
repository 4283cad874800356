use std::env;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, BackendError, Capabilities, ModelRequest, ModelResponse};

pub const DEFAULT_API_KEY_ENV: &str = "MODEL_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Full chat-completions endpoint URL.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout: Duration,
    pub attempts: u32,
    /// First retry waits this long; each later one doubles it.
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(url: &str, model: &str) -> Self {
        RemoteConfig {
            url: url.to_string(),
            model: model.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(120),
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub const CAPABILITIES: Capabilities = Capabilities {
        multimodal: true,
        concurrent: true,
    };

    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend { config, agent }
    }

    /// Request body in chat-completions form; the image travels as a PNG data URL.
    pub fn wire_body(&self, request: &ModelRequest) -> Value {
        let user = match &request.image {
            Some(ppm) => {
                let png = ppm_to_png(ppm).unwrap_or_default();
                let data = base64::engine::general_purpose::STANDARD.encode(png);
                json!([
                    {"type": "text", "text": request.user_text},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}}
                ])
            }
            None => Value::String(request.user_text.clone()),
        };
        json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": user},
            ],
        })
    }

    fn attempt(&self, key: &str, body: &Value) -> Result<String, BackendError> {
        let mut response = self
            .agent
            .post(&self.config.url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, body: text });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))?;
        if content.trim().is_empty() {
            return Err(BackendError::Malformed("empty completion".into()));
        }
        Ok(content.to_string())
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn capabilities(&self) -> Capabilities {
        Self::CAPABILITIES
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let key = env::var(&self.config.api_key_env)
            .map_err(|_| BackendError::MissingCredential(self.config.api_key_env.clone()))?;
        let body = self.wire_body(request);
        let started = Instant::now();
        let attempts = self.config.attempts.max(1);
        let mut last = None;
        for n in 0..attempts {
            if n > 0 {
                thread::sleep(self.config.backoff * 2u32.pow(n - 1));
            }
            match self.attempt(&key, &body) {
                Ok(text) => {
                    return Ok(ModelResponse {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        backend_id: self.id(),
                    })
                }
                Err(e) if e.is_retryable() => {
                    log::warn!("remote attempt {} of {attempts} failed: {e}", n + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::RetriesExhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }
}

/// Re-encodes a binary P6 pixmap as PNG.
pub fn ppm_to_png(ppm: &[u8]) -> Option<Vec<u8>> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while ppm.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !ppm.get(pos)?.is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&ppm[start..pos]).ok()?);
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return None;
    }
    let width: u32 = fields[1].parse().ok()?;
    let height: u32 = fields[2].parse().ok()?;
    let pixels = ppm.get(pos + 1..)?;
    if pixels.len() != (width * height * 3) as usize {
        return None;
    }
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width, height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.write_header().ok()?.write_image_data(pixels).ok()?;
    Some(out)
}
