use std::fmt;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use super::{ChatRequest, ChatResponse, HomophilyError};

/// Environment variables consulted for the endpoint key, in order.
pub const API_KEY_ENV: [&str; 2] = ["SPECPLUS_API_KEY", "OPENAI_API_KEY"];
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryContext {
    pub edge: (usize, usize),
    pub query_index: usize,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

impl ClientError {
    fn transient(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            Self::Decode(_) => false,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, req: &ChatRequest, ctx: &QueryContext) -> Result<ChatResponse, ClientError>;

    /// Whether prompts must carry real node text.
    fn needs_text(&self) -> bool {
        true
    }
}

/// Client for OpenAI-compatible chat-completions endpoints.
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    attempts: usize,
    backoff: Duration,
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("attempts", &self.attempts)
            .finish()
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent,
            attempts: DEFAULT_ATTEMPTS,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads the key from the first set variable in [`API_KEY_ENV`].
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, HomophilyError> {
        let key = API_KEY_ENV
            .iter()
            .find_map(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
            .ok_or_else(|| HomophilyError::Config(format!("set {} to query the endpoint", API_KEY_ENV[0])))?;
        Ok(Self::new(endpoint, Some(key)))
    }

    pub fn with_retry(mut self, attempts: usize, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn once(&self, req: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let body = json!({
            "model": req.model,
            "temperature": req.temperature,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
        });
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(&body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ClientError::Status {
                status,
                body: text.chars().take(200).collect(),
            });
        }
        let parsed: CompletionBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Decode(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError::Decode("no choices[0].message.content".into()))?;
        let (prompt_tokens, completion_tokens) = match parsed.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (None, None),
        };
        Ok(ChatResponse {
            text,
            prompt_tokens,
            completion_tokens,
        })
    }
}

impl ChatClient for HttpClient {
    fn complete(&self, req: &ChatRequest, _ctx: &QueryContext) -> Result<ChatResponse, ClientError> {
        let mut delay = self.backoff;
        let mut attempt = 1;
        loop {
            match self.once(req) {
                Ok(r) => return Ok(r),
                Err(e) if e.transient() && attempt < self.attempts => {
                    log::warn!("attempt {attempt} failed: {e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Offline oracle that answers from the true labels, flipping each answer
/// independently with probability `flip_prob`.
#[derive(Debug, Clone)]
pub struct MockClient {
    labels: Vec<usize>,
    flip_prob: f64,
    seed: u64,
}

pub const MOCK_SAME: &str = "Yes, they belong to the same category.";
pub const MOCK_DIFFERENT: &str = "No, they belong to different categories.";

impl MockClient {
    pub fn new(labels: Vec<usize>, flip_prob: f64, seed: u64) -> Result<Self, HomophilyError> {
        if !(0.0..0.5).contains(&flip_prob) {
            return Err(HomophilyError::Config(format!(
                "flip probability must lie in [0, 0.5), got {flip_prob}"
            )));
        }
        Ok(Self {
            labels,
            flip_prob,
            seed,
        })
    }

    fn rng(&self, ctx: &QueryContext) -> ChaCha8Rng {
        let (u, v) = ctx.edge;
        let (a, b) = (u.min(v) as u64, u.max(v) as u64);
        let key = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(a.wrapping_mul(0xBF58_476D_1CE4_E5B9))
            .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB))
            .wrapping_add(ctx.query_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(a ^ (b << 32));
        rng
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

impl ChatClient for MockClient {
    fn complete(&self, req: &ChatRequest, ctx: &QueryContext) -> Result<ChatResponse, ClientError> {
        let (u, v) = ctx.edge;
        let (Some(lu), Some(lv)) = (self.labels.get(u), self.labels.get(v)) else {
            return Err(ClientError::Decode(format!("edge ({u}, {v}) outside the label vector")));
        };
        let flip = self.flip_prob > 0.0 && self.rng(ctx).random_bool(self.flip_prob);
        let same = (lu == lv) != flip;
        let text = if same { MOCK_SAME } else { MOCK_DIFFERENT };
        Ok(ChatResponse {
            text: text.to_string(),
            prompt_tokens: Some(word_count(&req.system) + word_count(&req.user)),
            completion_tokens: Some(word_count(text)),
        })
    }

    fn needs_text(&self) -> bool {
        false
    }
}
