//! Chat-completion client for a hosted multimodal model.
//!
//! One request per judgement: a system message and a user message carrying
//! the prompt text followed by the crops as base64 PNG data URLs. Transport
//! failures are retried with exponential backoff and then reported as
//! [`JudgeError::Unavailable`].

use std::thread;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{parse_verdict, JudgeBackend, JudgeContext, JudgeError, JudgeRequest, JudgeVerdict};

pub const ENV_BASE_URL: &str = "LANDFALL_BASE_URL";
pub const ENV_MODEL: &str = "LANDFALL_MODEL";
pub const ENV_API_KEY: &str = "LANDFALL_API_KEY";

/// Endpoint settings. The API key is read from the environment only and is
/// never serialised.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl std::fmt::Debug for RemoteConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout_ms", &self.timeout_ms)
            .field("max_retries", &self.max_retries)
            .field("backoff_ms", &self.backoff_ms)
            .finish()
    }
}

impl RemoteConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: None,
            timeout_ms: 60_000,
            max_retries: 2,
            backoff_ms: 500,
        }
    }

    /// Reads base URL, model and key from `LANDFALL_*` variables.
    pub fn from_env() -> Result<Self, JudgeError> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.trim().is_empty());
        let base = var(ENV_BASE_URL)
            .ok_or_else(|| JudgeError::Precondition(format!("{ENV_BASE_URL} is not set")))?;
        let model = var(ENV_MODEL)
            .ok_or_else(|| JudgeError::Precondition(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = Self::new(&base, &model);
        cfg.api_key = var(ENV_API_KEY);
        Ok(cfg)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: MessageContent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Clone, Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Clone, Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Clone, Debug, Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Wire body for a judge request.
pub fn chat_body(request: &JudgeRequest, model: &str) -> ChatRequest {
    let mut parts = vec![ContentPart::Text {
        text: request.user_prompt.clone(),
    }];
    parts.extend(request.images.iter().map(|img| ContentPart::ImageUrl {
        image_url: ImageUrl {
            url: format!("data:image/png;base64,{}", BASE64.encode(img.to_png())),
        },
    }));
    ChatRequest {
        model: model.to_string(),
        messages: vec![
            ChatMessage {
                role: "system".into(),
                content: MessageContent::Text(request.system_prompt.clone()),
            },
            ChatMessage {
                role: "user".into(),
                content: MessageContent::Parts(parts),
            },
        ],
    }
}

pub struct RemoteJudge {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteJudge {
    pub fn new(config: RemoteConfig) -> Result<Self, JudgeError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| JudgeError::Unavailable(format!("cannot build HTTP client: {e}")))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &ChatRequest) -> Result<String, (bool, String)> {
        let mut req = self.client.post(self.config.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| (true, format!("request failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| (false, format!("malformed response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| (false, "response has no message content".to_string()))
    }

    /// Sends one chat request and returns the reply text.
    pub fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        let body = chat_body(request, &self.config.model);
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(
                    self.config.backoff_ms << (attempt - 1),
                ));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    log::warn!("judge request attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(JudgeError::Unavailable(last))
    }
}

impl JudgeBackend for RemoteJudge {
    fn id(&self) -> String {
        self.config.model.clone()
    }

    fn judge(
        &mut self,
        request: &JudgeRequest,
        _ctx: &JudgeContext<'_>,
    ) -> Result<JudgeVerdict, JudgeError> {
        let start = Instant::now();
        let reply = self.complete(request)?;
        let payload = parse_verdict(request.stage, &reply, request.images.len())?;
        Ok(JudgeVerdict {
            payload,
            rationale: reply,
            latency_ms: start.elapsed().as_millis() as u64,
            backend_id: self.id(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{prompts, Stage};
    use crate::sensor::RgbImage;

    fn request() -> JudgeRequest {
        JudgeRequest {
            stage: Stage::Ranking,
            system_prompt: prompts::SYSTEM.into(),
            user_prompt: prompts::RANKING.into(),
            images: vec![RgbImage {
                width: 2,
                height: 1,
                pixels: vec![[1, 2, 3], [4, 5, 6]],
            }],
            round_index: 0,
        }
    }

    #[test]
    fn body_has_system_then_user_with_images() {
        let body = chat_body(&request(), "some-model");
        let json = serde_json::to_value(&body).unwrap();
        assert_eq!(json["model"], "some-model");
        assert_eq!(json["messages"][0]["role"], "system");
        assert_eq!(json["messages"][0]["content"], prompts::SYSTEM);
        let parts = json["messages"][1]["content"].as_array().unwrap();
        assert_eq!(parts[0]["type"], "text");
        assert_eq!(parts[0]["text"], prompts::RANKING);
        assert_eq!(parts[1]["type"], "image_url");
        assert!(parts[1]["image_url"]["url"]
            .as_str()
            .unwrap()
            .starts_with("data:image/png;base64,iVBOR"));
    }

    #[test]
    fn key_is_never_serialised_or_printed() {
        let mut cfg = RemoteConfig::new("http://localhost:1/v1/", "m");
        cfg.api_key = Some("sk-secret".into());
        assert_eq!(cfg.endpoint(), "http://localhost:1/v1/chat/completions");
        assert!(!serde_json::to_string(&cfg).unwrap().contains("sk-secret"));
        assert!(!format!("{cfg:?}").contains("sk-secret"));
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let mut cfg = RemoteConfig::new("http://127.0.0.1:9", "m");
        cfg.timeout_ms = 500;
        cfg.backoff_ms = 1;
        let judge = RemoteJudge::new(cfg).unwrap();
        assert!(matches!(
            judge.complete(&request()),
            Err(JudgeError::Unavailable(_))
        ));
    }
}
