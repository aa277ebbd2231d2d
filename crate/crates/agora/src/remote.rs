//! Blocking HTTP client for a language-model scoring and generation
//! service.
//!
//! Wire protocol, JSON both ways:
//! `POST /score {context, continuations}` returns `{perplexities}` and
//! `POST /generate {prompt, temperature, top_p, num_beams,
//! repetition_penalty, sampling, max_new_tokens}` returns `{text}`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use agora_core::oracle::{GenerateRequest, Oracle, OracleError, ScoreRequest};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Environment variable consulted when no endpoint is configured.
pub const ENDPOINT_ENV: &str = "AGORA_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSettings {
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    /// Extra attempts after a transport failure, timeout or 5xx reply.
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        RemoteSettings {
            endpoint: None,
            timeout_secs: 60.0,
            retries: 2,
            retry_backoff_ms: 200,
            max_in_flight: 4,
        }
    }
}

#[derive(Serialize)]
struct ScoreBody<'a> {
    context: &'a str,
    continuations: &'a [String],
}

#[derive(Deserialize)]
struct ScoreReply {
    perplexities: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    num_beams: u32,
    repetition_penalty: f64,
    sampling: bool,
    max_new_tokens: u32,
}

#[derive(Deserialize)]
struct GenerateReply {
    text: String,
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteOracle {
    base: String,
    client: reqwest::blocking::Client,
    settings: RemoteSettings,
    gate: Gate,
}

impl std::fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteOracle").field("base", &self.base).field("settings", &self.settings).finish()
    }
}

fn classify(e: reqwest::Error) -> OracleError {
    if e.is_timeout() {
        OracleError::Timeout
    } else if e.is_decode() {
        OracleError::Malformed(e.to_string())
    } else {
        OracleError::Transport(e.to_string())
    }
}

fn retryable(e: &OracleError) -> bool {
    match e {
        OracleError::Transport(_) | OracleError::Timeout => true,
        OracleError::Status { code, .. } => *code >= 500,
        _ => false,
    }
}

impl RemoteOracle {
    pub fn new(endpoint: &str, settings: RemoteSettings) -> Result<Self, OracleError> {
        if !(settings.timeout_secs > 0.0 && settings.timeout_secs.is_finite()) {
            return Err(OracleError::InvalidInput("timeout_secs must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(settings.timeout_secs))
            .build()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        Ok(RemoteOracle {
            base: endpoint.trim_end_matches('/').to_string(),
            client,
            gate: Gate::new(settings.max_in_flight),
            settings,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn post_once<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, OracleError> {
        let _permit = self.gate.acquire();
        let response = self.client.post(format!("{}{path}", self.base)).json(body).send().map_err(classify)?;
        let status = response.status();
        let bytes = response.bytes().map_err(classify)?;
        if !status.is_success() {
            return Err(OracleError::Status {
                code: status.as_u16(),
                message: String::from_utf8_lossy(&bytes).trim().to_string(),
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| OracleError::Malformed(e.to_string()))
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, OracleError> {
        let mut attempt = 0;
        loop {
            match self.post_once(path, body) {
                Err(e) if attempt < self.settings.retries && retryable(&e) => {
                    attempt += 1;
                    log::warn!("{path} attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(Duration::from_millis(self.settings.retry_backoff_ms * attempt as u64));
                }
                other => return other,
            }
        }
    }
}

impl Oracle for RemoteOracle {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        let reply: ScoreReply = self.post(
            "/score",
            &ScoreBody { context: &request.context, continuations: &request.continuations },
        )?;
        if reply.perplexities.len() != request.continuations.len() {
            return Err(OracleError::Malformed(format!(
                "expected {} perplexities, got {}",
                request.continuations.len(),
                reply.perplexities.len()
            )));
        }
        Ok(reply.perplexities)
    }

    fn generate(&self, request: &GenerateRequest, _rng: &mut dyn RngCore) -> Result<String, OracleError> {
        let p = &request.params;
        let reply: GenerateReply = self.post(
            "/generate",
            &GenerateBody {
                prompt: &request.prompt,
                temperature: p.temperature,
                top_p: p.top_p,
                num_beams: p.num_beams,
                repetition_penalty: p.repetition_penalty,
                sampling: p.sampling,
                max_new_tokens: p.max_new_tokens,
            },
        )?;
        Ok(reply.text)
    }
}
