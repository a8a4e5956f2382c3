use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{normalize_label, RelevanceProvider, TargetKind};
use crate::http::Transport;
use crate::{Error, Result};

pub const PROMPT_VERSION: &str = "v1";
pub const TEMPERATURE: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prompt {
    IdentifyReceptacles,
    RegionProposals,
    ReceptacleRelevance,
    RegionRelevance,
}

impl Prompt {
    pub fn system(self) -> &'static str {
        match self {
            Prompt::IdentifyReceptacles => include_str!("../../resources/prompts/identify_receptacles.v1.txt"),
            Prompt::RegionProposals => include_str!("../../resources/prompts/region_proposals.v1.txt"),
            Prompt::ReceptacleRelevance => include_str!("../../resources/prompts/receptacle_relevance.v1.txt"),
            Prompt::RegionRelevance => include_str!("../../resources/prompts/region_relevance.v1.txt"),
        }
        .trim_end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_retries: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "llama-3.1-8b-instruct".into(),
            api_key_env: "SCENEVAR_LLM_API_KEY".into(),
            max_retries: 3,
            cache_dir: None,
        }
    }
}

/// Chat-completion client with strict JSON checking, bounded retries and an
/// on-disk response cache keyed by the prompt hash.
#[derive(Clone)]
pub struct LlmClient {
    pub config: LlmConfig,
    transport: Arc<dyn Transport>,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("config", &self.config).finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [Message<'a>; 2],
}

impl LlmClient {
    pub fn new(config: LlmConfig, transport: Arc<dyn Transport>) -> Self {
        LlmClient { config, transport }
    }

    pub fn request_body(&self, system: &str, user: &str) -> String {
        serde_json::to_string(&ChatRequest {
            model: &self.config.model,
            temperature: TEMPERATURE,
            messages: [
                Message {
                    role: "system",
                    content: system,
                },
                Message {
                    role: "user",
                    content: user,
                },
            ],
        })
        .expect("request serializes")
    }

    pub fn cache_key(&self, system: &str, user: &str) -> String {
        hex::encode(Sha256::digest(self.request_body(system, user).as_bytes()))
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn send(&self, body: &str) -> Result<String> {
        let mut headers = Vec::new();
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            if !key.is_empty() {
                headers.push(("authorization".to_string(), format!("Bearer {key}")));
            }
        }
        let raw = self.transport.post_json(&self.config.endpoint, &headers, body)?;
        Ok(raw)
    }

    /// Sends the prompt, parses the assistant message as JSON and validates
    /// it, re-requesting up to `max_retries` times on malformed output.
    pub fn json_call<T>(&self, system: &str, user: &str, validate: impl Fn(&Value) -> Result<T>) -> Result<T> {
        let key = self.cache_key(system, user);
        let cache = self.cache_path(&key);
        if let Some(path) = &cache {
            if let Ok(text) = std::fs::read_to_string(path) {
                if let Ok(v) = parse_strict(&text).and_then(|v| validate(&v)) {
                    return Ok(v);
                }
            }
        }
        let body = self.request_body(system, user);
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let raw = self.send(&body)?;
            let outcome = completion_content(&raw).and_then(|c| {
                let v = parse_strict(&c)?;
                validate(&v).map(|t| (t, c))
            });
            match outcome {
                Ok((t, content)) => {
                    if let Some(path) = &cache {
                        if let Some(dir) = path.parent() {
                            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                        }
                        std::fs::write(path, content).map_err(|e| Error::io(path, e))?;
                    }
                    return Ok(t);
                }
                Err(e) => {
                    log::warn!("LLM response rejected (attempt {attempt}/{attempts}): {e}");
                    last_error = e.to_string();
                }
            }
        }
        Err(Error::RetriesExhausted { attempts, last_error })
    }
}

/// Free-function form of [`LlmClient::json_call`].
pub fn llm_json_call<T>(client: &LlmClient, prompt: Prompt, user: &str, validate: impl Fn(&Value) -> Result<T>) -> Result<T> {
    client.json_call(prompt.system(), user, validate)
}

fn completion_content(raw: &str) -> Result<String> {
    let v: Value = serde_json::from_str(raw).map_err(|e| Error::Schema(format!("completion is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Schema("completion has no choices[0].message.content".into()))
}

fn parse_strict(content: &str) -> Result<Value> {
    let v: Value = serde_json::from_str(content.trim()).map_err(|e| Error::Schema(format!("not standard JSON: {e}")))?;
    if !v.is_object() {
        return Err(Error::Schema("top level must be an object".into()));
    }
    Ok(v)
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>> {
    let arr = v
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Schema(format!("missing array `{field}`")))?;
    arr.iter()
        .map(|x| {
            x.as_str()
                .map(normalize_label)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Schema(format!("`{field}` must hold non-empty strings")))
        })
        .collect()
}

fn relevances(v: &Value, targets: &[String]) -> Result<BTreeMap<String, f64>> {
    let obj = v
        .get("relevances")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::Schema("missing object `relevances`".into()))?;
    let mut got: BTreeMap<String, f64> = BTreeMap::new();
    for (k, x) in obj {
        let s = x
            .as_f64()
            .filter(|s| (0.0..=10.0).contains(s))
            .ok_or_else(|| Error::Schema(format!("score for `{k}` must be a number in [0, 10]")))?;
        got.insert(normalize_label(k), s / 10.0);
    }
    targets
        .iter()
        .map(|t| {
            let t = normalize_label(t);
            got.get(&t)
                .map(|s| (t.clone(), *s))
                .ok_or_else(|| Error::Schema(format!("no score for `{t}`")))
        })
        .collect()
}

fn list_json(xs: &[String]) -> String {
    serde_json::to_string(xs).expect("strings serialize")
}

fn str_json(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// [`RelevanceProvider`] that asks a chat-completion endpoint.
#[derive(Clone, Debug)]
pub struct RemoteProvider {
    pub client: LlmClient,
}

impl RemoteProvider {
    pub fn new(client: LlmClient) -> Self {
        RemoteProvider { client }
    }
}

impl RelevanceProvider for RemoteProvider {
    fn propose_receptacles(&self, objects: &[String]) -> Result<Vec<String>> {
        let user = format!("{{\"objects\": {}}}", list_json(objects));
        llm_json_call(&self.client, Prompt::IdentifyReceptacles, &user, |v| string_list(v, "receptacles"))
    }

    fn propose_regions(&self, objects: &[String]) -> Result<Vec<String>> {
        let user = format!("{{\"objects\": {}}}", list_json(objects));
        llm_json_call(&self.client, Prompt::RegionProposals, &user, |v| {
            let r = string_list(v, "regions")?;
            if r.is_empty() {
                return Err(Error::Schema("no region proposed".into()));
            }
            Ok(r)
        })
    }

    fn score(&self, object: &str, targets: &[String], kind: TargetKind) -> Result<BTreeMap<String, f64>> {
        let (prompt, user) = match kind {
            TargetKind::Receptacle => (
                Prompt::ReceptacleRelevance,
                format!("{{\"furniture\": {}, \"object\": {}}}", list_json(targets), str_json(object)),
            ),
            TargetKind::Region => (
                Prompt::RegionRelevance,
                format!("{{\"regions\": {}, \"object\": {}}}", list_json(targets), str_json(object)),
            ),
        };
        llm_json_call(&self.client, prompt, &user, |v| relevances(v, targets))
    }
}
