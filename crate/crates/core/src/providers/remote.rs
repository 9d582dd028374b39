use std::sync::Arc;

use serde_json::{json, Value};

use super::{
    check_embed_input, CompletionModel, CompletionResult, Embedder, PromptSpec, ProviderConfig, ProviderError,
    RetryPolicy,
};
use crate::http::{HttpRequest, HttpResponse, HttpTransport, Slots};

/// Client for a chat-completions style API (`/chat/completions`, `/embeddings`).
pub struct RemoteProvider {
    endpoint: String,
    api_key: String,
    model: String,
    embed_model: String,
    dimension: usize,
    retry: RetryPolicy,
    slots: Slots,
    transport: Arc<dyn HttpTransport>,
}

impl RemoteProvider {
    /// Reads the API key from the environment variable named in `config`.
    pub fn from_config(config: &ProviderConfig, transport: Arc<dyn HttpTransport>) -> Result<Self, ProviderError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| ProviderError::Auth(format!("environment variable {} is not set", config.api_key_env)))?;
        Ok(Self::new(
            config.endpoint.clone().unwrap_or_default(),
            api_key,
            config,
            transport,
        ))
    }

    pub fn new(endpoint: String, api_key: String, config: &ProviderConfig, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key,
            model: config.model.clone(),
            embed_model: config.embed_model.clone(),
            dimension: config.embed_dimension,
            retry: config.retry(),
            slots: Slots::new(config.max_in_flight),
            transport,
        }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let request = HttpRequest::post_json(format!("{}/{path}", self.endpoint), body)
            .header("Authorization", &format!("Bearer {}", self.api_key));
        self.retry.run(|_| {
            let response = {
                let _slot = self.slots.acquire();
                self.transport
                    .send(&request)
                    .map_err(|e| ProviderError::Transient(e.to_string()))?
            };
            classify(response)
        })
    }
}

fn classify(response: HttpResponse) -> Result<Value, ProviderError> {
    let message = || response.body.chars().take(300).collect::<String>();
    match response.status {
        200..=299 => serde_json::from_str(&response.body).map_err(|e| ProviderError::Malformed(e.to_string())),
        401 | 403 => Err(ProviderError::Auth(message())),
        429 => Err(ProviderError::RateLimited { attempts: 1 }),
        500..=599 => Err(ProviderError::Transient(format!("status {}: {}", response.status, message()))),
        status => Err(ProviderError::Http {
            status,
            message: message(),
        }),
    }
}

impl CompletionModel for RemoteProvider {
    fn complete(&self, prompt: &PromptSpec) -> Result<CompletionResult, ProviderError> {
        if prompt.user_text.trim().is_empty() {
            return Err(ProviderError::InvalidInput("user_text is empty".into()));
        }
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system_text {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt.user_text}));
        let model = if prompt.model_name.is_empty() { &self.model } else { &prompt.model_name };
        let mut body = json!({
            "model": model,
            "messages": messages,
            "temperature": prompt.temperature,
        });
        if let Some(max) = prompt.max_output {
            body["max_tokens"] = json!(max);
        }
        let reply = self.post("chat/completions", &body)?;
        let choice = reply
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| ProviderError::Malformed("no choices".into()))?;
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Malformed("choice has no message content".into()))?;
        let finished = choice.get("finish_reason").and_then(Value::as_str) != Some("length");
        Ok(CompletionResult {
            text: text.to_string(),
            model_name: reply
                .get("model")
                .and_then(Value::as_str)
                .unwrap_or(model)
                .to_string(),
            finished,
        })
    }
}

impl Embedder for RemoteProvider {
    fn model_name(&self) -> &str {
        &self.embed_model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        check_embed_input(texts)?;
        let reply = self.post("embeddings", &json!({"model": self.embed_model, "input": texts}))?;
        let data = reply
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Malformed("no data array".into()))?;
        if data.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "{} embeddings for {} inputs",
                data.len(),
                texts.len()
            )));
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).map_or(pos, |i| i as usize);
            let vector: Vec<f32> = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::Malformed("item has no embedding".into()))?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32))
                .collect::<Option<_>>()
                .ok_or_else(|| ProviderError::Malformed("non-numeric embedding".into()))?;
            if vector.len() != self.dimension {
                return Err(ProviderError::DimensionMismatch {
                    expected: self.dimension,
                    got: vector.len(),
                });
            }
            let slot = out
                .get_mut(index)
                .ok_or_else(|| ProviderError::Malformed(format!("embedding index {index} out of range")))?;
            *slot = vector;
        }
        Ok(out)
    }
}
