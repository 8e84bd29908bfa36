//! Chat-completions upstream over HTTP.

use super::{PromptRequest, Upstream, UpstreamError};
use serde_json::{json, Value};
use std::time::Duration;

pub struct HttpUpstream {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpUpstream {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout_ms: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpUpstream {
            agent,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
        }
    }
}

pub fn request_body(model: &str, req: &PromptRequest) -> Value {
    let mut messages = Vec::new();
    if let Some(sys) = &req.system_text {
        messages.push(json!({"role": "system", "content": sys}));
    }
    messages.push(json!({"role": "user", "content": req.user_text}));
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    });
    if !req.stop_sequences.is_empty() {
        body["stop"] = json!(req.stop_sequences);
    }
    body
}

pub fn extract_content(v: &Value) -> Result<String, UpstreamError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| UpstreamError::Fatal("response has no choices[0].message.content".into()))
}

impl Upstream for HttpUpstream {
    fn call(&self, model: &str, req: &PromptRequest) -> Result<String, UpstreamError> {
        let mut r = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            r = r.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match r.send_json(request_body(model, req)) {
            Ok(resp) => resp,
            Err(e) => {
                return Err(match e {
                    ureq::Error::Timeout(_)
                    | ureq::Error::Io(_)
                    | ureq::Error::ConnectionFailed
                    | ureq::Error::HostNotFound => UpstreamError::Transient(e.to_string()),
                    other => UpstreamError::Fatal(other.to_string()),
                })
            }
        };
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after_ms = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.trim().parse::<u64>().ok())
                .map(|s| s * 1000);
            return Err(UpstreamError::RateLimited { retry_after_ms });
        }
        if status >= 500 || status == 408 {
            return Err(UpstreamError::Transient(format!("http status {status}")));
        }
        if status >= 400 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(UpstreamError::Fatal(format!("http status {status}: {body}")));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| UpstreamError::Transient(format!("bad response body: {e}")))?;
        extract_content(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_shape() {
        let req = PromptRequest {
            system_text: Some("s".into()),
            user_text: "u".into(),
            temperature: 0.0,
            max_tokens: 5,
            stop_sequences: vec!["\n".into()],
        };
        let b = request_body("gpt", &req);
        assert_eq!(b["model"], "gpt");
        assert_eq!(b["messages"][0]["role"], "system");
        assert_eq!(b["messages"][1]["content"], "u");
        assert_eq!(b["stop"][0], "\n");
        assert_eq!(b["max_tokens"], 5);
    }

    #[test]
    fn content_extraction() {
        let v = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(extract_content(&v).unwrap(), "hi");
        assert!(extract_content(&json!({})).is_err());
    }
}
