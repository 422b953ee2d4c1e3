//! Agent backend over HTTP: `POST <url>` with `{role, context}`, reply body
//! in the scripted reply schema.

use std::time::Duration;

use forge_core::orchestr::{AgentBackend, AgentRequest, BackendError, Role};
use serde_json::json;

pub struct HttpBackend {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    /// `base` may be the server root or the full `/agent` endpoint.
    pub fn new(base: &str) -> Self {
        let trimmed = base.trim_end_matches('/');
        let url = if trimmed.ends_with("/agent") { trimmed.to_string() } else { format!("{trimmed}/agent") };
        let client =
            reqwest::blocking::Client::builder().timeout(Duration::from_secs(120)).build().expect("http client builds");
        HttpBackend { url, client }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl AgentBackend for HttpBackend {
    fn call(&mut self, role: Role, request: &AgentRequest) -> Result<String, BackendError> {
        let body = json!({ "role": role.as_str(), "context": request }).to_string();
        let resp = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .body(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("{} answered {status}", self.url)));
        }
        resp.text().map_err(|e| BackendError::Transport(e.to_string()))
    }

    fn label(&self) -> String {
        format!("http:{}", self.url)
    }
}
