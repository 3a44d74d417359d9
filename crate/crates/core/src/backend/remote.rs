//! HTTP client for a remotely hosted filter model.
//!
//! Protocol: `POST <endpoint>` with JSON body
//! `{"prompt": text, "max_tokens": int, "logprobs": int}`; reply
//! `{"tokens": [text], "logprobs": [{token: lp}]}` where `logprobs` is
//! optional and positional. One retry with backoff on transient transport
//! failures; timeouts and non-2xx replies are typed errors for the gateway's
//! failure policy to act on.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, BackendError, FilterRole, Generation};

/// Request body sent to the inference endpoint.
#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    logprobs: u32,
}

#[derive(Debug, Deserialize)]
struct WireReply {
    tokens: Vec<String>,
    #[serde(default)]
    logprobs: Option<Vec<BTreeMap<String, f64>>>,
}

/// Pause before the single retry; doubled if a second retry is ever added.
const RETRY_BACKOFF: Duration = Duration::from_millis(100);

/// Client for one remote filter endpoint. Holds only an agent (connection
/// pool), so it is freely shareable across threads.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    agent: ureq::Agent,
    endpoint: String,
    role: FilterRole,
}

impl RemoteClient {
    pub fn new(desc: &BackendDescriptor) -> Result<RemoteClient, BackendError> {
        desc.validate()?;
        let endpoint = desc
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Descriptor("remote backend requires an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(desc.timeout()))
            .build()
            .into();
        Ok(RemoteClient { agent, endpoint, role: desc.filter_role })
    }

    /// Send one rendered prompt and parse the reply into a [`Generation`].
    pub fn classify(&self, rendered_prompt: &str) -> Result<Generation, BackendError> {
        // Label-token counts per role: five category positions for content,
        // one binary position for jailbreak; candidates cover the label set.
        let (max_tokens, logprobs) = match self.role {
            FilterRole::Content => (5, 10),
            FilterRole::Jailbreak => (1, 2),
        };
        let body = WireRequest { prompt: rendered_prompt, max_tokens, logprobs };

        let reply = match self.send(&body) {
            Ok(reply) => reply,
            Err(BackendError::Transport(_)) => {
                std::thread::sleep(RETRY_BACKOFF);
                self.send(&body)?
            }
            Err(e) => return Err(e),
        };

        let generation = Generation { tokens: reply.tokens, logprobs: reply.logprobs };
        generation.validate()?;
        Ok(generation)
    }

    fn send(&self, body: &WireRequest<'_>) -> Result<WireReply, BackendError> {
        let mut response =
            self.agent.post(&self.endpoint).send_json(body).map_err(map_ureq_error)?;
        response
            .body_mut()
            .read_json::<WireReply>()
            .map_err(|e| BackendError::Schema(e.to_string()))
    }
}

fn map_ureq_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::StatusCode(code) => BackendError::HttpStatus(code),
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(io) => BackendError::Transport(io.to_string()),
        ureq::Error::HostNotFound => BackendError::Transport("host not found".into()),
        other => BackendError::Transport(other.to_string()),
    }
}
