use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MarkerSpec, OracleQuery, SharedOracle, TokenProb, Verdict};
use crate::error::{Error, Result};

/// Sent verbatim; the server fills the placeholders from the request.
pub const PROMPT_TEMPLATE: &str =
    "Answer strictly yes or no: Is the {color}-colored {marker} on the object referred to by '{T}' in the picture?";
pub const VQA_PATH: &str = "/v1/point-vqa";
pub const VQA_URL_ENV: &str = "EPD_VQA_URL";

/// Fills [`PROMPT_TEMPLATE`] for a query, as a server would.
pub fn render_prompt(query: &OracleQuery) -> String {
    PROMPT_TEMPLATE
        .replace("{color}", &query.marker.color)
        .replace("{marker}", query.marker.shape.name())
        .replace("{T}", &query.expression)
}

#[derive(Serialize)]
struct WireRequest<'a> {
    image_uri: &'a str,
    expression: &'a str,
    point: [f64; 2],
    marker: &'a MarkerSpec,
    prompt_template: &'a str,
    top_k: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    tokens: Vec<TokenProb>,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// HTTP client for a point-VQA server. Clones share the in-flight limit.
#[derive(Debug, Clone)]
pub struct RemoteVqaClient {
    url: String,
    agent: ureq::Agent,
    limiter: Arc<Limiter>,
}

impl RemoteVqaClient {
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Result<Self> {
        if max_in_flight == 0 {
            return Err(Error::InvalidParameter(
                "max_in_flight must be at least 1".into(),
            ));
        }
        if timeout.is_zero() {
            return Err(Error::InvalidParameter("timeout must be positive".into()));
        }
        let endpoint = endpoint.trim_end_matches('/');
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(Error::InvalidParameter(format!(
                "endpoint {endpoint:?} is not an http(s) URL"
            )));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(Self {
            url: format!("{endpoint}{VQA_PATH}"),
            agent,
            limiter: Arc::new(Limiter {
                free: Mutex::new(max_in_flight),
                cv: Condvar::new(),
            }),
        })
    }

    /// Like [`new`](Self::new), but `EPD_VQA_URL` wins over `endpoint` when set.
    pub fn from_env_or(
        endpoint: Option<&str>,
        timeout: Duration,
        max_in_flight: usize,
    ) -> Result<Self> {
        match std::env::var(VQA_URL_ENV) {
            Ok(url) if !url.is_empty() => Self::new(&url, timeout, max_in_flight),
            _ => match endpoint {
                Some(e) => Self::new(e, timeout, max_in_flight),
                None => Err(Error::InvalidParameter(format!(
                    "no VQA endpoint configured and {VQA_URL_ENV} is unset"
                ))),
            },
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, query: &OracleQuery) -> std::result::Result<Verdict, String> {
        let body = WireRequest {
            image_uri: &query.image_ref,
            expression: &query.expression,
            point: [query.point.x, query.point.y],
            marker: &query.marker,
            prompt_template: PROMPT_TEMPLATE,
            top_k: query.top_k,
        };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| e.to_string())?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        parse_vqa_response(&text, query.top_k).map_err(|e| e.to_string())
    }
}

/// Decodes a response body into a verdict. More than `top_k` tokens counts
/// as a protocol violation.
pub fn parse_vqa_response(body: &str, top_k: usize) -> Result<Verdict> {
    let parsed: WireResponse = serde_json::from_str(body)
        .map_err(|e| Error::Protocol(format!("bad response body: {e}")))?;
    if parsed.tokens.len() > top_k {
        return Err(Error::Protocol(format!(
            "{} tokens returned for top_k={top_k}",
            parsed.tokens.len()
        )));
    }
    Verdict::from_tokens(parsed.tokens)
}

impl SharedOracle for RemoteVqaClient {
    /// One retry, then [`Error::OracleUnavailable`].
    fn query_shared(&self, query: &OracleQuery) -> Result<Verdict> {
        query.validate()?;
        let _permit = self.limiter.acquire();
        match self.attempt(query) {
            Ok(v) => Ok(v),
            Err(_) => self
                .attempt(query)
                .map_err(|e| Error::OracleUnavailable(format!("{}: {e}", self.url))),
        }
    }
}

impl super::Oracle for RemoteVqaClient {
    fn query(&mut self, query: &OracleQuery) -> Result<Verdict> {
        self.query_shared(query)
    }
}
