//! Minimal JSON-over-HTTP transport used by the remote detector and the
//! remote relevance provider.

use std::time::Duration;

use crate::{Error, Result};

pub trait Transport: Send + Sync {
    /// POSTs a JSON body and returns the response body.
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<String>;
}

/// Blocking transport backed by `ureq`. Without the `remote` feature every
/// request fails with a backend error.
#[derive(Clone, Debug)]
pub struct HttpTransport {
    pub timeout: Duration,
}

impl Default for HttpTransport {
    fn default() -> Self {
        HttpTransport {
            timeout: Duration::from_secs(60),
        }
    }
}

#[cfg(feature = "remote")]
impl Transport for HttpTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("content-type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req
            .send(body)
            .map_err(|e| Error::Backend(format!("POST {url}: {e}")))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Backend(format!("reading response from {url}: {e}")))?;
        if !status.is_success() {
            return Err(Error::Backend(format!("POST {url}: HTTP {status}: {text}")));
        }
        Ok(text)
    }
}

#[cfg(not(feature = "remote"))]
impl Transport for HttpTransport {
    fn post_json(&self, url: &str, _headers: &[(String, String)], _body: &str) -> Result<String> {
        Err(Error::Backend(format!("built without the `remote` feature; cannot reach {url}")))
    }
}
