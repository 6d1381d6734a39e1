//! Blocking HTTP transport backing the `fetch` command.

use std::time::Duration;

use adchain_core::fetch::{Transport, TransportError, TransportResponse};
use anyhow::Result;

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    /// Build a client honoring the configured timeout and user agent.
    /// Proxies come from the standard `http_proxy`/`https_proxy`
    /// environment variables (reqwest reads them by default); an explicit
    /// `ADCHAIN_PROXY` overrides both.
    pub fn new(timeout: Duration, user_agent: &str) -> Result<Self> {
        let mut builder = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(user_agent);
        if let Ok(proxy) = std::env::var("ADCHAIN_PROXY") {
            builder = builder.proxy(reqwest::Proxy::all(&proxy)?);
        }
        Ok(HttpTransport {
            client: builder.build()?,
        })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, TransportError> {
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        };
        let response = self.client.get(url).send().map_err(map_err)?;
        let status_code = response.status().as_u16();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(String::from);
        let body = response.bytes().map_err(map_err)?.to_vec();
        Ok(TransportResponse {
            status_code,
            content_type,
            body,
        })
    }
}
