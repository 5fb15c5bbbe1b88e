//! Policy backend that forwards each decision to a process listening on TCP.
//!
//! Request, one line: `{"type":"decide","variant":..,"prompt":..,"observation":<obs frame>}`.
//! Reply, one line: `{"text": "<action plan>"}`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use autocab_core::agents::{Policy, PolicyRequest, Variant};
use autocab_core::episode::AgentError;
use autocab_core::task::TaskInstance;
use serde::{Deserialize, Serialize};

use crate::protocol::ObsFrame;

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Serialize)]
struct DecideRequest<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    variant: Variant,
    prompt: &'a str,
    observation: ObsFrame,
}

#[derive(Deserialize)]
struct DecideReply {
    text: String,
}

pub struct ExternalPolicy {
    endpoint: String,
    timeout: Duration,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
}

impl ExternalPolicy {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        ExternalPolicy { endpoint: endpoint.into(), timeout, conn: None }
    }

    fn connection(&mut self) -> Result<&mut (BufReader<TcpStream>, TcpStream), AgentError> {
        if self.conn.is_none() {
            let fail = |e: std::io::Error| AgentError(format!("{}: {e}", self.endpoint));
            let stream = TcpStream::connect(&self.endpoint).map_err(fail)?;
            stream.set_read_timeout(Some(self.timeout)).map_err(fail)?;
            stream.set_write_timeout(Some(self.timeout)).map_err(fail)?;
            let reader = BufReader::new(stream.try_clone().map_err(fail)?);
            self.conn = Some((reader, stream));
        }
        Ok(self.conn.as_mut().expect("just connected"))
    }
}

impl Policy for ExternalPolicy {
    fn begin(&mut self, _inst: &TaskInstance) {
        // a fresh connection per episode
        self.conn = None;
    }

    fn decide(&mut self, req: &PolicyRequest<'_>) -> Result<String, AgentError> {
        let body = DecideRequest {
            kind: "decide",
            variant: req.variant,
            prompt: req.prompt,
            observation: ObsFrame::from_observation(req.observation),
        };
        let line = serde_json::to_string(&body).map_err(|e| AgentError(e.to_string()))?;
        let endpoint = self.endpoint.clone();
        let result = (|| {
            let (reader, stream) = self.connection()?;
            writeln!(stream, "{line}").and_then(|_| stream.flush()).map_err(|e| AgentError(format!("{endpoint}: {e}")))?;
            let mut reply = String::new();
            match reader.read_line(&mut reply) {
                Ok(0) => Err(AgentError(format!("{endpoint}: connection closed"))),
                Ok(_) => serde_json::from_str::<DecideReply>(&reply)
                    .map(|r| r.text)
                    .map_err(|e| AgentError(format!("{endpoint}: bad reply: {e}"))),
                Err(e) => Err(AgentError(format!("{endpoint}: {e}"))),
            }
        })();
        if result.is_err() {
            self.conn = None;
        }
        result
    }
}
