//! Adapter for a policy running as a child process.
//!
//! Protocol: one JSON object per line in each direction. For every decision
//! the engine writes
//!
//! ```text
//! {"format_version":1,"observation":{...}}
//! ```
//!
//! and expects exactly one line back holding an action, either bare or
//! wrapped:
//!
//! ```text
//! {"type":"navigate","location":3}
//! {"action":{"type":"ask","query":"color"}}
//! {"type":"get_memory","key":{"category":"mug"}}
//! {"type":"found","object":7}
//! ```
//!
//! A reply that does not parse, or does not arrive within the per-decision
//! time budget, is handed to the engine as a malformed action.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation};
use crate::policy::{Decision, Policy, PolicyError};

pub const WIRE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_timeout() -> f64 {
    10.0
}

#[derive(Serialize)]
struct Request<'a> {
    format_version: u32,
    observation: &'a Observation,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Response {
    Wrapped { action: Action },
    Bare(Action),
}

/// Parse one reply line.
pub fn parse_response(line: &str) -> Result<Action, String> {
    match serde_json::from_str::<Response>(line.trim()) {
        Ok(Response::Wrapped { action }) | Ok(Response::Bare(action)) => Ok(action),
        Err(e) => Err(format!("unparseable policy reply {:?}: {e}", truncate(line.trim(), 80))),
    }
}

pub fn encode_request(obs: &Observation) -> String {
    serde_json::to_string(&Request {
        format_version: WIRE_FORMAT_VERSION,
        observation: obs,
    })
    .expect("observation serializes")
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

pub struct ExternalPolicy {
    config: ExternalConfig,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ExternalPolicy {
    pub fn spawn(config: ExternalConfig) -> Result<Self, PolicyError> {
        if !(config.timeout_secs > 0.0) {
            return Err(PolicyError::Argument("timeout must be positive".into()));
        }
        let mut child = Command::new(&config.command)
            .args(&config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Channel(format!("cannot start {:?}: {e}", config.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            config,
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> String {
        format!("external:{}", self.config.command)
    }

    fn decide(&mut self, obs: &Observation, _rng: &mut ChaCha8Rng) -> Result<Decision, PolicyError> {
        // Discard late replies to earlier, timed-out requests.
        while self.lines.try_recv().is_ok() {}
        writeln!(self.stdin, "{}", encode_request(obs))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| PolicyError::Channel(format!("write to policy process: {e}")))?;
        match self.lines.recv_timeout(Duration::from_secs_f64(self.config.timeout_secs)) {
            Ok(Ok(line)) => Ok(match parse_response(&line) {
                Ok(a) => Decision::deterministic(a),
                Err(reason) => Decision::malformed(reason),
            }),
            Ok(Err(e)) => Err(PolicyError::Channel(format!("read from policy process: {e}"))),
            Err(RecvTimeoutError::Timeout) => Ok(Decision::malformed(format!(
                "no reply within {:.1} s",
                self.config.timeout_secs
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(PolicyError::Channel("policy process closed its output".into())),
        }
    }
}
