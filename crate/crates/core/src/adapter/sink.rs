//! Command delivery.
//!
//! Wire schema (one JSON object per command):
//! `{"type":"smile","onset_s":...,"duration_s":...,"params":{"MOUTH_SMILE_LEFT":...,
//! "MOUTH_SMILE_RIGHT":...,"BROW_UP_LEFT":...,"BROW_UP_RIGHT":...}}`
//!
//! The endpoint sink speaks minimal HTTP/1.1 POST over TCP with a 2 s
//! timeout and a single retry; commands that cannot be delivered are
//! preserved in a local spool file. One command is in flight at a time so
//! ordering is preserved.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{FacialParamFrame, SmileCommand};
use crate::error::{Error, Result};

/// Environment variable consulted for the default endpoint URL.
pub const AGENT_ENDPOINT_ENV: &str = "AGENT_ENDPOINT";

const ENDPOINT_TIMEOUT: Duration = Duration::from_secs(2);
const RETRIES: usize = 1;

#[derive(Debug, Serialize, Deserialize)]
struct WireCommand {
    #[serde(rename = "type")]
    kind: String,
    onset_s: f64,
    duration_s: f64,
    params: WireParams,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireParams {
    #[serde(rename = "MOUTH_SMILE_LEFT")]
    mouth_smile_left: f64,
    #[serde(rename = "MOUTH_SMILE_RIGHT")]
    mouth_smile_right: f64,
    #[serde(rename = "BROW_UP_LEFT")]
    brow_up_left: f64,
    #[serde(rename = "BROW_UP_RIGHT")]
    brow_up_right: f64,
}

pub fn command_to_json(cmd: &SmileCommand) -> Result<String> {
    let wire = WireCommand {
        kind: "smile".into(),
        onset_s: cmd.onset_s,
        duration_s: cmd.duration_s,
        params: WireParams {
            mouth_smile_left: cmd.params.mouth_smile_left,
            mouth_smile_right: cmd.params.mouth_smile_right,
            brow_up_left: cmd.params.brow_up_left,
            brow_up_right: cmd.params.brow_up_right,
        },
    };
    Ok(serde_json::to_string(&wire)?)
}

/// Parses the wire schema back into a command (the `neutral` flags are not
/// on the wire; they come back unset).
pub fn parse_command_json(text: &str) -> Result<SmileCommand> {
    let wire: WireCommand = serde_json::from_str(text)?;
    if wire.kind != "smile" {
        return Err(Error::invalid(format!("unknown command type `{}`", wire.kind)));
    }
    Ok(SmileCommand {
        params: FacialParamFrame {
            mouth_smile_left: wire.params.mouth_smile_left,
            mouth_smile_right: wire.params.mouth_smile_right,
            brow_up_left: wire.params.brow_up_left,
            brow_up_right: wire.params.brow_up_right,
        },
        duration_s: wire.duration_s,
        onset_s: wire.onset_s,
        neutral: [false; 4],
    })
}

/// Where commands go.
pub enum CommandSink {
    /// Appends one JSON object per line.
    File(PathBuf),
    /// POSTs each command; failures spool to `spool_path`.
    Endpoint { url: String, spool_path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmitAck {
    WrittenToFile,
    Delivered,
}

pub fn emit_command(cmd: &SmileCommand, sink: &CommandSink) -> Result<EmitAck> {
    for v in cmd.params.values() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("parameter {v} outside [0,1]")));
        }
    }
    if cmd.duration_s <= 0.0 {
        return Err(Error::invalid("command duration must be positive"));
    }
    let body = command_to_json(cmd)?;
    match sink {
        CommandSink::File(path) => {
            append_line(path, &body)?;
            Ok(EmitAck::WrittenToFile)
        }
        CommandSink::Endpoint { url, spool_path } => {
            let mut last_err = None;
            for _ in 0..=RETRIES {
                match http_post(url, &body) {
                    Ok(()) => return Ok(EmitAck::Delivered),
                    Err(e) => last_err = Some(e),
                }
            }
            // keep the command; the operator can replay the spool
            append_line(spool_path, &body)?;
            Err(Error::Endpoint(format!(
                "delivery to {url} failed after retry ({}); command spooled to {}",
                last_err.expect("at least one attempt"),
                spool_path.display()
            )))
        }
    }
}

fn append_line(path: &std::path::Path, line: &str) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path.display().to_string(), e))
}

/// Minimal HTTP/1.1 POST; accepts any 2xx status.
fn http_post(url: &str, body: &str) -> std::result::Result<(), String> {
    let (host_port, path) = parse_http_url(url)?;
    let stream = TcpStream::connect(&host_port).map_err(|e| format!("connect: {e}"))?;
    stream
        .set_read_timeout(Some(ENDPOINT_TIMEOUT))
        .and_then(|()| stream.set_write_timeout(Some(ENDPOINT_TIMEOUT)))
        .map_err(|e| format!("timeout setup: {e}"))?;
    let mut stream = stream;
    let request = format!(
        "POST {path} HTTP/1.1\r\nHost: {host_port}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream
        .write_all(request.as_bytes())
        .map_err(|e| format!("write: {e}"))?;
    let mut response = String::new();
    stream
        .take(8192)
        .read_to_string(&mut response)
        .map_err(|e| format!("read: {e}"))?;
    let status_line = response.lines().next().unwrap_or_default();
    let mut parts = status_line.split_whitespace();
    let _version = parts.next();
    let code: u16 = parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| format!("malformed status line `{status_line}`"))?;
    if (200..300).contains(&code) {
        Ok(())
    } else {
        Err(format!("endpoint returned status {code}"))
    }
}

fn parse_http_url(url: &str) -> std::result::Result<(String, String), String> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| format!("only http:// endpoints are supported, got `{url}`"))?;
    match rest.split_once('/') {
        Some((host, path)) => Ok((host.to_string(), format!("/{path}"))),
        None => Ok((rest.to_string(), "/".to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::stub::StubAgentServer;

    fn cmd() -> SmileCommand {
        SmileCommand {
            params: FacialParamFrame {
                mouth_smile_left: 0.75,
                mouth_smile_right: 0.8,
                brow_up_left: 0.3,
                brow_up_right: 0.25,
            },
            duration_s: 1.08,
            onset_s: 42.5,
            neutral: [false; 4],
        }
    }

    #[test]
    fn file_sink_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("commands.jsonl");
        let ack = emit_command(&cmd(), &CommandSink::File(path.clone())).unwrap();
        assert_eq!(ack, EmitAck::WrittenToFile);
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_command_json(text.trim()).unwrap();
        assert_eq!(parsed.params, cmd().params);
        assert_eq!(parsed.duration_s, cmd().duration_s);
        assert_eq!(parsed.onset_s, cmd().onset_s);
        // schema spot-check
        assert!(text.contains("\"MOUTH_SMILE_LEFT\""));
        assert!(text.contains("\"type\":\"smile\""));
    }

    #[test]
    fn stub_endpoint_receives_one_request_per_command() {
        let server = StubAgentServer::start().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sink = CommandSink::Endpoint {
            url: server.url(),
            spool_path: dir.path().join("spool.jsonl"),
        };
        for _ in 0..3 {
            assert_eq!(emit_command(&cmd(), &sink).unwrap(), EmitAck::Delivered);
        }
        assert_eq!(server.request_count(), 3);
        let bodies = server.bodies();
        assert_eq!(bodies.len(), 3);
        let parsed = parse_command_json(&bodies[0]).unwrap();
        assert_eq!(parsed.params, cmd().params);
        server.shutdown();
    }

    #[test]
    fn unreachable_endpoint_spools_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let spool = dir.path().join("spool.jsonl");
        let sink = CommandSink::Endpoint {
            // reserved port on localhost with nothing listening
            url: "http://127.0.0.1:9/agent".into(),
            spool_path: spool.clone(),
        };
        let err = emit_command(&cmd(), &sink).unwrap_err();
        assert!(matches!(err, Error::Endpoint(_)), "{err}");
        let text = std::fs::read_to_string(&spool).unwrap();
        let parsed = parse_command_json(text.trim()).unwrap();
        assert_eq!(parsed.params, cmd().params);
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        let mut bad = cmd();
        bad.params.brow_up_left = 1.5;
        let dir = tempfile::tempdir().unwrap();
        let sink = CommandSink::File(dir.path().join("c.jsonl"));
        assert!(emit_command(&bad, &sink).is_err());
    }
}
