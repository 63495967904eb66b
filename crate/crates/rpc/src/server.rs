//! Policy side: runs any [`PolicyFactory`] behind the protocol.

use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use oevla_core::{CodecConfig, Proprio};
use oevla_sim::{Policy, PolicyError, PolicyFactory, PolicyResponse, StepObservation, SubtaskContext};

use crate::error::{Result, RpcError};
use crate::transport::Connection;
use crate::wire::{check_hello, decode_instruction, Message};

/// What one served connection did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionSummary {
    pub sequence_id: Option<String>,
    pub subtasks: usize,
    pub steps: usize,
    /// Errors the harness reported back.
    pub harness_errors: Vec<String>,
    /// The harness said bye (rather than just closing).
    pub clean: bool,
}

struct Served {
    session: Box<dyn Policy>,
    /// start_subtask failed; every step of this subtask answers with it.
    pending: Option<PolicyError>,
}

fn policy_error(e: &PolicyError) -> Message {
    Message::error(e.code(), e.to_string())
}

/// Serves one connection: hello, then resets and steps until bye or EOF.
pub fn serve_connection(
    factory: &dyn PolicyFactory,
    conn: &mut Connection,
    codec: &CodecConfig,
) -> Result<SessionSummary> {
    let hello = conn.recv()?;
    if let Err(e) = check_hello(&hello, codec) {
        let _ = conn.send(&Message::error(e.code(), e.to_string()));
        return Err(e);
    }
    conn.send(&Message::hello(codec))?;

    let mut summary = SessionSummary::default();
    let mut served: Option<Served> = None;
    loop {
        let msg = match conn.recv() {
            Ok(m) => m,
            Err(RpcError::Closed) => break,
            Err(e @ RpcError::Malformed(_)) => {
                conn.send(&Message::error(e.code(), e.to_string()))?;
                continue;
            }
            Err(e) => return Err(e),
        };
        match msg {
            Message::Reset {
                sequence_id,
                subtask_index,
                form,
                segments,
                task,
            } => {
                let (instruction, media) = match decode_instruction(form, &segments) {
                    Ok(v) => v,
                    Err(e) => {
                        conn.send(&Message::error(e.code(), e.to_string()))?;
                        continue;
                    }
                };
                if served.is_none() {
                    let session = match factory.session(&sequence_id) {
                        Ok(s) => s,
                        Err(e) => {
                            conn.send(&policy_error(&e))?;
                            return Err(RpcError::Peer {
                                code: e.code().into(),
                                message: e.to_string(),
                            });
                        }
                    };
                    served = Some(Served { session, pending: None });
                    summary.sequence_id = Some(sequence_id.clone());
                }
                let s = served.as_mut().expect("just set");
                let ctx = SubtaskContext {
                    sequence_id,
                    subtask_index,
                    instruction,
                    media,
                    privileged_task: task,
                };
                s.pending = s.session.start_subtask(&ctx).err();
                summary.subtasks += 1;
            }
            Message::Step {
                step_index,
                obs,
                proprio,
                state,
            } => {
                summary.steps += 1;
                let Some(s) = served.as_mut() else {
                    conn.send(&Message::error("unexpected_message", "step before any reset"))?;
                    continue;
                };
                if let Some(e) = &s.pending {
                    conn.send(&policy_error(e))?;
                    continue;
                }
                let img = match obs.decode() {
                    Ok((_, img)) => img,
                    Err(e) => {
                        conn.send(&Message::error(e.code(), e.to_string()))?;
                        continue;
                    }
                };
                let step = StepObservation {
                    step_index,
                    obs: Arc::new(img),
                    proprio: Proprio::from_array(&proprio).expect("seven values"),
                    privileged_state: state.map(|b| *b),
                };
                let reply = match s.session.act(&step) {
                    Ok(PolicyResponse::Chunk(c)) => Message::Act {
                        tokens: None,
                        chunk: Some(c.flatten()),
                    },
                    Ok(PolicyResponse::Tokens(t)) => Message::Act {
                        tokens: Some(t),
                        chunk: None,
                    },
                    Err(e) => policy_error(&e),
                };
                conn.send(&reply)?;
            }
            Message::Error { code, message } => {
                log::warn!("harness reported {code}: {message}");
                if let Some(s) = served.as_mut() {
                    s.session.report_error(&code, &message);
                }
                summary.harness_errors.push(code);
            }
            Message::Bye {} => {
                summary.clean = true;
                break;
            }
            other => {
                conn.send(&Message::error(
                    "unexpected_message",
                    format!("`{}` is not valid after hello", other.kind()),
                ))?;
            }
        }
    }
    if let Some(mut s) = served {
        s.session.finish();
    }
    Ok(summary)
}

/// Accepts connections and serves each on its own thread. Stops after
/// `max_connections` when given.
pub fn serve_listener(
    factory: &dyn PolicyFactory,
    listener: &TcpListener,
    codec: &CodecConfig,
    max_connections: Option<usize>,
) -> Result<()> {
    std::thread::scope(|scope| -> Result<()> {
        let mut accepted = 0;
        while max_connections.is_none_or(|m| accepted < m) {
            let (stream, peer) = listener.accept()?;
            accepted += 1;
            scope.spawn(move || {
                let r = Connection::tcp(stream, None).and_then(|mut c| serve_connection(factory, &mut c, codec));
                match r {
                    Ok(s) => log::info!("{peer}: {} subtasks, {} steps", s.subtasks, s.steps),
                    Err(e) => log::warn!("{peer}: {e}"),
                }
            });
        }
        Ok(())
    })
}

/// For a harness in listen mode: connect, serve one sequence, repeat until
/// the harness stops accepting.
pub fn serve_connect(factory: &dyn PolicyFactory, addr: &str, codec: &CodecConfig) -> Result<usize> {
    let mut served = 0;
    loop {
        let stream = match TcpStream::connect(addr) {
            Ok(s) => s,
            Err(e) if served > 0 => {
                log::info!("harness at {addr} gone ({e}); served {served} sessions");
                return Ok(served);
            }
            Err(e) => return Err(e.into()),
        };
        let mut conn = Connection::tcp(stream, None)?;
        match serve_connection(factory, &mut conn, codec) {
            Ok(_) => served += 1,
            // queued on a listener that closed before accepting us
            Err(RpcError::Closed | RpcError::Io(_)) if served > 0 => return Ok(served),
            Err(e) => return Err(e),
        }
    }
}

/// Serves a single session on this process's stdin/stdout.
pub fn serve_stdio(factory: &dyn PolicyFactory, codec: &CodecConfig) -> Result<SessionSummary> {
    let mut conn = Connection::stdio(None);
    serve_connection(factory, &mut conn, codec)
}
