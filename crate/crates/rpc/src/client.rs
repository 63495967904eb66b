//! Harness side: a [`PolicyFactory`] whose sessions live across the wire.

use std::net::{SocketAddr, TcpListener};
use std::time::Duration;

use oevla_core::{ActionChunk, CodecConfig};
use oevla_sim::{Policy, PolicyError, PolicyFactory, PolicyResponse, StepObservation, SubtaskContext};

use crate::error::{Result, RpcError};
use crate::transport::{Connection, Endpoint, DEFAULT_TIMEOUT};
use crate::wire::{check_hello, encode_instruction, Message, WireImage};

pub struct RemoteFactory {
    endpoint: Endpoint,
    codec: CodecConfig,
    privileged: bool,
    timeout: Option<Duration>,
    listener: Option<TcpListener>,
}

impl RemoteFactory {
    /// For [`Endpoint::Listen`] the socket is bound here, so a bad address
    /// fails before any rollout.
    pub fn new(endpoint: Endpoint, codec: CodecConfig) -> Result<Self> {
        let listener = match &endpoint {
            Endpoint::Listen(addr) => Some(TcpListener::bind(addr)?),
            _ => None,
        };
        Ok(RemoteFactory {
            endpoint,
            codec,
            privileged: false,
            timeout: Some(DEFAULT_TIMEOUT),
            listener,
        })
    }

    /// Sends the ground-truth task and simulator state along with each
    /// message. Only for scripted policies behind the protocol.
    pub fn with_privileged(mut self, privileged: bool) -> Self {
        self.privileged = privileged;
        self
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.listener.as_ref().and_then(|l| l.local_addr().ok())
    }

    fn open(&self) -> Result<Connection> {
        match &self.endpoint {
            Endpoint::Connect(addr) => Connection::connect(addr, self.timeout),
            Endpoint::Stdio(cmd) => Connection::spawn(cmd, self.timeout),
            Endpoint::Listen(_) => {
                let (stream, _) = self.listener.as_ref().expect("bound in new").accept()?;
                Connection::tcp(stream, self.timeout)
            }
        }
    }

    /// Opens a connection and completes the hello exchange.
    pub fn handshake(&self) -> Result<Connection> {
        let mut conn = self.open()?;
        conn.send(&Message::hello(&self.codec))?;
        let reply = conn.recv()?;
        if let Err(e) = check_hello(&reply, &self.codec) {
            if !matches!(e, RpcError::Peer { .. }) {
                let _ = conn.send(&Message::error(e.code(), e.to_string()));
            }
            return Err(e);
        }
        Ok(conn)
    }
}

impl PolicyFactory for RemoteFactory {
    fn session(&self, _sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError> {
        let conn = self.handshake().map_err(PolicyError::from)?;
        Ok(Box::new(RemoteSession {
            conn,
            codec: self.codec,
            privileged: self.privileged,
            peer_error: false,
        }))
    }

    fn privileged(&self) -> bool {
        self.privileged
    }
}

pub struct RemoteSession {
    conn: Connection,
    codec: CodecConfig,
    privileged: bool,
    /// The last failure came from the peer; do not echo it back.
    peer_error: bool,
}

impl RemoteSession {
    fn exchange(&mut self, obs: &StepObservation) -> Result<PolicyResponse> {
        self.conn.send(&Message::Step {
            step_index: obs.step_index,
            obs: WireImage::encode(&obs.obs),
            proprio: obs.proprio.to_array(),
            state: if self.privileged {
                obs.privileged_state.clone().map(Box::new)
            } else {
                None
            },
        })?;
        match self.conn.recv()? {
            Message::Act {
                tokens: Some(t),
                chunk: None,
            } => Ok(PolicyResponse::Tokens(t)),
            Message::Act {
                tokens: None,
                chunk: Some(c),
            } => ActionChunk::from_flat(&c, &self.codec)
                .map(PolicyResponse::Chunk)
                // keep the codec's own code so logs match the in-process path
                .map_err(|e| RpcError::Peer {
                    code: e.code().into(),
                    message: e.to_string(),
                }),
            Message::Act { .. } => Err(RpcError::Malformed("act needs exactly one of tokens or chunk".into())),
            Message::Error { code, message } => {
                self.peer_error = true;
                Err(RpcError::Peer { code, message })
            }
            other => Err(RpcError::Unexpected {
                expected: "act or error",
                got: other.kind().into(),
            }),
        }
    }
}

impl Policy for RemoteSession {
    fn start_subtask(&mut self, ctx: &SubtaskContext) -> Result<(), PolicyError> {
        let segments = encode_instruction(&ctx.instruction, &ctx.media)?;
        self.conn.send(&Message::Reset {
            sequence_id: ctx.sequence_id.clone(),
            subtask_index: ctx.subtask_index,
            form: ctx.instruction.form,
            segments,
            task: if self.privileged { ctx.privileged_task } else { None },
        })?;
        Ok(())
    }

    fn act(&mut self, obs: &StepObservation) -> Result<PolicyResponse, PolicyError> {
        self.peer_error = false;
        Ok(self.exchange(obs)?)
    }

    fn report_error(&mut self, code: &str, message: &str) {
        if !self.peer_error && !self.conn.is_broken() {
            let _ = self.conn.send(&Message::error(code, message));
        }
    }

    fn finish(&mut self) {
        if !self.conn.is_broken() {
            let _ = self.conn.send(&Message::Bye {});
        }
    }
}
