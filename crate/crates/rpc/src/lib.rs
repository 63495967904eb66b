//! `oe-vla-rpc/1`: evaluate policies that live in another process.
//!
//! Messages are JSON objects, one per line, over TCP or a child's
//! stdin/stdout. The harness side is [`RemoteFactory`]; [`serve_connection`]
//! and friends put any [`oevla_sim::PolicyFactory`] on the other end. The
//! full schema is in `PROTOCOL.md` at the repository root.

pub mod client;
pub mod error;
pub mod server;
pub mod transport;
pub mod wire;

pub use client::{RemoteFactory, RemoteSession};
pub use error::{Result, RpcError};
pub use server::{serve_connect, serve_connection, serve_listener, serve_stdio, SessionSummary};
pub use transport::{Connection, Endpoint, DEFAULT_TIMEOUT};
pub use wire::{Message, WireImage, WireSegment, PROTOCOL_VERSION};
