//! Console-facing side of a running session: the wire protocol, a reference
//! fold of the message stream into a view, and (with the `server` feature)
//! the WebSocket endpoint.

#[cfg(feature = "server")]
pub mod server;
pub mod view;
pub mod wire;
