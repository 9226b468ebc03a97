//! Live session service: a browser or any other client streams cursor
//! samples in place of the simulated human and receives posterior and robot
//! state frames back. See `PROTOCOL.md` at the repository root.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMsg, Command, ServerMsg, StateFrame, PROTOCOL_VERSION};
pub use server::Server;
pub use session::{replay, Input, LiveParams, Session};
