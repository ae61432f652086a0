//! Causal model auditing service.
//!
//! Wraps `causal-audit-core` with CSV ingestion, a cache-first LLM gateway,
//! persisted audit sessions, an HTTP API and the command-line driver.

pub mod cli;
pub mod gateway;
pub mod ingest;
pub mod server;
pub mod session;

pub use gateway::{Gateway, GatewayError};
pub use session::{create_session, AuditSession, SessionDir, SessionError, SessionOptions};
