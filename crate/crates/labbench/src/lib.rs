//! Network side of the simulated bench: a TCP bridge that serves the
//! instruments over a line protocol, a blocking client with instrument-level
//! verbs, and the sweep harness behind the `labbench` CLI.

pub mod client;
pub mod harness;
pub mod server;

pub use client::{BridgeSession, ClientError};
pub use harness::{run_reference, run_sweep, ExperimentConfig, HarnessError, LocalBench, Mode, RemoteBench};
pub use server::{spawn, spawn_local, Server, ServerHandle, ServerOptions};
