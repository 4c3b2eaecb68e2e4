//! Command-line front end and WebSocket server for the teaching engine.

pub mod commands;
pub mod server;
