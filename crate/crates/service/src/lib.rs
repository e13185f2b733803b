//! Session host for the twisting simulator: headless trace runs, the
//! metrics log, the websocket session and the command-line front end.

pub mod cli;
pub mod headless;
pub mod metrics;
pub mod protocol;
pub mod server;
pub mod session;
