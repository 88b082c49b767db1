pub mod catalog;
pub mod autopilot;
pub mod config;
pub mod cues;
pub mod gateway;
pub mod interaction;
pub mod orchestrator;
pub mod robot;
pub mod runtime;
pub mod script;
pub mod telemetry;
pub mod time;
