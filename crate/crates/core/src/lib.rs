//! Simulation and analysis toolkit for satellite ring QKD networks.
//!
//! * [`geometry`]: ring constellations, line of sight, visibility sessions.
//! * [`linkbudget`]: uplink and inter-satellite optical channel efficiencies.
//! * [`keyrate`]: finite-key sending-or-not-sending twin-field key lengths.
//! * [`relay`]: redundant XOR key forwarding and the GF(2) adversary oracle.
//! * [`simulator`]: daily and multi-day network key-yield campaigns.

pub mod geometry;
pub mod keyrate;
pub mod linkbudget;
mod numeric;
pub mod relay;
pub mod simulator;
