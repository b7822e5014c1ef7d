//! Birkhoffian formulation of nonlinear LC circuits: netlist parsing, Kirchhoff
//! topology, configuration space, regularity and conservativeness analysis,
//! reduction of degenerate loops, and trajectory integration.

pub mod birkhoff;
pub mod config;
pub mod exact;
pub mod functions;
pub mod graph;
pub mod netlist;
pub mod pipeline;
pub mod quad;
pub mod reduce;
pub mod sim;
