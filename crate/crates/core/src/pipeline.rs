//! Netlist-to-system plumbing shared by the CLI and the tests.

use crate::birkhoff::{assemble, assemble_raw_at, AssembleError, BirkhoffSystem, EvalError};
use crate::config::{build_config, ConfigError, ConfigSpace};
use crate::graph::{
    build_incidence, build_loop_basis, classify_loops, GraphError, IncidenceMatrix,
    LoopClassification, LoopMatrix,
};
use crate::netlist::Circuit;
use crate::reduce::{
    conserved_quantities, reduce_capacitor_loops, reduce_inductor_loops_linear, ConservedQuantity,
    ReduceError, ReducedSystem,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub incidence: IncidenceMatrix,
    pub loops: LoopMatrix,
    pub classification: LoopClassification,
    pub config: ConfigSpace,
    pub system: BirkhoffSystem,
}

pub fn build(c: &Circuit, raw_at: bool) -> Result<Pipeline, PipelineError> {
    let incidence = build_incidence(c);
    let loops = build_loop_basis(c)?;
    let classification = classify_loops(c, &loops, &incidence);
    let config = build_config(c, &incidence, &loops)?;
    let system = if raw_at {
        assemble_raw_at(&config, c)?
    } else {
        assemble(&config, c)?
    };
    Ok(Pipeline {
        incidence,
        loops,
        classification,
        config,
        system,
    })
}

/// A system ready to integrate, with its initial state and monitored quantities.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub reduced: ReducedSystem,
    pub q0: Vec<f64>,
    pub qd0: Vec<f64>,
    pub conserved: Vec<ConservedQuantity>,
}

/// Removes capacitor loops, optionally integrates linear inductor loops, and fixes the initial state at t0.
pub fn prepare(
    sys: &BirkhoffSystem,
    t0: f64,
    reduce_inductor_loops: bool,
) -> Result<Prepared, PipelineError> {
    let mut reduced = reduce_capacitor_loops(sys)?;
    let mut q0 = reduced.inner.initial_coordinates();
    let mut qd0 = reduced.inner.initial_velocity(t0)?;
    if reduce_inductor_loops {
        reduced = reduce_inductor_loops_linear(reduced, t0, &q0, &qd0)?;
        q0 = reduced.inner.initial_coordinates();
        qd0 = reduced.inner.initial_velocity(t0)?;
    }
    let conserved = conserved_quantities(&reduced.inner, t0, &qd0);
    Ok(Prepared {
        reduced,
        q0,
        qd0,
        conserved,
    })
}
