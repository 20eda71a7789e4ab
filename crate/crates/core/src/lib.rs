//! Nonlinear consensus dynamics on weighted digraphs,
//!
//! ```text
//! dx_i/dt = sum_j w_ij * phi(x_j, x_i)
//! ```
//!
//! and their three equivalent readings under detailed balance `c_i w_ij = c_j w_ji`:
//!
//! * a gradient descent `dq/dt = -K(q) grad E(q)` in the charge variable `q = C x`,
//!   for every sum-separable energy `E(q) = sum_i c_i H(q_i / c_i)` with strictly
//!   convex `H` ([`gradient`]);
//! * a nonlinear RC circuit with one capacitor per node and one resistor per
//!   undirected edge, `K = B D_B B^T` ([`circuit`]);
//! * a state-dependent Markov master equation `dq/dt = -F(q)^T q` with
//!   `F = C^{-1} K` ([`markov`]).
//!
//! The [`integrator`] runs both the state form and the charge form so they can
//! be cross-checked, [`info`] evaluates the discrete Fisher information and the
//! dissipation identity `dE/dt = -J`, and [`scenario`] / [`report`] bundle named
//! experiments with a machine-readable verification report.

// `!(v > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod coupling;
pub mod energy;
pub mod error;
pub mod gradient;
pub mod graph;
pub mod info;
pub mod integrator;
pub mod markov;
pub mod numfmt;
pub mod report;
pub mod scenario;

pub use circuit::{
    export_netlist, kirchhoff_factorization, passivity_report, synthesize_conductances, Netlist,
    NetlistFormat, PassivityReport, PassivityVerdict, ResistorEdge,
};
pub use coupling::{check_coupling_axioms, ratio_phi_over_dh, CouplingFunction, Domain, OddFn, SeparableFn};
pub use energy::{CustomEnergy, EnergyFunction};
pub use error::{Error, Result};
pub use gradient::{verify_psd, GradientSystem, MetricMatrix, PsdCheck};
pub use graph::{
    build_laplacian, check_detailed_balance, incidence_matrix, is_strongly_connected,
    stationary_vector, Branch, IncidenceMatrix, LaplacianMatrix, StationaryVector, WeightedDigraph,
};
pub use info::{debruijn_residual, edge_density, fisher_information, log_mean, FisherReport};
pub use integrator::{simulate, step_rk4, Form, IntegratorConfig, TrajectoryRecord};
pub use markov::{divergence_to_equilibrium, invariant_distribution, to_generator, GeneratorMatrix};
pub use report::{run_scenario, run_suite, verify_scenario, RunOptions, ScenarioRun, Status, SuiteEntry, Verdict, VerificationReport};
pub use scenario::{builtin_scenarios, Expectation, FormChoice, NetlistChoice, Scenario};
