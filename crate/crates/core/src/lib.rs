//! Pinning-control input selection for signed Kuramoto oscillator networks.
//!
//! A network of `n` oscillators evolves as
//!
//! ```text
//! dθ_i/dt = ω_i − Σ_{j ∈ N_in(i)} K_ji sin(θ_i − θ_j)
//! ```
//!
//! where the coupling weights `K_ji` may be negative. A set `S` of input
//! nodes is pinned to phase 0 with natural frequency 0. The crate builds the
//! edge-space coupling matrix `M(S) = D(S)ᵀ D̂(S) K(S)` and its symmetric part
//! `R(S)`, certifies synchronization through `λ_min(R(S))`, and selects a
//! small input set with a submodular surrogate of that eigenvalue.
//!
//! Modules:
//!
//! - [`graph`]: signed digraphs, incidence matrices, S-reduction, random ensembles
//! - [`spectral`]: `λ_min`, principal submatrices, heterogeneous thresholds
//! - [`select`]: submodular, greedy, random and exhaustive input selection
//! - [`feasibility`]: admissible initial phase differences and parity checks
//! - [`dynamics`]: RK4 simulation of the pinned network and its diagnostics
//! - [`experiments`]: seeded sweeps, summaries and CSV/JSON emission

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod feasibility;
pub mod graph;
pub mod seed;
pub mod select;
pub mod serde_f64;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Edge, GraphFile, GraphKind, InputSet, NaturalFrequencies, SignedDigraph};
pub use select::{Algorithm, QEstimatorConfig, SelectionResult};
pub use spectral::{Certificate, ReducedSystem, EPS_STRICT};
