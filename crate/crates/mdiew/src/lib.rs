//! Measurement-device-independent entanglement witnessing for two-qubit
//! states.
//!
//! The crate simulates a Bell-state-measurement scenario with trusted input
//! states, reconstructs probability tables from coincidence counts, and
//! certifies entanglement by semidefinite programming: the joint measurement
//! operators compatible with a table are recovered under a PSD constraint,
//! their partial transposes are split into positive and negative parts, and
//! the witness value is the negated total weight of the negative parts.
//! Dual multipliers of the same program yield reusable linear witness
//! coefficients that transfer to any other table taken with the same input
//! states.
//!
//! Modules:
//! - [`qlin`] — dense complex linear algebra and canonical two-qubit states;
//! - [`scenario`] — input sets, measurement models, correlations and counts;
//! - [`sdp`] — a small dense semidefinite solver with duality certificates;
//! - [`witness`] — the witness engine built on the three above;
//! - [`cli`] — the `mdiew` command-line front end.
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! blocks are compiled as doc-tests (see the `guide` module below).

pub mod cli;
pub mod qlin;
pub mod scenario;
pub mod sdp;
pub mod witness;

// Book chapters double as doc-tests so the guide can never drift from the
// API. `cargo test --doc` compiles and runs every snippet.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/states-and-operators.md")]
    mod states_and_operators {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/sdp-solver.md")]
    mod sdp_solver {}
    #[doc = include_str!("../../../book/src/witness.md")]
    mod witness {}
}
