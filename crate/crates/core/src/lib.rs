//! Inference chain for collapse-model force-noise tests on cryogenic cantilevers.
//!
//! The crate covers the full analysis pipeline of a layered-test-mass experiment:
//!
//! * [`mass`] — rigid mass distributions (cuboids, spheres, multilayer stacks)
//!   and their spatial Fourier transforms;
//! * [`csl`] — the CSL force-noise spectral density, evaluated both by
//!   numerical quadrature and by the closed-form multilayer expression;
//! * [`spectral`] — resonance/antiresonance fits of averaged flux-noise
//!   spectra with recursive re-weighting and leakage masking;
//! * [`thermal`] — B-vs-T/Q fits (linear and saturation models), the
//!   non-thermal noise floor and its Feldman-Cousins upper limit;
//! * [`exclusion`] — conversion of a force-noise limit into an exclusion
//!   curve on the collapse parameters, plus multilayer design scans;
//! * [`synth`] — deterministic synthetic spectra and thermal datasets with
//!   known ground truth;
//! * [`io`] — the delimited-text and JSON file formats shared with the CLI.
//!
//! Grid scans and Monte-Carlo loops run on a rayon worker pool when the
//! `parallel` feature (default) is enabled; results are keyed by grid index,
//! so the output never depends on scheduling order.

// Validation guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: the negation rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod csl;
pub mod exclusion;
pub mod io;
pub mod mass;
pub mod numerics;
pub mod parallel;
pub mod spectral;
pub mod synth;
pub mod thermal;
