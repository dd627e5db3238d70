// `!(x > 0.0)` style guards are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod interp;
pub mod models;
pub mod quad;
pub mod riccati;
pub mod jacobi;
pub mod sc_gate;
pub mod convexity;
pub mod rotsym;
pub mod angular;
pub mod dirichlet;
pub mod cli;
