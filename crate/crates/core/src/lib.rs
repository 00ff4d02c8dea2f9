//! Electromagnetic-transient simulation of a grid-following inverter.
//!
//! Controller, plant and grid-support equations are discretized with
//! trapezoidal companion models and solved together by Newton-Raphson at
//! every fixed step.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod controller;
pub mod frames;
pub mod grid_support;
pub mod network;
pub mod numerics;
pub mod parallel;
pub mod simulator;
