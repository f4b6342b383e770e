//! Frenet-apparatus analysis, generalized AW(k)-type classification and curve
//! synthesis for unit-speed curves in Euclidean n-space.

// NaN-rejecting guards are written as `!(x > 0.0)`; jet convolutions index by order.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod jet;
pub mod expr;
pub mod frenet;
pub mod synthesis;
pub mod normal_parts;
pub mod classifier;
pub mod verification;
pub mod cli;
