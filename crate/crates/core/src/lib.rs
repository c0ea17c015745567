//! Exact-arithmetic laboratory for Schmidt's (alpha, beta)-game.
//!
//! The crate builds Alice's winning strategies for badly approximable points
//! on non-degenerate planar curves, on straight lines and in the plane, and
//! ships brute-force Diophantine oracles that check the constructed points up
//! to a denominator cap.

pub mod dangerous_sets;
pub mod exact_arith;
pub mod game2d;
pub mod game_engine;
pub mod poly;
pub mod problem_model;
pub mod serial;
pub mod tree_strategy;
pub mod verifier;
