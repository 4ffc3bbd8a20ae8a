#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod geometry;
pub mod param;
pub mod rng;
pub mod loss;
pub mod solver;
pub mod task;
pub mod linalg;
pub mod within_task;
pub mod meta_init;
pub mod meta_scale;
pub mod environments;
pub mod engine;
pub mod federated;
pub mod suite;
pub mod harness;
