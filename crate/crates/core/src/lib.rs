//! Defect-prediction guided test generation.
//!
//! The pipeline mines per-file revision, fix and new-author timestamps from
//! git ([`mining`]), turns them into time-weighted defect scores
//! ([`predict`]), splits a fixed test-generation budget across files by
//! score rank ([`allocate`]), and runs an external generator under those
//! budgets ([`orchestrate`]). [`simulate`] and [`stats`] compare allocation
//! strategies on synthetic projects.
//!
//! The numeric modules are generic over [`Scalar`]; the aliases below fix
//! the scalar to `f64`, which is what the file formats and the CLI use.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
pub mod config;
pub mod formats;
pub mod mining;
pub mod orchestrate;
pub mod predict;
pub mod scalar;
pub mod simulate;
pub mod stats;

pub use scalar::Scalar;

pub type SchwaParams = predict::SchwaParams<f64>;
pub type DefectScore = predict::DefectScore<f64>;
pub type TwrSums = predict::TwrSums<f64>;
pub type Prediction = predict::Prediction<f64>;
pub type BadsParams = allocate::BadsParams<f64>;
pub type TierParams = allocate::TierParams<f64>;
pub type ExpCurve = allocate::ExpCurve<f64>;
pub type AllocationEntry = allocate::AllocationEntry<f64>;
pub type AllocationPlan = allocate::AllocationPlan<f64>;
pub type ScheduledRun = allocate::ScheduledRun<f64>;

pub type DefectScoreF32 = predict::DefectScore<f32>;
pub type AllocationPlanF32 = allocate::AllocationPlan<f32>;
