//! Drill-bit forensics from cutter detections.
//!
//! Two detectors label each photograph of a PDC drill bit: one with the
//! radial location of every main-blade cutter, one with every cutter's
//! damage. This crate fuses the two streams, aggregates a per-bit damage
//! profile, diagnoses multi-label failure causes with a rule engine or
//! tree-based baselines, and evaluates both the detections and the
//! diagnoses.
//!
//! Pipeline: [`ingest`] → [`alignment`] → [`aggregation`] → [`rules`] /
//! [`ml`] → [`detect_eval`] / [`cause_eval`].

pub mod aggregation;
pub mod alignment;
pub mod cause_eval;
pub mod detect_eval;
pub mod error;
pub mod ingest;
pub mod ml;
pub mod model;
pub mod rules;
pub mod synth;

pub use aggregation::{
    build_profile, main_damage, summarize_bit, BitDamageProfile, MainDamageSummary, TopRingout,
};
pub use alignment::{align_bit, align_image, center_distance, AlignedCutter, AlignmentConfig};
pub use error::{Error, Result};
pub use model::{
    BitDetections, BoundingBox, ClassKind, ClassLabel, DamageClass, Detection, FailureCause,
    ImageRecord, LocationClass, View,
};
pub use rules::{classify, CauseSet, RuleConfig};

/// Align, aggregate and profile one bit.
pub fn profile_bit(bit: &BitDetections, cfg: &AlignmentConfig) -> BitDamageProfile {
    let aligned = align_bit(bit, cfg);
    build_profile(&aligned, &bit.bit_id, bit.num_main_blades)
}
