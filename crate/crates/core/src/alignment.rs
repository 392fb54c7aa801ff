//! Fusion of the location and damage detection streams of one image.
//!
//! For every location detection, the damage detections whose box centers lie
//! strictly closer than `tau` are candidates, and the most confident
//! candidate is taken as that cutter's damage. A damage detection may be
//! picked by several location detections.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BitDetections, BoundingBox, ClassLabel, DamageClass, Detection, LocationClass};

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// Center-distance threshold, in normalized image units.
    pub tau: f64,
}

impl AlignmentConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidValue(format!("tau {tau} outside (0, 1)")));
        }
        Ok(AlignmentConfig { tau })
    }
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig { tau: DEFAULT_TAU }
    }
}

/// The damage picked for a cutter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageMatch {
    pub damage: DamageClass,
    pub confidence: f64,
    pub center_distance: f64,
    /// Index of the damage detection in the image's damage list.
    pub index: usize,
}

/// A located cutter with its damage, or `None` when no damage detection
/// was close enough.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedCutter {
    pub location: LocationClass,
    pub location_conf: f64,
    #[serde(rename = "match")]
    pub damage: Option<DamageMatch>,
}

impl AlignedCutter {
    pub fn is_matched(&self) -> bool {
        self.damage.is_some()
    }

    pub fn damage_class(&self) -> Option<DamageClass> {
        self.damage.map(|m| m.damage)
    }
}

pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    (a.cx - b.cx).hypot(a.cy - b.cy)
}

/// Candidate preference: higher confidence, then closer, then smaller
/// damage code. `Ordering::Less` means `a` is preferred.
fn prefer(a: &DamageMatch, b: &DamageMatch) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.center_distance.total_cmp(&b.center_distance))
        .then_with(|| a.damage.code().cmp(b.damage.code()))
}

/// Align one image. The result has one entry per location detection, in
/// input order.
pub fn align_image(
    loc: &[Detection<LocationClass>],
    dmg: &[Detection<DamageClass>],
    cfg: &AlignmentConfig,
) -> Vec<AlignedCutter> {
    loc.iter()
        .map(|l| {
            let best = dmg
                .iter()
                .enumerate()
                .filter_map(|(index, d)| {
                    let dist = center_distance(&l.bbox, &d.bbox);
                    (dist < cfg.tau).then_some(DamageMatch {
                        damage: d.label,
                        confidence: d.confidence,
                        center_distance: dist,
                        index,
                    })
                })
                .min_by(prefer);
            AlignedCutter {
                location: l.label,
                location_conf: l.confidence,
                damage: best,
            }
        })
        .collect()
}

/// Align every image of a bit, keyed by image id in manifest order.
pub fn align_bit(bit: &BitDetections, cfg: &AlignmentConfig) -> Vec<(String, Vec<AlignedCutter>)> {
    bit.pairs()
        .map(|(l, d)| {
            (
                l.image_id.clone(),
                align_image(&l.detections, &d.detections, cfg),
            )
        })
        .collect()
}
