use serde::{Deserialize, Serialize};

use crate::aggregation::MainDamageSummary;
use crate::model::{ClassLabel, DamageClass, FailureCause, LocationClass};
use crate::rules::CauseSet;

/// Values per location group: the 11 damage classes plus "no cutter seen".
pub const VALUES_PER_LOCATION: usize = 12;
pub const FEATURE_DIM: usize = 4 * VALUES_PER_LOCATION;
const NONE_SLOT: usize = VALUES_PER_LOCATION - 1;

/// Binary feature vector. For bits, one-hot encoded main damage per
/// location; the tree learners accept any dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<bool>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }
}

pub fn feature_index(loc: LocationClass, value: Option<DamageClass>) -> usize {
    let group = LocationClass::PROFILE
        .iter()
        .position(|l| *l == loc)
        .unwrap_or_else(|| panic!("{loc} is not a profile location"));
    group * VALUES_PER_LOCATION + value.map_or(NONE_SLOT, |d| d.index())
}

pub fn feature_name(i: usize) -> String {
    let loc = LocationClass::PROFILE[i / VALUES_PER_LOCATION];
    let slot = i % VALUES_PER_LOCATION;
    let value = if slot == NONE_SLOT {
        "none"
    } else {
        DamageClass::ALL[slot].code()
    };
    format!("{}={}", loc.code(), value)
}

pub fn build_features(summary: &MainDamageSummary) -> FeatureVector {
    let mut v = vec![false; FEATURE_DIM];
    for loc in LocationClass::PROFILE {
        v[feature_index(loc, summary.get(loc))] = true;
    }
    FeatureVector(v)
}

/// One binary target per non-green cause, in `FailureCause::DAMAGE_CAUSES`
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector(pub [bool; 8]);

impl LabelVector {
    pub fn from_causes<'a>(causes: impl IntoIterator<Item = &'a FailureCause>) -> Self {
        let mut v = [false; 8];
        for c in causes {
            if let Some(i) = FailureCause::DAMAGE_CAUSES.iter().position(|x| x == c) {
                v[i] = true;
            }
        }
        LabelVector(v)
    }

    pub fn target(&self, t: usize) -> bool {
        self.0[t]
    }

    /// Empty label vectors become `{Green}`.
    pub fn to_cause_set(&self) -> CauseSet {
        CauseSet::from_causes(
            FailureCause::DAMAGE_CAUSES
                .iter()
                .zip(self.0)
                .filter(|(_, on)| *on)
                .map(|(c, _)| *c),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DamageClass as D;
    use LocationClass as L;

    fn hot(v: &FeatureVector) -> Vec<usize> {
        (0..v.dim()).filter(|&i| v.get(i)).collect()
    }

    #[test]
    fn empty_summary_sets_none_columns() {
        let v = build_features(&MainDamageSummary::default());
        assert_eq!(v.dim(), 48);
        assert_eq!(hot(&v), vec![11, 23, 35, 47]);
        assert!(hot(&v).iter().all(|&i| feature_name(i).ends_with("=none")));
    }

    #[test]
    fn nose_missing_others_green() {
        let s = MainDamageSummary {
            core: Some(D::Green),
            nose: Some(D::Missing),
            shoulder: Some(D::Green),
            gauge: Some(D::Green),
        };
        let v = build_features(&s);
        let expected: Vec<usize> = vec![
            feature_index(L::Core, Some(D::Green)),
            feature_index(L::Nose, Some(D::Missing)),
            feature_index(L::Shoulder, Some(D::Green)),
            feature_index(L::Gauge, Some(D::Green)),
        ];
        assert_eq!(hot(&v), expected);
        assert_eq!(feature_name(expected[1]), "N=H");
    }

    #[test]
    fn one_hot_per_group() {
        for d in D::ALL.iter().copied().map(Some).chain([None]) {
            let s = MainDamageSummary {
                core: d,
                nose: d,
                shoulder: None,
                gauge: d,
            };
            let v = build_features(&s);
            for g in 0..4 {
                let n = (g * 12..(g + 1) * 12).filter(|&i| v.get(i)).count();
                assert_eq!(n, 1);
            }
        }
    }

    #[test]
    fn labels_round_trip_through_cause_sets() {
        let l = LabelVector::from_causes(&[FailureCause::ThermalWear, FailureCause::Whirl]);
        assert_eq!(l.0, [false, true, false, false, false, false, false, true]);
        let set = l.to_cause_set();
        assert!(set.contains(FailureCause::ThermalWear) && set.contains(FailureCause::Whirl));
        assert!(LabelVector::from_causes(&[FailureCause::Green])
            .to_cause_set()
            .is_green());
    }
}
