use std::collections::BTreeSet;

use bitforensics::aggregation::{main_damage, BitDamageProfile, DamageCounts};
use bitforensics::cause_eval::{default_included, multilabel_report, pipeline_tally};
use bitforensics::detect_eval::{average_precision, iou, match_boxes, ApInterp, ScoredPred};
use bitforensics::ml::{fit_tree, FeatureVector, TreeParams};
use bitforensics::rules::{CauseSet, RULES};
use bitforensics::{
    align_image, build_profile, center_distance, classify, AlignmentConfig, BoundingBox,
    ClassLabel, DamageClass as D, Detection, FailureCause as F, LocationClass as L, RuleConfig,
};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (0.05f64..0.3, 0.05f64..0.3).prop_flat_map(|(w, h)| {
        (w / 2.0..1.0 - w / 2.0, h / 2.0..1.0 - h / 2.0)
            .prop_map(move |(cx, cy)| BoundingBox::new(cx, cy, w, h).unwrap())
    })
}

fn damage() -> impl Strategy<Value = D> {
    (0..D::ALL.len()).prop_map(|i| D::ALL[i])
}

fn location() -> impl Strategy<Value = L> {
    (0..L::PROFILE.len()).prop_map(|i| L::PROFILE[i])
}

/// Clustered centres so candidates often fall inside the radius.
fn near_box() -> impl Strategy<Value = BoundingBox> {
    (0..20u32, 0..20u32).prop_map(|(i, j)| {
        BoundingBox::new(0.4 + 0.01 * i as f64, 0.4 + 0.01 * j as f64, 0.02, 0.02).unwrap()
    })
}

fn conf() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.3, 0.6, 0.9])
}

fn profile_counts() -> impl Strategy<Value = Vec<(L, D, u32)>> {
    prop::collection::vec((location(), damage(), 1u32..8), 0..12)
}

fn build(counts: &[(L, D, u32)]) -> BitDamageProfile {
    counts
        .iter()
        .fold(BitDamageProfile::new("p", 7), |p, &(l, d, n)| {
            p.with(l, d, n)
        })
}

proptest! {
    #[test]
    fn iou_bounded_and_symmetric(a in bbox(), b in bbox()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn alignment_matches_exhaustive_search(
        loc in prop::collection::vec((location(), near_box(), conf()), 0..10),
        dmg in prop::collection::vec((damage(), near_box(), conf()), 0..10),
    ) {
        let cfg = AlignmentConfig::default();
        let loc: Vec<_> = loc.into_iter().map(|(l, b, c)| Detection::new(l, b, c).unwrap()).collect();
        let dmg: Vec<_> = dmg.into_iter().map(|(d, b, c)| Detection::new(d, b, c).unwrap()).collect();
        let out = align_image(&loc, &dmg, &cfg);
        for (l, a) in loc.iter().zip(&out) {
            let mut best: Option<(usize, f64)> = None;
            for (i, d) in dmg.iter().enumerate() {
                let dist = center_distance(&l.bbox, &d.bbox);
                if dist >= cfg.tau {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((j, bd)) => {
                        let o = &dmg[j];
                        d.confidence > o.confidence
                            || (d.confidence == o.confidence
                                && (dist < bd || (dist == bd && d.label.code() < o.label.code())))
                    }
                };
                if better {
                    best = Some((i, dist));
                }
            }
            prop_assert_eq!(a.damage.map(|m| m.index), best.map(|b| b.0));
            prop_assert_eq!(a.location, l.label);
        }
    }

    #[test]
    fn matching_counts_balance(
        preds in prop::collection::vec((0.0f64..1.0, bbox()), 0..10),
        gts in prop::collection::vec(bbox(), 0..10),
        thr in 0.1f64..0.9,
    ) {
        let m = match_boxes(&preds, &gts, thr);
        prop_assert_eq!(m.tp() + m.fn_count(), gts.len());
        prop_assert_eq!(m.tp() + m.fp(), preds.len());
        let claimed: Vec<_> = m.pred_to_gt.iter().flatten().collect();
        let unique: BTreeSet<_> = claimed.iter().collect();
        prop_assert_eq!(claimed.len(), unique.len());
    }

    #[test]
    fn ap_in_unit_interval(
        flags in prop::collection::vec(any::<bool>(), 1..12),
        extra_gt in 0usize..5,
    ) {
        let scored: Vec<_> = flags
            .iter()
            .enumerate()
            .map(|(i, &tp)| ScoredPred { confidence: 1.0 / (i + 1) as f64, tp })
            .collect();
        let n_gt = flags.iter().filter(|f| **f).count() + extra_gt;
        for interp in [ApInterp::Continuous, ApInterp::ElevenPoint] {
            let ap = average_precision(&scored, n_gt, interp).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        }
    }

    /// A green cutter adds a damage cause only by lifting the sparse-bit
    /// nose ringout (which gates Axial and StickSlip) or by completing the
    /// green-shoulder Axial clause.
    #[test]
    fn adding_green_adds_causes_only_through_its_two_channels(
        counts in profile_counts(),
        loc in location(),
    ) {
        let cfg = RuleConfig::default();
        let p = build(&counts);
        let before = classify(&p, &cfg);
        let after = classify(&p.clone().with(loc, D::Green, 1), &cfg);
        let fired = |d: &CauseSet, rule: &str| d.trace.iter().any(|t| t.rule == rule && t.fired);
        let ringout_lifted = fired(&before, "isNoseRingout") && !fired(&after, "isNoseRingout");
        let green_shoulder = loc == L::Shoulder
            && after
                .trace
                .iter()
                .any(|t| t.rule == "isAxial" && t.clauses.iter().any(|c| c.contains("mostly green shoulder")));
        for c in after.causes.iter().filter(|c| **c != F::Green && !before.causes.contains(c)) {
            let explained = match c {
                F::Axial => ringout_lifted || green_shoulder,
                F::StickSlip => ringout_lifted,
                _ => false,
            };
            prop_assert!(explained, "green cutter added {:?}", c);
        }
    }

    #[test]
    fn heavy_gauge_keeps_whirl(counts in profile_counts()) {
        let cfg = RuleConfig::default();
        let p = build(&counts);
        if classify(&p, &cfg).contains(F::Whirl) {
            prop_assert!(classify(&p.with(L::Gauge, D::Missing, 1), &cfg).contains(F::Whirl));
        }
    }

    #[test]
    fn classify_depends_only_on_counts(counts in profile_counts()) {
        let cfg = RuleConfig::default();
        let mut reversed = counts.clone();
        reversed.reverse();
        let (a, b) = (classify(&build(&counts), &cfg), classify(&build(&reversed), &cfg));
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.trace.len(), RULES.len());
        if a.contains(F::Green) {
            prop_assert_eq!(a.causes.len(), 1);
        }
    }

    #[test]
    fn green_threshold_strict(n in 1u32..200) {
        // green = 0.8 n exactly needs n divisible by 5
        let n = n * 5;
        let green = n / 5 * 4;
        let p = BitDamageProfile::new("g", 7)
            .with(L::Gauge, D::Green, green)
            .with(L::Gauge, D::SmoothWear, n - green);
        prop_assert!(!classify(&p, &RuleConfig::default()).contains(F::Green));
    }

    #[test]
    fn aligned_order_does_not_change_profile(
        loc in prop::collection::vec((location(), near_box(), conf()), 0..10),
        dmg in prop::collection::vec((damage(), near_box(), conf()), 0..10),
    ) {
        let cfg = AlignmentConfig::default();
        let loc: Vec<_> = loc.into_iter().map(|(l, b, c)| Detection::new(l, b, c).unwrap()).collect();
        let dmg: Vec<_> = dmg.into_iter().map(|(d, b, c)| Detection::new(d, b, c).unwrap()).collect();
        let mut aligned = align_image(&loc, &dmg, &cfg);
        let a = build_profile(&[("i".to_string(), aligned.clone())], "b", 7);
        aligned.reverse();
        let b = build_profile(&[("i".to_string(), aligned)], "b", 7);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn main_damage_of_nonempty_is_present(counts in prop::collection::vec(0u32..6, 11)) {
        let c = DamageCounts(counts.clone().try_into().unwrap());
        match main_damage(&c) {
            None => prop_assert_eq!(c.total(), 0),
            Some(d) if c.get(d) == 0 => prop_assert_eq!(d, D::Green),
            Some(_) => {}
        }
    }

    #[test]
    fn tree_leaves_are_probabilities(
        rows in prop::collection::vec((prop::collection::vec(any::<bool>(), 4), any::<bool>()), 1..10),
    ) {
        let x: Vec<_> = rows.iter().map(|r| FeatureVector(r.0.clone())).collect();
        let y: Vec<_> = rows.iter().map(|r| r.1).collect();
        let t = fit_tree(&x, &y, TreeParams::default()).unwrap();
        prop_assert_eq!(&t, &fit_tree(&x, &y, TreeParams::default()).unwrap());
        for xi in &x {
            prop_assert!((0.0..=1.0).contains(&t.predict_proba(xi).unwrap()));
        }
    }

    #[test]
    fn confusion_cells_sum_to_bit_count(
        rows in prop::collection::vec((0u8..=255, 0u8..=255), 1..30),
    ) {
        let to_set = |m: u8| -> BTreeSet<F> {
            F::DAMAGE_CAUSES.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, c)| *c).collect()
        };
        let pred: Vec<_> = rows.iter().map(|r| to_set(r.0)).collect();
        let truth: Vec<_> = rows.iter().map(|r| to_set(r.1)).collect();
        let r = multilabel_report(&pred, &truth, &default_included()).unwrap();
        for m in &r.causes {
            prop_assert_eq!(m.tp + m.fp + m.fn_ + m.tn, rows.len());
            for v in [m.accuracy, m.precision, m.recall] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        let ids: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        let t = pipeline_tally(&ids, &pred, &truth).unwrap();
        prop_assert!(t.correctly_detected <= t.total_causes);
    }
}

#[test]
fn green_cutter_can_lift_sparse_nose_ringout() {
    let cfg = RuleConfig::default();
    let p = BitDamageProfile::new("p", 7)
        .with(L::Shoulder, D::Green, 3)
        .with(L::Nose, D::Missing, 1)
        .with(L::Core, D::LowThermal, 5)
        .with(L::Core, D::Green, 1);
    assert!(!classify(&p, &cfg).causes.contains(&F::Axial));
    assert!(classify(&p.with(L::Core, D::Green, 1), &cfg).causes.contains(&F::Axial));
}
