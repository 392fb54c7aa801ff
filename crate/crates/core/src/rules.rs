//! Rule-based failure-cause identification over a bit damage profile.
//!
//! Three rule groups are evaluated in order: wear (green, smooth, thermal),
//! ringouts (top-view ringout, core out, nose and shoulder ringout) and
//! fractures (stick-slip, axial, whirl). Each fired predicate maps to one
//! failure cause; a green bit suppresses every other cause.
//!
//! "Missing" and "heavily damaged" both refer to cutters whose damage is
//! `H`. Every threshold lives in [`RuleConfig`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aggregation::{BitDamageProfile, TopRingout};
use crate::error::{Error, Result};
use crate::model::{DamageClass as D, FailureCause, LocationClass as L};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Green cutters must exceed this fraction of all detected cutters.
    pub green_fraction: f64,
    pub nose_missing_min: u32,
    pub shoulder_missing_min: u32,
    /// Nose ringout when fewer non-missing cutters than this are detected.
    pub unmissing_max: u32,
    pub coreout_missing_min: u32,
    pub stickslip_core_count: u32,
    pub heavy_damage_min: u32,
    pub nose_shoulder_thermal_ratio: f64,
    pub shoulder_green_fraction: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            green_fraction: 0.80,
            nose_missing_min: 5,
            shoulder_missing_min: 5,
            unmissing_max: 10,
            coreout_missing_min: 1,
            stickslip_core_count: 2,
            heavy_damage_min: 2,
            nose_shoulder_thermal_ratio: 1.5,
            shoulder_green_fraction: 0.75,
        }
    }
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidValue(format!("{name} {v} outside (0, 1]")))
            }
        };
        frac("green_fraction", self.green_fraction)?;
        frac("shoulder_green_fraction", self.shoulder_green_fraction)?;
        if self.nose_shoulder_thermal_ratio <= 1.0 {
            return Err(Error::InvalidValue(format!(
                "nose_shoulder_thermal_ratio {} must exceed 1",
                self.nose_shoulder_thermal_ratio
            )));
        }
        for (name, v) in [
            ("nose_missing_min", self.nose_missing_min),
            ("shoulder_missing_min", self.shoulder_missing_min),
            ("unmissing_max", self.unmissing_max),
            ("coreout_missing_min", self.coreout_missing_min),
            ("stickslip_core_count", self.stickslip_core_count),
            ("heavy_damage_min", self.heavy_damage_min),
        ] {
            if v == 0 {
                return Err(Error::InvalidValue(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One evaluated predicate: whether it fired, which clauses fired, and the
/// counts it looked at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rule: String,
    pub fired: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clauses: Vec<String>,
    pub witness: BTreeMap<String, u32>,
}

impl TraceEntry {
    fn new(rule: &str) -> Self {
        TraceEntry {
            rule: rule.to_string(),
            fired: false,
            clauses: Vec::new(),
            witness: BTreeMap::new(),
        }
    }

    fn witness(mut self, name: &str, v: u32) -> Self {
        self.witness.insert(name.to_string(), v);
        self
    }

    fn clause(&mut self, holds: bool, description: &str) {
        if holds {
            self.fired = true;
            self.clauses.push(description.to_string());
        }
    }
}

/// Multi-label diagnosis with the trace that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseSet {
    pub causes: BTreeSet<FailureCause>,
    #[serde(default)]
    pub trace: Vec<TraceEntry>,
}

impl CauseSet {
    /// A trace-less set; an empty input becomes `{Green}`.
    pub fn from_causes(causes: impl IntoIterator<Item = FailureCause>) -> Self {
        let mut causes: BTreeSet<_> = causes.into_iter().collect();
        if causes.is_empty() {
            causes.insert(FailureCause::Green);
        }
        CauseSet {
            causes,
            trace: Vec::new(),
        }
    }

    pub fn contains(&self, c: FailureCause) -> bool {
        self.causes.contains(&c)
    }

    pub fn is_green(&self) -> bool {
        self.contains(FailureCause::Green)
    }

    pub fn fired(&self, rule: &str) -> Option<bool> {
        self.trace.iter().find(|t| t.rule == rule).map(|t| t.fired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WearPredicates {
    pub is_green: bool,
    pub is_smooth_wear: bool,
    pub is_thermal_wear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RingoutPredicates {
    pub is_ringout: bool,
    pub is_coreout: bool,
    pub is_nose_ringout: bool,
    pub is_shoulder_ringout: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FracturePredicates {
    pub is_stickslip: bool,
    pub is_axial: bool,
    pub is_whirl: bool,
}

fn total_green(p: &BitDamageProfile) -> u32 {
    p.damage_total(D::Green)
}

fn eval_green(p: &BitDamageProfile, cfg: &RuleConfig) -> TraceEntry {
    let green = total_green(p);
    let mut t = TraceEntry::new("isGreen")
        .witness("green", green)
        .witness("total_detected", p.total_detected);
    t.clause(
        green as f64 > cfg.green_fraction * p.total_detected as f64,
        "green cutters above green_fraction of all detected cutters",
    );
    t
}

fn eval_smooth(p: &BitDamageProfile) -> TraceEntry {
    let smooth = p.damage_total(D::SmoothWear);
    let thermal = p.thermal_total();
    let mut t = TraceEntry::new("isSmoothWear")
        .witness("smooth", smooth)
        .witness("thermal", thermal);
    t.clause(
        smooth > thermal,
        "more smooth-wear cutters than thermal-wear cutters",
    );
    t
}

fn eval_thermal(p: &BitDamageProfile) -> TraceEntry {
    let b = p.num_main_blades;
    let shoulder = p.thermal(L::Shoulder);
    let all = p.thermal_total();
    let mut t = TraceEntry::new("isThermalWear")
        .witness("thermal_shoulder", shoulder)
        .witness("thermal", all)
        .witness("main_blades", b);
    t.clause(
        shoulder > b,
        "shoulder thermal-wear cutters above the blade count",
    );
    t.clause(
        all > 2 * b,
        "thermal-wear cutters above twice the blade count",
    );
    t
}

fn eval_ringout(p: &BitDamageProfile) -> TraceEntry {
    let mut t = TraceEntry::new("isRingout")
        .witness("top_ro", u32::from(p.top_ringout == TopRingout::Ringout));
    t.clause(
        p.top_ringout == TopRingout::Ringout,
        "top view shows a ringout",
    );
    t
}

fn eval_coreout(p: &BitDamageProfile, cfg: &RuleConfig) -> TraceEntry {
    let heavy_core = p.heavy(L::Core);
    let mut t = TraceEntry::new("isCoreout").witness("heavy_core", heavy_core);
    t.clause(
        heavy_core > cfg.coreout_missing_min,
        "missing core cutters above coreout_missing_min",
    );
    t
}

fn shoulder_ro(p: &BitDamageProfile) -> u32 {
    p.count(L::ShoulderRO, D::ShoulderRODamage)
}

fn eval_nose_ringout(
    p: &BitDamageProfile,
    cfg: &RuleConfig,
    ringout: bool,
    coreout: bool,
) -> TraceEntry {
    let nose = p.heavy(L::Nose);
    let shoulder = p.heavy(L::Shoulder);
    let unmissing = p.total_detected.saturating_sub(p.heavy_total());
    let sro = shoulder_ro(p);
    let mut t = TraceEntry::new("isNoseRingout")
        .witness("heavy_nose", nose)
        .witness("heavy_shoulder", shoulder)
        .witness("unmissing", unmissing)
        .witness("shoulder_ro", sro);
    t.clause(
        nose > cfg.nose_missing_min,
        "missing nose cutters above nose_missing_min",
    );
    t.clause(
        unmissing < cfg.unmissing_max,
        "detected non-missing cutters below unmissing_max",
    );
    t.clause(sro >= 1, "Shoulder_RO damage at the Shoulder RO location");
    t.clause(
        ringout && nose > shoulder && !coreout && nose > cfg.heavy_damage_min,
        "top-view ringout with nose losses dominating and no core out",
    );
    t
}

fn eval_shoulder_ringout(
    p: &BitDamageProfile,
    cfg: &RuleConfig,
    ringout: bool,
    coreout: bool,
) -> TraceEntry {
    let nose = p.heavy(L::Nose);
    let shoulder = p.heavy(L::Shoulder);
    let sro = shoulder_ro(p);
    let mut t = TraceEntry::new("isShoulderRingout")
        .witness("heavy_nose", nose)
        .witness("heavy_shoulder", shoulder)
        .witness("shoulder_ro", sro);
    t.clause(
        shoulder > cfg.shoulder_missing_min,
        "missing shoulder cutters above shoulder_missing_min",
    );
    t.clause(sro >= 1, "Shoulder_RO damage at the Shoulder RO location");
    t.clause(
        ringout && shoulder > nose && !coreout && shoulder > cfg.heavy_damage_min,
        "top-view ringout with shoulder losses dominating and no core out",
    );
    t
}

fn eval_stickslip(p: &BitDamageProfile, cfg: &RuleConfig, r: &RingoutPredicates) -> TraceEntry {
    let heavy_core = p.heavy(L::Core);
    let mth_core = p.count(L::Core, D::MediumThermal);
    let gate = !r.is_nose_ringout && !r.is_coreout;
    let mut t = TraceEntry::new("isStickSlip")
        .witness("heavy_core", heavy_core)
        .witness("mth_core", mth_core);
    t.clause(
        gate && heavy_core == cfg.stickslip_core_count,
        "missing core cutters equal stickslip_core_count, no nose ringout or core out",
    );
    t.clause(
        gate && heavy_core + mth_core == cfg.stickslip_core_count,
        "heavy plus medium-thermal core cutters equal stickslip_core_count, no nose ringout or core out",
    );
    t
}

fn eval_axial(p: &BitDamageProfile, cfg: &RuleConfig, r: &RingoutPredicates) -> TraceEntry {
    let heavy = p.heavy_total();
    let nf = p.damage_total(D::NormalFracture);
    let mth_nose = p.count(L::Nose, D::MediumThermal);
    let mth_shoulder = p.count(L::Shoulder, D::MediumThermal);
    let green_shoulder = p.count(L::Shoulder, D::Green);
    let total_shoulder = p.location_total(L::Shoulder);
    let mut t = TraceEntry::new("isAxial")
        .witness("heavy", heavy)
        .witness("nf", nf)
        .witness("mth_nose", mth_nose)
        .witness("mth_shoulder", mth_shoulder)
        .witness("green_shoulder", green_shoulder)
        .witness("total_shoulder", total_shoulder);
    t.clause(
        heavy >= 1 && !r.is_nose_ringout && !r.is_coreout,
        "missing cutters present without nose ringout or core out",
    );
    t.clause(nf >= 1, "normal fracture present");
    t.clause(
        mth_nose >= 1
            && total_shoulder > 0
            && green_shoulder as f64 >= cfg.shoulder_green_fraction * total_shoulder as f64,
        "medium thermal wear on the nose with a mostly green shoulder",
    );
    t.clause(
        mth_nose as f64 > cfg.nose_shoulder_thermal_ratio * mth_shoulder as f64,
        "nose medium thermal wear above ratio x shoulder medium thermal wear",
    );
    t
}

fn eval_whirl(p: &BitDamageProfile, r: &RingoutPredicates) -> TraceEntry {
    let heavy_gauge = p.heavy(L::Gauge);
    let heavy_shoulder = p.heavy(L::Shoulder);
    let tf_nose = p.count(L::Nose, D::TangentialFracture) + p.count(L::Nose, D::GreenWithTFLine);
    let mut t = TraceEntry::new("isWhirl")
        .witness("heavy_gauge", heavy_gauge)
        .witness("heavy_shoulder", heavy_shoulder)
        .witness("tf_nose", tf_nose);
    t.clause(heavy_gauge >= 1, "heavily damaged gauge cutters");
    t.clause(
        heavy_shoulder >= 1 && !r.is_shoulder_ringout,
        "heavily damaged shoulder cutters without shoulder ringout",
    );
    t.clause(tf_nose >= 1, "tangential fracture on the nose");
    t
}

pub fn wear_predicates(p: &BitDamageProfile, cfg: &RuleConfig) -> WearPredicates {
    WearPredicates {
        is_green: eval_green(p, cfg).fired,
        is_smooth_wear: eval_smooth(p).fired,
        is_thermal_wear: eval_thermal(p).fired,
    }
}

fn ringout_entries(p: &BitDamageProfile, cfg: &RuleConfig) -> (RingoutPredicates, [TraceEntry; 4]) {
    let ringout = eval_ringout(p);
    let coreout = eval_coreout(p, cfg);
    let nose = eval_nose_ringout(p, cfg, ringout.fired, coreout.fired);
    let shoulder = eval_shoulder_ringout(p, cfg, ringout.fired, coreout.fired);
    let preds = RingoutPredicates {
        is_ringout: ringout.fired,
        is_coreout: coreout.fired,
        is_nose_ringout: nose.fired,
        is_shoulder_ringout: shoulder.fired,
    };
    (preds, [ringout, coreout, nose, shoulder])
}

pub fn ringout_predicates(p: &BitDamageProfile, cfg: &RuleConfig) -> RingoutPredicates {
    ringout_entries(p, cfg).0
}

/// `ringouts` must come from [`ringout_predicates`] on the same profile.
pub fn fracture_predicates(
    p: &BitDamageProfile,
    cfg: &RuleConfig,
    ringouts: &RingoutPredicates,
) -> FracturePredicates {
    FracturePredicates {
        is_stickslip: eval_stickslip(p, cfg, ringouts).fired,
        is_axial: eval_axial(p, cfg, ringouts).fired,
        is_whirl: eval_whirl(p, ringouts).fired,
    }
}

/// Rule names in evaluation order, with the cause each one maps to.
pub const RULES: [(&str, Option<FailureCause>); 10] = [
    ("isGreen", Some(FailureCause::Green)),
    ("isSmoothWear", Some(FailureCause::SmoothWear)),
    ("isThermalWear", Some(FailureCause::ThermalWear)),
    ("isRingout", None),
    ("isCoreout", Some(FailureCause::CoreOut)),
    ("isNoseRingout", Some(FailureCause::HardFormationTransition)),
    (
        "isShoulderRingout",
        Some(FailureCause::SoftFormationTransition),
    ),
    ("isStickSlip", Some(FailureCause::StickSlip)),
    ("isAxial", Some(FailureCause::Axial)),
    ("isWhirl", Some(FailureCause::Whirl)),
];

/// Evaluate every rule and collect the fired causes.
pub fn classify(p: &BitDamageProfile, cfg: &RuleConfig) -> CauseSet {
    let (ringouts, ringout_trace) = ringout_entries(p, cfg);
    let mut trace = vec![eval_green(p, cfg), eval_smooth(p), eval_thermal(p)];
    trace.extend(ringout_trace);
    trace.push(eval_stickslip(p, cfg, &ringouts));
    trace.push(eval_axial(p, cfg, &ringouts));
    trace.push(eval_whirl(p, &ringouts));

    let mut causes: BTreeSet<FailureCause> = trace
        .iter()
        .zip(RULES)
        .filter(|(t, _)| t.fired)
        .filter_map(|(_, (_, cause))| cause)
        .collect();
    if causes.contains(&FailureCause::Green) {
        causes = BTreeSet::from([FailureCause::Green]);
    }
    CauseSet { causes, trace }
}

/// Human-readable rendering of a trace.
pub fn explain(bit_id: &str, set: &CauseSet) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let names: Vec<_> = set.causes.iter().map(|c| c.display_name()).collect();
    let _ = writeln!(s, "bit {bit_id}: {}", names.join(", "));
    for t in &set.trace {
        let witness: Vec<_> = t.witness.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mark = if t.fired { "FIRED" } else { "-" };
        let _ = writeln!(s, "  {:<18} {:<5} [{}]", t.rule, mark, witness.join(" "));
        for c in &t.clauses {
            let _ = writeln!(s, "      because {c}");
        }
    }
    s
}
