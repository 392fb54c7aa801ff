//! Per-bit damage profiles and the main-damage importance policy.
//!
//! Damages are ranked (1) fractures, (2) missing / ringout, (3) thermal
//! wear, (4) smooth wear, (5) green. A location's main damage is the most
//! important damage present, unless a less important damage holds a strict
//! majority of the non-green cutters there.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::alignment::AlignedCutter;
use crate::model::{ClassLabel, DamageClass, LocationClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TopRingout {
    #[serde(rename = "RO")]
    Ringout,
    #[serde(rename = "no_ro")]
    NoRingout,
    #[serde(rename = "absent")]
    Absent,
}

/// Location x damage counts for one bit.
///
/// Cutters located as `Top` are the whole-bit top view; they only set
/// `top_ringout` and are not counted as cutters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitDamageProfile {
    pub bit_id: String,
    pub num_main_blades: u32,
    #[serde(serialize_with = "ser_counts", deserialize_with = "de_counts")]
    pub counts: BTreeMap<(LocationClass, DamageClass), u32>,
    pub total_detected: u32,
    pub unmatched: u32,
    pub top_ringout: TopRingout,
}

fn ser_counts<S: Serializer>(
    counts: &BTreeMap<(LocationClass, DamageClass), u32>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(
        counts
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|((l, d), n)| (format!("{}/{}", l.code(), d.code()), n)),
    )
}

fn de_counts<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<BTreeMap<(LocationClass, DamageClass), u32>, D::Error> {
    let raw = BTreeMap::<String, u32>::deserialize(d)?;
    let mut out = BTreeMap::new();
    for (k, n) in raw {
        let (l, dmg) = k
            .split_once('/')
            .ok_or_else(|| D::Error::custom(format!("count key `{k}` is not `loc/damage`")))?;
        let l = LocationClass::from_code(l).map_err(D::Error::custom)?;
        let dmg = DamageClass::from_code(dmg).map_err(D::Error::custom)?;
        out.insert((l, dmg), n);
    }
    Ok(out)
}

impl BitDamageProfile {
    pub fn new(bit_id: impl Into<String>, num_main_blades: u32) -> Self {
        BitDamageProfile {
            bit_id: bit_id.into(),
            num_main_blades,
            counts: BTreeMap::new(),
            total_detected: 0,
            unmatched: 0,
            top_ringout: TopRingout::Absent,
        }
    }

    /// Record `n` matched cutters. `Top` locations update `top_ringout`
    /// instead of the counts.
    pub fn add(&mut self, loc: LocationClass, dmg: DamageClass, n: u32) -> &mut Self {
        if n == 0 {
            return self;
        }
        if loc == LocationClass::Top {
            self.observe_top(Some(dmg));
            return self;
        }
        *self.counts.entry((loc, dmg)).or_insert(0) += n;
        self.total_detected += n;
        self
    }

    pub fn add_unmatched(&mut self, n: u32) -> &mut Self {
        self.unmatched += n;
        self.total_detected += n;
        self
    }

    pub fn with(mut self, loc: LocationClass, dmg: DamageClass, n: u32) -> Self {
        self.add(loc, dmg, n);
        self
    }

    pub fn with_top(mut self, top: TopRingout) -> Self {
        self.top_ringout = top;
        self
    }

    fn observe_top(&mut self, dmg: Option<DamageClass>) {
        self.top_ringout = match (self.top_ringout, dmg) {
            (_, Some(DamageClass::RingoutTop)) | (TopRingout::Ringout, _) => TopRingout::Ringout,
            (_, Some(DamageClass::NoRingoutTop)) => TopRingout::NoRingout,
            (prev, _) => prev,
        };
    }

    pub fn count(&self, loc: LocationClass, dmg: DamageClass) -> u32 {
        self.counts.get(&(loc, dmg)).copied().unwrap_or(0)
    }

    /// Damage count summed over every location.
    pub fn damage_total(&self, dmg: DamageClass) -> u32 {
        self.counts
            .iter()
            .filter(|((_, d), _)| *d == dmg)
            .map(|(_, n)| n)
            .sum()
    }

    /// Matched cutters at a location.
    pub fn location_total(&self, loc: LocationClass) -> u32 {
        self.counts
            .iter()
            .filter(|((l, _), _)| *l == loc)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn thermal(&self, loc: LocationClass) -> u32 {
        self.count(loc, DamageClass::LowThermal) + self.count(loc, DamageClass::MediumThermal)
    }

    pub fn thermal_total(&self) -> u32 {
        self.damage_total(DamageClass::LowThermal) + self.damage_total(DamageClass::MediumThermal)
    }

    pub fn heavy(&self, loc: LocationClass) -> u32 {
        self.count(loc, DamageClass::Missing)
    }

    pub fn heavy_total(&self) -> u32 {
        self.damage_total(DamageClass::Missing)
    }

    /// Damage multiset at one location.
    pub fn damages_at(&self, loc: LocationClass) -> DamageCounts {
        let mut c = DamageCounts::default();
        for ((l, d), n) in &self.counts {
            if *l == loc {
                c.0[d.index()] += n;
            }
        }
        c
    }
}

/// Accumulate aligned cutters of one bit into a profile.
pub fn build_profile<'a, I>(aligned: I, bit_id: &str, num_main_blades: u32) -> BitDamageProfile
where
    I: IntoIterator<Item = &'a (String, Vec<AlignedCutter>)>,
{
    let mut p = BitDamageProfile::new(bit_id, num_main_blades);
    for (_image, cutters) in aligned {
        for c in cutters {
            match (c.location, c.damage_class()) {
                (LocationClass::Top, d) => p.observe_top(d),
                (loc, Some(d)) => {
                    p.add(loc, d, 1);
                }
                (_, None) => {
                    p.add_unmatched(1);
                }
            }
        }
    }
    p
}

/// Importance rank of a damage class; lower is more important.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DamageRank {
    Fracture = 1,
    Missing = 2,
    Thermal = 3,
    Smooth = 4,
    Green = 5,
}

impl DamageRank {
    pub fn of(d: DamageClass) -> Self {
        use DamageClass::*;
        match d {
            NormalFracture | TangentialFracture | GreenWithTFLine => DamageRank::Fracture,
            Missing | RingoutTop | ShoulderRODamage => DamageRank::Missing,
            LowThermal | MediumThermal => DamageRank::Thermal,
            SmoothWear => DamageRank::Smooth,
            Green | NoRingoutTop => DamageRank::Green,
        }
    }

    pub fn value(self) -> u8 {
        self as u8
    }
}

/// Multiset of damage classes, indexed by `DamageClass::index`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DamageCounts(pub [u32; 11]);

impl DamageCounts {
    pub fn get(&self, d: DamageClass) -> u32 {
        self.0[d.index()]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl FromIterator<DamageClass> for DamageCounts {
    fn from_iter<T: IntoIterator<Item = DamageClass>>(iter: T) -> Self {
        let mut c = DamageCounts::default();
        for d in iter {
            c.0[d.index()] += 1;
        }
        c
    }
}

/// Main damage of a multiset of cutter damages.
///
/// Green and `no_ro` are not damages: they are excluded from the majority
/// base and never returned unless nothing else is present, in which case
/// the result is `G_G`. An empty multiset has no main damage.
pub fn main_damage(counts: &DamageCounts) -> Option<DamageClass> {
    if counts.total() == 0 {
        return None;
    }
    let damaged: Vec<(DamageClass, u32)> = DamageClass::ALL
        .iter()
        .map(|&d| (d, counts.get(d)))
        .filter(|&(d, n)| n > 0 && DamageRank::of(d) != DamageRank::Green)
        .collect();
    if damaged.is_empty() {
        return Some(DamageClass::Green);
    }
    let base: u32 = damaged.iter().map(|(_, n)| n).sum();
    let best = damaged
        .iter()
        .map(|(d, _)| DamageRank::of(*d))
        .min()
        .expect("non-empty");
    if let Some(&(d, _)) = damaged
        .iter()
        .find(|&&(d, n)| DamageRank::of(d) > best && 2 * n > base)
    {
        return Some(d);
    }
    damaged
        .iter()
        .filter(|(d, _)| DamageRank::of(*d) == best)
        .min_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.code().cmp(b.0.code())))
        .map(|(d, _)| *d)
}

/// Main damage per radial location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MainDamageSummary {
    pub core: Option<DamageClass>,
    pub nose: Option<DamageClass>,
    pub shoulder: Option<DamageClass>,
    pub gauge: Option<DamageClass>,
}

impl MainDamageSummary {
    /// Panics for `Top` and `ShoulderRO`, which carry no main damage.
    pub fn get(&self, loc: LocationClass) -> Option<DamageClass> {
        match loc {
            LocationClass::Core => self.core,
            LocationClass::Nose => self.nose,
            LocationClass::Shoulder => self.shoulder,
            LocationClass::Gauge => self.gauge,
            other => panic!("{other} has no main damage"),
        }
    }

    pub fn set(&mut self, loc: LocationClass, d: Option<DamageClass>) {
        match loc {
            LocationClass::Core => self.core = d,
            LocationClass::Nose => self.nose = d,
            LocationClass::Shoulder => self.shoulder = d,
            LocationClass::Gauge => self.gauge = d,
            other => panic!("{other} has no main damage"),
        }
    }
}

pub fn summarize_bit(profile: &BitDamageProfile) -> MainDamageSummary {
    let mut s = MainDamageSummary::default();
    for loc in LocationClass::PROFILE {
        s.set(loc, main_damage(&profile.damages_at(loc)));
    }
    s
}
