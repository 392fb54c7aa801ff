//! Shared vocabulary: class taxonomies, normalized boxes, detections and
//! per-bit image records.
//!
//! The location and damage taxonomies both contain a "Shoulder RO" member.
//! They are separate types and are never converted into one another.

use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Which taxonomy a class code belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Location,
    Damage,
    Cause,
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassKind::Location => "location",
            ClassKind::Damage => "damage",
            ClassKind::Cause => "cause",
        })
    }
}

/// Common behaviour of the three closed class enums.
pub trait ClassLabel: Copy + Eq + Ord + Hash + fmt::Debug + Send + Sync + 'static {
    const KIND: ClassKind;
    /// Every member, in index order.
    const ALL: &'static [Self];

    fn code(self) -> &'static str;

    fn index(self) -> usize;

    /// Single-token form used in whitespace-separated files (spaces become
    /// underscores).
    fn token(self) -> String {
        self.code().replace(' ', "_")
    }

    fn from_token(token: &str) -> Result<Self> {
        Self::from_code(token).or_else(|err| {
            Self::ALL
                .iter()
                .copied()
                .find(|c| c.code().contains(' ') && c.token() == token)
                .ok_or(err)
        })
    }

    fn from_code(code: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.code() == code)
            .ok_or_else(|| Error::UnknownClass {
                code: code.to_string(),
                kind: Self::KIND,
                valid: Self::ALL
                    .iter()
                    .map(|c| c.code())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }
}

macro_rules! class_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:expr, {
            $( $(#[$vmeta:meta])* $variant:ident => $code:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl ClassLabel for $name {
            const KIND: ClassKind = $kind;
            const ALL: &'static [Self] = &[$( $name::$variant ),+];

            fn code(self) -> &'static str {
                match self {
                    $( $name::$variant => $code ),+
                }
            }

            fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl std::str::FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <Self as ClassLabel>::from_code(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.code())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

class_enum! {
    /// Radial position of a cutter on the bit, as annotated by the location
    /// detector.
    LocationClass, ClassKind::Location, {
        Core => "C",
        Nose => "N",
        Shoulder => "Sh",
        Gauge => "G",
        /// The whole-bit top view.
        Top => "top",
        /// Missing area spanning nose and shoulder.
        ShoulderRO => "Shoulder RO",
    }
}

class_enum! {
    /// Cutter condition, as annotated by the damage detector.
    DamageClass, ClassKind::Damage, {
        Green => "G_G",
        LowThermal => "L_Th",
        MediumThermal => "M_Th",
        /// Heavy damage: delamination or a missing cutter.
        Missing => "H",
        SmoothWear => "L_SW",
        NormalFracture => "NF",
        NoRingoutTop => "no_ro",
        RingoutTop => "RO",
        ShoulderRODamage => "Shoulder_RO",
        TangentialFracture => "TF",
        GreenWithTFLine => "G_TF",
    }
}

class_enum! {
    /// Failure cause labels. `Green` is the "(almost) no damage" sentinel.
    FailureCause, ClassKind::Cause, {
        SmoothWear => "smooth_wear",
        ThermalWear => "thermal_wear",
        /// Structural overload.
        CoreOut => "core_out",
        /// Soft-to-hard formation transition (nose ringout).
        HardFormationTransition => "hard_ft",
        /// Hard-to-soft formation transition (shoulder ringout).
        SoftFormationTransition => "soft_ft",
        StickSlip => "stick_slip",
        Axial => "axial",
        Whirl => "whirl",
        Green => "green",
    }
}

impl LocationClass {
    /// The four radial regions that carry a main damage.
    pub const PROFILE: [LocationClass; 4] = [
        LocationClass::Core,
        LocationClass::Nose,
        LocationClass::Shoulder,
        LocationClass::Gauge,
    ];
}

impl FailureCause {
    /// Every cause except the `Green` sentinel, in index order.
    pub const DAMAGE_CAUSES: [FailureCause; 8] = [
        FailureCause::SmoothWear,
        FailureCause::ThermalWear,
        FailureCause::CoreOut,
        FailureCause::HardFormationTransition,
        FailureCause::SoftFormationTransition,
        FailureCause::StickSlip,
        FailureCause::Axial,
        FailureCause::Whirl,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            FailureCause::SmoothWear => "Smooth Wear",
            FailureCause::ThermalWear => "Thermal Wear",
            FailureCause::CoreOut => "Core out",
            FailureCause::HardFormationTransition => "Hard Formation transition",
            FailureCause::SoftFormationTransition => "Soft Formation transition",
            FailureCause::StickSlip => "stick-slip",
            FailureCause::Axial => "Axial",
            FailureCause::Whirl => "Whirl",
            FailureCause::Green => "Green",
        }
    }
}

/// A member of any of the three taxonomies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassValue {
    Location(LocationClass),
    Damage(DamageClass),
    Cause(FailureCause),
}

impl ClassValue {
    pub fn code(self) -> &'static str {
        match self {
            ClassValue::Location(c) => c.code(),
            ClassValue::Damage(c) => c.code(),
            ClassValue::Cause(c) => c.code(),
        }
    }
}

/// Parse a class code of the given taxonomy. Matching is exact and
/// case-sensitive.
pub fn parse_class(code: &str, kind: ClassKind) -> Result<ClassValue> {
    if code.is_empty() {
        return Err(Error::InvalidValue(format!("empty {kind} class code")));
    }
    Ok(match kind {
        ClassKind::Location => ClassValue::Location(LocationClass::from_code(code)?),
        ClassKind::Damage => ClassValue::Damage(DamageClass::from_code(code)?),
        ClassKind::Cause => ClassValue::Cause(FailureCause::from_code(code)?),
    })
}

/// Axis-aligned box in normalized center/size form. All values are
/// fractions of the image width or height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let positive_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(cx) {
            return Err(Error::InvalidValue(format!("cx {cx} outside [0, 1]")));
        }
        if !in_unit(cy) {
            return Err(Error::InvalidValue(format!("cy {cy} outside [0, 1]")));
        }
        if !positive_unit(w) {
            return Err(Error::InvalidValue(format!("w {w} outside (0, 1]")));
        }
        if !positive_unit(h) {
            return Err(Error::InvalidValue(format!("h {h} outside (0, 1]")));
        }
        Ok(BoundingBox { cx, cy, w, h })
    }

    /// Corner form `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            cx: f64,
            cy: f64,
            w: f64,
            h: f64,
        }
        let r = Raw::deserialize(d)?;
        BoundingBox::new(r.cx, r.cy, r.w, r.h).map_err(serde::de::Error::custom)
    }
}

/// One detector output (or one ground-truth box, with confidence 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "C: Deserialize<'de>"))]
pub struct Detection<C> {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: C,
    pub confidence: f64,
}

impl<C: ClassLabel> Detection<C> {
    pub fn new(label: C, bbox: BoundingBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidValue(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Detection {
            bbox,
            label,
            confidence,
        })
    }
}

/// Which photograph of the bit an image is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum View {
    Top,
    /// Side view, numbered from 1.
    Side(u32),
}

impl Serialize for View {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            View::Top => s.serialize_str("top"),
            View::Side(i) => s.serialize_str(&format!("side{i}")),
        }
    }
}

/// All detections of one stream in one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord<C> {
    pub image_id: String,
    pub view: View,
    pub detections: Vec<Detection<C>>,
}

impl<C: ClassLabel> ImageRecord<C> {
    pub fn new(
        image_id: impl Into<String>,
        view: View,
        detections: Vec<Detection<C>>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(Error::InvalidValue("empty image_id".into()));
        }
        if view == View::Side(0) {
            return Err(Error::InvalidValue(format!(
                "image `{image_id}`: side index must be >= 1"
            )));
        }
        Ok(ImageRecord {
            image_id,
            view,
            detections,
        })
    }
}

pub const DEFAULT_MAIN_BLADES: u32 = 7;

/// Both detection streams for every photograph of one bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitDetections {
    pub bit_id: String,
    pub num_main_blades: u32,
    pub location_images: Vec<ImageRecord<LocationClass>>,
    pub damage_images: Vec<ImageRecord<DamageClass>>,
}

impl BitDetections {
    /// Validates that the two streams pair one-to-one by image id (in the
    /// same order) and that each stream has at most one top view.
    pub fn new(
        bit_id: impl Into<String>,
        num_main_blades: u32,
        location_images: Vec<ImageRecord<LocationClass>>,
        damage_images: Vec<ImageRecord<DamageClass>>,
    ) -> Result<Self> {
        let bit_id = bit_id.into();
        if bit_id.is_empty() {
            return Err(Error::InvalidValue("empty bit_id".into()));
        }
        if num_main_blades == 0 {
            return Err(Error::InvalidValue(
                "num_main_blades must be positive".into(),
            ));
        }
        if location_images.len() != damage_images.len() {
            return Err(Error::InvalidValue(format!(
                "bit `{bit_id}`: {} location images vs {} damage images",
                location_images.len(),
                damage_images.len()
            )));
        }
        for (l, d) in location_images.iter().zip(&damage_images) {
            if l.image_id != d.image_id || l.view != d.view {
                return Err(Error::InvalidValue(format!(
                    "bit `{bit_id}`: image `{}` has no matching damage record",
                    l.image_id
                )));
            }
        }
        let tops = location_images
            .iter()
            .filter(|r| r.view == View::Top)
            .count();
        if tops > 1 {
            return Err(Error::InvalidValue(format!(
                "bit `{bit_id}`: {tops} top views, at most one allowed"
            )));
        }
        Ok(BitDetections {
            bit_id,
            num_main_blades,
            location_images,
            damage_images,
        })
    }

    /// Paired (location, damage) records per image.
    pub fn pairs(
        &self,
    ) -> impl Iterator<Item = (&ImageRecord<LocationClass>, &ImageRecord<DamageClass>)> {
        self.location_images.iter().zip(&self.damage_images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_sizes() {
        assert_eq!(LocationClass::ALL.len(), 6);
        assert_eq!(DamageClass::ALL.len(), 11);
        assert_eq!(FailureCause::ALL.len(), 9);
    }

    #[test]
    fn parse_known_codes() {
        assert_eq!(
            "Sh".parse::<LocationClass>().unwrap(),
            LocationClass::Shoulder
        );
        assert_eq!("G_G".parse::<DamageClass>().unwrap(), DamageClass::Green);
        assert_eq!(
            parse_class("Sh", ClassKind::Location).unwrap(),
            ClassValue::Location(LocationClass::Shoulder)
        );
        assert_eq!(
            parse_class("G_G", ClassKind::Damage).unwrap(),
            ClassValue::Damage(DamageClass::Green)
        );
        assert_eq!(
            parse_class("whirl", ClassKind::Cause).unwrap().code(),
            "whirl"
        );
    }

    #[test]
    fn unknown_code_lists_valid_codes() {
        let err = parse_class("XX", ClassKind::Damage).unwrap_err();
        match &err {
            Error::UnknownClass { code, kind, valid } => {
                assert_eq!(code, "XX");
                assert_eq!(*kind, ClassKind::Damage);
                assert!(valid.contains("L_Th"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_class("", ClassKind::Location).is_err());
        // case-sensitive
        assert!("g_g".parse::<DamageClass>().is_err());
    }

    #[test]
    fn codes_round_trip() {
        for c in LocationClass::ALL {
            assert_eq!(LocationClass::from_code(c.code()).unwrap(), *c);
            assert_eq!(LocationClass::from_token(&c.token()).unwrap(), *c);
        }
        for c in DamageClass::ALL {
            assert_eq!(DamageClass::from_code(c.code()).unwrap(), *c);
        }
        for c in FailureCause::ALL {
            assert_eq!(FailureCause::from_code(c.code()).unwrap(), *c);
        }
    }

    #[test]
    fn shoulder_ro_is_distinct_per_taxonomy() {
        assert_eq!(LocationClass::ShoulderRO.code(), "Shoulder RO");
        assert_eq!(DamageClass::ShoulderRODamage.code(), "Shoulder_RO");
        assert!("Shoulder_RO".parse::<LocationClass>().is_err());
        assert_eq!(
            LocationClass::from_token("Shoulder_RO").unwrap(),
            LocationClass::ShoulderRO
        );
    }

    #[test]
    fn box_invariants() {
        assert!(BoundingBox::new(0.5, 0.5, 0.1, 0.1).is_ok());
        assert!(BoundingBox::new(1.5, 0.5, 0.1, 0.1).is_err());
        assert!(BoundingBox::new(0.5, 0.5, 0.0, 0.1).is_err());
        assert!(BoundingBox::new(0.5, 0.5, 0.1, 1.01).is_err());
        let b = BoundingBox::new(0.5, 0.5, 0.2, 0.4).unwrap();
        assert_eq!(b.corners(), (0.4, 0.3, 0.6, 0.7));
    }

    #[test]
    fn detection_confidence_range() {
        let b = BoundingBox::new(0.5, 0.5, 0.1, 0.1).unwrap();
        assert!(Detection::new(DamageClass::Green, b, 1.0).is_ok());
        assert!(Detection::new(DamageClass::Green, b, 1.2).is_err());
        assert!(Detection::new(DamageClass::Green, b, -0.1).is_err());
    }

    #[test]
    fn bit_detections_pairing() {
        let loc = vec![
            ImageRecord::<LocationClass>::new("a", View::Top, vec![]).unwrap(),
            ImageRecord::new("b", View::Side(1), vec![]).unwrap(),
        ];
        let dmg = vec![
            ImageRecord::<DamageClass>::new("a", View::Top, vec![]).unwrap(),
            ImageRecord::new("b", View::Side(1), vec![]).unwrap(),
        ];
        assert!(BitDetections::new("bit", 7, loc.clone(), dmg.clone()).is_ok());

        let mut swapped = dmg.clone();
        swapped.reverse();
        assert!(BitDetections::new("bit", 7, loc.clone(), swapped).is_err());

        let two_tops = vec![
            ImageRecord::<LocationClass>::new("a", View::Top, vec![]).unwrap(),
            ImageRecord::new("b", View::Top, vec![]).unwrap(),
        ];
        let two_tops_d = vec![
            ImageRecord::<DamageClass>::new("a", View::Top, vec![]).unwrap(),
            ImageRecord::new("b", View::Top, vec![]).unwrap(),
        ];
        assert!(BitDetections::new("bit", 7, two_tops, two_tops_d).is_err());
        assert!(ImageRecord::<DamageClass>::new("", View::Top, vec![]).is_err());
        assert!(ImageRecord::<DamageClass>::new("x", View::Side(0), vec![]).is_err());
    }
}
