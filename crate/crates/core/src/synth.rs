//! Synthetic bit datasets: planted damage profiles written out as
//! detection files and manifests, for end-to-end runs without images.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{render_detection_lines, BitManifest, ManifestEntry, ViewKind};
use crate::model::{
    BoundingBox, DamageClass, Detection, FailureCause, LocationClass, DEFAULT_MAIN_BLADES,
};

/// Cutter grid pitch in normalized units; keeps neighbours well outside
/// the default alignment radius.
const PITCH: f64 = 0.1;
const GRID: usize = 8;
const BOX_SIZE: f64 = 0.04;
/// Largest per-axis shift of a damage box from its cutter.
const MAX_SHIFT: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBit {
    pub bit_id: String,
    pub num_main_blades: u32,
    /// Damage seen on the top view, if any.
    pub top: Option<DamageClass>,
    pub cutters: Vec<(LocationClass, DamageClass)>,
}

impl SyntheticBit {
    pub fn new(bit_id: impl Into<String>) -> Self {
        SyntheticBit {
            bit_id: bit_id.into(),
            num_main_blades: DEFAULT_MAIN_BLADES,
            top: Some(DamageClass::NoRingoutTop),
            cutters: Vec::new(),
        }
    }

    pub fn with(mut self, loc: LocationClass, dmg: DamageClass, n: usize) -> Self {
        self.cutters.extend(std::iter::repeat_n((loc, dmg), n));
        self
    }

    pub fn with_top(mut self, top: Option<DamageClass>) -> Self {
        self.top = top;
        self
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn grid_box(slot: usize) -> Result<BoundingBox> {
    let (row, col) = (slot / GRID, slot % GRID);
    if row >= GRID {
        return Err(Error::InvalidValue(format!(
            "more than {} cutters on one image",
            GRID * GRID
        )));
    }
    let at = |i: usize| PITCH * (i as f64 + 1.0);
    BoundingBox::new(at(col), at(row), BOX_SIZE, BOX_SIZE)
}

struct ImageFiles {
    loc: Vec<Detection<LocationClass>>,
    dmg: Vec<Detection<DamageClass>>,
    gt_loc: Vec<Detection<LocationClass>>,
    gt_dmg: Vec<Detection<DamageClass>>,
}

impl ImageFiles {
    fn new() -> Self {
        ImageFiles {
            loc: Vec::new(),
            dmg: Vec::new(),
            gt_loc: Vec::new(),
            gt_dmg: Vec::new(),
        }
    }

    fn push<R: Rng>(&mut self, rng: &mut R, loc: LocationClass, dmg: DamageClass) -> Result<()> {
        let b = grid_box(self.loc.len())?;
        let shift = |rng: &mut R| rng.gen_range(-MAX_SHIFT..MAX_SHIFT);
        let d = BoundingBox::new(b.cx + shift(rng), b.cy + shift(rng), b.w, b.h)?;
        self.loc
            .push(Detection::new(loc, b, rng.gen_range(0.5..1.0))?);
        self.dmg
            .push(Detection::new(dmg, d, rng.gen_range(0.5..1.0))?);
        self.gt_loc.push(Detection::new(loc, b, 1.0)?);
        self.gt_dmg.push(Detection::new(dmg, d, 1.0)?);
        Ok(())
    }
}

/// Write one bit under `dir`: `<bit_id>.json` plus a `<bit_id>/` folder
/// with one top and `num_main_blades` side images. Cutters are dealt
/// round-robin over the side images. Returns the manifest path.
pub fn write_bit<R: Rng>(
    dir: &Path,
    bit: &SyntheticBit,
    rng: &mut R,
    with_gt: bool,
) -> Result<PathBuf> {
    let sub = dir.join(&bit.bit_id);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let sides = bit.num_main_blades as usize;
    let mut images: Vec<ImageFiles> = (0..sides).map(|_| ImageFiles::new()).collect();
    for (i, &(loc, dmg)) in bit.cutters.iter().enumerate() {
        images[i % sides].push(rng, loc, dmg)?;
    }
    let mut top = ImageFiles::new();
    if let Some(d) = bit.top {
        top.push(rng, LocationClass::Top, d)?;
    }

    let mut entries = Vec::with_capacity(sides + 1);
    let named = std::iter::once(("top".to_string(), None, &top)).chain(
        images
            .iter()
            .enumerate()
            .map(|(i, f)| (format!("side{}", i + 1), Some(i as u32 + 1), f)),
    );
    for (name, side_index, files) in named {
        let rel = |kind: &str| PathBuf::from(&bit.bit_id).join(format!("{name}.{kind}.txt"));
        write(
            &dir.join(rel("loc")),
            &render_detection_lines(&files.loc, true),
        )?;
        write(
            &dir.join(rel("dmg")),
            &render_detection_lines(&files.dmg, true),
        )?;
        if with_gt {
            write(
                &dir.join(rel("gtloc")),
                &render_detection_lines(&files.gt_loc, false),
            )?;
            write(
                &dir.join(rel("gtdmg")),
                &render_detection_lines(&files.gt_dmg, false),
            )?;
        }
        entries.push(ManifestEntry {
            image_id: name.clone(),
            view: if side_index.is_some() {
                ViewKind::Side
            } else {
                ViewKind::Top
            },
            side_index,
            location_file: rel("loc"),
            damage_file: rel("dmg"),
            gt_location_file: with_gt.then(|| rel("gtloc")),
            gt_damage_file: with_gt.then(|| rel("gtdmg")),
        });
    }
    let manifest = BitManifest {
        bit_id: bit.bit_id.clone(),
        num_main_blades: bit.num_main_blades,
        images: entries,
        base_dir: None,
    };
    let path = dir.join(format!("{}.json", bit.bit_id));
    write(&path, &manifest.to_json())?;
    Ok(path)
}

/// Ten bits whose planted damage carries the failure causes of a
/// ten-bit field test set (24 causes in all), with those causes.
pub fn pipeline_benchmark() -> Vec<(SyntheticBit, BTreeSet<FailureCause>)> {
    use DamageClass as D;
    use FailureCause as F;
    use LocationClass as L;

    let thermal = |id: &str| {
        SyntheticBit::new(id)
            .with(L::Shoulder, D::LowThermal, 8)
            .with(L::Gauge, D::Green, 10)
    };
    let nose_ringout = |b: SyntheticBit| b.with(L::Nose, D::Missing, 6);
    let set = |c: &[F]| c.iter().copied().collect::<BTreeSet<_>>();
    vec![
        (
            nose_ringout(thermal("15")),
            set(&[F::ThermalWear, F::HardFormationTransition]),
        ),
        (thermal("20"), set(&[F::ThermalWear])),
        (
            nose_ringout(thermal("32")),
            set(&[F::ThermalWear, F::HardFormationTransition]),
        ),
        (
            thermal("39").with(L::Gauge, D::Missing, 1),
            set(&[F::ThermalWear, F::Axial, F::Whirl]),
        ),
        (
            thermal("47").with(L::Nose, D::TangentialFracture, 1),
            set(&[F::ThermalWear, F::Whirl]),
        ),
        (
            nose_ringout(thermal("49")).with(L::Nose, D::TangentialFracture, 1),
            set(&[F::ThermalWear, F::HardFormationTransition, F::Whirl]),
        ),
        (
            SyntheticBit::new("50")
                .with(L::Shoulder, D::SmoothWear, 5)
                .with(L::Nose, D::TangentialFracture, 1)
                .with(L::Gauge, D::Green, 10),
            set(&[F::SmoothWear, F::Whirl]),
        ),
        (
            thermal("52").with(L::Nose, D::TangentialFracture, 1),
            set(&[F::ThermalWear, F::Whirl]),
        ),
        (
            nose_ringout(thermal("57"))
                .with(L::Nose, D::NormalFracture, 1)
                .with(L::Nose, D::TangentialFracture, 1),
            set(&[
                F::ThermalWear,
                F::HardFormationTransition,
                F::Axial,
                F::Whirl,
            ]),
        ),
        (
            thermal("58").with(L::Gauge, D::Missing, 1),
            set(&[F::ThermalWear, F::Axial, F::Whirl]),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_bit;
    use crate::{profile_bit, AlignmentConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_profile_matches_planted_counts() {
        let dir = tempfile::tempdir().unwrap();
        let bit = SyntheticBit::new("x")
            .with(LocationClass::Nose, DamageClass::Missing, 3)
            .with(LocationClass::Gauge, DamageClass::Green, 9)
            .with_top(Some(DamageClass::RingoutTop));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = write_bit(dir.path(), &bit, &mut rng, true).unwrap();
        let m = BitManifest::from_path(&path).unwrap();
        assert_eq!(m.images.len(), 8);
        let p = profile_bit(&load_bit(&m).unwrap(), &AlignmentConfig::default());
        assert_eq!(p.count(LocationClass::Nose, DamageClass::Missing), 3);
        assert_eq!(p.count(LocationClass::Gauge, DamageClass::Green), 9);
        assert_eq!(p.total_detected, 12);
        assert_eq!(p.unmatched, 0);
        assert_eq!(p.top_ringout, crate::TopRingout::Ringout);
    }

    #[test]
    fn benchmark_plants_24_causes() {
        let b = pipeline_benchmark();
        assert_eq!(b.len(), 10);
        assert_eq!(b.iter().map(|(_, c)| c.len()).sum::<usize>(), 24);
    }

    #[test]
    fn grid_overflow_is_an_error() {
        assert!(grid_box(GRID * GRID).is_err());
    }
}
