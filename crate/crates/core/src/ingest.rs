//! Detection files, bit manifests and cause-label CSVs.
//!
//! Detection files hold one box per line:
//!
//! ```text
//! # class cx cy w h [conf]
//! G_G 0.500000 0.500000 0.100000 0.100000 0.930000
//! ```
//!
//! Coordinates are normalized to the image size. Ground-truth files use the
//! same format without the confidence column.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    BitDetections, BoundingBox, ClassLabel, DamageClass, Detection, FailureCause, ImageRecord,
    LocationClass, View, DEFAULT_MAIN_BLADES,
};

/// Parse a detection (or ground-truth) file body.
///
/// With `has_confidence` every line must carry six fields; without it, five,
/// and confidence is set to 1.
pub fn parse_detection_lines<C: ClassLabel>(
    text: &str,
    has_confidence: bool,
) -> Result<Vec<Detection<C>>> {
    let expected = if has_confidence { 6 } else { 5 };
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != expected {
            return Err(Error::parse(
                line_no,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let label = C::from_token(fields[0]).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let mut nums = [0.0f64; 5];
        for (slot, (name, field)) in nums
            .iter_mut()
            .zip(["cx", "cy", "w", "h", "conf"].iter().zip(&fields[1..]))
        {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(line_no, format!("{name}: `{field}` is not a number"))
                })?;
        }
        let bbox = BoundingBox::new(nums[0], nums[1], nums[2], nums[3])
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        let confidence = if has_confidence { nums[4] } else { 1.0 };
        let det = Detection::new(label, bbox, confidence)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(det);
    }
    Ok(out)
}

/// Inverse of [`parse_detection_lines`], with 6-decimal fields.
pub fn render_detection_lines<C: ClassLabel>(
    dets: &[Detection<C>],
    with_confidence: bool,
) -> String {
    let mut s = String::new();
    for d in dets {
        let b = &d.bbox;
        let _ = write!(
            s,
            "{} {:.6} {:.6} {:.6} {:.6}",
            d.label.token(),
            b.cx,
            b.cy,
            b.w,
            b.h
        );
        if with_confidence {
            let _ = write!(s, " {:.6}", d.confidence);
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Top,
    Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub view: ViewKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_index: Option<u32>,
    pub location_file: PathBuf,
    pub damage_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_location_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_damage_file: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn view(&self) -> Result<View> {
        match (self.view, self.side_index) {
            (ViewKind::Top, None) => Ok(View::Top),
            (ViewKind::Top, Some(_)) => Err(Error::Manifest(format!(
                "image `{}`: top view must not carry side_index",
                self.image_id
            ))),
            (ViewKind::Side, Some(i)) if i >= 1 => Ok(View::Side(i)),
            (ViewKind::Side, _) => Err(Error::Manifest(format!(
                "image `{}`: side view needs side_index >= 1",
                self.image_id
            ))),
        }
    }
}

fn default_blades() -> u32 {
    DEFAULT_MAIN_BLADES
}

/// One bit's image list. Relative file paths resolve against the
/// directory of the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitManifest {
    pub bit_id: String,
    #[serde(default = "default_blades")]
    pub num_main_blades: u32,
    pub images: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl BitManifest {
    pub fn from_json(text: &str, base_dir: Option<PathBuf>) -> Result<Self> {
        let mut m: BitManifest =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.base_dir = base_dir;
        m.validate_shape()?;
        Ok(m)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf);
        Self::from_json(&text, base).map_err(|e| match e {
            Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if self.bit_id.is_empty() {
            return Err(Error::Manifest("empty bit_id".into()));
        }
        if self.num_main_blades == 0 {
            return Err(Error::Manifest("num_main_blades must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut tops = 0;
        for e in &self.images {
            if e.image_id.is_empty() {
                return Err(Error::Manifest("empty image_id".into()));
            }
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate image_id `{}`",
                    e.image_id
                )));
            }
            if e.view()? == View::Top {
                tops += 1;
            }
        }
        if tops > 1 {
            return Err(Error::Manifest(format!(
                "{tops} top views, at most one allowed"
            )));
        }
        Ok(())
    }

    /// Shape checks plus existence of every required file.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        for e in &self.images {
            for f in [&e.location_file, &e.damage_file] {
                let p = self.resolve(f);
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn read_detections<C: ClassLabel>(path: &Path, has_confidence: bool) -> Result<Vec<Detection<C>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detection_lines(&text, has_confidence).map_err(|e| e.in_file(path))
}

/// Read both detection streams for every manifest entry.
pub fn load_bit(manifest: &BitManifest) -> Result<BitDetections> {
    manifest.validate()?;
    let mut loc = Vec::with_capacity(manifest.images.len());
    let mut dmg = Vec::with_capacity(manifest.images.len());
    for e in &manifest.images {
        let view = e.view()?;
        let l = read_detections::<LocationClass>(&manifest.resolve(&e.location_file), true)?;
        let d = read_detections::<DamageClass>(&manifest.resolve(&e.damage_file), true)?;
        loc.push(ImageRecord::new(e.image_id.clone(), view, l)?);
        dmg.push(ImageRecord::new(e.image_id.clone(), view, d)?);
    }
    BitDetections::new(manifest.bit_id.clone(), manifest.num_main_blades, loc, dmg)
}

/// Ground-truth boxes for one bit. Entries without GT files get empty
/// records.
#[derive(Debug, Clone, PartialEq)]
pub struct BitGroundTruth {
    pub bit_id: String,
    pub location_images: Vec<ImageRecord<LocationClass>>,
    pub damage_images: Vec<ImageRecord<DamageClass>>,
}

pub fn load_ground_truth(manifest: &BitManifest) -> Result<BitGroundTruth> {
    manifest.validate_shape()?;
    let mut loc = Vec::new();
    let mut dmg = Vec::new();
    for e in &manifest.images {
        let view = e.view()?;
        let l = match &e.gt_location_file {
            Some(f) => read_detections(&manifest.resolve(f), false)?,
            None => Vec::new(),
        };
        let d = match &e.gt_damage_file {
            Some(f) => read_detections(&manifest.resolve(f), false)?,
            None => Vec::new(),
        };
        loc.push(ImageRecord::new(e.image_id.clone(), view, l)?);
        dmg.push(ImageRecord::new(e.image_id.clone(), view, d)?);
    }
    Ok(BitGroundTruth {
        bit_id: manifest.bit_id.clone(),
        location_images: loc,
        damage_images: dmg,
    })
}

/// Ground truth reinterpreted as a detection set (confidence 1), so the
/// alignment and rule stages can run on annotations.
impl BitGroundTruth {
    pub fn into_detections(self, num_main_blades: u32) -> Result<BitDetections> {
        BitDetections::new(
            self.bit_id,
            num_main_blades,
            self.location_images,
            self.damage_images,
        )
    }
}

/// All `*.json` files directly inside `dir`, sorted by path.
pub fn discover_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub const CAUSE_CSV_HEADER: [&str; 10] = [
    "bit_id",
    "smooth_wear",
    "thermal_wear",
    "core_out",
    "hard_ft",
    "soft_ft",
    "stick_slip",
    "axial",
    "whirl",
    "green",
];

/// Failure causes of one bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseLabelRecord {
    pub bit_id: String,
    pub causes: BTreeSet<FailureCause>,
}

impl CauseLabelRecord {
    pub fn new(bit_id: impl Into<String>, causes: BTreeSet<FailureCause>) -> Result<Self> {
        let bit_id = bit_id.into();
        if bit_id.is_empty() {
            return Err(Error::InvalidValue("empty bit_id".into()));
        }
        if causes.contains(&FailureCause::Green) && causes.len() > 1 {
            return Err(Error::GreenConflict { bit_id });
        }
        Ok(CauseLabelRecord { bit_id, causes })
    }
}

fn header_cause(col: usize) -> FailureCause {
    FailureCause::from_code(CAUSE_CSV_HEADER[col]).expect("header codes are cause codes")
}

pub fn parse_cause_labels(text: &str) -> Result<Vec<CauseLabelRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut header_seen = false;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if !header_seen {
            let cols: Vec<&str> = row.iter().collect();
            if cols != CAUSE_CSV_HEADER {
                return Err(Error::parse(
                    line,
                    format!("expected header `{}`", CAUSE_CSV_HEADER.join(",")),
                ));
            }
            header_seen = true;
            continue;
        }
        if row.len() != CAUSE_CSV_HEADER.len() {
            return Err(Error::parse(
                line,
                format!(
                    "expected {} cells, found {}",
                    CAUSE_CSV_HEADER.len(),
                    row.len()
                ),
            ));
        }
        let bit_id = &row[0];
        if bit_id.is_empty() {
            return Err(Error::parse(line, "empty bit_id"));
        }
        let mut causes = BTreeSet::new();
        for col in 1..CAUSE_CSV_HEADER.len() {
            match &row[col] {
                "0" => {}
                "1" => {
                    causes.insert(header_cause(col));
                }
                other => {
                    return Err(Error::parse(
                        line,
                        format!("{}: `{other}` is not 0/1", CAUSE_CSV_HEADER[col]),
                    ))
                }
            }
        }
        out.push(CauseLabelRecord::new(bit_id, causes)?);
    }
    if !header_seen {
        return Err(Error::parse(1, "missing header row"));
    }
    Ok(out)
}

pub fn render_cause_labels(records: &[CauseLabelRecord]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(CAUSE_CSV_HEADER).expect("write to Vec");
    for r in records {
        let mut row = vec![r.bit_id.clone()];
        for col in 1..CAUSE_CSV_HEADER.len() {
            let on = r.causes.contains(&header_cause(col));
            row.push(if on { "1" } else { "0" }.to_string());
        }
        wtr.write_record(&row).expect("write to Vec");
    }
    String::from_utf8(wtr.into_inner().expect("flush Vec")).expect("utf-8 csv")
}
