use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use bitforensics::alignment::AlignedCutter;
use bitforensics::cause_eval::{default_included, multilabel_report, pipeline_tally};
use bitforensics::detect_eval::{
    detection_table, ApInterp, ConfusionMatrix, DetectionRow, EvalImage,
};
use bitforensics::ingest::{
    load_bit, load_ground_truth, parse_cause_labels, render_cause_labels, BitManifest,
    CauseLabelRecord,
};
use bitforensics::ml::{
    build_features, fit_forest, fit_tree_model, leave_one_out, predict as predict_causes,
    CauseModel, FeatureVector, ForestParams, LabelVector, TreeParams,
};
use bitforensics::rules::{explain, TraceEntry};
use bitforensics::synth::{pipeline_benchmark, write_bit};
use bitforensics::{
    align_bit, build_profile, classify, summarize_bit, BitDamageProfile, ClassLabel, DamageClass,
    Detection, Error, FailureCause, ImageRecord, LocationClass, MainDamageSummary,
};
use serde::Serialize;

use crate::io::{
    csv_preamble, csv_text, detections, emit, load_manifests, per_bit, read_text, to_json,
    write_file, SCHEMA_VERSION,
};
use crate::{
    AlignOpts, CliError, CliResult, Detector, Format, Inputs, ModelKind, OutOpts, RuleOpts,
};

fn codes(set: &BTreeSet<FailureCause>) -> Vec<&'static str> {
    set.iter().map(|c| c.code()).collect()
}

#[derive(Serialize)]
struct Report<C, T> {
    schema_version: u32,
    command: &'static str,
    config: C,
    #[serde(flatten)]
    body: T,
}

fn report<C: Serialize, T: Serialize>(command: &'static str, config: C, body: T) -> String {
    to_json(&Report {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        body,
    })
}

#[derive(Serialize)]
struct AlignConfig {
    tau: f64,
    use_gt: bool,
}

fn align_config(opts: &AlignOpts) -> CliResult<(bitforensics::AlignmentConfig, AlignConfig)> {
    let cfg = opts.config()?;
    Ok((
        cfg,
        AlignConfig {
            tau: cfg.tau,
            use_gt: opts.use_gt,
        },
    ))
}

fn bit_profile(m: &BitManifest, opts: &AlignOpts) -> CliResult<BitDamageProfile> {
    let cfg = opts.config()?;
    let bit = detections(m, opts.use_gt)?;
    let aligned = align_bit(&bit, &cfg);
    Ok(build_profile(&aligned, &bit.bit_id, bit.num_main_blades))
}

// ------------------------------------------------------------------ align

#[derive(Serialize)]
struct AlignedImage {
    image_id: String,
    cutters: Vec<AlignedCutter>,
}

#[derive(Serialize)]
struct AlignedBit {
    bit_id: String,
    images: Vec<AlignedImage>,
}

pub fn align(inputs: &Inputs, opts: &AlignOpts, format: Format, out: &OutOpts) -> CliResult<()> {
    let (cfg, shown) = align_config(opts)?;
    let manifests = load_manifests(inputs)?;
    let bits = per_bit(&manifests, |m| {
        let bit = detections(m, opts.use_gt)?;
        let images = align_bit(&bit, &cfg)
            .into_iter()
            .map(|(image_id, cutters)| AlignedImage { image_id, cutters })
            .collect();
        Ok(AlignedBit {
            bit_id: bit.bit_id,
            images,
        })
    })?;
    let text = match format {
        Format::Json => report("align", shown, BTreeMap::from([("bits", bits)])),
        Format::Csv => {
            let mut rows = vec![[
                "bit_id",
                "image_id",
                "location",
                "location_conf",
                "damage",
                "damage_conf",
                "center_distance",
            ]
            .map(String::from)
            .to_vec()];
            for b in &bits {
                for img in &b.images {
                    for c in &img.cutters {
                        let (d, conf, dist) = match c.damage {
                            Some(m) => (
                                m.damage.code().to_string(),
                                m.confidence.to_string(),
                                m.center_distance.to_string(),
                            ),
                            None => (String::new(), String::new(), String::new()),
                        };
                        rows.push(vec![
                            b.bit_id.clone(),
                            img.image_id.clone(),
                            c.location.code().to_string(),
                            c.location_conf.to_string(),
                            d,
                            conf,
                            dist,
                        ]);
                    }
                }
            }
            csv_preamble(&shown) + &csv_text(rows)
        }
    };
    emit(out, &text)
}

// ------------------------------------------------------------------ diagnose

#[derive(Serialize)]
struct DiagnoseConfig {
    tau: f64,
    use_gt: bool,
    rules: bitforensics::RuleConfig,
}

#[derive(Serialize)]
struct Diagnosis {
    bit_id: String,
    causes: Vec<&'static str>,
    main_damage: MainDamageSummary,
    trace: Vec<TraceEntry>,
    #[serde(skip)]
    explained: String,
    #[serde(skip)]
    cause_set: BTreeSet<FailureCause>,
}

pub fn diagnose(
    inputs: &Inputs,
    opts: &AlignOpts,
    rules: &RuleOpts,
    explain_trace: bool,
    format: Format,
    out: &OutOpts,
) -> CliResult<()> {
    let (_, shown) = align_config(opts)?;
    let rule_cfg = rules.config()?;
    let manifests = load_manifests(inputs)?;
    let bits = per_bit(&manifests, |m| {
        let profile = bit_profile(m, opts)?;
        let set = classify(&profile, &rule_cfg);
        Ok(Diagnosis {
            bit_id: m.bit_id.clone(),
            causes: codes(&set.causes),
            main_damage: summarize_bit(&profile),
            explained: explain(&m.bit_id, &set),
            cause_set: set.causes,
            trace: set.trace,
        })
    })?;
    let config = DiagnoseConfig {
        tau: shown.tau,
        use_gt: shown.use_gt,
        rules: rule_cfg,
    };
    let text = if explain_trace {
        bits.iter()
            .map(|b| b.explained.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        match format {
            Format::Json => report("diagnose", config, BTreeMap::from([("bits", &bits)])),
            Format::Csv => {
                let records = bits
                    .iter()
                    .map(|b| CauseLabelRecord::new(b.bit_id.clone(), b.cause_set.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                csv_preamble(&config) + &render_cause_labels(&records)
            }
        }
    };
    emit(out, &text)
}

// ------------------------------------------------------------------ fit / predict

pub struct FitOpts<'a> {
    pub inputs: &'a Inputs,
    pub align: &'a AlignOpts,
    pub labels: &'a Path,
    pub model: ModelKind,
    pub seed: u64,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub loo_out: Option<&'a Path>,
    pub out: &'a OutOpts,
}

fn features(manifests: &[BitManifest], opts: &AlignOpts) -> CliResult<Vec<FeatureVector>> {
    per_bit(manifests, |m| {
        Ok(build_features(&summarize_bit(&bit_profile(m, opts)?)))
    })
}

fn read_labels(path: &Path) -> CliResult<Vec<CauseLabelRecord>> {
    parse_cause_labels(&read_text(path)?).map_err(|e| e.in_file(path).into())
}

pub fn fit(o: FitOpts<'_>) -> CliResult<()> {
    o.align.config()?;
    if o.min_samples_split < 2 {
        return Err(CliError::Usage(
            "--min-samples-split must be at least 2".into(),
        ));
    }
    let manifests = load_manifests(o.inputs)?;
    let labels: BTreeMap<String, BTreeSet<FailureCause>> = read_labels(o.labels)?
        .into_iter()
        .map(|r| (r.bit_id, r.causes))
        .collect();
    let y = manifests
        .iter()
        .map(|m| {
            labels
                .get(&m.bit_id)
                .map(LabelVector::from_causes)
                .ok_or_else(|| {
                    CliError::Invalid(format!(
                        "bit `{}` has no label in {}",
                        m.bit_id,
                        o.labels.display()
                    ))
                })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let x = features(&manifests, o.align)?;

    let tree = TreeParams {
        max_depth: o.max_depth,
        min_samples_split: o.min_samples_split,
    };
    let forest = ForestParams {
        n_trees: o.n_trees,
        seed: o.seed,
        tree,
        ..Default::default()
    };
    let kind = o.model;
    let fit_one = |x: &[FeatureVector], y: &[LabelVector]| -> bitforensics::Result<CauseModel> {
        Ok(match kind {
            ModelKind::Dt => CauseModel::DecisionTree(fit_tree_model(x, y, tree)?),
            ModelKind::Rf => CauseModel::RandomForest(fit_forest(x, y, forest)?),
        })
    };
    let model = fit_one(&x, &y)?;
    if let Some(path) = o.loo_out {
        let preds = leave_one_out(&x, &y, fit_one)?;
        let records = manifests
            .iter()
            .zip(preds)
            .map(|(m, s)| CauseLabelRecord::new(m.bit_id.clone(), s.causes))
            .collect::<Result<Vec<_>, _>>()?;
        write_file(path, &render_cause_labels(&records))?;
    }
    let mut text = model.to_json();
    text.push('\n');
    emit(o.out, &text)
}

#[derive(Serialize)]
struct Prediction {
    bit_id: String,
    causes: Vec<&'static str>,
    probabilities: BTreeMap<&'static str, f64>,
    #[serde(skip)]
    cause_set: BTreeSet<FailureCause>,
}

pub fn predict(
    inputs: &Inputs,
    opts: &AlignOpts,
    model_path: &Path,
    format: Format,
    out: &OutOpts,
) -> CliResult<()> {
    let (_, shown) = align_config(opts)?;
    let model = CauseModel::from_json(&read_text(model_path)?).map_err(|e| match e {
        Error::Model(msg) => Error::Model(format!("{}: {msg}", model_path.display())),
        other => other,
    })?;
    let manifests = load_manifests(inputs)?;
    let x = features(&manifests, opts)?;
    let bits = manifests
        .iter()
        .zip(&x)
        .map(|(m, xi)| {
            let set = predict_causes(&model, xi)?;
            let probabilities = model
                .probabilities(xi)?
                .into_iter()
                .map(|(c, p)| (c.code(), p))
                .collect();
            Ok(Prediction {
                bit_id: m.bit_id.clone(),
                causes: codes(&set.causes),
                probabilities,
                cause_set: set.causes,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let config = serde_json::json!({
        "tau": shown.tau,
        "use_gt": shown.use_gt,
        "model": model_path.display().to_string(),
    });
    let text = match format {
        Format::Json => report("predict", config, BTreeMap::from([("bits", &bits)])),
        Format::Csv => {
            let records = bits
                .iter()
                .map(|b| CauseLabelRecord::new(b.bit_id.clone(), b.cause_set.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            csv_preamble(&config) + &render_cause_labels(&records)
        }
    };
    emit(out, &text)
}

// ------------------------------------------------------------------ eval-det

fn eval_images<C: ClassLabel>(
    preds: Vec<ImageRecord<C>>,
    gts: Vec<ImageRecord<C>>,
) -> Vec<EvalImage<C>> {
    preds
        .into_iter()
        .zip(gts)
        .map(|(p, g)| EvalImage {
            preds: p.detections,
            gts: g.detections,
        })
        .collect()
}

fn require_gt(m: &BitManifest, detector: Detector) -> CliResult<()> {
    for e in &m.images {
        let gt = match detector {
            Detector::Location => &e.gt_location_file,
            Detector::Damage => &e.gt_damage_file,
        };
        if gt.is_none() {
            return Err(Error::Manifest(format!(
                "bit `{}` image `{}` has no ground-truth file for the {detector:?} detector",
                m.bit_id, e.image_id
            ))
            .into());
        }
    }
    Ok(())
}

fn score<C: ClassLabel>(
    images: &[EvalImage<C>],
    conf_thr: f64,
    interp: ApInterp,
) -> CliResult<(Vec<DetectionRow>, ConfusionMatrix)> {
    let rows = detection_table(images, conf_thr, interp)?;
    let mut cm = ConfusionMatrix::new::<C>();
    for img in images {
        let kept: Vec<Detection<C>> = img
            .preds
            .iter()
            .filter(|d| d.confidence >= conf_thr)
            .copied()
            .collect();
        cm.add(&kept, &img.gts, 0.5);
    }
    Ok((rows, cm))
}

#[derive(Serialize)]
struct DetectionReport {
    table: Vec<DetectionRow>,
    confusion: ConfusionMatrix,
}

pub fn eval_det(
    inputs: &Inputs,
    detector: Detector,
    conf_thr: f64,
    interp: ApInterp,
    format: Format,
    out: &OutOpts,
) -> CliResult<()> {
    if !(0.0..=1.0).contains(&conf_thr) {
        return Err(CliError::Usage(format!(
            "--conf-thr {conf_thr} outside [0, 1]"
        )));
    }
    let manifests = load_manifests(inputs)?;
    let loaded = per_bit(&manifests, |m| {
        require_gt(m, detector)?;
        Ok((load_bit(m)?, load_ground_truth(m)?))
    })?;
    let (mut loc, mut dmg) = (Vec::new(), Vec::new());
    for (pred, gt) in loaded {
        loc.extend(eval_images(pred.location_images, gt.location_images));
        dmg.extend(eval_images(pred.damage_images, gt.damage_images));
    }
    let (table, confusion) = match detector {
        Detector::Location => score::<LocationClass>(&loc, conf_thr, interp)?,
        Detector::Damage => score::<DamageClass>(&dmg, conf_thr, interp)?,
    };
    let config = serde_json::json!({
        "detector": format!("{detector:?}").to_lowercase(),
        "conf_thr": conf_thr,
        "ap_interp": interp,
        "iou_pr": 0.5,
    });
    let text = match format {
        Format::Json => report("eval-det", config, DetectionReport { table, confusion }),
        Format::Csv => {
            let mut rows = vec![[
                "class",
                "labels",
                "precision",
                "recall",
                "map50",
                "map50_95",
            ]
            .map(String::from)
            .to_vec()];
            rows.extend(table.iter().map(|r| {
                vec![
                    r.class.clone(),
                    r.labels.to_string(),
                    format!("{:.6}", r.precision),
                    format!("{:.6}", r.recall),
                    format!("{:.6}", r.map50),
                    format!("{:.6}", r.map50_95),
                ]
            }));
            csv_preamble(&config) + &csv_text(rows)
        }
    };
    emit(out, &text)
}

// ------------------------------------------------------------------ eval-cause / tally

type CauseSets = Vec<BTreeSet<FailureCause>>;

/// Predictions and truth aligned by bit id, in truth order.
fn paired_labels(pred: &Path, truth: &Path) -> CliResult<(Vec<String>, CauseSets, CauseSets)> {
    let truth_rows = read_labels(truth)?;
    let mut pred_rows: BTreeMap<String, BTreeSet<FailureCause>> = BTreeMap::new();
    for r in read_labels(pred)? {
        if pred_rows.insert(r.bit_id.clone(), r.causes).is_some() {
            return Err(CliError::Invalid(format!(
                "{}: bit `{}` listed twice",
                pred.display(),
                r.bit_id
            )));
        }
    }
    let mut ids = Vec::new();
    let mut p = Vec::new();
    let mut t = Vec::new();
    for r in truth_rows {
        let got = pred_rows.remove(&r.bit_id).ok_or_else(|| {
            CliError::Invalid(format!(
                "{}: no prediction for bit `{}`",
                pred.display(),
                r.bit_id
            ))
        })?;
        ids.push(r.bit_id);
        p.push(got);
        t.push(r.causes);
    }
    if let Some(extra) = pred_rows.keys().next() {
        return Err(CliError::Invalid(format!(
            "{}: bit `{extra}` has no truth row",
            pred.display()
        )));
    }
    Ok((ids, p, t))
}

pub fn eval_cause(
    pred: &Path,
    truth: &Path,
    stickslip: bool,
    format: Format,
    out: &OutOpts,
) -> CliResult<()> {
    let (_, p, t) = paired_labels(pred, truth)?;
    let mut included = default_included();
    if stickslip {
        included = FailureCause::DAMAGE_CAUSES.to_vec();
    }
    let r = multilabel_report(&p, &t, &included)?;
    let config = serde_json::json!({
        "include_stickslip": stickslip,
        "causes": included.iter().map(|c| c.code()).collect::<Vec<_>>(),
    });
    let text = match format {
        Format::Json => report("eval-cause", config, &r),
        Format::Csv => {
            let num = |v: f64| format!("{v:.6}");
            let opt = |v: Option<f64>| v.map_or("-".to_string(), num);
            let mut header = vec!["metric".to_string()];
            header.extend(r.causes.iter().map(|m| m.cause.code().to_string()));
            header.push("macro_average".into());
            let m = &r.macro_average;
            let row = |name: &str, per: Vec<String>, avg: String| {
                let mut v = vec![name.to_string()];
                v.extend(per);
                v.push(avg);
                v
            };
            let rows = vec![
                header,
                row(
                    "accuracy",
                    r.causes.iter().map(|c| num(c.accuracy)).collect(),
                    num(m.accuracy),
                ),
                row(
                    "precision",
                    r.causes.iter().map(|c| num(c.precision)).collect(),
                    num(m.precision),
                ),
                row(
                    "recall",
                    r.causes.iter().map(|c| num(c.recall)).collect(),
                    num(m.recall),
                ),
                row(
                    "f1",
                    r.causes.iter().map(|c| opt(c.f1)).collect(),
                    opt(m.f1),
                ),
            ];
            csv_preamble(&config) + &csv_text(rows)
        }
    };
    emit(out, &text)
}

pub fn tally(pred: &Path, truth: &Path, format: Format, out: &OutOpts) -> CliResult<()> {
    let (ids, p, t) = paired_labels(pred, truth)?;
    let tally = pipeline_tally(&ids, &p, &t)?;
    let config = serde_json::json!({
        "pred": pred.display().to_string(),
        "truth": truth.display().to_string(),
    });
    let text = match format {
        Format::Json => report("tally", config, &tally),
        Format::Csv => {
            let join = |s: &BTreeSet<FailureCause>| codes(s).join(";");
            let mut rows = vec![[
                "bit_id",
                "existing",
                "detected",
                "correct",
                "false_detected",
            ]
            .map(String::from)
            .to_vec()];
            rows.extend(tally.bits.iter().map(|b| {
                vec![
                    b.bit_id.clone(),
                    join(&b.existing),
                    join(&b.detected),
                    b.correct.to_string(),
                    b.false_detected.to_string(),
                ]
            }));
            rows.push(vec![
                "total".into(),
                tally.total_causes.to_string(),
                String::new(),
                tally.correctly_detected.to_string(),
                tally.falsely_detected.to_string(),
            ]);
            csv_preamble(&config) + &csv_text(rows)
        }
    };
    emit(out, &text)
}

// ------------------------------------------------------------------ synth

/// Writes `<dir>/<bit>.json` manifests with ground truth, plus
/// `<dir>/labels.csv` outside the manifest glob's reach.
pub fn synth(dir: &Path, seed: u64) -> CliResult<()> {
    use rand::SeedableRng;

    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for (bit, causes) in pipeline_benchmark() {
        write_bit(dir, &bit, &mut rng, true)?;
        records.push(CauseLabelRecord::new(bit.bit_id.clone(), causes)?);
    }
    write_file(&dir.join("labels.csv"), &render_cause_labels(&records))
}
