//! File-level commands behind the `fundus-eval` binary. Each command loads
//! its inputs from disk, runs the evaluators and writes schema-tagged
//! outputs that the toolkit can read back.
//!
//! CSV outputs start with a `# schema: <name> v<version>` comment line; the
//! readers here skip `#` lines, so plain CSVs without it load as well.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bmp::{self, DecodeOptions};
use crate::cls_metrics::{
    roc_curve, sensitivity_at_specificity, Diagnosis, RocCurve, ScoreEntry, ScoreTable,
    REFERENCE_SPECIFICITY,
};
use crate::ensemble::{fuse_likelihoods, majority_vote, VoteConfig};
use crate::error::Error;
use crate::mask::OdRule;
use crate::ranking::{build_leaderboard, Leaderboard, MetricRow, MetricTable, WeightPreset};
use crate::seg_metrics::{score_image, summarize, SegScore};
use crate::stats::{
    bonferroni, delong_test, kruskal_wallis, rank_sum, wilcoxon_signed_rank, Alternative,
    TestResult,
};
use crate::synth::{generate_ground_truth, SynthCohort, SynthConfig};

pub const FORMAT_VERSION: &str = "1";

pub const SEG_SCORES_SCHEMA: &str = "seg-scores";
pub const SCORES_SCHEMA: &str = "scores";
pub const LABELS_SCHEMA: &str = "labels";
pub const METRICS_SCHEMA: &str = "metrics";
pub const LEADERBOARD_SCHEMA: &str = "leaderboard";
pub const CLASS_EVAL_SCHEMA: &str = "class-eval";
pub const STATS_SCHEMA: &str = "stats";

/// Label of the summary row in segmentation score files.
pub const MEAN_ROW: &str = "MEAN";

/// Images processed together before their outputs are written.
const WRITE_BATCH: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    /// Problems with the inputs, one line each.
    #[error("{}", .0.join("\n"))]
    Validation(Vec<String>),
    /// Failures unrelated to the inputs, such as an unwritable output path.
    #[error("{0}")]
    Internal(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Validation(_) => 2,
            CommandError::Internal(_) => 1,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        match self {
            CommandError::Validation(lines) => lines.clone(),
            CommandError::Internal(msg) => vec![msg.clone()],
        }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        CommandError::Validation(vec![msg.into()])
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingPrediction(ids) => CommandError::Validation(
                ids.iter()
                    .map(|id| format!("missing prediction for image {id}"))
                    .collect(),
            ),
            other => CommandError::invalid(other.to_string()),
        }
    }
}

pub type CommandResult<T = ()> = std::result::Result<T, CommandError>;

/// Informational messages from a successful command.
pub type Notes = Vec<String>;

fn fail_if_any(problems: Vec<String>) -> CommandResult {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CommandError::Validation(problems))
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> CommandResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CommandError::Internal(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CommandError::Internal(format!("{}: {e}", path.display())))
}

fn read_input(path: &Path) -> CommandResult<String> {
    fs::read_to_string(path).map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))
}

fn schema_line(schema: &str) -> String {
    format!("# schema: fundus-eval {schema} v{FORMAT_VERSION}\n")
}

/// Serializes rows to CSV text headed by the schema comment.
fn csv_text<T: Serialize>(schema: &str, rows: impl IntoIterator<Item = T>) -> CommandResult<Vec<u8>> {
    let mut out = schema_line(schema).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for row in rows {
            w.serialize(row)
                .map_err(|e| CommandError::Internal(format!("csv encoding: {e}")))?;
        }
        w.flush()
            .map_err(|e| CommandError::Internal(format!("csv encoding: {e}")))?;
    }
    Ok(out)
}

fn csv_reader(path: &Path) -> CommandResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))
}

/// Checks that the header starts with `required`, optionally followed by
/// the columns in `optional`, and returns the header.
fn check_header(
    path: &Path,
    rdr: &mut csv::Reader<fs::File>,
    required: &[&str],
    optional: &[&str],
) -> CommandResult<Vec<String>> {
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let ok = header.len() >= required.len()
        && header.len() <= required.len() + optional.len()
        && header.iter().zip(required.iter().chain(optional)).all(|(h, e)| h == e);
    if !ok {
        let mut expected = required.join(",");
        for o in optional {
            write!(expected, "[,{o}]").unwrap();
        }
        return Err(CommandError::invalid(format!(
            "{}: header is {:?}, expected {expected}",
            path.display(),
            header.join(",")
        )));
    }
    Ok(header)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_finite(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow<'a> {
    pub image_id: &'a str,
    pub likelihood: f64,
}

/// Reads an `image_id,likelihood` file.
pub fn read_likelihoods(path: &Path) -> CommandResult<BTreeMap<String, f64>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["image_id", "likelihood"], &[])?;
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let line = line_of(&rec);
        let id = &rec[0];
        match parse_finite(&rec[1]) {
            None => problems.push(format!(
                "{}:{line}: likelihood {:?} is not a finite number",
                path.display(),
                &rec[1]
            )),
            Some(_) if id.is_empty() => {
                problems.push(format!("{}:{line}: empty image_id", path.display()))
            }
            Some(v) => {
                if out.insert(id.to_string(), v).is_some() {
                    problems.push(format!("{}:{line}: duplicate image_id {id}", path.display()));
                }
            }
        }
    }
    fail_if_any(problems)?;
    Ok(out)
}

pub fn write_likelihoods<'a>(
    path: &Path,
    values: impl IntoIterator<Item = (&'a str, f64)>,
) -> CommandResult {
    let rows = values
        .into_iter()
        .map(|(image_id, likelihood)| ScoreRow { image_id, likelihood });
    write_output(path, &csv_text(SCORES_SCHEMA, rows)?)
}

/// Reads an `image_id,label` file with labels 0 or 1 (1 = glaucoma).
pub fn read_labels(path: &Path) -> CommandResult<BTreeMap<String, Diagnosis>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["image_id", "label"], &[])?;
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let line = line_of(&rec);
        let id = &rec[0];
        let label = match &rec[1] {
            "1" => Diagnosis::Glaucoma,
            "0" => Diagnosis::NonGlaucoma,
            other => {
                problems.push(format!(
                    "{}:{line}: label {other:?} must be 0 or 1",
                    path.display()
                ));
                continue;
            }
        };
        if id.is_empty() {
            problems.push(format!("{}:{line}: empty image_id", path.display()));
        } else if out.insert(id.to_string(), label).is_some() {
            problems.push(format!("{}:{line}: duplicate image_id {id}", path.display()));
        }
    }
    fail_if_any(problems)?;
    Ok(out)
}

#[derive(Serialize)]
struct LabelRow<'a> {
    image_id: &'a str,
    label: u8,
}

pub fn write_labels<'a>(
    path: &Path,
    labels: impl IntoIterator<Item = (&'a str, Diagnosis)>,
) -> CommandResult {
    let rows = labels.into_iter().map(|(image_id, d)| LabelRow {
        image_id,
        label: d.is_positive() as u8,
    });
    write_output(path, &csv_text(LABELS_SCHEMA, rows)?)
}

/// One image of a cohort manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_id: String,
    /// Mask path relative to the manifest's directory.
    pub mask: String,
    /// 1 = glaucoma, 0 = not; absent for prediction manifests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// Explicit image list pairing ids with mask files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortManifest {
    pub format_version: String,
    pub images: Vec<ManifestEntry>,
}

impl CohortManifest {
    pub fn load(path: &Path) -> CommandResult<Self> {
        let text = read_input(path)?;
        let m: CohortManifest = serde_json::from_str(&text)
            .map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))?;
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &m.images {
            if !seen.insert(e.image_id.as_str()) {
                problems.push(format!("{}: duplicate image_id {}", path.display(), e.image_id));
            }
            if matches!(e.label, Some(l) if l > 1) {
                problems.push(format!(
                    "{}: image {} has label {}, expected 0 or 1",
                    path.display(),
                    e.image_id,
                    e.label.unwrap()
                ));
            }
        }
        fail_if_any(problems)?;
        Ok(m)
    }

    /// Mask paths by image id; every referenced file must exist.
    pub fn mask_paths(&self, manifest_path: &Path) -> CommandResult<BTreeMap<String, PathBuf>> {
        let base = manifest_path.parent().unwrap_or(Path::new(""));
        let mut problems = Vec::new();
        let mut out = BTreeMap::new();
        for e in &self.images {
            let p = base.join(&e.mask);
            if !p.is_file() {
                problems.push(format!("image {}: mask file {} not found", e.image_id, p.display()));
            }
            out.insert(e.image_id.clone(), p);
        }
        fail_if_any(problems)?;
        Ok(out)
    }
}

/// BMP files in `dir` keyed by filename stem.
pub fn mask_dir_index(dir: &Path) -> CommandResult<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CommandError::invalid(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CommandError::invalid(format!("{}: {e}", dir.display())))?
            .path();
        let is_bmp = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("bmp"));
        if !is_bmp || !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            problems.push(format!("{}: file name is not valid UTF-8", path.display()));
            continue;
        };
        if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
            problems.push(format!(
                "{} and {} share the image id {stem}",
                prev.display(),
                path.display()
            ));
        }
    }
    fail_if_any(problems)?;
    Ok(out)
}

fn mask_source(dir: &Path, manifest: Option<&Path>) -> CommandResult<BTreeMap<String, PathBuf>> {
    match manifest {
        Some(m) => CohortManifest::load(m)?.mask_paths(m),
        None => mask_dir_index(dir),
    }
}

fn load_mask(path: &Path, opts: DecodeOptions) -> std::result::Result<crate::LabelMask, String> {
    bmp::read_mask(path, opts).map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone)]
pub struct EvalSegArgs {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    pub out: PathBuf,
    pub strict_masks: bool,
    pub od_rule: OdRule,
    /// Overrides stem pairing for predictions.
    pub pred_manifest: Option<PathBuf>,
    /// Overrides stem pairing for ground truth.
    pub gt_manifest: Option<PathBuf>,
}

impl EvalSegArgs {
    pub fn new(pred_dir: impl Into<PathBuf>, gt_dir: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            pred_dir: pred_dir.into(),
            gt_dir: gt_dir.into(),
            out: out.into(),
            strict_masks: false,
            od_rule: OdRule::default(),
            pred_manifest: None,
            gt_manifest: None,
        }
    }
}

/// One row of a segmentation score file; the last row holds the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegRow {
    pub image_id: String,
    pub dice_od: f64,
    pub dice_oc: f64,
    pub vcdr_pred: f64,
    pub vcdr_true: f64,
    pub abs_error: f64,
}

impl From<&SegScore> for SegRow {
    fn from(s: &SegScore) -> Self {
        Self {
            image_id: s.image_id.clone(),
            dice_od: s.dice_od,
            dice_oc: s.dice_oc,
            vcdr_pred: s.vcdr_pred,
            vcdr_true: s.vcdr_true,
            abs_error: s.abs_error,
        }
    }
}

/// Scores every ground-truth mask against the prediction with the same id
/// and writes per-image rows plus a `MEAN` row.
pub fn eval_seg(args: &EvalSegArgs) -> CommandResult<Notes> {
    let truths = mask_source(&args.gt_dir, args.gt_manifest.as_deref())?;
    let preds = mask_source(&args.pred_dir, args.pred_manifest.as_deref())?;
    if truths.is_empty() {
        return Err(CommandError::invalid(format!(
            "{}: no ground-truth masks found",
            args.gt_dir.display()
        )));
    }
    let missing: Vec<String> = truths
        .keys()
        .filter(|id| !preds.contains_key(*id))
        .map(|id| format!("missing prediction for image {id}"))
        .collect();
    fail_if_any(missing)?;

    let opts = DecodeOptions {
        strict: args.strict_masks,
    };
    let ids: Vec<&String> = truths.keys().collect();
    let results: Vec<std::result::Result<(SegScore, bool), String>> = ids
        .par_iter()
        .map(|id| {
            let truth = load_mask(&truths[*id], opts)?;
            let pred = load_mask(&preds[*id], opts)?;
            score_image(id, &pred, &truth, args.od_rule).map_err(|e| e.to_string())
        })
        .collect();
    let mut scored = Vec::with_capacity(results.len());
    let mut problems = Vec::new();
    for r in results {
        match r {
            Ok(s) => scored.push(s),
            Err(e) => problems.push(e),
        }
    }
    fail_if_any(problems)?;

    let summary = summarize("", scored);
    let mut rows: Vec<SegRow> = summary.per_image.iter().map(SegRow::from).collect();
    rows.push(SegRow {
        image_id: MEAN_ROW.to_string(),
        dice_od: summary.mean_dice_od,
        dice_oc: summary.mean_dice_oc,
        vcdr_pred: summary.mean_vcdr_pred(),
        vcdr_true: summary.mean_vcdr_true(),
        abs_error: summary.mean_abs_error,
    });
    write_output(&args.out, &csv_text(SEG_SCORES_SCHEMA, &rows)?)?;

    let mut notes = vec![format!(
        "scored {} images: mean Dice OD {:.4}, mean Dice OC {:.4}, vCDR MAE {:.4}",
        summary.per_image.len(),
        summary.mean_dice_od,
        summary.mean_dice_oc,
        summary.mean_abs_error
    )];
    for id in &summary.empty_prediction_ids {
        notes.push(format!("image {id}: predicted disc is empty, vCDR set to 0"));
    }
    let extra = preds.keys().filter(|id| !truths.contains_key(*id)).count();
    if extra > 0 {
        notes.push(format!("{extra} prediction(s) without ground truth were ignored"));
    }
    Ok(notes)
}

/// Per-image rows and the `MEAN` row of a segmentation score file.
#[derive(Debug, Clone, PartialEq)]
pub struct SegScoreFile {
    pub rows: Vec<SegRow>,
    pub mean: SegRow,
}

pub fn read_seg_scores(path: &Path) -> CommandResult<SegScoreFile> {
    let mut rdr = csv_reader(path)?;
    check_header(
        path,
        &mut rdr,
        &["image_id", "dice_od", "dice_oc", "vcdr_pred", "vcdr_true", "abs_error"],
        &[],
    )?;
    let mut rows: Vec<SegRow> = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r.map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))?);
    }
    match rows.pop() {
        Some(mean) if mean.image_id == MEAN_ROW => Ok(SegScoreFile { rows, mean }),
        _ => Err(CommandError::invalid(format!(
            "{}: last row must be the {MEAN_ROW} row",
            path.display()
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct EvalClassArgs {
    pub scores: PathBuf,
    pub labels: PathBuf,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPointOut {
    pub fpr: f64,
    pub tpr: f64,
    /// `None` for the `(0, 0)` anchor, whose threshold is `+inf`.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvalReport {
    pub schema: String,
    pub format_version: String,
    pub n_positive: usize,
    pub n_negative: usize,
    pub auc: f64,
    pub specificity: f64,
    pub sensitivity_at_specificity: f64,
    pub roc: Vec<RocPointOut>,
}

/// Joins a likelihood map with labels; both must cover the same ids.
pub fn join_scores(
    scores: &BTreeMap<String, f64>,
    labels: &BTreeMap<String, Diagnosis>,
) -> CommandResult<ScoreTable> {
    let mut problems: Vec<String> = scores
        .keys()
        .filter(|id| !labels.contains_key(*id))
        .map(|id| format!("image {id} has a score but no label"))
        .collect();
    problems.extend(
        labels
            .keys()
            .filter(|id| !scores.contains_key(*id))
            .map(|id| format!("image {id} has a label but no score")),
    );
    fail_if_any(problems)?;
    let entries = scores
        .iter()
        .map(|(id, &likelihood)| ScoreEntry {
            image_id: id.clone(),
            likelihood,
            label: labels[id],
        })
        .collect();
    Ok(ScoreTable::new(entries)?)
}

pub fn class_report(table: &ScoreTable) -> CommandResult<(ClassEvalReport, RocCurve)> {
    let curve = roc_curve(table)?;
    let (n_positive, n_negative) = table.class_counts();
    let report = ClassEvalReport {
        schema: CLASS_EVAL_SCHEMA.to_string(),
        format_version: FORMAT_VERSION.to_string(),
        n_positive,
        n_negative,
        auc: curve.auc,
        specificity: REFERENCE_SPECIFICITY,
        sensitivity_at_specificity: sensitivity_at_specificity(&curve, REFERENCE_SPECIFICITY),
        roc: curve
            .points
            .iter()
            .map(|p| RocPointOut {
                fpr: p.fpr,
                tpr: p.tpr,
                threshold: p.threshold.is_finite().then_some(p.threshold),
            })
            .collect(),
    };
    Ok((report, curve))
}

/// Writes AUC, sensitivity at the reference specificity and the ROC points
/// as JSON, and optionally the ROC as SVG.
pub fn eval_class(args: &EvalClassArgs) -> CommandResult<Notes> {
    let scores = read_likelihoods(&args.scores);
    let labels = read_labels(&args.labels);
    let (scores, labels) = match (scores, labels) {
        (Ok(s), Ok(l)) => (s, l),
        (s, l) => {
            let mut problems = Vec::new();
            for e in [s.err(), l.err()].into_iter().flatten() {
                problems.extend(e.lines());
            }
            return Err(CommandError::Validation(problems));
        }
    };
    let table = join_scores(&scores, &labels)?;
    let (report, curve) = class_report(&table)?;
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CommandError::Internal(e.to_string()))?;
    json.push('\n');
    write_output(&args.out, json.as_bytes())?;
    if let Some(svg) = &args.svg {
        write_output(svg, roc_svg(&curve).as_bytes())?;
    }
    Ok(vec![format!(
        "AUC {:.4}, sensitivity {:.4} at specificity {}",
        report.auc, report.sensitivity_at_specificity, report.specificity
    )])
}

pub fn read_class_report(path: &Path) -> CommandResult<ClassEvalReport> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))
}

/// ROC curve as an SVG polyline with axis ticks every 0.25.
pub fn roc_svg(curve: &RocCurve) -> String {
    const SIZE: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const TOP: f64 = 30.0;
    let x = |fpr: f64| LEFT + fpr * SIZE;
    let y = |tpr: f64| TOP + (1.0 - tpr) * SIZE;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        SIZE + LEFT + 30.0,
        SIZE + TOP + 60.0,
        SIZE + LEFT + 30.0,
        SIZE + TOP + 60.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle">ROC (AUC = {:.4})</text>"#,
        x(0.5),
        curve.auc
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{SIZE:.1}" height="{SIZE:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=4 {
        let t = i as f64 * 0.25;
        writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.2}</text>"#,
            x(t),
            y(0.0),
            x(t),
            y(0.0) + 5.0,
            x(t),
            y(0.0) + 20.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{t:.2}</text>"#,
            x(0.0) - 5.0,
            y(t),
            x(0.0),
            y(t),
            x(0.0) - 8.0,
            y(t) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1 - specificity</text>"#,
        x(0.5),
        y(0.0) + 40.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">sensitivity</text>"#,
        y(0.5),
        y(0.5)
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    )
    .unwrap();
    let points: Vec<String> = curve
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr)))
        .collect();
    writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        points.join(" ")
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Reads a metrics file: `team_id,mean_dice_od,mean_dice_oc,mean_abs_error`
/// with an optional `auc` column. Blank cells load as missing values.
pub fn read_metrics(path: &Path) -> CommandResult<MetricTable> {
    let mut rdr = csv_reader(path)?;
    check_header(
        path,
        &mut rdr,
        &["team_id", "mean_dice_od", "mean_dice_oc", "mean_abs_error"],
        &["auc"],
    )?;
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let line = line_of(&rec);
        let mut cell = |i: usize| -> Option<f64> {
            let raw = rec.get(i).unwrap_or("");
            if raw.is_empty() {
                return None;
            }
            let v = parse_finite(raw);
            if v.is_none() {
                problems.push(format!(
                    "{}:{line}: value {raw:?} is not a finite number",
                    path.display()
                ));
            }
            v
        };
        let (od, oc, mae, auc) = (cell(1), cell(2), cell(3), cell(4));
        rows.push(MetricRow {
            team_id: rec[0].to_string(),
            mean_dice_od: od,
            mean_dice_oc: oc,
            mean_abs_error: mae,
            auc,
        });
    }
    fail_if_any(problems)?;
    Ok(MetricTable::new(rows)?)
}

#[derive(Serialize)]
struct MetricCsvRow<'a> {
    team_id: &'a str,
    mean_dice_od: Option<f64>,
    mean_dice_oc: Option<f64>,
    mean_abs_error: Option<f64>,
    auc: Option<f64>,
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> CommandResult {
    let rows = rows.iter().map(|r| MetricCsvRow {
        team_id: &r.team_id,
        mean_dice_od: r.mean_dice_od,
        mean_dice_oc: r.mean_dice_oc,
        mean_abs_error: r.mean_abs_error,
        auc: r.auc,
    });
    write_output(path, &csv_text(METRICS_SCHEMA, rows)?)
}

#[derive(Debug, Clone)]
pub struct RankArgs {
    pub metrics: PathBuf,
    pub weights: WeightPreset,
    /// Leaderboard CSV; the JSON goes next to it with a `.json` extension.
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardCsvRow {
    pub position: usize,
    pub team_id: String,
    pub mean_dice_od: f64,
    pub mean_dice_oc: f64,
    pub mean_abs_error: f64,
    pub r_dsc_od: f64,
    pub r_dsc_oc: f64,
    pub r_mae: f64,
    pub s_segm: f64,
    pub auc: Option<f64>,
    pub r_class: Option<f64>,
    pub s_val: Option<f64>,
    pub val_position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardReport {
    pub schema: String,
    pub format_version: String,
    #[serde(flatten)]
    pub leaderboard: Leaderboard,
}

pub fn leaderboard_json_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Builds the leaderboard and writes it as CSV and JSON.
pub fn rank(args: &RankArgs) -> CommandResult<Notes> {
    let json_path = leaderboard_json_path(&args.out);
    if json_path == args.out {
        return Err(CommandError::invalid(format!(
            "{}: leaderboard CSV path must not end in .json",
            args.out.display()
        )));
    }
    let table = read_metrics(&args.metrics)?;
    let incomplete: Vec<String> = table
        .rows()
        .iter()
        .filter(|r| r.mean_dice_od.is_none() || r.mean_dice_oc.is_none() || r.mean_abs_error.is_none())
        .map(|r| format!("team {} is missing a required metric", r.team_id))
        .collect();
    fail_if_any(incomplete)?;
    if table.rows().is_empty() {
        return Err(CommandError::invalid(format!(
            "{}: no teams listed",
            args.metrics.display()
        )));
    }
    let board = build_leaderboard(&table, args.weights)?;
    let by_team: BTreeMap<&str, &MetricRow> =
        table.rows().iter().map(|r| (r.team_id.as_str(), r)).collect();
    let rows = board.rows.iter().map(|r| {
        let m = by_team[r.team_id.as_str()];
        LeaderboardCsvRow {
            position: r.position,
            team_id: r.team_id.clone(),
            mean_dice_od: m.mean_dice_od.expect("checked complete"),
            mean_dice_oc: m.mean_dice_oc.expect("checked complete"),
            mean_abs_error: m.mean_abs_error.expect("checked complete"),
            r_dsc_od: r.r_dsc_od,
            r_dsc_oc: r.r_dsc_oc,
            r_mae: r.r_mae,
            s_segm: r.s_segm,
            auc: m.auc,
            r_class: r.r_class,
            s_val: r.s_val,
            val_position: r.val_position,
        }
    });
    write_output(&args.out, &csv_text(LEADERBOARD_SCHEMA, rows)?)?;
    let report = LeaderboardReport {
        schema: LEADERBOARD_SCHEMA.to_string(),
        format_version: FORMAT_VERSION.to_string(),
        leaderboard: board,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CommandError::Internal(e.to_string()))?;
    json.push('\n');
    write_output(&json_path, json.as_bytes())?;

    let mut notes = vec![format!(
        "ranked {} teams with {} weights",
        report.leaderboard.rows.len(),
        report.leaderboard.preset
    )];
    notes.extend(report.leaderboard.notes.iter().cloned());
    Ok(notes)
}

pub fn read_leaderboard(json_path: &Path) -> CommandResult<LeaderboardReport> {
    serde_json::from_str(&read_input(json_path)?)
        .map_err(|e| CommandError::invalid(format!("{}: {e}", json_path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Masks,
    Scores,
}

#[derive(Debug, Clone)]
pub struct EnsembleArgs {
    /// Mask directories (masks mode) or likelihood CSVs (scores mode).
    pub inputs: Vec<PathBuf>,
    pub mode: EnsembleMode,
    /// Output directory (masks mode) or CSV (scores mode).
    pub out: PathBuf,
    pub vote: VoteConfig,
    pub strict_masks: bool,
}

pub fn ensemble(args: &EnsembleArgs) -> CommandResult<Notes> {
    if args.inputs.len() < 2 {
        return Err(CommandError::invalid(format!(
            "ensembling needs at least two inputs, got {}",
            args.inputs.len()
        )));
    }
    match args.mode {
        EnsembleMode::Masks => ensemble_masks(args),
        EnsembleMode::Scores => ensemble_scores(args),
    }
}

fn ensemble_masks(args: &EnsembleArgs) -> CommandResult<Notes> {
    let indexes = args
        .inputs
        .iter()
        .map(|d| mask_dir_index(d))
        .collect::<CommandResult<Vec<_>>>()?;
    let reference: BTreeSet<&String> = indexes[0].keys().collect();
    let mut problems = Vec::new();
    for (dir, idx) in args.inputs.iter().zip(&indexes).skip(1) {
        let ids: BTreeSet<&String> = idx.keys().collect();
        for id in reference.difference(&ids) {
            problems.push(format!("{}: missing mask for image {id}", dir.display()));
        }
        for id in ids.difference(&reference) {
            problems.push(format!(
                "{}: image {id} is not in {}",
                dir.display(),
                args.inputs[0].display()
            ));
        }
    }
    fail_if_any(problems)?;
    if reference.is_empty() {
        return Err(CommandError::invalid(format!(
            "{}: no masks found",
            args.inputs[0].display()
        )));
    }
    let opts = DecodeOptions {
        strict: args.strict_masks,
    };
    let ids: Vec<&String> = reference.into_iter().collect();
    fs::create_dir_all(&args.out)
        .map_err(|e| CommandError::Internal(format!("{}: {e}", args.out.display())))?;
    let mut problems = Vec::new();
    for batch in ids.chunks(WRITE_BATCH) {
        let fused: Vec<std::result::Result<Vec<u8>, String>> = batch
            .par_iter()
            .map(|id| {
                let masks = indexes
                    .iter()
                    .map(|idx| load_mask(&idx[*id], opts))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                majority_vote(&masks, args.vote)
                    .map(|m| bmp::encode_mask(&m))
                    .map_err(|e| format!("image {id}: {e}"))
            })
            .collect();
        for (id, r) in batch.iter().zip(fused) {
            match r {
                Ok(bytes) => write_output(&args.out.join(format!("{id}.bmp")), &bytes)?,
                Err(e) => problems.push(e),
            }
        }
    }
    fail_if_any(problems)?;
    Ok(vec![format!(
        "fused {} masks from {} inputs",
        ids.len(),
        args.inputs.len()
    )])
}

fn ensemble_scores(args: &EnsembleArgs) -> CommandResult<Notes> {
    let mut maps = Vec::new();
    let mut problems = Vec::new();
    for p in &args.inputs {
        match read_likelihoods(p) {
            Ok(m) => maps.push(m),
            Err(e) => problems.extend(e.lines()),
        }
    }
    fail_if_any(problems)?;
    let fused = fuse_likelihoods(&maps)?;
    write_likelihoods(&args.out, fused.values.iter().map(|(k, v)| (k.as_str(), *v)))?;
    let mut notes = vec![format!(
        "fused {} likelihoods from {} inputs",
        fused.values.len(),
        maps.len()
    )];
    for (p, flat) in args.inputs.iter().zip(&fused.constant) {
        if *flat {
            notes.push(format!("{}: constant likelihoods, normalized to 0.5", p.display()));
        }
    }
    Ok(notes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[serde(alias = "wilcoxon_signed_rank")]
    SignedRank,
    #[serde(alias = "wilcoxon_rank_sum", alias = "mann_whitney")]
    RankSum,
    KruskalWallis,
    Delong,
}

impl TestKind {
    fn name(self) -> &'static str {
        match self {
            TestKind::SignedRank => "signed_rank",
            TestKind::RankSum => "rank_sum",
            TestKind::KruskalWallis => "kruskal_wallis",
            TestKind::Delong => "delong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRequest {
    /// Label copied to the output; defaults to `<kind>:<columns>`.
    #[serde(default)]
    pub name: Option<String>,
    pub kind: TestKind,
    /// Signed-rank and rank-sum: two columns. Kruskal-Wallis: two or more.
    /// DeLong: a 0/1 label column followed by two score columns.
    pub columns: Vec<String>,
    #[serde(default)]
    pub alternative: Alternative,
}

fn default_alpha() -> f64 {
    0.05
}

/// Declarative test request, read from TOML. Paths are relative to the
/// request file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsRequest {
    pub data: PathBuf,
    pub output: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Number of comparisons for the Bonferroni adjustment; 1 leaves alpha
    /// unchanged.
    #[serde(default)]
    pub bonferroni_m: Option<usize>,
    #[serde(rename = "test")]
    pub tests: Vec<TestRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub name: String,
    pub kind: String,
    pub columns: String,
    pub alternative: String,
    pub statistic: f64,
    pub z_or_chi2: f64,
    pub p_value: f64,
    pub method: String,
    pub n_effective: usize,
    pub degenerate: bool,
    pub alpha: f64,
    pub adjusted_alpha: f64,
    pub significant: bool,
    pub auc_a: Option<f64>,
    pub auc_b: Option<f64>,
}

/// Columns of the data file; blank cells are `None`.
struct DataColumns {
    columns: BTreeMap<String, Vec<Option<f64>>>,
    lines: Vec<u64>,
}

fn read_data_columns(path: &Path) -> CommandResult<DataColumns> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CommandError::invalid(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    let mut problems = Vec::new();
    for h in &header {
        if columns.insert(h.clone(), Vec::new()).is_some() {
            problems.push(format!("{}: duplicate column {h}", path.display()));
        }
    }
    fail_if_any(std::mem::take(&mut problems))?;
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let line = line_of(&rec);
        lines.push(line);
        for (h, raw) in header.iter().zip(rec.iter()) {
            let v = if raw.is_empty() {
                None
            } else {
                let v = parse_finite(raw);
                if v.is_none() {
                    problems.push(format!(
                        "{}:{line}: column {h}: {raw:?} is not a finite number",
                        path.display()
                    ));
                }
                v
            };
            columns.get_mut(h).expect("header column").push(v);
        }
    }
    fail_if_any(problems)?;
    Ok(DataColumns { columns, lines })
}

impl DataColumns {
    fn column(&self, name: &str) -> std::result::Result<&[Option<f64>], String> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| format!("unknown column {name:?}"))
    }

    fn present(&self, name: &str) -> std::result::Result<Vec<f64>, String> {
        Ok(self.column(name)?.iter().flatten().copied().collect())
    }
}

fn run_test(
    req: &TestRequest,
    data: &DataColumns,
) -> std::result::Result<(TestResult, Option<(f64, f64)>), String> {
    let cols = &req.columns;
    let want = |ok: bool, what: &str| if ok { Ok(()) } else { Err(what.to_string()) };
    if matches!(req.kind, TestKind::KruskalWallis | TestKind::Delong)
        && req.alternative != Alternative::TwoSided
    {
        return Err(format!("{} supports only the two_sided alternative", req.kind.name()));
    }
    match req.kind {
        TestKind::SignedRank => {
            want(cols.len() == 2, "signed_rank needs exactly two columns")?;
            let (a, b) = (data.column(&cols[0])?, data.column(&cols[1])?);
            let mut x = Vec::new();
            let mut y = Vec::new();
            for ((va, vb), line) in a.iter().zip(b).zip(&data.lines) {
                match (va, vb) {
                    (Some(u), Some(v)) => {
                        x.push(*u);
                        y.push(*v);
                    }
                    (None, None) => {}
                    _ => return Err(format!("line {line}: unpaired value")),
                }
            }
            wilcoxon_signed_rank(&x, &y, req.alternative)
                .map(|r| (r, None))
                .map_err(|e| e.to_string())
        }
        TestKind::RankSum => {
            want(cols.len() == 2, "rank_sum needs exactly two columns")?;
            rank_sum(&data.present(&cols[0])?, &data.present(&cols[1])?, req.alternative)
                .map(|r| (r, None))
                .map_err(|e| e.to_string())
        }
        TestKind::KruskalWallis => {
            want(cols.len() >= 2, "kruskal_wallis needs at least two columns")?;
            let groups = cols
                .iter()
                .map(|c| data.present(c))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            kruskal_wallis(&groups)
                .map(|r| (r, None))
                .map_err(|e| e.to_string())
        }
        TestKind::Delong => {
            want(cols.len() == 3, "delong needs a label column and two score columns")?;
            let (labels, a, b) = (
                data.column(&cols[0])?,
                data.column(&cols[1])?,
                data.column(&cols[2])?,
            );
            let mut ta = Vec::new();
            let mut tb = Vec::new();
            for (i, line) in data.lines.iter().enumerate() {
                let (Some(l), Some(sa), Some(sb)) = (labels[i], a[i], b[i]) else {
                    return Err(format!("line {line}: blank cell"));
                };
                let positive = match l {
                    1.0 => true,
                    0.0 => false,
                    _ => return Err(format!("line {line}: label {l} must be 0 or 1")),
                };
                let id = format!("line{line}");
                ta.push((id.clone(), sa, positive));
                tb.push((id, sb, positive));
            }
            let ta = ScoreTable::from_triples(ta).map_err(|e| e.to_string())?;
            let tb = ScoreTable::from_triples(tb).map_err(|e| e.to_string())?;
            delong_test(&ta, &tb)
                .map(|r| (r.test, Some((r.auc_a, r.auc_b))))
                .map_err(|e| e.to_string())
        }
    }
}

/// Runs every test in a request file and writes one result row per test.
pub fn stats(request_path: &Path) -> CommandResult<Notes> {
    let text = read_input(request_path)?;
    let req: StatsRequest = toml::from_str(&text)
        .map_err(|e| CommandError::invalid(format!("{}: {e}", request_path.display())))?;
    if !(req.alpha > 0.0 && req.alpha < 1.0) {
        return Err(CommandError::invalid(format!("alpha {} must lie in (0, 1)", req.alpha)));
    }
    let m = req.bonferroni_m.unwrap_or(1);
    if m == 0 {
        return Err(CommandError::invalid("bonferroni_m must be at least 1"));
    }
    if req.tests.is_empty() {
        return Err(CommandError::invalid(format!(
            "{}: no [[test]] entries",
            request_path.display()
        )));
    }
    let base = request_path.parent().unwrap_or(Path::new(""));
    let data = read_data_columns(&base.join(&req.data))?;
    let adjusted = bonferroni(req.alpha, m);

    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (i, t) in req.tests.iter().enumerate() {
        let name = t
            .name
            .clone()
            .unwrap_or_else(|| format!("{}:{}", t.kind.name(), t.columns.join(";")));
        match run_test(t, &data) {
            Ok((r, aucs)) => rows.push(StatsRow {
                name,
                kind: t.kind.name().to_string(),
                columns: t.columns.join(";"),
                alternative: t.alternative.to_string(),
                statistic: r.statistic,
                z_or_chi2: r.z_or_chi2,
                p_value: r.p_value,
                method: r.method.to_string(),
                n_effective: r.n_effective,
                degenerate: r.degenerate,
                alpha: req.alpha,
                adjusted_alpha: adjusted,
                significant: r.significant(adjusted),
                auc_a: aucs.map(|a| a.0),
                auc_b: aucs.map(|a| a.1),
            }),
            Err(e) => problems.push(format!("test {} ({name}): {e}", i + 1)),
        }
    }
    fail_if_any(problems)?;
    let out = base.join(&req.output);
    write_output(&out, &csv_text(STATS_SCHEMA, &rows)?)?;
    let significant = rows.iter().filter(|r| r.significant).count();
    Ok(vec![format!(
        "ran {} tests, {significant} significant at adjusted alpha {adjusted}",
        rows.len()
    )])
}

pub fn read_stats_results(path: &Path) -> CommandResult<Vec<StatsRow>> {
    let mut rdr = csv_reader(path)?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| CommandError::invalid(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    /// TOML config; defaults apply when absent.
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides the config's seed.
    pub seed: Option<u64>,
}

/// Relative path of a ground-truth mask inside a cohort tree.
pub fn gt_mask_path(image_id: &str) -> String {
    format!("gt/{image_id}.bmp")
}

/// Relative directory of a simulated team's masks inside a cohort tree.
pub fn team_dir(team: &str) -> String {
    format!("teams/{team}")
}

/// Relative path of a simulated team's likelihoods inside a cohort tree.
pub fn team_scores_path(team: &str) -> String {
    format!("scores/{team}.csv")
}

pub const TRUE_VCDR_SCORES: &str = "scores/true_vcdr.csv";

pub fn synth(args: &SynthArgs) -> CommandResult<Notes> {
    let mut cfg = match &args.config {
        Some(p) => SynthConfig::from_toml(&read_input(p)?)
            .map_err(|e| CommandError::invalid(format!("{}: {e}", p.display())))?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let cohort = generate_ground_truth(&cfg)?;
    write_cohort(&cohort, &args.out)?;
    Ok(vec![format!(
        "wrote {} images ({} glaucoma) and {} simulated teams to {}",
        cohort.len(),
        cohort.positives(),
        cfg.teams.len(),
        args.out.display()
    )])
}

/// Writes a cohort tree: resolved config, manifest, labels, ground-truth
/// masks, one mask directory and one likelihood table per team, and the
/// true-vCDR table.
pub fn write_cohort(cohort: &SynthCohort, out: &Path) -> CommandResult {
    let cfg = &cohort.config;
    let config_text =
        toml::to_string(cfg).map_err(|e| CommandError::Internal(format!("config encoding: {e}")))?;
    write_output(&out.join("config.toml"), config_text.as_bytes())?;

    let manifest = CohortManifest {
        format_version: FORMAT_VERSION.to_string(),
        images: cohort
            .images
            .iter()
            .map(|im| ManifestEntry {
                image_id: im.image_id.clone(),
                mask: gt_mask_path(&im.image_id),
                label: Some(im.label.is_positive() as u8),
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CommandError::Internal(e.to_string()))?;
    json.push('\n');
    write_output(&out.join("manifest.json"), json.as_bytes())?;
    write_labels(
        &out.join("labels.csv"),
        cohort.images.iter().map(|im| (im.image_id.as_str(), im.label)),
    )?;

    let n_teams = cfg.teams.len();
    for t in &cfg.teams {
        fs::create_dir_all(out.join(team_dir(&t.name)))
            .map_err(|e| CommandError::Internal(format!("{}: {e}", out.display())))?;
    }
    let indices: Vec<usize> = (0..cohort.len()).collect();
    for batch in indices.chunks(WRITE_BATCH) {
        let encoded: Vec<(Vec<u8>, Vec<Vec<u8>>)> = batch
            .par_iter()
            .map(|&i| {
                let gt = bmp::encode_mask(&cohort.ground_truth_mask(i));
                let teams = (0..n_teams)
                    .map(|t| bmp::encode_mask(&cohort.team_prediction(t, i)))
                    .collect();
                (gt, teams)
            })
            .collect();
        for (&i, (gt, teams)) in batch.iter().zip(encoded) {
            let id = &cohort.images[i].image_id;
            write_output(&out.join(gt_mask_path(id)), &gt)?;
            for (t, bytes) in cfg.teams.iter().zip(teams) {
                write_output(&out.join(team_dir(&t.name)).join(format!("{id}.bmp")), &bytes)?;
            }
        }
    }

    for (t, team) in cfg.teams.iter().enumerate() {
        let table = cohort.team_scores(t)?;
        write_likelihoods(
            &out.join(team_scores_path(&team.name)),
            table.entries().iter().map(|e| (e.image_id.as_str(), e.likelihood)),
        )?;
    }
    let truth = cohort.true_vcdr_scores()?;
    write_likelihoods(
        &out.join(TRUE_VCDR_SCORES),
        truth.entries().iter().map(|e| (e.image_id.as_str(), e.likelihood)),
    )?;
    Ok(())
}
