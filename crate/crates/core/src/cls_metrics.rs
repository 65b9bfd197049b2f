//! Classification scoring: ROC curves, AUC, reference sensitivity at a fixed
//! specificity, and binary operating points.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth diagnosis of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Glaucoma,
    NonGlaucoma,
}

impl Diagnosis {
    #[inline]
    pub fn is_positive(self) -> bool {
        self == Diagnosis::Glaucoma
    }

    pub fn from_flag(positive: bool) -> Self {
        if positive {
            Diagnosis::Glaucoma
        } else {
            Diagnosis::NonGlaucoma
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub image_id: String,
    pub likelihood: f64,
    pub label: Diagnosis,
}

/// Per-image glaucoma likelihoods with their reference labels.
///
/// Image ids are unique and likelihoods finite. Likelihoods need not lie in
/// `[0, 1]`; only their order matters for ROC analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !e.likelihood.is_finite() {
                return Err(Error::NonFiniteValue(format!(
                    "likelihood of image {}",
                    e.image_id
                )));
            }
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::DuplicateId(e.image_id.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// Convenience constructor from `(id, likelihood, positive)` triples.
    pub fn from_triples<S: Into<String>>(
        triples: impl IntoIterator<Item = (S, f64, bool)>,
    ) -> Result<Self> {
        Self::new(
            triples
                .into_iter()
                .map(|(id, likelihood, pos)| ScoreEntry {
                    image_id: id.into(),
                    likelihood,
                    label: Diagnosis::from_flag(pos),
                })
                .collect(),
        )
    }

    /// Builds a table from positive and negative likelihoods, with generated
    /// ids `p0, p1, ...` and `n0, n1, ...`.
    pub fn from_classes(positives: &[f64], negatives: &[f64]) -> Result<Self> {
        let pos = positives
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("p{i}"), v, true));
        let neg = negatives
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("n{i}"), v, false));
        Self::from_triples(pos.chain(neg))
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ScoreEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }

    /// Entries keyed by image id.
    pub fn by_id(&self) -> BTreeMap<&str, &ScoreEntry> {
        self.entries
            .iter()
            .map(|e| (e.image_id.as_str(), e))
            .collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label.is_positive()).count();
        (pos, self.entries.len() - pos)
    }

    pub(crate) fn split_classes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (pos, neg): (Vec<&ScoreEntry>, Vec<&ScoreEntry>) =
            self.entries.iter().partition(|e| e.label.is_positive());
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::DegenerateLabels);
        }
        Ok((
            pos.iter().map(|e| e.likelihood).collect(),
            neg.iter().map(|e| e.likelihood).collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Likelihood at or above which cases are called positive. The `(0, 0)`
    /// anchor has threshold `+inf`.
    pub threshold: f64,
}

/// Empirical ROC curve with its trapezoidal area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Builds the empirical ROC curve by sweeping thresholds over the distinct
/// likelihoods in descending order. Tied likelihoods form a single step.
pub fn roc_curve(t: &ScoreTable) -> Result<RocCurve> {
    let (n_pos, n_neg) = t.class_counts();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut sorted: Vec<(f64, bool)> = t
        .entries()
        .iter()
        .map(|e| (e.likelihood, e.label.is_positive()))
        .collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold,
        });
    }
    let auc = trapezoid_area(&points);
    Ok(RocCurve { points, auc })
}

fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Mann-Whitney estimate of the AUC: the fraction of positive/negative pairs
/// ordered correctly, ties counted as half.
pub fn auc_mann_whitney(t: &ScoreTable) -> Result<f64> {
    let (pos, neg) = t.split_classes()?;
    Ok(auc_from_samples(&pos, &neg))
}

/// Mann-Whitney AUC from raw positive and negative scores via midranks.
pub(crate) fn auc_from_samples(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&v| (v, true))
        .chain(neg.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let midrank = (i + 1 + j) as f64 / 2.0;
        let n_pos_here = all[i..j].iter().filter(|x| x.1).count();
        pos_rank_sum += midrank * n_pos_here as f64;
        i = j;
    }
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    (pos_rank_sum - m * (m + 1.0) / 2.0) / (m * n)
}

/// Distance below which a target false positive rate is taken to coincide
/// with a curve vertex.
const FPR_COINCIDENCE: f64 = 1e-12;

/// Sensitivity read off the ROC curve at the given specificity.
///
/// When `1 - sp` coincides with one or more curve vertices the largest of
/// their true positive rates is returned; otherwise the rate is linearly
/// interpolated between the bracketing vertices.
pub fn sensitivity_at_specificity(c: &RocCurve, sp: f64) -> f64 {
    let target = 1.0 - sp;
    let pts = &c.points;
    let on_vertex = pts
        .iter()
        .filter(|p| (p.fpr - target).abs() <= FPR_COINCIDENCE)
        .map(|p| p.tpr)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
    if let Some(tpr) = on_vertex {
        return tpr;
    }
    // first vertex beyond the target; the one before it lies below
    let hi = pts
        .iter()
        .position(|p| p.fpr > target)
        .unwrap_or(pts.len() - 1);
    if hi == 0 {
        return pts[0].tpr;
    }
    let (a, b) = (&pts[hi - 1], &pts[hi]);
    let span = b.fpr - a.fpr;
    if span <= 0.0 {
        return a.tpr.max(b.tpr);
    }
    a.tpr + (b.tpr - a.tpr) * (target - a.fpr) / span
}

/// Reference operating point at specificity 0.85.
pub const REFERENCE_SPECIFICITY: f64 = 0.85;

/// Sensitivity, specificity and accuracy of a set of binary calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn check_same_ids<A, B>(a: &BTreeMap<String, A>, b: &BTreeMap<String, B>) -> Result<()> {
    let only_a: Vec<&str> = a
        .keys()
        .filter(|k| !b.contains_key(*k))
        .map(String::as_str)
        .collect();
    let only_b: Vec<&str> = b
        .keys()
        .filter(|k| !a.contains_key(*k))
        .map(String::as_str)
        .collect();
    if only_a.is_empty() && only_b.is_empty() {
        return Ok(());
    }
    Err(Error::IdMismatch(format!(
        "only in first: [{}]; only in second: [{}]",
        only_a.join(", "),
        only_b.join(", ")
    )))
}

/// Confusion-matrix rates of binary predictions against reference labels.
pub fn operating_point(
    binary_preds: &BTreeMap<String, bool>,
    labels: &BTreeMap<String, bool>,
) -> Result<OperatingPoint> {
    check_same_ids(binary_preds, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (id, &truth) in labels {
        match (binary_preds[id], truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    if tp + fn_ == 0 || tn + fp == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(OperatingPoint {
        sensitivity: tp as f64 / (tp + fn_) as f64,
        specificity: tn as f64 / (tn + fp) as f64,
        accuracy: (tp + tn) as f64 / labels.len() as f64,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Fraction of images on which two raters agree.
pub fn agreement(a: &BTreeMap<String, bool>, b: &BTreeMap<String, bool>) -> Result<f64> {
    check_same_ids(a, b)?;
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    let same = a.iter().filter(|(k, v)| b[*k] == **v).count();
    Ok(same as f64 / a.len() as f64)
}
