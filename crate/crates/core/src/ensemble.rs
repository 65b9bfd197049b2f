//! Fusion of several teams' outputs: pixel-wise voting of label masks and
//! averaging of min-max normalized likelihoods.

use std::collections::BTreeMap;

use crate::cls_metrics::{Diagnosis, ScoreEntry, ScoreTable};
use crate::error::{Error, Result};
use crate::mask::{LabelMask, PixelLabel};

/// Voting rule for [`majority_vote`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteConfig {
    threshold_fraction: f64,
    inclusive: bool,
}

impl Default for VoteConfig {
    /// Strict majority: more than half of the masks.
    fn default() -> Self {
        Self {
            threshold_fraction: 0.5,
            inclusive: false,
        }
    }
}

impl VoteConfig {
    /// A pixel joins a region when its vote count exceeds
    /// `threshold_fraction · n`.
    pub fn more_than(threshold_fraction: f64) -> Result<Self> {
        Self::validate(threshold_fraction)?;
        Ok(Self {
            threshold_fraction,
            inclusive: false,
        })
    }

    /// A pixel joins a region when its vote count reaches
    /// `threshold_fraction · n`, e.g. `at_least(0.8)` for an 80% rule.
    pub fn at_least(threshold_fraction: f64) -> Result<Self> {
        Self::validate(threshold_fraction)?;
        Ok(Self {
            threshold_fraction,
            inclusive: true,
        })
    }

    pub fn threshold_fraction(&self) -> f64 {
        self.threshold_fraction
    }

    fn validate(f: f64) -> Result<()> {
        if f > 0.0 && f <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "vote threshold fraction must lie in (0, 1], got {f}"
            )))
        }
    }

    /// Smallest vote count that passes for `n` voters.
    fn min_votes(&self, n: usize) -> usize {
        let mut bar = self.threshold_fraction * n as f64;
        // 0.8 * 5 must count as exactly 4 votes
        if (bar - bar.round()).abs() < 1e-9 {
            bar = bar.round();
        }
        let min = if self.inclusive {
            bar.ceil()
        } else {
            bar.floor() + 1.0
        };
        min.max(1.0) as usize
    }
}

/// Fuses masks by voting separately on the disc region (cup or disc pixels)
/// and the cup region (cup pixels).
///
/// A cup vote always implies a disc vote, so the fused cup lies inside the
/// fused disc.
pub fn majority_vote(masks: &[LabelMask], cfg: VoteConfig) -> Result<LabelMask> {
    if masks.len() < 2 {
        return Err(Error::TooFewMasks(masks.len()));
    }
    let dims = masks[0].dimensions();
    if let Some(m) = masks.iter().find(|m| m.dimensions() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {:?}, expected {dims:?}",
            m.dimensions()
        )));
    }
    let need = cfg.min_votes(masks.len());
    let n_px = masks[0].labels().len();
    let mut od_votes = vec![0u16; n_px];
    let mut oc_votes = vec![0u16; n_px];
    for m in masks {
        for ((od, oc), &l) in od_votes.iter_mut().zip(oc_votes.iter_mut()).zip(m.labels()) {
            *od += (l != PixelLabel::Background) as u16;
            *oc += (l == PixelLabel::Cup) as u16;
        }
    }
    let labels = od_votes
        .iter()
        .zip(&oc_votes)
        .map(|(&od, &oc)| {
            if oc as usize >= need {
                PixelLabel::Cup
            } else if od as usize >= need {
                PixelLabel::Disc
            } else {
                PixelLabel::Background
            }
        })
        .collect();
    LabelMask::from_labels(dims.0, dims.1, labels)
}

/// Result of [`normalize_scores`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub table: ScoreTable,
    /// Set when every likelihood was equal; all values are then 0.5.
    pub constant: bool,
}

/// Min-max rescaling of values into `[0, 1]`. A constant input maps to 0.5
/// and is flagged.
pub fn min_max_normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || max <= min {
        return (vec![0.5; values.len()], true);
    }
    let span = max - min;
    (values.iter().map(|v| (v - min) / span).collect(), false)
}

/// Rescales a table's likelihoods to `[0, 1]` by min-max normalization.
pub fn normalize_scores(t: &ScoreTable) -> Normalized {
    let values: Vec<f64> = t.entries().iter().map(|e| e.likelihood).collect();
    let (scaled, constant) = min_max_normalize(&values);
    let entries = t
        .entries()
        .iter()
        .zip(scaled)
        .map(|(e, v)| ScoreEntry {
            likelihood: v,
            ..e.clone()
        })
        .collect();
    Normalized {
        table: ScoreTable::new(entries).expect("ids unchanged and values finite"),
        constant,
    }
}

/// Per-image mean of several (already normalized) likelihood tables, ordered
/// by image id.
pub fn average_scores(tables: &[ScoreTable]) -> Result<ScoreTable> {
    let Some(first) = tables.first() else {
        return Err(Error::EmptySample);
    };
    let reference = first.by_id();
    let mut values: BTreeMap<&str, (Vec<f64>, Diagnosis)> = reference
        .iter()
        .map(|(&id, e)| (id, (Vec::with_capacity(tables.len()), e.label)))
        .collect();
    for (k, t) in tables.iter().enumerate() {
        let ids = t.by_id();
        if ids.len() != reference.len() || ids.keys().any(|id| !reference.contains_key(id)) {
            return Err(Error::IdMismatch(format!(
                "table {k} covers a different image set than table 0"
            )));
        }
        for (id, e) in ids {
            let slot = values.get_mut(id).expect("id sets checked above");
            if slot.1 != e.label {
                return Err(Error::LabelConflict(id.to_string()));
            }
            slot.0.push(e.likelihood);
        }
    }
    let n = tables.len() as f64;
    ScoreTable::new(
        values
            .into_iter()
            .map(|(id, (mut v, label))| {
                // summing in sorted order makes the mean independent of table order
                v.sort_by(f64::total_cmp);
                ScoreEntry {
                    image_id: id.to_string(),
                    likelihood: v.iter().sum::<f64>() / n,
                    label,
                }
            })
            .collect(),
    )
}

/// Normalizes each table and averages them.
pub fn fuse_scores(tables: &[ScoreTable]) -> Result<ScoreTable> {
    let normalized: Vec<ScoreTable> = tables.iter().map(|t| normalize_scores(t).table).collect();
    average_scores(&normalized)
}

/// Fused likelihoods of unlabelled `image_id -> likelihood` maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedLikelihoods {
    pub values: BTreeMap<String, f64>,
    /// Per input: whether it was constant before normalization.
    pub constant: Vec<bool>,
}

/// Label-free counterpart of [`fuse_scores`]: min-max normalizes each map
/// and averages per image id.
pub fn fuse_likelihoods(maps: &[BTreeMap<String, f64>]) -> Result<FusedLikelihoods> {
    let Some(first) = maps.first() else {
        return Err(Error::EmptySample);
    };
    let mut columns: BTreeMap<&str, Vec<f64>> = first
        .keys()
        .map(|id| (id.as_str(), Vec::with_capacity(maps.len())))
        .collect();
    let mut constant = Vec::with_capacity(maps.len());
    for (k, m) in maps.iter().enumerate() {
        if m.len() != first.len() || m.keys().any(|id| !first.contains_key(id)) {
            return Err(Error::IdMismatch(format!(
                "input {k} covers a different image set than input 0"
            )));
        }
        if let Some((id, v)) = m.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("likelihood {v} for {id}")));
        }
        let raw: Vec<f64> = m.values().copied().collect();
        let (scaled, flat) = min_max_normalize(&raw);
        constant.push(flat);
        for (id, v) in m.keys().zip(scaled) {
            columns.get_mut(id.as_str()).expect("id sets checked above").push(v);
        }
    }
    let n = maps.len() as f64;
    let values = columns
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_by(f64::total_cmp);
            (id.to_string(), v.iter().sum::<f64>() / n)
        })
        .collect();
    Ok(FusedLikelihoods { values, constant })
}
