//! Segmentation scoring: Dice overlap for the optic disc and cup, vertical
//! diameters, vertical cup-to-disc ratio (vCDR) and its absolute error.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{region_of_with, LabelMask, OdRule, RegionKind, RegionMask};

/// Dice coefficient `2|a∩b| / (|a| + |b|)`.
///
/// Two empty regions agree perfectly (1.0); an empty region against a
/// nonempty one scores 0.
pub fn dice(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "regions are {:?} and {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.members().iter().zip(b.members()) {
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    Ok(dice_from_counts(na, nb, both))
}

#[inline]
fn dice_from_counts(na: usize, nb: usize, both: usize) -> f64 {
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// Inclusive row extent of a region: `max_row - min_row + 1`, 0 when empty.
pub fn vertical_diameter(r: &RegionMask) -> u32 {
    let occupied = |row: &[bool]| row.iter().any(|&m| m);
    match (r.rows().position(occupied), r.rows().rposition(occupied)) {
        (Some(first), Some(last)) => (last - first + 1) as u32,
        _ => 0,
    }
}

/// A vCDR value together with the degenerate-disc flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vcdr {
    pub value: f64,
    /// Set when the disc region is empty; `value` is then 0.
    pub empty_disc: bool,
}

/// Vertical cup-to-disc ratio of a mask.
pub fn vcdr(mask: &LabelMask) -> Vcdr {
    vcdr_with(mask, OdRule::default())
}

pub fn vcdr_with(mask: &LabelMask, rule: OdRule) -> Vcdr {
    let od = vertical_diameter(&region_of_with(mask, RegionKind::OpticDisc, rule));
    let oc = vertical_diameter(&region_of_with(mask, RegionKind::OpticCup, rule));
    ratio(oc, od)
}

#[inline]
fn ratio(cup_diameter: u32, disc_diameter: u32) -> Vcdr {
    if disc_diameter == 0 {
        Vcdr {
            value: 0.0,
            empty_disc: true,
        }
    } else {
        Vcdr {
            value: cup_diameter as f64 / disc_diameter as f64,
            empty_disc: false,
        }
    }
}

/// Per-image segmentation scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScore {
    pub image_id: String,
    pub dice_od: f64,
    pub dice_oc: f64,
    pub vcdr_pred: f64,
    pub vcdr_true: f64,
    pub abs_error: f64,
}

/// Cohort-level segmentation results for one team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegSummary {
    pub team_id: String,
    pub mean_dice_od: f64,
    pub mean_dice_oc: f64,
    pub mean_abs_error: f64,
    pub per_image: Vec<SegScore>,
    /// Images whose prediction has an empty disc region (vCDR scored as 0).
    pub empty_prediction_ids: Vec<String>,
}

impl SegSummary {
    pub fn mean_vcdr_pred(&self) -> f64 {
        mean(self.per_image.iter().map(|s| s.vcdr_pred))
    }

    pub fn mean_vcdr_true(&self) -> f64 {
        mean(self.per_image.iter().map(|s| s.vcdr_true))
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    values.sum::<f64>() / n as f64
}

/// Single-pass region statistics of a prediction/truth pair.
#[derive(Debug, Default, Clone, Copy)]
struct PairCounts {
    od: [usize; 3],
    oc: [usize; 3],
    pred_od_rows: RowExtent,
    pred_oc_rows: RowExtent,
    true_od_rows: RowExtent,
    true_oc_rows: RowExtent,
}

#[derive(Debug, Default, Clone, Copy)]
struct RowExtent(Option<(u32, u32)>);

impl RowExtent {
    #[inline]
    fn add(&mut self, row: u32) {
        self.0 = Some(match self.0 {
            None => (row, row),
            Some((lo, _)) => (lo, row),
        });
    }

    #[inline]
    fn diameter(self) -> u32 {
        self.0.map_or(0, |(lo, hi)| hi - lo + 1)
    }
}

fn count_pair(pred: &LabelMask, truth: &LabelMask, rule: OdRule) -> PairCounts {
    let mut c = PairCounts::default();
    let od_of = |l| {
        region_member(l, RegionKind::OpticDisc, rule)
    };
    for (y, (prow, trow)) in pred.rows().zip(truth.rows()).enumerate() {
        let (mut pod_row, mut poc_row, mut tod_row, mut toc_row) = (false, false, false, false);
        for (&p, &t) in prow.iter().zip(trow) {
            let (pod, tod) = (od_of(p), od_of(t));
            let (poc, toc) = (p == crate::PixelLabel::Cup, t == crate::PixelLabel::Cup);
            c.od[0] += pod as usize;
            c.od[1] += tod as usize;
            c.od[2] += (pod && tod) as usize;
            c.oc[0] += poc as usize;
            c.oc[1] += toc as usize;
            c.oc[2] += (poc && toc) as usize;
            pod_row |= pod;
            poc_row |= poc;
            tod_row |= tod;
            toc_row |= toc;
        }
        let y = y as u32;
        if pod_row {
            c.pred_od_rows.add(y);
        }
        if poc_row {
            c.pred_oc_rows.add(y);
        }
        if tod_row {
            c.true_od_rows.add(y);
        }
        if toc_row {
            c.true_oc_rows.add(y);
        }
    }
    c
}

#[inline]
fn region_member(l: crate::PixelLabel, kind: RegionKind, rule: OdRule) -> bool {
    use crate::PixelLabel::*;
    match kind {
        RegionKind::OpticCup => l == Cup,
        RegionKind::OpticDisc => l == Disc || (l == Cup && rule == OdRule::CupAndDisc),
    }
}

/// Scores one prediction against its reference mask.
///
/// Returns the score and whether the prediction's disc region was empty.
pub fn score_image(
    image_id: &str,
    pred: &LabelMask,
    truth: &LabelMask,
    rule: OdRule,
) -> Result<(SegScore, bool)> {
    if pred.dimensions() != truth.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "image {image_id}: prediction is {:?}, ground truth is {:?}",
            pred.dimensions(),
            truth.dimensions()
        )));
    }
    let c = count_pair(pred, truth, rule);
    let truth_ratio = ratio(c.true_oc_rows.diameter(), c.true_od_rows.diameter());
    if truth_ratio.empty_disc {
        return Err(Error::InvalidGroundTruth(image_id.to_string()));
    }
    let pred_ratio = ratio(c.pred_oc_rows.diameter(), c.pred_od_rows.diameter());
    Ok((
        SegScore {
            image_id: image_id.to_string(),
            dice_od: dice_from_counts(c.od[0], c.od[1], c.od[2]),
            dice_oc: dice_from_counts(c.oc[0], c.oc[1], c.oc[2]),
            vcdr_pred: pred_ratio.value,
            vcdr_true: truth_ratio.value,
            abs_error: (pred_ratio.value - truth_ratio.value).abs(),
        },
        pred_ratio.empty_disc,
    ))
}

/// Scores a team's predictions against the reference masks.
///
/// Every reference image needs a prediction; extra predictions are ignored.
/// Output is ordered by image id.
pub fn evaluate_segmentation(
    team_id: &str,
    predictions: &BTreeMap<String, LabelMask>,
    truths: &BTreeMap<String, LabelMask>,
) -> Result<SegSummary> {
    evaluate_segmentation_with(team_id, predictions, truths, OdRule::default())
}

pub fn evaluate_segmentation_with(
    team_id: &str,
    predictions: &BTreeMap<String, LabelMask>,
    truths: &BTreeMap<String, LabelMask>,
    rule: OdRule,
) -> Result<SegSummary> {
    let missing: Vec<String> = truths
        .keys()
        .filter(|id| !predictions.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPrediction(missing));
    }
    let pairs: Vec<(&String, &LabelMask)> = truths.iter().collect();
    let scored = pairs
        .par_iter()
        .map(|(id, truth)| score_image(id, &predictions[*id], truth, rule))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(team_id, scored))
}

/// Builds a summary from per-image scores, sorting them by image id.
pub fn summarize(team_id: &str, mut scored: Vec<(SegScore, bool)>) -> SegSummary {
    scored.sort_by(|a, b| a.0.image_id.cmp(&b.0.image_id));
    let empty_prediction_ids = scored
        .iter()
        .filter(|(_, empty)| *empty)
        .map(|(s, _)| s.image_id.clone())
        .collect();
    let per_image: Vec<SegScore> = scored.into_iter().map(|(s, _)| s).collect();
    SegSummary {
        team_id: team_id.to_string(),
        mean_dice_od: mean(per_image.iter().map(|s| s.dice_od)),
        mean_dice_oc: mean(per_image.iter().map(|s| s.dice_oc)),
        mean_abs_error: mean(per_image.iter().map(|s| s.abs_error)),
        per_image,
        empty_prediction_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{region_of, PixelLabel};
    use proptest::prelude::*;

    fn region(w: u32, h: u32, pts: &[(u32, u32)]) -> RegionMask {
        let mut r = RegionMask::empty(w, h);
        for &(x, y) in pts {
            r.insert(x, y);
        }
        r
    }

    #[test]
    fn dice_basics() {
        let a = region(4, 4, &[(0, 0), (1, 1)]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = region(4, 4, &[(3, 3)]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let e = RegionMask::empty(4, 4);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(dice(&e, &a).unwrap(), 0.0);
        assert!(matches!(
            dice(&a, &RegionMask::empty(4, 5)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dice_half_overlap() {
        let a = region(4, 4, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let b = region(4, 4, &[(2, 0), (3, 0), (0, 1), (1, 1)]);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn vertical_diameter_cases() {
        assert_eq!(vertical_diameter(&RegionMask::empty(3, 3)), 0);
        assert_eq!(vertical_diameter(&region(3, 3, &[(1, 1)])), 1);
        let r = region(5, 10, &[(0, 3), (4, 5), (2, 7)]);
        assert_eq!(vertical_diameter(&r), 5);
    }

    #[test]
    fn vcdr_ratio_and_degenerate() {
        let mut m = LabelMask::filled(3, 12, PixelLabel::Background);
        for y in 1..11 {
            m.set(1, y, PixelLabel::Disc);
        }
        for y in 3..8 {
            m.set(1, y, PixelLabel::Cup);
        }
        let v = vcdr(&m);
        assert_eq!(v.value, 0.5);
        assert!(!v.empty_disc);

        let bg = LabelMask::filled(4, 4, PixelLabel::Background);
        assert_eq!(
            vcdr(&bg),
            Vcdr {
                value: 0.0,
                empty_disc: true
            }
        );
    }

    /// Axis-aligned ellipse by pixel-center inclusion, written independently
    /// of the synthetic generator.
    fn nested_ellipse_mask(size: u32, disc_semi: f64, cup_semi: f64) -> LabelMask {
        let c = (size / 2) as f64;
        let mut m = LabelMask::filled(size, size, PixelLabel::Background);
        for y in 0..size {
            for x in 0..size {
                let (dx, dy) = (x as f64 - c, y as f64 - c);
                let inside = |a: f64, b: f64| (dx / a).powi(2) + (dy / b).powi(2) <= 1.0;
                if inside(cup_semi * 1.2, cup_semi) {
                    m.set(x, y, PixelLabel::Cup);
                } else if inside(disc_semi * 1.1, disc_semi) {
                    m.set(x, y, PixelLabel::Disc);
                }
            }
        }
        m
    }

    #[test]
    fn vcdr_of_nested_ellipses() {
        let m = nested_ellipse_mask(128, 50.0, 20.0);
        // count occupied rows directly
        let rows_with = |pred: &dyn Fn(PixelLabel) -> bool| {
            m.rows().filter(|r| r.iter().any(|&l| pred(l))).count()
        };
        let od_rows = rows_with(&|l| l != PixelLabel::Background);
        let oc_rows = rows_with(&|l| l == PixelLabel::Cup);
        assert_eq!((oc_rows, od_rows), (41, 101));
        assert!((vcdr(&m).value - 41.0 / 101.0).abs() < 1e-15);
        assert!((vcdr(&m).value - 0.4059).abs() < 1e-4);
    }

    #[test]
    fn evaluate_identical() {
        let mut truths = BTreeMap::new();
        for (i, (d, c)) in [(20.0, 8.0), (25.0, 15.0), (18.0, 5.0)].iter().enumerate() {
            truths.insert(format!("img{i}"), nested_ellipse_mask(64, *d, *c));
        }
        let s = evaluate_segmentation("t", &truths, &truths).unwrap();
        assert_eq!(s.mean_dice_od, 1.0);
        assert_eq!(s.mean_dice_oc, 1.0);
        assert_eq!(s.mean_abs_error, 0.0);
        assert_eq!(s.per_image.len(), 3);
        assert!(s.empty_prediction_ids.is_empty());
    }

    #[test]
    fn evaluate_errors() {
        let gt = nested_ellipse_mask(32, 10.0, 4.0);
        let truths: BTreeMap<_, _> = [("a".to_string(), gt.clone()), ("b".to_string(), gt.clone())]
            .into_iter()
            .collect();
        let preds: BTreeMap<_, _> = [("a".to_string(), gt.clone())].into_iter().collect();
        match evaluate_segmentation("t", &preds, &truths) {
            Err(Error::MissingPrediction(ids)) => assert_eq!(ids, vec!["b".to_string()]),
            other => panic!("{other:?}"),
        }

        let preds: BTreeMap<_, _> = [
            ("a".to_string(), gt.clone()),
            ("b".to_string(), LabelMask::filled(31, 32, PixelLabel::Background)),
        ]
        .into_iter()
        .collect();
        assert!(matches!(
            evaluate_segmentation("t", &preds, &truths),
            Err(Error::DimensionMismatch(_))
        ));

        let bad_truths: BTreeMap<_, _> =
            [("a".to_string(), LabelMask::filled(32, 32, PixelLabel::Background))]
                .into_iter()
                .collect();
        assert!(matches!(
            evaluate_segmentation("t", &bad_truths, &bad_truths),
            Err(Error::InvalidGroundTruth(_))
        ));
    }

    #[test]
    fn empty_prediction_is_scored_and_flagged() {
        let gt = nested_ellipse_mask(32, 10.0, 4.0);
        let truths: BTreeMap<_, _> = [("a".to_string(), gt.clone())].into_iter().collect();
        let preds: BTreeMap<_, _> =
            [("a".to_string(), LabelMask::filled(32, 32, PixelLabel::Background))]
                .into_iter()
                .collect();
        let s = evaluate_segmentation("t", &preds, &truths).unwrap();
        assert_eq!(s.per_image[0].dice_od, 0.0);
        assert_eq!(s.per_image[0].vcdr_pred, 0.0);
        assert_eq!(s.empty_prediction_ids, vec!["a".to_string()]);
    }

    #[test]
    fn abs_error_arithmetic() {
        let s = summarize(
            "t",
            vec![(
                SegScore {
                    image_id: "x".into(),
                    dice_od: 1.0,
                    dice_oc: 1.0,
                    vcdr_pred: 0.60,
                    vcdr_true: 0.45,
                    abs_error: (0.60f64 - 0.45).abs(),
                },
                false,
            )],
        );
        assert!((s.mean_abs_error - 0.15).abs() < 1e-12);
    }

    fn arb_mask(w: u32, h: u32) -> impl Strategy<Value = LabelMask> {
        proptest::collection::vec(0u8..3, (w * h) as usize).prop_map(move |v| {
            let labels = v
                .into_iter()
                .map(|k| [PixelLabel::Cup, PixelLabel::Disc, PixelLabel::Background][k as usize])
                .collect();
            LabelMask::from_labels(w, h, labels).unwrap()
        })
    }

    proptest! {
        #[test]
        fn dice_symmetric_and_bounded(a in arb_mask(9, 7), b in arb_mask(9, 7)) {
            for kind in [RegionKind::OpticDisc, RegionKind::OpticCup] {
                let (ra, rb) = (region_of(&a, kind), region_of(&b, kind));
                let d1 = dice(&ra, &rb).unwrap();
                let d2 = dice(&rb, &ra).unwrap();
                prop_assert_eq!(d1, d2);
                prop_assert!((0.0..=1.0).contains(&d1));
                prop_assert_eq!(d1 == 1.0, ra == rb);
            }
        }

        #[test]
        fn vcdr_in_unit_interval(m in arb_mask(8, 11)) {
            let v = vcdr(&m);
            prop_assert!((0.0..=1.0).contains(&v.value));
        }

        #[test]
        fn fused_scores_match_region_route(a in arb_mask(10, 6), b in arb_mask(10, 6)) {
            let tv = vcdr(&b);
            prop_assume!(!tv.empty_disc);
            let (s, empty) = score_image("x", &a, &b, OdRule::CupAndDisc).unwrap();
            let od = dice(&region_of(&a, RegionKind::OpticDisc), &region_of(&b, RegionKind::OpticDisc)).unwrap();
            let oc = dice(&region_of(&a, RegionKind::OpticCup), &region_of(&b, RegionKind::OpticCup)).unwrap();
            prop_assert_eq!(s.dice_od, od);
            prop_assert_eq!(s.dice_oc, oc);
            prop_assert_eq!(s.vcdr_pred, vcdr(&a).value);
            prop_assert_eq!(s.vcdr_true, tv.value);
            prop_assert_eq!(empty, vcdr(&a).empty_disc);
        }

        #[test]
        fn abs_error_swap_invariant(a in arb_mask(7, 7), b in arb_mask(7, 7)) {
            prop_assume!(!vcdr(&a).empty_disc && !vcdr(&b).empty_disc);
            let (ab, _) = score_image("x", &a, &b, OdRule::CupAndDisc).unwrap();
            let (ba, _) = score_image("x", &b, &a, OdRule::CupAndDisc).unwrap();
            prop_assert_eq!(ab.abs_error, ba.abs_error);
            prop_assert_eq!(ab.dice_od, ba.dice_od);
        }

        #[test]
        fn translation_invariant(a in arb_mask(6, 5), b in arb_mask(6, 5), dx in 0u32..5, dy in 0u32..5) {
            prop_assume!(!vcdr(&b).empty_disc);
            let shift = |m: &LabelMask| {
                let mut out = LabelMask::filled(12, 11, PixelLabel::Background);
                for y in 0..m.height() {
                    for x in 0..m.width() {
                        out.set(x + dx, y + dy, m.get(x, y));
                    }
                }
                out
            };
            let (s0, _) = score_image("x", &a, &b, OdRule::CupAndDisc).unwrap();
            let (s1, _) = score_image("x", &shift(&a), &shift(&b), OdRule::CupAndDisc).unwrap();
            prop_assert_eq!(s0, s1);
        }
    }
}
