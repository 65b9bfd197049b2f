//! Rank aggregation and weighted leaderboard scores.
//!
//! Each team's cohort means are ranked per metric, and the ranks are combined
//! into weighted scores where lower is better:
//!
//! * segmentation: `S_segm = w_od·R_od + w_oc·R_oc + w_mae·R_mae`
//! * offline: `S_val = 0.4·R_class + 0.6·R_segm`
//! * final: `S_final = 0.3·R_val + 0.7·R_test`

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether larger metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// How tied values share rank positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Tied values receive the mean of the positions they span.
    #[default]
    Fractional,
    /// Tied values receive the smallest position they span.
    Min,
}

/// Ranks values so that the best one gets rank 1.
pub fn rank_by(values: &[f64], direction: Direction, ties: TieRule) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("value at index {i}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        match direction {
            Direction::HigherBetter => ord.reverse(),
            Direction::LowerBetter => ord,
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = match ties {
            TieRule::Fractional => (i + 1 + j) as f64 / 2.0,
            TieRule::Min => (i + 1) as f64,
        };
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    Ok(ranks)
}

/// Weights of the three segmentation ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegWeights {
    pub od: f64,
    pub oc: f64,
    pub mae: f64,
}

impl SegWeights {
    /// Weights as written in the scoring formula: disc 0.35, cup 0.25.
    pub const EQ3: SegWeights = SegWeights {
        od: 0.35,
        oc: 0.25,
        mae: 0.4,
    };
    /// Weights that reproduce the published leaderboard scores: disc 0.25,
    /// cup 0.35.
    pub const TABLE5: SegWeights = SegWeights {
        od: 0.25,
        oc: 0.35,
        mae: 0.4,
    };

    pub fn new(od: f64, oc: f64, mae: f64) -> Result<Self> {
        let w = SegWeights { od, oc, mae };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.od, self.oc, self.mae];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadWeights(format!(
                "weights must be finite and nonnegative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Named weight choice for the segmentation score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightPreset {
    Eq3,
    #[default]
    Table5,
    Custom(SegWeights),
}

impl WeightPreset {
    pub fn weights(&self) -> SegWeights {
        match self {
            WeightPreset::Eq3 => SegWeights::EQ3,
            WeightPreset::Table5 => SegWeights::TABLE5,
            WeightPreset::Custom(w) => *w,
        }
    }
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPreset::Eq3 => f.write_str("eq3"),
            WeightPreset::Table5 => f.write_str("table5"),
            WeightPreset::Custom(w) => write!(f, "{},{},{}", w.od, w.oc, w.mae),
        }
    }
}

impl FromStr for WeightPreset {
    type Err = Error;

    /// Accepts `eq3`, `table5` or three comma-separated weights
    /// `w_od,w_oc,w_mae`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eq3" => Ok(WeightPreset::Eq3),
            "table5" => Ok(WeightPreset::Table5),
            other => {
                let parts = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::BadWeights(format!("{other:?}: {e}")))?;
                match parts[..] {
                    [od, oc, mae] => Ok(WeightPreset::Custom(SegWeights::new(od, oc, mae)?)),
                    _ => Err(Error::BadWeights(format!(
                        "expected eq3, table5 or w_od,w_oc,w_mae, got {other:?}"
                    ))),
                }
            }
        }
    }
}

/// Weighted segmentation score from the (disc Dice, cup Dice, vCDR MAE) ranks.
pub fn segmentation_score(ranks: (f64, f64, f64), weights: SegWeights) -> Result<f64> {
    weights.validate()?;
    let (r_od, r_oc, r_mae) = ranks;
    Ok(weights.od * r_od + weights.oc * r_oc + weights.mae * r_mae)
}

/// Offline score `0.4 r_class + 0.6 r_segm` from the classification and
/// segmentation rank positions.
pub fn offline_score(r_class: f64, r_segm: f64) -> f64 {
    // integer weights over 10 round once, so integer ranks give exact tenths
    (4.0 * r_class + 6.0 * r_segm) / 10.0
}

/// Final score `0.3 r_val + 0.7 r_test` from the offline and on-site rank
/// positions.
pub fn final_score(r_val: f64, r_test: f64) -> f64 {
    (3.0 * r_val + 7.0 * r_test) / 10.0
}

/// One team's cohort means. Missing values are kept as `None` so incomplete
/// rows can be reported rather than silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub team_id: String,
    pub mean_dice_od: Option<f64>,
    pub mean_dice_oc: Option<f64>,
    pub mean_abs_error: Option<f64>,
    pub auc: Option<f64>,
}

impl MetricRow {
    pub fn new(team_id: impl Into<String>, dice_od: f64, dice_oc: f64, mae: f64) -> Self {
        Self {
            team_id: team_id.into(),
            mean_dice_od: Some(dice_od),
            mean_dice_oc: Some(dice_oc),
            mean_abs_error: Some(mae),
            auc: None,
        }
    }

    pub fn with_auc(mut self, auc: f64) -> Self {
        self.auc = Some(auc);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn new(rows: Vec<MetricRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.team_id.as_str()) {
                return Err(Error::DuplicateId(r.team_id.clone()));
            }
            let values = [r.mean_dice_od, r.mean_dice_oc, r.mean_abs_error, r.auc];
            if values.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(format!("row of team {}", r.team_id)));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }
}

/// Tie-break rule applied after the segmentation score.
pub const TIE_BREAK_RULE: &str =
    "S_segm ascending, then R_MAE ascending, then R_DSC_OD ascending, then team_id";

/// Scores closer than this are considered tied.
const SCORE_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub position: usize,
    pub team_id: String,
    pub r_dsc_od: f64,
    pub r_dsc_oc: f64,
    pub r_mae: f64,
    pub s_segm: f64,
    /// Classification rank (by AUC), when AUCs were supplied.
    pub r_class: Option<f64>,
    /// Offline score from `r_class` and the segmentation position.
    pub s_val: Option<f64>,
    /// Position by `s_val`.
    pub val_position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub preset: String,
    pub weights: SegWeights,
    pub tie_break: String,
    /// Rows ordered by position.
    pub rows: Vec<LeaderboardRow>,
    /// False when the weights differ from the ones behind the published
    /// leaderboard scores.
    pub matches_published_weights: bool,
    pub notes: Vec<String>,
}

impl Leaderboard {
    pub fn row(&self, team_id: &str) -> Option<&LeaderboardRow> {
        self.rows.iter().find(|r| r.team_id == team_id)
    }

    pub fn team_order(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.team_id.as_str()).collect()
    }
}

fn require(v: Option<f64>, team: &str, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::IncompleteRow(format!("team {team} has no {what}")))
}

fn cmp_score(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= SCORE_TIE {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Ranks every metric column and orders teams by segmentation score.
///
/// When every row carries an AUC, the classification rank and the offline
/// score are filled in as well.
pub fn build_leaderboard(table: &MetricTable, preset: WeightPreset) -> Result<Leaderboard> {
    let weights = preset.weights();
    weights.validate()?;
    let rows = table.rows();
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut od = Vec::with_capacity(rows.len());
    let mut oc = Vec::with_capacity(rows.len());
    let mut mae = Vec::with_capacity(rows.len());
    for r in rows {
        od.push(require(r.mean_dice_od, &r.team_id, "mean_dice_od")?);
        oc.push(require(r.mean_dice_oc, &r.team_id, "mean_dice_oc")?);
        mae.push(require(r.mean_abs_error, &r.team_id, "mean_abs_error")?);
    }
    let with_auc = rows.iter().filter(|r| r.auc.is_some()).count();
    if with_auc != 0 && with_auc != rows.len() {
        let missing: Vec<&str> = rows
            .iter()
            .filter(|r| r.auc.is_none())
            .map(|r| r.team_id.as_str())
            .collect();
        return Err(Error::IncompleteRow(format!(
            "auc given for some teams but missing for {}",
            missing.join(", ")
        )));
    }

    let r_od = rank_by(&od, Direction::HigherBetter, TieRule::Fractional)?;
    let r_oc = rank_by(&oc, Direction::HigherBetter, TieRule::Fractional)?;
    let r_mae = rank_by(&mae, Direction::LowerBetter, TieRule::Fractional)?;
    let r_class = if with_auc == rows.len() {
        let aucs: Vec<f64> = rows.iter().map(|r| r.auc.unwrap()).collect();
        Some(rank_by(&aucs, Direction::HigherBetter, TieRule::Fractional)?)
    } else {
        None
    };

    let ordered = order_by_segmentation(rows, &r_od, &r_oc, &r_mae, weights)?;
    let mut board_rows: Vec<LeaderboardRow> = ordered
        .iter()
        .enumerate()
        .map(|(pos, &(i, s_segm))| {
            let position = pos + 1;
            let rc = r_class.as_ref().map(|rc| rc[i]);
            LeaderboardRow {
                position,
                team_id: rows[i].team_id.clone(),
                r_dsc_od: r_od[i],
                r_dsc_oc: r_oc[i],
                r_mae: r_mae[i],
                s_segm,
                r_class: rc,
                s_val: rc.map(|rc| offline_score(rc, position as f64)),
                val_position: None,
            }
        })
        .collect();

    if r_class.is_some() {
        let mut by_val: Vec<usize> = (0..board_rows.len()).collect();
        by_val.sort_by(|&a, &b| {
            let (ra, rb) = (&board_rows[a], &board_rows[b]);
            cmp_score(ra.s_val.unwrap(), rb.s_val.unwrap())
                .then(ra.position.cmp(&rb.position))
        });
        for (pos, idx) in by_val.into_iter().enumerate() {
            board_rows[idx].val_position = Some(pos + 1);
        }
    }

    let matches_published_weights = weights == SegWeights::TABLE5;
    let mut notes = Vec::new();
    if preset == WeightPreset::Eq3 {
        notes.push(
            "weights follow the written formula (OD 0.35, OC 0.25, MAE 0.40); the published \
             leaderboard scores are reproduced only with OD and OC swapped (preset table5)"
                .to_string(),
        );
        let published = order_by_segmentation(rows, &r_od, &r_oc, &r_mae, SegWeights::TABLE5)?;
        let published_pos: BTreeMap<&str, usize> = published
            .iter()
            .enumerate()
            .map(|(p, &(i, _))| (rows[i].team_id.as_str(), p + 1))
            .collect();
        let moved: Vec<String> = board_rows
            .iter()
            .filter(|r| published_pos[r.team_id.as_str()] != r.position)
            .map(|r| {
                format!(
                    "{} (eq3 {}, table5 {})",
                    r.team_id, r.position, published_pos[r.team_id.as_str()]
                )
            })
            .collect();
        if !moved.is_empty() {
            notes.push(format!("positions differ from table5 weights: {}", moved.join("; ")));
        }
    }

    Ok(Leaderboard {
        preset: preset.to_string(),
        weights,
        tie_break: TIE_BREAK_RULE.to_string(),
        rows: board_rows,
        matches_published_weights,
        notes,
    })
}

/// Row indices with their segmentation score, best first.
fn order_by_segmentation(
    rows: &[MetricRow],
    r_od: &[f64],
    r_oc: &[f64],
    r_mae: &[f64],
    weights: SegWeights,
) -> Result<Vec<(usize, f64)>> {
    let mut scored = (0..rows.len())
        .map(|i| Ok((i, segmentation_score((r_od[i], r_oc[i], r_mae[i]), weights)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|&(a, sa), &(b, sb)| {
        cmp_score(sa, sb)
            .then(r_mae[a].total_cmp(&r_mae[b]))
            .then(r_od[a].total_cmp(&r_od[b]))
            .then(rows[a].team_id.cmp(&rows[b].team_id))
    });
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalStanding {
    pub position: usize,
    pub team_id: String,
    pub r_val: f64,
    pub r_test: f64,
    pub s_final: f64,
}

/// Combines offline (`val`) and on-site (`test`) leaderboards into final
/// standings. Both boards need AUCs so that offline positions exist.
pub fn final_standings(val: &Leaderboard, test: &Leaderboard) -> Result<Vec<FinalStanding>> {
    let val_pos = offline_positions(val)?;
    let test_pos = offline_positions(test)?;
    if val_pos.len() != test_pos.len() || val_pos.keys().any(|k| !test_pos.contains_key(k)) {
        return Err(Error::IdMismatch(
            "offline and on-site leaderboards list different teams".into(),
        ));
    }
    let mut standings: Vec<FinalStanding> = test_pos
        .iter()
        .map(|(&team, &r_test)| {
            let r_val = val_pos[team];
            FinalStanding {
                position: 0,
                team_id: team.to_string(),
                r_val,
                r_test,
                s_final: final_score(r_val, r_test),
            }
        })
        .collect();
    standings.sort_by(|a, b| {
        cmp_score(a.s_final, b.s_final)
            .then(a.r_test.total_cmp(&b.r_test))
            .then(a.team_id.cmp(&b.team_id))
    });
    for (i, s) in standings.iter_mut().enumerate() {
        s.position = i + 1;
    }
    Ok(standings)
}

fn offline_positions(board: &Leaderboard) -> Result<BTreeMap<&str, f64>> {
    board
        .rows
        .iter()
        .map(|r| {
            r.val_position
                .map(|p| (r.team_id.as_str(), p as f64))
                .ok_or_else(|| {
                    Error::IncompleteRow(format!("team {} has no offline position", r.team_id))
                })
        })
        .collect()
}
