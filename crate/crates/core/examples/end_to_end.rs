//! Runs the whole evaluation on a synthetic cohort through the same entry
//! points as the command-line tool: generate, score segmentation and
//! classification per team, then rank.

use fundus_eval::ranking::MetricRow;
use fundus_eval::report::{
    self, team_dir, team_scores_path, EvalClassArgs, EvalSegArgs, RankArgs, SynthArgs,
};
use fundus_eval::synth::SynthConfig;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let cohort = root.join("cohort");
    report::synth(&SynthArgs { config: None, out: cohort.clone(), seed: Some(3) })?;

    let mut rows = Vec::new();
    for team in SynthConfig::default().teams {
        let name = team.name.as_str();
        let seg_out = root.join(format!("{name}_seg.csv"));
        report::eval_seg(&EvalSegArgs::new(cohort.join(team_dir(name)), cohort.join("gt"), seg_out.clone()))?;
        let class_out = root.join(format!("{name}_class.json"));
        report::eval_class(&EvalClassArgs {
            scores: cohort.join(team_scores_path(name)),
            labels: cohort.join("labels.csv"),
            out: class_out.clone(),
            svg: None,
        })?;
        let seg = report::read_seg_scores(&seg_out)?.mean;
        let class = report::read_class_report(&class_out)?;
        println!(
            "{name:<10} Dice OD {:.4}  Dice OC {:.4}  vCDR MAE {:.4}  AUC {:.4}  Se@Sp {:.4}",
            seg.dice_od, seg.dice_oc, seg.abs_error, class.auc, class.sensitivity_at_specificity
        );
        rows.push(MetricRow::new(name, seg.dice_od, seg.dice_oc, seg.abs_error).with_auc(class.auc));
    }

    let metrics = root.join("metrics.csv");
    report::write_metrics(&metrics, &rows)?;
    let board_path = root.join("leaderboard.csv");
    report::rank(&RankArgs { metrics, weights: Default::default(), out: board_path.clone() })?;
    let board = report::read_leaderboard(&report::leaderboard_json_path(&board_path))?.leaderboard;
    println!("\nleaderboard:");
    for r in &board.rows {
        println!(
            "{} {:<10} S_segm {:.2}  R_class {:?}  S_val {:?}",
            r.position, r.team_id, r.s_segm, r.r_class, r.s_val
        );
    }
    Ok(())
}
