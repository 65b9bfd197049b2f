//! Fuses three noisy segmentations by pixel voting and three likelihood
//! tables by normalized averaging, and compares the fused results with the
//! individual ones.

use fundus_eval::cls_metrics::roc_curve;
use fundus_eval::ensemble::{fuse_scores, majority_vote, VoteConfig};
use fundus_eval::mask::OdRule;
use fundus_eval::seg_metrics::score_image;
use fundus_eval::synth::{generate_ground_truth, PredictionNoise, SynthConfig, TeamConfig};

fn main() -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_images: 60,
        teams: (1..=3)
            .map(|k| TeamConfig::new(format!("member{k}"), PredictionNoise::axes_only(2.5), 1.5))
            .collect(),
        seed: 7,
        ..SynthConfig::default()
    };
    let cohort = generate_ground_truth(&cfg)?;

    let mut member_oc = [0.0; 3];
    let mut fused_oc = 0.0;
    for (i, img) in cohort.images.iter().enumerate() {
        let truth = cohort.ground_truth_mask(i);
        let preds: Vec<_> = (0..3).map(|t| cohort.team_prediction(t, i)).collect();
        for (t, p) in preds.iter().enumerate() {
            member_oc[t] += score_image(&img.image_id, p, &truth, OdRule::default())?.0.dice_oc;
        }
        let fused = majority_vote(&preds, VoteConfig::default())?;
        fused_oc += score_image(&img.image_id, &fused, &truth, OdRule::default())?.0.dice_oc;
    }
    let n = cohort.len() as f64;
    for (t, s) in member_oc.iter().enumerate() {
        println!("member{} mean cup Dice {:.4}", t + 1, s / n);
    }
    println!("voted   mean cup Dice {:.4}", fused_oc / n);

    let tables = (0..3).map(|t| cohort.team_scores(t)).collect::<Result<Vec<_>, _>>()?;
    for (t, table) in tables.iter().enumerate() {
        println!("member{} AUC {:.4}", t + 1, roc_curve(table)?.auc);
    }
    println!("averaged AUC {:.4}", roc_curve(&fuse_scores(&tables)?)?.auc);
    Ok(())
}
