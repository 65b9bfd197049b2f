//! ROC curve, AUC both ways, and sensitivity at the reference specificity
//! for a small likelihood table with ties.

use std::collections::BTreeMap;

use fundus_eval::cls_metrics::{
    auc_mann_whitney, operating_point, roc_curve, sensitivity_at_specificity, ScoreTable,
    REFERENCE_SPECIFICITY,
};

fn main() -> anyhow::Result<()> {
    let positives = [0.91, 0.84, 0.77, 0.60, 0.60, 0.42];
    let negatives = [0.70, 0.60, 0.35, 0.30, 0.22, 0.18, 0.15, 0.10, 0.05, 0.02];
    let table = ScoreTable::from_classes(&positives, &negatives)?;

    let curve = roc_curve(&table)?;
    println!("{:>9} {:>6} {:>6}", "threshold", "fpr", "tpr");
    for p in &curve.points {
        println!("{:>9.2} {:>6.3} {:>6.3}", p.threshold, p.fpr, p.tpr);
    }
    println!("trapezoidal AUC   {:.6}", curve.auc);
    println!("Mann-Whitney AUC  {:.6}", auc_mann_whitney(&table)?);
    println!(
        "Se at Sp {REFERENCE_SPECIFICITY}: {:.4}",
        sensitivity_at_specificity(&curve, REFERENCE_SPECIFICITY)
    );

    let labels: BTreeMap<String, bool> = table
        .entries()
        .iter()
        .map(|e| (e.image_id.clone(), e.label.is_positive()))
        .collect();
    let calls: BTreeMap<String, bool> = table
        .entries()
        .iter()
        .map(|e| (e.image_id.clone(), e.likelihood >= 0.5))
        .collect();
    let op = operating_point(&calls, &labels)?;
    println!(
        "threshold 0.5: sensitivity {:.3}, specificity {:.3}, accuracy {:.3}",
        op.sensitivity, op.specificity, op.accuracy
    );
    Ok(())
}
