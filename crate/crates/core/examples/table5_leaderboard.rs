//! Rebuilds the published segmentation leaderboard from per-team metric
//! means under both weight presets, then combines validation and test
//! standings into a final ranking.

use fundus_eval::ranking::{
    build_leaderboard, final_standings, MetricRow, MetricTable, WeightPreset,
};

const TEAMS: [(&str, f64, f64, f64); 12] = [
    ("CUHKMED", 0.9602, 0.8826, 0.0450),
    ("Masker", 0.9464, 0.8837, 0.0414),
    ("BUCT", 0.9525, 0.8728, 0.0456),
    ("NKSG", 0.9488, 0.8643, 0.0465),
    ("VRT", 0.9532, 0.8600, 0.0525),
    ("AIML", 0.9505, 0.8519, 0.0469),
    ("Mammoth", 0.9361, 0.8667, 0.0526),
    ("SMILEDeepDR", 0.9386, 0.8367, 0.0488),
    ("NightOwl", 0.9487, 0.8257, 0.0563),
    ("SDSAIRC", 0.9436, 0.8315, 0.0674),
    ("Cvblab", 0.9077, 0.7728, 0.0798),
    ("WinterFell", 0.8772, 0.6861, 0.1536),
];

fn main() -> anyhow::Result<()> {
    let table = MetricTable::new(
        TEAMS
            .iter()
            .map(|&(team, od, oc, mae)| MetricRow::new(team, od, oc, mae))
            .collect(),
    )?;

    for preset in [WeightPreset::Table5, WeightPreset::Eq3] {
        let board = build_leaderboard(&table, preset)?;
        println!("preset {} (matches published: {})", board.preset, board.matches_published_weights);
        println!("{:>3} {:<12} {:>5} {:>5} {:>5} {:>6}", "#", "team", "R_od", "R_oc", "R_mae", "S");
        for r in &board.rows {
            println!(
                "{:>3} {:<12} {:>5} {:>5} {:>5} {:>6.2}",
                r.position, r.team_id, r.r_dsc_od, r.r_dsc_oc, r.r_mae, r.s_segm
            );
        }
        for n in &board.notes {
            println!("note: {n}");
        }
        println!();
    }

    // illustrative AUCs for an offline (segmentation + classification) board
    let with_auc = |shift: usize| -> anyhow::Result<MetricTable> {
        let rows = table
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| r.clone().with_auc(0.98 - 0.01 * ((i + shift) % 12) as f64))
            .collect();
        Ok(MetricTable::new(rows)?)
    };
    let val = build_leaderboard(&with_auc(3)?, WeightPreset::Table5)?;
    let test = build_leaderboard(&with_auc(0)?, WeightPreset::Table5)?;
    println!("final standings (30% validation, 70% test):");
    for s in final_standings(&val, &test)?.iter() {
        println!("{:>3} {:<12} {:.2}", s.position, s.team_id, s.s_final);
    }
    Ok(())
}
