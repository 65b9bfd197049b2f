//! Acceptance checks AC1-AC8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fundus_eval::bmp::{self, DecodeOptions};
use fundus_eval::cls_metrics::{
    auc_mann_whitney, roc_curve, sensitivity_at_specificity, ScoreTable,
};
use fundus_eval::ensemble::{majority_vote, VoteConfig};
use fundus_eval::mask::{region_of, LabelMask, OdRule, PixelLabel, RegionKind, RegionMask};
use fundus_eval::ranking::{final_score, offline_score};
use fundus_eval::report::{self, LeaderboardReport};
use fundus_eval::seg_metrics::{dice, score_image, vcdr, vertical_diameter};
use fundus_eval::stats::{
    bonferroni, delong_test, rank_sum, wilcoxon_signed_rank, Alternative, Method,
};
use fundus_eval::synth::{
    generate_ground_truth, render_mask, EllipseParams, PredictionNoise, SynthConfig, TeamConfig,
};
use fundus_eval::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// pinned tolerances and budgets
const TABLE5_TOL: f64 = 1e-9;
const AC1_BUDGET: Duration = Duration::from_secs(1);
const IDENTITY_TOL: f64 = 1e-12;
const ARITH_PAIRS: usize = 10_000;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_INSTANCES: usize = 1000;
const ORACLE_MAX_SIDE: u32 = 64;
const ORACLE_MAX_TABLE: usize = 50;
const AC3_BUDGET: Duration = Duration::from_secs(30);
const AUC_TABLES: usize = 10_000;
const AUC_TOL: f64 = 1e-12;
const EXACT_MAX_N: usize = 10;
const PVALUE_TOL: f64 = 1e-12;
const DELONG_INSTANCES: usize = 50;
const DELONG_N: usize = 60;
const PERMUTATIONS: usize = 1000;
const DELONG_TOL: f64 = 0.05;
const ENSEMBLE_IMAGES: usize = 400;
const ENSEMBLE_SIDE: u32 = 1634;
const ENSEMBLE_AXIS_SD: f64 = 4.0;
const AC6_BUDGET: Duration = Duration::from_secs(120);
const COHORT_SEED: u64 = 20_180_901;
const BMP_ROUND_TRIPS: usize = 400;

type Outcome = Result<String, String>;
type Check = (&'static str, &'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let checks: [Check; 8] = [
        ("AC1", "leaderboard score reconstruction", ac1),
        ("AC2", "offline/final score arithmetic", ac2),
        ("AC3", "metric oracle suite", ac3),
        ("AC4", "trapezoidal vs Mann-Whitney AUC", ac4),
        ("AC5", "statistics fidelity", ac5),
        ("AC6", "ensemble properties", ac6),
        ("AC7", "end-to-end determinism", ac7),
        ("AC8", "format conformance", ac8),
    ];
    let mut failed = 0;
    for (id, title, f) in checks {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS [{secs:.2}s] {title}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("{id} FAIL [{secs:.2}s] {title}: {reason}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fundus-eval")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| format!("spawning fundus-eval: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "fundus-eval {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

// ---------------------------------------------------------------- AC1

/// Team, cup Dice, disc Dice, MAE, printed score, in printed order.
const TABLE5: [(&str, f64, f64, f64, f64); 12] = [
    ("CUHKMED", 0.8826, 0.9602, 0.0450, 1.75),
    ("Masker", 0.8837, 0.9464, 0.0414, 2.5),
    ("BUCT", 0.8728, 0.9525, 0.0456, 3.0),
    ("NKSG", 0.8643, 0.9488, 0.0465, 4.6),
    ("VRT", 0.8600, 0.9532, 0.0525, 5.4),
    ("AIML", 0.8519, 0.9505, 0.0469, 5.45),
    ("Mammoth", 0.8667, 0.9361, 0.0526, 7.1),
    ("SMILEDeepDR", 0.8367, 0.9386, 0.0488, 7.45),
    ("NightOwl", 0.8257, 0.9487, 0.0563, 8.6),
    ("SDSAIRC", 0.8315, 0.9436, 0.0674, 9.15),
    ("Cvblab", 0.7728, 0.9077, 0.0798, 11.0),
    ("WinterFell", 0.6861, 0.8772, 0.1536, 12.0),
];

fn ac1() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let metrics = dir.path().join("metrics.csv");
    let mut text = String::from("team_id,mean_dice_od,mean_dice_oc,mean_abs_error\n");
    // listed alphabetically so the order has to come from the scores
    let mut rows = TABLE5.to_vec();
    rows.sort_by_key(|r| r.0);
    for (team, oc, od, mae, _) in rows {
        text.push_str(&format!("{team},{od},{oc},{mae}\n"));
    }
    fs::write(&metrics, text).map_err(|e| e.to_string())?;

    let out = dir.path().join("table5.csv");
    let start = Instant::now();
    run_cli(&["rank", "--metrics", p(&metrics), "--weights", "table5", "--out", p(&out)])?;
    let elapsed = start.elapsed();
    ensure(elapsed < AC1_BUDGET, || format!("rank took {elapsed:?}"))?;
    let board = read_board(&out)?;
    let order: Vec<&str> = board.leaderboard.rows.iter().map(|r| r.team_id.as_str()).collect();
    let printed: Vec<&str> = TABLE5.iter().map(|r| r.0).collect();
    ensure(order == printed, || format!("order {order:?}"))?;
    for (row, expected) in board.leaderboard.rows.iter().zip(TABLE5) {
        ensure((row.s_segm - expected.4).abs() <= TABLE5_TOL, || {
            format!("{}: score {} vs printed {}", row.team_id, row.s_segm, expected.4)
        })?;
    }
    ensure(board.leaderboard.matches_published_weights, || "table5 flagged".into())?;

    let out_eq3 = dir.path().join("eq3.csv");
    run_cli(&["rank", "--metrics", p(&metrics), "--weights", "eq3", "--out", p(&out_eq3)])?;
    let eq3 = read_board(&out_eq3)?;
    let score = |team: &str| eq3.leaderboard.rows.iter().find(|r| r.team_id == team).map(|r| r.s_segm);
    ensure(
        score("CUHKMED").is_some_and(|s| (s - 1.65).abs() <= TABLE5_TOL)
            && score("Masker").is_some_and(|s| (s - 3.10).abs() <= TABLE5_TOL),
        || format!("eq3 CUHKMED {:?}, Masker {:?}", score("CUHKMED"), score("Masker")),
    )?;
    ensure(
        !eq3.leaderboard.matches_published_weights && !eq3.leaderboard.notes.is_empty(),
        || "eq3 discrepancy not flagged".into(),
    )?;
    Ok(format!(
        "12 scores within {TABLE5_TOL:e} in printed order ({:.0} ms); eq3 gives CUHKMED 1.65, Masker 3.10 and is flagged",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn read_board(csv: &Path) -> Result<LeaderboardReport, String> {
    report::read_leaderboard(&report::leaderboard_json_path(csv)).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- AC2

fn ac2() -> Outcome {
    ensure(offline_score(3.0, 1.0) == 1.8, || {
        format!("offline_score(3,1) = {}", offline_score(3.0, 1.0))
    })?;
    ensure(final_score(2.0, 1.0) == 1.3, || {
        format!("final_score(2,1) = {}", final_score(2.0, 1.0))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..ARITH_PAIRS {
        // rank positions, including half ranks from ties
        let a = rng.random_range(2..=60) as f64 / 2.0;
        let b = rng.random_range(2..=60) as f64 / 2.0;
        let s_val = offline_score(a, b);
        let s_final = final_score(a, b);
        ensure((s_val - (2.0 * a + 3.0 * b) / 5.0).abs() <= IDENTITY_TOL, || {
            format!("offline_score({a},{b}) = {s_val}")
        })?;
        ensure((s_final - (a + (7.0 / 3.0) * b) * 0.3).abs() <= IDENTITY_TOL, || {
            format!("final_score({a},{b}) = {s_final}")
        })?;
        // convex combinations stay between their inputs
        ensure(
            s_val >= a.min(b) - IDENTITY_TOL && s_val <= a.max(b) + IDENTITY_TOL,
            || format!("offline_score({a},{b}) outside inputs"),
        )?;
    }
    Ok(format!("exact at (3,1) and (2,1); {ARITH_PAIRS} random pairs within {IDENTITY_TOL:e}"))
}

// ---------------------------------------------------------------- AC3

fn random_mask(rng: &mut ChaCha8Rng) -> LabelMask {
    let w = rng.random_range(1..=ORACLE_MAX_SIDE);
    let h = rng.random_range(1..=ORACLE_MAX_SIDE);
    if rng.random_bool(0.5) {
        let cup_p = rng.random_range(0.0..0.5);
        let disc_p = rng.random_range(0.0..0.5);
        let labels = (0..w * h)
            .map(|_| {
                let u: f64 = rng.random();
                if u < cup_p {
                    PixelLabel::Cup
                } else if u < cup_p + disc_p {
                    PixelLabel::Disc
                } else {
                    PixelLabel::Background
                }
            })
            .collect();
        LabelMask::from_labels(w, h, labels).unwrap()
    } else {
        let e = |rng: &mut ChaCha8Rng, scale: f64| EllipseParams {
            cx: rng.random_range(0.0..w as f64),
            cy: rng.random_range(0.0..h as f64),
            semi_h: rng.random_range(0.3..20.0) * scale,
            semi_v: rng.random_range(0.3..20.0) * scale,
            theta: rng.random_range(-1.6..1.6),
        };
        let disc = e(rng, 1.0);
        let cup = e(rng, 0.6);
        render_mask(&disc, &cup, w, h)
    }
}

fn pixel_set(m: &LabelMask, kind: RegionKind) -> HashSet<(u32, u32)> {
    let mut s = HashSet::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            let l = m.get(x, y);
            let member = match kind {
                RegionKind::OpticCup => l == PixelLabel::Cup,
                RegionKind::OpticDisc => l != PixelLabel::Background,
            };
            if member {
                s.insert((x, y));
            }
        }
    }
    s
}

fn oracle_dice(a: &HashSet<(u32, u32)>, b: &HashSet<(u32, u32)>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

fn oracle_diameter(s: &HashSet<(u32, u32)>) -> u32 {
    let rows: Vec<u32> = s.iter().map(|p| p.1).collect();
    match (rows.iter().min(), rows.iter().max()) {
        (Some(lo), Some(hi)) => hi - lo + 1,
        _ => 0,
    }
}

fn random_table(rng: &mut ChaCha8Rng, max_len: usize) -> ScoreTable {
    let n_pos = rng.random_range(1..max_len);
    let n_neg = rng.random_range(1..=max_len - n_pos);
    // a small value range forces ties
    let levels = rng.random_range(2..40);
    let pos: Vec<f64> = (0..n_pos).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    let neg: Vec<f64> = (0..n_neg).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    ScoreTable::from_classes(&pos, &neg).unwrap()
}

fn split(t: &ScoreTable) -> (Vec<f64>, Vec<f64>) {
    let pos = t.entries().iter().filter(|e| e.label.is_positive()).map(|e| e.likelihood).collect();
    let neg = t.entries().iter().filter(|e| !e.label.is_positive()).map(|e| e.likelihood).collect();
    (pos, neg)
}

fn oracle_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for x in pos {
        for y in neg {
            wins += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Sensitivity at `sp` read off a threshold sweep: the best TPR among
/// vertices at the target FPR, else linear interpolation across it.
fn oracle_se_at_sp(pos: &[f64], neg: &[f64], sp: f64) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tpr = pos.iter().filter(|&&v| v >= t).count() as f64 / pos.len() as f64;
        let fpr = neg.iter().filter(|&&v| v >= t).count() as f64 / neg.len() as f64;
        pts.push((fpr, tpr));
    }
    let target = 1.0 - sp;
    let at: Vec<f64> = pts.iter().filter(|p| (p.0 - target).abs() <= 1e-12).map(|p| p.1).collect();
    if !at.is_empty() {
        return at.into_iter().fold(f64::MIN, f64::max);
    }
    for w in pts.windows(2) {
        let ((f0, t0), (f1, t1)) = (w[0], w[1]);
        if f0 < target && target < f1 {
            return t0 + (t1 - t0) * (target - f0) / (f1 - f0);
        }
    }
    unreachable!("the sweep spans fpr 0..1")
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..ORACLE_INSTANCES {
        let a = random_mask(&mut rng);
        let b = {
            let m = random_mask(&mut rng);
            if m.dimensions() == a.dimensions() {
                m
            } else {
                // same size as `a`, different content
                let mut m = a.clone();
                for _ in 0..rng.random_range(0..=(a.width() * a.height())) {
                    let (x, y) = (rng.random_range(0..a.width()), rng.random_range(0..a.height()));
                    let l = [PixelLabel::Cup, PixelLabel::Disc, PixelLabel::Background][rng.random_range(0..3)];
                    m.set(x, y, l);
                }
                m
            }
        };
        for kind in [RegionKind::OpticDisc, RegionKind::OpticCup] {
            let (sa, sb) = (pixel_set(&a, kind), pixel_set(&b, kind));
            let got = dice(&region_of(&a, kind), &region_of(&b, kind)).map_err(|e| e.to_string())?;
            let want = oracle_dice(&sa, &sb);
            ensure((got - want).abs() <= ORACLE_TOL, || format!("instance {i}: dice {got} vs {want}"))?;
            let d = vertical_diameter(&region_of(&a, kind));
            ensure(d == oracle_diameter(&sa), || format!("instance {i}: diameter {d}"))?;
        }
        let (cup, disc) = (
            oracle_diameter(&pixel_set(&a, RegionKind::OpticCup)),
            oracle_diameter(&pixel_set(&a, RegionKind::OpticDisc)),
        );
        let want = if disc == 0 { 0.0 } else { cup as f64 / disc as f64 };
        let got = vcdr(&a);
        ensure((got.value - want).abs() <= ORACLE_TOL && got.empty_disc == (disc == 0), || {
            format!("instance {i}: vcdr {got:?} vs {want}")
        })?;
    }
    for i in 0..ORACLE_INSTANCES {
        let t = random_table(&mut rng, ORACLE_MAX_TABLE);
        let (pos, neg) = split(&t);
        let curve = roc_curve(&t).map_err(|e| e.to_string())?;
        let want = oracle_auc(&pos, &neg);
        ensure((curve.auc - want).abs() <= ORACLE_TOL, || format!("table {i}: auc {} vs {want}", curve.auc))?;
        for sp in [0.85, rng.random_range(0.0..=1.0), 1.0, 0.0] {
            let got = sensitivity_at_specificity(&curve, sp);
            let want = oracle_se_at_sp(&pos, &neg, sp);
            ensure((got - want).abs() <= ORACLE_TOL, || {
                format!("table {i}: Se@Sp {sp}: {got} vs {want}")
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < AC3_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{ORACLE_INSTANCES} mask pairs (Dice, diameter, vCDR) and {ORACLE_INSTANCES} tables (AUC, Se@Sp) within {ORACLE_TOL:e}"
    ))
}

// ---------------------------------------------------------------- AC4

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..AUC_TABLES {
        let t = random_table(&mut rng, ORACLE_MAX_TABLE);
        let trap = roc_curve(&t).map_err(|e| e.to_string())?.auc;
        let mw = auc_mann_whitney(&t).map_err(|e| e.to_string())?;
        worst = worst.max((trap - mw).abs());
        ensure((trap - mw).abs() <= AUC_TOL, || format!("table {i}: {trap} vs {mw}"))?;
    }
    Ok(format!("{AUC_TABLES} tables, largest difference {worst:e}"))
}

// ---------------------------------------------------------------- AC5

fn distinct_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let v = rng.random_range(1..10_000u32);
        if seen.insert(v) {
            out.push(v as f64 / 100.0);
        }
    }
    out
}

fn tails(ge: usize, le: usize, total: usize, alt: Alternative) -> f64 {
    let (ge, le) = (ge as f64 / total as f64, le as f64 / total as f64);
    match alt {
        Alternative::Greater => ge,
        Alternative::Less => le,
        Alternative::TwoSided => (2.0 * ge.min(le)).min(1.0),
    }
}

/// Signed-rank p by flipping the sign of every untied difference.
fn enumerate_signed_rank(diffs: &[f64], alt: Alternative) -> f64 {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let observed: usize = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank[i]).sum();
    let (mut ge, mut le) = (0, 0);
    for signs in 0u32..1 << n {
        let w: usize = (0..n).filter(|&i| signs >> i & 1 == 1).map(|i| rank[i]).sum();
        ge += (w >= observed) as usize;
        le += (w <= observed) as usize;
    }
    tails(ge, le, 1 << n, alt)
}

/// Rank-sum p by reassigning the pooled values to the first sample in every
/// possible way and counting pairwise wins.
fn enumerate_rank_sum(a: &[f64], b: &[f64], alt: Alternative) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u_of = |mask: u32| -> usize {
        let mut u = 0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                u += (pooled[i] > pooled[j]) as usize;
            }
        }
        u
    };
    let observed = u_of((1 << a.len()) - 1);
    let (mut ge, mut le, mut total) = (0, 0, 0);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let u = u_of(mask);
        total += 1;
        ge += (u >= observed) as usize;
        le += (u <= observed) as usize;
    }
    tails(ge, le, total, alt)
}

/// Two correlated classifiers on the same cases; `shift_b` moves the
/// second one's positives.
fn delong_instance(rng: &mut ChaCha8Rng, shift_b: f64) -> (Vec<bool>, Vec<f64>, Vec<f64>) {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut labels: Vec<bool> = (0..DELONG_N).map(|i| i < DELONG_N / 3).collect();
    labels.rotate_left(rng.random_range(0..DELONG_N));
    let rho: f64 = rng.random_range(0.0..0.8);
    let sep = rng.random_range(0.5..1.5);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &y in &labels {
        let shared = unit.sample(rng);
        let noise = (1.0 - rho * rho).sqrt();
        let base = if y { sep } else { 0.0 };
        a.push(base + rho * shared + noise * unit.sample(rng));
        b.push(base + if y { shift_b } else { 0.0 } + rho * shared + noise * unit.sample(rng));
    }
    (labels, a, b)
}

/// Two-sided permutation p for `AUC_a - AUC_b`, swapping the two
/// classifiers' scores within randomly chosen cases.
fn permutation_p(labels: &[bool], a: &[f64], b: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let auc_diff = |a: &[f64], b: &[f64]| {
        let split = |s: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let pos = s.iter().zip(labels).filter(|(_, &l)| l).map(|(v, _)| *v).collect();
            let neg = s.iter().zip(labels).filter(|(_, &l)| !l).map(|(v, _)| *v).collect();
            (pos, neg)
        };
        let (pa, na) = split(a);
        let (pb, nb) = split(b);
        oracle_auc(&pa, &na) - oracle_auc(&pb, &nb)
    };
    let observed = auc_diff(a, b).abs();
    let mut hits = 0;
    let (mut x, mut y) = (a.to_vec(), b.to_vec());
    for _ in 0..PERMUTATIONS {
        for i in 0..a.len() {
            if rng.random_bool(0.5) {
                x[i] = b[i];
                y[i] = a[i];
            } else {
                x[i] = a[i];
                y[i] = b[i];
            }
        }
        hits += (auc_diff(&x, &y).abs() >= observed - 1e-12) as usize;
    }
    (hits + 1) as f64 / (PERMUTATIONS + 1) as f64
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alts = [Alternative::TwoSided, Alternative::Greater, Alternative::Less];
    let mut signed_cases = 0;
    for n in 1..=EXACT_MAX_N {
        for _ in 0..20 {
            let diffs: Vec<f64> = distinct_values(&mut rng, n)
                .into_iter()
                .map(|v| if rng.random_bool(0.5) { v } else { -v })
                .collect();
            let zeros = vec![0.0; n];
            for alt in alts {
                let r = wilcoxon_signed_rank(&diffs, &zeros, alt).map_err(|e| e.to_string())?;
                let want = enumerate_signed_rank(&diffs, alt);
                ensure(r.method == Method::Exact && (r.p_value - want).abs() <= PVALUE_TOL, || {
                    format!("signed-rank n={n} {alt}: {} vs {want}", r.p_value)
                })?;
                signed_cases += 1;
            }
        }
    }
    let mut rank_sum_cases = 0;
    for n in 2..=EXACT_MAX_N {
        for na in 1..n {
            for _ in 0..5 {
                let v = distinct_values(&mut rng, n);
                let (a, b) = v.split_at(na);
                for alt in alts {
                    let r = rank_sum(a, b, alt).map_err(|e| e.to_string())?;
                    let want = enumerate_rank_sum(a, b, alt);
                    ensure(r.method == Method::Exact && (r.p_value - want).abs() <= PVALUE_TOL, || {
                        format!("rank-sum {na}+{} {alt}: {} vs {want}", n - na, r.p_value)
                    })?;
                    rank_sum_cases += 1;
                }
            }
        }
    }

    let mut worst: f64 = 0.0;
    for k in 0..DELONG_INSTANCES {
        // alternate null and shifted instances
        let shift = if k % 2 == 0 { 0.0 } else { rng.random_range(-0.8..0.8) };
        let (labels, a, b) = delong_instance(&mut rng, shift);
        let triples = |s: &[f64]| {
            ScoreTable::from_triples(s.iter().zip(&labels).enumerate().map(|(i, (v, l))| (format!("c{i}"), *v, *l)))
                .unwrap()
        };
        let r = delong_test(&triples(&a), &triples(&b)).map_err(|e| e.to_string())?;
        let perm = permutation_p(&labels, &a, &b, &mut rng);
        let gap = (r.test.p_value - perm).abs();
        worst = worst.max(gap);
        ensure(gap <= DELONG_TOL, || {
            format!("instance {k}: DeLong p {} vs permutation p {perm}", r.test.p_value)
        })?;
    }
    ensure(bonferroni(0.05, 2) == 0.025, || format!("bonferroni(0.05, 2) = {}", bonferroni(0.05, 2)))?;
    Ok(format!(
        "{signed_cases} signed-rank and {rank_sum_cases} rank-sum exact p-values match enumeration; \
         DeLong vs {PERMUTATIONS}-swap permutation on {DELONG_INSTANCES} instances, largest gap {worst:.4} (limit {DELONG_TOL}); \
         bonferroni(0.05, 2) = 0.025"
    ))
}

// ---------------------------------------------------------------- AC6

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..200 {
        let m = random_mask(&mut rng);
        let fused = majority_vote(&[m.clone(), m.clone(), m.clone()], VoteConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(fused == m, || format!("identity failed on mask {i}"))?;
        let others: Vec<LabelMask> = (0..2)
            .map(|_| {
                let mut o = m.clone();
                for _ in 0..(m.width() * m.height()) {
                    let (x, y) = (rng.random_range(0..m.width()), rng.random_range(0..m.height()));
                    o.set(x, y, [PixelLabel::Cup, PixelLabel::Disc, PixelLabel::Background][rng.random_range(0..3)]);
                }
                o
            })
            .collect();
        let fused = majority_vote(&[m.clone(), others[0].clone(), others[1].clone()], VoteConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(nested(&fused), || format!("cup outside disc in fused mask {i}"))?;
    }

    let start = Instant::now();
    let cfg = SynthConfig {
        n_images: ENSEMBLE_IMAGES,
        width: ENSEMBLE_SIDE,
        height: ENSEMBLE_SIDE,
        disc_semi_v: [110.0, 170.0],
        margin: 8.0,
        teams: (1..=3)
            .map(|k| TeamConfig::new(format!("noisy{k}"), PredictionNoise::axes_only(ENSEMBLE_AXIS_SD), 1.0))
            .collect(),
        seed: COHORT_SEED,
        ..SynthConfig::default()
    };
    let cohort = generate_ground_truth(&cfg).map_err(|e| e.to_string())?;
    let mut team_sum = [0.0f64; 3];
    let mut fused_sum = 0.0;
    for i in 0..cohort.len() {
        let id = &cohort.images[i].image_id;
        let gt = cohort.ground_truth_mask(i);
        let preds: Vec<LabelMask> = (0..3).map(|t| cohort.team_prediction(t, i)).collect();
        for (t, pm) in preds.iter().enumerate() {
            team_sum[t] += score_image(id, pm, &gt, OdRule::default()).map_err(|e| e.to_string())?.0.dice_oc;
        }
        let fused = majority_vote(&preds, VoteConfig::default()).map_err(|e| e.to_string())?;
        ensure(nested(&fused), || format!("{id}: fused cup outside disc"))?;
        fused_sum += score_image(id, &fused, &gt, OdRule::default()).map_err(|e| e.to_string())?.0.dice_oc;
    }
    let elapsed = start.elapsed();
    let n = cohort.len() as f64;
    let mut team_means: Vec<f64> = team_sum.iter().map(|s| s / n).collect();
    team_means.sort_by(f64::total_cmp);
    let (median, fused) = (team_means[1], fused_sum / n);
    ensure(fused >= median, || format!("fused Dice(OC) {fused:.4} below median team {median:.4}"))?;
    ensure(elapsed < AC6_BUDGET, || format!("cohort took {elapsed:?}"))?;
    Ok(format!(
        "identity and OC within OD on 200 random sets; {ENSEMBLE_IMAGES} images at {ENSEMBLE_SIDE}x{ENSEMBLE_SIDE}: \
         fused Dice(OC) {fused:.4} vs team means {:.4}/{:.4}/{:.4} in {:.1}s",
        team_means[0],
        team_means[1],
        team_means[2],
        elapsed.as_secs_f64()
    ))
}

fn nested(m: &LabelMask) -> bool {
    let od: RegionMask = region_of(m, RegionKind::OpticDisc);
    region_of(m, RegionKind::OpticCup).is_subset_of(&od)
}

// ---------------------------------------------------------------- AC7

const DEFAULT_TEAMS: [&str; 4] = ["noiseless", "team_a", "team_b", "team_c"];

fn pipeline(root: &Path) -> Result<(), String> {
    let cohort = root.join("cohort");
    let seed = COHORT_SEED.to_string();
    run_cli(&["synth", "--out", p(&cohort), "--seed", &seed])?;
    let labels = cohort.join("labels.csv");
    let mut rows = Vec::new();
    for team in DEFAULT_TEAMS {
        let seg = root.join("seg").join(format!("{team}.csv"));
        let class = root.join("class").join(format!("{team}.json"));
        let svg = root.join("class").join(format!("{team}.svg"));
        run_cli(&[
            "eval-seg",
            "--pred",
            p(&cohort.join("teams").join(team)),
            "--gt",
            p(&cohort.join("gt")),
            "--out",
            p(&seg),
        ])?;
        run_cli(&[
            "eval-class",
            "--scores",
            p(&cohort.join("scores").join(format!("{team}.csv"))),
            "--labels",
            p(&labels),
            "--out",
            p(&class),
            "--svg",
            p(&svg),
        ])?;
        let s = report::read_seg_scores(&seg).map_err(|e| e.to_string())?;
        let c = report::read_class_report(&class).map_err(|e| e.to_string())?;
        rows.push(
            fundus_eval::ranking::MetricRow::new(team, s.mean.dice_od, s.mean.dice_oc, s.mean.abs_error)
                .with_auc(c.auc),
        );
    }
    run_cli(&[
        "eval-class",
        "--scores",
        p(&cohort.join("scores/true_vcdr.csv")),
        "--labels",
        p(&labels),
        "--out",
        p(&root.join("class/true_vcdr.json")),
    ])?;
    let metrics = root.join("metrics.csv");
    report::write_metrics(&metrics, &rows).map_err(|e| e.to_string())?;
    run_cli(&["rank", "--metrics", p(&metrics), "--out", p(&root.join("leaderboard.csv"))])
}

fn tree_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn ac7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("run1"), dir.path().join("run2"));
    pipeline(&a)?;
    pipeline(&b)?;
    let (fa, fb) = (tree_files(&a), tree_files(&b));
    ensure(fa == fb, || "the two runs wrote different file sets".into())?;
    for f in &fa {
        let same = fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap();
        ensure(same, || format!("{} differs between runs", f.display()))?;
    }
    let labels = report::read_labels(&a.join("cohort/labels.csv")).map_err(|e| e.to_string())?;
    let positives = labels.values().filter(|d| d.is_positive()).count();
    ensure(labels.len() == 400 && positives == 40, || {
        format!("{} images, {positives} positives", labels.len())
    })?;
    let noiseless = report::read_seg_scores(&a.join("seg/noiseless.csv")).map_err(|e| e.to_string())?.mean;
    ensure(
        (noiseless.dice_od, noiseless.dice_oc, noiseless.abs_error) == (1.0, 1.0, 0.0),
        || format!("noiseless means {noiseless:?}"),
    )?;
    let truth = report::read_class_report(&a.join("class/true_vcdr.json")).map_err(|e| e.to_string())?;
    ensure(truth.auc > 0.9, || format!("true-vCDR AUC {}", truth.auc))?;
    Ok(format!(
        "{} files byte-identical across two runs; 400 images / 40 positives; noiseless means (1, 1, 0); true-vCDR AUC {:.4}",
        fa.len(),
        truth.auc
    ))
}

// ---------------------------------------------------------------- AC8

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..BMP_ROUND_TRIPS {
        let m = random_mask(&mut rng);
        let bytes = bmp::encode_mask(&m);
        let back = bmp::decode_mask(&bytes, DecodeOptions::STRICT).map_err(|e| format!("mask {i}: {e}"))?;
        ensure(back == m, || format!("mask {i} changed in a round trip"))?;
        ensure(bmp::encode_mask(&back) == bytes, || format!("mask {i} re-encodes differently"))?;
    }

    let (w, h, x, y) = (7u32, 5u32, 3u32, 1u32);
    let mut bytes = bmp::encode_mask(&LabelMask::filled(w, h, PixelLabel::Background));
    let stride = bmp::row_stride(w, 8);
    let data_offset = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    // rows are stored bottom-up
    bytes[data_offset + (h - 1 - y) as usize * stride + x as usize] = 127;
    match bmp::decode_mask(&bytes, DecodeOptions::STRICT) {
        Err(e @ Error::StrictValueViolation { x: ex, y: ey, value: 127 }) if (ex, ey) == (x, y) => {
            let msg = e.to_string();
            ensure(msg.contains("x=3") && msg.contains("y=1"), || format!("message {msg:?}"))?;
            Ok(format!("{BMP_ROUND_TRIPS} random masks round-trip; strict decode reports: {msg}"))
        }
        other => Err(format!("crafted 127 file decoded as {other:?}")),
    }
}
