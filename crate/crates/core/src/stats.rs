//! Rank-based hypothesis tests: Wilcoxon signed-rank, Wilcoxon rank-sum
//! (Mann-Whitney U), Kruskal-Wallis, DeLong's paired AUC comparison, and the
//! Bonferroni adjustment.
//!
//! Small samples use exact null distributions; larger ones use the normal
//! (or chi-squared) approximation with tie correction. Normal approximations
//! apply a continuity correction to the p-value, while the reported
//! `z_or_chi2` is the uncorrected standardized statistic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::cls_metrics::ScoreTable;
use crate::error::{Error, Result};

/// Largest sample size for which exact null distributions are enumerated.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// First sample tends to be larger.
    Greater,
    /// First sample tends to be smaller.
    Less,
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_sided" | "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(Error::InvalidArgument(format!(
                "unknown alternative {other:?} (two_sided, greater, less)"
            ))),
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::TwoSided => "two_sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
    Chi2Approx,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::NormalApprox => "normal_approx",
            Method::Chi2Approx => "chi2_approx",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Test statistic: `min(W+, W-)`, `U` of the first sample, `H`, or the
    /// AUC difference for DeLong.
    pub statistic: f64,
    /// Uncorrected standardized statistic (z), or `H` for Kruskal-Wallis.
    pub z_or_chi2: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_effective: usize,
    /// Set when the data leave nothing to test (all differences zero, all
    /// values tied, zero variance); the p-value is then 1.
    pub degenerate: bool,
}

impl TestResult {
    fn degenerate(statistic: f64, method: Method, n_effective: usize) -> Self {
        Self {
            statistic,
            z_or_chi2: 0.0,
            p_value: 1.0,
            method,
            n_effective,
            degenerate: true,
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

#[inline]
fn clamp_p(p: f64) -> f64 {
    if p.is_nan() {
        1.0
    } else {
        p.clamp(f64::MIN_POSITIVE, 1.0)
    }
}

fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Midranks (1-based) of `values` and the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// p-value from tail probabilities of a statistic whose large values favour
/// the `Greater` alternative.
fn tails_to_p(p_ge: f64, p_le: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::Greater => p_ge,
        Alternative::Less => p_le,
        Alternative::TwoSided => (2.0 * p_ge.min(p_le)).min(1.0),
    }
}

/// Normal-approximation p-value for `stat` with the given null mean and
/// standard deviation, with a 0.5 continuity correction.
fn normal_p(stat: f64, mean: f64, sd: f64, alt: Alternative) -> f64 {
    let d = stat - mean;
    match alt {
        Alternative::Greater => normal_sf((d - 0.5) / sd),
        Alternative::Less => normal_sf(-(d + 0.5) / sd),
        Alternative::TwoSided => {
            let corrected = (d.abs() - 0.5).max(0.0);
            (2.0 * normal_sf(corrected / sd)).min(1.0)
        }
    }
}

/// Wilcoxon signed-rank test on paired samples `x` and `y`.
///
/// Zero differences are dropped. The exact null distribution is used when at
/// most [`EXACT_MAX_N`] differences remain and their magnitudes are untied.
/// When every difference is zero the result is degenerate with p = 1.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alt: Alternative) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::NonFiniteValue(format!("paired difference {d}")));
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult::degenerate(0.0, Method::Exact, 0));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    let mean = total / 2.0;
    let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_sum(&ties) / 48.0;
    let sd = var.sqrt();
    let z = (w_plus - mean) / sd;

    let (p, method) = if n <= EXACT_MAX_N && ties.is_empty() {
        let dist = signed_rank_null_counts(n);
        let w = w_plus.round() as usize;
        let all = (1u64 << n) as f64;
        let p_ge = dist[w..].iter().sum::<u64>() as f64 / all;
        let p_le = dist[..=w].iter().sum::<u64>() as f64 / all;
        (tails_to_p(p_ge, p_le, alt), Method::Exact)
    } else {
        (normal_p(w_plus, mean, sd, alt), Method::NormalApprox)
    };
    Ok(TestResult {
        statistic,
        z_or_chi2: z,
        p_value: clamp_p(p),
        method,
        n_effective: n,
        degenerate: false,
    })
}

/// Number of sign assignments of ranks `1..=n` giving each positive-rank sum.
fn signed_rank_null_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for rank in 1..=n {
        for s in (rank..=max).rev() {
            counts[s] += counts[s - rank];
        }
    }
    counts
}

/// Wilcoxon rank-sum (Mann-Whitney U) test for two independent samples.
///
/// With at most [`EXACT_MAX_N`] observations in total the p-value comes from
/// enumerating every split of the pooled midranks; otherwise from the normal
/// approximation with tie correction.
pub fn rank_sum(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if let Some(v) = pooled.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("sample value {v}")));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;
    let var = (na * nb) as f64 / 12.0
        * ((n + 1) as f64 - tie_sum(&ties) / (n * (n - 1)) as f64);
    if var <= 0.0 {
        return Ok(TestResult::degenerate(u, Method::NormalApprox, n));
    }
    let sd = var.sqrt();
    let z = (u - mean) / sd;

    let (p, method) = if n <= EXACT_MAX_N {
        let (p_ge, p_le) = rank_sum_exact_tails(&ranks, na, rank_sum_a);
        (tails_to_p(p_ge, p_le, alt), Method::Exact)
    } else {
        (normal_p(u, mean, sd, alt), Method::NormalApprox)
    };
    Ok(TestResult {
        statistic: u,
        z_or_chi2: z,
        p_value: clamp_p(p),
        method,
        n_effective: n,
        degenerate: false,
    })
}

/// Tail probabilities of the first-sample rank sum over every way of picking
/// `na` of the pooled ranks.
fn rank_sum_exact_tails(ranks: &[f64], na: usize, observed: f64) -> (f64, f64) {
    let n = ranks.len();
    let (mut ge, mut le, mut total) = (0u64, 0u64, 0u64);
    // midranks are multiples of 1/2, so sums compare exactly
    for subset in 0u32..(1 << n) {
        if subset.count_ones() as usize != na {
            continue;
        }
        let s: f64 = (0..n).filter(|i| subset >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        ge += (s >= observed) as u64;
        le += (s <= observed) as u64;
    }
    (ge as f64 / total as f64, le as f64 / total as f64)
}

/// Kruskal-Wallis H test across `groups`, with tie correction and a
/// chi-squared reference distribution on `k - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::EmptyGroup(i));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if let Some(v) = pooled.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("sample value {v}")));
    }
    let n = pooled.len();
    let (ranks, ties) = midranks(&pooled);
    let correction = 1.0 - tie_sum(&ties) / ((n * n * n - n) as f64);
    if correction <= 0.0 {
        return Ok(TestResult::degenerate(0.0, Method::Chi2Approx, n));
    }
    let mut offset = 0;
    let mut between = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        between += r * r / g.len() as f64;
        offset += g.len();
    }
    let nf = n as f64;
    let h = (12.0 / (nf * (nf + 1.0)) * between - 3.0 * (nf + 1.0)) / correction;
    let h = h.max(0.0);
    let dof = (groups.len() - 1) as f64;
    let p = ChiSquared::new(dof)
        .expect("at least one degree of freedom")
        .sf(h);
    Ok(TestResult {
        statistic: h,
        z_or_chi2: h,
        p_value: clamp_p(p),
        method: Method::Chi2Approx,
        n_effective: n,
        degenerate: false,
    })
}

/// DeLong comparison of two correlated AUCs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeLongResult {
    pub test: TestResult,
    pub auc_a: f64,
    pub auc_b: f64,
    /// Estimated variance of `auc_a - auc_b`.
    pub variance: f64,
}

/// Paired DeLong test of `H0: AUC_a = AUC_b` for two score tables over the
/// same images. The p-value is two-sided.
pub fn delong_test(scores_a: &ScoreTable, scores_b: &ScoreTable) -> Result<DeLongResult> {
    let a = scores_a.by_id();
    let b = scores_b.by_id();
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(Error::IdMismatch(
            "score tables cover different image sets".into(),
        ));
    }
    // (score_a, score_b) per positive and per negative case, in id order
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (id, ea) in &a {
        let eb = b[id];
        if ea.label != eb.label {
            return Err(Error::LabelConflict(id.to_string()));
        }
        let pair = [ea.likelihood, eb.likelihood];
        if ea.label.is_positive() {
            pos.push(pair);
        } else {
            neg.push(pair);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels);
    }
    let (m, n) = (pos.len(), neg.len());

    let kernel = |x: f64, y: f64| {
        if x > y {
            1.0
        } else if x == y {
            0.5
        } else {
            0.0
        }
    };
    // structural components per classifier
    let mut v10 = [vec![0.0; m], vec![0.0; m]];
    let mut v01 = [vec![0.0; n], vec![0.0; n]];
    for r in 0..2 {
        for (i, p) in pos.iter().enumerate() {
            for (j, q) in neg.iter().enumerate() {
                let k = kernel(p[r], q[r]);
                v10[r][i] += k;
                v01[r][j] += k;
            }
        }
        v10[r].iter_mut().for_each(|v| *v /= n as f64);
        v01[r].iter_mut().for_each(|v| *v /= m as f64);
    }
    let auc = [mean(&v10[0]), mean(&v10[1])];
    let s10 = covariance(&v10, auc);
    let s01 = covariance(&v01, auc);
    let var = |r: usize, s: usize| s10[r][s] / m as f64 + s01[r][s] / n as f64;
    let variance = var(0, 0) + var(1, 1) - 2.0 * var(0, 1);
    let diff = auc[0] - auc[1];

    let test = if variance <= 1e-15 {
        if diff.abs() <= 1e-15 {
            TestResult::degenerate(diff, Method::NormalApprox, m + n)
        } else {
            TestResult {
                statistic: diff,
                z_or_chi2: diff.signum() * f64::INFINITY,
                p_value: f64::MIN_POSITIVE,
                method: Method::NormalApprox,
                n_effective: m + n,
                degenerate: true,
            }
        }
    } else {
        let z = diff / variance.sqrt();
        TestResult {
            statistic: diff,
            z_or_chi2: z,
            p_value: clamp_p(2.0 * normal_sf(z.abs())),
            method: Method::NormalApprox,
            n_effective: m + n,
            degenerate: false,
        }
    };
    Ok(DeLongResult {
        test,
        auc_a: auc[0],
        auc_b: auc[1],
        variance,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// 2x2 sample covariance of two component vectors; zero for a single sample.
fn covariance(v: &[Vec<f64>; 2], means: [f64; 2]) -> [[f64; 2]; 2] {
    let k = v[0].len();
    let mut out = [[0.0; 2]; 2];
    if k < 2 {
        return out;
    }
    for r in 0..2 {
        for s in 0..2 {
            out[r][s] = v[r]
                .iter()
                .zip(&v[s])
                .map(|(a, b)| (a - means[r]) * (b - means[s]))
                .sum::<f64>()
                / (k - 1) as f64;
        }
    }
    out
}

/// Bonferroni-adjusted significance level for `m` comparisons.
pub fn bonferroni(alpha: f64, m: usize) -> f64 {
    assert!(m >= 1, "at least one comparison");
    alpha / m as f64
}
