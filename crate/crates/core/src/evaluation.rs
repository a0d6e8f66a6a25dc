//! ROC analysis, threshold calibration and per-document contamination rates.
//!
//! Scores follow the "higher means member" convention throughout; a threshold
//! `ε` classifies an example as a member when `score >= ε`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FPR caps reported when the caller does not choose any.
pub const DEFAULT_FPR_CAPS: [f64; 3] = [0.01, 0.05, 0.1];

/// Slack used when comparing an empirical FPR with a cap.
const FPR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Member,
    Nonmember,
}

impl Label {
    pub fn is_member(self) -> bool {
        self == Label::Member
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "member" => Ok(Label::Member),
            "nonmember" => Ok(Label::Nonmember),
            other => Err(Error::ConfigInvalid(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub id: String,
    pub score: f64,
    pub label: Label,
}

impl ScoredExample {
    pub fn new(id: impl Into<String>, score: f64, label: Label) -> Self {
        Self {
            id: id.into(),
            score,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TprAtFpr {
    pub fpr_cap: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: String,
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
    pub tpr_at_fpr: Vec<TprAtFpr>,
    pub n_members: usize,
    pub n_nonmembers: usize,
}

/// Cumulative counts at one ROC step: members and non-members with score at or above it.
#[derive(Debug, Clone, Copy)]
struct Step {
    tp: usize,
    fp: usize,
}

struct Prepared {
    /// (score, is_member) sorted by descending score.
    sorted: Vec<(f64, bool)>,
    members: usize,
    nonmembers: usize,
}

fn prepare(examples: &[ScoredExample]) -> Result<Prepared> {
    if let Some(bad) = examples.iter().find(|e| !e.score.is_finite()) {
        return Err(Error::NonFiniteScore(bad.score));
    }
    let members = examples.iter().filter(|e| e.label.is_member()).count();
    let nonmembers = examples.len() - members;
    if members == 0 || nonmembers == 0 {
        return Err(Error::DegenerateLabels { members, nonmembers });
    }
    let mut sorted: Vec<(f64, bool)> = examples.iter().map(|e| (e.score, e.label.is_member())).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(Prepared {
        sorted,
        members,
        nonmembers,
    })
}

/// Steps at every distinct score, highest first, starting from the empty selection.
fn steps(p: &Prepared) -> Vec<Step> {
    let mut out = vec![Step { tp: 0, fp: 0 }];
    let (mut tp, mut fp) = (0, 0);
    let s = &p.sorted;
    let mut i = 0;
    while i < s.len() {
        let score = s[i].0;
        while i < s.len() && s[i].0 == score {
            if s[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(Step { tp, fp });
    }
    out
}

/// Mann-Whitney statistic as the exact fraction `2·wins + ties` over `2·n·m`.
fn mann_whitney_counts(p: &Prepared) -> (u64, u64) {
    // Walk from lowest to highest score, tracking non-members strictly below.
    let mut doubled = 0u64;
    let mut nonmembers_below = 0u64;
    let s = &p.sorted;
    let mut end = s.len();
    while end > 0 {
        let score = s[end - 1].0;
        let mut start = end;
        while start > 0 && s[start - 1].0 == score {
            start -= 1;
        }
        let group_members = s[start..end].iter().filter(|x| x.1).count() as u64;
        let group_nonmembers = (end - start) as u64 - group_members;
        doubled += 2 * group_members * nonmembers_below + group_members * group_nonmembers;
        nonmembers_below += group_nonmembers;
        end = start;
    }
    (doubled, 2 * p.members as u64 * p.nonmembers as u64)
}

/// Area under the ROC curve with tied pairs half-credited.
pub fn auc(examples: &[ScoredExample]) -> Result<f64> {
    let p = prepare(examples)?;
    let (num, den) = mann_whitney_counts(&p);
    Ok(num as f64 / den as f64)
}

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one step per distinct score.
pub fn roc_curve(examples: &[ScoredExample]) -> Result<Vec<(f64, f64)>> {
    let p = prepare(examples)?;
    Ok(to_points(&p, &steps(&p)))
}

fn to_points(p: &Prepared, steps: &[Step]) -> Vec<(f64, f64)> {
    steps
        .iter()
        .map(|s| (s.fp as f64 / p.nonmembers as f64, s.tp as f64 / p.members as f64))
        .collect()
}

pub fn trapezoid_area(roc: &[(f64, f64)]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

fn tpr_from_steps(p: &Prepared, steps: &[Step], fpr_cap: f64) -> f64 {
    let allowed = fpr_cap * p.nonmembers as f64 + FPR_SLACK;
    let best = steps
        .iter()
        .filter(|s| s.fp as f64 <= allowed)
        .map(|s| s.tp)
        .max()
        .unwrap_or(0);
    best as f64 / p.members as f64
}

/// Best TPR over thresholds whose empirical FPR does not exceed `fpr_cap`.
pub fn tpr_at_fpr(examples: &[ScoredExample], fpr_cap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fpr_cap) {
        return Err(Error::ConfigInvalid(format!("fpr cap {fpr_cap} outside [0, 1]")));
    }
    let p = prepare(examples)?;
    Ok(tpr_from_steps(&p, &steps(&p), fpr_cap))
}

/// Full report for one detector: ROC, AUC and TPR at each cap.
pub fn evaluate(detector: &str, examples: &[ScoredExample], fpr_caps: &[f64]) -> Result<EvalReport> {
    if let Some(cap) = fpr_caps.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::ConfigInvalid(format!("fpr cap {cap} outside [0, 1]")));
    }
    let p = prepare(examples)?;
    let st = steps(&p);
    let (num, den) = mann_whitney_counts(&p);
    Ok(EvalReport {
        detector: detector.to_string(),
        roc: to_points(&p, &st),
        auc: num as f64 / den as f64,
        tpr_at_fpr: fpr_caps
            .iter()
            .map(|&cap| TprAtFpr {
                fpr_cap: cap,
                tpr: tpr_from_steps(&p, &st, cap),
            })
            .collect(),
        n_members: p.members,
        n_nonmembers: p.nonmembers,
    })
}

/// [`evaluate`] with the default FPR caps and no detector name.
pub fn compute_auc(examples: &[ScoredExample]) -> Result<EvalReport> {
    evaluate("", examples, &DEFAULT_FPR_CAPS)
}

pub const THRESHOLD_RULE: &str = "score >= epsilon => member";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub epsilon: f64,
    pub rule: String,
    pub achieved_accuracy: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl Threshold {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            rule: THRESHOLD_RULE.to_string(),
            achieved_accuracy: f64::NAN,
            fpr: f64::NAN,
            tpr: f64::NAN,
        }
    }

    pub fn is_member(&self, score: f64) -> bool {
        score >= self.epsilon
    }
}

/// Threshold maximizing accuracy of `score >= ε ⇒ member` on `validation`.
///
/// Candidates are the midpoints between adjacent distinct scores plus one
/// sentinel below the minimum and one above the maximum. Ties in accuracy
/// go to the lower false-positive count, then to the larger `ε`.
pub fn calibrate_threshold(validation: &[ScoredExample]) -> Result<Threshold> {
    let p = prepare(validation)?;
    let s = &p.sorted;
    let total = s.len();
    let highest = s[0].0;
    let lowest = s[total - 1].0;

    // Candidate above the maximum selects nothing.
    let mut best = (p.nonmembers, 0usize, 0usize, highest + 1.0); // (correct, fp, tp, eps)
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < total {
        let score = s[i].0;
        while i < total && s[i].0 == score {
            if s[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let eps = if i < total {
            (score + s[i].0) / 2.0
        } else {
            lowest - 1.0
        };
        let correct = tp + (p.nonmembers - fp);
        // Candidates arrive in decreasing ε, so equal (correct, fp) keeps the earlier one.
        if correct > best.0 || (correct == best.0 && fp < best.1) {
            best = (correct, fp, tp, eps);
        }
    }
    let (correct, fp, tp, epsilon) = best;
    Ok(Threshold {
        epsilon,
        rule: THRESHOLD_RULE.to_string(),
        achieved_accuracy: correct as f64 / total as f64,
        fpr: fp as f64 / p.nonmembers as f64,
        tpr: tp as f64 / p.members as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub epsilon: f64,
    pub rates: BTreeMap<String, f64>,
    /// Distribution of per-document rates in ten equal bins; the last bin includes 1.0.
    pub histogram: Vec<HistogramBin>,
}

/// Fraction of each document's snippets classified as members.
pub fn contamination_rate(
    scores_by_doc: &BTreeMap<String, Vec<f64>>,
    threshold: &Threshold,
) -> Result<ContaminationReport> {
    let mut rates = BTreeMap::new();
    for (doc, scores) in scores_by_doc {
        if scores.is_empty() {
            return Err(Error::EmptyDocument(doc.clone()));
        }
        let hits = scores.iter().filter(|&&s| threshold.is_member(s)).count();
        rates.insert(doc.clone(), hits as f64 / scores.len() as f64);
    }
    const BINS: usize = 10;
    let mut histogram: Vec<HistogramBin> = (0..BINS)
        .map(|b| HistogramBin {
            lower: b as f64 / BINS as f64,
            upper: (b + 1) as f64 / BINS as f64,
            count: 0,
        })
        .collect();
    for &rate in rates.values() {
        let bin = ((rate * BINS as f64).floor() as usize).min(BINS - 1);
        histogram[bin].count += 1;
    }
    Ok(ContaminationReport {
        epsilon: threshold.epsilon,
        rates,
        histogram,
    })
}

pub fn roc_csv(roc: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in roc {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    out
}

/// One cell of a detector × setting AUC table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub detector: String,
    pub setting: String,
    pub auc: f64,
}

/// Detector rows × setting columns, plus an unweighted mean over the settings present.
pub fn summary_csv(cells: &[SummaryCell]) -> String {
    let mut settings: Vec<&str> = cells.iter().map(|c| c.setting.as_str()).collect();
    settings.sort_unstable();
    settings.dedup();
    let mut rows: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for c in cells {
        rows.entry(&c.detector).or_default().insert(&c.setting, c.auc);
    }
    let mut out = String::from("detector");
    for s in &settings {
        out.push(',');
        out.push_str(s);
    }
    out.push_str(",mean_unweighted\n");
    for (detector, values) in &rows {
        out.push_str(detector);
        for s in &settings {
            out.push(',');
            if let Some(v) = values.get(s) {
                let _ = write!(out, "{v:.4}");
            }
        }
        let mean = values.values().sum::<f64>() / values.len() as f64;
        let _ = writeln!(out, ",{mean:.4}");
    }
    out
}
