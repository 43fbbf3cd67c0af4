//! Dyadic group fairness for link prediction.
//!
//! An edge joins two nodes and therefore two attribute values. Dyadic groups
//! map node groups onto edges:
//!
//! * `mixed`: two groups, inter (0) and intra (1);
//! * `group`: one group per attribute value; each edge is counted twice, once
//!   per endpoint;
//! * `subgroup`: one group per unordered attribute pair `{a, b}`, `a <= b`,
//!   with id `a + b(b+1)/2`.
//!
//! ΔDP is the spread of positive-decision rates across groups. ΔEO is the
//! larger of the TPR spread and the FPR spread.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, SensitiveAttributes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DyadicScheme {
    Mixed,
    Group,
    Subgroup,
}

impl DyadicScheme {
    pub const ALL: [DyadicScheme; 3] = [
        DyadicScheme::Mixed,
        DyadicScheme::Group,
        DyadicScheme::Subgroup,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DyadicScheme::Mixed => "mixed",
            DyadicScheme::Group => "group",
            DyadicScheme::Subgroup => "subgroup",
        }
    }

    pub fn num_groups(&self, num_classes: usize) -> Result<usize> {
        match self {
            DyadicScheme::Mixed => Ok(2),
            DyadicScheme::Group => Ok(num_classes),
            DyadicScheme::Subgroup => subgroup_count(num_classes),
        }
    }
}

impl fmt::Display for DyadicScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DyadicScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" | "m" => Ok(DyadicScheme::Mixed),
            "group" | "g" => Ok(DyadicScheme::Group),
            "subgroup" | "sub-group" | "s" => Ok(DyadicScheme::Subgroup),
            _ => Err(Error::Unknown {
                kind: "dyadic scheme",
                value: s.to_string(),
            }),
        }
    }
}

/// Number of unordered attribute pairs with repetition, `C(k + 1, 2)`.
pub fn subgroup_count(num_classes: usize) -> Result<usize> {
    if num_classes < 1 {
        return Err(Error::InvalidParameter(
            "subgroup count needs at least one class".into(),
        ));
    }
    Ok(num_classes * (num_classes + 1) / 2)
}

pub fn subgroup_id(a: usize, b: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo + hi * (hi + 1) / 2
}

/// Group membership of prediction rows. Entry `k` places batch row
/// `rows[k]` in group `groups[k]`; the group scheme lists every row twice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicAssignment {
    pub scheme: DyadicScheme,
    pub num_groups: usize,
    pub batch_len: usize,
    pub rows: Vec<usize>,
    pub groups: Vec<usize>,
}

impl DyadicAssignment {
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }
}

pub fn assign_dyadic(
    edges: &[Edge],
    s: &SensitiveAttributes,
    scheme: DyadicScheme,
) -> Result<DyadicAssignment> {
    let n = s.len();
    let num_groups = scheme.num_groups(s.num_classes())?;
    let per_row = if scheme == DyadicScheme::Group { 2 } else { 1 };
    let mut rows = Vec::with_capacity(per_row * edges.len());
    let mut groups = Vec::with_capacity(per_row * edges.len());
    for (k, &(i, j)) in edges.iter().enumerate() {
        for v in [i, j] {
            if v >= n {
                return Err(Error::NodeOutOfRange { id: v, n });
            }
        }
        let (a, b) = (s.get(i), s.get(j));
        match scheme {
            DyadicScheme::Mixed => {
                rows.push(k);
                groups.push(usize::from(a == b));
            }
            DyadicScheme::Group => {
                rows.extend([k, k]);
                groups.extend([a, b]);
            }
            DyadicScheme::Subgroup => {
                rows.push(k);
                groups.push(subgroup_id(a, b));
            }
        }
    }
    Ok(DyadicAssignment {
        scheme,
        num_groups,
        batch_len: edges.len(),
        rows,
        groups,
    })
}

/// Scores, thresholded decisions and ground truth for evaluated pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBatch {
    scores: Vec<f64>,
    decisions: Vec<bool>,
    labels: Vec<bool>,
    threshold: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl PredictionBatch {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, threshold: f64) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: scores.len(),
                found: labels.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("prediction scores".into()));
        }
        let decisions = scores.iter().map(|&s| s >= threshold).collect();
        Ok(Self {
            scores,
            decisions,
            labels,
            threshold,
        })
    }

    /// Batch where only decisions are known; scores mirror the decisions.
    pub fn from_decisions(decisions: Vec<bool>, labels: Vec<bool>) -> Result<Self> {
        let scores = decisions.iter().map(|&d| f64::from(u8::from(d))).collect();
        Self::new(scores, labels, DEFAULT_THRESHOLD)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// What to do with groups that cannot support a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupPolicy {
    #[default]
    Strict,
    SkipDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityGap {
    pub value: f64,
    pub excluded_groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizedOdds {
    pub delta_tpr: f64,
    pub delta_fpr: f64,
    pub delta_eo: f64,
    pub excluded_groups: Vec<usize>,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    rows: usize,
    selected: usize,
    pos: usize,
    true_pos: usize,
    neg: usize,
    false_pos: usize,
}

fn tally(batch: &PredictionBatch, assign: &DyadicAssignment) -> Result<Vec<Tally>> {
    if assign.batch_len != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            found: assign.batch_len,
        });
    }
    let mut t = vec![Tally::default(); assign.num_groups];
    for (&row, &group) in assign.rows.iter().zip(&assign.groups) {
        let d = batch.decisions[row];
        let g = &mut t[group];
        g.rows += 1;
        g.selected += usize::from(d);
        if batch.labels[row] {
            g.pos += 1;
            g.true_pos += usize::from(d);
        } else {
            g.neg += 1;
            g.false_pos += usize::from(d);
        }
    }
    Ok(t)
}

fn spread(rates: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = rates.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    hi - lo
}

pub fn delta_dp(batch: &PredictionBatch, assign: &DyadicAssignment) -> Result<f64> {
    delta_dp_with(batch, assign, GroupPolicy::Strict).map(|g| g.value)
}

pub fn delta_dp_with(
    batch: &PredictionBatch,
    assign: &DyadicAssignment,
    policy: GroupPolicy,
) -> Result<ParityGap> {
    let tallies = tally(batch, assign)?;
    let mut excluded = Vec::new();
    let mut used = Vec::new();
    for (group, t) in tallies.iter().enumerate() {
        if t.rows == 0 {
            match policy {
                GroupPolicy::Strict => return Err(Error::EmptyGroup { group }),
                GroupPolicy::SkipDeficient => excluded.push(group),
            }
        } else {
            used.push(t.selected as f64 / t.rows as f64);
        }
    }
    if used.is_empty() {
        return Err(Error::Empty("no dyadic group has rows".into()));
    }
    Ok(ParityGap {
        value: spread(used.into_iter()),
        excluded_groups: excluded,
    })
}

pub fn delta_eo(batch: &PredictionBatch, assign: &DyadicAssignment) -> Result<EqualizedOdds> {
    delta_eo_with(batch, assign, GroupPolicy::Strict)
}

pub fn delta_eo_with(
    batch: &PredictionBatch,
    assign: &DyadicAssignment,
    policy: GroupPolicy,
) -> Result<EqualizedOdds> {
    let tallies = tally(batch, assign)?;
    let mut excluded = Vec::new();
    let mut tpr = Vec::new();
    let mut fpr = Vec::new();
    for (group, t) in tallies.iter().enumerate() {
        let missing = if t.pos == 0 {
            Some(1)
        } else if t.neg == 0 {
            Some(0)
        } else {
            None
        };
        match (missing, policy) {
            (Some(missing_label), GroupPolicy::Strict) => {
                return Err(Error::DeficientGroup {
                    group,
                    missing_label,
                })
            }
            (Some(_), GroupPolicy::SkipDeficient) => excluded.push(group),
            (None, _) => {
                tpr.push(t.true_pos as f64 / t.pos as f64);
                fpr.push(t.false_pos as f64 / t.neg as f64);
            }
        }
    }
    if tpr.is_empty() {
        return Err(Error::Empty(
            "no dyadic group has both label classes".into(),
        ));
    }
    let delta_tpr = spread(tpr.into_iter());
    let delta_fpr = spread(fpr.into_iter());
    Ok(EqualizedOdds {
        delta_tpr,
        delta_fpr,
        delta_eo: delta_tpr.max(delta_fpr),
        excluded_groups: excluded,
    })
}

/// Rank-based ROC AUC (Mann-Whitney U, ties count one half).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based average rank of the tie block
        let rank = (start + end + 1) as f64 / 2.0;
        let pos_in_block = order[start..end].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += rank * pos_in_block as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn accuracy(batch: &PredictionBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("prediction batch".into()));
    }
    let correct = batch
        .decisions
        .iter()
        .zip(&batch.labels)
        .filter(|(d, l)| d == l)
        .count();
    Ok(correct as f64 / batch.len() as f64)
}

pub fn auc_accuracy(batch: &PredictionBatch) -> Result<(f64, f64)> {
    Ok((auc(&batch.scores, &batch.labels)?, accuracy(batch)?))
}

/// One metrics record per dyadic scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRecord {
    pub scheme: DyadicScheme,
    pub delta_dp: f64,
    pub delta_tpr: f64,
    pub delta_fpr: f64,
    pub delta_eo: f64,
    pub auc: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_groups: Vec<usize>,
}

/// One row of a predictions file: `src,dst,score,label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
    pub label: u8,
}

pub fn write_predictions<W: std::io::Write>(
    out: W,
    pairs: &[Edge],
    batch: &PredictionBatch,
) -> Result<()> {
    if pairs.len() != batch.len() {
        return Err(Error::LengthMismatch {
            expected: batch.len(),
            found: pairs.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    for (k, &(src, dst)) in pairs.iter().enumerate() {
        w.serialize(PredictionRow {
            src,
            dst,
            score: batch.scores[k],
            label: u8::from(batch.labels[k]),
        })?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

/// Parses a predictions file into pairs and a batch thresholded at
/// `threshold`.
pub fn read_predictions<R: std::io::Read>(
    input: R,
    threshold: f64,
) -> Result<(Vec<Edge>, PredictionBatch)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for row in r.deserialize() {
        let row: PredictionRow = row?;
        if row.label > 1 {
            return Err(Error::InvalidParameter(format!(
                "label {} is not 0 or 1",
                row.label
            )));
        }
        pairs.push((row.src, row.dst));
        scores.push(row.score);
        labels.push(row.label == 1);
    }
    if pairs.is_empty() {
        return Err(Error::Empty("predictions file".into()));
    }
    Ok((pairs, PredictionBatch::new(scores, labels, threshold)?))
}

/// Full metric suite for `batch`, whose row `k` is the pair `pairs[k]`.
pub fn evaluate(
    batch: &PredictionBatch,
    pairs: &[Edge],
    s: &SensitiveAttributes,
    scheme: DyadicScheme,
    policy: GroupPolicy,
) -> Result<FairnessRecord> {
    let assign = assign_dyadic(pairs, s, scheme)?;
    let dp = delta_dp_with(batch, &assign, policy)?;
    let eo = delta_eo_with(batch, &assign, policy)?;
    let (auc, accuracy) = auc_accuracy(batch)?;
    let mut excluded = dp.excluded_groups;
    excluded.extend(eo.excluded_groups);
    excluded.sort_unstable();
    excluded.dedup();
    Ok(FairnessRecord {
        scheme,
        delta_dp: dp.value,
        delta_tpr: eo.delta_tpr,
        delta_fpr: eo.delta_fpr,
        delta_eo: eo.delta_eo,
        auc,
        accuracy,
        excluded_groups: excluded,
    })
}
