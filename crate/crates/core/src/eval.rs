//! Evaluation: average precision and NDCG@10, TREC run-file scoring, paired
//! t-tests, and two-fold cross-validated parameter sweeps (even vs. odd
//! topic ids).

use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{InvertedIndex, Judgments, TopicQuery};
use crate::lm::BackgroundModel;
use crate::pipeline::{run_topic, PipelineParams};
use crate::retrieval::Ranking;

/// Ranking depth used for MAP unless a caller overrides it.
pub const DEFAULT_EVAL_DEPTH: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("paired t-test needs at least 2 paired samples")]
    TooFewSamples,
    #[error("paired t-test given samples of different lengths ({0} vs {1})")]
    MismatchedSamples(usize, usize),
    #[error("run file line {line}: {message}")]
    RunLine { line: usize, message: String },
    #[error("cross-validation fold {0} has no topics")]
    EmptyFold(&'static str),
    #[error("sweep grid has an empty axis")]
    EmptyGrid,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-topic metric values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub topic_id: u32,
    pub ap: f64,
    pub ndcg10: f64,
}

/// Average precision of a ranked list under binary relevance. Unjudged
/// documents count as non-relevant; unretrieved relevant documents
/// contribute zero. `None` when the topic has no relevant document (such
/// topics are excluded from MAP).
pub fn average_precision(ranked: &[&str], judgments: &Judgments, topic_id: u32) -> Option<f64> {
    let total_relevant = judgments.relevant_count(topic_id);
    if total_relevant == 0 {
        log::warn!("topic {topic_id} has no relevant documents; excluded from MAP");
        return None;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, doc_id) in ranked.iter().enumerate() {
        if judgments.is_relevant(topic_id, doc_id) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

/// NDCG at cutoff `k` with graded gains (the relevance grade itself) and
/// 1/log2(rank+1) discounts. `None` when the topic has no relevant document.
pub fn ndcg_at_k(ranked: &[&str], judgments: &Judgments, topic_id: u32, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = judgments
        .grades_for_topic(topic_id)
        .into_iter()
        .filter(|g| *g > 0)
        .collect();
    if ideal.is_empty() {
        log::warn!("topic {topic_id} has no relevant documents; excluded from NDCG");
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let discount = |rank: usize| (rank as f64 + 1.0).log2();
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| f64::from(*g) / discount(i + 1))
        .sum();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, doc_id)| {
            let gain = judgments.grade(topic_id, doc_id).unwrap_or(0);
            f64::from(gain) / discount(i + 1)
        })
        .sum();
    Some(dcg / idcg)
}

/// AP (at `depth`) and NDCG@10 for one in-memory ranking.
pub fn evaluate_ranking(
    index: &InvertedIndex,
    ranking: &Ranking,
    judgments: &Judgments,
    depth: usize,
) -> Option<EvalRecord> {
    let ranked: Vec<&str> = ranking
        .head(depth)
        .iter()
        .map(|(d, _)| index.doc(*d).doc_id.as_str())
        .collect();
    let ap = average_precision(&ranked, judgments, ranking.topic_id)?;
    let ndcg10 = ndcg_at_k(&ranked, judgments, ranking.topic_id, 10)?;
    Some(EvalRecord {
        topic_id: ranking.topic_id,
        ap,
        ndcg10,
    })
}

/// Parse a 6-column TREC run file into per-topic ranked lists, re-sorted by
/// (score desc, docno asc).
pub fn read_run<R: BufRead>(reader: R) -> Result<BTreeMap<u32, Vec<(String, f64)>>, Error> {
    let mut topics: BTreeMap<u32, Vec<(String, f64)>> = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::RunLine {
                line: lineno,
                message: format!("expected 6 columns, found {}", cols.len()),
            });
        }
        let topic: u32 = cols[0].parse().map_err(|_| Error::RunLine {
            line: lineno,
            message: format!("bad topic id {:?}", cols[0]),
        })?;
        let score: f64 = cols[4].parse().map_err(|_| Error::RunLine {
            line: lineno,
            message: format!("bad score {:?}", cols[4]),
        })?;
        topics
            .entry(topic)
            .or_default()
            .push((cols[2].to_string(), score));
    }
    for ranked in topics.values_mut() {
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    }
    Ok(topics)
}

/// Evaluate a parsed run file against judgments. Topics without relevant
/// documents are skipped with a warning.
pub fn evaluate_run(
    run: &BTreeMap<u32, Vec<(String, f64)>>,
    judgments: &Judgments,
    depth: usize,
) -> Vec<EvalRecord> {
    let mut records = Vec::new();
    for (topic_id, ranked) in run {
        let ids: Vec<&str> = ranked
            .iter()
            .take(depth)
            .map(|(d, _)| d.as_str())
            .collect();
        let (Some(ap), Some(ndcg10)) = (
            average_precision(&ids, judgments, *topic_id),
            ndcg_at_k(&ids, judgments, *topic_id, 10),
        ) else {
            continue;
        };
        records.push(EvalRecord {
            topic_id: *topic_id,
            ap,
            ndcg10,
        });
    }
    records
}

pub fn mean_ap(records: &[EvalRecord]) -> f64 {
    records.iter().map(|r| r.ap).sum::<f64>() / records.len() as f64
}

pub fn mean_ndcg10(records: &[EvalRecord]) -> f64 {
    records.iter().map(|r| r.ndcg10).sum::<f64>() / records.len() as f64
}

/// Two-sided paired t-test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    /// True when the differences have zero variance but nonzero mean, where
    /// the statistic degenerates and the reported p is the floor.
    pub degenerate: bool,
}

/// Two-sided paired t-test with n−1 degrees of freedom. All-zero differences
/// give p = 1 by convention.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, Error> {
    if a.len() != b.len() {
        return Err(Error::MismatchedSamples(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewSamples);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTestResult {
                t: 0.0,
                p: 1.0,
                degenerate: false,
            });
        }
        log::warn!("paired t-test: zero variance with nonzero mean difference");
        return Ok(TTestResult {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid dof");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t,
        p,
        degenerate: false,
    })
}

/// Parameter grid for the sweep: π × |F| × |T|, enumerated in that nesting
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub pi: Vec<f64>,
    pub feedback_docs: Vec<usize>,
    pub expansion_terms: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            pi: (1..=9).map(|i| f64::from(i) / 10.0).collect(),
            feedback_docs: vec![5, 10, 20, 30, 50],
            expansion_terms: vec![10, 20, 30, 50, 75, 100],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub pi: f64,
    pub feedback_docs: usize,
    pub expansion_terms: usize,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for &pi in &self.pi {
            for &feedback_docs in &self.feedback_docs {
                for &expansion_terms in &self.expansion_terms {
                    points.push(GridPoint {
                        pi,
                        feedback_docs,
                        expansion_terms,
                    });
                }
            }
        }
        points
    }
}

/// Result for one fold: the grid point chosen on the training fold and the
/// held-out scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    /// Which parity of topic ids is held out here.
    pub held_out: &'static str,
    pub chosen: GridPoint,
    pub train_map: f64,
    pub heldout_map: f64,
    pub heldout_ndcg10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: [FoldReport; 2],
    /// Mean of the two held-out MAPs.
    pub map: f64,
    /// Mean of the two held-out NDCG@10s.
    pub ndcg10: f64,
}

/// Two-fold cross-validation over even/odd topic ids: each fold evaluates
/// the grid point that maximizes MAP on the other fold (ties keep the first
/// point in grid order). Deterministic, including under parallel execution.
pub fn cross_validate(
    index: &InvertedIndex,
    background: &BackgroundModel,
    topics: &[TopicQuery],
    judgments: &Judgments,
    base: &PipelineParams,
    grid: &SweepGrid,
) -> Result<CrossValidation, Error> {
    if grid.pi.is_empty() || grid.feedback_docs.is_empty() || grid.expansion_terms.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let even: Vec<usize> = (0..topics.len())
        .filter(|&i| topics[i].topic_id % 2 == 0)
        .collect();
    let odd: Vec<usize> = (0..topics.len())
        .filter(|&i| topics[i].topic_id % 2 == 1)
        .collect();
    if even.is_empty() {
        return Err(Error::EmptyFold("even"));
    }
    if odd.is_empty() {
        return Err(Error::EmptyFold("odd"));
    }

    let points = grid.points();
    // Per grid point, per topic: metric records (None for unevaluable topics).
    let table: Vec<Vec<Option<EvalRecord>>> = points
        .iter()
        .map(|point| {
            let params =
                base.with_grid_point(point.pi, point.feedback_docs, point.expansion_terms);
            topics
                .par_iter()
                .map(|topic| match run_topic(index, background, topic, &params) {
                    Ok(ranking) => evaluate_ranking(index, &ranking, judgments, base.depth),
                    Err(e) => {
                        log::warn!("topic {} skipped: {e}", topic.topic_id);
                        None
                    }
                })
                .collect()
        })
        .collect();

    let subset_mean = |rows: &[Option<EvalRecord>], subset: &[usize], f: fn(&EvalRecord) -> f64| {
        let values: Vec<f64> = subset
            .iter()
            .filter_map(|&i| rows[i].as_ref().map(f))
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };

    let mut folds = Vec::with_capacity(2);
    for (held_out, train_set, test_set) in [("even", &odd, &even), ("odd", &even, &odd)] {
        let mut best: Option<(usize, f64)> = None;
        for (pi, rows) in table.iter().enumerate() {
            let train_map = subset_mean(rows, train_set, |r| r.ap);
            if best.is_none() || train_map > best.unwrap().1 {
                best = Some((pi, train_map));
            }
        }
        let (chosen_idx, train_map) = best.expect("non-empty grid");
        folds.push(FoldReport {
            held_out,
            chosen: points[chosen_idx],
            train_map,
            heldout_map: subset_mean(&table[chosen_idx], test_set, |r| r.ap),
            heldout_ndcg10: subset_mean(&table[chosen_idx], test_set, |r| r.ndcg10),
        });
    }
    let folds: [FoldReport; 2] = [folds.remove(0), folds.remove(0)];
    let map = (folds[0].heldout_map + folds[1].heldout_map) / 2.0;
    let ndcg10 = (folds[0].heldout_ndcg10 + folds[1].heldout_ndcg10) / 2.0;
    Ok(CrossValidation { folds, map, ndcg10 })
}
