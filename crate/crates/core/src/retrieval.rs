//! Ranked retrieval and conversion of top-document scores into normalized
//! posterior weights.
//!
//! Scoring is exhaustive over all non-empty documents (smoothing gives every
//! document positive query probability, so none can be skipped), in log
//! space. Expanded queries carry real-valued term weights; the score is the
//! cross-entropy Σ_t p(t|θ_q')·log p(t|d), which for an unexpanded query with
//! integer counts is exactly the query log-likelihood.

use std::io::Write;

use crate::corpus::{DocId, InvertedIndex, TermId, TopicQuery};
use crate::lm::{dirichlet_expected_prob, spud_expected_prob, BackgroundModel, ModelParams};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("query unscorable: no query term occurs in the index vocabulary")]
    Unscorable,
    #[error("result depth k must be at least 1")]
    ZeroDepth,
    #[error("feedback set must contain at least one document")]
    EmptyFeedback,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A query as scored against the index: resolved term ids with real-valued
/// weights, ordered by term id (equivalently, by term string). Unexpanded
/// queries use their title term counts as weights.
#[derive(Debug, Clone)]
pub struct WeightedQuery {
    pub topic_id: u32,
    terms: Vec<(TermId, f64)>,
}

impl WeightedQuery {
    /// Resolve a title query; out-of-vocabulary terms are dropped with a
    /// warning and a fully unresolvable query is an error.
    pub fn from_topic(query: &TopicQuery, index: &InvertedIndex) -> Result<Self, Error> {
        Self::from_weights(
            query.topic_id,
            query.terms.iter().map(|(t, c)| (t.as_str(), f64::from(*c))),
            index,
        )
    }

    /// Resolve an arbitrary term→weight distribution against the index.
    pub fn from_weights<'a>(
        topic_id: u32,
        weights: impl IntoIterator<Item = (&'a str, f64)>,
        index: &InvertedIndex,
    ) -> Result<Self, Error> {
        let mut terms: Vec<(TermId, f64)> = Vec::new();
        for (term, weight) in weights {
            match index.term_id(term) {
                Some(id) => terms.push((id, weight)),
                None => log::warn!("query term {term:?} not in vocabulary; dropped"),
            }
        }
        if terms.is_empty() {
            return Err(Error::Unscorable);
        }
        terms.sort_unstable_by_key(|(id, _)| *id);
        Ok(Self { topic_id, terms })
    }

    pub fn terms(&self) -> &[(TermId, f64)] {
        &self.terms
    }
}

/// A ranked result list, sorted by (log score desc, external doc id asc).
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub topic_id: u32,
    entries: Vec<(DocId, f64)>,
}

impl Ranking {
    pub fn entries(&self) -> &[(DocId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The top `n` entries (fewer when the ranking is shorter).
    pub fn head(&self, n: usize) -> &[(DocId, f64)] {
        &self.entries[..self.entries.len().min(n)]
    }
}

/// Score every non-empty document against a weighted query and keep the top
/// `k`. Documents whose score is not finite (possible only with unsmoothed
/// models) are dropped. Ties order by external doc id ascending.
pub fn search(
    index: &InvertedIndex,
    background: &BackgroundModel,
    params: ModelParams,
    query: &WeightedQuery,
    k: usize,
) -> Result<Ranking, Error> {
    if k == 0 {
        return Err(Error::ZeroDepth);
    }
    let n_docs = index.num_docs() as usize;

    // Dense per-query-term count columns so the scoring loop is branch-light.
    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(query.terms.len());
    for &(term, _) in &query.terms {
        let mut column = vec![0u32; n_docs];
        for &(doc, count) in index.postings(term) {
            column[doc as usize] = count;
        }
        columns.push(column);
    }
    let term_background: Vec<(f64, f64)> = query
        .terms
        .iter()
        .map(|&(t, _)| (background.df_proportion(t), background.collection_ml(t)))
        .collect();

    let mut scored: Vec<(DocId, f64)> = Vec::with_capacity(n_docs);
    for doc in 0..n_docs {
        let entry = index.doc(doc as DocId);
        if entry.token_count == 0 {
            continue;
        }
        let token_count = f64::from(entry.token_count);
        let distinct_count = f64::from(entry.distinct_count);
        let mut score = 0.0;
        for (i, &(_, weight)) in query.terms.iter().enumerate() {
            let count = f64::from(columns[i][doc]);
            let p = match params {
                ModelParams::Spud(c) => spud_expected_prob(
                    count,
                    token_count,
                    distinct_count,
                    c.omega,
                    c.mass,
                    term_background[i].0,
                ),
                ModelParams::Dirichlet(c) => {
                    dirichlet_expected_prob(count, token_count, c.mu, term_background[i].1)
                }
            };
            score += weight * p.ln();
        }
        if score.is_finite() {
            scored.push((doc as DocId, score));
        }
    }

    scored.sort_unstable_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.doc(a.0).doc_id.cmp(&index.doc(b.0).doc_id))
    });
    scored.truncate(k);
    Ok(Ranking {
        topic_id: query.topic_id,
        entries: scored,
    })
}

/// Convert the log scores of a feedback prefix into normalized posterior
/// weights: w_d = exp(ls_d − max) / Σ exp(ls − max). Invariant to adding a
/// constant to every log score.
pub fn posterior_weights(log_scores: &[f64]) -> Vec<f64> {
    if log_scores.is_empty() {
        return Vec::new();
    }
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_scores.iter().map(|ls| (ls - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Write rankings in 6-column TREC run format:
/// `topic Q0 docno rank score tag`, score with 6 decimal places.
pub fn write_run<W: Write>(
    out: &mut W,
    index: &InvertedIndex,
    rankings: &[Ranking],
    tag: &str,
) -> Result<(), Error> {
    for ranking in rankings {
        for (rank, (doc, score)) in ranking.entries().iter().enumerate() {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                ranking.topic_id,
                index.doc(*doc).doc_id,
                rank + 1,
                score,
                tag
            )?;
        }
    }
    Ok(())
}
