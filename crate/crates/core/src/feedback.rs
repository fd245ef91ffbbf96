//! Pseudo-relevance feedback: topical posteriors, the five term-selection
//! methods (RM3, SMM, PDCM, and the query topic model under Dirichlet and
//! Pólya document models), and query interpolation.
//!
//! All selection methods share the same protocol: score every candidate term
//! from the feedback documents, keep the top |T| by raw score, renormalize to
//! a distribution, and interpolate with the original query model using π.

use std::collections::BTreeMap;

use statrs::function::gamma::{digamma, ln_gamma};

use crate::corpus::{InvertedIndex, TopicQuery};
use crate::lm::{dirichlet_expected_prob, spud_expected_prob, BackgroundModel};
use crate::retrieval::{posterior_weights, Ranking};

/// SMM expectation-maximization stopping parameters.
const SMM_MAX_ITERATIONS: u32 = 500;
const SMM_TOLERANCE: f64 = 1e-8;
/// PDCM fixed-point stopping parameters.
const PDCM_MAX_ITERATIONS: u32 = 1000;
const PDCM_TOLERANCE: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("feedback set must contain at least one document")]
    EmptyFeedback,
    #[error("feedback documents contain no candidate terms")]
    EmptyCandidatePool,
    #[error("no informative terms: every candidate score is zero")]
    NoInformativeTerms,
    #[error("smm mixture weight must satisfy 0 <= lambda < 1, got {0}")]
    InvalidLambda(f64),
    #[error("term budget |T| must be at least 1")]
    ZeroTermBudget,
}

/// A feedback document as the selection methods see it: term counts plus the
/// |d| and m_d statistics the closed-form methods read. For indexed documents
/// `token_count` equals the count sum; synthetic probe documents may set the
/// fields independently (the pooled methods derive length from the counts).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDoc {
    pub counts: BTreeMap<String, f64>,
    pub token_count: f64,
    pub distinct_count: f64,
}

impl FeedbackDoc {
    pub fn from_counts(counts: BTreeMap<String, f64>) -> Self {
        let token_count = counts.values().sum();
        let distinct_count = counts.len() as f64;
        Self {
            counts,
            token_count,
            distinct_count,
        }
    }

    pub fn count(&self, term: &str) -> f64 {
        self.counts.get(term).copied().unwrap_or(0.0)
    }
}

/// The top-|F| documents of a first pass with their normalized posterior
/// weights (softmax of the log scores).
#[derive(Debug, Clone)]
pub struct FeedbackSet {
    pub docs: Vec<FeedbackDoc>,
    pub log_scores: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FeedbackSet {
    pub fn new(docs: Vec<FeedbackDoc>, log_scores: Vec<f64>) -> Result<Self, Error> {
        if docs.is_empty() || docs.len() != log_scores.len() {
            return Err(Error::EmptyFeedback);
        }
        let weights = posterior_weights(&log_scores);
        Ok(Self {
            docs,
            log_scores,
            weights,
        })
    }

    /// Take the top `f` entries of a first-pass ranking (fewer when the
    /// ranking is shorter) together with their indexed term vectors.
    pub fn from_ranking(index: &InvertedIndex, ranking: &Ranking, f: usize) -> Result<Self, Error> {
        if f == 0 {
            return Err(Error::EmptyFeedback);
        }
        let head = ranking.head(f);
        let mut docs = Vec::with_capacity(head.len());
        let mut log_scores = Vec::with_capacity(head.len());
        for (doc_id, score) in head {
            let entry = index.doc(*doc_id);
            let counts: BTreeMap<String, f64> = entry
                .terms
                .iter()
                .map(|(t, c)| (index.term_entry(*t).term.clone(), f64::from(*c)))
                .collect();
            docs.push(FeedbackDoc {
                counts,
                token_count: f64::from(entry.token_count),
                distinct_count: f64::from(entry.distinct_count),
            });
            log_scores.push(*score);
        }
        Self::new(docs, log_scores)
    }

    /// Union of the feedback documents' vocabularies, sorted.
    pub fn candidate_pool(&self) -> Vec<String> {
        let mut pool: BTreeMap<&str, ()> = BTreeMap::new();
        for doc in &self.docs {
            for term in doc.counts.keys() {
                pool.insert(term, ());
            }
        }
        pool.keys().map(|t| (*t).to_string()).collect()
    }
}

/// Per-term collection statistics needed during feedback. Implemented by the
/// index-backed adapter and by synthetic probe scenarios.
pub trait CollectionBackground {
    /// df_t / Σdf.
    fn df_proportion(&self, term: &str) -> f64;
    /// ctf_t / total tokens.
    fn collection_ml(&self, term: &str) -> f64;
}

/// Index-backed background statistics.
pub struct IndexBackground<'a> {
    pub index: &'a InvertedIndex,
    pub background: &'a BackgroundModel,
}

impl CollectionBackground for IndexBackground<'_> {
    fn df_proportion(&self, term: &str) -> f64 {
        self.index
            .term_id(term)
            .map_or(0.0, |id| self.background.df_proportion(id))
    }

    fn collection_ml(&self, term: &str) -> f64 {
        self.index
            .term_id(term)
            .map_or(0.0, |id| self.background.collection_ml(id))
    }
}

/// Probability that a term present in a document was generated by the
/// document topic component rather than the background component of the
/// Pólya mixture: (1−ω)·α_τ / ((1−ω)·α_τ + ω·α_c) with α_τ = m_d·c/|d| and
/// α_c = m_c·df_t/Σdf. Zero for absent terms.
pub fn topical_prob_spud(
    count: f64,
    token_count: f64,
    distinct_count: f64,
    omega: f64,
    mass: f64,
    df_prop: f64,
) -> f64 {
    if count <= 0.0 {
        return 0.0;
    }
    let topic = (1.0 - omega) * distinct_count * (count / token_count);
    let background = omega * mass * df_prop;
    topic / (topic + background)
}

/// The same posterior written as a concave term-frequency factor:
/// c / (c + ω·m_c·df_t/((1−ω)·Σdf) · |d|/m_d). Agrees with
/// [`topical_prob_spud`] to within floating-point noise.
pub fn topical_prob_spud_tf_form(
    count: f64,
    token_count: f64,
    distinct_count: f64,
    omega: f64,
    mass: f64,
    df_prop: f64,
) -> f64 {
    if count <= 0.0 {
        return 0.0;
    }
    let k = (omega * mass * df_prop) / (1.0 - omega) * (token_count / distinct_count);
    count / (count + k)
}

/// Topical posterior under the Dirichlet-smoothed multinomial:
/// c / (c + μ·p(t|θ_c)). Zero for absent terms; document length cancels.
pub fn topical_prob_dirichlet(count: f64, mu: f64, coll_ml: f64) -> f64 {
    if count <= 0.0 {
        return 0.0;
    }
    count / (count + mu * coll_ml)
}

/// Which document model supplies the topical posterior inside the query
/// topic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopicalModel {
    Spud { omega: f64, mass: f64 },
    Dirichlet { mu: f64 },
}

impl TopicalModel {
    fn prob(&self, doc: &FeedbackDoc, count: f64, bg: &impl CollectionBackground, term: &str) -> f64 {
        match *self {
            TopicalModel::Spud { omega, mass } => topical_prob_spud(
                count,
                doc.token_count,
                doc.distinct_count,
                omega,
                mass,
                bg.df_proportion(term),
            ),
            TopicalModel::Dirichlet { mu } => {
                topical_prob_dirichlet(count, mu, bg.collection_ml(term))
            }
        }
    }
}

/// Document representation used inside the relevance model sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackRepr {
    /// Unsmoothed maximum likelihood c(t,d)/|d| (the strongest RM3 setting).
    MaximumLikelihood,
    /// Pólya-mixture expected probability with its own ω.
    Spud { omega: f64, mass: f64 },
    /// Dirichlet-smoothed probability with its own μ.
    Dirichlet { mu: f64 },
}

/// Identifies which selection method produced an expansion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodTag {
    Rm3,
    Smm,
    Pdcm,
    QtmDir,
    QtmSpud,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MethodTag::Rm3 => "RM3",
            MethodTag::Smm => "SMM",
            MethodTag::Pdcm => "PDCM",
            MethodTag::QtmDir => "QTM_dir",
            MethodTag::QtmSpud => "QTM_spud",
        };
        f.write_str(name)
    }
}

/// A term-selection result: the full scored candidate pool plus the top-|T|
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionModel {
    pub method: MethodTag,
    /// Every candidate with its raw selection score, (score desc, term asc).
    pub scored: Vec<(String, f64)>,
    /// The selected terms, renormalized to sum to 1, in the same order.
    pub distribution: Vec<(String, f64)>,
}

impl ExpansionModel {
    pub fn raw_score(&self, term: &str) -> Option<f64> {
        self.scored
            .iter()
            .find(|(t, _)| t == term)
            .map(|(_, s)| *s)
    }

    fn from_scores(
        method: MethodTag,
        scores: BTreeMap<String, f64>,
        num_terms: usize,
    ) -> Result<Self, Error> {
        if scores.is_empty() {
            return Err(Error::EmptyCandidatePool);
        }
        let mut scored: Vec<(String, f64)> = scores.into_iter().collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let distribution = truncate_and_normalize(&scored, num_terms)?;
        Ok(Self {
            method,
            scored,
            distribution,
        })
    }
}

/// Keep the top |T| positively-scored terms (ties broken by the
/// lexicographically smaller term) and renormalize them to sum to 1.
pub fn truncate_and_normalize(
    scored: &[(String, f64)],
    num_terms: usize,
) -> Result<Vec<(String, f64)>, Error> {
    if num_terms == 0 {
        return Err(Error::ZeroTermBudget);
    }
    let mut positive: Vec<(String, f64)> = scored
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .cloned()
        .collect();
    if positive.is_empty() {
        return Err(Error::NoInformativeTerms);
    }
    positive.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    positive.truncate(num_terms);
    let total: f64 = positive.iter().map(|(_, s)| s).sum();
    Ok(positive
        .into_iter()
        .map(|(t, s)| (t, s / total))
        .collect())
}

/// Query topic model: raw score p(θ_Q|t) = Σ_d p(topical|t,d) · w_d, a
/// probability in [0, 1]. Candidates with raw score at or below
/// `topical_threshold` (when given) are discarded before selection.
pub fn build_qtm(
    feedback: &FeedbackSet,
    topical: TopicalModel,
    bg: &impl CollectionBackground,
    num_terms: usize,
    topical_threshold: Option<f64>,
) -> Result<ExpansionModel, Error> {
    if feedback.docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (doc, weight) in feedback.docs.iter().zip(&feedback.weights) {
        for (term, count) in &doc.counts {
            let p = topical.prob(doc, *count, bg, term);
            *scores.entry(term.clone()).or_insert(0.0) += p * weight;
        }
    }
    if let Some(threshold) = topical_threshold {
        scores.retain(|_, s| *s > threshold);
        if scores.is_empty() {
            return Err(Error::NoInformativeTerms);
        }
    }
    let method = match topical {
        TopicalModel::Spud { .. } => MethodTag::QtmSpud,
        TopicalModel::Dirichlet { .. } => MethodTag::QtmDir,
    };
    ExpansionModel::from_scores(method, scores, num_terms)
}

/// Relevance model: raw score p(t|θ_R) = Σ_d p(t|repr_d) · w_d over the
/// candidate pool. With a smoothed representation every pool term receives
/// background mass from every feedback document.
pub fn build_rm1(
    feedback: &FeedbackSet,
    repr: FeedbackRepr,
    bg: &impl CollectionBackground,
    num_terms: usize,
) -> Result<ExpansionModel, Error> {
    if feedback.docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let pool = feedback.candidate_pool();
    if pool.is_empty() {
        return Err(Error::EmptyCandidatePool);
    }
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for term in &pool {
        let mut acc = 0.0;
        for (doc, weight) in feedback.docs.iter().zip(&feedback.weights) {
            let count = doc.count(term);
            let p = match repr {
                FeedbackRepr::MaximumLikelihood => count / doc.token_count,
                FeedbackRepr::Spud { omega, mass } => spud_expected_prob(
                    count,
                    doc.token_count,
                    doc.distinct_count,
                    omega,
                    mass,
                    bg.df_proportion(term),
                ),
                FeedbackRepr::Dirichlet { mu } => {
                    dirichlet_expected_prob(count, doc.token_count, mu, bg.collection_ml(term))
                }
            };
            acc += p * weight;
        }
        scores.insert(term.clone(), acc);
    }
    ExpansionModel::from_scores(MethodTag::Rm3, scores, num_terms)
}

/// Convergence record of an iterative fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Objective value after initialization and after every iteration.
    pub log_likelihoods: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

/// Fit the simple mixture model topic distribution by EM over the pooled
/// feedback counts: documents are assumed equally relevant, so posterior
/// weights are ignored. Returns the fitted θ_T over the pooled vocabulary.
pub fn fit_smm(
    pooled: &[(String, f64)],
    lambda: f64,
    bg: &impl CollectionBackground,
) -> Result<(Vec<(String, f64)>, FitTrace), Error> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    if pooled.is_empty() {
        return Err(Error::EmptyCandidatePool);
    }
    let counts: Vec<f64> = pooled.iter().map(|(_, c)| *c).collect();
    let theta_c: Vec<f64> = pooled.iter().map(|(t, _)| bg.collection_ml(t)).collect();
    let v = pooled.len();
    let mut theta = vec![1.0 / v as f64; v];

    let ll = |theta: &[f64]| -> f64 {
        counts
            .iter()
            .zip(theta)
            .zip(&theta_c)
            .map(|((c, t), tc)| c * ((1.0 - lambda) * t + lambda * tc).ln())
            .sum()
    };

    let mut trace = FitTrace {
        log_likelihoods: vec![ll(&theta)],
        iterations: 0,
        converged: false,
    };
    for iteration in 1..=SMM_MAX_ITERATIONS {
        // E-step: responsibility of the topic component for each term;
        // M-step: reweight counts and renormalize.
        let mut next: Vec<f64> = counts
            .iter()
            .zip(&theta)
            .zip(&theta_c)
            .map(|((c, t), tc)| {
                let topic = (1.0 - lambda) * t;
                let r = topic / (topic + lambda * tc);
                c * r
            })
            .collect();
        let total: f64 = next.iter().sum();
        for x in &mut next {
            *x /= total;
        }
        let max_change = theta
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        trace.iterations = iteration;
        let current = ll(&theta);
        debug_assert!(
            current + 1e-9 * current.abs().max(1.0) >= *trace.log_likelihoods.last().unwrap(),
            "EM objective decreased"
        );
        trace.log_likelihoods.push(current);
        if max_change < SMM_TOLERANCE {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        log::warn!("SMM EM hit the {SMM_MAX_ITERATIONS}-iteration cap");
    }
    let fitted = pooled
        .iter()
        .map(|(t, _)| t.clone())
        .zip(theta)
        .collect();
    Ok((fitted, trace))
}

/// Simple mixture model selection: pool all feedback counts, fit θ_T against
/// the fixed collection background with weight λ, rank terms by θ_T.
pub fn build_smm(
    feedback: &FeedbackSet,
    lambda: f64,
    bg: &impl CollectionBackground,
    num_terms: usize,
) -> Result<ExpansionModel, Error> {
    if feedback.docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let mut pooled: BTreeMap<String, f64> = BTreeMap::new();
    for doc in &feedback.docs {
        for (term, count) in &doc.counts {
            *pooled.entry(term.clone()).or_insert(0.0) += count;
        }
    }
    let pooled: Vec<(String, f64)> = pooled.into_iter().collect();
    let (fitted, _) = fit_smm(&pooled, lambda, bg)?;
    ExpansionModel::from_scores(MethodTag::Smm, fitted.into_iter().collect(), num_terms)
}

/// Fit Dirichlet-compound-multinomial parameters over the feedback documents
/// with the fixed-point update
/// `α_t ← α_t · Σ_d (ψ(c(t,d)+α_t) − ψ(α_t)) / Σ_d (ψ(n_d+Σα) − ψ(Σα))`,
/// initialized at the pooled maximum likelihood scaled to the mean document
/// length. Document lengths are derived from the count vectors.
pub fn fit_dcm(docs: &[&BTreeMap<String, f64>]) -> Result<(Vec<(String, f64)>, FitTrace), Error> {
    if docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let mut pool: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for doc in docs {
        for term in doc.keys() {
            pool.insert(term);
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyCandidatePool);
    }
    let terms: Vec<String> = pool.iter().map(|t| (*t).to_string()).collect();
    let id_of: BTreeMap<&str, usize> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let doc_vectors: Vec<Vec<(usize, f64)>> = docs
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|(t, c)| (id_of[t.as_str()], *c))
                .collect()
        })
        .collect();
    let lengths: Vec<f64> = doc_vectors
        .iter()
        .map(|v| v.iter().map(|(_, c)| c).sum())
        .collect();
    let mean_length: f64 = lengths.iter().sum::<f64>() / lengths.len() as f64;

    let mut pooled = vec![0.0; terms.len()];
    for vector in &doc_vectors {
        for &(i, c) in vector {
            pooled[i] += c;
        }
    }
    let pooled_total: f64 = pooled.iter().sum();
    let mut alpha: Vec<f64> = pooled
        .iter()
        .map(|c| mean_length * c / pooled_total)
        .collect();

    let ll = |alpha: &[f64]| -> f64 {
        let s: f64 = alpha.iter().sum();
        let mut total = 0.0;
        for (vector, n) in doc_vectors.iter().zip(&lengths) {
            total += ln_gamma(s) - ln_gamma(n + s);
            for &(i, c) in vector {
                total += ln_gamma(c + alpha[i]) - ln_gamma(alpha[i]);
            }
        }
        total
    };

    let mut trace = FitTrace {
        log_likelihoods: vec![ll(&alpha)],
        iterations: 0,
        converged: false,
    };
    for iteration in 1..=PDCM_MAX_ITERATIONS {
        let s: f64 = alpha.iter().sum();
        let denominator: f64 = lengths.iter().map(|n| digamma(n + s) - digamma(s)).sum();
        let mut numerators = vec![0.0; alpha.len()];
        for vector in &doc_vectors {
            for &(i, c) in vector {
                numerators[i] += digamma(c + alpha[i]) - digamma(alpha[i]);
            }
        }
        let mut max_rel_change = 0.0_f64;
        for (a, numer) in alpha.iter_mut().zip(&numerators) {
            let next = *a * numer / denominator;
            max_rel_change = max_rel_change.max(((next - *a) / *a).abs());
            *a = next;
        }
        trace.iterations = iteration;
        trace.log_likelihoods.push(ll(&alpha));
        if max_rel_change < PDCM_TOLERANCE {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        log::warn!(
            "DCM fixed point hit the {PDCM_MAX_ITERATIONS}-iteration cap \
             (expected when the scale is unidentifiable, e.g. |F| = 1)"
        );
    }
    Ok((terms.into_iter().zip(alpha).collect(), trace))
}

/// PDCM selection: fit a single DCM to the feedback set and rank terms by
/// their fitted parameter value. Posterior weights are ignored.
pub fn build_pdcm(feedback: &FeedbackSet, num_terms: usize) -> Result<ExpansionModel, Error> {
    if feedback.docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let docs: Vec<&BTreeMap<String, f64>> = feedback.docs.iter().map(|d| &d.counts).collect();
    let (fitted, _) = fit_dcm(&docs)?;
    ExpansionModel::from_scores(MethodTag::Pdcm, fitted.into_iter().collect(), num_terms)
}

/// Original query model θ_q: title term counts normalized to sum to 1.
pub fn query_model(query: &TopicQuery) -> Vec<(String, f64)> {
    let total = f64::from(query.length());
    query
        .terms
        .iter()
        .map(|(t, c)| (t.clone(), f64::from(*c) / total))
        .collect()
}

/// The interpolated query ready for a second retrieval pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuery {
    pub topic_id: u32,
    pub pi: f64,
    /// Term weights p(t|θ_q'), term-sorted, zero-weight entries dropped.
    pub terms: Vec<(String, f64)>,
}

/// Mix the original query model with an expansion distribution:
/// p(t|θ_q') = (1−π)·p(t|θ_q) + π·p(t|θ_Q) over the union support.
pub fn interpolate(
    query: &TopicQuery,
    expansion: &ExpansionModel,
    pi: f64,
) -> ExpandedQuery {
    let mut combined: BTreeMap<String, f64> = BTreeMap::new();
    for (term, p) in query_model(query) {
        combined.insert(term, (1.0 - pi) * p);
    }
    for (term, p) in &expansion.distribution {
        *combined.entry(term.clone()).or_insert(0.0) += pi * p;
    }
    combined.retain(|_, w| *w > 0.0);
    ExpandedQuery {
        topic_id: query.topic_id,
        pi,
        terms: combined.into_iter().collect(),
    }
}
