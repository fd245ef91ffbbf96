//! Document language models and query-likelihood scoring.
//!
//! Two generative document models are supported. The Pólya-mixture model
//! treats a document as a mixture of a document topic component (scale m_d,
//! mean c(t,d)/|d|) and a corpus background component (scale m_c, mean
//! df_t/Σdf), mixed with weight ω. The Dirichlet model smooths the document
//! multinomial toward the collection maximum likelihood with prior mass μ.
//! Queries are scored against the expected multinomial of either model, in
//! log space.

use crate::corpus::{DocEntry, DocId, InvertedIndex, TermId, TopicQuery};
use statrs::function::gamma::{digamma, ln_gamma};

/// Iteration cap for the background-mass fixed point.
const MASS_MAX_ITERATIONS: u32 = 200;
/// Relative-change stopping tolerance for the background-mass fixed point.
const MASS_TOLERANCE: f64 = 1e-6;
/// Largest Newton step in log(m_c) per iteration.
const MASS_MAX_LOG_STEP: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index has an empty vocabulary")]
    EmptyVocabulary,
    #[error("background mass estimation needs at least 2 non-empty documents")]
    TooFewDocuments,
    #[error("query unscorable: no query term occurs in the index vocabulary")]
    QueryUnscorable,
}

/// Collection-level background statistics: the df-based Pólya mean and the
/// collection maximum-likelihood multinomial, indexed by term id.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    df_proportion: Vec<f64>,
    collection_ml: Vec<f64>,
}

impl BackgroundModel {
    /// Estimate both background distributions from collection statistics:
    /// df_t/Σdf and ctf_t/total tokens.
    pub fn estimate(index: &InvertedIndex) -> Result<Self, Error> {
        if index.vocab().is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let df_total = index.df_total() as f64;
        let token_total = index.token_total() as f64;
        let df_proportion = index
            .vocab()
            .iter()
            .map(|e| f64::from(e.df) / df_total)
            .collect();
        let collection_ml = index
            .vocab()
            .iter()
            .map(|e| e.ctf as f64 / token_total)
            .collect();
        Ok(Self {
            df_proportion,
            collection_ml,
        })
    }

    /// df_t / Σdf for a term.
    pub fn df_proportion(&self, term: TermId) -> f64 {
        self.df_proportion[term as usize]
    }

    /// ctf_t / total tokens for a term.
    pub fn collection_ml(&self, term: TermId) -> f64 {
        self.collection_ml[term as usize]
    }

    pub fn vocab_size(&self) -> usize {
        self.df_proportion.len()
    }
}

/// Result of fitting the background mass m_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub mass: f64,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
    pub iterations: u32,
}

/// Corpus log-likelihood under a multivariate Pólya whose mean is pinned to
/// the df-proportions and whose scale is `mass` (multinomial coefficients
/// dropped; they do not depend on the scale).
pub fn polya_corpus_log_likelihood(
    index: &InvertedIndex,
    background: &BackgroundModel,
    mass: f64,
) -> f64 {
    let mut ll = 0.0;
    for doc in index.docs() {
        if doc.token_count == 0 {
            continue;
        }
        ll += ln_gamma(mass) - ln_gamma(f64::from(doc.token_count) + mass);
        for &(term, count) in &doc.terms {
            let alpha = mass * background.df_proportion(term);
            ll += ln_gamma(f64::from(count) + alpha) - ln_gamma(alpha);
        }
    }
    ll
}

/// ψ'(x) via the recurrence ψ'(x) = ψ'(x+1) + 1/x² and the asymptotic
/// series for x ≥ 6. Accurate to ~1e-12 over the positive reals.
fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = 1.0
        + inv * 0.5
        + inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * 5.0 / 66.0))));
    acc + inv * series
}

/// Fit the background mass m_c by maximizing the corpus Pólya log-likelihood
/// in the single scale parameter, holding the mean at the df-proportions.
///
/// The maximizer is found by Newton's fixed-point iteration on log(m_c),
/// stopping when |Δm_c|/m_c falls below 1e-6 or after 200 iterations. Two
/// degenerate corpora are flagged instead of fitted: when the likelihood is
/// flat in m_c (single-term vocabulary) the initial value is returned, and
/// when the corpus shows no burstiness the likelihood increases without
/// bound, driving the mass up until a value cap. Both return
/// `converged: false` with a warning.
pub fn estimate_background_mass(
    index: &InvertedIndex,
    background: &BackgroundModel,
) -> Result<MassEstimate, Error> {
    let docs: Vec<&DocEntry> = index.docs().iter().filter(|d| d.token_count > 0).collect();
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments);
    }
    let mean_length: f64 = docs
        .iter()
        .map(|d| f64::from(d.token_count))
        .sum::<f64>()
        / docs.len() as f64;
    // A mass far beyond corpus scale is indistinguishable from the
    // multinomial limit; treat reaching it as divergence.
    let mass_cap = 1e4 * mean_length.max(1.0);

    let mut mass = mean_length.max(1.0);
    for iteration in 1..=MASS_MAX_ITERATIONS {
        // dLL/dm as a difference of the per-term and per-document digamma
        // sums, plus the matching second derivative for the Newton step.
        let mut term_sum = 0.0;
        let mut doc_sum = 0.0;
        let mut gradient_prime = 0.0;
        for doc in &docs {
            let n = f64::from(doc.token_count);
            doc_sum += digamma(n + mass) - digamma(mass);
            gradient_prime -= trigamma(n + mass) - trigamma(mass);
            for &(term, count) in &doc.terms {
                let q = background.df_proportion(term);
                let alpha = mass * q;
                term_sum += q * (digamma(f64::from(count) + alpha) - digamma(alpha));
                gradient_prime += q * q * (trigamma(f64::from(count) + alpha) - trigamma(alpha));
            }
        }
        let gradient = term_sum - doc_sum;
        if gradient.abs() <= 1e-12 * doc_sum.abs() {
            log::warn!(
                "corpus likelihood is flat in m_c (no burstiness signal); keeping m_c={mass}"
            );
            return Ok(MassEstimate {
                mass,
                converged: false,
                iterations: iteration,
            });
        }
        // Newton in log space: λ = ln m, dLL/dλ = m·g, d²LL/dλ² = m·g + m²·g'.
        let d1 = mass * gradient;
        let d2 = mass * gradient + mass * mass * gradient_prime;
        let step = if d2 < 0.0 {
            (-d1 / d2).clamp(-MASS_MAX_LOG_STEP, MASS_MAX_LOG_STEP)
        } else {
            // Not locally concave: walk uphill by a unit log step.
            MASS_MAX_LOG_STEP.copysign(d1) / 2.0
        };
        let next = mass * step.exp();
        let rel_change = ((next - mass) / mass).abs();
        mass = next;
        if mass >= mass_cap {
            log::warn!(
                "background mass diverged upward (no burstiness signal); capped at m_c={mass:.3}"
            );
            return Ok(MassEstimate {
                mass,
                converged: false,
                iterations: iteration,
            });
        }
        if rel_change < MASS_TOLERANCE {
            return Ok(MassEstimate {
                mass,
                converged: true,
                iterations: iteration,
            });
        }
    }
    log::warn!(
        "background mass estimation hit the {MASS_MAX_ITERATIONS}-iteration cap at m_c={mass}"
    );
    Ok(MassEstimate {
        mass,
        converged: false,
        iterations: MASS_MAX_ITERATIONS,
    })
}

/// Pólya-mixture smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpudConfig {
    /// Background mixture weight ω in [0, 1].
    pub omega: f64,
    /// Background mass m_c.
    pub mass: f64,
}

impl SpudConfig {
    pub const DEFAULT_OMEGA: f64 = 0.8;

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(format!("omega must be in [0, 1], got {}", self.omega));
        }
        if !(self.mass > 0.0) {
            return Err(format!("background mass must be positive, got {}", self.mass));
        }
        Ok(())
    }
}

/// Dirichlet-prior smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletConfig {
    /// Prior mass μ ≥ 0.
    pub mu: f64,
}

impl DirichletConfig {
    pub const DEFAULT_MU: f64 = 2500.0;

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu >= 0.0) {
            return Err(format!("mu must be non-negative, got {}", self.mu));
        }
        Ok(())
    }
}

/// Which smoothed document model scores queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Spud(SpudConfig),
    Dirichlet(DirichletConfig),
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ModelParams::Spud(c) => c.validate(),
            ModelParams::Dirichlet(c) => c.validate(),
        }
    }
}

/// Expected term probability of the Pólya mixture:
/// ((1−ω)·m_d·c/|d| + ω·m_c·q) / ((1−ω)·m_d + ω·m_c) where q = df_t/Σdf.
///
/// ω = 0 collapses to the document maximum likelihood c/|d| exactly and
/// ω = 1 to the background proportion exactly.
pub fn spud_expected_prob(
    count: f64,
    token_count: f64,
    distinct_count: f64,
    omega: f64,
    mass: f64,
    df_prop: f64,
) -> f64 {
    if omega == 0.0 {
        return count / token_count;
    }
    if omega == 1.0 {
        return df_prop;
    }
    let topic = distinct_count * (count / token_count);
    let numerator = (1.0 - omega) * topic + omega * mass * df_prop;
    let denominator = (1.0 - omega) * distinct_count + omega * mass;
    numerator / denominator
}

/// Expected term probability of the Dirichlet-smoothed multinomial:
/// (c + μ·p(t|θ_c)) / (|d| + μ).
pub fn dirichlet_expected_prob(count: f64, token_count: f64, mu: f64, coll_ml: f64) -> f64 {
    (count + mu * coll_ml) / (token_count + mu)
}

/// A smoothed generative model of one indexed document.
#[derive(Debug, Clone, Copy)]
pub struct DocumentModel<'a> {
    index: &'a InvertedIndex,
    background: &'a BackgroundModel,
    params: ModelParams,
    doc: DocId,
}

impl<'a> DocumentModel<'a> {
    pub fn new(
        index: &'a InvertedIndex,
        background: &'a BackgroundModel,
        params: ModelParams,
        doc: DocId,
    ) -> Self {
        debug_assert!(index.doc(doc).token_count > 0, "empty documents are not scorable");
        Self {
            index,
            background,
            params,
            doc,
        }
    }

    pub fn doc_id(&self) -> DocId {
        self.doc
    }

    fn count_of(&self, term: TermId) -> f64 {
        let entry = self.index.doc(self.doc);
        match entry.terms.binary_search_by_key(&term, |(t, _)| *t) {
            Ok(pos) => f64::from(entry.terms[pos].1),
            Err(_) => 0.0,
        }
    }

    /// Expected probability of a vocabulary term under this document model.
    pub fn expected_term_prob(&self, term: TermId) -> f64 {
        let entry = self.index.doc(self.doc);
        let count = self.count_of(term);
        match self.params {
            ModelParams::Spud(c) => spud_expected_prob(
                count,
                f64::from(entry.token_count),
                f64::from(entry.distinct_count),
                c.omega,
                c.mass,
                self.background.df_proportion(term),
            ),
            ModelParams::Dirichlet(c) => dirichlet_expected_prob(
                count,
                f64::from(entry.token_count),
                c.mu,
                self.background.collection_ml(term),
            ),
        }
    }
}

/// Query log-likelihood Σ_t count_q(t) · log p(t|d). Out-of-vocabulary query
/// terms are dropped with a warning; a query with no in-vocabulary term is
/// unscorable.
pub fn query_log_likelihood(query: &TopicQuery, model: &DocumentModel) -> Result<f64, Error> {
    let mut score = 0.0;
    let mut matched = 0usize;
    for (term, count) in &query.terms {
        match model.index.term_id(term) {
            Some(id) => {
                matched += 1;
                score += f64::from(*count) * model.expected_term_prob(id).ln();
            }
            None => log::warn!("query term {term:?} not in vocabulary; dropped"),
        }
    }
    if matched == 0 {
        return Err(Error::QueryUnscorable);
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, Document};

    fn doc(id: &str, text: &str) -> Document {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        Document::from_tokens(id, &tokens)
    }

    fn appx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn background_proportions_from_df() {
        let index = build_index(vec![doc("d1", "a a b"), doc("d2", "a c")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let a = index.term_id("a").unwrap();
        let b = index.term_id("b").unwrap();
        let c = index.term_id("c").unwrap();
        appx(bg.df_proportion(a), 0.5, 1e-15);
        appx(bg.df_proportion(b), 0.25, 1e-15);
        appx(bg.df_proportion(c), 0.25, 1e-15);
        // ctf = {a:3, b:1, c:1}, 5 tokens.
        appx(bg.collection_ml(a), 0.6, 1e-15);
    }

    #[test]
    fn single_term_vocabulary_has_proportion_one() {
        let index = build_index(vec![doc("d1", "only"), doc("d2", "only only")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        appx(bg.df_proportion(0), 1.0, 1e-15);
        appx(bg.collection_ml(0), 1.0, 1e-15);
    }

    #[test]
    fn spud_expected_prob_hand_value() {
        // doc {a:2, b:1}, |d|=3, m_d=2, omega=0.8, m_c=10, df proportion 1/3.
        let p = spud_expected_prob(2.0, 3.0, 2.0, 0.8, 10.0, 1.0 / 3.0);
        appx(p, 0.349_206_349_206_349_2, 1e-12);
    }

    #[test]
    fn spud_omega_zero_is_exact_ml() {
        let p = spud_expected_prob(2.0, 3.0, 2.0, 0.0, 10.0, 1.0 / 3.0);
        assert_eq!(p, 2.0 / 3.0);
    }

    #[test]
    fn dirichlet_hand_value() {
        appx(dirichlet_expected_prob(2.0, 3.0, 10.0, 0.3), 5.0 / 13.0, 1e-15);
    }

    #[test]
    fn expected_probs_sum_to_one_both_kinds() {
        let index = build_index(vec![
            doc("d1", "a a b c"),
            doc("d2", "b d d d"),
            doc("d3", "a c d e e"),
        ])
        .unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let configs = [
            ModelParams::Spud(SpudConfig { omega: 0.8, mass: 7.5 }),
            ModelParams::Spud(SpudConfig { omega: 0.3, mass: 120.0 }),
            ModelParams::Dirichlet(DirichletConfig { mu: 10.0 }),
            ModelParams::Dirichlet(DirichletConfig { mu: 0.0 }),
        ];
        for params in configs {
            for d in 0..index.num_docs() {
                let model = DocumentModel::new(&index, &bg, params, d);
                let sum: f64 = (0..index.vocab().len() as u32)
                    .map(|t| model.expected_term_prob(t))
                    .sum();
                appx(sum, 1.0, 1e-9);
            }
        }
    }

    #[test]
    fn spud_prob_is_convex_combination() {
        let index = build_index(vec![
            doc("d1", "a a b c"),
            doc("d2", "b d d d"),
            doc("d3", "a c d e e"),
        ])
        .unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let params = ModelParams::Spud(SpudConfig { omega: 0.6, mass: 15.0 });
        for d in 0..index.num_docs() {
            let entry = index.doc(d);
            let model = DocumentModel::new(&index, &bg, params, d);
            for t in 0..index.vocab().len() as u32 {
                let count = entry
                    .terms
                    .iter()
                    .find(|(tid, _)| *tid == t)
                    .map_or(0.0, |(_, c)| f64::from(*c));
                let ml = count / f64::from(entry.token_count);
                let b = bg.df_proportion(t);
                let p = model.expected_term_prob(t);
                assert!(p >= ml.min(b) - 1e-12 && p <= ml.max(b) + 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_limit_is_collection_ml() {
        let index = build_index(vec![doc("d1", "a a b"), doc("d2", "a c c c")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let params = ModelParams::Dirichlet(DirichletConfig { mu: 1e9 });
        let model = DocumentModel::new(&index, &bg, params, 0);
        for t in 0..index.vocab().len() as u32 {
            appx(model.expected_term_prob(t), bg.collection_ml(t), 1e-6);
        }
    }

    fn bursty_index() -> InvertedIndex {
        build_index(vec![doc("d1", "a a a a b"), doc("d2", "a b b b b")]).unwrap()
    }

    #[test]
    fn trigamma_reference_values() {
        let cases = [
            (1.0, std::f64::consts::PI * std::f64::consts::PI / 6.0),
            (0.5, std::f64::consts::PI * std::f64::consts::PI / 2.0),
            (2.0, std::f64::consts::PI * std::f64::consts::PI / 6.0 - 1.0),
            (5.0, 0.221_322_955_737_115_33),
            (25.0, 0.040_810_663_257_225_58),
        ];
        for (x, expected) in cases {
            appx(trigamma(x), expected, 1e-10);
        }
    }

    #[test]
    fn mass_estimate_matches_grid_search() {
        let index = bursty_index();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let fit = estimate_background_mass(&index, &bg).unwrap();
        assert!(fit.converged, "fixed point should converge on the toy corpus");

        // Brute-force 1-D grid, step 0.01.
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut m = 0.01;
        while m <= 50.0 {
            let ll = polya_corpus_log_likelihood(&index, &bg, m);
            if ll > best.0 {
                best = (ll, m);
            }
            m += 0.01;
        }
        assert!(
            (fit.mass - best.1).abs() <= 0.05,
            "fixed point {} vs grid {}",
            fit.mass,
            best.1
        );
    }

    #[test]
    fn mass_estimate_beats_halved_and_doubled() {
        let index = bursty_index();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let fit = estimate_background_mass(&index, &bg).unwrap();
        let at = |m: f64| polya_corpus_log_likelihood(&index, &bg, m);
        assert!(at(fit.mass) >= at(fit.mass / 2.0));
        assert!(at(fit.mass) >= at(fit.mass * 2.0));
    }

    #[test]
    fn mass_estimate_is_stationary_point() {
        let index = bursty_index();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let fit = estimate_background_mass(&index, &bg).unwrap();
        let h = fit.mass * 1e-4;
        let derivative = (polya_corpus_log_likelihood(&index, &bg, fit.mass + h)
            - polya_corpus_log_likelihood(&index, &bg, fit.mass - h))
            / (2.0 * h);
        assert!(derivative.abs() <= 1e-3, "dLL/dm = {derivative}");
    }

    #[test]
    fn mass_estimate_caps_without_burstiness() {
        // Identical documents, every term once per document: the likelihood
        // increases in m_c without bound, so the estimate diverges upward
        // until the cap and carries a warning flag.
        let index = build_index(vec![doc("d1", "a b"), doc("d2", "a b"), doc("d3", "a b")])
            .unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let fit = estimate_background_mass(&index, &bg).unwrap();
        assert!(!fit.converged);
        assert!(fit.mass.is_finite() && fit.mass > 1e4);
    }

    #[test]
    fn mass_estimate_flags_flat_likelihood() {
        // Identical single-term documents: the Pólya probability is 1 for
        // every m_c, so the estimator keeps its starting point and flags it.
        let index = build_index(vec![doc("d1", "a a a"), doc("d2", "a a a")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let fit = estimate_background_mass(&index, &bg).unwrap();
        assert!(!fit.converged);
        assert!(fit.mass.is_finite() && fit.mass > 0.0);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn mass_estimate_needs_two_documents() {
        let index = build_index(vec![doc("d1", "a b")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        assert!(matches!(
            estimate_background_mass(&index, &bg),
            Err(Error::TooFewDocuments)
        ));
    }

    #[test]
    fn query_log_likelihood_definition_and_monotonicity() {
        let index = build_index(vec![doc("d1", "a a b"), doc("d2", "a a a b")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let params = ModelParams::Spud(SpudConfig { omega: 0.8, mass: 10.0 });

        let m1 = DocumentModel::new(&index, &bg, params, 0);
        let q = TopicQuery::from_tokens(1, &["a".to_string(), "a".to_string()]);
        let ll = query_log_likelihood(&q, &m1).unwrap();
        let a = index.term_id("a").unwrap();
        appx(ll, 2.0 * m1.expected_term_prob(a).ln(), 1e-15);

        // d2 has one more "a" but is longer; per-term probability of "a" is
        // higher in d2, so with this query the score must not decrease.
        let m2 = DocumentModel::new(&index, &bg, params, 1);
        let ll2 = query_log_likelihood(&q, &m2).unwrap();
        assert!(ll2 >= ll);
    }

    #[test]
    fn fully_oov_query_is_unscorable() {
        let index = build_index(vec![doc("d1", "a b")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let params = ModelParams::Dirichlet(DirichletConfig { mu: 100.0 });
        let model = DocumentModel::new(&index, &bg, params, 0);
        let q = TopicQuery::from_tokens(1, &["zzz".to_string()]);
        assert!(matches!(
            query_log_likelihood(&q, &model),
            Err(Error::QueryUnscorable)
        ));
    }

    #[test]
    fn omega_one_scores_all_documents_identically() {
        let index = build_index(vec![doc("d1", "a a b"), doc("d2", "b c")]).unwrap();
        let bg = BackgroundModel::estimate(&index).unwrap();
        let params = ModelParams::Spud(SpudConfig { omega: 1.0, mass: 10.0 });
        let q = TopicQuery::from_tokens(1, &["a".to_string(), "b".to_string()]);
        let s1 = query_log_likelihood(&q, &DocumentModel::new(&index, &bg, params, 0)).unwrap();
        let s2 = query_log_likelihood(&q, &DocumentModel::new(&index, &bg, params, 1)).unwrap();
        assert_eq!(s1, s2);
    }
}
