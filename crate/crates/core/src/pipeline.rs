//! End-to-end expansion experiments: first-pass retrieval, feedback-set
//! construction, term selection, interpolation, second pass.

use crate::corpus::{InvertedIndex, TopicQuery};
use crate::feedback::{
    build_pdcm, build_qtm, build_rm1, build_smm, interpolate, ExpandedQuery, ExpansionModel,
    FeedbackRepr, FeedbackSet, IndexBackground, TopicalModel,
};
use crate::lm::{BackgroundModel, ModelParams};
use crate::retrieval::{search, Ranking, WeightedQuery};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::Error),
    #[error(transparent)]
    Feedback(#[from] crate::feedback::Error),
    #[error("expansion requested with method 'none'")]
    NoMethod,
}

/// Which term-selection method expands the query, with its own
/// feedback-step smoothing. `None` disables expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpansionMethod {
    None,
    Rm3 { repr: FeedbackRepr },
    Smm { lambda: f64 },
    Pdcm,
    QtmDir { mu: f64 },
    QtmSpud { omega: f64, mass: f64 },
}

impl ExpansionMethod {
    pub fn label(&self) -> &'static str {
        match self {
            ExpansionMethod::None => "none",
            ExpansionMethod::Rm3 { .. } => "RM3",
            ExpansionMethod::Smm { .. } => "SMM",
            ExpansionMethod::Pdcm => "PDCM",
            ExpansionMethod::QtmDir { .. } => "QTM_dir",
            ExpansionMethod::QtmSpud { .. } => "QTM_spud",
        }
    }
}

/// Everything one retrieval-plus-feedback run needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    /// Retrieval model for both passes.
    pub model: ModelParams,
    pub method: ExpansionMethod,
    /// Mass assigned to the expansion model in the interpolation.
    pub pi: f64,
    /// |F|: feedback documents taken from the first pass.
    pub feedback_docs: usize,
    /// |T|: expansion terms kept.
    pub expansion_terms: usize,
    /// Optional floor on the QTM topical posterior.
    pub topical_threshold: Option<f64>,
    /// Final ranking depth.
    pub depth: usize,
}

impl PipelineParams {
    pub fn with_grid_point(
        mut self,
        pi: f64,
        feedback_docs: usize,
        expansion_terms: usize,
    ) -> Self {
        self.pi = pi;
        self.feedback_docs = feedback_docs;
        self.expansion_terms = expansion_terms;
        self
    }
}

/// First-pass ranking for a topic, deep enough for both output and feedback.
pub fn first_pass(
    index: &InvertedIndex,
    background: &BackgroundModel,
    query: &TopicQuery,
    params: &PipelineParams,
) -> Result<Ranking, Error> {
    let weighted = WeightedQuery::from_topic(query, index)?;
    let depth = params.depth.max(params.feedback_docs);
    Ok(search(index, background, params.model, &weighted, depth)?)
}

/// Build the expansion model for a topic from an existing first pass.
pub fn expansion_from_first_pass(
    index: &InvertedIndex,
    background: &BackgroundModel,
    first: &Ranking,
    params: &PipelineParams,
) -> Result<ExpansionModel, Error> {
    let feedback = FeedbackSet::from_ranking(index, first, params.feedback_docs)?;
    let bg = IndexBackground { index, background };
    let model = match params.method {
        ExpansionMethod::None => return Err(Error::NoMethod),
        ExpansionMethod::Rm3 { repr } => build_rm1(&feedback, repr, &bg, params.expansion_terms)?,
        ExpansionMethod::Smm { lambda } => {
            build_smm(&feedback, lambda, &bg, params.expansion_terms)?
        }
        ExpansionMethod::Pdcm => build_pdcm(&feedback, params.expansion_terms)?,
        ExpansionMethod::QtmDir { mu } => build_qtm(
            &feedback,
            TopicalModel::Dirichlet { mu },
            &bg,
            params.expansion_terms,
            params.topical_threshold,
        )?,
        ExpansionMethod::QtmSpud { omega, mass } => build_qtm(
            &feedback,
            TopicalModel::Spud { omega, mass },
            &bg,
            params.expansion_terms,
            params.topical_threshold,
        )?,
    };
    Ok(model)
}

/// The expansion model and interpolated query for a topic; `None` when
/// expansion is off.
pub fn expanded_query(
    index: &InvertedIndex,
    background: &BackgroundModel,
    query: &TopicQuery,
    params: &PipelineParams,
) -> Result<Option<(ExpansionModel, ExpandedQuery)>, Error> {
    if params.method == ExpansionMethod::None {
        return Ok(None);
    }
    let first = first_pass(index, background, query, params)?;
    let model = expansion_from_first_pass(index, background, &first, params)?;
    let expanded = interpolate(query, &model, params.pi);
    Ok(Some((model, expanded)))
}

/// Run the full pipeline for one topic and return the final ranking.
pub fn run_topic(
    index: &InvertedIndex,
    background: &BackgroundModel,
    query: &TopicQuery,
    params: &PipelineParams,
) -> Result<Ranking, Error> {
    let weighted = WeightedQuery::from_topic(query, index)?;
    if params.method == ExpansionMethod::None {
        return Ok(search(index, background, params.model, &weighted, params.depth)?);
    }
    let first = search(
        index,
        background,
        params.model,
        &weighted,
        params.depth.max(params.feedback_docs),
    )?;
    let model = expansion_from_first_pass(index, background, &first, params)?;
    let expanded = interpolate(query, &model, params.pi);
    let weighted = WeightedQuery::from_weights(
        query.topic_id,
        expanded.terms.iter().map(|(t, w)| (t.as_str(), *w)),
        index,
    )?;
    Ok(search(index, background, params.model, &weighted, params.depth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, Document};
    use crate::lm::SpudConfig;

    fn doc(id: &str, text: &str) -> Document {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        Document::from_tokens(id, &tokens)
    }

    fn toy() -> (InvertedIndex, BackgroundModel) {
        let index = build_index(vec![
            doc("r1", "quark lepton lepton boson"),
            doc("r2", "lepton boson boson gluon"),
            doc("n1", "grain price market export"),
            doc("n2", "market price tariff trade"),
        ])
        .unwrap();
        let background = BackgroundModel::estimate(&index).unwrap();
        (index, background)
    }

    fn params(method: ExpansionMethod) -> PipelineParams {
        PipelineParams {
            model: ModelParams::Spud(SpudConfig { omega: 0.8, mass: 20.0 }),
            method,
            pi: 0.5,
            feedback_docs: 2,
            expansion_terms: 5,
            topical_threshold: None,
            depth: 10,
        }
    }

    #[test]
    fn no_expansion_is_plain_search() {
        let (index, background) = toy();
        let query = TopicQuery::from_tokens(1, &["quark".to_string()]);
        let ranking =
            run_topic(&index, &background, &query, &params(ExpansionMethod::None)).unwrap();
        assert_eq!(index.doc(ranking.entries()[0].0).doc_id, "r1");
    }

    #[test]
    fn expansion_pulls_in_cooccurring_terms() {
        let (index, background) = toy();
        let query = TopicQuery::from_tokens(1, &["quark".to_string()]);
        let p = params(ExpansionMethod::QtmSpud { omega: 0.8, mass: 20.0 });
        let (model, expanded) = expanded_query(&index, &background, &query, &p)
            .unwrap()
            .unwrap();
        assert!(model.raw_score("lepton").is_some());
        assert!(expanded.terms.iter().any(|(t, _)| t == "lepton"));
        // The expanded query must re-rank r2 (which lacks "quark") above the
        // off-topic documents.
        let ranking = run_topic(&index, &background, &query, &p).unwrap();
        let ids: Vec<&str> = ranking
            .entries()
            .iter()
            .map(|(d, _)| index.doc(*d).doc_id.as_str())
            .collect();
        let pos_r2 = ids.iter().position(|x| *x == "r2").unwrap();
        let pos_n1 = ids.iter().position(|x| *x == "n1").unwrap();
        assert!(pos_r2 < pos_n1, "expanded ranking: {ids:?}");
    }

    #[test]
    fn all_methods_produce_rankings() {
        let (index, background) = toy();
        let query = TopicQuery::from_tokens(1, &["lepton".to_string()]);
        let methods = [
            ExpansionMethod::Rm3 {
                repr: FeedbackRepr::MaximumLikelihood,
            },
            ExpansionMethod::Smm { lambda: 0.2 },
            ExpansionMethod::Pdcm,
            ExpansionMethod::QtmDir { mu: 50.0 },
            ExpansionMethod::QtmSpud { omega: 0.8, mass: 20.0 },
        ];
        for method in methods {
            let ranking = run_topic(&index, &background, &query, &params(method)).unwrap();
            assert!(!ranking.is_empty(), "{} produced empty ranking", method.label());
        }
    }
}
