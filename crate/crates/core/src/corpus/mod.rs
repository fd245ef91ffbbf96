//! Corpus ingestion: TREC parsing, tokenization, and the inverted index.

pub mod stem;
mod store;
pub mod tokenize;
pub mod trec;

use std::collections::{BTreeMap, HashMap};

pub use store::{load_index, persist_index};
pub use tokenize::{parse_stoplist, Tokenizer, DEFAULT_STOPLIST};

/// Internal term identifier: position in the sorted lexicon.
pub type TermId = u32;
/// Internal document identifier: position in the document table.
pub type DocId = u32;

/// Errors from parsing, index construction, and index storage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate document id: {0}")]
    DuplicateDocId(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("malformed document stream at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("qrels line {line}: {message}")]
    QrelsLine { line: usize, message: String },
    #[error("index format version mismatch: file has {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One ingested document: external id plus its term statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// External identifier (DOCNO).
    pub doc_id: String,
    /// Term -> within-document count c(t,d).
    pub term_counts: HashMap<String, u32>,
    /// |d|: total number of tokens.
    pub token_count: u32,
    /// m_d: number of distinct terms (word-types).
    pub distinct_count: u32,
}

impl Document {
    /// Build a document from an analyzed token stream.
    pub fn from_tokens(doc_id: impl Into<String>, tokens: &[String]) -> Self {
        let mut term_counts: HashMap<String, u32> = HashMap::new();
        for tok in tokens {
            *term_counts.entry(tok.clone()).or_insert(0) += 1;
        }
        let distinct_count = term_counts.len() as u32;
        Self {
            doc_id: doc_id.into(),
            term_counts,
            token_count: tokens.len() as u32,
            distinct_count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.token_count == 0
    }
}

/// A parsed topic: id plus the term counts of its tokenized title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicQuery {
    pub topic_id: u32,
    /// Term -> count within the title. Ordered so iteration is deterministic.
    pub terms: BTreeMap<String, u32>,
}

impl TopicQuery {
    pub fn from_tokens(topic_id: u32, tokens: &[String]) -> Self {
        let mut terms = BTreeMap::new();
        for tok in tokens {
            *terms.entry(tok.clone()).or_insert(0) += 1;
        }
        Self { topic_id, terms }
    }

    /// Total token count of the title.
    pub fn length(&self) -> u32 {
        self.terms.values().sum()
    }
}

/// Relevance judgments: (topic, doc) -> grade. Later entries overwrite
/// earlier ones, so re-parsing a qrels file is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    grades: HashMap<(u32, String), u32>,
}

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, topic_id: u32, doc_id: impl Into<String>, grade: u32) {
        self.grades.insert((topic_id, doc_id.into()), grade);
    }

    pub fn grade(&self, topic_id: u32, doc_id: &str) -> Option<u32> {
        self.grades.get(&(topic_id, doc_id.to_string())).copied()
    }

    /// Binary relevance: judged with grade > 0.
    pub fn is_relevant(&self, topic_id: u32, doc_id: &str) -> bool {
        self.grade(topic_id, doc_id).is_some_and(|g| g > 0)
    }

    /// Number of relevant documents judged for a topic.
    pub fn relevant_count(&self, topic_id: u32) -> usize {
        self.grades
            .iter()
            .filter(|((t, _), g)| *t == topic_id && **g > 0)
            .count()
    }

    /// Relevance grades of all judged documents for a topic (unordered).
    pub fn grades_for_topic(&self, topic_id: u32) -> Vec<u32> {
        self.grades
            .iter()
            .filter(|((t, _), _)| *t == topic_id)
            .map(|(_, g)| *g)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Lexicon entry: a term with its collection statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermEntry {
    pub term: String,
    /// df_t: number of documents containing the term.
    pub df: u32,
    /// ctf_t: total occurrences across the collection.
    pub ctf: u64,
}

/// Forward-table entry for one indexed document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub doc_id: String,
    /// (term id, count), sorted by term id.
    pub terms: Vec<(TermId, u32)>,
    pub token_count: u32,
    pub distinct_count: u32,
}

/// Collection-level scalar statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionStats {
    /// N: all documents in the table, including empty ones.
    pub doc_count: u32,
    /// Documents with at least one token (the retrievable set).
    pub scorable_count: u32,
    pub vocab_size: u32,
    /// Sum of df_t over the vocabulary.
    pub df_total: u64,
    /// Total tokens in the collection.
    pub token_total: u64,
}

/// Immutable inverted index with postings, forward table, and collection
/// statistics. Safe to share across threads once built.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    terms: Vec<TermEntry>,
    term_lookup: HashMap<String, TermId>,
    /// Per term: (doc id, count), sorted by doc id.
    postings: Vec<Vec<(DocId, u32)>>,
    docs: Vec<DocEntry>,
    df_total: u64,
    token_total: u64,
    /// Stoplist the corpus was analyzed with, kept so queries are analyzed
    /// identically after an index round-trips through disk.
    stoplist: Vec<String>,
}

impl InvertedIndex {
    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_lookup.get(term).copied()
    }

    pub fn term_entry(&self, id: TermId) -> &TermEntry {
        &self.terms[id as usize]
    }

    pub fn vocab(&self) -> &[TermEntry] {
        &self.terms
    }

    pub fn df(&self, term: &str) -> u32 {
        self.term_id(term).map_or(0, |id| self.terms[id as usize].df)
    }

    pub fn ctf(&self, term: &str) -> u64 {
        self.term_id(term).map_or(0, |id| self.terms[id as usize].ctf)
    }

    pub fn postings(&self, id: TermId) -> &[(DocId, u32)] {
        &self.postings[id as usize]
    }

    pub fn doc(&self, id: DocId) -> &DocEntry {
        &self.docs[id as usize]
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn num_docs(&self) -> u32 {
        self.docs.len() as u32
    }

    pub fn df_total(&self) -> u64 {
        self.df_total
    }

    pub fn token_total(&self) -> u64 {
        self.token_total
    }

    pub fn stoplist(&self) -> &[String] {
        &self.stoplist
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::with_stoplist(self.stoplist.iter().cloned())
    }

    pub fn stats(&self) -> CollectionStats {
        CollectionStats {
            doc_count: self.docs.len() as u32,
            scorable_count: self.docs.iter().filter(|d| d.token_count > 0).count() as u32,
            vocab_size: self.terms.len() as u32,
            df_total: self.df_total,
            token_total: self.token_total,
        }
    }

    /// Full df/ctf maps, mainly for invariant checks and diagnostics.
    pub fn term_stat_maps(&self) -> (BTreeMap<String, u32>, BTreeMap<String, u64>) {
        let mut df = BTreeMap::new();
        let mut ctf = BTreeMap::new();
        for entry in &self.terms {
            df.insert(entry.term.clone(), entry.df);
            ctf.insert(entry.term.clone(), entry.ctf);
        }
        (df, ctf)
    }

    fn from_parts(
        terms: Vec<TermEntry>,
        postings: Vec<Vec<(DocId, u32)>>,
        docs: Vec<DocEntry>,
        stoplist: Vec<String>,
    ) -> Self {
        let term_lookup = terms
            .iter()
            .enumerate()
            .map(|(i, e)| (e.term.clone(), i as TermId))
            .collect();
        let df_total = terms.iter().map(|e| u64::from(e.df)).sum();
        let token_total = terms.iter().map(|e| e.ctf).sum();
        Self {
            terms,
            term_lookup,
            postings,
            docs,
            df_total,
            token_total,
            stoplist,
        }
    }
}

/// Build an inverted index from a document stream. Documents with no tokens
/// are kept in the table but contribute nothing to postings or df, and are
/// never retrieved.
pub fn build_index(documents: impl IntoIterator<Item = Document>) -> Result<InvertedIndex, Error> {
    build_index_with_stoplist(documents, parse_stoplist(DEFAULT_STOPLIST))
}

/// As [`build_index`], recording the stoplist the corpus was analyzed with.
pub fn build_index_with_stoplist(
    documents: impl IntoIterator<Item = Document>,
    stoplist: Vec<String>,
) -> Result<InvertedIndex, Error> {
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    let mut raw_docs: Vec<Document> = Vec::new();
    for doc in documents {
        if seen_ids.insert(doc.doc_id.clone(), ()).is_some() {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        if doc.is_empty() {
            log::warn!("document {} is empty; excluded from df and retrieval", doc.doc_id);
        }
        raw_docs.push(doc);
    }
    if raw_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    // Lexicon sorted by term string so term ids are corpus-order independent.
    let mut vocab: BTreeMap<&str, ()> = BTreeMap::new();
    for doc in &raw_docs {
        for term in doc.term_counts.keys() {
            vocab.insert(term, ());
        }
    }
    let term_of: HashMap<&str, TermId> = vocab
        .keys()
        .enumerate()
        .map(|(i, t)| (*t, i as TermId))
        .collect();
    let mut terms: Vec<TermEntry> = vocab
        .keys()
        .map(|t| TermEntry {
            term: (*t).to_string(),
            df: 0,
            ctf: 0,
        })
        .collect();
    let mut postings: Vec<Vec<(DocId, u32)>> = vec![Vec::new(); terms.len()];
    let mut docs: Vec<DocEntry> = Vec::with_capacity(raw_docs.len());
    for (doc_idx, doc) in raw_docs.iter().enumerate() {
        let doc_id = doc_idx as DocId;
        let mut forward: Vec<(TermId, u32)> = doc
            .term_counts
            .iter()
            .map(|(t, c)| (term_of[t.as_str()], *c))
            .collect();
        forward.sort_unstable_by_key(|(tid, _)| *tid);
        for &(tid, count) in &forward {
            let entry = &mut terms[tid as usize];
            entry.df += 1;
            entry.ctf += u64::from(count);
            postings[tid as usize].push((doc_id, count));
        }
        docs.push(DocEntry {
            doc_id: doc.doc_id.clone(),
            terms: forward,
            token_count: doc.token_count,
            distinct_count: doc.distinct_count,
        });
    }

    Ok(InvertedIndex::from_parts(terms, postings, docs, stoplist))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> Document {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        Document::from_tokens(id, &tokens)
    }

    #[test]
    fn document_statistics() {
        let d = doc("d1", "air air traffic");
        assert_eq!(d.token_count, 3);
        assert_eq!(d.distinct_count, 2);
        assert_eq!(d.term_counts["air"], 2);
    }

    #[test]
    fn builds_df_and_totals() {
        let index = build_index(vec![doc("d1", "a a b"), doc("d2", "a c")]).unwrap();
        assert_eq!(index.df("a"), 2);
        assert_eq!(index.df("b"), 1);
        assert_eq!(index.df("c"), 1);
        assert_eq!(index.df_total(), 4);
        assert_eq!(index.token_total(), 5);
        assert_eq!(index.ctf("a"), 3);
    }

    #[test]
    fn term_in_every_doc_has_df_equal_n() {
        let index =
            build_index(vec![doc("d1", "q x"), doc("d2", "q y"), doc("d3", "q z")]).unwrap();
        assert_eq!(index.df("q"), 3);
        assert_eq!(index.num_docs(), 3);
    }

    #[test]
    fn empty_stream_is_an_error() {
        match build_index(Vec::new()) {
            Err(Error::EmptyCorpus) => {}
            other => panic!("expected EmptyCorpus, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_id_names_the_id() {
        let err = build_index(vec![doc("d1", "a"), doc("d1", "b")]).unwrap_err();
        assert!(err.to_string().contains("d1"), "{err}");
    }

    #[test]
    fn empty_document_retained_but_outside_df() {
        let index = build_index(vec![doc("d1", "a b"), doc("d2", "")]).unwrap();
        assert_eq!(index.num_docs(), 2);
        assert_eq!(index.stats().scorable_count, 1);
        assert_eq!(index.df("a"), 1);
        assert_eq!(index.doc(1).token_count, 0);
    }

    #[test]
    fn df_matches_postings_and_ctf_matches_doc_sums() {
        let index = build_index(vec![
            doc("d1", "a a b c"),
            doc("d2", "b b b"),
            doc("d3", "a c c"),
        ])
        .unwrap();
        for (id, entry) in index.vocab().iter().enumerate() {
            let plist = index.postings(id as TermId);
            assert_eq!(entry.df as usize, plist.len(), "df vs postings for {}", entry.term);
            let summed: u64 = plist.iter().map(|(_, c)| u64::from(*c)).sum();
            assert_eq!(entry.ctf, summed, "ctf vs postings for {}", entry.term);
            assert!(plist.windows(2).all(|w| w[0].0 < w[1].0), "postings sorted");
        }
        let doc_sum: u64 = index
            .docs()
            .iter()
            .flat_map(|d| d.terms.iter().map(|(_, c)| u64::from(*c)))
            .sum();
        assert_eq!(doc_sum, index.token_total());
    }

    #[test]
    fn judgments_last_writer_wins() {
        let mut j = Judgments::new();
        j.insert(697, "FT911-1", 0);
        j.insert(697, "FT911-1", 1);
        assert_eq!(j.grade(697, "FT911-1"), Some(1));
        assert!(j.is_relevant(697, "FT911-1"));
    }
}
