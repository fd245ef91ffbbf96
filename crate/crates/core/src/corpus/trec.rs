//! Parsers for TREC SGML documents, topic files, and qrels.

use std::io::BufRead;

use super::tokenize::Tokenizer;
use super::{Document, Error, Judgments, TopicQuery};

/// Streaming parser over TREC SGML document files.
///
/// Yields one [`Document`] per `<DOC>` block. The document id is the trimmed
/// `<DOCNO>` content; every other character-data run inside the block is
/// tokenized (tags act as separators). Blocks without a DOCNO are skipped
/// with a warning; malformed nesting aborts the stream with a byte offset.
pub struct TrecDocuments<'a, R: BufRead> {
    reader: R,
    tokenizer: &'a Tokenizer,
    offset: u64,
    done: bool,
    skipped: usize,
}

struct DocState {
    body: String,
    docno: Option<String>,
    docno_buf: Option<String>,
}

impl<'a, R: BufRead> TrecDocuments<'a, R> {
    pub fn new(reader: R, tokenizer: &'a Tokenizer) -> Self {
        Self {
            reader,
            tokenizer,
            offset: 0,
            done: false,
            skipped: 0,
        }
    }

    /// Number of `<DOC>` blocks skipped for missing DOCNO so far.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    fn malformed(&mut self, offset: u64, message: &str) -> Option<Result<Document, Error>> {
        self.done = true;
        Some(Err(Error::Malformed {
            offset,
            message: message.to_string(),
        }))
    }

    fn read_chunk(&mut self, delim: u8, buf: &mut Vec<u8>) -> Result<usize, Error> {
        buf.clear();
        let n = self.reader.read_until(delim, buf)?;
        self.offset += n as u64;
        Ok(n)
    }
}

impl<R: BufRead> Iterator for TrecDocuments<'_, R> {
    type Item = Result<Document, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut state: Option<DocState> = None;
        let mut buf: Vec<u8> = Vec::new();
        loop {
            // Character data up to the next '<' (or EOF).
            if let Err(e) = self.read_chunk(b'<', &mut buf) {
                self.done = true;
                return Some(Err(e));
            }
            let hit_tag = buf.last() == Some(&b'<');
            let text_end = if hit_tag { buf.len() - 1 } else { buf.len() };
            if text_end > 0 {
                let text = String::from_utf8_lossy(&buf[..text_end]).into_owned();
                if let Some(st) = state.as_mut() {
                    if let Some(docno) = st.docno_buf.as_mut() {
                        docno.push_str(&text);
                    } else {
                        st.body.push_str(&text);
                        st.body.push(' ');
                    }
                }
            }
            if !hit_tag {
                // EOF.
                if state.is_some() {
                    return self.malformed(self.offset, "unexpected end of file inside <DOC>");
                }
                self.done = true;
                return None;
            }

            // Tag body up to '>'.
            let tag_offset = self.offset - 1;
            let n = match self.read_chunk(b'>', &mut buf) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            if n == 0 || buf.last() != Some(&b'>') {
                return self.malformed(tag_offset, "unterminated tag");
            }
            let tag = String::from_utf8_lossy(&buf[..buf.len() - 1])
                .trim()
                .to_ascii_lowercase();

            match tag.as_str() {
                "doc" => {
                    if state.is_some() {
                        return self.malformed(tag_offset, "nested <DOC>");
                    }
                    state = Some(DocState {
                        body: String::new(),
                        docno: None,
                        docno_buf: None,
                    });
                }
                "/doc" => {
                    let Some(st) = state.take() else {
                        return self.malformed(tag_offset, "</DOC> without matching <DOC>");
                    };
                    if st.docno_buf.is_some() {
                        return self.malformed(tag_offset, "unterminated <DOCNO>");
                    }
                    match st.docno {
                        Some(docno) => {
                            let tokens = self.tokenizer.tokenize(&st.body);
                            let doc = Document::from_tokens(docno.trim(), &tokens);
                            if doc.is_empty() {
                                log::warn!("document {} has no indexable text", doc.doc_id);
                            }
                            return Some(Ok(doc));
                        }
                        None => {
                            self.skipped += 1;
                            log::warn!("skipping <DOC> without DOCNO near byte {tag_offset}");
                        }
                    }
                }
                "docno" => match state.as_mut() {
                    Some(st) if st.docno_buf.is_none() => st.docno_buf = Some(String::new()),
                    Some(_) => return self.malformed(tag_offset, "nested <DOCNO>"),
                    None => {}
                },
                "/docno" => {
                    if let Some(st) = state.as_mut() {
                        match st.docno_buf.take() {
                            Some(content) => st.docno = Some(content),
                            None => {
                                return self
                                    .malformed(tag_offset, "</DOCNO> without matching <DOCNO>")
                            }
                        }
                    }
                }
                _ => {
                    if let Some(st) = state.as_mut() {
                        if st.docno_buf.is_some() {
                            return self.malformed(tag_offset, "tag inside <DOCNO>");
                        }
                        st.body.push(' ');
                    }
                }
            }
        }
    }
}

/// Parse a full TREC document stream into memory.
pub fn parse_trec_documents<R: BufRead>(
    reader: R,
    tokenizer: &Tokenizer,
) -> Result<Vec<Document>, Error> {
    TrecDocuments::new(reader, tokenizer).collect()
}

/// Parse a TREC topics file, keeping only the tokenized `<title>` field.
/// Topics without a usable number or title are skipped with a warning.
pub fn parse_trec_topics<R: BufRead>(
    reader: R,
    tokenizer: &Tokenizer,
) -> Result<Vec<TopicQuery>, Error> {
    let mut text = String::new();
    let mut rdr = reader;
    // TREC topic files are small; reading fully keeps the field scanning simple.
    std::io::Read::read_to_string(&mut rdr, &mut text)?;

    let mut topics = Vec::new();
    for block in text.split("<top>").skip(1) {
        let block = block.split("</top>").next().unwrap_or(block);
        let num = field_text(block, "num").and_then(|s| first_integer(&s));
        let Some(num) = num else {
            log::warn!("skipping topic without a parsable <num> field");
            continue;
        };
        let Some(title) = field_text(block, "title") else {
            log::warn!("skipping topic {num}: missing <title>");
            continue;
        };
        let title = title
            .trim()
            .trim_start_matches("Topic:")
            .trim_start_matches("topic:")
            .trim();
        let tokens = tokenizer.tokenize(title);
        if tokens.is_empty() {
            log::warn!("skipping topic {num}: title empty after analysis");
            continue;
        }
        topics.push(TopicQuery::from_tokens(num, &tokens));
    }
    Ok(topics)
}

/// Content of `<field>`: the character data after the tag up to the next tag
/// (classic TREC topic fields have no closing tags).
fn field_text(block: &str, field: &str) -> Option<String> {
    let open = format!("<{field}>");
    let lower = block.to_ascii_lowercase();
    let start = lower.find(&open)? + open.len();
    let rest = &block[start..];
    let end = rest.find('<').unwrap_or(rest.len());
    Some(rest[..end].to_string())
}

fn first_integer(s: &str) -> Option<u32> {
    let digits: String = s
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

/// Parse 4-column qrels (`topic iteration docno grade`). Later duplicate
/// lines overwrite earlier ones.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<Judgments, Error> {
    let mut judgments = Judgments::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::QrelsLine {
                line: lineno,
                message: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        let topic: u32 = fields[0].parse().map_err(|_| Error::QrelsLine {
            line: lineno,
            message: format!("non-integer topic id {:?}", fields[0]),
        })?;
        let grade: u32 = fields[3].parse().map_err(|_| Error::QrelsLine {
            line: lineno,
            message: format!("grade {:?} is not a non-negative integer", fields[3]),
        })?;
        judgments.insert(topic, fields[2], grade);
    }
    Ok(judgments)
}
