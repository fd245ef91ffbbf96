//! Single-file binary index format.
//!
//! Layout: 8-byte magic, u32 format version, then length-prefixed sections
//! (stats, stoplist, lexicon, postings, doc table), then a footer magic.
//! All integers are little-endian; strings are u32 length + UTF-8 bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{DocEntry, DocId, Error, InvertedIndex, TermEntry, TermId};

const MAGIC: &[u8; 8] = b"PRFINDEX";
const FOOTER: &[u8; 8] = b"PRFEND\0\0";
const FORMAT_VERSION: u32 = 1;

/// Write the index to `path`. The result round-trips through [`load_index`]
/// with every statistic intact.
pub fn persist_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;

    write_section(&mut out, &encode_stats(index))?;
    write_section(&mut out, &encode_stoplist(index))?;
    write_section(&mut out, &encode_lexicon(index))?;
    write_section(&mut out, &encode_postings(index))?;
    write_section(&mut out, &encode_docs(index))?;

    out.write_all(FOOTER)?;
    out.flush()?;
    Ok(())
}

/// Load an index previously written by [`persist_index`].
pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex, Error> {
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic, "file header")?;
    if &magic != MAGIC {
        return Err(Error::Integrity("bad magic bytes".to_string()));
    }
    let version = input
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Integrity("truncated version field".to_string()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }

    let stats = read_section(&mut input, "stats")?;
    let stoplist_raw = read_section(&mut input, "stoplist")?;
    let lexicon_raw = read_section(&mut input, "lexicon")?;
    let postings_raw = read_section(&mut input, "postings")?;
    let docs_raw = read_section(&mut input, "doc table")?;

    let mut footer = [0u8; 8];
    read_exact(&mut input, &mut footer, "footer")?;
    if &footer != FOOTER {
        return Err(Error::Integrity("bad footer bytes".to_string()));
    }

    let (doc_count, token_total, df_total) = decode_stats(&stats)?;
    let stoplist = decode_stoplist(&stoplist_raw)?;
    let terms = decode_lexicon(&lexicon_raw)?;
    let postings = decode_postings(&postings_raw, terms.len())?;
    let docs = decode_docs(&docs_raw, terms.len() as u32)?;

    let index = InvertedIndex::from_parts(terms, postings, docs, stoplist);
    if index.num_docs() != doc_count
        || index.token_total() != token_total
        || index.df_total() != df_total
    {
        return Err(Error::Integrity(
            "stats section disagrees with index contents".to_string(),
        ));
    }
    Ok(index)
}

fn write_section<W: Write>(out: &mut W, payload: &[u8]) -> Result<(), Error> {
    out.write_u64::<LittleEndian>(payload.len() as u64)?;
    out.write_all(payload)?;
    Ok(())
}

fn read_section<R: Read>(input: &mut R, name: &str) -> Result<Vec<u8>, Error> {
    let len = input
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::Integrity(format!("truncated before {name} section")))?;
    let mut payload = vec![0u8; len as usize];
    read_exact(input, &mut payload, name)?;
    Ok(payload)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<(), Error> {
    input
        .read_exact(buf)
        .map_err(|_| Error::Integrity(format!("truncated {what}")))
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.write_u32::<LittleEndian>(s.len() as u32).unwrap();
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Integrity("section payload overrun".to_string()));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, Error> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Integrity("invalid UTF-8 in string".to_string()))
    }

    fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn encode_stats(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(index.num_docs()).unwrap();
    out.write_u64::<LittleEndian>(index.token_total()).unwrap();
    out.write_u64::<LittleEndian>(index.df_total()).unwrap();
    out
}

fn decode_stats(buf: &[u8]) -> Result<(u32, u64, u64), Error> {
    let mut c = Cursor::new(buf);
    let stats = (c.u32()?, c.u64()?, c.u64()?);
    if !c.finished() {
        return Err(Error::Integrity("stats section has trailing bytes".to_string()));
    }
    Ok(stats)
}

fn encode_stoplist(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(index.stoplist().len() as u32)
        .unwrap();
    for word in index.stoplist() {
        put_str(&mut out, word);
    }
    out
}

fn decode_stoplist(buf: &[u8]) -> Result<Vec<String>, Error> {
    let mut c = Cursor::new(buf);
    let count = c.u32()? as usize;
    let mut words = Vec::with_capacity(count);
    for _ in 0..count {
        words.push(c.str()?);
    }
    Ok(words)
}

fn encode_lexicon(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(index.vocab().len() as u32)
        .unwrap();
    for entry in index.vocab() {
        put_str(&mut out, &entry.term);
        out.write_u32::<LittleEndian>(entry.df).unwrap();
        out.write_u64::<LittleEndian>(entry.ctf).unwrap();
    }
    out
}

fn decode_lexicon(buf: &[u8]) -> Result<Vec<TermEntry>, Error> {
    let mut c = Cursor::new(buf);
    let count = c.u32()? as usize;
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        let term = c.str()?;
        let df = c.u32()?;
        let ctf = c.u64()?;
        terms.push(TermEntry { term, df, ctf });
    }
    Ok(terms)
}

fn encode_postings(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    for id in 0..index.vocab().len() {
        let plist = index.postings(id as TermId);
        out.write_u32::<LittleEndian>(plist.len() as u32).unwrap();
        for &(doc, count) in plist {
            out.write_u32::<LittleEndian>(doc).unwrap();
            out.write_u32::<LittleEndian>(count).unwrap();
        }
    }
    out
}

fn decode_postings(buf: &[u8], term_count: usize) -> Result<Vec<Vec<(DocId, u32)>>, Error> {
    let mut c = Cursor::new(buf);
    let mut postings = Vec::with_capacity(term_count);
    for _ in 0..term_count {
        let len = c.u32()? as usize;
        let mut plist = Vec::with_capacity(len);
        for _ in 0..len {
            plist.push((c.u32()?, c.u32()?));
        }
        postings.push(plist);
    }
    if !c.finished() {
        return Err(Error::Integrity("postings section has trailing bytes".to_string()));
    }
    Ok(postings)
}

fn encode_docs(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(index.num_docs()).unwrap();
    for doc in index.docs() {
        put_str(&mut out, &doc.doc_id);
        out.write_u32::<LittleEndian>(doc.token_count).unwrap();
        out.write_u32::<LittleEndian>(doc.distinct_count).unwrap();
        out.write_u32::<LittleEndian>(doc.terms.len() as u32).unwrap();
        for &(term, count) in &doc.terms {
            out.write_u32::<LittleEndian>(term).unwrap();
            out.write_u32::<LittleEndian>(count).unwrap();
        }
    }
    out
}

fn decode_docs(buf: &[u8], term_count: u32) -> Result<Vec<DocEntry>, Error> {
    let mut c = Cursor::new(buf);
    let count = c.u32()? as usize;
    let mut docs = Vec::with_capacity(count);
    for _ in 0..count {
        let doc_id = c.str()?;
        let token_count = c.u32()?;
        let distinct_count = c.u32()?;
        let n_terms = c.u32()? as usize;
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let term = c.u32()?;
            if term >= term_count {
                return Err(Error::Integrity(format!(
                    "doc table references unknown term id {term}"
                )));
            }
            terms.push((term, c.u32()?));
        }
        docs.push(DocEntry {
            doc_id,
            terms,
            token_count,
            distinct_count,
        });
    }
    if !c.finished() {
        return Err(Error::Integrity("doc table has trailing bytes".to_string()));
    }
    Ok(docs)
}
