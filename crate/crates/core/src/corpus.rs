//! Leveled corpora, word-embedding tables and document featurization.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"doc_id": "a-3", "slug": "a", "level": 3, "lang": "en", "text": "..."}
//! {"doc_id": "a-1", "slug": "a", "level": 1, "lang": "en", "vector": [0.1, 0.2]}
//! ```
//!
//! Documents sharing a `slug` are versions of the same text at different
//! reading levels. Each record needs `text`, `vector`, or both.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const DEFAULT_LANG: &str = "und";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(rename = "slug")]
    pub slug_id: String,
    pub level: f64,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

/// Versions of one text. Members are ordered by level descending, then doc_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slug {
    pub slug_id: String,
    pub members: Vec<String>,
}

impl Slug {
    pub fn is_rankable(&self) -> bool {
        self.members.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: BTreeMap<String, Document>,
    slugs: BTreeMap<String, Slug>,
    dim: usize,
    embedding_id: Option<String>,
}

impl Corpus {
    /// Validates and assembles a corpus. Fails on duplicate ids, non-finite
    /// levels or vector entries, records with neither text nor vector, and
    /// inconsistent vector dimensions.
    pub fn from_documents(docs: Vec<Document>) -> Result<Self> {
        let mut documents = BTreeMap::new();
        let mut vector_dim: Option<usize> = None;
        for doc in docs {
            validate_document(&doc)?;
            if let Some(v) = &doc.vector {
                match vector_dim {
                    None => vector_dim = Some(v.len()),
                    Some(d) if d != v.len() => {
                        return Err(Error::document(
                            &doc.doc_id,
                            format!("vector has dimension {}, expected {d}", v.len()),
                        ))
                    }
                    _ => {}
                }
            }
            if documents.contains_key(&doc.doc_id) {
                return Err(Error::document(&doc.doc_id, "duplicate doc_id"));
            }
            documents.insert(doc.doc_id.clone(), doc);
        }
        let all_vectors = documents.values().all(|d| d.vector.is_some());
        let dim = match (all_vectors, vector_dim) {
            (true, Some(d)) => d,
            _ => 0,
        };
        let slugs = assemble_slugs(&documents);
        Ok(Corpus {
            documents,
            slugs,
            dim,
            embedding_id: None,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Embedding dimension, 0 until every document carries a vector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_featurized(&self) -> bool {
        self.dim > 0
    }

    /// Identifier of the embedding table used by [`featurize`], if any.
    pub fn embedding_id(&self) -> Option<&str> {
        self.embedding_id.as_deref()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn slugs(&self) -> impl Iterator<Item = &Slug> {
        self.slugs.values()
    }

    pub fn rankable_slugs(&self) -> impl Iterator<Item = &Slug> {
        self.slugs.values().filter(|s| s.is_rankable())
    }

    pub fn slug(&self, slug_id: &str) -> Option<&Slug> {
        self.slugs.get(slug_id)
    }

    pub fn doc(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn level(&self, doc_id: &str) -> Result<f64> {
        self.doc(doc_id)
            .map(|d| d.level)
            .ok_or_else(|| Error::document(doc_id, "not in corpus"))
    }

    pub fn vector(&self, doc_id: &str) -> Result<&[f64]> {
        let doc = self
            .doc(doc_id)
            .ok_or_else(|| Error::document(doc_id, "not in corpus"))?;
        doc.vector
            .as_deref()
            .ok_or_else(|| Error::document(doc_id, "document is not featurized"))
    }

    pub fn min_level(&self) -> Option<f64> {
        self.documents.values().map(|d| d.level).reduce(f64::min)
    }

    /// Documents in canonical order: slug_id, then level descending, then doc_id.
    pub fn canonical_order(&self) -> impl Iterator<Item = &Document> {
        self.slugs
            .values()
            .flat_map(|s| s.members.iter().map(|id| &self.documents[id]))
    }

    /// Restriction of the corpus to the given slugs.
    pub fn subset<'a>(&self, slug_ids: impl IntoIterator<Item = &'a str>) -> Result<Corpus> {
        let mut docs = Vec::new();
        for id in slug_ids {
            let slug = self
                .slugs
                .get(id)
                .ok_or_else(|| Error::Config(format!("unknown slug {id}")))?;
            docs.extend(slug.members.iter().map(|m| self.documents[m].clone()));
        }
        let mut sub = Corpus::from_documents(docs)?;
        if sub.dim == 0 && !sub.is_empty() {
            sub.dim = self.dim;
        }
        sub.embedding_id.clone_from(&self.embedding_id);
        Ok(sub)
    }

    /// Replaces every document vector by `f(vector)`. The output dimension
    /// must be uniform.
    pub fn map_vectors(&self, mut f: impl FnMut(&Document, &[f64]) -> Vec<f64>) -> Result<Corpus> {
        let mut docs = Vec::with_capacity(self.len());
        for doc in self.documents.values() {
            let v = self.vector(&doc.doc_id)?;
            let mut d = doc.clone();
            d.vector = Some(f(doc, v));
            docs.push(d);
        }
        let mut out = Corpus::from_documents(docs)?;
        out.embedding_id.clone_from(&self.embedding_id);
        Ok(out)
    }

    pub fn set_embedding_id(&mut self, id: impl Into<String>) {
        self.embedding_id = Some(id.into());
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for doc in self.canonical_order() {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn validate_document(doc: &Document) -> Result<()> {
    if doc.doc_id.is_empty() {
        return Err(Error::document("", "empty doc_id"));
    }
    if !doc.level.is_finite() {
        return Err(Error::document(&doc.doc_id, "level is not finite"));
    }
    if doc.text.is_none() && doc.vector.is_none() {
        return Err(Error::document(&doc.doc_id, "needs text or vector"));
    }
    if let Some(v) = &doc.vector {
        if v.is_empty() {
            return Err(Error::document(&doc.doc_id, "empty vector"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::document(&doc.doc_id, "vector has non-finite entries"));
        }
    }
    Ok(())
}

fn assemble_slugs(documents: &BTreeMap<String, Document>) -> BTreeMap<String, Slug> {
    let mut grouped: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
    for doc in documents.values() {
        grouped.entry(doc.slug_id.clone()).or_default().push(doc);
    }
    grouped
        .into_iter()
        .map(|(slug_id, mut docs)| {
            docs.sort_by(|a, b| {
                b.level
                    .total_cmp(&a.level)
                    .then_with(|| a.doc_id.cmp(&b.doc_id))
            });
            let members = docs.into_iter().map(|d| d.doc_id.clone()).collect();
            (slug_id.clone(), Slug { slug_id, members })
        })
        .collect()
}

/// Supported on-disk corpus layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        CorpusFormat::Jsonl => parse_corpus(BufReader::new(file)),
    }
}

/// Parses line-delimited JSON records. Errors carry the 1-based line number.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut docs = Vec::new();
    let mut lines_by_id: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::record(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_record(&line).map_err(|m| Error::record(lineno, m))?;
        if let Some(first) = lines_by_id.insert(doc.doc_id.clone(), lineno) {
            return Err(Error::record(
                lineno,
                format!("duplicate doc_id {:?} (first seen on line {first})", doc.doc_id),
            ));
        }
        if let Err(e) = validate_document(&doc) {
            return Err(Error::record(lineno, e.to_string()));
        }
        docs.push(doc);
    }
    Corpus::from_documents(docs).map_err(|e| match &e {
        Error::Document { doc_id, .. } => match lines_by_id.get(doc_id) {
            Some(&line) => Error::record(line, e.to_string()),
            None => e,
        },
        _ => e,
    })
}

fn parse_record(line: &str) -> std::result::Result<Document, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "record is not a JSON object".to_string())?;

    let string_field = |key: &str| -> std::result::Result<Option<String>, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(format!("field {key:?} must be a string")),
        }
    };

    let doc_id = string_field("doc_id")?.ok_or("missing required field \"doc_id\"")?;
    let slug_id = match string_field("slug")? {
        Some(s) => s,
        None => string_field("slug_id")?.ok_or("missing required field \"slug\"")?,
    };
    let level = match obj.get("level") {
        None | Some(Value::Null) => return Err(format!("record {doc_id:?}: missing required field \"level\"")),
        Some(Value::Number(n)) => n.as_f64().ok_or("level is not representable")?,
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("record {doc_id:?}: level {s:?} is not a number"))?,
        Some(_) => return Err(format!("record {doc_id:?}: level must be a number")),
    };
    if !level.is_finite() {
        return Err(format!("record {doc_id:?}: level is not finite"));
    }
    let lang = string_field("lang")?.unwrap_or_else(|| DEFAULT_LANG.to_string());
    let text = string_field("text")?;
    let vector = match obj.get("vector") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| format!("record {doc_id:?}: vector entries must be numbers")))
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        Some(_) => return Err(format!("record {doc_id:?}: vector must be an array")),
    };
    if text.is_none() && vector.is_none() {
        return Err(format!("record {doc_id:?}: needs \"text\" or \"vector\""));
    }
    Ok(Document {
        doc_id,
        slug_id,
        level,
        lang,
        text,
        vector,
    })
}

/// Word vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: HashMap<String, Vec<f64>>,
    dim: usize,
    id: String,
}

impl EmbeddingTable {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>, id: impl Into<String>) -> Result<Self> {
        let mut vocab = HashMap::new();
        let mut dim = None;
        for (token, v) in entries {
            let d = *dim.get_or_insert(v.len());
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding for {token:?}")));
            }
            vocab.insert(token, v);
        }
        match dim {
            Some(d) if d > 0 => Ok(EmbeddingTable {
                vocab,
                dim: d,
                id: id.into(),
            }),
            _ => Err(Error::Config("embedding table is empty".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(Vec::as_slice)
    }

    /// Writes the `count dim` text format, tokens sorted.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<writer>", e);
        writeln!(out, "{} {}", self.vocab.len(), self.dim).map_err(io)?;
        let mut tokens: Vec<&String> = self.vocab.keys().collect();
        tokens.sort();
        for t in tokens {
            write!(out, "{t}").map_err(io)?;
            for x in &self.vocab[t] {
                write!(out, " {x}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        Ok(())
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), path.display().to_string())
}

/// Parses a `count dim` header followed by `token v1 .. v_dim` rows.
/// Duplicate tokens keep the last row.
pub fn parse_embeddings<R: BufRead>(reader: R, id: impl Into<String>) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let emb_err = |line: usize, message: String| Error::Embedding { line, message };

    let (count, dim) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(emb_err(1, "missing header".into()));
        };
        let line = line.map_err(|e| emb_err(idx + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some(h) => break h,
            None => return Err(emb_err(idx + 1, format!("malformed header {line:?}, expected \"count dim\""))),
        }
    };
    if count == 0 {
        return Err(emb_err(1, "empty vocabulary".into()));
    }
    if dim == 0 {
        return Err(emb_err(1, "dimension must be positive".into()));
    }

    let mut vocab: HashMap<String, Vec<f64>> = HashMap::with_capacity(count);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| emb_err(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line has a token").to_string();
        let values = parts
            .map(|p| p.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| emb_err(lineno, format!("non-numeric or non-finite value for {token:?}")))?;
        if values.len() != dim {
            return Err(emb_err(
                lineno,
                format!("token {token:?} has {} values, expected {dim}", values.len()),
            ));
        }
        rows += 1;
        if vocab.insert(token.clone(), values).is_some() {
            log::warn!("embedding file line {lineno}: duplicate token {token:?}, keeping last");
        }
    }
    if rows != count {
        return Err(emb_err(
            rows + 1,
            format!("header declares {count} rows, found {rows}"),
        ));
    }
    Ok(EmbeddingTable {
        vocab,
        dim,
        id: id.into(),
    })
}

/// Lowercases, splits on Unicode whitespace and trims non-alphanumeric
/// characters from both ends of each token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Mean of the vectors of in-vocabulary tokens. Tokens are lowercased
/// before lookup; unknown tokens are skipped.
pub fn embed_document<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; table.dim];
    let mut hits = 0usize;
    for token in tokens {
        let key = token.as_ref().to_lowercase();
        if let Some(v) = table.get(&key) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::NoKnownTokens);
    }
    let n = hits as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

pub fn embed_text(text: &str, table: &EmbeddingTable) -> Result<Vec<f64>> {
    embed_document(&tokenize(text), table)
}

/// Gives every document a vector. Preloaded vectors pass through after a
/// dimension check; the rest are embedded from their text.
pub fn featurize(corpus: &Corpus, table: &EmbeddingTable) -> Result<Corpus> {
    let mut docs = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let mut d = doc.clone();
        match (&doc.vector, &doc.text) {
            (Some(v), _) => {
                if v.len() != table.dim() {
                    return Err(Error::document(
                        &doc.doc_id,
                        format!(
                            "dimension mismatch: vector has {}, table has {}",
                            v.len(),
                            table.dim()
                        ),
                    ));
                }
            }
            (None, Some(text)) => {
                let v = embed_text(text, table).map_err(|e| Error::document(&doc.doc_id, e.to_string()))?;
                d.vector = Some(v);
            }
            (None, None) => unreachable!("validated at construction"),
        }
        docs.push(d);
    }
    let mut out = Corpus::from_documents(docs)?;
    out.dim = table.dim();
    out.embedding_id = Some(table.id().to_string());
    Ok(out)
}
