//! Hashed TF-IDF text features and a lexicon sentiment tagger.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::dataio::TabularFrame;
use crate::error::{Error, Result};

pub const DEFAULT_HASH_DIM: usize = 5000;
pub const DEFAULT_MIN_DOC_FREQ: u32 = 3;
const MIN_TOKEN_CHARS: usize = 2;

/// Column order of the concatenated text field.
pub const DEFAULT_TEXT_COLUMNS: [&str; 7] = [
    "title",
    "genre",
    "director",
    "writer",
    "production_company",
    "actors",
    "description",
];

/// A small English stoplist used when no file is configured.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by",
    "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "him",
    "his", "how", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on",
    "or", "our", "out", "she", "so", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "to", "up", "was", "we", "were", "what", "when", "which", "who",
    "will", "with", "would", "you", "your",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SparseJson", into = "SparseJson")]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseJson {
    dim: usize,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl From<SparseVector> for SparseJson {
    fn from(v: SparseVector) -> Self {
        let (idx, val) = v.entries.into_iter().unzip();
        SparseJson { dim: v.dim, idx, val }
    }
}

impl TryFrom<SparseJson> for SparseVector {
    type Error = Error;

    fn try_from(j: SparseJson) -> Result<Self> {
        if j.idx.len() != j.val.len() {
            return Err(Error::data("idx and val lengths differ"));
        }
        SparseVector::new(j.dim, j.idx.into_iter().zip(j.val).collect())
    }
}

impl SparseVector {
    /// Checks that indices are strictly increasing, in range, and values nonzero.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        for (k, &(i, v)) in entries.iter().enumerate() {
            if i >= dim {
                return Err(Error::data(format!("index {i} out of range for dim {dim}")));
            }
            if k > 0 && entries[k - 1].0 >= i {
                return Err(Error::data("indices must be strictly increasing"));
            }
            if v == 0.0 {
                return Err(Error::data(format!("explicit zero at index {i}")));
            }
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |k| self.entries[k].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite sparse vector serializes")
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS)
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &HashSet<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

pub fn default_stoplist() -> HashSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// One lowercase token per line; blank lines and `#` comments are ignored.
pub fn read_stoplist<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut set = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            set.insert(t.to_lowercase());
        }
    }
    Ok(set)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn hash_index(token: &str, dim: usize) -> usize {
    (fnv1a64(token.as_bytes()) % dim as u64) as usize
}

pub fn hashed_tf<S: AsRef<str>>(tokens: &[S], dim: usize) -> Result<SparseVector> {
    if dim == 0 {
        return Err(Error::config("hash dimension must be >= 1"));
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(hash_index(t.as_ref(), dim)).or_default() += 1.0;
    }
    Ok(SparseVector {
        dim,
        entries: counts.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfModel {
    pub dim: usize,
    pub num_docs: usize,
    pub doc_freq: Vec<u32>,
    pub min_doc_freq: u32,
    pub idf: Vec<f64>,
}

pub fn idf_fit(corpus: &[SparseVector], min_doc_freq: u32) -> Result<IdfModel> {
    let dim = corpus.first().map_or(DEFAULT_HASH_DIM, SparseVector::dim);
    let mut doc_freq = vec![0u32; dim];
    for v in corpus {
        if v.dim != dim {
            return Err(Error::Dimension { expected: dim, got: v.dim });
        }
        for &(i, _) in &v.entries {
            doc_freq[i] += 1;
        }
    }
    let n = corpus.len() as f64;
    let idf = doc_freq
        .iter()
        .map(|&df| {
            if df < min_doc_freq {
                0.0
            } else {
                ((n + 1.0) / (f64::from(df) + 1.0)).ln()
            }
        })
        .collect();
    Ok(IdfModel {
        dim,
        num_docs: corpus.len(),
        doc_freq,
        min_doc_freq,
        idf,
    })
}

pub fn idf_transform(model: &IdfModel, v: &SparseVector) -> Result<SparseVector> {
    if v.dim != model.dim {
        return Err(Error::Dimension { expected: model.dim, got: v.dim });
    }
    let entries = v
        .entries
        .iter()
        .map(|&(i, tf)| (i, tf * model.idf[i]))
        .filter(|&(_, x)| x != 0.0)
        .collect();
    Ok(SparseVector { dim: v.dim, entries })
}

/// Appends numeric columns after the text block, in the given order.
pub fn assemble(text: &SparseVector, numerics: &[(&str, f64)]) -> Result<SparseVector> {
    let mut entries = text.entries.clone();
    for (j, &(name, x)) in numerics.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::data(format!("numeric feature {name:?} is {x}")));
        }
        if x != 0.0 {
            entries.push((text.dim + j, x));
        }
    }
    Ok(SparseVector {
        dim: text.dim + numerics.len(),
        entries,
    })
}

/// Tokenize → stopwords → hashed TF for one document.
pub fn text_tf(text: &str, stoplist: &HashSet<String>, dim: usize) -> Result<SparseVector> {
    hashed_tf(&remove_stopwords(tokenize(text), stoplist), dim)
}

/// Space-joins the named cells of one row; missing or empty cells are skipped.
pub fn build_all_text(frame: &TabularFrame, row: usize, columns: &[&str]) -> Result<String> {
    let idx = columns
        .iter()
        .map(|c| frame.column_index(c))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<String> = idx
        .into_iter()
        .filter_map(|c| match frame.cell(row, c) {
            crate::dataio::Cell::Text(s) if !s.trim().is_empty() => Some(s.trim().to_owned()),
            crate::dataio::Cell::Number(x) => Some(x.to_string()),
            _ => None,
        })
        .collect();
    Ok(parts.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

pub type Lexicon = HashMap<String, Polarity>;

/// Lines of `token,pos` or `token,neg`.
pub fn read_lexicon<R: BufRead>(reader: R) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: n + 1, column: None, message };
        let (token, pol) = t
            .rsplit_once(',')
            .ok_or_else(|| parse_err(format!("expected token,pos|neg, got {t:?}")))?;
        let pol = match pol.trim() {
            "pos" => Polarity::Positive,
            "neg" => Polarity::Negative,
            other => return Err(parse_err(format!("unknown polarity {other:?}"))),
        };
        lex.insert(token.trim().to_lowercase(), pol);
    }
    Ok(lex)
}

pub fn sentiment_tag<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Polarity {
    let (mut p, mut n) = (0usize, 0usize);
    for t in tokens {
        match lexicon.get(t.as_ref()) {
            Some(Polarity::Positive) => p += 1,
            Some(Polarity::Negative) => n += 1,
            _ => {}
        }
    }
    match p.cmp(&n) {
        std::cmp::Ordering::Greater => Polarity::Positive,
        std::cmp::Ordering::Less => Polarity::Negative,
        std::cmp::Ordering::Equal => Polarity::Neutral,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentDistribution {
    pub total: usize,
    pub counts: BTreeMap<Polarity, usize>,
    pub percent: BTreeMap<Polarity, f64>,
}

pub fn sentiment_distribution(tags: &[Polarity]) -> SentimentDistribution {
    let mut counts: BTreeMap<Polarity, usize> =
        [Polarity::Positive, Polarity::Negative, Polarity::Neutral].map(|p| (p, 0)).into();
    for t in tags {
        *counts.get_mut(t).unwrap() += 1;
    }
    let total = tags.len();
    let percent = counts
        .iter()
        .map(|(&p, &c)| (p, if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 }))
        .collect();
    SentimentDistribution { total, counts, percent }
}
