//! Character and word n-gram extraction plus the frequency-thresholded
//! vocabulary that maps grams to feature indices.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

/// Feature family. Char-family features index substrings of the lowercased
/// text; word-family features index token windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Char,
    Word,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Char => "char",
            Family::Word => "word",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "char" => Ok(Family::Char),
            "word" => Ok(Family::Word),
            _ => Err(()),
        }
    }
}

/// Which n-gram orders to extract and the occurrence floor for keeping a gram.
///
/// `None` disables a family entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub char_orders: Option<(u32, u32)>,
    pub word_orders: Option<(u32, u32)>,
    pub min_total_count: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            char_orders: Some((1, 7)),
            word_orders: Some((1, 4)),
            min_total_count: 2,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, orders) in [("char", self.char_orders), ("word", self.word_orders)] {
            if let Some((lo, hi)) = orders {
                if lo < 1 || lo > hi {
                    return Err(Error::Config(format!(
                        "{name} n-gram orders must satisfy 1 <= min <= max, got {lo}..{hi}"
                    )));
                }
            }
        }
        if self.char_orders.is_none() && self.word_orders.is_none() {
            return Err(Error::Config("no feature family enabled".into()));
        }
        if self.min_total_count < 1 {
            return Err(Error::Config("min_total_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Lowercase, split on Unicode whitespace, strip non-alphanumeric characters
/// from token edges, drop tokens that end up empty.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    tokenize_lowered(&lower)
}

fn tokenize_lowered(lower: &str) -> Vec<String> {
    lower
        .split_whitespace()
        .filter_map(|tok| {
            let trimmed = tok.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

fn visit_char_ngrams(lower: &str, n_min: u32, n_max: u32, mut visit: impl FnMut(u32, &str)) {
    let mut bounds: Vec<usize> = lower.char_indices().map(|(i, _)| i).collect();
    bounds.push(lower.len());
    let n_chars = bounds.len() - 1;
    for order in n_min..=n_max {
        let n = order as usize;
        if n > n_chars {
            break;
        }
        for start in 0..=(n_chars - n) {
            visit(order, &lower[bounds[start]..bounds[start + n]]);
        }
    }
}

/// All contiguous substrings of the lowercased text with lengths in
/// [n_min, n_max], whitespace included, with multiplicity.
pub fn extract_char_ngrams(text: &str, n_min: u32, n_max: u32) -> Vec<(u32, String)> {
    let lower = text.to_lowercase();
    let mut grams = Vec::new();
    visit_char_ngrams(&lower, n_min, n_max, |order, gram| {
        grams.push((order, gram.to_string()));
    });
    grams
}

fn visit_word_ngrams(tokens: &[String], n_min: u32, n_max: u32, mut visit: impl FnMut(u32, String)) {
    for order in n_min..=n_max {
        let n = order as usize;
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            visit(order, window.join(" "));
        }
    }
}

/// Contiguous token windows of each order in [n_min, n_max], joined by a
/// single space, with multiplicity.
pub fn extract_word_ngrams(tokens: &[String], n_min: u32, n_max: u32) -> Vec<(u32, String)> {
    let mut grams = Vec::new();
    visit_word_ngrams(tokens, n_min, n_max, |order, gram| grams.push((order, gram)));
    grams
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub family: Family,
    pub order: u32,
    pub gram: String,
    pub count: u64,
}

/// Immutable gram-to-index mapping. Entries are sorted by
/// (family, order, gram) and indexed 0..len without gaps, so two builds over
/// the same corpus assign identical indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    config: FeatureConfig,
    entries: Vec<VocabEntry>,
    n_char: u32,
    char_lookup: HashMap<String, u32>,
    word_lookup: HashMap<String, u32>,
}

/// Raw counts of in-vocabulary grams for one document, plus the document
/// lengths both feature families normalize against.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseCountVector {
    /// (feature index, tf) pairs sorted by index; tf >= 1.
    pub counts: Vec<(u32, u32)>,
    /// Characters in the lowercased text.
    pub char_len: u32,
    /// Tokens after tokenization.
    pub word_len: u32,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Number of char-family entries. Indices below this belong to the char
    /// family, the rest to the word family.
    pub fn n_char_features(&self) -> u32 {
        self.n_char
    }

    pub fn index_of(&self, family: Family, gram: &str) -> Option<u32> {
        match family {
            Family::Char => self.char_lookup.get(gram).copied(),
            Family::Word => self.word_lookup.get(gram).copied(),
        }
    }

    fn from_entries(config: FeatureConfig, mut entries: Vec<VocabEntry>) -> Self {
        entries.sort_by(|a, b| {
            (a.family, a.order, a.gram.as_str()).cmp(&(b.family, b.order, b.gram.as_str()))
        });
        let n_char = entries.iter().filter(|e| e.family == Family::Char).count() as u32;
        let mut char_lookup = HashMap::new();
        let mut word_lookup = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let lookup = match entry.family {
                Family::Char => &mut char_lookup,
                Family::Word => &mut word_lookup,
            };
            lookup.insert(entry.gram.clone(), i as u32);
        }
        Vocabulary {
            config,
            entries,
            n_char,
            char_lookup,
            word_lookup,
        }
    }
}

/// Count every configured gram across the corpus and keep those whose total
/// occurrence count reaches `config.min_total_count`.
pub fn build_vocabulary<'a, I>(texts: I, config: FeatureConfig) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    config.validate()?;
    let mut char_counts: HashMap<String, u64> = HashMap::new();
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    let mut n_docs = 0usize;
    for text in texts {
        n_docs += 1;
        let lower = text.to_lowercase();
        if let Some((lo, hi)) = config.char_orders {
            visit_char_ngrams(&lower, lo, hi, |_, gram| {
                if let Some(c) = char_counts.get_mut(gram) {
                    *c += 1;
                } else {
                    char_counts.insert(gram.to_string(), 1);
                }
            });
        }
        if let Some((lo, hi)) = config.word_orders {
            let tokens = tokenize_lowered(&lower);
            visit_word_ngrams(&tokens, lo, hi, |_, gram| {
                *word_counts.entry(gram).or_insert(0) += 1;
            });
        }
    }
    if n_docs == 0 {
        return Err(Error::Input("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut entries = Vec::new();
    for (family, counts) in [(Family::Char, char_counts), (Family::Word, word_counts)] {
        for (gram, count) in counts {
            if count >= config.min_total_count {
                let order = match family {
                    Family::Char => gram.chars().count() as u32,
                    Family::Word => gram.split(' ').count() as u32,
                };
                entries.push(VocabEntry {
                    family,
                    order,
                    gram,
                    count,
                });
            }
        }
    }
    Ok(Vocabulary::from_entries(config, entries))
}

/// Count the in-vocabulary grams of one document. Out-of-vocabulary grams are
/// dropped; lengths are recorded regardless of vocabulary hits.
pub fn vectorize(text: &str, vocab: &Vocabulary) -> SparseCountVector {
    let lower = text.to_lowercase();
    let char_len = lower.chars().count() as u32;
    let mut tf: HashMap<u32, u32> = HashMap::new();
    if let Some((lo, hi)) = vocab.config.char_orders {
        visit_char_ngrams(&lower, lo, hi, |_, gram| {
            if let Some(&j) = vocab.char_lookup.get(gram) {
                *tf.entry(j).or_insert(0) += 1;
            }
        });
    }
    let tokens = tokenize_lowered(&lower);
    let word_len = tokens.len() as u32;
    if let Some((lo, hi)) = vocab.config.word_orders {
        visit_word_ngrams(&tokens, lo, hi, |_, gram| {
            if let Some(&j) = vocab.word_lookup.get(&gram) {
                *tf.entry(j).or_insert(0) += 1;
            }
        });
    }
    let mut counts: Vec<(u32, u32)> = tf.into_iter().collect();
    counts.sort_unstable_by_key(|&(j, _)| j);
    SparseCountVector {
        counts,
        char_len,
        word_len,
    }
}

const VOCAB_MAGIC: &str = "# gramclass-vocab v1";

fn orders_line(name: &str, orders: Option<(u32, u32)>) -> String {
    match orders {
        Some((lo, hi)) => format!("# {name}_orders\t{lo}\t{hi}\n"),
        None => format!("# {name}_orders\toff\n"),
    }
}

/// Serialize as a header block followed by one
/// `family<TAB>order<TAB>gram<TAB>index<TAB>count` line per entry.
pub fn serialize_vocabulary(vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    out.push_str(VOCAB_MAGIC);
    out.push('\n');
    out.push_str(&orders_line("char", vocab.config.char_orders));
    out.push_str(&orders_line("word", vocab.config.word_orders));
    out.push_str(&format!("# min_total_count\t{}\n", vocab.config.min_total_count));
    for (i, entry) in vocab.entries.iter().enumerate() {
        if entry.gram.contains('\t') || entry.gram.contains('\n') || entry.gram.contains('\r') {
            return Err(Error::Input(format!(
                "gram {:?} contains a tab or line break and cannot be dumped",
                entry.gram
            )));
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            entry.family, entry.order, entry.gram, i, entry.count
        ));
    }
    Ok(out)
}

pub fn write_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<()> {
    let text = serialize_vocabulary(vocab)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_orders(line: &str, name: &str, path: &str, line_no: usize) -> Result<Option<(u32, u32)>> {
    let fields: Vec<&str> = line.split('\t').collect();
    match fields.as_slice() {
        [_, "off"] => Ok(None),
        [_, lo, hi] => {
            let lo = lo.parse().map_err(|_| Error::parse(path, line_no, "bad order"))?;
            let hi = hi.parse().map_err(|_| Error::parse(path, line_no, "bad order"))?;
            Ok(Some((lo, hi)))
        }
        _ => Err(Error::parse(path, line_no, format!("malformed {name}_orders header"))),
    }
}

pub fn parse_vocabulary(text: &str, path: &str) -> Result<Vocabulary> {
    let mut lines = text.lines().enumerate();
    let magic = lines.next().map(|(_, l)| l).unwrap_or("");
    if magic.trim_end_matches('\r') != VOCAB_MAGIC {
        return Err(Error::Version(format!(
            "{path}: expected vocabulary header {VOCAB_MAGIC:?}"
        )));
    }
    let mut char_orders = None;
    let mut word_orders = None;
    let mut min_total_count = None;
    let mut entries = Vec::new();
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if let Some(rest) = line.strip_prefix("# ") {
            if rest.starts_with("char_orders") {
                char_orders = Some(parse_orders(rest, "char", path, line_no)?);
            } else if rest.starts_with("word_orders") {
                word_orders = Some(parse_orders(rest, "word", path, line_no)?);
            } else if let Some(v) = rest.strip_prefix("min_total_count\t") {
                min_total_count =
                    Some(v.parse().map_err(|_| Error::parse(path, line_no, "bad min_total_count"))?);
            } else {
                return Err(Error::parse(path, line_no, format!("unknown header {line:?}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [family, order, gram, index, count] = fields.as_slice() else {
            return Err(Error::parse(path, line_no, "expected 5 tab-separated fields"));
        };
        let family: Family = family
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("unknown family {family:?}")))?;
        let order: u32 =
            order.parse().map_err(|_| Error::parse(path, line_no, "bad order"))?;
        let index: u32 =
            index.parse().map_err(|_| Error::parse(path, line_no, "bad index"))?;
        let count: u64 =
            count.parse().map_err(|_| Error::parse(path, line_no, "bad count"))?;
        if index as usize != entries.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("index {index} out of order, expected {}", entries.len()),
            ));
        }
        entries.push(VocabEntry {
            family,
            order,
            gram: gram.to_string(),
            count,
        });
    }
    let config = FeatureConfig {
        char_orders: char_orders
            .ok_or_else(|| Error::Input(format!("{path}: missing char_orders header")))?,
        word_orders: word_orders
            .ok_or_else(|| Error::Input(format!("{path}: missing word_orders header")))?,
        min_total_count: min_total_count
            .ok_or_else(|| Error::Input(format!("{path}: missing min_total_count header")))?,
    };
    config.validate()?;
    let vocab = Vocabulary::from_entries(config, entries.clone());
    if vocab.entries != entries {
        return Err(Error::Input(format!("{path}: entries not in canonical order")));
    }
    Ok(vocab)
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vocabulary(&text, &path.display().to_string())
}
