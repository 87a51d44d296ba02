//! Deterministic synthetic corpora with planted lexical markers, for tests
//! and end-to-end acceptance runs.

use crate::corpus::ParagraphRecord;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Recipe for a labeled corpus. Each category plants one of its marker
/// phrases into exactly round(n_docs · positive_rate) documents; all other
/// tokens come from `fillers`.
///
/// Marker phrases are multi-token so word n-grams see them, and should use
/// character sequences absent from the fillers so char n-grams do too.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub positive_rate: f64,
    /// One list of marker phrases per category.
    pub markers: Vec<Vec<String>>,
    pub fillers: Vec<String>,
    /// Inclusive range of filler tokens per document.
    pub doc_len_range: (usize, usize),
    pub seed: u64,
}

const DEFAULT_FILLERS: [&str; 40] = [
    "the", "of", "and", "to", "a", "in", "that", "it", "was", "for", "on", "with", "as", "at",
    "by", "from", "up", "about", "into", "over", "after", "town", "river", "market", "school",
    "garden", "report", "summer", "winter", "music", "window", "bridge", "letter", "morning",
    "evening", "people", "story", "number", "water", "light",
];

const TASK2_MARKERS: [[&str; 2]; 7] = [
    ["axquv blorfa", "blorfa axquv"],
    ["bexqiz snerkb", "snerkb bexqiz"],
    ["cyxwuj frondc", "frondc cyxwuj"],
    ["dzqovy plimpd", "plimpd dzqovy"],
    ["efxqal crunke", "crunke efxqal"],
    ["fyzqom brashf", "brashf fyzqom"],
    ["gwxquc droneg", "droneg gwxquc"],
];

impl SynthSpec {
    /// Single-category corpus with the default fillers and markers.
    pub fn task1(n_docs: usize, positive_rate: f64, seed: u64) -> Self {
        SynthSpec {
            n_docs,
            positive_rate,
            markers: vec![vec!["vexquz jybber".into(), "jybber vexquz gromp".into()]],
            fillers: DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect(),
            doc_len_range: (8, 24),
            seed,
        }
    }

    /// Seven-category corpus with disjoint marker phrases per category.
    pub fn task2(n_docs: usize, positive_rate: f64, seed: u64) -> Self {
        SynthSpec {
            markers: TASK2_MARKERS
                .iter()
                .map(|phrases| phrases.iter().map(|s| s.to_string()).collect())
                .collect(),
            ..SynthSpec::task1(n_docs, positive_rate, seed)
        }
    }

    pub fn n_positive_per_category(&self) -> usize {
        (self.n_docs as f64 * self.positive_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 {
            return Err(Error::Config("n_docs must be positive".into()));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::Config(format!(
                "positive_rate must lie strictly between 0 and 1, got {}",
                self.positive_rate
            )));
        }
        if self.markers.is_empty() || self.markers.iter().any(|m| m.is_empty()) {
            return Err(Error::Config("every category needs at least one marker phrase".into()));
        }
        if self.fillers.is_empty() {
            return Err(Error::Config("filler vocabulary is empty".into()));
        }
        let fillers: HashSet<&str> = self.fillers.iter().map(|s| s.as_str()).collect();
        for phrase in self.markers.iter().flatten() {
            if phrase.split_whitespace().next().is_none() {
                return Err(Error::Config(format!("blank marker phrase {phrase:?}")));
            }
            for token in phrase.split_whitespace() {
                if fillers.contains(token) {
                    return Err(Error::Config(format!(
                        "marker token {token:?} also appears in the fillers"
                    )));
                }
            }
        }
        let (lo, hi) = self.doc_len_range;
        if lo < 1 || lo > hi {
            return Err(Error::Config(format!(
                "doc_len_range must satisfy 1 <= lo <= hi, got {lo}..={hi}"
            )));
        }
        let n_pos = self.n_positive_per_category();
        if n_pos == 0 || n_pos >= self.n_docs {
            return Err(Error::Config(format!(
                "positive_rate {} rounds to {n_pos} positives out of {} documents",
                self.positive_rate, self.n_docs
            )));
        }
        Ok(())
    }
}

/// Generate the corpus described by `spec`. Positive documents contain one
/// marker phrase per positive category; negatives contain no marker tokens.
///
/// The binary label is the union of the category labels; the seven-column
/// category labels are filled in when the spec has exactly 7 categories.
pub fn generate(spec: &SynthSpec) -> Result<Vec<ParagraphRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pos = spec.n_positive_per_category();

    let mut category_of: Vec<Vec<usize>> = vec![Vec::new(); spec.n_docs];
    for (cat, _) in spec.markers.iter().enumerate() {
        let mut docs: Vec<usize> = (0..spec.n_docs).collect();
        docs.shuffle(&mut rng);
        for &doc in &docs[..n_pos] {
            category_of[doc].push(cat);
        }
    }

    let (lo, hi) = spec.doc_len_range;
    let mut records = Vec::with_capacity(spec.n_docs);
    for (i, cats) in category_of.iter().enumerate() {
        let len = rng.gen_range(lo..=hi);
        let mut tokens: Vec<String> = (0..len)
            .map(|_| spec.fillers.choose(&mut rng).unwrap().clone())
            .collect();
        for &cat in cats {
            let phrase = spec.markers[cat].choose(&mut rng).unwrap();
            let at = rng.gen_range(0..=tokens.len());
            tokens.splice(at..at, phrase.split_whitespace().map(str::to_string));
        }
        let task2_labels = (spec.markers.len() == 7).then(|| {
            let mut labels = [false; 7];
            for &cat in cats {
                labels[cat] = true;
            }
            labels
        });
        records.push(ParagraphRecord {
            par_id: format!("s{i:05}"),
            art_id: format!("@syn{i:05}"),
            keyword: "synthetic".to_string(),
            country: "xx".to_string(),
            text: tokens.join(" "),
            task1_label: Some(!cats.is_empty()),
            task2_labels,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{confusion, precision_recall_f1};

    fn marker_tokens(spec: &SynthSpec) -> HashSet<String> {
        spec.markers
            .iter()
            .flatten()
            .flat_map(|p| p.split_whitespace().map(str::to_string))
            .collect()
    }

    #[test]
    fn exact_positive_count() {
        let spec = SynthSpec::task1(500, 0.1, 3);
        let records = generate(&spec).unwrap();
        assert_eq!(records.len(), 500);
        let pos = records.iter().filter(|r| r.task1_label == Some(true)).count();
        assert_eq!(pos, 50);
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec::task1(60, 0.2, 9);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 10, ..spec.clone() };
        assert_ne!(generate(&other).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn markers_only_in_positives() {
        let spec = SynthSpec::task1(200, 0.15, 1);
        let markers = marker_tokens(&spec);
        for rec in generate(&spec).unwrap() {
            let has_marker = rec.text.split_whitespace().any(|t| markers.contains(t));
            assert_eq!(has_marker, rec.task1_label == Some(true), "{}", rec.par_id);
        }
    }

    #[test]
    fn marker_presence_oracle_scores_perfectly() {
        let spec = SynthSpec::task1(150, 0.1, 7);
        let markers = marker_tokens(&spec);
        let records = generate(&spec).unwrap();
        let preds: Vec<bool> = records
            .iter()
            .map(|r| r.text.split_whitespace().any(|t| markers.contains(t)))
            .collect();
        let golds: Vec<bool> = records.iter().map(|r| r.task1_label.unwrap()).collect();
        let c = confusion(&preds, &golds).unwrap();
        let (_, _, f1) = precision_recall_f1::<f64>(&c);
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn task2_categories_are_disjointly_marked() {
        let spec = SynthSpec::task2(300, 0.12, 5);
        let records = generate(&spec).unwrap();
        let n_pos = spec.n_positive_per_category();
        for cat in 0..7 {
            let tokens: HashSet<String> = spec.markers[cat]
                .iter()
                .flat_map(|p| p.split_whitespace().map(str::to_string))
                .collect();
            let mut count = 0;
            for rec in &records {
                let has = rec.text.split_whitespace().any(|t| tokens.contains(t));
                let labeled = rec.task2_labels.unwrap()[cat];
                assert_eq!(has, labeled, "category {cat} in {}", rec.par_id);
                count += labeled as usize;
            }
            assert_eq!(count, n_pos, "category {cat}");
        }
        // binary label is the union of the category labels
        for rec in &records {
            assert_eq!(
                rec.task1_label.unwrap(),
                rec.task2_labels.unwrap().iter().any(|&l| l)
            );
        }
    }

    #[test]
    fn task2_allows_multi_label_overlap() {
        let spec = SynthSpec::task2(80, 0.4, 2);
        let records = generate(&spec).unwrap();
        let overlapping = records
            .iter()
            .filter(|r| r.task2_labels.unwrap().iter().filter(|&&l| l).count() >= 2)
            .count();
        assert!(overlapping > 0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&SynthSpec::task1(100, 0.0, 1)).is_err());
        assert!(generate(&SynthSpec::task1(100, 1.0, 1)).is_err());
        assert!(generate(&SynthSpec::task1(100, 0.001, 1)).is_err());
        assert!(generate(&SynthSpec::task1(0, 0.1, 1)).is_err());

        let mut clash = SynthSpec::task1(100, 0.1, 1);
        clash.fillers.push("jybber".into());
        assert!(generate(&clash).is_err());

        let mut bad_len = SynthSpec::task1(100, 0.1, 1);
        bad_len.doc_len_range = (9, 3);
        assert!(generate(&bad_len).is_err());

        let mut no_fillers = SynthSpec::task1(100, 0.1, 1);
        no_fillers.fillers.clear();
        assert!(generate(&no_fillers).is_err());
    }
}
