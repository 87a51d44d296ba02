//! BM25 term weighting with train-fitted corpus statistics, and L2
//! normalization of the weighted vectors.

use crate::error::{Error, Result};
use crate::ngrams::SparseCountVector;
use crate::scalar::{num, Scalar};
use std::path::Path;

pub const DEFAULT_K1: f64 = 2.0;
pub const DEFAULT_B: f64 = 0.75;

/// Corpus-level quantities BM25 needs: document count, per-feature document
/// frequencies, and the average document length of each feature family.
///
/// `df` is dense over the full feature space; 0 marks a feature the fit
/// corpus never produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats<F> {
    n_docs: u32,
    df: Vec<u32>,
    avg_char_len: F,
    avg_word_len: F,
    k1: F,
    b: F,
    n_char_features: u32,
}

impl<F: Scalar> CorpusStats<F> {
    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn n_features(&self) -> u32 {
        self.df.len() as u32
    }

    pub fn n_char_features(&self) -> u32 {
        self.n_char_features
    }

    pub fn df(&self, feature: u32) -> u32 {
        self.df[feature as usize]
    }

    pub fn avg_char_len(&self) -> F {
        self.avg_char_len
    }

    pub fn avg_word_len(&self) -> F {
        self.avg_word_len
    }

    pub fn k1(&self) -> F {
        self.k1
    }

    pub fn b(&self) -> F {
        self.b
    }
}

/// A document's feature weights as sorted (index, value) pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedVector<F> {
    pub weights: Vec<(u32, F)>,
}

impl<F: Scalar> WeightedVector<F> {
    pub fn norm(&self) -> F {
        self.weights
            .iter()
            .map(|&(_, w)| w * w)
            .sum::<F>()
            .sqrt()
    }

    pub fn dot_dense(&self, dense: &[F]) -> F {
        self.weights
            .iter()
            .map(|&(j, w)| w * dense[j as usize])
            .sum()
    }
}

fn check_params<F: Scalar>(k1: F, b: F) -> Result<()> {
    if !(k1 > F::zero()) {
        return Err(Error::Config(format!("k1 must be positive, got {k1}")));
    }
    if !(b >= F::zero() && b <= F::one()) {
        return Err(Error::Config(format!("b must lie in [0, 1], got {b}")));
    }
    Ok(())
}

/// Count document frequencies and average lengths over a training corpus.
///
/// `n_features` is the full feature-space width and `n_char_features` the
/// char/word boundary, both as reported by the vocabulary.
pub fn fit_stats<F: Scalar>(
    vectors: &[SparseCountVector],
    n_features: u32,
    n_char_features: u32,
    k1: F,
    b: F,
) -> Result<CorpusStats<F>> {
    check_params(k1, b)?;
    if vectors.is_empty() {
        return Err(Error::Input("cannot fit corpus statistics on zero documents".into()));
    }
    if n_char_features > n_features {
        return Err(Error::Input(format!(
            "char feature count {n_char_features} exceeds feature space {n_features}"
        )));
    }
    let mut df = vec![0u32; n_features as usize];
    let mut char_total = 0u64;
    let mut word_total = 0u64;
    for v in vectors {
        char_total += v.char_len as u64;
        word_total += v.word_len as u64;
        for &(j, tf) in &v.counts {
            if j >= n_features {
                return Err(Error::Input(format!(
                    "feature index {j} out of range for feature space {n_features}"
                )));
            }
            if tf >= 1 {
                df[j as usize] += 1;
            }
        }
    }
    let n = num::<F>(vectors.len() as f64);
    Ok(CorpusStats {
        n_docs: vectors.len() as u32,
        df,
        avg_char_len: num::<F>(char_total as f64) / n,
        avg_word_len: num::<F>(word_total as f64) / n,
        k1,
        b,
        n_char_features,
    })
}

/// BM25 weight of one feature occurrence:
/// tf / (tf + k1·(1 − b + b·dl/avg_dl)) · ln((N − df + 0.5)/(df + 0.5)).
///
/// The IDF factor may be negative (df > N/2); it is kept as-is.
pub fn bm25_weight<F: Scalar>(
    tf: u32,
    df: u32,
    dl: F,
    avg_dl: F,
    n_docs: u32,
    k1: F,
    b: F,
) -> Result<F> {
    check_params(k1, b)?;
    if !(avg_dl > F::zero()) {
        return Err(Error::Input(format!("average document length must be positive, got {avg_dl}")));
    }
    if dl < F::zero() {
        return Err(Error::Input(format!("document length must be nonnegative, got {dl}")));
    }
    if df < 1 || df > n_docs {
        return Err(Error::Input(format!(
            "document frequency {df} outside [1, {n_docs}]"
        )));
    }
    if tf == 0 {
        return Ok(F::zero());
    }
    let tf = num::<F>(tf as f64);
    let n = num::<F>(n_docs as f64);
    let dff = num::<F>(df as f64);
    let half = num::<F>(0.5);
    let saturation = tf / (tf + k1 * (F::one() - b + b * dl / avg_dl));
    let idf = ((n - dff + half) / (dff + half)).ln();
    Ok(saturation * idf)
}

/// BM25-weight every stored count of a document. Char-family features use
/// char_len against avg_char_len, word-family features word_len against
/// avg_word_len.
pub fn transform<F: Scalar>(v: &SparseCountVector, stats: &CorpusStats<F>) -> Result<WeightedVector<F>> {
    let mut weights = Vec::with_capacity(v.counts.len());
    for &(j, tf) in &v.counts {
        if j >= stats.n_features() || stats.df[j as usize] == 0 {
            return Err(Error::Input(format!(
                "feature index {j} unknown to the fitted corpus statistics"
            )));
        }
        let (dl, avg_dl) = if j < stats.n_char_features {
            (num::<F>(v.char_len as f64), stats.avg_char_len)
        } else {
            (num::<F>(v.word_len as f64), stats.avg_word_len)
        };
        let w = bm25_weight(tf, stats.df[j as usize], dl, avg_dl, stats.n_docs, stats.k1, stats.b)?;
        weights.push((j, w));
    }
    Ok(WeightedVector { weights })
}

/// Scale to unit Euclidean norm. The all-zero vector is returned unchanged.
pub fn l2_normalize<F: Scalar>(mut v: WeightedVector<F>) -> WeightedVector<F> {
    let norm = v.norm();
    if norm > F::zero() {
        for (_, w) in &mut v.weights {
            *w /= norm;
        }
    }
    v
}

const STATS_MAGIC: &str = "# gramclass-stats v1";

/// Serialize as a header block followed by `index<TAB>df` lines for every
/// feature the fit corpus produced.
pub fn serialize_stats<F: Scalar>(stats: &CorpusStats<F>) -> String {
    let mut out = String::new();
    out.push_str(STATS_MAGIC);
    out.push('\n');
    out.push_str(&format!("# n_docs\t{}\n", stats.n_docs));
    out.push_str(&format!("# k1\t{}\n", stats.k1));
    out.push_str(&format!("# b\t{}\n", stats.b));
    out.push_str(&format!("# avg_char_len\t{}\n", stats.avg_char_len));
    out.push_str(&format!("# avg_word_len\t{}\n", stats.avg_word_len));
    out.push_str(&format!("# n_features\t{}\n", stats.df.len()));
    out.push_str(&format!("# n_char_features\t{}\n", stats.n_char_features));
    for (j, &df) in stats.df.iter().enumerate() {
        if df > 0 {
            out.push_str(&format!("{j}\t{df}\n"));
        }
    }
    out
}

pub fn write_stats<F: Scalar>(stats: &CorpusStats<F>, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_stats(stats)).map_err(|e| Error::io(path, e))
}

pub fn parse_stats<F: Scalar>(text: &str, path: &str) -> Result<CorpusStats<F>> {
    let mut lines = text.lines().enumerate();
    let magic = lines.next().map(|(_, l)| l).unwrap_or("");
    if magic.trim_end_matches('\r') != STATS_MAGIC {
        return Err(Error::Version(format!(
            "{path}: expected statistics header {STATS_MAGIC:?}"
        )));
    }
    let mut n_docs: Option<u32> = None;
    let mut k1: Option<F> = None;
    let mut b: Option<F> = None;
    let mut avg_char_len: Option<F> = None;
    let mut avg_word_len: Option<F> = None;
    let mut n_features: Option<u32> = None;
    let mut n_char_features: Option<u32> = None;
    let mut df_lines: Vec<(u32, u32)> = Vec::new();
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if let Some(rest) = line.strip_prefix("# ") {
            let Some((key, value)) = rest.split_once('\t') else {
                return Err(Error::parse(path, line_no, format!("malformed header {line:?}")));
            };
            let bad = |what: &str| Error::parse(path, line_no, format!("bad {what} {value:?}"));
            match key {
                "n_docs" => n_docs = Some(value.parse().map_err(|_| bad("n_docs"))?),
                "k1" => k1 = Some(parse_scalar(value).ok_or_else(|| bad("k1"))?),
                "b" => b = Some(parse_scalar(value).ok_or_else(|| bad("b"))?),
                "avg_char_len" => {
                    avg_char_len = Some(parse_scalar(value).ok_or_else(|| bad("avg_char_len"))?)
                }
                "avg_word_len" => {
                    avg_word_len = Some(parse_scalar(value).ok_or_else(|| bad("avg_word_len"))?)
                }
                "n_features" => n_features = Some(value.parse().map_err(|_| bad("n_features"))?),
                "n_char_features" => {
                    n_char_features = Some(value.parse().map_err(|_| bad("n_char_features"))?)
                }
                _ => return Err(Error::parse(path, line_no, format!("unknown header {line:?}"))),
            }
            continue;
        }
        let Some((j, df)) = line.split_once('\t') else {
            return Err(Error::parse(path, line_no, "expected index<TAB>df"));
        };
        let j: u32 = j.parse().map_err(|_| Error::parse(path, line_no, "bad feature index"))?;
        let df: u32 = df.parse().map_err(|_| Error::parse(path, line_no, "bad document frequency"))?;
        df_lines.push((j, df));
    }
    let missing = |what: &str| Error::Input(format!("{path}: missing {what} header"));
    let n_docs = n_docs.ok_or_else(|| missing("n_docs"))?;
    let n_features = n_features.ok_or_else(|| missing("n_features"))?;
    let mut df = vec![0u32; n_features as usize];
    for (j, value) in df_lines {
        if j >= n_features {
            return Err(Error::Input(format!(
                "{path}: feature index {j} outside declared space {n_features}"
            )));
        }
        if value < 1 || value > n_docs {
            return Err(Error::Input(format!(
                "{path}: document frequency {value} for feature {j} outside [1, {n_docs}]"
            )));
        }
        df[j as usize] = value;
    }
    let stats = CorpusStats {
        n_docs,
        df,
        avg_char_len: avg_char_len.ok_or_else(|| missing("avg_char_len"))?,
        avg_word_len: avg_word_len.ok_or_else(|| missing("avg_word_len"))?,
        k1: k1.ok_or_else(|| missing("k1"))?,
        b: b.ok_or_else(|| missing("b"))?,
        n_char_features: n_char_features.ok_or_else(|| missing("n_char_features"))?,
    };
    check_params(stats.k1, stats.b)?;
    if stats.n_char_features > n_features {
        return Err(Error::Input(format!(
            "{path}: char feature count exceeds feature space"
        )));
    }
    Ok(stats)
}

fn parse_scalar<F: Scalar>(s: &str) -> Option<F> {
    s.parse::<f64>().ok().and_then(F::from_f64)
}

pub fn load_stats<F: Scalar>(path: &Path) -> Result<CorpusStats<F>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stats(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngrams::{build_vocabulary, vectorize, FeatureConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn counts(pairs: &[(u32, u32)], char_len: u32, word_len: u32) -> SparseCountVector {
        SparseCountVector {
            counts: pairs.to_vec(),
            char_len,
            word_len,
        }
    }

    #[test]
    fn fit_counts_document_frequency() {
        let docs = [counts(&[(0, 3)], 2, 1), counts(&[(0, 1), (1, 2)], 4, 2)];
        let stats = fit_stats::<f64>(&docs, 3, 2, 2.0, 0.75).unwrap();
        assert_eq!(stats.n_docs(), 2);
        assert_eq!(stats.df(0), 2);
        assert_eq!(stats.df(1), 1);
        assert_eq!(stats.df(2), 0);
        assert_eq!(stats.avg_char_len(), 3.0);
        assert_eq!(stats.avg_word_len(), 1.5);
    }

    #[test]
    fn fit_includes_empty_documents_in_averages() {
        let docs = [counts(&[(0, 1)], 6, 3), counts(&[], 0, 0)];
        let stats = fit_stats::<f64>(&docs, 1, 1, 2.0, 0.75).unwrap();
        assert_eq!(stats.avg_char_len(), 3.0);
        assert_eq!(stats.avg_word_len(), 1.5);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        assert!(fit_stats::<f64>(&[], 1, 0, 2.0, 0.75).is_err());
        let doc = [counts(&[(5, 1)], 1, 1)];
        assert!(fit_stats::<f64>(&doc, 3, 0, 2.0, 0.75).is_err());
        let doc = [counts(&[(0, 1)], 1, 1)];
        assert!(fit_stats::<f64>(&doc, 3, 4, 2.0, 0.75).is_err());
        assert!(fit_stats::<f64>(&doc, 3, 0, 0.0, 0.75).is_err());
        assert!(fit_stats::<f64>(&doc, 3, 0, 2.0, 1.5).is_err());
    }

    #[test]
    fn fit_matches_brute_force_recount() {
        let texts = ["the poor stay poor", "poor towns", "help the towns"];
        let vocab = build_vocabulary(texts, FeatureConfig::default()).unwrap();
        let vectors: Vec<_> = texts.iter().map(|t| vectorize(t, &vocab)).collect();
        let stats =
            fit_stats::<f64>(&vectors, vocab.len() as u32, vocab.n_char_features(), 2.0, 0.75)
                .unwrap();
        for j in 0..vocab.len() as u32 {
            let recount = vectors
                .iter()
                .filter(|v| v.counts.iter().any(|&(i, tf)| i == j && tf >= 1))
                .count() as u32;
            assert_eq!(stats.df(j), recount, "feature {j}");
        }
    }

    #[test]
    fn bm25_zero_tf_is_exactly_zero() {
        assert_eq!(bm25_weight::<f64>(0, 1, 7.0, 3.0, 10, 2.0, 0.75).unwrap(), 0.0);
    }

    #[test]
    fn bm25_uniform_feature_has_zero_idf() {
        let w = bm25_weight::<f64>(2, 1, 5.0, 5.0, 2, 2.0, 0.75).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn bm25_hand_value() {
        let w = bm25_weight::<f64>(1, 1, 5.0, 5.0, 10, 2.0, 0.75).unwrap();
        assert_abs_diff_eq!(w, 0.615_275_563_499_443_6, epsilon = 1e-12);
        assert_abs_diff_eq!(w, (1.0 / 3.0) * (9.5f64 / 1.5).ln(), epsilon = 1e-15);
    }

    #[test]
    fn bm25_average_length_reduces_saturation() {
        let w = bm25_weight::<f64>(3, 2, 8.0, 8.0, 20, 2.0, 0.75).unwrap();
        let want = (3.0 / (3.0 + 2.0)) * ((20.0 - 2.0 + 0.5) / 2.5f64).ln();
        assert_eq!(w, want);
    }

    #[test]
    fn bm25_negative_idf_is_kept() {
        let w = bm25_weight::<f64>(1, 9, 5.0, 5.0, 10, 2.0, 0.75).unwrap();
        assert!(w < 0.0);
    }

    #[test]
    fn bm25_rejects_bad_inputs() {
        assert!(bm25_weight::<f64>(1, 1, 5.0, 0.0, 10, 2.0, 0.75).is_err());
        assert!(bm25_weight::<f64>(1, 0, 5.0, 5.0, 10, 2.0, 0.75).is_err());
        assert!(bm25_weight::<f64>(1, 11, 5.0, 5.0, 10, 2.0, 0.75).is_err());
        assert!(bm25_weight::<f64>(1, 1, -1.0, 5.0, 10, 2.0, 0.75).is_err());
    }

    #[test]
    fn transform_empty_is_empty() {
        let stats = fit_stats::<f64>(&[counts(&[(0, 1)], 2, 1)], 2, 1, 2.0, 0.75).unwrap();
        let got = transform(&counts(&[], 0, 0), &stats).unwrap();
        assert!(got.weights.is_empty());
    }

    #[test]
    fn transform_is_composition_of_bm25() {
        let docs = [counts(&[(0, 2)], 4, 2), counts(&[(0, 1)], 2, 1)];
        let stats = fit_stats::<f64>(&docs, 1, 1, 2.0, 0.75).unwrap();
        let got = transform(&docs[0], &stats).unwrap();
        let direct = bm25_weight(2, 2, 4.0, 3.0, 2, 2.0, 0.75).unwrap();
        assert_eq!(got.weights, vec![(0, direct)]);
    }

    #[test]
    fn transform_uses_per_family_lengths() {
        // feature 0 is char-family, feature 1 word-family
        let docs = [counts(&[(0, 1), (1, 1)], 10, 2), counts(&[(0, 1)], 2, 4)];
        let stats = fit_stats::<f64>(&docs, 2, 1, 2.0, 0.75).unwrap();
        let got = transform(&docs[0], &stats).unwrap();
        let char_w = bm25_weight(1, 2, 10.0, 6.0, 2, 2.0, 0.75).unwrap();
        let word_w = bm25_weight(1, 1, 2.0, 3.0, 2, 2.0, 0.75).unwrap();
        assert_eq!(got.weights, vec![(0, char_w), (1, word_w)]);
        assert_ne!(char_w, word_w);
    }

    #[test]
    fn transform_rejects_unknown_feature() {
        let stats = fit_stats::<f64>(&[counts(&[(0, 1)], 2, 1)], 2, 1, 2.0, 0.75).unwrap();
        assert!(transform(&counts(&[(1, 1)], 2, 1), &stats).is_err());
        assert!(transform(&counts(&[(7, 1)], 2, 1), &stats).is_err());
    }

    #[test]
    fn transform_matches_dense_reimplementation() {
        let texts = [
            "the poor stay poor and hope",
            "poor towns sadly",
            "help the towns now",
            "hope helps nobody",
        ];
        let vocab = build_vocabulary(texts, FeatureConfig::default()).unwrap();
        let vectors: Vec<_> = texts.iter().map(|t| vectorize(t, &vocab)).collect();
        let n = vocab.len() as u32;
        let n_char = vocab.n_char_features();
        let stats = fit_stats::<f64>(&vectors, n, n_char, 2.0, 0.75).unwrap();

        // dense recomputation straight from the definitions
        let n_docs = texts.len() as f64;
        let mut dense_df = vec![0.0f64; n as usize];
        for v in &vectors {
            for &(j, _) in &v.counts {
                dense_df[j as usize] += 1.0;
            }
        }
        let avg_char: f64 = vectors.iter().map(|v| v.char_len as f64).sum::<f64>() / n_docs;
        let avg_word: f64 = vectors.iter().map(|v| v.word_len as f64).sum::<f64>() / n_docs;
        for v in &vectors {
            let got = transform(v, &stats).unwrap();
            let mut dense = vec![0.0f64; n as usize];
            for &(j, tf) in &v.counts {
                let (dl, avg) = if j < n_char {
                    (v.char_len as f64, avg_char)
                } else {
                    (v.word_len as f64, avg_word)
                };
                let tf = tf as f64;
                let df = dense_df[j as usize];
                dense[j as usize] = tf / (tf + 2.0 * (1.0 - 0.75 + 0.75 * dl / avg))
                    * ((n_docs - df + 0.5) / (df + 0.5)).ln();
            }
            for &(j, w) in &got.weights {
                assert_abs_diff_eq!(w, dense[j as usize], epsilon = 1e-12);
                dense[j as usize] = 0.0;
            }
            assert!(dense.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn normalize_three_four_five() {
        let v = WeightedVector {
            weights: vec![(2, 3.0f64), (9, 4.0)],
        };
        let got = l2_normalize(v);
        assert_abs_diff_eq!(got.weights[0].1, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(got.weights[1].1, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn normalize_zero_vector_unchanged() {
        let v = WeightedVector::<f64>::default();
        assert_eq!(l2_normalize(v.clone()), v);
        let zero = WeightedVector {
            weights: vec![(0, 0.0f64)],
        };
        assert_eq!(l2_normalize(zero.clone()), zero);
    }

    #[test]
    fn stats_dump_round_trips() {
        let docs = [counts(&[(0, 3), (2, 1)], 2, 1), counts(&[(0, 1)], 4, 2)];
        let stats = fit_stats::<f64>(&docs, 4, 2, 2.0, 0.75).unwrap();
        let text = serialize_stats(&stats);
        let reloaded: CorpusStats<f64> = parse_stats(&text, "mem").unwrap();
        assert_eq!(reloaded, stats);
    }

    #[test]
    fn stats_parse_rejects_corruption() {
        let docs = [counts(&[(0, 1)], 2, 1)];
        let stats = fit_stats::<f64>(&docs, 1, 1, 2.0, 0.75).unwrap();
        let good = serialize_stats(&stats);
        assert!(parse_stats::<f64>(&good.replace("stats v1", "stats v2"), "mem").is_err());
        assert!(parse_stats::<f64>(&good.replace("# n_docs\t1\n", ""), "mem").is_err());
        assert!(parse_stats::<f64>(&good.replace("0\t1", "9\t1"), "mem").is_err());
        assert!(parse_stats::<f64>(&good.replace("0\t1", "0\t5"), "mem").is_err());
    }

    proptest! {
        #[test]
        fn bm25_magnitude_nondecreasing_in_tf(
            tf in 1u32..50,
            df in 1u32..20,
            dl in 1.0f64..40.0,
            avg_dl in 1.0f64..40.0,
        ) {
            let n_docs = 20;
            let lo = bm25_weight::<f64>(tf, df, dl, avg_dl, n_docs, 2.0, 0.75).unwrap();
            let hi = bm25_weight::<f64>(tf + 1, df, dl, avg_dl, n_docs, 2.0, 0.75).unwrap();
            prop_assert!(hi.abs() >= lo.abs() - 1e-15);
            prop_assert!(lo.signum() == hi.signum() || lo == 0.0);
        }

        #[test]
        fn normalize_is_idempotent_and_unit(
            raw in proptest::collection::vec(-10.0f64..10.0, 1..8),
        ) {
            let v = WeightedVector {
                weights: raw.iter().enumerate().map(|(j, &w)| (j as u32, w)).collect(),
            };
            let once = l2_normalize(v);
            let twice = l2_normalize(once.clone());
            if once.norm() > 0.0 {
                prop_assert!((once.norm() - 1.0).abs() < 1e-12);
            }
            for (a, b) in once.weights.iter().zip(&twice.weights) {
                prop_assert!((a.1 - b.1).abs() < 1e-12);
            }
        }
    }
}
