//! TSV corpus ingestion, labeled paragraph records, and deterministic
//! stratified splits.

use crate::error::{Error, Result};
use crate::scalar::{num, Scalar};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;

pub const TASK2_CATEGORIES: [&str; 7] = ["a", "b", "c", "d", "e", "f", "g"];

/// One corpus row. Text is preserved verbatim; lowercasing happens during
/// feature extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParagraphRecord {
    pub par_id: String,
    pub art_id: String,
    pub keyword: String,
    pub country: String,
    pub text: String,
    pub task1_label: Option<bool>,
    pub task2_labels: Option<[bool; 7]>,
}

/// Column layout of a TSV corpus file.
///
/// All layouts share the first five columns (par_id, art_id, keyword,
/// country, text). Task1 adds a 0/1 label; Task2 adds the 0/1 label plus
/// seven 0/1 category columns a-g.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Task1,
    Task2,
    Unlabeled,
}

impl CorpusFormat {
    fn columns(self) -> usize {
        match self {
            CorpusFormat::Unlabeled => 5,
            CorpusFormat::Task1 => 6,
            CorpusFormat::Task2 => 13,
        }
    }
}

fn parse_binary(field: &str, path: &str, line: usize, what: &str) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(
            path,
            line,
            format!("{what} must be 0 or 1, got {other:?}"),
        )),
    }
}

/// Parse TSV corpus text. Lines are numbered from 1 for error reporting.
pub fn parse_corpus(text: &str, format: CorpusFormat, path: &str) -> Result<Vec<ParagraphRecord>> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != format.columns() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} columns, found {}", format.columns(), fields.len()),
            ));
        }
        let par_id = fields[0].to_string();
        if par_id.is_empty() {
            return Err(Error::parse(path, line_no, "empty par_id"));
        }
        if let Some(first) = seen.insert(par_id.clone(), line_no) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate par_id {par_id:?} (first seen on line {first})"),
            ));
        }
        let task1_label = match format {
            CorpusFormat::Unlabeled => None,
            _ => Some(parse_binary(fields[5], path, line_no, "label")?),
        };
        let task2_labels = match format {
            CorpusFormat::Task2 => {
                let mut labels = [false; 7];
                for (slot, (cat, field)) in labels
                    .iter_mut()
                    .zip(TASK2_CATEGORIES.iter().zip(&fields[6..13]))
                {
                    *slot = parse_binary(field, path, line_no, &format!("category {cat}"))?;
                }
                Some(labels)
            }
            _ => None,
        };
        records.push(ParagraphRecord {
            par_id,
            art_id: fields[1].to_string(),
            keyword: fields[2].to_string(),
            country: fields[3].to_string(),
            text: fields[4].to_string(),
            task1_label,
            task2_labels,
        });
    }
    Ok(records)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<ParagraphRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, format, &path.display().to_string())
}

/// Serialize records back to the TSV layout of `format`.
///
/// Errors if a record lacks the labels the format requires, or if a field
/// contains a tab or newline that would corrupt the layout.
pub fn serialize_corpus(records: &[ParagraphRecord], format: CorpusFormat) -> Result<String> {
    let mut out = String::new();
    for rec in records {
        for field in [&rec.par_id, &rec.art_id, &rec.keyword, &rec.country, &rec.text] {
            if field.contains('\t') || field.contains('\n') || field.contains('\r') {
                return Err(Error::Input(format!(
                    "record {:?}: field contains a tab or line break",
                    rec.par_id
                )));
            }
        }
        out.push_str(&rec.par_id);
        for field in [&rec.art_id, &rec.keyword, &rec.country, &rec.text] {
            out.push('\t');
            out.push_str(field);
        }
        if format != CorpusFormat::Unlabeled {
            let label = rec.task1_label.ok_or_else(|| {
                Error::Input(format!("record {:?} has no binary label", rec.par_id))
            })?;
            out.push('\t');
            out.push(if label { '1' } else { '0' });
        }
        if format == CorpusFormat::Task2 {
            let labels = rec.task2_labels.ok_or_else(|| {
                Error::Input(format!("record {:?} has no category labels", rec.par_id))
            })?;
            for l in labels {
                out.push('\t');
                out.push(if l { '1' } else { '0' });
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_corpus(records: &[ParagraphRecord], format: CorpusFormat, path: &Path) -> Result<()> {
    let text = serialize_corpus(records, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Fraction of positives in a nonempty label sequence.
pub fn positive_rate<F: Scalar>(labels: &[bool]) -> Result<F> {
    if labels.is_empty() {
        return Err(Error::Input("positive rate of an empty sequence".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok(num::<F>(pos as f64) / num::<F>(labels.len() as f64))
}

/// Assignment of instances to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<u32>,
    k: u32,
    seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn fold_of(&self, instance: usize) -> u32 {
        self.fold_of[instance]
    }

    pub fn assignments(&self) -> &[u32] {
        &self.fold_of
    }

    /// Instance indices held out by `fold`, in corpus order.
    pub fn test_indices(&self, fold: u32) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Instance indices of the k-1 training folds, in corpus order.
    pub fn train_indices(&self, fold: u32) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Deterministic stratified k-fold split of a binary label sequence.
///
/// Fold sizes differ by at most one, and so do per-fold positive counts.
pub fn stratified_kfold(labels: &[bool], k: u32, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Input(format!("need at least 2 folds, got {k}")));
    }
    let mut positives: Vec<usize> = Vec::new();
    let mut negatives: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l {
            positives.push(i);
        } else {
            negatives.push(i);
        }
    }
    for (class, members) in [("positive", &positives), ("negative", &negatives)] {
        if (members.len() as u32) < k {
            return Err(Error::Input(format!(
                "{class} class has {} members, cannot fill {k} folds",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    // One continuous round-robin deal over both classes keeps total fold
    // sizes within one of each other while stratifying positives.
    let mut fold_of = vec![0u32; labels.len()];
    for (counter, &i) in positives.iter().chain(&negatives).enumerate() {
        fold_of[i] = counter as u32 % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

/// Serialize a fold assignment as `par_id<TAB>fold_id` lines.
pub fn serialize_folds(records: &[ParagraphRecord], folds: &FoldAssignment) -> Result<String> {
    if records.len() != folds.len() {
        return Err(Error::Input(format!(
            "fold assignment covers {} instances, corpus has {}",
            folds.len(),
            records.len()
        )));
    }
    let mut out = String::new();
    for (rec, &fold) in records.iter().zip(folds.assignments()) {
        out.push_str(&format!("{}\t{}\n", rec.par_id, fold));
    }
    Ok(out)
}

/// Load an explicit fold file and map it onto `records` by par_id.
///
/// Every record must be assigned exactly once; unknown ids are errors.
pub fn parse_folds(text: &str, records: &[ParagraphRecord], path: &str) -> Result<FoldAssignment> {
    let index_of: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.par_id.as_str(), i))
        .collect();
    let mut fold_of: Vec<Option<u32>> = vec![None; records.len()];
    let mut max_fold = 0u32;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let mut parts = line.split('\t');
        let (id, fold) = match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(fold), None) => (id, fold),
            _ => return Err(Error::parse(path, line_no, "expected par_id<TAB>fold_id")),
        };
        let fold: u32 = fold
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid fold id {fold:?}")))?;
        let &i = index_of
            .get(id)
            .ok_or_else(|| Error::parse(path, line_no, format!("unknown par_id {id:?}")))?;
        if fold_of[i].is_some() {
            return Err(Error::parse(path, line_no, format!("par_id {id:?} assigned twice")));
        }
        fold_of[i] = Some(fold);
        max_fold = max_fold.max(fold);
    }
    let fold_of: Vec<u32> = fold_of
        .into_iter()
        .zip(records)
        .map(|(f, rec)| f.ok_or_else(|| Error::Input(format!("par_id {:?} missing from fold file", rec.par_id))))
        .collect::<Result<_>>()?;
    Ok(FoldAssignment {
        fold_of,
        k: max_fold + 1,
        seed: 0,
    })
}

pub fn load_folds(path: &Path, records: &[ParagraphRecord]) -> Result<FoldAssignment> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_folds(&text, records, &path.display().to_string())
}
