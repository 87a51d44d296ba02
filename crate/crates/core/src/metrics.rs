//! Confusion-matrix metrics, multi-label mean F1, and the analytic
//! "best guess" F1 baseline with its Monte-Carlo confirmation.

use crate::error::{Error, Result};
use crate::scalar::{num, Scalar};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Confusion {
    pub fn new(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        Confusion {
            true_pos,
            false_pos,
            false_neg,
            true_neg,
        }
    }

    /// Pool counts from another confusion into this one.
    pub fn absorb(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Count a prediction/gold pair into a confusion matrix.
///
/// Errors if the sequences are empty or of different lengths.
pub fn confusion(pred: &[bool], gold: &[bool]) -> Result<Confusion> {
    if pred.len() != gold.len() {
        return Err(Error::Input(format!(
            "prediction/gold length mismatch: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Input("empty prediction sequence".into()));
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// Precision, recall and F1 on the positive category. Any 0/0 is defined as 0.
pub fn precision_recall_f1<F: Scalar>(c: &Confusion) -> (F, F, F) {
    let ratio = |num_count: u64, den_count: u64| -> F {
        if den_count == 0 {
            F::zero()
        } else {
            num::<F>(num_count as f64) / num::<F>(den_count as f64)
        }
    };
    let p = ratio(c.true_pos, c.true_pos + c.false_pos);
    let r = ratio(c.true_pos, c.true_pos + c.false_neg);
    let f1 = if p + r == F::zero() {
        F::zero()
    } else {
        num::<F>(2.0) * p * r / (p + r)
    };
    (p, r, f1)
}

/// Unweighted mean of exactly seven per-category F1 scores.
pub fn mean_f1<F: Scalar>(f1s: &[F]) -> Result<F> {
    if f1s.len() != 7 {
        return Err(Error::Input(format!(
            "mean F1 is defined over 7 categories, got {}",
            f1s.len()
        )));
    }
    Ok(f1s.iter().copied().sum::<F>() / num::<F>(7.0))
}

/// Best F1 achievable with no task knowledge: 2q/(q+1), attained by always
/// predicting the positive category at positive rate q.
pub fn f1_best_guess<F: Scalar>(q: F) -> Result<F> {
    if q < F::zero() || q > F::one() {
        return Err(Error::Input(format!("positive rate {q} outside [0, 1]")));
    }
    Ok(num::<F>(2.0) * q / (q + F::one()))
}

/// Mean F1 of a knowledge-free random predictor, estimated by simulation,
/// for every predict-rate in `p_grid`.
///
/// Each trial draws a fresh label sequence of `n_labels` with positive rate
/// `q`, then draws predictions at each rate `p` independently of the labels.
pub fn monte_carlo_curve<F: Scalar>(
    q: F,
    p_grid: &[F],
    n_labels: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<(F, F)>> {
    if trials < 1 {
        return Err(Error::Input("at least one trial required".into()));
    }
    if n_labels == 0 {
        return Err(Error::Input("label count must be positive".into()));
    }
    if p_grid.is_empty() {
        return Err(Error::Input("empty predict-rate grid".into()));
    }
    let qf = q.to_f64().unwrap_or(f64::NAN);
    if !(0.0..=1.0).contains(&qf) {
        return Err(Error::Input(format!("positive rate {q} outside [0, 1]")));
    }
    for &p in p_grid {
        let pf = p.to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&pf) {
            return Err(Error::Input(format!("predict rate {p} outside [0, 1]")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_labels as u64;
    let mut sums = vec![0.0f64; p_grid.len()];
    for _ in 0..trials {
        let pos = draw_binomial(&mut rng, n, qf);
        let neg = n - pos;
        for (slot, &p) in sums.iter_mut().zip(p_grid) {
            let pf = p.to_f64().unwrap();
            let tp = draw_binomial(&mut rng, pos, pf);
            let fp = draw_binomial(&mut rng, neg, pf);
            let fal_neg = pos - tp;
            let den = 2 * tp + fp + fal_neg;
            if den > 0 {
                *slot += 2.0 * tp as f64 / den as f64;
            }
        }
    }
    Ok(p_grid
        .iter()
        .zip(&sums)
        .map(|(&p, &s)| (p, num::<F>(s / trials as f64)))
        .collect())
}

/// The predict-rate maximizing simulated mean F1, and that F1.
pub fn monte_carlo_best_guess<F: Scalar>(
    q: F,
    p_grid: &[F],
    n_labels: usize,
    trials: u64,
    seed: u64,
) -> Result<(F, F)> {
    let curve = monte_carlo_curve(q, p_grid, n_labels, trials, seed)?;
    let mut best = curve[0];
    for &(p, f1) in &curve[1..] {
        if f1 > best.1 {
            best = (p, f1);
        }
    }
    Ok(best)
}

fn draw_binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
}

/// Metrics for one evaluated category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEval<F> {
    pub name: String,
    pub confusion: Confusion,
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

/// Per-category confusion metrics plus their unweighted mean F1.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<F> {
    pub categories: Vec<CategoryEval<F>>,
    pub mean_f1: F,
}

impl<F: Scalar> EvalReport<F> {
    pub fn from_confusions(named: Vec<(String, Confusion)>) -> Self {
        let categories: Vec<CategoryEval<F>> = named
            .into_iter()
            .map(|(name, confusion)| {
                let (precision, recall, f1) = precision_recall_f1(&confusion);
                CategoryEval {
                    name,
                    confusion,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        let n = categories.len().max(1);
        let mean_f1 = categories.iter().map(|c| c.f1).sum::<F>() / num::<F>(n as f64);
        EvalReport {
            categories,
            mean_f1,
        }
    }

    /// Stable text rendering: one block per category, then a summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for cat in &self.categories {
            out.push_str(&format!("target\t{}\n", cat.name));
            out.push_str(&format!("tp\t{}\n", cat.confusion.true_pos));
            out.push_str(&format!("fp\t{}\n", cat.confusion.false_pos));
            out.push_str(&format!("fn\t{}\n", cat.confusion.false_neg));
            out.push_str(&format!("tn\t{}\n", cat.confusion.true_neg));
            out.push_str(&format!("precision\t{:.6}\n", cat.precision));
            out.push_str(&format!("recall\t{:.6}\n", cat.recall));
            out.push_str(&format!("f1\t{:.6}\n", cat.f1));
            out.push('\n');
        }
        out.push_str(&format!("mean_f1\t{:.6}\n", self.mean_f1));
        out
    }
}
