//! Exhaustive (C, positive_weight) grid search by stratified k-fold
//! cross-validation, scored on micro-pooled positive-class F1.

use crate::corpus::stratified_kfold;
use crate::error::{Error, Result};
use crate::linear::{predict, train, Dataset, TrainConfig};
use crate::metrics::{confusion, precision_recall_f1, Confusion};
use crate::scalar::Scalar;
use rayon::prelude::*;
use std::path::Path;

pub const DEFAULT_SELECTION_DELTA: f64 = 0.01;

/// The (C, positive_weight) values to sweep. Every pairing is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<F> {
    pub c_values: Vec<F>,
    pub w_values: Vec<F>,
}

impl<F: Scalar> GridSpec<F> {
    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("c_values", &self.c_values), ("w_values", &self.w_values)] {
            if values.is_empty() {
                return Err(Error::Config(format!("{name} must be nonempty")));
            }
            if let Some(bad) = values.iter().find(|v| !(**v > F::zero() && v.is_finite())) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// One evaluated grid cell: parameters, pooled confusion, and its metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell<F> {
    pub c: F,
    pub w: F,
    pub confusion: Confusion,
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

/// Full grid evaluation. `best` maximizes F1, ties broken toward the
/// numerically smallest C, then the smallest w.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult<F> {
    pub cells: Vec<CvCell<F>>,
    pub best: (F, F),
    pub k: u32,
    pub seed: u64,
}

/// Train on k−1 folds and predict the held-out fold, for each fold in a
/// deterministic stratified split; pool the confusion counts over folds.
pub fn cross_validate<F: Scalar>(
    data: &Dataset<F>,
    config: &TrainConfig<F>,
    k: u32,
    seed: u64,
) -> Result<Confusion> {
    let folds = stratified_kfold(data.labels(), k, seed)?;
    let mut pooled = Confusion::default();
    for fold in 0..k {
        let model = train(&data.subset(&folds.train_indices(fold)), config)?;
        let test = folds.test_indices(fold);
        let preds: Vec<bool> = test.iter().map(|&i| predict(&model, &data.vectors()[i])).collect();
        let golds: Vec<bool> = test.iter().map(|&i| data.labels()[i]).collect();
        pooled.absorb(&confusion(&preds, &golds)?);
    }
    Ok(pooled)
}

fn beats<F: Scalar>(a: &CvCell<F>, b: &CvCell<F>) -> bool {
    a.f1 > b.f1 || (a.f1 == b.f1 && (a.c, a.w) < (b.c, b.w))
}

/// Cross-validate every grid cell. Cells run in parallel; the result order
/// follows the grid listing (C outer, w inner), so output is deterministic.
pub fn grid_search<F: Scalar>(
    data: &Dataset<F>,
    grid: &GridSpec<F>,
    base: &TrainConfig<F>,
    k: u32,
    seed: u64,
) -> Result<CvResult<F>> {
    grid.validate()?;
    let params: Vec<(F, F)> = grid
        .c_values
        .iter()
        .flat_map(|&c| grid.w_values.iter().map(move |&w| (c, w)))
        .collect();
    let cells: Vec<CvCell<F>> = params
        .par_iter()
        .map(|&(c, w)| {
            let config = TrainConfig {
                c,
                positive_weight: w,
                ..*base
            };
            let pooled = cross_validate(data, &config, k, seed)?;
            let (precision, recall, f1) = precision_recall_f1(&pooled);
            Ok(CvCell {
                c,
                w,
                confusion: pooled,
                precision,
                recall,
                f1,
            })
        })
        .collect::<Result<_>>()?;
    let best = cells
        .iter()
        .reduce(|best, cell| if beats(cell, best) { cell } else { best })
        .expect("grid validated nonempty");
    Ok(CvResult {
        best: (best.c, best.w),
        k,
        seed,
        cells,
    })
}

/// Among cells whose F1 is within `delta` of the best, pick the one with the
/// smallest |precision − recall| (ties again toward smaller C, then w).
pub fn secondary_selection<F: Scalar>(cv: &CvResult<F>, delta: F) -> Result<(F, F)> {
    if !(delta >= F::zero()) {
        return Err(Error::Config(format!("delta must be nonnegative, got {delta}")));
    }
    if cv.cells.is_empty() {
        return Err(Error::Input("cross-validation result has no cells".into()));
    }
    let best_f1 = cv
        .cells
        .iter()
        .map(|c| c.f1)
        .fold(F::neg_infinity(), F::max);
    let threshold = best_f1 - delta;
    let chosen = cv
        .cells
        .iter()
        .filter(|c| c.f1 >= threshold)
        .reduce(|best, cell| {
            let gap_best = (best.precision - best.recall).abs();
            let gap_cell = (cell.precision - cell.recall).abs();
            if gap_cell < gap_best || (gap_cell == gap_best && (cell.c, cell.w) < (best.c, best.w))
            {
                cell
            } else {
                best
            }
        })
        .expect("at least the best cell passes the threshold");
    Ok((chosen.c, chosen.w))
}

/// One line per cell: C, w, pooled counts, precision, recall, F1.
pub fn serialize_cv_report<F: Scalar>(cv: &CvResult<F>) -> String {
    let mut out = String::new();
    out.push_str("# gramclass-cv v1\n");
    out.push_str(&format!("# k\t{}\n", cv.k));
    out.push_str(&format!("# seed\t{}\n", cv.seed));
    out.push_str(&format!("# best_c\t{}\n", cv.best.0));
    out.push_str(&format!("# best_w\t{}\n", cv.best.1));
    out.push_str("# C\tw\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\n");
    for cell in &cv.cells {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            cell.c,
            cell.w,
            cell.confusion.true_pos,
            cell.confusion.false_pos,
            cell.confusion.false_neg,
            cell.confusion.true_neg,
            cell.precision,
            cell.recall,
            cell.f1
        ));
    }
    out
}

pub fn write_cv_report<F: Scalar>(cv: &CvResult<F>, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_cv_report(cv)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::num;
    use crate::weighting::WeightedVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_dim(x: f64) -> WeightedVector<f64> {
        WeightedVector {
            weights: vec![(0, x)],
        }
    }

    fn separable(n_per_class: usize) -> Dataset<f64> {
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            let jitter = 0.05 * i as f64;
            vectors.push(one_dim(1.0 + jitter));
            labels.push(true);
            vectors.push(one_dim(-1.0 - jitter));
            labels.push(false);
        }
        Dataset::new(vectors, labels, 1).unwrap()
    }

    fn noisy(seed: u64, n: usize) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let label = rng.gen_bool(0.3);
            let center = if label { 0.6 } else { -0.6 };
            vectors.push(one_dim(center + rng.gen_range(-1.0..1.0)));
            labels.push(label);
        }
        for (i, label) in labels.iter_mut().take(4).enumerate() {
            *label = i % 2 == 0;
        }
        Dataset::new(vectors, labels, 1).unwrap()
    }

    fn quick() -> TrainConfig<f64> {
        TrainConfig {
            tol: 1e-8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_data_cross_validates_cleanly() {
        let data = separable(6);
        let pooled = cross_validate(&data, &quick(), 3, 7).unwrap();
        assert_eq!(pooled.false_pos, 0);
        assert_eq!(pooled.false_neg, 0);
        assert_eq!(pooled.total(), 12);
    }

    #[test]
    fn cross_validate_is_deterministic() {
        let data = noisy(1, 40);
        let a = cross_validate(&data, &quick(), 4, 9).unwrap();
        let b = cross_validate(&data, &quick(), 4, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_instance_predicted_exactly_once() {
        let data = separable(2);
        let pooled = cross_validate(&data, &quick(), 2, 3).unwrap();
        assert_eq!(pooled.total(), 4);
    }

    #[test]
    fn single_cell_grid_is_best() {
        let data = separable(5);
        let grid = GridSpec {
            c_values: vec![2.0],
            w_values: vec![3.0],
        };
        let cv = grid_search(&data, &grid, &quick(), 5, 1).unwrap();
        assert_eq!(cv.cells.len(), 1);
        assert_eq!(cv.best, (2.0, 3.0));
    }

    #[test]
    fn extreme_positive_weight_loses_to_moderate() {
        // overlapping 1-D classes: a huge positive weight drives the
        // boundary below nearly every instance, trading precision for recall
        let data = noisy(4, 60);
        let grid = GridSpec {
            c_values: vec![1.0],
            w_values: vec![1.0, 1000.0],
        };
        let cv = grid_search(&data, &grid, &quick(), 3, 5).unwrap();
        assert_eq!(cv.best, (1.0, 1.0));
        assert!(cv.cells[0].f1 > cv.cells[1].f1);
        assert!(cv.cells[1].recall >= cv.cells[0].recall);
        assert!(cv.cells[1].confusion.false_pos > cv.cells[0].confusion.false_pos);
    }

    #[test]
    fn ties_break_toward_smallest_parameters() {
        let data = separable(8);
        let grid = GridSpec {
            c_values: vec![10.0, 0.5, 1.0],
            w_values: vec![5.0, 1.0],
        };
        let cv = grid_search(&data, &grid, &quick(), 4, 2).unwrap();
        assert!(cv.cells.iter().all(|c| c.f1 == 1.0));
        assert_eq!(cv.best, (0.5, 1.0));
    }

    #[test]
    fn best_cell_is_reproducible() {
        let data = noisy(2, 50);
        let grid = GridSpec {
            c_values: vec![0.5, 2.0],
            w_values: vec![1.0, 4.0],
        };
        let cv = grid_search(&data, &grid, &quick(), 5, 11).unwrap();
        let best_cell = cv
            .cells
            .iter()
            .find(|c| (c.c, c.w) == cv.best)
            .unwrap();
        let config = TrainConfig {
            c: cv.best.0,
            positive_weight: cv.best.1,
            ..quick()
        };
        let rerun = cross_validate(&data, &config, 5, 11).unwrap();
        assert_eq!(rerun, best_cell.confusion);
    }

    #[test]
    fn union_grid_is_at_least_as_good() {
        let data = noisy(3, 40);
        let a = GridSpec {
            c_values: vec![0.5],
            w_values: vec![1.0, 3.0],
        };
        let b = GridSpec {
            c_values: vec![2.0],
            w_values: vec![1.0, 3.0],
        };
        let ab = GridSpec {
            c_values: vec![0.5, 2.0],
            w_values: vec![1.0, 3.0],
        };
        let f1_of = |grid: &GridSpec<f64>| {
            let cv = grid_search(&data, grid, &quick(), 4, 6).unwrap();
            cv.cells
                .iter()
                .map(|c| c.f1)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let best_union = f1_of(&ab);
        assert!(best_union >= f1_of(&a) - 1e-12);
        assert!(best_union >= f1_of(&b) - 1e-12);
    }

    fn hand_cell(c: f64, w: f64, conf: Confusion) -> CvCell<f64> {
        let (precision, recall, f1) = precision_recall_f1(&conf);
        CvCell {
            c,
            w,
            confusion: conf,
            precision,
            recall,
            f1,
        }
    }

    #[test]
    fn secondary_selection_prefers_balanced_cells() {
        // F1: 0.5 / ~0.4975 / 0.45; |P−R|: 2/3 / 0 / 0
        let cells = vec![
            hand_cell(1.0, 1.0, Confusion::new(1, 0, 2, 10)),
            hand_cell(1.0, 2.0, Confusion::new(99, 100, 100, 10)),
            hand_cell(1.0, 3.0, Confusion::new(45, 55, 55, 10)),
        ];
        let cv = CvResult {
            best: (1.0, 1.0),
            k: 5,
            seed: 0,
            cells,
        };
        assert_eq!(secondary_selection(&cv, 0.01).unwrap(), (1.0, 2.0));
        assert_eq!(secondary_selection(&cv, 0.0).unwrap(), (1.0, 1.0));
        assert!(secondary_selection(&cv, -0.5).is_err());
    }

    #[test]
    fn secondary_selection_degenerate_grid() {
        let conf = Confusion::new(5, 2, 3, 20);
        let cells = vec![
            hand_cell(1.0, 1.0, conf),
            hand_cell(2.0, 1.0, conf),
        ];
        let cv = CvResult {
            best: (1.0, 1.0),
            k: 5,
            seed: 0,
            cells,
        };
        assert_eq!(
            secondary_selection(&cv, num(DEFAULT_SELECTION_DELTA)).unwrap(),
            (1.0, 1.0)
        );
    }

    #[test]
    fn grid_validation() {
        let empty = GridSpec::<f64> {
            c_values: vec![],
            w_values: vec![1.0],
        };
        assert!(empty.validate().is_err());
        let negative = GridSpec {
            c_values: vec![1.0],
            w_values: vec![-2.0],
        };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn report_layout_is_stable() {
        let cells = vec![hand_cell(0.5, 2.0, Confusion::new(3, 1, 1, 15))];
        let cv = CvResult {
            best: (0.5, 2.0),
            k: 5,
            seed: 42,
            cells,
        };
        let text = serialize_cv_report(&cv);
        let want = "# gramclass-cv v1\n\
                    # k\t5\n\
                    # seed\t42\n\
                    # best_c\t0.5\n\
                    # best_w\t2\n\
                    # C\tw\ttp\tfp\tfn\ttn\tprecision\trecall\tf1\n\
                    0.5\t2\t3\t1\t1\t15\t0.75\t0.75\t0.75\n";
        assert_eq!(text, want);
        assert_eq!(serialize_cv_report(&cv), text);
    }
}
