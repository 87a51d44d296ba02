//! Reference implementations the acceptance checks compare against.
//! Everything here is dense, scalar, and written independently of the
//! library's own code paths.

use gramclass::ngrams::SparseCountVector;

fn stable_log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn dense_objective(
    w: &[f64],
    b: f64,
    rows: &[Vec<f64>],
    labels: &[bool],
    c: f64,
    w_pos: f64,
) -> f64 {
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for (row, &label) in rows.iter().zip(labels) {
        let margin: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let y = if label { 1.0 } else { -1.0 };
        let cost = if label { c * w_pos } else { c };
        obj += cost * stable_log1p_exp(-y * margin);
    }
    obj
}

fn dense_gradient(
    w: &[f64],
    b: f64,
    rows: &[Vec<f64>],
    labels: &[bool],
    c: f64,
    w_pos: f64,
    bias_on: bool,
) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (row, &label) in rows.iter().zip(labels) {
        let margin: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let y = if label { 1.0 } else { -1.0 };
        let cost = if label { c * w_pos } else { c };
        let coeff = cost * -y * sigmoid(-y * margin);
        for (g, &x) in gw.iter_mut().zip(row) {
            *g += coeff * x;
        }
        gb += coeff;
    }
    (gw, if bias_on { gb } else { 0.0 })
}

/// Steepest descent with backtracking line search, run until the gradient
/// is small enough that the objective gap is far below comparison
/// tolerance (the regularizer bounds the Hessian below by the identity,
/// so gap <= ||g||^2 / 2). Returns (w, bias, objective).
pub fn gd_reference(
    rows: &[Vec<f64>],
    labels: &[bool],
    c: f64,
    w_pos: f64,
    bias_on: bool,
) -> (Vec<f64>, f64, f64) {
    let dim = rows[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut f = dense_objective(&w, b, rows, labels, c, w_pos);
    let mut step = 1.0f64;
    for _ in 0..5_000_000u64 {
        let (gw, gb) = dense_gradient(&w, b, rows, labels, c, w_pos, bias_on);
        let gnorm2: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2 / 2.0 <= 1e-10 * f.abs().max(1.0) {
            break;
        }
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        for _ in 0..200 {
            let w_try: Vec<f64> = w.iter().zip(&gw).map(|(x, g)| x - step * g).collect();
            let b_try = b - step * gb;
            let f_try = dense_objective(&w_try, b_try, rows, labels, c, w_pos);
            if f_try <= f - 1e-4 * step * gnorm2 {
                if w_try == w && b_try == b {
                    return (w, b, f);
                }
                w = w_try;
                b = b_try;
                f = f_try;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    (w, b, f)
}

/// Flat dense reweighting of raw count vectors: document frequencies,
/// per-family average lengths, saturating tf, and log idf, computed
/// straight from the definitions.
pub fn dense_bm25(
    counts: &[SparseCountVector],
    n_features: usize,
    n_char_features: usize,
    k1: f64,
    b: f64,
) -> Vec<Vec<f64>> {
    let n_docs = counts.len();
    let mut df = vec![0u32; n_features];
    for doc in counts {
        for &(j, _) in &doc.counts {
            df[j as usize] += 1;
        }
    }
    let avg_char = counts.iter().map(|d| d.char_len as f64).sum::<f64>() / n_docs as f64;
    let avg_word = counts.iter().map(|d| d.word_len as f64).sum::<f64>() / n_docs as f64;
    counts
        .iter()
        .map(|doc| {
            let mut dense = vec![0u32; n_features];
            for &(j, tf) in &doc.counts {
                dense[j as usize] = tf;
            }
            (0..n_features)
                .map(|j| {
                    let tf = dense[j] as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let (dl, avg_dl) = if j < n_char_features {
                        (doc.char_len as f64, avg_char)
                    } else {
                        (doc.word_len as f64, avg_word)
                    };
                    let sat = tf / (tf + k1 * (1.0 - b + b * dl / avg_dl));
                    let idf = ((n_docs as f64 - df[j] as f64 + 0.5) / (df[j] as f64 + 0.5)).ln();
                    sat * idf
                })
                .collect()
        })
        .collect()
}
