//! Class-weighted L2-regularized binary logistic regression on sparse
//! unit-normalized vectors, trained by a damped Newton solver with
//! conjugate-gradient inner iterations.

use crate::error::{Error, Result};
use crate::scalar::{log1p_exp, num, sigmoid, Scalar};
use crate::weighting::WeightedVector;
use std::path::Path;

/// Solver settings. `positive_weight` multiplies C for positive instances
/// only, shifting the loss toward positive-class recall.
///
/// `seed` is recorded in saved models for provenance; the solver itself is
/// deterministic and draws no randomness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<F> {
    pub c: F,
    pub positive_weight: F,
    pub tol: F,
    pub max_iter: u32,
    pub seed: u64,
    pub bias: bool,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            c: F::one(),
            positive_weight: F::one(),
            tol: num(1e-4),
            max_iter: 1000,
            seed: 0,
            bias: true,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > F::zero() && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.positive_weight > F::zero() && self.positive_weight.is_finite()) {
            return Err(Error::Config(format!(
                "positive_weight must be positive, got {}",
                self.positive_weight
            )));
        }
        if !(self.tol > F::zero()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labeled training collection over a fixed feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    vectors: Vec<WeightedVector<F>>,
    labels: Vec<bool>,
    n_features: u32,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(vectors: Vec<WeightedVector<F>>, labels: Vec<bool>, n_features: u32) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        for v in &vectors {
            for &(j, w) in &v.weights {
                if j >= n_features {
                    return Err(Error::Input(format!(
                        "feature index {j} outside feature space {n_features}"
                    )));
                }
                if !w.is_finite() {
                    return Err(Error::Input(format!("non-finite feature value {w}")));
                }
            }
        }
        Ok(Dataset {
            vectors,
            labels,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n_features(&self) -> u32 {
        self.n_features
    }

    pub fn vectors(&self) -> &[WeightedVector<F>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Owned row subset, in the order given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Dataset<F> {
        Dataset {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
        }
    }
}

/// A trained model: dense weights over the feature space plus an
/// unregularized bias term.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<F> {
    pub w: Vec<F>,
    pub bias_weight: F,
    pub config: TrainConfig<F>,
    pub objective_value: F,
    pub n_iterations: u32,
}

fn instance_costs<F: Scalar>(labels: &[bool], config: &TrainConfig<F>) -> Vec<F> {
    labels
        .iter()
        .map(|&l| if l { config.c * config.positive_weight } else { config.c })
        .collect()
}

fn compute_margins<F: Scalar>(w: &[F], bias: F, data: &Dataset<F>) -> Vec<F> {
    data.vectors.iter().map(|v| v.dot_dense(w) + bias).collect()
}

fn objective_from_margins<F: Scalar>(w: &[F], data: &Dataset<F>, costs: &[F], margins: &[F]) -> F {
    let half = num::<F>(0.5);
    let reg = half * w.iter().map(|&x| x * x).sum::<F>();
    let mut loss = F::zero();
    for ((&label, &cost), &margin) in data.labels.iter().zip(costs).zip(margins) {
        let y = if label { F::one() } else { -F::one() };
        loss += cost * log1p_exp(-y * margin);
    }
    reg + loss
}

/// Primal objective ½‖w‖² + Σᵢ cᵢ·ln(1 + exp(−yᵢ·(w·xᵢ + bias))), with
/// cᵢ = C·positive_weight on positive instances and C otherwise.
pub fn objective<F: Scalar>(
    w: &[F],
    bias: F,
    data: &Dataset<F>,
    config: &TrainConfig<F>,
) -> Result<F> {
    config.validate()?;
    if w.len() != data.n_features as usize {
        return Err(Error::Input(format!(
            "weight vector has {} entries, feature space is {}",
            w.len(),
            data.n_features
        )));
    }
    let costs = instance_costs(&data.labels, config);
    let margins = compute_margins(w, bias, data);
    Ok(objective_from_margins(w, data, &costs, &margins))
}

/// Gradient of the objective in (w, bias). The bias component is zero when
/// the bias term is disabled.
pub fn gradient<F: Scalar>(
    w: &[F],
    bias: F,
    data: &Dataset<F>,
    config: &TrainConfig<F>,
) -> Result<(Vec<F>, F)> {
    config.validate()?;
    if w.len() != data.n_features as usize {
        return Err(Error::Input(format!(
            "weight vector has {} entries, feature space is {}",
            w.len(),
            data.n_features
        )));
    }
    let costs = instance_costs(&data.labels, config);
    let margins = compute_margins(w, bias, data);
    Ok(gradient_from_margins(w, data, &costs, &margins, config.bias))
}

fn gradient_from_margins<F: Scalar>(
    w: &[F],
    data: &Dataset<F>,
    costs: &[F],
    margins: &[F],
    bias_on: bool,
) -> (Vec<F>, F) {
    let mut gw = w.to_vec();
    let mut gb = F::zero();
    for ((v, (&label, &cost)), &margin) in data
        .vectors
        .iter()
        .zip(data.labels.iter().zip(costs))
        .zip(margins)
    {
        let y = if label { F::one() } else { -F::one() };
        let coef = -y * cost * sigmoid(-y * margin);
        for &(j, x) in &v.weights {
            gw[j as usize] += coef * x;
        }
        gb += coef;
    }
    if !bias_on {
        gb = F::zero();
    }
    (gw, gb)
}

fn pair_dot<F: Scalar>(aw: &[F], ab: F, bw: &[F], bb: F) -> F {
    aw.iter().zip(bw).map(|(&x, &y)| x * y).sum::<F>() + ab * bb
}

fn pair_norm<F: Scalar>(w: &[F], b: F) -> F {
    pair_dot(w, b, w, b).sqrt()
}

/// H·v for the objective Hessian, where H = diag(I, 0) + Jᵀ D J with
/// J = [X 1] and D_ii = cᵢ·σ(ξᵢ)·(1−σ(ξᵢ)).
fn hessian_vec<F: Scalar>(
    data: &Dataset<F>,
    curvature: &[F],
    bias_on: bool,
    vw: &[F],
    vb: F,
) -> (Vec<F>, F) {
    let mut out = vw.to_vec();
    let mut ob = F::zero();
    for (v, &d) in data.vectors.iter().zip(curvature) {
        let xv = v.dot_dense(vw) + if bias_on { vb } else { F::zero() };
        let t = d * xv;
        if t != F::zero() {
            for &(j, x) in &v.weights {
                out[j as usize] += t * x;
            }
            ob += t;
        }
    }
    if !bias_on {
        ob = F::zero();
    }
    (out, ob)
}

/// Approximately solve H d = −g by conjugate gradients, stopping when the
/// residual norm drops below `tol` or after `max_iter` iterations.
fn cg_direction<F: Scalar>(
    data: &Dataset<F>,
    curvature: &[F],
    bias_on: bool,
    gw: &[F],
    gb: F,
    tol: F,
    max_iter: usize,
) -> (Vec<F>, F) {
    let n = gw.len();
    let mut dw = vec![F::zero(); n];
    let mut db = F::zero();
    let mut rw: Vec<F> = gw.iter().map(|&x| -x).collect();
    let mut rb = -gb;
    let mut pw = rw.clone();
    let mut pb = rb;
    let mut rs = pair_dot(&rw, rb, &rw, rb);
    if rs.sqrt() <= tol {
        return (dw, db);
    }
    for _ in 0..max_iter {
        let (hw, hb) = hessian_vec(data, curvature, bias_on, &pw, pb);
        let php = pair_dot(&pw, pb, &hw, hb);
        if !(php > F::zero()) {
            break;
        }
        let alpha = rs / php;
        for (d, &p) in dw.iter_mut().zip(&pw) {
            *d += alpha * p;
        }
        db += alpha * pb;
        for (r, &h) in rw.iter_mut().zip(&hw) {
            *r -= alpha * h;
        }
        rb -= alpha * hb;
        let rs_new = pair_dot(&rw, rb, &rw, rb);
        if rs_new.sqrt() <= tol {
            break;
        }
        let beta = rs_new / rs;
        for (p, &r) in pw.iter_mut().zip(&rw) {
            *p = r + beta * *p;
        }
        pb = rb + beta * pb;
        rs = rs_new;
    }
    (dw, db)
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: u32 = 60;
const MAX_CG_ITER: usize = 250;

/// Minimize the objective from w = 0. Stops when the gradient norm falls to
/// `tol` times the gradient norm at zero.
pub fn train<F: Scalar>(data: &Dataset<F>, config: &TrainConfig<F>) -> Result<ModelWeights<F>> {
    config.validate()?;
    let n_pos = data.n_positive();
    if n_pos == 0 || n_pos == data.len() {
        return Err(Error::SingleClass {
            target: "training set".into(),
        });
    }

    let n = data.n_features as usize;
    let costs = instance_costs(&data.labels, config);
    let mut w = vec![F::zero(); n];
    let mut bias = F::zero();
    let mut margins = vec![F::zero(); data.len()];

    let (mut gw, mut gb) = gradient_from_margins(&w, data, &costs, &margins, config.bias);
    let g0_norm = pair_norm(&gw, gb);
    let target = config.tol * g0_norm;
    let mut grad_norm = g0_norm;
    let mut iterations = 0u32;
    let c1 = num::<F>(ARMIJO_C1);
    let half = num::<F>(0.5);

    while grad_norm > target {
        if iterations >= config.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: grad_norm.to_f64().unwrap_or(f64::NAN),
                target: target.to_f64().unwrap_or(f64::NAN),
            });
        }

        let curvature: Vec<F> = margins
            .iter()
            .zip(&costs)
            .map(|(&m, &c)| {
                let s = sigmoid(m);
                c * s * (F::one() - s)
            })
            .collect();
        let eta = half.min((grad_norm / g0_norm).sqrt());
        let (mut dw, mut db) =
            cg_direction(data, &curvature, config.bias, &gw, gb, eta * grad_norm, MAX_CG_ITER);

        let mut slope = pair_dot(&gw, gb, &dw, db);
        if !(slope < F::zero()) {
            // CG returned a non-descent direction (numerical breakdown);
            // fall back to steepest descent.
            dw = gw.iter().map(|&x| -x).collect();
            db = -gb;
            slope = -(grad_norm * grad_norm);
        }

        let f_curr = objective_from_margins(&w, data, &costs, &margins);
        let step_margins: Vec<F> = data
            .vectors
            .iter()
            .map(|v| v.dot_dense(&dw) + if config.bias { db } else { F::zero() })
            .collect();

        let mut step = F::one();
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let w_try: Vec<F> = w.iter().zip(&dw).map(|(&a, &d)| a + step * d).collect();
            let bias_try = bias + step * db;
            let margins_try: Vec<F> = margins
                .iter()
                .zip(&step_margins)
                .map(|(&m, &s)| m + step * s)
                .collect();
            let f_try = objective_from_margins(&w_try, data, &costs, &margins_try);
            if f_try <= f_curr + c1 * step * slope {
                // a step too small to move any parameter bit means the
                // requested tolerance is below the floating-point floor
                accepted = w_try != w || bias_try != bias;
                w = w_try;
                bias = bias_try;
                margins = margins_try;
                break;
            }
            step *= half;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: grad_norm.to_f64().unwrap_or(f64::NAN),
                target: target.to_f64().unwrap_or(f64::NAN),
            });
        }

        let g = gradient_from_margins(&w, data, &costs, &margins, config.bias);
        gw = g.0;
        gb = g.1;
        grad_norm = pair_norm(&gw, gb);
        iterations += 1;
    }

    Ok(ModelWeights {
        bias_weight: bias,
        objective_value: objective_from_margins(&w, data, &costs, &margins),
        w,
        config: *config,
        n_iterations: iterations,
    })
}

pub fn decision_value<F: Scalar>(model: &ModelWeights<F>, v: &WeightedVector<F>) -> F {
    v.dot_dense(&model.w) + model.bias_weight
}

/// Positive iff the decision value is strictly above zero; ties go negative.
pub fn predict<F: Scalar>(model: &ModelWeights<F>, v: &WeightedVector<F>) -> bool {
    decision_value(model, v) > F::zero()
}

const MODEL_MAGIC: &str = "# gramclass-model v1";

/// One or more named models bound to a vocabulary fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile<F> {
    /// SHA-256 of the vocabulary dump the models were trained against;
    /// empty when unbound.
    pub vocab_sha256: String,
    pub targets: Vec<(String, ModelWeights<F>)>,
}

pub fn serialize_model_file<F: Scalar>(file: &ModelFile<F>) -> Result<String> {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    if file.vocab_sha256.contains(['\t', '\n', '\r']) {
        return Err(Error::Input("vocabulary hash contains a tab or line break".into()));
    }
    out.push_str(&format!("# vocab_sha256\t{}\n", file.vocab_sha256));
    out.push_str(&format!("# targets\t{}\n", file.targets.len()));
    for (name, model) in &file.targets {
        if name.is_empty() || name.contains(['\t', '\n', '\r']) {
            return Err(Error::Input(format!("invalid target name {name:?}")));
        }
        if !model.objective_value.is_finite() {
            return Err(Error::Input(format!(
                "model for {name} has a non-finite objective value"
            )));
        }
        let cfg = &model.config;
        out.push_str(&format!("# target\t{name}\n"));
        out.push_str(&format!("# c\t{}\n", cfg.c));
        out.push_str(&format!("# positive_weight\t{}\n", cfg.positive_weight));
        out.push_str(&format!("# tol\t{}\n", cfg.tol));
        out.push_str(&format!("# max_iter\t{}\n", cfg.max_iter));
        out.push_str(&format!("# seed\t{}\n", cfg.seed));
        out.push_str(&format!("# bias\t{}\n", cfg.bias));
        out.push_str(&format!("# objective\t{}\n", model.objective_value));
        out.push_str(&format!("# iterations\t{}\n", model.n_iterations));
        out.push_str(&format!("# bias_weight\t{}\n", model.bias_weight));
        out.push_str(&format!("# weights\t{}\n", model.w.len()));
        for x in &model.w {
            out.push_str(&format!("{x}\n"));
        }
    }
    Ok(out)
}

pub fn parse_model_file<F: Scalar>(text: &str, path: &str) -> Result<ModelFile<F>> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(Error::Version(format!(
            "{path}: expected model header {MODEL_MAGIC:?}"
        )));
    }
    let truncated = || Error::Input(format!("{path}: model file is truncated"));
    let header = |line: Option<&str>, key: &str| -> Result<String> {
        let line = line.ok_or_else(truncated)?;
        line.strip_prefix(&format!("# {key}\t"))
            .map(str::to_string)
            .ok_or_else(|| Error::Input(format!("{path}: expected {key} header, found {line:?}")))
    };
    let vocab_sha256 = header(lines.next(), "vocab_sha256")?;
    let n_targets: usize = header(lines.next(), "targets")?
        .parse()
        .map_err(|_| Error::Input(format!("{path}: bad target count")))?;

    let mut targets = Vec::with_capacity(n_targets);
    for _ in 0..n_targets {
        let name = header(lines.next(), "target")?;
        let scalar = |s: String, key: &str| -> Result<F> {
            s.parse::<f64>()
                .ok()
                .and_then(F::from_f64)
                .ok_or_else(|| Error::Input(format!("{path}: bad {key} value")))
        };
        let c = scalar(header(lines.next(), "c")?, "c")?;
        let positive_weight = scalar(header(lines.next(), "positive_weight")?, "positive_weight")?;
        let tol = scalar(header(lines.next(), "tol")?, "tol")?;
        let max_iter: u32 = header(lines.next(), "max_iter")?
            .parse()
            .map_err(|_| Error::Input(format!("{path}: bad max_iter value")))?;
        let seed: u64 = header(lines.next(), "seed")?
            .parse()
            .map_err(|_| Error::Input(format!("{path}: bad seed value")))?;
        let bias: bool = header(lines.next(), "bias")?
            .parse()
            .map_err(|_| Error::Input(format!("{path}: bad bias flag")))?;
        let objective_value = scalar(header(lines.next(), "objective")?, "objective")?;
        let n_iterations: u32 = header(lines.next(), "iterations")?
            .parse()
            .map_err(|_| Error::Input(format!("{path}: bad iteration count")))?;
        let bias_weight = scalar(header(lines.next(), "bias_weight")?, "bias_weight")?;
        let n_weights: usize = header(lines.next(), "weights")?
            .parse()
            .map_err(|_| Error::Input(format!("{path}: bad weight count")))?;
        let mut w = Vec::with_capacity(n_weights);
        for _ in 0..n_weights {
            let line = lines.next().ok_or_else(truncated)?;
            w.push(
                line.parse::<f64>()
                    .ok()
                    .and_then(F::from_f64)
                    .ok_or_else(|| Error::Input(format!("{path}: bad weight value {line:?}")))?,
            );
        }
        let config = TrainConfig {
            c,
            positive_weight,
            tol,
            max_iter,
            seed,
            bias,
        };
        config.validate()?;
        targets.push((
            name,
            ModelWeights {
                w,
                bias_weight,
                config,
                objective_value,
                n_iterations,
            },
        ));
    }
    if lines.next().is_some() {
        return Err(Error::Input(format!("{path}: trailing content after last model")));
    }
    if targets.is_empty() {
        return Err(Error::Input(format!("{path}: model file declares no targets")));
    }
    Ok(ModelFile {
        vocab_sha256,
        targets,
    })
}

pub fn save_model_file<F: Scalar>(file: &ModelFile<F>, path: &Path) -> Result<()> {
    let text = serialize_model_file(file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model_file<F: Scalar>(path: &Path) -> Result<ModelFile<F>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model_file(&text, &path.display().to_string())
}

/// Save a single unbound model under the target name "model".
pub fn save_model<F: Scalar>(model: &ModelWeights<F>, path: &Path) -> Result<()> {
    save_model_file(
        &ModelFile {
            vocab_sha256: String::new(),
            targets: vec![("model".to_string(), model.clone())],
        },
        path,
    )
}

/// Load a single-target model file.
pub fn load_model<F: Scalar>(path: &Path) -> Result<ModelWeights<F>> {
    let file = load_model_file::<F>(path)?;
    let n = file.targets.len();
    let mut targets = file.targets;
    match targets.pop() {
        Some((_, model)) if n == 1 => Ok(model),
        _ => Err(Error::Input(format!(
            "{}: expected a single-target model file, found {n} targets",
            path.display()
        ))),
    }
}
