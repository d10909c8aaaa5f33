//! Score-producing classifiers: logistic regression fit by batch gradient
//! descent, CART trees with Gini impurity, and random forests.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::dataset::Matrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    LogisticRegression {
        learning_rate: f64,
        tol: f64,
        max_iter: usize,
    },
    DecisionTree {
        max_depth: usize,
        min_leaf: usize,
    },
    RandomForest {
        trees: usize,
        max_depth: usize,
        min_leaf: usize,
        /// Features tried per split; `None` means ⌈√d⌉.
        max_features: Option<usize>,
    },
}

impl ModelSpec {
    pub fn logistic() -> Self {
        ModelSpec::LogisticRegression {
            learning_rate: 0.1,
            tol: 1e-6,
            max_iter: 5000,
        }
    }

    pub fn tree() -> Self {
        ModelSpec::DecisionTree {
            max_depth: 8,
            min_leaf: 5,
        }
    }

    pub fn forest() -> Self {
        ModelSpec::RandomForest {
            trees: 25,
            max_depth: 8,
            min_leaf: 5,
            max_features: None,
        }
    }

    /// Short class tag: `lr`, `dt` or `rf`.
    pub fn short_name(&self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression { .. } => "lr",
            ModelSpec::DecisionTree { .. } => "dt",
            ModelSpec::RandomForest { .. } => "rf",
        }
    }

    /// Default hyperparameters for `lr`, `dt` or `rf`.
    pub fn from_short_name(name: &str) -> Result<Self> {
        match name.trim() {
            "lr" | "logistic_regression" => Ok(Self::logistic()),
            "dt" | "decision_tree" => Ok(Self::tree()),
            "rf" | "random_forest" => Ok(Self::forest()),
            other => Err(Error::config(format!("unknown model class {other:?}"))),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::LogisticRegression {
                learning_rate,
                tol,
                max_iter,
            } => write!(f, "lr(lr={learning_rate},tol={tol},max_iter={max_iter})"),
            ModelSpec::DecisionTree { max_depth, min_leaf } => {
                write!(f, "dt(depth={max_depth},min_leaf={min_leaf})")
            }
            ModelSpec::RandomForest {
                trees,
                max_depth,
                min_leaf,
                max_features,
            } => {
                write!(f, "rf(trees={trees},depth={max_depth},min_leaf={min_leaf}")?;
                match max_features {
                    Some(m) => write!(f, ",features={m})"),
                    None => write!(f, ",features=sqrt)"),
                }
            }
        }
    }
}

/// Model scores `p̂(x_i) ∈ [0, 1]` for a set of rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictedClaims {
    pub scores: Vec<f64>,
    pub model: ModelSpec,
}

impl PredictedClaims {
    pub fn new(scores: Vec<f64>, model: ModelSpec) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && (0.0..=1.0).contains(s))) {
            return Err(Error::structural("scores must be finite and in [0, 1]"));
        }
        Ok(Self { scores, model })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn linear(params: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    params[d] + row.iter().zip(&params[..d]).map(|(x, w)| x * w).sum::<f64>()
}

/// Mean log-loss; `params` holds `d` weights followed by the intercept.
pub fn logistic_loss(params: &[f64], x: &Matrix, y: &[u8]) -> f64 {
    let total: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &label)| {
            let z = linear(params, row);
            // log(1 + e^z) - y·z, computed without overflow.
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - label as f64 * z
        })
        .sum();
    total / x.rows() as f64
}

/// Analytic gradient of [`logistic_loss`].
pub fn logistic_gradient(params: &[f64], x: &Matrix, y: &[u8]) -> Vec<f64> {
    let d = x.cols();
    let mut grad = vec![0.0; d + 1];
    for (row, &label) in x.iter_rows().zip(y) {
        let r = sigmoid(linear(params, row)) - label as f64;
        for (g, v) in grad[..d].iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let n = x.rows() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    /// `d` weights then the intercept.
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticRegression {
    /// Batch gradient descent from zero until the largest gradient component
    /// drops below `tol` or `max_iter` steps have run.
    pub fn fit(x: &Matrix, y: &[u8], learning_rate: f64, tol: f64, max_iter: usize) -> Self {
        let mut params = vec![0.0; x.cols() + 1];
        for it in 0..max_iter {
            let grad = logistic_gradient(&params, x, y);
            if grad.iter().all(|g| g.abs() < tol) {
                return Self {
                    params,
                    iterations: it,
                    converged: true,
                };
            }
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= learning_rate * g;
            }
        }
        Self {
            params,
            iterations: max_iter,
            converged: false,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(linear(&self.params, row))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Copy, Debug)]
struct TreeParams {
    max_depth: usize,
    min_leaf: usize,
    max_features: Option<usize>,
}

/// CART classification tree; leaves score the positive-class fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[u8], max_depth: usize, min_leaf: usize) -> Self {
        let params = TreeParams {
            max_depth,
            min_leaf: min_leaf.max(1),
            max_features: None,
        };
        Self::grow(x, y, (0..x.rows()).collect(), params, None)
    }

    fn grow(
        x: &Matrix,
        y: &[u8],
        samples: Vec<usize>,
        params: TreeParams,
        mut rng: Option<&mut RandomSource>,
    ) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        tree.build(x, y, samples, 0, params, &mut rng);
        tree
    }

    fn build(
        &mut self,
        x: &Matrix,
        y: &[u8],
        samples: Vec<usize>,
        depth: usize,
        params: TreeParams,
        rng: &mut Option<&mut RandomSource>,
    ) -> usize {
        let id = self.nodes.len();
        let positives = samples.iter().filter(|&&s| y[s] == 1).count();
        let score = positives as f64 / samples.len().max(1) as f64;
        self.nodes.push(Node::Leaf { score });

        let pure = positives == 0 || positives == samples.len();
        if pure || depth >= params.max_depth || samples.len() < 2 * params.min_leaf {
            return id;
        }
        let features: Vec<usize> = match (params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < x.cols() => {
                let mut all: Vec<usize> = (0..x.cols()).collect();
                for i in 0..m {
                    let j = i + r.index(x.cols() - i);
                    all.swap(i, j);
                }
                all.truncate(m);
                all
            }
            _ => (0..x.cols()).collect(),
        };
        let Some((feature, threshold)) = best_split(x, y, &samples, &features, params.min_leaf) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.into_iter().partition(|&s| x.get(s, feature) <= threshold);
        let l = self.build(x, y, left, depth + 1, params, rng);
        let r = self.build(x, y, right, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { score } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[inline]
fn gini(pos: usize, n: usize) -> f64 {
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Lowest weighted Gini impurity split that improves on the parent.
fn best_split(
    x: &Matrix,
    y: &[u8],
    samples: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = samples.len();
    let total_pos = samples.iter().filter(|&&s| y[s] == 1).count();
    let parent = gini(total_pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut column: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in features {
        column.clear();
        column.extend(samples.iter().map(|&s| (x.get(s, f), y[s])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0;
        for i in 0..n - 1 {
            left_pos += column[i].1 as usize;
            let nl = i + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf || column[i].0 == column[i + 1].0 {
                continue;
            }
            let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
            if impurity < parent - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                best = Some((impurity, f, 0.5 * (column[i].0 + column[i + 1].0)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Bagged CART trees with per-split feature subsampling.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(
        x: &Matrix,
        y: &[u8],
        trees: usize,
        max_depth: usize,
        min_leaf: usize,
        max_features: Option<usize>,
        rng: &RandomSource,
    ) -> Self {
        let d = x.cols();
        let per_split = max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1));
        let params = TreeParams {
            max_depth,
            min_leaf: min_leaf.max(1),
            max_features: Some(per_split),
        };
        let trees = par::map_indexed(trees, |t| {
            let mut r = rng.fork(t as u64);
            let n = x.rows();
            let sample: Vec<usize> = (0..n).map(|_| r.index(n)).collect();
            DecisionTree::grow(x, y, sample, params, Some(&mut r))
        });
        Self { trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Logistic(LogisticRegression),
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl Model {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.predict_row(row),
            Model::Tree(m) => m.predict_row(row),
            Model::Forest(m) => m.predict_row(row),
        }
    }

    pub fn predict_scores(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

/// Fits `spec` on a fold; both classes must be present.
pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u8], rng: &RandomSource) -> Result<Model> {
    if x.rows() != y.len() {
        return Err(Error::structural(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Training(format!(
            "training fold of {} rows has a single class",
            y.len()
        )));
    }
    Ok(match *spec {
        ModelSpec::LogisticRegression {
            learning_rate,
            tol,
            max_iter,
        } => Model::Logistic(LogisticRegression::fit(x, y, learning_rate, tol, max_iter)),
        ModelSpec::DecisionTree { max_depth, min_leaf } => {
            Model::Tree(DecisionTree::fit(x, y, max_depth, min_leaf))
        }
        ModelSpec::RandomForest {
            trees,
            max_depth,
            min_leaf,
            max_features,
        } => Model::Forest(RandomForest::fit(x, y, trees, max_depth, min_leaf, max_features, rng)),
    })
}

pub fn predict(spec: &ModelSpec, model: &Model, x: &Matrix) -> Result<PredictedClaims> {
    PredictedClaims::new(model.predict_scores(x), *spec)
}
