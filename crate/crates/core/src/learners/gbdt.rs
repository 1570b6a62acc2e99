//! Exact greedy, depth-wise gradient boosting with unit hessians.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, TaskType};
use super::{sigmoid, LearnError};
use crate::model::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Logistic,
    SquaredError,
}

impl Objective {
    pub fn for_task(task: TaskType) -> Objective {
        match task {
            TaskType::BinaryClass => Objective::Logistic,
            TaskType::Regression => Objective::SquaredError,
        }
    }
}

/// Tree node. Children are indices into the owning tree's node list; rows
/// with `x[feature] < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub schema_id: String,
    pub n_features: usize,
    pub objective: Objective,
    pub base_score: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    /// Margin before any link function.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        self.trees.iter().fold(self.base_score, |m, t| m + t.eval(x))
    }

    pub fn predict_values(&self, x: &[f64]) -> f64 {
        let m = self.predict_raw(x);
        match self.objective {
            Objective::Logistic => sigmoid(m),
            Objective::SquaredError => m,
        }
    }

    /// Structural checks applied to models read from disk.
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |s: String| Err(LearnError::CorruptModel(s));
        if !self.base_score.is_finite() {
            return bad("non-finite base score".into());
        }
        for (ti, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return bad(format!("tree {ti} is empty"));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match *node {
                    Node::Leaf { value } if !value.is_finite() => return bad(format!("tree {ti}: non-finite leaf")),
                    Node::Split { feature, threshold, left, right } => {
                        if feature >= self.n_features || !threshold.is_finite() {
                            return bad(format!("tree {ti} node {i}: bad split"));
                        }
                        // children always follow their parent, which rules out cycles
                        if left <= i || right <= i || left >= tree.nodes.len() || right >= tree.nodes.len() {
                            return bad(format!("tree {ti} node {i}: bad child index"));
                        }
                    }
                    _ => {}
                }
            }
            if tree.depth() > self.max_depth {
                return bad(format!("tree {ti} deeper than {}", self.max_depth));
            }
        }
        Ok(())
    }
}

/// Probability for logistic models, raw value for regression.
pub fn predict_gbdt(model: &GbdtModel, fv: &FeatureVector) -> Result<f64, LearnError> {
    if fv.schema_id != model.schema_id || fv.len() != model.n_features {
        return Err(LearnError::SchemaMismatch {
            expected: format!("{} ({} features)", model.schema_id, model.n_features),
            found: format!("{} ({} features)", fv.schema_id, fv.len()),
        });
    }
    Ok(model.predict_values(&fv.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub lambda: f64,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { n_trees: 200, max_depth: 4, learning_rate: 0.1, min_leaf: 1, lambda: 1.0, subsample: 1.0, seed: 0 }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<(), LearnError> {
        let bad = |s: &str| Err(LearnError::InvalidParams(s.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.min_leaf == 0 {
            return bad("min_leaf must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        Ok(())
    }
}

/// Mean training loss: log-loss on margins, or mean squared error.
pub fn loss(objective: Objective, margins: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| match objective {
            Objective::Logistic => m.max(0.0) + (-m.abs()).exp().ln_1p() - y * m,
            Objective::SquaredError => (m - y) * (m - y),
        })
        .sum();
    total / margins.len() as f64
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    /// Per feature, the sampled rows sorted by that feature.
    sorted: Vec<Vec<usize>>,
    /// Node currently owning each row.
    owner: Vec<usize>,
    params: &'a GbdtParams,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn score(&self, g: f64, n: usize) -> f64 {
        g * g / (n as f64 + self.params.lambda)
    }

    fn best_split(&self, node: usize, rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let g_total: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let parent = self.score(g_total, n);
        let mut best: Option<Split> = None;
        for (f, order) in self.sorted.iter().enumerate() {
            let mut g_left = 0.0;
            let mut n_left = 0;
            let mut prev: Option<f64> = None;
            for &r in order.iter().filter(|&&r| self.owner[r] == node) {
                let v = self.x[r][f];
                if let Some(p) = prev {
                    if p < v && n_left >= min_leaf && n - n_left >= min_leaf {
                        let gain = self.score(g_left, n_left) + self.score(g_total - g_left, n - n_left) - parent;
                        if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                            let mid = p + (v - p) / 2.0;
                            let threshold = if mid > p { mid } else { v };
                            best = Some(Split { feature: f, threshold, gain });
                        }
                    }
                }
                g_left += self.grad[r];
                n_left += 1;
                prev = Some(v);
            }
        }
        best
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        Node::Leaf { value: -self.params.learning_rate * g / (rows.len() as f64 + self.params.lambda) }
    }

    fn grow(&mut self, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        for &r in &rows {
            self.owner[r] = id;
        }
        let split = if depth < self.params.max_depth { self.best_split(id, &rows) } else { None };
        match split {
            None => nodes[id] = self.leaf(&rows),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.x[r][s.feature] < s.threshold);
                let left = self.grow(nodes, l, depth + 1);
                let right = self.grow(nodes, r, depth + 1);
                nodes[id] = Node::Split { feature: s.feature, threshold: s.threshold, left, right };
            }
        }
        id
    }
}

/// Trains a model and also returns the mean training loss before the first
/// tree and after each tree.
pub fn train_gbdt_traced(data: &Dataset, params: &GbdtParams) -> Result<(GbdtModel, Vec<f64>), LearnError> {
    data.validate()?;
    params.validate()?;
    let objective = Objective::for_task(data.task);
    let n = data.len();
    let y = &data.labels;
    let mean = y.iter().sum::<f64>() / n as f64;
    let base_score = match objective {
        Objective::Logistic => {
            if mean <= 0.0 || mean >= 1.0 {
                return Err(LearnError::DegenerateLabels);
            }
            (mean / (1.0 - mean)).ln()
        }
        Objective::SquaredError => mean,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut margins = vec![base_score; n];
    let mut history = vec![loss(objective, &margins, y)];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; n];
    let presorted: Vec<Vec<usize>> = (0..data.n_features())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
            idx
        })
        .collect();
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    for _ in 0..params.n_trees {
        for i in 0..n {
            grad[i] = match objective {
                Objective::Logistic => sigmoid(margins[i]) - y[i],
                Objective::SquaredError => margins[i] - y[i],
            };
        }
        let mut in_sample = vec![take == n; n];
        if take < n {
            for i in sample(&mut rng, n, take) {
                in_sample[i] = true;
            }
        }
        let rows: Vec<usize> = (0..n).filter(|&i| in_sample[i]).collect();
        let sorted = presorted.iter().map(|o| o.iter().copied().filter(|&r| in_sample[r]).collect()).collect();
        let mut builder = Builder { x: &data.rows, grad: &grad, sorted, owner: vec![usize::MAX; n], params };
        let mut nodes = Vec::new();
        builder.grow(&mut nodes, rows, 0);
        let tree = Tree { nodes };
        for (m, x) in margins.iter_mut().zip(&data.rows) {
            *m += tree.eval(x);
        }
        history.push(loss(objective, &margins, y));
        trees.push(tree);
    }

    let model = GbdtModel {
        schema_id: data.schema_id.clone(),
        n_features: data.n_features(),
        objective,
        base_score,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        trees,
    };
    Ok((model, history))
}

pub fn train_gbdt(data: &Dataset, params: &GbdtParams) -> Result<GbdtModel, LearnError> {
    train_gbdt_traced(data, params).map(|(m, _)| m)
}
