//! Bagged regression trees grown by exact best-split search.
//!
//! Each tree is fit to a bootstrap resample of size `n` drawn from
//! `rng::substream(seed, FOREST, tree_index)`. Every split considers all
//! features and every midpoint between consecutive distinct sorted values,
//! scoring by reduction in squared error. Ties go to the lowest feature index,
//! then the lowest threshold. Growth stops at `max_depth`, at pure nodes, or
//! when no split reduces the error.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::linear::check_data;
use crate::panel::Observation;
use crate::rng::{self, domain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub fn fit_forest(data: &[Observation], n_trees: usize, max_depth: usize, seed: u64) -> Result<RandomForest> {
    fit_forest_with(data, n_trees, max_depth, seed, Execution::default())
}

pub fn fit_forest_with(
    data: &[Observation],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
    exec: Execution,
) -> Result<RandomForest> {
    if n_trees == 0 || max_depth == 0 {
        return Err(Error::invalid("forest needs at least one tree and depth at least one"));
    }
    let d = check_data(data)?;
    let n = data.len();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| data.iter().map(|o| o.x[j]).collect()).collect();
    let ys: Vec<f64> = data.iter().map(|o| o.y).collect();
    let trees = exec.map_range(n_trees, |k| {
        let mut rng = rng::substream(seed, domain::FOREST, k as u64);
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        fit_tree(&cols, &ys, sample, max_depth)
    });
    Ok(RandomForest { dim: d, trees })
}

/// Grows one tree on the rows listed in `sample` (duplicates allowed).
pub fn fit_tree(cols: &[Vec<f64>], ys: &[f64], sample: Vec<usize>, max_depth: usize) -> RegressionTree {
    let mut nodes = Vec::new();
    grow(cols, ys, sample, 0, max_depth, &mut nodes);
    RegressionTree { nodes }
}

fn grow(
    cols: &[Vec<f64>],
    ys: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let at = nodes.len();
    let mean = rows.iter().map(|&i| ys[i]).sum::<f64>() / rows.len() as f64;
    nodes.push(Node::Leaf(mean));
    if depth >= max_depth || rows.len() < 2 {
        return at;
    }
    let Some((feature, threshold)) = best_split(cols, ys, &rows) else {
        return at;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&i| cols[feature][i] <= threshold);
    let left = grow(cols, ys, left_rows, depth + 1, max_depth, nodes);
    let right = grow(cols, ys, right_rows, depth + 1, max_depth, nodes);
    nodes[at] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    at
}

/// Exact search maximising `S_L²/n_L + S_R²/n_R` (equivalently minimising the
/// children's summed squared error). Returns `None` for pure nodes or when no
/// candidate split strictly improves on the parent.
pub fn best_split(cols: &[Vec<f64>], ys: &[f64], rows: &[usize]) -> Option<(usize, f64)> {
    let n = rows.len();
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(ys[i]), hi.max(ys[i])));
    if lo == hi {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| ys[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = rows.to_vec();
    for (f, col) in cols.iter().enumerate() {
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += ys[order[pos]];
            let (a, b) = (col[order[pos]], col[order[pos + 1]]);
            if a == b {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = (n - pos - 1) as f64;
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            let better = match best {
                None => true,
                Some((s, _, _)) => score > s + 1e-12 * s.abs(),
            };
            if better {
                let mut threshold = 0.5 * (a + b);
                if threshold >= b {
                    threshold = a;
                }
                best = Some((score, f, threshold));
            }
        }
    }
    let (score, f, threshold) = best?;
    (score > parent + 1e-12 * parent.abs()).then_some((f, threshold))
}
