//! Model specifications, trailing-window fits and the candidate grid.

pub mod forest;
pub mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::panel::{Observation, SplitPanel};

pub use forest::{fit_forest, RandomForest};
pub use linear::{fit_elastic_net, fit_lasso, fit_ridge, LinearModel};

/// A model family together with its hyperparameters (no training window).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Specification {
    Ridge { alpha: f64 },
    Lasso { alpha: f64 },
    ElasticNet { alpha: f64, l1_ratio: f64 },
    RandomForest { n_trees: usize, max_depth: usize, seed: u64 },
}

impl Specification {
    pub fn family(&self) -> &'static str {
        match self {
            Specification::Ridge { .. } => "ridge",
            Specification::Lasso { .. } => "lasso",
            Specification::ElasticNet { .. } => "enet",
            Specification::RandomForest { .. } => "rf",
        }
    }

    pub fn hyperparameters(&self) -> String {
        match *self {
            Specification::Ridge { alpha } | Specification::Lasso { alpha } => format!("alpha={alpha}"),
            Specification::ElasticNet { alpha, l1_ratio } => format!("alpha={alpha};r={l1_ratio}"),
            Specification::RandomForest {
                n_trees,
                max_depth,
                seed,
            } => format!("trees={n_trees};depth={max_depth};seed={seed}"),
        }
    }

    pub fn fit(&self, data: &[Observation]) -> Result<Predictor> {
        self.fit_with(data, Execution::default())
    }

    pub fn fit_with(&self, data: &[Observation], exec: Execution) -> Result<Predictor> {
        Ok(match *self {
            Specification::Ridge { alpha } => Predictor::Linear(fit_ridge(data, alpha)?),
            Specification::Lasso { alpha } => Predictor::Linear(fit_lasso(data, alpha)?),
            Specification::ElasticNet { alpha, l1_ratio } => {
                Predictor::Linear(fit_elastic_net(data, alpha, l1_ratio)?)
            }
            Specification::RandomForest {
                n_trees,
                max_depth,
                seed,
            } => Predictor::Forest(forest::fit_forest_with(data, n_trees, max_depth, seed, exec)?),
        })
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family(), self.hyperparameters().replace(';', ","))
    }
}

/// A specification paired with a training-window exponent `k`; at period `t`
/// the model is trained on the last `4^k ∧ (t − 1)` periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub specification: Specification,
    pub window_exponent: u32,
}

impl ModelSpec {
    pub fn window(&self, t: usize) -> usize {
        effective_window(self.window_exponent, t)
    }

    /// Fits on the training side of periods `t − window .. t − 1`.
    pub fn fit_at(&self, t: usize, splits: &SplitPanel, exec: Execution) -> Result<FittedModel> {
        if t < 2 || t - 1 > splits.num_periods() {
            return Err(Error::invalid(format!("cannot fit at period {t}")));
        }
        let w = self.window(t);
        let data = splits.train_window(t - w, t - 1);
        self.fit_on(&data, t, w, exec)
    }

    fn fit_on(&self, data: &[Observation], t: usize, w: usize, exec: Execution) -> Result<FittedModel> {
        let predictor = self.specification.fit_with(data, exec).map_err(|e| Error::Fit {
            spec: self.to_string(),
            source: Box::new(e),
        })?;
        Ok(FittedModel {
            specification: self.specification.clone(),
            window_exponent: Some(self.window_exponent),
            fit_period: t,
            effective_window: w,
            training_count: data.len(),
            predictor,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} k={}", self.specification, self.window_exponent)
    }
}

/// Parses `family:key=value,...`, e.g. `ridge:alpha=1,k=2`,
/// `enet:alpha=1,r=0.05,k=0`, `rf:trees=100,depth=5,seed=0,k=3`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::invalid(format!("model spec `{s}`: {msg}"));
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::BTreeMap::new();
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("`{kv}` is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |keys: &[&str]| -> Option<String> {
            keys.iter().find_map(|k| params.remove(*k))
        };
        let num = |v: Option<String>, name: &str| -> Result<f64> {
            let v = v.ok_or_else(|| bad(format!("missing `{name}`")))?;
            v.parse().map_err(|_| bad(format!("`{name}={v}` is not a number")))
        };
        let int = |v: Option<String>, name: &str| -> Result<u64> {
            let v = v.ok_or_else(|| bad(format!("missing `{name}`")))?;
            v.parse().map_err(|_| bad(format!("`{name}={v}` is not an integer")))
        };
        let specification = match family.trim() {
            "ridge" => Specification::Ridge {
                alpha: num(take(&["alpha"]), "alpha")?,
            },
            "lasso" => Specification::Lasso {
                alpha: num(take(&["alpha"]), "alpha")?,
            },
            "enet" | "elastic_net" => Specification::ElasticNet {
                alpha: num(take(&["alpha"]), "alpha")?,
                l1_ratio: num(take(&["r", "l1_ratio"]), "r")?,
            },
            "rf" | "forest" | "random_forest" => Specification::RandomForest {
                n_trees: int(take(&["trees", "n_trees"]), "trees")? as usize,
                max_depth: int(take(&["depth", "max_depth"]), "depth")? as usize,
                seed: take(&["seed"]).map(|v| int(Some(v), "seed")).transpose()?.unwrap_or(0),
            },
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        let window_exponent = int(take(&["k"]), "k")? as u32;
        if let Some(extra) = params.keys().next() {
            return Err(bad(format!("unknown key `{extra}`")));
        }
        Ok(ModelSpec {
            specification,
            window_exponent,
        })
    }
}

/// `4^k ∧ (t − 1)`.
pub fn effective_window(k: u32, t: usize) -> usize {
    let span = 4usize.checked_pow(k).unwrap_or(usize::MAX);
    span.min(t.saturating_sub(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Linear(LinearModel),
    Forest(RandomForest),
}

impl Predictor {
    pub fn dim(&self) -> usize {
        match self {
            Predictor::Linear(m) => m.dim(),
            Predictor::Forest(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Predictor::Linear(m) => m.predict(x),
            Predictor::Forest(m) => m.predict(x),
        }
    }
}

/// A trained candidate tagged with how it was trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub specification: Specification,
    /// `None` for models not trained on a `4^k` window (e.g. the CV refit).
    pub window_exponent: Option<u32>,
    pub fit_period: usize,
    pub effective_window: usize,
    pub training_count: usize,
    pub predictor: Predictor,
}

impl FittedModel {
    /// Wraps a predictor fitted outside the grid machinery.
    pub fn standalone(specification: Specification, predictor: Predictor, training_count: usize) -> Self {
        Self {
            specification,
            window_exponent: None,
            fit_period: 0,
            effective_window: 0,
            training_count,
            predictor,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predictor.predict(x)
    }

    pub fn dim(&self) -> usize {
        self.predictor.dim()
    }

    pub fn label(&self) -> String {
        match self.window_exponent {
            Some(k) => format!("{} k={k}", self.specification),
            None => format!("{} w={}", self.specification, self.effective_window),
        }
    }
}

fn default_ridge() -> Vec<f64> {
    vec![1e-3, 10f64.powf(-1.5), 1.0, 10f64.powf(1.5), 1e3]
}
fn default_lasso() -> Vec<f64> {
    vec![1e-5, 10f64.powf(-3.5), 1e-2, 10f64.powf(-0.5), 10.0]
}
fn default_enet_alpha() -> Vec<f64> {
    vec![1e-3, 1.0, 1e3]
}
fn default_enet_ratio() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}
fn default_trees() -> Vec<usize> {
    vec![10, 100, 200]
}
fn default_depths() -> Vec<usize> {
    vec![3, 5, 10]
}
fn default_windows() -> Vec<u32> {
    (0..=5).collect()
}

/// Hyperparameter grid crossed with training-window exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_ridge")]
    pub ridge_alphas: Vec<f64>,
    #[serde(default = "default_lasso")]
    pub lasso_alphas: Vec<f64>,
    #[serde(default = "default_enet_alpha")]
    pub enet_alphas: Vec<f64>,
    #[serde(default = "default_enet_ratio")]
    pub enet_l1_ratios: Vec<f64>,
    #[serde(default = "default_trees")]
    pub forest_trees: Vec<usize>,
    #[serde(default = "default_depths")]
    pub forest_depths: Vec<usize>,
    #[serde(default)]
    pub forest_seed: u64,
    #[serde(default = "default_windows")]
    pub window_exponents: Vec<u32>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            ridge_alphas: default_ridge(),
            lasso_alphas: default_lasso(),
            enet_alphas: default_enet_alpha(),
            enet_l1_ratios: default_enet_ratio(),
            forest_trees: default_trees(),
            forest_depths: default_depths(),
            forest_seed: 0,
            window_exponents: default_windows(),
        }
    }
}

impl GridConfig {
    /// A grid with no specifications; fill in the families you want.
    pub fn empty() -> Self {
        Self {
            ridge_alphas: vec![],
            lasso_alphas: vec![],
            enet_alphas: vec![],
            enet_l1_ratios: vec![],
            forest_trees: vec![],
            forest_depths: vec![],
            forest_seed: 0,
            window_exponents: default_windows(),
        }
    }

    /// Specifications in grid order: ridge, lasso, elastic net (α outer, r
    /// inner), forest (trees outer, depth inner).
    pub fn specifications(&self) -> Vec<Specification> {
        let mut out = Vec::new();
        out.extend(self.ridge_alphas.iter().map(|&alpha| Specification::Ridge { alpha }));
        out.extend(self.lasso_alphas.iter().map(|&alpha| Specification::Lasso { alpha }));
        for &alpha in &self.enet_alphas {
            for &l1_ratio in &self.enet_l1_ratios {
                out.push(Specification::ElasticNet { alpha, l1_ratio });
            }
        }
        for &n_trees in &self.forest_trees {
            for &max_depth in &self.forest_depths {
                out.push(Specification::RandomForest {
                    n_trees,
                    max_depth,
                    seed: self.forest_seed,
                });
            }
        }
        out
    }

    /// Every specification crossed with every window exponent (window inner).
    pub fn model_specs(&self) -> Vec<ModelSpec> {
        self.specifications()
            .into_iter()
            .flat_map(|specification| {
                self.window_exponents.iter().map(move |&window_exponent| ModelSpec {
                    specification: specification.clone(),
                    window_exponent,
                })
            })
            .collect()
    }
}

/// Fits every grid candidate at period `t` on trailing training windows.
pub fn build_candidate_grid(
    t: usize,
    splits: &SplitPanel,
    grid: &GridConfig,
    exec: Execution,
) -> Result<Vec<FittedModel>> {
    if t < 2 {
        return Err(Error::invalid("candidate grid needs t >= 2"));
    }
    if t - 1 > splits.num_periods() {
        return Err(Error::invalid(format!(
            "period {t} needs {} history periods, split has {}",
            t - 1,
            splits.num_periods()
        )));
    }
    let specs = grid.model_specs();
    let mut windows: Vec<usize> = specs.iter().map(|s| s.window(t)).collect();
    windows.sort_unstable();
    windows.dedup();
    let window_data: Vec<(usize, Vec<Observation>)> = windows
        .into_iter()
        .map(|w| (w, splits.train_window(t - w, t - 1)))
        .collect();
    exec.try_map_range(specs.len(), |i| {
        let spec = &specs[i];
        let w = spec.window(t);
        let data = &window_data.iter().find(|(ww, _)| *ww == w).expect("window cached").1;
        spec.fit_on(data, t, w, exec)
    })
}
