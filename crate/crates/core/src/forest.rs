//! Conditional inference survival ensembles.
//!
//! Every tree is grown on its own resample of the training rows. A subject's
//! ensemble curve pools, over all trees, the weighted event counts and
//! at-risk counts of the terminal nodes the subject falls into, then forms a
//! single product-limit estimate:
//!
//! ```text
//! S(t | x) = Π_{t_j ≤ t} (1 − Σ_n T_n(t_j, x) / Σ_n Q_n(t_j, x))
//! ```
//!
//! where `T_n` counts events at `t_j` and `Q_n` subjects at risk at `t_j` in
//! tree `n`'s node, both with bootstrap multiplicity. Nodes holding more
//! subjects at risk therefore carry more weight, and a forest of root-only
//! trees grown without resampling reproduces the pooled Kaplan-Meier curve.
//!
//! The same tree code fits a binary churn response; there the pooled node
//! counts give a churn probability instead of a curve.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::ctree::{grow, ConditionalTree, Covariates, Response, SurvivalLeaf, SurvivalResponse, SurvivalTree, TreeConfig};
use crate::error::{Error, Result};
use crate::evaluation::{brier_curve, default_horizon, time_grid};
use crate::exec::{Executor, Sequential};
use crate::rng::{derive_seed, seeded, Rng};
use crate::survival::{median_survival, SurvivalCurve, SurvivalDataset};

/// How each tree's training rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Resampling {
    /// `round(fraction * n)` draws with replacement.
    Bootstrap { fraction: f64 },
    /// `round(fraction * n)` distinct rows without replacement.
    Subsample { fraction: f64 },
    /// Every tree sees every row once.
    Disabled,
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling::Bootstrap { fraction: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Per-tree settings. `tree.rng_seed` is ignored; tree streams derive
    /// from `rng_seed` below.
    pub tree: TreeConfig,
    pub resampling: Resampling,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 1000,
            tree: TreeConfig::default(),
            resampling: Resampling::default(),
            rng_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        match self.resampling {
            Resampling::Bootstrap { fraction } | Resampling::Subsample { fraction }
                if !(fraction > 0.0 && fraction.is_finite()) =>
            {
                Err(Error::InvalidConfig("resampling fraction must be positive".into()))
            }
            Resampling::Subsample { fraction } if fraction > 1.0 => Err(Error::InvalidConfig(
                "subsampling fraction cannot exceed 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Covariates tried per node for `p` features.
    pub fn mtry(&self, p: usize) -> usize {
        match self.tree.mtry {
            Some(m) => m.min(p),
            None => (libm::ceil(libm::sqrt(p as f64)) as usize).clamp(1, p.max(1)),
        }
    }
}

fn draw_inbag(n: usize, resampling: Resampling, rng: &mut Rng) -> Vec<u32> {
    let mut counts = alloc::vec![0u32; n];
    match resampling {
        Resampling::Disabled => counts.iter_mut().for_each(|c| *c = 1),
        Resampling::Bootstrap { fraction } => {
            let m = (libm::round(fraction * n as f64) as usize).max(1);
            for _ in 0..m {
                counts[rng.random_range(0..n)] += 1;
            }
        }
        Resampling::Subsample { fraction } => {
            let m = (libm::round(fraction * n as f64) as usize).clamp(1, n);
            for i in index::sample(rng, n, m) {
                counts[i] = 1;
            }
        }
    }
    counts
}

fn grow_member<C, R>(
    cov: &C,
    response: &R,
    row_weight: impl Fn(usize) -> f64,
    config: &ForestConfig,
    mtry: usize,
    index: usize,
) -> (ConditionalTree<R::Leaf>, Vec<u32>)
where
    C: Covariates + ?Sized,
    R: Response,
{
    let mut rng = seeded(derive_seed(config.rng_seed, index as u64));
    let inbag = draw_inbag(cov.n_rows(), config.resampling, &mut rng);
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (r, &c) in inbag.iter().enumerate() {
        if c > 0 {
            rows.push(r);
            weights.push(c as f64 * row_weight(r));
        }
    }
    (grow(cov, response, rows, weights, &config.tree, mtry, &mut rng), inbag)
}

/// Ensemble of conditional inference survival trees.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivalForest {
    pub trees: Vec<SurvivalTree>,
    /// Per tree, the resampling multiplicity of every training row.
    pub inbag: Vec<Vec<u32>>,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    /// Pooled distinct event times of the training data; the time grid of
    /// every predicted curve.
    pub event_times: Vec<f64>,
}

pub fn fit_forest(data: &SurvivalDataset, config: &ForestConfig) -> Result<SurvivalForest> {
    fit_forest_with(data, config, &Sequential)
}

pub fn fit_forest_with<E: Executor>(
    data: &SurvivalDataset,
    config: &ForestConfig,
    exec: &E,
) -> Result<SurvivalForest> {
    config.validate()?;
    let mtry = config.mtry(data.n_features());
    let response = SurvivalResponse { data };
    let obs = data.observations();
    let members = exec.map(config.n_trees, |i| {
        grow_member(data, &response, |r| obs[r].weight, config, mtry, i)
    });
    let (trees, inbag) = members.into_iter().unzip();

    let mut event_times: Vec<f64> = obs
        .iter()
        .filter(|o| o.event && o.weight > 0.0)
        .map(|o| o.time)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    Ok(SurvivalForest {
        trees,
        inbag,
        config: config.clone(),
        feature_names: data.feature_names().to_vec(),
        event_times,
    })
}

impl SurvivalForest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_train(&self) -> usize {
        self.inbag.first().map_or(0, Vec::len)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Ensemble curve over all trees.
    pub fn predict(&self, x: &[f64]) -> Result<SurvivalCurve> {
        self.check_dim(x)?;
        Ok(self.pool(self.trees.iter().map(|t| t.root.route(x))))
    }

    /// Ensemble curve over the trees for which training row `row` was out of
    /// bag, evaluated at covariates `x`. `None` if the row is in every bag.
    pub fn predict_out_of_bag(&self, row: usize, x: &[f64]) -> Result<Option<SurvivalCurve>> {
        self.check_dim(x)?;
        if row >= self.n_train() {
            return Err(Error::InvalidInput(alloc::format!("row {row} is not a training row")));
        }
        let mut leaves = self
            .trees
            .iter()
            .zip(&self.inbag)
            .filter(|(_, bag)| bag[row] == 0)
            .map(|(t, _)| t.root.route(x))
            .peekable();
        if leaves.peek().is_none() {
            return Ok(None);
        }
        Ok(Some(self.pool(leaves)))
    }

    /// Rows with at least one out-of-bag tree.
    pub fn out_of_bag_rows(&self) -> Vec<usize> {
        (0..self.n_train())
            .filter(|&r| self.inbag.iter().any(|bag| bag[r] == 0))
            .collect()
    }

    fn pool<'a>(&self, leaves: impl Iterator<Item = &'a SurvivalLeaf>) -> SurvivalCurve {
        let grid = &self.event_times;
        let mut events = alloc::vec![0.0; grid.len()];
        // bucket[k]: weight whose observed time lies in [grid[k], grid[k+1])
        let mut bucket = alloc::vec![0.0; grid.len()];
        for leaf in leaves {
            let p = &leaf.profile;
            for k in 0..p.times.len() {
                let t = p.times[k];
                let b = grid.partition_point(|&s| s <= t);
                if b == 0 {
                    continue;
                }
                bucket[b - 1] += p.counts[k];
                if p.events[k] > 0.0 && grid[b - 1] == t {
                    events[b - 1] += p.events[k];
                }
            }
        }
        let mut times = Vec::new();
        let mut probs = Vec::new();
        let mut at_risk = 0.0;
        let mut risk = alloc::vec![0.0; grid.len()];
        for k in (0..grid.len()).rev() {
            at_risk += bucket[k];
            risk[k] = at_risk;
        }
        let mut s = 1.0;
        for k in 0..grid.len() {
            if events[k] > 0.0 && risk[k] > 0.0 {
                s *= 1.0 - events[k] / risk[k];
                times.push(grid[k]);
                probs.push(s.clamp(0.0, 1.0));
            }
        }
        SurvivalCurve::from_parts_unchecked(times, probs)
    }
}

pub fn predict_forest_survival(forest: &SurvivalForest, x: &[f64]) -> Result<SurvivalCurve> {
    forest.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskAssessment {
    pub median: Option<f64>,
    /// Median survival exists and falls within the horizon.
    pub at_risk: bool,
}

pub fn predict_median_and_risk(forest: &SurvivalForest, x: &[f64], horizon: f64) -> Result<RiskAssessment> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let curve = forest.predict(x)?;
    Ok(assess_risk(&curve, horizon))
}

/// At-risk classification of a single curve by its median survival.
pub fn assess_risk(curve: &SurvivalCurve, horizon: f64) -> RiskAssessment {
    let median = median_survival(curve);
    RiskAssessment {
        median,
        at_risk: median.is_some_and(|m| m <= horizon),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ImportanceConfig {
    pub n_repeats: usize,
    pub seed: u64,
    /// Brier integration horizon; defaults to the 95th percentile of
    /// observed times.
    pub horizon: Option<f64>,
    pub grid_points: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            n_repeats: 5,
            seed: 0,
            horizon: None,
            grid_points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean increase of out-of-bag IBS when the feature is permuted.
    pub importance: f64,
    /// Standard error of the mean over permutation repeats.
    pub std_error: f64,
    /// 1 = most important.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImportanceReport {
    pub baseline_ibs: f64,
    /// In feature order.
    pub features: Vec<FeatureImportance>,
}

/// Permutation importance on out-of-bag integrated Brier score.
pub fn variable_importance(
    forest: &SurvivalForest,
    data: &SurvivalDataset,
    config: &ImportanceConfig,
) -> Result<ImportanceReport> {
    if data.n_features() != forest.n_features() {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features(),
            found: data.n_features(),
        });
    }
    if data.len() != forest.n_train() {
        return Err(Error::InvalidInput(alloc::format!(
            "forest was trained on {} rows, got {}",
            forest.n_train(),
            data.len()
        )));
    }
    if config.n_repeats == 0 {
        return Err(Error::InvalidConfig("n_repeats must be at least 1".into()));
    }
    let oob = forest.out_of_bag_rows();
    if oob.is_empty() {
        return Err(Error::NoOutOfBag);
    }
    let oob_data = data.subset(&oob)?;
    let horizon = config.horizon.unwrap_or_else(|| default_horizon(data));
    let grid = time_grid(horizon, config.grid_points.max(2));
    let obs = data.observations();

    let ibs_with = |column: Option<(usize, &[f64])>| -> Result<f64> {
        let mut curves = Vec::with_capacity(oob.len());
        let mut x = alloc::vec![0.0; forest.n_features()];
        for (k, &r) in oob.iter().enumerate() {
            x.copy_from_slice(&obs[r].covariates);
            if let Some((j, values)) = column {
                x[j] = values[k];
            }
            curves.push(forest.predict_out_of_bag(r, &x)?.expect("row has out-of-bag trees"));
        }
        Ok(brier_curve(&curves, &oob_data, &grid)?.ibs)
    };

    let baseline_ibs = ibs_with(None)?;
    let mut rng = seeded(config.seed);
    let mut features = Vec::with_capacity(forest.n_features());
    for j in 0..forest.n_features() {
        let original: Vec<f64> = oob.iter().map(|&r| obs[r].covariates[j]).collect();
        let mut deltas = Vec::with_capacity(config.n_repeats);
        for _ in 0..config.n_repeats {
            let mut permuted = original.clone();
            permuted.shuffle(&mut rng);
            deltas.push(ibs_with(Some((j, &permuted)))? - baseline_ibs);
        }
        let m = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / m;
        let std_error = if deltas.len() > 1 {
            let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m - 1.0);
            libm::sqrt(var / m)
        } else {
            0.0
        };
        features.push(FeatureImportance {
            feature: forest.feature_names[j].clone(),
            importance: mean,
            std_error,
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| features[b].importance.total_cmp(&features[a].importance));
    for (rank, &j) in order.iter().enumerate() {
        features[j].rank = rank + 1;
    }
    Ok(ImportanceReport {
        baseline_ibs,
        features,
    })
}

/// Covariates with a 0/1 churn label.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    feature_names: Vec<String>,
}

impl BinaryDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<bool>, feature_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let dim = feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self {
            rows,
            labels,
            feature_names,
        })
    }

    /// Uses the event indicator as the churn label.
    pub fn from_survival(data: &SurvivalDataset) -> Self {
        Self {
            rows: data.observations().iter().map(|o| o.covariates.clone()).collect(),
            labels: data.observations().iter().map(|o| o.event).collect(),
            feature_names: data.feature_names().to_vec(),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Covariates for BinaryDataset {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn value(&self, row: usize, feature: usize) -> f64 {
        self.rows[row][feature]
    }
}

/// Terminal node of a binary churn tree.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryLeaf {
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
    /// Total case weight in the node.
    pub total: f64,
    /// Case weight of churners in the node.
    pub positives: f64,
}

struct BinaryResponse<'a> {
    labels: &'a [bool],
}

impl Response for BinaryResponse<'_> {
    type Leaf = BinaryLeaf;

    fn scores(&self, rows: &[usize], _weights: &[f64]) -> Vec<f64> {
        rows.iter().map(|&r| if self.labels[r] { 1.0 } else { 0.0 }).collect()
    }

    fn leaf(&self, rows: Vec<usize>, weights: Vec<f64>) -> BinaryLeaf {
        let total = weights.iter().sum();
        let positives = rows
            .iter()
            .zip(&weights)
            .filter(|(&r, _)| self.labels[r])
            .map(|(_, w)| w)
            .sum();
        BinaryLeaf {
            members: rows,
            weights,
            total,
            positives,
        }
    }
}

pub type BinaryTree = ConditionalTree<BinaryLeaf>;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryForest {
    pub trees: Vec<BinaryTree>,
    pub inbag: Vec<Vec<u32>>,
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
}

pub fn fit_binary_forest(data: &BinaryDataset, config: &ForestConfig) -> Result<BinaryForest> {
    fit_binary_forest_with(data, config, &Sequential)
}

pub fn fit_binary_forest_with<E: Executor>(
    data: &BinaryDataset,
    config: &ForestConfig,
    exec: &E,
) -> Result<BinaryForest> {
    config.validate()?;
    if data.labels.iter().all(|&l| l) || data.labels.iter().all(|&l| !l) {
        return Err(Error::DegenerateLabels);
    }
    let mtry = config.mtry(data.feature_names.len());
    let response = BinaryResponse { labels: &data.labels };
    let members = exec.map(config.n_trees, |i| grow_member(data, &response, |_| 1.0, config, mtry, i));
    let (trees, inbag) = members.into_iter().unzip();
    Ok(BinaryForest {
        trees,
        inbag,
        config: config.clone(),
        feature_names: data.feature_names.clone(),
    })
}

impl BinaryForest {
    /// Pooled node churn fraction `Σ positives / Σ total` over trees.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        let (mut pos, mut tot) = (0.0, 0.0);
        for tree in &self.trees {
            let leaf = tree.root.route(x);
            pos += leaf.positives;
            tot += leaf.total;
        }
        Ok(if tot > 0.0 { (pos / tot).clamp(0.0, 1.0) } else { 0.0 })
    }
}

pub fn predict_binary(forest: &BinaryForest, x: &[f64]) -> Result<f64> {
    forest.predict(x)
}
