//! Conditional inference survival trees.
//!
//! Each node runs a two-step procedure. First, every candidate covariate is
//! tested for association with the node's response scores through a linear
//! statistic `T = Σ w_i x_i h_i` whose permutation mean and variance are
//! known in closed form; the smallest p-value, Bonferroni-adjusted for the
//! number of covariates tested, decides whether to split at all. Second, the
//! winning covariate is split at the threshold maximizing the standardized
//! two-sample statistic. Separating variable selection from cut-point search
//! keeps covariates with many distinct values from winning by chance.
//!
//! For survival responses the scores are log-rank scores recomputed on the
//! node's own rows; binary responses use the 0/1 labels directly.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::special::chi2_1_sf;
use crate::survival::{logrank_scores_weighted, RiskTable, SurvivalCurve, SurvivalDataset};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TreeConfig {
    /// A node splits only if its adjusted p-value is at most `alpha`.
    pub alpha: f64,
    /// Minimum total case weight of each child.
    pub min_node_size: usize,
    /// Minimum total case weight of a node to attempt a split.
    pub min_split_size: usize,
    /// Covariates sampled per node; `None` tests all of them in a standalone
    /// tree and `ceil(sqrt(p))` inside a forest.
    pub mtry: Option<usize>,
    pub rng_seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_node_size: 20,
            min_split_size: 60,
            mtry: None,
            rng_seed: 0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.min_node_size < 1 {
            return Err(Error::InvalidConfig("min_node_size must be at least 1".into()));
        }
        if self.min_split_size < 2 * self.min_node_size {
            return Err(Error::InvalidConfig(
                "min_split_size must be at least twice min_node_size".into(),
            ));
        }
        if self.mtry == Some(0) {
            return Err(Error::InvalidConfig("mtry must be positive".into()));
        }
        Ok(())
    }
}

/// Read access to a row-by-feature covariate table.
pub trait Covariates {
    fn n_rows(&self) -> usize;
    fn n_features(&self) -> usize;
    fn value(&self, row: usize, feature: usize) -> f64;
}

impl Covariates for SurvivalDataset {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn n_features(&self) -> usize {
        SurvivalDataset::n_features(self)
    }

    fn value(&self, row: usize, feature: usize) -> f64 {
        self.observations()[row].covariates[feature]
    }
}

/// What a tree is fitted to: node scores for the association tests and the
/// summary stored in each terminal node.
pub trait Response {
    type Leaf;

    /// One score per row of `rows`, computed from the node's data only.
    fn scores(&self, rows: &[usize], weights: &[f64]) -> Vec<f64>;

    fn leaf(&self, rows: Vec<usize>, weights: Vec<f64>) -> Self::Leaf;
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TreeNode<L> {
    Internal {
        feature: usize,
        threshold: f64,
        /// Bonferroni-adjusted p-value of the association test.
        p_value: f64,
        left: Box<TreeNode<L>>,
        right: Box<TreeNode<L>>,
    },
    Terminal(L),
}

impl<L> TreeNode<L> {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Terminal(_) => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn terminals(&self) -> Vec<&L> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Terminal(leaf) => out.push(leaf),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub(crate) fn route(&self, x: &[f64]) -> &L {
        let mut node = self;
        loop {
            match node {
                TreeNode::Terminal(leaf) => return leaf,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// A fitted tree together with the covariate dimension it expects.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionalTree<L> {
    pub root: TreeNode<L>,
    pub n_features: usize,
}

impl<L> ConditionalTree<L> {
    /// Terminal node reached by `x`.
    pub fn route(&self, x: &[f64]) -> Result<&L> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.root.route(x))
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Aggregated weights of a node's members per distinct observed time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeProfile {
    pub times: Vec<f64>,
    /// Total case weight observed exactly at each time.
    pub counts: Vec<f64>,
    /// Event weight at each time.
    pub events: Vec<f64>,
}

impl NodeProfile {
    fn build(samples: &mut [(f64, bool, f64)]) -> Self {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut profile = NodeProfile {
            times: Vec::new(),
            counts: Vec::new(),
            events: Vec::new(),
        };
        for &(t, e, w) in samples.iter() {
            if profile.times.last() != Some(&t) {
                profile.times.push(t);
                profile.counts.push(0.0);
                profile.events.push(0.0);
            }
            let last = profile.times.len() - 1;
            profile.counts[last] += w;
            if e {
                profile.events[last] += w;
            }
        }
        profile
    }

    pub fn total_weight(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Terminal node of a survival tree.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurvivalLeaf {
    /// Distinct training-row indices that reached this node.
    pub members: Vec<usize>,
    /// Case weight of each member (bootstrap multiplicity times row weight).
    pub weights: Vec<f64>,
    pub profile: NodeProfile,
    /// Kaplan-Meier curve over the members.
    pub curve: SurvivalCurve,
}

impl SurvivalLeaf {
    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub(crate) fn from_members(data: &SurvivalDataset, members: Vec<usize>, weights: Vec<f64>) -> Self {
        let obs = data.observations();
        let mut samples: Vec<(f64, bool, f64)> = members
            .iter()
            .zip(&weights)
            .map(|(&r, &w)| (obs[r].time, obs[r].event, w))
            .collect();
        let curve = RiskTable::from_samples(samples.iter().copied())
            .map(|rt| rt.product_limit())
            .unwrap_or_else(|_| SurvivalCurve::flat());
        let profile = NodeProfile::build(&mut samples);
        SurvivalLeaf {
            members,
            weights,
            profile,
            curve,
        }
    }
}

pub type SurvivalTree = ConditionalTree<SurvivalLeaf>;

pub(crate) struct SurvivalResponse<'a> {
    pub data: &'a SurvivalDataset,
}

impl Response for SurvivalResponse<'_> {
    type Leaf = SurvivalLeaf;

    fn scores(&self, rows: &[usize], weights: &[f64]) -> Vec<f64> {
        let obs = self.data.observations();
        let times: Vec<f64> = rows.iter().map(|&r| obs[r].time).collect();
        let events: Vec<bool> = rows.iter().map(|&r| obs[r].event).collect();
        logrank_scores_weighted(&times, &events, weights).unwrap_or_default()
    }

    fn leaf(&self, rows: Vec<usize>, weights: Vec<f64>) -> SurvivalLeaf {
        SurvivalLeaf::from_members(self.data, rows, weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationTest {
    /// Standardized quadratic statistic `(T - μ)² / σ²`.
    pub statistic: f64,
    pub p_value: f64,
}

impl AssociationTest {
    const NONE: AssociationTest = AssociationTest {
        statistic: 0.0,
        p_value: 1.0,
    };
}

/// Permutation test of association between `scores` and `feature_values`
/// under case weights, with the asymptotic chi-square(1) p-value.
pub fn rank_association_test(
    scores: &[f64],
    feature_values: &[f64],
    weights: &[f64],
) -> Result<AssociationTest> {
    if scores.len() != feature_values.len() || scores.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: if feature_values.len() != scores.len() {
                feature_values.len()
            } else {
                weights.len()
            },
        });
    }
    Ok(association(scores, feature_values, weights))
}

fn association(h: &[f64], x: &[f64], w: &[f64]) -> AssociationTest {
    let mut total = 0.0;
    let mut sum_h = 0.0;
    let mut sum_x = 0.0;
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut h_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    for i in 0..w.len() {
        if w[i] > 0.0 {
            total += w[i];
            sum_h += w[i] * h[i];
            sum_x += w[i] * x[i];
            x_min = x_min.min(x[i]);
            x_max = x_max.max(x[i]);
            h_min = h_min.min(h[i]);
            h_max = h_max.max(h[i]);
        }
    }
    // constant covariate or constant scores: nothing measurable
    if !(total > 1.0) || !(x_min < x_max) || !(h_min < h_max) {
        return AssociationTest::NONE;
    }
    let mean_h = sum_h / total;
    let mean_x = sum_x / total;
    let mut var_h = 0.0;
    let mut ss_x = 0.0;
    let mut t = 0.0;
    for i in 0..w.len() {
        if w[i] > 0.0 {
            let dh = h[i] - mean_h;
            let dx = x[i] - mean_x;
            var_h += w[i] * dh * dh;
            ss_x += w[i] * dx * dx;
            t += w[i] * dx * dh;
        }
    }
    var_h /= total;
    // centred statistic: μ = 0 and σ² = W/(W-1) V(h) Σ w (x - x̄)²
    let variance = total / (total - 1.0) * var_h * ss_x;
    if !(variance > 0.0) {
        return AssociationTest::NONE;
    }
    let statistic = t * t / variance;
    AssociationTest {
        statistic,
        p_value: chi2_1_sf(statistic),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    /// Rows with `x <= threshold` go left.
    pub threshold: f64,
    /// Standardized two-sample statistic at the threshold.
    pub criterion: f64,
}

/// Best admissible binary split of `feature` over `rows` by the standardized
/// two-sample log-rank statistic. Repeated row indices count as weights.
pub fn best_split(
    data: &SurvivalDataset,
    rows: &[usize],
    feature: usize,
    config: &TreeConfig,
) -> Option<Split> {
    if feature >= data.n_features() || rows.iter().any(|&r| r >= data.len()) {
        return None;
    }
    let (members, weights) = collapse_rows(data, rows);
    let scores = SurvivalResponse { data }.scores(&members, &weights);
    let values: Vec<f64> = members.iter().map(|&r| data.value(r, feature)).collect();
    scan_splits(&values, &scores, &weights, config.min_node_size as f64)
}

/// Standardized two-sample statistic for every admissible threshold, in
/// increasing threshold order.
pub fn split_statistics(
    values: &[f64],
    scores: &[f64],
    weights: &[f64],
    min_node_size: f64,
) -> Vec<Split> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = order.iter().map(|&i| weights[i]).sum();
    if order.is_empty() || !(total > 1.0) {
        return Vec::new();
    }
    let mean_h = order.iter().map(|&i| weights[i] * scores[i]).sum::<f64>() / total;
    let var_h = order
        .iter()
        .map(|&i| weights[i] * (scores[i] - mean_h) * (scores[i] - mean_h))
        .sum::<f64>()
        / total;
    if !(var_h > 0.0) {
        return Vec::new();
    }

    let mut out = Vec::new();
    let mut w_left = 0.0;
    let mut s_left = 0.0;
    for pos in 0..order.len() - 1 {
        let i = order[pos];
        w_left += weights[i];
        s_left += weights[i] * (scores[i] - mean_h);
        let (lo, hi) = (values[i], values[order[pos + 1]]);
        if lo == hi {
            continue;
        }
        let w_right = total - w_left;
        if w_left < min_node_size || w_right < min_node_size {
            continue;
        }
        let variance = var_h * w_left * w_right / (total - 1.0);
        if !(variance > 0.0) {
            continue;
        }
        let mut threshold = lo + (hi - lo) / 2.0;
        if threshold >= hi {
            threshold = lo;
        }
        out.push(Split {
            threshold,
            criterion: s_left * s_left / variance,
        });
    }
    out
}

fn scan_splits(values: &[f64], scores: &[f64], weights: &[f64], min_node_size: f64) -> Option<Split> {
    let mut best: Option<Split> = None;
    for s in split_statistics(values, scores, weights, min_node_size) {
        if best.map_or(true, |b| s.criterion > b.criterion) {
            best = Some(s);
        }
    }
    best
}

/// Grows a survival tree on `rows` (repeated indices act as weights).
pub fn grow_tree(data: &SurvivalDataset, rows: &[usize], config: &TreeConfig) -> Result<SurvivalTree> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.len()) {
        return Err(Error::InvalidInput(alloc::format!("row index {bad} out of range")));
    }
    let (members, weights) = collapse_rows(data, rows);
    let mtry = config.mtry.unwrap_or(data.n_features());
    let mut rng = rng::seeded(config.rng_seed);
    Ok(grow(
        data,
        &SurvivalResponse { data },
        members,
        weights,
        config,
        mtry,
        &mut rng,
    ))
}

pub fn predict_tree<'a>(tree: &'a SurvivalTree, x: &[f64]) -> Result<&'a SurvivalLeaf> {
    tree.route(x)
}

/// Distinct rows with weights `multiplicity * observation weight`.
fn collapse_rows(data: &SurvivalDataset, rows: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    let mut members = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for r in sorted {
        let w = data.observations()[r].weight;
        if members.last() == Some(&r) {
            *weights.last_mut().unwrap() += w;
        } else {
            members.push(r);
            weights.push(w);
        }
    }
    (members, weights)
}

pub(crate) fn grow<C, R>(
    cov: &C,
    response: &R,
    rows: Vec<usize>,
    weights: Vec<f64>,
    config: &TreeConfig,
    mtry: usize,
    rng: &mut Rng,
) -> ConditionalTree<R::Leaf>
where
    C: Covariates + ?Sized,
    R: Response,
{
    ConditionalTree {
        root: grow_node(cov, response, rows, weights, config, mtry, rng),
        n_features: cov.n_features(),
    }
}

fn grow_node<C, R>(
    cov: &C,
    response: &R,
    rows: Vec<usize>,
    weights: Vec<f64>,
    config: &TreeConfig,
    mtry: usize,
    rng: &mut Rng,
) -> TreeNode<R::Leaf>
where
    C: Covariates + ?Sized,
    R: Response,
{
    let total: f64 = weights.iter().sum();
    let p = cov.n_features();
    if p == 0 || total < config.min_split_size as f64 {
        return TreeNode::Terminal(response.leaf(rows, weights));
    }

    let scores = response.scores(&rows, &weights);
    let features: Vec<usize> = if mtry >= p {
        (0..p).collect()
    } else {
        let mut picked = index::sample(rng, p, mtry).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut values = alloc::vec![0.0; rows.len()];
    let mut tests: Vec<(f64, usize)> = Vec::with_capacity(features.len());
    for &f in &features {
        for (v, &r) in values.iter_mut().zip(&rows) {
            *v = cov.value(r, f);
        }
        // a covariate constant in the node cannot be tested and does not
        // count towards the multiplicity adjustment
        if values.iter().all(|&v| v == values[0]) {
            continue;
        }
        tests.push((association(&scores, &values, &weights).p_value, f));
    }
    tests.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = tests.len() as f64;

    for &(p_raw, f) in &tests {
        let adjusted = (p_raw * k).min(1.0);
        if adjusted > config.alpha {
            break;
        }
        for (v, &r) in values.iter_mut().zip(&rows) {
            *v = cov.value(r, f);
        }
        let Some(split) = scan_splits(&values, &scores, &weights, config.min_node_size as f64) else {
            continue;
        };
        let mut left = (Vec::new(), Vec::new());
        let mut right = (Vec::new(), Vec::new());
        for ((&r, &w), &v) in rows.iter().zip(&weights).zip(&values) {
            let side = if v <= split.threshold { &mut left } else { &mut right };
            side.0.push(r);
            side.1.push(w);
        }
        let left_node = grow_node(cov, response, left.0, left.1, config, mtry, rng);
        let right_node = grow_node(cov, response, right.0, right.1, config, mtry, rng);
        return TreeNode::Internal {
            feature: f,
            threshold: split.threshold,
            p_value: adjusted,
            left: Box::new(left_node),
            right: Box::new(right_node),
        };
    }
    TreeNode::Terminal(response.leaf(rows, weights))
}
