//! Censoring-aware model assessment.
//!
//! The time-dependent Brier score weights each subject by the inverse
//! probability of remaining uncensored, estimated by the reverse
//! Kaplan-Meier curve `Ĝ` of the censoring times:
//!
//! ```text
//! BS(t) = 1/n Σ_i [ Ŝ(t|x_i)² 1{T_i ≤ t, δ_i = 1} / Ĝ(T_i−)
//!                 + (1 − Ŝ(t|x_i))² 1{T_i > t} / Ĝ(t) ]
//! ```
//!
//! Subjects censored before `t` contribute nothing. The integrated score is
//! the trapezoid integral of `BS` over the grid divided by its length.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::cox::{fit_cox, CoxConfig, CoxModel};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::forest::{fit_forest_with, ForestConfig, SurvivalForest};
use crate::rng::{derive_seed, seeded};
use crate::special::student_t_two_sided;
use crate::survival::{kaplan_meier, median_survival, RiskTable, SurvivalCurve, SurvivalDataset};

/// Brier score over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub bs: Vec<f64>,
    pub ibs: f64,
    /// The requested grid ran past the last time with positive censoring
    /// survival and was cut short.
    pub truncated: bool,
}

/// Reverse Kaplan-Meier estimate of the censoring survival function.
pub fn censoring_survival(data: &SurvivalDataset) -> Result<SurvivalCurve> {
    let table = RiskTable::from_samples(data.observations().iter().map(|o| (o.time, !o.event, o.weight)))?;
    Ok(table.product_limit())
}

/// Trapezoid integral of `values` over `times`, divided by the covered
/// length. A single point returns its value.
pub fn integrate_normalized(times: &[f64], values: &[f64]) -> f64 {
    match times.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let span = times[n - 1] - times[0];
            if span <= 0.0 {
                return values[0];
            }
            let area: f64 = (1..n)
                .map(|k| 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]))
                .sum();
            area / span
        }
    }
}

/// Inverse-probability-of-censoring weighted Brier scores of `predictions`
/// (one curve per row of `data`) at each `grid` time.
pub fn brier_curve(predictions: &[SurvivalCurve], data: &SurvivalDataset, grid: &[f64]) -> Result<ErrorCurve> {
    if predictions.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: predictions.len(),
        });
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid must be finite, non-negative and increasing".into()));
    }
    let g = censoring_survival(data)?;
    let obs = data.observations();
    let total_weight: f64 = obs.iter().map(|o| o.weight).sum();
    if total_weight <= 0.0 {
        return Err(Error::InvalidInput("total case weight is zero".into()));
    }
    let g_before: Vec<f64> = obs.iter().map(|o| g.eval_left(o.time)).collect();

    let mut times = Vec::with_capacity(grid.len());
    let mut bs = Vec::with_capacity(grid.len());
    let mut truncated = false;
    for &t in grid {
        let g_t = g.eval(t);
        if g_t <= 0.0 {
            truncated = true;
            log::warn!("censoring survival reaches zero at t = {t}; truncating Brier grid");
            break;
        }
        let mut sum = 0.0;
        for ((o, pred), &g_i) in obs.iter().zip(predictions).zip(&g_before) {
            let s = pred.eval(t);
            if o.time <= t {
                if o.event && g_i > 0.0 {
                    sum += o.weight * s * s / g_i;
                }
            } else {
                sum += o.weight * (1.0 - s) * (1.0 - s) / g_t;
            }
        }
        times.push(t);
        bs.push(sum / total_weight);
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("censoring survival is zero over the whole grid".into()));
    }
    let ibs = integrate_normalized(&times, &bs);
    Ok(ErrorCurve {
        times,
        bs,
        ibs,
        truncated,
    })
}

/// 95th percentile of observed times (linear interpolation between order
/// statistics).
pub fn default_horizon(data: &SurvivalDataset) -> f64 {
    let mut t: Vec<f64> = data.observations().iter().map(|o| o.time).collect();
    t.sort_by(f64::total_cmp);
    quantile_sorted(&t, 0.95)
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `n_points` evenly spaced times from 0 to `horizon` inclusive.
pub fn time_grid(horizon: f64, n_points: usize) -> Vec<f64> {
    if n_points <= 1 || horizon <= 0.0 {
        return alloc::vec![horizon.max(0.0)];
    }
    let step = horizon / (n_points - 1) as f64;
    (0..n_points)
        .map(|k| if k == n_points - 1 { horizon } else { k as f64 * step })
        .collect()
}

/// Model family evaluated by bootstrap cross-validation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "snake_case"))]
pub enum ModelSpec {
    /// Pooled Kaplan-Meier curve for everyone.
    KaplanMeier,
    Cox(CoxConfig),
    Forest(ForestConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    KaplanMeier(SurvivalCurve),
    Cox(CoxModel),
    Forest(SurvivalForest),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::KaplanMeier => "km",
            ModelSpec::Cox(_) => "cox",
            ModelSpec::Forest(_) => "forest",
        }
    }

    pub fn fit(&self, data: &SurvivalDataset) -> Result<FittedModel> {
        self.fit_with(data, &Sequential)
    }

    pub fn fit_with<E: Executor>(&self, data: &SurvivalDataset, exec: &E) -> Result<FittedModel> {
        Ok(match self {
            ModelSpec::KaplanMeier => FittedModel::KaplanMeier(kaplan_meier(data)?),
            ModelSpec::Cox(c) => FittedModel::Cox(fit_cox(data, c)?),
            ModelSpec::Forest(c) => FittedModel::Forest(fit_forest_with(data, c, exec)?),
        })
    }
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> Result<SurvivalCurve> {
        match self {
            FittedModel::KaplanMeier(c) => Ok(c.clone()),
            FittedModel::Cox(m) => m.predict_survival(x),
            FittedModel::Forest(f) => f.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    /// Redraws allowed when a replicate has no out-of-bootstrap rows.
    pub max_retries: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 1000,
            seed: 0,
            max_retries: 100,
        }
    }
}

/// One bootstrap replicate's held-out rows and their predicted medians.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub test_rows: Vec<usize>,
    pub predicted_medians: Vec<Option<f64>>,
    pub error: ErrorCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Pointwise mean over replicates, on the grid prefix every replicate
    /// covers.
    pub mean: ErrorCurve,
    /// Per-replicate IBS in replicate order.
    pub ibs: Vec<f64>,
    pub replicates: Vec<Replicate>,
}

impl BootstrapResult {
    /// Mean predicted median per training row over the replicates where it
    /// was held out; `None` if never held out or no median was reached.
    pub fn held_out_medians(&self, n_rows: usize) -> Vec<Option<f64>> {
        let mut sum = alloc::vec![0.0; n_rows];
        let mut count = alloc::vec![0usize; n_rows];
        for rep in &self.replicates {
            for (&r, m) in rep.test_rows.iter().zip(&rep.predicted_medians) {
                if let Some(m) = m {
                    sum[r] += m;
                    count[r] += 1;
                }
            }
        }
        sum.into_iter()
            .zip(count)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect()
    }
}

/// Train/test split of one bootstrap replicate: the drawn multiset and the
/// rows never drawn.
pub fn bootstrap_split(n: usize, seed: u64, max_retries: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = seeded(seed);
    for _ in 0..=max_retries {
        let mut drawn = alloc::vec![false; n];
        let train: Vec<usize> = (0..n)
            .map(|_| {
                let r = rng.random_range(0..n);
                drawn[r] = true;
                r
            })
            .collect();
        let test: Vec<usize> = (0..n).filter(|&r| !drawn[r]).collect();
        if !test.is_empty() {
            return Ok((train, test));
        }
    }
    Err(Error::NoOutOfBag)
}

pub fn bootstrap_cv_error(
    spec: &ModelSpec,
    data: &SurvivalDataset,
    config: &BootstrapConfig,
    grid: &[f64],
) -> Result<BootstrapResult> {
    bootstrap_cv_error_with(spec, data, config, grid, &Sequential)
}

/// Bootstrap cross-validated prediction error: fit on each bootstrap
/// multiset, score on the rows it left out.
pub fn bootstrap_cv_error_with<E: Executor>(
    spec: &ModelSpec,
    data: &SurvivalDataset,
    config: &BootstrapConfig,
    grid: &[f64],
    exec: &E,
) -> Result<BootstrapResult> {
    if config.n_boot == 0 {
        return Err(Error::InvalidConfig("n_boot must be at least 1".into()));
    }
    let run = |b: usize| -> Result<Replicate> {
        let (train_rows, test_rows) = bootstrap_split(data.len(), derive_seed(config.seed, b as u64), config.max_retries)?;
        let train = data.subset(&train_rows)?;
        let test = data.subset(&test_rows)?;
        let spec = match spec {
            ModelSpec::Forest(f) => ModelSpec::Forest(ForestConfig {
                rng_seed: derive_seed(f.rng_seed, b as u64),
                ..f.clone()
            }),
            other => other.clone(),
        };
        let model = spec.fit(&train)?;
        let curves = test
            .observations()
            .iter()
            .map(|o| model.predict(&o.covariates))
            .collect::<Result<Vec<_>>>()?;
        let error = brier_curve(&curves, &test, grid)?;
        Ok(Replicate {
            predicted_medians: curves.iter().map(median_survival).collect(),
            test_rows,
            error,
        })
    };
    let replicates = exec.map(config.n_boot, run).into_iter().collect::<Result<Vec<_>>>()?;

    let len = replicates.iter().map(|r| r.error.times.len()).min().unwrap_or(0);
    let times = grid[..len].to_vec();
    let bs: Vec<f64> = (0..len)
        .map(|k| replicates.iter().map(|r| r.error.bs[k]).sum::<f64>() / replicates.len() as f64)
        .collect();
    let mean = ErrorCurve {
        ibs: integrate_normalized(&times, &bs),
        truncated: len < grid.len(),
        times,
        bs,
    };
    Ok(BootstrapResult {
        ibs: replicates.iter().map(|r| r.error.ibs).collect(),
        mean,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unpaired two-sample t-test without the equal-variance assumption.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("each sample needs at least two values".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if se2 <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let t = (ma - mb) / libm::sqrt(se2);
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    Ok(WelchTest {
        t,
        df,
        p_value: student_t_two_sided(t, df),
    })
}

/// Area under the ROC curve: probability that a random positive scores
/// above a random negative, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub row: usize,
    pub observed: f64,
    pub predicted: f64,
    /// `(observed + predicted) / 2`
    pub mean: f64,
    /// `observed − predicted`
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPairs {
    pub rows: Vec<CalibrationRow>,
    pub n_censored: usize,
    /// Uncensored rows dropped because no median was predicted.
    pub n_missing_prediction: usize,
}

/// Observed event times of uncensored rows against predicted medians, with
/// the mean-difference transform.
pub fn calibration_pairs(predicted_medians: &[Option<f64>], data: &SurvivalDataset) -> Result<CalibrationPairs> {
    if predicted_medians.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: predicted_medians.len(),
        });
    }
    let mut out = CalibrationPairs {
        rows: Vec::new(),
        n_censored: 0,
        n_missing_prediction: 0,
    };
    for (row, (o, pred)) in data.observations().iter().zip(predicted_medians).enumerate() {
        if !o.event {
            out.n_censored += 1;
            continue;
        }
        match pred {
            Some(p) if p.is_finite() => out.rows.push(CalibrationRow {
                row,
                observed: o.time,
                predicted: *p,
                mean: (o.time + p) / 2.0,
                difference: o.time - p,
            }),
            _ => out.n_missing_prediction += 1,
        }
    }
    Ok(out)
}
