//! Cox proportional-hazards regression.
//!
//! The hazard of subject `k` is `h_0(t) exp(β·x_k)`. Coefficients maximize
//! the Breslow partial likelihood by damped Newton iterations on internally
//! standardized covariates; the baseline cumulative hazard is the Breslow
//! estimator on the original covariate scale, so `x = 0` is the reference.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::survival::{SurvivalCurve, SurvivalDataset};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CoxConfig {
    /// Max-norm of the (standardized) score required for convergence.
    pub tol: f64,
    /// Relative log-likelihood change required for convergence.
    pub loglik_rel_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// A standardized coefficient beyond this while the likelihood keeps
    /// improving signals monotone likelihood.
    pub divergence_bound: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            loglik_rel_tol: 1e-9,
            max_iter: 50,
            max_halvings: 20,
            divergence_bound: 50.0,
        }
    }
}

/// Non-decreasing step function of the Breslow cumulative baseline hazard.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumhaz: Vec<f64>,
}

impl BaselineHazard {
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumhaz[idx - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub baseline: BaselineHazard,
    pub feature_names: Vec<String>,
    pub loglik: f64,
    pub n_iter: usize,
    pub converged: bool,
}

impl CoxModel {
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.beta.len(),
                found: x.len(),
            });
        }
        Ok(dot(&self.beta, x))
    }

    /// `S(t | x) = exp(-Λ_0(t) exp(β·x))` at the baseline step times.
    pub fn predict_survival(&self, x: &[f64]) -> Result<SurvivalCurve> {
        let risk = libm::exp(self.linear_predictor(x)?);
        let probs = self
            .baseline
            .cumhaz
            .iter()
            .map(|&h| libm::exp(-h * risk).clamp(0.0, 1.0))
            .collect::<Vec<_>>();
        // an enormous hazard ratio can flatten later steps to equal values;
        // the curve stays valid because probs only need to be non-increasing
        SurvivalCurve::new(self.baseline.times.clone(), probs)
    }
}

pub fn predict_cox_survival(model: &CoxModel, x: &[f64]) -> Result<SurvivalCurve> {
    model.predict_survival(x)
}

/// Breslow log partial likelihood
/// `Σ_events w_i [β·x_i − log Σ_{j ∈ R(T_i)} w_j exp(β·x_j)]`.
pub fn cox_log_partial_likelihood(data: &SurvivalDataset, beta: &[f64]) -> Result<f64> {
    check_dim(data, beta)?;
    let problem = Problem::raw(data);
    Ok(problem.evaluate(beta, false).loglik)
}

/// Gradient of [`cox_log_partial_likelihood`] with respect to `beta`.
pub fn cox_score(data: &SurvivalDataset, beta: &[f64]) -> Result<Vec<f64>> {
    check_dim(data, beta)?;
    let problem = Problem::raw(data);
    Ok(problem.evaluate(beta, true).gradient)
}

pub fn fit_cox(data: &SurvivalDataset, config: &CoxConfig) -> Result<CoxModel> {
    let p = data.n_features();
    if p == 0 {
        return Err(Error::InvalidInput("cox regression needs at least one covariate".into()));
    }
    if !data.observations().iter().any(|o| o.event && o.weight > 0.0) {
        return Err(Error::NoEvents);
    }

    // standardize: z = (x - mean) / sd
    let total_w: f64 = data.observations().iter().map(|o| o.weight).sum();
    let mut mean = alloc::vec![0.0; p];
    for o in data.observations() {
        for (m, x) in mean.iter_mut().zip(&o.covariates) {
            *m += o.weight * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total_w);
    let mut sd = alloc::vec![0.0; p];
    for o in data.observations() {
        for j in 0..p {
            let d = o.covariates[j] - mean[j];
            sd[j] += o.weight * d * d;
        }
    }
    for s in sd.iter_mut() {
        *s = libm::sqrt(*s / total_w);
    }
    if sd.iter().any(|&s| !(s > 1e-12)) {
        return Err(Error::Collinear);
    }

    let problem = Problem::standardized(data, &mean, &sd);
    let mut beta = alloc::vec![0.0; p];
    let mut current = problem.evaluate(&beta, true);
    let mut converged = max_abs(&current.gradient) < config.tol;
    let mut n_iter = 0;

    while !converged && n_iter < config.max_iter {
        n_iter += 1;
        let neg_hess: Vec<f64> = current.hessian.iter().map(|h| -h).collect();
        let step = cholesky_solve(&neg_hess, &current.gradient).ok_or(Error::Collinear)?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = problem.evaluate(&trial, true);
            if eval.loglik.is_finite() && eval.loglik >= current.loglik - 1e-12 * current.loglik.abs() {
                accepted = Some((trial, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((trial, eval)) = accepted else {
            // no ascent direction left within the halving budget
            break;
        };

        let change = (eval.loglik - current.loglik).abs();
        let improving = eval.loglik > current.loglik;
        beta = trial;
        current = eval;
        if improving && beta.iter().any(|b| b.abs() > config.divergence_bound) {
            return Err(Error::Separation);
        }
        let rel = change / (current.loglik.abs() + 1e-10);
        converged = rel < config.loglik_rel_tol && max_abs(&current.gradient) < config.tol;
    }

    let beta: Vec<f64> = beta.iter().zip(&sd).map(|(b, s)| b / s).collect();
    let baseline = breslow(data, &beta);
    Ok(CoxModel {
        loglik: current.loglik,
        beta,
        baseline,
        feature_names: data.feature_names().to_vec(),
        n_iter,
        converged,
    })
}

/// Breslow cumulative baseline hazard for fixed coefficients.
pub fn breslow(data: &SurvivalDataset, beta: &[f64]) -> BaselineHazard {
    let obs = data.observations();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| obs[a].time.total_cmp(&obs[b].time));

    // tie groups in ascending time: (time, events, risk weight of the group)
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for &k in &order {
        let o = &obs[k];
        let r = o.weight * libm::exp(dot(beta, &o.covariates));
        let d = if o.event { o.weight } else { 0.0 };
        match groups.last_mut() {
            Some(g) if g.0 == o.time => {
                g.1 += d;
                g.2 += r;
            }
            _ => groups.push((o.time, d, r)),
        }
    }
    let mut risk_set = alloc::vec![0.0; groups.len()];
    let mut acc = 0.0;
    for (i, g) in groups.iter().enumerate().rev() {
        acc += g.2;
        risk_set[i] = acc;
    }

    let mut times = Vec::new();
    let mut cumhaz = Vec::new();
    let mut total = 0.0;
    for (g, &denom) in groups.iter().zip(&risk_set) {
        if g.1 > 0.0 && denom > 0.0 {
            total += g.1 / denom;
            times.push(g.0);
            cumhaz.push(total);
        }
    }
    BaselineHazard { times, cumhaz }
}

fn check_dim(data: &SurvivalDataset, beta: &[f64]) -> Result<()> {
    if beta.len() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            found: beta.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Evaluation {
    loglik: f64,
    gradient: Vec<f64>,
    hessian: Vec<f64>,
}

/// Rows sorted by descending time, grouped by tied times.
struct Problem {
    p: usize,
    x: Vec<f64>,
    weight: Vec<f64>,
    event: Vec<bool>,
    /// `[start, end)` of each tie group in the sorted order.
    groups: Vec<(usize, usize)>,
}

impl Problem {
    fn raw(data: &SurvivalDataset) -> Self {
        let p = data.n_features();
        Self::build(data, &alloc::vec![0.0; p], &alloc::vec![1.0; p])
    }

    fn standardized(data: &SurvivalDataset, mean: &[f64], sd: &[f64]) -> Self {
        Self::build(data, mean, sd)
    }

    fn build(data: &SurvivalDataset, mean: &[f64], sd: &[f64]) -> Self {
        let obs = data.observations();
        let p = data.n_features();
        let mut order: Vec<usize> = (0..obs.len()).collect();
        order.sort_by(|&a, &b| obs[b].time.total_cmp(&obs[a].time));
        let mut x = Vec::with_capacity(order.len() * p);
        let mut weight = Vec::with_capacity(order.len());
        let mut event = Vec::with_capacity(order.len());
        let mut groups = Vec::new();
        let mut start = 0;
        for (pos, &k) in order.iter().enumerate() {
            let o = &obs[k];
            x.extend(o.covariates.iter().zip(mean).zip(sd).map(|((v, m), s)| (v - m) / s));
            weight.push(o.weight);
            event.push(o.event);
            if pos + 1 == order.len() || obs[order[pos + 1]].time != o.time {
                groups.push((start, pos + 1));
                start = pos + 1;
            }
        }
        Self {
            p,
            x,
            weight,
            event,
            groups,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[allow(clippy::needless_range_loop)]
    fn evaluate(&self, beta: &[f64], derivatives: bool) -> Evaluation {
        let p = self.p;
        let n = self.weight.len();
        let eta: Vec<f64> = (0..n).map(|i| dot(beta, self.row(i))).collect();
        let offset = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let offset = if offset.is_finite() { offset } else { 0.0 };

        let mut s0 = 0.0;
        let mut s1 = alloc::vec![0.0; p];
        let mut s2 = alloc::vec![0.0; if derivatives { p * p } else { 0 }];
        let mut loglik = 0.0;
        let mut gradient = alloc::vec![0.0; p];
        let mut hessian = alloc::vec![0.0; if derivatives { p * p } else { 0 }];

        // walking from the latest time backwards grows the risk set
        for &(start, end) in &self.groups {
            for i in start..end {
                let r = self.weight[i] * libm::exp(eta[i] - offset);
                s0 += r;
                if derivatives {
                    let xi = self.row(i);
                    for a in 0..p {
                        s1[a] += r * xi[a];
                        for b in 0..p {
                            s2[a * p + b] += r * xi[a] * xi[b];
                        }
                    }
                }
            }
            if s0 <= 0.0 {
                continue;
            }
            let log_s0 = libm::log(s0) + offset;
            for i in start..end {
                if !self.event[i] || self.weight[i] == 0.0 {
                    continue;
                }
                let w = self.weight[i];
                loglik += w * (eta[i] - log_s0);
                if derivatives {
                    let xi = self.row(i);
                    for a in 0..p {
                        let ma = s1[a] / s0;
                        gradient[a] += w * (xi[a] - ma);
                        for b in 0..p {
                            let mb = s1[b] / s0;
                            hessian[a * p + b] -= w * (s2[a * p + b] / s0 - ma * mb);
                        }
                    }
                }
            }
        }
        Evaluation {
            loglik,
            gradient,
            hessian,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::Observation;
    use alloc::vec;
    use alloc::string::ToString;

    fn three_subjects() -> SurvivalDataset {
        SurvivalDataset::new(
            vec![
                Observation::new(1.0, true, vec![0.0]),
                Observation::new(2.0, true, vec![1.0]),
                Observation::new(3.0, true, vec![0.0]),
            ],
            vec!["x".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn loglik_at_zero_is_minus_log_risk_sets() {
        let ll = cox_log_partial_likelihood(&three_subjects(), &[0.0]).unwrap();
        let expected = -(3.0f64.ln() + 2.0f64.ln());
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll + 1.791_759_469_228_055).abs() < 1e-12);
    }

    #[test]
    fn loglik_all_censored_is_zero() {
        let d = SurvivalDataset::new(
            vec![
                Observation::new(1.0, false, vec![0.3]),
                Observation::new(2.0, false, vec![1.0]),
            ],
            vec!["x".to_string()],
        )
        .unwrap();
        assert_eq!(cox_log_partial_likelihood(&d, &[0.7]).unwrap(), 0.0);
        assert_eq!(fit_cox(&d, &CoxConfig::default()), Err(Error::NoEvents));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            cox_log_partial_likelihood(&three_subjects(), &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn three_subject_fit_matches_grid_search() {
        // grid-search oracle on the likelihood itself
        let data = three_subjects();
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut b = -2.0;
        while b <= 2.0 {
            let ll = cox_log_partial_likelihood(&data, &[b]).unwrap();
            if ll > best.0 {
                best = (ll, b);
            }
            b += 1e-5;
        }
        let model = fit_cox(&data, &CoxConfig::default()).unwrap();
        assert!(model.converged);
        assert!((model.beta[0] - best.1).abs() < 1e-4);
        assert!((model.beta[0] - 2.0f64.ln() / 2.0).abs() < 1e-6);
    }

    #[test]
    fn three_subject_breslow_steps() {
        let model = fit_cox(&three_subjects(), &CoxConfig::default()).unwrap();
        let r2 = 2.0f64.sqrt();
        let h1 = 1.0 / (2.0 + r2);
        let h2 = h1 + 1.0 / (1.0 + r2);
        let h3 = h2 + 1.0;
        let curve = model.predict_survival(&[0.0]).unwrap();
        assert_eq!(model.baseline.times, vec![1.0, 2.0, 3.0]);
        for (got, want) in model.baseline.cumhaz.iter().zip([h1, h2, h3]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        for (p, h) in curve.probs().iter().zip(&model.baseline.cumhaz) {
            assert!((p - libm::exp(-h)).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_hazard_ratio_squares_survival() {
        let mut model = fit_cox(&three_subjects(), &CoxConfig::default()).unwrap();
        model.beta = vec![2.0f64.ln()];
        let s1 = model.predict_survival(&[0.0]).unwrap();
        let s2 = model.predict_survival(&[1.0]).unwrap();
        for (a, b) in s1.probs().iter().zip(s2.probs()) {
            assert!((a * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_covariate_is_collinear() {
        let d = SurvivalDataset::new(
            vec![
                Observation::new(1.0, true, vec![2.0]),
                Observation::new(2.0, true, vec![2.0]),
                Observation::new(3.0, false, vec![2.0]),
            ],
            vec!["x".to_string()],
        )
        .unwrap();
        assert_eq!(fit_cox(&d, &CoxConfig::default()), Err(Error::Collinear));
    }

    #[test]
    fn duplicated_column_is_collinear() {
        let rows = [(1.0, 0.3), (2.0, 1.2), (3.0, 0.1), (4.0, 0.9), (5.0, 0.5)];
        let obs = rows
            .iter()
            .map(|&(t, x)| Observation::new(t, true, vec![x, 2.0 * x]))
            .collect();
        let d = SurvivalDataset::new(obs, vec!["a".to_string(), "b".to_string()]).unwrap();
        assert_eq!(fit_cox(&d, &CoxConfig::default()), Err(Error::Collinear));
    }

    #[test]
    fn perfect_separation_is_detected() {
        // higher x always fails first: the likelihood increases without bound
        let obs = (0..10)
            .map(|i| Observation::new((i + 1) as f64, true, vec![-(i as f64)]))
            .collect();
        let d = SurvivalDataset::new(obs, vec!["x".to_string()]).unwrap();
        assert_eq!(fit_cox(&d, &CoxConfig::default()), Err(Error::Separation));
    }
}
