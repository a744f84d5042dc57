//! Censored samples and the product-limit machinery built on them.
//!
//! Conventions used throughout the crate:
//!
//! - At a time shared by events and censorings, events are processed first:
//!   subjects censored at `t` still count in the risk set for events at `t`.
//! - Counts are weighted sums (`f64`), so bootstrap multiplicities and tree
//!   node subsets reuse the same code paths.
//! - Curves are stored sparsely at event times and evaluated as
//!   right-continuous steps with `S(t) = 1` before the first stored time.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One censored observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Observed time (event or censoring), in days since origin.
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub covariates: Vec<f64>,
    /// Case weight, 1 unless the row stands for several subjects.
    pub weight: f64,
}

impl Observation {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// A nonempty censored learning sample with a fixed covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    observations: Vec<Observation>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(observations: Vec<Observation>, feature_names: Vec<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = feature_names.len();
        for (row, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: obs.covariates.len(),
                });
            }
            if !(obs.time >= 0.0) || !obs.time.is_finite() {
                return Err(Error::InvalidObservation {
                    row,
                    reason: "time must be finite and non-negative",
                });
            }
            if !(obs.weight >= 0.0) || !obs.weight.is_finite() {
                return Err(Error::InvalidObservation {
                    row,
                    reason: "weight must be finite and non-negative",
                });
            }
            if obs.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidObservation {
                    row,
                    reason: "covariates must be finite",
                });
            }
        }
        Ok(Self {
            observations,
            feature_names,
        })
    }

    /// Covariate-free dataset from `(time, event)` pairs.
    pub fn from_times(rows: &[(f64, bool)]) -> Result<Self> {
        let obs = rows
            .iter()
            .map(|&(t, e)| Observation::new(t, e, Vec::new()))
            .collect();
        Self::new(obs, Vec::new())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_events(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    /// Materializes the listed rows; repeated indices produce repeated rows.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut obs = Vec::with_capacity(rows.len());
        for &r in rows {
            let o = self.observations.get(r).ok_or_else(|| {
                Error::InvalidInput(alloc::format!("row index {r} out of range"))
            })?;
            obs.push(o.clone());
        }
        Self::new(obs, self.feature_names.clone())
    }

    /// Keeps only the listed covariate columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        let dim = self.n_features();
        if let Some(&bad) = columns.iter().find(|&&c| c >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad + 1,
            });
        }
        let names = columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        let obs = self
            .observations
            .iter()
            .map(|o| Observation {
                covariates: columns.iter().map(|&c| o.covariates[c]).collect(),
                ..o.clone()
            })
            .collect();
        Self::new(obs, names)
    }

    pub(crate) fn samples(&self) -> impl Iterator<Item = (f64, bool, f64)> + '_ {
        self.observations.iter().map(|o| (o.time, o.event, o.weight))
    }
}

/// Right-continuous survival step function stored at its jump times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "CurveParts"))]
pub struct SurvivalCurve {
    times: Vec<f64>,
    probs: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct CurveParts {
    times: Vec<f64>,
    probs: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<CurveParts> for SurvivalCurve {
    type Error = Error;

    fn try_from(p: CurveParts) -> Result<Self> {
        SurvivalCurve::new(p.times, p.probs)
    }
}

impl SurvivalCurve {
    pub fn new(times: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if times.len() != probs.len() {
            return Err(Error::InvalidCurve("times and probs differ in length"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidCurve("times must be strictly increasing"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidCurve("probabilities must lie in [0, 1]"));
        }
        if probs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidCurve("probabilities must be non-increasing"));
        }
        Ok(Self { times, probs })
    }

    /// `S(t) = 1` everywhere.
    pub fn flat() -> Self {
        Self {
            times: Vec::new(),
            probs: Vec::new(),
        }
    }

    /// Constant survival `p` from time 0 on.
    pub fn constant(p: f64) -> Result<Self> {
        Self::new(alloc::vec![0.0], alloc::vec![p])
    }

    pub(crate) fn from_parts_unchecked(times: Vec<f64>, probs: Vec<f64>) -> Self {
        debug_assert!(Self::new(times.clone(), probs.clone()).is_ok());
        Self { times, probs }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `S(t)`, right-continuous.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            1.0
        } else {
            self.probs[idx - 1]
        }
    }

    /// Left limit `S(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            1.0
        } else {
            self.probs[idx - 1]
        }
    }

    /// Largest absolute difference between two step curves.
    pub fn sup_distance(&self, other: &SurvivalCurve) -> f64 {
        let mut d = 0.0f64;
        for &t in self.times.iter().chain(other.times.iter()) {
            d = d.max((self.eval(t) - other.eval(t)).abs());
        }
        d
    }
}

/// Weighted risk-set counts at each distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    pub times: Vec<f64>,
    /// Weighted number at risk just before each time.
    pub at_risk: Vec<f64>,
    /// Weighted number of events at each time.
    pub events: Vec<f64>,
}

impl RiskTable {
    /// Builds the table from `(time, event, weight)` triples.
    pub fn from_samples<I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, bool, f64)>,
    {
        let mut rows: Vec<(f64, bool, f64)> = samples.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = rows.iter().map(|r| r.2).sum();

        let mut table = RiskTable {
            times: Vec::new(),
            at_risk: Vec::new(),
            events: Vec::new(),
        };
        let mut removed = 0.0;
        let mut i = 0;
        while i < rows.len() {
            let t = rows[i].0;
            let mut j = i;
            let mut d = 0.0;
            let mut w = 0.0;
            while j < rows.len() && rows[j].0 == t {
                w += rows[j].2;
                if rows[j].1 {
                    d += rows[j].2;
                }
                j += 1;
            }
            if d > 0.0 {
                table.times.push(t);
                table.at_risk.push(total - removed);
                table.events.push(d);
            }
            removed += w;
            i = j;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Product-limit curve of this table.
    pub fn product_limit(&self) -> SurvivalCurve {
        let mut s = 1.0;
        let mut probs = Vec::with_capacity(self.len());
        for (&n, &d) in self.at_risk.iter().zip(&self.events) {
            s *= 1.0 - d / n;
            probs.push(s.clamp(0.0, 1.0));
        }
        SurvivalCurve::from_parts_unchecked(self.times.clone(), probs)
    }
}

pub fn build_risk_table(data: &SurvivalDataset) -> Result<RiskTable> {
    RiskTable::from_samples(data.samples())
}

/// Kaplan-Meier estimate `S(t_j) = S(t_{j-1}) (1 - d_j / n_j)`.
pub fn kaplan_meier(data: &SurvivalDataset) -> Result<SurvivalCurve> {
    Ok(build_risk_table(data)?.product_limit())
}

/// Smallest stored time with `S(t) <= 0.5`, or `None` if the curve never
/// gets there.
pub fn median_survival(curve: &SurvivalCurve) -> Option<f64> {
    curve
        .probs
        .iter()
        .position(|&p| p <= 0.5)
        .map(|i| curve.times[i])
}

/// Log-rank scores `Λ(T_i) - δ_i` with a Nelson-Aalen style cumulative
/// hazard.
pub fn logrank_scores(data: &SurvivalDataset) -> Result<Vec<f64>> {
    let times: Vec<f64> = data.observations.iter().map(|o| o.time).collect();
    let events: Vec<bool> = data.observations.iter().map(|o| o.event).collect();
    let weights: Vec<f64> = data.observations.iter().map(|o| o.weight).collect();
    logrank_scores_weighted(&times, &events, &weights)
}

pub(crate) fn logrank_scores_weighted(
    times: &[f64],
    events: &[bool],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let n = times.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let total: f64 = weights.iter().sum();

    let mut scores = alloc::vec![0.0; n];
    let mut cumhaz = 0.0;
    let mut removed = 0.0;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0.0;
        let mut w = 0.0;
        while j < n && times[order[j]] == t {
            let k = order[j];
            w += weights[k];
            if events[k] {
                d += weights[k];
            }
            j += 1;
        }
        let at_risk = total - removed;
        if d > 0.0 && at_risk > 0.0 {
            cumhaz += d / at_risk;
        }
        for &k in &order[i..j] {
            scores[k] = cumhaz - if events[k] { 1.0 } else { 0.0 };
        }
        removed += w;
        i = j;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn five_rows() -> SurvivalDataset {
        SurvivalDataset::from_times(&[(1.0, true), (2.0, true), (2.0, true), (3.0, false), (4.0, true)])
            .unwrap()
    }

    #[test]
    fn risk_table_hand_example() {
        let rt = build_risk_table(&five_rows()).unwrap();
        assert_eq!(rt.times, vec![1.0, 2.0, 4.0]);
        assert_eq!(rt.at_risk, vec![5.0, 4.0, 1.0]);
        assert_eq!(rt.events, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn risk_table_single_and_censored() {
        let rt = build_risk_table(&SurvivalDataset::from_times(&[(5.0, true)]).unwrap()).unwrap();
        assert_eq!((rt.times, rt.at_risk, rt.events), (vec![5.0], vec![1.0], vec![1.0]));

        let all_censored = SurvivalDataset::from_times(&[(1.0, false), (3.0, false)]).unwrap();
        assert!(build_risk_table(&all_censored).unwrap().is_empty());
    }

    #[test]
    fn empty_inputs_error() {
        assert_eq!(SurvivalDataset::from_times(&[]), Err(Error::EmptyDataset));
        assert_eq!(RiskTable::from_samples(Vec::new()), Err(Error::EmptyDataset));
        assert_eq!(logrank_scores_weighted(&[], &[], &[]), Err(Error::EmptyDataset));
    }

    #[test]
    fn kaplan_meier_hand_example() {
        let km = kaplan_meier(&five_rows()).unwrap();
        assert_eq!(km.times(), &[1.0, 2.0, 4.0]);
        let expected = [0.8, 0.4, 0.0];
        for (p, e) in km.probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert_eq!(km.eval(0.5), 1.0);
        assert_eq!(km.eval(2.0), km.probs()[1]);
        assert_eq!(km.eval_left(2.0), km.probs()[0]);
        assert_eq!(km.eval(3.5), km.probs()[1]);
    }

    #[test]
    fn kaplan_meier_degenerate_cases() {
        let all_censored = SurvivalDataset::from_times(&[(1.0, false), (3.0, false)]).unwrap();
        let km = kaplan_meier(&all_censored).unwrap();
        assert!(km.is_empty());
        assert_eq!(km.eval(100.0), 1.0);

        let one = kaplan_meier(&SurvivalDataset::from_times(&[(5.0, true)]).unwrap()).unwrap();
        assert_eq!(one.eval(5.0), 0.0);
        assert_eq!(one.eval(4.9), 1.0);
    }

    #[test]
    fn censored_at_event_time_stays_at_risk() {
        // events first: n at t=2 includes the censored subject
        let d = SurvivalDataset::from_times(&[(2.0, true), (2.0, false), (3.0, true)]).unwrap();
        let rt = build_risk_table(&d).unwrap();
        assert_eq!(rt.at_risk, vec![3.0, 1.0]);
    }

    #[test]
    fn weighted_counts() {
        let obs = vec![
            Observation::new(1.0, true, vec![]).with_weight(2.0),
            Observation::new(2.0, true, vec![]).with_weight(0.5),
        ];
        let d = SurvivalDataset::new(obs, vec![]).unwrap();
        let rt = build_risk_table(&d).unwrap();
        assert_eq!(rt.at_risk, vec![2.5, 0.5]);
        assert_eq!(rt.events, vec![2.0, 0.5]);
    }

    #[test]
    fn median_examples() {
        let km = kaplan_meier(&five_rows()).unwrap();
        assert_eq!(median_survival(&km), Some(2.0));
        assert_eq!(median_survival(&SurvivalCurve::flat()), None);
        let half = SurvivalCurve::new(vec![10.0], vec![0.5]).unwrap();
        assert_eq!(median_survival(&half), Some(10.0));
    }

    #[test]
    fn logrank_examples() {
        let one = SurvivalDataset::from_times(&[(5.0, true)]).unwrap();
        assert_eq!(logrank_scores(&one).unwrap(), vec![0.0]);

        let two = SurvivalDataset::from_times(&[(1.0, true), (2.0, false)]).unwrap();
        assert_eq!(logrank_scores(&two).unwrap(), vec![-0.5, 0.5]);

        let n = 7;
        let rows: Vec<(f64, bool)> = (0..n).map(|i| ((i + 1) as f64, true)).collect();
        let s = logrank_scores(&SurvivalDataset::from_times(&rows).unwrap()).unwrap();
        assert!((s[0] - (1.0 / n as f64 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn curve_validation() {
        assert!(SurvivalCurve::new(vec![1.0, 1.0], vec![0.9, 0.8]).is_err());
        assert!(SurvivalCurve::new(vec![1.0, 2.0], vec![0.8, 0.9]).is_err());
        assert!(SurvivalCurve::new(vec![1.0], vec![1.2]).is_err());
        assert!(SurvivalCurve::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn dataset_validation() {
        let bad_dim = SurvivalDataset::new(vec![Observation::new(1.0, true, vec![1.0])], vec![]);
        assert!(matches!(bad_dim, Err(Error::DimensionMismatch { .. })));
        let neg = SurvivalDataset::from_times(&[(-1.0, true)]);
        assert!(matches!(neg, Err(Error::InvalidObservation { .. })));
    }

    fn censored_sample() -> impl Strategy<Value = Vec<(f64, bool)>> {
        prop::collection::vec(((0u32..40).prop_map(|t| t as f64), any::<bool>()), 1..60)
    }

    proptest! {
        #[test]
        fn km_is_valid_curve(rows in censored_sample()) {
            let km = kaplan_meier(&SurvivalDataset::from_times(&rows).unwrap()).unwrap();
            prop_assert!(SurvivalCurve::new(km.times().to_vec(), km.probs().to_vec()).is_ok());
        }

        #[test]
        fn km_without_censoring_is_one_minus_ecdf(times in prop::collection::vec(0u32..30, 1..50)) {
            let rows: Vec<(f64, bool)> = times.iter().map(|&t| (t as f64, true)).collect();
            let km = kaplan_meier(&SurvivalDataset::from_times(&rows).unwrap()).unwrap();
            let n = rows.len() as f64;
            for t in 0..32 {
                let t = t as f64;
                let ecdf = rows.iter().filter(|r| r.0 <= t).count() as f64 / n;
                prop_assert!((1.0 - km.eval(t) - ecdf).abs() <= 1e-12);
            }
        }

        #[test]
        fn km_is_permutation_invariant(rows in censored_sample(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            let a = kaplan_meier(&SurvivalDataset::from_times(&rows).unwrap()).unwrap();
            let b = kaplan_meier(&SurvivalDataset::from_times(&shuffled).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn median_scales_with_time(rows in censored_sample(), c in 0.1f64..10.0) {
            let scaled: Vec<(f64, bool)> = rows.iter().map(|&(t, e)| (t * c, e)).collect();
            let m1 = median_survival(&kaplan_meier(&SurvivalDataset::from_times(&rows).unwrap()).unwrap());
            let m2 = median_survival(&kaplan_meier(&SurvivalDataset::from_times(&scaled).unwrap()).unwrap());
            match (m1, m2) {
                (Some(a), Some(b)) => prop_assert_eq!(a * c, b),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn censored_and_event_scores_differ_by_one(
            rows in prop::collection::vec(((0u32..6).prop_map(|t| t as f64), any::<bool>()), 2..40)
        ) {
            let s = logrank_scores(&SurvivalDataset::from_times(&rows).unwrap()).unwrap();
            for (i, a) in rows.iter().enumerate() {
                for (j, b) in rows.iter().enumerate() {
                    if a.0 == b.0 && !a.1 && b.1 {
                        prop_assert!((s[i] - s[j] - 1.0).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
