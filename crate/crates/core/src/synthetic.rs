//! Seeded generators with known ground truth.
//!
//! [`sample_survival`] draws censored samples from parametric hazards by
//! inverse-transform sampling. [`sample_event_log`] simulates player event
//! logs for whale, payer and non-payer cohorts with geometric lifetimes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate, NaiveDateTime, TimeDelta};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

use crate::churn::{EventKind, PlayerEvent, Segment};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, Rng};
use crate::survival::{Observation, SurvivalDataset};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum HazardKind {
    /// Constant hazard `rate`.
    Exponential { rate: f64 },
    /// `S(t) = exp(−(t/scale)^shape)`.
    Weibull { shape: f64, scale: f64 },
    /// Hazard `rate · exp(β·x)`; uses `beta.len()` covariates.
    CoxLinear { beta: Vec<f64>, rate: f64 },
    /// Hazard `rate · exp(β₁x₁ + β₂x₁x₂ + β₃·1{x₃ > 0.5})`; needs at least
    /// three covariates.
    Nonlinear { rate: f64, beta: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Censoring {
    None,
    /// Censoring time uniform on `[0, max]`.
    Uniform { max: f64 },
    /// Everyone still alive at `time` is censored there.
    Administrative { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CovariateDist {
    #[default]
    Uniform,
    Normal,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HazardSpec {
    pub kind: HazardKind,
    pub censoring: Censoring,
    pub n: usize,
    pub seed: u64,
    /// Covariate count for the kinds that do not fix it; extra columns are
    /// noise.
    #[cfg_attr(feature = "serde", serde(default))]
    pub n_covariates: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub covariates: CovariateDist,
}

impl HazardSpec {
    pub fn new(kind: HazardKind, censoring: Censoring, n: usize, seed: u64) -> Self {
        Self {
            kind,
            censoring,
            n,
            seed,
            n_covariates: 0,
            covariates: CovariateDist::Uniform,
        }
    }

    fn dimension(&self) -> usize {
        match &self.kind {
            HazardKind::CoxLinear { beta, .. } => beta.len().max(self.n_covariates),
            HazardKind::Nonlinear { .. } => self.n_covariates.max(3),
            _ => self.n_covariates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} must be positive")))
            }
        };
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        match &self.kind {
            HazardKind::Exponential { rate } => positive(*rate, "rate")?,
            HazardKind::Weibull { shape, scale } => {
                positive(*shape, "shape")?;
                positive(*scale, "scale")?;
            }
            HazardKind::CoxLinear { beta, rate } => {
                positive(*rate, "rate")?;
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(Error::InvalidConfig("beta must be finite".into()));
                }
            }
            HazardKind::Nonlinear { rate, beta } => {
                positive(*rate, "rate")?;
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(Error::InvalidConfig("beta must be finite".into()));
                }
            }
        }
        match self.censoring {
            Censoring::None => Ok(()),
            Censoring::Uniform { max } => positive(max, "censoring max"),
            Censoring::Administrative { time } => positive(time, "censoring time"),
        }
    }
}

fn unit_open(rng: &mut Rng) -> f64 {
    // (0, 1], so that ln never sees zero
    1.0 - rng.random::<f64>()
}

/// Censored sample from `spec`. Covariate columns are named `x1, x2, …`.
pub fn sample_survival(spec: &HazardSpec) -> Result<SurvivalDataset> {
    spec.validate()?;
    let p = spec.dimension();
    let mut rng = seeded(spec.seed);
    let mut obs = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..p)
            .map(|_| match spec.covariates {
                CovariateDist::Uniform => rng.random::<f64>(),
                CovariateDist::Normal => StandardNormal.sample(&mut rng),
            })
            .collect();
        let e = -libm::log(unit_open(&mut rng));
        let t = match &spec.kind {
            HazardKind::Exponential { rate } => e / rate,
            HazardKind::Weibull { shape, scale } => scale * libm::pow(e, 1.0 / shape),
            HazardKind::CoxLinear { beta, rate } => {
                let eta: f64 = beta.iter().zip(&x).map(|(b, v)| b * v).sum();
                e / (rate * libm::exp(eta))
            }
            HazardKind::Nonlinear { rate, beta } => {
                let step = if x[2] > 0.5 { 1.0 } else { 0.0 };
                let eta = beta[0] * x[0] + beta[1] * x[0] * x[1] + beta[2] * step;
                e / (rate * libm::exp(eta))
            }
        };
        let c = match spec.censoring {
            Censoring::None => f64::INFINITY,
            Censoring::Uniform { max } => rng.random::<f64>() * max,
            Censoring::Administrative { time } => time,
        };
        obs.push(Observation::new(t.min(c), t <= c, x));
    }
    SurvivalDataset::new(obs, (1..=p).map(|j| format!("x{j}")).collect())
}

/// Upper bound `c` of uniform censoring on `[0, c]` that censors a
/// `fraction` of exponential(`rate`) event times in expectation.
pub fn uniform_censoring_max_for_rate(rate: f64, fraction: f64) -> Result<f64> {
    if !(rate > 0.0) || !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig("need rate > 0 and 0 < fraction < 1".into()));
    }
    // P(C < T) = (1 − e^{−y}) / y with y = rate·c, decreasing in y
    let censored = |y: f64| -libm::expm1(-y) / y;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while censored(hi) > fraction {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored(mid) > fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / rate)
}

/// Daily play behaviour of a simulated cohort.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivityModel {
    /// Chance of playing on a day strictly between the first and last day.
    pub p_active_day: f64,
    /// Mean number of sessions beyond the first on an active day.
    pub extra_sessions: f64,
    pub session_minutes: f64,
    pub actions_per_session: f64,
    /// Chance of a purchase on an active day; payers also buy on day one.
    pub purchase_prob: f64,
    pub purchase_amount: f64,
    pub level_up_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentSpec {
    pub segment: Segment,
    pub n: usize,
    /// Probability of never returning after the registration day.
    pub first_day_churn: f64,
    /// Daily churn probability after the first day.
    pub daily_hazard: f64,
    pub activity: ActivityModel,
}

impl SegmentSpec {
    pub fn non_payer(n: usize) -> Self {
        Self {
            segment: Segment::NonPayer,
            n,
            first_day_churn: 0.8,
            daily_hazard: 0.05,
            activity: ActivityModel {
                p_active_day: 0.5,
                extra_sessions: 0.5,
                session_minutes: 15.0,
                actions_per_session: 4.0,
                purchase_prob: 0.0,
                purchase_amount: 0.0,
                level_up_prob: 0.1,
            },
        }
    }

    pub fn payer(n: usize) -> Self {
        Self {
            segment: Segment::Payer,
            n,
            first_day_churn: 0.2,
            daily_hazard: 0.01,
            activity: ActivityModel {
                p_active_day: 0.5,
                extra_sessions: 0.5,
                session_minutes: 30.0,
                actions_per_session: 5.0,
                purchase_prob: 0.05,
                purchase_amount: 5.0,
                level_up_prob: 0.2,
            },
        }
    }

    /// Survival of 0.8 at day 100.
    pub fn whale(n: usize) -> Self {
        Self {
            segment: Segment::Whale,
            n,
            first_day_churn: 0.0,
            daily_hazard: 1.0 - libm::pow(0.8, 1.0 / 99.0),
            activity: ActivityModel {
                p_active_day: 0.6,
                extra_sessions: 0.8,
                session_minutes: 45.0,
                actions_per_session: 6.0,
                purchase_prob: 0.3,
                purchase_amount: 40.0,
                level_up_prob: 0.3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CohortSpec {
    pub segments: Vec<SegmentSpec>,
    /// First possible registration day.
    pub start: NaiveDate,
    /// Registrations are uniform over this many days from `start`.
    pub registration_days: u32,
    /// Observation ends this many days after `start`.
    pub observation_days: u32,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            segments: alloc::vec![SegmentSpec::non_payer(5000), SegmentSpec::payer(500), SegmentSpec::whale(100)],
            start: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
            registration_days: 365,
            observation_days: 540,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn observation_end(&self) -> NaiveDate {
        self.start + Days::new(u64::from(self.observation_days))
    }

    pub fn validate(&self) -> Result<()> {
        if self.registration_days == 0 || self.registration_days > self.observation_days {
            return Err(Error::InvalidConfig(
                "need 0 < registration_days <= observation_days".into(),
            ));
        }
        for s in &self.segments {
            let prob = |v: f64| (0.0..=1.0).contains(&v);
            let a = &s.activity;
            if !prob(s.first_day_churn) || !(s.daily_hazard > 0.0 && s.daily_hazard <= 1.0) {
                return Err(Error::InvalidConfig(format!("{} churn probabilities out of range", s.segment)));
            }
            if !prob(a.p_active_day) || !prob(a.purchase_prob) || !prob(a.level_up_prob) {
                return Err(Error::InvalidConfig(format!("{} activity probabilities out of range", s.segment)));
            }
            if [a.extra_sessions, a.session_minutes, a.actions_per_session, a.purchase_amount]
                .iter()
                .any(|v| !(*v >= 0.0 && v.is_finite()))
            {
                return Err(Error::InvalidConfig(format!("{} activity rates must be non-negative", s.segment)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPlayer {
    pub player_id: String,
    pub segment: Segment,
    /// Days from registration to the last day played, counting both ends.
    pub lifetime_days: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedLog {
    /// Grouped by player, each player's events in time order.
    pub events: Vec<PlayerEvent>,
    pub players: Vec<SimulatedPlayer>,
    pub observation_end: NaiveDate,
}

fn poisson(rng: &mut Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

fn exponential(rng: &mut Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Exp::new(1.0 / mean).map_or(0.0, |d| d.sample(rng))
}

fn lifetime(rng: &mut Rng, spec: &SegmentSpec) -> u32 {
    if rng.random::<f64>() < spec.first_day_churn {
        return 1;
    }
    // P(lifetime > d) = (1 − first_day_churn)(1 − hazard)^(d − 1)
    let extra = libm::floor(libm::log(unit_open(rng)) / libm::log1p(-spec.daily_hazard));
    2 + extra.min(1e6) as u32
}

struct DayContext<'a> {
    id: &'a str,
    date: NaiveDate,
    buys: bool,
    level: &'a mut u32,
}

fn simulate_day(rng: &mut Rng, a: &ActivityModel, ctx: DayContext<'_>, out: &mut Vec<PlayerEvent>) {
    let sessions = 1 + poisson(rng, a.extra_sessions);
    let day_start = ctx.date.and_hms_opt(0, 0, 0).expect("midnight");
    let day_end = day_start + TimeDelta::minutes(24 * 60 - 1);
    let mut day_events = Vec::new();
    for _ in 0..sessions {
        let start = day_start + TimeDelta::seconds(rng.random_range(0..22 * 3600));
        let minutes = exponential(rng, a.session_minutes).max(1.0);
        let end = (start + TimeDelta::seconds((minutes * 60.0) as i64)).min(day_end);
        let span = end.signed_duration_since(start).num_seconds().max(1);
        let within = |rng: &mut Rng| start + TimeDelta::seconds(rng.random_range(0..span));
        day_events.push(PlayerEvent::new(ctx.id, start, EventKind::SessionStart));
        for _ in 0..poisson(rng, a.actions_per_session) {
            day_events.push(PlayerEvent::new(ctx.id, within(rng), EventKind::Action));
        }
        day_events.push(PlayerEvent::new(ctx.id, end, EventKind::SessionEnd));
    }
    let first_session = day_events[0].timestamp;
    let at = |rng: &mut Rng| first_session + TimeDelta::seconds(rng.random_range(0..60));
    if ctx.buys {
        let amount = libm::round(exponential(rng, a.purchase_amount).max(0.99) * 100.0) / 100.0;
        day_events.push(PlayerEvent::purchase(ctx.id, at(rng), amount));
    }
    if rng.random::<f64>() < a.level_up_prob {
        *ctx.level += 1;
        day_events.push(PlayerEvent::level_up(ctx.id, at(rng), *ctx.level));
    }
    day_events.sort_by(|x, y| x.timestamp.cmp(&y.timestamp).then(x.kind.cmp(&y.kind)));
    out.append(&mut day_events);
}

/// Per-player simulation stream. Player ids are `p000001, p000002, …` in
/// segment order; every player's events depend only on the seed and the
/// player's index, so large cohorts can be processed one player at a time.
pub struct EventLogStream<'a> {
    spec: &'a CohortSpec,
    segment: usize,
    within: usize,
    index: u64,
}

impl Iterator for EventLogStream<'_> {
    /// A player and their events in time order.
    type Item = (SimulatedPlayer, Vec<PlayerEvent>);

    fn next(&mut self) -> Option<Self::Item> {
        while self.within >= self.spec.segments.get(self.segment)?.n {
            self.segment += 1;
            self.within = 0;
        }
        self.within += 1;
        self.index += 1;
        Some(simulate_player(self.spec, &self.spec.segments[self.segment], self.index))
    }
}

pub fn event_log_stream(spec: &CohortSpec) -> Result<EventLogStream<'_>> {
    spec.validate()?;
    Ok(EventLogStream {
        spec,
        segment: 0,
        within: 0,
        index: 0,
    })
}

fn simulate_player(spec: &CohortSpec, seg: &SegmentSpec, index: u64) -> (SimulatedPlayer, Vec<PlayerEvent>) {
    let end = spec.observation_end();
    let pays = seg.segment != Segment::NonPayer;
    let mut rng = seeded(derive_seed(spec.seed, index));
    let id = format!("p{index:06}");
    let reg = spec.start + Days::new(rng.random_range(0..u64::from(spec.registration_days)));
    let life = lifetime(&mut rng, seg);
    let mut level = 1;
    let mut events = Vec::new();
    for d in 0..life {
        let date = reg + Days::new(u64::from(d));
        if date > end {
            break;
        }
        let edge = d == 0 || d + 1 == life;
        if !edge && rng.random::<f64>() >= seg.activity.p_active_day {
            continue;
        }
        let buys = pays && (d == 0 || rng.random::<f64>() < seg.activity.purchase_prob);
        let ctx = DayContext {
            id: &id,
            date,
            buys,
            level: &mut level,
        };
        simulate_day(&mut rng, &seg.activity, ctx, &mut events);
    }
    let player = SimulatedPlayer {
        player_id: id,
        segment: seg.segment,
        lifetime_days: life,
    };
    (player, events)
}

/// Whole simulated event log in memory; see [`event_log_stream`] for large
/// cohorts.
pub fn sample_event_log(spec: &CohortSpec) -> Result<SimulatedLog> {
    let mut events = Vec::new();
    let mut players = Vec::new();
    for (player, mut evs) in event_log_stream(spec)? {
        players.push(player);
        events.append(&mut evs);
    }
    Ok(SimulatedLog {
        events,
        players,
        observation_end: spec.observation_end(),
    })
}

/// Timestamp helper for callers building logs by hand.
pub fn at_day(start: NaiveDate, day: u32, minute_of_day: u32) -> NaiveDateTime {
    (start + Days::new(u64::from(day))).and_hms_opt(0, 0, 0).expect("midnight")
        + TimeDelta::minutes(i64::from(minute_of_day))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::churn::{extract_all, label_churn, FeatureConfig};
    use crate::survival::kaplan_meier;
    use alloc::vec;
    use proptest::prelude::*;

    fn exp_spec(n: usize, seed: u64, censoring: Censoring) -> HazardSpec {
        HazardSpec::new(HazardKind::Exponential { rate: 0.01 }, censoring, n, seed)
    }

    #[test]
    fn exponential_mean() {
        let d = sample_survival(&exp_spec(10_000, 1, Censoring::None)).unwrap();
        let mean = d.observations().iter().map(|o| o.time).sum::<f64>() / 1e4;
        assert!((mean - 100.0).abs() < 5.0, "{mean}");
        assert!(d.observations().iter().all(|o| o.event));
    }

    #[test]
    fn administrative_censoring_below_all_events() {
        let spec = HazardSpec::new(
            HazardKind::Weibull { shape: 50.0, scale: 100.0 },
            Censoring::Administrative { time: 50.0 },
            500,
            2,
        );
        let d = sample_survival(&spec).unwrap();
        assert!(d.observations().iter().all(|o| !o.event && o.time == 50.0));
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let m = (n - 1.0) / 2.0;
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
        let var: f64 = ra.iter().map(|x| (x - m) * (x - m)).sum();
        cov / var
    }

    #[test]
    fn null_cox_covariates_are_independent() {
        let spec = HazardSpec::new(HazardKind::CoxLinear { beta: vec![0.0, 0.0], rate: 0.05 }, Censoring::None, 10_000, 3);
        let d = sample_survival(&spec).unwrap();
        let t: Vec<f64> = d.observations().iter().map(|o| o.time).collect();
        for j in 0..2 {
            let x: Vec<f64> = d.observations().iter().map(|o| o.covariates[j]).collect();
            assert!(spearman(&x, &t).abs() < 0.05);
        }
        let strong = HazardSpec::new(HazardKind::CoxLinear { beta: vec![2.0], rate: 0.05 }, Censoring::None, 2000, 3);
        let d = sample_survival(&strong).unwrap();
        let t: Vec<f64> = d.observations().iter().map(|o| o.time).collect();
        let x: Vec<f64> = d.observations().iter().map(|o| o.covariates[0]).collect();
        assert!(spearman(&x, &t) < -0.2);
    }

    #[test]
    fn censoring_fraction_calibration() {
        let c = uniform_censoring_max_for_rate(0.01, 0.3).unwrap();
        let d = sample_survival(&exp_spec(20_000, 4, Censoring::Uniform { max: c })).unwrap();
        let frac = 1.0 - d.n_events() as f64 / 2e4;
        assert!((frac - 0.3).abs() < 0.015, "{frac}");
    }

    #[test]
    fn km_close_to_truth() {
        let bound = 1.36 / libm::sqrt(2000.0);
        for seed in 0..5 {
            let d = sample_survival(&exp_spec(2000, seed, Censoring::None)).unwrap();
            let km = kaplan_meier(&d).unwrap();
            let mut worst: f64 = 0.0;
            for &t in km.times().iter().filter(|&&t| t <= 300.0) {
                worst = worst.max((km.eval(t) - libm::exp(-0.01 * t)).abs());
                worst = worst.max((km.eval_left(t) - libm::exp(-0.01 * t)).abs());
            }
            assert!(worst <= bound, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn nonlinear_and_weibull_shapes() {
        let spec = HazardSpec {
            n_covariates: 5,
            ..HazardSpec::new(HazardKind::Nonlinear { rate: 0.01, beta: [2.0, -4.0, 2.0] }, Censoring::None, 100, 1)
        };
        let d = sample_survival(&spec).unwrap();
        assert_eq!(d.n_features(), 5);
        let w = HazardSpec::new(HazardKind::Weibull { shape: 1.0, scale: 100.0 }, Censoring::None, 10_000, 5);
        let mean = sample_survival(&w).unwrap().observations().iter().map(|o| o.time).sum::<f64>() / 1e4;
        assert!((mean - 100.0).abs() < 5.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(sample_survival(&exp_spec(0, 1, Censoring::None)).is_err());
        assert!(sample_survival(&HazardSpec::new(HazardKind::Exponential { rate: -1.0 }, Censoring::None, 5, 1)).is_err());
        assert!(uniform_censoring_max_for_rate(0.01, 1.2).is_err());
    }

    fn cohort(segments: Vec<SegmentSpec>, seed: u64) -> CohortSpec {
        CohortSpec {
            segments,
            seed,
            ..CohortSpec::default()
        }
    }

    fn km_of_cohort(spec: &CohortSpec) -> crate::survival::SurvivalCurve {
        let end = spec.observation_end();
        let times: Vec<(f64, bool)> = event_log_stream(spec)
            .unwrap()
            .map(|(_, evs)| {
                let l = label_churn(&evs, end, 10).unwrap();
                (f64::from(l.time), l.event)
            })
            .collect();
        kaplan_meier(&SurvivalDataset::from_times(&times).unwrap()).unwrap()
    }

    #[test]
    fn non_payer_first_day_churn() {
        let s1 = km_of_cohort(&cohort(vec![SegmentSpec::non_payer(5000)], 1)).eval(1.0);
        assert!((s1 - 0.2).abs() <= 0.03, "{s1}");
    }

    #[test]
    fn whale_day_hundred_survival() {
        let s100 = km_of_cohort(&cohort(vec![SegmentSpec::whale(2000)], 2)).eval(100.0);
        assert!((s100 - 0.8).abs() <= 0.05, "{s100}");
    }

    #[test]
    fn stream_matches_batch() {
        let spec = cohort(vec![SegmentSpec::payer(5), SegmentSpec::whale(0), SegmentSpec::non_payer(7)], 4);
        let log = sample_event_log(&spec).unwrap();
        let streamed: Vec<_> = event_log_stream(&spec).unwrap().collect();
        assert_eq!(streamed.len(), 12);
        assert_eq!(streamed.iter().map(|p| p.0.clone()).collect::<Vec<_>>(), log.players);
        assert_eq!(streamed.into_iter().flat_map(|p| p.1).collect::<Vec<_>>(), log.events);
    }

    #[test]
    fn empty_segment_gives_empty_stream() {
        let log = sample_event_log(&cohort(vec![SegmentSpec::whale(0)], 2)).unwrap();
        assert!(log.events.is_empty() && log.players.is_empty());
    }

    #[test]
    fn event_logs_are_well_formed() {
        let log = sample_event_log(&cohort(vec![SegmentSpec::payer(50), SegmentSpec::whale(20)], 9)).unwrap();
        for e in &log.events {
            e.validate().unwrap();
            assert!(e.timestamp.date() <= log.observation_end);
        }
        let rows = extract_all(&log.events, log.observation_end, &FeatureConfig::default()).unwrap();
        assert_eq!(rows.len(), 70);
        assert!(rows.iter().all(|r| r.n_purchases >= 1.0));
        assert_eq!(log, sample_event_log(&cohort(vec![SegmentSpec::payer(50), SegmentSpec::whale(20)], 9)).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn samples_are_valid_and_seeded(seed in any::<u64>(), n in 1usize..200, cmax in 1.0f64..500.0) {
            let spec = HazardSpec {
                n_covariates: 2,
                covariates: CovariateDist::Normal,
                ..HazardSpec::new(HazardKind::CoxLinear { beta: vec![0.5, -0.5], rate: 0.02 }, Censoring::Uniform { max: cmax }, n, seed)
            };
            let a = sample_survival(&spec).unwrap();
            prop_assert_eq!(a.len(), n);
            prop_assert!(a.observations().iter().all(|o| o.time <= cmax));
            prop_assert_eq!(a, sample_survival(&spec).unwrap());
        }
    }
}
