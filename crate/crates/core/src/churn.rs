//! Player event logs to churn labels and feature rows.
//!
//! A player churns after `inactivity_days` consecutive days without any
//! event. Survival time is counted in calendar days from registration (the
//! first event) and includes the first day, so a player who never returns
//! after registering has time 1. Players still active near the end of the
//! observation window are censored at the window end.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

use crate::error::{Error, Result};
use crate::survival::{Observation, SurvivalDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EventKind {
    SessionStart,
    SessionEnd,
    Action,
    Purchase,
    LevelUp,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SessionStart => "session_start",
            EventKind::SessionEnd => "session_end",
            EventKind::Action => "action",
            EventKind::Purchase => "purchase",
            EventKind::LevelUp => "level_up",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "session_start" => EventKind::SessionStart,
            "session_end" => EventKind::SessionEnd,
            "action" => EventKind::Action,
            "purchase" => EventKind::Purchase,
            "level_up" => EventKind::LevelUp,
            other => return Err(Error::InvalidInput(alloc::format!("unknown event kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlayerEvent {
    pub player_id: String,
    pub timestamp: NaiveDateTime,
    pub kind: EventKind,
    /// Purchase value.
    pub amount: Option<f64>,
    /// Level reached, on level-up events.
    pub level: Option<u32>,
}

impl PlayerEvent {
    pub fn new(player_id: impl Into<String>, timestamp: NaiveDateTime, kind: EventKind) -> Self {
        Self {
            player_id: player_id.into(),
            timestamp,
            kind,
            amount: None,
            level: None,
        }
    }

    pub fn purchase(player_id: impl Into<String>, timestamp: NaiveDateTime, amount: f64) -> Self {
        Self {
            amount: Some(amount),
            ..Self::new(player_id, timestamp, EventKind::Purchase)
        }
    }

    pub fn level_up(player_id: impl Into<String>, timestamp: NaiveDateTime, level: u32) -> Self {
        Self {
            level: Some(level),
            ..Self::new(player_id, timestamp, EventKind::LevelUp)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.amount, self.level) {
            (EventKind::Purchase, Some(a), _) if a.is_finite() && a >= 0.0 => Ok(()),
            (EventKind::Purchase, ..) => Err(self.invalid("purchase needs a non-negative amount")),
            (EventKind::LevelUp, _, Some(_)) => Ok(()),
            (EventKind::LevelUp, ..) => Err(self.invalid("level_up needs a level")),
            _ => Ok(()),
        }
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidInput(alloc::format!("player {}: {reason}", self.player_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Segment {
    Whale,
    Payer,
    NonPayer,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Whale => "whale",
            Segment::Payer => "payer",
            Segment::NonPayer => "non_payer",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Segment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "whale" => Segment::Whale,
            "payer" => Segment::Payer,
            "non_payer" | "non-payer" => Segment::NonPayer,
            other => return Err(Error::InvalidInput(alloc::format!("unknown segment {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChurnLabel {
    /// Days from registration, counting the registration day.
    pub time: u32,
    pub event: bool,
    pub registration: NaiveDate,
    pub last_active: NaiveDate,
}

fn days_between(later: NaiveDate, earlier: NaiveDate) -> i64 {
    later.signed_duration_since(earlier).num_days()
}

fn single_player(events: &[PlayerEvent]) -> Result<&str> {
    let first = events.first().ok_or(Error::EmptyDataset)?;
    if events.iter().any(|e| e.player_id != first.player_id) {
        return Err(Error::InvalidInput("events belong to more than one player".into()));
    }
    Ok(&first.player_id)
}

/// Churn label of one player's events as of `observation_end`.
/// `inactivity_days = u32::MAX` never declares churn.
pub fn label_churn(events: &[PlayerEvent], observation_end: NaiveDate, inactivity_days: u32) -> Result<ChurnLabel> {
    let id = single_player(events)?;
    let registration = events.iter().map(|e| e.timestamp.date()).min().expect("nonempty");
    let last_active = events.iter().map(|e| e.timestamp.date()).max().expect("nonempty");
    if last_active > observation_end {
        return Err(Error::FutureEvents(id.to_string()));
    }
    let idle = days_between(observation_end, last_active);
    let event = idle >= i64::from(inactivity_days);
    let until = if event { last_active } else { observation_end };
    Ok(ChurnLabel {
        time: (days_between(until, registration) + 1) as u32,
        event,
        registration,
        last_active,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FeatureConfig {
    /// Length of the early-play window, in weeks.
    pub first_weeks: u32,
    /// Trailing window for the playtime moving average, in days.
    pub moving_window_days: u32,
    /// Trailing window for recent action activity, in days.
    pub last_days: u32,
    pub inactivity_days: u32,
    /// Duration credited to a session start with no matching end.
    pub unpaired_session_minutes: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            first_weeks: 2,
            moving_window_days: 7,
            last_days: 7,
            inactivity_days: 10,
            unpaired_session_minutes: 30.0,
        }
    }
}

/// One player's survival response and behavioural features.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlayerFeatureRow {
    pub player_id: String,
    pub time: f64,
    pub event: bool,
    /// Minutes per lifetime day.
    pub playtime_daily_avg: f64,
    /// Minutes per day over the first `first_weeks` weeks.
    pub playtime_first_weeks_avg: f64,
    /// Minutes per day over the trailing `moving_window_days`.
    pub playtime_moving_avg: f64,
    pub lifetime_days: f64,
    pub days_played: f64,
    /// `days_played / lifetime_days`
    pub loyalty_index: f64,
    pub days_to_first_purchase: Option<f64>,
    pub days_since_last_purchase: Option<f64>,
    pub n_actions: f64,
    pub n_sessions: f64,
    pub n_purchases: f64,
    pub purchase_amount: f64,
    /// |lifetime mean daily actions − trailing `last_days` mean daily actions|
    pub action_activity_distance: f64,
    pub level: u32,
    pub segment: Segment,
}

/// Every numeric feature a row can supply, in canonical order.
pub const FEATURE_NAMES: [&str; 15] = [
    "playtime_daily_avg",
    "playtime_first_weeks_avg",
    "playtime_moving_avg",
    "lifetime_days",
    "days_played",
    "loyalty_index",
    "days_to_first_purchase",
    "days_since_last_purchase",
    "n_actions",
    "n_sessions",
    "n_purchases",
    "purchase_amount",
    "action_activity_distance",
    "level",
    "segment_whale",
];

/// Model features used by default. `lifetime_days` is left out because it
/// equals the survival time of churned players.
pub const DEFAULT_FEATURES: [&str; 14] = [
    "playtime_daily_avg",
    "playtime_first_weeks_avg",
    "playtime_moving_avg",
    "days_played",
    "loyalty_index",
    "days_to_first_purchase",
    "days_since_last_purchase",
    "n_actions",
    "n_sessions",
    "n_purchases",
    "purchase_amount",
    "action_activity_distance",
    "level",
    "segment_whale",
];

impl PlayerFeatureRow {
    /// Named feature value, with purchase-timing features of non-payers
    /// imputed as `lifetime_days + 1`.
    pub fn feature(&self, name: &str) -> Option<f64> {
        let never = self.lifetime_days + 1.0;
        Some(match name {
            "playtime_daily_avg" => self.playtime_daily_avg,
            "playtime_first_weeks_avg" => self.playtime_first_weeks_avg,
            "playtime_moving_avg" => self.playtime_moving_avg,
            "lifetime_days" => self.lifetime_days,
            "days_played" => self.days_played,
            "loyalty_index" => self.loyalty_index,
            "days_to_first_purchase" => self.days_to_first_purchase.unwrap_or(never),
            "days_since_last_purchase" => self.days_since_last_purchase.unwrap_or(never),
            "n_actions" => self.n_actions,
            "n_sessions" => self.n_sessions,
            "n_purchases" => self.n_purchases,
            "purchase_amount" => self.purchase_amount,
            "action_activity_distance" => self.action_activity_distance,
            "level" => f64::from(self.level),
            "segment_whale" => f64::from(u8::from(self.segment == Segment::Whale)),
            _ => return None,
        })
    }
}

fn session_minutes(sorted: &[&PlayerEvent], unpaired: f64) -> Vec<(NaiveDate, f64)> {
    let unpaired_delta = TimeDelta::milliseconds((unpaired * 60_000.0) as i64);
    let mut out = Vec::new();
    let mut open: Option<NaiveDateTime> = None;
    let close = |start: NaiveDateTime, end: NaiveDateTime, out: &mut Vec<(NaiveDate, f64)>| {
        let minutes = end.signed_duration_since(start).num_milliseconds() as f64 / 60_000.0;
        out.push((start.date(), minutes.max(0.0)));
    };
    for e in sorted {
        match e.kind {
            EventKind::SessionStart => {
                if let Some(start) = open.take() {
                    close(start, (start + unpaired_delta).min(e.timestamp), &mut out);
                }
                open = Some(e.timestamp);
            }
            EventKind::SessionEnd => {
                if let Some(start) = open.take() {
                    close(start, e.timestamp, &mut out);
                }
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        close(start, start + unpaired_delta, &mut out);
    }
    out
}

/// Features of one player's events as of `observation_end`.
pub fn extract_features(
    events: &[PlayerEvent],
    observation_end: NaiveDate,
    config: &FeatureConfig,
) -> Result<PlayerFeatureRow> {
    let label = label_churn(events, observation_end, config.inactivity_days)?;
    for e in events {
        e.validate()?;
    }
    let mut sorted: Vec<&PlayerEvent> = events.iter().collect();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.kind.cmp(&b.kind)));

    let reg = label.registration;
    let lifetime = label.time as f64;
    // day index of an event relative to registration
    let day = |d: NaiveDate| days_between(d, reg);
    let last_day = i64::from(label.time) - 1;
    let in_trailing = |d: NaiveDate, window: u32| day(d) > last_day - i64::from(window);
    let trailing_len = |window: u32| f64::from(window).min(lifetime).max(1.0);

    let sessions = session_minutes(&sorted, config.unpaired_session_minutes);
    let total_minutes: f64 = sessions.iter().map(|s| s.1).fold(0.0, |a, v| a + v);
    let first_window = 7 * config.first_weeks;
    let first_minutes: f64 = sessions
        .iter()
        .filter(|s| day(s.0) < i64::from(first_window))
        .map(|s| s.1)
        .fold(0.0, |a, v| a + v);
    let recent_minutes: f64 = sessions
        .iter()
        .filter(|s| in_trailing(s.0, config.moving_window_days))
        .map(|s| s.1)
        .fold(0.0, |a, v| a + v);

    let mut active_days: Vec<NaiveDate> = sorted.iter().map(|e| e.timestamp.date()).collect();
    active_days.dedup();
    let days_played = active_days.len() as f64;

    let actions: Vec<NaiveDate> = sorted
        .iter()
        .filter(|e| e.kind == EventKind::Action)
        .map(|e| e.timestamp.date())
        .collect();
    let recent_actions = actions.iter().filter(|&&d| in_trailing(d, config.last_days)).count() as f64;
    let n_actions = actions.len() as f64;

    let purchases: Vec<&&PlayerEvent> = sorted.iter().filter(|e| e.kind == EventKind::Purchase).collect();
    let purchase_amount: f64 = purchases.iter().filter_map(|e| e.amount).fold(0.0, |a, v| a + v); // an empty f64 sum is -0.0
    let days_to_first_purchase = purchases.first().map(|e| day(e.timestamp.date()) as f64);
    let days_since_last_purchase = purchases.last().map(|e| (last_day - day(e.timestamp.date())) as f64);

    let level = sorted.iter().filter_map(|e| e.level).max().unwrap_or(1);

    Ok(PlayerFeatureRow {
        player_id: sorted[0].player_id.clone(),
        time: lifetime,
        event: label.event,
        playtime_daily_avg: total_minutes / lifetime,
        playtime_first_weeks_avg: first_minutes / trailing_len(first_window),
        playtime_moving_avg: recent_minutes / trailing_len(config.moving_window_days),
        lifetime_days: lifetime,
        days_played,
        loyalty_index: days_played / lifetime,
        days_to_first_purchase,
        days_since_last_purchase,
        n_actions,
        n_sessions: sorted.iter().filter(|e| e.kind == EventKind::SessionStart).count() as f64,
        n_purchases: purchases.len() as f64,
        purchase_amount,
        action_activity_distance: libm::fabs(n_actions / lifetime - recent_actions / trailing_len(config.last_days)),
        level,
        segment: if purchase_amount > 0.0 { Segment::Payer } else { Segment::NonPayer },
    })
}

/// Features of every player in a mixed event log, ordered by player id.
/// Input order does not matter.
pub fn extract_all(
    events: &[PlayerEvent],
    observation_end: NaiveDate,
    config: &FeatureConfig,
) -> Result<Vec<PlayerFeatureRow>> {
    let mut by_player: BTreeMap<&str, Vec<PlayerEvent>> = BTreeMap::new();
    for e in events {
        by_player.entry(e.player_id.as_str()).or_default().push(e.clone());
    }
    by_player
        .values()
        .map(|evs| extract_features(evs, observation_end, config))
        .collect()
}

/// Assigns whale / payer / non-payer segments. Payers spending at least the
/// `whale_quantile` quantile of payer spend are whales; ties at the
/// threshold count as whales.
pub fn segment_players(rows: &mut [PlayerFeatureRow], whale_quantile: f64) {
    let mut spend: Vec<f64> = rows
        .iter()
        .filter(|r| r.purchase_amount > 0.0)
        .map(|r| r.purchase_amount)
        .collect();
    spend.sort_by(f64::total_cmp);
    let threshold = if spend.is_empty() {
        f64::INFINITY
    } else {
        let k = libm::floor(whale_quantile.clamp(0.0, 1.0) * spend.len() as f64 + 1e-9) as usize;
        spend[k.min(spend.len() - 1)]
    };
    for r in rows {
        r.segment = if r.purchase_amount <= 0.0 {
            Segment::NonPayer
        } else if r.purchase_amount >= threshold {
            Segment::Whale
        } else {
            Segment::Payer
        };
    }
}

/// Survival dataset over `features` for rows in `segment` (all rows when
/// `None`), preserving row order.
pub fn build_dataset(rows: &[PlayerFeatureRow], features: &[&str], segment: Option<Segment>) -> Result<SurvivalDataset> {
    if let Some(unknown) = features.iter().find(|f| !FEATURE_NAMES.contains(f)) {
        return Err(Error::UnknownFeature(unknown.to_string()));
    }
    let obs: Vec<Observation> = rows
        .iter()
        .filter(|r| segment.map_or(true, |s| r.segment == s))
        .map(|r| {
            let x = features.iter().map(|f| r.feature(f).expect("checked above")).collect();
            Observation::new(r.time, r.event, x)
        })
        .collect();
    if obs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    SurvivalDataset::new(obs, features.iter().map(|f| f.to_string()).collect())
}
