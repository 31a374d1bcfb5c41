//! Stance observations, target filtering, time bins and the normalized time
//! coordinate used as the landscape's time input.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Discrete stance label with its ordinal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Against,
    Neutral,
    Favor,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Favor, Label::Neutral, Label::Against];

    pub fn value(self) -> i8 {
        match self {
            Label::Against => -1,
            Label::Neutral => 0,
            Label::Favor => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Against => "against",
            Label::Neutral => "neutral",
            Label::Favor => "favor",
        }
    }

    /// Case-insensitive parse of the label name or its ordinal value.
    pub fn parse(s: &str) -> Option<Label> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("favor") || s.eq_ignore_ascii_case("favour") || s == "1" || s == "+1" {
            Some(Label::Favor)
        } else if s.eq_ignore_ascii_case("neutral") || s == "0" {
            Some(Label::Neutral)
        } else if s.eq_ignore_ascii_case("against") || s == "-1" {
            Some(Label::Against)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Platform {
    Twitter,
    Instagram,
    TikTok,
    Bluesky,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Twitter => "twitter",
            Platform::Instagram => "instagram",
            Platform::TikTok => "tiktok",
            Platform::Bluesky => "bluesky",
        }
    }

    pub fn parse(s: &str) -> Option<Platform> {
        let s = s.trim();
        [Platform::Twitter, Platform::Instagram, Platform::TikTok, Platform::Bluesky]
            .into_iter()
            .find(|p| s.eq_ignore_ascii_case(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceObservation {
    pub person_id: String,
    pub target_id: String,
    pub timestamp: DateTime<Utc>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Platform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account_id: Option<String>,
}

impl StanceObservation {
    /// Identifier of the stream this observation belongs to: the person, or
    /// the account when accounts are kept apart.
    pub fn stream_id(&self, by_account: bool) -> &str {
        match (&self.account_id, by_account) {
            (Some(account), true) => account,
            _ => &self.person_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FigureType {
    Politician,
    Influencer,
    Foreign,
    Other,
}

impl FigureType {
    pub fn as_str(self) -> &'static str {
        match self {
            FigureType::Politician => "politician",
            FigureType::Influencer => "influencer",
            FigureType::Foreign => "foreign",
            FigureType::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<FigureType> {
        let s = s.trim();
        [
            FigureType::Politician,
            FigureType::Influencer,
            FigureType::Foreign,
            FigureType::Other,
        ]
        .into_iter()
        .find(|f| s.eq_ignore_ascii_case(f.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonMeta {
    pub person_id: String,
    pub figure_type: FigureType,
    #[serde(default)]
    pub party: Option<String>,
    #[serde(default)]
    pub province: Option<String>,
}

/// Rejects metadata tables that list a person twice.
pub fn index_meta(meta: &[PersonMeta]) -> Result<BTreeMap<String, PersonMeta>> {
    let mut out = BTreeMap::new();
    for m in meta {
        if out.insert(m.person_id.clone(), m.clone()).is_some() {
            return Err(Error::InvalidInput(format!(
                "person {} listed twice in metadata",
                m.person_id
            )));
        }
    }
    Ok(out)
}

/// Fixed-width time bins plus the affine map from calendar time to the
/// model's normalized time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBinning {
    pub epoch: DateTime<Utc>,
    pub bin_width_days: u32,
    pub anchors: [(DateTime<Utc>, f64); 2],
}

fn midnight(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    let date = NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date");
    Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("valid time"))
}

/// Midnight UTC on 1 January of `year`.
pub fn new_year(year: i32) -> DateTime<Utc> {
    midnight(year, 1, 1)
}

impl Default for TimeBinning {
    fn default() -> Self {
        TimeBinning {
            epoch: new_year(2022),
            bin_width_days: 2,
            anchors: [(new_year(2022), 1.0), (new_year(2025), 4.0)],
        }
    }
}

fn days_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    let delta = to.signed_duration_since(from);
    delta.num_seconds() as f64 / SECONDS_PER_DAY
        + f64::from(delta.subsec_nanos()) / (SECONDS_PER_DAY * 1e9)
}

impl TimeBinning {
    pub fn validate(&self) -> Result<()> {
        if self.bin_width_days == 0 {
            return Err(Error::InvalidInput("bin width must be positive".into()));
        }
        let [(t0, v0), (t1, v1)] = self.anchors;
        if t0 == t1 {
            return Err(Error::DegenerateAnchors);
        }
        if t1 < t0 || v1 <= v0 {
            return Err(Error::InvalidInput(
                "time anchors must increase in both coordinates".into(),
            ));
        }
        Ok(())
    }

    fn bin_width_seconds(&self) -> i64 {
        i64::from(self.bin_width_days) * 86_400
    }

    /// `floor((ts - epoch) / bin_width)`.
    pub fn bin_index(&self, ts: DateTime<Utc>) -> Result<i64> {
        if ts < self.epoch {
            return Err(Error::BeforeEpoch(ts.to_rfc3339()));
        }
        let delta = ts.signed_duration_since(self.epoch);
        Ok(delta.num_seconds().div_euclid(self.bin_width_seconds()))
    }

    pub fn bin_start(&self, bin: i64) -> DateTime<Utc> {
        self.epoch + chrono::TimeDelta::seconds(bin * self.bin_width_seconds())
    }

    /// Days since the epoch of the bin's midpoint.
    pub fn bin_center_days(&self, bin: i64) -> f64 {
        (bin as f64 + 0.5) * f64::from(self.bin_width_days)
    }

    /// Days since the epoch.
    pub fn days_since_epoch(&self, ts: DateTime<Utc>) -> f64 {
        days_between(self.epoch, ts)
    }

    /// Normalized time units per day.
    pub fn rate_per_day(&self) -> Result<f64> {
        let [(t0, v0), (t1, v1)] = self.anchors;
        if t0 == t1 {
            return Err(Error::DegenerateAnchors);
        }
        Ok((v1 - v0) / days_between(t0, t1))
    }

    /// Normalized-time advance of one bin, the time step of one landscape
    /// update.
    pub fn step_increment(&self) -> Result<f64> {
        Ok(self.rate_per_day()? * f64::from(self.bin_width_days))
    }

    /// Affine map through the two anchors.
    pub fn normalize_time(&self, ts: DateTime<Utc>) -> Result<f64> {
        let rate = self.rate_per_day()?;
        let (t0, v0) = self.anchors[0];
        Ok(v0 + rate * days_between(t0, ts))
    }

    /// Normalized time of a point given in days since the epoch.
    pub fn normalize_days(&self, days: f64) -> Result<f64> {
        let rate = self.rate_per_day()?;
        let (t0, v0) = self.anchors[0];
        Ok(v0 + rate * (days - days_between(t0, self.epoch)))
    }

    pub fn normalize_bin_center(&self, bin: i64) -> Result<f64> {
        self.normalize_days(self.bin_center_days(bin))
    }
}

/// Keeps observations whose target has strictly more than `min_posts`
/// observations in `obs`. Order is preserved.
pub fn filter_targets(obs: &[StanceObservation], min_posts: usize) -> Vec<StanceObservation> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in obs {
        *counts.entry(o.target_id.as_str()).or_default() += 1;
    }
    obs.iter()
        .filter(|o| counts[o.target_id.as_str()] > min_posts)
        .cloned()
        .collect()
}

/// Collapses repeated (stream, target, timestamp, label) observations to the
/// first occurrence.
pub fn dedup_observations(obs: &[StanceObservation], by_account: bool) -> Vec<StanceObservation> {
    let mut seen = BTreeSet::new();
    obs.iter()
        .filter(|o| {
            seen.insert((
                o.stream_id(by_account).to_string(),
                o.target_id.clone(),
                o.timestamp,
                o.label,
            ))
        })
        .cloned()
        .collect()
}

/// Drops observations outside `[start, end)`.
pub fn within_window(
    obs: &[StanceObservation],
    start: DateTime<Utc>,
    end: DateTime<Utc>,
) -> Vec<StanceObservation> {
    obs.iter()
        .filter(|o| o.timestamp >= start && o.timestamp < end)
        .cloned()
        .collect()
}
