//! CSV formats.
//!
//! | file          | columns                                              |
//! |---------------|------------------------------------------------------|
//! | dataset       | `time,event,<covariates…>` plus optional `player_id`, `segment` |
//! | event log     | `player_id,timestamp,kind,amount,level`              |
//! | curve         | `time,survival`, starting with a `0,1` row           |
//! | error curve   | `time,brier_score`                                   |
//! | calibration   | `observed,predicted,mean,difference`                 |
//! | importance    | `feature,importance,std_error,rank`                  |
//! | predictions   | `player_id,median_survival,at_risk,curve_file`       |
//!
//! Floats are written in shortest round-trip form, so every file reads back
//! to the exact values written.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use survivalkit_core::churn::{EventKind, PlayerEvent, PlayerFeatureRow, Segment};
use survivalkit_core::evaluation::{CalibrationPairs, ErrorCurve};
use survivalkit_core::forest::ImportanceReport;
use survivalkit_core::{Observation, SurvivalCurve, SurvivalDataset};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn parse_f64(s: &str, line: u64, column: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{column}: not a number: {s:?}"),
    })
}

fn parse_bool(s: &str, line: u64, column: &str) -> Result<bool> {
    match s.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("{column}: not a 0/1 flag: {other:?}"),
        }),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// A dataset with its optional id and segment columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub data: SurvivalDataset,
    pub player_ids: Option<Vec<String>>,
    pub segments: Option<Vec<Segment>>,
}

impl LoadedDataset {
    /// Row labels: player ids when present, else `row1, row2, …`.
    pub fn row_ids(&self) -> Vec<String> {
        match &self.player_ids {
            Some(ids) => ids.clone(),
            None => (1..=self.data.len()).map(|i| format!("row{i}")).collect(),
        }
    }

    /// Keeps only rows of `segment`.
    pub fn filter_segment(self, segment: Segment) -> Result<Self> {
        let segments = self
            .segments
            .as_ref()
            .ok_or_else(|| Error::Schema("segment filter needs a segment column".into()))?;
        let rows: Vec<usize> = (0..segments.len()).filter(|&i| segments[i] == segment).collect();
        if rows.is_empty() {
            return Err(Error::Usage(format!("no rows in segment {segment}")));
        }
        Ok(Self {
            data: self.data.subset(&rows)?,
            player_ids: self.player_ids.map(|ids| rows.iter().map(|&i| ids[i].clone()).collect()),
            segments: Some(rows.iter().map(|&i| segments[i]).collect()),
        })
    }
}

/// Reads a dataset CSV. Every column other than `time`, `event`,
/// `player_id` and `segment` is a numeric covariate, in file order.
pub fn read_dataset<R: Read>(reader: R) -> Result<LoadedDataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let time = find("time").ok_or_else(|| Error::Schema("missing column `time`".into()))?;
    let event = find("event").ok_or_else(|| Error::Schema("missing column `event`".into()))?;
    let id = find("player_id");
    let segment = find("segment");
    let covariates: Vec<usize> = (0..headers.len())
        .filter(|&i| ![Some(time), Some(event), id, segment].contains(&Some(i)))
        .collect();
    let names: Vec<String> = covariates.iter().map(|&i| headers[i].trim().to_string()).collect();

    let mut obs = Vec::new();
    let mut ids = id.map(|_| Vec::new());
    let mut segs = segment.map(|_| Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let x = covariates
            .iter()
            .map(|&i| parse_f64(&record[i], line, &headers[i]))
            .collect::<Result<Vec<_>>>()?;
        obs.push(Observation::new(
            parse_f64(&record[time], line, "time")?,
            parse_bool(&record[event], line, "event")?,
            x,
        ));
        if let (Some(ids), Some(i)) = (ids.as_mut(), id) {
            ids.push(record[i].to_string());
        }
        if let (Some(segs), Some(i)) = (segs.as_mut(), segment) {
            let s = record[i].parse().map_err(|e: survivalkit_core::Error| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            segs.push(s);
        }
    }
    Ok(LoadedDataset {
        data: SurvivalDataset::new(obs, names)?,
        player_ids: ids,
        segments: segs,
    })
}

pub fn read_dataset_path(path: &Path) -> Result<LoadedDataset> {
    read_dataset(open(path)?)
}

pub fn write_dataset<W: Write>(writer: W, data: &SurvivalDataset, player_ids: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if player_ids.is_some() {
        header.push("player_id");
    }
    header.extend(["time", "event"]);
    header.extend(data.feature_names().iter().map(String::as_str));
    w.write_record(&header)?;
    for (i, o) in data.observations().iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ids) = player_ids {
            rec.push(ids[i].clone());
        }
        rec.push(o.time.to_string());
        rec.push(u8::from(o.event).to_string());
        rec.extend(o.covariates.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Feature matrix in dataset layout plus `player_id` and `segment`.
/// Purchase-timing features of non-payers are written imputed.
pub fn write_feature_rows<W: Write>(writer: W, rows: &[PlayerFeatureRow], features: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["player_id", "time", "event"];
    header.extend(features);
    header.push("segment");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.player_id.clone(), r.time.to_string(), u8::from(r.event).to_string()];
        for f in features {
            let v = r.feature(f).ok_or_else(|| Error::Schema(format!("unknown feature `{f}`")))?;
            rec.push(v.to_string());
        }
        rec.push(r.segment.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .ok()
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<PlayerEvent>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["player_id", "timestamp", "kind", "amount", "level"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::Schema(format!(
            "event log needs columns {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let fail = |message: String| Error::Parse { line, message };
        let timestamp = parse_timestamp(&record[1]).ok_or_else(|| fail(format!("bad timestamp {:?}", &record[1])))?;
        let kind: EventKind = record[2].trim().parse().map_err(|e: survivalkit_core::Error| fail(e.to_string()))?;
        let amount = match record[3].trim() {
            "" => None,
            s => Some(parse_f64(s, line, "amount")?),
        };
        let level = match record[4].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| fail(format!("level: not an integer: {s:?}")))?),
        };
        let event = PlayerEvent {
            player_id: record[0].to_string(),
            timestamp,
            kind,
            amount,
            level,
        };
        event.validate().map_err(|e| fail(e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

/// Streaming event-log writer.
pub struct EventWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> EventWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["player_id", "timestamp", "kind", "amount", "level"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, e: &PlayerEvent) -> Result<()> {
        self.inner.write_record([
            e.player_id.as_str(),
            &e.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            e.kind.as_str(),
            &e.amount.map(|a| a.to_string()).unwrap_or_default(),
            &e.level.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(Error::from)
    }
}

pub fn write_events<W: Write>(writer: W, events: &[PlayerEvent]) -> Result<()> {
    let mut w = EventWriter::new(writer)?;
    for e in events {
        w.write(e)?;
    }
    w.finish()
}

fn write_table<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(Error::from)
}

fn read_table<R: Read>(reader: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let found = rdr.headers()?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::Schema(format!("expected columns {}", header.join(","))));
    }
    Ok(rdr.records().collect::<std::result::Result<_, _>>()?)
}

pub fn write_curve<W: Write>(writer: W, curve: &SurvivalCurve) -> Result<()> {
    let head = std::iter::once(vec!["0".to_string(), "1".to_string()]);
    let steps = curve.times().iter().zip(curve.probs()).map(|(t, p)| vec![t.to_string(), p.to_string()]);
    write_table(writer, &["time", "survival"], head.chain(steps))
}

pub fn read_curve<R: Read>(reader: R) -> Result<SurvivalCurve> {
    let mut times = Vec::new();
    let mut probs = Vec::new();
    for (k, r) in read_table(reader, &["time", "survival"])?.iter().enumerate() {
        let line = line_of(r);
        let (t, p) = (parse_f64(&r[0], line, "time")?, parse_f64(&r[1], line, "survival")?);
        if k == 0 && t == 0.0 && p == 1.0 {
            continue;
        }
        times.push(t);
        probs.push(p);
    }
    Ok(SurvivalCurve::new(times, probs)?)
}

pub fn write_error_curve<W: Write>(writer: W, curve: &ErrorCurve) -> Result<()> {
    let rows = curve.times.iter().zip(&curve.bs).map(|(t, b)| vec![t.to_string(), b.to_string()]);
    write_table(writer, &["time", "brier_score"], rows)
}

/// `(time, brier_score)` pairs.
pub fn read_error_curve<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    read_table(reader, &["time", "brier_score"])?
        .iter()
        .map(|r| {
            let line = line_of(r);
            Ok((parse_f64(&r[0], line, "time")?, parse_f64(&r[1], line, "brier_score")?))
        })
        .collect()
}

pub fn write_calibration<W: Write>(writer: W, pairs: &CalibrationPairs) -> Result<()> {
    let rows = pairs.rows.iter().map(|r| {
        vec![
            r.observed.to_string(),
            r.predicted.to_string(),
            r.mean.to_string(),
            r.difference.to_string(),
        ]
    });
    write_table(writer, &["observed", "predicted", "mean", "difference"], rows)
}

pub fn write_importance<W: Write>(writer: W, report: &ImportanceReport) -> Result<()> {
    let rows = report.features.iter().map(|f| {
        vec![
            f.feature.clone(),
            f.importance.to_string(),
            f.std_error.to_string(),
            f.rank.to_string(),
        ]
    });
    write_table(writer, &["feature", "importance", "std_error", "rank"], rows)
}

/// One row of the survival predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub player_id: String,
    pub median_survival: Option<f64>,
    pub at_risk: bool,
    pub curve_file: Option<String>,
}

pub fn write_predictions<W: Write>(writer: W, rows: &[PredictionRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.player_id.clone(),
            r.median_survival.map(|m| m.to_string()).unwrap_or_default(),
            r.at_risk.to_string(),
            r.curve_file.clone().unwrap_or_default(),
        ]
    });
    write_table(writer, &["player_id", "median_survival", "at_risk", "curve_file"], rows)
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    read_table(reader, &["player_id", "median_survival", "at_risk", "curve_file"])?
        .iter()
        .map(|r| {
            let line = line_of(r);
            Ok(PredictionRow {
                player_id: r[0].to_string(),
                median_survival: match r[1].trim() {
                    "" => None,
                    s => Some(parse_f64(s, line, "median_survival")?),
                },
                at_risk: parse_bool(&r[2], line, "at_risk")?,
                curve_file: Some(r[3].to_string()).filter(|s| !s.is_empty()),
            })
        })
        .collect()
}

pub fn write_binary_predictions<W: Write>(writer: W, ids: &[String], probs: &[f64]) -> Result<()> {
    let rows = ids.iter().zip(probs).map(|(id, p)| vec![id.clone(), p.to_string()]);
    write_table(writer, &["player_id", "churn_probability"], rows)
}
