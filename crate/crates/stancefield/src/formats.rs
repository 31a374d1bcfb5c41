//! Readers and writers for every file the pipeline consumes or produces.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write followed by a read restores every value bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use stancefield_core::ingest::{FigureType, Label, PersonMeta, Platform, StanceObservation};
use stancefield_core::landscape::{DriftField, PotentialNet};
use stancefield_core::latent::{LatentTrajectory, PpcaModel, RegressedSeries};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const PPCA_FORMAT: &str = "stancefield-ppca";
pub const NET_FORMAT: &str = "stancefield-potential-net";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Jsonl,
    Csv,
}

impl Schema {
    pub fn parse(tag: &str) -> Result<Schema> {
        match tag.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Schema::Jsonl),
            "csv" => Ok(Schema::Csv),
            other => Err(Error::Config(format!("unknown observation schema {other:?}"))),
        }
    }

    /// From a `.jsonl`/`.json` or `.csv` extension.
    pub fn from_path(path: &Path) -> Result<Schema> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "json" | "ndjson") => Ok(Schema::Jsonl),
            Some("csv") => Ok(Schema::Csv),
            _ => Err(Error::Config(format!(
                "cannot infer the schema of {}; set ingest.schema",
                path.display()
            ))),
        }
    }
}

/// Row counts of one parsed file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub malformed: usize,
    /// The first few problems, with 1-based line numbers.
    pub errors: Vec<String>,
}

const KEPT_ERRORS: usize = 10;

impl ParseReport {
    fn bad(&mut self, line: usize, msg: impl std::fmt::Display) {
        self.rows += 1;
        self.malformed += 1;
        if self.errors.len() < KEPT_ERRORS {
            self.errors.push(format!("line {line}: {msg}"));
        }
    }

    /// Aborts when more than half the rows are malformed.
    fn finish(self, what: &str) -> Result<ParseReport> {
        if self.rows == 0 {
            log::warn!("{what}: no rows");
        } else if self.malformed > 0 {
            log::warn!("{what}: {} of {} rows malformed", self.malformed, self.rows);
        }
        if self.malformed * 2 > self.rows {
            return Err(Error::Data(format!(
                "{what}: {} of {} rows malformed: {}",
                self.malformed,
                self.rows,
                self.errors.join("; ")
            )));
        }
        Ok(self)
    }
}

const OBS_REQUIRED: [&str; 4] = ["person_id", "target_id", "timestamp", "label"];
const OBS_OPTIONAL: [&str; 2] = ["platform", "account_id"];

/// ISO-8601 with an explicit offset, converted to UTC.
pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("timestamp {s:?}: {e}"))
}

fn parse_label(v: &Value) -> std::result::Result<Label, String> {
    let parsed = match v {
        Value::String(s) => Label::parse(s),
        Value::Number(n) => n.as_i64().and_then(|i| Label::parse(&i.to_string())),
        _ => None,
    };
    parsed.ok_or_else(|| format!("label {v}"))
}

fn parse_platform(s: &str) -> std::result::Result<Option<Platform>, String> {
    if s.trim().is_empty() {
        return Ok(None);
    }
    Platform::parse(s).map(Some).ok_or_else(|| format!("platform {s:?}"))
}

fn observation_from_fields(get: impl Fn(&str) -> Option<Value>) -> std::result::Result<StanceObservation, String> {
    let text = |k: &str| match get(k) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        _ => Err(format!("missing {k}")),
    };
    let optional = |k: &str| match get(k) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v) => Err(format!("{k} {v}")),
    };
    Ok(StanceObservation {
        person_id: text("person_id")?,
        target_id: text("target_id")?,
        timestamp: parse_timestamp(&text("timestamp")?)?,
        label: parse_label(&get("label").ok_or("missing label")?)?,
        platform: match optional("platform")? {
            Some(p) => parse_platform(&p)?,
            None => None,
        },
        account_id: optional("account_id")?,
    })
}

fn unknown_column(name: &str) -> bool {
    !OBS_REQUIRED.contains(&name) && !OBS_OPTIONAL.contains(&name)
}

/// Parses observation text. Under `strict` an unknown column or field
/// rejects the whole file.
pub fn parse_observations(text: &str, schema: Schema, strict: bool) -> Result<(Vec<StanceObservation>, ParseReport)> {
    let mut out = Vec::new();
    let mut report = ParseReport::default();
    match schema {
        Schema::Jsonl => {
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let obj = match serde_json::from_str::<serde_json::Map<String, Value>>(line) {
                    Ok(o) => o,
                    Err(e) => {
                        report.bad(i + 1, e);
                        continue;
                    }
                };
                if strict {
                    if let Some(k) = obj.keys().find(|k| unknown_column(k)) {
                        return Err(Error::Data(format!("line {}: unknown field {k:?}", i + 1)));
                    }
                }
                match observation_from_fields(|k| obj.get(k).cloned()) {
                    Ok(o) => {
                        report.rows += 1;
                        out.push(o);
                    }
                    Err(e) => report.bad(i + 1, e),
                }
            }
        }
        Schema::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            if text.trim().is_empty() {
                return Ok((out, report.finish("observations")?));
            }
            let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
            for k in OBS_REQUIRED {
                if !header.iter().any(|h| h == k) {
                    return Err(Error::Data(format!("observation header lacks {k}")));
                }
            }
            if strict {
                if let Some(k) = header.iter().find(|k| unknown_column(k)) {
                    return Err(Error::Data(format!("unknown column {k:?}")));
                }
            }
            for (i, rec) in rdr.records().enumerate() {
                let line = i + 2;
                let rec = match rec {
                    Ok(r) if r.len() == header.len() => r,
                    Ok(r) => {
                        report.bad(line, format!("{} fields, expected {}", r.len(), header.len()));
                        continue;
                    }
                    Err(e) => {
                        report.bad(line, e);
                        continue;
                    }
                };
                let get = |k: &str| {
                    let j = header.iter().position(|h| h == k)?;
                    Some(Value::String(rec[j].to_string()))
                };
                match observation_from_fields(get) {
                    Ok(o) => {
                        report.rows += 1;
                        out.push(o);
                    }
                    Err(e) => report.bad(line, e),
                }
            }
        }
    }
    Ok((out, report.finish("observations")?))
}

pub fn read_observations(path: &Path, schema: Schema, strict: bool) -> Result<(Vec<StanceObservation>, ParseReport)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_observations(&text, schema, strict).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn timestamp_string(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Canonical JSONL: fixed field order, lowercase labels, UTC timestamps.
pub fn observations_to_jsonl(obs: &[StanceObservation]) -> String {
    let q = |v: &str| Value::from(v).to_string();
    let mut s = String::new();
    for o in obs {
        let _ = write!(
            s,
            "{{\"person_id\":{},\"target_id\":{},\"timestamp\":{},\"label\":{}",
            q(&o.person_id),
            q(&o.target_id),
            q(&timestamp_string(&o.timestamp)),
            q(o.label.as_str())
        );
        if let Some(p) = o.platform {
            let _ = write!(s, ",\"platform\":{}", q(p.as_str()));
        }
        if let Some(a) = &o.account_id {
            let _ = write!(s, ",\"account_id\":{}", q(a));
        }
        s.push_str("}\n");
    }
    s
}

pub fn observations_to_csv(obs: &[StanceObservation]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OBS_REQUIRED.iter().chain(&OBS_OPTIONAL))?;
    for o in obs {
        w.write_record([
            o.person_id.as_str(),
            o.target_id.as_str(),
            &timestamp_string(&o.timestamp),
            o.label.as_str(),
            o.platform.map_or("", Platform::as_str),
            o.account_id.as_deref().unwrap_or(""),
        ])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

const META_COLUMNS: [&str; 4] = ["person_id", "figure_type", "party", "province"];

/// Metadata CSV with header `person_id,figure_type,party,province`.
pub fn parse_metadata(text: &str, strict: bool) -> Result<(Vec<PersonMeta>, ParseReport)> {
    let mut out = Vec::new();
    let mut report = ParseReport::default();
    if text.trim().is_empty() {
        return Ok((out, report.finish("metadata")?));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for k in &META_COLUMNS[..2] {
        if !header.iter().any(|h| h == k) {
            return Err(Error::Data(format!("metadata header lacks {k}")));
        }
    }
    if strict {
        if let Some(k) = header.iter().find(|h| !META_COLUMNS.contains(&h.as_str())) {
            return Err(Error::Data(format!("unknown metadata column {k:?}")));
        }
    }
    let col = |k: &str| header.iter().position(|h| h == k);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) if r.len() == header.len() => r,
            Ok(r) => {
                report.bad(line, format!("{} fields, expected {}", r.len(), header.len()));
                continue;
            }
            Err(e) => {
                report.bad(line, e);
                continue;
            }
        };
        let field = |k: &str| col(k).map(|j| rec[j].to_string()).filter(|s| !s.is_empty());
        let person_id = match field("person_id") {
            Some(p) => p,
            None => {
                report.bad(line, "missing person_id");
                continue;
            }
        };
        let Some(figure_type) = field("figure_type").as_deref().and_then(FigureType::parse) else {
            report.bad(line, "bad figure_type");
            continue;
        };
        report.rows += 1;
        out.push(PersonMeta {
            person_id,
            figure_type,
            party: field("party"),
            province: field("province"),
        });
    }
    Ok((out, report.finish("metadata")?))
}

pub fn read_metadata(path: &Path, strict: bool) -> Result<(Vec<PersonMeta>, ParseReport)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(&text, strict)
}

pub fn metadata_to_csv(meta: &[PersonMeta]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(META_COLUMNS)?;
    for m in meta {
        w.write_record([
            m.person_id.as_str(),
            m.figure_type.as_str(),
            m.party.as_deref().unwrap_or(""),
            m.province.as_deref().unwrap_or(""),
        ])?;
    }
    into_string(w)
}

/// `person_id,target_id,bin,mean,variance`, one row per evaluated bin.
pub fn series_to_csv(series: &[RegressedSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["person_id", "target_id", "bin", "mean", "variance"])?;
    for s in series {
        for k in 0..s.bins.len() {
            w.write_record([
                s.person_id.clone(),
                s.target_id.clone(),
                s.bins[k].to_string(),
                s.means[k].to_string(),
                s.variances[k].to_string(),
            ])?;
        }
    }
    into_string(w)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Data(format!("bad {what} {s:?}")))
}

pub fn series_from_csv(text: &str) -> Result<Vec<RegressedSeries>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut map: BTreeMap<(String, String), RegressedSeries> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Data("series rows need 5 fields".into()));
        }
        let key = (rec[0].to_string(), rec[1].to_string());
        let s = map.entry(key.clone()).or_insert_with(|| RegressedSeries {
            person_id: key.0,
            target_id: key.1,
            bins: Vec::new(),
            means: Vec::new(),
            variances: Vec::new(),
        });
        s.bins
            .push(rec[2].parse().map_err(|_| Error::Data(format!("bad bin {:?}", &rec[2])))?);
        s.means.push(parse_f64(&rec[3], "mean")?);
        s.variances.push(parse_f64(&rec[4], "variance")?);
    }
    Ok(map.into_values().collect())
}

/// `person_id,time_norm,pc1..pcd`, one row per point, persons contiguous.
pub fn trajectories_to_csv(trajs: &[LatentTrajectory]) -> Result<String> {
    let d = trajs.iter().map(LatentTrajectory::dim).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["person_id".to_string(), "time_norm".to_string()];
    header.extend((1..=d).map(|k| format!("pc{k}")));
    w.write_record(&header)?;
    for t in trajs {
        if t.dim() != d && !t.is_empty() {
            return Err(Error::Data(format!("trajectory {} has dimension {}", t.person_id, t.dim())));
        }
        for (time, c) in t.times.iter().zip(&t.coords) {
            let mut row = vec![t.person_id.clone(), time.to_string()];
            row.extend(c.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    into_string(w)
}

/// Reads trajectories, grouping rows by person in order of first
/// appearance.
pub fn trajectories_from_csv(text: &str) -> Result<Vec<LatentTrajectory>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "person_id" || &header[1] != "time_norm" {
        return Err(Error::Data("trajectory header must be person_id,time_norm,pc1..".into()));
    }
    let d = header.len() - 2;
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, LatentTrajectory> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != d + 2 {
            return Err(Error::Data(format!("trajectory row has {} fields, expected {}", rec.len(), d + 2)));
        }
        let id = rec[0].to_string();
        let t = map.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            LatentTrajectory {
                person_id: id,
                times: Vec::new(),
                coords: Vec::new(),
            }
        });
        t.times.push(parse_f64(&rec[1], "time")?);
        t.coords
            .push((2..d + 2).map(|k| parse_f64(&rec[k], "coordinate")).collect::<Result<_>>()?);
    }
    let out: Vec<LatentTrajectory> = order.into_iter().map(|id| map.remove(&id).expect("inserted")).collect();
    for t in &out {
        t.validate()?;
    }
    Ok(out)
}

/// `x1..xd,drift1..driftd,potential,mc_variance,low_support`.
pub fn drift_field_to_csv(f: &DriftField) -> Result<String> {
    let d = f.axes.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.extend((1..=d).map(|k| format!("drift{k}")));
    header.extend(["potential", "mc_variance", "low_support"].map(String::from));
    w.write_record(&header)?;
    for i in 0..f.nodes.len() {
        let mut row: Vec<String> = f.nodes[i].iter().map(f64::to_string).collect();
        row.extend(f.drift[i].iter().map(f64::to_string));
        row.push(f.potential[i].to_string());
        row.push(f.mc_variance[i].to_string());
        row.push(f.low_support[i].to_string());
        w.write_record(&row)?;
    }
    into_string(w)
}

fn envelope(format: &str, shape: Value, model: Value) -> String {
    let mut m = serde_json::Map::new();
    m.insert("format".into(), format.into());
    m.insert("version".into(), FORMAT_VERSION.into());
    m.insert("shape".into(), shape);
    m.insert("model".into(), model);
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("json values serialize");
    s.push('\n');
    s
}

fn open_envelope<T: DeserializeOwned>(text: &str, format: &str) -> Result<(T, Value)> {
    let v: Value = serde_json::from_str(text)?;
    match v.get("format").and_then(Value::as_str) {
        Some(f) if f == format => {}
        other => return Err(Error::Data(format!("expected a {format} document, found {other:?}"))),
    }
    match v.get("version").and_then(Value::as_u64) {
        Some(1) => {}
        Some(n) => return Err(Error::Data(format!("unsupported {format} version {n}"))),
        None => return Err(Error::Data(format!("{format} document lacks a version"))),
    }
    let model = serde_json::from_value(v.get("model").cloned().unwrap_or(Value::Null))?;
    Ok((model, v.get("shape").cloned().unwrap_or(Value::Null)))
}

pub fn ppca_to_json(m: &PpcaModel) -> String {
    let shape = serde_json::json!({ "columns": m.columns.len(), "components": m.n_components });
    envelope(PPCA_FORMAT, shape, serde_json::to_value(m).expect("model serializes"))
}

pub fn ppca_from_json(text: &str) -> Result<PpcaModel> {
    let (m, shape): (PpcaModel, Value) = open_envelope(text, PPCA_FORMAT)?;
    let p = m.columns.len();
    let ok = shape["columns"].as_u64() == Some(p as u64)
        && shape["components"].as_u64() == Some(m.n_components as u64)
        && m.loadings.len() == p * m.n_components
        && m.means.len() == p;
    if !ok {
        return Err(Error::Data("PPCA document shape does not match its arrays".into()));
    }
    Ok(m)
}

pub fn net_to_json(net: &PotentialNet) -> String {
    let shape = serde_json::json!({ "layer_sizes": net.layer_sizes, "n_params": net.n_params() });
    envelope(NET_FORMAT, shape, serde_json::to_value(net).expect("net serializes"))
}

pub fn net_from_json(text: &str) -> Result<PotentialNet> {
    let (net, shape): (PotentialNet, Value) = open_envelope(text, NET_FORMAT)?;
    if shape["n_params"].as_u64() != Some(net.params.len() as u64) {
        return Err(Error::Data("network document shape does not match its weights".into()));
    }
    net.validate()?;
    Ok(net)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

/// A header line followed by rows, for the small report tables.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    into_string(w)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Formats a number with a fixed number of decimals, without `-0`.
pub fn fixed(v: f64, decimals: usize) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s.remove(0);
    }
    s
}
