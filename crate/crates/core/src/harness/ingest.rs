//! File ingestion: GPS trip records (dataset mode), road-network edge lists,
//! and junction-referenced trips (network mode).
//!
//! Trip record CSV schema, one header line then one record per line:
//!
//! ```text
//! record_id,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat,pickup_time,trip_distance_km,slack_minutes
//! ```
//!
//! `pickup_time` accepts epoch seconds or ISO-8601; the last two columns are
//! optional (may be empty). Invalid rows are rejected with a line-numbered
//! diagnostic naming the offending field; an unreadable file or a malformed
//! header is fatal.

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use super::{ExperimentConfig, Instance};
use crate::road::{great_circle_km, GeometricPlane, Landscape, RoadNetwork};
use crate::trip::TripRequest;
use crate::{Error, Result};

pub const TRIP_HEADER: &str =
    "record_id,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat,pickup_time,trip_distance_km,slack_minutes";

const NETWORK_TRIP_HEADER: &str = "commuter_id,source,destination,earliest_departure,latest_arrival";

/// One raw dataset row (a taxi-trip-style record).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripRecord {
    pub record_id: String,
    pub pickup_lon: f64,
    pub pickup_lat: f64,
    pub dropoff_lon: f64,
    pub dropoff_lat: f64,
    /// Epoch seconds.
    pub pickup_time_s: f64,
    pub trip_distance_km: Option<f64>,
    pub slack_minutes: Option<f64>,
}

/// A rejected input row and why.
#[derive(Debug, Clone, Serialize)]
pub struct RowRejection {
    pub line: usize,
    pub record_id: Option<String>,
    pub reason: String,
}

/// Ingestion result: accepted records, their derived instance, and
/// line-numbered rejections.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub records: Vec<TripRecord>,
    pub rejections: Vec<RowRejection>,
    pub instance: Instance,
}

/// Parse epoch seconds (integer or fractional) or an ISO-8601 timestamp.
pub fn parse_time(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v as f64);
    }
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_millis()) / 1000.0);
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(naive.and_utc().timestamp() as f64);
    }
    Err(Error::input(format!("unparsable timestamp {s:?}")))
}

fn parse_field<T: std::str::FromStr>(value: &str, field: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::input(format!("field {field}: unparsable value {value:?}")))
}

fn check_range(value: f64, lo: f64, hi: f64, field: &str) -> Result<f64> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::input(format!("field {field}: {value} out of range [{lo}, {hi}]")));
    }
    Ok(value)
}

fn parse_record(fields: &[&str]) -> Result<TripRecord> {
    if fields.len() != 8 {
        return Err(Error::input(format!("expected 8 fields, found {}", fields.len())));
    }
    let record_id = fields[0].trim().to_string();
    if record_id.is_empty() {
        return Err(Error::input("field record_id: empty".to_string()));
    }
    let pickup_lon = check_range(parse_field(fields[1], "pickup_lon")?, -180.0, 180.0, "pickup_lon")?;
    let pickup_lat = check_range(parse_field(fields[2], "pickup_lat")?, -90.0, 90.0, "pickup_lat")?;
    let dropoff_lon =
        check_range(parse_field(fields[3], "dropoff_lon")?, -180.0, 180.0, "dropoff_lon")?;
    let dropoff_lat =
        check_range(parse_field(fields[4], "dropoff_lat")?, -90.0, 90.0, "dropoff_lat")?;
    let pickup_time_s = parse_time(fields[5])
        .map_err(|e| Error::input(format!("field pickup_time: {e}")))?;
    let trip_distance_km = match fields[6].trim() {
        "" => None,
        v => {
            let d: f64 = parse_field(v, "trip_distance_km")?;
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::input(format!(
                    "field trip_distance_km: {d} is not positive"
                )));
            }
            Some(d)
        }
    };
    let slack_minutes = match fields[7].trim() {
        "" => None,
        v => {
            let m: f64 = parse_field(v, "slack_minutes")?;
            if !m.is_finite() || m < 0.0 {
                return Err(Error::input(format!("field slack_minutes: {m} is negative")));
            }
            Some(m)
        }
    };
    if pickup_lon == dropoff_lon && pickup_lat == dropoff_lat {
        return Err(Error::input("pickup and dropoff coincide".to_string()));
    }
    if great_circle_km(pickup_lon, pickup_lat, dropoff_lon, dropoff_lat) <= 1e-9 {
        return Err(Error::input("pickup and dropoff are indistinguishable".to_string()));
    }
    Ok(TripRecord {
        record_id,
        pickup_lon,
        pickup_lat,
        dropoff_lon,
        dropoff_lat,
        pickup_time_s,
        trip_distance_km,
        slack_minutes,
    })
}

/// Read and validate a trip record CSV, building the geometric instance from
/// the accepted rows.
pub fn ingest_trips(path: &std::path::Path, config: &ExperimentConfig) -> Result<Ingest> {
    config.validate()?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((_, line)) => break line.trim(),
            None => return Err(Error::input(format!("{}: empty file, missing header", path.display()))),
        }
    };
    if header != TRIP_HEADER {
        return Err(Error::input(format!(
            "{}: malformed header {header:?} (expected {TRIP_HEADER:?})",
            path.display()
        )));
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match parse_record(&fields) {
            Ok(rec) => {
                if !seen_ids.insert(rec.record_id.clone()) {
                    rejections.push(RowRejection {
                        line: line_no,
                        record_id: Some(rec.record_id.clone()),
                        reason: "duplicate record_id".to_string(),
                    });
                } else {
                    records.push(rec);
                }
            }
            Err(e) => rejections.push(RowRejection {
                line: line_no,
                record_id: fields.first().map(|s| s.trim().to_string()),
                reason: e.to_string(),
            }),
        }
    }
    let instance = records_to_instance(&records, config)?;
    Ok(Ingest { records, rejections, instance })
}

/// Turn validated records into a geometric instance. The derived request
/// window is `[pickup_time, pickup_time + direct_time * detour_factor +
/// slack]`, with the slack defaulting from the config.
pub fn records_to_instance(records: &[TripRecord], config: &ExperimentConfig) -> Result<Instance> {
    config.validate()?;
    let mut plane =
        GeometricPlane::new(config.fare_base, config.fare_per_km, config.mean_speed_kmh)?;
    let mut trips = Vec::with_capacity(records.len());
    for rec in records {
        let pickup_id = format!("p:{}", rec.record_id);
        let dropoff_id = format!("d:{}", rec.record_id);
        plane.add_point(&pickup_id, rec.pickup_lon, rec.pickup_lat)?;
        plane.add_point(&dropoff_id, rec.dropoff_lon, rec.dropoff_lat)?;
        let direct_km =
            great_circle_km(rec.pickup_lon, rec.pickup_lat, rec.dropoff_lon, rec.dropoff_lat);
        let direct_s = direct_km / config.mean_speed_kmh * 3600.0;
        let slack_s = rec.slack_minutes.unwrap_or(config.slack_minutes) * 60.0;
        let latest = rec.pickup_time_s + direct_s * config.detour_factor + slack_s;
        trips.push(TripRequest::new(
            rec.record_id.clone(),
            pickup_id,
            dropoff_id,
            rec.pickup_time_s,
            latest,
        )?);
    }
    Ok(Instance { landscape: Landscape::Plane(plane), trips })
}

/// Load a road network from a textual edge list: one
/// `from_id,to_id,cost,travel_time_s` segment per line. Blank lines and
/// lines starting with `#` are skipped. Errors are fatal.
pub fn load_road_network(path: &std::path::Path) -> Result<RoadNetwork> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let mut segments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::input(format!(
                "{}:{}: expected from,to,cost,travel_time_s",
                path.display(),
                idx + 1
            )));
        }
        let cost: f64 = parse_field(fields[2], "cost")
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        let time: f64 = parse_field(fields[3], "travel_time_s")
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        segments.push((fields[0].trim().to_string(), fields[1].trim().to_string(), cost, time));
    }
    RoadNetwork::from_segments(&segments)
}

/// Load junction-referenced trips (network mode):
/// `commuter_id,source,destination,earliest_departure,latest_arrival` with a
/// header line. Times accept epoch seconds or ISO-8601. Errors are fatal.
pub fn load_network_trips(path: &std::path::Path) -> Result<Vec<TripRequest>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    let mut trips = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != NETWORK_TRIP_HEADER {
                return Err(Error::input(format!(
                    "{}: malformed header {line:?} (expected {NETWORK_TRIP_HEADER:?})",
                    path.display()
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::input(format!(
                "{}:{}: expected 5 fields, found {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let earliest = parse_time(fields[3])
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        let latest = parse_time(fields[4])
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        trips.push(
            TripRequest::new(
                fields[0].trim(),
                fields[1].trim().to_string(),
                fields[2].trim().to_string(),
                earliest,
                latest,
            )
            .map_err(|e| Error::input(format!("{}:{}: {e}", path.display(), idx + 1)))?,
        );
    }
    if !saw_header {
        return Err(Error::input(format!("{}: empty file, missing header", path.display())));
    }
    Ok(trips)
}
