//! Synthetic workload generation: reproducible pseudo-random trip records
//! with hotspot-clustered pickups, log-normal trip lengths averaging about
//! 4.2 km, and pickup times uniform over one hour.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::ingest::{TripRecord, TRIP_HEADER};
use crate::{Error, Result};

/// Base epoch for generated pickup times.
const GEN_EPOCH_S: i64 = 1_700_000_000;
/// Number of pickup hotspots.
const HOTSPOTS: usize = 6;
/// Log-normal shape parameter for trip lengths.
const LENGTH_SIGMA: f64 = 0.45;
/// Mean trip length in km.
const MEAN_TRIP_KM: f64 = 4.2;
/// Std-dev of the pickup scatter around a hotspot, km.
const HOTSPOT_SCATTER_KM: f64 = 0.8;
/// Std-dev of trip bearings around a hotspot's principal direction, radians.
const BEARING_SCATTER_RAD: f64 = 0.7;
/// Fraction of pickups drawn from hotspots rather than uniformly.
const HOTSPOT_FRACTION: f64 = 0.8;

const KM_PER_DEG_LAT: f64 = 110.574;
const KM_PER_DEG_LON_EQ: f64 = 111.320;

/// Rectangular lon/lat region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    /// Manhattan-sized default region.
    pub fn default_region() -> Self {
        BoundingBox { min_lon: -74.03, min_lat: 40.69, max_lon: -73.92, max_lat: 40.82 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min_lon < self.max_lon
            && self.min_lat < self.max_lat
            && self.min_lon >= -180.0
            && self.max_lon <= 180.0
            && self.min_lat >= -90.0
            && self.max_lat <= 90.0
            && [self.min_lon, self.min_lat, self.max_lon, self.max_lat]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("degenerate bounding box {self:?}")))
        }
    }

    fn clamp_lon(&self, lon: f64) -> f64 {
        lon.clamp(self.min_lon, self.max_lon)
    }

    fn clamp_lat(&self, lat: f64) -> f64 {
        lat.clamp(self.min_lat, self.max_lat)
    }
}

/// Generate `n` reproducible trip records in `region` from `seed`.
///
/// Pickups cluster around seeded hotspots (each with a principal travel
/// direction, so nearby commuters tend to head the same way); trip lengths
/// are log-normal with mean ≈ 4.2 km; pickup times are uniform over one
/// hour. Same seed, same output, down to the byte.
pub fn generate_workload(n: usize, region: &BoundingBox, seed: u64) -> Result<Vec<TripRecord>> {
    region.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let hotspots: Vec<(f64, f64, f64)> = (0..HOTSPOTS)
        .map(|_| {
            (
                rng.gen_range(region.min_lon..region.max_lon),
                rng.gen_range(region.min_lat..region.max_lat),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();

    let length_mu = MEAN_TRIP_KM.ln() - LENGTH_SIGMA * LENGTH_SIGMA / 2.0;
    let length_dist = LogNormal::new(length_mu, LENGTH_SIGMA).expect("valid log-normal");
    let scatter = Normal::new(0.0, HOTSPOT_SCATTER_KM).expect("valid normal");
    let bearing_jitter = Normal::new(0.0, BEARING_SCATTER_RAD).expect("valid normal");

    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let (pickup_lon, pickup_lat, bearing) = if rng.gen_bool(HOTSPOT_FRACTION) {
            let (hlon, hlat, hdir) = hotspots[rng.gen_range(0..HOTSPOTS)];
            let dx_km = scatter.sample(&mut rng);
            let dy_km = scatter.sample(&mut rng);
            let lat = region.clamp_lat(hlat + dy_km / KM_PER_DEG_LAT);
            let lon = region
                .clamp_lon(hlon + dx_km / (KM_PER_DEG_LON_EQ * lat.to_radians().cos()));
            (lon, lat, hdir + bearing_jitter.sample(&mut rng))
        } else {
            (
                rng.gen_range(region.min_lon..region.max_lon),
                rng.gen_range(region.min_lat..region.max_lat),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        };

        let length_km = length_dist.sample(&mut rng);
        let dropoff_lat = (pickup_lat + length_km * bearing.cos() / KM_PER_DEG_LAT)
            .clamp(-89.99, 89.99);
        let dropoff_lon = (pickup_lon
            + length_km * bearing.sin() / (KM_PER_DEG_LON_EQ * pickup_lat.to_radians().cos()))
        .clamp(-179.99, 179.99);
        let pickup_time_s = GEN_EPOCH_S + i64::from(rng.gen_range(0u32..3600));

        records.push(TripRecord {
            record_id: format!("t{k:06}"),
            pickup_lon,
            pickup_lat,
            dropoff_lon,
            dropoff_lat,
            pickup_time_s: pickup_time_s as f64,
            trip_distance_km: Some(length_km),
            slack_minutes: None,
        });
    }
    Ok(records)
}

/// Render records as the canonical CSV document (header included).
pub fn records_to_csv(records: &[TripRecord]) -> String {
    let mut out = String::from(TRIP_HEADER);
    out.push('\n');
    for r in records {
        let dist = r.trip_distance_km.map(|d| d.to_string()).unwrap_or_default();
        let slack = r.slack_minutes.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.record_id,
            r.pickup_lon,
            r.pickup_lat,
            r.dropoff_lon,
            r.dropoff_lat,
            r.pickup_time_s as i64,
            dist,
            slack
        ));
    }
    out
}

/// Write records as CSV to `path`.
pub fn write_records(records: &[TripRecord], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, records_to_csv(records))
        .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}
