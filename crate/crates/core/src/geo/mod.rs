//! GPS simulation, the offline region knowledge base and virtual-sensor
//! queries against it.

mod kb;
mod sensor;

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kb::{lookup_region, BBox, Climate, KbError, OutageZone, RegionKb, RegionProfile, Regulation, Seasonal};
pub use sensor::{virtual_sensor_query, ContextReport, Fact, QueryKind, UnknownQueryKind};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixQuality {
    Ok,
    Lost,
}

/// One GPS sample. While `quality` is `Lost`, `lat`/`lon` hold the last good
/// position (or a dead-reckoned estimate, flagged by `estimated`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoFix {
    pub lat: f64,
    pub lon: f64,
    pub heading_deg: f64,
    pub timestamp: i64,
    pub quality: FixQuality,
    #[serde(default)]
    pub estimated: bool,
    /// Timestamp of the last `Ok` sample.
    pub last_good_at: i64,
}

impl GeoFix {
    pub fn new(lat: f64, lon: f64, heading_deg: f64, timestamp: i64) -> Self {
        GeoFix {
            lat: lat.clamp(-90.0, 90.0),
            lon: wrap_lon(lon),
            heading_deg: wrap_heading(heading_deg),
            timestamp,
            quality: FixQuality::Ok,
            estimated: false,
            last_good_at: timestamp,
        }
    }

    pub fn is_lost(&self) -> bool {
        self.quality == FixQuality::Lost
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum GeoError {
    #[error("time step must be positive")]
    NonPositiveDt,
    #[error("dead reckoning needs a lost fix")]
    PreconditionViolated,
}

fn wrap_heading(h: f64) -> f64 {
    let w = libm::fmod(h, 360.0);
    let w = if w < 0.0 { w + 360.0 } else { w };
    if w >= 360.0 { 0.0 } else { w }
}

fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon) {
        lon
    } else {
        let w = libm::fmod(lon + 180.0, 360.0);
        if w < 0.0 { w + 180.0 } else { w - 180.0 }
    }
}

/// Moves a position `dist_m` meters along `heading_deg` with a local
/// flat-earth step evaluated at the mid latitude.
pub fn displace(lat: f64, lon: f64, heading_deg: f64, dist_m: f64) -> (f64, f64) {
    let h = heading_deg * PI / 180.0;
    let m_per_deg = EARTH_RADIUS_M * PI / 180.0;
    let dlat = dist_m * libm::cos(h) / m_per_deg;
    let mid = (lat + dlat / 2.0) * PI / 180.0;
    let cos_mid = libm::cos(mid).max(1e-9);
    let dlon = dist_m * libm::sin(h) / (m_per_deg * cos_mid);
    ((lat + dlat).clamp(-90.0, 90.0), wrap_lon(lon + dlon))
}

/// Advances a fix by `speed_kmh` for `dt_s` seconds along its heading.
///
/// Landing inside an outage zone yields a `Lost` fix that keeps the
/// previous position. To follow a vehicle through a zone over several steps
/// use [`GpsTrack`], which keeps the true position separately.
pub fn advance_fix(fix: &GeoFix, speed_kmh: f64, dt_s: i64, outage_zones: &[BBox]) -> Result<GeoFix, GeoError> {
    if dt_s <= 0 {
        return Err(GeoError::NonPositiveDt);
    }
    let dist = speed_kmh.max(0.0) / 3.6 * dt_s as f64;
    let (lat, lon) = displace(fix.lat, fix.lon, fix.heading_deg, dist);
    let timestamp = fix.timestamp + dt_s;
    if outage_zones.iter().any(|z| z.contains(lat, lon)) {
        let last_good_at = if fix.is_lost() { fix.last_good_at } else { fix.timestamp };
        return Ok(GeoFix { timestamp, quality: FixQuality::Lost, estimated: false, last_good_at, ..*fix });
    }
    Ok(GeoFix { lat, lon, timestamp, quality: FixQuality::Ok, estimated: false, last_good_at: timestamp, ..*fix })
}

/// Extrapolates a lost fix; the result stays `Lost` and is marked estimated.
pub fn dead_reckon(last: &GeoFix, speed_kmh: f64, heading_deg: f64, dt_s: i64) -> Result<GeoFix, GeoError> {
    if !last.is_lost() {
        return Err(GeoError::PreconditionViolated);
    }
    if dt_s <= 0 {
        return Err(GeoError::NonPositiveDt);
    }
    let (lat, lon) = displace(last.lat, last.lon, heading_deg, speed_kmh.max(0.0) / 3.6 * dt_s as f64);
    Ok(GeoFix {
        lat,
        lon,
        heading_deg: wrap_heading(heading_deg),
        timestamp: last.timestamp + dt_s,
        estimated: true,
        ..*last
    })
}

/// True vehicle position plus the fix the receiver reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsTrack {
    pub truth: GeoFix,
    pub reported: GeoFix,
}

impl GpsTrack {
    /// Starting inside an outage zone reports the start point as the last
    /// good fix.
    pub fn start(lat: f64, lon: f64, heading_deg: f64, timestamp: i64, outage_zones: &[BBox]) -> Self {
        let truth = GeoFix::new(lat, lon, heading_deg, timestamp);
        let mut reported = truth;
        if outage_zones.iter().any(|z| z.contains(truth.lat, truth.lon)) {
            reported.quality = FixQuality::Lost;
        }
        GpsTrack { truth, reported }
    }

    pub fn advance(&self, speed_kmh: f64, dt_s: i64, outage_zones: &[BBox]) -> Result<GpsTrack, GeoError> {
        let truth = advance_fix(&self.truth, speed_kmh, dt_s, &[])?;
        let reported = if outage_zones.iter().any(|z| z.contains(truth.lat, truth.lon)) {
            let prev = self.reported;
            let last_good_at = if prev.is_lost() { prev.last_good_at } else { prev.timestamp };
            GeoFix { timestamp: truth.timestamp, quality: FixQuality::Lost, estimated: false, last_good_at, ..prev }
        } else {
            truth
        };
        Ok(GpsTrack { truth, reported })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let r = |d: f64| d.to_radians();
        let a = (r(lat2 - lat1) / 2.0).sin().powi(2) + r(lat1).cos() * r(lat2).cos() * (r(lon2 - lon1) / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().asin()
    }

    #[test]
    fn stationary_fix_only_advances_time() {
        let f = GeoFix::new(48.8566, 2.3522, 90.0, 0);
        let n = advance_fix(&f, 0.0, 5, &[]).unwrap();
        assert_eq!((n.lat, n.lon, n.timestamp), (f.lat, f.lon, 5));
        assert_eq!(advance_fix(&f, 10.0, 0, &[]), Err(GeoError::NonPositiveDt));
    }

    #[test]
    fn one_km_east() {
        let f = GeoFix::new(48.8566, 2.3522, 90.0, 0);
        let n = advance_fix(&f, 36.0, 100, &[]).unwrap();
        let d = haversine_m(f.lat, f.lon, n.lat, n.lon);
        assert!((d - 1000.0).abs() < 10.0, "{d}");
        assert!((n.lat - f.lat).abs() < 1e-6 && n.lon > f.lon);
    }

    #[test]
    fn entering_tunnel_loses_fix() {
        let tunnel = BBox { min_lat: 48.85, max_lat: 48.87, min_lon: 2.36, max_lon: 2.40 };
        let f = GeoFix::new(48.8566, 2.3522, 90.0, 0);
        let n = advance_fix(&f, 36.0, 100, &[tunnel]).unwrap();
        assert_eq!(n.quality, FixQuality::Lost);
        assert_eq!((n.lat, n.lon, n.last_good_at, n.timestamp), (f.lat, f.lon, 0, 100));
    }

    #[test]
    fn track_recovers_after_tunnel() {
        let tunnel = BBox { min_lat: 48.85, max_lat: 48.87, min_lon: 2.355, max_lon: 2.36 };
        let mut t = GpsTrack::start(48.8566, 2.3522, 90.0, 0, &[tunnel]);
        let mut lost_seen = false;
        for _ in 0..60 {
            t = t.advance(36.0, 5, &[tunnel]).unwrap();
            if t.reported.is_lost() {
                lost_seen = true;
                assert!(tunnel.contains(t.truth.lat, t.truth.lon));
            }
        }
        assert!(lost_seen);
        assert_eq!(t.reported, t.truth);
    }

    #[test]
    fn dead_reckoning_north() {
        let mut f = GeoFix::new(47.0, 11.0, 0.0, 0);
        assert_eq!(dead_reckon(&f, 60.0, 0.0, 60), Err(GeoError::PreconditionViolated));
        f.quality = FixQuality::Lost;
        let e = dead_reckon(&f, 60.0, 0.0, 60).unwrap();
        assert!(e.estimated && e.is_lost());
        let d = haversine_m(f.lat, f.lon, e.lat, e.lon);
        assert!((d - 1000.0).abs() < 10.0, "{d}");
        assert!(e.lat > f.lat);
        let still = dead_reckon(&f, 0.0, 0.0, 1).unwrap();
        assert_eq!((still.lat, still.lon), (f.lat, f.lon));
    }
}
