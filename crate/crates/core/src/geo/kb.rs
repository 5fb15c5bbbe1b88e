//! Region knowledge base.
//!
//! File form (JSON): `{"kb_version": 1, "regions": [RegionProfile, ...]}`.
//! Exactly one region has `"bbox": null`; it is the Default region and
//! absorbs every position no other bbox contains.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GeoFix;
use crate::predicate::Condition;
use crate::vehicle::{signal, RoadType};

/// Latitude/longitude rectangle, half-open: `[min, max)` on both axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat < self.max_lat && lon >= self.min_lon && lon < self.max_lon
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.min_lat < o.max_lat && o.min_lat < self.max_lat && self.min_lon < o.max_lon && o.min_lon < self.max_lon
    }

    fn is_valid(&self) -> bool {
        self.min_lat < self.max_lat
            && self.min_lon < self.max_lon
            && self.min_lat >= -90.0
            && self.max_lat <= 90.0
            && self.min_lon >= -180.0
            && self.max_lon <= 180.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seasonal {
    pub winter: f64,
    pub spring: f64,
    pub summer: f64,
    pub autumn: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Climate {
    pub mean_temp_c: Seasonal,
    pub humidity_pct: u8,
    pub heat_prone: bool,
}

/// A rule is violated when every condition in `when` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regulation {
    pub rule_id: String,
    pub when: Vec<Condition>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageZone {
    pub name: String,
    pub bbox: BBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    pub region_id: String,
    pub name: String,
    /// `None` only for the Default region.
    pub bbox: Option<BBox>,
    /// Representative position used when a task does not pin one.
    pub anchor: [f64; 2],
    #[serde(default)]
    pub tags: Vec<String>,
    pub urban_limit_kmh: u16,
    pub rural_limit_kmh: u16,
    pub highway_limit_kmh: u16,
    pub climate: Climate,
    #[serde(default)]
    pub regulations: Vec<Regulation>,
    #[serde(default)]
    pub norms: Vec<String>,
    #[serde(default)]
    pub outage_zones: Vec<OutageZone>,
}

impl RegionProfile {
    pub fn limit_for(&self, road: RoadType) -> u16 {
        match road {
            RoadType::Urban => self.urban_limit_kmh,
            RoadType::Rural => self.rural_limit_kmh,
            RoadType::Highway => self.highway_limit_kmh,
        }
    }

    pub fn is_default(&self) -> bool {
        self.bbox.is_none()
    }

    pub fn outage_bboxes(&self) -> Vec<BBox> {
        self.outage_zones.iter().map(|z| z.bbox).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionKb {
    pub kb_version: u32,
    pub regions: Vec<RegionProfile>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum KbError {
    #[error("region KB parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("region `{region}`: {problem}")]
    Invalid { region: String, problem: String },
}

fn invalid(region: &str, problem: impl Into<String>) -> KbError {
    KbError::Invalid { region: region.into(), problem: problem.into() }
}

impl RegionKb {
    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let kb: RegionKb = serde_json::from_str(text).map_err(|e| KbError::Parse {
            line: e.line(),
            column: e.column(),
            msg: format!("{e}"),
        })?;
        kb.validate()?;
        Ok(kb)
    }

    pub fn validate(&self) -> Result<(), KbError> {
        let defaults = self.regions.iter().filter(|r| r.is_default()).count();
        if defaults != 1 {
            return Err(invalid("*", format!("expected exactly one default region, found {defaults}")));
        }
        let mut ids = BTreeSet::new();
        for (i, r) in self.regions.iter().enumerate() {
            let id = r.region_id.as_str();
            if !ids.insert(id) {
                return Err(invalid(id, "duplicate region_id"));
            }
            if r.urban_limit_kmh == 0 || r.rural_limit_kmh == 0 || r.highway_limit_kmh == 0 {
                return Err(invalid(id, "speed limits must be positive"));
            }
            if let Some(b) = &r.bbox {
                if !b.is_valid() {
                    return Err(invalid(id, "malformed bbox"));
                }
                if !b.contains(r.anchor[0], r.anchor[1]) {
                    return Err(invalid(id, "anchor lies outside the bbox"));
                }
                for other in &self.regions[i + 1..] {
                    if other.bbox.is_some_and(|o| o.intersects(b)) {
                        return Err(invalid(id, format!("bbox overlaps `{}`", other.region_id)));
                    }
                }
            }
            for z in &r.outage_zones {
                if !z.bbox.is_valid() {
                    return Err(invalid(id, format!("malformed outage zone `{}`", z.name)));
                }
                if z.bbox.contains(r.anchor[0], r.anchor[1]) {
                    return Err(invalid(id, "anchor lies inside an outage zone"));
                }
            }
            for rule in &r.regulations {
                if rule.when.is_empty() {
                    return Err(invalid(id, format!("rule `{}` has no conditions", rule.rule_id)));
                }
                for c in &rule.when {
                    let spec = signal::spec(&c.signal)
                        .ok_or_else(|| invalid(id, format!("rule `{}`: unknown signal `{}`", rule.rule_id, c.signal)))?;
                    if spec.ty.coerce(&c.value).is_none() {
                        return Err(invalid(id, format!("rule `{}`: bad literal for `{}`", rule.rule_id, c.signal)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn region(&self, id: &str) -> Option<&RegionProfile> {
        self.regions.iter().find(|r| r.region_id == id)
    }

    pub fn default_region(&self) -> &RegionProfile {
        self.regions.iter().find(|r| r.is_default()).expect("validated KB has a default region")
    }

    pub fn locate(&self, lat: f64, lon: f64) -> &RegionProfile {
        self.regions
            .iter()
            .find(|r| r.bbox.is_some_and(|b| b.contains(lat, lon)))
            .unwrap_or_else(|| self.default_region())
    }
}

/// Region containing the fix position, or the Default region.
pub fn lookup_region<'a>(kb: &'a RegionKb, fix: &GeoFix) -> &'a RegionProfile {
    kb.locate(fix.lat, fix.lon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> RegionKb {
        crate::assets::regions()
    }

    #[test]
    fn paris_center() {
        let kb = kb();
        let r = lookup_region(&kb, &GeoFix::new(48.8566, 2.3522, 0.0, 0));
        assert_eq!(r.region_id, "paris_urban");
        assert_eq!(r.urban_limit_kmh, 50);
    }

    #[test]
    fn ocean_is_default() {
        let kb = kb();
        let r = lookup_region(&kb, &GeoFix::new(-40.0, -30.0, 0.0, 0));
        assert!(r.is_default());
    }

    #[test]
    fn shared_edge_goes_to_half_open_owner() {
        let text = r#"{"kb_version": 1, "regions": [
          {"region_id": "south", "name": "S", "bbox": {"min_lat": 0, "max_lat": 10, "min_lon": 0, "max_lon": 10},
           "anchor": [5, 5], "urban_limit_kmh": 50, "rural_limit_kmh": 80, "highway_limit_kmh": 100,
           "climate": {"mean_temp_c": {"winter": 0, "spring": 0, "summer": 0, "autumn": 0}, "humidity_pct": 50, "heat_prone": false}},
          {"region_id": "north", "name": "N", "bbox": {"min_lat": 10, "max_lat": 20, "min_lon": 0, "max_lon": 10},
           "anchor": [15, 5], "urban_limit_kmh": 30, "rural_limit_kmh": 80, "highway_limit_kmh": 100,
           "climate": {"mean_temp_c": {"winter": 0, "spring": 0, "summer": 0, "autumn": 0}, "humidity_pct": 50, "heat_prone": false}},
          {"region_id": "default", "name": "D", "bbox": null,
           "anchor": [0, 0], "urban_limit_kmh": 50, "rural_limit_kmh": 80, "highway_limit_kmh": 100,
           "climate": {"mean_temp_c": {"winter": 0, "spring": 0, "summer": 0, "autumn": 0}, "humidity_pct": 50, "heat_prone": false}}
        ]}"#;
        let kb = RegionKb::from_json(text).unwrap();
        assert_eq!(kb.locate(10.0, 5.0).region_id, "north");
        assert_eq!(kb.locate(9.999, 5.0).region_id, "south");
        assert_eq!(kb.locate(5.0, 10.0).region_id, "default");
    }

    #[test]
    fn bundled_regions_are_disjoint_and_cover_required_climates() {
        let kb = kb();
        assert!(kb.regions.len() >= 6);
        for tag in ["hot_coastal", "cold_mountain", "humid_rainy", "urban", "highway"] {
            assert!(kb.regions.iter().any(|r| r.tags.iter().any(|t| t == tag)), "{tag}");
        }
    }

    #[test]
    fn rejects_overlap_and_missing_default() {
        let mut k = kb();
        let paris = k.region("paris_urban").unwrap().clone();
        let mut twin = paris.clone();
        twin.region_id = "twin".into();
        k.regions.push(twin);
        assert!(matches!(k.validate(), Err(KbError::Invalid { .. })));
        let mut k = kb();
        k.regions.retain(|r| !r.is_default());
        assert!(k.validate().is_err());
    }
}
