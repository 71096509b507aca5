//! Coordinate-grid country lookup. Geolocation backends emit coordinates
//! snapped to a 0.5° grid; a CSV table maps grid cells to ISO-3166 alpha-2
//! codes. Unmapped cells fall back to the nearest mapped cell within 2.0°
//! of great-circle distance.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

/// Maximum great-circle distance (degrees of central angle) for the
/// nearest-cell fallback.
pub const FALLBACK_RADIUS_DEG: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("country grid row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("country grid: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Deserialize)]
struct GridRow {
    lat: f64,
    lon: f64,
    iso2: String,
}

/// Cells keyed by (lat, lon) in half-degree steps.
#[derive(Debug, Clone, Default)]
pub struct CountryGrid {
    cells: BTreeMap<(i32, i32), String>,
}

fn half_steps(x: f64) -> i32 {
    (x * 2.0).round() as i32
}

fn on_grid(x: f64) -> bool {
    (x * 2.0).fract() == 0.0
}

/// Longitude keys wrap so +180° and −180° land on the same cell.
fn wrap_lon(k: i32) -> i32 {
    (k + 360).rem_euclid(720) - 360
}

fn central_angle_deg(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * a.sqrt().asin().to_degrees()
}

impl CountryGrid {
    /// Loads `lat,lon,iso2` rows. Every row must sit on the 0.5° grid with
    /// a two-letter country code; duplicates and out-of-range values are
    /// fatal, with the offending row number reported.
    pub fn load<R: std::io::Read>(reader: R) -> Result<CountryGrid, GeoError> {
        let mut csv = csv::Reader::from_reader(reader);
        let mut cells = BTreeMap::new();
        for (i, record) in csv.deserialize::<GridRow>().enumerate() {
            let row = i + 2;
            let fail = |message: String| GeoError::Row { row, message };
            let r = record.map_err(|e| fail(e.to_string()))?;
            if !(-90.0..=90.0).contains(&r.lat) || !(-180.0..=180.0).contains(&r.lon) {
                return Err(fail(format!("coordinates ({}, {}) out of range", r.lat, r.lon)));
            }
            if !on_grid(r.lat) || !on_grid(r.lon) {
                return Err(fail(format!(
                    "coordinates ({}, {}) not on the 0.5° grid",
                    r.lat, r.lon
                )));
            }
            if r.iso2.len() != 2 || !r.iso2.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(fail(format!("bad country code `{}`", r.iso2)));
            }
            let key = (half_steps(r.lat), wrap_lon(half_steps(r.lon)));
            if cells
                .insert(key, r.iso2.to_ascii_uppercase())
                .is_some()
            {
                return Err(fail(format!("duplicate cell ({}, {})", r.lat, r.lon)));
            }
        }
        Ok(CountryGrid { cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Exact cell lookup, then nearest mapped cell within
    /// [`FALLBACK_RADIUS_DEG`] (inclusive). Ties resolve to the smaller
    /// (lat, lon) key so results never depend on iteration order.
    pub fn lookup(&self, lat: f64, lon: f64) -> Option<&str> {
        let key = (half_steps(lat), wrap_lon(half_steps(lon)));
        if let Some(code) = self.cells.get(&key) {
            return Some(code);
        }

        let mut best: Option<(f64, (i32, i32), &str)> = None;
        for dlat in -4..=4i32 {
            let klat = key.0 + dlat;
            if !(-180..=180).contains(&klat) {
                continue;
            }
            let cell_lat = f64::from(klat) / 2.0;
            let cos = cell_lat.to_radians().cos();
            let steps = if cos < 0.03 {
                360
            } else {
                (FALLBACK_RADIUS_DEG * 2.0 / cos).ceil() as i32
            };
            for dlon in -steps..=steps {
                let klon = wrap_lon(key.1 + dlon);
                let Some(code) = self.cells.get(&(klat, klon)) else {
                    continue;
                };
                let d = central_angle_deg(lat, lon, cell_lat, f64::from(klon) / 2.0);
                if d > FALLBACK_RADIUS_DEG + 1e-9 {
                    continue;
                }
                let candidate = (d, (klat, klon));
                if best.is_none_or(|(bd, bk, _)| candidate < (bd, bk)) {
                    best = Some((d, (klat, klon), code));
                }
            }
        }
        best.map(|(_, _, code)| code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(csv: &str) -> CountryGrid {
        CountryGrid::load(csv.as_bytes()).unwrap()
    }

    #[test]
    fn exact_cell_hits() {
        let g = grid("lat,lon,iso2\n38.5,-98.0,US\n51.5,-0.5,GB\n");
        assert_eq!(g.lookup(38.5, -98.0), Some("US"));
        assert_eq!(g.lookup(51.5, -0.5), Some("GB"));
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn fallback_within_two_degrees() {
        let g = grid("lat,lon,iso2\n50.0,10.0,DE\n");
        assert_eq!(g.lookup(51.5, 10.0), Some("DE"));
        assert_eq!(g.lookup(52.0, 10.0), Some("DE"));
        assert_eq!(g.lookup(52.5, 10.0), None);
        assert_eq!(g.lookup(0.0, -30.0), None);
    }

    #[test]
    fn fallback_window_widens_with_latitude() {
        // 3° of longitude at 60°N is only ~1.5° of central angle
        let g = grid("lat,lon,iso2\n60.0,10.0,NO\n");
        assert_eq!(g.lookup(60.0, 13.0), Some("NO"));
        assert_eq!(g.lookup(0.0, 13.0), None);
    }

    #[test]
    fn nearest_cell_wins() {
        let g = grid("lat,lon,iso2\n50.0,10.0,DE\n50.0,12.0,CZ\n");
        assert_eq!(g.lookup(50.0, 10.5), Some("DE"));
        assert_eq!(g.lookup(50.0, 11.5), Some("CZ"));
    }

    #[test]
    fn codes_are_upper_cased() {
        let g = grid("lat,lon,iso2\n50.0,10.0,de\n");
        assert_eq!(g.lookup(50.0, 10.0), Some("DE"));
    }

    #[test]
    fn bad_rows_are_fatal_with_row_numbers() {
        let cases = [
            ("lat,lon,iso2\n99.0,10.0,DE\n", "out of range"),
            ("lat,lon,iso2\n50.0,190.0,DE\n", "out of range"),
            ("lat,lon,iso2\n50.25,10.0,DE\n", "grid"),
            ("lat,lon,iso2\n50.0,10.0,DEU\n", "country code"),
            ("lat,lon,iso2\n50.0,10.0,D1\n", "country code"),
            ("lat,lon,iso2\n50.0,abc,DE\n", "invalid"),
        ];
        for (csv, needle) in cases {
            match CountryGrid::load(csv.as_bytes()) {
                Err(GeoError::Row { row: 2, message }) => {
                    assert!(message.contains(needle), "{message} vs {needle}")
                }
                other => panic!("expected row error for {csv:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_cells_are_fatal() {
        let csv = "lat,lon,iso2\n50.0,10.0,DE\n50.0,10.0,AT\n";
        assert!(matches!(
            CountryGrid::load(csv.as_bytes()),
            Err(GeoError::Row { row: 3, .. })
        ));
    }

    #[test]
    fn antimeridian_cells_coincide() {
        let g = grid("lat,lon,iso2\n-17.0,180.0,FJ\n");
        assert_eq!(g.lookup(-17.0, -180.0), Some("FJ"));
        assert_eq!(g.lookup(-17.0, -179.5), Some("FJ"));
    }
}
