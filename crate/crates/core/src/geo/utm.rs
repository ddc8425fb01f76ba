//! Universal Transverse Mercator projection.
//!
//! Forward and inverse mappings use the Krüger series carried to fourth order
//! in the third flattening `n`, which keeps the projection error well under a
//! millimetre inside the ±3.5° envelope accepted here.

use serde::{Deserialize, Serialize};

use super::{GeoError, GeoPoint, ProjectedPoint};

const SCALE_FACTOR: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

/// Maximum longitude offset from the zone's central meridian.
pub const ZONE_HALF_WIDTH_DEG: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    North,
    South,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub semi_major: f64,
    pub inverse_flattening: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid {
        semi_major: 6_378_137.0,
        inverse_flattening: 298.257_223_563,
    };

    pub const GRS80: Ellipsoid = Ellipsoid {
        semi_major: 6_378_137.0,
        inverse_flattening: 298.257_222_101,
    };

    fn flattening(&self) -> f64 {
        1.0 / self.inverse_flattening
    }
}

/// Precomputed series coefficients for one ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Kruger {
    /// Rectifying radius.
    radius: f64,
    alpha: [f64; 4],
    beta: [f64; 4],
    delta: [f64; 4],
    /// 2√n / (1 + n), the eccentricity used by the conformal latitude.
    ecc: f64,
}

impl Kruger {
    fn new(ellipsoid: Ellipsoid) -> Self {
        let f = ellipsoid.flattening();
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        Kruger {
            radius: ellipsoid.semi_major / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0),
            alpha: [
                n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4,
                13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4,
                61.0 / 240.0 * n3 - 103.0 / 140.0 * n4,
                49561.0 / 161280.0 * n4,
            ],
            beta: [
                n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4,
                1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4,
                17.0 / 480.0 * n3 - 37.0 / 840.0 * n4,
                4397.0 / 161280.0 * n4,
            ],
            delta: [
                2.0 * n - 2.0 / 3.0 * n2 - 2.0 * n3 + 116.0 / 45.0 * n4,
                7.0 / 3.0 * n2 - 8.0 / 5.0 * n3 - 227.0 / 45.0 * n4,
                56.0 / 15.0 * n3 - 136.0 / 35.0 * n4,
                4279.0 / 630.0 * n4,
            ],
            ecc: 2.0 * n.sqrt() / (1.0 + n),
        }
    }
}

/// A UTM zone on a given ellipsoid, identified by its EPSG code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtmCrs {
    zone: u8,
    hemisphere: Hemisphere,
    epsg: u32,
    series: Kruger,
}

impl UtmCrs {
    /// WGS 84 / UTM zone (EPSG 326zz / 327zz).
    pub fn wgs84(zone: u8, hemisphere: Hemisphere) -> Result<Self, GeoError> {
        check_zone(zone)?;
        let base = match hemisphere {
            Hemisphere::North => 32600,
            Hemisphere::South => 32700,
        };
        Ok(Self::build(zone, hemisphere, base + zone as u32, Ellipsoid::WGS84))
    }

    /// Accepts WGS 84 UTM (326zz, 327zz) and NAD83 UTM (269zz, zones 1–23 north).
    pub fn from_epsg(epsg: u32) -> Result<Self, GeoError> {
        let (zone, hemisphere, ellipsoid) = match epsg {
            32601..=32660 => ((epsg - 32600) as u8, Hemisphere::North, Ellipsoid::WGS84),
            32701..=32760 => ((epsg - 32700) as u8, Hemisphere::South, Ellipsoid::WGS84),
            26901..=26923 => ((epsg - 26900) as u8, Hemisphere::North, Ellipsoid::GRS80),
            _ => return Err(GeoError::UnsupportedProjection(epsg)),
        };
        Ok(Self::build(zone, hemisphere, epsg, ellipsoid))
    }

    fn build(zone: u8, hemisphere: Hemisphere, epsg: u32, ellipsoid: Ellipsoid) -> Self {
        UtmCrs {
            zone,
            hemisphere,
            epsg,
            series: Kruger::new(ellipsoid),
        }
    }

    pub fn zone(&self) -> u8 {
        self.zone
    }

    pub fn hemisphere(&self) -> Hemisphere {
        self.hemisphere
    }

    pub fn epsg(&self) -> u32 {
        self.epsg
    }

    pub fn central_meridian(&self) -> f64 {
        -183.0 + 6.0 * self.zone as f64
    }

    fn false_northing(&self) -> f64 {
        match self.hemisphere {
            Hemisphere::North => 0.0,
            Hemisphere::South => FALSE_NORTHING_SOUTH,
        }
    }

    /// Geodetic to projected coordinates.
    pub fn forward(&self, g: GeoPoint) -> Result<ProjectedPoint, GeoError> {
        let dlon = normalize_lon(g.lon - self.central_meridian());
        if dlon.abs() > ZONE_HALF_WIDTH_DEG || !(-80.0..=84.0).contains(&g.lat) {
            return Err(GeoError::OutOfZone {
                lat: g.lat,
                lon: g.lon,
                zone: self.zone,
            });
        }
        let s = &self.series;
        let phi = g.lat.to_radians();
        let lambda = dlon.to_radians();

        let sin_phi = phi.sin();
        let t = (sin_phi.atanh() - s.ecc * (s.ecc * sin_phi).atanh()).sinh();
        let xi_p = t.atan2(lambda.cos());
        let eta_p = (lambda.sin() / (1.0 + t * t).sqrt()).atanh();

        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in s.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
        }

        Ok(ProjectedPoint {
            easting: FALSE_EASTING + SCALE_FACTOR * s.radius * eta,
            northing: self.false_northing() + SCALE_FACTOR * s.radius * xi,
            epsg: self.epsg,
        })
    }

    /// Projected to geodetic coordinates.
    pub fn inverse(&self, p: ProjectedPoint) -> Result<GeoPoint, GeoError> {
        if p.epsg != self.epsg {
            return Err(GeoError::ProjectionMismatch {
                expected: self.epsg,
                found: p.epsg,
            });
        }
        let s = &self.series;
        let xi = (p.northing - self.false_northing()) / (SCALE_FACTOR * s.radius);
        let eta = (p.easting - FALSE_EASTING) / (SCALE_FACTOR * s.radius);

        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in s.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }

        let chi = (xi_p.sin() / eta_p.cosh()).asin();
        let mut phi = chi;
        for (j, d) in s.delta.iter().enumerate() {
            phi += d * (2.0 * (j + 1) as f64 * chi).sin();
        }
        let lambda = eta_p.sinh().atan2(xi_p.cos());

        Ok(GeoPoint {
            lat: phi.to_degrees(),
            lon: normalize_lon(self.central_meridian() + lambda.to_degrees()),
        })
    }
}

/// Forward projection into a WGS 84 UTM zone.
pub fn wgs84_to_utm(g: GeoPoint, zone: u8, hemisphere: Hemisphere) -> Result<ProjectedPoint, GeoError> {
    UtmCrs::wgs84(zone, hemisphere)?.forward(g)
}

/// Inverse of [`wgs84_to_utm`]; the zone is taken from the point's EPSG code.
pub fn utm_to_wgs84(p: ProjectedPoint) -> Result<GeoPoint, GeoError> {
    UtmCrs::from_epsg(p.epsg)?.inverse(p)
}

fn check_zone(zone: u8) -> Result<(), GeoError> {
    if (1..=60).contains(&zone) {
        Ok(())
    } else {
        Err(GeoError::InvalidZone(zone))
    }
}

fn normalize_lon(lon: f64) -> f64 {
    let mut l = lon % 360.0;
    if l > 180.0 {
        l -= 360.0;
    } else if l < -180.0 {
        l += 360.0;
    }
    l
}
