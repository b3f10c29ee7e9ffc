//! Viewport placement on the sphere, gnomonic viewport extraction from
//! equirectangular planes, and the planar center crop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const MAX_DEFAULT_VIEWPORT: usize = 512;
pub const MIN_VIEWPORT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewportSpec {
    /// Degrees in `[0, 360)`.
    pub center_longitude: f64,
    /// Degrees in `[-90, 90]`.
    pub center_latitude: f64,
    pub fov: f64,
    pub out_size: usize,
}

impl ViewportSpec {
    pub fn new(center_longitude: f64, center_latitude: f64, fov: f64, out_size: usize) -> Result<Self> {
        if !(fov > 0.0 && fov < 180.0) {
            return Err(Error::InvalidArgument(format!("fov must be in (0, 180), got {fov}")));
        }
        if out_size < MIN_VIEWPORT {
            return Err(Error::InvalidArgument(format!(
                "viewport size must be at least {MIN_VIEWPORT}, got {out_size}"
            )));
        }
        if !(-90.0..=90.0).contains(&center_latitude) || !center_longitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid viewport center ({center_longitude}, {center_latitude})"
            )));
        }
        Ok(Self {
            center_longitude: center_longitude.rem_euclid(360.0),
            center_latitude,
            fov,
            out_size,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingScheme {
    /// `n` viewports evenly spaced along the equator.
    EquatorialAdaptive(usize),
    /// Four equatorial viewports plus one at each pole.
    NonUniformSix,
}

impl Default for SamplingScheme {
    fn default() -> Self {
        SamplingScheme::EquatorialAdaptive(4)
    }
}

impl SamplingScheme {
    pub fn centers(&self, fov: f64, out_size: usize) -> Result<Vec<ViewportSpec>> {
        match *self {
            SamplingScheme::EquatorialAdaptive(n) => equatorial_centers(n, fov, out_size),
            SamplingScheme::NonUniformSix => nonuniform_six_centers(fov, out_size),
        }
    }
}

impl std::str::FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "six" || s == "nonuniform6" {
            return Ok(SamplingScheme::NonUniformSix);
        }
        if let Some(n) = s.strip_prefix("equatorial") {
            let n = if n.is_empty() { 4 } else {
                n.parse().map_err(|_| Error::InvalidArgument(format!("bad sampling scheme '{s}'")))?
            };
            if n == 0 {
                return Err(Error::InvalidArgument("viewport count must be at least 1".into()));
            }
            return Ok(SamplingScheme::EquatorialAdaptive(n));
        }
        Err(Error::InvalidArgument(format!("unknown sampling scheme '{s}'")))
    }
}

/// `n` viewports on the equator separated by `360° / n`, starting at 0°.
pub fn equatorial_centers(n: usize, fov: f64, out_size: usize) -> Result<Vec<ViewportSpec>> {
    if n == 0 {
        return Err(Error::InvalidArgument("viewport count must be at least 1".into()));
    }
    let step = 360.0 / n as f64;
    (0..n)
        .map(|k| ViewportSpec::new(k as f64 * step, 0.0, fov, out_size))
        .collect()
}

pub fn nonuniform_six_centers(fov: f64, out_size: usize) -> Result<Vec<ViewportSpec>> {
    let mut specs = equatorial_centers(4, fov, out_size)?;
    specs.push(ViewportSpec::new(0.0, 90.0, fov, out_size)?);
    specs.push(ViewportSpec::new(0.0, -90.0, fov, out_size)?);
    Ok(specs)
}

/// Default viewport edge length for an ERP plane of the given height.
pub fn default_viewport_size(erp_height: usize) -> usize {
    (erp_height / 2).clamp(MIN_VIEWPORT, MAX_DEFAULT_VIEWPORT)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        return a;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (a + (b - a) * t).clamp(lo, hi)
}

/// Bilinear sample at continuous ERP coordinates; columns wrap, rows clamp.
///
/// Sample `(r, c)` of the plane sits at coordinate `(r, c)`, so column
/// `width * lon / 360` and row `height * (90 - lat) / 180` address a direction.
pub fn sample_erp(plane: &Raster, row: f64, col: f64) -> f64 {
    let w = plane.width();
    let h = plane.height();
    let row = row.clamp(0.0, (h - 1) as f64);
    let col = col.rem_euclid(w as f64);
    let r0 = row.floor() as usize;
    let c0 = (col.floor() as usize).min(w - 1);
    let r1 = (r0 + 1).min(h - 1);
    let c1 = (c0 + 1) % w;
    let ty = row - r0 as f64;
    let tx = col - c0 as f64;
    let data = plane.data();
    let top = lerp(data[r0 * w + c0], data[r0 * w + c1], tx);
    let bottom = lerp(data[r1 * w + c0], data[r1 * w + c1], tx);
    lerp(top, bottom, ty)
}

/// Renders a square rectilinear (gnomonic) viewport of a single-channel ERP
/// plane.
///
/// Output pixel `(i, j)` sits at tangent-plane coordinates
/// `((j - s/2) / f, (s/2 - i) / f)` with `f = (s/2) / tan(fov/2)`, so pixel
/// `(s/2, s/2)` looks exactly at the viewport center.
pub fn extract_viewport(plane: &Raster, spec: &ViewportSpec) -> Result<Raster> {
    if plane.channels() != 1 {
        return Err(Error::Channels {
            expected: 1,
            got: plane.channels(),
        });
    }
    if plane.width() != 2 * plane.height() {
        return Err(Error::Aspect {
            width: plane.width(),
            height: plane.height(),
        });
    }
    let size = spec.out_size;
    let half = size as f64 / 2.0;
    let focal = half / (spec.fov.to_radians() / 2.0).tan();
    let (sin_lat, cos_lat) = spec.center_latitude.to_radians().sin_cos();
    let lon0 = spec.center_longitude.to_radians();
    let w = plane.width() as f64;
    let h = plane.height() as f64;

    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        let y = (half - i as f64) / focal;
        for j in 0..size {
            let x = (j as f64 - half) / focal;
            // Camera frame: forward (0, 0, 1), right +x, up +y. Pitch by the
            // center latitude about the right axis.
            let fwd = cos_lat - y * sin_lat;
            let up = sin_lat + y * cos_lat;
            let norm = (x * x + y * y + 1.0).sqrt();
            let lat = (up / norm).clamp(-1.0, 1.0).asin();
            let lon = lon0 + x.atan2(fwd);
            let col = w * lon / std::f64::consts::TAU;
            let row = h * (0.5 - lat / std::f64::consts::PI);
            data.push(sample_erp(plane, row, col));
        }
    }
    Raster::new(size, size, 1, data)
}

/// Keeps the central third of a plane: rows `[⌊Y/3⌋, ⌊2Y/3⌋)`, columns
/// `[⌊X/3⌋, ⌊2X/3⌋)`.
pub fn center_crop(plane: &Raster) -> Result<Raster> {
    let (x, y) = (plane.width(), plane.height());
    if x < 3 || y < 3 {
        return Err(Error::TooSmall {
            width: x,
            height: y,
            min_width: 3,
            min_height: 3,
        });
    }
    plane.crop(y / 3..2 * y / 3, x / 3..2 * x / 3)
}
