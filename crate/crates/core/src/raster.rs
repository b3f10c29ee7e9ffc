//! Raster storage, stereo pairs, image I/O and color conversion.

use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row-major, interleaved floating-point image.
///
/// 8-bit images are held with their original 0–255 sample values. Rasters
/// may be as small as 1×1 (a single-level Haar decomposition of a 2×2 plane
/// yields 1×1 subbands); full images are validated to be at least 2×2 by
/// [`StereoImage::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::TooSmall {
                width,
                height,
                min_width: 1,
                min_height: 1,
            });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel raster from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, 1, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    /// Extracts one channel as a single-channel raster.
    pub fn channel(&self, channel: usize) -> Result<Raster> {
        if channel >= self.channels {
            return Err(Error::InvalidArgument(format!(
                "channel {channel} out of range for {}-channel raster",
                self.channels
            )));
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[channel])
            .collect();
        Raster::new(self.width, self.height, 1, data)
    }

    /// Copies the half-open window `rows × cols` into a new raster.
    pub fn crop(
        &self,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> Result<Raster> {
        if rows.end > self.height || cols.end > self.width || rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "crop {rows:?}x{cols:?} outside {}x{}",
                self.height, self.width
            )));
        }
        let ch = self.channels;
        let mut data = Vec::with_capacity(rows.len() * cols.len() * ch);
        for r in rows.clone() {
            let start = (r * self.width + cols.start) * ch;
            let end = (r * self.width + cols.end) * ch;
            data.extend_from_slice(&self.data[start..end]);
        }
        Raster::new(cols.len(), rows.len(), ch, data)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn from_rgb8(img: &RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| f64::from(v)).collect();
        Raster::new(w as usize, h as usize, 3, data)
    }

    /// Rounds and clamps samples to 8 bits.
    pub fn to_dynamic_image(&self) -> DynamicImage {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        match self.channels {
            1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("sized buffer")),
            _ => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("sized buffer")),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_dynamic_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Encode {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Storage geometry of a stereo pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Equirectangular omnidirectional image.
    Erp,
    Planar,
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "erp" => Ok(Geometry::Erp),
            "planar" => Ok(Geometry::Planar),
            other => Err(Error::InvalidArgument(format!("unknown geometry '{other}'"))),
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Geometry::Erp => "erp",
            Geometry::Planar => "planar",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoImage {
    left: Raster,
    right: Raster,
    geometry: Geometry,
}

impl StereoImage {
    pub fn new(left: Raster, right: Raster, geometry: Geometry) -> Result<Self> {
        for view in [&left, &right] {
            if view.channels() != 3 {
                return Err(Error::Channels {
                    expected: 3,
                    got: view.channels(),
                });
            }
            if view.width() < 2 || view.height() < 2 {
                return Err(Error::TooSmall {
                    width: view.width(),
                    height: view.height(),
                    min_width: 2,
                    min_height: 2,
                });
            }
        }
        if left.dims() != right.dims() {
            return Err(Error::DimensionMismatch {
                left: left.dims(),
                right: right.dims(),
            });
        }
        if geometry == Geometry::Erp && left.width() != 2 * left.height() {
            return Err(Error::Aspect {
                width: left.width(),
                height: left.height(),
            });
        }
        Ok(Self {
            left,
            right,
            geometry,
        })
    }

    pub fn left(&self) -> &Raster {
        &self.left
    }

    pub fn right(&self) -> &Raster {
        &self.right
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn width(&self) -> usize {
        self.left.width()
    }

    pub fn height(&self) -> usize {
        self.left.height()
    }

    /// Swaps the two views.
    pub fn swapped(&self) -> StereoImage {
        StereoImage {
            left: self.right.clone(),
            right: self.left.clone(),
            geometry: self.geometry,
        }
    }
}

fn load_rgb8(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "{}: only 8-bit images are supported, got {other:?}",
                path.display()
            )))
        }
    }
    Raster::from_rgb8(&img.to_rgb8())
}

/// Loads and validates a stereo pair from two PNG/JPEG files.
pub fn load_stereo(
    left_path: impl AsRef<Path>,
    right_path: impl AsRef<Path>,
    geometry: Geometry,
) -> Result<StereoImage> {
    let left = load_rgb8(left_path.as_ref())?;
    let right = load_rgb8(right_path.as_ref())?;
    StereoImage::new(left, right, geometry)
}

/// Per-pixel, per-channel absolute difference.
pub fn abs_diff(left: &Raster, right: &Raster) -> Result<Raster> {
    if left.dims() != right.dims() {
        return Err(Error::DimensionMismatch {
            left: left.dims(),
            right: right.dims(),
        });
    }
    let data = left
        .data()
        .iter()
        .zip(right.data())
        .map(|(&a, &b)| (a - b).abs())
        .collect();
    Raster::new(left.width(), left.height(), left.channels(), data)
}

// sRGB (D65) linear RGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// D65 reference white, taken as the row sums of RGB_TO_XYZ so that the
// gray axis maps to a = b = 0.
const WHITE_X: f64 = 0.412_456_4 + 0.357_576_1 + 0.180_437_5;
const WHITE_Y: f64 = 0.212_672_9 + 0.715_152_2 + 0.072_175_0;
const WHITE_Z: f64 = 0.019_333_9 + 0.119_192_0 + 0.950_304_1;

#[inline]
fn srgb_to_linear(v: f64) -> f64 {
    let c = v / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one 8-bit-range sRGB pixel to CIE 1976 L*a*b* (D65).
pub fn rgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = std::array::from_fn(|i| {
        RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2]
    });
    let fx = lab_f(xyz[0] / WHITE_X);
    let fy = lab_f(xyz[1] / WHITE_Y);
    let fz = lab_f(xyz[2] / WHITE_Z);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts a 3-channel sRGB raster (0–255) to a 3-channel L*a*b* raster.
pub fn rgb_to_lab(rgb: &Raster) -> Result<Raster> {
    if rgb.channels() != 3 {
        return Err(Error::Channels {
            expected: 3,
            got: rgb.channels(),
        });
    }
    let mut data = Vec::with_capacity(rgb.len());
    for px in rgb.data().chunks_exact(3) {
        data.extend_from_slice(&rgb_pixel_to_lab([px[0], px[1], px[2]]));
    }
    Raster::new(rgb.width(), rgb.height(), 3, data)
}

/// ITU-R BT.601 luma of a 3-channel raster.
pub fn luma(rgb: &Raster) -> Result<Raster> {
    if rgb.channels() != 3 {
        return Err(Error::Channels {
            expected: 3,
            got: rgb.channels(),
        });
    }
    let data = rgb
        .data()
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect();
    Raster::new(rgb.width(), rgb.height(), 1, data)
}
