//! Deterministic synthetic stereo pairs with controlled disparity and
//! distortion, written out as a labelled dataset.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetEntry};
use crate::error::{Error, Result};
use crate::raster::{Geometry, Raster, StereoImage};

/// Lattice spacings of the value-noise octaves, coarse to fine.
const OCTAVE_CELLS: [usize; 6] = [64, 32, 16, 8, 4, 2];
const OCTAVE_GAIN: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Distortion {
    None,
    /// 8×8 block DCT quantization with IJG-scaled tables, quality 1..=100.
    JpegLike(u8),
    GaussianBlur(f64),
    WhiteNoise(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionKind {
    None,
    Jpeg,
    Blur,
    Noise,
}

impl DistortionKind {
    pub fn with_level(self, level: f64) -> Result<Distortion> {
        let d = match self {
            DistortionKind::None => Distortion::None,
            DistortionKind::Jpeg => {
                if !(1.0..=100.0).contains(&level) || level.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("JPEG quality must be an integer in 1..=100, got {level}")));
                }
                Distortion::JpegLike(level as u8)
            }
            DistortionKind::Blur => Distortion::GaussianBlur(level),
            DistortionKind::Noise => Distortion::WhiteNoise(level),
        };
        d.validate()?;
        Ok(d)
    }
}

impl std::str::FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DistortionKind::None),
            "jpeg" | "jpeglike" => Ok(DistortionKind::Jpeg),
            "blur" | "gaussianblur" => Ok(DistortionKind::Blur),
            "noise" | "whitenoise" => Ok(DistortionKind::Noise),
            other => Err(Error::InvalidArgument(format!("unknown distortion '{other}'"))),
        }
    }
}

impl Distortion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distortion::None => Ok(()),
            Distortion::JpegLike(q) if (1..=100).contains(&q) => Ok(()),
            Distortion::GaussianBlur(s) | Distortion::WhiteNoise(s) if s.is_finite() && s >= 0.0 => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid distortion level {other:?}"))),
        }
    }

    /// MOS-like image quality in `[1, 5]`, higher is better.
    pub fn quality_score(&self) -> f64 {
        match *self {
            Distortion::None => 5.0,
            Distortion::JpegLike(q) => 1.0 + 4.0 * (f64::from(q) - 1.0) / 99.0,
            Distortion::GaussianBlur(s) => 5.0 - 4.0 * (s / 3.0).min(1.0),
            Distortion::WhiteNoise(s) => 5.0 - 4.0 * (s / 50.0).min(1.0),
        }
    }

    /// The milder level used for the second eye of an asymmetric pair.
    pub fn milder(&self) -> Distortion {
        match *self {
            Distortion::None => Distortion::None,
            Distortion::JpegLike(q) => Distortion::JpegLike(((u16::from(q) + 100) / 2) as u8),
            Distortion::GaussianBlur(s) => Distortion::GaussianBlur(s / 2.0),
            Distortion::WhiteNoise(s) => Distortion::WhiteNoise(s / 2.0),
        }
    }
}

fn lattice(rng: &mut ChaCha8Rng, cols: usize, rows: usize) -> Vec<f64> {
    (0..cols * rows).map(|_| rng.random::<f64>()).collect()
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// One value-noise plane in roughly `[-1, 1]`; horizontally periodic when
/// `width` is a multiple of every octave cell.
fn value_noise(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    let mut amp = 1.0;
    let mut total = 0.0;
    for &cell in &OCTAVE_CELLS {
        let cols = width.div_ceil(cell).max(1);
        let rows = height.div_ceil(cell) + 1;
        let grid = lattice(rng, cols, rows);
        for r in 0..height {
            let fy = r as f64 / cell as f64;
            let y0 = fy.floor() as usize;
            let ty = smooth(fy - y0 as f64);
            for c in 0..width {
                let fx = c as f64 / cell as f64;
                let x0 = fx.floor() as usize;
                let tx = smooth(fx - x0 as f64);
                let (xa, xb) = (x0 % cols, (x0 + 1) % cols);
                let (ya, yb) = (y0.min(rows - 1), (y0 + 1).min(rows - 1));
                let top = grid[ya * cols + xa] * (1.0 - tx) + grid[ya * cols + xb] * tx;
                let bot = grid[yb * cols + xa] * (1.0 - tx) + grid[yb * cols + xb] * tx;
                out[r * width + c] += amp * (2.0 * (top * (1.0 - ty) + bot * ty) - 1.0);
            }
        }
        total += amp;
        amp *= OCTAVE_GAIN;
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Deterministic multi-octave value-noise color texture with integer
/// samples in `[0, 255]`.
pub fn generate_texture(seed: u64, width: usize, height: usize) -> Result<Raster> {
    if width < 64 || height < 64 {
        return Err(Error::TooSmall {
            width,
            height,
            min_width: 64,
            min_height: 64,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = value_noise(&mut rng, width, height);
    let chroma: Vec<Vec<f64>> = (0..3).map(|_| value_noise(&mut rng, width, height)).collect();
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
    let mut data = Vec::with_capacity(width * height * 3);
    for i in 0..width * height {
        for ch in 0..3 {
            let v = 128.0 + tint[ch] + 150.0 * base[i] + 60.0 * chroma[ch][i];
            data.push(v.round().clamp(0.0, 255.0));
        }
    }
    Raster::new(width, height, 3, data)
}

/// Shifts the middle third of rows right by `disparity_px` in the right
/// view; the remaining rows are identical in both views.
pub fn render_stereopair(texture: &Raster, disparity_px: usize, geometry: Geometry) -> Result<StereoImage> {
    let (w, h) = (texture.width(), texture.height());
    if 4 * disparity_px >= w {
        return Err(Error::InvalidArgument(format!(
            "disparity {disparity_px} px must be below a quarter of the width ({w})"
        )));
    }
    let mut right = texture.clone();
    for r in h / 3..2 * h / 3 {
        for c in 0..w {
            let src = match geometry {
                Geometry::Erp => (c + w - disparity_px) % w,
                Geometry::Planar => c.saturating_sub(disparity_px),
            };
            for ch in 0..texture.channels() {
                right.set(r, c, ch, texture.get(r, src, ch));
            }
        }
    }
    StereoImage::new(texture.clone(), right, geometry)
}

fn gaussian_blur(image: &Raster, sigma: f64) -> Raster {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    let (w, h, ch) = image.dims();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = image.clone();
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let v = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, wt)| wt * image.get(r, clampi(c as isize + i as isize - radius, w), k))
                    .sum();
                tmp.set(r, c, k, v);
            }
        }
    }
    let mut out = tmp.clone();
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let v = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, wt)| wt * tmp.get(clampi(r as isize + i as isize - radius, h), c, k))
                    .sum();
                out.set(r, c, k, v);
            }
        }
    }
    out
}

const JPEG_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

const JPEG_CHROMA: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99,
];

fn scaled_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = u32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    std::array::from_fn(|i| ((u32::from(base[i]) * scale + 50) / 100).clamp(1, 255) as f64)
}

fn dct_basis() -> [[f64; 8]; 8] {
    std::array::from_fn(|u| {
        let cu = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        std::array::from_fn(|x| cu * (((2 * x + 1) * u) as f64 * PI / 16.0).cos())
    })
}

fn jpeg_plane(plane: &mut [f64], w: usize, h: usize, table: &[f64; 64], basis: &[[f64; 8]; 8]) {
    let mut block = [[0.0; 8]; 8];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for (y, row) in block.iter_mut().enumerate() {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = plane[(by + y).min(h - 1) * w + (bx + x).min(w - 1)] - 128.0;
                }
            }
            let mut coef = [[0.0; 8]; 8];
            for u in 0..8 {
                for v in 0..8 {
                    let mut s = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            s += basis[u][y] * basis[v][x] * block[y][x];
                        }
                    }
                    coef[u][v] = (s / table[u * 8 + v]).round() * table[u * 8 + v];
                }
            }
            for y in 0..8 {
                for x in 0..8 {
                    if by + y >= h || bx + x >= w {
                        continue;
                    }
                    let mut s = 0.0;
                    for u in 0..8 {
                        for v in 0..8 {
                            s += basis[u][y] * basis[v][x] * coef[u][v];
                        }
                    }
                    plane[(by + y) * w + bx + x] = s + 128.0;
                }
            }
        }
    }
}

fn jpeg_like(image: &Raster, quality: u8) -> Raster {
    let (w, h, ch) = image.dims();
    let basis = dct_basis();
    if ch == 1 {
        let mut y = image.data().to_vec();
        jpeg_plane(&mut y, w, h, &scaled_table(&JPEG_LUMA, quality), &basis);
        return Raster::new(w, h, 1, y).expect("same shape");
    }
    let n = w * h;
    let (mut yp, mut cb, mut cr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, px) in image.data().chunks_exact(3).enumerate() {
        let (r, g, b) = (px[0], px[1], px[2]);
        yp[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        cb[i] = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
        cr[i] = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    }
    jpeg_plane(&mut yp, w, h, &scaled_table(&JPEG_LUMA, quality), &basis);
    let chroma = scaled_table(&JPEG_CHROMA, quality);
    jpeg_plane(&mut cb, w, h, &chroma, &basis);
    jpeg_plane(&mut cr, w, h, &chroma, &basis);
    let mut data = Vec::with_capacity(3 * n);
    for i in 0..n {
        let (y, u, v) = (yp[i], cb[i] - 128.0, cr[i] - 128.0);
        data.push(y + 1.402 * v);
        data.push(y - 0.344_136 * u - 0.714_136 * v);
        data.push(y + 1.772 * u);
    }
    Raster::new(w, h, 3, data).expect("same shape")
}

/// Applies a distortion and quantizes the result to 8-bit values.
/// `seed` drives the white-noise generator and is ignored otherwise.
pub fn distort(image: &Raster, distortion: &Distortion, seed: u64) -> Result<Raster> {
    distortion.validate()?;
    let out = match *distortion {
        Distortion::None => image.clone(),
        Distortion::GaussianBlur(s) if s == 0.0 => image.clone(),
        Distortion::GaussianBlur(s) => gaussian_blur(image, s),
        Distortion::JpegLike(q) => jpeg_like(image, q),
        Distortion::WhiteNoise(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut out = image.clone();
            out.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            out
        }
    };
    Ok(out.map(|v| v.round().clamp(0.0, 255.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub geometry: Geometry,
    pub width: usize,
    pub height: usize,
    pub disparity_levels: Vec<usize>,
    pub distortion: DistortionKind,
    pub distortion_levels: Vec<f64>,
    pub symmetric: bool,
    /// Textures (contents) per disparity/distortion combination.
    pub count_per_level: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            geometry: Geometry::Erp,
            width: 512,
            height: 256,
            disparity_levels: vec![0, 4, 8, 16, 32],
            distortion: DistortionKind::Jpeg,
            distortion_levels: vec![30.0, 70.0],
            symmetric: true,
            count_per_level: 6,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidArgument(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value '{value}' for {key}")))
}

impl SynthConfig {
    /// Parses flat `key = value` text; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SynthConfig::default();
        let mut height_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => cfg.seed = parse_one(key, value)?,
                "geometry" => cfg.geometry = value.parse()?,
                "width" => cfg.width = parse_one(key, value)?,
                "height" => {
                    cfg.height = parse_one(key, value)?;
                    height_set = true;
                }
                "disparity_levels" => cfg.disparity_levels = parse_list(key, value)?,
                "distortion" => cfg.distortion = value.parse()?,
                "distortion_levels" => cfg.distortion_levels = parse_list(key, value)?,
                "symmetric" => cfg.symmetric = parse_one(key, value)?,
                "count_per_level" => cfg.count_per_level = parse_one(key, value)?,
                other => return Err(Error::InvalidArgument(format!("unknown key '{other}'"))),
            }
        }
        if !height_set && cfg.geometry == Geometry::Erp {
            cfg.height = cfg.width / 2;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "seed={}\ngeometry={}\nwidth={}\nheight={}\ndisparity_levels={}\ndistortion={}\ndistortion_levels={}\nsymmetric={}\ncount_per_level={}\n",
            self.seed,
            self.geometry,
            self.width,
            self.height,
            join(self.disparity_levels.iter().map(|d| d.to_string()).collect()),
            serde_json::to_value(self.distortion).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            join(self.distortion_levels.iter().map(|d| d.to_string()).collect()),
            self.symmetric,
            self.count_per_level,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidArgument(format!(
                "image size {}x{} is below the 64x64 minimum",
                self.width, self.height
            )));
        }
        if self.geometry == Geometry::Erp && self.width != 2 * self.height {
            return Err(Error::Aspect {
                width: self.width,
                height: self.height,
            });
        }
        if self.disparity_levels.is_empty() {
            return Err(Error::InvalidArgument("no disparity levels".into()));
        }
        if let Some(d) = self.disparity_levels.iter().find(|&&d| 4 * d >= self.width) {
            return Err(Error::InvalidArgument(format!("disparity {d} too large for width {}", self.width)));
        }
        if self.count_per_level == 0 {
            return Err(Error::InvalidArgument("count_per_level must be positive".into()));
        }
        if self.distortion != DistortionKind::None && self.distortion_levels.is_empty() {
            return Err(Error::InvalidArgument("no distortion levels".into()));
        }
        for &level in &self.distortion_levels {
            self.distortion.with_level(level)?;
        }
        Ok(())
    }

    fn distortions(&self) -> Result<Vec<Distortion>> {
        if self.distortion == DistortionKind::None {
            return Ok(vec![Distortion::None]);
        }
        self.distortion_levels
            .iter()
            .map(|&l| self.distortion.with_level(l))
            .collect()
    }

    /// MOS-like depth label in `[1, 5]`, linear in disparity.
    pub fn depth_label(&self, disparity: usize) -> f64 {
        let max = self.disparity_levels.iter().copied().max().unwrap_or(0);
        if max == 0 {
            1.0
        } else {
            1.0 + 4.0 * disparity as f64 / max as f64
        }
    }
}

/// One planned synthetic entry.
#[derive(Debug, Clone)]
struct Plan {
    id: String,
    content: usize,
    disparity: usize,
    left: Distortion,
    right: Distortion,
    index: usize,
}

fn texture_seed(seed: u64, content: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(content as u64 + 1)
}

/// Renders every planned pair in memory: `(entry, reference, distorted)`.
pub fn render_dataset(config: &SynthConfig) -> Result<Vec<(DatasetEntry, StereoImage, StereoImage)>> {
    config.validate()?;
    let distortions = config.distortions()?;
    let mut plans = Vec::new();
    for content in 0..config.count_per_level {
        for &disparity in &config.disparity_levels {
            for (level, dist) in distortions.iter().enumerate() {
                let right = if config.symmetric { *dist } else { dist.milder() };
                plans.push(Plan {
                    id: format!("c{content:02}_d{disparity:03}_l{level}"),
                    content,
                    disparity,
                    left: *dist,
                    right,
                    index: plans.len(),
                });
            }
        }
    }
    let textures: Vec<Raster> = (0..config.count_per_level)
        .into_par_iter()
        .map(|c| generate_texture(texture_seed(config.seed, c), config.width, config.height))
        .collect::<Result<_>>()?;
    plans
        .par_iter()
        .map(|p| {
            let reference = render_stereopair(&textures[p.content], p.disparity, config.geometry)?;
            let noise_seed = texture_seed(config.seed ^ 0x5EED, p.index) << 1;
            let left = distort(reference.left(), &p.left, noise_seed)?;
            let right = distort(reference.right(), &p.right, noise_seed | 1)?;
            let distorted = StereoImage::new(left, right, config.geometry)?;
            let depth = config.depth_label(p.disparity);
            let quality = 0.5 * (p.left.quality_score() + p.right.quality_score());
            let entry = DatasetEntry {
                id: p.id.clone(),
                left: PathBuf::from(format!("images/{}_L.png", p.id)),
                right: PathBuf::from(format!("images/{}_R.png", p.id)),
                ref_left: Some(PathBuf::from(format!("images/ref_c{:02}_d{:03}_L.png", p.content, p.disparity))),
                ref_right: Some(PathBuf::from(format!("images/ref_c{:02}_d{:03}_R.png", p.content, p.disparity))),
                content_id: format!("c{:02}", p.content),
                mos_depth: depth,
                mos_overall: Some(0.5 * (depth + quality)),
            };
            Ok((entry, reference, distorted))
        })
        .collect()
}

/// Writes PNG pairs, undistorted references and `manifest.csv` under
/// `out_dir`, returning the loaded dataset.
pub fn build_dataset(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Dataset> {
    let out_dir = out_dir.as_ref();
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let rendered = render_dataset(config)?;
    rendered.par_iter().try_for_each(|(entry, reference, distorted)| -> Result<()> {
        distorted.left().save_png(out_dir.join(&entry.left))?;
        distorted.right().save_png(out_dir.join(&entry.right))?;
        let (rl, rr) = (entry.ref_left.as_ref().expect("set"), entry.ref_right.as_ref().expect("set"));
        // Every distortion level shares the reference; only one writer per file.
        if entry.id.ends_with("_l0") {
            reference.left().save_png(out_dir.join(rl))?;
            reference.right().save_png(out_dir.join(rr))?;
        }
        Ok(())
    })?;
    let entries: Vec<DatasetEntry> = rendered.into_iter().map(|(e, ..)| e).collect();
    let manifest = out_dir.join("manifest.csv");
    crate::dataset::write_manifest(&manifest, &entries)?;
    let cfg_path = out_dir.join("synth.cfg");
    std::fs::write(&cfg_path, config.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    Dataset::load(&manifest)
}
