//! Depth quality features: subband statistics of the color-decomposed
//! interocular discrepancy map.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, SamplingScheme};
use crate::raster::{self, Geometry, Raster, StereoImage};
use crate::wavelet::{haar_decompose, SubbandQuad};

pub const DEPTH_FEATURE_DIM: usize = 24;
pub const DEFAULT_ENTROPY_BINS: usize = 256;

const CHANNEL_NAMES: [&str; 3] = ["l", "a", "b"];
const BAND_NAMES: [&str; 4] = ["LL", "HL", "LH", "HH"];

/// How the analysis regions are chosen from the discrepancy planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionMode {
    Omnidirectional(SamplingScheme),
    PlanarCenterCrop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub mode: ExtractionMode,
    pub fov: f64,
    /// Viewport edge length; `None` picks `min(height / 2, 512)`.
    pub out_size: Option<usize>,
    pub entropy_bins: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self::omnidirectional(SamplingScheme::default())
    }
}

impl ExtractionConfig {
    pub fn omnidirectional(scheme: SamplingScheme) -> Self {
        Self {
            mode: ExtractionMode::Omnidirectional(scheme),
            fov: geometry::DEFAULT_FOV_DEG,
            out_size: None,
            entropy_bins: DEFAULT_ENTROPY_BINS,
        }
    }

    pub fn planar() -> Self {
        Self {
            mode: ExtractionMode::PlanarCenterCrop,
            ..Self::default()
        }
    }

    /// Default configuration for a geometry, keeping this config's fov,
    /// size and bins.
    pub fn for_geometry(&self, geometry: Geometry) -> Self {
        let mode = match (geometry, self.mode) {
            (Geometry::Erp, ExtractionMode::Omnidirectional(s)) => ExtractionMode::Omnidirectional(s),
            (Geometry::Erp, ExtractionMode::PlanarCenterCrop) => {
                ExtractionMode::Omnidirectional(SamplingScheme::default())
            }
            (Geometry::Planar, _) => ExtractionMode::PlanarCenterCrop,
        };
        Self { mode, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entropy_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "entropy bins must be at least 2, got {}",
                self.entropy_bins
            )));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(Error::InvalidArgument(format!("fov must be in (0, 180), got {}", self.fov)));
        }
        if let Some(size) = self.out_size {
            if size < geometry::MIN_VIEWPORT {
                return Err(Error::InvalidArgument(format!("viewport size {size} is below 16")));
            }
        }
        if let ExtractionMode::Omnidirectional(SamplingScheme::EquatorialAdaptive(0)) = self.mode {
            return Err(Error::InvalidArgument("viewport count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn viewport_size(&self, erp_height: usize) -> usize {
        self.out_size
            .unwrap_or_else(|| geometry::default_viewport_size(erp_height))
    }

    fn check_geometry(&self, geometry: Geometry) -> Result<()> {
        match (self.mode, geometry) {
            (ExtractionMode::Omnidirectional(_), Geometry::Erp)
            | (ExtractionMode::PlanarCenterCrop, Geometry::Planar) => Ok(()),
            (mode, geometry) => Err(Error::InvalidArgument(format!(
                "extraction mode {mode:?} does not apply to {geometry} images"
            ))),
        }
    }

    /// Analysis regions of one single-channel plane: gnomonic viewports for
    /// ERP input, the central third for planar input.
    pub fn regions(&self, plane: &Raster) -> Result<Vec<Raster>> {
        match self.mode {
            ExtractionMode::Omnidirectional(scheme) => {
                let size = self.viewport_size(plane.height());
                scheme
                    .centers(self.fov, size)?
                    .iter()
                    .map(|spec| geometry::extract_viewport(plane, spec))
                    .collect()
            }
            ExtractionMode::PlanarCenterCrop => Ok(vec![geometry::center_crop(plane)?]),
        }
    }
}

/// The 24 depth features, ordered channel-major within each statistic:
/// `std(l: LL HL LH HH), std(a: ..), std(b: ..), ent(l: ..), ent(a: ..), ent(b: ..)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthFeatureVector(pub [f64; DEPTH_FEATURE_DIM]);

impl DepthFeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Standard deviations of the four luminance subbands.
    pub fn luminance_std(&self) -> &[f64] {
        &self.0[..4]
    }

    pub fn names() -> Vec<String> {
        let mut names = Vec::with_capacity(DEPTH_FEATURE_DIM);
        for stat in ["std", "ent"] {
            for ch in CHANNEL_NAMES {
                for band in BAND_NAMES {
                    names.push(format!("{stat}_{ch}_{band}"));
                }
            }
        }
        names
    }

    pub fn from_channel_stats(per_channel: &[[f64; 8]; 3]) -> Self {
        let mut out = [0.0; DEPTH_FEATURE_DIM];
        for (c, stats) in per_channel.iter().enumerate() {
            out[c * 4..c * 4 + 4].copy_from_slice(&stats[..4]);
            out[12 + c * 4..12 + c * 4 + 4].copy_from_slice(&stats[4..]);
        }
        Self(out)
    }
}

/// Population standard deviation; exactly zero for a constant plane.
pub fn subband_std(plane: &Raster) -> f64 {
    let data = plane.data();
    let (lo, hi) = plane.min_max();
    if data.is_empty() || lo == hi {
        return 0.0;
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    (data.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Base-2 Shannon entropy of a `bins`-bin histogram spanning the plane's
/// value range. A constant plane has entropy zero.
pub fn subband_entropy(plane: &Raster, bins: usize) -> f64 {
    let bins = bins.max(2);
    let data = plane.data();
    let (lo, hi) = plane.min_max();
    if data.is_empty() || lo == hi {
        return 0.0;
    }
    let scale = bins as f64 / (hi - lo);
    let mut counts = vec![0usize; bins];
    for &v in data {
        let idx = (((v - lo) * scale) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = data.len() as f64;
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// `[std(LL), std(HL), std(LH), std(HH), ent(LL), .., ent(HH)]`.
pub fn viewport_statistics(quad: &SubbandQuad, bins: usize) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (i, band) in quad.bands().into_iter().enumerate() {
        out[i] = subband_std(band);
        out[4 + i] = subband_entropy(band, bins);
    }
    out
}

/// Element-wise mean over viewports.
pub fn aggregate_over_viewports(per_viewport: &[[f64; 8]]) -> Result<[f64; 8]> {
    if per_viewport.is_empty() {
        return Err(Error::InvalidArgument("no viewport statistics to aggregate".into()));
    }
    let n = per_viewport.len() as f64;
    let mut out = [0.0; 8];
    for stats in per_viewport {
        for (acc, v) in out.iter_mut().zip(stats) {
            *acc += v;
        }
    }
    Ok(out.map(|s| s / n))
}

/// Statistics of one color plane of the discrepancy map.
pub fn plane_statistics(plane: &Raster, config: &ExtractionConfig) -> Result<[f64; 8]> {
    let per_region = config
        .regions(plane)?
        .iter()
        .map(|region| Ok(viewport_statistics(&haar_decompose(region)?, config.entropy_bins)))
        .collect::<Result<Vec<_>>>()?;
    aggregate_over_viewports(&per_region)
}

/// Features of an already color-decomposed discrepancy map (3-channel Lab).
pub fn discrepancy_features(lab: &Raster, config: &ExtractionConfig) -> Result<DepthFeatureVector> {
    config.validate()?;
    if lab.channels() != 3 {
        return Err(Error::Channels {
            expected: 3,
            got: lab.channels(),
        });
    }
    let mut per_channel = [[0.0; 8]; 3];
    for (c, stats) in per_channel.iter_mut().enumerate() {
        *stats = plane_statistics(&lab.channel(c)?, config)?;
    }
    Ok(DepthFeatureVector::from_channel_stats(&per_channel))
}

/// Full extraction: |left − right| → Lab → regions → Haar → statistics.
pub fn depth_features(stereo: &StereoImage, config: &ExtractionConfig) -> Result<DepthFeatureVector> {
    config.check_geometry(stereo.geometry())?;
    let diff = raster::abs_diff(stereo.left(), stereo.right())?;
    let lab = raster::rgb_to_lab(&diff)?;
    discrepancy_features(&lab, config)
}

pub fn write_csv_header<W: Write>(out: &mut W, names: &[String], with_id: bool) -> std::io::Result<()> {
    if with_id {
        write!(out, "id,")?;
    }
    writeln!(out, "{}", names.join(","))
}

/// One CSV row using shortest round-trip float formatting.
pub fn write_csv_row<W: Write>(out: &mut W, id: Option<&str>, values: &[f64]) -> std::io::Result<()> {
    if let Some(id) = id {
        write!(out, "{id},")?;
    }
    let cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", cells.join(","))
}
