//! Full-reference image features for overall quality: PSNR and MS-SSIM on
//! local viewports, combined with the depth features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{depth_features, DepthFeatureVector, ExtractionConfig, ExtractionMode, DEPTH_FEATURE_DIM};
use crate::raster::{luma, Raster, StereoImage};

pub const OVERALL_FEATURE_DIM: usize = DEPTH_FEATURE_DIM + 2;
pub const DEFAULT_PSNR_CAP: f64 = 100.0;

const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const DYNAMIC_RANGE: f64 = 255.0;

/// Smallest edge for which five dyadic scales still fit an 11×11 window.
pub const MS_SSIM_MIN_SIZE: usize = SSIM_WINDOW << (MS_SSIM_WEIGHTS.len() - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IqaMetric {
    Psnr,
    MsSsim,
}

impl std::str::FromStr for IqaMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psnr" => Ok(IqaMetric::Psnr),
            "msssim" | "ms-ssim" | "ms_ssim" => Ok(IqaMetric::MsSsim),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

fn check_same_plane(a: &Raster, b: &Raster) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    if a.channels() != 1 {
        return Err(Error::Channels {
            expected: 1,
            got: a.channels(),
        });
    }
    Ok(())
}

pub fn psnr(reference: &Raster, distorted: &Raster) -> Result<f64> {
    psnr_with_cap(reference, distorted, DEFAULT_PSNR_CAP)
}

/// PSNR in dB for 8-bit range data; zero error returns `cap`.
pub fn psnr_with_cap(reference: &Raster, distorted: &Raster, cap: f64) -> Result<f64> {
    check_same_plane(reference, distorted)?;
    let mse = reference
        .data()
        .iter()
        .zip(distorted.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(cap);
    }
    Ok((10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()).min(cap))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k: [f64; SSIM_WINDOW] =
        std::array::from_fn(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable "valid" Gaussian filtering.
fn filter_valid(data: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            horiz[r * ow + c] = kernel.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * horiz[(r + i) * ow + c])
                .sum();
        }
    }
    (out, ow, oh)
}

/// Mean luminance term and mean contrast-structure term at one scale.
fn ssim_terms(a: &[f64], b: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> (f64, f64) {
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mu_a, ow, oh) = filter_valid(a, w, h, kernel);
    let (mu_b, ..) = filter_valid(b, w, h, kernel);
    let (e_aa, ..) = filter_valid(&aa, w, h, kernel);
    let (e_bb, ..) = filter_valid(&bb, w, h, kernel);
    let (e_ab, ..) = filter_valid(&ab, w, h, kernel);
    let n = (ow * oh) as f64;
    let mut l_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        l_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += (2.0 * cov + c2) / (var_a + var_b + c2);
    }
    (l_sum / n, cs_sum / n)
}

fn downsample2(data: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for r in 0..nh {
        for c in 0..nw {
            let i = 2 * r * w + 2 * c;
            out.push((data[i] + data[i + 1] + data[i + w] + data[i + w + 1]) * 0.25);
        }
    }
    (out, nw, nh)
}

/// Five-scale MS-SSIM with an 11×11 Gaussian window (σ = 1.5), 2×2 average
/// downsampling between scales and dynamic range 255.
///
/// Negative per-scale terms are clamped to zero so the result stays in
/// `[0, 1]`. The computation is symmetric in its two arguments.
pub fn ms_ssim(reference: &Raster, distorted: &Raster) -> Result<f64> {
    check_same_plane(reference, distorted)?;
    let (w, h) = (reference.width(), reference.height());
    if w < MS_SSIM_MIN_SIZE || h < MS_SSIM_MIN_SIZE {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min_width: MS_SSIM_MIN_SIZE,
            min_height: MS_SSIM_MIN_SIZE,
        });
    }
    let kernel = gaussian_kernel();
    let mut a = reference.data().to_vec();
    let mut b = distorted.data().to_vec();
    let (mut cw, mut ch) = (w, h);
    let mut score = 1.0;
    let last = MS_SSIM_WEIGHTS.len() - 1;
    for (scale, weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (l, cs) = ssim_terms(&a, &b, cw, ch, &kernel);
        score *= cs.max(0.0).powf(*weight);
        if scale == last {
            score *= l.max(0.0).powf(*weight);
        } else {
            let (na, nw, nh) = downsample2(&a, cw, ch);
            let (nb, ..) = downsample2(&b, cw, ch);
            a = na;
            b = nb;
            cw = nw;
            ch = nh;
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Computes one metric on a pair of single-channel planes.
pub fn quality(metric: IqaMetric, reference: &Raster, distorted: &Raster) -> Result<f64> {
    match metric {
        IqaMetric::Psnr => psnr(reference, distorted),
        IqaMetric::MsSsim => ms_ssim(reference, distorted),
    }
}

fn check_pair(reference: &StereoImage, distorted: &StereoImage) -> Result<()> {
    if reference.left().dims() != distorted.left().dims() {
        return Err(Error::DimensionMismatch {
            left: reference.left().dims(),
            right: distorted.left().dims(),
        });
    }
    if reference.geometry() != distorted.geometry() {
        return Err(Error::InvalidArgument(format!(
            "reference is {} but distorted is {}",
            reference.geometry(),
            distorted.geometry()
        )));
    }
    Ok(())
}

/// Mean local quality of each eye: `[q(left), q(right)]`.
///
/// ERP input is compared on the same viewports used for depth features;
/// planar input is compared on the whole luma view.
pub fn local_image_features(
    reference: &StereoImage,
    distorted: &StereoImage,
    metric: IqaMetric,
    config: &ExtractionConfig,
) -> Result<[f64; 2]> {
    check_pair(reference, distorted)?;
    let mut config = config.for_geometry(distorted.geometry());
    if metric == IqaMetric::MsSsim {
        // Five dyadic scales need at least 176 px per side.
        config.out_size = Some(config.viewport_size(distorted.height()).max(MS_SSIM_MIN_SIZE));
    }
    let mut out = [0.0; 2];
    let eyes = [
        (reference.left(), distorted.left()),
        (reference.right(), distorted.right()),
    ];
    for (slot, (r, d)) in out.iter_mut().zip(eyes) {
        let (yr, yd) = (luma(r)?, luma(d)?);
        let (regions_r, regions_d) = match config.mode {
            ExtractionMode::Omnidirectional(_) => (config.regions(&yr)?, config.regions(&yd)?),
            ExtractionMode::PlanarCenterCrop => (vec![yr], vec![yd]),
        };
        let mut sum = 0.0;
        for (vr, vd) in regions_r.iter().zip(&regions_d) {
            sum += quality(metric, vr, vd)?;
        }
        *slot = sum / regions_r.len() as f64;
    }
    Ok(out)
}

/// `[q(left), q(right), depth features of the distorted pair]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallFeatureVector(#[serde(with = "serde_array26")] pub [f64; OVERALL_FEATURE_DIM]);

impl OverallFeatureVector {
    pub fn new(image: [f64; 2], depth: &DepthFeatureVector) -> Self {
        let mut v = [0.0; OVERALL_FEATURE_DIM];
        v[..2].copy_from_slice(&image);
        v[2..].copy_from_slice(depth.values());
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn names() -> Vec<String> {
        let mut names = vec!["q_left".to_string(), "q_right".to_string()];
        names.extend(DepthFeatureVector::names());
        names
    }
}

mod serde_array26 {
    use super::OVERALL_FEATURE_DIM;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; OVERALL_FEATURE_DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; OVERALL_FEATURE_DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| D::Error::invalid_length(v.len(), &"26 values"))
    }
}

pub fn overall_features(
    reference: &StereoImage,
    distorted: &StereoImage,
    metric: IqaMetric,
    config: &ExtractionConfig,
) -> Result<OverallFeatureVector> {
    let image = local_image_features(reference, distorted, metric, config)?;
    let depth = depth_features(distorted, &config.for_geometry(distorted.geometry()))?;
    Ok(OverallFeatureVector::new(image, &depth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(n: usize) -> Raster {
        Raster::from_fn(n, n, |r, c| ((r * 3 + c * 5) % 256) as f64).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = Raster::filled(8, 8, 1, 100.0).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), 100.0);
        let b = a.map(|v| v + 1.0);
        assert!((psnr(&a, &b).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        let z = Raster::filled(8, 8, 1, 0.0).unwrap();
        let f = Raster::filled(8, 8, 1, 255.0).unwrap();
        assert!(psnr(&z, &f).unwrap().abs() < 1e-12);
        assert!(psnr(&a, &Raster::filled(4, 8, 1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn ms_ssim_self_similarity() {
        let a = gradient(176);
        assert!((ms_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ms_ssim_too_small() {
        let a = gradient(175);
        assert!(matches!(ms_ssim(&a, &a), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn metric_parse() {
        assert_eq!("msssim".parse::<IqaMetric>().unwrap(), IqaMetric::MsSsim);
        assert_eq!("PSNR".parse::<IqaMetric>().unwrap(), IqaMetric::Psnr);
        assert!("ssim".parse::<IqaMetric>().is_err());
    }

    #[test]
    fn overall_names() {
        let n = OverallFeatureVector::names();
        assert_eq!(n.len(), 26);
        assert_eq!(n[2], "std_l_LL");
    }
}
