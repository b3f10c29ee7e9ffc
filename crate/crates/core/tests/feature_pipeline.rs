use dqi_core::features::viewport_statistics;
use dqi_core::metrics::DEFAULT_PSNR_CAP;
use dqi_core::{
    abs_diff, center_crop, depth_features, distort, generate_texture, haar_decompose, local_image_features,
    overall_features, render_stereopair, rgb_to_lab, Distortion, ExtractionConfig, Geometry, IqaMetric, Raster,
    StereoImage,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plane(seed: u64, w: usize, h: usize) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Raster::new(w, h, 1, (0..w * h).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap()
}

/// Haar subbands from explicit 2×2 block sums and differences.
fn naive_subbands(p: &Raster) -> [Vec<f64>; 4] {
    let mut out: [Vec<f64>; 4] = Default::default();
    for r in (0..p.height()).step_by(2) {
        for c in (0..p.width()).step_by(2) {
            let (a, b) = (p.get(r, c, 0), p.get(r, c + 1, 0));
            let (d, e) = (p.get(r + 1, c, 0), p.get(r + 1, c + 1, 0));
            out[0].push((a + b + d + e) / 2.0);
            out[1].push((a - b + d - e) / 2.0);
            out[2].push((a + b - d - e) / 2.0);
            out[3].push((a - b - d + e) / 2.0);
        }
    }
    out
}

fn naive_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn naive_entropy(v: &[f64], bins: usize) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0.0; bins];
    for &x in v {
        let mut k = ((x - lo) / (hi - lo) * bins as f64).floor() as usize;
        if k == bins {
            k -= 1;
        }
        counts[k] += 1.0;
    }
    counts
        .iter()
        .filter(|&&k| k > 0.0)
        .map(|&k| {
            let p = k / v.len() as f64;
            -p * p.ln() / std::f64::consts::LN_2
        })
        .sum()
}

#[test]
fn viewport_statistics_match_naive_recomputation() {
    let plane = random_plane(11, 64, 64);
    let stats = viewport_statistics(&haar_decompose(&plane).unwrap(), 256);
    let bands = naive_subbands(&plane);
    for k in 0..4 {
        assert!((stats[k] - naive_std(&bands[k])).abs() < 1e-12, "std band {k}");
        assert!((stats[4 + k] - naive_entropy(&bands[k], 256)).abs() < 1e-12, "entropy band {k}");
    }
}

#[test]
fn haar_preserves_energy_on_random_plane() {
    let plane = random_plane(12, 64, 64);
    let quad = haar_decompose(&plane).unwrap();
    let e_in: f64 = plane.data().iter().map(|v| v * v).sum();
    let e_out: f64 = quad.bands().iter().flat_map(|b| b.data()).map(|v| v * v).sum();
    assert!((e_in - e_out).abs() <= 1e-9 * e_in);
}

#[test]
fn larger_disparity_raises_every_luminance_std() {
    let cfg = ExtractionConfig::default();
    for seed in 0..10 {
        let t = generate_texture(100 + seed, 512, 256).unwrap();
        let small = depth_features(&render_stereopair(&t, 8, Geometry::Erp).unwrap(), &cfg).unwrap();
        let large = depth_features(&render_stereopair(&t, 32, Geometry::Erp).unwrap(), &cfg).unwrap();
        for (s, l) in small.luminance_std().iter().zip(large.luminance_std()) {
            assert!(l > s, "seed {seed}: {s} !< {l}");
        }
    }
}

#[test]
fn planar_mode_equals_cropping_first() {
    let t = generate_texture(5, 480, 360).unwrap();
    let pair = render_stereopair(&t, 12, Geometry::Planar).unwrap();
    let cfg = ExtractionConfig::planar();
    let got = depth_features(&pair, &cfg).unwrap();
    assert_eq!(center_crop(&t.channel(0).unwrap()).unwrap().dims(), (160, 120, 1));

    let lab = rgb_to_lab(&abs_diff(pair.left(), pair.right()).unwrap()).unwrap();
    let mut want = [[0.0; 8]; 3];
    for (c, stats) in want.iter_mut().enumerate() {
        let crop = lab.crop(120..240, 160..320).unwrap().channel(c).unwrap();
        *stats = viewport_statistics(&haar_decompose(&crop).unwrap(), 256);
    }
    for c in 0..3 {
        for k in 0..4 {
            assert!((got.values()[c * 4 + k] - want[c][k]).abs() < 1e-12);
            assert!((got.values()[12 + c * 4 + k] - want[c][4 + k]).abs() < 1e-12);
        }
    }
}

#[test]
fn swapping_views_changes_nothing() {
    let t = generate_texture(9, 512, 256).unwrap();
    let pair = render_stereopair(&t, 16, Geometry::Erp).unwrap();
    let cfg = ExtractionConfig::default();
    assert_eq!(
        depth_features(&pair, &cfg).unwrap(),
        depth_features(&pair.swapped(), &cfg).unwrap()
    );
}

#[test]
fn identical_reference_gives_capped_quality_and_zero_depth() {
    let t = generate_texture(2, 512, 256).unwrap();
    let pair = StereoImage::new(t.clone(), t, Geometry::Erp).unwrap();
    let cfg = ExtractionConfig::default();
    let psnr_vec = overall_features(&pair, &pair, IqaMetric::Psnr, &cfg).unwrap();
    assert_eq!(&psnr_vec.values()[..2], &[DEFAULT_PSNR_CAP, DEFAULT_PSNR_CAP]);
    assert!(psnr_vec.values()[2..].iter().all(|&v| v == 0.0));
    let ssim_vec = overall_features(&pair, &pair, IqaMetric::MsSsim, &cfg).unwrap();
    assert!((ssim_vec.values()[0] - 1.0).abs() < 1e-9 && (ssim_vec.values()[1] - 1.0).abs() < 1e-9);
}

#[test]
fn symmetric_distortion_gives_similar_eye_scores() {
    for seed in 0..4 {
        let t = generate_texture(40 + seed, 512, 256).unwrap();
        let reference = render_stereopair(&t, 8, Geometry::Erp).unwrap();
        let jpeg = Distortion::JpegLike(40);
        let distorted = StereoImage::new(
            distort(reference.left(), &jpeg, 0).unwrap(),
            distort(reference.right(), &jpeg, 0).unwrap(),
            Geometry::Erp,
        )
        .unwrap();
        let [ql, qr] =
            local_image_features(&reference, &distorted, IqaMetric::MsSsim, &ExtractionConfig::default()).unwrap();
        assert!((ql - qr).abs() < 0.05, "{ql} vs {qr}");
        assert!(ql < 1.0);
    }
}

#[test]
fn planar_overall_uses_whole_view() {
    let t = generate_texture(3, 400, 300).unwrap();
    let reference = render_stereopair(&t, 4, Geometry::Planar).unwrap();
    let blur = Distortion::GaussianBlur(1.5);
    let distorted = StereoImage::new(
        distort(reference.left(), &blur, 0).unwrap(),
        distort(reference.right(), &blur, 0).unwrap(),
        Geometry::Planar,
    )
    .unwrap();
    let v = overall_features(&reference, &distorted, IqaMetric::Psnr, &ExtractionConfig::planar()).unwrap();
    let luma = |r: &Raster| dqi_core::raster::luma(r).unwrap();
    let want = dqi_core::psnr(&luma(reference.left()), &luma(distorted.left())).unwrap();
    assert!((v.values()[0] - want).abs() < 1e-12);
}
