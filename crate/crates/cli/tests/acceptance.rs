//! Acceptance suite. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dqi_core::protocol::{extract_features, labels};
use dqi_core::synth::SynthConfig;
use dqi_core::{
    build_dataset, depth_features, distort, generate_texture, haar_decompose, haar_reconstruct, krocc, ms_ssim,
    plcc, psnr, render_stereopair, run_protocol, run_protocol_on_features, srocc, Dataset, Distortion,
    ExtractionConfig, FeatureOptions, Geometry, IqaMetric, ProtocolOptions, Raster, StereoImage, Task,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(outcome: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    match outcome {
        Outcome::Pass(d) if elapsed > limit => Outcome::Fail(format!("{d}; runtime {elapsed:.1?} over {limit:?}")),
        other => other,
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn solid_reproduction() -> Outcome {
    let Ok(manifest) = std::env::var("DQI_SOLID_MANIFEST") else {
        return Outcome::Skip("set DQI_SOLID_MANIFEST to a SOLID manifest to run".into());
    };
    let dataset = match Dataset::load(&manifest) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("cannot load {manifest}: {e}")),
    };
    let options = ProtocolOptions {
        seed: 1,
        ..ProtocolOptions::default()
    };
    match run_protocol(&dataset, Task::Depth, &FeatureOptions::default(), &options) {
        Ok(r) => check(
            (r.median_srocc - 0.9299).abs() <= 0.08,
            format!("median SROCC {:.4}, target 0.9299 ± 0.08", r.median_srocc),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| 1.0 + v.iter().filter(|y| *y < x).count() as f64)
        .collect()
}

fn spearman_closed_form(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks_by_counting(a), ranks_by_counting(b));
    let t = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 - 6.0 * d2 / (t * (t * t - 1.0))
}

fn kendall_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut concordant, mut discordant) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i < j {
                if (a[i] < a[j]) == (b[i] < b[j]) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    (concordant as f64 - discordant as f64) / (n * (n - 1) / 2) as f64
}

fn pearson_two_pass(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn tie_free(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[0] < w[1]) {
            return v;
        }
    }
}

fn correlation_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let n = rng.random_range(3..=10);
        let (a, b) = (tie_free(&mut rng, n), tie_free(&mut rng, n));
        let diffs = [
            (srocc(&a, &b).unwrap() - spearman_closed_form(&a, &b)).abs(),
            (krocc(&a, &b).unwrap() - kendall_enumerated(&a, &b)).abs(),
            (plcc(&a, &b, false).unwrap() - pearson_two_pass(&a, &b)).abs(),
        ];
        for (w, d) in worst.iter_mut().zip(diffs) {
            *w = w.max(d);
        }
    }
    check(
        worst.iter().all(|&w| w <= 1e-12),
        format!(
            "max |Δ| srocc {:.1e}, krocc {:.1e}, plcc {:.1e} (tol 1e-12)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn wavelet_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_energy, mut worst_recon) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let w = 2 * rng.random_range(1..=64);
        let h = 2 * rng.random_range(1..=64);
        let data: Vec<f64> = (0..w * h).map(|_| rng.random_range(-255.0..255.0)).collect();
        let plane = Raster::new(w, h, 1, data).unwrap();
        let quad = haar_decompose(&plane).unwrap();
        let energy_in: f64 = plane.data().iter().map(|v| v * v).sum();
        let energy_out: f64 = quad.bands().iter().flat_map(|b| b.data()).map(|v| v * v).sum();
        worst_energy = worst_energy.max((energy_in - energy_out).abs() / energy_in);
        let back = haar_reconstruct(&quad).unwrap();
        let scale = plane.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = plane.data().iter().zip(back.data()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst_recon = worst_recon.max(err / scale);
    }
    check(
        worst_energy <= 1e-9 && worst_recon <= 1e-9,
        format!("max relative energy error {worst_energy:.1e}, reconstruction {worst_recon:.1e} (tol 1e-9)"),
    )
}

fn zero_disparity() -> Outcome {
    let mut nonzero = 0;
    for seed in 0..20u64 {
        let (geometry, w, h) = if seed % 2 == 0 {
            (Geometry::Erp, 512, 256)
        } else {
            (Geometry::Planar, 320, 240)
        };
        let t = generate_texture(seed, w, h).unwrap();
        let pair = StereoImage::new(t.clone(), t, geometry).unwrap();
        let f = depth_features(&pair, &ExtractionConfig::default().for_geometry(geometry)).unwrap();
        if f.values().iter().any(|&v| v != 0.0) {
            nonzero += 1;
        }
    }
    check(nonzero == 0, format!("{nonzero}/20 identical-view pairs gave a non-zero feature"))
}

fn mean_luminance_std(texture: &Raster, disparity: usize, geometry: Geometry, seed: u64) -> f64 {
    let pair = render_stereopair(texture, disparity, geometry).unwrap();
    let jpeg = Distortion::JpegLike(50);
    let left = distort(pair.left(), &jpeg, seed).unwrap();
    let right = distort(pair.right(), &jpeg, seed + 1).unwrap();
    let pair = StereoImage::new(left, right, geometry).unwrap();
    let f = depth_features(&pair, &ExtractionConfig::default().for_geometry(geometry)).unwrap();
    f.luminance_std().iter().sum::<f64>() / 4.0
}

fn disparity_monotonicity() -> Outcome {
    let ladder = [0, 4, 8, 16, 32];
    let mut details = Vec::new();
    let mut ok = true;
    for (geometry, w, h) in [(Geometry::Erp, 512, 256), (Geometry::Planar, 384, 288)] {
        let monotone = (0..20u64)
            .filter(|&seed| {
                let t = generate_texture(1000 + seed, w, h).unwrap();
                let s: Vec<f64> = ladder.iter().map(|&d| mean_luminance_std(&t, d, geometry, seed)).collect();
                s.windows(2).all(|p| p[0] < p[1])
            })
            .count();
        ok &= monotone >= 18;
        details.push(format!("{geometry} {monotone}/20"));
    }
    check(ok, format!("strictly increasing seeds: {} (need ≥ 18/20)", details.join(", ")))
}

fn end_to_end_depth() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let dataset = build_dataset(&SynthConfig::default(), dir.path()).unwrap();
    let options = ProtocolOptions {
        iterations: 100,
        seed: 6,
        ..ProtocolOptions::default()
    };
    let report = run_protocol(&dataset, Task::Depth, &FeatureOptions::default(), &options).unwrap();
    check(
        dataset.len() == 60 && report.median_srocc >= 0.85 && report.median_plcc >= 0.85,
        format!(
            "{} entries, median SROCC {:.4}, PLCC {:.4} (need ≥ 0.85)",
            dataset.len(),
            report.median_srocc,
            report.median_plcc
        ),
    )
}

fn overall_boost() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = SynthConfig {
        seed: 17,
        distortion_levels: vec![10.0, 30.0, 50.0, 70.0, 90.0],
        ..SynthConfig::default()
    };
    let dataset = build_dataset(&config, dir.path()).unwrap();
    let options = FeatureOptions {
        metric: IqaMetric::MsSsim,
        ..FeatureOptions::default()
    };
    let x = extract_features(&dataset, Task::Overall, &options).unwrap();
    let y = labels(&dataset, Task::Overall).unwrap();
    let content: Vec<String> = dataset.entries.iter().map(|e| e.content_id.clone()).collect();
    let protocol = ProtocolOptions {
        iterations: 100,
        seed: 7,
        ..ProtocolOptions::default()
    };
    let median_for = |cols: std::ops::Range<usize>| {
        let sub: Vec<Vec<f64>> = x.iter().map(|r| r[cols.clone()].to_vec()).collect();
        run_protocol_on_features(&sub, &y, &content, &protocol, serde_json::Value::Null)
            .unwrap()
            .median_srocc
    };
    let (image, depth, both) = (median_for(0..2), median_for(2..26), median_for(0..26));
    check(
        both >= image + 0.03 && both >= depth + 0.03,
        format!("median SROCC 26-feature {both:.4}, image-only {image:.4}, depth-only {depth:.4} (margin 0.03)"),
    )
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = Raster::new(256, 256, 1, (0..256 * 256).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap();
    let self_ssim = ms_ssim(&a, &a).unwrap();
    let flat = Raster::filled(64, 64, 1, 100.0).unwrap();
    let shifted = flat.map(|v| v + 1.0);
    let unit_psnr = psnr(&flat, &shifted).unwrap();
    let mut worst_gap = f64::INFINITY;
    for k in 0..20 {
        let n = rng.random_range(20..60);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = u
            .iter()
            .map(|&x| {
                let clean = match k % 4 {
                    0 => x.tanh(),
                    1 => x.exp(),
                    2 => x.powi(3),
                    _ => 1.0 / (1.0 + (-2.0 * x).exp()),
                };
                clean + rng.random_range(-0.05..0.05)
            })
            .collect();
        let gap = plcc(&u, &g, true).unwrap() - plcc(&u, &g, false).unwrap();
        worst_gap = worst_gap.min(gap);
    }
    check(
        (self_ssim - 1.0).abs() <= 1e-9 && (unit_psnr - 48.1308).abs() <= 1e-3 && worst_gap >= -1e-9,
        format!(
            "ms_ssim(A,A) = {self_ssim:.12}, unit-error PSNR = {unit_psnr:.4} dB, min PLCC gain from mapping {worst_gap:.2e}"
        ),
    )
}

fn run_dqi(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dqi"))
        .args(args)
        .output()
        .expect("dqi runs")
}

fn thread_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("synth.cfg");
    std::fs::write(&cfg, "width = 256\ncount_per_level = 4\n").unwrap();
    let data = root.join("data");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let out = run_dqi(&["--quiet", "synth", "--config", &s(&cfg), "--out", &s(&data)]);
    if !out.status.success() {
        return Outcome::Fail(format!("synth failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let manifest = s(&data.join("manifest.csv"));
    let mut reports = Vec::new();
    for threads in ["1", "8"] {
        let report = root.join(format!("report_{threads}.json"));
        let out = run_dqi(&[
            "--quiet", "--seed", "42", "--threads", threads, "evaluate", "--manifest", &manifest, "--task",
            "overall", "--iterations", "50", "--report", &s(&report),
        ]);
        if !out.status.success() {
            return Outcome::Fail(format!("evaluate failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        reports.push((std::fs::read(&report).unwrap(), out.stdout));
    }
    check(
        reports[0] == reports[1],
        format!("reports and stdout identical at --threads 1 and 8: {}", reports[0] == reports[1]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("1 SOLID depth reproduction", solid_reproduction, Duration::MAX),
        ("2 correlation oracle equivalence", correlation_oracles, Duration::from_secs(5)),
        ("3 wavelet invariants", wavelet_invariants, Duration::from_secs(5)),
        ("4 zero-disparity invariant", zero_disparity, Duration::from_secs(30)),
        ("5 disparity monotonicity", disparity_monotonicity, Duration::from_secs(180)),
        ("6 end-to-end synthetic depth regression", end_to_end_depth, Duration::from_secs(600)),
        ("7 overall-QoE boost", overall_boost, Duration::from_secs(900)),
        ("8 metric sanity", metric_sanity, Duration::from_secs(60)),
        ("9 thread-count determinism", thread_determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = single_threaded(run);
        let elapsed = start.elapsed();
        let (tag, detail) = match within(outcome, elapsed, limit) {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{name}] {detail} ({:.2}s)", elapsed.as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
