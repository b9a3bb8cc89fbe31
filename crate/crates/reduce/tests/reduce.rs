use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use roomscan_capsim::{default_intrinsics, simulate, RoomScene, TrajectoryConfig};
use roomscan_core::{quat_angular_distance, CaptureStream, GrayImage, Quaternion, Vector3};
use roomscan_reduce::*;

fn checkerboard() -> GrayImage {
    GrayImage::from_fn(128, 128, |x, y| if ((x / 16) + (y / 16)) % 2 == 0 { 200 } else { 50 }).unwrap()
}

/// Separable Gaussian blur, clamp-to-edge, kernel radius ceil(3σ).
fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.to_f64();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * src[(y * w + (x + j as i64 - r).clamp(0, w - 1)) as usize])
                .sum();
            tmp[(y * w + x) as usize] = acc / norm;
        }
    }
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[((y + j as i64 - r).clamp(0, h - 1) * w + x) as usize])
                .sum();
            out[(y * w + x) as usize] = (acc / norm).round().clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::new(img.width(), img.height(), out).unwrap()
}

/// Straight-line reference of the anisotropy recipe: full complex sum over
/// the window, no tables, no symmetry folding.
fn reference_anisotropy(img: &GrayImage, n_dirs: usize, half: usize, stride: usize, alpha: f64) -> f64 {
    let n = 2 * half + 1;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut per_dir = Vec::new();
    for k in 0..n_dirs {
        let theta = k as f64 * PI / n_dirs as f64;
        let mut sum = 0.0;
        let mut count = 0.0;
        let mut ay = half;
        while ay < h - half {
            let mut ax = half;
            while ax < w - half {
                let sample = |m: i64| -> f64 {
                    let dx = (m as f64 * theta.cos()).round() as i64;
                    let dy = (m as f64 * theta.sin()).round() as i64;
                    img.get((ax as i64 + dx) as u32, (ay as i64 + dy) as u32) as f64
                };
                let mut wq = Vec::with_capacity(n);
                for q in 0..n {
                    let (mut re, mut im) = (0.0, 0.0);
                    for m in -(half as i64)..=(half as i64) {
                        let v = sample(m) * sample(-m);
                        let ph = -2.0 * PI * (2 * m) as f64 * q as f64 / n as f64;
                        re += v * ph.cos();
                        im += v * ph.sin();
                    }
                    assert!(im.abs() <= 1e-6 * (1.0 + re.abs()));
                    wq.push(re);
                }
                let energy: f64 = wq.iter().map(|v| v * v).sum();
                if energy > 0.0 {
                    let s: f64 = wq.iter().map(|v| (v * v / energy).powf(alpha)).sum();
                    sum += s.log2() / (1.0 - alpha);
                }
                count += 1.0;
                ax += stride;
            }
            ay += stride;
        }
        per_dir.push(sum / count);
    }
    let mean = per_dir.iter().sum::<f64>() / per_dir.len() as f64;
    (per_dir.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / per_dir.len() as f64).sqrt()
}

#[test]
fn checkerboard_blur_is_monotone() {
    let cfg = ReduceConfig::default();
    let cb = checkerboard();
    let scores: Vec<f64> =
        [0.0, 1.0, 2.0, 4.0].iter().map(|&s| anisotropy(&gaussian_blur(&cb, s), &cfg).unwrap()).collect();
    assert!(scores[0] > 0.0);
    for w in scores.windows(2) {
        assert!(w[1] <= w[0], "{scores:?}");
    }
}

#[test]
fn sharp_beats_blurred_against_reference() {
    let cfg = ReduceConfig::default();
    let sharp = checkerboard();
    let blurred = gaussian_blur(&sharp, 2.0);
    let mut pairs = Vec::new();
    for img in [&sharp, &blurred] {
        let fast = anisotropy(img, &cfg).unwrap();
        let slow = reference_anisotropy(img, cfg.directions_n, cfg.pwd_window, cfg.anchor_stride, cfg.renyi_alpha);
        assert!((fast - slow).abs() <= 1e-9 * slow.max(1e-12), "{fast} vs {slow}");
        pairs.push(slow);
    }
    assert!(pairs[0] > pairs[1]);
}

#[test]
fn reference_agrees_on_odd_images() {
    let cfg = ReduceConfig { directions_n: 6, pwd_window: 4, anchor_stride: 3, ..ReduceConfig::default() };
    let img = GrayImage::from_fn(37, 29, |x, y| ((x * x * 3 + y * 17 + x * y) % 256) as u8).unwrap();
    let fast = anisotropy(&img, &cfg).unwrap();
    let slow = reference_anisotropy(&img, 6, 4, 3, cfg.renyi_alpha);
    assert!((fast - slow).abs() <= 1e-9 * slow, "{fast} vs {slow}");
}

#[test]
fn constant_images_score_exactly_zero() {
    let cfg = ReduceConfig::default();
    for v in [0u8, 1, 128, 254, 255] {
        assert_eq!(anisotropy(&GrayImage::filled(64, 48, v).unwrap(), &cfg).unwrap(), 0.0);
    }
}

#[test]
fn renyi_identities_are_exact() {
    for n in 1..=256usize {
        let h = renyi_entropy(&vec![1.0 / n as f64; n], 3.0).unwrap();
        assert!((h - (n as f64).log2()).abs() < 1e-12, "n = {n}");
    }
    for n in 1..10 {
        for hot in 0..n {
            let mut p = vec![0.0; n];
            p[hot] = 1.0;
            assert_eq!(renyi_entropy(&p, 3.0).unwrap(), 0.0);
        }
    }
}

fn yaw_pitch(yaw_deg: f64, pitch_deg: f64) -> Quaternion {
    // camera +z along world +x, then heading and elevation
    let base = Quaternion::from_axis_angle(&Vector3::y(), PI / 2.0);
    let pitch = Quaternion::from_axis_angle(&Vector3::y(), -pitch_deg.to_radians());
    let yaw = Quaternion::from_axis_angle(&Vector3::z(), yaw_deg.to_radians());
    yaw * pitch * base
}

fn window_strategy() -> impl Strategy<Value = (Vec<Candidate>, ReduceConfig)> {
    (1usize..=8, 0u64..1000, 1usize..=6, 0.02f64..0.4, any::<u64>()).prop_map(|(n, start, window, theta, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..n)
            .map(|i| {
                let yaw = rng.random_range(-20.0..20.0);
                let pitch = rng.random_range(-8.0..8.0);
                // coarse scores so ties happen
                let score = rng.random_range(0..4) as f64;
                Candidate { id: start + i as u64, orient: yaw_pitch(yaw, pitch), score }
            })
            .collect();
        let cfg = ReduceConfig { dedup_window: window, dedup_theta_min: theta, ..ReduceConfig::default() };
        (frames, cfg)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dedup_covers_and_packs((frames, cfg) in window_strategy()) {
        let kept = temporal_dedup(&frames, &cfg).unwrap();
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        let is_kept = |id: u64| kept.contains(&id);
        let near = |a: &Candidate, b: &Candidate| {
            a.id.abs_diff(b.id) < cfg.dedup_window as u64
                && quat_angular_distance(&a.orient, &b.orient).unwrap() < cfg.dedup_theta_min
        };
        for f in &frames {
            if is_kept(f.id) {
                for g in &frames {
                    if g.id != f.id && is_kept(g.id) {
                        prop_assert!(!near(f, g), "kept {} and {} are redundant", f.id, g.id);
                    }
                }
            } else {
                prop_assert!(frames.iter().any(|g| is_kept(g.id) && near(f, g)), "dropped {} is not covered", f.id);
            }
        }
        // every dropped frame is dominated by a better kept neighbor
        for f in frames.iter().filter(|f| !is_kept(f.id)) {
            prop_assert!(frames.iter().any(|g| is_kept(g.id) && near(f, g)
                && (g.score > f.score || (g.score == f.score && g.id < f.id))));
        }
    }

    #[test]
    fn coverage_matches_brute_force(n in 0usize..=20, kmax in 1usize..=3, bin in 5.0f64..40.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: Vec<Candidate> = (0..n)
            .map(|i| Candidate {
                id: i as u64 * 3,
                orient: yaw_pitch(rng.random_range(-180.0..180.0), rng.random_range(-60.0..60.0)),
                score: rng.random_range(0..5) as f64,
            })
            .collect();
        let cfg = ReduceConfig { coverage_kmax: kmax, coverage_bin_deg: bin, ..ReduceConfig::default() };
        let cell = |c: &Candidate| {
            let d = c.orient.to_rotation_matrix().column(2).into_owned();
            let yaw = d.y.atan2(d.x).to_degrees();
            let pitch = d.z.clamp(-1.0, 1.0).asin().to_degrees();
            ((yaw / bin).floor() as i64, (pitch / bin).floor() as i64)
        };
        let expected: Vec<u64> = frames
            .iter()
            .filter(|f| {
                let better = frames
                    .iter()
                    .filter(|g| cell(g) == cell(f) && (g.score > f.score || (g.score == f.score && g.id < f.id)))
                    .count();
                better < kmax
            })
            .map(|f| f.id)
            .collect();
        prop_assert_eq!(coverage_prune(&frames, &cfg), expected);
    }
}

fn small_stream(seed: u64) -> CaptureStream {
    let traj = TrajectoryConfig { duration_s: 80.0, ..TrajectoryConfig::default() };
    simulate(&RoomScene::default(), &traj, &default_intrinsics(), seed).unwrap().0
}

#[test]
fn stream_reduction_invariants() {
    let stream = small_stream(3);
    let cfg = ReduceConfig::default();
    let (kept, report) = reduce_stream(&stream, &cfg).unwrap();
    assert_eq!(report.total, stream.frames.len());
    assert_eq!(report.total, report.kept_ids.len() + report.dropped.sum());
    assert!(report.kept_ids.windows(2).all(|w| w[0] < w[1]));
    let ids: Vec<u64> = stream.frames.iter().map(|f| f.id).collect();
    assert!(report.kept_ids.iter().all(|id| ids.contains(id)));
    assert_eq!(kept.iter().map(|f| f.id).collect::<Vec<_>>(), report.kept_ids);
    let expected = 1.0 - report.kept_ids.len() as f64 / report.total as f64;
    assert_eq!(report.reduction_ratio, expected);
    assert!((0.0..=1.0).contains(&report.reduction_ratio));

    let again = reduce_stream(&stream, &cfg).unwrap().1;
    assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn rerun_without_percentile_drops_nothing() {
    let stream = small_stream(5);
    let cfg = ReduceConfig::default();
    let (kept, report) = reduce_stream(&stream, &cfg).unwrap();
    assert!(!kept.is_empty());
    let sub = CaptureStream::new(stream.intrinsics, kept).unwrap();
    let bypass = ReduceConfig { aniso_keep_percentile: 0.0, ..cfg };
    let (_, second) = reduce_stream(&sub, &bypass).unwrap();
    assert_eq!(second.kept_ids, report.kept_ids);
    assert_eq!(second.dropped.sum(), 0);
}

#[test]
fn thread_count_does_not_change_the_result() {
    let stream = small_stream(9);
    let cfg = ReduceConfig::default();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| reduce_stream(&stream, &cfg).unwrap().1);
    let b = four.install(|| reduce_stream(&stream, &cfg).unwrap().1);
    assert_eq!(a, b);
}

#[test]
fn bad_config_is_rejected() {
    let stream = small_stream(1);
    for cfg in [
        ReduceConfig { dedup_window: 0, ..ReduceConfig::default() },
        ReduceConfig { renyi_alpha: 1.0, ..ReduceConfig::default() },
        ReduceConfig { aniso_keep_percentile: 101.0, ..ReduceConfig::default() },
    ] {
        assert_eq!(reduce_stream(&stream, &cfg).unwrap_err().kind(), "invalid-argument");
    }
}

#[test]
fn report_json_shape() {
    let stream = small_stream(2);
    let (kept, report) = reduce_stream(&stream, &ReduceConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    roomscan_reduce::io::write_reduction(dir.path(), &stream, &kept, &report).unwrap();
    let text = std::fs::read_to_string(dir.path().join(roomscan_reduce::io::REPORT_FILE)).unwrap();
    assert!(text.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for stage in ["exposure", "motion", "anisotropy", "temporal_dedup", "coverage"] {
        assert!(v["dropped"][stage].is_u64(), "{stage}");
    }
    let back = roomscan_core::pgm::read_capture_dir(dir.path()).unwrap();
    assert_eq!(back.frames.len(), kept.len());
}
