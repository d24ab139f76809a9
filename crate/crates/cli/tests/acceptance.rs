//! Acceptance suite: one test per system-level criterion, each printing a
//! pass/fail line with its measured values (`--nocapture` shows them for
//! passing runs too).

// Violation checks count `!(a < b)` on purpose: a NaN must count as a
// violation, not pass silently.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::process::Command;
use std::time::Instant;

use evhdr::metrics::{
    dynamic_range, gray_level_count, k_sweep, responsive_range, snr_by_method, CalibrationSpec,
    Snr,
};
use evhdr::modulation::{linear_profile, separable_profile};
use evhdr::radiance::{make_gradient_chart, DensityFilterArray, RadianceMap};
use evhdr::reconstruct::{
    apply_cmap, calibrate_cmap, decompose_reconstruction, reconstruct, ReconstructionConfig,
    WeightingMethod,
};
use evhdr::rng::{derive_seed, PixelRng, StreamKind};
use evhdr::sim::{
    make_threshold_field, simulate, simulate_with_thresholds, NoiseConfig, SensorConfig,
};

const THRESHOLD: f64 = 0.1;
const BASELINE: f64 = 1.0;

fn default_profile() -> evhdr::ModulationProfile {
    linear_profile(0.5, 1.0, BASELINE, 0.05).unwrap()
}

fn default_noise(seed: u64) -> NoiseConfig<f64> {
    NoiseConfig::new(0.03, 2.0, seed).unwrap()
}

fn standard_array() -> DensityFilterArray<f64> {
    DensityFilterArray::standard(160_000.0, 8, 8).unwrap()
}

fn all_methods() -> Vec<WeightingMethod> {
    vec![
        WeightingMethod::Raw,
        WeightingMethod::Linear,
        WeightingMethod::Quadratic,
        WeightingMethod::hpoly(5).unwrap(),
        WeightingMethod::exponential(10).unwrap(),
    ]
}

fn calibration() -> CalibrationSpec<f64> {
    CalibrationSpec {
        captures: 10,
        radiance: 5000.0,
    }
}

/// Criterion 1: over 1000 randomized noise-free pixel pairs above the
/// baseline, every shared trigger order fires strictly earlier on the
/// brighter pixel. Zero violations, under 10 seconds.
#[test]
fn criterion_01_trigger_monotonicity() {
    let started = Instant::now();
    let pairs = 1000usize;
    let mut rng = PixelRng::for_sequence(101, StreamKind::Sampling);
    let mut bright_row = Vec::with_capacity(pairs);
    let mut dim_row = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let dim = BASELINE + rng.next_unit() * 2000.0;
        let bright = dim * (1.0 + 1e-4 + rng.next_unit() * 20.0);
        bright_row.push(bright);
        dim_row.push(dim);
    }
    let mut values = bright_row.clone();
    values.extend_from_slice(&dim_row);
    let scene = RadianceMap::from_values(pairs, 2, values).unwrap();
    let sensor = SensorConfig::new(pairs, 2, THRESHOLD).unwrap();
    let stream = simulate(&scene, &default_profile(), &sensor, &NoiseConfig::none(0)).unwrap();

    let mut violations = 0usize;
    let mut shared_orders = 0usize;
    for column in 0..pairs as u16 {
        let bright_events = stream.pixel_events(column, 0);
        let dim_events = stream.pixel_events(column, 1);
        for (eb, ed) in bright_events.iter().zip(&dim_events) {
            shared_orders += 1;
            if !(eb.t < ed.t) {
                violations += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    println!(
        "[criterion 1] {shared_orders} shared trigger orders over {pairs} pairs, \
         {violations} violations, {:.2}s",
        elapsed.as_secs_f64()
    );
    assert!(shared_orders > 10_000, "test must exercise many orders");
    assert_eq!(violations, 0, "brighter pixels must trigger strictly earlier");
    assert!(elapsed.as_secs() < 10, "criterion 1 must finish within 10 s");
}

/// Criterion 2: a separable modulation (f(t) = t + 1e-6) produces identical
/// timestamp sequences for 100 random radiances, within 1e-9. Zero
/// mismatches.
#[test]
fn criterion_02_separable_degeneracy() {
    let modulation = separable_profile(|t: f64| t + 1e-6, 1.0, 0.05).unwrap();
    let mut rng = PixelRng::for_sequence(202, StreamKind::Sampling);
    let values: Vec<f64> = (0..100).map(|_| 0.05 + rng.next_unit() * 5000.0).collect();
    let scene = RadianceMap::from_values(100, 1, values).unwrap();
    let sensor = SensorConfig::new(100, 1, THRESHOLD).unwrap();
    let stream = simulate(&scene, &modulation, &sensor, &NoiseConfig::none(0)).unwrap();

    let reference: Vec<f64> = stream.pixel_events(0, 0).iter().map(|e| e.t).collect();
    assert!(!reference.is_empty());
    let mut mismatches = 0usize;
    for x in 1..100u16 {
        let events = stream.pixel_events(x, 0);
        if events.len() != reference.len() {
            mismatches += 1;
            continue;
        }
        for (e, r) in events.iter().zip(&reference) {
            if (e.t - r).abs() > 1e-9 {
                mismatches += 1;
            }
        }
    }
    println!(
        "[criterion 2] 100 radiances, {} events per pixel, {mismatches} mismatches",
        reference.len()
    );
    assert_eq!(mismatches, 0, "separable modulation must erase scene information");
}

/// Criterion 3: closed-form crossing times match a dt = 1e-6 time-stepping
/// oracle within 2e-6, with per-pixel event counts matching exactly, over 20
/// random 32x32 scenes.
#[test]
fn criterion_03_crossing_solver_vs_brute_force() {
    let profile = default_profile();
    let mut rng = PixelRng::for_sequence(303, StreamKind::Sampling);
    let mut count_mismatches = 0usize;
    let mut worst_dt = 0.0f64;
    let steps = 1_000_000u64;
    for scene_idx in 0..20 {
        let values: Vec<f64> = (0..32 * 32)
            .map(|_| BASELINE + rng.next_unit() * 2000.0)
            .collect();
        let scene = RadianceMap::from_values(32, 32, values.clone()).unwrap();
        let sensor = SensorConfig::new(32, 32, THRESHOLD).unwrap();
        let stream = simulate(&scene, &profile, &sensor, &NoiseConfig::none(0)).unwrap();

        for y in 0..32u16 {
            for x in 0..32u16 {
                let radiance = values[y as usize * 32 + x as usize];

                // Independent oracle: walk time in fixed steps and fire when
                // the intensity crosses the next level. The dual-path law is
                // written out directly (scene ramp t * L plus constant path
                // (1 - t/2) * baseline) rather than reusing library code.
                let mut oracle_times = Vec::new();
                let dt = 1.0 / steps as f64;
                let mut anchor = BASELINE;
                let mut up = anchor * THRESHOLD.exp();
                for i in 1..=steps {
                    let t = (i as f64 * dt).min(1.0);
                    let intensity = radiance * t + (1.0 - 0.5 * t) * BASELINE;
                    while intensity >= up {
                        oracle_times.push(t);
                        anchor = up;
                        up = anchor * THRESHOLD.exp();
                    }
                }

                // Closed-form solver, order by order.
                let mut solver_times = Vec::new();
                for k in 1..u32::MAX {
                    match evhdr::sim::solve_kth_crossing(&profile, radiance, k, THRESHOLD).unwrap()
                    {
                        Some(t) => solver_times.push(t),
                        None => break,
                    }
                }

                let simulated = stream.pixel_events(x, y);
                if solver_times.len() != oracle_times.len()
                    || simulated.len() != oracle_times.len()
                {
                    count_mismatches += 1;
                    continue;
                }
                for (ts, to) in solver_times.iter().zip(&oracle_times) {
                    worst_dt = worst_dt.max((ts - to).abs());
                }
            }
        }
        assert_eq!(
            count_mismatches, 0,
            "count mismatch in scene {scene_idx}"
        );
    }
    println!(
        "[criterion 3] 20 scenes x 1024 pixels, 0 count mismatches, worst |dt| = {worst_dt:.3e}"
    );
    assert_eq!(count_mismatches, 0);
    assert!(worst_dt <= 2e-6, "worst time deviation {worst_dt} exceeds 2e-6");
}

/// Criterion 4: raw reconstruction of a noise-free uniform scene equals
/// e^(N c) times the baseline, with N the per-pixel positive event count,
/// to 1e-12 relative.
#[test]
fn criterion_04_reconstruction_identity() {
    let scene = RadianceMap::uniform(16, 16, 25.0).unwrap();
    let sensor = SensorConfig::new(16, 16, THRESHOLD).unwrap();
    let stream = simulate(&scene, &default_profile(), &sensor, &NoiseConfig::none(0)).unwrap();
    let cfg = ReconstructionConfig::new(WeightingMethod::Raw, THRESHOLD, BASELINE).unwrap();
    let img = reconstruct(&stream, &cfg).unwrap();

    let mut worst = 0.0f64;
    for y in 0..16u16 {
        for x in 0..16u16 {
            let n = stream.pixel_events(x, y).len() as f64;
            let expected = BASELINE * (n * THRESHOLD).exp();
            let got = img.get(x as usize, y as usize);
            worst = worst.max((got / expected - 1.0).abs());
        }
    }
    println!("[criterion 4] worst relative deviation {worst:.3e}");
    assert!(worst <= 1e-12);
}

/// Criterion 5: the dynamic-range arithmetic reproduces 102.6 dB from the
/// densities (0.10, 5.23) exactly (up to IEEE decimal representation), and an
/// end-to-end run with defaults reports a responsive span of at least 60 dB.
#[test]
fn criterion_05_dynamic_range() {
    let dr: f64 = dynamic_range(0.10, 5.23).unwrap();
    println!("[criterion 5] dynamic_range(0.10, 5.23) = {dr}");
    assert!(
        (dr - 102.6).abs() < 1e-12,
        "expected 102.6 dB, got {dr} (difference beyond float representation)"
    );

    // End-to-end with defaults: simulate, calibrate, decode, measure.
    let array = standard_array();
    let profile = default_profile();
    let sensor =
        SensorConfig::new(array.map().width(), array.map().height(), THRESHOLD).unwrap();
    let noise = default_noise(0);
    let field = make_threshold_field(&sensor, &noise).unwrap();
    let stream = simulate_with_thresholds(array.map(), &profile, &field, &noise).unwrap();
    let cfg = ReconstructionConfig::new(
        WeightingMethod::exponential(10).unwrap(),
        THRESHOLD,
        BASELINE,
    )
    .unwrap();
    let calibration = calibration();
    let uniform = RadianceMap::uniform(
        array.map().width(),
        array.map().height(),
        calibration.radiance,
    )
    .unwrap();
    let captures: Vec<_> = (0..calibration.captures)
        .map(|i| {
            let cap = NoiseConfig {
                threshold_sigma: noise.threshold_sigma,
                pseudo_rate: noise.pseudo_rate,
                seed: derive_seed(0, 0xCA11 + i as u64),
            };
            simulate_with_thresholds(&uniform, &profile, &field, &cap).unwrap()
        })
        .collect();
    let cmap = calibrate_cmap(&captures, &cfg).unwrap();
    let img = apply_cmap(&reconstruct(&stream, &cfg).unwrap(), &cmap).unwrap();

    let range = responsive_range(&img, &array, 0.02).unwrap().expect("responsive range");
    let end_to_end = range.dynamic_range_db.expect("distinct endpoint densities");
    println!(
        "[criterion 5] end-to-end responsive levels {}..{} (densities {}..{}), DR = {end_to_end:.1} dB",
        range.first_level, range.last_level, range.first_density, range.last_density
    );
    assert!(end_to_end >= 60.0, "end-to-end DR {end_to_end} below 60 dB");
}

fn require_db(s: &Snr<f64>) -> f64 {
    s.db().expect("finite SNR under noisy defaults")
}

/// Criterion 6: with defaults (sigma 0.03, pseudo rate 2), 10-seed mean SNR
/// satisfies exponential(10) >= hpoly(5) >= quadratic >= linear >= raw, with
/// and without the correction map, and correction strictly helps every
/// method. Under 5 minutes.
#[test]
fn criterion_06_weighting_method_ordering() {
    let started = Instant::now();
    let array = standard_array();
    let profile = default_profile();
    let sensor =
        SensorConfig::new(array.map().width(), array.map().height(), THRESHOLD).unwrap();
    let noise = default_noise(0);
    let seeds: Vec<u64> = (0..10).collect();
    let methods = all_methods();
    let calibration = calibration();

    let without = snr_by_method(
        &array, &profile, &sensor, &noise, &methods, false, &seeds, &calibration, 0.02,
    )
    .unwrap();
    let with = snr_by_method(
        &array, &profile, &sensor, &noise, &methods, true, &seeds, &calibration, 0.02,
    )
    .unwrap();

    for rows in [&without, &with] {
        let db: Vec<f64> = rows.iter().map(|r| require_db(&r.mean_snr)).collect();
        let labels: Vec<String> = rows.iter().map(|r| r.method.to_string()).collect();
        println!(
            "[criterion 6] cmap={} {:?}",
            rows[0].with_cmap,
            labels.iter().zip(&db).map(|(l, v)| format!("{l}={v:.2}")).collect::<Vec<_>>()
        );
        // methods are ordered raw, linear, quadratic, hpoly(5), exponential(10).
        assert!(db[4] >= db[3], "exponential(10) >= hpoly(5): {db:?}");
        assert!(db[3] >= db[2], "hpoly(5) >= quadratic: {db:?}");
        assert!(db[2] >= db[1], "quadratic >= linear: {db:?}");
        assert!(db[1] >= db[0], "linear >= raw: {db:?}");
    }
    for (w, wo) in with.iter().zip(&without) {
        assert!(
            require_db(&w.mean_snr) > require_db(&wo.mean_snr),
            "correction must strictly improve {}: {} vs {}",
            w.method,
            require_db(&w.mean_snr),
            require_db(&wo.mean_snr)
        );
    }
    let elapsed = started.elapsed();
    println!("[criterion 6] completed in {:.1}s", elapsed.as_secs_f64());
    assert!(elapsed.as_secs() < 300, "criterion 6 must finish within 5 minutes");
}

/// Criterion 7: over k in {1, 2, 5, 10, 20, 50, 100}, the 10-seed mean SNR at
/// k = 10 exceeds k = 1, and k = 100 is not the maximum.
///
/// The second clause fails under this simulator's noise model: pseudo events
/// are uniform in time and threshold deviation is static, so sharper
/// exponential time-gating suppresses both noise sources monotonically and
/// the within-region SNR keeps rising through k = 100 (verified well beyond
/// k = 100 and for per-k responsive sets, corrected and uncorrected pipelines
/// and calibration levels across four decades). The timing-noise effects that
/// penalize large k on real hardware are outside this simulator's scope.
#[test]
fn criterion_07_k_sweep_shape() {
    let array = standard_array();
    let profile = default_profile();
    let sensor =
        SensorConfig::new(array.map().width(), array.map().height(), THRESHOLD).unwrap();
    let noise = default_noise(0);
    let seeds: Vec<u64> = (0..10).collect();
    let k_values = [1u32, 2, 5, 10, 20, 50, 100];

    let points = k_sweep(
        &array,
        &profile,
        &sensor,
        &noise,
        &k_values,
        &seeds,
        &calibration(),
        0.02,
    )
    .unwrap();
    let curve: Vec<(u32, f64)> = points.iter().map(|p| (p.k, require_db(&p.mean_snr))).collect();
    println!("[criterion 7] mean SNR by k: {curve:?}");

    let at = |k: u32| curve.iter().find(|(kk, _)| *kk == k).unwrap().1;
    assert!(
        at(10) > at(1),
        "SNR at k=10 ({}) must exceed SNR at k=1 ({})",
        at(10),
        at(1)
    );
    let best_other = curve
        .iter()
        .filter(|(k, _)| *k != 100)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        best_other >= at(100),
        "SNR at k=100 ({:.2} dB) is the sweep maximum (best other: {best_other:.2} dB): with \
         only uniform-in-time pseudo events and a static threshold deviation field, sharper \
         exponential time-gating suppresses noise monotonically, so the within-region SNR has \
         no interior peak",
        at(100)
    );
}

/// Criterion 8: on a 256-step noise-free geometric chart, the exponential(10)
/// reconstruction has strictly more distinct gray levels than the raw
/// integral.
#[test]
fn criterion_08_gray_level_richness() {
    let scene = make_gradient_chart(1.0, 10_000.0, 256, 2, 2).unwrap();
    let sensor = SensorConfig::new(scene.width(), scene.height(), THRESHOLD).unwrap();
    let stream = simulate(&scene, &default_profile(), &sensor, &NoiseConfig::none(0)).unwrap();

    let count_for = |method: WeightingMethod| {
        let cfg = ReconstructionConfig::new(method, THRESHOLD, BASELINE).unwrap();
        let img = reconstruct(&stream, &cfg).unwrap();
        gray_level_count(&img, 1e-9).unwrap()
    };
    let raw = count_for(WeightingMethod::Raw);
    let weighted = count_for(WeightingMethod::exponential(10).unwrap());
    println!("[criterion 8] gray levels: raw = {raw}, exponential(10) = {weighted}");
    assert!(
        weighted > raw,
        "temporal weighting must produce more gray levels ({weighted} vs {raw})"
    );
}

/// Criterion 9: over 500 randomized noise-free pixel pairs truncated to a
/// shared event order, the valid-factor ratio under every strictly
/// decreasing weight is at least the raw ratio, strictly greater when the
/// first event times differ. Zero violations.
#[test]
fn criterion_09_amplification() {
    let profile = default_profile();
    let mut rng = PixelRng::for_sequence(909, StreamKind::Sampling);
    let weights = [
        WeightingMethod::Linear,
        WeightingMethod::Quadratic,
        WeightingMethod::hpoly(5).unwrap(),
        WeightingMethod::exponential(10).unwrap(),
    ];
    let mut violations = 0usize;
    let mut strict_checked = 0usize;
    for _ in 0..500 {
        let dim = BASELINE + rng.next_unit() * 500.0;
        let bright = dim * (1.001 + rng.next_unit() * 50.0);
        let scene = RadianceMap::from_values(2, 1, vec![bright, dim]).unwrap();
        let sensor = SensorConfig::new(2, 1, THRESHOLD).unwrap();
        let stream = simulate(&scene, &profile, &sensor, &NoiseConfig::none(0)).unwrap();
        let shared = stream
            .pixel_events(0, 0)
            .len()
            .min(stream.pixel_events(1, 0).len());
        if shared == 0 {
            continue;
        }
        let order = 1 + (rng.next_u64() as usize % shared);
        let truncated = stream.truncate_per_pixel(order);
        let first_times_differ =
            truncated.pixel_events(0, 0)[0].t != truncated.pixel_events(1, 0)[0].t;

        let ratio_for = |method: WeightingMethod| {
            let cfg = ReconstructionConfig::new(method, THRESHOLD, BASELINE).unwrap();
            let (valid, _) = decompose_reconstruction(&truncated, &cfg).unwrap();
            valid.get(0, 0) / valid.get(1, 0)
        };
        let raw_ratio = ratio_for(WeightingMethod::Raw);
        for &method in &weights {
            let weighted_ratio = ratio_for(method);
            if weighted_ratio < raw_ratio {
                violations += 1;
            }
            if first_times_differ {
                strict_checked += 1;
                if !(weighted_ratio > raw_ratio) {
                    violations += 1;
                }
            }
        }
    }
    println!(
        "[criterion 9] 500 pairs x 4 weights, {strict_checked} strict checks, {violations} violations"
    );
    assert!(strict_checked > 1000);
    assert_eq!(violations, 0, "decreasing weights must amplify valid ratios");
}

/// Criterion 10: `simulate --threads 1` and `--threads 8` produce
/// byte-identical stream files across 5 configurations.
#[test]
fn criterion_10_thread_determinism() {
    let configs = [
        (
            "filter-small",
            r#"
config_version = 1
[scene]
kind = "filter-array"
region_width = 4
region_height = 4
[noise]
seed = 1
"#,
        ),
        (
            "chart",
            r#"
config_version = 1
[scene]
kind = "chart"
steps = 24
region_width = 3
region_height = 5
[noise]
seed = 2
pseudo_rate = 3.0
"#,
        ),
        (
            "exp-ramp",
            r#"
config_version = 1
[scene]
kind = "filter-array"
region_width = 3
region_height = 3
[profile]
family = "exp-ramp"
rate = 2.5
[noise]
seed = 3
"#,
        ),
        (
            "table-uniform",
            r#"
config_version = 1
[scene]
kind = "uniform"
radiance = 120.0
[sensor]
width = 40
height = 30
[profile]
family = "table"
table = [[0.0, 0.0, 1.0], [0.4, 0.2, 0.95], [1.0, 1.0, 0.6]]
[noise]
seed = 4
pseudo_rate = 5.0
"#,
        ),
        (
            "noisy-chart",
            r#"
config_version = 1
[scene]
kind = "chart"
min_radiance = 0.2
max_radiance = 5000.0
steps = 12
region_width = 4
region_height = 4
[noise]
seed = 5
threshold_sigma = 0.2
pseudo_rate = 10.0
[output]
emit_provenance = true
"#,
        ),
    ];

    let dir = std::env::temp_dir()
        .join("evhdr-acceptance")
        .join(format!("{}-threads", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();

    for (name, config) in configs {
        let config_path = dir.join(format!("{name}.toml"));
        fs::write(&config_path, config).unwrap();
        let mut outputs: Vec<Vec<u8>> = Vec::new();
        for threads in ["1", "8"] {
            let out_dir = dir.join(format!("{name}-{threads}"));
            run_binary(&[
                "simulate",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "--threads",
                threads,
            ]);
            outputs.push(fs::read(out_dir.join("events.aevt")).unwrap());
        }
        assert_eq!(
            outputs[0], outputs[1],
            "config {name}: stream bytes differ between 1 and 8 threads"
        );
        println!(
            "[criterion 10] config {name}: {} identical bytes across thread counts",
            outputs[0].len()
        );
    }
}

fn run_binary(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_evhdr"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "evhdr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
