//! Evaluation measures over reconstructed images.
//!
//! Covers the standard-platform tests: per-region SNR, dynamic range from the
//! responsive density span, gray-level richness, reconstruction monotonicity
//! audits, and the two sweep drivers (weighting-method comparison and the
//! exponential k sweep).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modulation::ModulationProfile;
use crate::radiance::{DensityFilterArray, RadianceMap, Rect};
use crate::reconstruct::{
    apply_cmap, calibrate_cmap, reconstruct, ReconstructionConfig, WeightingMethod,
};
use crate::rng::{derive_seed, PixelRng, StreamKind};
use crate::scalar::{fl, to_f64, Scalar};
use crate::sim::{make_threshold_field, simulate_with_thresholds, NoiseConfig, SensorConfig};

/// Signal-to-noise ratio of a nominally uniform region. A region with zero
/// sample deviation reports the `Infinite` sentinel rather than a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr<F> {
    Db(F),
    Infinite,
}

impl<F: Scalar> Snr<F> {
    pub fn db(&self) -> Option<F> {
        match self {
            Snr::Db(v) => Some(*v),
            Snr::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Snr::Infinite)
    }

    /// Ordering with `Infinite` above every finite value.
    pub fn ge(&self, other: &Snr<F>) -> bool {
        match (self, other) {
            (Snr::Infinite, _) => true,
            (Snr::Db(_), Snr::Infinite) => false,
            (Snr::Db(a), Snr::Db(b)) => a >= b,
        }
    }

    pub fn gt(&self, other: &Snr<F>) -> bool {
        match (self, other) {
            (Snr::Infinite, Snr::Infinite) => false,
            (Snr::Infinite, Snr::Db(_)) => true,
            (Snr::Db(_), Snr::Infinite) => false,
            (Snr::Db(a), Snr::Db(b)) => a > b,
        }
    }
}

impl<F: Scalar> std::fmt::Display for Snr<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Db(v) => write!(f, "{v}"),
            Snr::Infinite => write!(f, "infinite"),
        }
    }
}

impl<F: Scalar> serde::Serialize for Snr<F> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(v) => serializer.serialize_f64(to_f64(*v)),
            Snr::Infinite => serializer.serialize_str("infinite"),
        }
    }
}

/// `10 log10(mean^2 / sample_variance)` over a region.
pub fn snr<F: Scalar>(img: &RadianceMap<F>, region: &Rect) -> Result<Snr<F>> {
    let values = img.region_values(region)?;
    let n = values.len();
    let mean = values.iter().fold(F::zero(), |a, &v| a + v) / fl::<F>(n as f64);
    if n < 2 {
        return Ok(Snr::Infinite);
    }
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .fold(F::zero(), |a, v| a + v)
        / fl::<F>((n - 1) as f64);
    if var == F::zero() {
        return Ok(Snr::Infinite);
    }
    Ok(Snr::Db(fl::<F>(10.0) * (mean * mean / var).log10()))
}

/// Dynamic range in dB spanned by two transmittance densities:
/// `20 * (dt_high - dt_low)`.
pub fn dynamic_range<F: Scalar>(dt_low: F, dt_high: F) -> Result<F> {
    if !(dt_low >= F::zero()) || !dt_low.is_finite() || !dt_high.is_finite() {
        return Err(Error::argument("densities must be non-negative and finite"));
    }
    if !(dt_high > dt_low) {
        return Err(Error::argument(format!(
            "high density {dt_high} must exceed low density {dt_low}"
        )));
    }
    Ok(fl::<F>(20.0) * (dt_high - dt_low))
}

/// Find the longest contiguous run of density levels that remain mutually
/// distinguishable in a reconstruction.
///
/// `ordered_regions` must be sorted by ascending density (descending
/// radiance). Level `i` is responsive when its region mean exceeds level
/// `i + 1`'s by at least `min_contrast` relative; the returned pair is the
/// 1-based first and last level of the longest run of responsive comparisons,
/// or `None` when no neighbors are distinguishable.
pub fn perceived_level_range<F: Scalar>(
    img: &RadianceMap<F>,
    ordered_regions: &[Rect],
    min_contrast: F,
) -> Result<Option<(usize, usize)>> {
    if ordered_regions.len() < 2 {
        return Err(Error::argument("perceived range needs at least 2 regions"));
    }
    if !(min_contrast > F::zero()) {
        return Err(Error::argument("min_contrast must be positive"));
    }
    let means: Vec<F> = ordered_regions
        .iter()
        .map(|r| img.region_mean(r))
        .collect::<Result<_>>()?;

    let responsive: Vec<bool> = means
        .windows(2)
        .map(|w| {
            let (bright, dim) = (w[0], w[1]);
            dim > F::zero() && bright > dim && (bright - dim) / dim >= min_contrast
        })
        .collect();

    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (i, &ok) in responsive.iter().enumerate() {
        match (ok, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                track_best(&mut best, s, i - 1);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        track_best(&mut best, s, responsive.len() - 1);
    }
    Ok(best.map(|(s, e)| (s + 1, e + 2)))
}

fn track_best(best: &mut Option<(usize, usize)>, start: usize, end: usize) {
    let len = end - start + 1;
    let current = best.map(|(s, e)| e - s + 1).unwrap_or(0);
    if len > current {
        *best = Some((start, end));
    }
}

/// The responsive span of a filter-array reconstruction together with its
/// dynamic range. Levels are 1-based indices into the ascending-density
/// ordering of the array.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResponsiveRange<F> {
    pub first_level: usize,
    pub last_level: usize,
    pub first_density: F,
    pub last_density: F,
    /// Present when the endpoint densities actually differ.
    pub dynamic_range_db: Option<F>,
}

/// Evaluate the perceived span of a filter-array reconstruction and the
/// dynamic range implied by its endpoint densities.
pub fn responsive_range<F: Scalar>(
    img: &RadianceMap<F>,
    array: &DensityFilterArray<F>,
    min_contrast: F,
) -> Result<Option<ResponsiveRange<F>>> {
    let ordered = array.by_ascending_density();
    let rects: Vec<Rect> = ordered.iter().map(|(_, r)| r.rect.clone()).collect();
    let Some((first, last)) = perceived_level_range(img, &rects, min_contrast)? else {
        return Ok(None);
    };
    let first_density = ordered[first - 1].0;
    let last_density = ordered[last - 1].0;
    let dynamic_range_db = if last_density > first_density {
        Some(dynamic_range(first_density, last_density)?)
    } else {
        None
    };
    Ok(Some(ResponsiveRange {
        first_level: first,
        last_level: last,
        first_density,
        last_density,
        dynamic_range_db,
    }))
}

/// Count distinct values after snapping values whose relative difference is
/// below `epsilon` onto one level.
pub fn gray_level_count<F: Scalar>(img: &RadianceMap<F>, epsilon: F) -> Result<usize> {
    if !(epsilon > F::zero()) {
        return Err(Error::argument("epsilon must be positive"));
    }
    let mut values = img.values().to_vec();
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("radiance values are finite"));
    let mut count = 0usize;
    let mut representative: Option<F> = None;
    for v in values {
        let same = match representative {
            None => false,
            Some(rep) if rep == F::zero() => v == F::zero(),
            Some(rep) => (v - rep) / rep < epsilon,
        };
        if !same {
            count += 1;
            representative = Some(v);
        }
    }
    Ok(count)
}

/// Outcome of a reconstruction-ordering audit over sampled pixel pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MonotonicityReport {
    /// Pairs where the reconstruction ordering contradicts the scene ordering.
    pub violations: usize,
    /// Pairs reconstructing to exactly equal values (not contradictions).
    pub ties: usize,
    /// Pairs that satisfied the sampling preconditions and were tested.
    pub pairs_sampled: usize,
}

/// Sample random pixel pairs whose scene radiances are meaningfully distinct
/// (ratio at least 1 + 1e-6, both at least `baseline`) and count pairs whose
/// reconstructed ordering contradicts the scene ordering.
pub fn monotonicity_violations<F: Scalar>(
    img: &RadianceMap<F>,
    scene: &RadianceMap<F>,
    baseline: F,
    sample_pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if img.width() != scene.width() || img.height() != scene.height() {
        return Err(Error::argument("image and scene dimensions differ"));
    }
    if sample_pairs == 0 {
        return Err(Error::argument("sample_pairs must be at least 1"));
    }
    let n = scene.values().len();
    let min_ratio = F::one() + fl::<F>(1e-6);
    let mut rng = PixelRng::for_sequence(seed, StreamKind::Sampling);
    let mut report = MonotonicityReport {
        violations: 0,
        ties: 0,
        pairs_sampled: 0,
    };
    let max_attempts = sample_pairs.saturating_mul(200);
    let mut attempts = 0usize;
    while report.pairs_sampled < sample_pairs && attempts < max_attempts {
        attempts += 1;
        let ia = (rng.next_u64() % n as u64) as usize;
        let ib = (rng.next_u64() % n as u64) as usize;
        let (la, lb) = (scene.values()[ia], scene.values()[ib]);
        let (bright, dim, lo) = if la >= lb { (ia, ib, lb) } else { (ib, ia, la) };
        if !(lo >= baseline) {
            continue;
        }
        let ratio = scene.values()[bright] / scene.values()[dim];
        if !(ratio >= min_ratio) {
            continue;
        }
        report.pairs_sampled += 1;
        let vb = img.values()[bright];
        let vd = img.values()[dim];
        if vb == vd {
            report.ties += 1;
        } else if vb < vd {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Calibration procedure parameters for the sweep drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec<F> {
    /// Number of uniform captures averaged into the correction map.
    pub captures: usize,
    /// Radiance of the uniform calibration scene.
    pub radiance: F,
}

/// One row of the weighting-method comparison table.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(bound = "F: Scalar")]
pub struct MethodSnr<F> {
    #[serde(serialize_with = "serialize_method")]
    pub method: WeightingMethod,
    pub with_cmap: bool,
    pub mean_snr: Snr<F>,
}

fn serialize_method<S: serde::Serializer>(
    m: &WeightingMethod,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_string())
}

/// One point of the exponential-k sweep.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(bound = "F: Scalar")]
pub struct KSweepPoint<F> {
    pub k: u32,
    pub mean_snr: Snr<F>,
}

/// The weighting method whose noise-free reconstruction fixes the responsive
/// region set shared by every cell of a sweep. Matching the decoder default
/// keeps the comparison aligned with the system's dynamic-range test.
const REFERENCE_METHOD: WeightingMethod = WeightingMethod::Exponential { k: 10 };

/// Regions of the array that stay mutually distinguishable in a noise-free
/// reconstruction decoded with the given method.
pub fn responsive_regions_for_method<F: Scalar>(
    array: &DensityFilterArray<F>,
    profile: &ModulationProfile<F>,
    sensor: &SensorConfig<F>,
    min_contrast: F,
    method: WeightingMethod,
) -> Result<Vec<Rect>> {
    let clean = NoiseConfig::none(0);
    let field = make_threshold_field(sensor, &clean)?;
    let stream = simulate_with_thresholds(array.map(), profile, &field, &clean)?;
    let cfg = ReconstructionConfig::new(method, sensor.threshold(), profile.baseline())?;
    let img = reconstruct(&stream, &cfg)?;
    let ordered = array.by_ascending_density();
    let rects: Vec<Rect> = ordered.iter().map(|(_, r)| r.rect.clone()).collect();
    let Some((first, last)) = perceived_level_range(&img, &rects, min_contrast)? else {
        return Err(Error::Numerical(
            "no responsive regions in the noise-free reference reconstruction".into(),
        ));
    };
    Ok(rects[first - 1..last].to_vec())
}

/// Regions averaged by the sweep drivers: the responsive set of the default
/// decoder's noise-free reconstruction, shared across every cell.
pub fn reference_regions<F: Scalar>(
    array: &DensityFilterArray<F>,
    profile: &ModulationProfile<F>,
    sensor: &SensorConfig<F>,
    min_contrast: F,
) -> Result<Vec<Rect>> {
    responsive_regions_for_method(array, profile, sensor, min_contrast, REFERENCE_METHOD)
}

struct SnrAccumulator<F> {
    sum_db: F,
    count: usize,
    any_infinite: bool,
}

impl<F: Scalar> SnrAccumulator<F> {
    fn new() -> Self {
        SnrAccumulator {
            sum_db: F::zero(),
            count: 0,
            any_infinite: false,
        }
    }

    fn push(&mut self, s: &Snr<F>) {
        match s {
            Snr::Db(v) => {
                self.sum_db = self.sum_db + *v;
                self.count += 1;
            }
            Snr::Infinite => self.any_infinite = true,
        }
    }

    fn finish(&self) -> Snr<F> {
        if self.any_infinite {
            Snr::Infinite
        } else {
            Snr::Db(self.sum_db / fl::<F>(self.count.max(1) as f64))
        }
    }
}

/// Simulate, optionally calibrate, reconstruct and score each weighting
/// method over the shared responsive regions, averaged over regions and
/// seeds. Captures are simulated once per seed and shared by all methods;
/// the correction map is estimated with the same weighting used at decode.
#[allow(clippy::too_many_arguments)]
pub fn snr_by_method<F: Scalar>(
    array: &DensityFilterArray<F>,
    profile: &ModulationProfile<F>,
    sensor: &SensorConfig<F>,
    noise: &NoiseConfig<F>,
    methods: &[WeightingMethod],
    with_cmap: bool,
    seeds: &[u64],
    calibration: &CalibrationSpec<F>,
    min_contrast: F,
) -> Result<Vec<MethodSnr<F>>> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::argument("methods and seeds must be non-empty"));
    }
    let regions = reference_regions(array, profile, sensor, min_contrast)?;
    let table = mean_snr_over_regions(
        array,
        profile,
        sensor,
        noise,
        methods,
        with_cmap,
        seeds,
        calibration,
        &regions,
    )?;
    Ok(methods
        .iter()
        .zip(table)
        .map(|(&method, mean_snr)| MethodSnr {
            method,
            with_cmap,
            mean_snr,
        })
        .collect())
}

/// Mean SNR of the exponential weighting as a function of k, over the shared
/// responsive regions and the given seeds. The corrected pipeline is used
/// whenever `calibration.captures > 0`.
#[allow(clippy::too_many_arguments)]
pub fn k_sweep<F: Scalar>(
    array: &DensityFilterArray<F>,
    profile: &ModulationProfile<F>,
    sensor: &SensorConfig<F>,
    noise: &NoiseConfig<F>,
    k_values: &[u32],
    seeds: &[u64],
    calibration: &CalibrationSpec<F>,
    min_contrast: F,
) -> Result<Vec<KSweepPoint<F>>> {
    if k_values.is_empty() || seeds.is_empty() {
        return Err(Error::argument("k values and seeds must be non-empty"));
    }
    if k_values.contains(&0) {
        return Err(Error::argument("k values must be at least 1"));
    }
    let methods: Vec<WeightingMethod> = k_values
        .iter()
        .map(|&k| WeightingMethod::exponential(k))
        .collect::<Result<_>>()?;
    let regions = reference_regions(array, profile, sensor, min_contrast)?;
    let with_cmap = calibration.captures > 0;
    let table = mean_snr_over_regions(
        array,
        profile,
        sensor,
        noise,
        &methods,
        with_cmap,
        seeds,
        calibration,
        &regions,
    )?;
    Ok(k_values
        .iter()
        .zip(table)
        .map(|(&k, mean_snr)| KSweepPoint { k, mean_snr })
        .collect())
}

/// Shared sweep engine: returns one mean SNR per method, aggregated over all
/// (seed, region) cells. Seeds fan out in parallel; the aggregation order is
/// fixed by the seed list, independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn mean_snr_over_regions<F: Scalar>(
    array: &DensityFilterArray<F>,
    profile: &ModulationProfile<F>,
    sensor: &SensorConfig<F>,
    noise: &NoiseConfig<F>,
    methods: &[WeightingMethod],
    with_cmap: bool,
    seeds: &[u64],
    calibration: &CalibrationSpec<F>,
    regions: &[Rect],
) -> Result<Vec<Snr<F>>> {
    if with_cmap && calibration.captures == 0 {
        return Err(Error::argument("correction requested with zero calibration captures"));
    }
    noise.validate()?;
    let uniform = RadianceMap::uniform(
        array.map().width(),
        array.map().height(),
        calibration.radiance,
    )?;

    let per_seed: Vec<Result<Vec<Vec<Snr<F>>>>> = seeds
        .par_iter()
        .map(|&seed| {
            let seeded = NoiseConfig {
                threshold_sigma: noise.threshold_sigma,
                pseudo_rate: noise.pseudo_rate,
                seed,
            };
            let field = make_threshold_field(sensor, &seeded)?;
            let eval = simulate_with_thresholds(array.map(), profile, &field, &seeded)?;
            let captures: Vec<_> = if with_cmap {
                (0..calibration.captures)
                    .map(|i| {
                        let cap_noise = NoiseConfig {
                            threshold_sigma: noise.threshold_sigma,
                            pseudo_rate: noise.pseudo_rate,
                            seed: derive_seed(seed, 0xCA11 + i as u64),
                        };
                        simulate_with_thresholds(&uniform, profile, &field, &cap_noise)
                    })
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            };

            let mut rows = Vec::with_capacity(methods.len());
            for &method in methods {
                let cfg = ReconstructionConfig::new(method, sensor.threshold(), profile.baseline())?;
                let mut img = reconstruct(&eval, &cfg)?;
                if with_cmap {
                    let cmap = calibrate_cmap(&captures, &cfg)?;
                    img = apply_cmap(&img, &cmap)?;
                }
                let mut row = Vec::with_capacity(regions.len());
                for region in regions {
                    row.push(snr(&img, region)?);
                }
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();

    let mut accs: Vec<SnrAccumulator<F>> = methods.iter().map(|_| SnrAccumulator::new()).collect();
    for seed_rows in per_seed {
        let rows = seed_rows?;
        for (acc, row) in accs.iter_mut().zip(rows) {
            for s in &row {
                acc.push(s);
            }
        }
    }
    Ok(accs.iter().map(|a| a.finish()).collect())
}
