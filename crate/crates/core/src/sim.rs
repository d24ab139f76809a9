//! Asynchronous per-pixel event simulation.
//!
//! Each pixel is an ideal continuous-time comparator on log intensity: an
//! event fires whenever the log of the incident intensity moves one threshold
//! step away from the level at the previous event, and the reference level
//! re-anchors on the level just crossed. Pixels are independent, so the
//! simulation parallelizes by row; determinism for any worker count comes
//! from per-pixel keyed RNG streams and a final canonical sort.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modulation::{CrossingSolve, Modulation, ModulationProfile};
use crate::radiance::RadianceMap;
use crate::rng::{PixelRng, StreamKind};
use crate::scalar::{fl, Scalar};

/// Bisection width at which a numeric crossing solve stops. Well inside the
/// documented 1e-9 solver tolerance so that two mathematically identical
/// solves agree to that tolerance.
const BISECT_TOL: f64 = 1e-11;

/// Uniform solver-grid segments used when a modulation provides no knots.
const DEFAULT_GRID: usize = 4096;

/// Event polarity: the sign of the log-intensity step that fired it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign<F: Scalar>(self) -> F {
        match self {
            Polarity::Negative => -F::one(),
            Polarity::Positive => F::one(),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    pub fn from_i8(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Polarity::Negative),
            1 => Ok(Polarity::Positive),
            other => Err(Error::argument(format!("polarity must be -1 or 1, got {other}"))),
        }
    }
}

/// Simulator ground-truth label: did the event come from the modulated signal
/// or from dark-current noise?
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Valid,
    Pseudo,
}

/// One asynchronous event. Timestamps are normalized to the modulation ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<F> {
    pub x: u16,
    pub y: u16,
    pub t: F,
    pub polarity: Polarity,
    pub provenance: Option<Provenance>,
}

impl<F: Scalar> Event<F> {
    fn sort_key(&self) -> (F, u16, u16, Polarity, u8) {
        let prov = match self.provenance {
            None => 0u8,
            Some(Provenance::Valid) => 1,
            Some(Provenance::Pseudo) => 2,
        };
        (self.t, self.y, self.x, self.polarity, prov)
    }
}

/// Sensor geometry and the nominal log-intensity trigger threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig<F> {
    width: usize,
    height: usize,
    threshold: F,
}

impl<F: Scalar> SensorConfig<F> {
    pub fn new(width: usize, height: usize, threshold: F) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("sensor dimensions must be at least 1x1"));
        }
        if width > u16::MAX as usize + 1 || height > u16::MAX as usize + 1 {
            return Err(Error::argument("sensor dimensions exceed 16-bit pixel coordinates"));
        }
        if !(threshold > F::zero()) || !threshold.is_finite() {
            return Err(Error::argument(format!(
                "trigger threshold must be positive and finite, got {threshold}"
            )));
        }
        Ok(SensorConfig {
            width,
            height,
            threshold,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn threshold(&self) -> F {
        self.threshold
    }
}

/// Noise model: per-pixel threshold deviation plus uniform-in-time
/// dark-current pseudo events, both derived deterministically from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig<F> {
    pub threshold_sigma: F,
    pub pseudo_rate: F,
    pub seed: u64,
}

impl<F: Scalar> NoiseConfig<F> {
    pub fn new(threshold_sigma: F, pseudo_rate: F, seed: u64) -> Result<Self> {
        let cfg = NoiseConfig {
            threshold_sigma,
            pseudo_rate,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noise-free configuration.
    pub fn none(seed: u64) -> Self {
        NoiseConfig {
            threshold_sigma: F::zero(),
            pseudo_rate: F::zero(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_sigma >= F::zero() && self.threshold_sigma < fl(0.5)) {
            return Err(Error::argument(format!(
                "threshold sigma must be in [0, 0.5), got {}",
                self.threshold_sigma
            )));
        }
        if !(self.pseudo_rate >= F::zero()) || !self.pseudo_rate.is_finite() {
            return Err(Error::argument(format!(
                "pseudo-event rate must be non-negative, got {}",
                self.pseudo_rate
            )));
        }
        Ok(())
    }
}

/// Per-pixel effective trigger thresholds `c * (1 + eps(x, y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdField<F> {
    width: usize,
    height: usize,
    nominal: F,
    values: Vec<F>,
}

impl<F: Scalar> ThresholdField<F> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The nominal sensor threshold the deviations are relative to.
    pub fn nominal(&self) -> F {
        self.nominal
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> F {
        self.values[y * self.width + x]
    }
}

/// Draw the multiplicative threshold deviation field. Deviations are i.i.d.
/// Gaussian with the configured sigma, clamped inside (-0.5, 0.5) so every
/// effective threshold stays positive. Sigma zero yields the exact nominal
/// threshold everywhere.
pub fn make_threshold_field<F: Scalar>(
    sensor: &SensorConfig<F>,
    noise: &NoiseConfig<F>,
) -> Result<ThresholdField<F>> {
    noise.validate()?;
    let c = sensor.threshold;
    let n = sensor.width * sensor.height;
    let values = if noise.threshold_sigma == F::zero() {
        vec![c; n]
    } else {
        let sigma = noise.threshold_sigma.to_f64().unwrap();
        let clamp = 0.5 * (1.0 - 1e-12);
        let mut values = Vec::with_capacity(n);
        for y in 0..sensor.height {
            for x in 0..sensor.width {
                let mut rng = PixelRng::new(noise.seed, StreamKind::Threshold, x as u32, y as u32);
                let eps = (rng.next_gaussian() * sigma).clamp(-clamp, clamp);
                values.push(c * (F::one() + fl(eps)));
            }
        }
        values
    };
    Ok(ThresholdField {
        width: sensor.width,
        height: sensor.height,
        nominal: c,
        values,
    })
}

/// Time-ordered event stream with the sensor context needed to decode it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream<F> {
    width: usize,
    height: usize,
    threshold: F,
    duration: F,
    events: Vec<Event<F>>,
}

impl<F: Scalar> EventStream<F> {
    /// Assemble a stream, validating events and establishing the canonical
    /// `(t, y, x, polarity, provenance)` order.
    pub fn from_parts(
        width: usize,
        height: usize,
        threshold: F,
        duration: F,
        mut events: Vec<Event<F>>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("stream dimensions must be at least 1x1"));
        }
        if !(threshold > F::zero()) || !(duration > F::zero()) {
            return Err(Error::argument("stream threshold and duration must be positive"));
        }
        for e in &events {
            if (e.x as usize) >= width || (e.y as usize) >= height {
                return Err(Error::argument(format!(
                    "event at ({}, {}) outside {}x{} sensor",
                    e.x, e.y, width, height
                )));
            }
            if !(e.t >= F::zero() && e.t <= F::one()) {
                return Err(Error::argument(format!(
                    "event timestamp {} outside [0, 1]",
                    e.t
                )));
            }
        }
        events.sort_unstable_by(|a, b| {
            a.sort_key()
                .partial_cmp(&b.sort_key())
                .expect("event keys are finite")
        });
        Ok(EventStream {
            width,
            height,
            threshold,
            duration,
            events,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Nominal sensor threshold the stream was generated with.
    pub fn threshold(&self) -> F {
        self.threshold
    }

    /// Physical ramp duration in seconds; timestamps stay normalized.
    pub fn duration(&self) -> F {
        self.duration
    }

    pub fn events(&self) -> &[Event<F>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Events of one pixel in time order.
    pub fn pixel_events(&self, x: u16, y: u16) -> Vec<&Event<F>> {
        self.events
            .iter()
            .filter(|e| e.x == x && e.y == y)
            .collect()
    }

    /// Copy with provenance labels removed (export default).
    pub fn without_provenance(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.events {
            e.provenance = None;
        }
        out
    }

    /// Truncated copy keeping each pixel's first `k` events. Used by the
    /// shared-order amplification analysis.
    pub fn truncate_per_pixel(&self, k: usize) -> Self {
        let mut counts = vec![0usize; self.width * self.height];
        let events = self
            .events
            .iter()
            .filter(|e| {
                let idx = e.y as usize * self.width + e.x as usize;
                counts[idx] += 1;
                counts[idx] <= k
            })
            .copied()
            .collect();
        EventStream {
            width: self.width,
            height: self.height,
            threshold: self.threshold,
            duration: self.duration,
            events,
        }
    }
}

/// Simulate the sensor under a modulation, drawing the threshold field and
/// pseudo events from the noise seed.
pub fn simulate<F: Scalar, M: Modulation<F>>(
    scene: &RadianceMap<F>,
    modulation: &M,
    sensor: &SensorConfig<F>,
    noise: &NoiseConfig<F>,
) -> Result<EventStream<F>> {
    let field = make_threshold_field(sensor, noise)?;
    simulate_with_thresholds(scene, modulation, &field, noise)
}

/// Simulate with an explicit threshold field.
///
/// Calibration workflows hold the fixed-pattern threshold field constant
/// while varying the pseudo-event seed across captures; this entry point is
/// what makes that possible.
pub fn simulate_with_thresholds<F: Scalar, M: Modulation<F>>(
    scene: &RadianceMap<F>,
    modulation: &M,
    thresholds: &ThresholdField<F>,
    noise: &NoiseConfig<F>,
) -> Result<EventStream<F>> {
    noise.validate()?;
    if scene.width() != thresholds.width() || scene.height() != thresholds.height() {
        return Err(Error::argument(format!(
            "scene {}x{} does not match sensor {}x{}",
            scene.width(),
            scene.height(),
            thresholds.width(),
            thresholds.height()
        )));
    }
    if scene.width() > u16::MAX as usize + 1 || scene.height() > u16::MAX as usize + 1 {
        return Err(Error::argument("scene exceeds 16-bit pixel coordinates"));
    }

    let width = scene.width();
    let height = scene.height();
    let grid = solver_grid(modulation);

    let mut rows: Vec<Vec<Event<F>>> = Vec::with_capacity(height);
    (0..height)
        .into_par_iter()
        .map(|y| {
            let mut row_events = Vec::new();
            for x in 0..width {
                let scene_radiance = scene.get(x, y);
                let c_px = thresholds.get(x, y);
                for (t, polarity) in pixel_valid_events(modulation, scene_radiance, c_px, &grid) {
                    row_events.push(Event {
                        x: x as u16,
                        y: y as u16,
                        t,
                        polarity,
                        provenance: Some(Provenance::Valid),
                    });
                }
                append_pixel_pseudo_events(&mut row_events, noise, x as u16, y as u16);
            }
            row_events
        })
        .collect_into_vec(&mut rows);

    let events: Vec<Event<F>> = rows.into_iter().flatten().collect();
    EventStream::from_parts(width, height, thresholds.nominal(), modulation.duration(), events)
}

/// Add dark-current pseudo events to a stream: per pixel a Poisson count with
/// mean `pseudo_rate`, timestamps i.i.d. uniform on [0, 1], polarity a fair
/// coin, all keyed by `(seed, pixel)`.
///
/// [`simulate`] already injects pseudo events when the rate is non-zero;
/// this exists to contaminate clean streams, and calling it on an already
/// noisy stream with the same seed duplicates its pseudo events.
pub fn inject_pseudo_events<F: Scalar>(
    stream: &EventStream<F>,
    noise: &NoiseConfig<F>,
) -> Result<EventStream<F>> {
    noise.validate()?;
    if noise.pseudo_rate == F::zero() {
        return Ok(stream.clone());
    }
    let width = stream.width();
    let height = stream.height();
    let mut rows: Vec<Vec<Event<F>>> = Vec::with_capacity(height);
    (0..height)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::new();
            for x in 0..width {
                append_pixel_pseudo_events(&mut row, noise, x as u16, y as u16);
            }
            row
        })
        .collect_into_vec(&mut rows);

    let mut events = stream.events().to_vec();
    events.extend(rows.into_iter().flatten());
    EventStream::from_parts(width, height, stream.threshold(), stream.duration(), events)
}

fn append_pixel_pseudo_events<F: Scalar>(
    out: &mut Vec<Event<F>>,
    noise: &NoiseConfig<F>,
    x: u16,
    y: u16,
) {
    if noise.pseudo_rate == F::zero() {
        return;
    }
    let mut rng = PixelRng::new(noise.seed, StreamKind::Pseudo, x as u32, y as u32);
    let count = rng.next_poisson(noise.pseudo_rate.to_f64().unwrap());
    for _ in 0..count {
        let t = fl::<F>(rng.next_unit());
        let polarity = if rng.next_bool() {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        out.push(Event {
            x,
            y,
            t,
            polarity,
            provenance: Some(Provenance::Pseudo),
        });
    }
}

/// Earliest normalized time at which a pixel's intensity reaches the k-th
/// positive trigger level `baseline * e^(k * threshold)` (scaled by the lens
/// factor on both sides, so the lens cancels). `None` when the level is not
/// reached within the ramp.
pub fn solve_kth_crossing<F: Scalar>(
    profile: &ModulationProfile<F>,
    scene_radiance: F,
    k: u32,
    threshold: F,
) -> Result<Option<F>> {
    if k == 0 {
        return Err(Error::argument("crossing order k must be at least 1"));
    }
    if !(threshold > F::zero()) || !threshold.is_finite() {
        return Err(Error::argument(format!(
            "threshold must be positive and finite, got {threshold}"
        )));
    }
    if !(scene_radiance >= F::zero()) || !scene_radiance.is_finite() {
        return Err(Error::argument(format!(
            "scene radiance must be non-negative and finite, got {scene_radiance}"
        )));
    }
    let start = profile.intensity(scene_radiance, F::zero());
    let target = start * (fl::<F>(k as f64) * threshold).exp();
    let grid = solver_grid(profile);
    Ok(solve_crossing_generic(profile, scene_radiance, F::zero(), target, &grid))
}

/// Build the time grid the numeric solver walks: the modulation's monotone
/// knots refined to at least `DEFAULT_GRID` uniform segments.
fn solver_grid<F: Scalar, M: Modulation<F>>(modulation: &M) -> Vec<F> {
    let knots = modulation.monotone_knots();
    let mut grid = Vec::with_capacity(DEFAULT_GRID + knots.len() + 2);
    grid.push(F::zero());
    grid.extend(knots.into_iter().filter(|&t| t > F::zero() && t < F::one()));
    grid.push(F::one());
    grid.sort_unstable_by(|a, b| a.partial_cmp(b).expect("grid times are finite"));
    grid.dedup();

    let step = fl::<F>(1.0 / DEFAULT_GRID as f64);
    let mut refined = Vec::with_capacity(DEFAULT_GRID + grid.len());
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        refined.push(a);
        let span = b - a;
        let subdivisions = (span / step).to_f64().unwrap().ceil() as usize;
        for i in 1..subdivisions {
            refined.push(a + span * fl::<F>(i as f64 / subdivisions as f64));
        }
    }
    refined.push(F::one());
    refined
}

/// Earliest time in `(after, 1]` where the intensity equals `target`, using
/// the closed form when the family has one and grid bisection otherwise.
fn solve_crossing_generic<F: Scalar, M: Modulation<F>>(
    modulation: &M,
    scene: F,
    after: F,
    target: F,
    grid: &[F],
) -> Option<F> {
    match modulation.solve_crossing(scene, after, target) {
        CrossingSolve::Exact(t) => t,
        CrossingSolve::Numeric => {
            let mut prev_t = after;
            let mut prev_i = modulation.intensity(scene, after);
            for &t in grid.iter().filter(|&&t| t > after) {
                let i = modulation.intensity(scene, t);
                let crossed_up = prev_i < target && i >= target;
                let crossed_down = prev_i > target && i <= target;
                if crossed_up || crossed_down {
                    return Some(bisect(modulation, scene, prev_t, t, target, crossed_up));
                }
                prev_t = t;
                prev_i = i;
            }
            None
        }
    }
}

/// Bisect for the crossing time inside a bracket where the intensity is
/// monotone. Returns the upper end of the final bracket so the reported time
/// sits on the crossed side.
fn bisect<F: Scalar, M: Modulation<F>>(
    modulation: &M,
    scene: F,
    mut lo: F,
    mut hi: F,
    target: F,
    upward: bool,
) -> F {
    let tol = fl::<F>(BISECT_TOL);
    while hi - lo > tol {
        let mid = (lo + hi) * fl::<F>(0.5);
        let v = modulation.intensity(scene, mid);
        let crossed = if upward { v >= target } else { v <= target };
        if crossed {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// All valid events of one pixel: walk trigger levels outward from the
/// starting intensity, re-anchoring on each level crossed.
fn pixel_valid_events<F: Scalar, M: Modulation<F>>(
    modulation: &M,
    scene: F,
    c_px: F,
    grid: &[F],
) -> Vec<(F, Polarity)> {
    let mut events = Vec::new();
    let start = modulation.intensity(scene, F::zero());
    if !(start > F::zero()) || !start.is_finite() {
        // A dead start level (zero incident light at t = 0) has no finite log
        // reference; physically the pixel sees no light until the ramp opens
        // and the first comparator level is undefined. Treat as silent.
        return events;
    }
    let step_up = c_px.exp();
    let step_down = (-c_px).exp();
    let mut anchor = start;
    let mut cursor = F::zero();
    loop {
        let up = anchor * step_up;
        let down = anchor * step_down;
        let t_up = solve_crossing_generic(modulation, scene, cursor, up, grid);
        let t_down = solve_crossing_generic(modulation, scene, cursor, down, grid);
        let (t, polarity, level) = match (t_up, t_down) {
            (None, None) => break,
            (Some(tu), None) => (tu, Polarity::Positive, up),
            (None, Some(td)) => (td, Polarity::Negative, down),
            (Some(tu), Some(td)) => {
                if tu <= td {
                    (tu, Polarity::Positive, up)
                } else {
                    (td, Polarity::Negative, down)
                }
            }
        };
        events.push((t, polarity));
        anchor = level;
        cursor = t;
        if events.len() > 1_000_000 {
            // A pixel emitting this much is a configuration error (the
            // dynamic range of any sane ramp is far smaller); stop rather
            // than hang.
            break;
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::{linear_profile, separable_profile, table_profile};

    fn sensor(w: usize, h: usize) -> SensorConfig<f64> {
        SensorConfig::new(w, h, 0.1).unwrap()
    }

    #[test]
    fn threshold_field_sigma_zero_is_uniform() {
        let field = make_threshold_field(&sensor(4, 3), &NoiseConfig::none(9)).unwrap();
        assert!(field.values().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn threshold_field_matches_requested_sigma() {
        let s = SensorConfig::new(100, 100, 0.1).unwrap();
        let noise = NoiseConfig::new(0.03, 0.0, 1234).unwrap();
        let field = make_threshold_field(&s, &noise).unwrap();
        let eps: Vec<f64> = field.values().iter().map(|&v| v / 0.1 - 1.0).collect();
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        let sd = (eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (eps.len() - 1) as f64)
            .sqrt();
        assert!((0.025..=0.035).contains(&sd), "sample sd {sd}");
        assert!(field.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn threshold_field_is_deterministic() {
        let s = SensorConfig::new(16, 16, 0.1).unwrap();
        let noise = NoiseConfig::new(0.03, 0.0, 7).unwrap();
        let a = make_threshold_field(&s, &noise).unwrap();
        let b = make_threshold_field(&s, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kth_crossing_closed_form_example() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let t = solve_kth_crossing(&p, 10.0, 1, 0.1).unwrap().unwrap();
        let expected = (0.1f64.exp() - 1.0) / (10.0 - 0.5);
        assert!((t - expected).abs() < 1e-12, "got {t}, expected {expected}");
        assert!((t - 0.011071).abs() < 1e-6);
    }

    #[test]
    fn kth_crossing_unreachable_level() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        // At L = baseline the total swing is ln(1.5); k*c beyond that never fires.
        let swing = 1.5f64.ln();
        let k_beyond = (swing / 0.1).ceil() as u32 + 1;
        assert!(solve_kth_crossing(&p, 1.0, k_beyond, 0.1).unwrap().is_none());
    }

    #[test]
    fn kth_crossing_validates_arguments() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        assert!(solve_kth_crossing(&p, 1.0, 0, 0.1).is_err());
        assert!(solve_kth_crossing(&p, 1.0, 1, 0.0).is_err());
        assert!(solve_kth_crossing(&p, -1.0, 1, 0.1).is_err());
    }

    #[test]
    fn brighter_pixels_trigger_earlier() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let mut rng = PixelRng::for_sequence(99, StreamKind::Sampling);
        for _ in 0..200 {
            let lb = 1.0 + rng.next_unit() * 100.0;
            let la = lb * (1.0 + 1e-3 + rng.next_unit() * 10.0);
            let k = 1 + (rng.next_u64() % 5) as u32;
            let ta = solve_kth_crossing(&p, la, k, 0.1).unwrap();
            let tb = solve_kth_crossing(&p, lb, k, 0.1).unwrap();
            if let (Some(ta), Some(tb)) = (ta, tb) {
                assert!(ta < tb, "la {la} lb {lb} k {k}: {ta} !< {tb}");
            }
        }
    }

    #[test]
    fn closed_form_matches_table_bisection() {
        // The same linear ramp expressed as a two-row table goes through the
        // numeric path; events must agree to the solver tolerance.
        let exact = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let table = table_profile(vec![(0.0, 0.0, 1.0), (1.0, 1.0, 0.5)], 1.0, 1.0, 0.05).unwrap();
        let grid_exact = solver_grid(&exact);
        let grid_table = solver_grid(&table);
        for scene in [0.05, 0.2, 1.0, 3.7, 250.0] {
            let a = pixel_valid_events(&exact, scene, 0.1, &grid_exact);
            let b = pixel_valid_events(&table, scene, 0.1, &grid_table);
            assert_eq!(a.len(), b.len(), "count mismatch at L = {scene}");
            for ((ta, pa), (tb, pb)) in a.iter().zip(&b) {
                let (ta, tb): (f64, f64) = (*ta, *tb);
                assert!((ta - tb).abs() < 1e-9, "L = {scene}: {ta} vs {tb}");
                assert_eq!(pa, pb);
            }
        }
    }

    #[test]
    fn uniform_baseline_scene_satisfies_trigger_equation() {
        // With L equal to the baseline, each k-th event time must satisfy
        // t*L + (1 - t/2) * baseline = e^(k c) * baseline.
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(3, 2, 1.0).unwrap();
        let stream = simulate(&scene, &p, &sensor(3, 2), &NoiseConfig::none(0)).unwrap();
        assert!(!stream.is_empty());
        for (k, e) in stream.pixel_events(0, 0).iter().enumerate() {
            let lhs = e.t * 1.0 + (1.0 - e.t / 2.0) * 1.0;
            let rhs = ((k as f64 + 1.0) * 0.1).exp();
            assert!((lhs - rhs).abs() < 1e-9, "k {k}: {lhs} vs {rhs}");
            assert_eq!(e.polarity, Polarity::Positive);
        }
    }

    #[test]
    fn separable_modulation_erases_scene_information() {
        let m = separable_profile(|t: f64| t + 1e-6, 1.0, 0.05).unwrap();
        let scene = RadianceMap::from_values(2, 1, vec![5.0, 500.0]).unwrap();
        let stream = simulate(&scene, &m, &sensor(2, 1), &NoiseConfig::none(0)).unwrap();
        let a = stream.pixel_events(0, 0);
        let b = stream.pixel_events(1, 0);
        assert_eq!(a.len(), b.len());
        assert!(!a.is_empty());
        for (ea, eb) in a.iter().zip(&b) {
            assert!((ea.t - eb.t).abs() <= 1e-9);
            assert_eq!(ea.polarity, eb.polarity);
        }
    }

    #[test]
    fn constant_factor_triggers_nothing() {
        let m = separable_profile(|_: f64| 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::from_values(2, 1, vec![5.0, 500.0]).unwrap();
        let stream = simulate(&scene, &m, &sensor(2, 1), &NoiseConfig::none(0)).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn exponential_factor_triggers_at_threshold_multiples() {
        // log I = t + log L, so crossings land exactly at t = k * c. The
        // threshold is chosen so no crossing sits on the t = 1 boundary.
        let m = separable_profile(|t: f64| t.exp(), 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(1, 1, 42.0).unwrap();
        let s = SensorConfig::new(1, 1, 0.15).unwrap();
        let stream = simulate(&scene, &m, &s, &NoiseConfig::none(0)).unwrap();
        assert_eq!(stream.len(), 6);
        for (k, e) in stream.events().iter().enumerate() {
            let expected = (k as f64 + 1.0) * 0.15;
            assert!((e.t - expected).abs() < 1e-9, "k {k}: {}", e.t);
        }
    }

    #[test]
    fn frozen_modulation_is_silent() {
        let p = table_profile(vec![(0.0, 0.0, 1.0), (1.0, 0.0, 1.0)], 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(4, 4, 100.0).unwrap();
        let stream = simulate(&scene, &p, &sensor(4, 4), &NoiseConfig::none(0)).unwrap();
        assert!(stream.is_empty());
    }

    #[test]
    fn event_count_matches_log_swing() {
        // With a monotone ramp the number of events is floor(|total log
        // change| / c) per pixel, sign deciding polarity.
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let mut rng = PixelRng::for_sequence(5, StreamKind::Sampling);
        let values: Vec<f64> = (0..64).map(|_| 0.01 + rng.next_unit() * 500.0).collect();
        let scene = RadianceMap::from_values(8, 8, values.clone()).unwrap();
        let stream = simulate(&scene, &p, &sensor(8, 8), &NoiseConfig::none(0)).unwrap();
        for y in 0..8u16 {
            for x in 0..8u16 {
                let l = values[y as usize * 8 + x as usize];
                let swing = ((l + 0.5) / 1.0f64).ln();
                let expected = (swing.abs() / 0.1).floor() as usize;
                let events = stream.pixel_events(x, y);
                assert_eq!(events.len(), expected, "L = {l}");
                let positive = swing > 0.0;
                assert!(events
                    .iter()
                    .all(|e| (e.polarity == Polarity::Positive) == positive));
            }
        }
    }

    #[test]
    fn simulate_rejects_dimension_mismatch() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(3, 3, 1.0).unwrap();
        assert!(simulate(&scene, &p, &sensor(4, 3), &NoiseConfig::none(0)).is_err());
    }

    #[test]
    fn pseudo_injection_preserves_order_and_counts() {
        // 1000 pixels at rate 3: one trial lands within 5 sigma of 3000.
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(40, 25, 10.0).unwrap();
        let clean = simulate(&scene, &p, &sensor(40, 25), &NoiseConfig::none(0)).unwrap();

        let noise = NoiseConfig::new(0.0, 3.0, 77).unwrap();
        let noisy = inject_pseudo_events(&clean, &noise).unwrap();
        assert!(noisy.len() > clean.len());
        for w in noisy.events().windows(2) {
            assert!(w[0].t <= w[1].t);
        }
        let pseudo = noisy
            .events()
            .iter()
            .filter(|e| e.provenance == Some(Provenance::Pseudo))
            .count();
        let expected = 3.0 * 1000.0;
        assert!(
            (pseudo as f64 - expected).abs() < 5.0 * expected.sqrt(),
            "pseudo count {pseudo}"
        );

        let unchanged = inject_pseudo_events(&clean, &NoiseConfig::none(77)).unwrap();
        assert_eq!(unchanged, clean);
    }

    #[test]
    fn pseudo_timestamps_are_uniform() {
        // Kolmogorov-Smirnov against U[0, 1] at alpha = 0.01.
        let noise = NoiseConfig::new(0.0, 3.0, 123).unwrap();
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let scene = RadianceMap::uniform(32, 32, 1.0).unwrap();
        let stream = simulate(&scene, &p, &sensor(32, 32), &noise).unwrap();
        let mut ts: Vec<f64> = stream
            .events()
            .iter()
            .filter(|e| e.provenance == Some(Provenance::Pseudo))
            .map(|e| e.t)
            .collect();
        ts.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = ts.len();
        assert!(n > 1000);
        let mut d = 0.0f64;
        for (i, &t) in ts.iter().enumerate() {
            let ecdf_hi = (i + 1) as f64 / n as f64;
            let ecdf_lo = i as f64 / n as f64;
            d = d.max((ecdf_hi - t).abs()).max((t - ecdf_lo).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }

    #[test]
    fn simulation_is_deterministic_across_pool_sizes() {
        let p = linear_profile(0.5, 1.0, 1.0, 0.05).unwrap();
        let arr = crate::radiance::DensityFilterArray::standard(1000.0, 4, 4).unwrap();
        let noise = NoiseConfig::new(0.03, 2.0, 42).unwrap();
        let s = SensorConfig::new(arr.map().width(), arr.map().height(), 0.1).unwrap();

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(arr.map(), &p, &s, &noise).unwrap())
        };
        let one = run(1);
        let many = run(8);
        assert_eq!(one, many);
    }

    #[test]
    fn stream_sorting_breaks_ties_deterministically() {
        let events = vec![
            Event {
                x: 1,
                y: 0,
                t: 0.5,
                polarity: Polarity::Positive,
                provenance: None,
            },
            Event {
                x: 0,
                y: 1,
                t: 0.5,
                polarity: Polarity::Positive,
                provenance: None,
            },
            Event {
                x: 0,
                y: 0,
                t: 0.25,
                polarity: Polarity::Negative,
                provenance: None,
            },
        ];
        let stream = EventStream::from_parts(2, 2, 0.1, 0.05, events).unwrap();
        let order: Vec<(u16, u16)> = stream.events().iter().map(|e| (e.x, e.y)).collect();
        // Ties in t break on (y, x): row 0 before row 1.
        assert_eq!(order, vec![(0, 0), (1, 0), (0, 1)]);
    }
}
