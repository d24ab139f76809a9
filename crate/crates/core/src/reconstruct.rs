//! HDR intensity decoding from event streams.
//!
//! A pixel's intensity is recovered as `baseline * exp(c * sum_i w(t_i) * p_i)`
//! where the weight `w` decreases with the event timestamp. Because brighter
//! pixels reach every trigger level earlier, down-weighting late events
//! amplifies genuine brightness differences while suppressing dark-current
//! pseudo events, which are uniform in time. Static threshold inconsistency is
//! handled separately by a multiplicative per-pixel gain map estimated from
//! repeated uniform captures.

use crate::error::{Error, Result};
use crate::radiance::RadianceMap;
use crate::scalar::{fl, Scalar};
use crate::sim::{EventStream, Provenance};

/// Temporal weighting applied to each event before summation. Every variant
/// is monotone non-increasing on `[0, 1]` with weight 1 at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightingMethod {
    /// Plain event integration, weight 1 everywhere.
    Raw,
    /// `1 - t`.
    Linear,
    /// `(1 - t)^2`.
    Quadratic,
    /// `(1 - t)^order`.
    HPoly { order: u32 },
    /// `2^(-k t)`.
    Exponential { k: u32 },
}

impl WeightingMethod {
    pub fn hpoly(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::argument("hpoly order must be at least 1"));
        }
        Ok(WeightingMethod::HPoly { order })
    }

    pub fn exponential(k: u32) -> Result<Self> {
        if k == 0 {
            // k = 0 would reduce to the raw integral; keep the variants distinct.
            return Err(Error::argument("exponential k must be at least 1"));
        }
        Ok(WeightingMethod::Exponential { k })
    }

    /// Weight at normalized time `t in [0, 1]`.
    pub fn weight<F: Scalar>(&self, t: F) -> Result<F> {
        if !(t >= F::zero() && t <= F::one()) {
            return Err(Error::domain(format!("weight time {t} outside [0, 1]")));
        }
        Ok(self.weight_unchecked(t))
    }

    #[inline]
    pub(crate) fn weight_unchecked<F: Scalar>(&self, t: F) -> F {
        match *self {
            WeightingMethod::Raw => F::one(),
            WeightingMethod::Linear => F::one() - t,
            WeightingMethod::Quadratic => (F::one() - t).powi(2),
            WeightingMethod::HPoly { order } => (F::one() - t).powi(order as i32),
            WeightingMethod::Exponential { k } => (-fl::<F>(k as f64) * t).exp2(),
        }
    }
}

impl std::fmt::Display for WeightingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightingMethod::Raw => write!(f, "raw"),
            WeightingMethod::Linear => write!(f, "linear"),
            WeightingMethod::Quadratic => write!(f, "quadratic"),
            WeightingMethod::HPoly { order } => write!(f, "hpoly({order})"),
            WeightingMethod::Exponential { k } => write!(f, "exponential({k})"),
        }
    }
}

/// Decoder configuration: weighting, the trigger threshold assumed for the
/// stream, and the constant-path baseline radiance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig<F> {
    pub method: WeightingMethod,
    pub threshold: F,
    pub baseline: F,
}

impl<F: Scalar> ReconstructionConfig<F> {
    pub fn new(method: WeightingMethod, threshold: F, baseline: F) -> Result<Self> {
        if !(threshold > F::zero()) || !threshold.is_finite() {
            return Err(Error::argument(format!(
                "reconstruction threshold must be positive, got {threshold}"
            )));
        }
        if !(baseline > F::zero()) || !baseline.is_finite() {
            return Err(Error::argument(format!(
                "baseline radiance must be positive, got {baseline}"
            )));
        }
        Ok(ReconstructionConfig {
            method,
            threshold,
            baseline,
        })
    }

    /// Configuration taking threshold from the stream header.
    pub fn for_stream(method: WeightingMethod, stream: &EventStream<F>, baseline: F) -> Result<Self> {
        Self::new(method, stream.threshold(), baseline)
    }
}

fn weighted_polarity_sums<F: Scalar>(
    stream: &EventStream<F>,
    method: WeightingMethod,
    filter: Option<Provenance>,
) -> Vec<F> {
    let mut sums = vec![F::zero(); stream.width() * stream.height()];
    for e in stream.events() {
        if let Some(wanted) = filter {
            if e.provenance != Some(wanted) {
                continue;
            }
        }
        let idx = e.y as usize * stream.width() + e.x as usize;
        sums[idx] = sums[idx] + method.weight_unchecked(e.t) * e.polarity.sign::<F>();
    }
    sums
}

fn exponentiate<F: Scalar>(sums: &[F], threshold: F, scale: F) -> Vec<F> {
    sums.iter().map(|&s| scale * (threshold * s).exp()).collect()
}

/// Decode an intensity image from an event stream. Pixels with no events
/// decode to exactly the baseline.
pub fn reconstruct<F: Scalar>(
    stream: &EventStream<F>,
    cfg: &ReconstructionConfig<F>,
) -> Result<RadianceMap<F>> {
    let sums = weighted_polarity_sums(stream, cfg.method, None);
    let values = exponentiate(&sums, cfg.threshold, cfg.baseline);
    RadianceMap::from_values(stream.width(), stream.height(), values)
}

/// Split a fully labelled stream into its valid and pseudo reconstruction
/// factors: `reconstruct = baseline * valid_factor * pseudo_factor`,
/// pixel-wise. Errors if any event lacks a provenance label.
pub fn decompose_reconstruction<F: Scalar>(
    stream: &EventStream<F>,
    cfg: &ReconstructionConfig<F>,
) -> Result<(RadianceMap<F>, RadianceMap<F>)> {
    if stream.events().iter().any(|e| e.provenance.is_none()) {
        return Err(Error::argument(
            "decomposition requires provenance labels on every event",
        ));
    }
    let valid_sums = weighted_polarity_sums(stream, cfg.method, Some(Provenance::Valid));
    let pseudo_sums = weighted_polarity_sums(stream, cfg.method, Some(Provenance::Pseudo));
    let valid = exponentiate(&valid_sums, cfg.threshold, F::one());
    let pseudo = exponentiate(&pseudo_sums, cfg.threshold, F::one());
    Ok((
        RadianceMap::from_values(stream.width(), stream.height(), valid)?,
        RadianceMap::from_values(stream.width(), stream.height(), pseudo)?,
    ))
}

/// Per-pixel multiplicative correction gains for threshold fixed-pattern
/// noise ("c-map").
#[derive(Debug, Clone, PartialEq)]
pub struct CMap<F> {
    width: usize,
    height: usize,
    gains: Vec<F>,
}

impl<F: Scalar> CMap<F> {
    pub fn from_gains(width: usize, height: usize, gains: Vec<F>) -> Result<Self> {
        if gains.len() != width * height {
            return Err(Error::argument("gain count does not match dimensions"));
        }
        for g in &gains {
            if !(*g > F::zero()) || !g.is_finite() {
                return Err(Error::argument(format!(
                    "correction gains must be positive and finite, got {g}"
                )));
            }
        }
        Ok(CMap {
            width,
            height,
            gains,
        })
    }

    /// All-ones map (identity correction).
    pub fn identity(width: usize, height: usize) -> Self {
        CMap {
            width,
            height,
            gains: vec![F::one(); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gains(&self) -> &[F] {
        &self.gains
    }
}

/// Estimate a correction map from repeated captures of a uniform scene:
/// reconstruct each capture, average pixel-wise, and take each pixel's gain
/// as global mean over pixel value. Normalizing to the global mean keeps the
/// image scale unchanged.
pub fn calibrate_cmap<F: Scalar>(
    uniform_streams: &[EventStream<F>],
    cfg: &ReconstructionConfig<F>,
) -> Result<CMap<F>> {
    let first = uniform_streams
        .first()
        .ok_or_else(|| Error::argument("calibration needs at least one capture"))?;
    let (width, height) = (first.width(), first.height());
    for s in uniform_streams {
        if s.width() != width || s.height() != height {
            return Err(Error::argument("calibration captures differ in dimensions"));
        }
    }

    let mut acc = vec![F::zero(); width * height];
    for stream in uniform_streams {
        let img = reconstruct(stream, cfg)?;
        for (a, &v) in acc.iter_mut().zip(img.values()) {
            *a = *a + v;
        }
    }
    let n = fl::<F>(uniform_streams.len() as f64);
    for a in acc.iter_mut() {
        *a = *a / n;
    }
    let total = acc.iter().fold(F::zero(), |s, &v| s + v);
    let global_mean = total / fl::<F>(acc.len() as f64);
    let gains: Vec<F> = acc.iter().map(|&v| global_mean / v).collect();
    CMap::from_gains(width, height, gains)
}

/// Apply a correction map: `out = img * gain`, pixel-wise. Apply exactly once
/// per reconstruction; gains compound if applied repeatedly.
pub fn apply_cmap<F: Scalar>(img: &RadianceMap<F>, cmap: &CMap<F>) -> Result<RadianceMap<F>> {
    if img.width() != cmap.width() || img.height() != cmap.height() {
        return Err(Error::argument(format!(
            "image {}x{} does not match correction map {}x{}",
            img.width(),
            img.height(),
            cmap.width(),
            cmap.height()
        )));
    }
    let values: Vec<F> = img
        .values()
        .iter()
        .zip(cmap.gains())
        .map(|(&v, &g)| v * g)
        .collect();
    RadianceMap::from_values(img.width(), img.height(), values)
}
