//! Temporal light modulation.
//!
//! The sensor's incident light is the sum of two paths: a scene path whose
//! transmittance ramps up from zero, and a constant uniform path whose
//! transmittance fades down from one. The fade must be slower than the ramp
//! so that brighter pixels always reach each trigger level first. Time is
//! normalized to `[0, 1]` everywhere; `duration` only scales timestamps into
//! seconds at the I/O boundary.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};

/// Parametric transmittance families. `Linear` and `ExpRamp` admit
/// closed-form crossing solves; sampled tables are interpolated linearly and
/// solved by bisection.
#[derive(Debug, Clone)]
pub enum TransmittanceFamily<F> {
    /// `T1(t) = t`, `T2(t) = 1 - alpha * t`.
    Linear { alpha: F },
    /// `T1(t) = (e^{rate t} - 1) / (e^{rate} - 1)`, `T2 = 1 - alpha * T1`.
    ExpRamp { alpha: F, rate: F },
    /// Sampled `(t, T1, T2)` rows, linearly interpolated.
    Table(Vec<(F, F, F)>),
}

/// The dual-path modulation profile driving the sensor.
#[derive(Debug, Clone)]
pub struct ModulationProfile<F> {
    family: TransmittanceFamily<F>,
    lens_attenuation: F,
    baseline: F,
    duration: F,
}

fn check_common<F: Scalar>(lens_attenuation: F, baseline: F, duration: F) -> Result<()> {
    if !(lens_attenuation > F::zero() && lens_attenuation <= F::one()) {
        return Err(Error::argument(format!(
            "lens attenuation must be in (0, 1], got {lens_attenuation}"
        )));
    }
    if !(baseline > F::zero()) || !baseline.is_finite() {
        return Err(Error::argument(format!(
            "constant-path radiance must be positive and finite, got {baseline}"
        )));
    }
    if !(duration > F::zero()) || !duration.is_finite() {
        return Err(Error::argument(format!(
            "modulation duration must be positive, got {duration}"
        )));
    }
    Ok(())
}

/// Linear ramp profile: `T1(t) = t`, `T2(t) = 1 - alpha t`.
///
/// `alpha` is the ratio of the constant-path fade rate to the scene-path ramp
/// rate and must stay below one, otherwise the fade would outpace the ramp.
pub fn linear_profile<F: Scalar>(
    alpha: F,
    lens_attenuation: F,
    baseline: F,
    duration: F,
) -> Result<ModulationProfile<F>> {
    check_common(lens_attenuation, baseline, duration)?;
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(Error::argument(format!(
            "alpha must be in (0, 1) so the constant path fades slower than the scene path ramps, got {alpha}"
        )));
    }
    Ok(ModulationProfile {
        family: TransmittanceFamily::Linear { alpha },
        lens_attenuation,
        baseline,
        duration,
    })
}

/// Exponential ramp profile: the scene path follows a normalized exponential
/// ramp with the given rate, the constant path fades as `1 - alpha * ramp`.
pub fn exp_ramp_profile<F: Scalar>(
    alpha: F,
    rate: F,
    lens_attenuation: F,
    baseline: F,
    duration: F,
) -> Result<ModulationProfile<F>> {
    check_common(lens_attenuation, baseline, duration)?;
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(Error::argument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if rate == F::zero() || !rate.is_finite() {
        return Err(Error::argument("exp-ramp rate must be non-zero and finite"));
    }
    Ok(ModulationProfile {
        family: TransmittanceFamily::ExpRamp { alpha, rate },
        lens_attenuation,
        baseline,
        duration,
    })
}

/// Sampled-table profile with linear interpolation between rows.
///
/// The constructor only enforces what the solver needs: at least two rows,
/// times strictly increasing from 0 to 1, finite transmittances in `[0, 1]`.
/// Boundary values, monotonicity and the derivative-magnitude condition are
/// checked by [`validate_profile`] so that degenerate rigs (e.g. a frozen
/// modulator) can still be simulated.
pub fn table_profile<F: Scalar>(
    samples: Vec<(F, F, F)>,
    lens_attenuation: F,
    baseline: F,
    duration: F,
) -> Result<ModulationProfile<F>> {
    check_common(lens_attenuation, baseline, duration)?;
    if samples.len() < 2 {
        return Err(Error::argument("table profile needs at least 2 samples"));
    }
    if samples[0].0 != F::zero() || samples[samples.len() - 1].0 != F::one() {
        return Err(Error::argument("table samples must span t = 0 to t = 1"));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::argument("table sample times must be strictly increasing"));
        }
    }
    for &(t, t1, t2) in &samples {
        let in_unit = |v: F| v.is_finite() && v >= F::zero() && v <= F::one();
        if !in_unit(t1) || !in_unit(t2) {
            return Err(Error::argument(format!(
                "transmittance out of [0, 1] at t = {t}: T1 = {t1}, T2 = {t2}"
            )));
        }
    }
    Ok(ModulationProfile {
        family: TransmittanceFamily::Table(samples),
        lens_attenuation,
        baseline,
        duration,
    })
}

impl<F: Scalar> ModulationProfile<F> {
    pub fn family(&self) -> &TransmittanceFamily<F> {
        &self.family
    }

    pub fn lens_attenuation(&self) -> F {
        self.lens_attenuation
    }

    /// Radiance of the constant uniform path (the reconstruction baseline).
    pub fn baseline(&self) -> F {
        self.baseline
    }

    pub fn duration(&self) -> F {
        self.duration
    }

    fn ramp(&self, t: F) -> F {
        match &self.family {
            TransmittanceFamily::Linear { .. } => t,
            TransmittanceFamily::ExpRamp { rate, .. } => {
                ((*rate * t).exp() - F::one()) / (rate.exp() - F::one())
            }
            TransmittanceFamily::Table(_) => unreachable!("tables do not use the ramp"),
        }
    }

    /// Scene-path transmittance `T1(t)`.
    pub fn scene_transmittance(&self, t: F) -> F {
        match &self.family {
            TransmittanceFamily::Linear { .. } | TransmittanceFamily::ExpRamp { .. } => self.ramp(t),
            TransmittanceFamily::Table(samples) => interp(samples, t, 1),
        }
    }

    /// Constant-path transmittance `T2(t)`.
    pub fn constant_transmittance(&self, t: F) -> F {
        match &self.family {
            TransmittanceFamily::Linear { alpha } => F::one() - *alpha * t,
            TransmittanceFamily::ExpRamp { alpha, .. } => F::one() - *alpha * self.ramp(t),
            TransmittanceFamily::Table(samples) => interp(samples, t, 2),
        }
    }

    /// Sensor irradiance for a pixel seeing `scene_radiance`, including the
    /// lens attenuation. Errors when `t` is outside `[0, 1]`.
    pub fn incident_intensity(&self, scene_radiance: F, t: F) -> Result<F> {
        if !(t >= F::zero() && t <= F::one()) {
            return Err(Error::domain(format!("normalized time {t} outside [0, 1]")));
        }
        if !(scene_radiance >= F::zero()) {
            return Err(Error::domain(format!("scene radiance {scene_radiance} negative")));
        }
        Ok(self.intensity_unchecked(scene_radiance, t))
    }

    #[inline]
    fn intensity_unchecked(&self, scene_radiance: F, t: F) -> F {
        let scene_part = self.scene_transmittance(t) * scene_radiance;
        let constant_part = self.constant_transmittance(t) * self.baseline;
        self.lens_attenuation * (scene_part + constant_part)
    }
}

fn interp<F: Scalar>(samples: &[(F, F, F)], t: F, column: usize) -> F {
    let pick = |row: &(F, F, F)| if column == 1 { row.1 } else { row.2 };
    if t <= samples[0].0 {
        return pick(&samples[0]);
    }
    if t >= samples[samples.len() - 1].0 {
        return pick(&samples[samples.len() - 1]);
    }
    let idx = samples.partition_point(|row| row.0 <= t);
    let lo = &samples[idx - 1];
    let hi = &samples[idx];
    let w = (t - lo.0) / (hi.0 - lo.0);
    pick(lo) + (pick(hi) - pick(lo)) * w
}

/// Single-path modulation `I(t) = f(t) * lens * L`. Because the modulation
/// factor is separable from the scene radiance, trigger times carry no scene
/// information; this exists to demonstrate exactly that degeneracy.
#[derive(Clone)]
pub struct SeparableProfile<F> {
    factor: Arc<dyn Fn(F) -> F + Send + Sync>,
    lens_attenuation: F,
    duration: F,
}

impl<F: Scalar> std::fmt::Debug for SeparableProfile<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparableProfile")
            .field("lens_attenuation", &self.lens_attenuation)
            .field("duration", &self.duration)
            .finish_non_exhaustive()
    }
}

/// Wrap a temporal factor `f` as a single-path profile. `f` must be strictly
/// positive; this is checked on a uniform grid including both endpoints.
pub fn separable_profile<F: Scalar>(
    factor: impl Fn(F) -> F + Send + Sync + 'static,
    lens_attenuation: F,
    duration: F,
) -> Result<SeparableProfile<F>> {
    if !(lens_attenuation > F::zero() && lens_attenuation <= F::one()) {
        return Err(Error::argument("lens attenuation must be in (0, 1]"));
    }
    if !(duration > F::zero()) {
        return Err(Error::argument("duration must be positive"));
    }
    let grid = 1024usize;
    for i in 0..=grid {
        let t = fl::<F>(i as f64 / grid as f64);
        let v = factor(t);
        if !(v > F::zero()) || !v.is_finite() {
            return Err(Error::argument(format!(
                "separable factor must be positive on [0, 1]; f({t}) = {v}"
            )));
        }
    }
    Ok(SeparableProfile {
        factor: Arc::new(factor),
        lens_attenuation,
        duration,
    })
}

impl<F: Scalar> SeparableProfile<F> {
    pub fn factor(&self, t: F) -> F {
        (self.factor)(t)
    }

    pub fn duration(&self) -> F {
        self.duration
    }

    pub fn lens_attenuation(&self) -> F {
        self.lens_attenuation
    }
}

/// How the event solver should treat a modulation.
pub enum CrossingSolve<F> {
    /// Closed-form earliest time in `(after, 1]` where the intensity reaches
    /// `target`, or `None` when the level is never reached.
    Exact(Option<F>),
    /// No closed form; bracket on the solver grid and bisect.
    Numeric,
}

/// Anything that drives a pixel's incident intensity over normalized time.
pub trait Modulation<F: Scalar>: Sync {
    /// Incident intensity for scene radiance `scene` at time `t`.
    fn intensity(&self, scene: F, t: F) -> F;

    /// Physical ramp duration in seconds.
    fn duration(&self) -> F;

    /// Closed-form crossing solve where the family supports it.
    fn solve_crossing(&self, _scene: F, _after: F, _target: F) -> CrossingSolve<F> {
        CrossingSolve::Numeric
    }

    /// Interior grid points between which the intensity is monotone. The
    /// numeric solver refines this grid; an empty slice means "unknown".
    fn monotone_knots(&self) -> Vec<F> {
        Vec::new()
    }
}

impl<F: Scalar> Modulation<F> for ModulationProfile<F> {
    fn intensity(&self, scene: F, t: F) -> F {
        self.intensity_unchecked(scene, t)
    }

    fn duration(&self) -> F {
        self.duration
    }

    fn solve_crossing(&self, scene: F, after: F, target: F) -> CrossingSolve<F> {
        match &self.family {
            TransmittanceFamily::Table(_) => CrossingSolve::Numeric,
            TransmittanceFamily::Linear { alpha } | TransmittanceFamily::ExpRamp { alpha, .. } => {
                // I(t) = lens * (baseline + slope * ramp(t)) with
                // slope = scene - alpha * baseline, ramp monotone 0 -> 1.
                let slope = scene - *alpha * self.baseline;
                if slope == F::zero() {
                    return CrossingSolve::Exact(None);
                }
                let ramp_at = (target / self.lens_attenuation - self.baseline) / slope;
                if !(ramp_at > F::zero() && ramp_at <= F::one()) {
                    return CrossingSolve::Exact(None);
                }
                let t = match &self.family {
                    TransmittanceFamily::Linear { .. } => ramp_at,
                    TransmittanceFamily::ExpRamp { rate, .. } => {
                        (F::one() + ramp_at * (rate.exp() - F::one())).ln() / *rate
                    }
                    TransmittanceFamily::Table(_) => unreachable!(),
                };
                if t > after && t <= F::one() {
                    CrossingSolve::Exact(Some(t))
                } else {
                    CrossingSolve::Exact(None)
                }
            }
        }
    }

    fn monotone_knots(&self) -> Vec<F> {
        match &self.family {
            TransmittanceFamily::Table(samples) => {
                samples[1..samples.len() - 1].iter().map(|row| row.0).collect()
            }
            _ => Vec::new(),
        }
    }
}

impl<F: Scalar> Modulation<F> for SeparableProfile<F> {
    fn intensity(&self, scene: F, t: F) -> F {
        (self.factor)(t) * self.lens_attenuation * scene
    }

    fn duration(&self) -> F {
        self.duration
    }
}

/// Outcome of one structural check on a profile.
#[derive(Debug, Clone)]
pub struct ProfileCheck<F> {
    pub name: &'static str,
    pub passed: bool,
    /// First grid time where the condition failed.
    pub first_violation: Option<F>,
}

/// Numerical validation report for a modulation profile.
#[derive(Debug, Clone)]
pub struct ValidationReport<F> {
    pub checks: Vec<ProfileCheck<F>>,
}

impl<F: Scalar> ValidationReport<F> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ProfileCheck<F>> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ProfileCheck<F>> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Failures that break the simulator's assumptions, as opposed to the
    /// derivative-magnitude condition which only weakens reconstruction
    /// monotonicity.
    pub fn hard_failures(&self) -> impl Iterator<Item = &ProfileCheck<F>> {
        self.failures().filter(|c| c.name != "derivative_magnitude")
    }
}

/// Check boundary values, ranges, monotonicity and the derivative-magnitude
/// condition on a uniform grid of `samples` points.
pub fn validate_profile<F: Scalar>(
    profile: &ModulationProfile<F>,
    samples: usize,
) -> Result<ValidationReport<F>> {
    if samples < 2 {
        return Err(Error::argument("validation needs at least 2 samples"));
    }
    let n = samples - 1;
    let ts: Vec<F> = (0..=n).map(|i| fl::<F>(i as f64 / n as f64)).collect();
    let t1: Vec<F> = ts.iter().map(|&t| profile.scene_transmittance(t)).collect();
    let t2: Vec<F> = ts.iter().map(|&t| profile.constant_transmittance(t)).collect();

    let tol = fl::<F>(1e-9);
    let mut checks = Vec::new();

    let boundary_ok = (t1[0]).abs() <= tol && (t2[0] - F::one()).abs() <= tol;
    checks.push(ProfileCheck {
        name: "boundary",
        passed: boundary_ok,
        first_violation: if boundary_ok { None } else { Some(F::zero()) },
    });

    let mut range_violation = None;
    for (i, &t) in ts.iter().enumerate() {
        let in_unit = |v: F| v >= -tol && v <= F::one() + tol;
        if !in_unit(t1[i]) || !in_unit(t2[i]) {
            range_violation = Some(t);
            break;
        }
    }
    checks.push(ProfileCheck {
        name: "range",
        passed: range_violation.is_none(),
        first_violation: range_violation,
    });

    let mut mono_violation = None;
    for i in 1..ts.len() {
        if t1[i] < t1[i - 1] - tol || t2[i] > t2[i - 1] + tol {
            mono_violation = Some(ts[i]);
            break;
        }
    }
    checks.push(ProfileCheck {
        name: "monotonicity",
        passed: mono_violation.is_none(),
        first_violation: mono_violation,
    });

    let mut deriv_violation = None;
    for i in 1..ts.len() {
        let d1 = (t1[i] - t1[i - 1]).abs();
        let d2 = (t2[i] - t2[i - 1]).abs();
        if !(d2 < d1) {
            deriv_violation = Some(ts[i]);
            break;
        }
    }
    checks.push(ProfileCheck {
        name: "derivative_magnitude",
        passed: deriv_violation.is_none(),
        first_violation: deriv_violation,
    });

    Ok(ValidationReport { checks })
}
