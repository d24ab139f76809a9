//! Scene radiance maps and standard test targets.
//!
//! Radiance is linear and unit-free throughout; nothing here is calibrated to
//! physical lux. The two generated targets are a stepped gradient chart and a
//! density-filter array backed by a uniform lightbox.

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};

/// 2D grid of non-negative, finite scene radiance values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceMap<F> {
    width: usize,
    height: usize,
    values: Vec<F>,
}

impl<F: Scalar> RadianceMap<F> {
    /// Uniform map.
    pub fn uniform(width: usize, height: usize, value: F) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height])
    }

    /// Build from row-major values, validating the type invariants.
    pub fn from_values(width: usize, height: usize, values: Vec<F>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument("radiance map dimensions must be at least 1x1"));
        }
        if values.len() != width * height {
            return Err(Error::argument(format!(
                "value count {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < F::zero() {
                return Err(Error::argument(format!(
                    "radiance value at index {i} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(RadianceMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> F {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: F) {
        self.values[y * self.width + x] = value;
    }

    /// Mean over a rectangular region.
    pub fn region_mean(&self, rect: &Rect) -> Result<F> {
        let vals = self.region_values(rect)?;
        let n = fl::<F>(vals.len() as f64);
        Ok(vals.iter().fold(F::zero(), |a, &v| a + v) / n)
    }

    /// Values of a rectangular region, row-major.
    pub fn region_values(&self, rect: &Rect) -> Result<Vec<F>> {
        if rect.width == 0 || rect.height == 0 {
            return Err(Error::argument("empty region"));
        }
        if rect.x + rect.width > self.width || rect.y + rect.height > self.height {
            return Err(Error::argument(format!(
                "region {rect:?} exceeds {}x{} map",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(rect.width * rect.height);
        for y in rect.y..rect.y + rect.height {
            out.extend_from_slice(&self.values[y * self.width + rect.x..y * self.width + rect.x + rect.width]);
        }
        Ok(out)
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// A labelled region of a scene.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Region {
    pub label: String,
    pub rect: Rect,
}

/// Labelled rectangles covering parts of an image.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RegionLayout {
    regions: Vec<Region>,
}

impl RegionLayout {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for r in &regions {
            if !seen.insert(r.label.clone()) {
                return Err(Error::argument(format!("duplicate region label {}", r.label)));
            }
        }
        Ok(RegionLayout { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

/// Transmittance densities of the 36-level filter array, in physical layout
/// order (the array is not sorted by density).
pub const STANDARD_FILTER_DENSITIES: [f64; 36] = [
    0.00, 0.10, 0.20, 0.30, 0.40, 0.50, 1.20, 1.30, 1.50, 0.60, 0.70, 0.80, 0.90, 1.00, 1.10,
    1.70, 1.90, 2.10, 2.30, 2.50, 2.70, 2.90, 3.43, 3.73, 4.02, 4.32, 4.63, 4.92, 5.23, 5.52,
    5.82, 6.27, 6.72, 7.17, 7.63, 8.22,
];

/// Default lightbox radiance behind the filter array (linear units).
pub const DEFAULT_LIGHTBOX: f64 = 160_000.0;

/// A neutral-density filter array over a uniform lightbox: one rectangular
/// region per density level, each attenuating the source by `10^-density`.
#[derive(Debug, Clone)]
pub struct DensityFilterArray<F> {
    map: RadianceMap<F>,
    layout: RegionLayout,
    densities: Vec<F>,
    source_illuminance: F,
}

impl<F: Scalar> DensityFilterArray<F> {
    /// The standard 36-level array.
    pub fn standard(source_illuminance: F, region_width: usize, region_height: usize) -> Result<Self> {
        let densities: Vec<F> = STANDARD_FILTER_DENSITIES.iter().map(|&d| fl(d)).collect();
        make_filter_array(source_illuminance, &densities, region_width, region_height)
    }

    pub fn map(&self) -> &RadianceMap<F> {
        &self.map
    }

    pub fn layout(&self) -> &RegionLayout {
        &self.layout
    }

    pub fn densities(&self) -> &[F] {
        &self.densities
    }

    pub fn source_illuminance(&self) -> F {
        self.source_illuminance
    }

    /// Levels sorted by ascending density: `(level index 1-based in sorted
    /// order, density, region)`. This is the ordering the metrics use.
    pub fn by_ascending_density(&self) -> Vec<(F, &Region)> {
        let mut pairs: Vec<(F, &Region)> = self
            .densities
            .iter()
            .copied()
            .zip(self.layout.regions().iter())
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("densities are finite"));
        pairs
    }
}

/// Transmittance density of a filter from incident and transmitted power.
pub fn density_from_transmission<F: Scalar>(incident: F, transmitted: F) -> Result<F> {
    if !(incident > F::zero()) || !incident.is_finite() {
        return Err(Error::domain(format!("incident power must be positive, got {incident}")));
    }
    if !(transmitted > F::zero()) || !transmitted.is_finite() {
        return Err(Error::domain(format!(
            "transmitted power must be positive, got {transmitted}"
        )));
    }
    if transmitted > incident {
        return Err(Error::domain(format!(
            "transmitted power {transmitted} exceeds incident {incident}; negative density is invalid"
        )));
    }
    Ok((incident / transmitted).log10())
}

/// Build a filter-array scene: regions tile a near-square grid, region `i`
/// carrying `source * 10^-densities[i]`. Grid cells beyond the last density
/// (when the count is not a perfect rectangle) are left at zero radiance.
pub fn make_filter_array<F: Scalar>(
    source_illuminance: F,
    densities: &[F],
    region_width: usize,
    region_height: usize,
) -> Result<DensityFilterArray<F>> {
    if densities.is_empty() {
        return Err(Error::argument("density list is empty"));
    }
    if !(source_illuminance > F::zero()) || !source_illuminance.is_finite() {
        return Err(Error::argument("source illuminance must be positive and finite"));
    }
    if region_width == 0 || region_height == 0 {
        return Err(Error::argument("region size must be at least 1x1"));
    }
    for d in densities {
        if !d.is_finite() || *d < F::zero() {
            return Err(Error::argument(format!("densities must be non-negative, got {d}")));
        }
    }

    let n = densities.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let width = cols * region_width;
    let height = rows * region_height;

    let mut values = vec![F::zero(); width * height];
    let mut regions = Vec::with_capacity(n);
    for (i, &density) in densities.iter().enumerate() {
        let col = i % cols;
        let row = i / cols;
        let rect = Rect {
            x: col * region_width,
            y: row * region_height,
            width: region_width,
            height: region_height,
        };
        let radiance = source_illuminance * fl::<F>(10.0).powf(-density);
        for y in rect.y..rect.y + rect.height {
            for x in rect.x..rect.x + rect.width {
                values[y * width + x] = radiance;
            }
        }
        regions.push(Region {
            label: format!("level{:02}", i + 1),
            rect,
        });
    }

    Ok(DensityFilterArray {
        map: RadianceMap::from_values(width, height, values)?,
        layout: RegionLayout::new(regions)?,
        densities: densities.to_vec(),
        source_illuminance,
    })
}

/// Stepped gray-scale chart with geometrically spaced radiance levels.
///
/// Geometric spacing makes the steps equidistant in the sensor's log domain,
/// so each step triggers the same number of events. Steps are laid out left to
/// right, each `region_width` wide and `region_height` tall.
pub fn make_gradient_chart<F: Scalar>(
    min_radiance: F,
    max_radiance: F,
    steps: usize,
    region_width: usize,
    region_height: usize,
) -> Result<RadianceMap<F>> {
    if steps < 2 {
        return Err(Error::argument("gradient chart needs at least 2 steps"));
    }
    if !(min_radiance > F::zero()) || !(max_radiance > min_radiance) {
        return Err(Error::argument(
            "gradient chart requires 0 < min_radiance < max_radiance",
        ));
    }
    if region_width == 0 || region_height == 0 {
        return Err(Error::argument("region size must be at least 1x1"));
    }

    let width = steps * region_width;
    let height = region_height;
    let ratio = max_radiance / min_radiance;
    let denom = fl::<F>((steps - 1) as f64);
    let mut values = vec![F::zero(); width * height];
    for step in 0..steps {
        let exponent = fl::<F>(step as f64) / denom;
        let level = min_radiance * ratio.powf(exponent);
        for y in 0..height {
            for x in step * region_width..(step + 1) * region_width {
                values[y * width + x] = level;
            }
        }
    }
    RadianceMap::from_values(width, height, values)
}

/// 16-bit grayscale image ready for PGM export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayImage {
    pub width: usize,
    pub height: usize,
    pub samples: Vec<u16>,
}

/// Log-domain tonemap to 16-bit for display.
///
/// Values are clamped below at `floor`, taken through `log10`, and linearly
/// rescaled so the observed range spans `[0, 65535]`. An image with no range
/// after clamping maps to mid-gray.
pub fn tonemap_for_display<F: Scalar>(map: &RadianceMap<F>, floor: F) -> Result<DisplayImage> {
    if !(floor > F::zero()) || !floor.is_finite() {
        return Err(Error::domain("tonemap floor must be positive and finite"));
    }
    let logs: Vec<F> = map
        .values()
        .iter()
        .map(|&v| if v > floor { v.log10() } else { floor.log10() })
        .collect();
    let lo = logs.iter().copied().fold(F::infinity(), F::min);
    let hi = logs.iter().copied().fold(F::neg_infinity(), F::max);
    let samples = if hi == lo {
        vec![32768u16; logs.len()]
    } else {
        let span = hi - lo;
        let full = fl::<F>(65535.0);
        logs.iter()
            .map(|&l| {
                let scaled = ((l - lo) / span * full).round();
                scaled.to_u16().unwrap_or(65535)
            })
            .collect()
    };
    Ok(DisplayImage {
        width: map.width(),
        height: map.height(),
        samples,
    })
}
