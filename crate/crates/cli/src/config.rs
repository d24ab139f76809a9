//! Declarative run configuration.
//!
//! One TOML file drives every subcommand; each section has defaults so a
//! missing file runs the standard test platform. The effective configuration
//! (after command-line overrides) is echoed into a JSON sidecar next to every
//! output so artifacts stay self-describing.
//!
//! None of the numeric defaults are measurements of the physical rig; they
//! are artifact choices (the sensor resolution, threshold, ramp duration and
//! noise magnitudes of the real system are not public).

use std::path::{Path, PathBuf};

use evhdr::modulation::{
    exp_ramp_profile, linear_profile, table_profile, validate_profile,
};
use evhdr::radiance::{
    make_filter_array, make_gradient_chart, DensityFilterArray, RadianceMap,
    STANDARD_FILTER_DENSITIES,
};
use evhdr::scalar::fl;
use evhdr::{CalibrationSpec, ModulationProfile, NoiseConfig, Real, SensorConfig, WeightingMethod};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub config_version: u32,
    pub scene: SceneSection,
    pub profile: ProfileSection,
    pub sensor: SensorSection,
    pub noise: NoiseSection,
    pub reconstruction: ReconstructionSection,
    pub calibration: CalibrationSection,
    pub evaluate: EvaluateSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            config_version: CONFIG_VERSION,
            scene: SceneSection::default(),
            profile: ProfileSection::default(),
            sensor: SensorSection::default(),
            noise: NoiseSection::default(),
            reconstruction: ReconstructionSection::default(),
            calibration: CalibrationSection::default(),
            evaluate: EvaluateSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    /// One of `filter-array`, `chart`, `uniform`, `file`.
    pub kind: String,
    /// Lightbox radiance behind the filter array.
    pub source_illuminance: f64,
    pub region_width: usize,
    pub region_height: usize,
    /// Filter densities; omitted means the standard 36-level array.
    pub densities: Option<Vec<f64>>,
    /// Gradient chart range and step count.
    pub min_radiance: f64,
    pub max_radiance: f64,
    pub steps: usize,
    /// Uniform scene level (`uniform` kind; uses the sensor dimensions).
    pub radiance: f64,
    /// Scene file (`file` kind).
    pub path: Option<PathBuf>,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            kind: "filter-array".into(),
            source_illuminance: 160_000.0,
            region_width: 8,
            region_height: 8,
            densities: None,
            min_radiance: 1.0,
            max_radiance: 1000.0,
            steps: 16,
            radiance: 1.0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// One of `linear`, `exp-ramp`, `table`.
    pub family: String,
    /// Constant-path fade rate relative to the scene-path ramp, in (0, 1).
    pub alpha: f64,
    /// Exp-ramp steepness (non-zero).
    pub rate: f64,
    pub lens_attenuation: f64,
    /// Constant-path radiance (the reconstruction baseline).
    pub baseline: f64,
    /// Ramp duration in seconds (timestamp scaling only).
    pub duration: f64,
    /// Sampled `[t, T1, T2]` rows for the `table` family.
    pub table: Option<Vec<[f64; 3]>>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            family: "linear".into(),
            alpha: 0.5,
            rate: 1.0,
            lens_attenuation: 1.0,
            baseline: 1.0,
            duration: 0.05,
            table: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub width: usize,
    pub height: usize,
    /// Nominal log-intensity trigger threshold.
    pub threshold: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            width: 346,
            height: 260,
            threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub threshold_sigma: f64,
    pub pseudo_rate: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            threshold_sigma: 0.03,
            pseudo_rate: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionSection {
    /// Weighting method: `raw`, `linear`, `quadratic`, `hpoly(n)`,
    /// `exponential(k)`; bare `hpoly`/`exponential` use order 5 / k 10.
    pub method: String,
    /// Baseline radiance; omitted means the profile's constant-path value.
    pub baseline: Option<f64>,
    /// Correction map: a `.radf` path, or `calibrate:N` to calibrate on the
    /// fly from N uniform captures. Omitted means no correction.
    pub cmap: Option<String>,
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        ReconstructionSection {
            method: "exponential(10)".into(),
            baseline: None,
            cmap: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub captures: usize,
    /// Uniform lightbox level for calibration captures. Mid-range of the
    /// standard array's bright half, where most responsive levels sit.
    pub radiance: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            captures: 10,
            radiance: 5000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub min_contrast: f64,
    pub monotonicity_pairs: usize,
    pub gray_epsilon: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            methods: vec![
                "raw".into(),
                "linear".into(),
                "quadratic".into(),
                "hpoly(5)".into(),
                "exponential(10)".into(),
            ],
            seeds: (0..10).collect(),
            min_contrast: 0.02,
            monotonicity_pairs: 2000,
            gray_epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub k_values: Vec<u32>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k_values: vec![1, 2, 5, 10, 20, 50, 100],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub emit_csv: bool,
    pub emit_pgm: bool,
    /// Keep simulator ground-truth provenance labels in exported streams.
    pub emit_provenance: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            emit_csv: false,
            emit_pgm: true,
            emit_provenance: false,
        }
    }
}

/// A built scene plus the layout metadata when the scene is a filter array.
pub struct Scene {
    pub map: RadianceMap<Real>,
    pub array: Option<DensityFilterArray<Real>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(CliError::config(format!(
                "{}: unsupported config_version {} (expected {CONFIG_VERSION})",
                path.display(),
                cfg.config_version
            )));
        }
        Ok(cfg)
    }

    /// Build the configured scene.
    pub fn scene(&self) -> Result<Scene, CliError> {
        let s = &self.scene;
        match s.kind.as_str() {
            "filter-array" => {
                let densities: Vec<f64> = s
                    .densities
                    .clone()
                    .unwrap_or_else(|| STANDARD_FILTER_DENSITIES.to_vec());
                let array =
                    make_filter_array(s.source_illuminance, &densities, s.region_width, s.region_height)
                        .map_err(|e| CliError::config(format!("[scene]: {e}")))?;
                Ok(Scene {
                    map: array.map().clone(),
                    array: Some(array),
                })
            }
            "chart" => {
                let map = make_gradient_chart(
                    s.min_radiance,
                    s.max_radiance,
                    s.steps,
                    s.region_width,
                    s.region_height,
                )
                .map_err(|e| CliError::config(format!("[scene]: {e}")))?;
                Ok(Scene { map, array: None })
            }
            "uniform" => {
                let map = RadianceMap::uniform(self.sensor.width, self.sensor.height, s.radiance)
                    .map_err(|e| CliError::config(format!("[scene]: {e}")))?;
                Ok(Scene { map, array: None })
            }
            "file" => {
                let path = s.path.as_ref().ok_or_else(|| {
                    CliError::config("[scene]: kind \"file\" requires scene.path".to_string())
                })?;
                let map = evhdr::io::load_radiance_map(path)?;
                Ok(Scene { map, array: None })
            }
            other => Err(CliError::config(format!(
                "[scene]: unknown kind {other:?} (expected filter-array, chart, uniform or file)"
            ))),
        }
    }

    /// Build and validate the modulation profile. Structural failures are
    /// errors; a derivative-magnitude failure only weakens reconstruction
    /// monotonicity and is reported as a warning by the caller.
    pub fn profile(&self) -> Result<(ModulationProfile, Vec<String>), CliError> {
        let p = &self.profile;
        let profile = match p.family.as_str() {
            "linear" => linear_profile(p.alpha, p.lens_attenuation, p.baseline, p.duration),
            "exp-ramp" => {
                exp_ramp_profile(p.alpha, p.rate, p.lens_attenuation, p.baseline, p.duration)
            }
            "table" => {
                let rows = p.table.as_ref().ok_or_else(|| {
                    CliError::config("[profile]: family \"table\" requires profile.table".to_string())
                })?;
                let samples: Vec<(Real, Real, Real)> =
                    rows.iter().map(|r| (r[0], r[1], r[2])).collect();
                table_profile(samples, p.lens_attenuation, p.baseline, p.duration)
            }
            other => {
                return Err(CliError::config(format!(
                    "[profile]: unknown family {other:?} (expected linear, exp-ramp or table)"
                )))
            }
        }
        .map_err(|e| CliError::config(format!("[profile]: {e}")))?;

        let report = validate_profile(&profile, 257)
            .map_err(|e| CliError::config(format!("[profile]: {e}")))?;
        if let Some(check) = report.hard_failures().next() {
            let at = check
                .first_violation
                .map(|t| format!(" (first violation at t = {t})"))
                .unwrap_or_default();
            return Err(CliError::config(format!(
                "[profile]: validation check \"{}\" failed{at}",
                check.name
            )));
        }
        let warnings = report
            .failures()
            .map(|c| {
                let at = c
                    .first_violation
                    .map(|t| format!(" (first violation at t = {t})"))
                    .unwrap_or_default();
                format!("[profile]: check \"{}\" failed{at}; reconstruction monotonicity is not guaranteed", c.name)
            })
            .collect();
        Ok((profile, warnings))
    }

    /// Sensor configuration for a scene of the given dimensions.
    pub fn sensor_for(&self, width: usize, height: usize) -> Result<SensorConfig, CliError> {
        SensorConfig::new(width, height, self.sensor.threshold)
            .map_err(|e| CliError::config(format!("[sensor]: {e}")))
    }

    pub fn noise(&self) -> Result<NoiseConfig, CliError> {
        NoiseConfig::new(self.noise.threshold_sigma, self.noise.pseudo_rate, self.noise.seed)
            .map_err(|e| CliError::config(format!("[noise]: {e}")))
    }

    pub fn method(&self) -> Result<WeightingMethod, CliError> {
        parse_method(&self.reconstruction.method)
            .map_err(|e| CliError::config(format!("[reconstruction]: {e}")))
    }

    pub fn evaluate_methods(&self) -> Result<Vec<WeightingMethod>, CliError> {
        self.evaluate
            .methods
            .iter()
            .map(|m| parse_method(m).map_err(|e| CliError::config(format!("[evaluate]: {e}"))))
            .collect()
    }

    pub fn calibration_spec(&self) -> CalibrationSpec {
        CalibrationSpec {
            captures: self.calibration.captures,
            radiance: fl(self.calibration.radiance),
        }
    }

    pub fn reconstruction_baseline(&self) -> f64 {
        self.reconstruction.baseline.unwrap_or(self.profile.baseline)
    }
}

/// Parse a weighting-method name: bare (`raw`, `linear`, `quadratic`,
/// `hpoly`, `exponential`) or parameterized (`hpoly(5)`, `exponential(10)`).
pub fn parse_method(name: &str) -> Result<WeightingMethod, String> {
    let name = name.trim();
    let (base, arg) = match (name.find('('), name.ends_with(')')) {
        (Some(open), true) => {
            let inner = &name[open + 1..name.len() - 1];
            let value: u32 = inner
                .trim()
                .parse()
                .map_err(|_| format!("bad parameter in method {name:?}"))?;
            (&name[..open], Some(value))
        }
        (None, false) => (name, None),
        _ => return Err(format!("malformed method {name:?}")),
    };
    let method = match (base, arg) {
        ("raw", None) => WeightingMethod::Raw,
        ("linear", None) => WeightingMethod::Linear,
        ("quadratic", None) => WeightingMethod::Quadratic,
        ("hpoly", n) => WeightingMethod::hpoly(n.unwrap_or(5)).map_err(|e| e.to_string())?,
        ("exponential", k) => {
            WeightingMethod::exponential(k.unwrap_or(10)).map_err(|e| e.to_string())?
        }
        _ => return Err(format!("unknown method {name:?}")),
    };
    Ok(method)
}
