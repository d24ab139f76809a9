//! Subcommand implementations.
//!
//! Every command writes its artifacts under the output directory plus a
//! `<command>.config.json` sidecar echoing the effective configuration, so a
//! directory of outputs is reproducible from its sidecars alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use evhdr::metrics::{
    gray_level_count, k_sweep, monotonicity_violations, responsive_range, snr, snr_by_method,
};
use evhdr::radiance::tonemap_for_display;
use evhdr::reconstruct::{apply_cmap, calibrate_cmap, reconstruct};
use evhdr::rng::derive_seed;
use evhdr::sim::{make_threshold_field, simulate_with_thresholds};
use evhdr::{
    CMap, EventStream, MethodSnr, MonotonicityReport, NoiseConfig, RadianceMap,
    ReconstructionConfig, ResponsiveRange, Snr,
};
use serde::Serialize;

use crate::config::{RunConfig, Scene};
use crate::CliError;

/// Salt for deriving per-capture pseudo-event seeds during calibration,
/// keeping captures decorrelated from simulation runs at the same seed.
const CAPTURE_SALT: u64 = 0xCA11;

pub struct CommandContext {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl CommandContext {
    fn ensure_out_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", self.out_dir.display())))
    }

    fn write_sidecar(&self, command: &str) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            config_version: u32,
            command: &'a str,
            threads: Option<usize>,
            config: &'a RunConfig,
        }
        let sidecar = Sidecar {
            config_version: self.config.config_version,
            command,
            threads: self.threads,
            config: &self.config,
        };
        write_json(&self.out_dir.join(format!("{command}.config.json")), &sidecar)
    }

    fn warn(&self, warnings: &[String]) {
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text.as_bytes())
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn snr_csv_cell(s: &Snr) -> String {
    match s.db() {
        Some(v) => format!("{v:.6}"),
        None => "infinite".into(),
    }
}

/// Generate the configured scene and write it out.
pub fn cmd_chart(ctx: &CommandContext) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let scene = ctx.config.scene()?;
    let path = ctx.out_dir.join("scene.radf");
    evhdr::io::save_radiance_map(&scene.map, &path)?;
    if ctx.config.output.emit_pgm {
        let floor = ctx.config.profile.baseline;
        let display = tonemap_for_display(&scene.map, floor)?;
        evhdr::io::save_pgm16(&display, &ctx.out_dir.join("scene.pgm"))?;
    }
    ctx.write_sidecar("chart")?;
    println!("scene written to {}", path.display());
    Ok(())
}

/// Simulate the configured scene into an event stream.
pub fn cmd_simulate(ctx: &CommandContext) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let scene = ctx.config.scene()?;
    let (profile, warnings) = ctx.config.profile()?;
    ctx.warn(&warnings);
    let sensor = ctx.config.sensor_for(scene.map.width(), scene.map.height())?;
    let noise = ctx.config.noise()?;

    let stream = evhdr::sim::simulate(&scene.map, &profile, &sensor, &noise)?;
    let stream = if ctx.config.output.emit_provenance {
        stream
    } else {
        stream.without_provenance()
    };

    let path = ctx.out_dir.join("events.aevt");
    evhdr::io::save_events_binary(&stream, &path)?;
    if ctx.config.output.emit_csv {
        evhdr::io::save_events_csv(
            &stream,
            &ctx.out_dir.join("events.csv"),
            ctx.config.output.emit_provenance,
        )?;
    }
    ctx.write_sidecar("simulate")?;
    println!("{} events written to {}", stream.len(), path.display());
    Ok(())
}

/// Calibrate a correction map from repeated uniform captures.
pub fn cmd_calibrate(ctx: &CommandContext, captures_override: Option<usize>) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let captures = captures_override.unwrap_or(ctx.config.calibration.captures);
    if captures == 0 {
        return Err(CliError::config("calibration needs at least one capture".into()));
    }
    let (profile, warnings) = ctx.config.profile()?;
    ctx.warn(&warnings);
    let sensor = ctx.config.sensor_for(ctx.config.sensor.width, ctx.config.sensor.height)?;
    let noise = ctx.config.noise()?;
    let uniform = RadianceMap::uniform(
        sensor.width(),
        sensor.height(),
        ctx.config.calibration.radiance,
    )?;

    // One fixed-pattern field across all captures; only pseudo events vary.
    let field = make_threshold_field(&sensor, &noise)?;
    let streams: Vec<EventStream> = (0..captures)
        .map(|i| {
            let capture_noise = NoiseConfig {
                threshold_sigma: noise.threshold_sigma,
                pseudo_rate: noise.pseudo_rate,
                seed: derive_seed(noise.seed, CAPTURE_SALT + i as u64),
            };
            simulate_with_thresholds(&uniform, &profile, &field, &capture_noise)
        })
        .collect::<evhdr::Result<_>>()?;

    let cfg = ReconstructionConfig::new(
        ctx.config.method()?,
        ctx.config.sensor.threshold,
        ctx.config.reconstruction_baseline(),
    )?;
    let cmap = calibrate_cmap(&streams, &cfg)?;
    let path = ctx.out_dir.join("cmap.radf");
    evhdr::io::save_cmap(&cmap, &path)?;
    ctx.write_sidecar("calibrate")?;
    println!("correction map from {captures} captures written to {}", path.display());
    Ok(())
}

fn resolve_cmap(
    ctx: &CommandContext,
    stream: &EventStream,
    cfg: &ReconstructionConfig,
) -> Result<Option<CMap>, CliError> {
    let Some(spec) = ctx.config.reconstruction.cmap.as_deref() else {
        return Ok(None);
    };
    if let Some(n) = spec.strip_prefix("calibrate:") {
        let captures: usize = n
            .parse()
            .map_err(|_| CliError::config(format!("[reconstruction]: bad cmap spec {spec:?}")))?;
        if captures == 0 {
            return Err(CliError::config("[reconstruction]: calibrate:N needs N >= 1".into()));
        }
        let (profile, _) = ctx.config.profile()?;
        let sensor = ctx.config.sensor_for(stream.width(), stream.height())?;
        let noise = ctx.config.noise()?;
        let uniform = RadianceMap::uniform(
            stream.width(),
            stream.height(),
            ctx.config.calibration.radiance,
        )?;
        let field = make_threshold_field(&sensor, &noise)?;
        let streams: Vec<EventStream> = (0..captures)
            .map(|i| {
                let capture_noise = NoiseConfig {
                    threshold_sigma: noise.threshold_sigma,
                    pseudo_rate: noise.pseudo_rate,
                    seed: derive_seed(noise.seed, CAPTURE_SALT + i as u64),
                };
                simulate_with_thresholds(&uniform, &profile, &field, &capture_noise)
            })
            .collect::<evhdr::Result<_>>()?;
        return Ok(Some(calibrate_cmap(&streams, cfg)?));
    }
    let cmap = evhdr::io::load_cmap(Path::new(spec))?;
    if cmap.width() != stream.width() || cmap.height() != stream.height() {
        return Err(CliError::config(format!(
            "correction map {}x{} does not match stream {}x{}",
            cmap.width(),
            cmap.height(),
            stream.width(),
            stream.height()
        )));
    }
    Ok(Some(cmap))
}

/// Decode an event-stream file into a radiance image.
pub fn cmd_reconstruct(ctx: &CommandContext, stream_path: &Path) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let stream: EventStream = evhdr::io::load_events_binary(stream_path)?;
    let cfg = ReconstructionConfig::new(
        ctx.config.method()?,
        stream.threshold(),
        ctx.config.reconstruction_baseline(),
    )?;
    let cmap = resolve_cmap(ctx, &stream, &cfg)?;
    let mut img = reconstruct(&stream, &cfg)?;
    if let Some(cmap) = &cmap {
        img = apply_cmap(&img, cmap)?;
    }

    let path = ctx.out_dir.join("reconstruction.radf");
    evhdr::io::save_radiance_map(&img, &path)?;
    if ctx.config.output.emit_pgm {
        // The decoder cannot report below the constant-path baseline, so the
        // baseline is the natural display floor.
        let display = tonemap_for_display(&img, cfg.baseline)?;
        evhdr::io::save_pgm16(&display, &ctx.out_dir.join("reconstruction.pgm"))?;
    }
    ctx.write_sidecar("reconstruct")?;
    println!("reconstruction written to {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct RegionSnrRow {
    label: String,
    density: f64,
    snr: Snr,
}

#[derive(Serialize)]
struct EvaluationJson<'a> {
    config_version: u32,
    command: &'static str,
    config: &'a RunConfig,
    seeds: &'a [u64],
    responsive_range: Option<ResponsiveRange>,
    dynamic_range_db: Option<f64>,
    per_region_snr: Vec<RegionSnrRow>,
    snr_table: Vec<MethodSnr>,
    gray_level_count: usize,
    monotonicity: MonotonicityReport,
}

/// Run the full evaluation suite on the configured filter-array platform.
pub fn cmd_evaluate(ctx: &CommandContext) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let Scene { map: scene_map, array } = ctx.config.scene()?;
    let array = array.ok_or_else(|| {
        CliError::config("[scene]: evaluate requires a filter-array scene".into())
    })?;
    let (profile, warnings) = ctx.config.profile()?;
    ctx.warn(&warnings);
    let sensor = ctx.config.sensor_for(scene_map.width(), scene_map.height())?;
    let noise = ctx.config.noise()?;
    let methods = ctx.config.evaluate_methods()?;
    let seeds = ctx.config.evaluate.seeds.clone();
    if seeds.is_empty() {
        return Err(CliError::config("[evaluate]: seeds must be non-empty".into()));
    }
    let calibration = ctx.config.calibration_spec();
    let min_contrast = ctx.config.evaluate.min_contrast;

    // Method table, uncorrected and corrected.
    let mut table = snr_by_method(
        &array, &profile, &sensor, &noise, &methods, false, &seeds, &calibration, min_contrast,
    )?;
    table.extend(snr_by_method(
        &array, &profile, &sensor, &noise, &methods, true, &seeds, &calibration, min_contrast,
    )?);

    // Reference reconstruction at the first seed: default method, corrected.
    let first_seed = NoiseConfig {
        threshold_sigma: noise.threshold_sigma,
        pseudo_rate: noise.pseudo_rate,
        seed: seeds[0],
    };
    let field = make_threshold_field(&sensor, &first_seed)?;
    let stream = simulate_with_thresholds(&scene_map, &profile, &field, &first_seed)?;
    let cfg = ReconstructionConfig::new(
        ctx.config.method()?,
        sensor.threshold(),
        ctx.config.reconstruction_baseline(),
    )?;
    let mut img = reconstruct(&stream, &cfg)?;
    if calibration.captures > 0 {
        let uniform =
            RadianceMap::uniform(scene_map.width(), scene_map.height(), calibration.radiance)?;
        let captures: Vec<EventStream> = (0..calibration.captures)
            .map(|i| {
                let capture_noise = NoiseConfig {
                    threshold_sigma: noise.threshold_sigma,
                    pseudo_rate: noise.pseudo_rate,
                    seed: derive_seed(seeds[0], CAPTURE_SALT + i as u64),
                };
                simulate_with_thresholds(&uniform, &profile, &field, &capture_noise)
            })
            .collect::<evhdr::Result<_>>()?;
        let cmap = calibrate_cmap(&captures, &cfg)?;
        img = apply_cmap(&img, &cmap)?;
    }

    let range = responsive_range(&img, &array, min_contrast)?;
    let dynamic_range_db = range.as_ref().and_then(|r| r.dynamic_range_db);

    let per_region_snr = array
        .by_ascending_density()
        .iter()
        .map(|(density, region)| {
            Ok(RegionSnrRow {
                label: region.label.clone(),
                density: *density,
                snr: snr(&img, &region.rect)?,
            })
        })
        .collect::<evhdr::Result<Vec<_>>>()?;

    let gray = gray_level_count(&img, ctx.config.evaluate.gray_epsilon)?;
    let monotonicity = monotonicity_violations(
        &img,
        &scene_map,
        cfg.baseline,
        ctx.config.evaluate.monotonicity_pairs,
        seeds[0],
    )?;

    let report = EvaluationJson {
        config_version: ctx.config.config_version,
        command: "evaluate",
        config: &ctx.config,
        seeds: &seeds,
        responsive_range: range,
        dynamic_range_db,
        per_region_snr,
        snr_table: table.clone(),
        gray_level_count: gray,
        monotonicity,
    };
    write_json(&ctx.out_dir.join("evaluation.json"), &report)?;

    let csv_path = ctx.out_dir.join("snr_table.csv");
    let mut csv = String::from("weighting_method,cmap_adjust,mean_snr_db\n");
    for row in &table {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.method,
            if row.with_cmap { "yes" } else { "no" },
            snr_csv_cell(&row.mean_snr)
        ));
    }
    fs::write(&csv_path, csv)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", csv_path.display())))?;

    ctx.write_sidecar("evaluate")?;
    match &report.dynamic_range_db {
        Some(dr) => println!("evaluation written; dynamic range {dr:.1} dB"),
        None => println!("evaluation written; no responsive range"),
    }
    Ok(())
}

/// Sweep the exponential weighting factor and write the SNR curve.
pub fn cmd_sweep_k(ctx: &CommandContext, k_override: Option<Vec<u32>>) -> Result<(), CliError> {
    ctx.ensure_out_dir()?;
    let Scene { array, .. } = ctx.config.scene()?;
    let array = array.ok_or_else(|| {
        CliError::config("[scene]: sweep-k requires a filter-array scene".into())
    })?;
    let (profile, warnings) = ctx.config.profile()?;
    ctx.warn(&warnings);
    let sensor = ctx.config.sensor_for(array.map().width(), array.map().height())?;
    let noise = ctx.config.noise()?;
    let k_values = k_override.unwrap_or_else(|| ctx.config.sweep.k_values.clone());
    let seeds = ctx.config.evaluate.seeds.clone();
    let calibration = ctx.config.calibration_spec();

    let points = k_sweep(
        &array,
        &profile,
        &sensor,
        &noise,
        &k_values,
        &seeds,
        &calibration,
        ctx.config.evaluate.min_contrast,
    )?;

    let path = ctx.out_dir.join("k_sweep.csv");
    let file = fs::File::create(&path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "k,mean_snr_db").map_err(|e| CliError::io(e.to_string()))?;
    for p in &points {
        writeln!(w, "{},{}", p.k, snr_csv_cell(&p.mean_snr)).map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;
    ctx.write_sidecar("sweep-k")?;
    println!("k sweep written to {}", path.display());
    Ok(())
}
