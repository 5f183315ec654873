//! The end-to-end run: measurement sweeps, information metrics, the
//! tomography diagnostic chain, separability statistics, and output
//! files. Identical (config, seed) pairs produce byte-identical outputs;
//! files are staged in memory and written atomically (temp + rename),
//! with everything already written removed if a later write fails.

use crate::biphoton::{covariance_from_params, BiphotonParams, GaussianState4};
use crate::info::{
    mi_closed_form, mi_discrete, mi_radon_full, mi_reconstructed_grid, mi_shannon_additive,
    partial_mi, theoretical_max, MiResult, SweepAggregation,
};
use crate::measurement::{
    phi_sweep, pool_sweep_counts, Basis, DetectorConfig, PhiSweep, SweepFrame,
};
use crate::pipeline::config::{HalfRange, RunConfig};
use crate::seeding::derive_seed;
use crate::sepbound::{compare_settings, evaluate_setting, SepBoundReport, Setting, SettingsComparison};
use crate::tomography::{radon_forward, reconstruct, relative_l2_error, Grid2D};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub w1: f64,
    pub w2: f64,
    pub sigma_s: f64,
    pub sigma_c: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub basis: Basis,
    pub half_range: f64,
    pub standard_i0: MiResult,
    pub partials: Vec<MiResult>,
    pub radon_sum: MiResult,
    pub radon_mean: MiResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepBoundSection {
    pub standard: SepBoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radon: Option<SepBoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<SettingsComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyDiagnostics {
    pub grid_n: usize,
    pub angles: usize,
    pub relative_l2_error: f64,
    pub coverage_fraction: f64,
    pub reconstructed_mi: MiResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dimension: usize,
    pub cap_bits: f64,
    pub position: BasisReport,
    pub momentum: BasisReport,
    pub sep_bound: SepBoundSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographyDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub state: StateSummary,
    pub closed_form: MiResult,
    pub shannon_additive: MiResult,
    pub runs: Vec<DimensionReport>,
}

fn detector_for(
    state: &GaussianState4,
    d: usize,
    basis: Basis,
    policy: HalfRange,
) -> Result<DetectorConfig> {
    match policy {
        HalfRange::Auto => DetectorConfig::auto(state, d, basis),
        HalfRange::Fixed(hr) => DetectorConfig::new(d, hr, basis, 0.0),
    }
}

fn basis_report(sweep: &PhiSweep) -> Result<BasisReport> {
    Ok(BasisReport {
        basis: sweep.base.basis,
        half_range: sweep.base.half_range,
        standard_i0: mi_discrete(&sweep.entries[0])?,
        partials: partial_mi(sweep)?,
        radon_sum: mi_radon_full(sweep, SweepAggregation::Sum)?,
        radon_mean: mi_radon_full(sweep, SweepAggregation::Mean)?,
    })
}

/// Average the per-angle probability histograms of an exact sweep; the
/// Radon-setting analogue of count pooling.
fn average_probabilities(sweep: &PhiSweep) -> Result<crate::measurement::CoincidenceHistogram> {
    let first = sweep
        .entries
        .first()
        .ok_or_else(|| Error::InvalidParameters("empty sweep".into()))?;
    let d = first.dimension();
    let m = sweep.entries.len() as f64;
    let mut cells = vec![0.0; d * d];
    let mut overflow = 0.0;
    for entry in &sweep.entries {
        for (acc, &c) in cells.iter_mut().zip(entry.cells()) {
            *acc += c / m;
        }
        overflow += entry.overflow() / m;
    }
    let mut meta = first.meta.clone();
    meta.phi = 0.0;
    Ok(crate::measurement::CoincidenceHistogram::from_parts(
        meta, cells, overflow,
    ))
}

fn sep_bound_section(
    config: &RunConfig,
    d: usize,
    sweep_x: &PhiSweep,
    sweep_p: &PhiSweep,
) -> Result<SepBoundSection> {
    let seed_std = derive_seed(config.seed, "sepbound.standard", d as u64);
    let seed_radon = derive_seed(config.seed, "sepbound.radon", d as u64);
    let standard = evaluate_setting(
        Setting::Standard,
        &sweep_x.entries[0],
        &sweep_p.entries[0],
        config.resamples,
        seed_std,
    )?;
    let radon = if config.shots.is_some() {
        if config.frame == SweepFrame::CoRotating {
            let pooled_x = pool_sweep_counts(sweep_x)?;
            let pooled_p = pool_sweep_counts(sweep_p)?;
            Some(evaluate_setting(
                Setting::Radon,
                &pooled_x,
                &pooled_p,
                config.resamples,
                seed_radon,
            )?)
        } else {
            // Fixed-arm angles carry no common frame to pool in.
            None
        }
    } else {
        let avg_x = average_probabilities(sweep_x)?;
        let avg_p = average_probabilities(sweep_p)?;
        Some(evaluate_setting(
            Setting::Radon,
            &avg_x,
            &avg_p,
            config.resamples,
            seed_radon,
        )?)
    };
    let comparison = match &radon {
        Some(r) if standard.deviations.is_some() && r.deviations.is_some() => {
            Some(compare_settings(&standard, r)?)
        }
        _ => None,
    };
    Ok(SepBoundSection {
        standard,
        radon,
        comparison,
    })
}

/// Tomography diagnostic: run the Radon -> slice -> inverse chain on the
/// exact position-basis joint density and report reconstruction error
/// and the information content of the decoded grid.
fn tomography_diagnostics(
    config: &RunConfig,
    state: &GaussianState4,
    d: usize,
    half_range: f64,
) -> Result<Option<TomographyDiagnostics>> {
    let Some(n) = config.tomo_resolution(d) else {
        return Ok(None);
    };
    let angles = if config.tomo_angles == 0 {
        config.m.max(2)
    } else {
        config.tomo_angles
    };
    let pair = state.marginal_pair(crate::biphoton::Q_XA, crate::biphoton::Q_XB);
    let (va, vb, cab) = (pair[0][0], pair[1][1], pair[0][1]);
    let det = va * vb - cab * cab;
    if det <= 0.0 {
        return Err(Error::DegenerateState(
            "joint position density is singular".into(),
        ));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let grid = Grid2D::sample(n, half_range, |x, p| {
        let q = (vb * x * x - 2.0 * cab * x * p + va * p * p) / det;
        norm * (-0.5 * q).exp()
    })?;
    let sinogram = radon_forward(&grid, angles, n)?;
    let cart = crate::tomography::polar_to_cartesian(&crate::tomography::PolarSpectrum::from_sinogram(&sinogram));
    let recon = reconstruct(&sinogram)?;
    Ok(Some(TomographyDiagnostics {
        grid_n: n,
        angles,
        relative_l2_error: relative_l2_error(&recon, &grid),
        coverage_fraction: cart.coverage_fraction(),
        reconstructed_mi: mi_reconstructed_grid(&recon)?,
    }))
}

fn run_dimension(
    config: &RunConfig,
    state: &GaussianState4,
    d: usize,
) -> Result<DimensionReport> {
    let config_x = detector_for(state, d, Basis::Position, config.half_range_x)?;
    let config_p = detector_for(state, d, Basis::Momentum, config.half_range_p)?;
    let sweep_x = phi_sweep(
        state,
        &config_x,
        config.m,
        config.shots,
        derive_seed(config.seed, "sweep.position", d as u64),
        config.frame,
    )?;
    let sweep_p = phi_sweep(
        state,
        &config_p,
        config.m,
        config.shots,
        derive_seed(config.seed, "sweep.momentum", d as u64),
        config.frame,
    )?;
    Ok(DimensionReport {
        dimension: d,
        cap_bits: theoretical_max(d),
        position: basis_report(&sweep_x)?,
        momentum: basis_report(&sweep_p)?,
        sep_bound: sep_bound_section(config, d, &sweep_x, &sweep_p)?,
        tomography: tomography_diagnostics(config, state, d, config_x.half_range)?,
    })
}

/// Execute the full pipeline for every configured detector dimension.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let params: BiphotonParams = config.params()?;
    let state = covariance_from_params(&params);
    let runs = config
        .dims
        .iter()
        .map(|&d| run_dimension(config, &state, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        provenance: Provenance {
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        state: StateSummary {
            w1: params.w1,
            w2: params.w2,
            sigma_s: params.single_photon_width(),
            sigma_c: params.conditional_width(),
            wavelength_nm: params.wavelength_nm,
        },
        closed_form: mi_closed_form(&params)?,
        shannon_additive: mi_shannon_additive(&params)?,
        runs,
    })
}

/// Per-dimension curve data: `d,I0,IR_mean,IR_sum,IR_recon,log2d`.
/// Position-basis values; requires the tomography stage so every cell is
/// a real number.
pub fn dsweep_csv(report: &RunReport) -> Result<String> {
    let mut out = String::from("d,I0,IR_mean,IR_sum,IR_recon,log2d\n");
    for run in &report.runs {
        let tomo = run.tomography.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "dimension {} lacks tomography; the curve file needs tomography.n enabled",
                run.dimension
            ))
        })?;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            run.dimension,
            run.position.standard_i0.bits,
            run.position.radon_mean.bits,
            run.position.radon_sum.bits,
            tomo.reconstructed_mi.bits,
            run.cap_bits
        ));
    }
    Ok(out)
}

fn assert_finite_csv(name: &str, content: &str) -> Result<()> {
    for field in content.split([',', '\n']).map(str::trim) {
        if field.eq_ignore_ascii_case("nan") || field.to_ascii_lowercase().contains("inf") {
            return Err(Error::InvalidParameters(format!(
                "{name} contains a non-finite cell"
            )));
        }
    }
    Ok(())
}

/// Write staged files atomically; on any failure remove everything
/// already written this call.
pub(crate) fn write_files_atomic(files: &[(PathBuf, String)]) -> Result<Vec<PathBuf>> {
    let mut written: Vec<PathBuf> = Vec::new();
    for (path, content) in files {
        let result = (|| -> Result<()> {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let file_name = path
                .file_name()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
            let tmp = path.with_file_name(format!(".tmp-{file_name}"));
            fs::write(&tmp, content)?;
            fs::rename(&tmp, path)?;
            Ok(())
        })();
        match result {
            Ok(()) => written.push(path.clone()),
            Err(e) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
        }
    }
    Ok(written)
}

/// Write the report JSON, the canonical config, and (for multi-dimension
/// runs) the per-dimension curve CSV into the configured output
/// directory.
pub fn write_run_outputs(config: &RunConfig, report: &RunReport) -> Result<Vec<PathBuf>> {
    let dir = Path::new(&config.output_dir);
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    files.push((dir.join("report.json"), json));
    files.push((dir.join("config.txt"), config.serialize_flat()));
    if config.dims.len() > 1 {
        let csv = dsweep_csv(report)?;
        assert_finite_csv("dsweep.csv", &csv)?;
        files.push((dir.join("dsweep.csv"), csv));
    }
    write_files_atomic(&files)
}

/// Run the pipeline and write its outputs; returns the report and the
/// written paths.
pub fn run_and_write(config: &RunConfig) -> Result<(RunReport, Vec<PathBuf>)> {
    let report = run_pipeline(config)?;
    let paths = write_run_outputs(config, &report)?;
    Ok((report, paths))
}
