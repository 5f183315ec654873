//! Figure data files: per-kind information values at a fixed dimension,
//! the information-versus-dimension curves, and the two-setting
//! violation comparison. Data only; rendering is out of scope.

use crate::pipeline::run::{dsweep_csv, RunReport};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// `kind,bits` rows at the report's single dimension: the standard
/// value, the three phase-aggregated modes, and the log2(d) cap.
pub fn fig4a_csv(report: &RunReport) -> Result<String> {
    let run = report
        .runs
        .first()
        .ok_or_else(|| Error::MissingFigureData("fig4a needs at least one dimension run".into()))?;
    let tomo = run.tomography.as_ref().ok_or_else(|| {
        Error::MissingFigureData(format!(
            "fig4a needs the tomography stage for d={}",
            run.dimension
        ))
    })?;
    let mut out = String::from("kind,bits\n");
    out.push_str(&format!("standardI0,{}\n", run.position.standard_i0.bits));
    out.push_str(&format!("radonFullMean,{}\n", run.position.radon_mean.bits));
    out.push_str(&format!("radonFullSum,{}\n", run.position.radon_sum.bits));
    out.push_str(&format!("radonReconstructed,{}\n", tomo.reconstructed_mi.bits));
    out.push_str(&format!("theoreticalMax,{}\n", run.cap_bits));
    Ok(out)
}

/// Per-dimension curves, one row per d.
pub fn fig4b_csv(report: &RunReport) -> Result<String> {
    if report.runs.len() < 2 {
        return Err(Error::MissingFigureData(
            "fig4b needs a multi-dimension run".into(),
        ));
    }
    dsweep_csv(report).map_err(|e| match e {
        Error::Config(msg) => Error::MissingFigureData(msg),
        other => other,
    })
}

/// `setting,sum,std,deviations` for the standard and pooled settings.
pub fn fig3_csv(report: &RunReport) -> Result<String> {
    let run = report
        .runs
        .first()
        .ok_or_else(|| Error::MissingFigureData("fig3 needs at least one dimension run".into()))?;
    let sep = &run.sep_bound;
    let standard = &sep.standard;
    let radon = sep.radon.as_ref().ok_or_else(|| {
        Error::MissingFigureData("fig3 needs the pooled (radon) setting report".into())
    })?;
    let mut out = String::from("setting,sum,std,deviations\n");
    for rep in [standard, radon] {
        let std = rep.std_estimate.ok_or_else(|| {
            Error::MissingFigureData(format!(
                "fig3 needs sampled data with bootstrap statistics; the {:?} setting is exact",
                rep.setting
            ))
        })?;
        let dev = rep
            .deviations
            .ok_or_else(|| Error::MissingFigureData("deviation count absent".into()))?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            match rep.setting {
                crate::sepbound::Setting::Standard => "standard",
                crate::sepbound::Setting::Radon => "radon",
            },
            rep.sum,
            std,
            dev
        ));
    }
    Ok(out)
}

/// Write the requested figure files from their reports. Each entry pairs
/// a figure name ("fig3", "fig4a", "fig4b") with the report to draw
/// from; an unknown name or a report missing the needed runs is an
/// error that lists what is absent.
pub fn emit_figure_data(
    requests: &[(&str, &RunReport)],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (name, report) in requests {
        let content = match *name {
            "fig3" => fig3_csv(report)?,
            "fig4a" => fig4a_csv(report)?,
            "fig4b" => fig4b_csv(report)?,
            other => {
                return Err(Error::MissingFigureData(format!(
                    "unknown figure '{other}' (expected fig3, fig4a, fig4b)"
                )))
            }
        };
        files.push((out_dir.join(format!("{name}.csv")), content));
    }
    crate::pipeline::run::write_files_atomic(&files)
}
