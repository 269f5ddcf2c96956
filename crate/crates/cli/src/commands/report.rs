use std::path::{Path, PathBuf};

use mvswap::bns::BnsPricingOptions;
use mvswap::calibrate::{error_metrics, model_curve, ModelParams};
use mvswap::params::CorrelationMatrix;
use serde::Deserialize;

use super::calibrate::read_realized;
use super::{num, warn};
use crate::failure::{CmdResult, Failure};
use crate::files::{self, RunManifest};
use crate::svg::{self, Series, Style};

const CURVE_POINTS: usize = 200;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Observed series `t,value` as written by `estimate`.
    #[arg(long)]
    pub realized: PathBuf,
    /// result.json from a Heston calibration.
    #[arg(long)]
    pub heston: Option<PathBuf>,
    /// result.json from a BNS calibration.
    #[arg(long)]
    pub bns: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

/// The parts of a calibration result needed to redraw the fit.
#[derive(Debug, Deserialize)]
struct Fit {
    corr: Vec<Vec<f64>>,
    params: ModelParams,
}

fn load_fit(
    path: &Path,
    expected: &str,
    manifest: &mut RunManifest,
) -> CmdResult<(ModelParams, CorrelationMatrix<f64>)> {
    let bytes = files::read_bytes(path)?;
    manifest.input(path, &bytes);
    let fit: Fit =
        serde_json::from_slice(&bytes).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    if fit.params.model_name() != expected {
        return Err(Failure::validation(format!(
            "{} holds a {} fit, expected {expected}",
            path.display(),
            fit.params.model_name()
        )));
    }
    let corr = CorrelationMatrix::from_rows(&fit.corr).map_err(|e| Failure::from(e).context(path.display()))?;
    Ok((fit.params, corr))
}

pub fn run(args: Args) -> CmdResult {
    let mut manifest = RunManifest::new("report");
    let observed = read_realized(&args.realized, Some(&mut manifest))?;
    let mut fits = Vec::new();
    for (label, path) in [("Heston", &args.heston), ("BNS", &args.bns)] {
        match path {
            Some(p) => {
                let (params, corr) = load_fit(p, &label.to_lowercase(), &mut manifest)?;
                fits.push((label, params, corr));
            }
            None => warn(format!("no {label} result given; reporting without it")),
        }
    }
    if fits.is_empty() {
        return Err(Failure::validation("pass --heston, --bns or both"));
    }

    let opts = BnsPricingOptions::default();
    let t_max = observed.times.iter().copied().fold(0.0, f64::max);
    let grid: Vec<f64> = (1..=CURVE_POINTS)
        .map(|i| t_max * i as f64 / CURVE_POINTS as f64)
        .collect();
    let mut table = String::from("model,RMSE,APE,AAE,ARPE\n");
    let mut series = vec![Series {
        name: "realized",
        points: observed
            .times
            .iter()
            .copied()
            .zip(observed.values.iter().copied())
            .collect(),
        style: Style::Markers,
    }];
    for (label, params, corr) in &fits {
        let fitted = model_curve(params, corr, &observed.times, &opts)?;
        let m = error_metrics(&observed.values, &fitted)?;
        table.push_str(&format!(
            "{label},{},{},{},{}\n",
            num(m.rmse),
            num(m.ape),
            num(m.aae),
            num(m.arpe)
        ));
        let curve = model_curve(params, corr, &grid, &opts)?;
        series.push(Series {
            name: label,
            points: grid.iter().copied().zip(curve).collect(),
            style: Style::Line,
        });
    }

    let out = &args.out;
    files::create_dir(out)?;
    files::write(&out.join("metrics.csv"), &table)?;
    files::write(
        &out.join("fitted_vs_realized.svg"),
        svg::line_chart(
            "Realized generalized variance and fitted expectations",
            "t (years)",
            "generalized variance",
            &series,
        ),
    )?;
    manifest.save(out)?;
    print!("{table}");
    Ok(())
}
