use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mvswap::calibrate::{self, Bound, CalibrationProblem, CalibrationResult, FitOptions, ModelParams};
use mvswap::marketdata::{self, RealizedVarianceSeries};
use mvswap::params::CorrelationMatrix;
use serde::{Deserialize, Serialize};

use super::{load_config, warn};
use crate::failure::{CmdResult, Failure};
use crate::files::{self, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Heston,
    Bns,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Heston => "heston",
            Model::Bns => "bns",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Observed series `t,value` as written by `estimate`.
    #[arg(long)]
    pub realized: PathBuf,
    /// Correlation matrix as written by `estimate`.
    #[arg(long)]
    pub correlation: PathBuf,
    /// Model to fit; must match the `model` tag in the init file.
    #[arg(long, value_enum)]
    pub model: Model,
    /// Starting parameters plus optional `fixed`, `tied`, `bounds` and `options` (JSON).
    #[arg(long)]
    pub init: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct InitFile {
    #[serde(flatten)]
    params: ModelParams,
    /// Parameters held at their initial values.
    #[serde(default)]
    fixed: Vec<String>,
    /// `target: source` pairs; the target always equals the source.
    #[serde(default)]
    tied: BTreeMap<String, String>,
    #[serde(default)]
    bounds: BTreeMap<String, Bound>,
    #[serde(default)]
    options: FitOptions,
}

/// The JSON written by `calibrate` and read back by `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultFile {
    pub tickers: Vec<String>,
    pub corr: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub result: CalibrationResult,
}

pub fn read_realized(path: &Path, manifest: Option<&mut RunManifest>) -> CmdResult<RealizedVarianceSeries> {
    let bytes = files::read_bytes(path)?;
    if let Some(m) = manifest {
        m.input(path, &bytes);
    }
    let series =
        marketdata::read_realized_csv(bytes.as_slice()).map_err(|e| Failure::from(e).context(path.display()))?;
    if series.is_empty() {
        return Err(Failure::validation(format!("{}: no observations", path.display())));
    }
    Ok(series)
}

fn read_correlation(path: &Path, manifest: &mut RunManifest) -> CmdResult<(Vec<String>, CorrelationMatrix<f64>)> {
    let bytes = files::read_bytes(path)?;
    manifest.input(path, &bytes);
    marketdata::read_correlation_csv(bytes.as_slice()).map_err(|e| Failure::from(e).context(path.display()))
}

fn problem(
    init: InitFile,
    observed: RealizedVarianceSeries,
    corr: CorrelationMatrix<f64>,
) -> mvswap::Result<CalibrationProblem> {
    let mut p = CalibrationProblem::new(init.params, observed, corr);
    p.options = init.options;
    for name in &init.fixed {
        p = p.fix(name)?;
    }
    for (name, b) in &init.bounds {
        p = p.bound(name, b.lo, b.hi)?;
    }
    for (target, source) in &init.tied {
        p = p.tie(target, source)?;
    }
    p.validate()?;
    Ok(p)
}

pub fn run(args: Args) -> CmdResult {
    let mut manifest = RunManifest::new("calibrate");
    let observed = read_realized(&args.realized, Some(&mut manifest))?;
    let (tickers, corr) = read_correlation(&args.correlation, &mut manifest)?;
    let init: InitFile = load_config(&args.init, &mut manifest)?;
    if init.params.model_name() != args.model.name() {
        return Err(Failure::validation(format!(
            "--model {} but {} describes a {} model",
            args.model.name(),
            args.init.display(),
            init.params.model_name()
        )));
    }
    if init.params.n_assets() != corr.n() {
        return Err(Failure::validation(format!(
            "{} has {} assets but the correlation matrix is {2}x{2}",
            args.init.display(),
            init.params.n_assets(),
            corr.n()
        )));
    }
    let corr_rows = corr.to_rows();
    let problem = problem(init, observed, corr)?;
    let result = calibrate::fit(&problem)?;

    let out = &args.out;
    files::create_dir(out)?;
    let file = ResultFile {
        tickers,
        corr: corr_rows,
        result,
    };
    files::write_json(&out.join("result.json"), &file)?;
    manifest.save(out)?;
    let r = &file.result;
    println!(
        "{}: sse {:.6e}, RMSE {:.6e}, {} iterations ({:?})",
        args.model.name(),
        r.sse,
        r.metrics.rmse,
        r.iterations,
        r.termination
    );
    for (name, v) in r.param_names.iter().zip(&r.values) {
        println!("  {name:<14}{v:.8e}");
    }
    if !r.converged {
        warn("result.json was written from the best point found");
        return Err(Failure::numerical(format!(
            "calibration did not converge within {} iterations",
            r.iterations
        )));
    }
    Ok(())
}
