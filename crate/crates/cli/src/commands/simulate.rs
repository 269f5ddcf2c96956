use std::path::PathBuf;

use mvswap::bns::BnsPricingOptions;
use mvswap::calibrate::ModelParams;
use mvswap::heston::HestonPortfolio;
use mvswap::montecarlo::{self, Scheme, SimConfig};
use serde::{Deserialize, Serialize};

use super::price::expected_realized;
use super::{load_config, warn, ModelFile};
use crate::failure::{CmdResult, Failure};
use crate::files::{self, RunManifest};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model parameters and correlation matrix (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Simulation settings: n_paths, dt, horizon, optional scheme and record_stride (JSON).
    #[arg(long)]
    pub sim: PathBuf,
    /// Seed for every random stream. Required.
    #[arg(long)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also store every path and write paths.csv (one row per path and recorded time).
    #[arg(long)]
    pub paths_csv: bool,
    /// BNS only: integrate |Sigma1| instead of |Sigma2|, ignoring the common return jump.
    #[arg(long)]
    pub no_jumps: bool,
}

/// The seed is deliberately absent so it can only come from `--seed`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    n_paths: usize,
    dt: f64,
    horizon: f64,
    #[serde(default)]
    scheme: Scheme,
    #[serde(default)]
    record_stride: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Output {
    model: &'static str,
    mean: f64,
    std_error: f64,
    n_paths: usize,
    horizon: f64,
    n_steps: usize,
    seed: u64,
    closed_form: Option<f64>,
    z_score: Option<f64>,
}

pub fn run(args: Args) -> CmdResult {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Failure::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::validation(format!("--threads: {e}")))?;
    }
    let mut manifest = RunManifest::new("simulate");
    manifest.seed = Some(args.seed);
    let model: ModelFile = load_config(&args.model, &mut manifest)?;
    let sim: SimFile = load_config(&args.sim, &mut manifest)?;
    let cfg = SimConfig {
        n_paths: sim.n_paths,
        dt: sim.dt,
        horizon: sim.horizon,
        seed: args.seed,
        scheme: sim.scheme,
        record_stride: sim.record_stride.unwrap_or(1),
    };
    cfg.validate()?;
    let corr = model.correlation()?;

    let (estimate, ensemble, reference) = match &model.params {
        ModelParams::Heston { assets } => {
            if args.no_jumps {
                warn("--no-jumps has no effect for Heston");
            }
            let portfolio = HestonPortfolio::new(assets.clone(), corr.clone())?;
            let est = montecarlo::estimate_heston_realized_variance(&portfolio, &cfg)?;
            let ens = args
                .paths_csv
                .then(|| montecarlo::simulate_heston(&portfolio, &cfg))
                .transpose()?;
            (est, ens, model.params.clone())
        }
        ModelParams::Bns(p) => {
            let est = montecarlo::estimate_bns_realized_variance(p, &corr, &cfg, !args.no_jumps)?;
            let ens = args.paths_csv.then(|| montecarlo::simulate_bns(p, &cfg)).transpose()?;
            let mut reference = p.clone();
            if args.no_jumps {
                reference.kappa2_star = 0.0;
                reference.common_subordinator = None;
            }
            (est, ens, ModelParams::Bns(reference))
        }
    };
    let closed_form = match expected_realized(&reference, &corr, cfg.horizon, &BnsPricingOptions::default()) {
        Ok(v) => Some(v),
        Err(e) => {
            warn(format!("no closed form to compare against: {e}"));
            None
        }
    };
    let output = Output {
        model: model.params.model_name(),
        mean: estimate.mean,
        std_error: estimate.std_error,
        n_paths: estimate.n_paths,
        horizon: cfg.horizon,
        n_steps: cfg.n_steps(),
        seed: args.seed,
        closed_form,
        z_score: closed_form.map(|c| estimate.z_score(c)).filter(|z| z.is_finite()),
    };

    let out = &args.out;
    files::create_dir(out)?;
    files::write_json(&out.join("mc_estimate.json"), &output)?;
    if let Some(ens) = ensemble {
        files::write_with(&out.join("paths.csv"), |w| ens.write_csv(w))?;
    }
    manifest.save(out)?;
    match (output.closed_form, output.z_score) {
        (Some(c), Some(z)) => println!(
            "mean {:.6e} +/- {:.2e} ({} paths), closed form {c:.6e}, z = {z:.2}",
            output.mean, output.std_error, output.n_paths
        ),
        _ => println!(
            "mean {:.6e} +/- {:.2e} ({} paths)",
            output.mean, output.std_error, output.n_paths
        ),
    }
    Ok(())
}
