use std::path::PathBuf;

use clap::ValueEnum;
use mvswap::bns::{expected_realized_variance_bns, BnsPricingOptions, VolApproxForm};
use mvswap::calibrate::ModelParams;
use mvswap::heston::{expected_realized_variance, expected_realized_variance_quadrature, HestonPortfolio};
use mvswap::params::{CorrelationMatrix, SwapContract};
use mvswap::quadrature::QuadOptions;

use super::{load_config, num, ModelFile};
use crate::failure::CmdResult;
use crate::files::{self, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VolForm {
    /// sqrt(m) - Var / (8 m^{3/2}).
    Taylor,
    /// The same correction written with kappa2 (1 - e^{-2 lambda t}) / 16.
    Coefficient16,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model parameters and correlation matrix (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Swap terms: k_var, r, maturity, notional (JSON).
    #[arg(long)]
    pub contract: PathBuf,
    /// Also write price.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Expected-volatility approximation used by BNS.
    #[arg(long, value_enum, default_value_t = VolForm::Taylor)]
    pub vol_form: VolForm,
}

/// Expected realized generalized variance over the contract's life.
pub fn expected_realized(
    params: &ModelParams,
    corr: &CorrelationMatrix<f64>,
    maturity: f64,
    opts: &BnsPricingOptions<f64>,
) -> mvswap::Result<f64> {
    match params {
        ModelParams::Heston { assets } => {
            let portfolio = HestonPortfolio::new(assets.clone(), corr.clone())?;
            if portfolio.n() == 3 {
                expected_realized_variance(maturity, &portfolio)
            } else {
                expected_realized_variance_quadrature(maturity, &portfolio, &QuadOptions::default())
            }
        }
        ModelParams::Bns(p) => expected_realized_variance_bns(maturity, p, corr, opts),
    }
}

pub fn run(args: Args) -> CmdResult {
    let mut manifest = RunManifest::new("price");
    let model: ModelFile = load_config(&args.model, &mut manifest)?;
    let contract: SwapContract<f64> = load_config(&args.contract, &mut manifest)?;
    contract.validate()?;
    let corr = model.correlation()?;
    let opts = BnsPricingOptions {
        vol_form: match args.vol_form {
            VolForm::Taylor => VolApproxForm::Taylor,
            VolForm::Coefficient16 => VolApproxForm::Coefficient16,
        },
        ..Default::default()
    };
    let ev = expected_realized(&model.params, &corr, contract.maturity, &opts)?;
    let price = contract.price(ev)?;
    let name = model.params.model_name();
    let df = contract.discount_factor();

    println!("{:<28}{name}", "model");
    println!("{:<28}{}", "assets", model.params.n_assets());
    println!("{:<28}{}", "maturity", contract.maturity);
    println!("{:<28}{ev:.10e}", "expected realized variance");
    println!("{:<28}{:.10e}", "strike", contract.k_var);
    println!("{:<28}{df:.10}", "discount factor");
    println!("{:<28}{price:.10e}", "price");

    if let Some(out) = &args.out {
        files::create_dir(out)?;
        let csv = format!(
            "model,maturity,expected_realized_variance,k_var,discount_factor,notional,price\n{name},{},{},{},{},{},{}\n",
            num(contract.maturity),
            num(ev),
            num(contract.k_var),
            num(df),
            num(contract.notional),
            num(price)
        );
        files::write(&out.join("price.csv"), csv)?;
        manifest.save(out)?;
    }
    Ok(())
}
