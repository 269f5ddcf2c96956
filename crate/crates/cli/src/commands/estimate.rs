use std::path::PathBuf;

use clap::ValueEnum;
use mvswap::marketdata::{self, KurtosisEstimator, WindowMode};

use super::warn;
use crate::failure::{CmdResult, Failure};
use crate::files::{self, RunManifest};
use crate::svg::{self, Series, Style};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Basis {
    /// Daily log returns.
    Returns,
    /// Cumulative simple returns since the first date.
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kurtosis {
    /// Population moments, m4 / m2^2 - 3.
    Moment,
    /// Bias-adjusted G2.
    Adjusted,
    /// m4 / s^4 - 3 with the unbiased variance.
    UnbiasedVariance,
}

impl From<Kurtosis> for KurtosisEstimator {
    fn from(k: Kurtosis) -> Self {
        match k {
            Kurtosis::Moment => KurtosisEstimator::Moment,
            Kurtosis::Adjusted => KurtosisEstimator::Adjusted,
            Kurtosis::UnbiasedVariance => KurtosisEstimator::UnbiasedVariance,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Closing prices: a `date` column (YYYY-MM-DD) then one column per ticker.
    #[arg(long)]
    pub prices: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Trading days per covariance window.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Slide the window one day at a time instead of using disjoint blocks.
    #[arg(long)]
    pub rolling: bool,
    /// Trading days per year, used to annualize covariances and times.
    #[arg(long, default_value_t = marketdata::TRADING_DAYS as f64)]
    pub annualization: f64,
    /// Series summarized in summary.csv.
    #[arg(long, value_enum, default_value_t = Basis::Returns)]
    pub summary_basis: Basis,
    /// Excess kurtosis convention in summary.csv.
    #[arg(long, value_enum, default_value_t = Kurtosis::Moment)]
    pub kurtosis: Kurtosis,
}

pub fn run(args: Args) -> CmdResult {
    if !(args.annualization > 0.0 && args.annualization.is_finite()) {
        return Err(Failure::validation("--annualization must be positive"));
    }
    let mut manifest = RunManifest::new("estimate");
    let bytes = files::read_bytes(&args.prices)?;
    manifest.input(&args.prices, &bytes);
    let prices =
        marketdata::read_prices(bytes.as_slice()).map_err(|e| Failure::from(e).context(args.prices.display()))?;
    if prices.dropped_rows() > 0 {
        warn(format!(
            "{} rows with missing prices were dropped",
            prices.dropped_rows()
        ));
    }
    let tickers = prices.tickers().to_vec();
    let returns = marketdata::log_returns(&prices)?;
    let mode = if args.rolling {
        WindowMode::Rolling
    } else {
        WindowMode::Blocked
    };
    let realized = marketdata::rolling_determinants(&returns, args.window, args.annualization, mode)?;
    if !realized.clamped.is_empty() {
        warn(format!(
            "{} slightly negative determinants were clamped to zero",
            realized.clamped.len()
        ));
    }
    let corr = marketdata::estimate_correlation(&returns)?;
    let cumulative = marketdata::cumulative_returns(&prices);
    let summary_input = match args.summary_basis {
        Basis::Returns => &returns,
        Basis::Cumulative => &cumulative,
    };
    let summary = marketdata::summary_stats(summary_input, &tickers, args.kurtosis.into())?;

    let out = &args.out;
    files::create_dir(out)?;
    files::write_with(&out.join("realized.csv"), |w| {
        marketdata::write_realized_csv(&realized, w)
    })?;
    files::write_with(&out.join("correlation.csv"), |w| {
        marketdata::write_correlation_csv(&corr, &tickers, w)
    })?;
    files::write_with(&out.join("summary.csv"), |w| marketdata::write_summary_csv(&summary, w))?;

    let columns: Vec<Vec<f64>> = (0..returns.cols()).map(|j| returns.column(j)).collect();
    files::write(
        &out.join("histogram.svg"),
        svg::histogram_grid("Daily log returns", &tickers, &columns, 30),
    )?;
    files::write(
        &out.join("correlation.svg"),
        svg::heatmap("Correlation of log returns", &tickers, &corr.to_rows()),
    )?;
    let days = prices.len();
    let series: Vec<Series> = tickers
        .iter()
        .enumerate()
        .map(|(j, t)| Series {
            name: t,
            points: (0..days).map(|i| (i as f64, cumulative[(i, j)])).collect(),
            style: Style::Line,
        })
        .collect();
    files::write(
        &out.join("cumulative_returns.svg"),
        svg::line_chart("Cumulative returns", "trading day", "S_t / S_0 - 1", &series),
    )?;
    manifest.save(out)?;
    println!(
        "{} windows of {} days, {} assets -> {}",
        realized.len(),
        args.window,
        tickers.len(),
        out.display()
    );
    Ok(())
}
