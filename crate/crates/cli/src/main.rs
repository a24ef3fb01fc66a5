use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spag::concentration::BoundsInput;
use spag_cli::config::parse_override;
use spag_cli::{
    cmd_bounds, cmd_make_synthetic, cmd_run, cmd_tune_mu, cmd_verify_concentration, CliError,
    ConcentrationConfig, KvConfig, RunConfig, EXIT_NUMERICAL,
};

#[derive(Parser)]
#[command(
    name = "spag",
    version,
    about = "Statistically preconditioned accelerated gradient experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the file.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn overrides(
        &self,
        extra: Vec<(&str, Option<String>)>,
    ) -> Result<Vec<(String, String)>, CliError> {
        let mut out: Vec<(String, String)> = self
            .sets
            .iter()
            .map(|s| parse_override(s))
            .collect::<Result<_, _>>()?;
        out.extend(
            extra
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        Ok(out)
    }

    fn load<T: KvConfig>(&self, extra: Vec<(&str, Option<String>)>) -> Result<T, CliError> {
        T::load(self.config.as_deref(), &self.overrides(extra)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its per-iteration CSV.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, short)]
        output: Option<String>,
    },
    /// Closed-form bounds on mu for one or all regimes.
    Bounds(BoundsArgs),
    /// Sandwich pass rate and Hessian gap scaling on synthetic data.
    VerifyConcentration {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Search mu from 0.1/n by factors of 1.2.
    TuneMu {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic dataset in LibSVM format.
    MakeSynthetic {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        output: Option<String>,
    },
}

#[derive(Args)]
struct BoundsArgs {
    /// hoeffding, quadratic, bounded or subgaussian; all when omitted.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 1000.0)]
    n: f64,
    #[arg(long = "big-n", default_value_t = 100_000.0)]
    big_n: f64,
    #[arg(long, default_value_t = 10.0)]
    d: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long = "b-ell", default_value_t = 0.25)]
    b_ell: f64,
    #[arg(long = "m-ell", default_value_t = 1.0)]
    m_ell: f64,
    /// Domain radius D.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long = "c-subg", default_value_t = 1.0)]
    c_subg: f64,
}

impl BoundsArgs {
    fn input(&self) -> BoundsInput {
        BoundsInput {
            r: self.r,
            n: self.n,
            big_n: self.big_n,
            d: self.d,
            delta: self.delta,
            lambda: self.lambda,
            b_ell: self.b_ell,
            m_ell: self.m_ell,
            domain_radius: self.radius,
            rho: self.rho,
            c_subg: self.c_subg,
        }
    }
}

fn emit<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            cfg,
            algorithm,
            mu,
            seed,
            max_iters,
            output,
        } => {
            let config: RunConfig = cfg.load(vec![
                ("algorithm", algorithm),
                ("mu", mu),
                ("seed", seed.map(|s| s.to_string())),
                ("max_iters", max_iters.map(|s| s.to_string())),
                ("output", output),
            ])?;
            let summary = cmd_run(&config)?;
            emit(&summary);
            Ok(if summary.failed() { EXIT_NUMERICAL } else { 0 })
        }
        Command::Bounds(args) => {
            emit(&cmd_bounds(&args.input(), args.regime.as_deref())?);
            Ok(0)
        }
        Command::VerifyConcentration { cfg } => {
            let config: ConcentrationConfig = cfg.load(vec![])?;
            emit(&cmd_verify_concentration(&config)?);
            Ok(0)
        }
        Command::TuneMu { cfg } => {
            let config: RunConfig = cfg.load(vec![])?;
            emit(&cmd_tune_mu(&config)?);
            Ok(0)
        }
        Command::MakeSynthetic { cfg, output } => {
            let config: RunConfig = cfg.load(vec![("output", output)])?;
            emit(&cmd_make_synthetic(&config)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
