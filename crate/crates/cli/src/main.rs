use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oddsmix::data::DEFAULT_BOOKMAKERS;
use oddsmix::odds::ProbMethod;
use oddsmix::synth::SynthConfig;
use oddsmix_cli::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "oddsmix", version, about = "Bookmaker odds and historical scores in one Bayesian football model")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert quoted odds in a CSV file to probabilities.
    Convert {
        input: PathBuf,
        #[arg(long, default_value = "shin")]
        method: ProbMethod,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Bookmaker column prefixes, comma separated.
        #[arg(long, value_delimiter = ',')]
        bookmakers: Option<Vec<String>>,
    },
    /// Load the season files and attach implicit scoring rates.
    Ingest(RunArgs),
    /// Ingest and sample the posterior of the training seasons.
    Fit(RunArgs),
    /// Forecast every test-season match.
    Predict(RunArgs),
    /// Simulate the test season and tabulate final ranks and points.
    Simulate(RunArgs),
    /// Posterior predictive checks on the training seasons.
    Ppc(RunArgs),
    /// Backtest the betting strategies on the test season.
    Bet(RunArgs),
    /// Write a synthetic league drawn from the model.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML); flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    league: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    method: Option<ProbMethod>,
    /// File stem of the test season (default: the last one).
    #[arg(long)]
    test_season: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "BOOL")]
    use_test_odds: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    only_positive_ev: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    away_intercept: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    bookmakers: Option<Vec<String>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Keep every n-th draw for forecasts, simulations and checks.
    #[arg(long)]
    predict_thin: Option<usize>,
    #[arg(long)]
    simulations: Option<usize>,
    /// Strategies to backtest: a, b, never, all.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(
            league => cfg.league,
            data_dir => cfg.data_dir,
            method => cfg.method,
            out_dir => cfg.out_dir,
            seed => cfg.seed,
            use_test_odds => cfg.use_test_odds,
            only_positive_ev => cfg.only_positive_ev,
            away_intercept => cfg.away_intercept,
            bookmakers => cfg.bookmakers,
            iterations => cfg.sampler.iterations,
            burnin => cfg.sampler.burnin,
            chains => cfg.sampler.chains,
            thin => cfg.sampler.thin,
            predict_thin => cfg.predict.thin,
            simulations => cfg.predict.simulations,
            strategies => cfg.bet.strategies,
        );
        if self.test_season.is_some() {
            cfg.test_season = self.test_season;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    teams: usize,
    #[arg(long, default_value_t = 2)]
    seasons: usize,
    #[arg(long, default_value_t = 3)]
    bookmakers: usize,
    /// Double round robins per season.
    #[arg(long, default_value_t = 1)]
    round_robins: usize,
    /// Extra attack strength of the first team.
    #[arg(long, default_value_t = 0.0)]
    dominant: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convert { input, method, output, bookmakers } => {
            let books = bookmakers.unwrap_or_else(|| DEFAULT_BOOKMAKERS.iter().map(|s| s.to_string()).collect());
            let n = match output {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
                    commands::convert(&input, method, &books, std::io::BufWriter::new(file))?
                }
                None => commands::convert(&input, method, &books, std::io::stdout().lock())?,
            };
            log::info!("converted {n} quotes");
        }
        Command::Ingest(args) => {
            let cfg = args.resolve()?;
            let (ds, stats) = commands::ingest(&cfg)?;
            eprintln!(
                "{} matches, {} seasons, {}/{} quotes inverted -> {}",
                ds.len(),
                ds.n_seasons(),
                stats.attached,
                stats.quotes,
                cfg.out_dir.display()
            );
        }
        Command::Fit(args) => {
            let cfg = args.resolve()?;
            let s = commands::fit(&cfg)?;
            eprintln!(
                "{} draws, max R-hat {:.4}, min bulk ESS {:.0} -> {}",
                s.draws,
                s.max_rhat.unwrap_or(f64::NAN),
                s.min_ess.unwrap_or(f64::NAN),
                cfg.out_dir.display()
            );
        }
        Command::Predict(args) => {
            let cfg = args.resolve()?;
            for row in commands::predict(&cfg)? {
                eprintln!("{:<18} {:>4} matches  p-bar {:.4}", row.source, row.matches, row.mean_correct_probability);
            }
        }
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let sim = commands::simulate(&cfg)?;
            eprintln!("{} simulated seasons -> {}", sim.n_simulations, cfg.out_dir.join("rank_probabilities.tsv").display());
        }
        Command::Ppc(args) => {
            let cfg = args.resolve()?;
            for row in commands::ppc(&cfg)? {
                eprintln!("{:<22} observed {:>8.3}  p {:.3}", row.statistic.name(), row.observed, row.p_value);
            }
        }
        Command::Bet(args) => {
            let cfg = args.resolve()?;
            for (source, r) in commands::bet(&cfg)? {
                let o = &r.overall;
                eprintln!(
                    "{source:<10} {:<5} {:>5} bets  mean profit {:+.4} ± {:.4}",
                    r.strategy.label(),
                    o.bets,
                    o.mean_profit,
                    o.se
                );
            }
        }
        Command::Synth(a) => {
            let config = SynthConfig {
                n_teams: a.teams,
                n_seasons: a.seasons,
                n_bookmakers: a.bookmakers.min(DEFAULT_BOOKMAKERS.len()),
                round_robins: a.round_robins,
                dominant: a.dominant,
                ..SynthConfig::default()
            };
            if config.n_teams < 2 || config.n_seasons == 0 || config.round_robins == 0 {
                return Err(CliError::Usage("synth needs at least 2 teams, 1 season and 1 round robin".into()));
            }
            let files = commands::synth(&a.out_dir, &config, a.seed)?;
            eprintln!("wrote {} season files to {}", files.len(), a.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
