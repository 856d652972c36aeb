//! One function per subcommand. Each reads only persisted artifacts from the
//! output directory (plus the season files for `ingest`/`fit`) and writes
//! tab-separated reports next to them.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use oddsmix::betting::{average_correct_probability, backtest, BacktestReport};
use oddsmix::data::{parse_rows, AttachStats, Dataset, LeagueConfig};
use oddsmix::mcmc::{run_sampler, PosteriorDraws};
use oddsmix::model::{Model, ModelData, ModelParameters, ParamLayout};
use oddsmix::odds::{decimal_to_probs, estimate_shin_z, invert_decimal_odds, Outcome, ProbMethod, ProbTriple};
use oddsmix::predict::{
    bayesian_p_value, forecast_all, goal_difference_ppc, observed_scores, replicate_scores, simulate_season, Fixture,
    MatchForecast, Statistic, GRID_MAX_GOALS, POINT_QUANTILES,
};
use oddsmix::synth::{generate, SynthConfig};

use crate::{CliError, RunConfig};

pub const AUGMENTED_FILE: &str = "augmented.tsv";
pub const DRAWS_FILE: &str = "draws.tsv";
pub const FORECASTS_FILE: &str = "forecasts.tsv";
/// Largest R̂ a fit may report before `fit` exits with a convergence failure.
pub const CONVERGENCE_RHAT: f64 = 1.05;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn league_config(cfg: &RunConfig) -> LeagueConfig {
    LeagueConfig { bookmakers: cfg.bookmakers.clone() }
}

fn model(cfg: &RunConfig) -> Model {
    let mut m = Model::new(cfg.priors);
    m.away_intercept = cfg.away_intercept;
    m
}

/// `(label, path)` for every CSV file in the data directory, in name order.
pub fn season_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no season CSV files in {}", dir.display())));
    }
    Ok(files
        .into_iter()
        .map(|p| (p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), p))
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

// ---------------------------------------------------------------- convert

/// Streams an odds file into one probability row per bookmaker quote.
/// Returns the number of rows written.
pub fn convert<W: Write>(input: &Path, method: ProbMethod, bookmakers: &[String], mut out: W) -> Result<usize, CliError> {
    let file = std::fs::File::open(input).map_err(|e| CliError::io(input, e))?;
    let config = LeagueConfig { bookmakers: bookmakers.to_vec() };
    let rows = parse_rows(file, &config).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let mut text = String::from("line\thome\taway\tbookmaker\tp_win\tp_draw\tp_loss\tbooksum\tz\tresidual\n");
    let mut n = 0;
    for row in &rows {
        if row.invalid_odds > 0 {
            return Err(CliError::Data(format!("{}: line {}: invalid decimal odds", input.display(), row.line)));
        }
        for (book, quote) in bookmakers.iter().zip(&row.odds) {
            let Some(d) = quote else { continue };
            let ctx = |e: oddsmix::odds::OddsError| CliError::Data(format!("{}: line {}: {e}", input.display(), row.line));
            let o = invert_decimal_odds(*d).map_err(ctx)?;
            let (p, z, residual) = match method {
                ProbMethod::Basic => (decimal_to_probs(*d, method).map_err(ctx)?, String::new(), String::new()),
                ProbMethod::Shin => {
                    let r = estimate_shin_z(o).map_err(ctx)?;
                    (r.probs, r.z.to_string(), r.residual.to_string())
                }
            };
            writeln!(
                text,
                "{}\t{}\t{}\t{book}\t{}\t{}\t{}\t{}\t{z}\t{residual}",
                row.line,
                row.home,
                row.away,
                p.win,
                p.draw,
                p.loss,
                o.booksum()
            )
            .unwrap();
            n += 1;
        }
    }
    out.write_all(text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(n)
}

// ---------------------------------------------------------------- ingest

pub fn ingest(cfg: &RunConfig) -> Result<(Dataset, AttachStats), CliError> {
    let files = season_files(&cfg.data_dir)?;
    let (ds, stats) = Dataset::from_files(&files, &league_config(cfg), cfg.method)?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("no completed matches in {}", cfg.data_dir.display())));
    }
    cfg.persist()?;
    let mut buf = Vec::new();
    ds.write_augmented(&mut buf)?;
    let path = out_path(cfg, AUGMENTED_FILE);
    std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
    let mut summary = String::from("season\tmatches\n");
    for (s, label) in ds.seasons.iter().enumerate() {
        writeln!(summary, "{label}\t{}", ds.matches.iter().filter(|m| m.record.season == s).count()).unwrap();
    }
    writeln!(
        summary,
        "#quotes\t{}\n#attached\t{}\n#conversion_failures\t{}\n#inversion_failures\t{}",
        stats.quotes, stats.attached, stats.conversion_failures, stats.inversion_failures
    )
    .unwrap();
    write_file(&out_path(cfg, "ingest_summary.tsv"), &summary)?;
    log::info!("ingested {} matches over {} seasons, {} of {} quotes inverted", ds.len(), ds.n_seasons(), stats.attached, stats.quotes);
    Ok((ds, stats))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = out_path(cfg, AUGMENTED_FILE);
    let file = std::fs::File::open(&path)
        .map_err(|e| CliError::Data(format!("{}: {e} (run `oddsmix ingest` or `oddsmix fit` first)", path.display())))?;
    Ok(Dataset::read_augmented(file)?)
}

/// Training and test views plus the test season index.
pub fn split(cfg: &RunConfig, ds: &Dataset) -> Result<(Dataset, Dataset, usize), CliError> {
    let test = match &cfg.test_season {
        None => ds.n_seasons() - 1,
        Some(label) => ds
            .seasons
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| CliError::Data(format!("test season `{label}` not among {:?}", ds.seasons)))?,
    };
    let (train, test_view) = ds.split_by_season(test)?;
    Ok((train, test_view, test))
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub draws: usize,
}

/// Ingests, fits the training seasons and writes draws and diagnostics.
/// Outputs are written even when the convergence check fails.
pub fn fit(cfg: &RunConfig) -> Result<FitSummary, CliError> {
    cfg.validate()?;
    let (ds, _) = ingest(cfg)?;
    let (train, _, _) = split(cfg, &ds)?;
    let data = ModelData::from_dataset(&train);
    let started = std::time::Instant::now();
    let draws = run_sampler(&data, &model(cfg), &cfg.sampler_config())?;
    log::info!("sampled {} draws in {:.1}s", draws.total_draws(), started.elapsed().as_secs_f64());

    let mut buf = Vec::new();
    draws.write_tsv(&mut buf)?;
    let path = out_path(cfg, DRAWS_FILE);
    std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
    let diag = draws.diagnostics();
    write_file(&out_path(cfg, "diagnostics.tsv"), &diag.to_tsv())?;
    let mut acc = String::from("block\taccepted\tproposed\trate\n");
    for a in draws.acceptance() {
        writeln!(acc, "{}\t{}\t{}\t{}", a.family, a.accepted, a.proposed, a.rate()).unwrap();
    }
    write_file(&out_path(cfg, "acceptance.tsv"), &acc)?;
    let summary = FitSummary { max_rhat: diag.max_rhat(), min_ess: diag.min_ess(), draws: draws.total_draws() };
    write_file(
        &out_path(cfg, "fit_summary.tsv"),
        &format!(
            "draws\t{}\nmax_rhat\t{}\nmin_ess_bulk\t{}\n",
            summary.draws,
            fmt_opt(summary.max_rhat),
            fmt_opt(summary.min_ess)
        ),
    )?;
    let bad = diag.flagged(CONVERGENCE_RHAT);
    if !bad.is_empty() {
        return Err(CliError::Convergence(format!(
            "R-hat above {CONVERGENCE_RHAT} for {} parameter(s), e.g. {}; see diagnostics.tsv",
            bad.len(),
            bad.iter().take(5).copied().collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(summary)
}

pub fn load_draws(cfg: &RunConfig, train: &ModelData) -> Result<PosteriorDraws, CliError> {
    let path = out_path(cfg, DRAWS_FILE);
    let file = std::fs::File::open(&path)
        .map_err(|e| CliError::Data(format!("missing draws {}: {e} (run `oddsmix fit` first)", path.display())))?;
    let draws = PosteriorDraws::read_tsv(file)?;
    let expected = ParamLayout::new(train.structure(cfg.away_intercept));
    if draws.layout != expected {
        return Err(CliError::Data(format!(
            "{} was fitted to a different data layout ({:?}) than the current configuration ({:?})",
            path.display(),
            draws.layout.structure,
            expected.structure
        )));
    }
    Ok(draws)
}

struct Fitted {
    ds: Dataset,
    train: ModelData,
    test: Dataset,
    test_index: usize,
    draws: Vec<ModelParameters>,
}

fn fitted(cfg: &RunConfig) -> Result<Fitted, CliError> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let (train_ds, test, test_index) = split(cfg, &ds)?;
    let train = ModelData::from_dataset(&train_ds);
    let draws = load_draws(cfg, &train)?.thinned_params(cfg.predict.thin);
    cfg.persist()?;
    Ok(Fitted { ds, train, test, test_index, draws })
}

fn test_fixtures(f: &Fitted) -> Vec<Fixture> {
    let mut fixtures = Fixture::from_dataset(&f.test);
    for fx in &mut fixtures {
        fx.season = f.test_index;
    }
    fixtures
}

// ---------------------------------------------------------------- predict

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub source: String,
    pub matches: usize,
    pub mean_correct_probability: f64,
}

/// Bookmaker-average probabilities from the raw quotes of a match.
fn bookmaker_probs(m: &oddsmix::data::AugmentedMatch, method: ProbMethod) -> Option<ProbTriple> {
    let quotes: Vec<ProbTriple> =
        m.record.odds.iter().flatten().filter_map(|d| decimal_to_probs(*d, method).ok()).collect();
    if quotes.is_empty() {
        return None;
    }
    let mut acc = [0.0; 3];
    for q in &quotes {
        acc.iter_mut().zip(q.as_array()).for_each(|(a, v)| *a += v);
    }
    Some(ProbTriple::from_array(acc.map(|a| a / quotes.len() as f64)).renormalized())
}

pub fn predict(cfg: &RunConfig) -> Result<Vec<AccuracyRow>, CliError> {
    let f = fitted(cfg)?;
    let fixtures = test_fixtures(&f);
    let forecasts = forecast_all(&f.draws, &model(cfg), None, &fixtures, &cfg.predict_config())?;
    let teams = &f.ds.teams;

    let mut text = String::from(
        "id\tdate\thome\taway\tgoals_home\tgoals_away\tp_win\tp_draw\tp_loss\trate_home\trate_away\tmode\n",
    );
    let mut grids = String::from("id\thome_goals\taway_goals\tprob\n");
    for (fc, m) in forecasts.iter().zip(&f.test.matches) {
        let r = &m.record;
        let (mh, ma) = fc.mode();
        writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{mh}-{ma}",
            fc.id,
            r.date.map(|d| d.to_string()).unwrap_or_default(),
            teams.name(r.home),
            teams.name(r.away),
            r.goals_home,
            r.goals_away,
            fc.probs.win,
            fc.probs.draw,
            fc.probs.loss,
            fc.mean_rates.home,
            fc.mean_rates.away
        )
        .unwrap();
        for i in 0..=GRID_MAX_GOALS {
            for j in 0..=GRID_MAX_GOALS {
                writeln!(grids, "{}\t{i}\t{j}\t{}", fc.id, fc.grid[i][j]).unwrap();
            }
        }
    }
    write_file(&out_path(cfg, FORECASTS_FILE), &text)?;
    write_file(&out_path(cfg, "score_grids.tsv"), &grids)?;

    let rows = accuracy(&forecasts, &f.test)?;
    let mut acc = String::from("source\tmatches\tmean_correct_probability\n");
    for r in &rows {
        writeln!(acc, "{}\t{}\t{}", r.source, r.matches, r.mean_correct_probability).unwrap();
    }
    write_file(&out_path(cfg, "accuracy.tsv"), &acc)?;
    Ok(rows)
}

/// Average probability of the realized outcome for the model on all test
/// matches, and for the model and the bookmakers on the matches with quotes.
pub fn accuracy(forecasts: &[MatchForecast], test: &Dataset) -> Result<Vec<AccuracyRow>, CliError> {
    let outcomes: Vec<Outcome> =
        test.matches.iter().map(|m| Outcome::from_goals(m.record.goals_home, m.record.goals_away)).collect();
    let model_probs: Vec<ProbTriple> = forecasts.iter().map(|f| f.probs).collect();
    let mut rows = vec![AccuracyRow {
        source: "model".into(),
        matches: outcomes.len(),
        mean_correct_probability: average_correct_probability(&model_probs, &outcomes)?,
    }];
    let quoted: Vec<usize> = (0..test.matches.len()).filter(|&i| test.matches[i].record.odds.iter().any(Option::is_some)).collect();
    let pick = |v: &[ProbTriple]| quoted.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let quoted_outcomes: Vec<Outcome> = quoted.iter().map(|&i| outcomes[i]).collect();
    rows.push(AccuracyRow {
        source: "model_quoted".into(),
        matches: quoted.len(),
        mean_correct_probability: average_correct_probability(&pick(&model_probs), &quoted_outcomes)?,
    });
    for method in [ProbMethod::Shin, ProbMethod::Basic] {
        let probs: Vec<ProbTriple> =
            quoted.iter().map(|&i| bookmaker_probs(&test.matches[i], method).expect("quoted match")).collect();
        rows.push(AccuracyRow {
            source: format!("bookmakers_{method}"),
            matches: quoted.len(),
            mean_correct_probability: average_correct_probability(&probs, &quoted_outcomes)?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------- simulate

pub fn simulate(cfg: &RunConfig) -> Result<oddsmix::predict::SeasonSimulation, CliError> {
    let f = fitted(cfg)?;
    let fixtures = test_fixtures(&f);
    let sim = simulate_season(&f.draws, &model(cfg), &fixtures, &cfg.predict_config())?;
    let names = f.ds.teams.names();
    // Only teams that play in the simulated season are reported, ordered by P(first).
    let mut playing: Vec<usize> = (0..sim.n_teams).filter(|t| fixtures.iter().any(|fx| fx.home == *t || fx.away == *t)).collect();
    playing.sort_by(|&a, &b| sim.rank_probs[b][0].total_cmp(&sim.rank_probs[a][0]).then(a.cmp(&b)));

    let mut ranks = String::from("team");
    for r in 1..=playing.len() {
        write!(ranks, "\tp_rank{r}").unwrap();
    }
    ranks.push('\n');
    let mut points = String::from("team\tmean");
    for q in POINT_QUANTILES {
        write!(points, "\tq{:02}", (q * 100.0).round() as u32).unwrap();
    }
    points.push('\n');
    for &t in &playing {
        ranks.push_str(&names[t]);
        for r in 0..playing.len() {
            write!(ranks, "\t{}", sim.rank_probs[t][r]).unwrap();
        }
        ranks.push('\n');
        write!(points, "{}\t{}", names[t], sim.mean_points[t]).unwrap();
        for q in &sim.points_quantiles[t] {
            write!(points, "\t{q}").unwrap();
        }
        points.push('\n');
    }
    if sim.incomplete_fixtures {
        ranks.push_str("#warning\tfixture list is not a full double round robin\n");
    }
    write_file(&out_path(cfg, "rank_probabilities.tsv"), &ranks)?;
    write_file(&out_path(cfg, "points.tsv"), &points)?;
    Ok(sim)
}

// ---------------------------------------------------------------- ppc

#[derive(Debug, Clone, PartialEq)]
pub struct PpcRow {
    pub statistic: Statistic,
    pub observed: f64,
    pub replicated_mean: f64,
    pub p_value: f64,
}

pub fn ppc(cfg: &RunConfig) -> Result<Vec<PpcRow>, CliError> {
    let f = fitted(cfg)?;
    let reps = replicate_scores(&f.draws, &f.train, cfg.predict_config().seed);
    let obs = observed_scores(&f.train);
    let rows = ppc_rows(&obs, &reps);
    let mut text = String::from("statistic\tobserved\treplicated_mean\tp_value\n");
    for r in &rows {
        writeln!(text, "{}\t{}\t{}\t{}", r.statistic.name(), r.observed, r.replicated_mean, r.p_value).unwrap();
    }
    write_file(&out_path(cfg, "ppc_pvalues.tsv"), &text)?;
    let gd = goal_difference_ppc(&obs, &reps, cfg.predict.max_goal_difference);
    let mut text = String::from("goal_difference\tobserved\treplicated_mean\treplicated_q025\treplicated_q975\n");
    for i in 0..gd.diffs.len() {
        writeln!(text, "{}\t{}\t{}\t{}\t{}", gd.diffs[i], gd.observed[i], gd.rep_mean[i], gd.rep_lo[i], gd.rep_hi[i]).unwrap();
    }
    write_file(&out_path(cfg, "ppc_goal_difference.tsv"), &text)?;
    Ok(rows)
}

pub fn ppc_rows(obs: &[(u32, u32)], reps: &[Vec<(u32, u32)>]) -> Vec<PpcRow> {
    Statistic::ALL
        .iter()
        .map(|&s| PpcRow {
            statistic: s,
            observed: s.compute(obs),
            replicated_mean: reps.iter().map(|r| s.compute(r)).sum::<f64>() / reps.len().max(1) as f64,
            p_value: bayesian_p_value(obs, reps, s),
        })
        .collect()
}

// ---------------------------------------------------------------- bet

/// Reads the persisted forecasts back as probability triples in id order.
pub fn read_forecasts(cfg: &RunConfig, n: usize) -> Result<Vec<ProbTriple>, CliError> {
    let path = out_path(cfg, FORECASTS_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e} (run `oddsmix predict` first)", path.display())))?;
    let mut out = vec![None; n];
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || CliError::Data(format!("{}: line {}: malformed forecast", path.display(), i + 1));
        if f.len() < 9 {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        let p: Vec<f64> = f[6..9].iter().map(|x| x.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        *out.get_mut(id).ok_or_else(bad)? = Some(ProbTriple::new(p[0], p[1], p[2]));
    }
    out.into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| CliError::Data(format!("{}: no forecast for match {i}", path.display()))))
        .collect()
}

pub fn bet(cfg: &RunConfig) -> Result<Vec<(String, BacktestReport)>, CliError> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let (_, test, _) = split(cfg, &ds)?;
    cfg.persist()?;
    let model_probs = read_forecasts(cfg, test.matches.len())?;
    // Betting with the bookmakers' own (Shin) probabilities, where quoted.
    let book_probs: Vec<ProbTriple> = test
        .matches
        .iter()
        .map(|m| bookmaker_probs(m, ProbMethod::Shin).unwrap_or(ProbTriple::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)))
        .collect();
    let books: Vec<usize> = (0..test.n_bookmakers()).collect();

    let mut reports = Vec::new();
    for name in &cfg.bet.strategies {
        let strategy = cfg.strategy(name)?;
        for (source, probs) in [("model", &model_probs), ("bookmakers", &book_probs)] {
            reports.push((source.to_string(), backtest(probs, &test, strategy, &books)?));
        }
    }

    let mut summary = String::from(
        "source\tstrategy\tbookmaker\tmatches\tbets\tskipped_missing\tmean_profit\tse\tmean_expected_profit\ttotal_stake\ttotal_profit\n",
    );
    let mut records = String::from("source\tstrategy\tbookmaker\tmatch\toutcome\tstake\todd\tprofit\texpected_profit\n");
    for (source, r) in &reports {
        for b in r.per_bookmaker.iter().chain(std::iter::once(&r.overall)) {
            writeln!(
                summary,
                "{source}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.strategy.label(),
                b.bookmaker,
                b.matches,
                b.bets,
                b.skipped_missing,
                b.mean_profit,
                b.se,
                b.mean_expected_profit,
                b.total_stake,
                b.total_profit
            )
            .unwrap();
        }
        for rec in r.records.iter().filter(|rec| rec.stake > 0.0) {
            writeln!(
                records,
                "{source}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.strategy.label(),
                test.bookmakers[rec.bookmaker],
                rec.match_id,
                rec.outcome.map_or("all", |o| o.label()),
                rec.stake,
                fmt_opt(rec.odd),
                rec.profit,
                rec.expected_profit
            )
            .unwrap();
        }
    }
    write_file(&out_path(cfg, "bets_summary.tsv"), &summary)?;
    write_file(&out_path(cfg, "bets.tsv"), &records)?;
    let json: Vec<serde_json::Value> = reports
        .iter()
        .map(|(source, r)| {
            serde_json::json!({
                "source": source,
                "strategy": r.strategy.label(),
                "per_bookmaker": r.per_bookmaker,
                "overall": r.overall,
            })
        })
        .collect();
    write_file(&out_path(cfg, "bets_summary.json"), &serde_json::to_string_pretty(&json).expect("serializable"))?;
    Ok(reports)
}

// ---------------------------------------------------------------- synth

/// Writes a synthetic league as season CSVs plus its true parameters.
pub fn synth(dir: &Path, config: &SynthConfig, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let league = generate(config, seed);
    let files = league.write_csvs(dir).map_err(|e| CliError::io(dir, e))?;
    let layout = ParamLayout::new(league.data.structure(false));
    let mut row = Vec::new();
    layout.flatten(&league.truth, &mut row);
    let mut truth = String::from("parameter\tvalue\n");
    for (name, v) in layout.names().iter().zip(&row) {
        writeln!(truth, "{name}\t{v}").unwrap();
    }
    let truth_dir = dir.join("truth");
    std::fs::create_dir_all(&truth_dir).map_err(|e| CliError::io(&truth_dir, e))?;
    write_file(&truth_dir.join("parameters.tsv"), &truth)?;
    Ok(files)
}
