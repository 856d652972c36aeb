//! Posterior predictive replication, p-values, match forecasts and season simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::model::{mix, mixture_rates, Model, ModelData, ModelParameters};
use crate::numeric::{quantile_sorted, sample_std_normal_between, std_normal_cdf};
use crate::odds::{Outcome, ProbTriple};
use crate::skellam::{score_grid, three_way_probs, RatePair};

/// Goals per side kept in exact-score grids.
pub const GRID_MAX_GOALS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PredictError {
    #[error("team index {team} is not known to the model ({n_teams} teams)")]
    UnknownTeam { team: usize, n_teams: usize },
    #[error("no posterior draws")]
    NoDraws,
    #[error("fixture {0} refers to a training match outside the fitted data")]
    UnknownMatch(usize),
}

/// A match to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: usize,
    pub season: usize,
    pub home: usize,
    pub away: usize,
    /// Index into the fitted data when the match was part of training.
    pub train_match: Option<usize>,
    pub implicit_home: Vec<f64>,
    pub implicit_away: Vec<f64>,
}

impl Fixture {
    /// Fixtures for every match of a (test) dataset, numbered in file order.
    pub fn from_dataset(ds: &Dataset) -> Vec<Fixture> {
        ds.matches
            .iter()
            .enumerate()
            .map(|(id, m)| Fixture {
                id,
                season: m.record.season,
                home: m.record.home,
                away: m.record.away,
                train_match: None,
                implicit_home: m.implicit_rates().map(|r| r.home).collect(),
                implicit_away: m.implicit_rates().map(|r| r.away).collect(),
            })
            .collect()
    }

    /// The fitted matches themselves.
    pub fn from_training(data: &ModelData) -> Vec<Fixture> {
        data.matches
            .iter()
            .enumerate()
            .map(|(id, m)| Fixture {
                id,
                season: m.season,
                home: m.home,
                away: m.away,
                train_match: Some(id),
                implicit_home: m.implicit_home.clone(),
                implicit_away: m.implicit_away.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    /// Let quoted odds of unplayed matches inform the mixture rates.
    pub use_test_odds: bool,
    /// Keep every `thin`-th posterior draw.
    pub thin: usize,
    pub n_simulations: usize,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { use_test_odds: true, thin: 4, n_simulations: 10_000, seed: 20170901 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchForecast {
    pub id: usize,
    pub home: usize,
    pub away: usize,
    pub probs: ProbTriple,
    /// `grid[i][j] = P(home = i, away = j)` for `i, j <= GRID_MAX_GOALS`.
    pub grid: Vec<Vec<f64>>,
    pub mean_rates: RatePair,
}

impl MatchForecast {
    /// Most likely exact score.
    pub fn mode(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.grid.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > self.grid[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }
}

/// Independent stream for a pair of indices under one seed.
fn sub_rng(seed: u64, a: usize, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(b as u64);
    rng
}

fn check_teams(fixture: &Fixture, n_teams: usize) -> Result<(), PredictError> {
    for team in [fixture.home, fixture.away] {
        if team >= n_teams {
            return Err(PredictError::UnknownTeam { team, n_teams });
        }
    }
    Ok(())
}

/// Attack and defence effects for `season`. Seasons past the fitted ones
/// continue the random walk and are projected back to zero sum.
pub fn season_effects<R: Rng + ?Sized>(d: &ModelParameters, season: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let n = d.att.len();
    if season < n {
        return (d.att[season].clone(), d.def[season].clone());
    }
    let (mut att, mut def) = (d.att[n - 1].clone(), d.def[n - 1].clone());
    for _ in n..=season {
        for (v, sigma) in [(&mut att, d.sigma_att), (&mut def, d.sigma_def)] {
            for x in v.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *x += sigma * z;
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        }
    }
    (att, def)
}

/// Draw of a bookmaker rate `λ` given quoted implicit rates, from
/// `truncN(λ; α, s) Π truncN(x; λ, τ)`.
///
/// The Gaussian part is a single truncated Normal; the remaining factor
/// `Φ(λ/τ)^-n` is decreasing, so a two-piece envelope split at `c` gives an
/// exact rejection sampler.
pub fn sample_lambda<R: Rng + ?Sized>(rng: &mut R, alpha: f64, prior_sd: f64, tau: f64, implicit: &[f64]) -> f64 {
    let n = implicit.len() as f64;
    let prec = 1.0 / (prior_sd * prior_sd) + n / (tau * tau);
    let mean = (alpha / (prior_sd * prior_sd) + implicit.iter().sum::<f64>() / (tau * tau)) / prec;
    let sd = prec.sqrt().recip();
    let ln_w = |x: f64| -n * std_normal_cdf(x / tau).ln();
    let c = (mean - 3.0 * sd).max(0.0);
    let (a0, c0) = (-mean / sd, (c - mean) / sd);
    let mass_low = (std_normal_cdf(c0) - std_normal_cdf(a0)).max(0.0);
    let mass_high = 1.0 - std_normal_cdf(c0);
    let (w_low, w_high) = (ln_w(0.0), ln_w(c));
    let p_low = {
        let l = mass_low * (w_low - w_high).exp();
        l / (l + mass_high)
    };
    for _ in 0..100_000 {
        let low = rng.random::<f64>() < p_low;
        let z = if low {
            sample_std_normal_between(rng, a0, c0)
        } else {
            sample_std_normal_between(rng, c0, f64::INFINITY)
        };
        let x = (mean + sd * z).max(0.0);
        let bound = if low { w_low } else { w_high };
        if rng.random::<f64>().ln() < ln_w(x) - bound {
            return x;
        }
    }
    mean.max(0.0)
}

/// Scoring rates `γ` for a fixture under one draw.
fn fixture_rates<R: Rng + ?Sized>(
    d: &ModelParameters,
    model: &Model,
    data: Option<&ModelData>,
    fixture: &Fixture,
    effects: &(Vec<f64>, Vec<f64>),
    use_odds: bool,
    rng: &mut R,
) -> RatePair {
    if let (Some(m), Some(data)) = (fixture.train_match, data) {
        return mixture_rates(d, m, &data.matches[m]);
    }
    let (att, def) = effects;
    let theta = RatePair {
        home: (d.intercept + d.mu + att[fixture.home] + def[fixture.away]).exp(),
        away: (d.intercept + att[fixture.away] + def[fixture.home]).exp(),
    };
    if !use_odds || fixture.implicit_home.is_empty() {
        return theta;
    }
    let beta = Beta::new(model.priors.beta_a, model.priors.beta_b).expect("validated Beta prior");
    let lambda_sd = model.priors.lambda_sd();
    let mut side = |theta: f64, alpha: f64, tau: f64, implicit: &[f64]| {
        let lambda = sample_lambda(rng, alpha, lambda_sd, tau, implicit);
        let p: f64 = beta.sample(rng);
        mix(p, theta, lambda)
    };
    let home = side(theta.home, d.alpha[0], d.tau[0], &fixture.implicit_home);
    let away = side(theta.away, d.alpha[1], d.tau[1], &fixture.implicit_away);
    RatePair { home, away }
}

fn validate_fixture(draws: &[ModelParameters], data: Option<&ModelData>, fixture: &Fixture) -> Result<(), PredictError> {
    let first = draws.first().ok_or(PredictError::NoDraws)?;
    check_teams(fixture, first.att.first().map_or(0, Vec::len))?;
    if let Some(m) = fixture.train_match {
        if data.is_none_or(|d| m >= d.matches.len()) {
            return Err(PredictError::UnknownMatch(m));
        }
    }
    Ok(())
}

/// Forecast averaged over posterior draws: Skellam probabilities and score
/// grids are computed per draw and then averaged.
pub fn forecast_match(
    draws: &[ModelParameters],
    model: &Model,
    data: Option<&ModelData>,
    fixture: &Fixture,
    config: &PredictConfig,
) -> Result<MatchForecast, PredictError> {
    validate_fixture(draws, data, fixture)?;
    let n = draws.len() as f64;
    let mut probs = [0.0; 3];
    let mut grid = vec![vec![0.0; GRID_MAX_GOALS + 1]; GRID_MAX_GOALS + 1];
    let (mut mean_home, mut mean_away) = (0.0, 0.0);
    for (k, d) in draws.iter().enumerate() {
        let mut rng = sub_rng(config.seed, fixture.id, k);
        let effects = if fixture.train_match.is_some() {
            (Vec::new(), Vec::new())
        } else {
            season_effects(d, fixture.season, &mut rng)
        };
        let rates = fixture_rates(d, model, data, fixture, &effects, config.use_test_odds, &mut rng);
        for (acc, v) in probs.iter_mut().zip(three_way_probs(rates).as_array()) {
            *acc += v;
        }
        for (row, g) in grid.iter_mut().zip(score_grid(rates, GRID_MAX_GOALS)) {
            row.iter_mut().zip(g).for_each(|(a, v)| *a += v);
        }
        mean_home += rates.home;
        mean_away += rates.away;
    }
    let total: f64 = grid.iter().flatten().sum();
    grid.iter_mut().flatten().for_each(|v| *v /= total);
    Ok(MatchForecast {
        id: fixture.id,
        home: fixture.home,
        away: fixture.away,
        probs: ProbTriple::from_array(probs.map(|p| p / n)).renormalized(),
        grid,
        mean_rates: RatePair { home: mean_home / n, away: mean_away / n },
    })
}

/// Forecasts for many fixtures, in parallel and in input order.
pub fn forecast_all(
    draws: &[ModelParameters],
    model: &Model,
    data: Option<&ModelData>,
    fixtures: &[Fixture],
    config: &PredictConfig,
) -> Result<Vec<MatchForecast>, PredictError> {
    fixtures.par_iter().map(|f| forecast_match(draws, model, data, f, config)).collect()
}

/// One simulated set of scores for every training match per draw.
pub fn replicate_scores(draws: &[ModelParameters], data: &ModelData, seed: u64) -> Vec<Vec<(u32, u32)>> {
    draws
        .par_iter()
        .enumerate()
        .map(|(k, d)| {
            let mut rng = sub_rng(seed, usize::MAX, k);
            data.matches
                .iter()
                .enumerate()
                .map(|(m, obs)| {
                    let g = mixture_rates(d, m, obs);
                    (poisson(g.home, &mut rng), poisson(g.away, &mut rng))
                })
                .collect()
        })
        .collect()
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u32 {
    if rate <= 0.0 || !rate.is_finite() {
        return 0;
    }
    Poisson::new(rate).map(|p| p.sample(rng) as u32).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MeanGoalDifference,
    DrawFrequency,
    TotalGoals,
    MaxHomeScore,
}

impl Statistic {
    pub const ALL: [Statistic; 4] =
        [Statistic::MeanGoalDifference, Statistic::DrawFrequency, Statistic::TotalGoals, Statistic::MaxHomeScore];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::MeanGoalDifference => "mean_goal_difference",
            Statistic::DrawFrequency => "draw_frequency",
            Statistic::TotalGoals => "total_goals",
            Statistic::MaxHomeScore => "max_home_score",
        }
    }

    pub fn compute(self, scores: &[(u32, u32)]) -> f64 {
        let n = scores.len().max(1) as f64;
        match self {
            Statistic::MeanGoalDifference => scores.iter().map(|&(h, a)| h as f64 - a as f64).sum::<f64>() / n,
            Statistic::DrawFrequency => scores.iter().filter(|(h, a)| h == a).count() as f64 / n,
            Statistic::TotalGoals => scores.iter().map(|&(h, a)| (h + a) as f64).sum(),
            Statistic::MaxHomeScore => scores.iter().map(|&(h, _)| h).max().unwrap_or(0) as f64,
        }
    }
}

/// Share of replications whose statistic strictly exceeds the observed one.
pub fn bayesian_p_value(observed: &[(u32, u32)], replicated: &[Vec<(u32, u32)>], stat: Statistic) -> f64 {
    if replicated.is_empty() {
        return f64::NAN;
    }
    let t_obs = stat.compute(observed);
    replicated.iter().filter(|r| stat.compute(r) > t_obs).count() as f64 / replicated.len() as f64
}

pub fn observed_scores(data: &ModelData) -> Vec<(u32, u32)> {
    data.matches.iter().map(|m| (m.goals_home, m.goals_away)).collect()
}

/// Observed goal-difference frequencies against the replicated ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalDiffPpc {
    pub diffs: Vec<i32>,
    pub observed: Vec<f64>,
    pub rep_mean: Vec<f64>,
    pub rep_lo: Vec<f64>,
    pub rep_hi: Vec<f64>,
}

impl GoalDiffPpc {
    /// Share of goal differences whose observed frequency lies inside the
    /// replicated 95% envelope.
    pub fn coverage(&self) -> f64 {
        let inside =
            (0..self.diffs.len()).filter(|&i| self.rep_lo[i] <= self.observed[i] && self.observed[i] <= self.rep_hi[i]);
        inside.count() as f64 / self.diffs.len() as f64
    }
}

/// Frequencies of every goal difference in `[-max_diff, max_diff]`, with the
/// extremes absorbing anything beyond.
pub fn goal_difference_ppc(observed: &[(u32, u32)], replicated: &[Vec<(u32, u32)>], max_diff: i32) -> GoalDiffPpc {
    let width = (2 * max_diff + 1) as usize;
    let hist = |scores: &[(u32, u32)]| {
        let mut h = vec![0.0; width];
        for &(a, b) in scores {
            let d = (a as i32 - b as i32).clamp(-max_diff, max_diff);
            h[(d + max_diff) as usize] += 1.0;
        }
        let n = scores.len().max(1) as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    let reps: Vec<Vec<f64>> = replicated.iter().map(|r| hist(r)).collect();
    let mut out = GoalDiffPpc {
        diffs: (-max_diff..=max_diff).collect(),
        observed: hist(observed),
        rep_mean: Vec::with_capacity(width),
        rep_lo: Vec::with_capacity(width),
        rep_hi: Vec::with_capacity(width),
    };
    for i in 0..width {
        let mut col: Vec<f64> = reps.iter().map(|h| h[i]).collect();
        col.sort_by(f64::total_cmp);
        out.rep_mean.push(col.iter().sum::<f64>() / col.len().max(1) as f64);
        out.rep_lo.push(quantile_sorted(&col, 0.025));
        out.rep_hi.push(quantile_sorted(&col, 0.975));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonSimulation {
    pub n_simulations: usize,
    pub n_teams: usize,
    /// `rank_probs[team][rank]`, rank 0 being first.
    pub rank_probs: Vec<Vec<f64>>,
    pub mean_points: Vec<f64>,
    /// Points quantiles per team at [`POINT_QUANTILES`].
    pub points_quantiles: Vec<Vec<f64>>,
    pub incomplete_fixtures: bool,
    /// Every simulated table as `points[sim][team]`.
    pub points: Vec<Vec<u32>>,
}

pub const POINT_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Whether `fixtures` is exactly one double round robin over `n_teams`.
pub fn is_double_round_robin(fixtures: &[Fixture], n_teams: usize) -> bool {
    let mut seen = vec![vec![0usize; n_teams]; n_teams];
    for f in fixtures {
        if f.home >= n_teams || f.away >= n_teams || f.home == f.away {
            return false;
        }
        seen[f.home][f.away] += 1;
    }
    (0..n_teams).all(|h| (0..n_teams).all(|a| seen[h][a] == usize::from(h != a)))
}

/// Simulates the whole fixture list many times, each run under one
/// randomly chosen posterior draw. Ties on points are broken by goal
/// difference, then at random.
pub fn simulate_season(
    draws: &[ModelParameters],
    model: &Model,
    fixtures: &[Fixture],
    config: &PredictConfig,
) -> Result<SeasonSimulation, PredictError> {
    let first = draws.first().ok_or(PredictError::NoDraws)?;
    let n_teams = first.att.first().map_or(0, Vec::len);
    for f in fixtures {
        check_teams(f, n_teams)?;
    }
    let incomplete = !is_double_round_robin(fixtures, n_teams);
    if incomplete {
        log::warn!("fixture list is not a full double round robin over {n_teams} teams");
    }
    let season = fixtures.iter().map(|f| f.season).max().unwrap_or(first.att.len());
    let tables: Vec<(Vec<u32>, Vec<usize>)> = (0..config.n_simulations)
        .into_par_iter()
        .map(|sim| {
            let mut rng = sub_rng(config.seed, usize::MAX - 1, sim);
            let d = &draws[rng.random_range(0..draws.len())];
            let effects = season_effects(d, season, &mut rng);
            let mut points = vec![0u32; n_teams];
            let mut diff = vec![0i64; n_teams];
            for f in fixtures {
                let fx = Fixture { train_match: None, ..f.clone() };
                let rates = fixture_rates(d, model, None, &fx, &effects, config.use_test_odds, &mut rng);
                let (gh, ga) = (poisson(rates.home, &mut rng), poisson(rates.away, &mut rng));
                diff[f.home] += gh as i64 - ga as i64;
                diff[f.away] += ga as i64 - gh as i64;
                match Outcome::from_goals(gh, ga) {
                    Outcome::Win => points[f.home] += 3,
                    Outcome::Draw => {
                        points[f.home] += 1;
                        points[f.away] += 1;
                    }
                    Outcome::Loss => points[f.away] += 3,
                }
            }
            let tiebreak: Vec<f64> = (0..n_teams).map(|_| rng.random()).collect();
            let mut order: Vec<usize> = (0..n_teams).collect();
            order.sort_by(|&a, &b| {
                points[b].cmp(&points[a]).then(diff[b].cmp(&diff[a])).then(tiebreak[a].total_cmp(&tiebreak[b]))
            });
            let mut rank = vec![0usize; n_teams];
            for (r, &t) in order.iter().enumerate() {
                rank[t] = r;
            }
            (points, rank)
        })
        .collect();

    let n = config.n_simulations.max(1) as f64;
    let mut rank_probs = vec![vec![0.0; n_teams]; n_teams];
    for (_, rank) in &tables {
        for (t, &r) in rank.iter().enumerate() {
            rank_probs[t][r] += 1.0 / n;
        }
    }
    let mut mean_points = vec![0.0; n_teams];
    let mut points_quantiles = Vec::with_capacity(n_teams);
    for (t, mp) in mean_points.iter_mut().enumerate() {
        let mut col: Vec<f64> = tables.iter().map(|(p, _)| p[t] as f64).collect();
        *mp = col.iter().sum::<f64>() / n;
        col.sort_by(f64::total_cmp);
        points_quantiles.push(POINT_QUANTILES.iter().map(|&q| quantile_sorted(&col, q)).collect());
    }
    Ok(SeasonSimulation {
        n_simulations: config.n_simulations,
        n_teams,
        rank_probs,
        mean_points,
        points_quantiles,
        incomplete_fixtures: incomplete,
        points: tables.into_iter().map(|(p, _)| p).collect(),
    })
}
