//! Joint log-density of the odds-informed Poisson mixture model.
//!
//! Goals follow `Poisson(p·θ + (1 − p)·λ)` per side, where `θ` comes from
//! seasonal attack/defence effects and `λ` is a per-match bookmaker rate that
//! also generates each bookmaker's implicit rate through a truncated Normal.
//! Attack and defence effects follow a random walk across seasons and sum to
//! zero within each season.
//!
//! The sampler works on an unconstrained vector: scales and rates on the log
//! scale, mixture weights on the logit scale, and `T − 1` free effects per
//! season with the last team's effect implied by the zero-sum constraint.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::numeric::{
    ln_beta_pdf, ln_half_cauchy_pdf, ln_normal_pdf, ln_poisson_pmf, ln_std_normal_cdf, ln_trunc_normal_pos_pdf,
    logistic, logit, ExactSum, LN_SQRT_2PI,
};
use crate::skellam::RatePair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("log posterior is not finite ({0})")]
    NonFinite(f64),
    #[error("parameter vector has length {found}, expected {expected}")]
    Shape { expected: usize, found: usize },
}

/// How the `10` in `N(0, 10)` and `truncN(α, 10)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleReading {
    #[default]
    Variance,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub beta_a: f64,
    pub beta_b: f64,
    /// Spread of the Normal priors on `μ`, `μ_att`, `μ_def` (and the optional intercept).
    pub normal_spread: f64,
    pub half_cauchy_scale: f64,
    /// Spread of the truncated Normal prior of each `λ` around `α`.
    pub lambda_spread: f64,
    pub alpha_mean: f64,
    /// Variance of the truncated Normal hyperprior on `α`.
    pub alpha_variance: f64,
    pub tau_half_cauchy_scale: f64,
    pub reading: ScaleReading,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta_a: 1.0,
            beta_b: 1.0,
            normal_spread: 10.0,
            half_cauchy_scale: 2.5,
            lambda_spread: 10.0,
            alpha_mean: 0.0,
            alpha_variance: 100.0,
            tau_half_cauchy_scale: 2.5,
            reading: ScaleReading::Variance,
        }
    }
}

impl PriorConfig {
    fn spread_to_sd(&self, spread: f64) -> f64 {
        match self.reading {
            ScaleReading::Variance => spread.sqrt(),
            ScaleReading::Sd => spread,
        }
    }

    pub fn normal_sd(&self) -> f64 {
        self.spread_to_sd(self.normal_spread)
    }

    pub fn lambda_sd(&self) -> f64 {
        self.spread_to_sd(self.lambda_spread)
    }

    pub fn alpha_sd(&self) -> f64 {
        self.alpha_variance.sqrt()
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("beta_a", self.beta_a),
            ("beta_b", self.beta_b),
            ("normal_spread", self.normal_spread),
            ("half_cauchy_scale", self.half_cauchy_scale),
            ("lambda_spread", self.lambda_spread),
            ("alpha_variance", self.alpha_variance),
            ("tau_half_cauchy_scale", self.tau_half_cauchy_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("prior setting `{name}` must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Sizes of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub n_teams: usize,
    pub n_seasons: usize,
    pub n_matches: usize,
    /// Adds a shared intercept to both scoring rates.
    pub away_intercept: bool,
}

/// Natural-scale parameters. Effects are indexed `[season][team]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub mu: f64,
    pub intercept: f64,
    pub mu_att: f64,
    pub mu_def: f64,
    pub sigma_att: f64,
    pub sigma_def: f64,
    pub att: Vec<Vec<f64>>,
    pub def: Vec<Vec<f64>>,
    pub p_home: Vec<f64>,
    pub p_away: Vec<f64>,
    pub lambda_home: Vec<f64>,
    pub lambda_away: Vec<f64>,
    pub alpha: [f64; 2],
    pub tau: [f64; 2],
}

impl ModelParameters {
    /// All effects zero, unit scales and rates, weights one half.
    pub fn neutral(s: &Structure) -> Self {
        Self {
            mu: 0.0,
            intercept: 0.0,
            mu_att: 0.0,
            mu_def: 0.0,
            sigma_att: 1.0,
            sigma_def: 1.0,
            att: vec![vec![0.0; s.n_teams]; s.n_seasons],
            def: vec![vec![0.0; s.n_teams]; s.n_seasons],
            p_home: vec![0.5; s.n_matches],
            p_away: vec![0.5; s.n_matches],
            lambda_home: vec![1.0; s.n_matches],
            lambda_away: vec![1.0; s.n_matches],
            alpha: [1.0, 1.0],
            tau: [1.0, 1.0],
        }
    }

    pub fn structure(&self, away_intercept: bool) -> Structure {
        Structure {
            n_teams: self.att.first().map_or(0, Vec::len),
            n_seasons: self.att.len(),
            n_matches: self.p_home.len(),
            away_intercept,
        }
    }

    /// Largest absolute per-season sum of attack or defence effects.
    pub fn zero_sum_violation(&self) -> f64 {
        self.att
            .iter()
            .chain(&self.def)
            .map(|season| season.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Recenters every season's effects to sum to zero.
    pub fn center_effects(&mut self) {
        for season in self.att.iter_mut().chain(self.def.iter_mut()) {
            if season.is_empty() {
                continue;
            }
            let m = season.iter().sum::<f64>() / season.len() as f64;
            season.iter_mut().for_each(|x| *x -= m);
        }
    }

    pub fn satisfies_constraints(&self, tol: f64) -> bool {
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        self.zero_sum_violation() <= tol
            && self.sigma_att > 0.0
            && self.sigma_def > 0.0
            && positive(&self.lambda_home)
            && positive(&self.lambda_away)
            && positive(&self.alpha)
            && positive(&self.tau)
            && self.p_home.iter().chain(&self.p_away).all(|p| (0.0..=1.0).contains(p))
    }
}

/// Observed data for one match as the model sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchObs {
    pub season: usize,
    pub home: usize,
    pub away: usize,
    pub goals_home: u32,
    pub goals_away: u32,
    pub implicit_home: Vec<f64>,
    pub implicit_away: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub n_teams: usize,
    pub n_seasons: usize,
    pub matches: Vec<MatchObs>,
    by_season: Vec<Vec<usize>>,
}

impl ModelData {
    pub fn new(n_teams: usize, n_seasons: usize, matches: Vec<MatchObs>) -> Self {
        let mut by_season = vec![Vec::new(); n_seasons];
        for (i, m) in matches.iter().enumerate() {
            assert!(m.season < n_seasons, "match season {} out of range", m.season);
            assert!(m.home < n_teams && m.away < n_teams, "team index out of range");
            by_season[m.season].push(i);
        }
        Self { n_teams, n_seasons, matches, by_season }
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let matches = ds
            .matches
            .iter()
            .map(|m| MatchObs {
                season: m.record.season,
                home: m.record.home,
                away: m.record.away,
                goals_home: m.record.goals_home,
                goals_away: m.record.goals_away,
                implicit_home: m.implicit_rates().map(|r| r.home).collect(),
                implicit_away: m.implicit_rates().map(|r| r.away).collect(),
            })
            .collect();
        Self::new(ds.n_teams(), ds.n_seasons(), matches)
    }

    pub fn structure(&self, away_intercept: bool) -> Structure {
        Structure {
            n_teams: self.n_teams,
            n_seasons: self.n_seasons,
            n_matches: self.matches.len(),
            away_intercept,
        }
    }

    pub fn season_matches(&self, season: usize) -> &[usize] {
        &self.by_season[season]
    }
}

/// Scoring intensities from team effects alone.
pub fn score_rates(params: &ModelParameters, season: usize, home: usize, away: usize) -> RatePair {
    let att = &params.att[season];
    let def = &params.def[season];
    RatePair {
        home: (params.intercept + params.mu + att[home] + def[away]).exp(),
        away: (params.intercept + att[away] + def[home]).exp(),
    }
}

/// Convex combination of the team-effect rates and the bookmaker rates of match `m`.
pub fn mixture_rates(params: &ModelParameters, m: usize, obs: &MatchObs) -> RatePair {
    let theta = score_rates(params, obs.season, obs.home, obs.away);
    RatePair {
        home: mix(params.p_home[m], theta.home, params.lambda_home[m]),
        away: mix(params.p_away[m], theta.away, params.lambda_away[m]),
    }
}

pub fn mix(p: f64, theta: f64, lambda: f64) -> f64 {
    p * theta + (1.0 - p) * lambda
}

fn ll_match_scores(params: &ModelParameters, m: usize, obs: &MatchObs) -> f64 {
    let g = mixture_rates(params, m, obs);
    ln_poisson_pmf(obs.goals_home, g.home) + ln_poisson_pmf(obs.goals_away, g.away)
}

pub fn log_likelihood_scores(params: &ModelParameters, data: &ModelData) -> f64 {
    data.matches.iter().enumerate().map(|(m, obs)| ll_match_scores(params, m, obs)).collect::<ExactSum>().value()
}

/// `log ∫ Pois(y; pθ + (1−p)λ) dp` over a uniform weight `p`.
///
/// The integral is `(F(y; lo) − F(y; hi)) / (hi − lo)` with `F` the Poisson
/// CDF; when both CDF values are close to one the difference is taken
/// between upper tails instead.
pub fn ln_marginal_side(goals: u32, theta: f64, lambda: f64) -> f64 {
    let (lo, hi) = if theta < lambda { (theta, lambda) } else { (lambda, theta) };
    if !(lo >= 0.0 && hi.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let width = hi - lo;
    if width <= 1e-8 * hi {
        return ln_poisson_pmf(goals, 0.5 * (lo + hi));
    }
    let diff = if (goals as f64) < lo {
        poisson_cdf(goals, lo) - poisson_cdf(goals, hi)
    } else {
        poisson_upper_tail(goals, hi) - poisson_upper_tail(goals, lo)
    };
    if diff > 0.0 {
        diff.ln() - width.ln()
    } else {
        ln_poisson_pmf(goals, 0.5 * (lo + hi))
    }
}

/// `P(X ≤ y)` for `X ~ Poisson(rate)`.
fn poisson_cdf(y: u32, rate: f64) -> f64 {
    let mut term = (-rate).exp();
    let mut sum = term;
    for j in 1..=y {
        term *= rate / j as f64;
        sum += term;
    }
    sum
}

/// `P(X > y)` for `X ~ Poisson(rate)`, summed directly so small tails keep
/// their relative accuracy.
fn poisson_upper_tail(y: u32, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    let mut term = ln_poisson_pmf(y + 1, rate).exp();
    let mut sum = 0.0;
    let mut j = y + 1;
    loop {
        sum += term;
        j += 1;
        term *= rate / j as f64;
        if (j as f64 > rate && term <= 1e-17 * sum) || j > y + 10_000 {
            break;
        }
    }
    sum
}

pub fn log_likelihood_scores_marginal(params: &ModelParameters, data: &ModelData) -> f64 {
    let mut acc = ExactSum::new();
    for (m, obs) in data.matches.iter().enumerate() {
        let theta = score_rates(params, obs.season, obs.home, obs.away);
        acc.add(ln_marginal_side(obs.goals_home, theta.home, params.lambda_home[m]));
        acc.add(ln_marginal_side(obs.goals_away, theta.away, params.lambda_away[m]));
    }
    acc.value()
}

/// Draw of a mixture weight from its conditional
/// `Beta(p; a, b) · Pois(y; pθ + (1−p)λ)`, by rejection from the prior.
pub fn sample_weight<R: Rng + ?Sized>(rng: &mut R, goals: u32, theta: f64, lambda: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = if theta < lambda { (theta, lambda) } else { (lambda, theta) };
    let peak = ln_poisson_pmf(goals, (goals as f64).clamp(lo, hi));
    let prior = rand_distr::Beta::new(a, b).expect("positive Beta parameters");
    let mut p = 0.5;
    for _ in 0..100_000 {
        p = prior.sample(rng);
        let log_u = rng.random::<f64>().ln();
        if log_u <= ln_poisson_pmf(goals, mix(p, theta, lambda)) - peak {
            return p;
        }
    }
    p
}

/// `Σ_s log truncN(x_s; λ, τ², 0, ∞)`.
fn ll_bookmaker_side(implicit: &[f64], lambda: f64, tau: f64) -> f64 {
    if implicit.is_empty() {
        return 0.0;
    }
    let n = implicit.len() as f64;
    let ss: f64 = implicit.iter().map(|x| (x - lambda) * (x - lambda)).sum();
    -0.5 * ss / (tau * tau) - n * (tau.ln() + LN_SQRT_2PI + ln_std_normal_cdf(lambda / tau))
}

fn ll_match_bookmakers(params: &ModelParameters, m: usize, obs: &MatchObs) -> f64 {
    ll_bookmaker_side(&obs.implicit_home, params.lambda_home[m], params.tau[0])
        + ll_bookmaker_side(&obs.implicit_away, params.lambda_away[m], params.tau[1])
}

pub fn log_likelihood_bookmakers(params: &ModelParameters, data: &ModelData) -> f64 {
    data.matches.iter().enumerate().map(|(m, obs)| ll_match_bookmakers(params, m, obs)).collect::<ExactSum>().value()
}

/// Log density of one season's effects: independent Normals around the
/// random-walk centres, conditioned on the effects summing to zero. The
/// density is with respect to the `T − 1` free coordinates.
fn lp_effects_season(effects: &[Vec<f64>], drift: f64, sigma: f64, season: usize) -> f64 {
    // Σ_t log N(x_t; c_t, σ²) − log N(0; Σ_t c_t, Tσ²), written through the
    // centred residuals so the drift cancels exactly.
    let values = &effects[season];
    let n = values.len() as f64;
    let resid: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(team, &x)| x - if season == 0 { drift } else { drift + effects[season - 1][team] })
        .collect();
    let centre = resid.iter().sum::<f64>() / n;
    let ss: f64 = resid.iter().map(|r| (r - centre) * (r - centre)).sum();
    -0.5 * ss / (sigma * sigma) - (n - 1.0) * (sigma.ln() + LN_SQRT_2PI) + 0.5 * n.ln()
}

/// Free coordinates of the season-`s` innovation `(x_s − x_{s−1}) / σ`.
fn innovations(effects: &[Vec<f64>], sigma: f64, s: usize, out: &mut Vec<f64>) {
    let n = effects[s].len();
    for t in 0..n - 1 {
        let prev = if s == 0 { 0.0 } else { effects[s - 1][t] };
        out.push((effects[s][t] - prev) / sigma);
    }
}

/// Inverse of [`innovations`]; later seasons move with season `s`, so their
/// own innovations are unchanged.
fn set_innovations(effects: &mut [Vec<f64>], sigma: f64, s: usize, u: &[f64]) {
    let n = effects[s].len();
    let mut shift = vec![0.0; n];
    for t in 0..n {
        let prev = if s == 0 { 0.0 } else { effects[s - 1][t] };
        let new = if t + 1 < n { prev + sigma * u[t] } else { 0.0 };
        shift[t] = new - effects[s][t];
    }
    shift[n - 1] = -shift[..n - 1].iter().sum::<f64>();
    for season in &mut effects[s..] {
        for (x, d) in season.iter_mut().zip(&shift) {
            *x += d;
        }
        season[n - 1] = -season[..n - 1].iter().sum::<f64>();
    }
}

/// Random-walk prior of one effect family (attack or defence).
fn lp_effects(effects: &[Vec<f64>], drift: f64, sigma: f64) -> f64 {
    (0..effects.len()).map(|s| lp_effects_season(effects, drift, sigma, s)).collect::<ExactSum>().value()
}

/// Prior terms of one effect family that involve season `season`.
fn lp_effects_touching(effects: &[Vec<f64>], drift: f64, sigma: f64, season: usize) -> f64 {
    [season, season + 1]
        .into_iter()
        .filter(|&s| s < effects.len())
        .map(|s| lp_effects_season(effects, drift, sigma, s))
        .sum()
}

fn lp_globals(params: &ModelParameters, priors: &PriorConfig, away_intercept: bool) -> f64 {
    let sd = priors.normal_sd();
    let mut lp = ln_normal_pdf(params.mu, 0.0, sd)
        + ln_normal_pdf(params.mu_att, 0.0, sd)
        + ln_normal_pdf(params.mu_def, 0.0, sd);
    if away_intercept {
        lp += ln_normal_pdf(params.intercept, 0.0, sd);
    }
    lp
}

fn lp_scales(params: &ModelParameters, priors: &PriorConfig) -> f64 {
    ln_half_cauchy_pdf(params.sigma_att, priors.half_cauchy_scale)
        + ln_half_cauchy_pdf(params.sigma_def, priors.half_cauchy_scale)
}

fn lp_match_side(p: f64, lambda: f64, alpha: f64, priors: &PriorConfig) -> f64 {
    ln_beta_pdf(p, priors.beta_a, priors.beta_b) + ln_trunc_normal_pos_pdf(lambda, alpha, priors.lambda_sd())
}

fn lp_bookmaker_hyper(params: &ModelParameters, priors: &PriorConfig) -> f64 {
    let mut lp = 0.0;
    for i in 0..2 {
        lp += ln_trunc_normal_pos_pdf(params.alpha[i], priors.alpha_mean, priors.alpha_sd())
            + ln_half_cauchy_pdf(params.tau[i], priors.tau_half_cauchy_scale);
    }
    lp
}

/// Sum of all prior terms. The intercept prior only enters when `away_intercept` is set.
pub fn log_prior(params: &ModelParameters, priors: &PriorConfig, away_intercept: bool) -> f64 {
    let mut acc = ExactSum::new();
    acc.add(lp_globals(params, priors, away_intercept));
    acc.add(lp_scales(params, priors));
    acc.add(lp_effects(&params.att, params.mu_att, params.sigma_att));
    acc.add(lp_effects(&params.def, params.mu_def, params.sigma_def));
    for m in 0..params.p_home.len() {
        acc.add(lp_match_side(params.p_home[m], params.lambda_home[m], params.alpha[0], priors));
        acc.add(lp_match_side(params.p_away[m], params.lambda_away[m], params.alpha[1], priors));
    }
    acc.add(lp_bookmaker_hyper(params, priors));
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPosterior {
    pub prior: f64,
    pub scores: f64,
    pub bookmakers: f64,
    pub total: f64,
}

pub fn log_posterior_parts(params: &ModelParameters, data: &ModelData, model: &Model) -> LogPosterior {
    let prior = log_prior(params, &model.priors, model.away_intercept);
    let scores = log_likelihood_scores(params, data);
    let bookmakers = log_likelihood_bookmakers(params, data);
    let total = [prior, scores, bookmakers].into_iter().collect::<ExactSum>().value();
    LogPosterior { prior, scores, bookmakers, total }
}

pub fn log_posterior(params: &ModelParameters, data: &ModelData, model: &Model) -> Result<f64, ModelError> {
    let lp = log_posterior_parts(params, data, model).total;
    if lp.is_finite() {
        Ok(lp)
    } else {
        Err(ModelError::NonFinite(lp))
    }
}

/// Analytic `∂ log posterior / ∂ μ`.
pub fn grad_mu(params: &ModelParameters, data: &ModelData, model: &Model) -> f64 {
    let mut g = -params.mu / model.priors.normal_sd().powi(2);
    for (m, obs) in data.matches.iter().enumerate() {
        let theta = score_rates(params, obs.season, obs.home, obs.away);
        let gamma = mix(params.p_home[m], theta.home, params.lambda_home[m]);
        g += (obs.goals_home as f64 / gamma - 1.0) * params.p_home[m] * theta.home;
    }
    g
}

/// Analytic derivative with respect to the free attack coordinate of `team`
/// in `season`; the last team's effect moves in the opposite direction.
pub fn grad_att_free(params: &ModelParameters, data: &ModelData, team: usize, season: usize) -> f64 {
    let last = data.n_teams - 1;
    assert!(team < last, "the last team's effect is implied");
    let direction = |j: usize| (j == team) as i32 as f64 - (j == last) as i32 as f64;
    let mut g = 0.0;
    for &m in data.season_matches(season) {
        let obs = &data.matches[m];
        let theta = score_rates(params, obs.season, obs.home, obs.away);
        let gh = mix(params.p_home[m], theta.home, params.lambda_home[m]);
        let ga = mix(params.p_away[m], theta.away, params.lambda_away[m]);
        g += (obs.goals_home as f64 / gh - 1.0) * params.p_home[m] * theta.home * direction(obs.home);
        g += (obs.goals_away as f64 / ga - 1.0) * params.p_away[m] * theta.away * direction(obs.away);
    }
    let var = params.sigma_att * params.sigma_att;
    let att = &params.att;
    for j in [team, last] {
        let centre = if season == 0 { params.mu_att } else { params.mu_att + att[season - 1][j] };
        g -= (att[season][j] - centre) / var * direction(j);
        if season + 1 < att.len() {
            let resid = att[season + 1][j] - params.mu_att - att[season][j];
            g += resid / var * direction(j);
        }
    }
    g
}

/// Sampling blocks over the unconstrained parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    /// `μ` and the optional intercept. The drifts `μ_att`, `μ_def` are
    /// redrawn exactly by [`Model::draw_drifts`].
    Globals,
    /// `log σ_att`, `log σ_def`.
    Scales,
    Attack(usize),
    Defence(usize),
    /// `logit p`, `log λ` of the home side of a match.
    HomeSide(usize),
    AwaySide(usize),
    /// `log α1`, `log α2`, `log τ1`, `log τ2`.
    Bookmaker,
    /// `log σ_att`, moved jointly with every attack effect rescaled by the
    /// same factor.
    AttackSpread,
    DefenceSpread,
}

impl Block {
    pub fn label(&self) -> String {
        match self {
            Block::Globals => "globals".into(),
            Block::Scales => "scales".into(),
            Block::Attack(s) => format!("att[season {}]", s + 1),
            Block::Defence(s) => format!("def[season {}]", s + 1),
            Block::HomeSide(m) => format!("home[match {}]", m + 1),
            Block::AwaySide(m) => format!("away[match {}]", m + 1),
            Block::Bookmaker => "bookmaker".into(),
            Block::AttackSpread => "att spread".into(),
            Block::DefenceSpread => "def spread".into(),
        }
    }

    /// Coarse grouping used when reporting acceptance rates.
    pub fn family(&self) -> &'static str {
        match self {
            Block::Globals => "globals",
            Block::Scales => "scales",
            Block::Attack(_) => "attack",
            Block::Defence(_) => "defence",
            Block::HomeSide(_) | Block::AwaySide(_) => "match sides",
            Block::Bookmaker => "bookmaker",
            Block::AttackSpread | Block::DefenceSpread => "spread",
        }
    }
}

/// Priors plus the model switches; the data are passed separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub priors: PriorConfig,
    pub away_intercept: bool,
    /// Integrate the mixture weights out of the block densities when the
    /// weight prior is uniform. The weights are then redrawn exactly from
    /// their conditionals (see [`sample_weight`]) instead of by Metropolis moves.
    pub collapse_weights: bool,
}

impl Model {
    pub fn new(priors: PriorConfig) -> Self {
        Self { priors, away_intercept: false, collapse_weights: true }
    }

    pub fn collapsed(&self) -> bool {
        self.collapse_weights && self.priors.beta_a == 1.0 && self.priors.beta_b == 1.0
    }

    fn ll_side(&self, goals: u32, p: f64, theta: f64, lambda: f64) -> f64 {
        if self.collapsed() {
            ln_marginal_side(goals, theta, lambda)
        } else {
            ln_poisson_pmf(goals, mix(p, theta, lambda))
        }
    }

    fn ll_scores_match(&self, params: &ModelParameters, m: usize, obs: &MatchObs) -> f64 {
        let theta = score_rates(params, obs.season, obs.home, obs.away);
        self.ll_side(obs.goals_home, params.p_home[m], theta.home, params.lambda_home[m])
            + self.ll_side(obs.goals_away, params.p_away[m], theta.away, params.lambda_away[m])
    }

    fn ll_scores(&self, params: &ModelParameters, data: &ModelData) -> f64 {
        data.matches.iter().enumerate().map(|(m, o)| self.ll_scores_match(params, m, o)).sum()
    }

    /// Redraws `μ_att` and `μ_def` from their full conditionals. A common
    /// shift of all centres cancels under the zero-sum conditioning, so the
    /// conditionals are the priors.
    pub fn draw_drifts<R: Rng + ?Sized>(&self, params: &mut ModelParameters, rng: &mut R) {
        let sd = self.priors.normal_sd();
        let z: [f64; 2] = [rand_distr::StandardNormal.sample(rng), rand_distr::StandardNormal.sample(rng)];
        params.mu_att = sd * z[0];
        params.mu_def = sd * z[1];
    }

    /// Redraws every mixture weight from its full conditional.
    pub fn draw_weights<R: Rng + ?Sized>(&self, params: &mut ModelParameters, data: &ModelData, rng: &mut R) {
        let (a, b) = (self.priors.beta_a, self.priors.beta_b);
        for (m, obs) in data.matches.iter().enumerate() {
            let theta = score_rates(params, obs.season, obs.home, obs.away);
            params.p_home[m] = sample_weight(rng, obs.goals_home, theta.home, params.lambda_home[m], a, b);
            params.p_away[m] = sample_weight(rng, obs.goals_away, theta.away, params.lambda_away[m], a, b);
        }
    }

    pub fn blocks(&self, data: &ModelData) -> Vec<Block> {
        let mut blocks = vec![Block::Globals, Block::Scales];
        if data.n_teams > 1 {
            for s in 0..data.n_seasons {
                blocks.push(Block::Attack(s));
                blocks.push(Block::Defence(s));
            }
            if data.n_seasons > 0 {
                blocks.push(Block::AttackSpread);
                blocks.push(Block::DefenceSpread);
            }
        }
        for m in 0..data.matches.len() {
            blocks.push(Block::HomeSide(m));
            blocks.push(Block::AwaySide(m));
        }
        blocks.push(Block::Bookmaker);
        blocks
    }

    pub fn block_dim(&self, data: &ModelData, block: Block) -> usize {
        match block {
            Block::Globals => 1 + self.away_intercept as usize,
            Block::Scales => 2,
            Block::Attack(_) | Block::Defence(_) => data.n_teams.saturating_sub(1),
            Block::HomeSide(_) | Block::AwaySide(_) => 2 - self.collapsed() as usize,
            Block::Bookmaker => 4,
            Block::AttackSpread | Block::DefenceSpread => 1,
        }
    }

    /// Unconstrained coordinates of one block.
    pub fn block_get(&self, params: &ModelParameters, block: Block, out: &mut Vec<f64>) {
        out.clear();
        match block {
            Block::Globals => {
                out.push(params.mu);
                if self.away_intercept {
                    out.push(params.intercept);
                }
            }
            Block::Scales => out.extend([params.sigma_att.ln(), params.sigma_def.ln()]),
            Block::Attack(s) => innovations(&params.att, params.sigma_att, s, out),
            Block::Defence(s) => innovations(&params.def, params.sigma_def, s, out),
            Block::HomeSide(m) if self.collapsed() => out.push(params.lambda_home[m].ln()),
            Block::AwaySide(m) if self.collapsed() => out.push(params.lambda_away[m].ln()),
            Block::HomeSide(m) => out.extend([logit(params.p_home[m]), params.lambda_home[m].ln()]),
            Block::AwaySide(m) => out.extend([logit(params.p_away[m]), params.lambda_away[m].ln()]),
            Block::Bookmaker => out.extend([
                params.alpha[0].ln(),
                params.alpha[1].ln(),
                params.tau[0].ln(),
                params.tau[1].ln(),
            ]),
            Block::AttackSpread => out.push(params.sigma_att.ln()),
            Block::DefenceSpread => out.push(params.sigma_def.ln()),
        }
    }

    pub fn block_set(&self, params: &mut ModelParameters, block: Block, u: &[f64]) {
        fn rescale(effects: &mut [Vec<f64>], sigma: &mut f64, log_sigma: f64) {
            let new = log_sigma.exp();
            let factor = new / *sigma;
            for season in effects.iter_mut() {
                let n = season.len();
                season[..n - 1].iter_mut().for_each(|x| *x *= factor);
                season[n - 1] = -season[..n - 1].iter().sum::<f64>();
            }
            *sigma = new;
        }
        match block {
            Block::Globals => {
                params.mu = u[0];
                if self.away_intercept {
                    params.intercept = u[1];
                }
            }
            Block::Scales => {
                params.sigma_att = u[0].exp();
                params.sigma_def = u[1].exp();
            }
            Block::Attack(s) => set_innovations(&mut params.att, params.sigma_att, s, u),
            Block::Defence(s) => set_innovations(&mut params.def, params.sigma_def, s, u),
            Block::HomeSide(m) if self.collapsed() => params.lambda_home[m] = u[0].exp(),
            Block::AwaySide(m) if self.collapsed() => params.lambda_away[m] = u[0].exp(),
            Block::HomeSide(m) => {
                params.p_home[m] = logistic(u[0]);
                params.lambda_home[m] = u[1].exp();
            }
            Block::AwaySide(m) => {
                params.p_away[m] = logistic(u[0]);
                params.lambda_away[m] = u[1].exp();
            }
            Block::Bookmaker => {
                params.alpha = [u[0].exp(), u[1].exp()];
                params.tau = [u[2].exp(), u[3].exp()];
            }
            Block::AttackSpread => rescale(&mut params.att, &mut params.sigma_att, u[0]),
            Block::DefenceSpread => rescale(&mut params.def, &mut params.sigma_def, u[0]),
        }
    }

    /// Log volume change of the effect rescaling carried by a spread move,
    /// up to a constant. Zero for ordinary coordinate blocks.
    pub fn move_log_jacobian(&self, params: &ModelParameters, block: Block) -> f64 {
        let free = |effects: &[Vec<f64>]| effects.iter().map(|s| s.len().saturating_sub(1)).sum::<usize>() as f64;
        match block {
            Block::AttackSpread => free(&params.att) * params.sigma_att.ln(),
            Block::DefenceSpread => free(&params.def) * params.sigma_def.ln(),
            _ => 0.0,
        }
    }

    /// Log Jacobian of the map from unconstrained to natural coordinates of `block`.
    fn block_log_jacobian(&self, params: &ModelParameters, block: Block) -> f64 {
        let logit_jac = |p: f64| p.ln() + (1.0 - p).ln();
        match block {
            Block::Globals | Block::Attack(_) | Block::Defence(_) => 0.0,
            Block::Scales => params.sigma_att.ln() + params.sigma_def.ln(),
            Block::AttackSpread => params.sigma_att.ln(),
            Block::DefenceSpread => params.sigma_def.ln(),
            Block::HomeSide(m) if self.collapsed() => params.lambda_home[m].ln(),
            Block::AwaySide(m) if self.collapsed() => params.lambda_away[m].ln(),
            Block::HomeSide(m) => logit_jac(params.p_home[m]) + params.lambda_home[m].ln(),
            Block::AwaySide(m) => logit_jac(params.p_away[m]) + params.lambda_away[m].ln(),
            Block::Bookmaker => {
                params.alpha[0].ln() + params.alpha[1].ln() + params.tau[0].ln() + params.tau[1].ln()
            }
        }
    }

    /// Log density on the unconstrained scale, up to terms that do not involve `block`.
    /// For spread moves this also carries [`Model::move_log_jacobian`].
    pub fn block_log_density(&self, params: &ModelParameters, data: &ModelData, block: Block) -> f64 {
        let priors = &self.priors;
        let jac = self.block_log_jacobian(params, block) + self.move_log_jacobian(params, block);
        let body = match block {
            Block::Globals => self.ll_scores(params, data) + lp_globals(params, priors, self.away_intercept),
            Block::Scales => {
                lp_scales(params, priors)
                    + lp_effects(&params.att, params.mu_att, params.sigma_att)
                    + lp_effects(&params.def, params.mu_def, params.sigma_def)
            }
            Block::Attack(s) | Block::Defence(s) => {
                let ll: f64 = (s..data.n_seasons)
                    .flat_map(|r| data.season_matches(r))
                    .map(|&m| self.ll_scores_match(params, m, &data.matches[m]))
                    .sum();
                let prior = if let Block::Attack(_) = block {
                    lp_effects_touching(&params.att, params.mu_att, params.sigma_att, s)
                } else {
                    lp_effects_touching(&params.def, params.mu_def, params.sigma_def, s)
                };
                ll + prior
            }
            Block::HomeSide(m) => {
                let obs = &data.matches[m];
                let theta = score_rates(params, obs.season, obs.home, obs.away);
                self.ll_side(obs.goals_home, params.p_home[m], theta.home, params.lambda_home[m])
                    + ll_bookmaker_side(&obs.implicit_home, params.lambda_home[m], params.tau[0])
                    + lp_match_side(params.p_home[m], params.lambda_home[m], params.alpha[0], priors)
            }
            Block::AwaySide(m) => {
                let obs = &data.matches[m];
                let theta = score_rates(params, obs.season, obs.home, obs.away);
                self.ll_side(obs.goals_away, params.p_away[m], theta.away, params.lambda_away[m])
                    + ll_bookmaker_side(&obs.implicit_away, params.lambda_away[m], params.tau[1])
                    + lp_match_side(params.p_away[m], params.lambda_away[m], params.alpha[1], priors)
            }
            Block::Bookmaker => {
                let mut lp = lp_bookmaker_hyper(params, priors);
                for (m, obs) in data.matches.iter().enumerate() {
                    lp += ll_match_bookmakers(params, m, obs);
                    lp += ln_trunc_normal_pos_pdf(params.lambda_home[m], params.alpha[0], priors.lambda_sd());
                    lp += ln_trunc_normal_pos_pdf(params.lambda_away[m], params.alpha[1], priors.lambda_sd());
                }
                lp
            }
            Block::AttackSpread | Block::DefenceSpread => {
                let (effects, drift, sigma) = if block == Block::AttackSpread {
                    (&params.att, params.mu_att, params.sigma_att)
                } else {
                    (&params.def, params.mu_def, params.sigma_def)
                };
                self.ll_scores(params, data)
                    + lp_effects(effects, drift, sigma)
                    + ln_half_cauchy_pdf(sigma, priors.half_cauchy_scale)
            }
        };
        body + jac
    }

    /// Full log density on the unconstrained scale (posterior plus all
    /// Jacobians). With collapsed weights this is the weight-marginal density.
    pub fn unconstrained_log_density(&self, params: &ModelParameters, data: &ModelData) -> f64 {
        let lp = if self.collapsed() {
            let prior = log_prior(params, &self.priors, self.away_intercept);
            let scores = log_likelihood_scores_marginal(params, data);
            [prior, scores, log_likelihood_bookmakers(params, data)].into_iter().collect::<ExactSum>().value()
        } else {
            log_posterior_parts(params, data, self).total
        };
        let jac: f64 = self
            .blocks(data)
            .iter()
            .filter(|b| !matches!(b, Block::AttackSpread | Block::DefenceSpread))
            .map(|&b| self.block_log_jacobian(params, b))
            .sum();
        lp + jac
    }
}

/// Flat, named view of [`ModelParameters`] used for draw storage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub structure: Structure,
}

impl ParamLayout {
    pub fn new(structure: Structure) -> Self {
        Self { structure }
    }

    pub fn len(&self) -> usize {
        let s = &self.structure;
        9 + s.away_intercept as usize + 2 * s.n_teams * s.n_seasons + 4 * s.n_matches
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Column names in storage order; team and season indices are 1-based.
    pub fn names(&self) -> Vec<String> {
        let s = &self.structure;
        let mut names: Vec<String> = vec!["mu".into()];
        if s.away_intercept {
            names.push("intercept".into());
        }
        names.extend(
            ["mu_att", "mu_def", "sigma_att", "sigma_def", "alpha1", "alpha2", "tau1", "tau2"].map(String::from),
        );
        for family in ["att", "def"] {
            for season in 0..s.n_seasons {
                for team in 0..s.n_teams {
                    names.push(format!("{family}[{},{}]", team + 1, season + 1));
                }
            }
        }
        for family in ["p_home", "p_away", "lambda_home", "lambda_away"] {
            for m in 0..s.n_matches {
                names.push(format!("{family}[{}]", m + 1));
            }
        }
        names
    }

    pub fn flatten(&self, p: &ModelParameters, out: &mut Vec<f64>) {
        out.clear();
        out.push(p.mu);
        if self.structure.away_intercept {
            out.push(p.intercept);
        }
        out.extend([p.mu_att, p.mu_def, p.sigma_att, p.sigma_def, p.alpha[0], p.alpha[1], p.tau[0], p.tau[1]]);
        for family in [&p.att, &p.def] {
            for season in family {
                out.extend_from_slice(season);
            }
        }
        for v in [&p.p_home, &p.p_away, &p.lambda_home, &p.lambda_away] {
            out.extend_from_slice(v);
        }
    }

    pub fn unflatten(&self, row: &[f64]) -> Result<ModelParameters, ModelError> {
        if row.len() != self.len() {
            return Err(ModelError::Shape { expected: self.len(), found: row.len() });
        }
        let s = &self.structure;
        let mut it = row.iter().copied();
        let mut next = || it.next().expect("length checked");
        let mu = next();
        let intercept = if s.away_intercept { next() } else { 0.0 };
        let (mu_att, mu_def, sigma_att, sigma_def) = (next(), next(), next(), next());
        let alpha = [next(), next()];
        let tau = [next(), next()];
        let mut effects = |n_seasons: usize, n_teams: usize| -> Vec<Vec<f64>> {
            (0..n_seasons).map(|_| (0..n_teams).map(|_| next()).collect()).collect()
        };
        let att = effects(s.n_seasons, s.n_teams);
        let def = effects(s.n_seasons, s.n_teams);
        let mut vec_of = |n: usize| -> Vec<f64> { (0..n).map(|_| next()).collect() };
        let p_home = vec_of(s.n_matches);
        let p_away = vec_of(s.n_matches);
        let lambda_home = vec_of(s.n_matches);
        let lambda_away = vec_of(s.n_matches);
        Ok(ModelParameters {
            mu,
            intercept,
            mu_att,
            mu_def,
            sigma_att,
            sigma_def,
            att,
            def,
            p_home,
            p_away,
            lambda_home,
            lambda_away,
            alpha,
            tau,
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn structure(n_matches: usize) -> Structure {
        Structure { n_teams: 4, n_seasons: 2, n_matches, away_intercept: false }
    }

    fn obs(season: usize, home: usize, away: usize, gh: u32, ga: u32, s: usize) -> MatchObs {
        MatchObs {
            season,
            home,
            away,
            goals_home: gh,
            goals_away: ga,
            implicit_home: (0..s).map(|i| 1.3 + 0.05 * i as f64).collect(),
            implicit_away: (0..s).map(|i| 0.9 + 0.04 * i as f64).collect(),
        }
    }

    fn random_setup(seed: u64, n_matches: usize) -> (ModelData, ModelParameters) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matches: Vec<MatchObs> = (0..n_matches)
            .map(|_| {
                let home = rng.random_range(0..4);
                let away = (home + rng.random_range(1..4)) % 4;
                obs(rng.random_range(0..2), home, away, rng.random_range(0..5), rng.random_range(0..4), rng.random_range(0..4))
            })
            .collect();
        let data = ModelData::new(4, 2, matches);
        let mut p = ModelParameters::neutral(&structure(n_matches));
        p.mu = rng.random_range(-0.3..0.5);
        p.mu_att = rng.random_range(-0.2..0.2);
        p.mu_def = rng.random_range(-0.2..0.2);
        p.sigma_att = rng.random_range(0.1..1.0);
        p.sigma_def = rng.random_range(0.1..1.0);
        for season in p.att.iter_mut().chain(p.def.iter_mut()) {
            season.iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
        }
        p.center_effects();
        for m in 0..n_matches {
            p.p_home[m] = rng.random_range(0.01..0.99);
            p.p_away[m] = rng.random_range(0.01..0.99);
            p.lambda_home[m] = rng.random_range(0.3..3.0);
            p.lambda_away[m] = rng.random_range(0.3..3.0);
        }
        p.alpha = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        p.tau = [rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)];
        (data, p)
    }

    #[test]
    fn score_rate_examples() {
        let mut p = ModelParameters::neutral(&structure(0));
        let r = score_rates(&p, 0, 0, 1);
        assert_eq!((r.home, r.away), (1.0, 1.0));

        p.mu = 0.2;
        p.att[0][0] = 0.1;
        p.def[0][1] = -0.1;
        let r = score_rates(&p, 0, 0, 1);
        assert_abs_diff_eq!(r.home, 0.2f64.exp(), epsilon = 1e-15);
        assert_eq!(r.away, 1.0);

        let mut p = ModelParameters::neutral(&structure(0));
        p.att[1] = vec![0.3, -0.1, -0.1, -0.1];
        p.def[1] = vec![-0.2, 0.4, -0.1, -0.1];
        let a = score_rates(&p, 1, 0, 1);
        let b = score_rates(&p, 1, 1, 0);
        assert_eq!(a, b.swapped());
    }

    #[test]
    fn mixture_examples() {
        let data = ModelData::new(4, 2, vec![obs(0, 0, 1, 1, 1, 0)]);
        let mut p = ModelParameters::neutral(&structure(1));
        p.mu = 0.4;
        p.lambda_home[0] = 2.5;
        p.lambda_away[0] = 0.7;
        p.p_home[0] = 1.0;
        p.p_away[0] = 1.0;
        assert_eq!(mixture_rates(&p, 0, &data.matches[0]), score_rates(&p, 0, 0, 1));
        p.p_home[0] = 0.0;
        p.p_away[0] = 0.0;
        assert_eq!(mixture_rates(&p, 0, &data.matches[0]), RatePair { home: 2.5, away: 0.7 });
        assert_eq!(mix(0.5, 2.0, 1.0), 1.5);
    }

    #[test]
    fn score_likelihood_examples() {
        let empty = ModelData::new(4, 2, vec![]);
        assert_eq!(log_likelihood_scores(&ModelParameters::neutral(&structure(0)), &empty), 0.0);

        let data = ModelData::new(4, 2, vec![obs(0, 0, 1, 0, 0, 0)]);
        let p = ModelParameters::neutral(&structure(1));
        // γ = 0.5·1 + 0.5·1 = 1 on both sides.
        assert_abs_diff_eq!(log_likelihood_scores(&p, &data), -2.0, epsilon = 1e-15);
    }

    fn oracle_ln_pois(k: u32, rate: f64) -> f64 {
        let mut ln_fact = 0.0;
        for i in 2..=k {
            ln_fact += (i as f64).ln();
        }
        k as f64 * rate.ln() - rate - ln_fact
    }

    #[test]
    fn score_likelihood_matches_elementwise_oracle() {
        let (data, p) = random_setup(11, 20);
        let mut expected = 0.0;
        for (m, o) in data.matches.iter().enumerate() {
            let th = (p.mu + p.att[o.season][o.home] + p.def[o.season][o.away]).exp();
            let ta = (p.att[o.season][o.away] + p.def[o.season][o.home]).exp();
            let gh = p.p_home[m] * th + (1.0 - p.p_home[m]) * p.lambda_home[m];
            let ga = p.p_away[m] * ta + (1.0 - p.p_away[m]) * p.lambda_away[m];
            expected += oracle_ln_pois(o.goals_home, gh) + oracle_ln_pois(o.goals_away, ga);
        }
        assert_abs_diff_eq!(log_likelihood_scores(&p, &data), expected, epsilon = 1e-10);
    }

    #[test]
    fn bookmaker_likelihood_examples() {
        let data = ModelData::new(4, 2, vec![obs(0, 0, 1, 0, 0, 0)]);
        let p = ModelParameters::neutral(&structure(1));
        assert_eq!(log_likelihood_bookmakers(&p, &data), 0.0);

        // Mode of the density with negligible truncation.
        let tau = 0.01;
        let ll = ll_bookmaker_side(&[3.0], 3.0, tau);
        assert_abs_diff_eq!(ll, -(tau * (2.0 * std::f64::consts::PI).sqrt()).ln(), epsilon = 1e-12);
    }

    /// Truncated-Normal density with the normalizing constant from Simpson quadrature.
    fn quadrature_trunc_normal(x: f64, mean: f64, sd: f64) -> f64 {
        let pdf = |t: f64| (-(t - mean) * (t - mean) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let upper = mean.max(0.0) + 40.0 * sd;
        let n = 200_000;
        let h = upper / n as f64;
        let mut s = pdf(0.0) + pdf(upper);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let z = s * h / 3.0;
        (pdf(x) / z).ln()
    }

    #[test]
    fn bookmaker_likelihood_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let lambda = rng.random_range(0.05..3.0);
            let tau = rng.random_range(0.2..2.5);
            let x = rng.random_range(0.0..4.0);
            assert_abs_diff_eq!(ll_bookmaker_side(&[x], lambda, tau), quadrature_trunc_normal(x, lambda, tau), epsilon = 1e-8);
        }
    }

    #[test]
    fn constrained_effect_prior_is_normalized() {
        // Three teams: integrate over the two free coordinates on a grid.
        let prev = vec![0.3, -0.1, -0.2];
        let (drift, sigma) = (0.4, 0.5);
        let (h, n) = (0.01, 600);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -3.0 + (i as f64 + 0.5) * h;
                let y = -3.0 + (j as f64 + 0.5) * h;
                let effects = vec![prev.clone(), vec![x, y, -x - y]];
                total += lp_effects_season(&effects, drift, sigma, 1).exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        // A common shift of the centres cancels.
        let effects = vec![prev.clone(), vec![0.2, 0.1, -0.3]];
        assert_abs_diff_eq!(
            lp_effects_season(&effects, 0.0, sigma, 1),
            lp_effects_season(&effects, 3.0, sigma, 1),
            epsilon = 1e-9
        );
    }

    #[test]
    fn prior_examples() {
        let priors = PriorConfig::default();
        let mut p = ModelParameters::neutral(&structure(0));
        p.sigma_att = 0.7;
        p.sigma_def = 0.4;
        // Four teams, two seasons: eight Normal terms less one sum density per season.
        let effects = lp_effects(&p.att, 0.0, 0.7) + lp_effects(&p.def, 0.0, 0.4);
        let closed = 8.0 * ln_normal_pdf(0.0, 0.0, 0.7) - 2.0 * ln_normal_pdf(0.0, 0.0, 1.4)
            + 8.0 * ln_normal_pdf(0.0, 0.0, 0.4)
            - 2.0 * ln_normal_pdf(0.0, 0.0, 0.8);
        assert_abs_diff_eq!(effects, closed, epsilon = 1e-12);

        assert_abs_diff_eq!(
            ln_half_cauchy_pdf(2.5, priors.half_cauchy_scale),
            (2.0 / (std::f64::consts::PI * 2.5 * 2.0)).ln(),
            epsilon = 1e-14
        );
        for x in [0.01, 0.5, 0.99] {
            assert!(ln_beta_pdf(x, priors.beta_a, priors.beta_b).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_is_sum_of_parts() {
        let (data, p) = random_setup(3, 15);
        let model = Model::new(PriorConfig::default());
        let parts = log_posterior_parts(&p, &data, &model);
        let lp = log_posterior(&p, &data, &model).unwrap();
        assert_abs_diff_eq!(lp, parts.prior + parts.scores + parts.bookmakers, epsilon = 1e-12);
    }

    #[test]
    fn boundary_weights_are_finite() {
        let (data, mut p) = random_setup(4, 6);
        p.p_home[0] = 0.0;
        p.p_away[0] = 1.0;
        assert!(log_posterior(&p, &data, &Model::new(PriorConfig::default())).is_ok());
    }

    #[test]
    fn non_finite_is_reported() {
        let (data, mut p) = random_setup(4, 6);
        p.sigma_att = -1.0;
        assert!(matches!(
            log_posterior(&p, &data, &Model::new(PriorConfig::default())),
            Err(ModelError::NonFinite(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = Model::new(PriorConfig::default());
        for seed in 0..5 {
            let (data, p) = random_setup(seed, 25);
            let lp = |q: &ModelParameters| log_posterior(q, &data, &model).unwrap();
            let h = 1e-5;
            let mut up = p.clone();
            up.mu += h;
            let mut down = p.clone();
            down.mu -= h;
            let fd = (lp(&up) - lp(&down)) / (2.0 * h);
            let an = grad_mu(&p, &data, &model);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "mu: fd {fd} vs analytic {an}");

            for season in 0..2 {
                let mut up = p.clone();
                up.att[season][1] += h;
                up.att[season][3] -= h;
                let mut down = p.clone();
                down.att[season][1] -= h;
                down.att[season][3] += h;
                let fd = (lp(&up) - lp(&down)) / (2.0 * h);
                let an = grad_att_free(&p, &data, 1, season);
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "att: fd {fd} vs analytic {an}");
            }
        }
    }

    #[test]
    fn shuffling_matches_is_bit_exact() {
        let (data, p) = random_setup(9, 40);
        let model = Model::new(PriorConfig::default());
        let before = log_posterior(&p, &data, &model).unwrap();
        let mut order: Vec<usize> = (0..40).collect();
        order.reverse();
        order.swap(3, 17);
        let shuffled = ModelData::new(4, 2, order.iter().map(|&i| data.matches[i].clone()).collect());
        let mut q = p.clone();
        for (v, src) in [
            (&mut q.p_home, &p.p_home),
            (&mut q.p_away, &p.p_away),
            (&mut q.lambda_home, &p.lambda_home),
            (&mut q.lambda_away, &p.lambda_away),
        ] {
            *v = order.iter().map(|&i| src[i]).collect();
        }
        let after = log_posterior(&q, &shuffled, &model).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn opposite_shifts_keep_within_season_ratios() {
        let (data, p) = random_setup(2, 12);
        let mut q = p.clone();
        let c = 0.37;
        for season in 0..2 {
            q.att[season].iter_mut().for_each(|x| *x += c);
            q.def[season].iter_mut().for_each(|x| *x -= c);
        }
        for season in 0..2 {
            let ms = data.season_matches(season);
            for w in ms.windows(2) {
                let (a, b) = (&data.matches[w[0]], &data.matches[w[1]]);
                let ra = score_rates(&p, season, a.home, a.away).home / score_rates(&p, season, b.home, b.away).home;
                let rb = score_rates(&q, season, a.home, a.away).home / score_rates(&q, season, b.home, b.away).home;
                assert_abs_diff_eq!(ra, rb, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn block_conditionals_track_the_full_density() {
        for (away_intercept, collapse_weights) in [(false, false), (true, false), (false, true), (true, true)] {
            let (data, p) = random_setup(21, 30);
            let model = Model { away_intercept, collapse_weights, ..Model::new(PriorConfig::default()) };
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut u = Vec::new();
            for block in model.blocks(&data) {
                model.block_get(&p, block, &mut u);
                assert_eq!(u.len(), model.block_dim(&data, block));
                let mut q = p.clone();
                let moved: Vec<f64> = u.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect();
                model.block_set(&mut q, block, &moved);
                let full = model.unconstrained_log_density(&q, &data) - model.unconstrained_log_density(&p, &data)
                    + model.move_log_jacobian(&q, block)
                    - model.move_log_jacobian(&p, block);
                let local = model.block_log_density(&q, &data, block) - model.block_log_density(&p, &data, block);
                assert!((full - local).abs() < 1e-9, "{block:?}: full {full} vs block {local}");
                assert!(q.zero_sum_violation() < 1e-12);
            }
        }
    }

    #[test]
    fn marginal_side_matches_quadrature() {
        let cases = [(0u32, 1.3, 0.7), (2, 1.0, 1.0 + 1e-10), (3, 0.4, 2.9), (7, 1.1, 1.6), (12, 0.9, 1.2), (1, 6.0, 0.05)];
        for (y, theta, lambda) in cases {
            let n = 200_000;
            let integral: f64 = (0..n)
                .map(|i| {
                    let p = (i as f64 + 0.5) / n as f64;
                    ln_poisson_pmf(y, p * theta + (1.0 - p) * lambda).exp()
                })
                .sum::<f64>()
                / n as f64;
            let got = ln_marginal_side(y, theta, lambda);
            assert!((got - integral.ln()).abs() < 1e-8, "y={y}: {got} vs {}", integral.ln());
            assert_abs_diff_eq!(ln_marginal_side(y, lambda, theta), got, epsilon = 1e-12);
        }
    }

    #[test]
    fn weight_draws_follow_the_conditional() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (y, theta, lambda, a, b) in [(0u32, 2.5, 0.5, 1.0, 1.0), (4, 2.5, 0.5, 1.0, 1.0), (1, 1.5, 1.0, 2.0, 3.0)] {
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| sample_weight(&mut rng, y, theta, lambda, a, b)).collect();
            let grid = 20_000;
            let (mut z, mut first) = (0.0, 0.0);
            for i in 0..grid {
                let p = (i as f64 + 0.5) / grid as f64;
                let w = (ln_beta_pdf(p, a, b) + ln_poisson_pmf(y, mix(p, theta, lambda))).exp();
                z += w;
                first += w * p;
            }
            let expected = first / z;
            let got = draws.iter().sum::<f64>() / n as f64;
            assert!((got - expected).abs() < 0.005, "{got} vs {expected}");
        }
    }

    #[test]
    fn collapsed_blocks_leave_weights_alone() {
        let (data, p) = random_setup(3, 6);
        let model = Model::new(PriorConfig::default());
        assert!(model.collapsed());
        assert!(!Model { priors: PriorConfig { beta_a: 2.0, ..PriorConfig::default() }, ..model }.collapsed());
        assert_eq!(model.block_dim(&data, Block::HomeSide(0)), 1);
        let mut q = p.clone();
        model.block_set(&mut q, Block::AwaySide(2), &[0.3]);
        assert_eq!(q.p_away, p.p_away);
        assert_abs_diff_eq!(q.lambda_away[2], 0.3f64.exp(), epsilon = 1e-15);
    }

    #[test]
    fn block_get_set_round_trip() {
        let (data, p) = random_setup(8, 5);
        let model = Model::new(PriorConfig::default());
        let mut q = p.clone();
        let mut u = Vec::new();
        for block in model.blocks(&data) {
            model.block_get(&p, block, &mut u);
            model.block_set(&mut q, block, &u);
        }
        let layout = ParamLayout::new(p.structure(false));
        let (mut a, mut b) = (Vec::new(), Vec::new());
        layout.flatten(&p, &mut a);
        layout.flatten(&q, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn layout_round_trips() {
        let (_, p) = random_setup(1, 7);
        for away_intercept in [false, true] {
            let layout = ParamLayout::new(p.structure(away_intercept));
            let mut row = Vec::new();
            layout.flatten(&p, &mut row);
            assert_eq!(row.len(), layout.len());
            assert_eq!(layout.names().len(), layout.len());
            let mut back = layout.unflatten(&row).unwrap();
            if !away_intercept {
                back.intercept = p.intercept;
            }
            assert_eq!(back, p);
        }
        assert_eq!(ParamLayout::new(structure(2)).index_of("att[2,1]"), Some(9 + 1));
    }
}
