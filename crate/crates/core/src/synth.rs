//! Synthetic leagues drawn from the model with known parameters.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{odds_with_margin, LeagueConfig};
use crate::model::{mix, score_rates, MatchObs, ModelData, ModelParameters, Structure};
use crate::numeric::{mean, sample_trunc_normal_pos};
use crate::odds::Outcome;
use crate::skellam::{three_way_probs, RatePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_teams: usize,
    pub n_seasons: usize,
    pub n_bookmakers: usize,
    /// Double round robins per season.
    pub round_robins: usize,
    pub mu: f64,
    pub sigma_att: f64,
    pub sigma_def: f64,
    /// Log-scale spread of the bookmaker rate `λ` around the score rate `θ`.
    pub lambda_spread: f64,
    pub tau: [f64; 2],
    pub p_beta: [f64; 2],
    /// Extra attack strength of team 0.
    pub dominant: f64,
    /// Overround applied when quoting odds.
    pub booksum: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_teams: 6,
            n_seasons: 2,
            n_bookmakers: 3,
            round_robins: 2,
            mu: 0.3,
            sigma_att: 0.3,
            sigma_def: 0.3,
            lambda_spread: 0.1,
            tau: [0.1, 0.1],
            p_beta: [1.0, 1.0],
            dominant: 0.0,
            booksum: 1.06,
        }
    }
}

impl SynthConfig {
    pub fn matches_per_season(&self) -> usize {
        self.round_robins * self.n_teams * self.n_teams.saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLeague {
    pub config: SynthConfig,
    pub truth: ModelParameters,
    pub data: ModelData,
    pub team_names: Vec<String>,
}

/// Every ordered pairing once per round robin, shuffled within each round robin.
pub fn fixtures<R: Rng + ?Sized>(n_teams: usize, round_robins: usize, rng: &mut R) -> Vec<(usize, usize)> {
    use rand::seq::SliceRandom;
    let mut out = Vec::new();
    for _ in 0..round_robins {
        let mut round: Vec<(usize, usize)> =
            (0..n_teams).flat_map(|h| (0..n_teams).filter(move |a| *a != h).map(move |a| (h, a))).collect();
        round.shuffle(rng);
        out.extend(round);
    }
    out
}

fn project(v: &mut [f64]) {
    let m = mean(v);
    v.iter_mut().for_each(|x| *x -= m);
    let n = v.len();
    if n > 0 {
        v[n - 1] = -v[..n - 1].iter().sum::<f64>();
    }
}

/// Attack and defence effects for every season from the random-walk prior.
fn draw_effects<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut att: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_seasons);
    let mut def: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_seasons);
    let z = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
    for s in 0..cfg.n_seasons {
        let mut a: Vec<f64> = (0..cfg.n_teams).map(|_| cfg.sigma_att * z(rng)).collect();
        let mut d: Vec<f64> = (0..cfg.n_teams).map(|_| cfg.sigma_def * z(rng)).collect();
        if s > 0 {
            a.iter_mut().zip(&att[s - 1]).for_each(|(x, prev)| *x += prev);
            d.iter_mut().zip(&def[s - 1]).for_each(|(x, prev)| *x += prev);
        } else if cfg.dominant != 0.0 && cfg.n_teams > 0 {
            a[0] += cfg.dominant;
            d[0] -= 0.5 * cfg.dominant;
        }
        project(&mut a);
        project(&mut d);
        att.push(a);
        def.push(d);
    }
    (att, def)
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> SyntheticLeague {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (att, def) = draw_effects(cfg, &mut rng);
    let mut schedule = Vec::new();
    for s in 0..cfg.n_seasons {
        for (h, a) in fixtures(cfg.n_teams, cfg.round_robins, &mut rng) {
            schedule.push((s, h, a));
        }
    }
    let structure = Structure {
        n_teams: cfg.n_teams,
        n_seasons: cfg.n_seasons,
        n_matches: schedule.len(),
        away_intercept: false,
    };
    let mut truth = ModelParameters::neutral(&structure);
    truth.mu = cfg.mu;
    truth.sigma_att = cfg.sigma_att;
    truth.sigma_def = cfg.sigma_def;
    truth.att = att;
    truth.def = def;
    truth.tau = cfg.tau;
    let beta = Beta::new(cfg.p_beta[0], cfg.p_beta[1]).expect("positive Beta parameters");

    let mut matches = Vec::with_capacity(schedule.len());
    for (m, &(season, home, away)) in schedule.iter().enumerate() {
        let theta = score_rates(&truth, season, home, away);
        let side = |rate: f64, tau: f64, rng: &mut ChaCha8Rng| {
            let noise: f64 = StandardNormal.sample(rng);
            let lambda = rate * (cfg.lambda_spread * noise).exp();
            let p: f64 = beta.sample(rng);
            let implicit: Vec<f64> =
                (0..cfg.n_bookmakers).map(|_| sample_trunc_normal_pos(rng, lambda, tau)).collect();
            let gamma = mix(p, rate, lambda);
            let goals = Poisson::new(gamma).expect("positive rate").sample(rng) as u32;
            (p, lambda, implicit, goals)
        };
        let (p1, l1, imp1, g1) = side(theta.home, cfg.tau[0], &mut rng);
        let (p2, l2, imp2, g2) = side(theta.away, cfg.tau[1], &mut rng);
        truth.p_home[m] = p1;
        truth.p_away[m] = p2;
        truth.lambda_home[m] = l1;
        truth.lambda_away[m] = l2;
        matches.push(MatchObs {
            season,
            home,
            away,
            goals_home: g1,
            goals_away: g2,
            implicit_home: imp1,
            implicit_away: imp2,
        });
    }
    if !matches.is_empty() {
        truth.alpha = [mean(&truth.lambda_home), mean(&truth.lambda_away)];
    }
    SyntheticLeague {
        config: *cfg,
        truth,
        data: ModelData::new(cfg.n_teams, cfg.n_seasons, matches),
        team_names: (0..cfg.n_teams).map(|t| format!("Team {}", t + 1)).collect(),
    }
}

impl SyntheticLeague {
    /// Football-data style CSV text for one season, with odds quoted from the
    /// implicit rates at the configured overround.
    pub fn season_csv(&self, season: usize) -> String {
        let books: Vec<String> =
            LeagueConfig::default().bookmakers.into_iter().take(self.config.n_bookmakers).collect();
        let mut out = String::from("Div,Date,HomeTeam,AwayTeam,FTHG,FTAG,FTR");
        for b in &books {
            write!(out, ",{b}H,{b}D,{b}A").unwrap();
        }
        out.push('\n');
        let start = NaiveDate::from_ymd_opt(2000 + season as i32, 8, 1).unwrap();
        let in_season = self.data.season_matches(season);
        for (k, &m) in in_season.iter().enumerate() {
            let obs = &self.data.matches[m];
            let date = start + Duration::days(k as i64);
            let result = Outcome::from_goals(obs.goals_home, obs.goals_away).label();
            write!(
                out,
                "SY1,{},{},{},{},{},{}",
                date.format("%d/%m/%Y"),
                self.team_names[obs.home],
                self.team_names[obs.away],
                obs.goals_home,
                obs.goals_away,
                result
            )
            .unwrap();
            for (h, a) in obs.implicit_home.iter().zip(&obs.implicit_away) {
                let probs = three_way_probs(RatePair { home: h.max(1e-3), away: a.max(1e-3) });
                let d = odds_with_margin(probs, self.config.booksum);
                write!(out, ",{:.2},{:.2},{:.2}", d.win.max(1.01), d.draw.max(1.01), d.loss.max(1.01)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Writes `season_1.csv`, `season_2.csv`, ... into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        (0..self.config.n_seasons)
            .map(|s| {
                let path = dir.join(format!("season_{}.csv", s + 1));
                std::fs::write(&path, self.season_csv(s))?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_season, TeamTable};

    #[test]
    fn default_league_has_expected_shape() {
        let league = generate(&SynthConfig::default(), 1);
        assert_eq!(league.data.matches.len(), 120);
        assert_eq!(league.data.season_matches(1).len(), 60);
        assert!(league.truth.satisfies_constraints(1e-12));
        for m in &league.data.matches {
            assert_ne!(m.home, m.away);
            assert_eq!(m.implicit_home.len(), 3);
        }
    }

    #[test]
    fn every_pairing_appears_per_round_robin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = fixtures(5, 1, &mut rng);
        assert_eq!(f.len(), 20);
        let mut sorted = f.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SynthConfig::default(), 5);
        let b = generate(&SynthConfig::default(), 5);
        assert_eq!(a, b);
        assert_ne!(a.data.matches, generate(&SynthConfig::default(), 6).data.matches);
    }

    #[test]
    fn csv_parses_back() {
        let league = generate(&SynthConfig::default(), 2);
        let mut teams = TeamTable::new();
        let loaded = load_season(league.season_csv(0).as_bytes(), &LeagueConfig::default(), 0, &mut teams).unwrap();
        assert_eq!(loaded.records.len(), 60);
        assert_eq!(loaded.dropped_rows, 0);
        assert!(loaded.records.iter().all(|r| r.odds.iter().take(3).all(Option::is_some)));
        let first = &league.data.matches[league.data.season_matches(0)[0]];
        assert_eq!(loaded.records[0].goals_home, first.goals_home);
    }
}
