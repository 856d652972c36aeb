//! Poisson-difference (Skellam) probabilities and their inversion.
//!
//! For independent home and away goal counts `Y1 ~ Pois(θ1)`, `Y2 ~ Pois(θ2)`
//! the goal difference `Y1 − Y2` is Skellam distributed. [`three_way_probs`]
//! maps a rate pair to win/draw/loss probabilities and [`implicit_rates`]
//! recovers the rate pair that reproduces a given probability triple.
//!
//! The inversion matches both `P(win)` and `P(draw)`. Matching only the
//! cumulative `P(Y1 >= Y2)` leaves one equation for two unknowns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{ln_poisson_pmf, poisson_pmf_vec, std_normal_cdf};
use crate::odds::ProbTriple;
use crate::root::bisect;

/// Default upper bound on a scoring intensity searched by the inversion.
pub const DEFAULT_RATE_CAP: f64 = 12.0;
/// Default lower bound on a scoring intensity searched by the inversion.
pub const DEFAULT_RATE_FLOOR: f64 = 0.02;

const PMF_CUTOFF: f64 = 1e-16;
const VEC_CUTOFF: f64 = 1e-18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkellamError {
    #[error("rates must be positive and finite, got ({0}, {1})")]
    InvalidRates(f64, f64),
    #[error("probabilities ({0:?}) are not a simplex with entries in (0, 1)")]
    InvalidSimplex(ProbTriple),
    #[error("rate inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Home and away Poisson scoring intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub home: f64,
    pub away: f64,
}

impl RatePair {
    pub fn new(home: f64, away: f64) -> Result<Self, SkellamError> {
        if !(home > 0.0 && away > 0.0 && home.is_finite() && away.is_finite()) {
            return Err(SkellamError::InvalidRates(home, away));
        }
        Ok(Self { home, away })
    }

    pub fn swapped(&self) -> Self {
        Self { home: self.away, away: self.home }
    }
}

/// `P(Y1 − Y2 = k)` by direct summation over the joint Poisson terms.
pub fn skellam_pmf(k: i32, rates: RatePair) -> f64 {
    let a = k.max(0) as u32;
    let b = (-k).max(0) as u32;
    let product = rates.home * rates.away;
    let mut term = (ln_poisson_pmf(a, rates.home) + ln_poisson_pmf(b, rates.away)).exp();
    let mut sum = 0.0;
    let mut j = 0u32;
    loop {
        sum += term;
        j += 1;
        let ratio = product / ((a + j) as f64 * (b + j) as f64);
        term *= ratio;
        if ratio < 1.0 && term < PMF_CUTOFF {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Win/draw/loss probabilities for the home side under independent Poissons.
pub fn three_way_probs(rates: RatePair) -> ProbTriple {
    let home = poisson_pmf_vec(rates.home, VEC_CUTOFF);
    let away = poisson_pmf_vec(rates.away, VEC_CUTOFF);
    let (mut win, mut draw, mut loss) = (0.0, 0.0, 0.0);
    // Running P(Y < i) for each side as goal count i sweeps upwards.
    let (mut home_below, mut away_below) = (0.0, 0.0);
    for i in 0..home.len().max(away.len()) {
        let ph = home.get(i).copied().unwrap_or(0.0);
        let pa = away.get(i).copied().unwrap_or(0.0);
        draw += ph * pa;
        win += ph * away_below;
        loss += pa * home_below;
        home_below += ph;
        away_below += pa;
    }
    ProbTriple::new(win, draw, loss)
}

/// Joint exact-score probabilities `P(Y1 = i, Y2 = j)` for `i, j <= max_goals`.
pub fn score_grid(rates: RatePair, max_goals: usize) -> Vec<Vec<f64>> {
    let pois = |rate: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(max_goals + 1);
        let mut term = (-rate).exp();
        for j in 0..=max_goals {
            v.push(term);
            term *= rate / (j + 1) as f64;
        }
        v
    };
    let home = pois(rates.home);
    let away = pois(rates.away);
    home.iter().map(|ph| away.iter().map(|pa| ph * pa).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub rate_floor: f64,
    pub rate_cap: f64,
    pub max_iterations: usize,
    /// Required bound on `|P(win) − p_win|` and `|P(draw) − p_draw|`.
    pub tolerance: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            rate_floor: DEFAULT_RATE_FLOOR,
            rate_cap: DEFAULT_RATE_CAP,
            max_iterations: 200,
            tolerance: 1e-7,
        }
    }
}

fn residual(rates: [f64; 2], target: &ProbTriple) -> [f64; 2] {
    let p = three_way_probs(RatePair { home: rates[0], away: rates[1] });
    [p.win - target.win, p.draw - target.draw]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

/// Starting point: total goals 2.5 and a goal supremacy chosen so that a normal
/// approximation to the goal difference reproduces `p_win − p_loss`.
fn heuristic_start(probs: &ProbTriple) -> [f64; 2] {
    const TOTAL: f64 = 2.5;
    let sd = TOTAL.sqrt();
    let target = probs.win - probs.loss;
    let edge = |d: f64| std_normal_cdf((d - 0.5) / sd) - std_normal_cdf((-0.5 - d) / sd) - target;
    let limit = TOTAL - 0.1;
    let d = bisect(edge, -limit, limit, 1e-12, 100).map(|r| r.x).unwrap_or(if target > 0.0 { limit } else { -limit });
    [0.5 * (TOTAL + d), 0.5 * (TOTAL - d)]
}

pub fn implicit_rates(probs: ProbTriple, init: Option<RatePair>) -> Result<RatePair, SkellamError> {
    implicit_rates_with(probs, init, &InversionConfig::default())
}

/// Solves `three_way_probs(θ) = probs` with damped Newton steps on a
/// finite-difference Jacobian.
pub fn implicit_rates_with(
    probs: ProbTriple,
    init: Option<RatePair>,
    config: &InversionConfig,
) -> Result<RatePair, SkellamError> {
    let entries = probs.as_array();
    if entries.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || (probs.sum() - 1.0).abs() > 1e-9 {
        return Err(SkellamError::InvalidSimplex(probs));
    }
    let clamp = |x: f64| x.clamp(config.rate_floor, config.rate_cap);
    let mut x = match init {
        Some(r) => [clamp(r.home), clamp(r.away)],
        None => heuristic_start(&probs).map(clamp),
    };
    let mut f = residual(x, &probs);
    let mut fnorm = norm(f);

    for iteration in 0..config.max_iterations {
        if fnorm <= 1e-13 {
            break;
        }
        // Central differences, one column per rate.
        let mut jac = [[0.0; 2]; 2];
        for col in 0..2 {
            let h = 1e-6 * x[col].max(1.0);
            let mut up = x;
            let mut down = x;
            up[col] += h;
            down[col] = (down[col] - h).max(0.5 * x[col]);
            let span = up[col] - down[col];
            let fu = residual(up, &probs);
            let fd = residual(down, &probs);
            jac[0][col] = (fu[0] - fd[0]) / span;
            jac[1][col] = (fu[1] - fd[1]) / span;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(SkellamError::NoConvergence { iterations: iteration, residual: fnorm });
        }
        let step = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];

        let mut damping = 1.0;
        let mut improved = false;
        while damping > 1e-10 {
            let trial = [clamp(x[0] + damping * step[0]), clamp(x[1] + damping * step[1])];
            let ft = residual(trial, &probs);
            let nt = norm(ft);
            if nt < fnorm {
                x = trial;
                f = ft;
                fnorm = nt;
                improved = true;
                break;
            }
            damping *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if fnorm <= config.tolerance {
        Ok(RatePair { home: x[0], away: x[1] })
    } else {
        Err(SkellamError::NoConvergence { iterations: config.max_iterations, residual: fnorm })
    }
}
