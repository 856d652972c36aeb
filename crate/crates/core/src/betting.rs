//! Forecast accuracy and betting backtests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::odds::{DecimalOddsTriple, Outcome, ProbTriple};

#[derive(Debug, Error, PartialEq)]
pub enum BettingError {
    #[error("{forecasts} forecasts for {outcomes} observed matches")]
    LengthMismatch { forecasts: usize, outcomes: usize },
    #[error("bookmaker index {0} out of range")]
    UnknownBookmaker(usize),
}

/// Mean probability assigned to the realized outcome.
pub fn average_correct_probability(forecasts: &[ProbTriple], outcomes: &[Outcome]) -> Result<f64, BettingError> {
    if forecasts.len() != outcomes.len() {
        return Err(BettingError::LengthMismatch { forecasts: forecasts.len(), outcomes: outcomes.len() });
    }
    if forecasts.is_empty() {
        return Ok(f64::NAN);
    }
    let total: f64 = forecasts.iter().zip(outcomes).map(|(p, o)| p.get(*o)).sum();
    Ok(total / forecasts.len() as f64)
}

/// Stakes placed on one match before the result is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bet {
    /// Units staked on win, draw and loss.
    pub stakes: [f64; 3],
    pub expected_profit: f64,
    pub variance: f64,
}

impl Bet {
    pub const NONE: Bet = Bet { stakes: [0.0; 3], expected_profit: 0.0, variance: 0.0 };

    pub fn is_bet(&self) -> bool {
        self.stakes.iter().any(|&s| s > 0.0)
    }

    fn single(outcome: Outcome, stake: f64, p: f64, odd: f64) -> Bet {
        let mut stakes = [0.0; 3];
        stakes[outcome.index()] = stake;
        Bet { stakes, expected_profit: stake * (p * odd - 1.0), variance: stake * stake * p * (1.0 - p) * odd * odd }
    }

    /// The outcome backed when exactly one outcome carries a stake.
    pub fn single_outcome(&self) -> Option<Outcome> {
        let mut backed = Outcome::ALL.into_iter().filter(|o| self.stakes[o.index()] > 0.0);
        match (backed.next(), backed.next()) {
            (Some(o), None) => Some(o),
            _ => None,
        }
    }

    pub fn total_stake(&self) -> f64 {
        self.stakes.iter().sum()
    }

    /// Realized profit: each stake returns `stake·(odd − 1)` if it wins and
    /// loses the stake otherwise.
    pub fn profit(&self, odds: DecimalOddsTriple, result: Outcome) -> f64 {
        let d = odds.as_array();
        let mut profit = 0.0;
        for o in Outcome::ALL {
            let stake = self.stakes[o.index()];
            if stake > 0.0 {
                profit += if o == result { stake * (d[o.index()] - 1.0) } else { -stake };
            }
        }
        profit
    }
}

/// Expected return per unit stake, `p·d − 1`, for each outcome.
pub fn expected_returns(p: ProbTriple, d: DecimalOddsTriple) -> [f64; 3] {
    let (p, d) = (p.as_array(), d.as_array());
    [p[0] * d[0] - 1.0, p[1] * d[1] - 1.0, p[2] * d[2] - 1.0]
}

/// Outcome with the highest expected return; ties go to the more probable outcome.
fn best_outcome(p: ProbTriple, d: DecimalOddsTriple) -> (Outcome, f64) {
    let ev = expected_returns(p, d);
    let mut best = Outcome::Win;
    for o in [Outcome::Draw, Outcome::Loss] {
        let (i, b) = (o.index(), best.index());
        if ev[i] > ev[b] || (ev[i] == ev[b] && p.get(o) > p.get(best)) {
            best = o;
        }
    }
    (best, ev[best.index()])
}

/// One unit on the outcome with the highest expected return.
pub fn strategy_a(p: ProbTriple, d: DecimalOddsTriple, only_positive_ev: bool) -> Bet {
    let (o, ev) = best_outcome(p, d);
    if only_positive_ev && ev <= 0.0 {
        return Bet::NONE;
    }
    Bet::single(o, 1.0, p.get(o), d.get(o))
}

/// Stake `EV / Var` (clamped to `[0, 1]`) on the best outcome when its
/// expected return is positive.
pub fn strategy_b(p: ProbTriple, d: DecimalOddsTriple) -> Bet {
    let (o, ev) = best_outcome(p, d);
    if ev <= 0.0 {
        return Bet::NONE;
    }
    let (pi, di) = (p.get(o), d.get(o));
    let var = pi * (1.0 - pi) * di * di;
    let stake = if var > 0.0 { (ev / var).clamp(0.0, 1.0) } else { 1.0 };
    Bet::single(o, stake, pi, di)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    A { only_positive_ev: bool },
    B,
    Never,
    /// One unit on each of the three outcomes.
    AllOutcomes,
}

impl Strategy {
    pub fn place(self, p: ProbTriple, d: DecimalOddsTriple) -> Bet {
        match self {
            Strategy::A { only_positive_ev } => strategy_a(p, d, only_positive_ev),
            Strategy::B => strategy_b(p, d),
            Strategy::Never => Bet::NONE,
            Strategy::AllOutcomes => {
                let probs = p.as_array();
                let odds = d.as_array();
                let expected = (0..3).map(|i| probs[i] * odds[i]).sum::<f64>() - 3.0;
                Bet { stakes: [1.0; 3], expected_profit: expected, variance: f64::NAN }
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::A { only_positive_ev: false } => "A",
            Strategy::A { only_positive_ev: true } => "A+",
            Strategy::B => "B",
            Strategy::Never => "never",
            Strategy::AllOutcomes => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetRecord {
    pub match_id: usize,
    pub bookmaker: usize,
    pub outcome: Option<Outcome>,
    pub stake: f64,
    pub odd: Option<f64>,
    pub profit: f64,
    pub expected_profit: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookmakerReport {
    pub bookmaker: String,
    pub matches: usize,
    pub bets: usize,
    pub skipped_missing: usize,
    /// Mean realized profit per bet placed.
    pub mean_profit: f64,
    /// Sample standard deviation of per-bet profit over `√bets`.
    pub se: f64,
    pub mean_expected_profit: f64,
    pub total_stake: f64,
    pub total_profit: f64,
    /// Cumulative profit after each bet.
    pub bankroll: Vec<f64>,
}

impl BookmakerReport {
    fn from_records(name: String, matches: usize, skipped: usize, records: &[BetRecord]) -> Self {
        let placed: Vec<&BetRecord> = records.iter().filter(|r| r.stake > 0.0).collect();
        let n = placed.len();
        let mut bankroll = Vec::with_capacity(n);
        let mut total = 0.0;
        for r in &placed {
            total += r.profit;
            bankroll.push(total);
        }
        let (mean_profit, se, mean_expected) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let m = total / n as f64;
            let sd = if n > 1 {
                (placed.iter().map(|r| (r.profit - m) * (r.profit - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (m, sd / (n as f64).sqrt(), placed.iter().map(|r| r.expected_profit).sum::<f64>() / n as f64)
        };
        BookmakerReport {
            bookmaker: name,
            matches,
            bets: n,
            skipped_missing: skipped,
            mean_profit,
            se,
            mean_expected_profit: mean_expected,
            total_stake: placed.iter().map(|r| r.stake).sum(),
            total_profit: total,
            bankroll,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: Strategy,
    pub per_bookmaker: Vec<BookmakerReport>,
    /// Every bet of every selected bookmaker pooled.
    pub overall: BookmakerReport,
    pub records: Vec<BetRecord>,
}

/// Applies `strategy` to every match for each selected bookmaker, in match
/// order. Matches without a quote from a bookmaker are skipped and counted.
pub fn backtest(
    forecasts: &[ProbTriple],
    test: &Dataset,
    strategy: Strategy,
    bookmakers: &[usize],
) -> Result<BacktestReport, BettingError> {
    if forecasts.len() != test.matches.len() {
        return Err(BettingError::LengthMismatch { forecasts: forecasts.len(), outcomes: test.matches.len() });
    }
    let mut per_bookmaker = Vec::with_capacity(bookmakers.len());
    let mut all_records = Vec::new();
    for &b in bookmakers {
        if b >= test.n_bookmakers() {
            return Err(BettingError::UnknownBookmaker(b));
        }
        let mut records = Vec::with_capacity(forecasts.len());
        let mut skipped = 0;
        for (id, (p, m)) in forecasts.iter().zip(&test.matches).enumerate() {
            let Some(d) = m.record.odds.get(b).copied().flatten() else {
                skipped += 1;
                continue;
            };
            let result = Outcome::from_goals(m.record.goals_home, m.record.goals_away);
            let bet = strategy.place(*p, d);
            let outcome = bet.single_outcome();
            records.push(BetRecord {
                match_id: id,
                bookmaker: b,
                outcome,
                stake: bet.total_stake(),
                odd: outcome.map(|o| d.get(o)),
                profit: bet.profit(d, result),
                expected_profit: bet.expected_profit,
                variance: bet.variance,
            });
        }
        per_bookmaker.push(BookmakerReport::from_records(
            test.bookmakers[b].clone(),
            test.matches.len(),
            skipped,
            &records,
        ));
        all_records.extend(records);
    }
    let skipped = per_bookmaker.iter().map(|r| r.skipped_missing).sum();
    let overall =
        BookmakerReport::from_records("all".to_string(), test.matches.len() * bookmakers.len(), skipped, &all_records);
    Ok(BacktestReport { strategy, per_bookmaker, overall, records: all_records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: f64, x: f64, l: f64) -> DecimalOddsTriple {
        DecimalOddsTriple::new(w, x, l).unwrap()
    }

    #[test]
    fn correct_probability_examples() {
        let p = ProbTriple::new(0.6, 0.3, 0.1);
        assert_eq!(average_correct_probability(&[p], &[Outcome::Win]).unwrap(), 0.6);
        let two = [ProbTriple::new(0.5, 0.3, 0.2), ProbTriple::new(0.5, 0.25, 0.25)];
        assert_eq!(average_correct_probability(&two, &[Outcome::Win, Outcome::Draw]).unwrap(), 0.375);
        assert_eq!(
            average_correct_probability(&two, &[Outcome::Win]),
            Err(BettingError::LengthMismatch { forecasts: 2, outcomes: 1 })
        );
    }

    #[test]
    fn strategy_a_examples() {
        let p = ProbTriple::new(0.7, 0.2, 0.1);
        let odds = d(1.5, 4.0, 8.0);
        let ev = expected_returns(p, odds);
        assert!((ev[0] - 0.05).abs() < 1e-12 && (ev[1] + 0.2).abs() < 1e-12 && (ev[2] + 0.2).abs() < 1e-12);
        let bet = strategy_a(p, odds, false);
        assert_eq!(bet.single_outcome(), Some(Outcome::Win));
        assert_eq!(bet.profit(odds, Outcome::Win), 0.5);
        assert_eq!(bet.profit(odds, Outcome::Draw), -1.0);

        let third = 1.0 / 3.0;
        let uniform = ProbTriple::new(third, third, third);
        let flat = d(2.9, 2.9, 2.9);
        assert!(!strategy_a(uniform, flat, true).is_bet());
        assert!(strategy_a(uniform, flat, false).is_bet());

        let tie = strategy_a(ProbTriple::new(0.5, 0.5, 0.0), d(2.4, 2.4, 5.0), true);
        assert_eq!(tie.single_outcome(), Some(Outcome::Win));
    }

    #[test]
    fn strategy_b_examples() {
        let p = ProbTriple::new(0.7, 0.2, 0.1);
        let bet = strategy_b(p, d(1.5, 4.0, 8.0));
        assert_eq!(bet.single_outcome(), Some(Outcome::Win));
        assert!((bet.stakes[0] - 0.05 / (0.7 * 0.3 * 2.25)).abs() < 1e-12);
        assert!((bet.stakes[0] - 0.1058).abs() < 1e-4);
        assert!(!strategy_b(ProbTriple::new(0.3, 0.3, 0.4), d(2.0, 3.0, 2.0)).is_bet());
        let clamp = strategy_b(ProbTriple::new(0.98, 0.01, 0.01), d(2.0, 50.0, 50.0));
        assert_eq!(clamp.stakes[0], 1.0);
    }

    #[test]
    fn ev_rescaling_keeps_the_choice() {
        let p = ProbTriple::new(0.45, 0.3, 0.25);
        let odds = d(2.1, 3.6, 4.5);
        let (o, _) = best_outcome(p, odds);
        // Scaling every p·d by a common factor scales every EV + 1 alike.
        let scaled = d(2.1 * 1.7, 3.6 * 1.7, 4.5 * 1.7);
        assert_eq!(best_outcome(p, scaled).0, o);
    }
}
