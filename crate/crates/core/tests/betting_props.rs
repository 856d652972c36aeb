use oddsmix::betting::{average_correct_probability, backtest, strategy_a, Strategy};
use oddsmix::data::{AugmentedMatch, Dataset, MatchRecord, TeamTable};
use oddsmix::odds::{DecimalOddsTriple, Outcome, ProbMethod, ProbTriple};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn dataset(rows: &[((u32, u32), Vec<Option<DecimalOddsTriple>>)]) -> Dataset {
    let n_books = rows[0].1.len();
    Dataset {
        matches: rows
            .iter()
            .map(|((h, a), odds)| {
                AugmentedMatch::bare(MatchRecord {
                    season: 0,
                    date: None,
                    home: 0,
                    away: 1,
                    goals_home: *h,
                    goals_away: *a,
                    odds: odds.clone(),
                })
            })
            .collect(),
        teams: TeamTable::from_names(["A".to_string(), "B".to_string()]),
        seasons: vec!["s".into()],
        bookmakers: (0..n_books).map(|b| format!("BK{b}")).collect(),
        method: ProbMethod::Basic,
    }
}

fn odds(w: f64, d: f64, l: f64) -> DecimalOddsTriple {
    DecimalOddsTriple::new(w, d, l).unwrap()
}

#[test]
fn never_betting_reports_nothing() {
    let ds = dataset(&[((1, 0), vec![Some(odds(2.0, 3.0, 4.0))]), ((0, 0), vec![None])]);
    let p = vec![ProbTriple::new(0.5, 0.3, 0.2); 2];
    let r = backtest(&p, &ds, Strategy::Never, &[0]).unwrap();
    let b = &r.per_bookmaker[0];
    assert_eq!((b.bets, b.mean_profit, b.se, b.skipped_missing), (0, 0.0, 0.0, 1));
}

#[test]
fn covering_every_outcome_loses_the_overround() {
    // Equal prices with Σ 1/d = booksum lose 3 − 3/booksum per match whatever happens.
    let booksum = 1.08;
    let d = 3.0 / booksum;
    let rows: Vec<_> = [(2, 1), (0, 0), (1, 3), (4, 4)].iter().map(|&g| (g, vec![Some(odds(d, d, d))])).collect();
    let ds = dataset(&rows);
    let p = vec![ProbTriple::new(0.4, 0.3, 0.3); rows.len()];
    let r = backtest(&p, &ds, Strategy::AllOutcomes, &[0]).unwrap();
    let expected = 3.0 / booksum - 3.0;
    assert!(expected < 0.0);
    assert!((r.overall.mean_profit - expected).abs() < 1e-12);
    assert!(r.records.iter().all(|rec| (rec.profit - expected).abs() < 1e-12));
}

fn probs() -> impl proptest::strategy::Strategy<Value = ProbTriple> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| ProbTriple::new(a, b, c).renormalized())
}

fn prices() -> impl proptest::strategy::Strategy<Value = DecimalOddsTriple> {
    (1.05f64..12.0, 1.05f64..12.0, 1.05f64..12.0).prop_map(|(a, b, c)| odds(a, b, c))
}

proptest! {
    #[test]
    fn bankroll_ends_at_total_profit(
        games in prop::collection::vec((probs(), prices(), 0u32..4, 0u32..4), 1..30),
        which in 0usize..3,
    ) {
        let rows: Vec<_> = games.iter().map(|(_, d, h, a)| ((*h, *a), vec![Some(*d)])).collect();
        let ds = dataset(&rows);
        let p: Vec<ProbTriple> = games.iter().map(|g| g.0).collect();
        let strategy = [Strategy::A { only_positive_ev: false }, Strategy::A { only_positive_ev: true }, Strategy::B][which];
        let r = backtest(&p, &ds, strategy, &[0]).unwrap();
        let b = &r.per_bookmaker[0];
        let mut total = 0.0;
        for rec in r.records.iter().filter(|rec| rec.stake > 0.0) {
            total += rec.profit;
        }
        prop_assert_eq!(b.bankroll.last().copied().unwrap_or(0.0), total);
        prop_assert_eq!(b.total_profit, total);
    }

    #[test]
    fn strategy_a_ignores_ev_rescaling(p in probs(), d in prices(), c in 0.1f64..10.0) {
        // Rescaling every EV by c means p·d' − 1 = c(p·d − 1).
        let pa = p.as_array();
        let da = d.as_array();
        let scaled: Vec<f64> = (0..3).map(|i| (c * (pa[i] * da[i] - 1.0) + 1.0) / pa[i]).collect();
        prop_assume!(scaled.iter().all(|&x| x > 1.0));
        let d2 = odds(scaled[0], scaled[1], scaled[2]);
        prop_assert_eq!(strategy_a(p, d, false).single_outcome(), strategy_a(p, d2, false).single_outcome());
    }

    #[test]
    fn correct_probability_is_between_extremes(
        games in prop::collection::vec((probs(), 0usize..3), 1..40),
    ) {
        let p: Vec<ProbTriple> = games.iter().map(|g| g.0).collect();
        let o: Vec<Outcome> = games.iter().map(|g| Outcome::ALL[g.1]).collect();
        let realized: Vec<f64> = p.iter().zip(&o).map(|(p, o)| p.get(*o)).collect();
        let v = average_correct_probability(&p, &o).unwrap();
        let lo = realized.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = realized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
    }
}
