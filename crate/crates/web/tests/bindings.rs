use oddsmix_web::{convert_odds_impl, implied_rates_impl, score_matrix_impl, MAX_GRID_GOALS};

#[test]
fn fair_odds_pass_through_unchanged() {
    let out = convert_odds_impl(2.0, 4.0, 4.0, true).unwrap();
    assert_eq!(out.len(), 5);
    for (got, want) in out[..3].iter().zip([0.5, 0.25, 0.25]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(out[3], 0.0);
    assert!((out[4] - 1.0).abs() < 1e-12);
}

#[test]
fn shin_moves_mass_toward_the_favourite() {
    let basic = convert_odds_impl(1.5, 4.0, 7.0, false).unwrap();
    let shin = convert_odds_impl(1.5, 4.0, 7.0, true).unwrap();
    assert_eq!(basic[3], 0.0);
    assert!(shin[3] > 0.0 && shin[3] < 0.5);
    assert!(shin[0] > basic[0] && shin[2] < basic[2]);
    assert!((shin[..3].iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn the_three_steps_chain_back_to_the_input() {
    let p = convert_odds_impl(1.8, 3.6, 4.5, true).unwrap();
    let r = implied_rates_impl(p[0], p[1], p[2]).unwrap();
    let n = 10;
    let grid = score_matrix_impl(r[0], r[1], n).unwrap();
    let k = n + 1;
    assert_eq!(grid.len(), k * k + 3);
    for (got, want) in grid[k * k..].iter().zip(&p[..3]) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    // The diagonal of the grid is the draw probability up to truncation.
    let diag: f64 = (0..k).map(|i| grid[i * k + i]).sum();
    assert!(diag <= grid[k * k + 1] + 1e-12 && grid[k * k + 1] - diag < 1e-4);
}

#[test]
fn implied_rates_renormalizes_rounded_inputs() {
    let exact = implied_rates_impl(0.45, 0.28, 0.27).unwrap();
    let scaled = implied_rates_impl(45.0, 28.0, 27.0).unwrap();
    assert!((exact[0] - scaled[0]).abs() < 1e-9 && (exact[1] - scaled[1]).abs() < 1e-9);
}

#[test]
fn invalid_inputs_are_errors() {
    assert!(convert_odds_impl(0.9, 3.0, 3.0, true).is_err());
    assert!(convert_odds_impl(f64::NAN, 3.0, 3.0, false).is_err());
    assert!(implied_rates_impl(0.0, 0.0, 0.0).is_err());
    assert!(implied_rates_impl(1.0, 0.0, 0.0).is_err());
    assert!(score_matrix_impl(-1.0, 1.0, 5).is_err());
    assert!(score_matrix_impl(1.0, 1.0, MAX_GRID_GOALS + 1).is_err());
}
