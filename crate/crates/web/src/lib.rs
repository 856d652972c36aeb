//! Browser bindings for three small pieces of `oddsmix`: odds conversion,
//! implicit scoring rates and the correct-score grid.
//!
//! The `*_impl` functions hold the logic and are plain Rust so they can be
//! tested off the browser; the exported wrappers only convert errors.

use oddsmix::odds::{basic_normalize, estimate_shin_z, DecimalOddsTriple, ProbTriple};
use oddsmix::skellam::{implicit_rates, score_grid, three_way_probs, RatePair};
use wasm_bindgen::prelude::*;

pub const MAX_GRID_GOALS: usize = 15;

/// `[p_win, p_draw, p_loss, z, booksum]`; `z` is 0 for basic normalization.
pub fn convert_odds_impl(home: f64, draw: f64, away: f64, shin: bool) -> Result<Vec<f64>, String> {
    let d = DecimalOddsTriple::new(home, draw, away).map_err(|e| e.to_string())?;
    let o = oddsmix::odds::invert_decimal_odds(d).map_err(|e| e.to_string())?;
    let (p, z) = if shin {
        let r = estimate_shin_z(o).map_err(|e| e.to_string())?;
        (r.probs, r.z)
    } else {
        (basic_normalize(o).map_err(|e| e.to_string())?, 0.0)
    };
    Ok(vec![p.win, p.draw, p.loss, z, o.booksum()])
}

/// `[home_rate, away_rate]` reproducing the three-way probabilities.
pub fn implied_rates_impl(win: f64, draw: f64, loss: f64) -> Result<Vec<f64>, String> {
    let total = win + draw + loss;
    if !(total > 0.0) {
        return Err("probabilities must be positive".into());
    }
    let p = ProbTriple::new(win / total, draw / total, loss / total);
    let r = implicit_rates(p, None).map_err(|e| e.to_string())?;
    Ok(vec![r.home, r.away])
}

/// Row-major `(max_goals + 1)²` score probabilities followed by
/// `[p_win, p_draw, p_loss]`.
pub fn score_matrix_impl(home_rate: f64, away_rate: f64, max_goals: usize) -> Result<Vec<f64>, String> {
    if max_goals > MAX_GRID_GOALS {
        return Err(format!("at most {MAX_GRID_GOALS} goals per side"));
    }
    let rates = RatePair::new(home_rate, away_rate).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = score_grid(rates, max_goals).into_iter().flatten().collect();
    out.extend(three_way_probs(rates).as_array());
    Ok(out)
}

#[wasm_bindgen]
pub fn convert_odds(home: f64, draw: f64, away: f64, shin: bool) -> Result<Vec<f64>, JsValue> {
    convert_odds_impl(home, draw, away, shin).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn implied_rates(win: f64, draw: f64, loss: f64) -> Result<Vec<f64>, JsValue> {
    implied_rates_impl(win, draw, loss).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn score_matrix(home_rate: f64, away_rate: f64, max_goals: usize) -> Result<Vec<f64>, JsValue> {
    score_matrix_impl(home_rate, away_rate, max_goals).map_err(|e| JsValue::from_str(&e))
}
