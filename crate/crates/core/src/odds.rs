//! Bookmaker odds to coherent three-way probabilities.
//!
//! Two conversions are provided: basic normalization by the booksum, and
//! Shin's procedure, which models the margin as protection against insider
//! traders and solves for the insider rate `z` that makes the implied
//! probabilities coherent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::root::{bisect, BisectError};

/// Width of the Shin `z` search interval.
pub const SHIN_Z_MAX: f64 = 0.5;
/// Target for `|Σπ(z) − 1|` when solving for `z`.
pub const SHIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OddsError {
    #[error("decimal odd {0} is not greater than 1")]
    NonPositiveOdd(f64),
    #[error("inverse odds must be positive and finite, booksum was {0}")]
    DegenerateOdds(f64),
    #[error("insider rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("no insider rate in [0, {SHIN_Z_MAX}] makes the probabilities coherent")]
    NoRoot,
}

/// Which odds-to-probability conversion to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbMethod {
    Basic,
    #[default]
    Shin,
}

impl std::fmt::Display for ProbMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProbMethod::Basic => "basic",
            ProbMethod::Shin => "shin",
        })
    }
}

impl std::str::FromStr for ProbMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(ProbMethod::Basic),
            "shin" => Ok(ProbMethod::Shin),
            other => Err(format!("unknown probability method `{other}`")),
        }
    }
}

/// The three outcomes of a match, from the home side's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Draw,
    Loss,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Win, Outcome::Draw, Outcome::Loss];

    pub fn index(self) -> usize {
        match self {
            Outcome::Win => 0,
            Outcome::Draw => 1,
            Outcome::Loss => 2,
        }
    }

    pub fn from_goals(home: u32, away: u32) -> Self {
        match home.cmp(&away) {
            std::cmp::Ordering::Greater => Outcome::Win,
            std::cmp::Ordering::Equal => Outcome::Draw,
            std::cmp::Ordering::Less => Outcome::Loss,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Win => "H",
            Outcome::Draw => "D",
            Outcome::Loss => "A",
        }
    }
}

/// Quoted decimal odds (payout per unit stake, stake included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecimalOddsTriple {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl DecimalOddsTriple {
    pub fn new(win: f64, draw: f64, loss: f64) -> Result<Self, OddsError> {
        for d in [win, draw, loss] {
            if !(d > 1.0) || !d.is_finite() {
                return Err(OddsError::NonPositiveOdd(d));
            }
        }
        Ok(Self { win, draw, loss })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.win, self.draw, self.loss]
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        self.as_array()[outcome.index()]
    }
}

/// Inverse odds `o_i = 1 / d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsTriple {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl OddsTriple {
    pub fn new(win: f64, draw: f64, loss: f64) -> Self {
        Self { win, draw, loss }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.win, self.draw, self.loss]
    }

    pub fn booksum(&self) -> f64 {
        self.win + self.draw + self.loss
    }

    fn check(&self) -> Result<f64, OddsError> {
        let beta = self.booksum();
        if self.as_array().iter().any(|o| !(*o > 0.0) || !o.is_finite()) || !(beta > 0.0) {
            return Err(OddsError::DegenerateOdds(beta));
        }
        Ok(beta)
    }
}

/// A coherent three-way probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbTriple {
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

impl ProbTriple {
    pub fn new(win: f64, draw: f64, loss: f64) -> Self {
        Self { win, draw, loss }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.win, self.draw, self.loss]
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        self.as_array()[outcome.index()]
    }

    pub fn sum(&self) -> f64 {
        self.win + self.draw + self.loss
    }

    /// Divides every entry by the total so the entries sum to one.
    pub fn renormalized(&self) -> Self {
        let s = self.sum();
        Self::new(self.win / s, self.draw / s, self.loss / s)
    }

    pub fn is_simplex(&self, tol: f64) -> bool {
        self.as_array().iter().all(|p| (0.0..=1.0).contains(p)) && (self.sum() - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShinResult {
    pub probs: ProbTriple,
    pub z: f64,
    /// `|Σπ(z) − 1|` at the returned `z`, before renormalization.
    pub residual: f64,
    /// Set when the booksum was below one and basic normalization was used.
    pub fallback: bool,
}

pub fn invert_decimal_odds(d: DecimalOddsTriple) -> Result<OddsTriple, OddsError> {
    let d = DecimalOddsTriple::new(d.win, d.draw, d.loss)?;
    Ok(OddsTriple::new(1.0 / d.win, 1.0 / d.draw, 1.0 / d.loss))
}

pub fn basic_normalize(o: OddsTriple) -> Result<ProbTriple, OddsError> {
    let beta = o.check()?;
    Ok(ProbTriple::new(o.win / beta, o.draw / beta, o.loss / beta))
}

fn shin_entry(o: f64, beta: f64, z: f64) -> f64 {
    ((z * z + 4.0 * (1.0 - z) * o * o / beta).sqrt() - z) / (2.0 * (1.0 - z))
}

/// Shin's probabilities at a given insider rate, without renormalization.
pub fn shin_probabilities(o: OddsTriple, z: f64) -> Result<ProbTriple, OddsError> {
    if !(0.0..1.0).contains(&z) {
        return Err(OddsError::InvalidRate(z));
    }
    let beta = o.check()?;
    Ok(ProbTriple::new(
        shin_entry(o.win, beta, z),
        shin_entry(o.draw, beta, z),
        shin_entry(o.loss, beta, z),
    ))
}

/// Solves `Σπ(z) = 1` for the insider rate by bisection on `[0, 0.5]`.
pub fn estimate_shin_z(o: OddsTriple) -> Result<ShinResult, OddsError> {
    let beta = o.check()?;
    let excess = |z: f64| {
        let p = shin_probabilities(o, z).expect("z inside [0, 0.5]");
        p.sum() - 1.0
    };

    let g0 = excess(0.0);
    if g0.abs() <= SHIN_TOLERANCE * 1e-2 || (beta - 1.0).abs() <= 1e-12 {
        let probs = basic_normalize(o)?;
        return Ok(ShinResult { probs, z: 0.0, residual: g0.abs(), fallback: false });
    }
    if beta < 1.0 {
        log::warn!("booksum {beta} below one; falling back to basic normalization");
        let probs = basic_normalize(o)?;
        return Ok(ShinResult { probs, z: 0.0, residual: g0.abs(), fallback: true });
    }

    let z = match bisect(excess, 0.0, SHIN_Z_MAX, SHIN_TOLERANCE * 1e-2, 200) {
        Ok(root) => root.x,
        Err(BisectError::NoSignChange) => return Err(OddsError::NoRoot),
        Err(BisectError::MaxIterations(root)) => root.x,
    };
    let raw = shin_probabilities(o, z)?;
    let residual = (raw.sum() - 1.0).abs();
    if residual > SHIN_TOLERANCE {
        return Err(OddsError::NoRoot);
    }
    Ok(ShinResult { probs: raw.renormalized(), z, residual, fallback: false })
}

/// Converts quoted decimal odds with the chosen method.
pub fn decimal_to_probs(d: DecimalOddsTriple, method: ProbMethod) -> Result<ProbTriple, OddsError> {
    let o = invert_decimal_odds(d)?;
    match method {
        ProbMethod::Basic => basic_normalize(o),
        ProbMethod::Shin => estimate_shin_z(o).map(|r| r.probs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_triple(p: ProbTriple, expected: [f64; 3], eps: f64) {
        for (a, b) in p.as_array().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = eps);
        }
    }

    #[test]
    fn inverts_decimal_odds() {
        let o = invert_decimal_odds(DecimalOddsTriple { win: 2.0, draw: 2.0, loss: 2.0 }).unwrap();
        assert_eq!(o.as_array(), [0.5, 0.5, 0.5]);
        let o = invert_decimal_odds(DecimalOddsTriple { win: 1.5, draw: 4.0, loss: 8.0 }).unwrap();
        assert_abs_diff_eq!(o.win, 0.666667, epsilon = 1e-6);
        assert_eq!(o.draw, 0.25);
        assert_eq!(o.loss, 0.125);
        let err = invert_decimal_odds(DecimalOddsTriple { win: 1.0, draw: 3.0, loss: 3.0 });
        assert_eq!(err, Err(OddsError::NonPositiveOdd(1.0)));
    }

    #[test]
    fn basic_examples() {
        let third = 1.0 / 3.0;
        let p = basic_normalize(OddsTriple::new(third, third, third)).unwrap();
        assert_triple(p, [third; 3], 1e-15);
        let p = basic_normalize(OddsTriple::new(0.5, 0.35, 0.25)).unwrap();
        assert_triple(p, [0.454545, 0.318182, 0.227273], 1e-6);
        let p = basic_normalize(OddsTriple::new(0.9, 0.2, 0.1)).unwrap();
        assert_triple(p, [0.75, 0.166667, 0.083333], 1e-6);
        assert!(matches!(
            basic_normalize(OddsTriple::new(0.0, 0.0, 0.0)),
            Err(OddsError::DegenerateOdds(_))
        ));
    }

    #[test]
    fn shin_examples() {
        let p = shin_probabilities(OddsTriple::new(0.5, 0.3, 0.2), 0.0).unwrap();
        assert_triple(p, [0.5, 0.3, 0.2], 1e-15);
        let p = shin_probabilities(OddsTriple::new(0.5, 0.35, 0.25), 0.0).unwrap();
        assert_triple(p, [0.476731, 0.333712, 0.238366], 1e-6);
        for z in [0.0, 0.03, 0.2, 0.49] {
            let p = shin_probabilities(OddsTriple::new(0.4, 0.4, 0.4), z).unwrap();
            assert_eq!(p.win, p.draw);
            assert_eq!(p.draw, p.loss);
        }
        assert_eq!(
            shin_probabilities(OddsTriple::new(0.4, 0.4, 0.4), 1.0),
            Err(OddsError::InvalidRate(1.0))
        );
        assert!(shin_probabilities(OddsTriple::new(0.4, 0.4, 0.4), -0.1).is_err());
    }

    /// Independent bisection on a fine grid of z, used as the reference root.
    fn grid_root(o: OddsTriple) -> f64 {
        let beta = o.booksum();
        let g = |z: f64| {
            o.as_array()
                .iter()
                .map(|&oi| ((z * z + 4.0 * (1.0 - z) * oi * oi / beta).sqrt() - z) / (2.0 * (1.0 - z)))
                .sum::<f64>()
                - 1.0
        };
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn shin_z_examples() {
        let r = estimate_shin_z(OddsTriple::new(0.5, 0.3, 0.2)).unwrap();
        assert_eq!(r.z, 0.0);
        assert!(!r.fallback);
        assert_triple(r.probs, [0.5, 0.3, 0.2], 1e-12);

        let o = OddsTriple::new(0.5, 0.35, 0.25);
        let r = estimate_shin_z(o).unwrap();
        assert!(r.z > 0.0 && r.z < 0.5);
        assert!(r.residual <= 1e-10);
        assert_abs_diff_eq!(r.z, grid_root(o), epsilon = 1e-9);
        let raw = shin_probabilities(o, r.z).unwrap();
        assert_abs_diff_eq!(raw.sum(), 1.0, epsilon = 1e-10);

        let r = estimate_shin_z(OddsTriple::new(0.4, 0.4, 0.4)).unwrap();
        assert_triple(r.probs, [1.0 / 3.0; 3], 1e-12);
        assert!(r.z > 0.0);
    }

    #[test]
    fn shin_sub_fair_book_falls_back() {
        let o = OddsTriple::new(0.45, 0.25, 0.2);
        let r = estimate_shin_z(o).unwrap();
        assert!(r.fallback);
        assert_eq!(r.z, 0.0);
        assert_eq!(r.probs, basic_normalize(o).unwrap());
    }

    #[test]
    fn method_parses() {
        assert_eq!("Shin".parse::<ProbMethod>(), Ok(ProbMethod::Shin));
        assert_eq!("basic".parse::<ProbMethod>(), Ok(ProbMethod::Basic));
        assert!("other".parse::<ProbMethod>().is_err());
    }

    fn overround_triple() -> impl Strategy<Value = OddsTriple> {
        (0.05f64..0.9, 0.05f64..0.9, 0.05f64..0.9, 1.0f64..1.2).prop_map(|(a, b, c, beta)| {
            let s = a + b + c;
            OddsTriple::new(a / s * beta, b / s * beta, c / s * beta)
        })
    }

    proptest! {
        #[test]
        fn basic_is_simplex_and_keeps_order(o in overround_triple()) {
            let p = basic_normalize(o).unwrap();
            prop_assert!((p.sum() - 1.0).abs() <= 1e-12);
            let argmax = |a: [f64; 3]| (0..3).max_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();
            prop_assert_eq!(argmax(p.as_array()), argmax(o.as_array()));
        }

        #[test]
        fn shin_converges_inside_interval(o in overround_triple()) {
            let r = estimate_shin_z(o).unwrap();
            prop_assert!(r.residual <= 1e-10);
            prop_assert!((0.0..0.5).contains(&r.z));
            prop_assert!((r.probs.sum() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn shin_at_zero_is_scaled_odds(o in overround_triple()) {
            let p = shin_probabilities(o, 0.0).unwrap();
            let root = o.booksum().sqrt();
            for (pi, oi) in p.as_array().iter().zip(o.as_array()) {
                prop_assert!((pi - oi / root).abs() <= 1e-12);
            }
        }
    }
}
