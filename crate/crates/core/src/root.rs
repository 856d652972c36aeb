//! Bracketing root finder.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BisectError {
    NoSignChange,
    MaxIterations(Root),
}

/// Bisection on `[lo, hi]`. Stops when `|f(x)| <= ftol`, when the bracket can
/// no longer be split in floating point, or after `max_iter` halvings.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64, max_iter: usize) -> Result<Root, BisectError>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo.abs() <= ftol {
        return Ok(Root { x: lo, fx: flo, iterations: 0 });
    }
    if fhi.abs() <= ftol {
        return Ok(Root { x: hi, fx: fhi, iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(BisectError::NoSignChange);
    }
    let mut best = Root { x: lo, fx: flo, iterations: 0 };
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() < best.fx.abs() {
            best = Root { x: mid, fx: fmid, iterations: it };
        }
        if fmid.abs() <= ftol || mid <= lo || mid >= hi {
            return Ok(Root { x: mid, fx: fmid, iterations: it });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Err(BisectError::MaxIterations(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r.x - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn rejects_unbracketed() {
        assert_eq!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100), Err(BisectError::NoSignChange));
    }

    #[test]
    fn stops_at_float_resolution() {
        // |f| never drops below the tolerance, the bracket collapses instead.
        let r = bisect(|x| if x < 0.3 { 1.0 } else { -1.0 }, 0.0, 1.0, 0.0, 10_000).unwrap();
        assert!((r.x - 0.3).abs() < 1e-15);
    }
}
