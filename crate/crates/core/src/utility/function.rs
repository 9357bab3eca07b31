use super::UtilityError;
use crate::stats::mean_and_se;

/// Increasing concave utility on `(0, ∞)`, extended to 0 by its right limit.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityFn {
    Log,
    /// `(w^{1-γ} - 1) / (1 - γ)` with `γ > 0`, `γ != 1`.
    Crra(f64),
    /// Piecewise-linear interpolation of `(w, U(w))` knots starting at
    /// `w = 0`, extended past the last knot with the last slope.
    PiecewiseConcave(Vec<(f64, f64)>),
}

impl UtilityFn {
    pub fn crra(gamma: f64) -> Result<Self, UtilityError> {
        let u = UtilityFn::Crra(gamma);
        u.validate()?;
        Ok(u)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self, UtilityError> {
        let u = UtilityFn::PiecewiseConcave(knots);
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        match self {
            UtilityFn::Log => Ok(()),
            UtilityFn::Crra(g) => {
                if g.is_finite() && *g > 0.0 && *g != 1.0 {
                    Ok(())
                } else {
                    Err(UtilityError::InvalidUtility(format!(
                        "CRRA risk aversion must be positive and different from 1, got {g}"
                    )))
                }
            }
            UtilityFn::PiecewiseConcave(knots) => {
                let bad = |msg: &str| Err(UtilityError::InvalidUtility(msg.into()));
                if knots.len() < 2 || knots[0].0 != 0.0 {
                    return bad("table needs at least two knots, the first at w = 0");
                }
                if knots.iter().any(|(w, u)| !w.is_finite() || !u.is_finite()) {
                    return bad("table knots must be finite");
                }
                let slopes: Vec<f64> = knots
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .collect();
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("table abscissae must be strictly increasing");
                }
                if slopes.iter().any(|&s| s <= 0.0) {
                    return bad("table must be increasing");
                }
                if slopes.windows(2).any(|s| s[1] > s[0]) {
                    return bad("table must be concave");
                }
                Ok(())
            }
        }
    }

    /// Whether the utility is strictly concave.
    pub fn is_strict(&self) -> bool {
        !matches!(self, UtilityFn::PiecewiseConcave(_))
    }

    /// `U(w)` for `w >= 0`; `U(0)` may be `-∞`.
    pub fn value(&self, w: f64) -> f64 {
        match self {
            UtilityFn::Log => w.ln(),
            UtilityFn::Crra(g) => {
                let g = *g;
                if w == 0.0 {
                    if g > 1.0 {
                        f64::NEG_INFINITY
                    } else {
                        -1.0 / (1.0 - g)
                    }
                } else {
                    (w.powf(1.0 - g) - 1.0) / (1.0 - g)
                }
            }
            UtilityFn::PiecewiseConcave(knots) => {
                let j = knots.partition_point(|k| k.0 <= w).clamp(1, knots.len() - 1);
                let (a, b) = (knots[j - 1], knots[j]);
                a.1 + (w - a.0) * (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    /// Right derivative `U'(w)`.
    pub fn marginal(&self, w: f64) -> f64 {
        match self {
            UtilityFn::Log => 1.0 / w,
            UtilityFn::Crra(g) => w.powf(-g),
            UtilityFn::PiecewiseConcave(knots) => {
                let j = knots.partition_point(|k| k.0 <= w).clamp(1, knots.len() - 1);
                let (a, b) = (knots[j - 1], knots[j]);
                (b.1 - a.1) / (b.0 - a.0)
            }
        }
    }

    /// `w U'(w)`, exactly 1 for log utility.
    pub fn wealth_times_marginal(&self, w: f64) -> f64 {
        match self {
            UtilityFn::Log => 1.0,
            UtilityFn::Crra(g) => w.powf(1.0 - g),
            UtilityFn::PiecewiseConcave(_) => w * self.marginal(w),
        }
    }

    /// `min_c U(c) - (U(c-h) + U(c+h)) / 2` with `h = 1/(2m)` over
    /// `c ∈ [h, m-h]`, the smallest midpoint concavity gap on pairs in
    /// `[0, m]²` at distance at least `1/m`. Grid search.
    pub fn concavity_gap(&self, m: f64) -> f64 {
        const POINTS: usize = 10_001;
        let h = 0.5 / m;
        let (lo, hi) = (h, m - h);
        (0..POINTS)
            .map(|j| {
                let c = lo + (hi - lo) * j as f64 / (POINTS - 1) as f64;
                let gap = self.value(c) - 0.5 * (self.value(c - h) + self.value(c + h));
                if gap.is_nan() {
                    f64::INFINITY
                } else {
                    gap
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `U(w)`.
pub fn evaluate_utility(u: &UtilityFn, w: f64) -> f64 {
    u.value(w)
}

/// Sample estimate of `E[U(X)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityEstimate {
    /// `-∞` as soon as one sample has utility `-∞`.
    pub mean: f64,
    /// Standard error over the finite samples.
    pub se: f64,
    pub neg_inf_hits: usize,
}

pub fn expected_utility(wealths: &[f64], u: &UtilityFn) -> Result<UtilityEstimate, UtilityError> {
    if wealths.len() < 2 {
        return Err(UtilityError::TooFewSamples(wealths.len()));
    }
    let values: Vec<f64> = wealths.iter().map(|&w| u.value(w)).collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let neg_inf_hits = values.iter().filter(|&&v| v == f64::NEG_INFINITY).count();
    let (m, se) = if finite.len() >= 2 {
        mean_and_se(&finite)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(UtilityEstimate {
        mean: if neg_inf_hits > 0 { f64::NEG_INFINITY } else { m },
        se,
        neg_inf_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(evaluate_utility(&UtilityFn::Log, 1.0), 0.0);
        assert_eq!(evaluate_utility(&UtilityFn::Log, 0.0), f64::NEG_INFINITY);
        let crra = UtilityFn::crra(2.0).unwrap();
        assert!((evaluate_utility(&crra, 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(crra.value(0.0), f64::NEG_INFINITY);
        assert_eq!(UtilityFn::crra(0.5).unwrap().value(0.0), -2.0);
        assert!(UtilityFn::crra(1.0).is_err());
        assert!(UtilityFn::crra(-1.0).is_err());
    }

    #[test]
    fn expected_utility_cases() {
        let e = expected_utility(&[1.0; 5], &UtilityFn::Log).unwrap();
        assert_eq!((e.mean, e.se, e.neg_inf_hits), (0.0, 0.0, 0));
        let e = expected_utility(&[1.0, 2f64.exp()], &UtilityFn::Log).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-15);
        let e = expected_utility(&[1.0, 0.0, 2.0], &UtilityFn::Log).unwrap();
        assert_eq!(e.mean, f64::NEG_INFINITY);
        assert_eq!(e.neg_inf_hits, 1);
        assert!(expected_utility(&[], &UtilityFn::Log).is_err());
    }

    #[test]
    fn table_interpolates_and_extends() {
        let u = UtilityFn::piecewise(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.5)]).unwrap();
        assert_eq!(u.value(0.5), 0.5);
        assert_eq!(u.value(1.5), 1.25);
        assert_eq!(u.value(4.0), 2.5);
        assert!(!u.is_strict());
        assert!(UtilityFn::piecewise(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.5)]).is_err());
        assert!(UtilityFn::piecewise(vec![(0.0, 0.0), (1.0, -1.0)]).is_err());
    }

    #[test]
    fn log_weights_are_exactly_one() {
        for w in [1e-9, 0.3, 1.0, 7.5, 1e9] {
            assert_eq!(UtilityFn::Log.wealth_times_marginal(w), 1.0);
        }
    }

    #[test]
    fn concavity_gap_for_log() {
        // The smallest gap sits at the right end of [0, m].
        let m = 2.0;
        let h = 0.25;
        let c: f64 = m - h;
        let expected = c.ln() - 0.5 * ((c - h).ln() + (c + h).ln());
        assert!((UtilityFn::Log.concavity_gap(m) - expected).abs() < 1e-12);
        assert!(UtilityFn::crra(2.0).unwrap().concavity_gap(1.0) > 0.0);
    }
}
