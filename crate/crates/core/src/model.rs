//! Problem instances: piecewise-linear convex holding/backorder cost,
//! finite-support demand distributions and their convolutions, and the
//! one-step ordering cost `K·1{a>0} + c_bar·a + E[h(x + a − D)]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probabilities must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// Piecewise-linear convex cost on the integers, anchored at `h(0) = 0`.
///
/// `slopes[j]` applies on the segment between `breakpoints[j-1]` and
/// `breakpoints[j]`; the leftmost segment extends to −∞ and the rightmost to
/// +∞, so there is one more slope than breakpoints. The leftmost slope is
/// negative and the rightmost positive, which forces `h(x) → ∞` as `|x| → ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlConvex {
    breakpoints: Vec<i64>,
    slopes: Vec<f64>,
}

impl PlConvex {
    pub fn new(breakpoints: Vec<i64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidCostFunction(
                "at least one breakpoint is required".into(),
            ));
        }
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidCostFunction(format!(
                "expected {} slopes for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                slopes.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCostFunction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidCostFunction("slopes must be finite".into()));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidCostFunction(
                "slopes must be non-decreasing (convexity)".into(),
            ));
        }
        if slopes[0] >= 0.0 {
            return Err(Error::InvalidCostFunction(
                "leftmost slope must be negative".into(),
            ));
        }
        if *slopes.last().unwrap() <= 0.0 {
            return Err(Error::InvalidCostFunction(
                "rightmost slope must be positive".into(),
            ));
        }
        let h = PlConvex { breakpoints, slopes };
        // The global minimum of a piecewise-linear convex function that grows
        // at both ends is attained at a breakpoint; h(0) = 0 by construction,
        // so checking the breakpoints pins h ≥ 0 everywhere.
        for &b in &h.breakpoints {
            if h.eval(b) < -1e-9 {
                return Err(Error::InvalidCostFunction(format!(
                    "cost is negative at x = {b} (h must be non-negative with h(0) = 0)"
                )));
            }
        }
        Ok(h)
    }

    /// Cost of holding `x` units (backorders when `x < 0`).
    pub fn eval(&self, x: i64) -> f64 {
        // Exact signed integral of the piecewise-constant derivative from 0
        // to x; h(0) = 0 is the anchor.
        let (a, b, sign) = if x >= 0 { (0, x, 1.0) } else { (x, 0, -1.0) };
        let mut total = 0.0;
        for (j, &slope) in self.slopes.iter().enumerate() {
            let seg_lo = if j == 0 { a } else { self.breakpoints[j - 1].max(a) };
            let seg_hi = if j == self.slopes.len() - 1 {
                b
            } else {
                self.breakpoints[j].min(b)
            };
            if seg_lo < seg_hi {
                total += slope * (seg_hi - seg_lo) as f64;
            }
        }
        sign * total
    }

    /// Slope of the chord between `y` and `z`: `(h(y) − h(z)) / (y − z)`.
    ///
    /// Non-decreasing in each argument with the other fixed.
    pub fn chord_slope(&self, y: i64, z: i64) -> Result<f64> {
        if y == z {
            return Err(Error::DegenerateChord(y));
        }
        Ok((self.eval(y) - self.eval(z)) / (y - z) as f64)
    }

    /// Asymptotic per-unit backorder rate `−lim_{x→−∞} h(x)/x`, i.e. the
    /// negated leftmost slope. Strictly positive and finite for this
    /// representation.
    pub fn backorder_rate(&self) -> f64 {
        -self.slopes[0]
    }

    pub fn breakpoints(&self) -> &[i64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }
}

/// Sparse probability mass function on the non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Vec<(i64, f64)>, // sorted by value, probabilities in (0, 1]
}

impl Pmf {
    /// Build a demand distribution. Values must be distinct non-negative
    /// integers, probabilities must lie in (0, 1] and sum to one within
    /// [`PROB_TOL`], and some positive value must carry positive mass.
    pub fn new(pairs: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut support: Vec<(i64, f64)> = pairs.into_iter().collect();
        support.sort_by_key(|&(v, _)| v);
        if support.is_empty() {
            return Err(Error::InvalidDemand("empty support".into()));
        }
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDemand("duplicate support values".into()));
        }
        if support[0].0 < 0 {
            return Err(Error::InvalidDemand(format!(
                "negative demand value {}",
                support[0].0
            )));
        }
        if support
            .iter()
            .any(|&(_, p)| !(p > 0.0 && p <= 1.0) || !p.is_finite())
        {
            return Err(Error::InvalidDemand(
                "probabilities must lie in (0, 1]".into(),
            ));
        }
        let total: f64 = support.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDemand(format!(
                "probabilities sum to {total}, expected 1 within {PROB_TOL}"
            )));
        }
        if !support.iter().any(|&(v, _)| v > 0) {
            return Err(Error::InvalidDemand(
                "P(D > 0) must be positive".into(),
            ));
        }
        Ok(Pmf { support })
    }

    fn from_sorted_unchecked(support: Vec<(i64, f64)>) -> Self {
        Pmf { support }
    }

    pub fn support(&self) -> &[(i64, f64)] {
        &self.support
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn min_value(&self) -> i64 {
        self.support[0].0
    }

    pub fn max_value(&self) -> i64 {
        self.support.last().unwrap().0
    }

    /// Expectation of `f` under this distribution, as an exact finite sum.
    pub fn expect(&self, mut f: impl FnMut(i64) -> f64) -> f64 {
        self.support.iter().map(|&(v, p)| p * f(v)).sum()
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
        for &(v, p) in &self.support {
            for &(w, q) in &other.support {
                *acc.entry(v + w).or_insert(0.0) += p * q;
            }
        }
        Pmf::from_sorted_unchecked(acc.into_iter().collect())
    }

    /// Exact distribution of the `t`-fold sum of i.i.d. draws; `t = 0` gives
    /// the point mass at zero (the empty sum).
    pub fn convolve_power(&self, t: u32) -> Pmf {
        let mut acc = Pmf::from_sorted_unchecked(vec![(0, 1.0)]);
        for _ in 0..t {
            acc = acc.convolve(self);
        }
        acc
    }
}

/// One instance of the inventory control problem.
#[derive(Debug, Clone)]
pub struct Problem {
    k: f64,
    c_bar: f64,
    h: PlConvex,
    demand: Pmf,
    alpha: f64,
}

impl Problem {
    pub fn new(k: f64, c_bar: f64, h: PlConvex, demand: Pmf, alpha: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "fixed ordering cost K must be positive, got {k}"
            )));
        }
        if !(c_bar > 0.0) || !c_bar.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "unit ordering cost c_bar must be positive, got {c_bar}"
            )));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "discount factor must be non-negative, got {alpha}"
            )));
        }
        Ok(Problem { k, c_bar, h, demand, alpha })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    pub fn h(&self) -> &PlConvex {
        &self.h
    }

    pub fn demand(&self) -> &Pmf {
        &self.demand
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same instance with a different discount factor.
    pub fn with_alpha(&self, alpha: f64) -> Result<Problem> {
        Problem::new(self.k, self.c_bar, self.h.clone(), self.demand.clone(), alpha)
    }

    /// The discount factor, checked against the infinite-horizon requirement
    /// `alpha ∈ [0, 1)`.
    pub fn discount_for_infinite(&self) -> Result<f64> {
        if self.alpha >= 1.0 {
            return Err(Error::DiscountOutOfRange(self.alpha));
        }
        Ok(self.alpha)
    }

    /// `E[h(x − D)]`, exact over the demand support.
    pub fn expected_holding(&self, x: i64) -> f64 {
        self.demand.expect(|d| self.h.eval(x - d))
    }

    /// One-step cost of ordering `a ≥ 0` units at inventory level `x`.
    pub fn one_step_cost(&self, x: i64, a: i64) -> Result<f64> {
        if a < 0 {
            return Err(Error::NegativeOrder(a));
        }
        let fixed = if a > 0 { self.k } else { 0.0 };
        Ok(fixed + self.c_bar * a as f64 + self.expected_holding(x + a))
    }
}

/// JSON schema for a cost function: breakpoints plus one slope per segment.
/// The anchor `h(0) = 0` is implicit and not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSpec {
    pub breakpoints: Vec<i64>,
    pub slopes: Vec<f64>,
}

/// JSON problem document, e.g.
/// `{"K": 5.0, "c_bar": 1.0, "h": {"breakpoints": [0], "slopes": [-3.0, 2.0]},
///   "demand": {"1": 0.5, "2": 0.5}, "alpha": 0.95}`.
/// Demand keys are decimal-integer strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(rename = "K")]
    pub k: f64,
    pub c_bar: f64,
    pub h: CostSpec,
    pub demand: BTreeMap<String, f64>,
    pub alpha: f64,
}

impl ProblemSpec {
    pub fn into_problem(self) -> Result<Problem> {
        let h = PlConvex::new(self.h.breakpoints, self.h.slopes)?;
        let mut pairs = Vec::with_capacity(self.demand.len());
        for (key, p) in self.demand {
            let v: i64 = key
                .parse()
                .map_err(|_| Error::Spec(format!("demand key {key:?} is not an integer")))?;
            pairs.push((v, p));
        }
        let demand = Pmf::new(pairs)?;
        Problem::new(self.k, self.c_bar, h, demand, self.alpha)
    }
}

impl Problem {
    pub fn from_json(json: &str) -> Result<Problem> {
        let spec: ProblemSpec =
            serde_json::from_str(json).map_err(|e| Error::Spec(e.to_string()))?;
        spec.into_problem()
    }

    pub fn to_spec(&self) -> ProblemSpec {
        ProblemSpec {
            k: self.k,
            c_bar: self.c_bar,
            h: CostSpec {
                breakpoints: self.h.breakpoints.clone(),
                slopes: self.h.slopes.clone(),
            },
            demand: self
                .demand
                .support()
                .iter()
                .map(|&(v, p)| (v.to_string(), p))
                .collect(),
            alpha: self.alpha,
        }
    }
}
