//! Structural classification of optimal policies.
//!
//! The critical discount factor `alpha* = 1 − k_h / c_bar` splits instances
//! into regimes: below it the never-order policy is optimal, above it
//! threshold `(s, S)` behaviour appears after a never-order tail whose length
//! is the depth at which the closed-form stage cost stops being bounded below
//! at −∞.

use serde::{Deserialize, Serialize};

use crate::model::Problem;
use crate::{Count, Error, Horizon, Result, Window};

/// Iteration cap for the geometric-sum criterion. Partial sums that have not
/// crossed the threshold after this many terms are treated as never crossing;
/// the corresponding horizon depth would exceed any horizon this artifact
/// can tabulate.
const TAIL_ITER_CAP: u32 = 1_000_000;

/// Critical discount factor `1 − k_h / c_bar`. Always < 1; negative exactly
/// when some chord of the cost falls faster than the unit ordering cost.
pub fn critical_alpha(p: &Problem) -> f64 {
    1.0 - p.h().backorder_rate() / p.c_bar()
}

/// True when the holding/backorder cost has a chord steeper than `−c_bar`,
/// the classical sufficient condition for threshold policies at every stage.
///
/// Two equivalent routes are computed and cross-checked: a slope of the cost
/// below `−c_bar`, and `k_h > c_bar`.
pub fn steep_backorder_condition(p: &Problem) -> bool {
    let by_slope = p.h().slopes().iter().any(|&s| s < -p.c_bar());
    let by_rate = p.h().backorder_rate() > p.c_bar();
    debug_assert_eq!(by_slope, by_rate);
    by_slope
}

/// Length of the never-order tail: the smallest `t` such that the discounted
/// backorder rate `k_h · Σ_{i=0}^{t} alpha^i` exceeds `c_bar`, i.e. the first
/// depth at which the closed-form stage cost blows up at −∞. `Infinite` when
/// the geometric series never crosses, which happens exactly when
/// `alpha ≤ alpha*` (and `alpha < 1`).
pub fn never_order_tail(p: &Problem) -> Count {
    let alpha = p.alpha();
    let a_star = critical_alpha(p);
    if alpha < 1.0 && alpha <= a_star {
        return Count::Infinite;
    }
    let ratio = p.c_bar() / p.h().backorder_rate();
    let mut sum = 0.0;
    let mut pow = 1.0;
    for t in 0..TAIL_ITER_CAP {
        sum += pow;
        if sum > ratio {
            debug_assert!(alpha > a_star);
            return Count::Finite(t);
        }
        pow *= alpha;
    }
    Count::Infinite
}

/// Closed-form stage cost `c_bar·x + Σ_{i=0}^{t} alpha^i E[h(x − S̄_{i+1})]`
/// where `S̄_j` is the j-fold demand sum. Convex in `x`, non-decreasing in
/// `t`, and equal to the recursive stage cost-to-go for `t` up to the
/// never-order tail length.
pub fn closed_form_stage_cost(p: &Problem, t: u32, x: i64) -> f64 {
    let window = Window { lo: x, hi: x };
    closed_form_stage_cost_table(p, t, window)[t as usize][0]
}

/// Tabulates the closed-form stage cost on `window` for every depth
/// `0..=t_max`; row `t` holds the depth-`t` values. Demand convolutions are
/// built incrementally so the whole table costs one pass.
pub fn closed_form_stage_cost_table(p: &Problem, t_max: u32, window: Window) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t_max as usize + 1);
    let mut sum: Vec<f64> = window.iter().map(|x| p.c_bar() * x as f64).collect();
    let mut conv = p.demand().convolve_power(1);
    let mut discount = 1.0;
    for t in 0..=t_max {
        for (off, x) in window.iter().enumerate() {
            sum[off] += discount * conv.expect(|s| p.h().eval(x - s));
        }
        rows.push(sum.clone());
        if t < t_max {
            conv = conv.convolve(p.demand());
            discount *= p.alpha();
        }
    }
    rows
}

/// Optimal-policy structure for one (instance, horizon) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "SS_ALL_STEPS")]
    SsAllSteps,
    #[serde(rename = "NEVER_ORDER")]
    NeverOrder,
    #[serde(rename = "HYBRID")]
    Hybrid {
        /// Last step that uses an `(s_t, S_t)` rule; steps
        /// `order_steps_end + 1 ..= N − 1` never order.
        order_steps_end: u32,
    },
    #[serde(rename = "SS_STATIONARY")]
    SsStationary,
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Structure::SsAllSteps => write!(f, "SS_ALL_STEPS"),
            Structure::NeverOrder => write!(f, "NEVER_ORDER"),
            Structure::Hybrid { .. } => write!(f, "HYBRID"),
            Structure::SsStationary => write!(f, "SS_STATIONARY"),
        }
    }
}

/// Classification of one instance at one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub alpha_star: f64,
    #[serde(rename = "N_alpha")]
    pub n_alpha: Count,
    #[serde(rename = "condition1")]
    pub steep_backorder: bool,
    pub structure: Structure,
}

/// Maps an instance and horizon to its structural regime.
///
/// Finite horizons accept any `alpha ≥ 0`; the infinite horizon requires
/// `alpha ∈ [0, 1)`. The boundary `alpha = alpha*` classifies as never-order
/// (the never-order interval is closed on the right).
pub fn classify(p: &Problem, horizon: Horizon) -> Result<StructureReport> {
    let alpha_star = critical_alpha(p);
    let steep = steep_backorder_condition(p);
    debug_assert_eq!(steep, alpha_star < 0.0);
    let n_alpha = never_order_tail(p);
    let alpha = p.alpha();

    let structure = match horizon {
        Horizon::Finite(n) => {
            if alpha_star < 0.0 {
                Structure::SsAllSteps
            } else if alpha <= alpha_star {
                Structure::NeverOrder
            } else {
                match n_alpha {
                    Count::Finite(depth) if n > depth => Structure::Hybrid {
                        order_steps_end: n - depth - 1,
                    },
                    _ => Structure::NeverOrder,
                }
            }
        }
        Horizon::Infinite => {
            p.discount_for_infinite()?;
            if alpha > alpha_star {
                Structure::SsStationary
            } else {
                Structure::NeverOrder
            }
        }
    };

    Ok(StructureReport {
        alpha_star,
        n_alpha,
        steep_backorder: steep,
        structure,
    })
}

/// One row of a discount-factor sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub alpha_star: f64,
    pub condition1: bool,
    pub n_alpha: Count,
    pub finite_structure: Structure,
    pub infinite_structure: Structure,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "alpha,alpha_star,condition1,N_alpha,finite_structure,order_steps_end,infinite_structure";

    pub fn csv_line(&self) -> String {
        let end = match self.finite_structure {
            Structure::Hybrid { order_steps_end } => order_steps_end.to_string(),
            _ => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{}",
            self.alpha,
            self.alpha_star,
            self.condition1,
            self.n_alpha,
            self.finite_structure,
            end,
            self.infinite_structure
        )
    }
}

/// Classifies the instance across a grid of discount factors (each must lie
/// in `[0, 1)`) at the given finite horizon, pairing the finite-horizon and
/// infinite-horizon structures; the data behind a regime diagram.
pub fn alpha_sweep(p: &Problem, alphas: &[f64], n: u32) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::DiscountOutOfRange(alpha));
        }
        let q = p.with_alpha(alpha)?;
        let fin = classify(&q, Horizon::Finite(n))?;
        let inf = classify(&q, Horizon::Infinite)?;
        rows.push(SweepRow {
            alpha,
            alpha_star: fin.alpha_star,
            condition1: fin.steep_backorder,
            n_alpha: fin.n_alpha,
            finite_structure: fin.structure,
            infinite_structure: inf.structure,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlConvex, Pmf};

    fn problem(k: f64, c_bar: f64, back: f64, hold: f64, alpha: f64) -> Problem {
        Problem::new(
            k,
            c_bar,
            PlConvex::new(vec![0], vec![-back, hold]).unwrap(),
            Pmf::new([(1, 0.5), (2, 0.5)]).unwrap(),
            alpha,
        )
        .unwrap()
    }

    /// Instance A: K=5, c_bar=1, h = 2x⁺ + 3x⁻.
    fn instance_a(alpha: f64) -> Problem {
        problem(5.0, 1.0, 3.0, 2.0, alpha)
    }

    /// Instance B: K=5, c_bar=2, h = 2x⁺ + 1x⁻, so alpha* = 0.5.
    fn instance_b(alpha: f64) -> Problem {
        problem(5.0, 2.0, 1.0, 2.0, alpha)
    }

    #[test]
    fn critical_alpha_examples() {
        assert_eq!(critical_alpha(&instance_a(0.9)), -2.0);
        assert_eq!(critical_alpha(&instance_b(0.9)), 0.5);
        assert_eq!(critical_alpha(&problem(1.0, 2.0, 2.0, 1.0, 0.5)), 0.0);
    }

    #[test]
    fn steep_backorder_examples() {
        assert!(steep_backorder_condition(&instance_a(0.5)));
        assert!(!steep_backorder_condition(&instance_b(0.5)));
        // Boundary k_h = c_bar is not steep.
        assert!(!steep_backorder_condition(&problem(1.0, 2.0, 2.0, 1.0, 0.5)));
    }

    #[test]
    fn never_order_tail_examples() {
        assert_eq!(never_order_tail(&instance_b(0.8)), Count::Finite(2));
        assert_eq!(never_order_tail(&instance_b(0.3)), Count::Infinite);
        assert_eq!(never_order_tail(&instance_b(1.0)), Count::Finite(2));
        assert_eq!(never_order_tail(&instance_b(1.2)), Count::Finite(1));
        // Depth is zero whenever the steep-backorder condition holds.
        assert_eq!(never_order_tail(&instance_a(0.0)), Count::Finite(0));
        // Boundary alpha = alpha* stays infinite (partial sums never cross).
        assert_eq!(never_order_tail(&instance_b(0.5)), Count::Infinite);
    }

    #[test]
    fn tail_is_non_increasing_in_alpha() {
        let mut prev = never_order_tail(&instance_b(0.05));
        for i in 1..=19 {
            let cur = never_order_tail(&instance_b(i as f64 * 0.05));
            assert!(cur <= prev, "alpha = {}", i as f64 * 0.05);
            prev = cur;
        }
    }

    #[test]
    fn closed_form_examples() {
        // Depth 0 equals the no-order one-step cost.
        let a = instance_a(0.95);
        assert!((closed_form_stage_cost(&a, 0, 0) - 4.5).abs() < 1e-12);
        assert!(
            (closed_form_stage_cost(&a, 0, 0) - a.one_step_cost(0, 0).unwrap()).abs() < 1e-12
        );

        // Instance B at alpha = 0.3: E[S̄_1] + 0.3·E[S̄_2] = 1.5 + 0.9.
        let b = instance_b(0.3);
        assert!((closed_form_stage_cost(&b, 1, 0) - 2.4).abs() < 1e-12);

        // alpha = 0 collapses every depth to depth zero.
        let z = instance_b(0.0);
        for t in 0..5 {
            assert_eq!(
                closed_form_stage_cost(&z, t, -3),
                closed_form_stage_cost(&z, 0, -3)
            );
        }
    }

    #[test]
    fn closed_form_is_convex_and_monotone_in_depth() {
        let b = instance_b(0.8);
        let window = Window { lo: -12, hi: 12 };
        let table = closed_form_stage_cost_table(&b, 6, window);
        for t in 0..=6usize {
            for off in 1..window.len() - 1 {
                let second = table[t][off + 1] - 2.0 * table[t][off] + table[t][off - 1];
                assert!(second >= -1e-9, "t = {t}, off = {off}");
            }
            if t > 0 {
                for off in 0..window.len() {
                    assert!(table[t][off] >= table[t - 1][off] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn classify_finite_examples() {
        let r = classify(&instance_a(0.95), Horizon::Finite(5)).unwrap();
        assert_eq!(r.structure, Structure::SsAllSteps);
        assert!(r.steep_backorder && r.alpha_star < 0.0);

        let r = classify(&instance_b(0.3), Horizon::Finite(10)).unwrap();
        assert_eq!(r.structure, Structure::NeverOrder);

        let r = classify(&instance_b(0.8), Horizon::Finite(5)).unwrap();
        assert_eq!(r.n_alpha, Count::Finite(2));
        assert_eq!(r.structure, Structure::Hybrid { order_steps_end: 2 });

        // Horizon not exceeding the tail: never order.
        let r = classify(&instance_b(0.8), Horizon::Finite(2)).unwrap();
        assert_eq!(r.structure, Structure::NeverOrder);
    }

    #[test]
    fn classify_infinite_examples() {
        let r = classify(&instance_b(0.3), Horizon::Infinite).unwrap();
        assert_eq!(r.structure, Structure::NeverOrder);
        let r = classify(&instance_b(0.8), Horizon::Infinite).unwrap();
        assert_eq!(r.structure, Structure::SsStationary);
        // Closed interval at the boundary.
        let r = classify(&instance_b(0.5), Horizon::Infinite).unwrap();
        assert_eq!(r.structure, Structure::NeverOrder);
        let r = classify(&instance_a(0.9), Horizon::Infinite).unwrap();
        assert_eq!(r.structure, Structure::SsStationary);

        assert!(classify(&instance_b(1.0), Horizon::Infinite).is_err());
    }

    #[test]
    fn report_serialization_schema() {
        let r = classify(&instance_b(0.8), Horizon::Finite(5)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["alpha_star"], 0.5);
        assert_eq!(json["N_alpha"], 2);
        assert_eq!(json["condition1"], false);
        assert_eq!(json["structure"]["HYBRID"]["order_steps_end"], 2);

        let r = classify(&instance_b(0.3), Horizon::Infinite).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["N_alpha"], "inf");
        assert_eq!(json["structure"], "NEVER_ORDER");

        // Round-trip.
        let back: StructureReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.structure, Structure::NeverOrder);
        assert_eq!(back.n_alpha, Count::Infinite);
    }
}
