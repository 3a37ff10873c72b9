//! Markov deterministic policies: exact discounted-cost evaluation by
//! backward recursion (no minimization) and seeded Monte Carlo simulation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{InfiniteRegime, ValueTable};
use crate::model::Problem;
use crate::{Error, Horizon, Result, Window};

/// Per-step decision rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageRule {
    NeverOrder,
    Threshold {
        s: i64,
        #[serde(rename = "S")]
        order_up_to: i64,
    },
    Table {
        x_lo: i64,
        actions: Vec<i64>,
    },
}

impl StageRule {
    /// Order quantity at `x`, or `None` when a table rule does not cover `x`.
    pub fn action(&self, x: i64) -> Option<i64> {
        match self {
            StageRule::NeverOrder => Some(0),
            StageRule::Threshold { s, order_up_to } => {
                Some(if x < *s { *order_up_to - x } else { 0 })
            }
            StageRule::Table { x_lo, actions } => {
                let off = x.checked_sub(*x_lo)?;
                if (0..actions.len() as i64).contains(&off) {
                    Some(actions[off as usize])
                } else {
                    None
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StageRule::NeverOrder => Ok(()),
            StageRule::Threshold { s, order_up_to } => {
                if s > order_up_to {
                    Err(Error::PolicyMismatch(format!(
                        "threshold rule requires s ≤ S, got s = {s}, S = {order_up_to}"
                    )))
                } else {
                    Ok(())
                }
            }
            StageRule::Table { actions, .. } => {
                if actions.iter().any(|&a| a < 0) {
                    Err(Error::PolicyMismatch("table actions must be non-negative".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Highest order-up-to level the rule can reach from a covered state.
    fn top_level(&self) -> Option<i64> {
        match self {
            StageRule::NeverOrder => None,
            StageRule::Threshold { order_up_to, .. } => Some(*order_up_to),
            StageRule::Table { x_lo, actions } => actions
                .iter()
                .enumerate()
                .map(|(i, &a)| x_lo + i as i64 + a)
                .max(),
        }
    }
}

/// A Markov deterministic policy: one rule per step for a finite horizon, or
/// a single stationary rule for the infinite horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub horizon: Horizon,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<StageRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StageRule>,
}

impl Policy {
    pub fn finite(stages: Vec<StageRule>) -> Result<Policy> {
        let pol = Policy {
            horizon: Horizon::Finite(stages.len() as u32),
            stages,
            stationary: None,
        };
        pol.validate()?;
        Ok(pol)
    }

    pub fn stationary(rule: StageRule) -> Result<Policy> {
        let pol = Policy {
            horizon: Horizon::Infinite,
            stages: Vec::new(),
            stationary: Some(rule),
        };
        pol.validate()?;
        Ok(pol)
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Finite(n) => {
                if self.stages.len() != n as usize {
                    return Err(Error::PolicyMismatch(format!(
                        "policy declares horizon {n} but has {} stage rules",
                        self.stages.len()
                    )));
                }
                if self.stationary.is_some() {
                    return Err(Error::PolicyMismatch(
                        "finite-horizon policy must not carry a stationary rule".into(),
                    ));
                }
            }
            Horizon::Infinite => {
                if self.stationary.is_none() {
                    return Err(Error::PolicyMismatch(
                        "infinite-horizon policy requires a stationary rule".into(),
                    ));
                }
                if !self.stages.is_empty() {
                    return Err(Error::PolicyMismatch(
                        "infinite-horizon policy must not carry stage rules".into(),
                    ));
                }
            }
        }
        for rule in self.stages.iter().chain(self.stationary.iter()) {
            rule.validate()?;
        }
        Ok(())
    }

    /// Rule applied at step `step`, or `None` when the policy is too short.
    pub fn rule_at(&self, step: usize) -> Option<&StageRule> {
        match self.horizon {
            Horizon::Finite(_) => self.stages.get(step),
            Horizon::Infinite => self.stationary.as_ref(),
        }
    }

    fn check_covers(&self, n: u32) -> Result<()> {
        self.validate()?;
        if let Horizon::Finite(m) = self.horizon {
            if m < n {
                return Err(Error::PolicyMismatch(format!(
                    "policy covers {m} steps but {n} were requested"
                )));
            }
        }
        Ok(())
    }
}

/// Exact expected discounted cost of following `pol` for `n` steps from
/// every start state in `query`, by backward policy evaluation with exact
/// demand expectations.
pub fn evaluate_exact_window(
    p: &Problem,
    pol: &Policy,
    query: Window,
    n: u32,
) -> Result<Vec<f64>> {
    pol.check_covers(n)?;
    if n == 0 {
        return Ok(vec![0.0; query.len()]);
    }
    let d_max = p.demand().max_value();
    let mut top = query.hi;
    for step in 0..n as usize {
        if let Some(t) = pol.rule_at(step).and_then(|r| r.top_level()) {
            top = top.max(t);
        }
    }

    // u_j tabulated on [query.lo − j·d_max, top]; `None` marks states whose
    // evaluation needs a state some table rule does not cover.
    let mut hole: Option<(i64, usize)> = None;
    let mut u_next: Vec<Option<f64>> = Vec::new();
    let mut w_next = Window::new(query.lo - n as i64 * d_max, top)?;
    u_next.resize(w_next.len(), Some(0.0));

    for step in (0..n as usize).rev() {
        let w = Window::new(query.lo - step as i64 * d_max, top)?;
        let rule = pol.rule_at(step).expect("coverage checked");
        let mut u: Vec<Option<f64>> = Vec::with_capacity(w.len());
        for x in w.iter() {
            let Some(a) = rule.action(x) else {
                if hole.is_none() {
                    hole = Some((x, step));
                }
                u.push(None);
                continue;
            };
            let y = x + a;
            debug_assert!(y <= top);
            let mut future = 0.0;
            let mut covered = true;
            for &(d, prob) in p.demand().support() {
                match u_next[w_next.offset(y - d)] {
                    Some(val) => future += prob * val,
                    None => {
                        covered = false;
                        break;
                    }
                }
            }
            if covered {
                let cost = p.one_step_cost(x, a)?;
                u.push(Some(cost + p.alpha() * future));
            } else {
                u.push(None);
            }
        }
        u_next = u;
        w_next = w;
    }

    query
        .iter()
        .map(|x| {
            u_next[w_next.offset(x)].ok_or_else(|| {
                let (state, step) = hole.unwrap_or((x, 0));
                Error::PolicyCoverage { state, step }
            })
        })
        .collect()
}

/// [`evaluate_exact_window`] at a single start state.
pub fn evaluate_exact(p: &Problem, pol: &Policy, x0: i64, n: u32) -> Result<f64> {
    Ok(evaluate_exact_window(p, pol, Window::new(x0, x0)?, n)?[0])
}

/// Monte Carlo estimate of a policy's discounted cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_cost: f64,
    /// Sample standard deviation over √n_paths; zero for a single path.
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Bias bound from truncating an infinite-horizon policy at `n` steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_path: Option<Vec<f64>>,
}

impl SimResult {
    pub fn without_paths(mut self) -> SimResult {
        self.per_path = None;
        self
    }
}

/// Simulates `n_paths` trajectories of `n` steps from `x0`, sampling demand
/// by inverse CDF from a counter-based stream so the result is
/// bit-reproducible for a given seed regardless of scheduling. Realized
/// holding costs are accrued, so a point-mass demand yields zero variance.
pub fn simulate(
    p: &Problem,
    pol: &Policy,
    x0: i64,
    n: u32,
    n_paths: u64,
    seed: u64,
) -> Result<SimResult> {
    if n_paths == 0 {
        return Err(Error::PolicyMismatch("at least one path is required".into()));
    }
    pol.check_covers(n)?;

    let mut cdf: Vec<(i64, f64)> = Vec::with_capacity(p.demand().support().len());
    let mut acc = 0.0;
    for &(v, prob) in p.demand().support() {
        acc += prob;
        cdf.push((v, acc));
    }

    let mut costs = Vec::with_capacity(n_paths as usize);
    for path in 0..n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let mut x = x0;
        let mut disc = 1.0;
        let mut total = 0.0;
        for step in 0..n as usize {
            let rule = pol.rule_at(step).expect("coverage checked");
            let a = rule
                .action(x)
                .ok_or(Error::PolicyCoverage { state: x, step })?;
            let u: f64 = rng.random();
            let d = cdf
                .iter()
                .find(|&&(_, c)| u < c)
                .map(|&(v, _)| v)
                .unwrap_or_else(|| cdf.last().unwrap().0);
            let fixed = if a > 0 { p.k() } else { 0.0 };
            total += disc * (fixed + p.c_bar() * a as f64 + p.h().eval(x + a - d));
            disc *= p.alpha();
            x = x + a - d;
        }
        costs.push(total);
    }

    let mean = costs.iter().sum::<f64>() / n_paths as f64;
    let std_error = if n_paths > 1 {
        let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / (n_paths as f64 - 1.0);
        (var / n_paths as f64).sqrt()
    } else {
        0.0
    };

    let truncation_bound = match pol.horizon {
        Horizon::Infinite => truncation_bound(p, pol.stationary.as_ref().unwrap(), x0, n)?,
        Horizon::Finite(_) => None,
    };

    Ok(SimResult {
        mean_cost: mean,
        std_error,
        n_paths,
        seed,
        truncation_bound,
        per_path: Some(costs),
    })
}

/// Discounted cost of steps beyond `n` under a stationary rule, bounded by a
/// per-step cost ceiling.
fn truncation_bound(p: &Problem, rule: &StageRule, x0: i64, n: u32) -> Result<Option<f64>> {
    let alpha = p.discount_for_infinite()?;
    let d_max = p.demand().max_value();
    let bound = match rule {
        StageRule::Threshold { s, order_up_to } => {
            // Order-up levels stay within [s, max(x0, S)].
            let peak = x0.max(*order_up_to);
            let m1 = p.expected_holding(*s) + p.expected_holding(peak);
            let m2 = p.c_bar()
                * ((order_up_to - s + d_max) as f64).max((order_up_to - x0) as f64).max(0.0);
            let m3 = p.k() + m1 + m2;
            Some(alpha.powi(n as i32) * m3 / (1.0 - alpha))
        }
        StageRule::NeverOrder => {
            // E[h(x0 − S̄_{t+1})] ≤ h(x0) + k_h·(t+1)·E[D].
            let kh = p.h().backorder_rate();
            let mean = p.demand().mean();
            let hx = p.h().eval(x0);
            let tail_weighted = {
                // Σ_{t≥n} (t+1) alpha^t
                let a_n = alpha.powi(n as i32);
                ((n as f64 + 1.0) * a_n * (1.0 - alpha) + a_n * alpha)
                    / ((1.0 - alpha) * (1.0 - alpha))
            };
            Some(hx * alpha.powi(n as i32) / (1.0 - alpha) + kh * mean * tail_weighted)
        }
        StageRule::Table { .. } => None,
    };
    Ok(bound)
}

/// Policy induced by a solved value table: the rule at step `t` of the
/// `N`-horizon policy is the extracted rule of backward-induction stage
/// `N − t − 1` (threshold where the stage orders, never-order otherwise).
pub fn induced_policy(vt: &ValueTable) -> Policy {
    let n = vt.horizon();
    let mut stages = Vec::with_capacity(n as usize);
    for step in 0..n {
        let stage = vt.stage(n - step - 1);
        let rule = match stage.thresholds {
            Some(pair) => StageRule::Threshold {
                s: pair.s,
                order_up_to: pair.order_up_to,
            },
            None => StageRule::NeverOrder,
        };
        stages.push(rule);
    }
    Policy::finite(stages).expect("stage thresholds satisfy s ≤ S")
}

/// Stationary policy induced by an infinite-horizon solution.
pub fn induced_stationary_policy(regime: InfiniteRegime) -> Policy {
    let rule = match regime {
        InfiniteRegime::Stationary(pair) => StageRule::Threshold {
            s: pair.s,
            order_up_to: pair.order_up_to,
        },
        InfiniteRegime::NeverOrder => StageRule::NeverOrder,
    };
    Policy::stationary(rule).expect("thresholds satisfy s ≤ S")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::solve_finite;
    use crate::model::{PlConvex, Pmf};

    fn instance_a(alpha: f64) -> Problem {
        Problem::new(
            5.0,
            1.0,
            PlConvex::new(vec![0], vec![-3.0, 2.0]).unwrap(),
            Pmf::new([(1, 0.5), (2, 0.5)]).unwrap(),
            alpha,
        )
        .unwrap()
    }

    fn instance_b(alpha: f64) -> Problem {
        Problem::new(
            5.0,
            2.0,
            PlConvex::new(vec![0], vec![-1.0, 2.0]).unwrap(),
            Pmf::new([(1, 0.5), (2, 0.5)]).unwrap(),
            alpha,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_exact_examples() {
        let p = instance_a(0.95);
        let never = Policy::finite(vec![StageRule::NeverOrder]).unwrap();
        assert!((evaluate_exact(&p, &never, 0, 1).unwrap() - 4.5).abs() < 1e-12);

        let thresh = Policy::finite(vec![StageRule::Threshold { s: -1, order_up_to: 1 }]).unwrap();
        assert!((evaluate_exact(&p, &thresh, -2, 1).unwrap() - 9.5).abs() < 1e-12);

        let empty = Policy::finite(vec![]).unwrap();
        assert_eq!(evaluate_exact(&p, &empty, 3, 0).unwrap(), 0.0);
    }

    #[test]
    fn induced_policy_matches_dp_values() {
        let p = instance_a(0.9);
        let query = Window::new(-5, 5).unwrap();
        let vt = solve_finite(&p, 5, query).unwrap();
        let pol = induced_policy(&vt);
        assert_eq!(pol.stages.len(), 5);
        assert!(pol.stages.iter().all(|r| matches!(r, StageRule::Threshold { .. })));
        let values = evaluate_exact_window(&p, &pol, query, 5).unwrap();
        for (off, x) in query.iter().enumerate() {
            assert!((values[off] - vt.v(5, x).unwrap()).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn induced_policy_step_reversal_and_hybrid_shape() {
        let p = instance_b(0.8);
        let vt = solve_finite(&p, 5, Window::new(-8, 8).unwrap()).unwrap();
        let pol = induced_policy(&vt);
        // Never-order tail of length 2: threshold rules early, none late.
        for step in 0..3 {
            assert!(matches!(pol.stages[step], StageRule::Threshold { .. }), "step {step}");
        }
        for step in 3..5 {
            assert_eq!(pol.stages[step], StageRule::NeverOrder);
        }

        let vt1 = solve_finite(&p.with_alpha(0.9).unwrap(), 1, Window::new(-2, 2).unwrap()).unwrap();
        assert_eq!(induced_policy(&vt1).stages.len(), 1);
    }

    #[test]
    fn competitor_policies_never_beat_dp() {
        let p = instance_a(0.9);
        let query = Window::new(-4, 4).unwrap();
        let n = 4;
        let vt = solve_finite(&p, n, query).unwrap();
        let base = induced_policy(&vt);
        let optimal = evaluate_exact_window(&p, &base, query, n).unwrap();

        let mut rivals: Vec<Policy> = vec![Policy::finite(vec![StageRule::NeverOrder; 4]).unwrap()];
        for ds in [-1i64, 1] {
            for dcap in [-1i64, 0, 1] {
                let stages: Vec<StageRule> = base
                    .stages
                    .iter()
                    .map(|r| match r {
                        StageRule::Threshold { s, order_up_to } => StageRule::Threshold {
                            s: s + ds,
                            order_up_to: (order_up_to + dcap).max(s + ds),
                        },
                        other => other.clone(),
                    })
                    .collect();
                rivals.push(Policy::finite(stages).unwrap());
            }
        }

        for rival in &rivals {
            let cost = evaluate_exact_window(&p, rival, query, n).unwrap();
            for off in 0..query.len() {
                assert!(cost[off] >= optimal[off] - 1e-9);
            }
        }
    }

    #[test]
    fn table_rule_coverage_errors() {
        let p = instance_a(0.9);
        let pol = Policy::finite(vec![StageRule::Table { x_lo: 0, actions: vec![0, 0, 0] }]).unwrap();
        // Start below the table: uncovered immediately.
        assert!(matches!(
            evaluate_exact(&p, &pol, -1, 1),
            Err(Error::PolicyCoverage { .. })
        ));
        assert!((evaluate_exact(&p, &pol, 2, 1).unwrap()
            - p.one_step_cost(2, 0).unwrap())
        .abs()
            < 1e-12);
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let p = instance_a(0.9);
        let pol = Policy::finite(vec![StageRule::NeverOrder; 2]).unwrap();
        assert!(matches!(
            evaluate_exact(&p, &pol, 0, 3),
            Err(Error::PolicyMismatch(_))
        ));
        assert!(evaluate_exact(&p, &pol, 0, 2).is_ok());
        // n below the policy horizon uses the leading rules.
        assert!(evaluate_exact(&p, &pol, 0, 1).is_ok());
    }

    #[test]
    fn simulation_is_deterministic_and_consistent() {
        let p = instance_a(0.9);
        let vt = solve_finite(&p, 5, Window::new(-3, 3).unwrap()).unwrap();
        let pol = induced_policy(&vt);
        let exact = evaluate_exact(&p, &pol, 0, 5).unwrap();

        let r1 = simulate(&p, &pol, 0, 5, 20_000, 7).unwrap();
        let r2 = simulate(&p, &pol, 0, 5, 20_000, 7).unwrap();
        assert_eq!(r1, r2);
        assert!((r1.mean_cost - exact).abs() <= 5.0 * r1.std_error);

        let r3 = simulate(&p, &pol, 0, 5, 20_000, 8).unwrap();
        assert_ne!(r1.mean_cost, r3.mean_cost);
    }

    #[test]
    fn point_mass_demand_simulates_exactly() {
        let p = Problem::new(
            2.0,
            1.0,
            PlConvex::new(vec![0], vec![-1.0, 1.0]).unwrap(),
            Pmf::new([(1, 1.0)]).unwrap(),
            0.5,
        )
        .unwrap();
        let pol = Policy::finite(vec![
            StageRule::Threshold { s: 0, order_up_to: 2 },
            StageRule::Threshold { s: 0, order_up_to: 2 },
        ])
        .unwrap();
        let exact = evaluate_exact(&p, &pol, 1, 2).unwrap();
        let sim = simulate(&p, &pol, 1, 2, 1, 99).unwrap();
        assert_eq!(sim.std_error, 0.0);
        assert!((sim.mean_cost - exact).abs() < 1e-12);
    }

    #[test]
    fn swap_at_exact_tie_state_is_a_no_op() {
        // K = 2, c_bar = 1, h = 2|x|, D ≡ 1: G_0(x) = x + 2|x−1| has its
        // minimum 1 at S = 1 and G_0(−1) = 3 = K + G_0(S) exactly, so both
        // holding and ordering are optimal at s = −1.
        let p = Problem::new(
            2.0,
            1.0,
            PlConvex::new(vec![0], vec![-2.0, 2.0]).unwrap(),
            Pmf::new([(1, 1.0)]).unwrap(),
            0.7,
        )
        .unwrap();
        let query = Window::new(-4, 3).unwrap();
        let vt = solve_finite(&p, 1, query).unwrap();
        let pair = vt.stage(0).thresholds.unwrap();
        assert_eq!((pair.s, pair.order_up_to), (-1, 1));
        assert!(vt.stage(0).boundary_gap.unwrap().abs() < 1e-12);

        let base = induced_policy(&vt);
        let swapped = Policy::finite(vec![StageRule::Threshold {
            s: pair.s + 1,
            order_up_to: pair.order_up_to,
        }])
        .unwrap();
        let v0 = evaluate_exact_window(&p, &base, query, 1).unwrap();
        let v1 = evaluate_exact_window(&p, &swapped, query, 1).unwrap();
        for off in 0..query.len() {
            assert!((v0[off] - v1[off]).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_json_schema() {
        let pol = Policy::finite(vec![
            StageRule::Threshold { s: -1, order_up_to: 1 },
            StageRule::NeverOrder,
        ])
        .unwrap();
        let json = serde_json::to_value(&pol).unwrap();
        assert_eq!(json["horizon"], 2);
        assert_eq!(json["stages"][0]["type"], "threshold");
        assert_eq!(json["stages"][0]["s"], -1);
        assert_eq!(json["stages"][0]["S"], 1);
        assert_eq!(json["stages"][1]["type"], "never_order");
        let back: Policy = serde_json::from_value(json).unwrap();
        assert_eq!(back, pol);

        // s > S is rejected.
        assert!(Policy::finite(vec![StageRule::Threshold { s: 2, order_up_to: 1 }]).is_err());
    }
}
