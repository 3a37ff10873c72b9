//! Brute-force ground truth for tiny instances.
//!
//! Deliberately avoids the cost-to-go factorization and the threshold
//! shortcut used by the dynamic-programming module: every action's value is
//! an explicit expectation over demand outcomes, and policies can be
//! enumerated exhaustively, so agreement with the solver is evidence rather
//! than tautology.

use crate::model::Problem;
use crate::policy::{self, Policy, StageRule};
use crate::{Error, Result, Window};

const MAX_WINDOW: usize = 20;
const MAX_ACTION: i64 = 15;
const MAX_HORIZON: u32 = 3;
const MAX_ENUMERATION: u128 = 1 << 22;

/// Exhaustive per-state minimization over an explicit action grid.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    /// `windows[r]` is where the value with `r` remaining steps is exact;
    /// `windows[n]` is the query window itself.
    pub windows: Vec<Window>,
    /// `values[r][·]` over `windows[r]`; `values[0]` is identically zero.
    pub values: Vec<Vec<f64>>,
    /// `actions[r][·]` minimizers over `windows[r]` for `r ≥ 1` (index 0 is
    /// an empty placeholder); exact ties resolve to the smallest quantity.
    pub actions: Vec<Vec<i64>>,
    /// The minimizing table policy over the query window.
    pub policy: Policy,
}

impl OracleSolution {
    /// Value with `r` steps remaining at state `x`.
    pub fn value(&self, r: u32, x: i64) -> Option<f64> {
        let w = self.windows.get(r as usize)?;
        w.contains(x).then(|| self.values[r as usize][w.offset(x)])
    }

    pub fn action(&self, r: u32, x: i64) -> Option<i64> {
        if r == 0 {
            return None;
        }
        let w = self.windows.get(r as usize)?;
        w.contains(x).then(|| self.actions[r as usize][w.offset(x)])
    }
}

fn check_limits(n: u32, query: Window, a_max: i64, max_horizon: u32) -> Result<()> {
    if n == 0 || n > max_horizon {
        return Err(Error::OracleRefused(format!(
            "horizon {n} outside 1..={max_horizon}"
        )));
    }
    if query.len() > MAX_WINDOW {
        return Err(Error::OracleRefused(format!(
            "window of {} states exceeds {MAX_WINDOW}",
            query.len()
        )));
    }
    if a_max < 1 || a_max > MAX_ACTION {
        return Err(Error::OracleRefused(format!(
            "action cap {a_max} outside 1..={MAX_ACTION}"
        )));
    }
    Ok(())
}

/// Optimal values and actions for an `n`-step problem on `query`, by direct
/// expectation evaluation of every action `0..=a_max` at every state.
///
/// The evaluation windows widen by `a_max` above and `D_max` below per
/// remaining step, so every candidate action stays evaluable; the cap
/// `a_max` itself must dominate the instance's optimal order quantities for
/// the result to be the true optimum (callers assert the cap never binds).
pub fn brute_force_optimal(
    p: &Problem,
    n: u32,
    query: Window,
    a_max: i64,
) -> Result<OracleSolution> {
    check_limits(n, query, a_max, MAX_HORIZON)?;
    let d_max = p.demand().max_value();

    let window_for = |r: u32| -> Result<Window> {
        let spread = (n - r) as i64;
        Window::new(query.lo - spread * d_max, query.hi + spread * a_max)
    };

    let mut windows = vec![window_for(0)?];
    let mut values: Vec<Vec<f64>> = vec![vec![0.0; windows[0].len()]];
    let mut actions: Vec<Vec<i64>> = vec![Vec::new()];

    for r in 1..=n {
        let w = window_for(r)?;
        let prev_w = windows[r as usize - 1];
        let prev_v = &values[r as usize - 1];
        let mut v = Vec::with_capacity(w.len());
        let mut act = Vec::with_capacity(w.len());
        for x in w.iter() {
            let mut best = f64::INFINITY;
            let mut best_a = 0;
            for a in 0..=a_max {
                let fixed = if a > 0 { p.k() } else { 0.0 };
                let total = fixed
                    + p.c_bar() * a as f64
                    + p.demand().expect(|d| {
                        let next = x + a - d;
                        p.h().eval(next) + p.alpha() * prev_v[prev_w.offset(next)]
                    });
                if total < best {
                    best = total;
                    best_a = a;
                }
            }
            v.push(best);
            act.push(best_a);
        }
        windows.push(w);
        values.push(v);
        actions.push(act);
    }

    // Policy step j plays the minimizer computed with n − j steps remaining.
    let mut stages = Vec::with_capacity(n as usize);
    for step in 0..n {
        let r = (n - step) as usize;
        stages.push(StageRule::Table {
            x_lo: windows[r].lo,
            actions: actions[r].clone(),
        });
    }
    let policy = Policy::finite(stages)?;

    Ok(OracleSolution {
        windows,
        values,
        actions,
        policy,
    })
}

/// Exact cost of every Markov deterministic table policy on `window`, played
/// from the window midpoint. Actions per state are capped at `a_max` and at
/// the window top, so each policy stays inside its own table.
pub fn enumerate_policy_costs(
    p: &Problem,
    n: u32,
    window: Window,
    a_max: i64,
) -> Result<Vec<(Policy, f64)>> {
    check_limits(n, window, a_max, 2)?;
    if window.len() > 8 {
        return Err(Error::OracleRefused(format!(
            "enumeration window of {} states exceeds 8",
            window.len()
        )));
    }
    let d_max = p.demand().max_value();
    let x0 = window.lo + (window.hi - window.lo) / 2;
    // Decisions happen at steps 0..n−1, so coverage is needed for n−1 demand
    // draws below the start.
    if window.lo > x0 - (n as i64 - 1) * d_max {
        return Err(Error::OracleRefused(
            "window bottom does not cover demand reach from the midpoint".into(),
        ));
    }

    // Mixed-radix enumeration over (stage, state) action slots. Orders at the
    // final step may leave the window (their successors are terminal); earlier
    // orders must keep every post-demand state inside the next stage's table.
    let d_min = p.demand().min_value();
    let radices: Vec<i64> = (0..n as usize)
        .flat_map(|j| {
            window.iter().map(move |x| {
                if j as u32 == n - 1 {
                    a_max + 1
                } else {
                    a_max.min(window.hi - x + d_min).max(0) + 1
                }
            })
        })
        .collect();
    let combos = radices.iter().map(|&r| r as u128).product::<u128>();
    if combos > MAX_ENUMERATION {
        return Err(Error::OracleRefused(format!(
            "{combos} policies exceed the enumeration cap {MAX_ENUMERATION}"
        )));
    }

    let mut out = Vec::with_capacity(combos as usize);
    let mut digits = vec![0i64; radices.len()];
    loop {
        let stages: Vec<StageRule> = (0..n as usize)
            .map(|j| StageRule::Table {
                x_lo: window.lo,
                actions: digits[j * window.len()..(j + 1) * window.len()].to_vec(),
            })
            .collect();
        let pol = Policy::finite(stages)?;
        let cost = policy::evaluate_exact(p, &pol, x0, n)?;
        out.push((pol, cost));

        // Increment.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return Ok(out);
            }
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
