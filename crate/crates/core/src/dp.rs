//! Exact finite-horizon backward induction on an integer window, threshold
//! extraction, K-convexity checking, and infinite-horizon value iteration
//! with a certified tail bound.
//!
//! Stage `t` of a [`ValueTable`] holds the cost-to-go `G_t` and the value
//! `v_{t+1}` produced by one appliance of the optimality equation
//! `v_{t+1}(x) = min_{a≥0} { K·1{a>0} + G_t(x+a) } − c_bar·x` with
//! `G_t(x) = c_bar·x + E[h(x−D)] + alpha·E[v_t(x−D)]` and `v_0 ≡ 0`.
//! Values are exact up to f64 accumulation: demand expectations are finite
//! sums and the action search is exhaustive over the window.

use std::io::Write as IoWrite;

use serde::Serialize;

use crate::classify::{self, Structure};
use crate::model::Problem;
use crate::{Count, Error, Horizon, Result, Window};

/// Tolerance for optimality-tie detection and K-convexity violations.
pub const TIE_TOL: f64 = 1e-9;

/// Reorder level `s` and order-up-to level `S` of one stage, `s ≤ S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThresholdPair {
    pub s: i64,
    #[serde(rename = "S")]
    pub order_up_to: i64,
}

/// One backward-induction stage.
#[derive(Debug, Clone)]
pub struct Stage {
    /// States on which `g`, `v_next`, and `action` are exact.
    pub valid: Window,
    /// Cost-to-go `G_t` over `valid`.
    pub g: Vec<f64>,
    /// Value `v_{t+1}` over `valid`.
    pub v_next: Vec<f64>,
    /// Minimizing order quantity per state (ties within [`TIE_TOL`] resolve
    /// to not ordering).
    pub action: Vec<i64>,
    /// Extracted thresholds; `None` for never-order stages.
    pub thresholds: Option<ThresholdPair>,
    /// Whether this stage lies in the never-order regime.
    pub never_order: bool,
    /// Diagnostic `K + G(S) − G(s) ≥ 0`. Zero (within [`TIE_TOL`]) means
    /// ordering up to `S` is also optimal at `s`; on the integer lattice the
    /// gap is typically positive and there is no indifferent state.
    pub boundary_gap: Option<f64>,
}

impl Stage {
    pub fn g_at(&self, x: i64) -> Option<f64> {
        self.valid.contains(x).then(|| self.g[self.valid.offset(x)])
    }

    pub fn v_next_at(&self, x: i64) -> Option<f64> {
        self.valid.contains(x).then(|| self.v_next[self.valid.offset(x)])
    }

    pub fn action_at(&self, x: i64) -> Option<i64> {
        self.valid.contains(x).then(|| self.action[self.valid.offset(x)])
    }
}

/// Tabulated value functions for a finite horizon.
#[derive(Debug, Clone)]
pub struct ValueTable {
    window: Window,
    d_max: i64,
    n: u32,
    alpha: f64,
    stages: Vec<Stage>,
}

impl ValueTable {
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn horizon(&self) -> u32 {
        self.n
    }

    pub fn d_max(&self) -> i64 {
        self.d_max
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, t: u32) -> &Stage {
        &self.stages[t as usize]
    }

    /// `v_t(x)`. Stage zero is identically zero on the whole lattice.
    pub fn v(&self, t: u32, x: i64) -> Option<f64> {
        if t == 0 {
            return Some(0.0);
        }
        self.stages.get(t as usize - 1)?.v_next_at(x)
    }

    /// `G_t(x)` where valid.
    pub fn g(&self, t: u32, x: i64) -> Option<f64> {
        self.stages.get(t as usize)?.g_at(x)
    }

    /// Optimal order quantity at stage `t`, state `x`.
    pub fn action(&self, t: u32, x: i64) -> Option<i64> {
        self.stages.get(t as usize)?.action_at(x)
    }

    /// Valid window of the final value function `v_N`.
    pub fn final_valid(&self) -> Window {
        self.stages.last().map_or(self.window, |s| s.valid)
    }

    /// Rows of the exported table restricted to `query`: row `t` pairs
    /// `v_t` with the stage quantities `G_{t−1}`, the optimal action, and the
    /// stage thresholds; row 0 is the flat terminal value.
    pub fn rows(&self, query: Window) -> Vec<ValueRow> {
        let mut rows = Vec::new();
        for x in query.iter() {
            rows.push(ValueRow {
                t: 0,
                x,
                v: 0.0,
                g: None,
                action: None,
                s: None,
                order_up_to: None,
            });
        }
        for t in 1..=self.n {
            let stage = self.stage(t - 1);
            for x in query.iter() {
                if !stage.valid.contains(x) {
                    continue;
                }
                rows.push(ValueRow {
                    t,
                    x,
                    v: stage.v_next[stage.valid.offset(x)],
                    g: Some(stage.g[stage.valid.offset(x)]),
                    action: Some(stage.action[stage.valid.offset(x)]),
                    s: stage.thresholds.map(|p| p.s),
                    order_up_to: stage.thresholds.map(|p| p.order_up_to),
                });
            }
        }
        rows
    }

    /// CSV export with columns `t,x,v,G,action,s_t,S_t`; threshold cells are
    /// empty in never-order stages.
    pub fn write_csv<W: IoWrite>(&self, mut out: W, query: Window) -> std::io::Result<()> {
        writeln!(out, "t,x,v,G,action,s_t,S_t")?;
        for r in self.rows(query) {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t,
                r.x,
                r.v,
                fmt_opt_f(r.g),
                fmt_opt_i(r.action),
                fmt_opt_i(r.s),
                fmt_opt_i(r.order_up_to)
            )?;
        }
        Ok(())
    }
}

fn fmt_opt_f(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_i(v: Option<i64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One exported row; the JSON export mirrors the CSV schema.
#[derive(Debug, Clone, Serialize)]
pub struct ValueRow {
    pub t: u32,
    pub x: i64,
    pub v: f64,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    pub action: Option<i64>,
    #[serde(rename = "s_t")]
    pub s: Option<i64>,
    #[serde(rename = "S_t")]
    pub order_up_to: Option<i64>,
}

/// Window wide enough that every state reachable in `n` steps from `query`
/// is tabulated: `[q_lo − n·D_max, q_hi + margin]`. The upper margin is a
/// starting guess; [`solve_finite`] re-plans wider whenever an argmin or a
/// reorder level touches a boundary.
pub fn plan_window(p: &Problem, n: u32, query: Window) -> Result<Window> {
    plan_window_padded(p, n, query, 0, default_hi_margin(p))
}

/// [`plan_window`] with extra depth below and headroom above.
pub fn plan_window_padded(
    p: &Problem,
    n: u32,
    query: Window,
    lo_extra: i64,
    hi_extra: i64,
) -> Result<Window> {
    if n == 0 {
        return Ok(query);
    }
    Window::new(
        query.lo - n as i64 * p.demand().max_value() - lo_extra,
        query.hi + hi_extra,
    )
}

fn default_hi_margin(p: &Problem) -> i64 {
    let d_max = p.demand().max_value();
    (2 * d_max + 4)
        .max(8)
        .max((p.k() / p.c_bar()).ceil() as i64 + d_max)
}

/// Exact backward induction for `n ≥ 1` stages on `window`.
///
/// Stage `t` is valid on `[window.lo + t·D_max, window.hi]`: the states whose
/// demand expectations only touch states the previous stage covers. Ordering
/// stages additionally require the argmin of `G_t` strictly inside the
/// window, the reorder level strictly above the bottom, and a certificate
/// that no order-up-to level beyond the top could beat the interior minimum
/// (`G_t(y) ≥ c_bar·y + E[h(y−D)]` for all `y`); any failure reports
/// [`Error::WindowTooSmall`] so the caller can re-plan.
pub fn backward_induction(p: &Problem, n: u32, window: Window) -> Result<ValueTable> {
    if n == 0 {
        return Err(Error::InvalidProblem("horizon must be positive".into()));
    }
    let d_max = p.demand().max_value();
    let alpha = p.alpha();
    let tail = classify::never_order_tail(p);

    if window.lo + (n as i64 - 1) * d_max > window.hi {
        return Err(Error::WindowTooSmall(format!(
            "window {:?} shallower than the {n}-stage demand reach",
            window
        )));
    }

    // E[h(x − D)] is stage-independent; tabulate once.
    let eh: Vec<f64> = window.iter().map(|x| p.expected_holding(x)).collect();
    let eh_above = p.expected_holding(window.hi + 1);

    let mut stages: Vec<Stage> = Vec::with_capacity(n as usize);
    let mut v_prev: Vec<f64> = Vec::new();
    let mut v_prev_win = window;

    for t in 0..n {
        let valid = Window::new(window.lo + t as i64 * d_max, window.hi)?;
        let m = valid.len();
        let never = match tail {
            Count::Infinite => true,
            Count::Finite(depth) => t < depth,
        };

        let mut g = vec![0.0; m];
        for (off, x) in valid.iter().enumerate() {
            let future = if t == 0 {
                0.0
            } else {
                p.demand().expect(|d| v_prev[v_prev_win.offset(x - d)])
            };
            g[off] = p.c_bar() * x as f64 + eh[window.offset(x)] + alpha * future;
        }

        // Suffix minima of g; exact ties keep the smallest level.
        let mut suf_min = vec![f64::INFINITY; m + 1];
        let mut suf_arg = vec![usize::MAX; m + 1];
        for off in (0..m).rev() {
            if g[off] <= suf_min[off + 1] {
                suf_min[off] = g[off];
                suf_arg[off] = off;
            } else {
                suf_min[off] = suf_min[off + 1];
                suf_arg[off] = suf_arg[off + 1];
            }
        }

        let mut thresholds = None;
        let mut boundary_gap = None;
        if !never {
            let min_off = suf_arg[0];
            if min_off + 1 == m {
                return Err(Error::WindowTooSmall(format!(
                    "stage {t}: cost-to-go argmin at the top boundary"
                )));
            }
            if min_off == 0 {
                return Err(Error::WindowTooSmall(format!(
                    "stage {t}: cost-to-go argmin at the bottom boundary"
                )));
            }
            // No order-up-to level above the window can beat the interior
            // minimum: G_t(y) ≥ c_bar·y + E[h(y−D)], and the right side is
            // non-decreasing beyond the top once E[h(·−D)] has turned upward.
            let top_eh = eh[window.offset(window.hi)];
            let escape_floor = p.c_bar() * (window.hi + 1) as f64 + eh_above;
            if eh_above < top_eh || escape_floor < suf_min[0] {
                return Err(Error::WindowTooSmall(format!(
                    "stage {t}: top of window below the ordering escape certificate"
                )));
            }
            let pair = extract_thresholds(&g, valid, p.k())?;
            if pair.s <= valid.lo {
                return Err(Error::WindowTooSmall(format!(
                    "stage {t}: reorder level at the bottom boundary"
                )));
            }
            boundary_gap =
                Some(p.k() + g[valid.offset(pair.order_up_to)] - g[valid.offset(pair.s)]);
            thresholds = Some(pair);
        }

        let mut v_next = vec![0.0; m];
        let mut action = vec![0i64; m];
        for off in 0..m {
            let x = valid.lo + off as i64;
            let stay = g[off];
            let order = p.k() + suf_min[off + 1];
            v_next[off] = stay.min(order) - p.c_bar() * x as f64;
            action[off] = if stay <= order + TIE_TOL {
                0
            } else {
                (valid.lo + suf_arg[off + 1] as i64) - x
            };
        }

        v_prev = v_next.clone();
        v_prev_win = valid;
        stages.push(Stage {
            valid,
            g,
            v_next,
            action,
            thresholds,
            never_order: never,
            boundary_gap,
        });
    }

    Ok(ValueTable {
        window,
        d_max,
        n,
        alpha: p.alpha(),
        stages,
    })
}

/// Plans a window for `query`, runs backward induction, and re-plans wider
/// until every boundary check passes. `n = 0` yields an empty table over
/// `query` (the terminal value is identically zero).
pub fn solve_finite(p: &Problem, n: u32, query: Window) -> Result<ValueTable> {
    if n == 0 {
        return Ok(ValueTable {
            window: query,
            d_max: p.demand().max_value(),
            n: 0,
            alpha: p.alpha(),
            stages: Vec::new(),
        });
    }
    let d_max = p.demand().max_value();
    let mut lo_extra = 0i64;
    let mut hi_extra = default_hi_margin(p);
    for _ in 0..48 {
        let window = plan_window_padded(p, n, query, lo_extra, hi_extra)?;
        match backward_induction(p, n, window) {
            Ok(vt) => return Ok(vt),
            Err(Error::WindowTooSmall(_)) => {
                lo_extra = (lo_extra * 2).max(2 * d_max + 4);
                hi_extra *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::WindowTooSmall(
        "window kept hitting boundaries after repeated widening".into(),
    ))
}

/// Order-up-to level `S` (smallest argmin of the tabulated function) and
/// reorder level `s` (least `x ≤ S` with `f(x) ≤ K + f(S)`, within
/// [`TIE_TOL`]).
///
/// Errors when the argmin sits at the top boundary; an argmin at the bottom
/// of a flat stretch is legitimate (a constant function yields `s = S =`
/// the leftmost point). Whether a stage is in the never-order regime — where
/// thresholds are not applicable — is decided by the classifier, not here.
pub fn extract_thresholds(g: &[f64], window: Window, k: f64) -> Result<ThresholdPair> {
    assert_eq!(g.len(), window.len());
    assert!(k >= 0.0);
    let mut min_off = 0;
    for off in 1..g.len() {
        if g[off] < g[min_off] {
            min_off = off;
        }
    }
    if min_off + 1 == g.len() {
        return Err(Error::WindowTooSmall(
            "argmin at the top boundary of the tabulated window".into(),
        ));
    }
    let order_up_to = window.lo + min_off as i64;
    let cutoff = k + g[min_off] + TIE_TOL;
    let mut s = order_up_to;
    for off in 0..=min_off {
        if g[off] <= cutoff {
            s = window.lo + off as i64;
            break;
        }
    }
    Ok(ThresholdPair { s, order_up_to })
}

/// Outcome of an exhaustive K-convexity check over integer triples.
#[derive(Debug, Clone, Serialize)]
pub struct KConvexityReport {
    pub holds: bool,
    pub witness: Option<KConvexityWitness>,
}

/// A triple `x < mid < y` violating
/// `f(mid) ≤ (1−λ)f(x) + λf(y) + λK` with `λ = (mid−x)/(y−x)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KConvexityWitness {
    pub x: i64,
    pub mid: i64,
    pub y: i64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks every integer triple in the tabulated window; reports the worst
/// violation beyond [`TIE_TOL`] if any.
pub fn check_k_convex(values: &[f64], x_lo: i64, k: f64) -> KConvexityReport {
    assert!(k >= 0.0);
    let n = values.len();
    let mut worst: Option<KConvexityWitness> = None;
    let mut worst_excess = TIE_TOL;
    for xi in 0..n {
        for yi in (xi + 2)..n {
            let span = (yi - xi) as f64;
            for mi in (xi + 1)..yi {
                let lam = (mi - xi) as f64 / span;
                let rhs = (1.0 - lam) * values[xi] + lam * values[yi] + lam * k;
                let excess = values[mi] - rhs;
                if excess > worst_excess {
                    worst_excess = excess;
                    worst = Some(KConvexityWitness {
                        x: x_lo + xi as i64,
                        mid: x_lo + mi as i64,
                        y: x_lo + yi as i64,
                        lhs: values[mi],
                        rhs,
                    });
                }
            }
        }
    }
    KConvexityReport {
        holds: worst.is_none(),
        witness: worst,
    }
}

/// Stationary regime of an infinite-horizon solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfiniteRegime {
    Stationary(ThresholdPair),
    NeverOrder,
}

/// Infinite-horizon value function slice with a certified error bound.
#[derive(Debug, Clone)]
pub struct InfiniteSolution {
    pub query: Window,
    /// `v_alpha` on `query`, within `error_bound`.
    pub v: Vec<f64>,
    /// `G_alpha` on `query`, within `error_bound`.
    pub g: Vec<f64>,
    pub regime: InfiniteRegime,
    pub error_bound: f64,
    /// Stages of backward induction run (stationary branch).
    pub stages_used: Option<u32>,
    /// Series terms summed (never-order closed-form branch).
    pub terms_used: Option<u32>,
}

impl InfiniteSolution {
    pub fn v_at(&self, x: i64) -> Option<f64> {
        self.query.contains(x).then(|| self.v[self.query.offset(x)])
    }

    pub fn g_at(&self, x: i64) -> Option<f64> {
        self.query.contains(x).then(|| self.g[self.query.offset(x)])
    }

    /// Stationary action at `x` under the solved regime.
    pub fn action_at(&self, x: i64) -> i64 {
        match self.regime {
            InfiniteRegime::NeverOrder => 0,
            InfiniteRegime::Stationary(pair) => {
                if x < pair.s {
                    pair.order_up_to - x
                } else {
                    0
                }
            }
        }
    }

    /// CSV export in the finite-horizon schema with `t = inf`.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,v,G,action,s_t,S_t")?;
        let (s, cap) = match self.regime {
            InfiniteRegime::Stationary(p) => (Some(p.s), Some(p.order_up_to)),
            InfiniteRegime::NeverOrder => (None, None),
        };
        for x in self.query.iter() {
            writeln!(
                out,
                "inf,{},{},{},{},{},{}",
                x,
                self.v[self.query.offset(x)],
                self.g[self.query.offset(x)],
                self.action_at(x),
                fmt_opt_i(s),
                fmt_opt_i(cap)
            )?;
        }
        Ok(())
    }
}

/// Infinite-horizon solution on `query` within `tol`.
///
/// In the never-order regime the value is the closed-form discounted series
/// of holding costs, truncated once an analytic tail bound drops below
/// `tol`. In the stationary regime backward induction runs with doubling
/// horizon and growing window until the coupling bound
/// `alpha^N · M3 / (1 − alpha)` certifies the tolerance, with `M3` assembled
/// from the observed thresholds, the query top, and demand statistics.
pub fn value_iteration(p: &Problem, query: Window, tol: f64) -> Result<InfiniteSolution> {
    assert!(tol > 0.0);
    let report = classify::classify(p, Horizon::Infinite)?;
    match report.structure {
        Structure::NeverOrder => never_order_series(p, query, tol),
        Structure::SsStationary => stationary_iteration(p, query, tol),
        _ => unreachable!("infinite-horizon classification is binary"),
    }
}

/// Tail of `Σ_{i>T} alpha^i (i+1)`, in closed form.
fn weighted_geometric_tail(alpha: f64, t: u32) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let a_t1 = alpha.powi(t as i32 + 1);
    ((t as f64 + 2.0) * a_t1 * (1.0 - alpha) + a_t1 * alpha) / ((1.0 - alpha) * (1.0 - alpha))
}

fn never_order_series(p: &Problem, query: Window, tol: f64) -> Result<InfiniteSolution> {
    let alpha = p.discount_for_infinite()?;
    let c = p.c_bar();
    let mean = p.demand().mean();

    // Per-state constant in the tail bound: chords of h are never steeper
    // than −c_bar in this regime, so E[h(x − S̄)] ≤ B(x) + c·E[S̄] with
    // B(x) = c|x| for x ≤ 0 and B(x) = h(x) for x > 0.
    let b_max = query
        .iter()
        .map(|x| if x <= 0 { c * x.unsigned_abs() as f64 } else { p.h().eval(x) })
        .fold(0.0f64, f64::max);

    let mut terms = 0u32;
    loop {
        let tail = c * mean * weighted_geometric_tail(alpha, terms)
            + b_max * alpha.powi(terms as i32 + 1) / (1.0 - alpha);
        if tail < tol {
            break;
        }
        terms += 1;
        if terms > 20_000 {
            return Err(Error::InvalidProblem(format!(
                "tolerance {tol} not reachable within 20000 series terms at alpha = {alpha}"
            )));
        }
    }

    let mut v: Vec<f64> = vec![0.0; query.len()];
    let mut conv = p.demand().convolve_power(1);
    let mut discount = 1.0;
    for i in 0..=terms {
        for (off, x) in query.iter().enumerate() {
            v[off] += discount * conv.expect(|s| p.h().eval(x - s));
        }
        if i < terms {
            conv = conv.convolve(p.demand());
            discount *= alpha;
        }
    }
    let g: Vec<f64> = query
        .iter()
        .enumerate()
        .map(|(off, x)| v[off] + c * x as f64)
        .collect();
    let tail = c * mean * weighted_geometric_tail(alpha, terms)
        + b_max * alpha.powi(terms as i32 + 1) / (1.0 - alpha);

    Ok(InfiniteSolution {
        query,
        v,
        g,
        regime: InfiniteRegime::NeverOrder,
        error_bound: tail,
        stages_used: None,
        terms_used: Some(terms),
    })
}

/// Per-step expected-cost bound `M3 = K + M1 + M2` for the policy that plays
/// the computed thresholds, assembled from the observed reorder levels, the
/// query top, and demand statistics. `None` when no stage orders yet.
pub fn per_step_cost_bound(p: &Problem, vt: &ValueTable, query: Window) -> Option<f64> {
    let d_max = p.demand().max_value();
    let ordering: Vec<ThresholdPair> =
        vt.stages().iter().filter_map(|s| s.thresholds).collect();
    if ordering.is_empty() {
        return None;
    }
    let last = *ordering.last().unwrap();
    // Safety pad on the observed extremes: later stages move at most a step.
    let max_up_to = ordering.iter().map(|p| p.order_up_to).max().unwrap() + d_max;
    let first = ordering[0];

    let z = query.hi;
    let peak = z.max(max_up_to).max(last.order_up_to);
    let m1 = p.expected_holding(last.s) + p.expected_holding(peak);
    let mean = p.demand().mean();
    let depth = (vt.stages().len() - ordering.len()) as f64; // first ordering stage index
    let m2 = p.c_bar()
        * [
            0.0,
            (last.order_up_to - last.s) as f64 + mean,
            (last.order_up_to - first.s) as f64 + (depth + 1.0) * mean,
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
    Some(p.k() + m1 + m2)
}

fn stationary_iteration(p: &Problem, query: Window, tol: f64) -> Result<InfiniteSolution> {
    let alpha = p.discount_for_infinite()?;
    let mut n: u32 = 16;
    loop {
        let vt = solve_finite(p, n, query)?;
        if let Some(m3) = per_step_cost_bound(p, &vt, query) {
            let bound = alpha.powi(n as i32) * m3 / (1.0 - alpha);
            if bound < tol {
                let last = vt.stages().last().unwrap();
                let pair = last
                    .thresholds
                    .expect("final stage is in the ordering regime");
                let v = query.iter().map(|x| last.v_next_at(x).unwrap()).collect();
                let g = query.iter().map(|x| last.g_at(x).unwrap()).collect();
                return Ok(InfiniteSolution {
                    query,
                    v,
                    g,
                    regime: InfiniteRegime::Stationary(pair),
                    error_bound: bound,
                    stages_used: Some(n),
                    terms_used: None,
                });
            }
        }
        n = n.checked_mul(2).ok_or_else(|| {
            Error::InvalidProblem("horizon overflow during value iteration".into())
        })?;
        if n > 1 << 20 {
            return Err(Error::InvalidProblem(format!(
                "value iteration did not certify tolerance {tol} within {} stages",
                1 << 20
            )));
        }
    }
}

/// Maximum absolute difference between the recursive cost-to-go and the
/// closed-form stage cost over `query`, across stages `t ≤ min(tail, n−1)`.
pub fn closed_form_max_diff(p: &Problem, n: u32, query: Window) -> Result<f64> {
    let vt = solve_finite(p, n, query)?;
    let t_hi = match classify::never_order_tail(p) {
        Count::Finite(depth) => depth.min(n - 1),
        Count::Infinite => n - 1,
    };
    let table = classify::closed_form_stage_cost_table(p, t_hi, query);
    let mut max_diff = 0.0f64;
    for t in 0..=t_hi {
        for (off, x) in query.iter().enumerate() {
            let g = vt.g(t, x).expect("query inside every stage window");
            max_diff = max_diff.max((g - table[t as usize][off]).abs());
        }
    }
    Ok(max_diff)
}

/// True when the recursive and closed-form stage costs agree to 1e−8 on a
/// default desk-scale window, for every depth up to the never-order tail.
pub fn verify_closed_form_identity(p: &Problem) -> Result<bool> {
    let query = Window::new(-12, 12)?;
    let n = match classify::never_order_tail(p) {
        Count::Finite(depth) => (depth + 1).clamp(1, 8),
        Count::Infinite => 8,
    };
    Ok(closed_form_max_diff(p, n, query)? < 1e-8)
}
