//! Two-stage optimizer for the pair criteria: an exhaustive coarse grid over
//! `(0, pi)^2` followed by derivative-free simplex refinement.
//!
//! The default grid for an axis of length `T` has `T` frequency nodes and
//! `T^2` rate nodes, matching the criteria's frequency resolution `~pi/T` and
//! rate resolution `~pi/T^2` (the estimators converge at `T^(-3/2)` and
//! `T^(-5/2)`). The rate-node count is capped at 20 000, which starts to bind
//! at `T > 141`; past that the coarse stage is slightly coarser than the
//! convergence rate suggests and the refinement stage has to close the gap.

use crate::criteria::NonlinearPair;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Hard ceiling on rate nodes per coarse search.
pub const RATE_POINT_CAP: usize = 20_000;

/// Relative spread below which a coarse grid is declared flat.
const FLAT_EPS: f64 = 1e-12;

/// A real objective over nonlinear pairs.
///
/// The optimizer consumes objectives through this trait so that
/// implementations able to evaluate many pairs per pass over their data (the
/// axis criteria) can expose that; plain closures get the one-at-a-time
/// default. Both paths must return identical values for identical pairs.
pub trait PairObjective: Sync {
    fn eval(&self, pair: NonlinearPair) -> f64;

    /// Evaluates a batch of pairs into `out` (cleared first).
    fn eval_batch(&self, pairs: &[NonlinearPair], out: &mut Vec<f64>) {
        out.clear();
        out.extend(pairs.iter().map(|&p| self.eval(p)));
    }
}

impl<F> PairObjective for F
where
    F: Fn(NonlinearPair) -> f64 + Sync,
{
    fn eval(&self, pair: NonlinearPair) -> f64 {
        self(pair)
    }
}

/// Whether the objective is minimized or maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchSense {
    Minimize,
    Maximize,
}

impl SearchSense {
    /// True when `candidate` is strictly better than `incumbent`.
    #[inline]
    fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            SearchSense::Minimize => candidate < incumbent,
            SearchSense::Maximize => candidate > incumbent,
        }
    }

    fn worst(self) -> f64 {
        match self {
            SearchSense::Minimize => f64::INFINITY,
            SearchSense::Maximize => f64::NEG_INFINITY,
        }
    }
}

/// Node layout of one coarse search.
///
/// Nodes sit at cell centers, `lo + (k + 1/2) * (hi - lo) / points`, so every
/// node is strictly inside the open ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub freq_points: usize,
    pub rate_points: usize,
    pub freq_range: (f64, f64),
    pub rate_range: (f64, f64),
}

impl GridPlan {
    /// Default plan for an axis with `t` samples: `t` frequency nodes and
    /// `min(t^2, 20 000)` rate nodes over the full `(0, pi)` ranges.
    pub fn for_axis_len(t: usize) -> Self {
        Self {
            freq_points: t.max(8),
            rate_points: (t * t).min(RATE_POINT_CAP).max(8),
            freq_range: (0.0, PI),
            rate_range: (0.0, PI),
        }
    }

    /// True when the default rate density `t^2` was clipped by the cap.
    pub fn rate_cap_binds(t: usize) -> bool {
        t * t > RATE_POINT_CAP
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_points < 8 || self.rate_points < 8 {
            return Err(Error::BadConfig {
                what: format!(
                    "grid needs at least 8 points per axis, got {}x{}",
                    self.freq_points, self.rate_points
                ),
            });
        }
        for (name, (lo, hi)) in [("freq_range", self.freq_range), ("rate_range", self.rate_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0 && hi <= PI) {
                return Err(Error::BadConfig {
                    what: format!("{name} ({lo}, {hi}) must satisfy 0 <= lo < hi <= pi"),
                });
            }
        }
        Ok(())
    }

    /// Cell dimensions `(freq, rate)`.
    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.freq_range.1 - self.freq_range.0) / self.freq_points as f64,
            (self.rate_range.1 - self.rate_range.0) / self.rate_points as f64,
        )
    }

    /// Node at indices `(i, j)`; indices increase with frequency and rate.
    pub fn node(&self, i: usize, j: usize) -> NonlinearPair {
        let (df, dr) = self.cell_size();
        NonlinearPair {
            freq: self.freq_range.0 + (i as f64 + 0.5) * df,
            rate: self.rate_range.0 + (j as f64 + 0.5) * dr,
        }
    }
}

/// Stopping rules for the simplex refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineSettings {
    /// Stop when the simplex diameter falls below this.
    pub x_tol: f64,
    /// Stop when the function spread across the simplex falls below
    /// `f_tol * max(1, |best|)`.
    pub f_tol: f64,
    pub max_iters: usize,
    /// Initial simplex edge lengths; `None` derives them from the caller's
    /// grid cell (or a small default for standalone use).
    pub initial_step: Option<(f64, f64)>,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self { x_tol: 1e-8, f_tol: 1e-10, max_iters: 500, initial_step: None }
    }
}

impl RefineSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_tol > 0.0 && self.f_tol > 0.0 && self.max_iters >= 1) {
            return Err(Error::BadConfig {
                what: "refinement tolerances must be positive and max_iters >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Outcome of a search stage (or of both stages composed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    /// Best point found.
    pub pair: NonlinearPair,
    /// Objective value at `pair`.
    pub value: f64,
    /// Number of accepted improvements during refinement (0 when the start
    /// was already optimal or refinement did not run).
    pub iterations: usize,
    pub converged: bool,
    /// The coarse objective was constant to within `1e-12` relative spread;
    /// the reported winner is the tie-break node, not a real optimum.
    pub flat: bool,
    /// Winning node of the coarse stage.
    pub grid_cell: NonlinearPair,
}

struct NodeOutcome {
    value: f64,
    i: usize,
    j: usize,
}

/// Exhaustively evaluates every node of the plan and returns the best one.
///
/// Ties break toward smaller frequency, then smaller rate. Non-finite
/// objective values are skipped; if every node is non-finite the search fails
/// with [`Error::AllInvalid`]. Rows of the grid are evaluated in parallel and
/// reduced with an order-independent comparison, so the result does not
/// depend on thread count.
pub fn coarse_grid_search<O>(objective: &O, plan: &GridPlan, sense: SearchSense) -> Result<OptimumReport>
where
    O: PairObjective + ?Sized,
{
    plan.validate()?;
    let rows: Vec<(Option<NodeOutcome>, f64, f64)> = (0..plan.freq_points)
        .into_par_iter()
        .map(|i| {
            let nodes: Vec<NonlinearPair> =
                (0..plan.rate_points).map(|j| plan.node(i, j)).collect();
            let mut values = Vec::new();
            objective.eval_batch(&nodes, &mut values);
            debug_assert_eq!(values.len(), nodes.len());
            let mut best: Option<NodeOutcome> = None;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (j, &value) in values.iter().enumerate() {
                if !value.is_finite() {
                    continue;
                }
                lo = lo.min(value);
                hi = hi.max(value);
                let take = match &best {
                    None => true,
                    Some(b) => sense.better(value, b.value),
                };
                if take {
                    best = Some(NodeOutcome { value, i, j });
                }
            }
            (best, lo, hi)
        })
        .collect();

    let mut best: Option<NodeOutcome> = None;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (row_best, row_lo, row_hi) in rows {
        lo = lo.min(row_lo);
        hi = hi.max(row_hi);
        if let Some(cand) = row_best {
            let take = match &best {
                None => true,
                // Earlier rows carry smaller frequencies and, within a row,
                // smaller j means smaller rate, so "strictly better" keeps
                // the lexicographically first node on ties.
                Some(b) => sense.better(cand.value, b.value),
            };
            if take {
                best = Some(cand);
            }
        }
    }

    let best = best.ok_or(Error::AllInvalid)?;
    let flat = (hi - lo).abs() < FLAT_EPS * hi.abs().max(1.0);
    let node = plan.node(best.i, best.j);
    Ok(OptimumReport {
        pair: node,
        value: best.value,
        iterations: 0,
        converged: false,
        flat,
        grid_cell: node,
    })
}

/// Folds a coordinate into the open interval `(lo, hi)` by reflecting off the
/// boundaries, then nudges exact boundary hits inward.
fn reflect_into(mut x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    // Two reflections translate by 2*width; reduce first so pathological
    // proposals terminate.
    if x < lo - 2.0 * width || x > hi + 2.0 * width {
        let period = 2.0 * width;
        x = (x - lo).rem_euclid(period) + lo;
    }
    for _ in 0..4 {
        if x < lo {
            x = lo + (lo - x);
        } else if x > hi {
            x = hi - (x - hi);
        } else {
            break;
        }
    }
    let eps = 1e-12 * width;
    x.clamp(lo + eps, hi - eps)
}

/// Nelder-Mead refinement over `(0, pi)^2`.
///
/// Proposals outside the square are reflected back inside, so every
/// evaluation stays strictly interior. Non-finite objective values are
/// treated as worst-possible for the given sense. `iterations` in the report
/// counts accepted improvements of the best vertex.
pub fn refine<O>(
    objective: &O,
    start: NonlinearPair,
    settings: &RefineSettings,
    sense: SearchSense,
) -> OptimumReport
where
    O: PairObjective + ?Sized,
{
    let (lo, hi) = (0.0, PI);
    let sanitize = |v: f64| if v.is_finite() { v } else { sense.worst() };
    let eval = |p: [f64; 2]| -> f64 {
        sanitize(objective.eval(NonlinearPair { freq: p[0], rate: p[1] }))
    };
    // Internally minimize; flip sign for maximization.
    let score = |v: f64| match sense {
        SearchSense::Minimize => v,
        SearchSense::Maximize => -v,
    };

    let step = settings.initial_step.unwrap_or((0.02 * PI, 0.02 * PI));
    let clamp_point = |p: [f64; 2]| [reflect_into(p[0], lo, hi), reflect_into(p[1], lo, hi)];

    let x0 = clamp_point([start.freq, start.rate]);
    let mut simplex = [
        x0,
        clamp_point([x0[0] + step.0, x0[1]]),
        clamp_point([x0[0], x0[1] + step.1]),
    ];
    let mut values = simplex.map(|p| score(eval(p)));
    let mut improvements = 0usize;
    let mut converged = false;

    for _ in 0..settings.max_iters {
        // Order the simplex: index 0 best, 2 worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = [simplex[order[0]], simplex[order[1]], simplex[order[2]]];
        values = [values[order[0]], values[order[1]], values[order[2]]];

        let diameter = simplex
            .iter()
            .flat_map(|a| simplex.iter().map(move |b| (a[0] - b[0]).hypot(a[1] - b[1])))
            .fold(0.0f64, f64::max);
        let spread = values[2] - values[0];
        // Both the simplex and the function spread must collapse; either one
        // alone stops too early on the flat-bottomed criteria.
        if diameter < settings.x_tol && spread <= settings.f_tol * values[0].abs().max(1.0) {
            converged = true;
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let through = |coef: f64| {
            clamp_point([
                centroid[0] + coef * (simplex[2][0] - centroid[0]),
                centroid[1] + coef * (simplex[2][1] - centroid[1]),
            ])
        };

        let reflected = through(-1.0);
        let f_reflected = score(eval(reflected));
        let mut accepted: Option<([f64; 2], f64)> = None;

        if f_reflected < values[0] {
            // Try to expand past the reflection.
            let expanded = through(-2.0);
            let f_expanded = score(eval(expanded));
            accepted = Some(if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            });
        } else if f_reflected < values[1] {
            accepted = Some((reflected, f_reflected));
        } else {
            let (contracted, f_contracted) = if f_reflected < values[2] {
                let p = through(-0.5);
                (p, score(eval(p)))
            } else {
                let p = through(0.5);
                (p, score(eval(p)))
            };
            if f_contracted < values[2].min(f_reflected) {
                accepted = Some((contracted, f_contracted));
            }
        }

        match accepted {
            Some((point, value)) => {
                if value < values[0] {
                    improvements += 1;
                }
                simplex[2] = point;
                values[2] = value;
            }
            None => {
                // Shrink toward the best vertex.
                for k in 1..3 {
                    simplex[k] = clamp_point([
                        simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
                    ]);
                    values[k] = score(eval(simplex[k]));
                    if values[k] < values[0] {
                        improvements += 1;
                    }
                }
            }
        }
    }

    let mut best = 0;
    for k in 1..3 {
        if values[k] < values[best] {
            best = k;
        }
    }
    let pair = NonlinearPair { freq: simplex[best][0], rate: simplex[best][1] };
    let value = match sense {
        SearchSense::Minimize => values[best],
        SearchSense::Maximize => -values[best],
    };
    OptimumReport {
        pair,
        value,
        iterations: improvements,
        converged,
        flat: false,
        grid_cell: start,
    }
}

/// Coarse grid search followed by refinement from the winning node.
///
/// The refinement's initial simplex spans half a grid cell unless the
/// settings override it. A flat coarse landscape skips refinement and
/// surfaces the flag to the caller.
pub fn solve_pair<O>(
    objective: &O,
    plan: &GridPlan,
    settings: &RefineSettings,
    sense: SearchSense,
) -> Result<OptimumReport>
where
    O: PairObjective + ?Sized,
{
    settings.validate()?;
    let coarse = coarse_grid_search(objective, plan, sense)?;
    if coarse.flat {
        return Ok(coarse);
    }
    let mut local = settings.clone();
    if local.initial_step.is_none() {
        let (df, dr) = plan.cell_size();
        local.initial_step = Some((0.5 * df, 0.5 * dr));
    }
    let refined = refine(objective, coarse.pair, &local, sense);
    let keep_refined = sense.better(refined.value, coarse.value) || refined.value == coarse.value;
    let (pair, value) = if keep_refined {
        (refined.pair, refined.value)
    } else {
        // The simplex never discards its best vertex, so this indicates a
        // non-finite plateau around the node; keep the coarse winner.
        (coarse.pair, coarse.value)
    };
    Ok(OptimumReport {
        pair,
        value,
        iterations: refined.iterations,
        converged: refined.converged,
        flat: false,
        grid_cell: coarse.grid_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_plan_nodes_stay_interior() {
        let plan = GridPlan::for_axis_len(25);
        assert_eq!(plan.freq_points, 25);
        assert_eq!(plan.rate_points, 625);
        let first = plan.node(0, 0);
        let last = plan.node(24, 624);
        assert!(first.freq > 0.0 && first.rate > 0.0);
        assert!(last.freq < PI && last.rate < PI);
    }

    #[test]
    fn rate_cap_applies_only_past_141() {
        assert!(!GridPlan::rate_cap_binds(141));
        assert!(GridPlan::rate_cap_binds(142));
        assert_eq!(GridPlan::for_axis_len(200).rate_points, RATE_POINT_CAP);
    }

    #[test]
    fn constant_objective_reports_flat_and_first_node() {
        let plan = GridPlan::for_axis_len(10);
        let report = coarse_grid_search(|_| 3.0, &plan, SearchSense::Minimize).unwrap();
        assert!(report.flat);
        assert!(!report.converged);
        assert_eq!(report.pair, plan.node(0, 0));
    }

    #[test]
    fn all_invalid_objective_errors() {
        let plan = GridPlan::for_axis_len(10);
        let err = coarse_grid_search(|_| f64::NAN, &plan, SearchSense::Minimize);
        assert!(matches!(err, Err(Error::AllInvalid)));
    }

    #[test]
    fn coarse_search_finds_quadratic_minimum() {
        let plan = GridPlan::for_axis_len(40);
        let target = (1.1, 2.3);
        let f = |p: NonlinearPair| (p.freq - target.0).powi(2) + (p.rate - target.1).powi(2);
        let report = coarse_grid_search(f, &plan, SearchSense::Minimize).unwrap();
        let (df, dr) = plan.cell_size();
        assert!((report.pair.freq - target.0).abs() <= df);
        assert!((report.pair.rate - target.1).abs() <= dr);
        assert!(!report.flat);
    }

    #[test]
    fn maximization_mirrors_minimization() {
        let plan = GridPlan::for_axis_len(20);
        let f = |p: NonlinearPair| -((p.freq - 2.0).powi(2) + (p.rate - 1.0).powi(2));
        let report = coarse_grid_search(f, &plan, SearchSense::Maximize).unwrap();
        let (df, dr) = plan.cell_size();
        assert!((report.pair.freq - 2.0).abs() <= df);
        assert!((report.pair.rate - 1.0).abs() <= dr);
    }

    #[test]
    fn refine_from_exact_optimum_stays_put() {
        let f = |p: NonlinearPair| (p.freq - 1.0).powi(2) + (p.rate - 1.0).powi(2);
        let start = NonlinearPair { freq: 1.0, rate: 1.0 };
        let report = refine(f, start, &RefineSettings::default(), SearchSense::Minimize);
        assert_eq!(report.pair, start);
        assert_eq!(report.iterations, 0);
        assert!(report.converged);
    }

    #[test]
    fn refine_converges_to_interior_optimum() {
        let f = |p: NonlinearPair| (p.freq - 1.7).powi(2) + 30.0 * (p.rate - 0.4).powi(2);
        let start = NonlinearPair { freq: 1.5, rate: 0.5 };
        let report = refine(f, start, &RefineSettings::default(), SearchSense::Minimize);
        assert!(report.converged);
        assert!((report.pair.freq - 1.7).abs() < 1e-6, "freq {}", report.pair.freq);
        assert!((report.pair.rate - 0.4).abs() < 1e-6, "rate {}", report.pair.rate);
    }

    #[test]
    fn refine_from_edge_respects_domain() {
        let f = |p: NonlinearPair| (p.freq - 1.0).powi(2) + (p.rate - 1.0).powi(2);
        let start = NonlinearPair { freq: 1e-9, rate: PI - 1e-9 };
        let report = refine(f, start, &RefineSettings::default(), SearchSense::Minimize);
        assert!(report.pair.in_domain());
        assert!((report.pair.freq - 1.0).abs() < 1e-5);
        assert!((report.pair.rate - 1.0).abs() < 1e-5);
    }

    #[test]
    fn solve_pair_never_worsens_the_coarse_value() {
        let plan = GridPlan::for_axis_len(12);
        let f = |p: NonlinearPair| (p.freq - 0.9).powi(2) * (1.0 + p.rate);
        let coarse = coarse_grid_search(f, &plan, SearchSense::Minimize).unwrap();
        let solved = solve_pair(f, &plan, &RefineSettings::default(), SearchSense::Minimize).unwrap();
        assert!(solved.value <= coarse.value);
        assert_eq!(solved.grid_cell, coarse.grid_cell);
    }

    #[test]
    fn solve_pair_surfaces_flat_objectives() {
        let plan = GridPlan::for_axis_len(10);
        let report = solve_pair(|_| 0.0, &plan, &RefineSettings::default(), SearchSense::Minimize).unwrap();
        assert!(report.flat);
    }

    #[test]
    fn determinism_of_search() {
        let plan = GridPlan::for_axis_len(30);
        let f = |p: NonlinearPair| (p.freq - 1.3).powi(2) + (p.rate - 2.9).powi(2) * 3.0;
        let a = solve_pair(f, &plan, &RefineSettings::default(), SearchSense::Minimize).unwrap();
        let b = solve_pair(f, &plan, &RefineSettings::default(), SearchSense::Minimize).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reflect_into_folds_and_stays_open() {
        assert!(reflect_into(-0.1, 0.0, PI) > 0.0);
        assert!(reflect_into(PI + 0.2, 0.0, PI) < PI);
        assert_eq!(reflect_into(1.0, 0.0, PI), 1.0);
        let folded = reflect_into(-7.5, 0.0, PI);
        assert!(folded > 0.0 && folded < PI);
    }
}
