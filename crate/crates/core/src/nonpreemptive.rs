//! Average peak age of the non-preemptive (single waiting slot) server under
//! threshold policies, and the optimizers for the threshold.
//!
//! For a fixed threshold `θ` the objective is
//! `P(θ) = E[min(θ, C)] + 2E[(C̃ − θ − T)⁺] + 2E[T] + E[C]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::numerics::{bisect, sign, Bracket, DEFAULT_BISECT_TOL, DEFAULT_GRID};

/// Generation threshold measured from the start of the previous packet's
/// computation. `WaitForCompletion` is `θ = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    WaitForCompletion,
}

impl Threshold {
    pub const ZERO: Threshold = Threshold::Finite(0.0);

    /// Checked constructor; `+∞` maps to the sentinel.
    pub fn new(v: f64) -> Result<Self> {
        if v == f64::INFINITY {
            Ok(Self::WaitForCompletion)
        } else if v.is_finite() && v >= 0.0 {
            Ok(Self::Finite(v))
        } else {
            Err(Error::InvalidParameter(format!("threshold must be >= 0, got {v}")))
        }
    }

    /// Numeric value, `+∞` for the sentinel.
    pub fn value(&self) -> f64 {
        match *self {
            Self::Finite(v) => v,
            Self::WaitForCompletion => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::WaitForCompletion => f.write_str("inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Self::WaitForCompletion);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad threshold {s:?}")))?;
        if v.is_infinite() {
            return Err(Error::InvalidParameter(format!("bad threshold {s:?}")));
        }
        Self::new(v)
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Finite(v) => s.serialize_f64(v),
            Self::WaitForCompletion => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => Threshold::new(v),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WopEvaluation {
    pub paoi: f64,
    pub term_min_theta_c: f64,
    pub term_wait: f64,
    pub constants: f64,
}

/// One evaluated candidate of an optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub threshold: Threshold,
    pub paoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub threshold: Threshold,
    pub paoi: f64,
    /// Stationarity residual (or final Dinkelbach `p(c)`) at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Set when the objective is flat and the tie rule picked the threshold.
    pub degenerate_flat: bool,
    pub candidates: Vec<Candidate>,
}

fn rank(t: &Threshold) -> (u8, f64) {
    match *t {
        Threshold::Finite(v) if v == 0.0 => (0, 0.0),
        Threshold::Finite(v) => (1, v),
        Threshold::WaitForCompletion => (2, 0.0),
    }
}

/// `true` when `value` beats `best` by more than rounding noise.
pub(crate) fn improves(value: f64, best: f64) -> bool {
    value < best - 1e-13 * best.abs().max(1.0)
}

/// Minimum over candidates; near-ties go to 0, then the smallest finite
/// threshold, then the sentinel.
pub(crate) fn select_best(candidates: &[Candidate]) -> Candidate {
    let mut ordered = candidates.to_vec();
    ordered.sort_by(|a, b| {
        let (ra, va) = rank(&a.threshold);
        let (rb, vb) = rank(&b.threshold);
        ra.cmp(&rb).then(va.total_cmp(&vb))
    });
    let mut best = ordered[0];
    for c in &ordered[1..] {
        if improves(c.paoi, best.paoi) {
            best = *c;
        }
    }
    best
}

/// Sorted, deduplicated search grid: 0, quantiles of every law at `n` levels
/// spanning `1e-4 ..= 1 − 1e-4`, and each support point with a point just below it.
pub(crate) fn quantile_grid(laws: &[&DistributionSpec], n: usize) -> Vec<f64> {
    let mut pts = vec![0.0];
    for d in laws {
        for i in 0..n {
            let p = 1e-4 + (1.0 - 2e-4) * i as f64 / (n.max(2) - 1) as f64;
            pts.push(d.quantile(p));
        }
        for b in d.support_points() {
            pts.push(b * (1.0 - 1e-9));
            pts.push(b);
        }
    }
    pts.retain(|x| x.is_finite() && *x >= 0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    fill_gaps(&pts, GAP_RATIO)
}

/// Largest gap between grid neighbours relative to the right endpoint.
const GAP_RATIO: f64 = 1.0 / 16.0;

/// Inserts evenly spaced points into every gap `[a, b]` wider than `ratio·b`,
/// so stretches without quantiles (below a Pareto scale, say) are still probed.
fn fill_gaps(pts: &[f64], ratio: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(pts.len() * 2);
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        out.push(a);
        let k = ((b - a) / (ratio * b)).ceil() as usize;
        for j in 1..k {
            out.push(a + (b - a) * j as f64 / k as f64);
        }
    }
    out.extend(pts.last());
    out
}

/// Search grid for `β`: quantiles of both laws and of their sum's natural scale.
pub(crate) fn transmission_aware_grid(t: &DistributionSpec, c: &DistributionSpec) -> Vec<f64> {
    let mut grid = quantile_grid(&[c, t], 32);
    grid.extend((0..32).map(|i| {
        let p = 1e-4 + (1.0 - 2e-4) * i as f64 / 31.0;
        t.quantile(p) + c.quantile(p)
    }));
    grid.retain(|x| x.is_finite());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `E[min(θ, C)]`.
pub fn expected_min_theta_c(theta: Threshold, c: &DistributionSpec) -> f64 {
    match theta {
        Threshold::Finite(v) => c.expected_min(v),
        Threshold::WaitForCompletion => c.mean(),
    }
}

fn shifted_points(c: &DistributionSpec, shift: f64) -> Vec<f64> {
    c.support_points().into_iter().map(|p| p - shift).collect()
}

/// Queueing contribution `2E[(C̃ − θ − T)⁺]`.
pub fn expected_wait_term(theta: Threshold, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    match theta {
        Threshold::WaitForCompletion => Ok(0.0),
        Threshold::Finite(th) => {
            let e = t.expect(|x| c.stop_loss(x + th), &shifted_points(c, th))?;
            Ok(2.0 * e)
        }
    }
}

pub fn paoi_wop(theta: Threshold, t: &DistributionSpec, c: &DistributionSpec) -> Result<WopEvaluation> {
    let term_min_theta_c = expected_min_theta_c(theta, c);
    let term_wait = expected_wait_term(theta, t, c)?;
    Ok(assemble(term_min_theta_c, term_wait, t, c))
}

fn assemble(term_min_theta_c: f64, term_wait: f64, t: &DistributionSpec, c: &DistributionSpec) -> WopEvaluation {
    let constants = 2.0 * t.mean() + c.mean();
    WopEvaluation {
        paoi: term_min_theta_c + term_wait + constants,
        term_min_theta_c,
        term_wait,
        constants,
    }
}

/// `E_Θ[P(Θ)]` for a randomized threshold drawn afresh for every packet.
pub fn paoi_wop_randomized(theta_dist: &DistributionSpec, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    theta_dist.try_expect(
        |th| Ok(paoi_wop(Threshold::Finite(th), t, c)?.paoi),
        &c.support_points(),
    )
}

/// Objective when the threshold depends on the packet's own transmission time,
/// `ξ = max(0, β − T)`.
pub fn paoi_wop_transmission_aware(beta: f64, t: &DistributionSpec, c: &DistributionSpec) -> Result<WopEvaluation> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    if beta == f64::INFINITY {
        return paoi_wop(Threshold::WaitForCompletion, t, c);
    }
    if beta <= t.support_lower() {
        return paoi_wop(Threshold::ZERO, t, c);
    }
    let mut breaks = vec![beta];
    breaks.extend(c.support_points().into_iter().map(|p| beta - p));
    let term_min = t.expect(|x| c.expected_min((beta - x).max(0.0)), &breaks)?;
    let wait = t.try_expect(
        |x| {
            let g = (beta - x).max(0.0);
            t.expect(|s| c.stop_loss(g + s), &shifted_points(c, g))
        },
        &breaks,
    )?;
    Ok(assemble(term_min, 2.0 * wait, t, c))
}

/// `2E_T[F_C(T + θ)] − F_C(θ) − 1`, which is also `P′(θ)`.
pub fn stationarity_residual(theta: f64, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    let tail = t.expect(|x| c.sf(x + theta), &shifted_points(c, theta))?;
    Ok(c.sf(theta) - 2.0 * tail)
}

/// Second-order condition `E_T[f_C(T + θ)] ≥ f_C(θ)/2`.
pub fn second_order_ok(theta: f64, t: &DistributionSpec, c: &DistributionSpec) -> Result<bool> {
    let lhs = t.expect(|x| c.pdf(x + theta), &shifted_points(c, theta))?;
    let rhs = 0.5 * c.pdf(theta);
    Ok(lhs >= rhs - 1e-12 * rhs.abs().max(1.0))
}

/// Exact rule for exponential computation time: `θ* = 0` iff `L_μ ≤ 1/2`.
pub fn optimal_threshold_exp_c(t: &DistributionSpec, mu: f64) -> Result<OptimizationResult> {
    let c = DistributionSpec::exponential(mu)?;
    let l = t.transforms(mu)?.laplace;
    let flat = (l - 0.5).abs() <= 1e-12;
    let threshold = if l <= 0.5 || flat {
        Threshold::ZERO
    } else {
        Threshold::WaitForCompletion
    };
    let paoi = paoi_wop(threshold, t, &c)?.paoi;
    Ok(OptimizationResult {
        threshold,
        paoi,
        residual: if threshold.is_finite() { 1.0 - 2.0 * l } else { 0.0 },
        iterations: 0,
        degenerate_flat: flat,
        candidates: vec![Candidate { threshold, paoi }],
    })
}

/// `P″_z(θ) = λ(1 − F_C(θ)) − f_C(θ)`.
pub fn pz_second_derivative(theta: f64, lambda: f64, c: &DistributionSpec) -> f64 {
    lambda * c.sf(theta) - c.pdf(theta)
}

/// Piecewise bisection for exponential transmission time: on every stretch where
/// `P″_z > 0` the residual is increasing, so its root there is the unique local
/// minimum; the answer is the best of those, 0 and ∞.
pub fn optimize_threshold_exp_t(lambda: f64, c: &DistributionSpec) -> Result<OptimizationResult> {
    let t = DistributionSpec::exponential(lambda)?;
    let grid = quantile_grid(&[c], DEFAULT_GRID);
    let positive: Vec<bool> = grid.iter().map(|&x| pz_second_derivative(x, lambda, c) > 0.0).collect();

    let mut runs = Vec::new();
    let mut start = None;
    for (i, &p) in positive.iter().enumerate() {
        match (p, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, grid.len() - 1));
    }

    let mut roots = Vec::new();
    let mut iterations = 0;
    for &(a, b) in &runs {
        iterations += 1;
        let lo = grid[a];
        let mut hi = grid[b];
        if b == grid.len() - 1 && c.support_upper().is_infinite() {
            let far = c.quantile(1.0 - 1e-12);
            if pz_second_derivative(far, lambda, c) > 0.0 {
                hi = far;
            }
        }
        if !(lo < hi) {
            continue;
        }
        let residual = |x: f64| stationarity_residual(x, &t, c).unwrap_or(f64::NAN);
        let (r_lo, r_hi) = (residual(lo), residual(hi));
        if r_lo.is_nan() || r_hi.is_nan() {
            // surface the quadrature error for the offending stretch
            stationarity_residual(lo, &t, c)?;
            stationarity_residual(hi, &t, c)?;
        }
        if sign(r_lo) < 0 && sign(r_hi) > 0 {
            let root = bisect(residual, Bracket::new(lo, hi, -1, 1)?, DEFAULT_BISECT_TOL)?;
            if second_order_ok(root, &t, c)? {
                roots.push(root);
            }
        }
    }

    let mut candidates = vec![
        Candidate {
            threshold: Threshold::ZERO,
            paoi: paoi_wop(Threshold::ZERO, &t, c)?.paoi,
        },
        Candidate {
            threshold: Threshold::WaitForCompletion,
            paoi: paoi_wop(Threshold::WaitForCompletion, &t, c)?.paoi,
        },
    ];
    for r in roots {
        let th = Threshold::Finite(r);
        candidates.push(Candidate {
            threshold: th,
            paoi: paoi_wop(th, &t, c)?.paoi,
        });
    }
    finish(candidates, iterations, &t, c)
}

fn finish(
    candidates: Vec<Candidate>,
    iterations: usize,
    t: &DistributionSpec,
    c: &DistributionSpec,
) -> Result<OptimizationResult> {
    let best = select_best(&candidates);
    let flat = candidates
        .iter()
        .all(|k| !improves(k.paoi, best.paoi) && !improves(best.paoi, k.paoi));
    let residual = match best.threshold {
        Threshold::Finite(v) => stationarity_residual(v, t, c)?,
        Threshold::WaitForCompletion => 0.0,
    };
    Ok(OptimizationResult {
        threshold: best.threshold,
        paoi: best.paoi,
        residual,
        iterations,
        degenerate_flat: flat && candidates.len() > 1,
        candidates,
    })
}

/// Discrete local minima of the grid that get a golden-section refinement.
const REFINED_MINIMA: usize = 4;

/// Grid search over a quantile grid (plus 0 and ∞) refined by golden section
/// around the lowest discrete local minima.
pub(crate) fn grid_golden_minimize<F>(grid: &[f64], mut objective: F) -> Result<(Vec<Candidate>, usize)>
where
    F: FnMut(Threshold) -> Result<f64>,
{
    let mut candidates = Vec::with_capacity(grid.len() + 8);
    for &x in grid {
        let th = Threshold::Finite(x);
        candidates.push(Candidate {
            threshold: th,
            paoi: objective(th)?,
        });
    }
    candidates.push(Candidate {
        threshold: Threshold::WaitForCompletion,
        paoi: objective(Threshold::WaitForCompletion)?,
    });
    let mut evals = grid.len() + 1;
    let mut minima: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let v = candidates[i].paoi;
            (i == 0 || v <= candidates[i - 1].paoi) && (i + 1 == grid.len() || v <= candidates[i + 1].paoi)
        })
        .collect();
    minima.sort_by(|&a, &b| candidates[a].paoi.total_cmp(&candidates[b].paoi));
    minima.truncate(REFINED_MINIMA);
    for idx in minima {
        let lo = grid[idx.saturating_sub(1)];
        let hi = grid[(idx + 1).min(grid.len() - 1)];
        if lo >= hi {
            continue;
        }
        let tol = 1e-10 * hi.max(1e-3);
        let (x, v) = crate::numerics::golden_section_min(
            |x| {
                evals += 1;
                objective(Threshold::Finite(x))
            },
            lo,
            hi,
            tol,
        )?;
        candidates.push(Candidate {
            threshold: Threshold::Finite(x),
            paoi: v,
        });
    }
    Ok((candidates, evals))
}

/// Fixed-threshold optimizer for arbitrary laws.
pub fn optimize_threshold_general(t: &DistributionSpec, c: &DistributionSpec) -> Result<OptimizationResult> {
    let grid = quantile_grid(&[c, t], 64);
    let (candidates, evals) = grid_golden_minimize(&grid, |th| Ok(paoi_wop(th, t, c)?.paoi))?;
    let best = select_best(&candidates);
    let residual = match best.threshold {
        Threshold::Finite(v) => stationarity_residual(v, t, c)?,
        Threshold::WaitForCompletion => 0.0,
    };
    let flat = candidates
        .iter()
        .all(|k| !improves(k.paoi, best.paoi) && !improves(best.paoi, k.paoi));
    Ok(OptimizationResult {
        threshold: best.threshold,
        paoi: best.paoi,
        residual,
        iterations: evals,
        degenerate_flat: flat,
        candidates: summary(&candidates, best),
    })
}

/// Best fixed threshold, using the exact rule for exponential computation time,
/// the piecewise bisection for exponential transmission time and the general
/// grid search otherwise.
pub fn optimize_threshold(t: &DistributionSpec, c: &DistributionSpec) -> Result<OptimizationResult> {
    match (t.exponential_rate(), c.exponential_rate()) {
        (_, Some(mu)) => optimal_threshold_exp_c(t, mu),
        (Some(lambda), None) => optimize_threshold_exp_t(lambda, c),
        (None, None) => optimize_threshold_general(t, c),
    }
}

/// Optimizer over `β` for the transmission-aware rule `ξ = max(0, β − T)`.
pub fn optimize_transmission_aware_wop(t: &DistributionSpec, c: &DistributionSpec) -> Result<OptimizationResult> {
    let grid = transmission_aware_grid(t, c);
    let (candidates, evals) = grid_golden_minimize(&grid, |b| Ok(paoi_wop_transmission_aware(b.value(), t, c)?.paoi))?;
    let best = select_best(&candidates);
    let flat = candidates
        .iter()
        .all(|k| !improves(k.paoi, best.paoi) && !improves(best.paoi, k.paoi));
    Ok(OptimizationResult {
        threshold: best.threshold,
        paoi: best.paoi,
        residual: 0.0,
        iterations: evals,
        degenerate_flat: flat,
        candidates: summary(&candidates, best),
    })
}

/// Boundary candidates plus the winner, to keep reports short.
fn summary(all: &[Candidate], best: Candidate) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = all
        .iter()
        .filter(|k| k.threshold == Threshold::ZERO || k.threshold == Threshold::WaitForCompletion)
        .copied()
        .collect();
    if !out.contains(&best) {
        out.push(best);
    }
    out
}
