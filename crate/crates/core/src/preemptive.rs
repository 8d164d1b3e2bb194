//! Average peak age of the preemptive server, where a fresh arrival evicts the
//! packet in computation.
//!
//! Successive deliveries form a renewal process, so the average peak is the ratio
//! `E[T + min(g(T), C) + (T + C)·1_Ω] / Pr(Ω)` with `Ω = {C ≤ g(T) + T′}`.
//! Ratios are minimized with Dinkelbach's parametric method.

use serde::Serialize;

use crate::distributions::{DistributionSpec, TransformPair};
use crate::error::{Error, Result};
use crate::nonpreemptive::{
    grid_golden_minimize, quantile_grid, select_best, transmission_aware_grid, Candidate, OptimizationResult, Threshold,
};

/// Default Dinkelbach tolerance on `|p(c)|`.
pub const DEFAULT_DELTA: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 100;

/// Waiting time `g(T)` between the arrival of a packet at the server and the
/// generation of the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaitFunction {
    Fixed {
        theta: Threshold,
    },
    /// `g(x) = max(0, β − x)`; `β = ∞` waits for completion.
    TransmissionAware {
        beta: f64,
    },
}

impl WaitFunction {
    pub fn fixed(theta: Threshold) -> Self {
        Self::Fixed { theta }
    }

    pub fn transmission_aware(beta: f64) -> Result<Self> {
        if beta >= 0.0 {
            Ok(Self::TransmissionAware { beta })
        } else {
            Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")))
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        match *self {
            Self::Fixed { theta } => theta.value(),
            Self::TransmissionAware { beta } => (beta - x).max(0.0),
        }
    }

    /// `θ` or `β` as a threshold value.
    pub fn parameter(&self) -> Threshold {
        match *self {
            Self::Fixed { theta } => theta,
            Self::TransmissionAware { beta } if beta == f64::INFINITY => Threshold::WaitForCompletion,
            Self::TransmissionAware { beta } => Threshold::Finite(beta),
        }
    }

    /// Equivalent fixed rule when `g` is constant on the support of `T`.
    fn normalized(&self, t: &DistributionSpec) -> Self {
        match *self {
            Self::TransmissionAware { beta } if beta == f64::INFINITY => Self::fixed(Threshold::WaitForCompletion),
            Self::TransmissionAware { beta } if beta <= t.support_lower() => Self::fixed(Threshold::ZERO),
            Self::TransmissionAware { beta } => match *t {
                DistributionSpec::Deterministic { value } => Self::fixed(Threshold::Finite((beta - value).max(0.0))),
                _ => *self,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WpEvaluation {
    pub numerator: f64,
    pub prob_success: f64,
    pub paoi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DinkelbachStep {
    pub c: f64,
    pub inner_threshold: Threshold,
    pub p_of_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct DinkelbachTrace {
    pub iterations: Vec<DinkelbachStep>,
    pub converged: bool,
}

/// Appendix-style closed forms under exponential computation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpCClosedForms {
    pub e_min: f64,
    pub pr: f64,
    pub e_t: f64,
    pub e_c: f64,
}

struct Parts {
    e_min: f64,
    pr: f64,
    e_tc: f64,
}

fn shifted(c: &DistributionSpec, u: f64) -> Vec<f64> {
    c.support_points().into_iter().map(|p| p - u).collect()
}

/// `(E_s[F_C(s + u)], E_s[G_C(s + u)])` over the next transmission `s`, with
/// `G_C` the partial mean of `C`.
fn inner(t: &DistributionSpec, c: &DistributionSpec, u: f64) -> Result<(f64, f64)> {
    let brk = shifted(c, u);
    let q = t.expect(|s| c.cdf(s + u), &brk)?;
    let gq = t.expect(|s| c.partial_mean(s + u), &brk)?;
    Ok((q, gq))
}

fn generic_parts(g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec) -> Result<Parts> {
    match g.normalized(t) {
        WaitFunction::Fixed {
            theta: Threshold::WaitForCompletion,
        } => Ok(Parts {
            e_min: c.mean(),
            pr: 1.0,
            e_tc: t.mean() + c.mean(),
        }),
        WaitFunction::Fixed {
            theta: Threshold::Finite(th),
        } => {
            let (q, gq) = inner(t, c, th)?;
            Ok(Parts {
                e_min: c.expected_min(th),
                pr: q,
                e_tc: t.mean() * q + gq,
            })
        }
        WaitFunction::TransmissionAware { beta } => {
            let mut breaks = vec![beta];
            breaks.extend(c.support_points().into_iter().map(|p| beta - p));
            let at_zero = inner(t, c, 0.0)?;
            let lookup = |x: f64| -> Result<(f64, f64)> {
                let u = (beta - x).max(0.0);
                if u == 0.0 {
                    Ok(at_zero)
                } else {
                    inner(t, c, u)
                }
            };
            let e_min = t.expect(|x| c.expected_min((beta - x).max(0.0)), &breaks)?;
            let pr = t.try_expect(|x| Ok(lookup(x)?.0), &breaks)?;
            let e_tc = t.try_expect(
                |x| {
                    let (q, gq) = lookup(x)?;
                    Ok(x * q + gq)
                },
                &breaks,
            )?;
            Ok(Parts { e_min, pr, e_tc })
        }
    }
}

/// `Pr(Ω)` by quadrature.
pub fn prob_success(g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    Ok(generic_parts(g, t, c)?.pr)
}

/// `E[(T + C)·1_Ω]` by quadrature.
pub fn expected_tc_on_success(g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    Ok(generic_parts(g, t, c)?.e_tc)
}

fn ratio(numerator: f64, pr: f64) -> Result<WpEvaluation> {
    if !(pr > 0.0) {
        return Err(Error::UnreachableDelivery);
    }
    Ok(WpEvaluation {
        numerator,
        prob_success: pr,
        paoi: numerator / pr,
    })
}

pub fn paoi_wp(g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec) -> Result<WpEvaluation> {
    let p = generic_parts(g, t, c)?;
    ratio(t.mean() + p.e_min + p.e_tc, p.pr)
}

/// `numerator − c·Pr(Ω)`.
pub fn dinkelbach_objective(c_param: f64, g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec) -> Result<f64> {
    let p = generic_parts(g, t, c)?;
    Ok(t.mean() + p.e_min + p.e_tc - c_param * p.pr)
}

/// The four renewal-reward ingredients for `C ~ exponential(μ)` from the
/// transforms of `T` and three one-dimensional integrals of `e^{−μg(T)}`.
pub fn closed_forms_exp_c(g: &WaitFunction, t: &DistributionSpec, mu: f64) -> Result<ExpCClosedForms> {
    let tr = t.transforms(mu)?;
    closed_forms_with(g, t, mu, tr)
}

fn closed_forms_with(g: &WaitFunction, t: &DistributionSpec, mu: f64, tr: TransformPair) -> Result<ExpCClosedForms> {
    let (l, m) = (tr.laplace, tr.weighted_laplace);
    let (i0, ix, ig) = match g.normalized(t) {
        WaitFunction::Fixed {
            theta: Threshold::WaitForCompletion,
        } => (0.0, 0.0, 0.0),
        WaitFunction::Fixed {
            theta: Threshold::Finite(th),
        } => {
            let e = (-mu * th).exp();
            (e, t.mean() * e, th * e)
        }
        WaitFunction::TransmissionAware { beta } => {
            let w = |x: f64| (-mu * (beta - x).max(0.0)).exp();
            let brk = [beta];
            (
                t.expect(w, &brk)?,
                t.expect(|x| x * w(x), &brk)?,
                t.expect(|x| (beta - x).max(0.0) * w(x), &brk)?,
            )
        }
    };
    Ok(ExpCClosedForms {
        e_min: (1.0 - i0) / mu,
        pr: 1.0 - l * i0,
        e_t: t.mean() - l * ix,
        e_c: 1.0 / mu - (l / mu) * i0 - l * ig - m * i0,
    })
}

/// Evaluates `(numerator, Pr)` through the closed forms when `C` is
/// exponential and through quadrature otherwise.
struct Evaluator<'a> {
    t: &'a DistributionSpec,
    c: &'a DistributionSpec,
    exp_c: Option<(f64, TransformPair)>,
}

impl<'a> Evaluator<'a> {
    fn new(t: &'a DistributionSpec, c: &'a DistributionSpec) -> Result<Self> {
        let exp_c = match c.exponential_rate() {
            Some(mu) => Some((mu, t.transforms(mu)?)),
            None => None,
        };
        Ok(Self { t, c, exp_c })
    }

    fn parts(&self, g: &WaitFunction) -> Result<(f64, f64)> {
        match self.exp_c {
            Some((mu, tr)) => {
                let f = closed_forms_with(g, self.t, mu, tr)?;
                Ok((self.t.mean() + f.e_min + f.e_t + f.e_c, f.pr))
            }
            None => {
                let p = generic_parts(g, self.t, self.c)?;
                Ok((self.t.mean() + p.e_min + p.e_tc, p.pr))
            }
        }
    }
}

fn dinkelbach<F>(c0: f64, delta: f64, mut inner_min: F) -> Result<(Threshold, WpEvaluation, DinkelbachTrace)>
where
    F: FnMut(f64) -> Result<(Threshold, f64, f64)>,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let mut trace = DinkelbachTrace::default();
    let mut c = c0;
    for _ in 0..MAX_ITERATIONS {
        let (x, num, pr) = inner_min(c)?;
        let p = num - c * pr;
        trace.iterations.push(DinkelbachStep {
            c,
            inner_threshold: x,
            p_of_c: p,
        });
        let eval = ratio(num, pr)?;
        if p.abs() <= delta {
            trace.converged = true;
            return Ok((x, eval, trace));
        }
        if !(eval.paoi < c) {
            break;
        }
        c = eval.paoi;
    }
    Err(Error::NotConverged {
        iterations: trace.iterations.len(),
        last: c,
        trace: Some(Box::new(trace)),
    })
}

fn result_from(
    x: Threshold,
    eval: WpEvaluation,
    trace: &DinkelbachTrace,
    candidates: Vec<Candidate>,
) -> OptimizationResult {
    OptimizationResult {
        threshold: x,
        paoi: eval.paoi,
        residual: trace.iterations.last().map_or(0.0, |s| s.p_of_c),
        iterations: trace.iterations.len(),
        degenerate_flat: false,
        candidates,
    }
}

fn inner_search<F>(grid: &[f64], ev: &Evaluator<'_>, c: f64, make: F) -> Result<(Threshold, f64, f64)>
where
    F: Fn(Threshold) -> WaitFunction,
{
    let (cands, _) = grid_golden_minimize(grid, |th| {
        let (n, pr) = ev.parts(&make(th))?;
        Ok(n - c * pr)
    })?;
    let best = select_best(&cands);
    let (n, pr) = ev.parts(&make(best.threshold))?;
    Ok((best.threshold, n, pr))
}

/// Best fixed threshold: Dinkelbach outer loop starting from the `θ = ∞` ratio,
/// inner minimization over {0, ∞} and a quantile grid refined by golden section.
pub fn optimize_fixed_threshold_wp(
    t: &DistributionSpec,
    c: &DistributionSpec,
    delta: f64,
) -> Result<(OptimizationResult, DinkelbachTrace)> {
    let ev = Evaluator::new(t, c)?;
    let grid = quantile_grid(&[c, t], 64);
    let c0 = 2.0 * t.mean() + 2.0 * c.mean();
    let (x, eval, trace) = dinkelbach(c0, delta, |cp| inner_search(&grid, &ev, cp, WaitFunction::fixed))?;
    let cands = boundary_candidates(&ev, WaitFunction::fixed)?;
    Ok((result_from(x, eval, &trace, cands), trace))
}

/// Best transmission-aware rule `g(x) = max(0, β − x)`, same scheme over `β`.
pub fn optimize_transmission_aware_wp(
    t: &DistributionSpec,
    c: &DistributionSpec,
    delta: f64,
) -> Result<(OptimizationResult, DinkelbachTrace)> {
    let ev = Evaluator::new(t, c)?;
    let grid = transmission_aware_grid(t, c);
    let c0 = 2.0 * t.mean() + 2.0 * c.mean();
    let (x, eval, trace) = dinkelbach(c0, delta, |cp| inner_search(&grid, &ev, cp, ta_of))?;
    let cands = boundary_candidates(&ev, ta_of)?;
    Ok((result_from(x, eval, &trace, cands), trace))
}

fn ta_of(th: Threshold) -> WaitFunction {
    WaitFunction::TransmissionAware { beta: th.value() }
}

fn boundary_candidates<F: Fn(Threshold) -> WaitFunction>(ev: &Evaluator<'_>, make: F) -> Result<Vec<Candidate>> {
    [Threshold::ZERO, Threshold::WaitForCompletion]
        .into_iter()
        .map(|th| {
            let (n, pr) = ev.parts(&make(th))?;
            Ok(Candidate {
                threshold: th,
                paoi: ratio(n, pr)?.paoi,
            })
        })
        .collect()
}

/// Pointwise-optimal `β` for exponential computation time at ratio level `c`:
/// `γ(c) = c − M_μ/L_μ − 1/(μ L_μ)`.
pub fn gamma_of_c(c: f64, mu: f64, tr: &TransformPair) -> f64 {
    c - tr.weighted_laplace / tr.laplace - 1.0 / (mu * tr.laplace)
}

/// Optimal policy for exponential computation time. The optimal wait is
/// transmission-aware with `β = γ(c*)`; `c` is iterated to its fixed point
/// `c ← ratio(γ(c))`, which is Dinkelbach with an exact inner step.
pub fn optimal_policy_exp_c(
    t: &DistributionSpec,
    mu: f64,
    delta: f64,
) -> Result<(OptimizationResult, DinkelbachTrace)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let tr = t.transforms(mu)?;
    let c_law = DistributionSpec::exponential(mu)?;
    let wait_for = |c: f64| WaitFunction::TransmissionAware {
        beta: gamma_of_c(c, mu, &tr).max(0.0),
    };
    let eval_at = |c: f64| -> Result<(f64, f64)> {
        let f = closed_forms_with(&wait_for(c), t, mu, tr)?;
        Ok((t.mean() + f.e_min + f.e_t + f.e_c, f.pr))
    };
    let mut trace = DinkelbachTrace::default();
    let mut c = 2.0 * t.mean() + 2.0 * c_law.mean();
    for _ in 0..MAX_ITERATIONS {
        let (num, pr) = eval_at(c)?;
        let beta = wait_for(c).parameter();
        trace.iterations.push(DinkelbachStep {
            c,
            inner_threshold: beta,
            p_of_c: num - c * pr,
        });
        let next = ratio(num, pr)?.paoi;
        if (next - c).abs() <= delta {
            trace.converged = true;
            let gamma = Threshold::Finite(gamma_of_c(next, mu, &tr).max(0.0));
            let (num, pr) = eval_at(next)?;
            let paoi = ratio(num, pr)?.paoi;
            let result = OptimizationResult {
                threshold: gamma,
                paoi,
                residual: next - c,
                iterations: trace.iterations.len(),
                degenerate_flat: false,
                candidates: vec![Candidate { threshold: gamma, paoi }],
            };
            return Ok((result, trace));
        }
        c = next;
    }
    Err(Error::NotConverged {
        iterations: trace.iterations.len(),
        last: c,
        trace: Some(Box::new(trace)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::stream_rng;
    use crate::nonpreemptive::paoi_wop;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exp(r: f64) -> DistributionSpec {
        DistributionSpec::exponential(r).unwrap()
    }
    fn det(v: f64) -> DistributionSpec {
        DistributionSpec::deterministic(v).unwrap()
    }
    fn par(xm: f64, a: f64) -> DistributionSpec {
        DistributionSpec::pareto(xm, a).unwrap()
    }
    fn fixed(v: f64) -> WaitFunction {
        WaitFunction::fixed(Threshold::new(v).unwrap())
    }
    fn ta(b: f64) -> WaitFunction {
        WaitFunction::transmission_aware(b).unwrap()
    }
    const INF: f64 = f64::INFINITY;

    /// Monte Carlo estimate of (Pr(Ω), E[(T+C)1_Ω]) with standard errors.
    fn monte_carlo(g: &WaitFunction, t: &DistributionSpec, c: &DistributionSpec, seed: u64) -> [(f64, f64); 2] {
        let mut rng = stream_rng(seed, 0);
        let n = 1_000_000;
        let mut acc = [(0.0, 0.0); 2];
        for _ in 0..n {
            let x = t.sample(&mut rng);
            let cc = c.sample(&mut rng);
            let s = t.sample(&mut rng);
            let ok = cc <= g.g(x) + s;
            let vals = [ok as u8 as f64, if ok { x + cc } else { 0.0 }];
            for (a, v) in acc.iter_mut().zip(vals) {
                a.0 += v;
                a.1 += v * v;
            }
        }
        acc.map(|(s, s2)| {
            let m = s / n as f64;
            (m, ((s2 / n as f64 - m * m) / n as f64).sqrt())
        })
    }

    #[test]
    fn prob_success_examples() {
        assert_eq!(prob_success(&fixed(INF), &exp(2.0), &exp(2.0)).unwrap(), 1.0);
        let p = prob_success(&fixed(0.0), &exp(2.0), &exp(2.0)).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-10);
        let [(m, se), _] = monte_carlo(&fixed(0.0), &exp(2.0), &exp(2.0), 1);
        assert!((m - p).abs() < 3.0 * se);
        let t = par(0.25, 2.0);
        let c = exp(2.0);
        assert_eq!(
            prob_success(&ta(0.2), &t, &c).unwrap(),
            prob_success(&fixed(0.0), &t, &c).unwrap()
        );
    }

    #[test]
    fn expected_tc_examples() {
        assert_abs_diff_eq!(
            expected_tc_on_success(&fixed(INF), &exp(2.0), &exp(2.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let v = expected_tc_on_success(&fixed(0.0), &exp(2.0), &exp(2.0)).unwrap();
        assert_abs_diff_eq!(v, 0.375, epsilon = 1e-10);
        let [_, (m, se)] = monte_carlo(&fixed(0.0), &exp(2.0), &exp(2.0), 2);
        assert!((m - v).abs() < 3.0 * se);
        // deterministic transmission: (t0 + E[C1{C≤t0}]/F(t0))·F(t0)
        let (t0, mu) = (0.4f64, 3.0f64);
        let f = 1.0 - (-mu * t0).exp();
        let partial = 1.0 / mu - (t0 + 1.0 / mu) * (-mu * t0).exp();
        let closed = (t0 + partial / f) * f;
        let v = expected_tc_on_success(&fixed(0.0), &det(t0), &exp(mu)).unwrap();
        assert_abs_diff_eq!(v, closed, epsilon = 1e-8);
    }

    #[test]
    fn paoi_examples() {
        let r = paoi_wp(&fixed(INF), &exp(4.0), &exp(4.0 / 3.0)).unwrap();
        assert_abs_diff_eq!(r.paoi, 2.0, epsilon = 1e-12);
        let r = paoi_wp(&fixed(0.0), &exp(2.0), &exp(2.0)).unwrap();
        assert_abs_diff_eq!(r.paoi, 1.75, epsilon = 1e-9);
        let b = paoi_wp(&ta(0.0), &exp(2.0), &exp(2.0)).unwrap();
        assert_eq!(r, b);
    }

    #[test]
    fn objective_examples() {
        let (t, c) = (exp(2.0), exp(2.0));
        let g = fixed(0.0);
        let r = paoi_wp(&g, &t, &c).unwrap();
        assert!(dinkelbach_objective(r.paoi, &g, &t, &c).unwrap().abs() < 1e-14);
        assert!(dinkelbach_objective(0.0, &g, &t, &c).unwrap() > 0.0);
        assert!(dinkelbach_objective(1.75, &g, &t, &c).unwrap().abs() < 1e-9);
    }

    #[test]
    fn unreachable_delivery() {
        let r = paoi_wp(&fixed(0.0), &det(0.1), &det(1.0));
        assert_eq!(r, Err(Error::UnreachableDelivery));
    }

    #[test]
    fn deterministic_tie_counts_as_delivered() {
        let r = paoi_wp(&fixed(0.0), &det(0.5), &det(0.5)).unwrap();
        assert_eq!(r.prob_success, 1.0);
        assert_abs_diff_eq!(r.paoi, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn fixed_optimizer_examples() {
        let (r, trace) = optimize_fixed_threshold_wp(&exp(2.0), &exp(2.0), DEFAULT_DELTA).unwrap();
        assert!(r.paoi <= 1.75 + 1e-12 && r.paoi <= 2.0);
        assert!(trace.converged);
        assert!(trace.iterations.last().unwrap().p_of_c.abs() <= DEFAULT_DELTA);
        let t = par(0.25, 2.0);
        let (r, _) = optimize_fixed_threshold_wp(&t, &exp(2.0), DEFAULT_DELTA).unwrap();
        assert_eq!(r.threshold, Threshold::ZERO);
    }

    #[test]
    fn fixed_optimizer_generic_path() {
        // non-exponential computation exercises the quadrature evaluator
        let (t, c) = (exp(1.0), par(0.3, 2.5));
        let (r, trace) = optimize_fixed_threshold_wp(&t, &c, DEFAULT_DELTA).unwrap();
        assert!(trace.converged);
        let direct = paoi_wp(&WaitFunction::fixed(r.threshold), &t, &c).unwrap().paoi;
        assert!((direct - r.paoi).abs() < 1e-8);
        for i in 0..=40 {
            let th = 0.05 * i as f64;
            assert!(r.paoi <= paoi_wp(&fixed(th), &t, &c).unwrap().paoi + 1e-9);
        }
    }

    #[test]
    fn transmission_aware_examples() {
        let (tao, _) = optimize_transmission_aware_wp(&exp(2.0), &exp(2.0), DEFAULT_DELTA).unwrap();
        let (fx, _) = optimize_fixed_threshold_wp(&exp(2.0), &exp(2.0), DEFAULT_DELTA).unwrap();
        assert!(tao.paoi <= fx.paoi + 1e-9);
        let t = par(0.1, 2.0);
        let c = exp(1.0 / 0.8);
        let base = paoi_wp(&ta(0.0), &t, &c).unwrap().paoi;
        for b in [0.02, 0.05, 0.1] {
            assert_eq!(paoi_wp(&ta(b), &t, &c).unwrap().paoi, base);
        }
    }

    #[test]
    fn transmission_aware_canonical_zero_on_flat_segment() {
        // E[T] = E[C] = 0.5: the optimal β lies inside [0, x_m], so 0 is returned
        let t = par(0.25, 2.0);
        let (r, _) = optimize_transmission_aware_wp(&t, &exp(2.0), DEFAULT_DELTA).unwrap();
        assert_eq!(r.threshold, Threshold::ZERO);
    }

    #[test]
    fn closed_forms_examples() {
        let t = exp(2.0);
        let f = closed_forms_exp_c(&fixed(0.0), &t, 2.0).unwrap();
        let p = generic_parts(&fixed(0.0), &t, &exp(2.0)).unwrap();
        assert_abs_diff_eq!(f.e_min, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.pr, p.pr, epsilon = 1e-10);
        assert_abs_diff_eq!(f.e_t + f.e_c, p.e_tc, epsilon = 1e-10);
        let f = closed_forms_exp_c(&fixed(INF), &t, 2.0).unwrap();
        assert_eq!(
            f,
            ExpCClosedForms {
                e_min: 0.5,
                pr: 1.0,
                e_t: 0.5,
                e_c: 0.5
            }
        );
    }

    #[test]
    fn closed_forms_transmission_aware_exp_t_symbolic() {
        // T ~ exp(λ), g = (β − x)⁺: I0 = E[e^{−μ(β−T)⁺}] in elementary form
        let (lam, mu, beta) = (1.5f64, 2.5f64, 0.7f64);
        let i0 = lam / (mu - lam) * ((-lam * beta).exp() - (-mu * beta).exp()) + (-lam * beta).exp();
        let l = lam / (lam + mu);
        let f = closed_forms_exp_c(&ta(beta), &exp(lam), mu).unwrap();
        assert_abs_diff_eq!(f.pr, 1.0 - l * i0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.e_min, (1.0 - i0) / mu, epsilon = 1e-10);
        let p = generic_parts(&ta(beta), &exp(lam), &exp(mu)).unwrap();
        assert_abs_diff_eq!(f.pr, p.pr, epsilon = 1e-8);
        assert_abs_diff_eq!(f.e_t + f.e_c, p.e_tc, epsilon = 1e-8);
    }

    #[test]
    fn best_effort_closed_form() {
        for (l, m) in [(2.0, 2.0), (4.0, 4.0 / 3.0), (4.0 / 3.0, 4.0)] {
            let formula = (l * l + 4.0 * l * m + 2.0 * m * m) / (l * m * (l + m));
            let r = paoi_wp(&ta(0.0), &exp(l), &exp(m)).unwrap();
            assert_abs_diff_eq!(r.paoi, formula, epsilon = 1e-9);
        }
    }

    #[test]
    fn exp_c_optimal_policy_dominates_probes() {
        let mut rng = stream_rng(77, 0);
        use rand::Rng;
        for t in [exp(2.0), par(0.25, 2.0), det(0.5), exp(4.0)] {
            let mu = 2.0;
            let (r, trace) = optimal_policy_exp_c(&t, mu, 1e-12).unwrap();
            assert!(trace.converged);
            assert!(r.paoi <= 2.0 * t.mean() + 2.0 / mu);
            for _ in 0..20 {
                let v: f64 = rng.random_range(0.0..3.0);
                let pa = paoi_wp(&ta(v), &t, &exp(mu)).unwrap().paoi;
                let pf = paoi_wp(&fixed(v), &t, &exp(mu)).unwrap().paoi;
                assert!(r.paoi <= pa + 1e-9 && r.paoi <= pf + 1e-9);
            }
            // self-consistency at the fixed point
            let tr = t.transforms(mu).unwrap();
            let g = gamma_of_c(r.paoi, mu, &tr).max(0.0);
            assert!((g - r.threshold.value()).abs() <= 1e-9);
            let direct = paoi_wp(&WaitFunction::TransmissionAware { beta: g }, &t, &exp(mu))
                .unwrap()
                .paoi;
            assert!((direct - r.paoi).abs() <= 1e-8);
        }
    }

    #[test]
    fn boundary_agreement_with_nonpreemptive() {
        for (t, c) in [(exp(1.0), exp(2.0)), (par(0.3, 2.0), det(0.4))] {
            let a = paoi_wp(&fixed(INF), &t, &c).unwrap().paoi;
            let b = paoi_wop(Threshold::WaitForCompletion, &t, &c).unwrap().paoi;
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            assert_abs_diff_eq!(a, 2.0 * t.mean() + 2.0 * c.mean(), epsilon = 1e-12);
        }
    }

    fn law() -> impl Strategy<Value = DistributionSpec> {
        prop_oneof![
            (0.3f64..5.0).prop_map(exp),
            (0.05f64..1.0, 1.5f64..4.0).prop_map(|(x, a)| par(x, a)),
            (0.1f64..2.0).prop_map(det),
        ]
    }

    fn wait() -> impl Strategy<Value = WaitFunction> {
        prop_oneof![(0.0f64..3.0).prop_map(fixed), (0.0f64..3.0).prop_map(ta)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ratio_consistency(t in law(), mu in 0.3f64..5.0, g in wait()) {
            let c = exp(mu);
            let r = paoi_wp(&g, &t, &c).unwrap();
            prop_assert!(dinkelbach_objective(r.paoi, &g, &t, &c).unwrap().abs() <= 1e-10);
            prop_assert!(r.prob_success > 0.0 && r.prob_success <= 1.0);
            prop_assert!(r.paoi >= 2.0 * t.mean());
        }

        #[test]
        fn lemma3_min_over_class_decreasing(t in law(), mu in 0.3f64..5.0, c1 in 0.0f64..3.0, dc in 0.01f64..2.0) {
            let c = exp(mu);
            let c2 = c1 + dc;
            let class: Vec<WaitFunction> = (0..25).map(|i| fixed(0.1 * i as f64)).chain(std::iter::once(fixed(INF))).collect();
            let min_at = |cp: f64| class.iter().map(|g| dinkelbach_objective(cp, g, &t, &c).unwrap()).fold(f64::INFINITY, f64::min);
            prop_assert!(min_at(c1) >= min_at(c2));
        }
    }

    #[test]
    fn exp_c_optimum_is_self_consistent() {
        use rand::Rng;
        for k in 0..100u64 {
            let mut rng = stream_rng(11, k);
            let t = match rng.random_range(0..3) {
                0 => exp(rng.random_range(0.2..5.0)),
                1 => par(rng.random_range(0.05..1.0), rng.random_range(1.5..4.0)),
                _ => det(rng.random_range(0.05..2.0)),
            };
            let mu = rng.random_range(0.3..5.0);
            let (opt, trace) = optimal_policy_exp_c(&t, mu, DEFAULT_DELTA).unwrap();
            assert!(trace.converged);
            let (c_star, gamma) = (opt.paoi, opt.threshold.value());
            let tr = t.transforms(mu).unwrap();
            assert!((gamma_of_c(c_star, mu, &tr).max(0.0) - gamma).abs() <= DEFAULT_DELTA);
            let direct = paoi_wp(&ta(gamma), &t, &exp(mu)).unwrap().paoi;
            assert!(
                (direct - c_star).abs() <= DEFAULT_DELTA,
                "{t:?} mu={mu}: {direct} vs {c_star}"
            );
            assert!(c_star <= 2.0 * t.mean() + 2.0 / mu + 1e-12);
        }
    }
}
