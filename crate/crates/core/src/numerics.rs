//! Quadrature and one-dimensional root finding shared by the analytic modules.
//!
//! Everything here is a pure function of caller-supplied closures. Integrals over
//! `[lo, ∞)` are mapped onto `[0, 1)` with `x = lo + t/(1-t)` and evaluated by a
//! globally adaptive 7/15-point Gauss–Kronrod rule, which never samples the
//! endpoint `t = 1`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

/// Default relative tolerance for [`integrate`].
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Default absolute tolerance on the argument for [`bisect`].
pub const DEFAULT_BISECT_TOL: f64 = 1e-10;
/// Default number of grid points for sign-change scans.
pub const DEFAULT_GRID: usize = 4096;

const ABS_TOL: f64 = 1e-16;
const MAX_INTERVALS: usize = 2000;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    #[error("quadrature failure: estimate {estimate:e} with error bound {error_bound:e}")]
    Quadrature { estimate: f64, error_bound: f64 },
    #[error("bad bracket [{lo}, {hi}]: endpoints do not change sign")]
    BadBracket { lo: f64, hi: f64 },
    #[error("invalid numerics argument: {0}")]
    InvalidArgument(String),
}

/// An interval known to contain a sign change of some function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub sign_lo: i8,
    pub sign_hi: i8,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64, sign_lo: i8, sign_hi: i8) -> Result<Self, NumericsError> {
        let valid_sign = |s: i8| s == 1 || s == -1;
        if !(lo < hi) || !valid_sign(sign_lo) || !valid_sign(sign_hi) || sign_lo == sign_hi {
            return Err(NumericsError::BadBracket { lo, hi });
        }
        Ok(Self {
            lo,
            hi,
            sign_lo,
            sign_hi,
        })
    }

    /// Evaluates `f` at both ends and builds the bracket if the signs differ.
    pub fn probe<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<Self, NumericsError> {
        Self::new(lo, hi, sign(f(lo)), sign(f(hi)))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sign used by the root finders: strictly positive values are `+1`, everything
/// else (including zero) is `-1`.
pub fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else {
        -1
    }
}

// 7-point Gauss / 15-point Kronrod abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F, E>(f: &mut F, a: f64, b: f64) -> Result<Segment, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment {
        a,
        b,
        value,
        error,
        abs_value: res_abs,
    })
}

fn adaptive<F, E>(f: &mut F, a: f64, b: f64, rel_tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    let first = kronrod(f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut total_abs = first.abs_value;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    loop {
        let roundoff = 100.0 * f64::EPSILON * total_abs;
        let target = ABS_TOL.max(rel_tol * total.abs()).max(roundoff);
        if total_err <= target {
            return Ok(total);
        }
        if heap.len() >= MAX_INTERVALS {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod(f, worst.a, mid)?;
        let right = kronrod(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(left);
        heap.push(right);
    }
    // Recompute from the pieces to shed accumulated update error before judging.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    let abs_value: f64 = heap.iter().map(|s| s.abs_value).sum();
    let target = ABS_TOL.max(rel_tol * value.abs()).max(100.0 * f64::EPSILON * abs_value);
    if error <= target {
        Ok(value)
    } else {
        Err(NumericsError::Quadrature {
            estimate: value,
            error_bound: error,
        }
        .into())
    }
}

/// Integral of a fallible integrand over `[lo, hi]`, `hi` possibly `+∞`.
pub fn try_integrate<F, E>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    if !(rel_tol > 0.0) || lo.is_nan() || hi.is_nan() || lo.is_infinite() {
        return Err(
            NumericsError::InvalidArgument(format!("integrate over [{lo}, {hi}] with rel_tol {rel_tol}")).into(),
        );
    }
    if hi == lo {
        return Ok(0.0);
    }
    if hi < lo {
        return try_integrate(f, hi, lo, rel_tol).map(|v| -v);
    }
    if hi.is_infinite() {
        let mut mapped = |t: f64| -> Result<f64, E> {
            let s = 1.0 - t;
            let x = lo + t / s;
            if x.is_infinite() {
                return Ok(0.0);
            }
            Ok(f(x)? / (s * s))
        };
        adaptive(&mut mapped, 0.0, 1.0, rel_tol)
    } else {
        adaptive(&mut f, lo, hi, rel_tol)
    }
}

/// Integral of `f` over `[lo, hi]`, `hi` possibly `+∞`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64, NumericsError> {
    try_integrate(|x| Ok::<f64, NumericsError>(f(x)), lo, hi, rel_tol)
}

/// Like [`try_integrate`] but splits the domain at every break point strictly
/// inside `(lo, hi)`. Break points mark jumps or kinks of the integrand.
pub fn try_integrate_split<F, E>(mut f: F, lo: f64, hi: f64, breaks: &[f64], rel_tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    let mut edges: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut total = 0.0;
    let mut start = lo;
    for &edge in edges.iter().chain(std::iter::once(&hi)) {
        total += try_integrate(&mut f, start, edge, rel_tol)?;
        start = edge;
    }
    Ok(total)
}

/// Root of `f` inside `bracket`, located to within `tol` on the argument.
pub fn bisect<F: Fn(f64) -> f64>(f: F, bracket: Bracket, tol: f64) -> Result<f64, NumericsError> {
    try_bisect(|x| Ok::<f64, NumericsError>(f(x)), bracket, tol)
}

/// Fallible-function variant of [`bisect`]. The bracket signs are trusted.
pub fn try_bisect<F, E>(mut f: F, bracket: Bracket, tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<NumericsError>,
{
    if bracket.sign_lo == bracket.sign_hi || !(bracket.lo < bracket.hi) {
        return Err(NumericsError::BadBracket {
            lo: bracket.lo,
            hi: bracket.hi,
        }
        .into());
    }
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidArgument(format!("bisection tolerance {tol}")).into());
    }
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if sign(v) == bracket.sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brackets around every sign change of `f` on a uniform grid of `grid`
/// points spanning `[lo, hi]`, in increasing order.
pub fn find_sign_changes<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> Vec<Bracket> {
    if grid < 2 || !(lo < hi) {
        return Vec::new();
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let points: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { hi } else { lo + step * i as f64 })
        .collect();
    sign_changes_on(f, &points)
}

/// Brackets around every sign change of `f` between adjacent entries of an
/// increasing point set (e.g. a quantile-placed grid).
pub fn sign_changes_on<F: Fn(f64) -> f64>(f: F, points: &[f64]) -> Vec<Bracket> {
    let signs: Vec<i8> = points.iter().map(|&x| sign(f(x))).collect();
    points
        .windows(2)
        .zip(signs.windows(2))
        .filter(|(_, s)| s[0] != s[1])
        .filter_map(|(p, s)| Bracket::new(p[0], p[1], s[0], s[1]).ok())
        .collect()
}

/// Golden-section search for a minimum of `f` on `[a, b]`. Returns the best
/// point evaluated, endpoints included.
pub fn golden_section_min<F, E>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let fa = f(lo)?;
    let fb = f(hi)?;
    let mut best = if fb < fa { (hi, fb) } else { (lo, fa) };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn integrates_exponential_tail() {
        let v = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, DEFAULT_REL_TOL).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn integrates_constant() {
        let v = integrate(|_| 1.0, 0.0, 1.0, DEFAULT_REL_TOL).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reversed_and_empty_intervals() {
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-8).unwrap(), 0.0);
        let v = integrate(|x| x, 1.0, 0.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn split_handles_jump() {
        let step = |x: f64| if x < 0.3 { 0.0 } else { 2.0 };
        let v: Result<f64, NumericsError> = try_integrate_split(|x| Ok(step(x)), 0.0, 1.0, &[0.3], 1e-12);
        assert_abs_diff_eq!(v.unwrap(), 1.4, epsilon = 1e-13);
    }

    // Independent oracle: trapezoid rule on a 10^6-point logarithmic grid over
    // [x_m, x_m + 60], far past where e^{-2x} matters.
    fn pareto_laplace_trapezoid() -> f64 {
        let (xm, alpha, mu) = (0.25f64, 2.0f64, 2.0f64);
        let f = |x: f64| alpha * xm.powf(alpha) * x.powf(-alpha - 1.0) * (-mu * x).exp();
        let n = 1_000_000;
        let (a, b) = (xm.ln(), (xm + 60.0).ln());
        let h = (b - a) / n as f64;
        // substitute x = e^u, dx = e^u du
        let g = |u: f64| {
            let x = u.exp();
            f(x) * x
        };
        let mut s = 0.5 * (g(a) + g(b));
        for i in 1..n {
            s += g(a + h * i as f64);
        }
        s * h
    }

    #[test]
    fn pareto_laplace_golden_value() {
        let oracle = pareto_laplace_trapezoid();
        let v = integrate(
            |x| 2.0 * 0.25f64.powi(2) * x.powi(-3) * (-2.0 * x).exp(),
            0.25,
            f64::INFINITY,
            1e-10,
        )
        .unwrap();
        assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
        assert_abs_diff_eq!(v, PARETO_LAPLACE_GOLDEN, epsilon = 1e-9);
    }

    // Frozen from the trapezoid oracle above.
    const PARETO_LAPLACE_GOLDEN: f64 = 0.443_208_728_550_357;

    #[test]
    fn bisect_linear_and_exponential() {
        let b = Bracket::probe(|x| x - 1.0, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(bisect(|x| x - 1.0, b, 1e-12).unwrap(), 1.0, epsilon = 1e-11);
        let g = |x: f64| (-x).exp() - 0.5;
        let b = Bracket::probe(g, 0.0, 10.0).unwrap();
        let r = bisect(g, b, DEFAULT_BISECT_TOL).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::LN_2, epsilon = 1e-10);
    }

    #[test]
    fn bisect_bimodal_density_residual() {
        // Stationarity residual sf_C(θ) − 2 E_T[sf_C(T+θ)] for exp T (λ = 3) and a
        // bimodal C mixing two narrow normals at 1 and 4, evaluated by quadrature.
        let lambda = 3.0;
        let sf = |y: f64| {
            let n = |m: f64, s: f64| 0.5 * erfc((y - m) / (s * std::f64::consts::SQRT_2));
            0.5 * n(1.0, 0.1) + 0.5 * n(4.0, 0.1)
        };
        let residual = |theta: f64| {
            let e = integrate(
                |x| lambda * (-lambda * x).exp() * sf(x + theta),
                0.0,
                f64::INFINITY,
                1e-12,
            )
            .unwrap();
            sf(theta) - 2.0 * e
        };
        // Dense-grid oracle: first upward sign change on [1.5, 3.9].
        let n = 200_000;
        let mut oracle = None;
        let mut prev = residual(1.5);
        for i in 1..=n {
            let x = 1.5 + 2.4 * i as f64 / n as f64;
            let v = residual(x);
            if prev <= 0.0 && v > 0.0 {
                oracle = Some(x);
                break;
            }
            prev = v;
        }
        let oracle = oracle.expect("interior root exists");
        let b = Bracket::probe(residual, 1.5, 3.9).unwrap();
        let root = bisect(residual, b, 1e-10).unwrap();
        assert!((root - oracle).abs() < 2.4 / n as f64 + 1e-9, "{root} vs {oracle}");
        assert!(residual(root).abs() < 1e-8);
    }

    fn erfc(x: f64) -> f64 {
        // Numerical Recipes erfcc, fractional error below 1.2e-7.
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t
            * (-z * z - 1.265_512_23
                + t * (1.000_023_68
                    + t * (0.374_091_96
                        + t * (0.096_784_18
                            + t * (-0.186_288_06
                                + t * (0.278_868_07
                                    + t * (-1.135_203_98
                                        + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
                .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn bad_bracket_rejected() {
        assert!(matches!(
            Bracket::probe(|x| x * x + 1.0, -1.0, 1.0),
            Err(NumericsError::BadBracket { .. })
        ));
        let forged = Bracket {
            lo: 0.0,
            hi: 1.0,
            sign_lo: 1,
            sign_hi: 1,
        };
        assert!(bisect(|x| x, forged, 1e-6).is_err());
    }

    #[test]
    fn sign_changes_basic() {
        let b = find_sign_changes(|x| x - 0.5, 0.0, 1.0, 11);
        assert_eq!(b.len(), 1);
        assert!(b[0].lo <= 0.5 && 0.5 <= b[0].hi);
        assert!(find_sign_changes(|_| 1.0, 0.0, 1.0, 11).is_empty());
        assert!(find_sign_changes(|x| x, 0.0, 1.0, 1).is_empty());
    }

    #[test]
    fn pz_exponential_sign_changes_match_dense_grid() {
        // λ(1 − F_C) − f_C for exp C (μ = 2) and λ = 2 is identically zero: no brackets.
        let (lambda, mu) = (2.0f64, 2.0f64);
        let pz = |t: f64| lambda * (-mu * t).exp() - mu * (-mu * t).exp();
        let coarse = find_sign_changes(pz, 0.0, 10.0, DEFAULT_GRID);
        let dense = find_sign_changes(pz, 0.0, 10.0, 100_000);
        assert!(coarse.len() <= 1);
        assert_eq!(coarse.len(), dense.len());
    }

    #[test]
    fn golden_section_quadratic() {
        let r: Result<(f64, f64), NumericsError> = golden_section_min(|x| Ok((x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-10);
        let (x, v) = r.unwrap();
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-8);
        assert!(v < 1e-15);
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            p in proptest::collection::vec(-2.0f64..2.0, 4),
            q in proptest::collection::vec(-2.0f64..2.0, 4),
            rate in 0.5f64..4.0,
        ) {
            let poly = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, k| acc * x + k);
            let f = |x: f64| poly(&p, x) * (-rate * x).exp();
            let g = |x: f64| poly(&q, x) * (-rate * x).exp();
            let tol = 1e-10;
            let lhs = integrate(|x| a * f(x) + b * g(x), 0.0, f64::INFINITY, tol).unwrap();
            let fi = integrate(f, 0.0, f64::INFINITY, tol).unwrap();
            let gi = integrate(g, 0.0, f64::INFINITY, tol).unwrap();
            let abs_f = integrate(|x| f(x).abs(), 0.0, f64::INFINITY, tol).unwrap();
            let abs_g = integrate(|x| g(x).abs(), 0.0, f64::INFINITY, tol).unwrap();
            let bound = 10.0 * tol * (a.abs() * abs_f + b.abs() * abs_g) + 1e-13;
            prop_assert!((lhs - (a * fi + b * gi)).abs() <= bound);
        }

        #[test]
        fn bisect_stays_in_bracket(root in -5.0f64..5.0, width in 0.1f64..5.0, skew in 0.05f64..0.95) {
            let lo = root - width * skew;
            let hi = root + width * (1.0 - skew);
            let f = |x: f64| (x - root).powi(3);
            let b = Bracket::probe(f, lo, hi).unwrap();
            let x = bisect(f, b, 1e-10).unwrap();
            prop_assert!(lo <= x && x <= hi);
            prop_assert!((x - root).abs() <= 1e-9);
        }

        #[test]
        fn sign_changes_recover_simple_roots(mut roots in proptest::collection::vec(0.0f64..10.0, 1..5)) {
            roots.sort_by(f64::total_cmp);
            let spacing = roots.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            prop_assume!(spacing > 0.05);
            let f = |x: f64| roots.iter().map(|r| x - r).product::<f64>();
            let br = find_sign_changes(f, -0.5, 10.5, 2000);
            prop_assert_eq!(br.len(), roots.len());
            for (b, r) in br.iter().zip(&roots) {
                prop_assert!(b.lo <= *r && *r <= b.hi);
            }
        }
    }
}
