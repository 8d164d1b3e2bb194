//! Positive random variables for transmission and computation times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::try_integrate_split;

/// Relative tolerance used for expectations taken by quadrature.
pub const EXPECT_REL_TOL: f64 = 1e-11;

/// A validated parametric law. Construct through the checked constructors or
/// serde; the fields of an existing value always satisfy the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Pareto { xm: f64, alpha: f64 },
    Deterministic { value: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawDistribution {
    Exponential { rate: f64 },
    Pareto { xm: f64, alpha: f64 },
    Deterministic { value: f64 },
}

impl TryFrom<RawDistribution> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw {
            RawDistribution::Exponential { rate } => Self::exponential(rate),
            RawDistribution::Pareto { xm, alpha } => Self::pareto(xm, alpha),
            RawDistribution::Deterministic { value } => Self::deterministic(value),
        }
    }
}

impl From<DistributionSpec> for RawDistribution {
    fn from(d: DistributionSpec) -> Self {
        match d {
            DistributionSpec::Exponential { rate } => RawDistribution::Exponential { rate },
            DistributionSpec::Pareto { xm, alpha } => RawDistribution::Pareto { xm, alpha },
            DistributionSpec::Deterministic { value } => RawDistribution::Deterministic { value },
        }
    }
}

/// `L_μ = E[e^{-μX}]` and `M_μ = E[X e^{-μX}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformPair {
    pub laplace: f64,
    pub weighted_laplace: f64,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential {
            rate: positive("exponential rate", rate)?,
        })
    }

    pub fn pareto(xm: f64, alpha: f64) -> Result<Self> {
        let xm = positive("pareto xm", xm)?;
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pareto alpha must be finite and > 1, got {alpha}"
            )));
        }
        Ok(Self::Pareto { xm, alpha })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Ok(Self::Deterministic {
            value: positive("deterministic value", value)?,
        })
    }

    /// Same family (and Pareto shape) rescaled to the requested mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        let mean = positive("mean", mean)?;
        match *self {
            Self::Exponential { .. } => Self::exponential(1.0 / mean),
            Self::Pareto { alpha, .. } => Self::pareto(mean * (alpha - 1.0) / alpha, alpha),
            Self::Deterministic { .. } => Self::deterministic(mean),
        }
    }

    /// The law of `s·X`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let s = positive("scale", s)?;
        match *self {
            Self::Exponential { rate } => Self::exponential(rate / s),
            Self::Pareto { xm, alpha } => Self::pareto(xm * s, alpha),
            Self::Deterministic { value } => Self::deterministic(value * s),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Pareto { .. } => "pareto",
            Self::Deterministic { .. } => "deterministic",
        }
    }

    pub fn exponential_rate(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    /// Density. The deterministic law has no density and reports 0 everywhere.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::Pareto { xm, alpha } => {
                if x < xm {
                    0.0
                } else {
                    alpha / x * (xm / x).powf(alpha)
                }
            }
            Self::Deterministic { .. } => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Pareto { xm, alpha } => {
                if x <= xm {
                    0.0
                } else {
                    -(alpha * (xm / x).ln()).exp_m1()
                }
            }
            Self::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Survival function `1 - cdf(x)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::Pareto { xm, alpha } => {
                if x <= xm {
                    1.0
                } else {
                    (xm / x).powf(alpha)
                }
            }
            Self::Deterministic { value } => {
                if x >= value {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { xm, alpha } => alpha * xm / (alpha - 1.0),
            Self::Deterministic { value } => value,
        }
    }

    /// Inverse cdf. Arguments outside `(0, 1)` map to the support ends.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.support_lower();
        }
        if p >= 1.0 {
            return self.support_upper();
        }
        match *self {
            Self::Exponential { rate } => -(-p).ln_1p() / rate,
            Self::Pareto { xm, alpha } => xm * (-(-p).ln_1p() / alpha).exp(),
            Self::Deterministic { value } => value,
        }
    }

    /// One draw by inversion of the survival function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => {
                let u = 1.0 - rng.random::<f64>();
                -u.ln() / rate
            }
            Self::Pareto { xm, alpha } => {
                let u = 1.0 - rng.random::<f64>();
                xm * u.powf(-1.0 / alpha)
            }
        }
    }

    pub fn support_lower(&self) -> f64 {
        match *self {
            Self::Exponential { .. } => 0.0,
            Self::Pareto { xm, .. } => xm,
            Self::Deterministic { value } => value,
        }
    }

    pub fn support_upper(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            _ => f64::INFINITY,
        }
    }

    /// Points where the cdf is not smooth (jumps or kinks), excluding 0.
    pub fn support_points(&self) -> Vec<f64> {
        match *self {
            Self::Exponential { .. } => Vec::new(),
            Self::Pareto { xm, .. } => vec![xm],
            Self::Deterministic { value } => vec![value],
        }
    }

    /// `E[X·1{X ≤ u}]`.
    pub fn partial_mean(&self, u: f64) -> f64 {
        if u.is_infinite() && u > 0.0 {
            return self.mean();
        }
        match *self {
            Self::Exponential { rate } => {
                if u <= 0.0 {
                    0.0
                } else {
                    // 1/λ − (u + 1/λ)e^{−λu}, rearranged to avoid cancellation for small u
                    let e = (-rate * u).exp();
                    (-(-rate * u).exp_m1() - rate * u * e) / rate
                }
            }
            Self::Pareto { xm, alpha } => {
                if u <= xm {
                    0.0
                } else {
                    -alpha * xm / (alpha - 1.0) * ((alpha - 1.0) * (xm / u).ln()).exp_m1()
                }
            }
            Self::Deterministic { value } => {
                if value <= u {
                    value
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[min(a, X)]`; `a = +∞` gives the mean.
    pub fn expected_min(&self, a: f64) -> f64 {
        if a.is_infinite() && a > 0.0 {
            return self.mean();
        }
        if a <= 0.0 {
            return a;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * a).exp_m1() / rate,
            Self::Pareto { xm, alpha } => {
                if a <= xm {
                    a
                } else {
                    self.mean() - xm * (xm / a).powf(alpha - 1.0) / (alpha - 1.0)
                }
            }
            Self::Deterministic { value } => value.min(a),
        }
    }

    /// Stop-loss transform `E[(X − a)⁺]`.
    pub fn stop_loss(&self, a: f64) -> f64 {
        if a.is_infinite() && a > 0.0 {
            return 0.0;
        }
        if a <= self.support_lower() {
            return self.mean() - a;
        }
        match *self {
            Self::Exponential { rate } => (-rate * a).exp() / rate,
            Self::Pareto { xm, alpha } => xm * (xm / a).powf(alpha - 1.0) / (alpha - 1.0),
            Self::Deterministic { .. } => 0.0,
        }
    }

    /// `E[h(X)]`. `breaks` lists points where `h` jumps or kinks; the support
    /// boundary is always split on.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut h: F, breaks: &[f64]) -> Result<f64> {
        self.try_expect(|x| Ok(h(x)), breaks)
    }

    pub fn try_expect<F>(&self, mut h: F, breaks: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        match *self {
            Self::Deterministic { value } => h(value),
            _ => {
                let lo = self.support_lower();
                try_integrate_split(
                    |x| {
                        let w = self.pdf(x);
                        if w == 0.0 {
                            Ok(0.0)
                        } else {
                            Ok(w * h(x)?)
                        }
                    },
                    lo,
                    f64::INFINITY,
                    breaks,
                    EXPECT_REL_TOL,
                )
            }
        }
    }

    /// Laplace-type transforms at `mu > 0`.
    pub fn transforms(&self, mu: f64) -> Result<TransformPair> {
        let mu = positive("transform argument mu", mu)?;
        match *self {
            Self::Exponential { rate } => {
                let l = rate / (rate + mu);
                Ok(TransformPair {
                    laplace: l,
                    weighted_laplace: l / (rate + mu),
                })
            }
            Self::Deterministic { value } => {
                let e = (-mu * value).exp();
                Ok(TransformPair {
                    laplace: e,
                    weighted_laplace: value * e,
                })
            }
            Self::Pareto { .. } => Ok(TransformPair {
                laplace: self.expect(|x| (-mu * x).exp(), &[])?,
                weighted_laplace: self.expect(|x| x * (-mu * x).exp(), &[])?,
            }),
        }
    }
}

/// Generator for one named substream of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
