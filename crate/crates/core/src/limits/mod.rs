//! Closed-form limit laws of normalized offspring maxima, the fixed points
//! that feed them, and their normalizing sequences.

mod fixed_point;
mod normalize;

pub use fixed_point::{gamma_subcritical, phi_laplace, psi_supercritical};
pub use normalize::*;

use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteLaw;
use crate::error::{domain, Error, Result};
use crate::numerics::{beta, integrate_to_infinity};
use crate::pgf::{ProcessSpec, Regime};

/// Extreme-value shape in von Mises form, `H(x) = exp{−h(x)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VonMisesShape {
    /// `h = (1 + x/θ)^{−θ}` for finite non-zero θ.
    VonMises { theta: f64 },
    /// `h = e^{−x}`, the θ → ±∞ limit.
    Gumbel,
    /// `h = x^{−alpha}` on x > 0: the Fréchet law in standard form.
    Frechet { alpha: f64 },
}

impl VonMisesShape {
    pub fn h(&self, x: f64) -> f64 {
        match *self {
            VonMisesShape::Gumbel => (-x).exp(),
            VonMisesShape::Frechet { alpha } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(-alpha)
                }
            }
            VonMisesShape::VonMises { theta } => {
                let base = 1.0 + x / theta;
                if base <= 0.0 {
                    if theta > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    base.powf(-theta)
                }
            }
        }
    }

    /// `H(x) = exp{−h(x)}`.
    pub fn cdf(&self, x: f64) -> f64 {
        (-self.h(x)).exp()
    }

    /// Solve `h(x) = u` for u > 0.
    pub fn h_inverse(&self, u: f64) -> f64 {
        match *self {
            VonMisesShape::Gumbel => -u.ln(),
            VonMisesShape::Frechet { alpha } => u.powf(-1.0 / alpha),
            VonMisesShape::VonMises { theta } => theta * (u.powf(-1.0 / theta) - 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            VonMisesShape::VonMises { theta } if theta == 0.0 || !theta.is_finite() => Err(Error::Config(
                "a von Mises shape needs finite non-zero theta; use the gumbel tag for infinity".into(),
            )),
            VonMisesShape::Frechet { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("Frechet index must be positive, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mixing law `N` of the normalized generation size in the near-maxima
/// limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mixing", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mixing {
    /// Standard exponential.
    Exponential,
    Empirical {
        sample: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LimitLaw {
    /// Subcritical: `x ↦ γ(F(⌊x⌋))` with γ the conditional-limit p.g.f.
    SubcriticalGamma {
        process: ProcessSpec,
    },
    /// Critical, finite variance: `1/(1 + σ² h(x)/2)`.
    CriticalFiniteVar {
        shape: VonMisesShape,
        sigma2: f64,
    },
    /// Critical, infinite variance: Burr XII `1 − (1 + x^{a(a−1)})^{−1/(a−1)}`.
    CriticalInfiniteVar {
        a: f64,
    },
    /// Critical with immigration: `(1 + σ² h(x)/2)^{−2μ/σ²}`.
    ImmigrationFiniteVar {
        shape: VonMisesShape,
        sigma2: f64,
        mu: f64,
    },
    /// Critical with immigration, infinite variance: Burr III `(1 + x^{−a(a−1)})^{−c}`.
    ImmigrationInfiniteVar {
        a: f64,
        c: f64,
    },
    /// Supercritical: `ψ(h(x))` with ψ the Laplace transform of the
    /// martingale limit of the parent generation.
    SupercriticalMixture {
        process: ProcessSpec,
        shape: VonMisesShape,
    },
    /// Law of `Λ − c`, Λ standard Gumbel.
    GumbelShifted {
        c: f64,
    },
    /// Law of `(Λ + α)⁺`.
    TruncatedGumbel {
        alpha: f64,
    },
    /// Law of `V − c`, V standard logistic.
    LogisticShifted {
        c: f64,
    },
    /// Law of `(V + α)⁺`.
    TruncatedLogistic {
        alpha: f64,
    },
    /// Bivariate Marshall–Olkin type extreme-value law `G(x, y)`.
    BivariateMo {
        a: f64,
        b: f64,
        c: f64,
    },
    /// `∫ G(x, y)^z dP(W ≤ z)` over an empirical sample of W.
    BisexualMixture {
        a: f64,
        b: f64,
        c: f64,
        w: Vec<f64>,
    },
    /// `Σ_{i<k} h^i/i! ∫ y^i e^{−y h} dN(y)`.
    NearMax {
        k: u32,
        shape: VonMisesShape,
        mixing: Mixing,
    },
    /// `1 − (h/(1+h))^k`: the near-maxima law under exponential mixing.
    ImmortalGeometric {
        k: u32,
        shape: VonMisesShape,
    },
    /// `1/(1 + h(x) + ρ h(cx + d))` with `ρ = v₂/v₁`.
    TwoType {
        shape: VonMisesShape,
        v_ratio: f64,
        c: f64,
        d: f64,
    },
    Uniform01,
}

impl LimitLaw {
    /// Check the parameters against the range in which the law arises.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match self {
            LimitLaw::SubcriticalGamma { process } => match process.regime() {
                Some(Regime::Subcritical) => Ok(()),
                _ => Err(Error::Config("the conditional subcritical limit requires offspring mean m < 1".into())),
            },
            LimitLaw::CriticalFiniteVar { shape, sigma2 } => {
                shape.validate()?;
                pos(*sigma2, "sigma2")
            }
            LimitLaw::CriticalInfiniteVar { a } | LimitLaw::ImmigrationInfiniteVar { a, .. } => {
                if !(*a > 1.0 && *a <= 2.0) {
                    return Err(Error::Config(format!(
                        "infinite-variance critical limits hold only for 1 < a <= 2, got a = {a}"
                    )));
                }
                if let LimitLaw::ImmigrationInfiniteVar { c, .. } = self {
                    pos(*c, "c")?;
                }
                Ok(())
            }
            LimitLaw::ImmigrationFiniteVar { shape, sigma2, mu } => {
                shape.validate()?;
                pos(*sigma2, "sigma2")?;
                pos(*mu, "immigration mean mu")
            }
            LimitLaw::SupercriticalMixture { process, shape } => {
                shape.validate()?;
                match process.regime() {
                    Some(Regime::Supercritical) => Ok(()),
                    _ => Err(Error::Config("the supercritical mixture requires offspring mean m > 1".into())),
                }
            }
            LimitLaw::GumbelShifted { c } | LimitLaw::LogisticShifted { c } => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("shift must be finite".into()))
                }
            }
            LimitLaw::TruncatedGumbel { alpha } | LimitLaw::TruncatedLogistic { alpha } => {
                if alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("alpha must be finite".into()))
                }
            }
            LimitLaw::BivariateMo { a, b, c } | LimitLaw::BisexualMixture { a, b, c, .. } => {
                if [*a, *b, *c].iter().all(|v| *v >= 0.0 && v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Config("bivariate constants a, b, c must lie in [0, ∞)".into()))
                }
            }
            LimitLaw::NearMax { k, shape, .. } | LimitLaw::ImmortalGeometric { k, shape } => {
                shape.validate()?;
                if *k == 0 {
                    Err(Error::Config("order statistic index k must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
            LimitLaw::TwoType { shape, v_ratio, c, .. } => {
                shape.validate()?;
                pos(*v_ratio, "v2/v1")?;
                pos(*c, "c")
            }
            LimitLaw::Uniform01 => Ok(()),
        }
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self, LimitLaw::BivariateMo { .. } | LimitLaw::BisexualMixture { .. })
    }

    /// Cumulative distribution function of a univariate limit.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            LimitLaw::SubcriticalGamma { process } => {
                if x < 0.0 {
                    0.0
                } else {
                    let law = process.offspring_law(1)?;
                    gamma_subcritical(process, law.cdf(x.floor() as u64))?
                }
            }
            LimitLaw::CriticalFiniteVar { shape, sigma2 } => 1.0 / (1.0 + sigma2 * shape.h(x) / 2.0),
            LimitLaw::CriticalInfiniteVar { a } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let k = a * (a - 1.0);
                    -(-(k * x.ln()).exp().ln_1p() / (a - 1.0)).exp_m1()
                }
            }
            LimitLaw::ImmigrationFiniteVar { shape, sigma2, mu } => {
                (-(2.0 * mu / sigma2) * (sigma2 * shape.h(x) / 2.0).ln_1p()).exp()
            }
            LimitLaw::ImmigrationInfiniteVar { a, c } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let k = a * (a - 1.0);
                    (-c * (-k * x.ln()).exp().ln_1p()).exp()
                }
            }
            LimitLaw::SupercriticalMixture { process, shape } => psi_supercritical(process, shape.h(x))?,
            LimitLaw::GumbelShifted { c } => (-(-(x + c)).exp()).exp(),
            LimitLaw::TruncatedGumbel { alpha } => {
                if x < 0.0 {
                    0.0
                } else {
                    (-(-(x - alpha)).exp()).exp()
                }
            }
            LimitLaw::LogisticShifted { c } => logistic(x + c),
            LimitLaw::TruncatedLogistic { alpha } => {
                if x < 0.0 {
                    0.0
                } else {
                    logistic(x - alpha)
                }
            }
            LimitLaw::NearMax { k, shape, mixing } => near_max_cdf(*k, shape.h(x), mixing),
            LimitLaw::ImmortalGeometric { k, shape } => {
                let h = shape.h(x);
                if h.is_infinite() {
                    0.0
                } else {
                    1.0 - (h / (1.0 + h)).powi(*k as i32)
                }
            }
            LimitLaw::TwoType { shape, v_ratio, c, d } => 1.0 / (1.0 + shape.h(x) + v_ratio * shape.h(c * x + d)),
            LimitLaw::Uniform01 => x.clamp(0.0, 1.0),
            LimitLaw::BivariateMo { .. } | LimitLaw::BisexualMixture { .. } => {
                return Err(domain("bivariate limit needs a point (x, y); use cdf2"))
            }
        })
    }

    /// `1 − cdf(x)`, formed directly for the power-tailed families so the
    /// far tail keeps its relative precision.
    pub fn survival(&self, x: f64) -> Result<f64> {
        self.validate()?;
        match self {
            LimitLaw::CriticalFiniteVar { shape, sigma2 } => {
                let v = sigma2 * shape.h(x) / 2.0;
                Ok(if v.is_infinite() { 1.0 } else { v / (1.0 + v) })
            }
            LimitLaw::CriticalInfiniteVar { a } if x > 0.0 => {
                let k = a * (a - 1.0);
                Ok((-(k * x.ln()).exp().ln_1p() / (a - 1.0)).exp())
            }
            LimitLaw::ImmigrationFiniteVar { shape, sigma2, mu } => {
                Ok(-(-(2.0 * mu / sigma2) * (sigma2 * shape.h(x) / 2.0).ln_1p()).exp_m1())
            }
            LimitLaw::ImmigrationInfiniteVar { a, c } if x > 0.0 => {
                let k = a * (a - 1.0);
                Ok(-(-c * (-k * x.ln()).exp().ln_1p()).exp_m1())
            }
            _ => Ok(1.0 - self.cdf(x)?),
        }
    }

    /// Joint cdf of a bivariate limit.
    pub fn cdf2(&self, x: f64, y: f64) -> Result<f64> {
        self.validate()?;
        match self {
            LimitLaw::BivariateMo { a, b, c } => Ok(bivariate_g(*a, *b, *c, x, y)),
            LimitLaw::BisexualMixture { a, b, c, w } => Ok(bisexual_mixture_cdf(*a, *b, *c, w, x, y)?.0),
            _ => Err(domain("univariate limit evaluated at a pair")),
        }
    }

    /// Mean of the limit law: the closed form where one is known, otherwise
    /// numerical integration of the tails.
    pub fn mean(&self) -> Result<f64> {
        self.validate()?;
        match self {
            LimitLaw::SubcriticalGamma { process } => {
                let law = process.offspring_law(1)?;
                subcritical_mean(process, &law)
            }
            LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha }, sigma2 } => {
                if *alpha <= 1.0 {
                    return Err(domain("limit has infinite mean for Frechet index <= 1"));
                }
                let r = std::f64::consts::PI / alpha;
                Ok((sigma2 / 2.0).powf(1.0 / alpha) * r / r.sin())
            }
            LimitLaw::CriticalInfiniteVar { a } => {
                let c = 1.0 / (a - 1.0);
                let k = a * (a - 1.0);
                Ok(c * beta(c - 1.0 / k, 1.0 + 1.0 / k))
            }
            LimitLaw::ImmigrationFiniteVar { shape: VonMisesShape::Frechet { alpha }, sigma2, mu } => {
                if *alpha <= 1.0 {
                    return Err(domain("limit has infinite mean for Frechet index <= 1"));
                }
                let kappa = 2.0 * mu / sigma2;
                Ok((sigma2 / 2.0).powf(1.0 / alpha) * kappa * beta(kappa + 1.0 / alpha, 1.0 - 1.0 / alpha))
            }
            LimitLaw::ImmigrationInfiniteVar { a, c } => {
                let k = a * (a - 1.0);
                if k <= 1.0 {
                    return Err(domain(format!("Burr III limit has infinite mean when a(a-1) <= 1 (a = {a})")));
                }
                Ok(c * beta(c + 1.0 / k, 1.0 - 1.0 / k))
            }
            LimitLaw::GumbelShifted { c } => Ok(EULER_GAMMA - c),
            LimitLaw::LogisticShifted { c } => Ok(-c),
            LimitLaw::BivariateMo { .. } | LimitLaw::BisexualMixture { .. } => {
                Err(domain("bivariate limit has no scalar mean"))
            }
            _ => self.mean_by_integration(),
        }
    }

    /// `∫_0^∞ (1 − F) − ∫_{−∞}^0 F`.
    pub fn mean_by_integration(&self) -> Result<f64> {
        if self.is_bivariate() {
            return Err(domain("bivariate limit has no scalar mean"));
        }
        let upper = integrate_to_infinity(|x| self.survival(x).unwrap_or(f64::NAN), 0.0, 1e-13, 1e-12);
        let lower = integrate_to_infinity(|x| self.cdf(-x).unwrap_or(f64::NAN), 0.0, 1e-13, 1e-12);
        let m = upper - lower;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::Numerical("mean integral did not converge".into()))
        }
    }

    /// Smallest x with `cdf(x) ≥ p`, by bracketing and bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.cdf(lo)? >= p {
            lo *= 2.0;
            if lo < -1e12 {
                return Err(Error::Numerical("quantile bracket diverged".into()));
            }
        }
        while self.cdf(hi)? < p {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Numerical("quantile bracket diverged".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid)? >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Limit quantiles at levels 0.05, 0.10, …, 0.95.
    pub fn quantile_grid(&self) -> Result<Vec<f64>> {
        (1..=19).map(|i| self.quantile(i as f64 * 0.05)).collect()
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `G(x, y) = exp{−e^{−x−a−c} − e^{−y−b−c} + e^{−max(x,y)−a−b−c}}`.
pub fn bivariate_g(a: f64, b: f64, c: f64, x: f64, y: f64) -> f64 {
    let e = -(-x - a - c).exp() - (-y - b - c).exp() + (-x.max(y) - a - b - c).exp();
    e.exp()
}

/// Mixture `mean_i G(x, y)^{w_i}` with its standard error.
pub fn bisexual_mixture_cdf(a: f64, b: f64, c: f64, w: &[f64], x: f64, y: f64) -> Result<(f64, f64)> {
    if w.is_empty() {
        return Err(domain("mixture needs a non-empty W sample"));
    }
    let lg = bivariate_g(a, b, c, x, y).ln();
    let vals = w.iter().map(|wi| if *wi == 0.0 { 1.0 } else { (wi * lg).exp() });
    Ok(mean_and_stderr(vals))
}

pub(crate) fn mean_and_stderr(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in vals {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

fn near_max_cdf(k: u32, h: f64, mixing: &Mixing) -> f64 {
    if h.is_infinite() {
        return 0.0;
    }
    match mixing {
        Mixing::Exponential => {
            // ∫ y^i e^{−yh} e^{−y} dy = i!/(1+h)^{i+1}
            (0..k).map(|i| h.powi(i as i32) / (1.0 + h).powi(i as i32 + 1)).sum()
        }
        Mixing::Empirical { sample } => {
            let n = sample.len() as f64;
            sample
                .iter()
                .map(|y| {
                    let mut term = (-y * h).exp();
                    let mut acc = term;
                    for i in 1..k {
                        term *= y * h / i as f64;
                        acc += term;
                    }
                    acc
                })
                .sum::<f64>()
                / n
        }
    }
}

/// `Σ_k [1 − γ(F(k))]`, stopped once a term falls below 1e−12.
fn subcritical_mean(process: &ProcessSpec, law: &DiscreteLaw) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..10_000_000u64 {
        let term = 1.0 - gamma_subcritical(process, law.cdf(k))?;
        acc += term;
        // terms decay at least geometrically once F(k) is near one
        if term < 1e-12 {
            return Ok(acc);
        }
    }
    Err(Error::Numerical("subcritical mean series did not converge".into()))
}

#[cfg(test)]
mod tests;
