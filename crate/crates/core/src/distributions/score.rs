use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::VonMisesShape;
use crate::rng::open01;

/// Continuous law of an individual's score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScoreLaw {
    /// 1 − (θ/x)^c on x > θ.
    Pareto {
        theta: f64,
        c: f64,
    },
    /// 1 − e^{−rate·x} on x > 0.
    Exponential {
        rate: f64,
    },
    /// Standard logistic 1/(1 + e^{−x}).
    Logistic,
    Uniform,
}

impl ScoreLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreLaw::Pareto { theta, c } => theta > 0.0 && c > 0.0 && theta.is_finite() && c.is_finite(),
            ScoreLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid score law parameters: {self:?}")))
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            ScoreLaw::Pareto { theta, c } => {
                if x <= theta {
                    1.0
                } else {
                    (theta / x).powf(c)
                }
            }
            ScoreLaw::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            ScoreLaw::Logistic => 1.0 / (1.0 + x.exp()),
            ScoreLaw::Uniform => (1.0 - x).clamp(0.0, 1.0),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ScoreLaw::Logistic => 1.0 / (1.0 + (-x).exp()),
            ScoreLaw::Uniform => x.clamp(0.0, 1.0),
            _ => 1.0 - self.survival(x),
        }
    }

    /// The point with survival probability `s`.
    pub fn upper_quantile(&self, s: f64) -> f64 {
        match *self {
            ScoreLaw::Pareto { theta, c } => theta * s.powf(-1.0 / c),
            ScoreLaw::Exponential { rate } => -s.ln() / rate,
            ScoreLaw::Logistic => (1.0 / s - 1.0).ln(),
            ScoreLaw::Uniform => 1.0 - s,
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            ScoreLaw::Exponential { rate } => -(-p).ln_1p() / rate,
            ScoreLaw::Logistic => (p / (1.0 - p)).ln(),
            ScoreLaw::Uniform => p,
            _ => self.upper_quantile(1.0 - p),
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.upper_quantile(open01(rng))
    }

    /// Extreme-value shape attracting this law's maxima.
    pub fn shape(&self) -> VonMisesShape {
        match *self {
            ScoreLaw::Pareto { c, .. } => VonMisesShape::Frechet { alpha: c },
            ScoreLaw::Exponential { .. } | ScoreLaw::Logistic => VonMisesShape::Gumbel,
            ScoreLaw::Uniform => VonMisesShape::VonMises { theta: -1.0 },
        }
    }

    /// Norming (a(n), b(n)) with S^n(a(n)x + b(n)) → exp(−h(x)).
    pub fn norming(&self, n: f64) -> (f64, f64) {
        match *self {
            ScoreLaw::Pareto { theta, c } => (theta * n.powf(1.0 / c), 0.0),
            ScoreLaw::Exponential { rate } => (1.0 / rate, n.ln() / rate),
            ScoreLaw::Logistic => (1.0, n.ln()),
            ScoreLaw::Uniform => (1.0 / n, 1.0 - 1.0 / n),
        }
    }

    /// A = lim (1 − F_self)/(1 − F_other) at the common right endpoint.
    pub fn tail_equivalence(&self, other: &ScoreLaw) -> Option<f64> {
        use ScoreLaw::*;
        match (*self, *other) {
            (Pareto { theta: t1, c: c1 }, Pareto { theta: t2, c: c2 }) if c1 == c2 => Some((t1 / t2).powf(c1)),
            (Exponential { rate: r1 }, Exponential { rate: r2 }) if r1 == r2 => Some(1.0),
            (Exponential { rate }, Logistic) | (Logistic, Exponential { rate }) if rate == 1.0 => Some(1.0),
            (Logistic, Logistic) | (Uniform, Uniform) => Some(1.0),
            _ => None,
        }
    }
}
