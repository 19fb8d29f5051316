use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::open01;

/// Bivariate geometric vector (ξ, η): the numbers of zeros before the first
/// one in each coordinate of an i.i.d. sequence of Bernoulli pairs with
/// cell probabilities `p00, p01, p10, p11`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BivariateGeometric {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

/// base^exp for base ∈ [0, 1], with 0^0 = 1.
fn pow01(base: f64, exp: f64) -> f64 {
    if exp == 0.0 {
        1.0
    } else if base == 0.0 {
        0.0
    } else {
        (exp * base.ln()).exp()
    }
}

impl BivariateGeometric {
    /// Builds the law from the three off-(0,0) cells; p00 is the remainder.
    pub fn from_cells(p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let p00 = 1.0 - p01 - p10 - p11;
        Self::new(p00.max(0.0), p01, p10, p11)
    }

    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        for (name, v) in [("p00", p00), ("p01", p01), ("p10", p10), ("p11", p11)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let total = p00 + p01 + p10 + p11;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("cell probabilities sum to {total}, not 1")));
        }
        let law = BivariateGeometric { p00, p01, p10, p11 };
        if law.p1_plus() <= 0.0 || law.p_plus1() <= 0.0 {
            return Err(domain("degenerate marginal: p1+ and p+1 must be positive or a coordinate is infinite"));
        }
        Ok(law)
    }

    pub fn p0_plus(&self) -> f64 {
        self.p00 + self.p01
    }
    pub fn p1_plus(&self) -> f64 {
        self.p10 + self.p11
    }
    pub fn p_plus0(&self) -> f64 {
        self.p00 + self.p10
    }
    pub fn p_plus1(&self) -> f64 {
        self.p01 + self.p11
    }

    /// P(ξ = x, η ≤ y), formed without differencing joint cdfs.
    pub fn first_eq_second_le(&self, x: u64, y: i64) -> f64 {
        if y < 0 {
            return 0.0;
        }
        let xf = x as f64;
        let marginal = self.p1_plus() * pow01(self.p0_plus(), xf);
        if (y as u64) < x {
            // η > y unless one of the first y+1 trials is (0,1)
            let log_ratio = (-self.p01 / self.p0_plus()).ln_1p();
            marginal * -((y as f64 + 1.0) * log_ratio).exp_m1()
        } else {
            let above = pow01(self.p00, xf) * self.p10 * pow01(self.p_plus0(), (y as u64 - x) as f64);
            (marginal - above).max(0.0)
        }
    }

    pub fn pmf(&self, l: u64, k: u64) -> f64 {
        let (lf, kf) = (l as f64, k as f64);
        if l < k {
            pow01(self.p00, lf) * self.p10 * pow01(self.p_plus0(), kf - lf - 1.0) * self.p_plus1()
        } else if l == k {
            pow01(self.p00, lf) * self.p11
        } else {
            pow01(self.p00, kf) * self.p01 * pow01(self.p0_plus(), lf - kf - 1.0) * self.p1_plus()
        }
    }

    /// P(ξ > l, η > k); an index of −1 (or below) places no constraint.
    pub fn joint_survival(&self, l: i64, k: i64) -> f64 {
        let (l, k) = (l.max(-1), k.max(-1));
        match (l, k) {
            (-1, -1) => 1.0,
            (-1, k) => pow01(self.p_plus0(), (k + 1) as f64),
            (l, -1) => pow01(self.p0_plus(), (l + 1) as f64),
            (l, k) if l <= k => pow01(self.p00, (l + 1) as f64) * pow01(self.p_plus0(), (k - l) as f64),
            (l, k) => pow01(self.p00, (k + 1) as f64) * pow01(self.p0_plus(), (l - k) as f64),
        }
    }

    /// 1 − F(x, y) with F the joint cdf, computed without forming F.
    pub fn cdf_complement(&self, x: f64, y: f64) -> f64 {
        let l = floor_index(x);
        let k = floor_index(y);
        let v = self.joint_survival(l, -1) + self.joint_survival(-1, k) - self.joint_survival(l, k);
        v.clamp(0.0, 1.0)
    }

    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        1.0 - self.cdf_complement(x, y)
    }

    /// P(max of ν i.i.d. copies ≤ (x, y)) = F(x, y)^ν, for real ν ≥ 0.
    pub fn array_cdf(&self, nu: f64, x: f64, y: f64) -> f64 {
        let c = self.cdf_complement(x, y);
        if c >= 1.0 {
            return if nu == 0.0 { 1.0 } else { 0.0 };
        }
        (nu * (-c).ln_1p()).exp()
    }

    /// Direct inverse-transform draw.
    ///
    /// T, the number of leading (0,0) trials, is geometric; the first other
    /// cell decides which coordinate stops at T; the other coordinate then
    /// needs a further geometric number of zeros.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let t = geometric_failures(self.p00, rng);
        let rest = self.p01 + self.p10 + self.p11;
        let u = open01(rng) * rest;
        if u < self.p11 {
            (t, t)
        } else if u < self.p11 + self.p10 {
            (t, t + 1 + geometric_failures(self.p_plus0(), rng))
        } else {
            (t + 1 + geometric_failures(self.p0_plus(), rng), t)
        }
    }

    /// Draw by running the Bernoulli-pair sequence itself.
    pub fn sample_sequence<R: RngCore + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let mut xi = None;
        let mut eta = None;
        let mut trial = 0u64;
        while xi.is_none() || eta.is_none() {
            let u = open01(rng);
            let (a, b) = if u < self.p00 {
                (0, 0)
            } else if u < self.p00 + self.p01 {
                (0, 1)
            } else if u < self.p00 + self.p01 + self.p10 {
                (1, 0)
            } else {
                (1, 1)
            };
            if a == 1 && xi.is_none() {
                xi = Some(trial);
            }
            if b == 1 && eta.is_none() {
                eta = Some(trial);
            }
            trial += 1;
        }
        (xi.unwrap_or(0), eta.unwrap_or(0))
    }
}

fn floor_index(x: f64) -> i64 {
    if x < 0.0 {
        -1
    } else if x > 9.0e18 {
        i64::MAX / 2
    } else {
        x.floor() as i64
    }
}

/// Number of failures before the first success when each trial fails with
/// probability `q`; P(T ≥ t) = q^t.
pub(crate) fn geometric_failures<R: RngCore + ?Sized>(q: f64, rng: &mut R) -> u64 {
    if q <= 0.0 {
        return 0;
    }
    let v = (open01(rng).ln() / q.ln()).floor();
    if v >= 1.8e19 {
        u64::MAX / 2
    } else {
        v as u64
    }
}
