//! Offspring, immigration and score laws.
//!
//! Every integer law is evaluated through its survival function
//! `S(k) = P(X > k)`; the p.g.f. is exposed in complement form
//! `1 − f(1 − t)`, which stays accurate as `s → 1` where maxima live.

mod bivariate;
mod score;

pub use bivariate::BivariateGeometric;
pub use score::ScoreLaw;

use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::RngCore;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, domain, Error, Result};
use crate::numerics::{beta_reg, ln_gamma, power_exp_sum, zeta};
use crate::rng::open01;

/// Parameters of a law, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// pmf p·q^j on j ≥ 0.
    Geometric { p: f64 },
    /// p.g.f. (1 + m − ms)^{−1}.
    GeometricMeanForm { m: f64 },
    /// p.g.f. s/(1 + m − ms); never zero.
    ShiftedGeometric { m: f64 },
    /// Mass 1−a at zero, a·p(1−p)^{j−1} on j ≥ 1.
    ZeroModifiedGeometric { a: f64, p: f64 },
    /// p.g.f. 1 − (1−s)(1 + (a−1)(1−s))^{−1/(a−1)}.
    RegVaryingCritical { a: f64 },
    /// p.g.f. exp{−λ(1−s)^{a−1}}.
    PoissonStable { lambda: f64, a: f64 },
    /// p.g.f. 1 − (μ/m)·log(1 + m − ms).
    LogImmigration { m: f64, mu: f64 },
    /// p.g.f. (1 + m − ms)^{−ν}.
    NegBinImmigration { m: f64, nu: f64 },
    /// Mean-one law with P(X > k) = θ(1+k)^{−a} for k ≥ 1.
    HeavyTailCritical { a: f64 },
    /// Finite support {0, …, len−1}.
    Tabulated { pmf: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Functional {
    Pmf,
    Cdf,
    Survival,
    Pgf,
}

/// An immutable, cheaply clonable integer-valued law.
#[derive(Clone)]
pub struct DiscreteLaw(Arc<Inner>);

struct Inner {
    spec: LawSpec,
    repr: Repr,
    mean: f64,
    variance: f64,
    tail_index: Option<f64>,
    head: OnceLock<Vec<f64>>,
}

enum Repr {
    /// S(k) = amp·q^k for k ≥ 0 — covers all geometric-type laws.
    Zmg {
        amp: f64,
        p: f64,
        q: f64,
        ln_q: f64,
    },
    RegVarying {
        amp: f64,
        x: f64,
        r: f64,
    },
    PoissonStable {
        lambda: f64,
        alpha: f64,
        series: Mutex<Panjer>,
    },
    Log {
        c: f64,
        m: f64,
        x: f64,
    },
    NegBin {
        nu: f64,
        p: f64,
        q: f64,
    },
    Heavy {
        a: f64,
        theta: f64,
        s0: f64,
    },
    Tabulated {
        pmf: Vec<f64>,
        surv: Vec<f64>,
    },
}

const HEAD_LEN: usize = 1024;
const SMALL_COUNT: u64 = 32;

impl fmt::Debug for DiscreteLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.spec.fmt(f)
    }
}

impl PartialEq for DiscreteLaw {
    fn eq(&self, other: &Self) -> bool {
        self.0.spec == other.0.spec
    }
}

impl Serialize for DiscreteLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = LawSpec::deserialize(d)?;
        DiscreteLaw::new(spec).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<LawSpec> for DiscreteLaw {
    type Error = Error;
    fn try_from(spec: LawSpec) -> Result<Self> {
        DiscreteLaw::new(spec)
    }
}

fn positive(v: f64, name: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DiscreteLaw {
    pub fn new(spec: LawSpec) -> Result<Self> {
        let (repr, mean, variance, tail_index) = match &spec {
            LawSpec::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::Config(format!("geometric p must lie in (0, 1], got {p}")));
                }
                zmg_repr(1.0 - p, *p, 1.0 - p)
            }
            LawSpec::GeometricMeanForm { m } => {
                if !(m.is_finite() && *m >= 0.0) {
                    return Err(Error::Config(format!("mean m must be finite and >= 0, got {m}")));
                }
                let p = 1.0 / (1.0 + m);
                zmg_repr(m * p, p, m * p)
            }
            LawSpec::ShiftedGeometric { m } => {
                if !(m.is_finite() && *m >= 0.0) {
                    return Err(Error::Config(format!("m must be finite and >= 0, got {m}")));
                }
                let p = 1.0 / (1.0 + m);
                zmg_repr(1.0, p, m * p)
            }
            LawSpec::ZeroModifiedGeometric { a, p } => {
                if !(0.0..=1.0).contains(a) || !(*p > 0.0 && *p <= 1.0) {
                    return Err(Error::Config(format!(
                        "zero-modified geometric needs a in [0,1], p in (0,1]; got a={a}, p={p}"
                    )));
                }
                zmg_repr(*a, *p, 1.0 - p)
            }
            LawSpec::RegVaryingCritical { a } => {
                if !(*a > 1.0 && a.is_finite()) {
                    return Err(Error::Config(format!("regularly varying critical law needs a > 1, got {a}")));
                }
                let r = 1.0 / (a - 1.0);
                let repr = Repr::RegVarying { amp: a.powf(-r), x: (a - 1.0) / a, r };
                // Σ k·S(k) = r(a−1) = 1, so E X² = 3.
                (repr, 1.0, 2.0, None)
            }
            LawSpec::PoissonStable { lambda, a } => {
                positive(*lambda, "lambda")?;
                if *lambda > 700.0 {
                    return Err(Error::Config("lambda above 700 underflows P(Y = 0)".into()));
                }
                if !(*a > 1.0 && *a <= 2.0) {
                    return Err(Error::Config(format!("Poisson-stable immigration needs 1 < a <= 2, got {a}")));
                }
                let alpha = a - 1.0;
                let (mean, var) = if alpha == 1.0 { (*lambda, *lambda) } else { (f64::INFINITY, f64::INFINITY) };
                let repr =
                    Repr::PoissonStable { lambda: *lambda, alpha, series: Mutex::new(Panjer::new(*lambda, alpha)) };
                (repr, mean, var, if alpha < 1.0 { Some(alpha) } else { None })
            }
            LawSpec::LogImmigration { m, mu } => {
                positive(*m, "m")?;
                positive(*mu, "mu")?;
                let c = mu / m;
                if c * m.ln_1p() > 1.0 + 1e-12 {
                    return Err(Error::Config(format!(
                        "log immigration needs (mu/m)·ln(1+m) <= 1, got {}",
                        c * m.ln_1p()
                    )));
                }
                (Repr::Log { c, m: *m, x: m / (1.0 + m) }, *mu, mu * (1.0 + m) - mu * mu, None)
            }
            LawSpec::NegBinImmigration { m, nu } => {
                positive(*m, "m")?;
                positive(*nu, "nu")?;
                let p = 1.0 / (1.0 + m);
                (Repr::NegBin { nu: *nu, p, q: m * p }, nu * m, nu * m * (1.0 + m), None)
            }
            LawSpec::HeavyTailCritical { a } => return make_critical_heavy_tail(*a),
            LawSpec::Tabulated { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Config("tabulated pmf must be non-empty and non-negative".into()));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("tabulated pmf sums to {total}, not 1")));
                }
                let mut surv = vec![0.0; pmf.len()];
                let mut acc = 0.0;
                for k in (0..pmf.len()).rev() {
                    surv[k] = acc;
                    acc += pmf[k];
                }
                let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let m2: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
                (Repr::Tabulated { pmf: pmf.clone(), surv }, mean, (m2 - mean * mean).max(0.0), None)
            }
        };
        Ok(Self::assemble(spec, repr, mean, variance, tail_index))
    }

    fn assemble(spec: LawSpec, repr: Repr, mean: f64, variance: f64, tail_index: Option<f64>) -> Self {
        DiscreteLaw(Arc::new(Inner { spec, repr, mean, variance, tail_index, head: OnceLock::new() }))
    }

    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(LawSpec::Geometric { p })
    }
    pub fn geometric_mean_form(m: f64) -> Result<Self> {
        Self::new(LawSpec::GeometricMeanForm { m })
    }
    pub fn shifted_geometric(m: f64) -> Result<Self> {
        Self::new(LawSpec::ShiftedGeometric { m })
    }
    pub fn zero_modified_geometric(a: f64, p: f64) -> Result<Self> {
        Self::new(LawSpec::ZeroModifiedGeometric { a, p })
    }
    pub fn tabulated(pmf: Vec<f64>) -> Result<Self> {
        Self::new(LawSpec::Tabulated { pmf })
    }

    pub fn spec(&self) -> &LawSpec {
        &self.0.spec
    }
    pub fn mean(&self) -> f64 {
        self.0.mean
    }
    /// `+∞` when the second moment diverges.
    pub fn variance(&self) -> f64 {
        self.0.variance
    }
    pub fn tail_index(&self) -> Option<f64> {
        self.0.tail_index
    }
    /// E X(X−1), the second factorial moment.
    pub fn factorial_moment2(&self) -> f64 {
        self.0.variance + self.0.mean * self.0.mean - self.0.mean
    }

    /// Largest point of a bounded support.
    pub fn support_max(&self) -> Option<u64> {
        match &self.0.repr {
            Repr::Tabulated { pmf, .. } => Some(pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u64),
            Repr::Zmg { q, amp, .. } if *q == 0.0 => Some(if *amp > 0.0 { 1 } else { 0 }),
            _ => None,
        }
    }

    /// P(X > k).
    pub fn survival(&self, k: u64) -> f64 {
        match &self.0.repr {
            Repr::Zmg { amp, q, ln_q, .. } => {
                if k == 0 {
                    *amp
                } else if *q == 0.0 {
                    0.0
                } else {
                    let lv = k as f64 * ln_q;
                    if lv < -700.0 {
                        (amp.ln() + lv).exp()
                    } else {
                        amp * q.powi(k.min(i32::MAX as u64) as i32)
                    }
                }
            }
            Repr::RegVarying { amp, x, r } => {
                let kf = k as f64;
                amp * (ln_gamma(r + kf) - ln_gamma(*r) - ln_gamma(kf + 1.0) + kf * x.ln()).exp()
            }
            Repr::PoissonStable { series, .. } => series.lock().expect("poisson-stable cache").survival(k),
            Repr::Log { c, x, .. } => {
                // Σ_{j>k} x^j / j, summed until terms vanish.
                let mut j = k + 1;
                let mut term = (j as f64 * x.ln()).exp();
                let mut acc = 0.0;
                while term > 0.0 {
                    let add = term / j as f64;
                    acc += add;
                    if add < acc * 1e-17 {
                        break;
                    }
                    term *= x;
                    j += 1;
                }
                c * acc
            }
            Repr::NegBin { nu, q, .. } => beta_reg(k as f64 + 1.0, *nu, *q),
            Repr::Heavy { a, theta, s0 } => {
                if k == 0 {
                    *s0
                } else {
                    theta * (-(a * (k as f64).ln_1p())).exp()
                }
            }
            Repr::Tabulated { surv, .. } => surv.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// P(X > x) for real x; negative x gives 1.
    pub fn survival_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            1.0
        } else if x >= u64::MAX as f64 {
            0.0
        } else {
            self.survival(x.floor() as u64)
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match &self.0.repr {
            Repr::Zmg { amp, p, .. } => {
                if k == 0 {
                    1.0 - amp
                } else {
                    p * self.survival(k - 1)
                }
            }
            Repr::RegVarying { amp, x, r } => {
                if k == 0 {
                    1.0 - amp
                } else {
                    let kf = k as f64;
                    self.survival(k - 1) * (1.0 - x * (r + kf - 1.0) / kf)
                }
            }
            Repr::PoissonStable { series, .. } => series.lock().expect("poisson-stable cache").pmf(k),
            Repr::Log { c, m, x } => {
                if k == 0 {
                    1.0 - c * m.ln_1p()
                } else {
                    c * (k as f64 * x.ln()).exp() / k as f64
                }
            }
            Repr::NegBin { nu, p, q } => {
                let kf = k as f64;
                (ln_gamma(nu + kf) - ln_gamma(*nu) - ln_gamma(kf + 1.0) + nu * p.ln() + kf * q.ln()).exp()
            }
            Repr::Heavy { a, theta, s0 } => match k {
                0 => 1.0 - s0,
                1 => s0 - theta * 2f64.powf(-a),
                _ => {
                    let kf = k as f64;
                    theta * (-(a * kf.ln())).exp() * -(-a * (1.0 / kf).ln_1p()).exp_m1()
                }
            },
            Repr::Tabulated { pmf, .. } => pmf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    pub fn cdf(&self, k: u64) -> f64 {
        match &self.0.repr {
            Repr::Tabulated { pmf, .. } => pmf.iter().take(k as usize + 1).sum(),
            Repr::PoissonStable { series, .. } => series.lock().expect("poisson-stable cache").cdf(k),
            _ => 1.0 - self.survival(k),
        }
    }

    /// `1 − f(1 − t)` for t ∈ [0, 1].
    pub fn pgf_complement(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.0.repr {
            Repr::Zmg { amp, p, q, .. } => amp * t / (p + q * t),
            Repr::RegVarying { r, .. } => {
                let a = 1.0 + 1.0 / r;
                t * (-r * ((a - 1.0) * t).ln_1p()).exp()
            }
            Repr::PoissonStable { lambda, alpha, .. } => -(-lambda * t.powf(*alpha)).exp_m1(),
            Repr::Log { c, m, .. } => c * (m * t).ln_1p(),
            Repr::NegBin { nu, p, q } => {
                let m = q / p;
                -(-nu * (m * t).ln_1p()).exp_m1()
            }
            Repr::Heavy { a, theta, s0 } => {
                if t >= 1.0 {
                    return *s0;
                }
                let tau = -(-t).ln_1p();
                // Σ_{k≥1}(1+k)^{−a}(1−t)^k
                t * (s0 + theta * power_exp_sum(*a, tau, 1))
            }
            Repr::Tabulated { surv, .. } => {
                let s = 1.0 - t;
                t * surv.iter().rev().fold(0.0, |acc, v| acc * s + v)
            }
        }
    }

    /// f(s) = E s^X.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        check_unit(s, "p.g.f. argument")?;
        Ok(match &self.0.repr {
            Repr::Tabulated { pmf, .. } => pmf.iter().rev().fold(0.0, |acc, v| acc * s + v),
            _ => 1.0 - self.pgf_complement(1.0 - s),
        })
    }

    /// Smallest k with S(k) ≤ u.
    pub fn inverse_survival(&self, u: f64) -> u64 {
        match &self.0.repr {
            Repr::Zmg { amp, ln_q, q, .. } => {
                if u >= *amp {
                    0
                } else if *q == 0.0 {
                    1
                } else {
                    let k = ((u / amp).ln() / ln_q).ceil();
                    if k >= 1.8e19 {
                        u64::MAX / 2
                    } else {
                        (k as u64).max(1)
                    }
                }
            }
            Repr::Heavy { a, theta, s0 } => {
                if u >= *s0 {
                    return 0;
                }
                let head = self.head();
                if u >= *head.last().expect("head") {
                    return head_search(head, u);
                }
                let guess = (theta / u).powf(1.0 / a).ceil() - 1.0;
                if guess >= 1.8e19 {
                    return u64::MAX / 2;
                }
                let mut k = (guess as u64).max(1);
                while k > 1 && self.survival(k - 1) <= u {
                    k -= 1;
                }
                while self.survival(k) > u {
                    k += 1;
                }
                k
            }
            Repr::Tabulated { surv, .. } => surv.iter().position(|s| *s <= u).unwrap_or(surv.len()) as u64,
            _ => {
                let head = self.head();
                if u >= *head.last().expect("head") || head.len() < HEAD_LEN {
                    let k = head_search(head, u);
                    if (k as usize) < head.len() {
                        return k;
                    }
                }
                let mut k = head.len() as u64;
                let mut steps = 0u64;
                while self.survival(k) > u && steps < 100_000_000 {
                    k += 1;
                    steps += 1;
                }
                k
            }
        }
    }

    /// Cached S(0..H); stops early once the survival underflows.
    fn head(&self) -> &[f64] {
        self.0.head.get_or_init(|| {
            let mut v = Vec::with_capacity(HEAD_LEN);
            for k in 0..HEAD_LEN as u64 {
                let s = self.survival(k);
                v.push(s);
                if s < 1e-300 {
                    break;
                }
            }
            v
        })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.0.repr {
            Repr::PoissonStable { lambda, alpha, .. } => sample_poisson_stable(*lambda, *alpha, rng),
            Repr::Zmg { .. } if self.0.mean > 8.0 => self.inverse_survival(open01(rng)),
            _ => {
                let u = open01(rng);
                let head = self.head();
                // Short linear scan covers the bulk of small-mean laws.
                for (k, s) in head.iter().take(8).enumerate() {
                    if *s <= u {
                        return k as u64;
                    }
                }
                self.inverse_survival(u)
            }
        }
    }

    /// One draw of X conditioned on X > k.
    pub fn sample_above<R: RngCore + ?Sized>(&self, k: u64, rng: &mut R) -> u64 {
        let sk = self.survival(k);
        let x = self.inverse_survival(open01(rng) * sk);
        x.max(k + 1)
    }

    /// Sum and maximum of `count` independent draws, simulated exactly.
    ///
    /// Large counts are resolved level by level: the number of draws
    /// exceeding k is binomial given the number exceeding k−1. Once few
    /// draws remain above the current level they are sampled individually.
    pub fn sample_sum_max<R: RngCore + ?Sized>(&self, count: u64, rng: &mut R) -> (u64, u64) {
        if count == 0 {
            return (0, 0);
        }
        if count <= SMALL_COUNT || matches!(self.0.repr, Repr::PoissonStable { .. }) {
            let mut sum = 0u64;
            let mut max = 0u64;
            for _ in 0..count {
                let x = self.sample(rng);
                sum = sum.saturating_add(x);
                max = max.max(x);
            }
            return (sum, max);
        }
        let mut above = count;
        let mut sum = 0u64;
        let mut prev_surv = 1.0;
        let mut k = 0u64;
        loop {
            let surv = self.survival(k);
            let ratio = if prev_surv > 0.0 { (surv / prev_surv).clamp(0.0, 1.0) } else { 0.0 };
            let next = if ratio >= 1.0 {
                above
            } else if ratio <= 0.0 {
                0
            } else {
                Binomial::new(above, ratio).expect("valid binomial").sample(rng)
            };
            if next == 0 {
                return (sum, k);
            }
            sum = sum.saturating_add(next);
            if next <= SMALL_COUNT {
                let mut max = k + 1;
                for _ in 0..next {
                    let x = self.sample_above(k, rng);
                    sum = sum.saturating_add(x - k - 1);
                    max = max.max(x);
                }
                return (sum, max);
            }
            above = next;
            prev_surv = surv;
            k += 1;
        }
    }
}

fn zmg_repr(amp: f64, p: f64, q: f64) -> (Repr, f64, f64, Option<f64>) {
    let mean = amp / p;
    let second = amp * (2.0 * q / (p * p) + 1.0 / p);
    (Repr::Zmg { amp, p, q, ln_q: q.ln() }, mean, (second - mean * mean).max(0.0), None)
}

fn head_search(head: &[f64], u: f64) -> u64 {
    head.partition_point(|s| *s > u) as u64
}

/// Mean-one law with P(X > k) = θ(1+k)^{−a} for k ≥ 1 and no mass at 1.
///
/// θ = 1/(ζ(a) − 1 + 2^{−a}) is the largest value leaving P(X = 1) ≥ 0.
pub fn make_critical_heavy_tail(a: f64) -> Result<DiscreteLaw> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::Construction(format!(
            "a power tail (1+k)^(-a) needs a > 1 for a finite mean, got a = {a}; no theta > 0 gives mean 1"
        )));
    }
    let z = zeta(a);
    let theta = 1.0 / (z - 1.0 + 2f64.powf(-a));
    let s0 = 1.0 - theta * (z - 1.0);
    if !(s0 > 0.0 && s0 <= 1.0) {
        return Err(Error::Construction(format!("theta bound {theta} leaves invalid atom P(X=0) = {}", 1.0 - s0)));
    }
    let variance = if a > 2.0 { s0 + theta * (2.0 * (zeta(a - 1.0) - 1.0) - (z - 1.0)) - 1.0 } else { f64::INFINITY };
    Ok(DiscreteLaw::assemble(LawSpec::HeavyTailCritical { a }, Repr::Heavy { a, theta, s0 }, 1.0, variance, Some(a)))
}

impl DiscreteLaw {
    /// Tail constant θ of a power-tailed law, S(k) ~ θ k^{−a}.
    pub fn tail_constant(&self) -> Option<f64> {
        match &self.0.repr {
            Repr::Heavy { theta, .. } => Some(*theta),
            _ => None,
        }
    }
}

/// Evaluate one functional of a law.
pub fn eval(law: &DiscreteLaw, what: Functional, arg: f64) -> Result<f64> {
    if what == Functional::Pgf {
        return law.pgf(arg);
    }
    if !(arg >= 0.0 && arg.fract() == 0.0 && arg.is_finite()) {
        return Err(domain(format!("integer argument >= 0 required, got {arg}")));
    }
    let k = arg as u64;
    Ok(match what {
        Functional::Pmf => law.pmf(k),
        Functional::Cdf => law.cdf(k),
        Functional::Survival => law.survival(k),
        Functional::Pgf => unreachable!(),
    })
}

/// Compound-Poisson pmf of the Poisson-stable law, extended on demand.
struct Panjer {
    lambda: f64,
    alpha: f64,
    jumps: Vec<f64>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl Panjer {
    fn new(lambda: f64, alpha: f64) -> Self {
        let p0 = (-lambda).exp();
        Panjer { lambda, alpha, jumps: vec![0.0], pmf: vec![p0], cdf: vec![p0] }
    }

    fn extend(&mut self, k: u64) {
        let k = k as usize;
        while self.pmf.len() <= k {
            let n = self.pmf.len();
            // Sibuya jump pmf: j_1 = α, j_i = j_{i−1}(i−1−α)/i.
            let j = if n == 1 { self.alpha } else { self.jumps[n - 1] * ((n - 1) as f64 - self.alpha) / n as f64 };
            self.jumps.push(j);
            let mut acc = 0.0;
            for i in 1..=n {
                acc += i as f64 * self.jumps[i] * self.pmf[n - i];
            }
            let p = self.lambda / n as f64 * acc;
            self.pmf.push(p);
            let c = self.cdf[n - 1] + p;
            self.cdf.push(c);
        }
    }

    fn pmf(&mut self, k: u64) -> f64 {
        self.extend(k);
        self.pmf[k as usize]
    }

    fn cdf(&mut self, k: u64) -> f64 {
        self.extend(k);
        self.cdf[k as usize].min(1.0)
    }

    fn survival(&mut self, k: u64) -> f64 {
        if self.alpha == 1.0 {
            // Poisson: sum the upper tail directly to keep relative accuracy.
            self.extend(k);
            let mut term = self.pmf[k as usize];
            let mut j = k + 1;
            let mut acc = 0.0;
            loop {
                term *= self.lambda / j as f64;
                acc += term;
                if term < acc * 1e-17 || term == 0.0 {
                    return acc;
                }
                j += 1;
            }
        }
        (1.0 - self.cdf(k)).max(0.0)
    }
}

fn sample_sibuya<R: RngCore + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    if alpha >= 1.0 {
        return 1;
    }
    let u = open01(rng);
    let lg = ln_gamma(1.0 - alpha);
    let ln_surv = |k: u64| ln_gamma(k as f64 + 1.0 - alpha) - lg - ln_gamma(k as f64 + 1.0);
    let lu = u.ln();
    // smallest k ≥ 1 with S(k) ≤ u
    let mut hi = 1u64;
    while ln_surv(hi) > lu {
        if hi >= 1 << 62 {
            return hi;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return 1;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ln_surv(mid) > lu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn sample_poisson_stable<R: RngCore + ?Sized>(lambda: f64, alpha: f64, rng: &mut R) -> u64 {
    let n: f64 = Poisson::new(lambda).expect("valid lambda").sample(rng);
    let mut total = 0u64;
    for _ in 0..n as u64 {
        total = total.saturating_add(sample_sibuya(alpha, rng));
    }
    total
}

#[cfg(test)]
mod tests;
