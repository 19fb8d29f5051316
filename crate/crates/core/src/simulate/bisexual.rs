use rand::RngCore;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use serde::Serialize;

use crate::distributions::BivariateGeometric;
use crate::error::{domain, Result};
use crate::limits::bisexual_growth;
use crate::pgf::ProcessSpec;
use crate::rng::open01;

/// Counts above this are advanced with a normal approximation; the
/// relative error is far below the Monte Carlo noise of anything built on
/// them.
const EXACT_LIMIT: f64 = 1e15;

/// Below this many units, offspring vectors are drawn one by one.
const SMALL: f64 = 64.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisexualRecord {
    /// Mating units `Z_0, …, Z_n`; real-valued because they outgrow u64.
    pub units: Vec<f64>,
    /// `Z^F_j` and `Z^M_j` for j = 1..=n.
    pub females: Vec<f64>,
    pub males: Vec<f64>,
    /// Componentwise maxima `(M^F_n, M^M_n)` of the offspring vectors of
    /// the `Z_n` units; `(0, 0)` when there are none.
    pub max: (u64, u64),
    pub log_mu: f64,
    /// `Z_n/μ_n`.
    pub normalized: f64,
}

/// Bisexual process under promiscuous mating `L(x, y) = x·min(1, y)`.
pub fn run_bisexual<R: RngCore + ?Sized>(spec: &ProcessSpec, n: u64, rng: &mut R) -> Result<BisexualRecord> {
    let ProcessSpec::Bisexual { schedule, z0 } = spec else {
        return Err(domain("bisexual runs need a bisexual process"));
    };
    let mut z = *z0 as f64;
    let mut units = vec![z];
    let mut females = Vec::with_capacity(n as usize);
    let mut males = Vec::with_capacity(n as usize);
    let mut log_mu = 0.0;
    for i in 0..n {
        let params = schedule.params(i)?;
        log_mu += bisexual_growth(schedule, i)?.0.ln();
        let (f, m) = offspring_totals(&params, z, rng);
        females.push(f);
        males.push(m);
        z = if m >= 1.0 { f } else { 0.0 };
        units.push(z);
    }
    let max = sample_componentwise_max(&schedule.params(n)?, z, rng);
    let normalized = if z == 0.0 { 0.0 } else { (z.ln() - log_mu).exp() };
    Ok(BisexualRecord { units, females, males, max, log_mu, normalized })
}

/// Totals `(Σξ, Ση)` over `count` independent offspring vectors.
///
/// Each vector is `T` leading (0,0) trials followed by the first other
/// cell; the coordinate that has not yet seen a one then needs a further
/// `1 + geometric` trials.
fn offspring_totals<R: RngCore + ?Sized>(p: &BivariateGeometric, count: f64, rng: &mut R) -> (f64, f64) {
    if count == 0.0 {
        return (0.0, 0.0);
    }
    if count < SMALL {
        let (mut f, mut m) = (0.0, 0.0);
        for _ in 0..count as u64 {
            let (x, y) = p.sample(rng);
            f += x as f64;
            m += y as f64;
        }
        return (f, m);
    }
    let rest = p.p01 + p.p10 + p.p11;
    let leading = neg_binomial(count, rest, rng);
    let n11 = binomial(count, p.p11 / rest, rng);
    let n10 = binomial(count - n11, if rest - p.p11 > 0.0 { p.p10 / (rest - p.p11) } else { 0.0 }, rng);
    let n01 = count - n11 - n10;
    let f = leading + n01 + neg_binomial(n01, p.p1_plus(), rng);
    let m = leading + n10 + neg_binomial(n10, p.p_plus1(), rng);
    (f, m)
}

/// Total failures before `r` successes with success probability `p`.
fn neg_binomial<R: RngCore + ?Sized>(r: f64, p: f64, rng: &mut R) -> f64 {
    if r == 0.0 || p >= 1.0 {
        return 0.0;
    }
    let mean = r * (1.0 - p) / p;
    if mean > EXACT_LIMIT || r > EXACT_LIMIT {
        let sd = (mean / p).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        return (mean + sd * z).max(0.0).round();
    }
    let lambda = Gamma::new(r, (1.0 - p) / p).expect("valid gamma").sample(rng);
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("valid poisson").sample(rng)
}

fn binomial<R: RngCore + ?Sized>(n: f64, p: f64, rng: &mut R) -> f64 {
    if n == 0.0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n;
    }
    if n > EXACT_LIMIT {
        let z: f64 = StandardNormal.sample(rng);
        return (n * p + (n * p * (1.0 - p)).sqrt() * z).round().clamp(0.0, n);
    }
    Binomial::new(n as u64, p).expect("valid binomial").sample(rng) as f64
}

/// Exact componentwise maximum of `count` i.i.d. bivariate geometric
/// vectors: `M^F` by inversion of `F_ξ^count`, then `M^M` from its law
/// given `M^F`.
pub fn sample_componentwise_max<R: RngCore + ?Sized>(p: &BivariateGeometric, count: f64, rng: &mut R) -> (u64, u64) {
    if count == 0.0 {
        return (0, 0);
    }
    // log P(max ≤ (x, y)); −1 stands for "below the support".
    let log_joint = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 {
            return f64::NEG_INFINITY;
        }
        count * (-p.cdf_complement(x as f64, y as f64)).ln_1p()
    };
    let big = i64::MAX / 4;
    // P(M^F ≤ x) = (1 − p0+^{x+1})^count
    let u = open01(rng);
    let tail = -(u.ln() / count).exp_m1();
    let xf = ((tail.ln() / p.p0_plus().ln()).ceil() - 1.0).max(0.0);
    let x = if p.p0_plus() == 0.0 { 0 } else { xf.min(big as f64) as i64 };
    // P(M^M ≤ y | M^F = x) ∝ F(x, y)^count − F(x−1, y)^count
    //   = F(x, y)^count · (1 − (1 − d/F(x, y))^count),  d = P(ξ = x, η ≤ y)
    // which avoids differencing two nearly equal huge logarithms.
    let log_diff = |y: i64| -> f64 {
        let a = log_joint(x, y);
        if a == f64::NEG_INFINITY {
            return a;
        }
        let d = p.first_eq_second_le(x as u64, y);
        let f = 1.0 - p.cdf_complement(x as f64, y as f64);
        a + (-(count * (-(d / f).min(1.0)).ln_1p()).exp_m1()).ln()
    };
    let log_den = log_diff(big);
    let target = open01(rng).ln() + log_den;
    if log_diff(0) >= target {
        return (x as u64, 0);
    }
    let mut lo = 0i64;
    let mut hi = 1i64;
    while log_diff(hi) < target {
        lo = hi;
        if hi >= big / 2 {
            hi = big;
            break;
        }
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if log_diff(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (x as u64, hi as u64)
}
