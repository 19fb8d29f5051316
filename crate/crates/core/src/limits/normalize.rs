use serde::Serialize;

use crate::distributions::ScoreLaw;
use crate::error::{domain, Error, Result};
use crate::pgf::{BisexualSchedule, EnvSchedule, TwoTypeOffspring};

/// Affine norming `x ↦ (x − b)/a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norming {
    pub a: f64,
    pub b: f64,
}

impl Norming {
    pub const IDENTITY: Norming = Norming { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(domain(format!("norming needs a > 0 and finite b, got a={a}, b={b}")));
        }
        Ok(Norming { a, b })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.b) / self.a
    }

    /// The raw level `a·x + b` corresponding to normalized `x`.
    pub fn level(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// `a(n) = (K n)^{1/alpha}`, `b(n) = 0` for a tail `P(X > x) ~ K x^{−alpha}`.
pub fn power_tail_norming(k: f64, alpha: f64, n: f64) -> Result<Norming> {
    if !(k > 0.0 && alpha > 0.0 && n > 0.0) {
        return Err(domain("power-tail norming needs positive K, alpha and n"));
    }
    Norming::new((k * n).powf(1.0 / alpha), 0.0)
}

/// Norming for the maximum of `n` i.i.d. scores.
pub fn score_norming(score: &ScoreLaw, n: f64) -> Result<Norming> {
    let (a, b) = score.norming(n);
    Norming::new(a, b)
}

/// Linear norming of a geometric-type array maximum, `scale·M − location`,
/// together with the finite-n shift `scale·location/2` whose limit is the
/// constant `c` of the Gumbel or logistic law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArrayNorming {
    pub scale: f64,
    pub location: f64,
    pub shift: f64,
}

impl ArrayNorming {
    pub fn new(scale: f64, location: f64) -> Self {
        ArrayNorming { scale, location, shift: scale * location / 2.0 }
    }

    pub fn apply(&self, m: f64) -> f64 {
        self.scale * m - self.location
    }

    /// Normalized value of lattice point `k`.
    pub fn at(&self, k: u64) -> f64 {
        self.apply(k as f64)
    }
}

/// Array of `nu` zero-modified geometric variables `P(X > k) = a(1−p)^k`.
pub fn zmg_array_norming(nu: f64, a: f64, p: f64) -> Result<ArrayNorming> {
    if !(nu > 0.0 && a > 0.0 && a <= 1.0 && p > 0.0 && p <= 1.0) {
        return Err(domain("array norming needs nu > 0, a in (0, 1] and p in (0, 1]"));
    }
    Ok(ArrayNorming::new(p, (nu * a).ln()))
}

/// `μ_j = Π_{i≤j} m_i` and `B_j = μ_j Σ_{i≤j} (p_i^{−1} − 1)/μ_i` for j = 0..=n.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VaryingNorms {
    pub mu: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn varying_norms(schedule: &EnvSchedule, n: u64) -> Result<VaryingNorms> {
    let mut mu = vec![1.0];
    let mut b = vec![0.0];
    let mut sum = 0.0;
    for j in 1..=n {
        let s = schedule.step(j)?;
        let m = mu[j as usize - 1] * s.mean();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Numerical(format!("mean product left the floating range at generation {j}")));
        }
        sum += (1.0 / s.p - 1.0) / m;
        mu.push(m);
        b.push(m * sum);
    }
    Ok(VaryingNorms { mu, b })
}

/// Norming of the offspring maximum of generation `n − 1` in varying
/// environments: `p_n M_n − log(B_{n−1} a_n)`.
pub fn varying_array_norming(schedule: &EnvSchedule, n: u64) -> Result<ArrayNorming> {
    if n < 2 {
        return Err(domain("varying-environment norming needs n >= 2"));
    }
    let norms = varying_norms(schedule, n - 1)?;
    let step = schedule.step(n)?;
    Ok(ArrayNorming::new(step.p, (norms.b[n as usize - 1] * step.a).ln()))
}

/// `μ(t) = e^{(λ−μ)t}` for a linear birth–death process.
pub fn birth_death_mean(birth: f64, death: f64, t: f64) -> f64 {
    ((birth - death) * t).exp()
}

/// Closed form of `B` at time `t` for the birth–death schedule:
/// `λ(μ(t) − 1)/(λ − μ)`, or `λt` when the rates coincide.
pub fn birth_death_b(birth: f64, death: f64, t: f64) -> f64 {
    if birth == death {
        birth * t
    } else {
        birth * (birth_death_mean(birth, death, t) - 1.0) / (birth - death)
    }
}

/// Mean growth per mating unit under promiscuous mating: `(r_{n1}, r_n)`
/// with `r_{n1} = (1 − p_{+1}) p_{0+}/p_{1+}` and `r_n = p_{0+}/p_{1+}`.
pub fn bisexual_growth(schedule: &BisexualSchedule, i: u64) -> Result<(f64, f64)> {
    let p = schedule.params(i)?;
    let r = p.p0_plus() / p.p1_plus();
    Ok(((1.0 - p.p_plus1()) * r, r))
}

/// `log μ_n = Σ_{i<n} log r_{i1}`.
pub fn bisexual_log_mu(schedule: &BisexualSchedule, n: u64) -> Result<f64> {
    (0..n).map(|i| Ok(bisexual_growth(schedule, i)?.0.ln())).sum()
}

/// Partial sum of `1 − r_{n1}/r_n` over n < horizon; a bounded sequence of
/// partial sums is the summability condition behind `Z_n/μ_n → W`.
pub fn bisexual_summability(schedule: &BisexualSchedule, horizon: u64) -> Result<f64> {
    (0..horizon)
        .map(|i| {
            let (r1, r) = bisexual_growth(schedule, i)?;
            Ok(1.0 - r1 / r)
        })
        .sum()
}

/// Right and left Perron eigenvectors `u`, `v` of a 2×2 mean matrix with
/// `u·1 = 1` and `u·v = 1`, and the Perron root.
pub fn perron_vectors(m: [[f64; 2]; 2]) -> Result<([f64; 2], [f64; 2], f64)> {
    let [[a, b], [c, d]] = m;
    let tr = a + d;
    let disc = (tr * tr - 4.0 * (a * d - b * c)).max(0.0).sqrt();
    let rho = 0.5 * (tr + disc);
    if !(b > 0.0 && c > 0.0) {
        return Err(Error::Config("two-type mean matrix must be positively regular".into()));
    }
    // (M − ρ)u = 0 ⇒ u ∝ (b, ρ − a); vᵀ(M − ρ) = 0 ⇒ v ∝ (c, ρ − a)
    let mut u = [b, rho - a];
    let su = u[0] + u[1];
    u = [u[0] / su, u[1] / su];
    let mut v = [c, rho - a];
    let dot = u[0] * v[0] + u[1] * v[1];
    v = [v[0] / dot, v[1] / dot];
    Ok((u, v, rho))
}

/// Norming constants of a critical two-type process: `(v1, v2, B)` where
/// `2B = Σ_i v_i uᵀQ⁽ⁱ⁾u` and `Q⁽ⁱ⁾` is the second factorial moment matrix
/// of a type-i parent's offspring.
pub fn two_type_constants(offspring: &TwoTypeOffspring) -> Result<(f64, f64, f64)> {
    let (u, v, rho) = perron_vectors(offspring.mean_matrix())?;
    if (rho - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("two-type limit needs a critical mean matrix, Perron root is {rho}")));
    }
    let mut two_b = 0.0;
    for i in 0..2 {
        let pi = offspring.p_type1[i];
        let weight = pi * u[0] + (1.0 - pi) * u[1];
        two_b += v[i] * offspring.total[i].factorial_moment2() * weight * weight;
    }
    if !(two_b > 0.0 && two_b.is_finite()) {
        return Err(Error::Config("two-type limit needs finite, non-zero offspring variance".into()));
    }
    Ok((v[0], v[1], two_b / 2.0))
}

/// `v_1 B n`, the scale of the type-1 population at generation n.
pub fn two_type_scale(offspring: &TwoTypeOffspring, n: u64) -> Result<f64> {
    let (v1, _, b) = two_type_constants(offspring)?;
    Ok(v1 * b * n as f64)
}

/// Constants `(c, d)` relating the second score law to the first, with
/// `A = lim (1 − F₁)/(1 − F₂)`: c = A^{1/α},
/// d = 0 for Fréchet tails, c = 1, d = ln A for Gumbel tails.
pub fn tail_constants(first: &ScoreLaw, second: &ScoreLaw) -> Result<(f64, f64)> {
    use super::VonMisesShape::*;
    let a = first.tail_equivalence(second).ok_or_else(|| Error::Config("score laws are not tail-equivalent".into()))?;
    match first.shape() {
        Frechet { alpha } => Ok((a.powf(1.0 / alpha), 0.0)),
        Gumbel => Ok((1.0, a.ln())),
        VonMises { theta } => Ok((a.powf(1.0 / theta.abs()), 0.0)),
    }
}

/// Burr III constant `c = λ/(a − 1)` for a stable-type offspring law with
/// logarithmic immigration of rate λ.
pub fn burr_constant(lambda: f64, a: f64) -> Result<f64> {
    if !(a > 1.0 && a <= 2.0) {
        return Err(Error::Config(format!("infinite-variance critical limit requires 1 < a <= 2, got {a}")));
    }
    Ok(lambda / (a - 1.0))
}
