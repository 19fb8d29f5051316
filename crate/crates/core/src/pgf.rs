//! Exact finite-generation laws by generating-function iteration.
//!
//! Everything is carried in complement form: instead of `s` we iterate
//! `t = 1 − s`, and every law contributes `1 − f(1 − t)`. Near the fixed
//! point `s = 1`, where the interesting tail probabilities live, this keeps
//! full relative precision.

use serde::{Deserialize, Serialize};

use crate::distributions::{BivariateGeometric, DiscreteLaw, ScoreLaw};
use crate::error::{check_unit, Error, Result};
use crate::numerics::ln_choose;

fn one() -> u64 {
    1
}

/// Parameters of one zero-modified geometric environment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZmgStep {
    pub a: f64,
    pub p: f64,
}

impl ZmgStep {
    pub fn mean(&self) -> f64 {
        self.a / self.p
    }
}

/// Generation-dependent zero-modified geometric offspring laws.
///
/// `step(j)` is the law of the offspring of generation `j − 1`, i.e. the
/// law producing generation `j`, for `j ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSchedule {
    /// `steps[j − 1]` governs generation `j`.
    Explicit { steps: Vec<ZmgStep> },
    /// Mean `m_j = mean`, `p_j = 1/(j + offset)`, `a_j = m_j p_j`.
    Harmonic { mean: f64, offset: f64 },
    /// A linear birth–death process observed at times `t_j = j^delta`.
    BirthDeath { birth: f64, death: f64, delta: f64 },
}

impl EnvSchedule {
    pub fn step(&self, j: u64) -> Result<ZmgStep> {
        if j == 0 {
            return Err(Error::Domain("environments are indexed from generation 1".into()));
        }
        let s = match self {
            EnvSchedule::Explicit { steps } => *steps.get(j as usize - 1).ok_or_else(|| {
                Error::Config(format!("explicit schedule has {} steps, generation {j} requested", steps.len()))
            })?,
            EnvSchedule::Harmonic { mean, offset } => {
                let p = 1.0 / (j as f64 + offset);
                ZmgStep { a: mean * p, p }
            }
            EnvSchedule::BirthDeath { birth, death, delta } => {
                let d = (j as f64).powf(*delta) - ((j - 1) as f64).powf(*delta);
                let (m, p) = birth_death_step(*birth, *death, d);
                ZmgStep { a: m * p, p }
            }
        };
        if !(s.p > 0.0 && s.p <= 1.0 && (0.0..=1.0).contains(&s.a)) {
            return Err(Error::Config(format!("environment {j} is not a valid law: a={}, p={}", s.a, s.p)));
        }
        Ok(s)
    }

    pub fn law(&self, j: u64) -> Result<DiscreteLaw> {
        let s = self.step(j)?;
        DiscreteLaw::zero_modified_geometric(s.a, s.p)
    }
}

/// `(m, p)` of a linear birth–death process run for time `d` from one
/// individual: the population is zero-modified geometric.
pub fn birth_death_step(birth: f64, death: f64, d: f64) -> (f64, f64) {
    if birth == death {
        (1.0, 1.0 / (1.0 + birth * d))
    } else {
        let m = ((birth - death) * d).exp();
        (m, (birth - death) / (birth * m - death))
    }
}

/// Environments of the bisexual process.
///
/// `params(i)` is the law of the offspring pairs produced by generation
/// `i` (units alive at time `i`), `i ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BisexualSchedule {
    Constant {
        params: BivariateGeometric,
    },
    Explicit {
        steps: Vec<BivariateGeometric>,
    },
    /// `p11 = j^{−alpha}`, `p01 = p10 = j^{−(alpha+beta)}` with `j = i + offset`.
    PowerLaw {
        alpha: f64,
        beta: f64,
        offset: u64,
    },
}

impl BisexualSchedule {
    pub fn params(&self, i: u64) -> Result<BivariateGeometric> {
        match self {
            BisexualSchedule::Constant { params } => Ok(*params),
            BisexualSchedule::Explicit { steps } => steps.get(i as usize).copied().ok_or_else(|| {
                Error::Config(format!("bisexual schedule has {} steps, generation {i} requested", steps.len()))
            }),
            BisexualSchedule::PowerLaw { alpha, beta, offset } => {
                let j = (i + offset) as f64;
                let p11 = j.powf(-alpha);
                let off = j.powf(-(alpha + beta));
                BivariateGeometric::from_cells(off, off, p11)
            }
        }
    }
}

/// Offspring of a two-type process: an individual of type `i` has
/// `total[i]` children, each independently of type 1 with probability
/// `p_type1[i]` and of type 2 otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoTypeOffspring {
    pub total: [DiscreteLaw; 2],
    pub p_type1: [f64; 2],
}

impl TwoTypeOffspring {
    /// Mean matrix, rows indexed by parent type.
    pub fn mean_matrix(&self) -> [[f64; 2]; 2] {
        let row = |i: usize| [self.total[i].mean() * self.p_type1[i], self.total[i].mean() * (1.0 - self.p_type1[i])];
        [row(0), row(1)]
    }

    /// Complement-form vector p.g.f.: `t ↦ 1 − f(1 − t)` componentwise.
    pub fn complement(&self, t: [f64; 2]) -> [f64; 2] {
        let c = |i: usize| {
            let pi = self.p_type1[i];
            self.total[i].pgf_complement(pi * t[0] + (1.0 - pi) * t[1])
        };
        [c(0), c(1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessSpec {
    Plain {
        offspring: DiscreteLaw,
        #[serde(default = "one")]
        z0: u64,
    },
    Immigration {
        offspring: DiscreteLaw,
        immigration: DiscreteLaw,
        #[serde(default)]
        z0: u64,
    },
    /// Immigrants arrive only into empty generations.
    FosterPakes {
        offspring: DiscreteLaw,
        immigration: DiscreteLaw,
        #[serde(default = "one")]
        z0: u64,
    },
    VaryingGeometric {
        schedule: EnvSchedule,
        #[serde(default = "one")]
        z0: u64,
    },
    Bisexual {
        schedule: BisexualSchedule,
        #[serde(default = "one")]
        z0: u64,
    },
    TwoType {
        offspring: TwoTypeOffspring,
        scores: [ScoreLaw; 2],
        z0: [u64; 2],
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// Condition on a non-empty parent generation.
    Survival,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl ProcessSpec {
    pub fn plain(offspring: DiscreteLaw) -> Self {
        ProcessSpec::Plain { offspring, z0: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Plain { z0, .. }
            | ProcessSpec::FosterPakes { z0, .. }
            | ProcessSpec::VaryingGeometric { z0, .. } => {
                if *z0 == 0 {
                    return Err(Error::Config("z0 must be at least 1 for this process".into()));
                }
            }
            ProcessSpec::Bisexual { schedule, z0 } => {
                if *z0 == 0 {
                    return Err(Error::Config("z0 must be at least 1 for this process".into()));
                }
                schedule.params(0)?;
            }
            ProcessSpec::TwoType { offspring, scores, z0 } => {
                if z0[0] + z0[1] == 0 {
                    return Err(Error::Config("two-type z0 must not be the zero vector".into()));
                }
                for p in offspring.p_type1 {
                    check_unit(p, "type-1 marking probability").map_err(|e| Error::Config(e.to_string()))?;
                }
                for s in scores {
                    s.validate()?;
                }
            }
            ProcessSpec::Immigration { .. } => {}
        }
        if let ProcessSpec::VaryingGeometric { schedule, .. } = self {
            schedule.step(1)?;
        }
        Ok(())
    }

    /// Offspring law producing generation `gen` (single-type variants).
    pub fn offspring_law(&self, gen: u64) -> Result<DiscreteLaw> {
        match self {
            ProcessSpec::Plain { offspring, .. }
            | ProcessSpec::Immigration { offspring, .. }
            | ProcessSpec::FosterPakes { offspring, .. } => Ok(offspring.clone()),
            ProcessSpec::VaryingGeometric { schedule, .. } => schedule.law(gen.max(1)),
            _ => Err(unsupported(self)),
        }
    }

    pub fn z0(&self) -> u64 {
        match self {
            ProcessSpec::Plain { z0, .. }
            | ProcessSpec::Immigration { z0, .. }
            | ProcessSpec::FosterPakes { z0, .. }
            | ProcessSpec::VaryingGeometric { z0, .. }
            | ProcessSpec::Bisexual { z0, .. } => *z0,
            ProcessSpec::TwoType { z0, .. } => z0[0] + z0[1],
        }
    }

    /// Classification by the offspring mean (Perron root for two types).
    pub fn regime(&self) -> Option<Regime> {
        let m = match self {
            ProcessSpec::Plain { offspring, .. }
            | ProcessSpec::Immigration { offspring, .. }
            | ProcessSpec::FosterPakes { offspring, .. } => offspring.mean(),
            ProcessSpec::TwoType { offspring, .. } => {
                let [[a, b], [c, d]] = offspring.mean_matrix();
                let tr = a + d;
                let det = a * d - b * c;
                0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())
            }
            _ => return None,
        };
        Some(if (m - 1.0).abs() < 1e-12 {
            Regime::Critical
        } else if m < 1.0 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        })
    }
}

fn unsupported(spec: &ProcessSpec) -> Error {
    let name = match spec {
        ProcessSpec::Bisexual { .. } => "bisexual",
        ProcessSpec::TwoType { .. } => "two-type",
        _ => "this",
    };
    Error::Config(format!("the {name} process has no single-type generating-function oracle"))
}

/// `1 − E[(1−t)^{Z_n}]`, the complement of the generation-n p.g.f.
pub fn generation_complement(spec: &ProcessSpec, n: u64, t: f64) -> Result<f64> {
    check_unit(t, "complement argument")?;
    match spec {
        ProcessSpec::Plain { offspring, z0 } => {
            let mut tau = t;
            for _ in 0..n {
                tau = offspring.pgf_complement(tau);
            }
            Ok(power_complement(tau, *z0))
        }
        ProcessSpec::VaryingGeometric { schedule, z0 } => {
            let mut tau = t;
            for j in (1..=n).rev() {
                tau = schedule.law(j)?.pgf_complement(tau);
            }
            Ok(power_complement(tau, *z0))
        }
        ProcessSpec::Immigration { offspring, immigration, z0 } => {
            // Φ_n(s) = Π_{j<n} g(f_j(s)) · f_n(s)^{z0}
            let mut tau = t;
            let mut log_phi = 0.0;
            for _ in 0..n {
                log_phi += (-immigration.pgf_complement(tau)).ln_1p();
                tau = offspring.pgf_complement(tau);
            }
            log_phi += *z0 as f64 * (-tau).ln_1p();
            Ok(-log_phi.exp_m1())
        }
        ProcessSpec::FosterPakes { offspring, immigration, z0 } => {
            let zeros = foster_pakes_zeros(offspring, immigration, *z0, n)?;
            let taus = complement_orbit(offspring, t, n);
            let mut acc = power_complement(taus[n as usize], *z0);
            for k in 0..n as usize {
                acc += zeros[k] * immigration.pgf_complement(taus[n as usize - 1 - k]);
            }
            Ok(acc.clamp(0.0, 1.0))
        }
        _ => Err(unsupported(spec)),
    }
}

/// 1 − (1 − τ)^z
fn power_complement(tau: f64, z: u64) -> f64 {
    if z == 1 {
        tau
    } else {
        -(z as f64 * (-tau).ln_1p()).exp_m1()
    }
}

/// `[t, 1−f(1−t), 1−f_2(1−t), …]` up to index n.
fn complement_orbit(law: &DiscreteLaw, t: f64, n: u64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n as usize + 1);
    let mut tau = t;
    v.push(tau);
    for _ in 0..n {
        tau = law.pgf_complement(tau);
        v.push(tau);
    }
    v
}

/// `P(Z⁰_k = 0)` for k = 0..n of the Foster–Pakes process.
///
/// Conditioning on the last empty generation gives
/// `π_k = f_k(0)^{z0} − Σ_{i<k} π_i [1 − g(f_{k−1−i}(0))]`.
pub fn foster_pakes_zeros(offspring: &DiscreteLaw, immigration: &DiscreteLaw, z0: u64, n: u64) -> Result<Vec<f64>> {
    let taus = complement_orbit(offspring, 1.0, n);
    let gc: Vec<f64> = taus.iter().map(|t| immigration.pgf_complement(*t)).collect();
    let mut pi = Vec::with_capacity(n as usize + 1);
    for k in 0..=n as usize {
        let mut v = 1.0 - power_complement(taus[k], z0);
        for i in 0..k {
            v -= pi[i] * gc[k - 1 - i];
        }
        pi.push(v.clamp(0.0, 1.0));
    }
    Ok(pi)
}

/// `E[s^{Z_n}]`.
pub fn iterate_pgf(spec: &ProcessSpec, n: u64, s: f64) -> Result<f64> {
    check_unit(s, "p.g.f. argument")?;
    Ok(1.0 - generation_complement(spec, n, 1.0 - s)?)
}

/// `P(M_n ≤ x)`, where `M_n` is the largest family among the `Z_{n−1}`
/// parents (zero when there are none), optionally conditioned on
/// `Z_{n−1} > 0`.
pub fn exact_max_cdf(spec: &ProcessSpec, n: u64, x: f64, conditioning: Conditioning) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("the offspring maximum is defined from generation 1".into()));
    }
    let law = spec.offspring_law(n)?;
    let alive = generation_complement(spec, n - 1, 1.0)?;
    if x < 0.0 {
        return Ok(0.0);
    }
    let t = law.survival_at(x);
    let c = generation_complement(spec, n - 1, t)?;
    match conditioning {
        Conditioning::None => Ok((1.0 - c).clamp(0.0, 1.0)),
        Conditioning::Survival => {
            if alive < 1e-300 {
                return Err(Error::EffectivelyExtinct { n: n - 1 });
            }
            Ok(((alive - c) / alive).clamp(0.0, 1.0))
        }
    }
}

/// `E(M_n | A_n) = Σ_k P(M_n > k | A_n)`.
///
/// The first 1024 terms are summed exactly; beyond that the monotone
/// survival is integrated by trapezoids on a geometric grid, which keeps
/// power tails affordable.
pub fn exact_max_mean(spec: &ProcessSpec, n: u64, conditioning: Conditioning) -> Result<f64> {
    let surv = |k: u64| -> Result<f64> { Ok(1.0 - exact_max_cdf(spec, n, k as f64, conditioning)?) };
    let mut acc = 0.0;
    for k in 0..1024 {
        let term = surv(k)?;
        acc += term;
        if term < 1e-15 * acc.max(1.0) {
            return Ok(acc);
        }
    }
    let mut lo = 1024u64;
    let mut s_lo = surv(lo)?;
    while lo < 1 << 52 {
        let hi = lo + lo / 16;
        let s_hi = surv(hi)?;
        acc += 0.5 * (s_lo + s_hi) * (hi - lo) as f64;
        if s_hi * (hi as f64) < 1e-11 * acc {
            return Ok(acc);
        }
        lo = hi;
        s_lo = s_hi;
    }
    Err(Error::Numerical("maximum has no finite mean at this horizon".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationPmf {
    /// `P(Z_n = k)` for k = 0..=K.
    pub pmf: Vec<f64>,
    /// `1 − Σ pmf`.
    pub truncation_mass: f64,
}

const TRUNCATION_LIMIT: f64 = 1e-6;

/// Law of `Z_n` on `{0..=k_max}` by composing truncated power series.
pub fn exact_generation_pmf(spec: &ProcessSpec, n: u64, k_max: usize) -> Result<GenerationPmf> {
    let z0 = spec.z0() as usize;
    let mut cur = vec![0.0; k_max + 1];
    if z0 <= k_max {
        cur[z0] = 1.0;
    }
    let mut leaked = if z0 <= k_max { 0.0 } else { 1.0 };
    let imm = match spec {
        ProcessSpec::Immigration { immigration, .. } | ProcessSpec::FosterPakes { immigration, .. } => {
            Some(series(immigration, k_max))
        }
        ProcessSpec::Plain { .. } | ProcessSpec::VaryingGeometric { .. } => None,
        _ => return Err(unsupported(spec)),
    };
    for j in 1..=n {
        let f = series(&spec.offspring_law(j)?, k_max);
        let mut next = compose(&cur, &f);
        match (spec, &imm) {
            (ProcessSpec::Immigration { .. }, Some(g)) => next = multiply(&next, g),
            (ProcessSpec::FosterPakes { .. }, Some(g)) => {
                let empty = cur[0];
                next[0] -= empty;
                for (v, gk) in next.iter_mut().zip(g) {
                    *v += empty * gk;
                }
            }
            _ => {}
        }
        cur = next;
        let missing = (1.0 - cur.iter().sum::<f64>()).max(0.0);
        if j < n {
            leaked += missing;
        }
    }
    let truncation_mass = (1.0 - cur.iter().sum::<f64>()).max(0.0);
    if leaked + truncation_mass > TRUNCATION_LIMIT {
        return Err(Error::Truncation { mass: leaked + truncation_mass, suggested_k: 2 * k_max.max(8) });
    }
    Ok(GenerationPmf { pmf: cur, truncation_mass })
}

fn series(law: &DiscreteLaw, k_max: usize) -> Vec<f64> {
    (0..=k_max as u64).map(|k| law.pmf(k)).collect()
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    let mut out = vec![0.0; k];
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        for (j, bj) in b.iter().take(k - i).enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of `p(f(s))` up to the common length, by Horner's rule.
fn compose(p: &[f64], f: &[f64]) -> Vec<f64> {
    let k = p.len();
    let top = match p.iter().rposition(|v| *v != 0.0) {
        Some(t) => t,
        None => return vec![0.0; k],
    };
    let mut acc = vec![0.0; k];
    acc[0] = p[top];
    for i in (0..top).rev() {
        acc = multiply(&acc, f);
        acc[0] += p[i];
    }
    acc
}

/// Smallest truncation reaching the order-statistic accuracy target.
fn generation_pmf_auto(spec: &ProcessSpec, n: u64, k: u64) -> Result<GenerationPmf> {
    let mut k_max = 64usize.max(2 * k as usize);
    loop {
        match exact_generation_pmf(spec, n, k_max) {
            Ok(g) if g.truncation_mass < 1e-9 => return Ok(g),
            Ok(_) | Err(Error::Truncation { .. }) if k_max < 1024 => k_max *= 2,
            Ok(g) => return Err(Error::Truncation { mass: g.truncation_mass, suggested_k: 2 * k_max }),
            Err(e) => return Err(e),
        }
    }
}

/// `P(M_{(k),n} ≤ x | A_n)` for the k-th largest score in generation n.
///
/// Scores are i.i.d. with law `score`, one per generation-n individual;
/// with fewer than k individuals the k-th largest does not exceed any x.
pub fn exact_order_stat_cdf(
    spec: &ProcessSpec,
    n: u64,
    k: u64,
    score: &ScoreLaw,
    x: f64,
    conditioning: Conditioning,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("order statistic index k must be at least 1".into()));
    }
    let g = generation_pmf_auto(spec, n, k)?;
    let below = score.cdf(x);
    Ok(order_stat_mixture(&g.pmf, k, below, conditioning))
}

pub(crate) fn order_stat_mixture(pmf: &[f64], k: u64, below: f64, conditioning: Conditioning) -> f64 {
    let above = 1.0 - below;
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (j, pj) in pmf.iter().enumerate() {
        if j == 0 && conditioning == Conditioning::Survival {
            continue;
        }
        mass += pj;
        let j = j as u64;
        let inner = if j < k {
            1.0
        } else {
            (0..k)
                .map(|i| {
                    let lb = if below > 0.0 {
                        (j - i) as f64 * below.ln()
                    } else if j == i {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    };
                    let la = if above > 0.0 {
                        i as f64 * above.ln()
                    } else if i == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    };
                    (ln_choose(j, i) + la + lb).exp()
                })
                .sum::<f64>()
                .min(1.0)
        };
        acc += pj * inner;
    }
    match conditioning {
        Conditioning::Survival if mass > 0.0 => acc / mass,
        Conditioning::Survival => f64::NAN,
        Conditioning::None => acc,
    }
}

/// `F(x, y)^ν` for the bivariate geometric law.
pub fn exact_bivariate_array_cdf(params: &BivariateGeometric, nu: f64, x: f64, y: f64) -> f64 {
    params.array_cdf(nu, x, y)
}

/// Complement of the n-fold vector p.g.f. of a two-type process at `1 − t`.
pub fn two_type_complement(offspring: &TwoTypeOffspring, z0: [u64; 2], n: u64, t: [f64; 2]) -> f64 {
    let mut tau = t;
    for _ in 0..n {
        tau = offspring.complement(tau);
    }
    let log_phi = z0[0] as f64 * (-tau[0]).ln_1p() + z0[1] as f64 * (-tau[1]).ln_1p();
    -log_phi.exp_m1()
}

/// `P(max score in generation n ≤ x | Z(n) ≠ 0)` for a two-type process.
pub fn exact_two_type_max_cdf(spec: &ProcessSpec, n: u64, x: f64) -> Result<f64> {
    let ProcessSpec::TwoType { offspring, scores, z0 } = spec else {
        return Err(Error::Config("two-type oracle needs a two-type process".into()));
    };
    let alive = two_type_complement(offspring, *z0, n, [1.0, 1.0]);
    if alive < 1e-300 {
        return Err(Error::EffectivelyExtinct { n });
    }
    let c = two_type_complement(offspring, *z0, n, [scores[0].survival(x), scores[1].survival(x)]);
    Ok(((alive - c) / alive).clamp(0.0, 1.0))
}
