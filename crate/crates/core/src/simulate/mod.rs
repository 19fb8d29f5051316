//! Forward simulation of every process variant.
//!
//! Replicate `i` of a Monte Carlo run draws from the stream `(seed, i)`,
//! so results are bit-identical whatever the thread count.

mod bisexual;
mod empirical;

pub use bisexual::{run_bisexual, sample_componentwise_max, BisexualRecord};
pub use empirical::EmpiricalDistribution;

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::distributions::{DiscreteLaw, ScoreLaw};
use crate::error::{domain, Error, Result};
use crate::limits::{ArrayNorming, Norming};
use crate::pgf::{Conditioning, ProcessSpec};
use crate::rng::{open01, stream, StreamRng};

/// Cumulative individuals allowed in one trajectory.
pub const DEFAULT_CAP: u64 = 100_000_000;

/// Smallest acceptance rate a conditioned run may have.
const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreBlock {
    /// Largest scores in generation n, decreasing.
    pub top_last: Vec<f64>,
    /// Largest scores over generations 0..=n, decreasing.
    pub top_all: Vec<f64>,
    /// Generation holding the overall largest score.
    pub tau: u64,
    pub total_progeny: u64,
    /// The single ancestor scored strictly above all its descendants.
    pub founder_is_max: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxRecord {
    /// `Z_0, …, Z_n`.
    pub generations: Vec<u64>,
    /// `M_1, …, M_n`; `M_j` is the largest family among the `Z_{j−1}`
    /// parents, 0 when there are none.
    pub max_by_gen: Vec<u64>,
    /// `Z_{n−1} > 0`.
    pub survived: bool,
    pub scores: Option<ScoreBlock>,
}

impl MaxRecord {
    pub fn last_max(&self) -> u64 {
        *self.max_by_gen.last().unwrap_or(&0)
    }
}

pub fn run_trajectory<R: RngCore + ?Sized>(spec: &ProcessSpec, n: u64, rng: &mut R) -> Result<MaxRecord> {
    run_trajectory_capped(spec, n, DEFAULT_CAP, rng)
}

pub fn run_trajectory_capped<R: RngCore + ?Sized>(
    spec: &ProcessSpec,
    n: u64,
    cap: u64,
    rng: &mut R,
) -> Result<MaxRecord> {
    if n == 0 {
        return Err(domain("trajectories need n >= 1"));
    }
    let (immigration, only_when_empty) = match spec {
        ProcessSpec::Plain { .. } | ProcessSpec::VaryingGeometric { .. } => (None, false),
        ProcessSpec::Immigration { immigration, .. } => (Some(immigration), false),
        ProcessSpec::FosterPakes { immigration, .. } => (Some(immigration), true),
        ProcessSpec::Bisexual { .. } => return Err(domain("use run_bisexual for the bisexual process")),
        ProcessSpec::TwoType { .. } => return Err(domain("use run_two_type_scored for the two-type process")),
    };
    let mut z = spec.z0();
    let mut generations = vec![z];
    let mut max_by_gen = Vec::with_capacity(n as usize);
    let mut cumulative = z;
    for j in 1..=n {
        if z == 0 && immigration.is_none() {
            // extinct for good; the remaining generations are all empty
            generations.resize(n as usize + 1, 0);
            max_by_gen.resize(n as usize, 0);
            break;
        }
        let law = spec.offspring_law(j)?;
        let (sum, max) = law.sample_sum_max(z, rng);
        let mut next = sum;
        if let Some(g) = immigration {
            if !only_when_empty || z == 0 {
                next = next.saturating_add(g.sample(rng));
            }
        }
        max_by_gen.push(max);
        cumulative = cumulative.saturating_add(next);
        if cumulative > cap {
            return Err(Error::PopulationOverflow { generation: j, cap });
        }
        z = next;
        generations.push(z);
    }
    let survived = generations[n as usize - 1] > 0;
    Ok(MaxRecord { generations, max_by_gen, survived, scores: None })
}

/// Survival values `1 − U_(1) < 1 − U_(2) < …` of the `k` largest of
/// `count` uniforms, generated top-down without drawing the rest.
fn top_uniform_tails<R: RngCore + ?Sized>(count: u64, k: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(k.min(count as usize));
    let mut log_u = 0.0;
    for i in 0..k.min(count as usize) {
        log_u += open01(rng).ln() / (count - i as u64) as f64;
        out.push(-log_u.exp_m1());
    }
    out
}

/// Trajectory of a plain process with an i.i.d. score attached to every
/// individual of generations 0..=n.
pub fn run_scored<R: RngCore + ?Sized>(
    spec: &ProcessSpec,
    n: u64,
    k: usize,
    score: &ScoreLaw,
    rng: &mut R,
) -> Result<MaxRecord> {
    run_scored_capped(spec, n, k, score, DEFAULT_CAP, rng)
}

pub fn run_scored_capped<R: RngCore + ?Sized>(
    spec: &ProcessSpec,
    n: u64,
    k: usize,
    score: &ScoreLaw,
    cap: u64,
    rng: &mut R,
) -> Result<MaxRecord> {
    if !matches!(spec, ProcessSpec::Plain { .. }) {
        return Err(domain("scored runs are defined for the plain process"));
    }
    if k == 0 {
        return Err(domain("order statistic index k must be at least 1"));
    }
    score.validate()?;
    let mut rec = if n == 0 {
        MaxRecord { generations: vec![spec.z0()], max_by_gen: vec![], survived: true, scores: None }
    } else {
        run_trajectory_capped(spec, n, cap, rng)?
    };
    let mut top_all: Vec<f64> = Vec::new();
    let mut top_last = Vec::new();
    let mut tau = 0;
    let mut best = f64::NEG_INFINITY;
    for (j, &zj) in rec.generations.iter().enumerate() {
        let tops: Vec<f64> = top_uniform_tails(zj, k, rng).into_iter().map(|s| score.upper_quantile(s)).collect();
        if let Some(&first) = tops.first() {
            if first > best {
                best = first;
                tau = j as u64;
            }
        }
        top_all.extend_from_slice(&tops);
        if j as u64 == n {
            top_last = tops;
        }
    }
    top_all.sort_by(|a, b| b.total_cmp(a));
    top_all.truncate(k);
    let total_progeny = rec.generations.iter().sum();
    let founder_is_max = tau == 0 && rec.generations[0] == 1;
    rec.scores = Some(ScoreBlock { top_last, top_all, tau, total_progeny, founder_is_max });
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoTypeRecord {
    /// `Z(0), …, Z(n)` by type.
    pub sizes: Vec<[u64; 2]>,
    /// Largest score among the individuals of generation n, −∞ if none.
    pub max_score: f64,
    /// `Z(n) ≠ 0`.
    pub survived: bool,
}

/// Two-type process with type-specific scores on generation n.
pub fn run_two_type_scored<R: RngCore + ?Sized>(spec: &ProcessSpec, n: u64, rng: &mut R) -> Result<TwoTypeRecord> {
    let ProcessSpec::TwoType { offspring, scores, z0 } = spec else {
        return Err(domain("two-type runs need a two-type process"));
    };
    let mut z = *z0;
    let mut sizes = vec![z];
    let mut cumulative = z[0] + z[1];
    for j in 1..=n {
        let mut next = [0u64; 2];
        for i in 0..2 {
            let (total, _) = offspring.total[i].sample_sum_max(z[i], rng);
            let ones = binomial(total, offspring.p_type1[i], rng);
            next[0] += ones;
            next[1] += total - ones;
        }
        cumulative = cumulative.saturating_add(next[0] + next[1]);
        if cumulative > DEFAULT_CAP {
            return Err(Error::PopulationOverflow { generation: j, cap: DEFAULT_CAP });
        }
        z = next;
        sizes.push(z);
    }
    let mut max_score = f64::NEG_INFINITY;
    for i in 0..2 {
        if let Some(s) = top_uniform_tails(z[i], 1, rng).first() {
            max_score = max_score.max(scores[i].upper_quantile(*s));
        }
    }
    Ok(TwoTypeRecord { sizes, max_score, survived: z[0] + z[1] > 0 })
}

fn binomial<R: RngCore + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

/// Run `replicates` independent replicates, replicate `i` on stream
/// `(seed, i)`. A replicate returning `None` is rejected and retried on the
/// same stream, which conditions the sample on the accepted event.
///
/// Returns the accepted values in replicate order and the number of tries.
pub fn monte_carlo_map<T, F>(replicates: usize, seed: u64, f: F) -> Result<(Vec<T>, u64)>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<Option<T>> + Sync,
{
    // The whole run may use 1/MIN_ACCEPTANCE tries per replicate. The
    // total number of tries does not depend on scheduling, so whether the
    // budget is exceeded does not either.
    let budget = (replicates as f64 / MIN_ACCEPTANCE) as u64;
    let used = AtomicU64::new(0);
    let infeasible = || {
        let tries = used.load(Ordering::Relaxed).max(1);
        Error::ConditioningInfeasible { rate: replicates as f64 / tries as f64 }
    };
    let results: Vec<Result<(T, u64)>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut attempt = 0u64;
            loop {
                attempt += 1;
                if used.fetch_add(1, Ordering::Relaxed) >= budget {
                    return Err(infeasible());
                }
                if let Some(v) = f(&mut rng)? {
                    return Ok((v, attempt));
                }
            }
        })
        .collect();
    let mut values = Vec::with_capacity(replicates);
    let mut attempts = 0u64;
    for r in results {
        let (v, a) = r?;
        values.push(v);
        attempts += a;
    }
    Ok((values, attempts))
}

pub fn monte_carlo<F>(replicates: usize, seed: u64, f: F) -> Result<EmpiricalDistribution>
where
    F: Fn(&mut StreamRng) -> Result<Option<f64>> + Sync,
{
    let (values, attempts) = monte_carlo_map(replicates, seed, f)?;
    Ok(EmpiricalDistribution::from_run(values, attempts))
}

/// Transformation applied to the offspring maximum of generation n.
#[derive(Clone, Debug)]
pub enum Statistic {
    Max,
    /// `(M_n − b)/a`.
    Affine(Norming),
    /// `scale·M_n − location`.
    Lattice(ArrayNorming),
    /// `log U(M_n)/log n` with `U = 1/(1 − F)` for the given offspring law.
    LogReturnPeriod(DiscreteLaw),
}

impl Statistic {
    pub fn apply(&self, m: u64, n: u64) -> f64 {
        match self {
            Statistic::Max => m as f64,
            Statistic::Affine(norm) => norm.apply(m as f64),
            Statistic::Lattice(norm) => norm.at(m),
            Statistic::LogReturnPeriod(law) => -law.survival(m).ln() / (n as f64).ln(),
        }
    }
}

/// ECDF of a statistic of `M_n`, optionally conditioned on `Z_{n−1} > 0`.
pub fn monte_carlo_ecdf(
    spec: &ProcessSpec,
    n: u64,
    statistic: &Statistic,
    conditioning: Conditioning,
    replicates: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if replicates < 100 {
        return Err(Error::Config("Monte Carlo runs need at least 100 replicates".into()));
    }
    spec.validate()?;
    monte_carlo(replicates, seed, |rng| Ok(last_max(spec, n, conditioning, rng)?.map(|m| statistic.apply(m, n))))
}

/// `M_n` alone, without recording the trajectory; `None` when the run
/// misses the conditioning event. Draws the same variates as
/// [`run_trajectory`], so both agree replicate by replicate.
pub fn last_max<R: RngCore + ?Sized>(
    spec: &ProcessSpec,
    n: u64,
    conditioning: Conditioning,
    rng: &mut R,
) -> Result<Option<u64>> {
    if n == 0 {
        return Err(domain("trajectories need n >= 1"));
    }
    let (immigration, only_when_empty) = match spec {
        ProcessSpec::Plain { .. } | ProcessSpec::VaryingGeometric { .. } => (None, false),
        ProcessSpec::Immigration { immigration, .. } => (Some(immigration), false),
        ProcessSpec::FosterPakes { immigration, .. } => (Some(immigration), true),
        _ => return run_trajectory(spec, n, rng).map(|r| Some(r.last_max())),
    };
    let fixed = match spec {
        ProcessSpec::VaryingGeometric { .. } => None,
        _ => Some(spec.offspring_law(1)?),
    };
    let mut z = spec.z0();
    let mut cumulative = z;
    let mut max = 0;
    for j in 1..=n {
        if z == 0 && immigration.is_none() {
            return Ok(if conditioning == Conditioning::Survival { None } else { Some(0) });
        }
        if j == n && z == 0 && conditioning == Conditioning::Survival {
            return Ok(None);
        }
        let (sum, m) = match &fixed {
            Some(law) => law.sample_sum_max(z, rng),
            None => spec.offspring_law(j)?.sample_sum_max(z, rng),
        };
        let mut next = sum;
        if let Some(g) = immigration {
            if !only_when_empty || z == 0 {
                next = next.saturating_add(g.sample(rng));
            }
        }
        cumulative = cumulative.saturating_add(next);
        if cumulative > DEFAULT_CAP {
            return Err(Error::PopulationOverflow { generation: j, cap: DEFAULT_CAP });
        }
        max = m;
        z = next;
    }
    Ok(Some(max))
}
