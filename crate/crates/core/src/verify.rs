//! Distances between exact laws, Monte Carlo samples and limit laws, with
//! tolerances that say where they come from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::EmpiricalDistribution;

/// Significance level of every DKW band.
pub const DKW_ALPHA: f64 = 0.001;

/// Allowed growth of the distance from one horizon to the next before a
/// sweep counts as non-convergent.
pub const SWEEP_SLACK: f64 = 0.20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonKind {
    ExactVsLimit,
    EcdfVsExact,
    EcdfVsLimit,
    TwoEstimator,
    /// Two exact evaluations that must agree to rounding.
    Identity,
}

impl ComparisonKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComparisonKind::ExactVsLimit => "exact-vs-limit",
            ComparisonKind::EcdfVsExact => "ecdf-vs-exact",
            ComparisonKind::EcdfVsLimit => "ecdf-vs-limit",
            ComparisonKind::TwoEstimator => "two-estimator",
            ComparisonKind::Identity => "identity",
        }
    }
}

/// Where a tolerance comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Justification {
    /// DKW band at level [`DKW_ALPHA`], possibly plus a stated slack.
    Dkw,
    /// Finite-horizon error of an asymptotic law, calibrated once and frozen.
    ConvergenceSlack,
    /// Floating-point rounding.
    Float,
    /// Multiple of a combined standard error; the distance is a z-score.
    Stderr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment_id: String,
    pub kind: ComparisonKind,
    /// Horizon of the final comparison.
    pub n: u64,
    pub grid: Vec<f64>,
    pub deltas: Vec<f64>,
    pub sup_distance: f64,
    pub tolerance: f64,
    pub justification: Justification,
    pub pass: bool,
    /// `(n, sup distance)` for every horizon of a sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<(u64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime: f64,
}

impl VerificationReport {
    pub fn new(
        id: impl Into<String>,
        kind: ComparisonKind,
        n: u64,
        grid: Vec<f64>,
        deltas: Vec<f64>,
        tolerance: f64,
        justification: Justification,
    ) -> Self {
        let sup_distance = deltas.iter().fold(0.0f64, |m, d| if d.is_nan() { f64::NAN } else { m.max(d.abs()) });
        VerificationReport {
            experiment_id: id.into(),
            kind,
            n,
            grid,
            deltas,
            sup_distance,
            tolerance,
            justification,
            pass: sup_distance <= tolerance,
            sweep: Vec::new(),
            notes: Vec::new(),
            runtime: 0.0,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Mark the report failed with a reason, keeping the measured distance.
    pub fn fail(mut self, reason: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(reason.into());
        self
    }
}

/// `sqrt(ln(2/α)/(2N))`: with probability 1 − α the ECDF of N draws stays
/// within this distance of the true cdf.
pub fn dkw_bound(n: f64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n)).sqrt()
}

/// Kolmogorov distance between a sample and a cdf, checked on both sides of
/// every jump of the ECDF.
pub fn ks_distance(e: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sup = 0.0f64;
    for v in e.support() {
        let eps = 1e-9 * v.abs().max(1.0);
        let right = (e.cdf(v) - cdf(v)).abs();
        let left = (e.cdf_left(v) - cdf(v - eps)).abs();
        sup = sup.max(right).max(left);
    }
    sup
}

/// Distance of a sample to a reference cdf at the DKW level plus `slack`.
pub fn ecdf_vs_cdf(
    id: &str,
    kind: ComparisonKind,
    n: u64,
    e: &EmpiricalDistribution,
    cdf: impl Fn(f64) -> f64,
    slack: f64,
) -> VerificationReport {
    let grid = e.support();
    let deltas: Vec<f64> = grid
        .iter()
        .map(|&v| {
            let eps = 1e-9 * v.abs().max(1.0);
            let r = e.cdf(v) - cdf(v);
            let l = e.cdf_left(v) - cdf(v - eps);
            if r.abs() >= l.abs() {
                r
            } else {
                l
            }
        })
        .collect();
    let tol = dkw_bound(e.effective_size(), DKW_ALPHA) + slack;
    let mut r = VerificationReport::new(id, kind, n, Vec::new(), Vec::new(), tol, Justification::Dkw);
    r.sup_distance = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    r.pass = r.sup_distance <= tol;
    r.notes.push(format!(
        "N = {}, acceptance rate {:.4e}, DKW(alpha = {DKW_ALPHA}) = {:.5}, slack = {slack}",
        e.len(),
        e.acceptance_rate(),
        tol - slack
    ));
    // keep reports small: record the points where the worst deltas occur
    let worst = worst_points(&grid, &deltas, 25);
    r.grid = worst.0;
    r.deltas = worst.1;
    r
}

fn worst_points(grid: &[f64], deltas: &[f64], keep: usize) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..grid.len()).collect();
    idx.sort_by(|a, b| deltas[*b].abs().total_cmp(&deltas[*a].abs()));
    idx.truncate(keep);
    idx.sort_unstable();
    (idx.iter().map(|i| grid[*i]).collect(), idx.iter().map(|i| deltas[*i]).collect())
}

/// Sweep an exact law over horizons and compare it with its limit on a
/// fixed grid of normalized points.
///
/// Passes when the distance at the last horizon is within `tolerance` and
/// never grows by more than [`SWEEP_SLACK`] from one horizon to the next.
pub fn exact_vs_limit(
    id: &str,
    exact: impl Fn(u64, f64) -> Result<f64>,
    limit: impl Fn(f64) -> Result<f64>,
    horizons: &[u64],
    grid: &[f64],
    tolerance: f64,
) -> Result<VerificationReport> {
    if horizons.is_empty() || grid.is_empty() {
        return Err(Error::Config("exact-vs-limit needs at least one horizon and one grid point".into()));
    }
    let lim: Vec<f64> = grid.iter().map(|x| limit(*x)).collect::<Result<_>>()?;
    let mut sweep = Vec::with_capacity(horizons.len());
    let mut last = Vec::new();
    for &n in horizons {
        let deltas: Vec<f64> = grid.iter().zip(&lim).map(|(x, l)| Ok(exact(n, *x)? - l)).collect::<Result<_>>()?;
        let sup = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        sweep.push((n, sup));
        last = deltas;
    }
    let n = *horizons.last().expect("non-empty");
    let mut report = VerificationReport::new(
        id,
        ComparisonKind::ExactVsLimit,
        n,
        grid.to_vec(),
        last,
        tolerance,
        Justification::ConvergenceSlack,
    );
    for w in sweep.windows(2) {
        if w[1].1 > w[0].1 * (1.0 + SWEEP_SLACK) && w[1].1 > 1e-12 {
            report = report
                .fail(format!("distance grew from {:.3e} at n={} to {:.3e} at n={}", w[0].1, w[0].0, w[1].1, w[1].0));
        }
    }
    report.sweep = sweep;
    Ok(report)
}

/// Pointwise agreement of two exact evaluations.
pub fn identity_check(id: &str, n: u64, grid: &[f64], a: &[f64], b: &[f64], tolerance: f64) -> VerificationReport {
    let deltas = a.iter().zip(b).map(|(x, y)| x - y).collect();
    VerificationReport::new(id, ComparisonKind::Identity, n, grid.to_vec(), deltas, tolerance, Justification::Float)
}

/// An estimate and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// Mean and standard error of a sample.
    pub fn from_sample(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if n > 1.0 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { value: mean, stderr: (var / n).sqrt() }
    }
}

/// Componentwise `|Â − B̂| ≤ z·sqrt(se_A² + se_B²)`; the reported distance is
/// the largest z-score and the tolerance is `z`.
pub fn two_estimator_consistency(
    id: &str,
    n: u64,
    grid: &[f64],
    a: &[Estimate],
    b: &[Estimate],
    z: f64,
) -> Result<VerificationReport> {
    if a.len() != b.len() || a.len() != grid.len() {
        return Err(Error::Config("estimator vectors must have matching lengths".into()));
    }
    let mut deltas = Vec::with_capacity(a.len());
    for (ea, eb) in a.iter().zip(b) {
        let se = (ea.stderr * ea.stderr + eb.stderr * eb.stderr).sqrt();
        let diff = ea.value - eb.value;
        if se == 0.0 {
            if diff.abs() > 1e-12 {
                return Err(Error::DegenerateVariance { a: ea.value, b: eb.value });
            }
            deltas.push(0.0);
        } else {
            deltas.push(diff / se);
        }
    }
    Ok(VerificationReport::new(id, ComparisonKind::TwoEstimator, n, grid.to_vec(), deltas, z, Justification::Stderr))
}

/// Distance of a sample of `log U(M)/log n` values to Uniform(0, 1).
pub fn uniformity_check(id: &str, n: u64, e: &EmpiricalDistribution, slack: f64) -> VerificationReport {
    ecdf_vs_cdf(id, ComparisonKind::EcdfVsLimit, n, e, |x| x.clamp(0.0, 1.0), slack)
}

/// Convergence of a normalized mean sequence `(n, E_n/norm(n))` to `limit`.
///
/// Fails when the final relative error exceeds `rel_tol`, or when the error
/// grows beyond [`SWEEP_SLACK`] three times in a row.
pub fn mean_convergence(id: &str, sequence: &[(u64, f64)], limit: f64, rel_tol: f64) -> Result<VerificationReport> {
    let Some(&(n, last)) = sequence.last() else {
        return Err(Error::Config("mean convergence needs a non-empty sequence".into()));
    };
    let errors: Vec<f64> = sequence.iter().map(|(_, v)| (v - limit).abs() / limit.abs().max(1e-300)).collect();
    let grid = sequence.iter().map(|(k, _)| *k as f64).collect();
    let deltas = sequence.iter().map(|(_, v)| v - limit).collect();
    let mut r = VerificationReport::new(
        id,
        ComparisonKind::ExactVsLimit,
        n,
        grid,
        deltas,
        rel_tol,
        Justification::ConvergenceSlack,
    );
    r.sup_distance = (last - limit).abs() / limit.abs().max(1e-300);
    r.pass = r.sup_distance <= rel_tol;
    let mut run = 0;
    for w in errors.windows(2) {
        if w[1] > w[0] * (1.0 + SWEEP_SLACK) {
            run += 1;
            if run >= 3 {
                r = r.fail("relative error increased three times in a row");
                break;
            }
        } else {
            run = 0;
        }
    }
    r.sweep = sequence.iter().zip(&errors).map(|((k, _), e)| (*k, *e)).collect();
    Ok(r.with_note(format!("distance is the relative error of the last normalized mean against {limit}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open01, stream};

    #[test]
    fn dkw_reference_value() {
        assert!((dkw_bound(1e5, 0.001) - 0.006_166).abs() < 1e-5);
    }

    #[test]
    fn ks_of_exact_quantiles_is_at_most_one_over_n() {
        let n = 1000;
        let e = EmpiricalDistribution::from_samples((1..=n).map(|i| i as f64 / n as f64).collect());
        assert!(ks_distance(&e, |x| x.clamp(0.0, 1.0)) <= 1.0 / n as f64 + 1e-12);
    }

    #[test]
    fn ks_of_identical_steps_is_zero() {
        let e = EmpiricalDistribution::from_samples(vec![0.0, 1.0, 1.0, 2.0]);
        let cdf = |x: f64| e.cdf(x);
        assert_eq!(ks_distance(&e, cdf), 0.0);
    }

    #[test]
    fn uniform_sample_within_dkw() {
        let mut r = stream(3, 0);
        let e = EmpiricalDistribution::from_samples((0..100_000).map(|_| open01(&mut r)).collect());
        let rep = uniformity_check("u", 0, &e, 0.0);
        assert!(rep.pass, "{}", rep.sup_distance);
        assert!(rep.tolerance < 0.0062);
    }

    #[test]
    fn limit_against_itself_is_zero() {
        let f = |x: f64| (-(-x).exp()).exp();
        let r = exact_vs_limit("self", |_, x| Ok(f(x)), |x| Ok(f(x)), &[1, 2], &[-1.0, 0.0, 1.0], 0.0).unwrap();
        assert!(r.pass && r.sup_distance == 0.0);
    }

    #[test]
    fn growing_distance_fails_sweep() {
        let r = exact_vs_limit("grow", |n, _| Ok(n as f64 * 0.01), |_| Ok(0.0), &[1, 2], &[0.0], 1.0).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn degenerate_estimators() {
        let a = [Estimate::new(1.0, 0.0)];
        assert!(two_estimator_consistency("t", 0, &[0.0], &a, &a, 3.0).unwrap().pass);
        let b = [Estimate::new(0.5, 0.0)];
        assert!(matches!(
            two_estimator_consistency("t", 0, &[0.0], &a, &b, 3.0),
            Err(Error::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn report_round_trips() {
        let mut r = VerificationReport::new(
            "x",
            ComparisonKind::EcdfVsLimit,
            7,
            vec![0.1, 0.2],
            vec![0.01, -0.02],
            0.05,
            Justification::Dkw,
        );
        r.sweep = vec![(3, 0.1), (7, 0.02)];
        r.runtime = 1.5;
        let s = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert_eq!(back.sup_distance, r.sup_distance);
    }

    #[test]
    fn mean_convergence_flags_divergence() {
        let seq: Vec<(u64, f64)> = (1..6).map(|k| (k, 1.0 + 0.1 * 2f64.powi(k as i32))).collect();
        assert!(!mean_convergence("d", &seq, 1.0, 10.0).unwrap().pass);
        let seq: Vec<(u64, f64)> = (1..6).map(|k| (k, 1.0 + 0.5f64.powi(k as i32))).collect();
        assert!(mean_convergence("c", &seq, 1.0, 0.05).unwrap().pass);
    }
}
