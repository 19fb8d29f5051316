use serde::Serialize;

/// Weighted sample, kept sorted, with the conditioning bookkeeping of the
/// run that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    points: Vec<(f64, f64)>,
    #[serde(skip)]
    cumulative: Vec<f64>,
    total_weight: f64,
    replicates: u64,
    attempts: u64,
}

impl EmpiricalDistribution {
    /// Equal-weight sample; every draw was accepted.
    pub fn from_samples(values: Vec<f64>) -> Self {
        let n = values.len() as u64;
        Self::from_run(values, n)
    }

    /// Equal-weight sample from a run that needed `attempts` tries.
    pub fn from_run(values: Vec<f64>, attempts: u64) -> Self {
        let replicates = values.len() as u64;
        Self::weighted(values.into_iter().map(|v| (v, 1.0)).collect(), replicates, attempts)
    }

    pub fn weighted(mut points: Vec<(f64, f64)>, replicates: u64, attempts: u64) -> Self {
        assert!(
            points.iter().all(|(v, w)| !v.is_nan() && *w >= 0.0),
            "values must be non-NaN with non-negative weights"
        );
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut acc = 0.0;
        let cumulative: Vec<f64> = points
            .iter()
            .map(|p| {
                acc += p.1;
                acc
            })
            .collect();
        EmpiricalDistribution { points, cumulative, total_weight: acc, replicates, attempts: attempts.max(replicates) }
    }

    /// Pool two samples; the result does not depend on the order of the
    /// arguments.
    pub fn merge(&self, other: &Self) -> Self {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::weighted(pts, self.replicates + other.replicates, self.attempts + other.attempts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn replicates(&self) -> u64 {
        self.replicates
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return 1.0;
        }
        self.replicates as f64 / self.attempts as f64
    }

    /// Effective sample size `(Σw)²/Σw²`; equals the length for equal weights.
    pub fn effective_size(&self) -> f64 {
        let s2: f64 = self.points.iter().map(|p| p.1 * p.1).sum();
        if s2 == 0.0 {
            0.0
        } else {
            self.total_weight * self.total_weight / s2
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// Distinct sample values in increasing order.
    pub fn support(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.values().collect();
        v.dedup();
        v
    }

    /// `P̂(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= x);
        self.mass_below(idx)
    }

    /// `P̂(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 < x);
        self.mass_below(idx)
    }

    fn mass_below(&self, idx: usize) -> f64 {
        if self.total_weight == 0.0 {
            return 0.0;
        }
        match idx {
            0 => 0.0,
            i if i == self.points.len() => 1.0,
            i => self.cumulative[i - 1] / self.total_weight,
        }
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(v, w)| v * w).sum::<f64>() / self.total_weight
    }

    /// Standard error of the mean, using the effective sample size.
    pub fn stderr(&self) -> f64 {
        let m = self.mean();
        let var = self.points.iter().map(|(v, w)| w * (v - m) * (v - m)).sum::<f64>() / self.total_weight;
        let n = self.effective_size();
        if n <= 1.0 {
            return 0.0;
        }
        (var * n / (n - 1.0) / n).sqrt()
    }

    /// Smallest sample value with `P̂(X ≤ x) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = p.clamp(0.0, 1.0) * self.total_weight;
        let mut acc = 0.0;
        for (v, w) in &self.points {
            acc += w;
            if acc >= target {
                return *v;
            }
        }
        self.points.last().map(|p| p.0).unwrap_or(f64::NAN)
    }
}
