use super::*;
use crate::rng::stream;
use proptest::prelude::*;

fn catalogue() -> Vec<DiscreteLaw> {
    [
        LawSpec::Geometric { p: 0.6 },
        LawSpec::GeometricMeanForm { m: 0.5 },
        LawSpec::ShiftedGeometric { m: 2.0 },
        LawSpec::ZeroModifiedGeometric { a: 0.5, p: 0.5 },
        LawSpec::RegVaryingCritical { a: 1.5 },
        LawSpec::PoissonStable { lambda: 0.7, a: 1.6 },
        LawSpec::PoissonStable { lambda: 1.3, a: 2.0 },
        LawSpec::LogImmigration { m: 0.5, mu: 0.2 },
        LawSpec::NegBinImmigration { m: 0.5, nu: 2.0 },
        LawSpec::HeavyTailCritical { a: 3.0 },
        LawSpec::HeavyTailCritical { a: 1.5 },
        LawSpec::Tabulated { pmf: vec![0.25, 0.0, 0.5, 0.25] },
    ]
    .into_iter()
    .map(|s| DiscreteLaw::new(s).unwrap())
    .collect()
}

#[test]
fn zmg_survival_example() {
    let law = DiscreteLaw::zero_modified_geometric(0.5, 0.5).unwrap();
    // Σ_{j≥2} a p (1−p)^{j−1} = 0.5·0.5·(0.5 + 0.25 + …) = 0.25
    let direct: f64 = (2..200).map(|j| 0.5 * 0.5 * 0.5f64.powi(j - 1)).sum();
    assert!((law.survival(1) - 0.25).abs() < 1e-15);
    assert!((direct - 0.25).abs() < 1e-15);
}

#[test]
fn geometric_cdf_at_zero() {
    let law = DiscreteLaw::geometric(0.6).unwrap();
    assert!((law.cdf(0) - 0.6).abs() < 1e-15);
    assert_eq!(eval(&law, Functional::Cdf, 0.0).unwrap(), law.cdf(0));
}

#[test]
fn pgf_at_one_is_one() {
    for law in catalogue() {
        assert!((law.pgf(1.0).unwrap() - 1.0).abs() < 1e-15, "{law:?}");
    }
}

#[test]
fn pgf_domain_checked() {
    let law = DiscreteLaw::geometric(0.6).unwrap();
    assert!(matches!(law.pgf(1.5), Err(Error::Domain(_))));
    assert!(matches!(eval(&law, Functional::Pmf, -1.0), Err(Error::Domain(_))));
}

#[test]
fn pmf_sums_to_one_with_tail() {
    for law in catalogue() {
        let mut acc = 0.0;
        for k in 0..400u64 {
            acc += law.pmf(k);
            assert!((acc + law.survival(k) - 1.0).abs() < 1e-12, "{law:?} at k={k}");
            assert!((law.cdf(k) - acc).abs() < 1e-12, "{law:?} cdf at k={k}");
        }
    }
}

#[test]
fn series_matches_closed_form_pgf() {
    for law in catalogue() {
        for s in [0.0, 0.3, 0.7, 0.99] {
            let mut acc = 0.0;
            let mut pw = 1.0;
            let mut k = 0u64;
            loop {
                acc += law.pmf(k) * pw;
                if law.survival(k) * pw < 1e-13 || k > 20_000 {
                    break;
                }
                pw *= s;
                k += 1;
            }
            let closed = law.pgf(s).unwrap();
            assert!((acc - closed).abs() < 1e-9, "{law:?} s={s}: {acc} vs {closed}");
        }
    }
}

#[test]
fn pgf_slope_at_one_is_mean() {
    for law in catalogue() {
        if law.mean().is_finite() {
            let t = 1e-14;
            let slope = law.pgf_complement(t) / t;
            assert!((slope - law.mean()).abs() < 1e-6, "{law:?}: {slope} vs {}", law.mean());
        }
    }
}

#[test]
fn heavy_tail_construction() {
    let law = make_critical_heavy_tail(3.0).unwrap();
    let theta = law.tail_constant().unwrap();
    assert!((theta - 3.057_57).abs() < 1e-4);
    // mean = Σ_{k≥0} S(k), summed independently of the stored value
    let mean = law.survival(0) + theta * crate::numerics::power_exp_sum(3.0, 0.0, 1);
    assert!((mean - 1.0).abs() < 1e-12);
    assert!((law.mean() - 1.0).abs() < 1e-12);
    assert!(law.pmf(1).abs() < 1e-15);
    let ratio = law.survival(1000) / 1000f64.powi(-3);
    assert!((ratio / theta - 1.0).abs() < 0.01);
    // E X² = Σ (2k+1) S(k), by brute force with an integral tail
    let k_max = 200_000u64;
    let mut m2: f64 = (0..k_max).map(|k| (2 * k + 1) as f64 * law.survival(k)).sum();
    m2 += 2.0 * theta / (k_max as f64); // ∫ 2x·θx^{−3}
    assert!((m2 - 1.0 - law.variance()).abs() < 1e-4, "{m2} {}", law.variance());
    assert!(make_critical_heavy_tail(1.5).unwrap().variance().is_infinite());
    assert_eq!(make_critical_heavy_tail(1.5).unwrap().tail_index(), Some(1.5));
    assert!(matches!(make_critical_heavy_tail(1.0), Err(Error::Construction(_))));
}

#[test]
fn degenerate_tabulated_always_zero() {
    let law = DiscreteLaw::tabulated(vec![1.0]).unwrap();
    let mut r = stream(3, 0);
    for _ in 0..1000 {
        assert_eq!(law.sample(&mut r), 0);
    }
    assert_eq!(law.sample_sum_max(1000, &mut r), (0, 0));
}

fn check_sample_mean(law: &DiscreteLaw, seed: u64) {
    let n = 1_000_000u64;
    let mut r = stream(seed, 0);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += law.sample(&mut r) as f64;
    }
    let est = acc / n as f64;
    let se = (law.variance() / n as f64).sqrt();
    assert!((est - law.mean()).abs() < 3.0 * se, "{law:?}: {est} vs {} (se {se})", law.mean());
}

#[test]
fn geometric_sample_mean() {
    let law = DiscreteLaw::geometric(0.6).unwrap();
    assert!((law.mean() - 2.0 / 3.0).abs() < 1e-15);
    check_sample_mean(&law, 21);
}

#[test]
fn heavy_tail_sample_mean() {
    check_sample_mean(&make_critical_heavy_tail(3.0).unwrap(), 22);
}

#[test]
fn other_sample_means() {
    for (i, spec) in [
        LawSpec::NegBinImmigration { m: 0.5, nu: 2.0 },
        LawSpec::LogImmigration { m: 0.5, mu: 0.2 },
        LawSpec::RegVaryingCritical { a: 1.5 },
        LawSpec::ZeroModifiedGeometric { a: 0.3, p: 0.05 },
        LawSpec::PoissonStable { lambda: 1.3, a: 2.0 },
    ]
    .into_iter()
    .enumerate()
    {
        check_sample_mean(&DiscreteLaw::new(spec).unwrap(), 30 + i as u64);
    }
}

#[test]
fn poisson_stable_sampler_matches_pmf() {
    let law = DiscreteLaw::new(LawSpec::PoissonStable { lambda: 0.7, a: 1.6 }).unwrap();
    let n = 200_000;
    let mut r = stream(8, 0);
    let mut counts = [0u32; 6];
    for _ in 0..n {
        let x = law.sample(&mut r) as usize;
        if x < 6 {
            counts[x] += 1;
        }
    }
    for (k, c) in counts.iter().enumerate() {
        let p = law.pmf(k as u64);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((*c as f64 / n as f64 - p).abs() < 4.0 * se, "k={k}");
    }
}

/// KS distance between the empirical law of the maximum and F^count.
fn max_ks(law: &DiscreteLaw, count: u64, reps: usize, seed: u64) -> (f64, f64) {
    let mut r = stream(seed, 0);
    let mut maxima = Vec::with_capacity(reps);
    let mut sum_acc = 0.0;
    for _ in 0..reps {
        let (s, m) = law.sample_sum_max(count, &mut r);
        sum_acc += s as f64;
        maxima.push(m);
    }
    maxima.sort_unstable();
    let mut sup: f64 = 0.0;
    let top = *maxima.last().unwrap();
    for k in 0..=top {
        let emp = maxima.partition_point(|m| *m <= k) as f64 / reps as f64;
        let exact = (count as f64 * (-law.survival(k)).ln_1p()).exp();
        sup = sup.max((emp - exact).abs());
    }
    (sup, sum_acc / reps as f64)
}

#[test]
fn level_sampler_max_and_sum() {
    let reps = 20_000;
    let dkw = ((2.0f64 / 0.001).ln() / (2.0 * reps as f64)).sqrt();
    for (i, law) in [
        DiscreteLaw::geometric(0.6).unwrap(),
        make_critical_heavy_tail(3.0).unwrap(),
        make_critical_heavy_tail(1.5).unwrap(),
        DiscreteLaw::new(LawSpec::NegBinImmigration { m: 3.0, nu: 0.5 }).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let count = 5_000;
        let (sup, mean_sum) = max_ks(&law, count, reps, 40 + i as u64);
        assert!(sup < dkw, "{law:?}: sup {sup} vs dkw {dkw}");
        if law.variance().is_finite() {
            let se = (count as f64 * law.variance() / reps as f64).sqrt();
            assert!((mean_sum - count as f64 * law.mean()).abs() < 4.0 * se, "{law:?} sum mean {mean_sum}");
        }
    }
}

#[test]
fn config_rejects_unknown_variant_and_keys() {
    let bad: std::result::Result<LawSpec, _> = serde_json::from_str(r#"{"law":"cauchy","p":0.5}"#);
    assert!(bad.is_err());
    let bad: std::result::Result<LawSpec, _> = serde_json::from_str(r#"{"law":"geometric","p":0.5,"q":1}"#);
    assert!(bad.is_err());
    let ok: DiscreteLaw = serde_json::from_str(r#"{"law":"geometric","p":0.5}"#).unwrap();
    assert_eq!(ok, DiscreteLaw::geometric(0.5).unwrap());
}

proptest! {
    #[test]
    fn zmg_family_invariants(a in 0.0f64..=1.0, p in 0.01f64..=1.0, k in 0u64..200) {
        let law = DiscreteLaw::zero_modified_geometric(a, p).unwrap();
        let cdf: f64 = (0..=k).map(|j| law.pmf(j)).sum();
        prop_assert!((cdf + law.survival(k) - 1.0).abs() < 1e-12);
        prop_assert!(law.survival(k + 1) <= law.survival(k));
        let u = law.survival(k);
        if u > 1e-300 && u < 1.0 {
            // the inverse lands on the first index at or below u
            let inv = law.inverse_survival(u);
            prop_assert!(law.survival(inv) <= u * (1.0 + 1e-12));
            prop_assert!(inv == 0 || law.survival(inv - 1) > u * (1.0 - 1e-12));
        }
    }

    #[test]
    fn tabulated_sum_max_bounds(w in proptest::collection::vec(0.01f64..1.0, 1..5), count in 0u64..300, seed in any::<u64>()) {
        let total: f64 = w.iter().sum();
        let pmf: Vec<f64> = w.iter().map(|v| v / total).collect();
        let fix = 1.0 - pmf.iter().sum::<f64>();
        let mut pmf = pmf;
        pmf[0] += fix;
        let law = DiscreteLaw::tabulated(pmf).unwrap();
        let mut r = stream(seed, 0);
        let (sum, max) = law.sample_sum_max(count, &mut r);
        let top = law.support_max().unwrap();
        prop_assert!(max <= top);
        prop_assert!(sum >= max);
        prop_assert!(sum <= count * top);
    }

    #[test]
    fn pgf_monotone_in_s(p in 0.05f64..0.95, s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
        let law = DiscreteLaw::geometric(p).unwrap();
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(law.pgf(lo).unwrap() <= law.pgf(hi).unwrap() + 1e-15);
    }
}
