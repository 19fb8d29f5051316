use super::*;
use crate::distributions::{DiscreteLaw, ScoreLaw};
use crate::pgf::{EnvSchedule, ZmgStep};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn h_at_the_origin_and_one() {
    for shape in
        [VonMisesShape::Gumbel, VonMisesShape::VonMises { theta: 3.0 }, VonMisesShape::VonMises { theta: -2.0 }]
    {
        close(shape.h(0.0), 1.0, 1e-15);
    }
    close(VonMisesShape::VonMises { theta: 1.0 }.h(1.0), 0.5, 1e-15);
    close(VonMisesShape::Gumbel.h(2.0), (-2.0f64).exp(), 1e-15);
}

#[test]
fn h_outside_the_support() {
    assert_eq!(VonMisesShape::VonMises { theta: 2.0 }.h(-3.0), f64::INFINITY);
    assert_eq!(VonMisesShape::VonMises { theta: -2.0 }.h(3.0), 0.0);
    assert_eq!(VonMisesShape::Frechet { alpha: 2.0 }.h(0.0), f64::INFINITY);
}

#[test]
fn closed_form_spot_values() {
    let logistic = LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Gumbel, sigma2: 2.0 };
    close(logistic.cdf(0.0).unwrap(), 0.5, 1e-15);
    close(LimitLaw::CriticalInfiniteVar { a: 2.0 }.cdf(1.0).unwrap(), 0.5, 1e-15);
    let tt = LimitLaw::TwoType { shape: VonMisesShape::Gumbel, v_ratio: 1.0, c: 1.0, d: 0.0 };
    close(tt.cdf(0.0).unwrap(), 1.0 / 3.0, 1e-15);
}

#[test]
fn bivariate_law_with_zero_constants_depends_on_the_minimum() {
    let law = LimitLaw::BivariateMo { a: 0.0, b: 0.0, c: 0.0 };
    for (x, y) in [(0.0, 1.0), (2.0, -1.0), (0.5, 0.5)] {
        close(law.cdf2(x, y).unwrap(), (-(-f64::min(x, y)).exp()).exp(), 1e-15);
    }
    assert!(law.cdf(0.0).is_err());
}

#[test]
fn bivariate_marginal() {
    for (a, b, c) in [(0.0, 0.0, 0.5), (1.0, 1.0, 0.0), (0.3, 2.0, 0.7)] {
        for x in [-1.0, 0.0, 2.0] {
            close(bivariate_g(a, b, c, x, f64::INFINITY), (-(-x - a - c).exp()).exp(), 1e-12);
        }
    }
}

#[test]
fn infinite_variance_range_is_enforced() {
    let err = LimitLaw::CriticalInfiniteVar { a: 3.0 }.validate().unwrap_err();
    assert!(err.to_string().contains("1 < a <= 2"), "{err}");
    assert!(LimitLaw::ImmigrationInfiniteVar { a: 1.0, c: 1.0 }.validate().is_err());
    assert!(burr_constant(1.0, 2.5).unwrap_err().to_string().contains("1 < a <= 2"));
}

#[test]
fn subcritical_gamma_spot_values() {
    let spec = ProcessSpec::plain(DiscreteLaw::geometric(0.6).unwrap());
    close(gamma_subcritical(&spec, 0.6).unwrap(), 1.0 / 3.0, 1e-9);
    let imm = ProcessSpec::Immigration {
        offspring: DiscreteLaw::geometric_mean_form(0.5).unwrap(),
        immigration: DiscreteLaw::new(crate::distributions::LawSpec::NegBinImmigration { m: 0.5, nu: 2.0 }).unwrap(),
        z0: 0,
    };
    close(gamma_subcritical(&imm, 0.0).unwrap(), 0.25, 1e-9);
}

#[test]
fn subcritical_gamma_solves_its_functional_equations() {
    let f = DiscreteLaw::geometric(0.6).unwrap();
    let m = f.mean();
    let spec = ProcessSpec::plain(f.clone());
    let g = DiscreteLaw::tabulated(vec![0.5, 0.3, 0.2]).unwrap();
    let imm = ProcessSpec::Immigration { offspring: f.clone(), immigration: g.clone(), z0: 0 };
    for i in 0..10 {
        let s = i as f64 / 10.0;
        let fs = f.pgf(s).unwrap();
        let plain = gamma_subcritical(&spec, fs).unwrap() - m * gamma_subcritical(&spec, s).unwrap() - (1.0 - m);
        assert!(plain.abs() < 1e-9, "plain residual {plain} at {s}");
        let im = gamma_subcritical(&imm, s).unwrap() - g.pgf(s).unwrap() * gamma_subcritical(&imm, fs).unwrap();
        assert!(im.abs() < 1e-9, "immigration residual {im} at {s}");
    }
}

#[test]
fn laplace_fixed_point() {
    for law in [DiscreteLaw::geometric_mean_form(2.0).unwrap(), DiscreteLaw::shifted_geometric(2.0).unwrap()] {
        let m = law.mean();
        close(phi_laplace(&law, 0.0).unwrap(), 1.0, 1e-15);
        for u in [0.1, 1.0, 10.0] {
            let r = phi_laplace(&law, u).unwrap() - law.pgf(phi_laplace(&law, u / m).unwrap()).unwrap();
            assert!(r.abs() < 1e-10, "residual {r}");
        }
        let h = 1e-5;
        let slope = -(phi_laplace(&law, h).unwrap() - phi_laplace(&law, -h).unwrap_or(1.0 + h)) / (2.0 * h);
        close(slope, 1.0, 1e-4);
    }
}

#[test]
fn laplace_closed_forms() {
    // geometric mean form with m = 2: P(W = 0) = 1/2, W | W > 0 ~ Exp(1/2)
    let geo = DiscreteLaw::geometric_mean_form(2.0).unwrap();
    // s/(1 + m − ms): W ~ Exp(1)
    let shifted = DiscreteLaw::shifted_geometric(2.0).unwrap();
    for u in [0.1, 1.0, 10.0] {
        close(phi_laplace(&geo, u).unwrap(), 0.5 + 0.5 / (1.0 + 2.0 * u), 1e-12);
        close(phi_laplace(&shifted, u).unwrap(), 1.0 / (1.0 + u), 1e-12);
    }
    close(phi_laplace(&geo, f64::INFINITY).unwrap(), 0.5, 1e-12);
}

#[test]
fn stated_means_match_integration() {
    let laws = [
        LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha: 2.0 }, sigma2: 2.0 },
        LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha: 3.0 }, sigma2: 1.3 },
        LimitLaw::CriticalInfiniteVar { a: 2.0 },
        LimitLaw::CriticalInfiniteVar { a: 1.7 },
        LimitLaw::ImmigrationFiniteVar { shape: VonMisesShape::Frechet { alpha: 2.5 }, sigma2: 2.0, mu: 0.7 },
        LimitLaw::ImmigrationInfiniteVar { a: 2.0, c: 1.0 },
        LimitLaw::ImmigrationInfiniteVar { a: 1.8, c: 0.4 },
        LimitLaw::GumbelShifted { c: 0.5 },
        LimitLaw::LogisticShifted { c: 0.3 },
    ];
    for law in laws {
        let closed = law.mean().unwrap();
        let numeric = law.mean_by_integration().unwrap();
        assert!((closed - numeric).abs() < 1e-6, "{law:?}: {closed} vs {numeric}");
    }
}

#[test]
fn critical_means_at_the_boundary_are_half_pi() {
    let half_pi = std::f64::consts::FRAC_PI_2;
    close(LimitLaw::CriticalInfiniteVar { a: 2.0 }.mean().unwrap(), half_pi, 1e-12);
    let frechet = LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha: 2.0 }, sigma2: 2.0 };
    close(frechet.mean().unwrap(), half_pi, 1e-12);
}

#[test]
fn subcritical_mean_lies_between_the_bounds() {
    let spec = ProcessSpec::plain(DiscreteLaw::geometric(0.6).unwrap());
    let m = 2.0 / 3.0;
    let mean = LimitLaw::SubcriticalGamma { process: spec }.mean().unwrap();
    assert!(mean >= m / (1.0 - 0.6 * m) && mean <= m / (1.0 - m), "{mean}");
}

#[test]
fn quantiles_invert_the_cdf() {
    let law = LimitLaw::GumbelShifted { c: 0.5 };
    let grid = law.quantile_grid().unwrap();
    assert_eq!(grid.len(), 19);
    for (i, x) in grid.iter().enumerate() {
        close(law.cdf(*x).unwrap(), (i + 1) as f64 * 0.05, 1e-9);
    }
    assert!(law.quantile(1.0).is_err());
}

#[test]
fn normalizer_examples() {
    let n = power_tail_norming(1.0, 2.0, 100.0).unwrap();
    assert_eq!((n.a, n.b), (10.0, 0.0));
    let bd = EnvSchedule::BirthDeath { birth: 1.0, death: 1.0, delta: 1.0 };
    let norms = varying_norms(&bd, 30).unwrap();
    for (j, b) in norms.b.iter().enumerate() {
        close(*b, j as f64, 1e-12 * j.max(1) as f64);
        close(norms.mu[j], 1.0, 1e-15);
    }
    let flat = EnvSchedule::Explicit { steps: vec![ZmgStep { a: 0.5, p: 0.5 }; 6] };
    assert!(varying_norms(&flat, 6).unwrap().mu.iter().all(|m| *m == 1.0));
}

#[test]
fn varying_b_matches_its_definition() {
    let sched = EnvSchedule::Harmonic { mean: std::f64::consts::E, offset: 2.0 };
    let norms = varying_norms(&sched, 25).unwrap();
    for n in 1..=25u64 {
        let mut mu = 1.0;
        let mut sum = 0.0;
        for j in 1..=n {
            let s = sched.step(j).unwrap();
            mu *= s.a / s.p;
            sum += (1.0 / s.p - 1.0) / mu;
        }
        close(norms.b[n as usize], mu * sum, 1e-12 * mu * sum);
    }
}

#[test]
fn birth_death_b_closed_form() {
    let sched = EnvSchedule::BirthDeath { birth: 1.5, death: 0.5, delta: 1.0 };
    let norms = varying_norms(&sched, 12).unwrap();
    for t in 1..=12u64 {
        let want = birth_death_b(1.5, 0.5, t as f64);
        close(norms.b[t as usize], want, 1e-12 * want);
    }
}

#[test]
fn logistic_and_exponential_share_norming() {
    for n in [10.0, 1e3, 1e6] {
        let a = score_norming(&ScoreLaw::Logistic, n).unwrap();
        let b = score_norming(&ScoreLaw::Exponential { rate: 1.0 }, n).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.a, a.b), (1.0, n.ln()));
    }
}

#[test]
fn mixture_with_degenerate_w() {
    for (x, y) in [(0.0, 0.0), (-1.0, 2.0), (3.0, 0.5)] {
        let (zero, se) = bisexual_mixture_cdf(0.0, 0.0, 0.0, &[0.0; 5], x, y).unwrap();
        assert_eq!((zero, se), (1.0, 0.0));
        let (one, _) = bisexual_mixture_cdf(0.3, 0.1, 0.2, &[1.0; 5], x, y).unwrap();
        close(one, bivariate_g(0.3, 0.1, 0.2, x, y), 1e-15);
    }
    assert!(bisexual_mixture_cdf(0.0, 0.0, 0.0, &[], 0.0, 0.0).is_err());
}

#[test]
fn symmetric_two_type_constants() {
    use crate::pgf::TwoTypeOffspring;
    let law = DiscreteLaw::geometric_mean_form(1.0).unwrap();
    let off = TwoTypeOffspring { total: [law.clone(), law], p_type1: [0.5, 0.5] };
    let (v1, v2, b) = two_type_constants(&off).unwrap();
    close(v1, 1.0, 1e-14);
    close(v2, 1.0, 1e-14);
    close(b, 0.5, 1e-14);
}

#[test]
fn tail_constants_for_pareto_and_gumbel_tails() {
    let (c, d) =
        tail_constants(&ScoreLaw::Pareto { theta: 2.0, c: 2.0 }, &ScoreLaw::Pareto { theta: 1.0, c: 2.0 }).unwrap();
    close(c, 2.0, 1e-12);
    close(d, 0.0, 0.0);
    let (c, d) = tail_constants(&ScoreLaw::Logistic, &ScoreLaw::Exponential { rate: 1.0 }).unwrap();
    close(c, 1.0, 0.0);
    close(d, 0.0, 1e-12);
}

#[test]
fn supercritical_mixture_tends_to_extinction_mass() {
    let spec = ProcessSpec::plain(DiscreteLaw::geometric_mean_form(2.0).unwrap());
    let law = LimitLaw::SupercriticalMixture { process: spec, shape: VonMisesShape::Gumbel };
    close(law.cdf(-40.0).unwrap(), 0.5, 1e-9);
    close(law.cdf(40.0).unwrap(), 1.0, 1e-12);
}

fn univariate_law() -> impl Strategy<Value = LimitLaw> {
    prop_oneof![
        (0.5f64..4.0).prop_map(|s| LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Gumbel, sigma2: s }),
        (0.5f64..4.0, 1.1f64..5.0)
            .prop_map(|(s, a)| LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha: a }, sigma2: s }),
        (1.05f64..=2.0).prop_map(|a| LimitLaw::CriticalInfiniteVar { a }),
        (1.05f64..=2.0, 0.1f64..3.0).prop_map(|(a, c)| LimitLaw::ImmigrationInfiniteVar { a, c }),
        (-2.0f64..2.0).prop_map(|c| LimitLaw::GumbelShifted { c }),
        (-2.0f64..2.0).prop_map(|alpha| LimitLaw::TruncatedGumbel { alpha }),
        (-2.0f64..2.0).prop_map(|c| LimitLaw::LogisticShifted { c }),
        (-2.0f64..2.0).prop_map(|alpha| LimitLaw::TruncatedLogistic { alpha }),
        (1u32..5, 0.5f64..4.0)
            .prop_map(|(k, a)| LimitLaw::ImmortalGeometric { k, shape: VonMisesShape::Frechet { alpha: a } }),
        (0.2f64..5.0, 0.5f64..3.0, -1.0f64..1.0).prop_map(|(r, c, d)| LimitLaw::TwoType {
            shape: VonMisesShape::Gumbel,
            v_ratio: r,
            c,
            d
        }),
    ]
}

proptest! {
    #[test]
    fn cdfs_are_monotone_with_proper_limits(law in univariate_law()) {
        let mut prev = 0.0;
        for i in -400..=400 {
            let v = law.cdf(i as f64 * 0.05).unwrap();
            prop_assert!(v + 1e-12 >= prev, "decrease at {}", i);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        prop_assert!(law.cdf(-1e300).unwrap() < 1e-6);
        prop_assert!(law.cdf(1e300).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn infinite_variance_boundary_coincides(x in 0.01f64..50.0) {
        let burr = LimitLaw::CriticalInfiniteVar { a: 2.0 }.cdf(x).unwrap();
        let frechet = LimitLaw::CriticalFiniteVar { shape: VonMisesShape::Frechet { alpha: 2.0 }, sigma2: 2.0 }.cdf(x).unwrap();
        let burr3 = LimitLaw::ImmigrationInfiniteVar { a: 2.0, c: 1.0 }.cdf(x).unwrap();
        prop_assert!((burr - frechet).abs() < 1e-12);
        prop_assert!((burr3 - burr).abs() < 1e-12);
    }
}
