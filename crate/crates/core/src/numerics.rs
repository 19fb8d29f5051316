//! Special functions and quadrature shared by the law and limit modules.

use statrs::function::{beta as sbeta, gamma as sgamma};

pub fn ln_gamma(x: f64) -> f64 {
    sgamma::ln_gamma(x)
}

pub fn beta(u: f64, v: f64) -> f64 {
    sbeta::ln_beta(u, v).exp()
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    sbeta::beta_reg(a, b, x)
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over a finite interval.
///
/// Globally adaptive: the interval with the largest error estimate is
/// bisected until the summed error meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).expect("non-empty");
        let (lo, hi, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            parts.push((lo, hi, gk15(&f, lo, hi)));
            break;
        }
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
    parts.iter().map(|p| p.2 .0).sum()
}

/// ∫_a^∞ f: [a, a+1] directly, the rest through x = a + e^y and
/// y = t/(1−t). The exponential map turns power tails x^{−k} into
/// e^{−(k−1)y}, which the finite-interval rule resolves without a
/// singularity at t = 1.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let head = integrate(&f, a, a + 1.0, abs_tol, rel_tol);
    let tail = integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let y = t / one_minus;
            let ey = y.exp();
            let v = f(a + ey) * ey / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    );
    head + tail
}

const EM_START: u64 = 32;

/// Σ_{k ≥ k0} (1+k)^{−a} e^{−τk} for a > 1, τ ≥ 0.
///
/// Terms below 32 are summed directly; the rest by Euler–Maclaurin with four
/// Bernoulli corrections and a quadrature for the integral term.
pub fn power_exp_sum(a: f64, tau: f64, k0: u64) -> f64 {
    debug_assert!(a > 1.0 && tau >= 0.0);
    let big_k = k0.max(EM_START);
    let mut head = 0.0;
    for k in k0..big_k {
        head += (-(a * (k as f64).ln_1p()) - tau * k as f64).exp();
    }
    let kf = big_k as f64;
    if tau * kf > 745.0 {
        return head;
    }
    head + em_tail(a, tau, kf)
}

fn em_tail(a: f64, tau: f64, k: f64) -> f64 {
    let one_k = 1.0 + k;
    let r = 1.0 / (a - 1.0);
    let integral = if tau == 0.0 {
        one_k.powf(1.0 - a) / (a - 1.0)
    } else {
        let beta = tau * one_k;
        let inner =
            integrate(|w: f64| if w <= 0.0 { 0.0 } else { (tau - beta * w.powf(-r)).exp() }, 0.0, 1.0, 0.0, 1e-14);
        one_k.powf(1.0 - a) / (a - 1.0) * inner
    };
    // g^{(m)}(k) = e^{−τk}(1+k)^{−a} Σ_i C(m,i)(−τ)^{m−i}(−1)^i (a)_i (1+k)^{−i}
    let base = (-a * one_k.ln() - tau * k).exp();
    let deriv = |m: u32| -> f64 {
        let mut s = 0.0;
        let mut rising = 1.0;
        let mut binom = 1.0;
        for i in 0..=m {
            if i > 0 {
                rising *= a + (i - 1) as f64;
                binom *= (m - i + 1) as f64 / i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += binom * (-tau).powi((m - i) as i32) * sign * rising * one_k.powi(-(i as i32));
        }
        base * s
    };
    integral + 0.5 * base - deriv(1) / 12.0 + deriv(3) / 720.0 - deriv(5) / 30_240.0 + deriv(7) / 1_209_600.0
}

/// Riemann zeta for a > 1.
pub fn zeta(a: f64) -> f64 {
    power_exp_sum(a, 0.0, 0)
}
