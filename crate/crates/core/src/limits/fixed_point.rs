use crate::distributions::DiscreteLaw;
use crate::error::{check_unit, domain, Error, Result};
use crate::pgf::{foster_pakes_zeros, ProcessSpec, Regime};

const MAX_ITER: usize = 1_000_000;

/// Generating function of the limiting law in the subcritical regime.
///
/// * plain: the Yaglom limit `lim (f_n(s) − f_n(0))/(1 − f_n(0))`;
/// * immigration: the stationary law `Π_{n≥0} g(f_n(s))`;
/// * immigration into empty generations only: the stationary law
///   `1 − γ(0) Σ_n [1 − g(f_n(s))]`, with `γ(0) = {1 + Σ_n [1 − g(f_n(0))]}^{−1}`.
pub fn gamma_subcritical(spec: &ProcessSpec, s: f64) -> Result<f64> {
    check_unit(s, "p.g.f. argument")?;
    if spec.regime() != Some(Regime::Subcritical) {
        return Err(Error::Config("the subcritical limit needs offspring mean m < 1".into()));
    }
    match spec {
        ProcessSpec::Plain { offspring, .. } => yaglom(offspring, s),
        ProcessSpec::Immigration { offspring, immigration, .. } => {
            let mut t = 1.0 - s;
            let mut log_prod = 0.0;
            for _ in 0..MAX_ITER {
                let gc = immigration.pgf_complement(t);
                log_prod += (-gc).ln_1p();
                if gc < 1e-14 && t < 1e-14 {
                    return Ok(log_prod.exp());
                }
                t = offspring.pgf_complement(t);
            }
            Err(Error::Numerical("stationary product did not converge".into()))
        }
        ProcessSpec::FosterPakes { offspring, immigration, .. } => {
            let series = |t0: f64| -> Result<f64> {
                let mut t = t0;
                let mut acc = 0.0;
                for _ in 0..MAX_ITER {
                    let gc = immigration.pgf_complement(t);
                    acc += gc;
                    if gc < 1e-16 * acc.max(1e-300) || t == 0.0 {
                        return Ok(acc);
                    }
                    t = offspring.pgf_complement(t);
                }
                Err(Error::Numerical("stationary series did not converge".into()))
            };
            let at_zero = 1.0 / (1.0 + series(1.0)?);
            if s == 0.0 {
                return Ok(at_zero);
            }
            Ok(1.0 - at_zero * series(1.0 - s)?)
        }
        _ => Err(domain("no subcritical limit for this process")),
    }
}

fn yaglom(law: &DiscreteLaw, s: f64) -> Result<f64> {
    let mut t = 1.0 - s;
    let mut alive = 1.0;
    let mut prev = f64::NAN;
    for _ in 0..MAX_ITER {
        t = law.pgf_complement(t);
        alive = law.pgf_complement(alive);
        if alive < 1e-290 {
            return Ok(prev);
        }
        let g = 1.0 - t / alive;
        if (g - prev).abs() < 1e-15 {
            return Ok(g);
        }
        prev = g;
    }
    Err(Error::Numerical("Yaglom iteration did not converge".into()))
}

/// Laplace transform `φ(u) = E e^{−uW}` of `W = lim Z_n/mⁿ` started from
/// one ancestor, the solution of `φ(u) = f(φ(u/m))` with `φ'(0) = −1`.
pub fn phi_laplace(law: &DiscreteLaw, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(domain(format!("Laplace argument must be non-negative, got {u}")));
    }
    let m = law.mean();
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Config("the martingale limit needs 1 < m < ∞".into()));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    if u.is_infinite() {
        // extinction probability
        let mut t = 1.0;
        for _ in 0..MAX_ITER {
            let next = law.pgf_complement(t);
            if (next - t).abs() < 1e-16 {
                return Ok(1.0 - next);
            }
            t = next;
        }
        return Err(Error::Numerical("extinction probability did not converge".into()));
    }
    // Start deep enough that φ(v) = e^{−v} + O(v²) is exact to working
    // precision, then push forward through the complement map.
    let mut v = u;
    let mut steps = 0usize;
    while v > 1e-13 / u.max(1.0) {
        v /= m;
        steps += 1;
        if steps > 20_000 {
            return Err(Error::Numerical("Laplace iteration depth exceeded".into()));
        }
    }
    let mut t = -(-v).exp_m1();
    for _ in 0..steps {
        t = law.pgf_complement(t);
    }
    Ok(1.0 - t)
}

/// Laplace transform of the limit of `Z_{n}/mⁿ` for the whole process,
/// including its ancestors and immigrants.
///
/// * plain: `φ(u)^{z0}`;
/// * immigration: `φ(u)^{z0} Π_{k≥1} g(φ(u m^{−k}))`;
/// * immigration into empty generations: `φ(u)^{z0} − Σ_{k≥0} π_k [1 − g(φ(u m^{−k−1}))]`
///   with `π_k = P(Z_k = 0)`.
pub fn psi_supercritical(spec: &ProcessSpec, u: f64) -> Result<f64> {
    if spec.regime() != Some(Regime::Supercritical) {
        return Err(Error::Config("the supercritical mixture needs offspring mean m > 1".into()));
    }
    if u.is_nan() || u < 0.0 {
        return Err(domain(format!("Laplace argument must be non-negative, got {u}")));
    }
    match spec {
        ProcessSpec::Plain { offspring, z0 } => Ok(phi_laplace(offspring, u)?.powi(*z0 as i32)),
        ProcessSpec::Immigration { offspring, immigration, z0 } => {
            let m = offspring.mean();
            let mut acc = if *z0 > 0 { *z0 as f64 * phi_laplace(offspring, u)?.ln() } else { 0.0 };
            let mut w = u / m;
            for _ in 0..MAX_ITER {
                let gc = immigration.pgf_complement(1.0 - phi_laplace(offspring, w)?);
                acc += (-gc).ln_1p();
                if gc < 1e-15 {
                    return Ok(acc.exp());
                }
                w /= m;
            }
            Err(Error::Numerical("immigration product did not converge".into()))
        }
        ProcessSpec::FosterPakes { offspring, immigration, z0 } => {
            let m = offspring.mean();
            let mut acc = phi_laplace(offspring, u)?.powi(*z0 as i32);
            let mut horizon = 64u64;
            loop {
                let zeros = foster_pakes_zeros(offspring, immigration, *z0, horizon)?;
                // zeros decay geometrically once the process escapes
                if zeros[horizon as usize] < 1e-16 || horizon >= 1 << 14 {
                    let mut w = u / m;
                    for pk in zeros {
                        if pk == 0.0 {
                            break;
                        }
                        acc -= pk * immigration.pgf_complement(1.0 - phi_laplace(offspring, w)?);
                        w /= m;
                    }
                    return Ok(acc.clamp(0.0, 1.0));
                }
                horizon *= 2;
            }
        }
        _ => Err(domain("no supercritical mixture for this process")),
    }
}
