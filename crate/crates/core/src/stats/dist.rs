//! Distribution tails: F and Student's t come from `statrs`; the
//! studentized-range tail (not available in any published crate) is computed
//! by adaptive quadrature of its classical double-integral form.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Upper tail of the F distribution.
pub fn f_upper_tail(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if df1.is_nan() || df1 <= 0.0 || df2.is_nan() || df2 <= 0.0 {
        return Err(Error::invalid(format!("invalid F dfs ({df1}, {df2})")));
    }
    if f <= 0.0 {
        return Ok(1.0);
    }
    let dist = FisherSnedecor::new(df1, df2)
        .map_err(|e| Error::Numerical(format!("F distribution: {e}")))?;
    Ok((1.0 - dist.cdf(f)).clamp(0.0, 1.0))
}

/// Two-sided p-value for a t statistic.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    Ok((2.0 * t_upper_tail(t.abs(), df)?).clamp(0.0, 1.0))
}

/// Upper tail of Student's t.
pub fn t_upper_tail(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::invalid(format!("invalid t df {df}")));
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    Ok(1.0 - dist.cdf(t))
}

pub fn normal_cdf(z: f64) -> f64 {
    // unwrap is fine: parameters are constants
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail of the studentized range distribution with `k` groups and
/// `df` error degrees of freedom (`f64::INFINITY` for the limiting case).
///
/// `P(Q > q) = 1 - ∫ f_S(s) · P(W ≤ q·s) ds`, where `W` is the range of
/// `k` standard normals, `P(W ≤ w) = k ∫ φ(u) [Φ(u+w) - Φ(u)]^{k-1} du`,
/// and `S = sqrt(χ²_df / df)`. Absolute error of the quadrature is kept
/// below 1e-6.
pub fn studentized_range_upper_tail(q: f64, k: usize, df: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("studentized range needs k >= 2"));
    }
    if df.is_nan() || df <= 0.0 {
        return Err(Error::invalid(format!("invalid studentized-range df {df}")));
    }
    if q <= 0.0 {
        return Ok(1.0);
    }
    let cdf = if df.is_infinite() || df > 1e8 {
        range_cdf(q, k)
    } else {
        // outer integral over the scale variable s
        let nu = df;
        let ln_norm = (1.0 - nu / 2.0) * (2.0f64).ln() + (nu / 2.0) * nu.ln() - ln_gamma(nu / 2.0);
        let density = |s: f64| -> f64 {
            if s <= 0.0 {
                return 0.0;
            }
            (ln_norm + (nu - 1.0) * s.ln() - nu * s * s / 2.0).exp()
        };
        let s_lo = (1.0 - 14.0 / nu.sqrt()).max(0.0);
        let s_hi = 1.0 + 14.0 / nu.sqrt().max(1.0);
        adaptive_simpson(&|s| density(s) * range_cdf(q * s, k), s_lo, s_hi, 1e-8, 24)
    };
    Ok((1.0 - cdf).clamp(0.0, 1.0))
}

/// CDF of the range of `k` iid standard normals.
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let f = |u: f64| normal_pdf(u) * (normal_cdf(u + w) - normal_cdf(u)).powi(km1);
    (k as f64 * adaptive_simpson(&f, -8.5, 8.5, 1e-9, 24)).clamp(0.0, 1.0)
}

/// Critical value `q` with `P(Q > q) = alpha`, by bisection.
pub fn studentized_range_critical(k: usize, df: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::invalid("alpha must be in (0, 1)"));
    }
    let mut lo = 0.0;
    let mut hi = 200.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_upper_tail(mid, k, df)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: usize) -> f64 {
    let c = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, eps, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fc, fd, left, eps / 2.0, depth - 1)
            + simpson_step(f, c, b, fc, fb, fe, right, eps / 2.0, depth - 1)
    }
}
