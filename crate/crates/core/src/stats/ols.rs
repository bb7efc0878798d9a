//! Ordinary least squares via Householder QR, the shared kernel behind the
//! ANOVA, Tukey, GLM, and regression fits.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Array1<f64>,
    pub residual_ss: f64,
    pub df_resid: usize,
    /// `(X'X)^{-1}`, for Wald standard errors.
    pub unscaled_covariance: Array2<f64>,
    pub fitted: Array1<f64>,
}

/// Least-squares solve of `design * beta ≈ response`.
///
/// Householder QR; rank deficiency is reported with the offending column
/// indices rather than silently pinv-ing through it.
pub fn fit_ols(design: &Array2<f64>, response: &Array1<f64>) -> Result<OlsFit> {
    let n = design.nrows();
    let p = design.ncols();
    if response.len() != n {
        return Err(Error::invalid(format!(
            "design has {n} rows but response has {}",
            response.len()
        )));
    }
    if n <= p {
        return Err(Error::invalid(format!(
            "need more observations ({n}) than design columns ({p})"
        )));
    }
    let (r, qty) = householder_qr(design, response);

    // rank check on the R diagonal
    let dmax = (0..p).map(|j| r[[j, j]].abs()).fold(0.0f64, f64::max);
    let tol = 1e-10 * dmax.max(1.0);
    let dependent: Vec<usize> = (0..p).filter(|&j| r[[j, j]].abs() < tol).collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    // back substitution: R beta = (Q'y)[..p]
    let mut beta = Array1::zeros(p);
    for j in (0..p).rev() {
        let mut s = qty[j];
        for k in (j + 1)..p {
            s -= r[[j, k]] * beta[k];
        }
        beta[j] = s / r[[j, j]];
    }

    // (X'X)^{-1} = R^{-1} R^{-T}
    let rinv = invert_upper_triangular(&r);
    let unscaled_covariance = rinv.dot(&rinv.t());

    let fitted = design.dot(&beta);
    let residual_ss = response
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f) * (y - f))
        .sum();

    Ok(OlsFit {
        coefficients: beta,
        residual_ss,
        df_resid: n - p,
        unscaled_covariance,
        fitted,
    })
}

/// Householder QR of `a`, returning the p x p upper-triangular factor and
/// the first p entries' worth of `Q'y` (full vector returned for residuals).
fn householder_qr(a: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = a.nrows();
    let p = a.ncols();
    let mut work = a.clone();
    let mut qty = y.clone();
    for j in 0..p {
        // norm of the j-th column below the diagonal
        let mut norm = 0.0;
        for i in j..n {
            norm += work[[i, j]] * work[[i, j]];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if work[[j, j]] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - j];
        v[0] = work[[j, j]] - alpha;
        for i in (j + 1)..n {
            v[i - j] = work[[i, j]];
        }
        let vns: f64 = v.iter().map(|x| x * x).sum();
        if vns == 0.0 {
            continue;
        }
        // apply H = I - 2 v v' / (v'v) to the remaining columns and to y
        for col in j..p {
            let mut dot = 0.0;
            for i in j..n {
                dot += v[i - j] * work[[i, col]];
            }
            let f = 2.0 * dot / vns;
            for i in j..n {
                work[[i, col]] -= f * v[i - j];
            }
        }
        let mut dot = 0.0;
        for i in j..n {
            dot += v[i - j] * qty[i];
        }
        let f = 2.0 * dot / vns;
        for i in j..n {
            qty[i] -= f * v[i - j];
        }
    }
    let mut r = Array2::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            r[[i, j]] = work[[i, j]];
        }
    }
    (r, qty)
}

fn invert_upper_triangular(r: &Array2<f64>) -> Array2<f64> {
    let p = r.nrows();
    let mut inv = Array2::zeros((p, p));
    for j in (0..p).rev() {
        inv[[j, j]] = 1.0 / r[[j, j]];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in (i + 1)..=j {
                s += r[[i, k]] * inv[[k, j]];
            }
            inv[[i, j]] = -s / r[[i, i]];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line_has_zero_residual() {
        let x = array![[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]];
        let y = array![0.0, 2.0, 4.0, 6.0];
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.coefficients[0]).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residual_ss < 1e-20);
        assert_eq!(fit.df_resid, 2);
    }

    #[test]
    fn intercept_only_fits_the_mean() {
        let x = Array2::from_shape_vec((5, 1), vec![1.0; 5]).unwrap();
        let y = array![1.0, 2.0, 3.0, 4.0, 10.0];
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_on_random_system() {
        // Normal-equations oracle: solve (X'X) b = X'y by Gaussian
        // elimination and compare.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 50;
        let p = 4;
        let mut x = Array2::zeros((n, p));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 1..p {
                x[[i, j]] = rng.gen_range(-2.0..2.0);
            }
            y[i] = rng.gen_range(-3.0..3.0);
        }
        let fit = fit_ols(&x, &y).unwrap();

        let xtx = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let oracle = solve_dense(&xtx, &xty);
        for j in 0..p {
            assert!(
                (fit.coefficients[j] - oracle[j]).abs() < 1e-8,
                "coef {j}: {} vs {}",
                fit.coefficients[j],
                oracle[j]
            );
        }
        // unscaled covariance equals the normal-equation inverse
        let mut ident = Array2::eye(p);
        for j in 0..p {
            let col = solve_dense(&xtx, &ident.column(j).to_owned());
            for i in 0..p {
                assert!((fit.unscaled_covariance[[i, j]] - col[i]).abs() < 1e-8);
            }
        }
        ident[[0, 0]] = 1.0;
    }

    fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut rhs = b.clone();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if m[[r, col]].abs() > m[[piv, col]].abs() {
                    piv = r;
                }
            }
            for c in 0..n {
                let t = m[[col, c]];
                m[[col, c]] = m[[piv, c]];
                m[[piv, c]] = t;
            }
            let t = rhs[col];
            rhs[col] = rhs[piv];
            rhs[piv] = t;
            for r in (col + 1)..n {
                let f = m[[r, col]] / m[[col, col]];
                for c in col..n {
                    m[[r, c]] -= f * m[[col, c]];
                }
                rhs[r] -= f * rhs[col];
            }
        }
        let mut out = Array1::zeros(n);
        for r in (0..n).rev() {
            let mut s = rhs[r];
            for c in (r + 1)..n {
                s -= m[[r, c]] * out[c];
            }
            out[r] = s / m[[r, r]];
        }
        out
    }

    #[test]
    fn duplicate_column_reports_rank_deficiency() {
        let mut x = Array2::zeros((6, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..6 {
            x[[i, 0]] = 1.0;
            let v: f64 = rng.gen_range(-1.0..1.0);
            x[[i, 1]] = v;
            x[[i, 2]] = 2.0 * v;
        }
        let y = Array1::zeros(6);
        match fit_ols(&x, &y) {
            Err(Error::RankDeficient { columns }) => assert!(!columns.is_empty()),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
