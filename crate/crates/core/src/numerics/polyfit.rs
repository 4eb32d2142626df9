use super::Real;
use crate::error::{Error, Result};

/// Least-squares polynomial fit, coefficients in ascending power order.
///
/// Solved by Householder QR on the Vandermonde matrix (no normal equations),
/// then back substitution on `R c = Qᵀ y`. A diagonal entry of `R` that is
/// negligible relative to its column norm is reported as rank deficiency.
pub fn polyfit<T: Real>(xs: &[T], ys: &[T], degree: usize) -> Result<Vec<T>> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "polyfit: {} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    let m = degree + 1;
    if n < m {
        return Err(Error::Underdetermined { needed: m, got: n });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("polyfit: non-finite sample"));
    }

    // column-major Vandermonde so Householder works on contiguous columns
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut col = vec![T::one(); n];
    for _ in 0..m {
        cols.push(col.clone());
        for (c, &x) in col.iter_mut().zip(xs) {
            *c *= x;
        }
    }
    let col_norms: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    let mut rhs = ys.to_vec();
    let tol = T::epsilon() * T::of(100.0 * n as f64);

    for k in 0..m {
        let alpha = {
            let s = norm(&cols[k][k..]);
            if cols[k][k] > T::zero() {
                -s
            } else {
                s
            }
        };
        if alpha.abs() <= tol * col_norms[k] || alpha == T::zero() {
            return Err(Error::RankDeficient(k));
        }
        // v = x - alpha e1, stored in place of column k below the diagonal
        let mut v = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        let apply = |target: &mut [T]| {
            let d: T = v.iter().zip(target.iter()).map(|(&a, &b)| a * b).sum();
            let f = T::of(2.0) * d / vnorm2;
            for (t, &vi) in target.iter_mut().zip(&v) {
                *t -= f * vi;
            }
        };
        for c in cols.iter_mut().skip(k + 1) {
            apply(&mut c[k..]);
        }
        apply(&mut rhs[k..]);
        cols[k][k] = alpha;
    }

    let mut coef = vec![T::zero(); m];
    for k in (0..m).rev() {
        let mut s = rhs[k];
        for j in k + 1..m {
            s -= cols[j][k] * coef[j];
        }
        coef[k] = s / cols[k][k];
    }
    Ok(coef)
}

/// Horner evaluation of ascending-order coefficients.
pub fn poly_eval<T: Real>(coefficients: &[T], x: T) -> T {
    coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 + 3.0 * x).collect();
        let c = polyfit(&xs, &ys, 1).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10 && (c[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn exact_quadratic() {
        let xs: Vec<f64> = (0..12).map(|i| 10.0 * i as f64).collect();
        let p = [5.0, -0.01, 1e-5];
        let ys: Vec<f64> = xs.iter().map(|&x| poly_eval(&p, x)).collect();
        let c = polyfit(&xs, &ys, 2).unwrap();
        for (a, b) in c.iter().zip(&p) {
            assert!((a - b).abs() < 1e-8, "{c:?}");
        }
        for (&x, &y) in xs.iter().zip(&ys) {
            assert!((poly_eval(&c, x) - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn least_squares_beats_perturbations() {
        let mut rng = Rng::new(17);
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.5 * x + rng.normal(0.0, 0.2)).collect();
        let rss = |c: &[f64]| -> f64 {
            xs.iter().zip(&ys).map(|(&x, &y)| (poly_eval(c, x) - y).powi(2)).sum()
        };
        let best = polyfit(&xs, &ys, 1).unwrap();
        let r0 = rss(&best);
        for _ in 0..1000 {
            let p = [best[0] + rng.normal(0.0, 0.05), best[1] + rng.normal(0.0, 0.01)];
            assert!(r0 <= rss(&p));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            polyfit(&[1.0], &[1.0], 1),
            Err(Error::Underdetermined { needed: 2, got: 1 })
        ));
        assert!(matches!(
            polyfit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], 1),
            Err(Error::RankDeficient(1))
        ));
        assert!(polyfit(&[1.0, 2.0], &[1.0], 1).is_err());
    }
}
