//! Lawson–Hanson active-set nonnegative least squares: `min ‖Ax - b‖` s.t. `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    nnls_with_limit(a, b, 3 * a.ncols().max(10))
}

/// Same as [`nnls`] with an explicit cap on outer (column-adding) iterations.
pub fn nnls_with_limit(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    max_outer: usize,
) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::Usage(format!(
            "nnls: matrix has {m} rows but rhs has {}",
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::Usage("nnls: no unknowns".into()));
    }
    let tol = 10.0 * f64::EPSILON * a.norm().max(1.0) * (m.max(n) as f64);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let mut iterations = 0;

    loop {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|j| !passive[*j])
            .max_by(|p, q| w[*p].total_cmp(&w[*q]));
        let Some(t) = candidate else { break };
        if w[t] <= tol || iterations >= max_outer {
            break;
        }
        iterations += 1;
        passive[t] = true;

        loop {
            let s = solve_passive(a, b, &passive);
            let blocked: Vec<usize> = (0..n).filter(|j| passive[*j] && s[*j] <= tol).collect();
            if blocked.is_empty() {
                x = s;
                break;
            }
            let alpha = blocked
                .iter()
                .map(|j| x[*j] / (x[*j] - s[*j]))
                .fold(f64::INFINITY, f64::min);
            x += (&s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }

    let residual_norm = (b - a * &x).norm();
    Ok(NnlsSolution {
        x,
        residual_norm,
        iterations,
    })
}

/// Unconstrained least squares over the passive columns; zeros elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|j| passive[*j]).collect();
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
    let svd = sub.svd(true, true);
    let sol = svd
        .solve(b, 1e-12 * svd.singular_values.max().max(1.0))
        .expect("svd computed with u and v");
    let mut out = DVector::zeros(passive.len());
    for (k, j) in cols.iter().enumerate() {
        out[*j] = sol[k];
    }
    out
}
