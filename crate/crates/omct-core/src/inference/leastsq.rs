//! Damped Gauss–Newton (Levenberg–Marquardt style) minimizer for small
//! weighted least-squares problems, with a numeric central-difference
//! Jacobian. Parameter counts here are 2–5, so the normal equations are
//! solved directly by Gaussian elimination. Indexed loops are the natural
//! style for the small dense matrices here.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

pub(crate) struct LmFit {
    pub params: Vec<f64>,
    /// Covariance of the parameters: (JᵀJ)⁻¹ at the optimum, in the metric of
    /// the (already weighted) residuals.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub n_residuals: usize,
}

impl LmFit {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn red_chi2(&self) -> f64 {
        let dof = self.n_residuals.saturating_sub(self.params.len()).max(1);
        self.chi2 / dof as f64
    }
}

pub(crate) fn levenberg_marquardt<F>(residual_fn: F, init: &[f64]) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n_params = init.len();
    let mut params = init.to_vec();
    let mut residuals = residual_fn(&params);
    if residuals.len() < n_params {
        return Err(Error::NotEnoughPoints {
            needed: n_params,
            got: residuals.len(),
        });
    }
    let mut chi2 = sum_sq(&residuals);
    let mut lambda = 1e-3;
    let mut converged = false;

    for _iter in 0..200 {
        let jac = numeric_jacobian(&residual_fn, &params, residuals.len());
        // Normal equations: (JᵀJ + λ·diag(JᵀJ))·δ = −Jᵀr.
        let mut jtj = vec![vec![0.0; n_params]; n_params];
        let mut jtr = vec![0.0; n_params];
        for (row, r) in jac.iter().zip(&residuals) {
            for i in 0..n_params {
                jtr[i] += row[i] * r;
                for j in i..n_params {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        for i in 0..n_params {
            for j in 0..i {
                jtj[i][j] = jtj[j][i];
            }
        }

        let mut improved = false;
        for _damp in 0..12 {
            let mut damped = jtj.clone();
            for i in 0..n_params {
                damped[i][i] += lambda * jtj[i][i].max(1e-30);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = solve(&damped, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + d).collect();
            let trial_res = residual_fn(&trial);
            let trial_chi2 = sum_sq(&trial_res);
            if trial_chi2.is_finite() && trial_chi2 < chi2 {
                let gain = chi2 - trial_chi2;
                params = trial;
                residuals = trial_res;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                converged = gain <= 1e-12 * chi2.max(1e-300);
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            break;
        }
    }

    // Covariance from the undamped normal matrix at the optimum.
    let jac = numeric_jacobian(&residual_fn, &params, residuals.len());
    let mut jtj = vec![vec![0.0; n_params]; n_params];
    for row in &jac {
        for i in 0..n_params {
            for j in 0..n_params {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    let covariance = invert(&jtj).unwrap_or_else(|| {
        // Singular information matrix (an unidentifiable direction): report
        // huge variances rather than failing the whole fit.
        let mut c = vec![vec![0.0; n_params]; n_params];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = f64::INFINITY;
        }
        c
    });

    Ok(LmFit {
        params,
        covariance,
        chi2,
        n_residuals: residuals.len(),
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn numeric_jacobian<F>(f: &F, params: &[f64], n_res: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n_params = params.len();
    let mut jac = vec![vec![0.0; n_params]; n_res];
    let mut work = params.to_vec();
    for j in 0..n_params {
        let h = 1e-6 * params[j].abs().max(1e-9);
        work[j] = params[j] + h;
        let plus = f(&work);
        work[j] = params[j] - h;
        let minus = f(&work);
        work[j] = params[j];
        for (i, row) in jac.iter_mut().enumerate() {
            row[j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in (i + 1)..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Some(x)
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve(a, &e)?);
    }
    let mut inv = vec![vec![0.0; n]; n];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}
