//! Dense linear-algebra helpers, chi-squared quantiles and a safeguarded
//! Newton root finder shared by the likelihood solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition-number threshold treated as numerically singular.
pub const SINGULAR_COND: f64 = 1e12;

// ---------------------------------------------------------------------------
// Gamma functions and the chi-squared distribution
// ---------------------------------------------------------------------------

/// Natural log of the gamma function (Lanczos approximation, |err| < 2e-10).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for (j, &c) in COEFFS.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Regularized lower incomplete gamma P(a, x), by series or continued fraction.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let eps = 1e-15;
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    let eps = 1e-15;
    let fpmin = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < eps {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// CDF of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    reg_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

fn chi2_ln_pdf(x: f64, dof: usize) -> f64 {
    let a = dof as f64 / 2.0;
    -(2.0f64).ln() - ln_gamma(a) + (a - 1.0) * (x / 2.0).ln() - x / 2.0
}

/// Quantile of the chi-squared distribution, by bracketed Newton on the CDF.
///
/// Requires `0 < p < 1` and `dof >= 1`; the returned `q` satisfies
/// `chi2_cdf(q, dof) = p` to about 1e-12.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} outside (0, 1)"
        )));
    }
    if dof == 0 {
        return Err(Error::InvalidArgument("zero degrees of freedom".into()));
    }
    let d = dof as f64;
    // Expand an upper bracket, then polish with bisection-safeguarded Newton.
    let mut lo = 0.0;
    let mut hi = d + 10.0 * (2.0 * d).sqrt() + 10.0;
    while chi2_cdf(hi, dof) < p {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NonFinite {
                context: "chi-squared quantile bracket",
            });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi2_cdf(x, dof) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-14 || (hi - lo) < 1e-13 * (1.0 + x) {
            return Ok(x);
        }
        let pdf = chi2_ln_pdf(x, dof).exp();
        let next = x - f / pdf;
        x = if pdf > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

fn norm_1(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Inverse with a 1-norm condition estimate; singular-to-tolerance inputs
/// are rejected rather than returned as garbage.
pub fn checked_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix inverse",
        });
    }
    let inv = a
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { cond: f64::INFINITY })?;
    let cond = norm_1(a) * norm_1(&inv);
    if !cond.is_finite() || cond > SINGULAR_COND {
        return Err(Error::Singular { cond });
    }
    Ok(inv)
}

/// Solve `A x = b` by pivoted LU, rejecting singular-to-tolerance systems.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "solve_linear dimension mismatch: {}x{} vs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "linear solve",
        });
    }
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(Error::Singular { cond: f64::INFINITY })?;
    let inv = lu
        .try_inverse()
        .ok_or(Error::Singular { cond: f64::INFINITY })?;
    let cond = norm_1(a) * norm_1(&inv);
    if !cond.is_finite() || cond > SINGULAR_COND {
        return Err(Error::Singular { cond });
    }
    Ok(x)
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Eigendecomposition of the symmetrized input `(M + M^T)/2`.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("sym_eigen needs a square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "symmetric eigendecomposition",
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let d = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_fn(d, |r, _| eig.eigenvalues[order[r]]);
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal PSD square root of the symmetrized input.
///
/// Eigenvalues in `[-clip_tol, 0)` are clipped to zero; anything below
/// `-clip_tol` is a hard error carrying the offending eigenvalue.
pub fn principal_sqrt_psd(m: &DMatrix<f64>, clip_tol: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(m)?;
    let min_eig = eig.eigenvalues[0];
    if min_eig < -clip_tol {
        return Err(Error::NotPsd { min_eig });
    }
    let d = eig.eigenvalues.len();
    let sqrt = DVector::from_fn(d, |r, _| eig.eigenvalues[r].max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&sqrt) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

// ---------------------------------------------------------------------------
// Safeguarded Newton root finder
// ---------------------------------------------------------------------------

/// Controls for [`damped_newton_root`].
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub backtrack_ratio: f64,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 100,
            grad_tol: 1e-10,
            step_tol: 1e-14,
            backtrack_ratio: 0.5,
            min_step: 1e-12,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter > 0
            && self.grad_tol > 0.0
            && self.step_tol > 0.0
            && self.min_step > 0.0
            && self.backtrack_ratio > 0.0
            && self.backtrack_ratio < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid Newton options".into()))
        }
    }
}

/// Damped Newton iteration for `F(x) = 0` with a feasibility predicate.
///
/// Trial points are tested for feasibility before `F` is evaluated, so `F`
/// is never called outside the feasible set. Steps are halved (by
/// `backtrack_ratio`) until the residual norm decreases; if no feasible
/// trial exists above `min_step` the iteration aborts.
pub fn damped_newton_root<F, J, P>(
    mut f: F,
    mut jac: J,
    x0: &DVector<f64>,
    feasible: P,
    opts: &NewtonOptions,
) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    J: FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
    P: Fn(&DVector<f64>) -> bool,
{
    opts.validate()?;
    if !feasible(x0) {
        return Err(Error::InfeasibleStep);
    }
    let mut x = x0.clone();
    let mut r = f(&x)?;
    let mut rnorm = r.amax();
    for iter in 0..opts.max_iter {
        if rnorm <= opts.grad_tol {
            return Ok(x);
        }
        let j = jac(&x)?;
        let delta = solve_linear(&j, &(-&r))?;
        let mut t = 1.0f64;
        let mut accepted = false;
        let mut any_feasible = false;
        while t >= opts.min_step {
            let cand = &x + &delta * t;
            if feasible(&cand) {
                any_feasible = true;
                if let Ok(rc) = f(&cand) {
                    let rcn = rc.amax();
                    if rcn < rnorm {
                        if (t * delta.amax()) < opts.step_tol && rcn > opts.grad_tol {
                            return Err(Error::NoConvergence {
                                iters: iter,
                                residual: rcn,
                            });
                        }
                        x = cand;
                        r = rc;
                        rnorm = rcn;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= opts.backtrack_ratio;
        }
        if !accepted {
            if !any_feasible {
                return Err(Error::InfeasibleStep);
            }
            return Err(Error::NoConvergence {
                iters: iter,
                residual: rnorm,
            });
        }
    }
    if rnorm <= opts.grad_tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iters: opts.max_iter,
            residual: rnorm,
        })
    }
}
