//! Nonlinear regression function interface: the response surface
//! `f(x, beta)` together with its parameter gradient and Hessian, a compact
//! parameter box, and a compact regressor box.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// A regression function known up to a d-dimensional parameter.
///
/// Evaluators are pure, so a model value can be shared read-only across
/// threads. Models built without an analytic gradient or Hessian fall back
/// to central finite differences (step `1e-6 * (1 + |beta_j|)`).
#[derive(Clone)]
pub struct RegressionModel {
    p: usize,
    d: usize,
    f: ScalarFn,
    grad: Option<GradFn>,
    hess: Option<HessFn>,
    beta_lo: Vec<f64>,
    beta_hi: Vec<f64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
}

impl std::fmt::Debug for RegressionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressionModel")
            .field("p", &self.p)
            .field("d", &self.d)
            .field("beta_lo", &self.beta_lo)
            .field("beta_hi", &self.beta_hi)
            .finish()
    }
}

impl RegressionModel {
    /// New model from the response function and the compact parameter box.
    pub fn new(
        p: usize,
        d: usize,
        beta_bounds: &[(f64, f64)],
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be at least 1".into(),
            ));
        }
        if beta_bounds.len() != d || beta_bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument(
                "parameter bounds must give a nonempty box per coordinate".into(),
            ));
        }
        Ok(RegressionModel {
            p,
            d,
            f: Arc::new(f),
            grad: None,
            hess: None,
            beta_lo: beta_bounds.iter().map(|b| b.0).collect(),
            beta_hi: beta_bounds.iter().map(|b| b.1).collect(),
            x_lo: vec![f64::NEG_INFINITY; p],
            x_hi: vec![f64::INFINITY; p],
        })
    }

    pub fn with_grad(
        mut self,
        grad: impl Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_hess(
        mut self,
        hess: impl Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    /// Restrict regressors to a compact box.
    pub fn with_x_domain(mut self, bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.len() != self.p || bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument(
                "regressor bounds must give a nonempty box per coordinate".into(),
            ));
        }
        self.x_lo = bounds.iter().map(|b| b.0).collect();
        self.x_hi = bounds.iter().map(|b| b.1).collect();
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta_bounds(&self) -> (&[f64], &[f64]) {
        (&self.beta_lo, &self.beta_hi)
    }

    /// Reject parameters outside the box; nothing is clamped silently.
    pub fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.d {
            return Err(Error::InvalidArgument(format!(
                "parameter length {} does not match d = {}",
                beta.len(),
                self.d
            )));
        }
        for (i, &b) in beta.iter().enumerate() {
            if !b.is_finite() || b < self.beta_lo[i] || b > self.beta_hi[i] {
                return Err(Error::OutOfDomain {
                    index: i,
                    value: b,
                    lo: self.beta_lo[i],
                    hi: self.beta_hi[i],
                });
            }
        }
        Ok(())
    }

    pub fn beta_in_domain(&self, beta: &[f64]) -> bool {
        self.check_beta(beta).is_ok()
    }

    /// Clamp a parameter vector into the box, coordinate by coordinate.
    pub fn project_beta(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter()
            .enumerate()
            .map(|(i, &b)| b.clamp(self.beta_lo[i], self.beta_hi[i]))
            .collect()
    }

    pub fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::InvalidArgument(format!(
                "regressor length {} does not match p = {}",
                x.len(),
                self.p
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < self.x_lo[i] || v > self.x_hi[i] {
                return Err(Error::RegressorOutOfDomain {
                    index: i,
                    value: v,
                    lo: self.x_lo[i],
                    hi: self.x_hi[i],
                });
            }
        }
        Ok(())
    }

    /// Evaluate `f(x, beta)`.
    pub fn f(&self, x: &[f64], beta: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        self.check_beta(beta)?;
        let v = (self.f)(x, beta);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: "model evaluation",
            })
        }
    }

    /// Parameter gradient of `f` at `(x, beta)`.
    pub fn grad(&self, x: &[f64], beta: &[f64]) -> Result<DVector<f64>> {
        self.check_x(x)?;
        self.check_beta(beta)?;
        let g = match &self.grad {
            Some(g) => g(x, beta),
            None => self.fd_grad(x, beta),
        };
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite {
                context: "model gradient",
            })
        }
    }

    /// Parameter Hessian of `f` at `(x, beta)`.
    pub fn hess(&self, x: &[f64], beta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        self.check_beta(beta)?;
        let h = match &self.hess {
            Some(h) => h(x, beta),
            None => self.fd_hess(x, beta),
        };
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::NonFinite {
                context: "model Hessian",
            })
        }
    }

    fn fd_grad(&self, x: &[f64], beta: &[f64]) -> DVector<f64> {
        let mut work = beta.to_vec();
        DVector::from_fn(self.d, |j, _| {
            let h = 1e-6 * (1.0 + beta[j].abs());
            work[j] = beta[j] + h;
            let up = (self.f)(x, &work);
            work[j] = beta[j] - h;
            let dn = (self.f)(x, &work);
            work[j] = beta[j];
            (up - dn) / (2.0 * h)
        })
    }

    fn fd_hess(&self, x: &[f64], beta: &[f64]) -> DMatrix<f64> {
        if let Some(grad) = &self.grad {
            // Central differences of the analytic gradient.
            let mut work = beta.to_vec();
            let mut h = DMatrix::zeros(self.d, self.d);
            for j in 0..self.d {
                let step = 1e-6 * (1.0 + beta[j].abs());
                work[j] = beta[j] + step;
                let up = grad(x, &work);
                work[j] = beta[j] - step;
                let dn = grad(x, &work);
                work[j] = beta[j];
                let col = (up - dn) / (2.0 * step);
                h.column_mut(j).copy_from(&col);
            }
            return (&h + h.transpose()) * 0.5;
        }
        // No analytic gradient: second differences of f directly, at a wider
        // step that balances truncation against cancellation.
        let f0 = (self.f)(x, beta);
        let mut work = beta.to_vec();
        let steps: Vec<f64> = (0..self.d)
            .map(|j| 1e-4 * (1.0 + beta[j].abs()))
            .collect();
        let mut h = DMatrix::zeros(self.d, self.d);
        for j in 0..self.d {
            work[j] = beta[j] + steps[j];
            let up = (self.f)(x, &work);
            work[j] = beta[j] - steps[j];
            let dn = (self.f)(x, &work);
            work[j] = beta[j];
            h[(j, j)] = (up - 2.0 * f0 + dn) / (steps[j] * steps[j]);
            for r in (j + 1)..self.d {
                let mut corner = |sj: f64, sr: f64| {
                    work[j] = beta[j] + sj * steps[j];
                    work[r] = beta[r] + sr * steps[r];
                    let v = (self.f)(x, &work);
                    work[j] = beta[j];
                    work[r] = beta[r];
                    v
                };
                let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                    + corner(-1.0, -1.0))
                    / (4.0 * steps[j] * steps[r]);
                h[(j, r)] = v;
                h[(r, j)] = v;
            }
        }
        h
    }

    /// Compare analytic derivatives against central finite differences.
    pub fn check_derivatives(&self, x: &[f64], beta: &[f64], step: f64) -> Result<DerivativeReport> {
        if step <= 0.0 {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        self.check_x(x)?;
        self.check_beta(beta)?;
        let grad = self.grad(x, beta)?;
        let hess = self.hess(x, beta)?;

        let mut work = beta.to_vec();
        let mut grad_err = 0.0f64;
        for j in 0..self.d {
            let h = step * (1.0 + beta[j].abs());
            work[j] = beta[j] + h;
            let up = (self.f)(x, &work);
            work[j] = beta[j] - h;
            let dn = (self.f)(x, &work);
            work[j] = beta[j];
            let fd = (up - dn) / (2.0 * h);
            grad_err = grad_err.max((fd - grad[j]).abs() / (1.0 + grad[j].abs()));
        }

        let eval_grad = |b: &[f64]| -> DVector<f64> {
            match &self.grad {
                Some(g) => g(x, b),
                None => self.fd_grad(x, b),
            }
        };
        let mut hess_err = 0.0f64;
        for j in 0..self.d {
            let h = step * (1.0 + beta[j].abs());
            work[j] = beta[j] + h;
            let up = eval_grad(&work);
            work[j] = beta[j] - h;
            let dn = eval_grad(&work);
            work[j] = beta[j];
            for r in 0..self.d {
                let fd = (up[r] - dn[r]) / (2.0 * h);
                hess_err = hess_err.max((fd - hess[(r, j)]).abs() / (1.0 + hess[(r, j)].abs()));
            }
        }

        Ok(DerivativeReport {
            grad_max_rel_err: grad_err,
            hess_max_rel_err: hess_err,
        })
    }
}

/// Maximum relative deviations of the analytic derivatives from central
/// finite differences (relative to `1 + |reference|`).
#[derive(Debug, Clone, Copy)]
pub struct DerivativeReport {
    pub grad_max_rel_err: f64,
    pub hess_max_rel_err: f64,
}

/// The built-in ratio model `f(x, (a, b)) = a (1 - x^b) / b` on x in [0, 1],
/// with `(a, b)` in `[-100, 100] x [0.1, 20]`.
pub fn paper_ratio() -> RegressionModel {
    // x^b ln x and x^b ln^2 x extend continuously by 0 at x = 0 since b > 0.
    let xblog = |x: f64, b: f64| -> (f64, f64, f64) {
        let xb = x.powf(b);
        if x > 0.0 {
            let l = x.ln();
            (xb, xb * l, xb * l * l)
        } else {
            (0.0, 0.0, 0.0)
        }
    };
    RegressionModel::new(1, 2, &[(-100.0, 100.0), (0.1, 20.0)], |x, beta| {
        let (a, b) = (beta[0], beta[1]);
        a * (1.0 - x[0].powf(b)) / b
    })
    .expect("static bounds are valid")
    .with_grad(move |x, beta| {
        let (a, b) = (beta[0], beta[1]);
        let (xb, xbl, _) = xblog(x[0], b);
        let da = (1.0 - xb) / b;
        let db = a * (-xbl * b - (1.0 - xb)) / (b * b);
        DVector::from_vec(vec![da, db])
    })
    .with_hess(move |x, beta| {
        let (a, b) = (beta[0], beta[1]);
        let (xb, xbl, xbl2) = xblog(x[0], b);
        let hab = (-xbl * b - (1.0 - xb)) / (b * b);
        let hbb = a * (-b * b * xbl2 + 2.0 * b * xbl + 2.0 - 2.0 * xb) / (b * b * b);
        DMatrix::from_row_slice(2, 2, &[0.0, hab, hab, hbb])
    })
    .with_x_domain(&[(0.0, 1.0)])
    .expect("static bounds are valid")
}

/// Look up a built-in model by its CLI identifier.
pub fn builtin_model(id: &str) -> Option<RegressionModel> {
    match id {
        "paper-ratio" => Some(paper_ratio()),
        _ => None,
    }
}
