//! Per-phase nonlinear least squares (optionally restricted to observed
//! responses) and the error-variance plug-in estimators.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Phase};
use crate::error::{Error, Result};
use crate::model::RegressionModel;
use crate::numerics::solve_linear;

const MAX_ITER: usize = 200;

/// Result of a phase fit.
#[derive(Debug, Clone)]
pub struct PhaseFit {
    pub beta_hat: DVector<f64>,
    pub sigma2_hat: f64,
    pub rss: f64,
    pub n_used: usize,
    pub converged: bool,
    pub iterations: usize,
}

fn rss_at(
    data: &Dataset,
    phase: Phase,
    model: &RegressionModel,
    beta: &[f64],
    delta_weights: bool,
) -> Result<f64> {
    let mut rss = 0.0;
    for i in data.phase_indices(phase) {
        if delta_weights && !data.delta(i) {
            continue;
        }
        let r = data.y(i) - model.f(data.x_row(i), beta)?;
        rss += r * r;
    }
    Ok(rss)
}

/// Minimize the (optionally delta-weighted) residual sum of squares over the
/// model's parameter box by damped Gauss-Newton.
///
/// Rows with an unobserved response never enter the sums when
/// `use_delta_weights` is set, so their stored placeholders cannot influence
/// the estimate. Accepted iterations never increase the RSS, and every
/// iterate is projected onto the parameter box.
pub fn fit_nls(
    data: &Dataset,
    phase: Phase,
    model: &RegressionModel,
    init: &[f64],
    use_delta_weights: bool,
) -> Result<PhaseFit> {
    let d = model.d();
    let n_used = if use_delta_weights {
        data.observed_count(phase)
    } else {
        data.phase_len(phase)
    };
    if n_used < d {
        return Err(Error::InsufficientData {
            needed: d,
            got: n_used,
        });
    }
    let mut beta = model.project_beta(init);
    model.check_beta(&beta)?;
    let mut rss = rss_at(data, phase, model, &beta, use_delta_weights)?;
    let mut mu = 1e-3;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        // Normal equations of the linearized problem.
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut g = DVector::<f64>::zeros(d);
        for i in data.phase_indices(phase) {
            if use_delta_weights && !data.delta(i) {
                continue;
            }
            let x = data.x_row(i);
            let grad = model.grad(x, &beta)?;
            let r = data.y(i) - model.f(x, &beta)?;
            a.ger(1.0, &grad, &grad, 1.0);
            g.axpy(r, &grad, 1.0);
        }

        if g.amax() < 1e-8 * (1.0 + rss) {
            return Ok(PhaseFit {
                beta_hat: DVector::from_vec(beta),
                sigma2_hat: rss / n_used as f64,
                rss,
                n_used,
                converged: true,
                iterations,
            });
        }

        // Levenberg-style damping: inflate the diagonal until a step is
        // accepted, relax it afterwards.
        let mut step_norm = 0.0;
        let mut accepted = false;
        while mu < 1e14 {
            let mut damped = a.clone();
            for r in 0..d {
                damped[(r, r)] += mu * a[(r, r)].abs() + 1e-12;
            }
            if let Ok(delta) = solve_linear(&damped, &g) {
                let cand = model.project_beta(
                    &beta
                        .iter()
                        .zip(delta.iter())
                        .map(|(b, s)| b + s)
                        .collect::<Vec<_>>(),
                );
                let cand_rss = rss_at(data, phase, model, &cand, use_delta_weights)?;
                if cand_rss <= rss {
                    step_norm = beta
                        .iter()
                        .zip(cand.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    beta = cand;
                    rss = cand_rss;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            mu *= 3.0;
        }
        if !accepted || step_norm < 1e-12 {
            // Damping exhausted or the step collapsed: stationary point.
            return Ok(PhaseFit {
                beta_hat: DVector::from_vec(beta),
                sigma2_hat: rss / n_used as f64,
                rss,
                n_used,
                converged: true,
                iterations,
            });
        }
    }
    Err(Error::FitFailure {
        beta,
        rss,
        iters: iterations,
    })
}

/// Common-parameter least squares under a hypothesized difference: phase-one
/// residuals against `f(x, beta)`, phase-two against `f(x, beta - delta0)`.
/// The anchor of the likelihood profile; both phases identify `beta`.
pub fn fit_nls_pooled(
    data: &Dataset,
    model: &RegressionModel,
    delta0: &[f64],
    init: &[f64],
    use_delta_weights: bool,
) -> Result<PhaseFit> {
    let d = model.d();
    // Effective box: beta and beta - delta0 must both stay inside.
    let (lo, hi) = model.beta_bounds();
    let lo_eff: Vec<f64> = lo.iter().zip(delta0).map(|(l, s)| l.max(l + s)).collect();
    let hi_eff: Vec<f64> = hi.iter().zip(delta0).map(|(h, s)| h.min(h + s)).collect();
    for j in 0..d {
        if !(lo_eff[j] < hi_eff[j]) {
            return Err(Error::OutOfDomain {
                index: j,
                value: delta0[j],
                lo: lo[j],
                hi: hi[j],
            });
        }
    }
    let project = |b: &[f64]| -> Vec<f64> {
        b.iter()
            .enumerate()
            .map(|(j, v)| v.clamp(lo_eff[j], hi_eff[j]))
            .collect()
    };
    let shifted = |b: &[f64]| -> Vec<f64> { b.iter().zip(delta0).map(|(v, s)| v - s).collect() };

    let n_used = if use_delta_weights {
        data.observed_count(Phase::First) + data.observed_count(Phase::Second)
    } else {
        data.n()
    };
    if n_used < d {
        return Err(Error::InsufficientData {
            needed: d,
            got: n_used,
        });
    }

    let rss_at = |beta: &[f64]| -> Result<f64> {
        let sh = shifted(beta);
        let mut rss = 0.0;
        for i in 0..data.n() {
            if use_delta_weights && !data.delta(i) {
                continue;
            }
            let b = if i < data.k() { beta } else { &sh[..] };
            let r = data.y(i) - model.f(data.x_row(i), b)?;
            rss += r * r;
        }
        Ok(rss)
    };

    let mut beta = project(init);
    model.check_beta(&beta)?;
    model.check_beta(&shifted(&beta))?;
    let mut rss = rss_at(&beta)?;
    let mut mu = 1e-3;
    let mut iterations = 0;
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let sh = shifted(&beta);
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut g = DVector::<f64>::zeros(d);
        for i in 0..data.n() {
            if use_delta_weights && !data.delta(i) {
                continue;
            }
            let x = data.x_row(i);
            let b = if i < data.k() { &beta[..] } else { &sh[..] };
            let grad = model.grad(x, b)?;
            let r = data.y(i) - model.f(x, b)?;
            a.ger(1.0, &grad, &grad, 1.0);
            g.axpy(r, &grad, 1.0);
        }
        if g.amax() < 1e-8 * (1.0 + rss) {
            return Ok(PhaseFit {
                beta_hat: DVector::from_vec(beta),
                sigma2_hat: rss / n_used as f64,
                rss,
                n_used,
                converged: true,
                iterations,
            });
        }
        let mut step_norm = 0.0;
        let mut accepted = false;
        while mu < 1e14 {
            let mut damped = a.clone();
            for r in 0..d {
                damped[(r, r)] += mu * a[(r, r)].abs() + 1e-12;
            }
            if let Ok(delta) = solve_linear(&damped, &g) {
                let cand = project(
                    &beta
                        .iter()
                        .zip(delta.iter())
                        .map(|(b, s)| b + s)
                        .collect::<Vec<_>>(),
                );
                let cand_rss = rss_at(&cand)?;
                if cand_rss <= rss {
                    step_norm = beta
                        .iter()
                        .zip(cand.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    beta = cand;
                    rss = cand_rss;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            mu *= 3.0;
        }
        if !accepted || step_norm < 1e-12 {
            return Ok(PhaseFit {
                beta_hat: DVector::from_vec(beta),
                sigma2_hat: rss / n_used as f64,
                rss,
                n_used,
                converged: true,
                iterations,
            });
        }
    }
    Err(Error::FitFailure {
        beta,
        rss,
        iters: iterations,
    })
}

/// Coarse grid search over the parameter box, for cold starts.
pub fn grid_search_init(
    data: &Dataset,
    phase: Phase,
    model: &RegressionModel,
    use_delta_weights: bool,
    points_per_dim: usize,
) -> Result<Vec<f64>> {
    let d = model.d();
    let (lo, hi) = model.beta_bounds();
    let m = points_per_dim.max(2);
    let mut best = vec![0.0; d];
    let mut best_rss = f64::INFINITY;
    let mut idx = vec![0usize; d];
    loop {
        let beta: Vec<f64> = (0..d)
            .map(|j| {
                let t = (idx[j] as f64 + 0.5) / m as f64;
                lo[j] + t * (hi[j] - lo[j])
            })
            .collect();
        if let Ok(rss) = rss_at(data, phase, model, &beta, use_delta_weights) {
            if rss < best_rss {
                best_rss = rss;
                best = beta;
            }
        }
        // Odometer increment over the grid.
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                if best_rss.is_finite() {
                    return Ok(best);
                }
                return Err(Error::NonFinite {
                    context: "grid search",
                });
            }
        }
    }
}

/// Plug-in error-variance estimates for the two phases.
///
/// With `missing` unset these are the phase-mean squared residuals at the
/// fitted parameters; with it set, sums and counts run over observed rows
/// only.
pub fn estimate_sigmas(
    data: &Dataset,
    model: &RegressionModel,
    fit1: &PhaseFit,
    fit2: &PhaseFit,
    missing: bool,
) -> Result<(f64, f64)> {
    let mut out = [0.0f64; 2];
    for (slot, (phase, fit)) in [(Phase::First, fit1), (Phase::Second, fit2)]
        .into_iter()
        .enumerate()
    {
        let beta: Vec<f64> = fit.beta_hat.iter().copied().collect();
        let mut ss = 0.0;
        let mut count = 0usize;
        for i in data.phase_indices(phase) {
            if missing && !data.delta(i) {
                continue;
            }
            let r = data.y(i) - model.f(data.x_row(i), &beta)?;
            ss += r * r;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        out[slot] = ss / count as f64;
    }
    Ok((out[0], out[1]))
}
