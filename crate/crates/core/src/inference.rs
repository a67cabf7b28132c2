//! Test pipelines: least-squares plug-ins, profiling, the chi-squared
//! decision, implied observation weights and confidence-region summaries,
//! for complete responses and for the three missing-response methods.

use crate::complete::{
    assemble, phase_weights, profile_with, psi_vector, s_matrix, ELAssembly, ProfileOptions,
    ProfileOutcome,
};
use crate::data::{Dataset, Phase};
use crate::error::{Error, Result};
use crate::fit::{estimate_sigmas, fit_nls, fit_nls_pooled, grid_search_init, PhaseFit};
use crate::missing::{
    assemble_missing, estimate_pi, impute_responses, known_pi, Kernel, MissingInputs,
    MissingMethod,
};
use crate::model::RegressionModel;
use crate::numerics::{chi2_cdf, chi2_quantile};

/// Where selection probabilities come from for the missing-response methods.
#[derive(Clone)]
pub enum PiSource {
    /// Known per-phase probability functions of the regressor.
    Known {
        pi1: std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        pi2: std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
    /// Kernel estimation; `None` bandwidths use the default phase rates.
    Estimate {
        kernel: Kernel,
        bandwidths: Option<(f64, f64)>,
    },
}

impl std::fmt::Debug for PiSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PiSource::Known { .. } => f.write_str("PiSource::Known"),
            PiSource::Estimate { kernel, bandwidths } => f
                .debug_struct("PiSource::Estimate")
                .field("kernel", kernel)
                .field("bandwidths", bandwidths)
                .finish(),
        }
    }
}

impl PiSource {
    pub fn constant(c: f64) -> Self {
        PiSource::Known {
            pi1: std::sync::Arc::new(move |_| c),
            pi2: std::sync::Arc::new(move |_| c),
        }
    }

    pub fn estimate_default() -> Self {
        PiSource::Estimate {
            kernel: Kernel::Epanechnikov,
            bandwidths: None,
        }
    }
}

/// Knobs for a test run. Defaults: grid-search cold start, solver
/// tolerances scaled to the sample size.
#[derive(Debug, Clone, Default)]
pub struct TestOptions {
    /// Per-phase least-squares starting points; grid search when absent.
    pub nls_init: Option<(Vec<f64>, Vec<f64>)>,
    pub profile: Option<ProfileOptions>,
}

/// Outcome of one empirical-likelihood test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ELTestResult {
    pub statistic: f64,
    pub lambda_hat: Vec<f64>,
    pub beta_hat_profile: Vec<f64>,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Zero left the convex hull at the hypothesized difference; the
    /// statistic is reported as infinite and the test rejects.
    pub hull_violation: bool,
    pub weights_i: Vec<f64>,
    pub weights_j: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Score diagnostics at the profiled parameter.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Diagnostics {
    /// Mean difference of the standardized scores.
    pub psi: Vec<f64>,
    /// Scaled second moment of the standardized scores (rows flattened);
    /// near the identity under the null.
    pub s_matrix: Vec<Vec<f64>>,
    pub sign_flipped: bool,
    pub outer_iterations: usize,
}

/// Confidence-region summary around a center point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RegionSummary {
    pub center: Vec<f64>,
    pub alpha: f64,
    pub critical: f64,
    /// The center itself fell outside the region.
    pub degenerate: bool,
    /// Per-axis region chord `(lo, hi)` through the center.
    pub axis_intervals: Vec<(f64, f64)>,
    /// Chord lengths through the center, per axis.
    pub widths: Vec<f64>,
    /// Region length: the sum over axes of the projection extents of the
    /// region boundary (measured on a ray fan through the center for two
    /// parameters, equal to the chords in one dimension). The chords alone
    /// understate a strongly correlated region.
    pub lcr: f64,
}

enum MethodState {
    Complete,
    Missing(MissingInputs),
}

/// A test pipeline with the hypothesis-independent work done once: phase
/// fits, variance plug-ins, and (for missing-response methods) selection
/// probabilities and imputed responses. Reused across region probes.
pub struct PreparedTest<'a> {
    data: &'a Dataset,
    model: &'a RegressionModel,
    state: MethodState,
    pub fit1: PhaseFit,
    pub fit2: PhaseFit,
    pub sigma2: (f64, f64),
    profile_opts: ProfileOptions,
}

const SIGMA_FLOOR: f64 = 1e-12;

/// Errors meaning the hypothesized difference is infeasible for the
/// likelihood machinery; such a point lies outside every confidence region.
fn infeasible_kind(e: &Error) -> bool {
    matches!(
        e,
        Error::ConvexHull { .. }
            | Error::InfeasibleLambda
            | Error::OutOfDomain { .. }
            | Error::RegressorOutOfDomain { .. }
            | Error::NotPsd { .. }
            | Error::Singular { .. }
            | Error::FitFailure { .. }
    )
}

fn resolve_inits(
    data: &Dataset,
    model: &RegressionModel,
    opts: &TestOptions,
    delta_weighted: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match &opts.nls_init {
        Some((a, b)) => Ok((a.clone(), b.clone())),
        None => {
            let a = grid_search_init(data, Phase::First, model, delta_weighted, 12)?;
            let b = grid_search_init(data, Phase::Second, model, delta_weighted, 12)?;
            Ok((a, b))
        }
    }
}

impl<'a> PreparedTest<'a> {
    /// Complete-data pipeline: plain least squares per phase. Requires
    /// every response to be observed; use [`PreparedTest::missing`]
    /// otherwise.
    pub fn complete(
        data: &'a Dataset,
        model: &'a RegressionModel,
        opts: &TestOptions,
    ) -> Result<Self> {
        if !data.fully_observed() {
            return Err(Error::InvalidArgument(
                "the complete-data method needs fully observed responses; \
                 choose a missing-data method"
                    .into(),
            ));
        }
        let (init1, init2) = resolve_inits(data, model, opts, false)?;
        let fit1 = fit_nls(data, Phase::First, model, &init1, false)?;
        let fit2 = fit_nls(data, Phase::Second, model, &init2, false)?;
        let sigma2 = estimate_sigmas(data, model, &fit1, &fit2, false)?;
        Ok(PreparedTest {
            data,
            model,
            state: MethodState::Complete,
            fit1,
            fit2,
            sigma2,
            profile_opts: opts
                .profile
                .clone()
                .unwrap_or_else(|| ProfileOptions::for_sample_size(data.n())),
        })
    }

    /// Missing-response pipeline: delta-weighted least squares, observed-row
    /// variance plug-ins, selection probabilities per `pi_source`, and
    /// imputed responses when the method needs them.
    pub fn missing(
        data: &'a Dataset,
        model: &'a RegressionModel,
        method: MissingMethod,
        pi_source: &PiSource,
        opts: &TestOptions,
    ) -> Result<Self> {
        let d = model.d();
        for phase in [Phase::First, Phase::Second] {
            let got = data.observed_count(phase);
            if got < d + 1 {
                return Err(Error::InsufficientData { needed: d + 1, got });
            }
        }
        let (init1, init2) = resolve_inits(data, model, opts, true)?;
        let fit1 = fit_nls(data, Phase::First, model, &init1, true)?;
        let fit2 = fit_nls(data, Phase::Second, model, &init2, true)?;
        let sigma2 = estimate_sigmas(data, model, &fit1, &fit2, true)?;

        let (pi1, pi2) = match pi_source {
            PiSource::Known { pi1, pi2 } => (
                known_pi(data, Phase::First, |x| pi1(x))?,
                known_pi(data, Phase::Second, |x| pi2(x))?,
            ),
            PiSource::Estimate { kernel, bandwidths } => (
                estimate_pi(data, Phase::First, kernel, bandwidths.map(|b| b.0))?,
                estimate_pi(data, Phase::Second, kernel, bandwidths.map(|b| b.1))?,
            ),
        };
        let imputed = if method == MissingMethod::Imputed {
            Some(impute_responses(data, model, &fit1, &fit2, &pi1, &pi2)?)
        } else {
            None
        };
        let inputs = MissingInputs::new(method, pi1, pi2, imputed)?;
        Ok(PreparedTest {
            data,
            model,
            state: MethodState::Missing(inputs),
            fit1,
            fit2,
            sigma2,
            profile_opts: opts
                .profile
                .clone()
                .unwrap_or_else(|| ProfileOptions::for_sample_size(data.n())),
        })
    }

    /// Difference of the phase estimates, the natural region center.
    pub fn delta_hat(&self) -> Vec<f64> {
        (&self.fit1.beta_hat - &self.fit2.beta_hat)
            .iter()
            .copied()
            .collect()
    }

    fn floored_sigmas(&self) -> (f64, f64) {
        (
            self.sigma2.0.max(SIGMA_FLOOR),
            self.sigma2.1.max(SIGMA_FLOOR),
        )
    }

    fn assemble_at(&self, beta: &[f64], delta0: &[f64]) -> Result<ELAssembly> {
        let sigmas = self.floored_sigmas();
        match &self.state {
            MethodState::Complete => {
                assemble(self.data, self.model, beta, delta0, sigmas.0, sigmas.1)
            }
            MethodState::Missing(inputs) => {
                assemble_missing(self.data, self.model, beta, delta0, sigmas, inputs)
            }
        }
    }

    /// Profile the statistic at a hypothesized difference, optionally with a
    /// warm starting parameter for the anchor fit.
    ///
    /// The anchor is the pooled least-squares fit under the hypothesized
    /// difference: with the second phase aligned by the shift, both phases
    /// identify the common parameter, so the anchor stays well conditioned
    /// even when one phase alone is nearly ridge-degenerate.
    pub fn profile_at(&self, delta0: &[f64], warm: Option<&[f64]>) -> Result<ProfileOutcome> {
        let assemble_at = |beta: &[f64]| self.assemble_at(beta, delta0);
        let fallback: Vec<f64> = self.fit1.beta_hat.iter().copied().collect();
        let init = warm.unwrap_or(&fallback);
        let delta_weighted = !matches!(self.state, MethodState::Complete);
        let anchor = fit_nls_pooled(self.data, self.model, delta0, init, delta_weighted)?;
        let anchor_beta: Vec<f64> = anchor.beta_hat.iter().copied().collect();
        profile_with(&assemble_at, self.model, &anchor_beta, &self.profile_opts)
    }

    /// Run the test at a hypothesized difference and level `alpha`.
    pub fn test(&self, delta0: &[f64], alpha: f64) -> Result<ELTestResult> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside (0, 1)"
            )));
        }
        let d = self.model.d();
        if delta0.len() != d {
            return Err(Error::InvalidArgument(format!(
                "difference length {} does not match d = {d}",
                delta0.len()
            )));
        }
        let _ = crate::complete::Hypothesis::new(delta0)?;
        let critical = chi2_quantile(1.0 - alpha, d)?;
        match self.profile_at(delta0, None) {
            Ok(out) => {
                let statistic = out.statistic;
                let (weights_i, _) = phase_weights(&out.assembly.z1)?;
                let (weights_j, _) = phase_weights(&out.assembly.z2)?;
                let s = s_matrix(&out.assembly);
                let diag = Diagnostics {
                    psi: psi_vector(&out.assembly).iter().copied().collect(),
                    s_matrix: (0..d)
                        .map(|r| (0..d).map(|c| s[(r, c)]).collect())
                        .collect(),
                    sign_flipped: out.assembly.sign_flipped,
                    outer_iterations: out.outer_iterations,
                };
                Ok(ELTestResult {
                    statistic,
                    lambda_hat: out.lambda.iter().copied().collect(),
                    beta_hat_profile: out.beta.iter().copied().collect(),
                    dof: d,
                    critical,
                    p_value: 1.0 - chi2_cdf(statistic, d),
                    reject: statistic > critical,
                    hull_violation: false,
                    weights_i,
                    weights_j,
                    diagnostics: diag,
                })
            }
            // Zero outside the hull, or the assembly breaks down at every
            // anchor: the hypothesized difference lies outside every
            // likelihood region, reported as a rejection with a flag.
            Err(ref e) if infeasible_kind(e) => Ok(ELTestResult {
                statistic: f64::INFINITY,
                lambda_hat: vec![],
                beta_hat_profile: vec![],
                dof: d,
                critical,
                p_value: 0.0,
                reject: true,
                hull_violation: true,
                weights_i: vec![],
                weights_j: vec![],
                diagnostics: Diagnostics {
                    psi: vec![],
                    s_matrix: vec![],
                    sign_flipped: false,
                    outer_iterations: 0,
                },
            }),
            Err(e) => Err(e),
        }
    }

    /// Region membership: does the region at level `alpha` contain `delta0`?
    ///
    /// Hull violations, infeasible shifts and assembly breakdowns at the
    /// probe all mean the point is outside; solver non-convergence still
    /// propagates as an error.
    pub fn membership(&self, delta0: &[f64], critical: f64, warm: Option<&[f64]>) -> Result<(bool, Option<Vec<f64>>)> {
        match self.profile_at(delta0, warm) {
            Ok(out) => Ok((
                out.statistic <= critical,
                Some(out.beta.iter().copied().collect()),
            )),
            Err(ref e) if infeasible_kind(e) => Ok((false, None)),
            Err(e) => Err(e),
        }
    }

    /// Boundary radius of the region along one ray from `center`: double an
    /// inside radius until outside (capped), then bisect to 1e-3.
    fn ray_boundary(
        &self,
        center: &[f64],
        dir: &[f64],
        critical: f64,
        warm0: Option<&[f64]>,
    ) -> Result<f64> {
        const TOL: f64 = 1e-3;
        const CAP: f64 = 50.0;
        let probe_at = |r: f64| -> Vec<f64> {
            center
                .iter()
                .zip(dir)
                .map(|(c, u)| c + r * u)
                .collect()
        };
        let mut warm: Option<Vec<f64>> = warm0.map(|b| b.to_vec());
        let mut inside_r = 0.0f64;
        let mut step = 0.25f64;
        let mut outside_r = None;
        while inside_r + step <= CAP {
            let r = inside_r + step;
            let (is_in, beta) = self.membership(&probe_at(r), critical, warm.as_deref())?;
            if is_in {
                inside_r = r;
                if beta.is_some() {
                    warm = beta;
                }
                step *= 2.0;
            } else {
                outside_r = Some(r);
                break;
            }
        }
        let mut hi = match outside_r {
            Some(r) => r,
            None => return Ok(CAP),
        };
        let mut lo = inside_r;
        while hi - lo > TOL {
            let mid = 0.5 * (lo + hi);
            let (is_in, beta) = self.membership(&probe_at(mid), critical, warm.as_deref())?;
            if is_in {
                lo = mid;
                if beta.is_some() {
                    warm = beta;
                }
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Eigenvectors of a finite-difference curvature model of the statistic
    /// in the difference, at the center. Best effort: `None` when any probe
    /// fails.
    fn principal_directions(&self, center: &[f64], warm: Option<&[f64]>) -> Option<[[f64; 2]; 2]> {
        let z_at = |p: &[f64]| -> Option<f64> {
            match self.profile_at(p, warm) {
                Ok(out) => Some(out.statistic),
                Err(_) => None,
            }
        };
        let h = [1e-2 * (1.0 + center[0].abs()), 1e-2 * (1.0 + center[1].abs())];
        let mut hess = [[0.0f64; 2]; 2];
        let z0 = z_at(center)?;
        for j in 0..2 {
            let mut p = center.to_vec();
            p[j] = center[j] + h[j];
            let up = z_at(&p)?;
            p[j] = center[j] - h[j];
            let dn = z_at(&p)?;
            hess[j][j] = (up - 2.0 * z0 + dn) / (h[j] * h[j]);
        }
        let corner = |s0: f64, s1: f64| -> Option<f64> {
            z_at(&[center[0] + s0 * h[0], center[1] + s1 * h[1]])
        };
        let cross = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
            + corner(-1.0, -1.0)?)
            / (4.0 * h[0] * h[1]);
        // Scale back to difference units before the eigendecomposition.
        let a = hess[0][0];
        let b = cross;
        let c = hess[1][1];
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return None;
        }
        // Eigenvectors of [[a, b], [b, c]].
        let tr = a + c;
        let det = a * c - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = tr / 2.0 - disc;
        let v = |l: f64| -> [f64; 2] {
            if b.abs() > 1e-14 {
                [l - c, b]
            } else if a >= c {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        };
        Some([v(l1), v(l2)])
    }

    /// Summarize the region around `center` (typically the difference of
    /// the phase estimates): per-axis chords through the center by outward
    /// bracketing plus bisection to 1e-3, capped at 50 units per direction,
    /// and the summed projection extents of a boundary ray fan as the
    /// region length.
    pub fn region(&self, alpha: f64, center: &[f64]) -> Result<RegionSummary> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {alpha} outside (0, 1)"
            )));
        }
        let d = self.model.d();
        let critical = chi2_quantile(1.0 - alpha, d)?;

        let (center_inside, warm) = self.membership(center, critical, None)?;
        if !center_inside {
            return Ok(RegionSummary {
                center: center.to_vec(),
                alpha,
                critical,
                degenerate: true,
                axis_intervals: vec![(0.0, 0.0); d],
                widths: vec![0.0; d],
                lcr: 0.0,
            });
        }
        let center_beta = warm;

        // Ray directions: axis rays, a fan for two parameters, and rays
        // along the principal curvature directions of the statistic at the
        // center. The region is typically a thin rotated ellipse whose
        // tips a fixed fan would miss.
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        if d == 2 {
            let rays = 16usize;
            for t in 0..rays {
                let theta = 2.0 * std::f64::consts::PI * t as f64 / rays as f64;
                dirs.push(vec![theta.cos(), theta.sin()]);
            }
            if let Some(axes) = self.principal_directions(center, center_beta.as_deref()) {
                for v in axes {
                    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
                    if norm > 1e-12 {
                        dirs.push(vec![v[0] / norm, v[1] / norm]);
                        dirs.push(vec![-v[0] / norm, -v[1] / norm]);
                    }
                }
            }
        } else {
            for axis in 0..d {
                for sign in [1.0f64, -1.0] {
                    let mut u = vec![0.0; d];
                    u[axis] = sign;
                    dirs.push(u);
                }
            }
        }
        let mut boundary: Vec<Vec<f64>> = Vec::with_capacity(dirs.len());
        let mut radius_of: Vec<f64> = Vec::with_capacity(dirs.len());
        for u in &dirs {
            let r = self.ray_boundary(center, u, critical, center_beta.as_deref())?;
            radius_of.push(r);
            boundary.push(center.iter().zip(u).map(|(c, v)| c + r * v).collect());
        }

        // Axis chords from the axis-aligned rays.
        let mut axis_intervals = Vec::with_capacity(d);
        let mut widths = Vec::with_capacity(d);
        for axis in 0..d {
            let mut plus = 0.0;
            let mut minus = 0.0;
            for (u, r) in dirs.iter().zip(&radius_of) {
                let aligned = u
                    .iter()
                    .enumerate()
                    .all(|(j, v)| if j == axis { v.abs() > 0.999 } else { v.abs() < 1e-9 });
                if aligned {
                    if u[axis] > 0.0 {
                        plus = *r;
                    } else {
                        minus = *r;
                    }
                }
            }
            axis_intervals.push((center[axis] - minus, center[axis] + plus));
            widths.push(plus + minus);
        }

        // Projection extents of the boundary fan.
        let lcr = (0..d)
            .map(|j| {
                let hi = boundary.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                let lo = boundary.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .sum();
        Ok(RegionSummary {
            center: center.to_vec(),
            alpha,
            critical,
            degenerate: false,
            lcr,
            axis_intervals,
            widths,
        })
    }
}

/// Complete-data empirical likelihood test of the difference `delta0`.
pub fn el_test(
    data: &Dataset,
    model: &RegressionModel,
    delta0: &[f64],
    alpha: f64,
) -> Result<ELTestResult> {
    el_test_opts(data, model, delta0, alpha, &TestOptions::default())
}

pub fn el_test_opts(
    data: &Dataset,
    model: &RegressionModel,
    delta0: &[f64],
    alpha: f64,
    opts: &TestOptions,
) -> Result<ELTestResult> {
    PreparedTest::complete(data, model, opts)?.test(delta0, alpha)
}

/// Missing-response empirical likelihood test of `delta0` with the chosen
/// method and selection-probability source.
pub fn el_test_missing(
    data: &Dataset,
    model: &RegressionModel,
    delta0: &[f64],
    alpha: f64,
    method: MissingMethod,
    pi_source: &PiSource,
) -> Result<ELTestResult> {
    el_test_missing_opts(data, model, delta0, alpha, method, pi_source, &TestOptions::default())
}

pub fn el_test_missing_opts(
    data: &Dataset,
    model: &RegressionModel,
    delta0: &[f64],
    alpha: f64,
    method: MissingMethod,
    pi_source: &PiSource,
    opts: &TestOptions,
) -> Result<ELTestResult> {
    PreparedTest::missing(data, model, method, pi_source, opts)?.test(delta0, alpha)
}

/// Complete-data confidence-region summary around `center`.
pub fn region_summary(
    data: &Dataset,
    model: &RegressionModel,
    alpha: f64,
    center: &[f64],
) -> Result<RegionSummary> {
    PreparedTest::complete(data, model, &TestOptions::default())?.region(alpha, center)
}

/// Missing-response confidence-region summary around `center`.
pub fn region_summary_missing(
    data: &Dataset,
    model: &RegressionModel,
    alpha: f64,
    center: &[f64],
    method: MissingMethod,
    pi_source: &PiSource,
) -> Result<RegionSummary> {
    PreparedTest::missing(data, model, method, pi_source, &TestOptions::default())?
        .region(alpha, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Row;
    use crate::model::paper_ratio;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noiseless_null(n: usize, k: usize) -> Dataset {
        let model = paper_ratio();
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = vec![i as f64 / n as f64];
                Row {
                    y: Some(model.f(&x, &[10.0, 2.0]).unwrap()),
                    x,
                }
            })
            .collect();
        Dataset::new(1, &rows, k).unwrap()
    }

    fn noisy(n: usize, k: usize, seed: u64, b2: [f64; 2]) -> Dataset {
        let model = paper_ratio();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = vec![i as f64 / n as f64];
                let b = if i <= k { [10.0, 2.0] } else { b2 };
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                Row {
                    y: Some(model.f(&x, &b).unwrap() + eps),
                    x,
                }
            })
            .collect();
        Dataset::new(1, &rows, k).unwrap()
    }

    #[test]
    fn noiseless_null_data_accepts_with_zero_statistic() {
        let data = noiseless_null(80, 40);
        let model = paper_ratio();
        let res = el_test(&data, &model, &[0.0, 0.0], 0.05).unwrap();
        assert!(res.statistic.abs() < 1e-8, "Z = {}", res.statistic);
        assert!(!res.reject);
        assert!(!res.hull_violation);
        assert!((res.critical - 5.991464547).abs() < 1e-6);
    }

    #[test]
    fn weights_satisfy_constraints_on_noisy_data() {
        let data = noisy(200, 100, 41, [10.0, 2.0]);
        let model = paper_ratio();
        let res = el_test(&data, &model, &[0.0, 0.0], 0.05).unwrap();
        let si: f64 = res.weights_i.iter().sum();
        let sj: f64 = res.weights_j.iter().sum();
        assert!((si - 1.0).abs() < 1e-8);
        assert!((sj - 1.0).abs() < 1e-8);
        assert!(res.weights_i.iter().all(|&w| w > 0.0));
        assert!(res.weights_j.iter().all(|&w| w > 0.0));
        assert!(res.p_value >= 0.0 && res.p_value <= 1.0);
        assert_eq!(res.reject, res.statistic > res.critical);
    }

    #[test]
    fn wrong_difference_is_rejected_with_power() {
        // Second phase generated at (7, 1.75); test the null difference 0.
        let data = noisy(400, 200, 57, [7.0, 1.75]);
        let model = paper_ratio();
        let res = el_test(&data, &model, &[0.0, 0.0], 0.05).unwrap();
        assert!(res.reject, "Z = {}", res.statistic);
        // The true difference is not rejected.
        let res = el_test(&data, &model, &[3.0, 0.25], 0.05).unwrap();
        assert!(!res.hull_violation);
        assert!(res.statistic < 30.0, "Z = {}", res.statistic);
    }

    #[test]
    fn region_contains_its_center_and_reports_positive_widths() {
        let data = noisy(300, 150, 3, [10.0, 2.0]);
        let model = paper_ratio();
        let prepared = PreparedTest::complete(&data, &model, &TestOptions::default()).unwrap();
        let center = prepared.delta_hat();
        let region = prepared.region(0.05, &center).unwrap();
        assert!(!region.degenerate);
        assert!(region.widths.iter().all(|&w| w > 0.0));
        assert!(region.lcr > 0.0);
        for (axis, (lo, hi)) in region.axis_intervals.iter().enumerate() {
            assert!(*lo <= center[axis] && center[axis] <= *hi);
        }
    }

    #[test]
    fn scalar_linear_region_matches_analytic_interval() {
        // d = 1, f = beta * x: the EL interval width should match the
        // chi-squared(1) Wald interval for the phase difference within 5%.
        let model = RegressionModel::new(1, 1, &[(-50.0, 50.0)], |x, b| b[0] * x[0])
            .unwrap()
            .with_grad(|x, _| DVector::from_vec(vec![x[0]]))
            .with_hess(|_, _| nalgebra::DMatrix::zeros(1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 400;
        let k = 200;
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                Row {
                    x: vec![x],
                    y: Some(2.0 * x + 0.5 * eps),
                }
            })
            .collect();
        let data = Dataset::new(1, &rows, k).unwrap();
        let prepared = PreparedTest::complete(&data, &model, &TestOptions::default()).unwrap();
        let center = prepared.delta_hat();
        let region = prepared.region(0.05, &center).unwrap();

        let (s1, s2) = prepared.sigma2;
        let ss1: f64 = (1..=k).map(|i| (i as f64 / n as f64).powi(2)).sum();
        let ss2: f64 = (k + 1..=n).map(|i| (i as f64 / n as f64).powi(2)).sum();
        let var = s1 / ss1 + s2 / ss2;
        let want = 2.0 * (region.critical * var).sqrt();
        let got = region.widths[0];
        assert!(
            (got - want).abs() / want < 0.05,
            "EL width {got}, analytic {want}"
        );
    }

    #[test]
    fn far_center_is_degenerate() {
        let data = noisy(200, 100, 8, [10.0, 2.0]);
        let model = paper_ratio();
        let prepared = PreparedTest::complete(&data, &model, &TestOptions::default()).unwrap();
        let region = prepared.region(0.05, &[8.0, 1.5]).unwrap();
        assert!(region.degenerate);
        assert_eq!(region.lcr, 0.0);
    }

    #[test]
    fn missing_methods_collapse_to_complete_on_full_data() {
        let data = noisy(240, 120, 77, [7.0, 1.75]);
        let model = paper_ratio();
        let delta0 = [3.0, 0.25];
        let opts = TestOptions {
            nls_init: Some((vec![10.0, 2.0], vec![7.0, 1.75])),
            ..TestOptions::default()
        };
        let reference = el_test_opts(&data, &model, &delta0, 0.05, &opts).unwrap();
        for method in [
            MissingMethod::CompleteCase,
            MissingMethod::Weighted,
            MissingMethod::Imputed,
        ] {
            let res = el_test_missing_opts(
                &data,
                &model,
                &delta0,
                0.05,
                method,
                &PiSource::constant(1.0),
                &opts,
            )
            .unwrap();
            let diff = (res.statistic - reference.statistic).abs();
            assert!(
                diff < 1e-8 * (1.0 + reference.statistic),
                "{method:?}: {} vs {}",
                res.statistic,
                reference.statistic
            );
        }
    }

    #[test]
    fn missing_pipeline_runs_with_kernel_estimates() {
        let model = paper_ratio();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 300;
        let k = 180;
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = vec![i as f64 / n as f64];
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                let y = model.f(&x, &[10.0, 2.0]).unwrap() + eps;
                let observed = rng.random::<f64>() < 0.8;
                Row {
                    y: if observed { Some(y) } else { None },
                    x,
                }
            })
            .collect();
        let data = Dataset::new(1, &rows, k).unwrap();
        for method in [
            MissingMethod::CompleteCase,
            MissingMethod::Weighted,
            MissingMethod::Imputed,
        ] {
            let res = el_test_missing(
                &data,
                &model,
                &[0.0, 0.0],
                0.05,
                method,
                &PiSource::estimate_default(),
            )
            .unwrap();
            assert!(res.statistic.is_finite());
            assert!(res.statistic >= 0.0);
            assert!(!res.hull_violation);
        }
    }

    #[test]
    fn insufficient_observed_rows_error() {
        let model = paper_ratio();
        let rows: Vec<Row> = (1..=20)
            .map(|i| {
                let x = vec![i as f64 / 20.0];
                Row {
                    y: if i <= 10 || i >= 19 {
                        Some(model.f(&x, &[10.0, 2.0]).unwrap())
                    } else {
                        None
                    },
                    x,
                }
            })
            .collect();
        let data = Dataset::new(1, &rows, 10).unwrap();
        match el_test_missing(
            &data,
            &model,
            &[0.0, 0.0],
            0.05,
            MissingMethod::CompleteCase,
            &PiSource::constant(0.8),
        ) {
            Err(Error::InsufficientData { .. }) => {}
            other => panic!("expected insufficient data, got {other:?}"),
        }
    }
}
