//! Missing-at-random machinery: the complete-case, inverse-probability
//! weighted and imputed estimating vectors, kernel estimation of the
//! selection probabilities and response imputation. The resulting
//! assemblies plug into the complete-data profile solver unchanged.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::complete::{finish_assembly, shifted_beta, ELAssembly};
use crate::data::{Dataset, Phase};
use crate::error::{Error, Result};
use crate::fit::PhaseFit;
use crate::model::RegressionModel;

/// The three statistics for missing responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingMethod {
    CompleteCase,
    Weighted,
    Imputed,
}

/// Smoothing kernel for the selection-probability estimator. Product form
/// over coordinates when the regressor is multivariate.
#[derive(Clone)]
pub enum Kernel {
    Epanechnikov,
    /// Any bounded, compactly supported kernel.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Epanechnikov => f.write_str("Epanechnikov"),
            Kernel::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Custom(f) => f(u),
        }
    }

    fn eval_product(&self, scaled: &[f64]) -> f64 {
        scaled.iter().map(|&u| self.eval(u)).product()
    }
}

/// Where the selection probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiOrigin {
    Known,
    KernelEstimated,
}

/// Per-row selection probabilities for one phase.
#[derive(Debug, Clone)]
pub struct PiEstimate {
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Smoothing kernel, absent for known probabilities.
    pub kernel: Option<Kernel>,
    pub source: PiOrigin,
    /// Rows whose kernel estimate collapsed to zero and was floored.
    pub floored: usize,
}

/// Kernel estimator of the selection probability within one phase:
/// the delta-weighted kernel sum over the phase, divided by
/// `max(1, kernel sum)`, evaluated at every row of the phase.
///
/// Defaults: Epanechnikov kernel, bandwidth `m^(-1/7)` for a phase of size
/// `m`. Zero estimates are floored at `1/(2m)` and counted, never silent.
pub fn estimate_pi(
    data: &Dataset,
    phase: Phase,
    kernel: &Kernel,
    bandwidth: Option<f64>,
) -> Result<PiEstimate> {
    let idx: Vec<usize> = data.phase_indices(phase).collect();
    let m = idx.len();
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {h} must be positive"
            )))
        }
        None => (m as f64).powf(-1.0 / 7.0),
    };
    let p = data.p();
    let mut values = Vec::with_capacity(m);
    let mut floored = 0usize;
    let mut scaled = vec![0.0f64; p];
    for &i in &idx {
        let xi = data.x_row(i);
        let mut num = 0.0;
        let mut den = 0.0;
        for &l in &idx {
            let xl = data.x_row(l);
            for c in 0..p {
                scaled[c] = (xl[c] - xi[c]) / h;
            }
            let kv = kernel.eval_product(&scaled);
            den += kv;
            if data.delta(l) {
                num += kv;
            }
        }
        let mut pi = num / den.max(1.0);
        if pi <= 0.0 {
            pi = 1.0 / (2.0 * m as f64);
            floored += 1;
        }
        values.push(pi.min(1.0));
    }
    Ok(PiEstimate {
        values,
        bandwidth: h,
        kernel: Some(kernel.clone()),
        source: PiOrigin::KernelEstimated,
        floored,
    })
}

/// Package known selection probabilities for one phase.
pub fn known_pi(
    data: &Dataset,
    phase: Phase,
    pi: impl Fn(&[f64]) -> f64,
) -> Result<PiEstimate> {
    let mut values = Vec::with_capacity(data.phase_len(phase));
    for i in data.phase_indices(phase) {
        let v = pi(data.x_row(i));
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidProbability { value: v });
        }
        values.push(v);
    }
    Ok(PiEstimate {
        values,
        bandwidth: 0.0,
        kernel: None,
        source: PiOrigin::Known,
        floored: 0,
    })
}

/// Responses with missing values replaced by model forecasts, blended by the
/// inverse estimated selection probability. Independent of the profiling
/// parameter: built once from the least-squares fits.
#[derive(Debug, Clone)]
pub struct ImputedResponses {
    pub y_r: Vec<f64>,
    pub beta_first: DVector<f64>,
    pub beta_second: DVector<f64>,
    pub pi1: PiEstimate,
    pub pi2: PiEstimate,
}

/// Impute every response: observed rows are reweighted by `delta/pi`,
/// unobserved rows fall back to the phase forecast entirely.
pub fn impute_responses(
    data: &Dataset,
    model: &RegressionModel,
    fit1: &PhaseFit,
    fit2: &PhaseFit,
    pi1: &PiEstimate,
    pi2: &PiEstimate,
) -> Result<ImputedResponses> {
    let beta1: Vec<f64> = fit1.beta_hat.iter().copied().collect();
    let beta2: Vec<f64> = fit2.beta_hat.iter().copied().collect();
    let k = data.k();
    let mut y_r = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let (beta, pi) = if i < k {
            (&beta1, pi1.values[i])
        } else {
            (&beta2, pi2.values[i - k])
        };
        if !(pi > 0.0) {
            return Err(Error::InvalidProbability { value: pi });
        }
        let forecast = model.f(data.x_row(i), beta)?;
        let v = if data.delta(i) {
            let w = 1.0 / pi;
            w * data.y(i) + (1.0 - w) * forecast
        } else {
            forecast
        };
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "imputed response",
            });
        }
        y_r.push(v);
    }
    Ok(ImputedResponses {
        y_r,
        beta_first: fit1.beta_hat.clone(),
        beta_second: fit2.beta_hat.clone(),
        pi1: pi1.clone(),
        pi2: pi2.clone(),
    })
}

/// Method estimating vector for one row.
///
/// For complete-case and weighted methods a row with an unobserved response
/// contributes exactly the zero vector, whatever placeholder is stored. The
/// imputed method requires the imputed response `y_r`.
pub fn g_missing(
    model: &RegressionModel,
    x: &[f64],
    y: f64,
    delta: bool,
    beta: &[f64],
    phase: Phase,
    delta0: &[f64],
    method: MissingMethod,
    pi: f64,
    y_r: Option<f64>,
) -> Result<DVector<f64>> {
    let response = match method {
        MissingMethod::CompleteCase | MissingMethod::Weighted => {
            if !delta {
                return Ok(DVector::zeros(model.d()));
            }
            y
        }
        MissingMethod::Imputed => y_r.ok_or(Error::InvalidArgument(
            "imputed method requires an imputed response".into(),
        ))?,
    };
    let weight = match method {
        MissingMethod::CompleteCase | MissingMethod::Imputed => 1.0,
        MissingMethod::Weighted => {
            if !(pi > 0.0) {
                return Err(Error::InvalidProbability { value: pi });
            }
            1.0 / pi
        }
    };
    let g = match phase {
        Phase::First => crate::complete::g_first(model, x, response, beta)?,
        Phase::Second => crate::complete::g_second(model, x, response, beta, delta0)?,
    };
    Ok(g * weight)
}

/// Inputs shared by the method assemblies; built once per test, reused at
/// every profiling parameter.
#[derive(Debug, Clone)]
pub struct MissingInputs {
    pub method: MissingMethod,
    pub pi1: PiEstimate,
    pub pi2: PiEstimate,
    pub imputed: Option<ImputedResponses>,
}

impl MissingInputs {
    pub fn new(
        method: MissingMethod,
        pi1: PiEstimate,
        pi2: PiEstimate,
        imputed: Option<ImputedResponses>,
    ) -> Result<Self> {
        if method == MissingMethod::Imputed && imputed.is_none() {
            return Err(Error::InvalidArgument(
                "imputed method requires imputed responses".into(),
            ));
        }
        Ok(MissingInputs {
            method,
            pi1,
            pi2,
            imputed,
        })
    }
}

/// Assemble the method-specific state at `(beta, delta0)`.
///
/// `V` matrices are phase means of the method estimating-vector Jacobians;
/// the inner matrix of `H` follows the method's displayed form: the
/// complete-case and imputed methods sandwich a second-derivative sum with
/// `delta * pi` (respectively `1/pi`) factors, the weighted method uses the
/// plain `V` combination.
pub fn assemble_missing(
    data: &Dataset,
    model: &RegressionModel,
    beta: &[f64],
    delta0: &[f64],
    sigmas: (f64, f64),
    inputs: &MissingInputs,
) -> Result<ELAssembly> {
    let (sigma2_1, sigma2_2) = sigmas;
    if !(sigma2_1 > 0.0 && sigma2_2 > 0.0) {
        return Err(Error::InvalidArgument(
            "variance plug-ins must be positive".into(),
        ));
    }
    let d = model.d();
    let k = data.k();
    let n = data.n();
    let kf = k as f64;
    let nf = n as f64;
    let shifted = shifted_beta(beta, delta0);
    model.check_beta(beta)?;
    model.check_beta(&shifted)?;

    let method = inputs.method;
    let imputed = inputs.imputed.as_ref();

    let mut g1 = DMatrix::zeros(d, k);
    let mut g2 = DMatrix::zeros(d, n - k);
    let mut v1 = DMatrix::zeros(d, d);
    let mut v2 = DMatrix::zeros(d, d);
    // Second-derivative sums entering the sandwich H of the complete-case
    // and imputed methods.
    let mut s1 = DMatrix::zeros(d, d);
    let mut s2 = DMatrix::zeros(d, d);

    for i in data.phase_indices(Phase::First) {
        let x = data.x_row(i);
        let delta = data.delta(i);
        let pi = inputs.pi1.values[i];
        if !(pi > 0.0) {
            return Err(Error::InvalidProbability { value: pi });
        }
        let grad = model.grad(x, beta)?;
        let hess = model.hess(x, beta)?;
        let f_val = model.f(x, beta)?;
        match method {
            MissingMethod::CompleteCase | MissingMethod::Weighted => {
                let w = if method == MissingMethod::Weighted { 1.0 / pi } else { 1.0 };
                if delta {
                    let r = data.y(i) - f_val;
                    g1.column_mut(i).copy_from(&(&grad * (w * r)));
                    v1 += &hess * (w * r);
                    v1.ger(-w, &grad, &grad, 1.0);
                    if method == MissingMethod::CompleteCase {
                        s1 += &hess * (pi * r);
                        s1.ger(-pi, &grad, &grad, 1.0);
                    }
                }
            }
            MissingMethod::Imputed => {
                let r = imputed.unwrap().y_r[i] - f_val;
                g1.column_mut(i).copy_from(&(&grad * r));
                v1 += &hess * r;
                v1.ger(-1.0, &grad, &grad, 1.0);
                s1 += &hess * (r / pi);
                s1.ger(-1.0 / pi, &grad, &grad, 1.0);
            }
        }
    }
    for j in data.phase_indices(Phase::Second) {
        let x = data.x_row(j);
        let delta = data.delta(j);
        let pi = inputs.pi2.values[j - k];
        if !(pi > 0.0) {
            return Err(Error::InvalidProbability { value: pi });
        }
        let grad = model.grad(x, beta)?;
        let grad_shifted = model.grad(x, &shifted)?;
        let hess = model.hess(x, beta)?;
        let f_shifted = model.f(x, &shifted)?;
        match method {
            MissingMethod::CompleteCase | MissingMethod::Weighted => {
                let w = if method == MissingMethod::Weighted { 1.0 / pi } else { 1.0 };
                if delta {
                    let r = data.y(j) - f_shifted;
                    g2.column_mut(j - k).copy_from(&(&grad * (w * r)));
                    v2 += &hess * (w * r);
                    v2.ger(-w, &grad, &grad_shifted, 1.0);
                    if method == MissingMethod::CompleteCase {
                        s2 += &hess * (pi * r);
                        s2.ger(-pi, &grad, &grad, 1.0);
                    }
                }
            }
            MissingMethod::Imputed => {
                let r = imputed.unwrap().y_r[j] - f_shifted;
                g2.column_mut(j - k).copy_from(&(&grad * r));
                v2 += &hess * r;
                v2.ger(-1.0, &grad, &grad_shifted, 1.0);
                s2 += &hess * (r / pi);
                s2.ger(-1.0 / pi, &grad, &grad, 1.0);
            }
        }
    }
    v1 /= kf;
    v2 /= nf - kf;

    let h_inner = match method {
        MissingMethod::Weighted => {
            &v2 * ((nf - kf) / (nf * kf) * sigma2_1) + &v1 * (kf / (nf * (nf - kf)) * sigma2_2)
        }
        MissingMethod::CompleteCase | MissingMethod::Imputed => {
            let v1_inv = crate::numerics::checked_inverse(&v1)?;
            let v2_inv = crate::numerics::checked_inverse(&v2)?;
            &v2 * &v1_inv * &s1 * ((nf - kf) / (nf * kf) * sigma2_1)
                + &s2 * &v2_inv * &v1 * (kf / (nf * (nf - kf)) * sigma2_2)
        }
    };
    finish_assembly(g1, g2, v1, v2, h_inner, k, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complete::{assemble, g_first};
    use crate::data::Row;
    use crate::fit::fit_nls;
    use crate::model::paper_ratio;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn full_data(n: usize, k: usize) -> Dataset {
        let model = paper_ratio();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = vec![i as f64 / n as f64];
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                Row {
                    y: Some(model.f(&x, &[10.0, 2.0]).unwrap() + eps),
                    x,
                }
            })
            .collect();
        Dataset::new(1, &rows, k).unwrap()
    }

    #[test]
    fn epanechnikov_point_values() {
        let k = Kernel::Epanechnikov;
        assert_eq!(k.eval(0.0), 0.75);
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(-1.0), 0.0);
        assert_eq!(k.eval(1.5), 0.0);
    }

    #[test]
    fn pi_hat_is_one_on_fully_observed_data() {
        let data = full_data(120, 60);
        let pi = estimate_pi(&data, Phase::First, &Kernel::Epanechnikov, None).unwrap();
        assert_eq!(pi.floored, 0);
        assert!(pi.values.iter().all(|&v| v == 1.0), "{:?}", &pi.values[..4]);
        assert!((pi.bandwidth - (60f64).powf(-1.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn pi_hat_tracks_a_constant_truth() {
        let model = paper_ratio();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 600;
        let rows: Vec<Row> = (1..=n)
            .map(|i| {
                let x = vec![i as f64 / n as f64];
                let y = model.f(&x, &[10.0, 2.0]).unwrap();
                let observed = rng.random::<f64>() < 0.8;
                Row {
                    y: if observed { Some(y) } else { None },
                    x,
                }
            })
            .collect();
        let data = Dataset::new(1, &rows, 300).unwrap();
        for phase in [Phase::First, Phase::Second] {
            let pi = estimate_pi(&data, phase, &Kernel::Epanechnikov, None).unwrap();
            let mae: f64 =
                pi.values.iter().map(|v| (v - 0.8f64).abs()).sum::<f64>() / pi.values.len() as f64;
            assert!(mae < 0.1, "phase {phase:?} mae {mae}");
        }
    }

    #[test]
    fn zero_kernel_estimates_are_floored_and_flagged() {
        // First phase entirely unobserved: every estimate collapses to zero
        // and is floored at 1/(2m).
        let n = 40usize;
        let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let y = vec![0.0; n];
        let obs: Vec<bool> = (0..n).map(|i| i >= 20).collect();
        let data = Dataset::from_parts(1, x, y, obs, 20).unwrap();
        let pi = estimate_pi(&data, Phase::First, &Kernel::Epanechnikov, None).unwrap();
        assert_eq!(pi.floored, 20);
        assert!(pi.values.iter().all(|&v| v == 1.0 / 40.0));
    }

    #[test]
    fn known_pi_rejects_out_of_range() {
        let data = full_data(20, 10);
        assert!(known_pi(&data, Phase::First, |_| 1.2).is_err());
        assert!(known_pi(&data, Phase::First, |_| 0.0).is_err());
        assert!(known_pi(&data, Phase::First, |x| 0.8 + 0.1 * x[0]).is_ok());
    }

    #[test]
    fn g_missing_zero_vector_when_unobserved() {
        let model = paper_ratio();
        for method in [MissingMethod::CompleteCase, MissingMethod::Weighted] {
            let g = g_missing(
                &model,
                &[0.5],
                123.456,
                false,
                &[10.0, 2.0],
                Phase::First,
                &[0.0, 0.0],
                method,
                0.7,
                None,
            )
            .unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn weighted_collapses_to_complete_case_at_unit_probability() {
        let model = paper_ratio();
        let args = (&[0.5f64][..], 4.2, true, &[10.0f64, 2.0][..]);
        let a = g_missing(
            &model, args.0, args.1, args.2, args.3,
            Phase::First, &[0.0, 0.0], MissingMethod::CompleteCase, 1.0, None,
        )
        .unwrap();
        let b = g_missing(
            &model, args.0, args.1, args.2, args.3,
            Phase::First, &[0.0, 0.0], MissingMethod::Weighted, 1.0, None,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, g_first(&model, args.0, args.1, args.3).unwrap());
    }

    #[test]
    fn imputation_blends_by_inverse_probability() {
        // delta = 1, pi = 0.8, y = 5, forecast 3.75: 1.25*5 - 0.25*3.75.
        let model = paper_ratio();
        let rows = vec![
            Row { x: vec![0.5], y: Some(5.0) },
            Row { x: vec![0.25], y: None },
            Row { x: vec![0.5], y: Some(5.0) },
            Row { x: vec![0.75], y: None },
        ];
        let data = Dataset::new(1, &rows, 2).unwrap();
        let fit = PhaseFit {
            beta_hat: DVector::from_vec(vec![10.0, 2.0]),
            sigma2_hat: 0.0,
            rss: 0.0,
            n_used: 2,
            converged: true,
            iterations: 0,
        };
        let pi1 = known_pi(&data, Phase::First, |_| 0.8).unwrap();
        let pi2 = known_pi(&data, Phase::Second, |_| 1.0).unwrap();
        let imp = impute_responses(&data, &model, &fit, &fit, &pi1, &pi2).unwrap();
        assert!((imp.y_r[0] - 5.3125).abs() < 1e-12, "{}", imp.y_r[0]);
        // Unobserved: pure forecast.
        let want = model.f(&[0.25], &[10.0, 2.0]).unwrap();
        assert_eq!(imp.y_r[1], want);
        // Observed at unit probability: untouched.
        assert_eq!(imp.y_r[2], 5.0);
    }

    #[test]
    fn full_data_assemblies_share_g_and_v_across_methods() {
        let data = full_data(100, 50);
        let model = paper_ratio();
        let beta = [10.0, 2.0];
        let delta0 = [0.0, 0.0];
        let sig = (1.0, 1.0);
        let reference = assemble(&data, &model, &beta, &delta0, sig.0, sig.1).unwrap();

        let pi1 = known_pi(&data, Phase::First, |_| 1.0).unwrap();
        let pi2 = known_pi(&data, Phase::Second, |_| 1.0).unwrap();
        let fit1 = fit_nls(&data, Phase::First, &model, &[10.0, 2.0], true).unwrap();
        let fit2 = fit_nls(&data, Phase::Second, &model, &[10.0, 2.0], true).unwrap();
        let imputed =
            impute_responses(&data, &model, &fit1, &fit2, &pi1, &pi2).unwrap();

        for method in [
            MissingMethod::CompleteCase,
            MissingMethod::Weighted,
            MissingMethod::Imputed,
        ] {
            let inputs = MissingInputs::new(
                method,
                pi1.clone(),
                pi2.clone(),
                Some(imputed.clone()),
            )
            .unwrap();
            let asm = assemble_missing(&data, &model, &beta, &delta0, sig, &inputs).unwrap();
            assert!((&asm.g1 - &reference.g1).norm() < 1e-12, "{method:?} g1");
            assert!((&asm.g2 - &reference.g2).norm() < 1e-12, "{method:?} g2");
            assert!((&asm.v1 - &reference.v1).norm() < 1e-12, "{method:?} v1");
            assert!((&asm.v2 - &reference.v2).norm() < 1e-12, "{method:?} v2");
            if method != MissingMethod::Weighted {
                // Sandwich H collapses to the complete-data H exactly.
                assert!((&asm.h - &reference.h).norm() < 1e-9 * reference.h.norm());
            }
        }
    }

    #[test]
    fn complete_case_h_matches_scalar_arithmetic() {
        // d = 1 linear model, 4 rows, hand-evaluated sandwich.
        let model = RegressionModel::new(1, 1, &[(-50.0, 50.0)], |x, b| b[0] * x[0])
            .unwrap()
            .with_grad(|x, _| DVector::from_vec(vec![x[0]]))
            .with_hess(|_, _| DMatrix::zeros(1, 1));
        let xs = [0.2, 0.4, 0.6, 0.8];
        let ys = [0.5, 0.9, 1.1, 1.7];
        let deltas = [true, true, true, false];
        let rows: Vec<Row> = xs
            .iter()
            .zip(&ys)
            .zip(&deltas)
            .map(|((x, y), d)| Row {
                x: vec![*x],
                y: if *d { Some(*y) } else { None },
            })
            .collect();
        let data = Dataset::new(1, &rows, 2).unwrap();
        let pis = [0.9, 0.8, 0.7, 0.6];
        let pi1 = PiEstimate {
            values: pis[..2].to_vec(),
            bandwidth: 0.0,
            kernel: None,
            source: PiOrigin::Known,
            floored: 0,
        };
        let pi2 = PiEstimate {
            values: pis[2..].to_vec(),
            bandwidth: 0.0,
            kernel: None,
            source: PiOrigin::Known,
            floored: 0,
        };
        let inputs =
            MissingInputs::new(MissingMethod::CompleteCase, pi1, pi2, None).unwrap();
        let (s1, s2) = (0.8, 1.2);
        let asm =
            assemble_missing(&data, &model, &[2.0], &[0.0], (s1, s2), &inputs).unwrap();

        let (n, k) = (4.0, 2.0);
        // Hess is zero, so each bracket is -delta x^2 (V) or -delta pi x^2 (S).
        let v1 = -(xs[0] * xs[0] + xs[1] * xs[1]) / k;
        let v2 = -xs[2] * xs[2] / (n - k);
        let s1_sum = -(pis[0] * xs[0] * xs[0] + pis[1] * xs[1] * xs[1]);
        let s2_sum = -pis[2] * xs[2] * xs[2];
        let h_inner = (n - k) / (n * k) * s1 * v2 / v1 * s1_sum
            + k / (n * (n - k)) * s2 * s2_sum / v2 * v1;
        assert!((asm.v1[(0, 0)] - v1).abs() < 1e-12);
        assert!((asm.v2[(0, 0)] - v2).abs() < 1e-12);
        assert!(
            (asm.h[(0, 0)] - 1.0 / h_inner).abs() < 1e-12,
            "H {} vs {}",
            asm.h[(0, 0)],
            1.0 / h_inner
        );
    }

    #[test]
    fn placeholder_values_never_reach_the_assembly() {
        let model = paper_ratio();
        let build = |placeholder: f64| {
            let n = 60usize;
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut obs = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            for i in 1..=n {
                let xv = i as f64 / n as f64;
                let observed = i % 4 != 0;
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                x.push(xv);
                obs.push(observed);
                y.push(if observed {
                    model.f(&[xv], &[10.0, 2.0]).unwrap() + eps
                } else {
                    placeholder
                });
            }
            Dataset::from_parts(1, x, y, obs, 30).unwrap()
        };
        for method in [MissingMethod::CompleteCase, MissingMethod::Weighted] {
            let mk = |ph: f64| {
                let data = build(ph);
                let pi1 = known_pi(&data, Phase::First, |_| 0.75).unwrap();
                let pi2 = known_pi(&data, Phase::Second, |_| 0.75).unwrap();
                let inputs = MissingInputs::new(method, pi1, pi2, None).unwrap();
                assemble_missing(&data, &model, &[10.0, 2.0], &[0.0, 0.0], (1.0, 1.0), &inputs)
                    .unwrap()
            };
            let a = mk(0.0);
            let b = mk(987654.321);
            assert_eq!(a.z1, b.z1, "{method:?}");
            assert_eq!(a.z2, b.z2, "{method:?}");
            assert_eq!(a.h, b.h, "{method:?}");
        }
    }
}
