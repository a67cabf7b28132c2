//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! The Monte Carlo table checks default to a fast mode (300 replications,
//! +-0.05 coverage tolerance). Set `EL_ACCEPTANCE_FULL=1` for the full
//! 1000-replication run at +-0.03.

use el_twophase::complete::{assemble, el_statistic, lambda_score, solve_lambda};
use el_twophase::data::{Dataset, Phase};
use el_twophase::inference::{el_test_opts, PiSource, PreparedTest, TestOptions};
use el_twophase::missing::MissingMethod;
use el_twophase::model::paper_ratio;
use el_twophase::numerics::{chi2_quantile, NewtonOptions};
use el_twophase::sim::{
    gen_dataset, run_study, ErrorCase, Method, ModelId, PiMode, RepOutcome, Scenario, Study,
};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const BASE_SEED: u64 = 20240501;

fn full_mode() -> bool {
    std::env::var("EL_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

fn scenario(
    model: ModelId,
    case: ErrorCase,
    study: Study,
    k: usize,
    method: Method,
    reps: usize,
    lcr: bool,
) -> Scenario {
    Scenario {
        model,
        error_case: case,
        study,
        n: 1000,
        k,
        alpha: 0.05,
        method,
        replications: reps,
        base_seed: BASE_SEED,
        pi_mode: PiMode::Estimate,
        compute_lcr: lcr,
        noiseless: false,
    }
}

#[test]
fn acceptance_01_chi2_quantile_exactness() {
    let q95 = chi2_quantile(0.95, 2).unwrap();
    let q50 = chi2_quantile(0.5, 2).unwrap();
    let ok95 = (q95 - 5.991465).abs() <= 1e-6;
    let ok50 = (q50 - 2.0 * (2.0f64).ln()).abs() <= 1e-9;
    report(
        "1 chi-squared quantile exactness",
        ok95 && ok50,
        &format!("q(.95,2) = {q95:.9}, q(.5,2) = {q50:.12}"),
    );
}

#[test]
fn acceptance_02_complete_data_coverage_table() {
    let (reps, tol) = if full_mode() { (1000, 0.03) } else { (300, 0.05) };
    let targets = [(300usize, 0.942f64), (500, 0.966), (700, 0.957)];
    let mut detail = format!("reps {reps}, tol {tol}:");
    let mut pass = true;
    for (k, target) in targets {
        let s = scenario(
            ModelId::Model1,
            ErrorCase::A,
            Study::None,
            k,
            Method::Complete,
            reps,
            false,
        );
        let r = run_study(&s).unwrap();
        let ok = (r.coverage - target).abs() <= tol;
        pass &= ok;
        detail.push_str(&format!(
            " k={k} cp={:.4} (target {target}, {} failures)",
            r.coverage,
            r.failures.values().sum::<usize>()
        ));
    }
    report("2 complete-data coverage table", pass, &detail);
}

#[test]
fn acceptance_03_missing_data_coverage_spot_checks() {
    let reps = 1000;
    let cells = [
        (ModelId::Model2, ErrorCase::A, Method::CompleteCase, 0.956, 0.03),
        (ModelId::Model1, ErrorCase::A, Method::Weighted, 0.917, 0.04),
        (ModelId::Model1, ErrorCase::B, Method::Imputed, 0.926, 0.04),
    ];
    let mut pass = true;
    let mut detail = format!("reps {reps}:");
    for (model, case, method, target, tol) in cells {
        let s = scenario(model, case, Study::S1, 600, method, reps, false);
        let r = run_study(&s).unwrap();
        let ok = (r.coverage - target).abs() <= tol;
        pass &= ok;
        detail.push_str(&format!(
            " {method:?}/{model:?}/{case:?} cp={:.4} (target {target} +-{tol})",
            r.coverage
        ));
    }
    report("3 missing-data coverage spot checks", pass, &detail);
}

#[test]
fn acceptance_04_chi2_calibration_all_methods() {
    let seeds = 500usize;
    let configs = [
        (ModelId::Model1, 500usize, Method::Complete, Study::None),
        (ModelId::Model2, 600, Method::CompleteCase, Study::S1),
        (ModelId::Model2, 600, Method::Weighted, Study::S1),
        (ModelId::Model2, 600, Method::Imputed, Study::S1),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (model, k, method, study) in configs {
        let s = scenario(model, ErrorCase::A, study, k, method, seeds, false);
        let outcomes = el_twophase::sim::null_statistics(&s, seeds);
        let stats: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| match o {
                RepOutcome::Done { statistic, .. } => Some(*statistic),
                _ => None,
            })
            .collect();
        detail.push_str(&format!(" {method:?}["));
        for alpha in [0.10, 0.05, 0.01] {
            let crit = chi2_quantile(1.0 - alpha, 2).unwrap();
            let rej = stats.iter().filter(|&&z| z > crit).count() as f64 / stats.len() as f64;
            let band = 3.0 * (alpha * (1.0 - alpha) / stats.len() as f64).sqrt();
            let ok = (rej - alpha).abs() <= band;
            pass &= ok;
            detail.push_str(&format!("{alpha}:{rej:.3}{} ", if ok { "" } else { "!" }));
        }
        detail.push(']');
    }
    report("4 chi-squared calibration at three levels", pass, &detail);
}

#[test]
fn acceptance_05_multiplier_and_estimator_scaling() {
    let seeds = 200usize;
    let mut median_lambda = Vec::new();
    let mut median_beta = Vec::new();
    for n in [250usize, 500, 1000] {
        let mut lambda_norms = Vec::with_capacity(seeds);
        let mut beta_errs = Vec::with_capacity(seeds);
        let model = paper_ratio();
        for r in 0..seeds as u64 {
            let s = Scenario {
                n,
                k: n / 2,
                ..scenario(
                    ModelId::Model1,
                    ErrorCase::A,
                    Study::None,
                    n / 2,
                    Method::Complete,
                    1,
                    false,
                )
            };
            let data = gen_dataset(&s, BASE_SEED + r).unwrap();
            let opts = TestOptions {
                nls_init: Some((vec![10.0, 2.0], vec![10.0, 2.0])),
                profile: None,
            };
            let prepared = match PreparedTest::complete(&data, &model, &opts) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if let Ok(out) = prepared.profile_at(&[0.0, 0.0], None) {
                lambda_norms.push((n as f64).sqrt() * out.lambda.norm());
                beta_errs.push(
                    ((out.beta[0] - 10.0).powi(2) + (out.beta[1] - 2.0).powi(2)).sqrt(),
                );
            }
        }
        lambda_norms.sort_by(f64::total_cmp);
        beta_errs.sort_by(f64::total_cmp);
        median_lambda.push(lambda_norms[lambda_norms.len() / 2]);
        median_beta.push(beta_errs[beta_errs.len() / 2]);
    }
    let lambda_ratio = median_lambda[2] / median_lambda[0];
    let beta_ratio = median_beta[2] / median_beta[0];
    let pass = lambda_ratio <= 1.5 && beta_ratio <= 0.7;
    report(
        "5 multiplier and estimator scaling across n",
        pass,
        &format!(
            "median sqrt(n)|lambda| = {:.3}/{:.3}/{:.3} (ratio {:.3}), \
             median |beta - beta0| = {:.4}/{:.4}/{:.4} (ratio {:.3})",
            median_lambda[0],
            median_lambda[1],
            median_lambda[2],
            lambda_ratio,
            median_beta[0],
            median_beta[1],
            median_beta[2],
            beta_ratio
        ),
    );
}

fn toy_assembly(z1: &[f64], z2: &[f64], k: usize, n: usize) -> el_twophase::ELAssembly {
    el_twophase::ELAssembly {
        g1: DMatrix::from_row_slice(1, z1.len(), z1),
        g2: DMatrix::from_row_slice(1, z2.len(), z2),
        z1: DMatrix::from_row_slice(1, z1.len(), z1),
        z2: DMatrix::from_row_slice(1, z2.len(), z2),
        v1: DMatrix::identity(1, 1),
        v2: DMatrix::identity(1, 1),
        h: DMatrix::identity(1, 1),
        m: DMatrix::identity(1, 1),
        m_sqrt: DMatrix::identity(1, 1),
        sign_flipped: false,
        k,
        n,
    }
}

#[test]
fn acceptance_06_dual_solver_matches_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut pass = true;
    let mut worst_dl = 0.0f64;
    let mut worst_dz = 0.0f64;
    let mut checked = 0usize;
    while checked < 50 {
        let k = rng.random_range(2..=6usize);
        let n = rng.random_range((k + 2)..=12usize);
        // Mixed signs per phase guarantee an interior maximizer.
        let draw = |rng: &mut ChaCha8Rng, m: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 0.9 + 0.05).collect();
            v[0] = -v[0];
            for item in v.iter_mut().skip(1) {
                if rng.random::<bool>() {
                    *item = -*item;
                }
            }
            v
        };
        let z1 = draw(&mut rng, k);
        let z2 = draw(&mut rng, n - k);
        let asm = toy_assembly(&z1, &z2, k, n);
        let opts = NewtonOptions {
            grad_tol: 1e-12,
            ..NewtonOptions::default()
        };
        let newton = match solve_lambda(&asm, &opts) {
            Ok(l) => l[0],
            Err(_) => continue, // hull boundary instance; redraw
        };
        checked += 1;

        // Feasible interval for the multiplier.
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let r1 = n as f64 / k as f64;
        let r2 = n as f64 / (n - k) as f64;
        for &z in &z1 {
            let bound = -1.0 / (r1 * z);
            if z > 0.0 {
                lo = lo.max(bound);
            } else {
                hi = hi.min(bound);
            }
        }
        for &z in &z2 {
            let bound = 1.0 / (r2 * z);
            if z > 0.0 {
                hi = hi.min(bound);
            } else {
                lo = lo.max(bound);
            }
        }
        let margin = 1e-9 * (hi - lo);
        let (mut glo, mut ghi) = (lo + margin, hi - margin);
        // The statistic is strictly concave on the interval, so refining
        // around the coarse argmax reaches the dense-grid optimum; the
        // final stage runs at 1e-6 resolution.
        let mut best = 0.0f64;
        for stage in 0..4 {
            let step = if stage == 3 {
                1e-6
            } else {
                ((ghi - glo) / 4000.0).max(1e-6)
            };
            let count = ((ghi - glo) / step).ceil() as usize + 1;
            let mut best_val = f64::NEG_INFINITY;
            for i in 0..count {
                let cand = glo + step * i as f64;
                if cand > hi - margin {
                    break;
                }
                if let Ok(v) = el_statistic(&asm, &DVector::from_vec(vec![cand])) {
                    if v > best_val {
                        best_val = v;
                        best = cand;
                    }
                }
            }
            glo = (best - 2.0 * step).max(lo + margin);
            ghi = (best + 2.0 * step).min(hi - margin);
            if step <= 1e-6 {
                break;
            }
        }
        let dl = (newton - best).abs();
        let dz = (el_statistic(&asm, &DVector::from_vec(vec![newton])).unwrap()
            - el_statistic(&asm, &DVector::from_vec(vec![best])).unwrap())
        .abs();
        worst_dl = worst_dl.max(dl);
        worst_dz = worst_dz.max(dz);
        pass &= dl <= 1e-5 && dz <= 1e-8;
    }
    report(
        "6 dual solver matches dense grid",
        pass,
        &format!("50 instances, worst |dlambda| = {worst_dl:.2e}, worst |dZ| = {worst_dz:.2e}"),
    );
}

#[test]
fn acceptance_07_score_gradient_checks() {
    let model = paper_ratio();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    // Multiplier score against finite differences of the statistic.
    let s = scenario(
        ModelId::Model2,
        ErrorCase::A,
        Study::None,
        120,
        Method::Complete,
        1,
        false,
    );
    let mut s = s;
    s.n = 240;
    s.k = 120;
    let data = gen_dataset(&s, 7070).unwrap();
    let asm = assemble(&data, &model, &[10.0, 2.0], &[3.0, 0.25], 1.0, 1.0).unwrap();
    let mut worst_phi = 0.0f64;
    for _ in 0..20 {
        let lambda = DVector::from_vec(vec![
            0.02 * (rng.random::<f64>() - 0.5),
            0.02 * (rng.random::<f64>() - 0.5),
        ]);
        let (phi, _) = lambda_score(&asm, &lambda).unwrap();
        for r in 0..2 {
            let h = 1e-7;
            let mut up = lambda.clone();
            up[r] += h;
            let mut dn = lambda.clone();
            dn[r] -= h;
            let fd = (el_statistic(&asm, &up).unwrap() - el_statistic(&asm, &dn).unwrap())
                / (4.0 * h);
            worst_phi = worst_phi.max((fd - phi[r]).abs() / (1.0 + phi[r].abs()));
        }
    }
    // Estimating-vector Jacobian against finite differences.
    let mut worst_gdot = 0.0f64;
    for t in 0..20 {
        let x = [0.05 + 0.9 * rng.random::<f64>()];
        let y = 4.0 * rng.random::<f64>();
        let beta = [6.0 + 6.0 * rng.random::<f64>(), 1.2 + 1.5 * rng.random::<f64>()];
        let phase = if t % 2 == 0 { Phase::First } else { Phase::Second };
        let delta0 = [1.0, 0.15];
        let jac = el_twophase::gdot(&model, &x, y, &beta, phase, &delta0).unwrap();
        for r in 0..2 {
            let h = 1e-6 * (1.0 + beta[r].abs());
            let mut bp = beta;
            bp[r] += h;
            let mut bm = beta;
            bm[r] -= h;
            let g = |b: &[f64]| match phase {
                Phase::First => el_twophase::g_first(&model, &x, y, b).unwrap(),
                Phase::Second => el_twophase::g_second(&model, &x, y, b, &delta0).unwrap(),
            };
            let gp = g(&bp);
            let gm = g(&bm);
            for s in 0..2 {
                let fd = (gp[s] - gm[s]) / (2.0 * h);
                worst_gdot =
                    worst_gdot.max((fd - jac[(s, r)]).abs() / (1.0 + jac[(s, r)].abs()));
            }
        }
    }
    let pass = worst_phi < 1e-6 && worst_gdot < 1e-5;
    report(
        "7 score-gradient finite-difference checks",
        pass,
        &format!("worst multiplier-score rel err {worst_phi:.2e}, worst Jacobian rel err {worst_gdot:.2e}"),
    );
}

#[test]
fn acceptance_08_weight_constraint_satisfaction() {
    let model = paper_ratio();
    let mut pass = true;
    let mut worst_sum = 0.0f64;
    let mut worst_constraint = 0.0f64;
    let mut checked = 0usize;
    for (method, study) in [
        (Method::Complete, Study::None),
        (Method::CompleteCase, Study::S1),
        (Method::Weighted, Study::S2),
        (Method::Imputed, Study::S3),
    ] {
        for r in 0..12u64 {
            let s = scenario(ModelId::Model2, ErrorCase::A, study, 600, method, 1, false);
            let data = gen_dataset(&s, BASE_SEED + 100 + r).unwrap();
            let opts = TestOptions {
                nls_init: Some((vec![10.0, 2.0], vec![7.0, 1.75])),
                profile: None,
            };
            let prepared = match method.missing_method() {
                None => PreparedTest::complete(&data, &model, &opts),
                Some(m) => {
                    PreparedTest::missing(&data, &model, m, &PiSource::estimate_default(), &opts)
                }
            }
            .unwrap();
            let result = match prepared.test(&[3.0, 0.25], 0.05) {
                Ok(r) if !r.hull_violation => r,
                _ => continue,
            };
            checked += 1;
            let out = prepared.profile_at(&[3.0, 0.25], None).unwrap();
            for (weights, z) in [
                (&result.weights_i, &out.assembly.z1),
                (&result.weights_j, &out.assembly.z2),
            ] {
                let total: f64 = weights.iter().sum();
                worst_sum = worst_sum.max((total - 1.0).abs());
                pass &= (total - 1.0).abs() <= 1e-8;
                pass &= weights.iter().all(|&w| w > 0.0);
                let mut mean = DVector::zeros(2);
                for (w, zc) in weights.iter().zip(z.column_iter()) {
                    mean.axpy(*w, &zc, 1.0);
                }
                worst_constraint = worst_constraint.max(mean.norm());
                pass &= mean.norm() < 1e-6;
            }
        }
    }
    pass &= checked >= 40;
    report(
        "8 implied-weight constraint satisfaction",
        pass,
        &format!(
            "{checked} converged tests; worst |sum-1| = {worst_sum:.2e}, \
             worst constraint norm = {worst_constraint:.2e}"
        ),
    );
}

#[test]
fn acceptance_09_degeneracy_and_invariance_suite() {
    let model = paper_ratio();
    let mut pass = true;
    let mut detail = String::new();

    // Full-data method collapse at shared plug-ins.
    let s = scenario(
        ModelId::Model2,
        ErrorCase::A,
        Study::None,
        600,
        Method::Complete,
        1,
        false,
    );
    let data = gen_dataset(&s, BASE_SEED + 9).unwrap();
    let opts = TestOptions {
        nls_init: Some((vec![10.0, 2.0], vec![7.0, 1.75])),
        profile: None,
    };
    let reference = el_test_opts(&data, &model, &[3.0, 0.25], 0.05, &opts).unwrap();
    let mut collapse_worst = 0.0f64;
    for method in [
        MissingMethod::CompleteCase,
        MissingMethod::Weighted,
        MissingMethod::Imputed,
    ] {
        let res = el_twophase::el_test_missing_opts(
            &data,
            &model,
            &[3.0, 0.25],
            0.05,
            method,
            &PiSource::constant(1.0),
            &opts,
        )
        .unwrap();
        collapse_worst = collapse_worst.max((res.statistic - reference.statistic).abs());
    }
    pass &= collapse_worst <= 1e-8 * (1.0 + reference.statistic);
    detail.push_str(&format!("collapse dZ = {collapse_worst:.2e};"));

    // Placeholder independence, bit-stable statistics.
    let mut placeholder_ok = true;
    for method in [MissingMethod::CompleteCase, MissingMethod::Weighted] {
        let stat_with = |placeholder: f64| -> f64 {
            let s = scenario(
                ModelId::Model1,
                ErrorCase::A,
                Study::S2,
                500,
                Method::CompleteCase,
                1,
                false,
            );
            let base = gen_dataset(&s, BASE_SEED + 19).unwrap();
            let n = base.n();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut obs = Vec::with_capacity(n);
            for i in 0..n {
                x.extend_from_slice(base.x_row(i));
                obs.push(base.delta(i));
                y.push(if base.delta(i) { base.y(i) } else { placeholder });
            }
            let data = Dataset::from_parts(1, x, y, obs, 500).unwrap();
            el_twophase::el_test_missing_opts(
                &data,
                &model,
                &[0.0, 0.0],
                0.05,
                method,
                &PiSource::constant(0.8),
                &TestOptions {
                    nls_init: Some((vec![10.0, 2.0], vec![10.0, 2.0])),
                    profile: None,
                },
            )
            .unwrap()
            .statistic
        };
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let baseline = stat_with(0.0);
        for _ in 0..5 {
            let stat = stat_with(1e6 * (rng.random::<f64>() - 0.5));
            placeholder_ok &= stat.to_bits() == baseline.to_bits();
        }
    }
    pass &= placeholder_ok;
    detail.push_str(&format!(" placeholders bit-stable = {placeholder_ok};"));

    // Joint sign flip leaves the statistic unchanged.
    let asm = assemble(&data, &model, &[10.0, 2.0], &[3.0, 0.25], 1.0, 1.0).unwrap();
    let lambda = DVector::from_vec(vec![0.013, -0.008]);
    let z = el_statistic(&asm, &lambda).unwrap();
    let mut flipped = asm.clone();
    flipped.z1 = -&asm.z1;
    flipped.z2 = -&asm.z2;
    let zf = el_statistic(&flipped, &(-&lambda)).unwrap();
    let flip_ok = z == zf;
    pass &= flip_ok;
    detail.push_str(&format!(" sign-flip exact = {flip_ok};"));

    // Scaled score second moment reported by the test stays near the
    // identity under the null.
    let mut close = 0usize;
    let seeds = 200usize;
    for r in 0..seeds as u64 {
        let s = scenario(
            ModelId::Model1,
            ErrorCase::A,
            Study::None,
            500,
            Method::Complete,
            1,
            false,
        );
        let data = gen_dataset(&s, BASE_SEED + 900 + r).unwrap();
        let opts = TestOptions {
            nls_init: Some((vec![10.0, 2.0], vec![10.0, 2.0])),
            profile: None,
        };
        let prepared = match PreparedTest::complete(&data, &model, &opts) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let res = match prepared.test(&[0.0, 0.0], 0.05) {
            Ok(r) if !r.hull_violation => r,
            _ => continue,
        };
        let s_mat = DMatrix::from_fn(2, 2, |r, c| res.diagnostics.s_matrix[r][c]);
        if (s_mat - DMatrix::<f64>::identity(2, 2)).norm() < 0.25 {
            close += 1;
        }
    }
    let s_ok = close * 10 >= seeds * 9;
    pass &= s_ok;
    detail.push_str(&format!(" S-matrix near identity on {close}/{seeds} seeds"));

    report("9 degeneracy and invariance suite", pass, &detail);
}

#[test]
fn acceptance_10_region_length_order_of_magnitude() {
    let reps = 100usize;
    let mut cells = Vec::new();
    for k in [300usize, 500, 700] {
        let s = scenario(
            ModelId::Model1,
            ErrorCase::A,
            Study::None,
            k,
            Method::Complete,
            reps,
            true,
        );
        let r = run_study(&s).unwrap();
        cells.push((k, r.mean_lcr.unwrap()));
    }
    let mean: f64 = cells.iter().map(|c| c.1).sum::<f64>() / cells.len() as f64;
    let pass = (2.0..=12.0).contains(&mean);
    report(
        "10 region length order of magnitude",
        pass,
        &format!(
            "per-cell mean region lengths {:?}, pooled mean {mean:.2} in [2, 12]",
            cells
                .iter()
                .map(|(k, l)| format!("k={k}:{l:.2}"))
                .collect::<Vec<_>>()
        ),
    );
}
