//! Minimal library walkthrough: simulate a dataset, test a difference,
//! summarize the confidence region.

use el_twophase::inference::{PreparedTest, TestOptions};
use el_twophase::model::paper_ratio;
use el_twophase::sim::{gen_dataset, ErrorCase, Method, ModelId, PiMode, Scenario, Study};

fn main() -> el_twophase::Result<()> {
    let scenario = Scenario {
        model: ModelId::Model2,
        error_case: ErrorCase::A,
        study: Study::None,
        n: 1000,
        k: 600,
        alpha: 0.05,
        method: Method::Complete,
        replications: 1,
        base_seed: 42,
        pi_mode: PiMode::Estimate,
        compute_lcr: true,
        noiseless: false,
    };
    let data = gen_dataset(&scenario, 42)?;
    let model = paper_ratio();

    let prepared = PreparedTest::complete(&data, &model, &TestOptions::default())?;
    let result = prepared.test(&[3.0, 0.25], 0.05)?;
    println!(
        "statistic {:.4} vs critical {:.4} -> reject = {}",
        result.statistic, result.critical, result.reject
    );

    let center = prepared.delta_hat();
    let region = prepared.region(0.05, &center)?;
    println!(
        "region around ({:.3}, {:.3}): widths ({:.3}, {:.3}), length {:.3}",
        center[0], center[1], region.widths[0], region.widths[1], region.lcr
    );
    Ok(())
}
