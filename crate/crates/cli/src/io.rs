//! Dataset ingestion, atomic report writing and report shapes.

use std::fmt::Write as _;
use std::io::Write as _;

use serde::Serialize;

use el_twophase::inference::{ELTestResult, PreparedTest, RegionSummary};
use el_twophase::sim::{gen_dataset, Scenario, SimulationReport};
use el_twophase::{Dataset, RegressionModel, Row};

use crate::runconfig::{RunConfig, SimulateConfig};

/// CLI error with the exit code contract: 1 for file, parse and validation
/// problems, 2 for computational failures.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    pub fn computation(e: el_twophase::Error) -> Self {
        // Shape and argument problems are validation failures; everything
        // else is a computational failure.
        let code = match &e {
            el_twophase::Error::InvalidArgument(_)
            | el_twophase::Error::InsufficientData { .. } => 1,
            _ => 2,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

/// Load the dataset named by the config: a CSV file or a built-in scenario.
pub fn load_dataset(config: &RunConfig, model: &RegressionModel) -> Result<Dataset, CliError> {
    if let Some(spec) = &config.builtin {
        let scenario = Scenario {
            model: spec.model,
            error_case: spec.case,
            study: spec.study,
            n: spec.n,
            k: spec.k,
            alpha: config.alpha,
            method: el_twophase::sim::Method::Complete,
            replications: 1,
            base_seed: spec.seed,
            pi_mode: el_twophase::sim::PiMode::Estimate,
            compute_lcr: false,
            noiseless: spec.noiseless,
        };
        // The generator validates the shape; the method/study pairing check
        // does not apply to raw data generation.
        return gen_dataset_raw(&scenario, spec.seed)
            .map_err(|e| CliError::usage(e.to_string()));
    }
    let path = config.input.as_ref().expect("validated");
    let k = config.k.expect("validated");
    read_csv(path, model.p(), k)
}

fn gen_dataset_raw(scenario: &Scenario, seed: u64) -> el_twophase::Result<Dataset> {
    // Pair the method with the study so scenario validation passes.
    let mut s = scenario.clone();
    s.method = if s.study == el_twophase::sim::Study::None {
        el_twophase::sim::Method::Complete
    } else {
        el_twophase::sim::Method::CompleteCase
    };
    gen_dataset(&s, seed)
}

/// Read `x1,...,xp,y[,delta]`; an empty `y` with `delta=0` marks a missing
/// response. Errors cite the 1-based data row.
pub fn read_csv(path: &str, p: usize, k: usize) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot open {path}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::usage(format!("{path}: {e}")))?
        .clone();
    let expected: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    let has_delta = match headers.len() {
        l if l == p + 1 => false,
        l if l == p + 2 => true,
        l => {
            return Err(CliError::usage(format!(
                "{path}: expected {} or {} columns (x1..x{p},y[,delta]), found {l}",
                p + 1,
                p + 2
            )))
        }
    };
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(name.as_str()) {
            return Err(CliError::usage(format!(
                "{path}: column {} must be '{name}', found '{}'",
                i + 1,
                headers.get(i).unwrap_or("")
            )));
        }
    }
    if headers.get(p) != Some("y") {
        return Err(CliError::usage(format!("{path}: column {} must be 'y'", p + 1)));
    }
    if has_delta && headers.get(p + 1) != Some("delta") {
        return Err(CliError::usage(format!(
            "{path}: column {} must be 'delta'",
            p + 2
        )));
    }

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let rownum = idx + 1;
        let record =
            record.map_err(|e| CliError::usage(format!("{path} row {rownum}: {e}")))?;
        let mut x = Vec::with_capacity(p);
        for c in 0..p {
            let field = record.get(c).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                CliError::usage(format!(
                    "{path} row {rownum}: x{} value '{field}' is not a number",
                    c + 1
                ))
            })?;
            x.push(v);
        }
        let y_field = record.get(p).unwrap_or("");
        let delta = match record.get(p + 1) {
            None => true,
            Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "{path} row {rownum}: delta '{other}' must be 0 or 1"
                )))
            }
        };
        let y = if delta {
            if y_field.is_empty() {
                return Err(CliError::usage(format!(
                    "{path} row {rownum}: observed row (delta=1) has empty y"
                )));
            }
            Some(y_field.parse::<f64>().map_err(|_| {
                CliError::usage(format!(
                    "{path} row {rownum}: y value '{y_field}' is not a number"
                ))
            })?)
        } else {
            if !y_field.is_empty() {
                return Err(CliError::usage(format!(
                    "{path} row {rownum}: missing row (delta=0) must leave y empty"
                )));
            }
            None
        };
        rows.push(Row { x, y });
    }
    Dataset::new(p, &rows, k).map_err(|e| CliError::usage(format!("{path}: {e}")))
}

/// Write a report atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &str, content: &str) -> Result<(), CliError> {
    let target = std::path::Path::new(path);
    let dir = target.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp-{}",
            target.file_name().and_then(|n| n.to_str()).unwrap_or("report"),
            std::process::id()
        )),
        None => std::path::PathBuf::from(format!(".{path}.tmp-{}", std::process::id())),
    };
    let mut file = std::fs::File::create(&tmp)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", tmp.display())))?;
    let newline: &[u8] = if content.ends_with('\n') { b"" } else { b"\n" };
    file.write_all(content.as_bytes())
        .and_then(|_| file.write_all(newline))
        .and_then(|_| file.sync_all())
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, target)
        .map_err(|e| CliError::usage(format!("cannot move report into place: {e}")))
}

#[derive(Serialize)]
struct FitSummary {
    beta_hat: Vec<f64>,
    sigma2_hat: f64,
    rss: f64,
    n_used: usize,
    iterations: usize,
}

fn fit_summary(fit: &el_twophase::PhaseFit) -> FitSummary {
    FitSummary {
        beta_hat: fit.beta_hat.iter().copied().collect(),
        sigma2_hat: fit.sigma2_hat,
        rss: fit.rss,
        n_used: fit.n_used,
        iterations: fit.iterations,
    }
}

#[derive(Serialize)]
struct WeightSummary {
    sum_first: f64,
    sum_second: f64,
    min_first: f64,
    min_second: f64,
}

/// `el test` report.
#[derive(Serialize)]
pub struct TestReport<'a> {
    pub config: &'a RunConfig,
    fits: (FitSummary, FitSummary),
    sigma2: (f64, f64),
    result: &'a ELTestResult,
    weight_summary: WeightSummary,
}

impl<'a> TestReport<'a> {
    pub fn new(
        config: &'a RunConfig,
        prepared: &PreparedTest<'_>,
        result: &'a ELTestResult,
    ) -> Self {
        let min_of = |w: &[f64]| w.iter().copied().fold(f64::INFINITY, f64::min);
        TestReport {
            config,
            fits: (fit_summary(&prepared.fit1), fit_summary(&prepared.fit2)),
            sigma2: prepared.sigma2,
            weight_summary: WeightSummary {
                sum_first: result.weights_i.iter().sum(),
                sum_second: result.weights_j.iter().sum(),
                min_first: min_of(&result.weights_i),
                min_second: min_of(&result.weights_j),
            },
            result,
        }
    }
}

/// `el region` report.
#[derive(Serialize)]
pub struct RegionReport<'a> {
    pub config: &'a RunConfig,
    fits: (FitSummary, FitSummary),
    sigma2: (f64, f64),
    region: &'a RegionSummary,
}

impl<'a> RegionReport<'a> {
    pub fn new(
        config: &'a RunConfig,
        prepared: &PreparedTest<'_>,
        region: &'a RegionSummary,
    ) -> Self {
        RegionReport {
            config,
            fits: (fit_summary(&prepared.fit1), fit_summary(&prepared.fit2)),
            sigma2: prepared.sigma2,
            region,
        }
    }
}

#[derive(Serialize)]
struct SimulateJsonReport<'a> {
    config: &'a SimulateConfig,
    rows: &'a [SimulationReport],
}

pub fn render_simulate_json(config: &SimulateConfig, rows: &[SimulationReport]) -> String {
    serde_json::to_string_pretty(&SimulateJsonReport { config, rows }).unwrap()
}

pub fn render_simulate_csv(rows: &[SimulationReport]) -> String {
    let mut out = String::new();
    out.push_str(
        "model,case,study,n,k,alpha,method,pi_mode,replications,base_seed,\
         cp,mc_stderr,mean_lcr,completed,failures,wall_time\n",
    );
    for r in rows {
        let s = &r.scenario;
        let failures = if r.failures.is_empty() {
            String::new()
        } else {
            r.failures
                .iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{},{},{},{:?},{:?},{},{},{:.6},{:.6},{},{},{},{:.3}",
            s.model,
            s.error_case,
            s.study,
            s.n,
            s.k,
            s.alpha,
            s.method,
            s.pi_mode,
            s.replications,
            s.base_seed,
            r.coverage,
            r.mc_stderr,
            r.mean_lcr.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.completed,
            failures,
            r.wall_time,
        );
    }
    out
}
