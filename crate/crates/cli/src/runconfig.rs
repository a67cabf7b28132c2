//! Resolved run configurations: config-file defaults, flag overrides,
//! exhaustive validation.

use serde::{Deserialize, Serialize};

use el_twophase::sim::{ErrorCase, Method, ModelId, PiMode, Scenario, Study};

use crate::io::CliError;
use crate::{CommonDataArgs, SimulateArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Complete,
    CompleteCase,
    Weighted,
    Imputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiSpec {
    Kernel,
    Constant(f64),
    Study(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Built-in dataset request.
#[derive(Debug, Clone, Serialize)]
pub struct BuiltinSpec {
    pub model: ModelId,
    pub case: ErrorCase,
    pub study: Study,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub noiseless: bool,
}

/// Fully resolved configuration for `el test` / `el region`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSpec>,
    pub model: String,
    pub k: Option<usize>,
    pub alpha: f64,
    pub method: MethodTag,
    pub pi: PiSpec,
    pub bandwidths: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub init: Option<(Vec<f64>, Vec<f64>)>,
    pub output: Option<String>,
}

/// Config-file schema for `test`/`region`; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<String>,
    builtin: Option<String>,
    model: Option<String>,
    k: Option<usize>,
    alpha: Option<f64>,
    method: Option<String>,
    pi: Option<String>,
    bandwidths: Option<String>,
    init: Option<String>,
    delta0: Option<String>,
    center: Option<String>,
    output: Option<String>,
}

fn load_file_config(path: &Option<String>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read config {p}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {p}: {e}")))
        }
    }
}

pub fn parse_floats(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("{flag}: '{t}' is not a number")))
        })
        .collect()
}

fn parse_method(text: &str) -> Result<MethodTag, CliError> {
    match text {
        "complete" => Ok(MethodTag::Complete),
        "complete-case" => Ok(MethodTag::CompleteCase),
        "weighted" => Ok(MethodTag::Weighted),
        "imputed" => Ok(MethodTag::Imputed),
        other => Err(CliError::usage(format!(
            "--method: unknown method '{other}' \
             (complete, complete-case, weighted, imputed)"
        ))),
    }
}

fn parse_pi(text: &str) -> Result<PiSpec, CliError> {
    match text {
        "kernel" => Ok(PiSpec::Kernel),
        "study1" => Ok(PiSpec::Study(1)),
        "study2" => Ok(PiSpec::Study(2)),
        "study3" => Ok(PiSpec::Study(3)),
        other => {
            if let Some(rest) = other.strip_prefix("const:") {
                let c: f64 = rest
                    .parse()
                    .map_err(|_| CliError::usage(format!("--pi: bad constant '{rest}'")))?;
                if !(c > 0.0 && c <= 1.0) {
                    return Err(CliError::usage(format!(
                        "--pi: constant {c} outside (0, 1]"
                    )));
                }
                Ok(PiSpec::Constant(c))
            } else {
                Err(CliError::usage(format!(
                    "--pi: unknown source '{other}' \
                     (kernel, study1, study2, study3, const:<p>)"
                )))
            }
        }
    }
}

/// Study selection probabilities, first phase.
pub fn study_pi1(study: u8, x: f64) -> f64 {
    match study {
        1 | 3 => kinked(x),
        _ => 0.8,
    }
}

/// Study selection probabilities, second phase.
pub fn study_pi2(study: u8, x: f64) -> f64 {
    match study {
        1 => kinked(x),
        _ => 0.8,
    }
}

fn kinked(x: f64) -> f64 {
    let t = (x - 1.0).abs();
    if t <= 1.0 {
        0.8 + 0.2 * t
    } else {
        0.95
    }
}

fn parse_builtin(text: &str) -> Result<BuiltinSpec, CliError> {
    let mut model = ModelId::Model1;
    let mut case = ErrorCase::A;
    let mut study = Study::None;
    let mut n = 1000usize;
    let mut k = None;
    let mut seed = 1u64;
    let mut noiseless = false;
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if part == "noiseless" {
            noiseless = true;
            continue;
        }
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::usage(format!("--builtin: expected key=value, got '{part}'"))
        })?;
        match key {
            "model" => {
                model = match value {
                    "1" => ModelId::Model1,
                    "2" => ModelId::Model2,
                    _ => return Err(CliError::usage(format!("--builtin: model '{value}'"))),
                }
            }
            "case" => {
                case = match value {
                    "a" => ErrorCase::A,
                    "b" => ErrorCase::B,
                    "c" => ErrorCase::C,
                    _ => return Err(CliError::usage(format!("--builtin: case '{value}'"))),
                }
            }
            "study" => {
                study = match value {
                    "none" => Study::None,
                    "1" => Study::S1,
                    "2" => Study::S2,
                    "3" => Study::S3,
                    _ => return Err(CliError::usage(format!("--builtin: study '{value}'"))),
                }
            }
            "n" => {
                n = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("--builtin: n '{value}'")))?
            }
            "k" => {
                k = Some(
                    value
                        .parse()
                        .map_err(|_| CliError::usage(format!("--builtin: k '{value}'")))?,
                )
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("--builtin: seed '{value}'")))?
            }
            other => {
                return Err(CliError::usage(format!(
                    "--builtin: unknown key '{other}'"
                )))
            }
        }
    }
    let k = k.ok_or_else(|| CliError::usage("--builtin: k=<index> is required"))?;
    Ok(BuiltinSpec {
        model,
        case,
        study,
        n,
        k,
        seed,
        noiseless,
    })
}

fn parse_init(text: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match text.split_once(';') {
        Some((a, b)) => Ok((parse_floats(a, "--init")?, parse_floats(b, "--init")?)),
        None => {
            let v = parse_floats(text, "--init")?;
            Ok((v.clone(), v))
        }
    }
}

impl RunConfig {
    fn resolve(
        command: &'static str,
        args: &CommonDataArgs,
        delta0: Option<&str>,
        center: Option<&str>,
    ) -> Result<Self, CliError> {
        let file = load_file_config(&args.config)?;
        let input = args.input.clone().or(file.input);
        let builtin_text = args.builtin.clone().or(file.builtin);
        let builtin = builtin_text.as_deref().map(parse_builtin).transpose()?;
        match (&input, &builtin) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage("--input and --builtin are exclusive"))
            }
            (None, None) => {
                return Err(CliError::usage("one of --input or --builtin is required"))
            }
            _ => {}
        }
        let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::usage(format!(
                "--alpha: {alpha} outside the open interval (0, 1)"
            )));
        }
        let method = parse_method(
            args.method
                .as_deref()
                .or(file.method.as_deref())
                .unwrap_or("complete"),
        )?;
        let pi = parse_pi(args.pi.as_deref().or(file.pi.as_deref()).unwrap_or("kernel"))?;
        let bandwidths = match args.bandwidths.as_deref().or(file.bandwidths.as_deref()) {
            None => None,
            Some(text) => {
                let v = parse_floats(text, "--bandwidths")?;
                if v.len() != 2 || v.iter().any(|&h| h <= 0.0) {
                    return Err(CliError::usage(
                        "--bandwidths: expected two positive values h1,h2",
                    ));
                }
                Some((v[0], v[1]))
            }
        };
        let init = args
            .init
            .as_deref()
            .or(file.init.as_deref())
            .map(parse_init)
            .transpose()?;
        let delta0 = match delta0.or(file.delta0.as_deref()) {
            Some(t) => Some(parse_floats(t, "--delta0")?),
            None => None,
        };
        let center = match center.or(file.center.as_deref()) {
            Some("auto") => None,
            Some(t) => Some(parse_floats(t, "--center")?),
            None => None,
        };
        let k = args.k.or(file.k);
        if input.is_some() && k.is_none() {
            return Err(CliError::usage("--k is required with --input"));
        }
        Ok(RunConfig {
            command,
            input,
            builtin,
            model: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| "paper-ratio".to_string()),
            k,
            alpha,
            method,
            pi,
            bandwidths,
            delta0,
            center,
            init,
            output: args.output.clone().or(file.output),
        })
    }

    pub fn for_test(args: &CommonDataArgs, delta0: Option<&str>) -> Result<Self, CliError> {
        let config = Self::resolve("test", args, delta0, None)?;
        if config.delta0.is_none() {
            return Err(CliError::usage("--delta0 is required for `el test`"));
        }
        Ok(config)
    }

    pub fn for_region(args: &CommonDataArgs, center: Option<&str>) -> Result<Self, CliError> {
        Self::resolve("region", args, None, center)
    }
}

/// Config-file schema for `simulate`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFileConfig {
    model: Option<String>,
    case: Option<String>,
    study: Option<String>,
    n: Option<usize>,
    k: Option<String>,
    alpha: Option<f64>,
    method: Option<String>,
    reps: Option<usize>,
    seed: Option<u64>,
    pi_mode: Option<String>,
    no_lcr: Option<bool>,
    output: Option<String>,
    format: Option<String>,
}

/// Resolved scenario grid for `el simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub model: ModelId,
    pub cases: Vec<ErrorCase>,
    pub study: Study,
    pub n: usize,
    pub ks: Vec<usize>,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub base_seed: u64,
    pub pi_mode: PiMode,
    pub compute_lcr: bool,
    #[serde(skip)]
    pub output: Option<String>,
    #[serde(skip)]
    pub format: OutputFormat,
}

impl SimulateConfig {
    pub fn resolve(args: &SimulateArgs) -> Result<Self, CliError> {
        let file: SimFileConfig = match &args.config {
            None => SimFileConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {p}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("config {p}: {e}")))?
            }
        };
        let model = match args.model.as_deref().or(file.model.as_deref()).unwrap_or("1") {
            "1" => ModelId::Model1,
            "2" => ModelId::Model2,
            other => return Err(CliError::usage(format!("--model: '{other}'"))),
        };
        let cases = args
            .case
            .as_deref()
            .or(file.case.as_deref())
            .unwrap_or("a")
            .split(',')
            .map(|c| match c.trim() {
                "a" => Ok(ErrorCase::A),
                "b" => Ok(ErrorCase::B),
                "c" => Ok(ErrorCase::C),
                other => Err(CliError::usage(format!("--case: '{other}'"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let study = match args
            .study
            .as_deref()
            .or(file.study.as_deref())
            .unwrap_or("none")
        {
            "none" => Study::None,
            "1" => Study::S1,
            "2" => Study::S2,
            "3" => Study::S3,
            other => return Err(CliError::usage(format!("--study: '{other}'"))),
        };
        let n = args.n.or(file.n).unwrap_or(1000);
        let ks = args
            .k
            .as_deref()
            .or(file.k.as_deref())
            .unwrap_or("500")
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("--k: '{t}' is not an index")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = args.alpha.or(file.alpha).unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::usage(format!(
                "--alpha: {alpha} outside the open interval (0, 1)"
            )));
        }
        let methods = args
            .method
            .as_deref()
            .or(file.method.as_deref())
            .unwrap_or("complete")
            .split(',')
            .map(|m| match m.trim() {
                "complete" => Ok(Method::Complete),
                "complete-case" => Ok(Method::CompleteCase),
                "weighted" => Ok(Method::Weighted),
                "imputed" => Ok(Method::Imputed),
                other => Err(CliError::usage(format!("--method: '{other}'"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let replications = args.reps.or(file.reps).unwrap_or(1000);
        if replications == 0 {
            return Err(CliError::usage("--reps must be at least 1"));
        }
        let pi_mode = match args
            .pi_mode
            .as_deref()
            .or(file.pi_mode.as_deref())
            .unwrap_or("estimate")
        {
            "estimate" => PiMode::Estimate,
            "known" => PiMode::Known,
            other => return Err(CliError::usage(format!("--pi-mode: '{other}'"))),
        };
        let format = match args
            .format
            .as_deref()
            .or(file.format.as_deref())
            .unwrap_or("json")
        {
            "json" => OutputFormat::Json,
            "csv" => OutputFormat::Csv,
            other => return Err(CliError::usage(format!("--format: '{other}'"))),
        };
        Ok(SimulateConfig {
            model,
            cases,
            study,
            n,
            ks,
            alpha,
            methods,
            replications,
            base_seed: args.seed.or(file.seed).unwrap_or(42),
            pi_mode,
            compute_lcr: !(args.no_lcr || file.no_lcr.unwrap_or(false)),
            output: args.output.clone().or(file.output),
            format,
        })
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &method in &self.methods {
            for &case in &self.cases {
                for &k in &self.ks {
                    out.push(Scenario {
                        model: self.model,
                        error_case: case,
                        study: self.study,
                        n: self.n,
                        k,
                        alpha: self.alpha,
                        method,
                        replications: self.replications,
                        base_seed: self.base_seed,
                        pi_mode: self.pi_mode,
                        compute_lcr: self.compute_lcr,
                        noiseless: false,
                    });
                }
            }
        }
        out
    }
}
