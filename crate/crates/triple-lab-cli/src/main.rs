//! Command-line harness wiring factor specs, map specs, seeds, and report
//! output for CI runs and desk experiments.
//!
//! Exit status contract: 0 when every verdict passes, 1 on a property
//! failure, 2 on configuration errors (unreadable files, malformed JSON,
//! invalid shapes). Reports go to standard output; identical configurations
//! and seeds produce byte-identical JSON reports.

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use triple_lab::configurations::relative_position;
use triple_lab::factors::{element_to_json, verify_jbstar_axioms, AtomicTriple};
use triple_lab::kernel::Tolerance;
use triple_lab::preserver::{
    check_collinearity_preservation, check_isometry_on_minimals,
    check_orthogonality_preservation, check_ttp_preservation, classify_real_linear_isometry,
    extend_to_socle, extend_to_socle_real, socle_samples, spec_map, verify_remark_counterexamples,
    MapSpec, PreserverError, PreserverReport,
};
use triple_lab::tripotents::{sample_minimal_tripotent, sample_minimal_tripotent_with};
use triple_lab::ttp::{gap_distance, gap_formula, ttp};

const SCHEMA: &str = "triple-lab/1";

fn default_tol() -> f64 {
    std::env::var("TRIPLE_LAB_TOL")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(1e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Property {
    Ttp,
    Orthogonality,
    Isometry,
    Collinearity,
    Classify,
    All,
}

#[derive(Parser)]
#[command(name = "triple-lab")]
#[command(about = "Numerical toolkit for finite-dimensional JB*-triples")]
#[command(version)]
struct Cli {
    /// Number of randomized trials.
    #[arg(long, global = true, default_value_t = 500)]
    trials: u64,

    /// Seed for all randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Base numerical tolerance (TRIPLE_LAB_TOL overrides the default).
    #[arg(long, global = true, default_value_t = default_tol())]
    tol: f64,

    /// Report format; JSON is the stable contract.
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the JB*-triple axioms on random samples.
    VerifyAxioms {
        #[arg(long)]
        factor_spec: PathBuf,
    },
    /// Sample a minimal tripotent and print it with its Peirce data.
    SampleMinimal {
        #[arg(long)]
        factor_spec: PathBuf,
        /// Summand to sample in.
        #[arg(long, default_value_t = 0)]
        summand: usize,
    },
    /// Compare the closed gap formula against the norm distance.
    GapVsFormula {
        #[arg(long)]
        factor_spec: PathBuf,
        /// Largest allowed |formula - distance|.
        #[arg(long, default_value_t = 1e-7)]
        threshold: f64,
    },
    /// Pairwise TTP table of sampled minimal tripotents.
    TtpTable {
        #[arg(long)]
        factor_spec: PathBuf,
        /// Number of sampled minimal tripotents.
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Optional CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Classify relative positions of sampled minimal pairs.
    RelativePosition {
        #[arg(long)]
        factor_spec: PathBuf,
    },
    /// Check a candidate preserver property by property name.
    PreserverCheck {
        #[arg(long)]
        factor_spec: PathBuf,
        #[arg(long)]
        map_spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Property::All)]
        property: Property,
    },
    /// Reproduce the two-by-two counterexample values exactly.
    Remark35,
    /// Fit a linear extension of a map from sampled minimal tripotents.
    SocleExtend {
        #[arg(long)]
        factor_spec: PathBuf,
        #[arg(long)]
        map_spec: PathBuf,
    },
}

/// Configuration-level failure: exit status 2.
struct ConfigError(String);

impl From<String> for ConfigError {
    fn from(message: String) -> Self {
        ConfigError(message)
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> ConfigError {
    ConfigError(e.to_string())
}

fn load_factor_spec(path: &Path) -> Result<AtomicTriple, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let triple: AtomicTriple = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("invalid factor spec {}: {e}", path.display())))?;
    Ok(triple)
}

fn load_map_spec(path: &Path) -> Result<MapSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let spec: MapSpec = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("invalid map spec {}: {e}", path.display())))?;
    Ok(spec)
}

struct Output {
    report: serde_json::Value,
    pass: bool,
}

fn complex_pair(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn run(cli: &Cli) -> Result<Output, ConfigError> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(ConfigError(format!(
            "tolerance must be positive, got {}",
            cli.tol
        )));
    }
    if cli.trials == 0 {
        return Err(ConfigError("trials must be at least 1".into()));
    }
    let tol = Tolerance::uniform(cli.tol).map_err(config_err)?;

    match &cli.command {
        Command::VerifyAxioms { factor_spec } => {
            let t = load_factor_spec(factor_spec)?;
            let report = verify_jbstar_axioms(&t, cli.trials, cli.seed);
            let pass = report.pass;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "verify-axioms",
                    "seed": cli.seed,
                    "trials": cli.trials,
                    "tol": cli.tol,
                    "factor": t,
                    "axioms": report,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::SampleMinimal {
            factor_spec,
            summand,
        } => {
            let t = load_factor_spec(factor_spec)?;
            let e = sample_minimal_tripotent(&t, *summand, cli.seed).map_err(config_err)?;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "sample-minimal",
                    "seed": cli.seed,
                    "summand": summand,
                    "factor": t,
                    "element": element_to_json(&t, e.element()),
                    "peirce_dims": [e.peirce().dim(0), e.peirce().dim(1), e.peirce().dim(2)],
                    "minimal": e.is_minimal(),
                    "complete": e.is_complete(),
                    "rank": e.rank(),
                    "verdict": "pass",
                }),
                pass: true,
            })
        }
        Command::GapVsFormula {
            factor_spec,
            threshold,
        } => {
            let t = load_factor_spec(factor_spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut worst = 0.0_f64;
            let mut per_summand = Vec::new();
            for s in 0..t.summands().len() {
                let mut local = 0.0_f64;
                for _ in 0..cli.trials {
                    let e = sample_minimal_tripotent_with(&t, s, &mut rng).map_err(config_err)?;
                    let v = sample_minimal_tripotent_with(&t, s, &mut rng).map_err(config_err)?;
                    let d = gap_distance(&t, e.element(), v.element()).map_err(config_err)?;
                    let f = gap_formula(&t, &e, &v, &tol).map_err(config_err)?;
                    local = local.max((d - f).abs());
                }
                per_summand.push(local);
                worst = worst.max(local);
            }
            let pass = worst <= *threshold;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "gap-vs-formula",
                    "seed": cli.seed,
                    "trials": cli.trials,
                    "tol": cli.tol,
                    "threshold": threshold,
                    "factor": t,
                    "max_disagreement": worst,
                    "per_summand": per_summand,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::TtpTable {
            factor_spec,
            count,
            csv,
        } => {
            let t = load_factor_spec(factor_spec)?;
            if *count == 0 {
                return Err(ConfigError("count must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let k = t.summands().len();
            let mut minimals = Vec::new();
            for i in 0..*count {
                let e = sample_minimal_tripotent_with(&t, i % k, &mut rng).map_err(config_err)?;
                minimals.push(e);
            }
            let mut table = Vec::new();
            let mut symmetry_defect = 0.0_f64;
            for e in &minimals {
                let mut row = Vec::new();
                for v in &minimals {
                    let value = ttp(&t, e, v).map_err(config_err)?.0;
                    let back = ttp(&t, v, e).map_err(config_err)?.0;
                    symmetry_defect = symmetry_defect.max((value - back.conj()).norm());
                    row.push(complex_pair(value));
                }
                table.push(serde_json::Value::Array(row));
            }
            if let Some(path) = csv {
                let mut text = String::from("i,j,re,im\n");
                for (i, e) in minimals.iter().enumerate() {
                    for (j, v) in minimals.iter().enumerate() {
                        let z = ttp(&t, e, v).map_err(config_err)?.0;
                        text.push_str(&format!("{i},{j},{:.17e},{:.17e}\n", z.re, z.im));
                    }
                }
                std::fs::write(path, text)
                    .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?;
            }
            let pass = symmetry_defect <= 1e-9;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "ttp-table",
                    "seed": cli.seed,
                    "count": count,
                    "factor": t,
                    "elements": minimals.iter().map(|e| element_to_json(&t, e.element())).collect::<Vec<_>>(),
                    "table": table,
                    "symmetry_defect": symmetry_defect,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::RelativePosition { factor_spec } => {
            let t = load_factor_spec(factor_spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let mut counts = std::collections::BTreeMap::new();
            let mut max_residual = 0.0_f64;
            let mut max_defect = 0.0_f64;
            let k = t.summands().len();
            for trial in 0..cli.trials {
                let s = (trial as usize) % k;
                let e = sample_minimal_tripotent_with(&t, s, &mut rng).map_err(config_err)?;
                let v = sample_minimal_tripotent_with(&t, s, &mut rng).map_err(config_err)?;
                let pos = relative_position(&t, &e, &v, &tol).map_err(config_err)?;
                *counts.entry(pos.kind_name().to_string()).or_insert(0u64) += 1;
                max_residual = max_residual.max(pos.residual(e.element(), v.element()));
                max_defect = max_defect.max(pos.constraint_defect());
            }
            let pass = max_residual <= 1e-7 && max_defect <= 1e-8;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "relative-position",
                    "seed": cli.seed,
                    "trials": cli.trials,
                    "factor": t,
                    "kinds": counts,
                    "max_reconstruction_residual": max_residual,
                    "max_constraint_defect": max_defect,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::PreserverCheck {
            factor_spec,
            map_spec,
            property,
        } => {
            let t_in = load_factor_spec(factor_spec)?;
            let spec = load_map_spec(map_spec)?;
            let t_out = spec.output_triple(&t_in).map_err(config_err)?;
            let map = spec_map(&spec, &t_in, &t_out);
            let mut reports: Vec<PreserverReport> = Vec::new();
            let mut tags = None;
            let wanted = |p: Property| *property == p || *property == Property::All;
            let absorb = |result: Result<PreserverReport, PreserverError>|
             -> Result<PreserverReport, ConfigError> {
                match result {
                    Ok(r) => Ok(r),
                    Err(PreserverError::NotTripotentImage { trial, detail }) => {
                        // JSON has no infinity; carry the largest float.
                        Ok(PreserverReport {
                            property: "minimal-tripotent-image".into(),
                            trials: trial + 1,
                            max_violation: f64::MAX,
                            verdict: triple_lab::preserver::Verdict::Fail,
                            witnesses: vec![json!({ "trial": trial, "detail": detail })],
                        })
                    }
                    Err(other) => Err(config_err(other)),
                }
            };
            if wanted(Property::Ttp) {
                reports.push(absorb(check_ttp_preservation(
                    &map, &t_in, &t_out, cli.trials, cli.seed, 1e-8,
                ))?);
            }
            if wanted(Property::Orthogonality) {
                reports.push(absorb(check_orthogonality_preservation(
                    &map, &t_in, &t_out, cli.trials, cli.seed, 1e-8,
                ))?);
            }
            if wanted(Property::Isometry) {
                reports.push(absorb(check_isometry_on_minimals(
                    &map, &t_in, &t_out, cli.trials, cli.seed, 1e-7,
                ))?);
            }
            if wanted(Property::Collinearity) {
                reports.push(absorb(check_collinearity_preservation(
                    &map, &t_in, &t_out, cli.trials, cli.seed, 1e-7,
                ))?);
            }
            if wanted(Property::Classify) {
                match classify_real_linear_isometry(
                    &map,
                    &t_in,
                    &t_out,
                    cli.trials.min(50),
                    cli.seed,
                ) {
                    Ok(t) => tags = Some(t),
                    Err(PreserverError::InconsistentTag { summand }) => {
                        return Err(ConfigError(format!(
                            "inconsistent linearity tag in summand {summand}"
                        )))
                    }
                    Err(e) => return Err(config_err(e)),
                }
            }
            let pass = reports.iter().all(|r| r.passed());
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "preserver-check",
                    "seed": cli.seed,
                    "trials": cli.trials,
                    "tol": cli.tol,
                    "factor": t_in,
                    "target": t_out,
                    "reports": reports,
                    "linearity": tags,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::Remark35 => {
            let report = verify_remark_counterexamples().map_err(config_err)?;
            let pass = report.pass;
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "remark35",
                    "values": report,
                    "verdict": if pass { "pass" } else { "fail" },
                }),
                pass,
            })
        }
        Command::SocleExtend {
            factor_spec,
            map_spec,
        } => {
            let t_in = load_factor_spec(factor_spec)?;
            let spec = load_map_spec(map_spec)?;
            let t_out = spec.output_triple(&t_in).map_err(config_err)?;
            let map = spec_map(&spec, &t_in, &t_out);
            let samples = socle_samples(&map, &t_in, 4, cli.seed).map_err(config_err)?;
            let complex_fit = extend_to_socle(&t_in, &t_out, &samples, 1e-8);
            let real_fit = extend_to_socle_real(&t_in, &t_out, &samples, 1e-8);
            let (complex_json, complex_ok) = match &complex_fit {
                Ok(ext) => (
                    json!({
                        "status": "consistent",
                        "max_residual": ext.max_residual,
                        "triple_product_defect": ext.triple_product_defect,
                    }),
                    ext.triple_product_defect <= 1e-8,
                ),
                Err(PreserverError::InconsistentSamples { residual }) => (
                    json!({ "status": "inconsistent", "max_residual": residual }),
                    false,
                ),
                Err(e) => return Err(config_err(e)),
            };
            let real_json = match &real_fit {
                Ok(ext) => json!({ "status": "consistent", "max_residual": ext.max_residual }),
                Err(PreserverError::InconsistentSamples { residual }) => {
                    json!({ "status": "inconsistent", "max_residual": residual })
                }
                Err(e) => return Err(config_err(e)),
            };
            Ok(Output {
                report: json!({
                    "schema": SCHEMA,
                    "command": "socle-extend",
                    "seed": cli.seed,
                    "factor": t_in,
                    "target": t_out,
                    "samples": samples.len(),
                    "complex_fit": complex_json,
                    "real_fit": real_json,
                    "verdict": if complex_ok { "pass" } else { "fail" },
                }),
                pass: complex_ok,
            })
        }
    }
}

fn render_text(value: &serde_json::Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                match v {
                    serde_json::Value::Object(_) | serde_json::Value::Array(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_text(v, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{k}: {v}\n")),
                }
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                match v {
                    serde_json::Value::Object(_) | serde_json::Value::Array(_) => {
                        out.push_str(&format!("{pad}-\n"));
                        render_text(v, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}- {v}\n")),
                }
            }
        }
        _ => out.push_str(&format!("{pad}{value}\n")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            match cli.format {
                ReportFormat::Json => {
                    let text = serde_json::to_string_pretty(&output.report)
                        .expect("reports are valid JSON");
                    println!("{text}");
                }
                ReportFormat::Text => {
                    let mut text = String::new();
                    render_text(&output.report, 0, &mut text);
                    print!("{text}");
                }
            }
            if output.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(ConfigError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
