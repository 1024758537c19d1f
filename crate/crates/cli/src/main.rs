use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use simjudge::audit::{audit_solution, evaluator_for, Declarations, ResidualRequest, SolutionField, SolutionSeries};
use simjudge::certify::{
    execute, residual_context_for, run_pipeline, verify_certificate_bytes, CertOutcome, PipelineConfig,
};
use simjudge::gates::{gate_classification, judge_pre, plan_budget, Limits, Outcome};
use simjudge::opgraph::Plan;
use simjudge::probes::{
    builtin_problem, probe_continuation, probe_ensemble, probe_lyapunov, ContinuationSettings, EnsembleSettings,
    LyapunovSettings, ProbeError,
};
use simjudge::specmd::{extract_six_tuple, parse_spec, validate_spec, SpecDocument};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(name = "simjudge", version, about = "Gates, audits and certificates for simulation specs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem document in the structured markdown format.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Solver plan (JSON). Repeat to supply redesign amendments in order.
    #[arg(long)]
    plan: Vec<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Limits file (JSON), e.g. `{"budget_limit": 1e9}`.
    #[arg(long)]
    limits: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeName {
    Continuation,
    Lyapunov,
    Ensemble,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check the document validity rules.
    Validate(Common),
    /// Run the pre-execution and run gates.
    Judge(Common),
    /// Error budget and work estimate for a plan.
    Plan(Common),
    /// Run the built-in solver; `--out` names the output directory.
    Solve(Common),
    /// Audit a solution (`.sfd` frame or `.series` manifest).
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run bifurcation probes on a built-in parametric problem.
    Probe {
        #[command(flatten)]
        common: Common,
        /// pitchfork, resonance or heat-interior.
        #[arg(long)]
        problem: String,
        #[arg(long, allow_negative_numbers = true)]
        theta: Option<f64>,
        /// Probes to run; all three by default.
        #[arg(long = "probe", value_enum)]
        probes: Vec<ProbeName>,
    },
    /// Full pipeline: judge, solve, audit, probe and emit a sealed certificate.
    Certify(Common),
    /// Check a certificate file's seal and canonical form.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
    },
}

type Fallible<T> = Result<T, String>;

fn read(path: &Path) -> Fallible<Vec<u8>> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn spec_doc(c: &Common) -> Fallible<(Vec<u8>, SpecDocument)> {
    let path = c.spec.as_ref().ok_or("--spec is required")?;
    let bytes = read(path)?;
    let doc = parse_spec(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((bytes, doc))
}

fn plans(c: &Common) -> Fallible<Vec<Plan>> {
    c.plan
        .iter()
        .map(|p| {
            let text = String::from_utf8(read(p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            Plan::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

fn limits(c: &Common) -> Fallible<Limits> {
    match &c.limits {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(Limits::default()),
    }
}

fn emit_bytes(out: Option<&Path>, bytes: &[u8]) -> Fallible<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(bytes).and_then(|_| out.write_all(b"\n")).and_then(|_| out.flush()) {
                // A closed reader (e.g. `| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.to_string()),
                _ => Ok(()),
            }
        }
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Fallible<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    emit_bytes(out, text.as_bytes())
}

fn load_series(path: &Path) -> Fallible<SolutionSeries> {
    let r = if path.extension().is_some_and(|e| e == "series") {
        SolutionSeries::read_manifest(path)
    } else {
        SolutionField::read_sfd1(path).map(SolutionSeries::single)
    };
    r.map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Fallible<u8> {
    match cli.command {
        Command::Validate(c) => {
            let (_, doc) = spec_doc(&c)?;
            let report = validate_spec(&doc);
            emit(c.out.as_deref(), &report)?;
            Ok(if report.valid { EXIT_OK } else { EXIT_REJECTED })
        }
        Command::Judge(c) => {
            let (_, doc) = spec_doc(&c)?;
            let v = judge_pre(&doc, &plans(&c)?, &limits(&c)?);
            emit(c.out.as_deref(), &v)?;
            Ok(match v.outcome {
                Outcome::Accept if v.has_flags() => EXIT_FLAGGED,
                Outcome::Accept => EXIT_OK,
                _ => EXIT_REJECTED,
            })
        }
        Command::Plan(c) => {
            let (_, doc) = spec_doc(&c)?;
            let spec = extract_six_tuple(&doc).map_err(|e| e.to_string())?;
            let plan = plans(&c)?.into_iter().next().ok_or("--plan is required")?;
            let (_, budget, cost) = plan_budget(&spec, &plan)?;
            emit(c.out.as_deref(), &serde_json::json!({ "budget": budget, "estimated_work": cost }))?;
            Ok(EXIT_OK)
        }
        Command::Solve(c) => {
            let (_, doc) = spec_doc(&c)?;
            let spec = extract_six_tuple(&doc).map_err(|e| e.to_string())?;
            let plan = plans(&c)?.into_iter().next();
            let (template, _) = gate_classification(&spec);
            let exec = execute(&spec, &template.id, plan.as_ref()).map_err(|e| e.to_string())?;
            let dir = c.out.ok_or("--out <dir> is required for solve")?;
            std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let manifest = exec.series.write_manifest(&dir, "solution").map_err(|e| e.to_string())?;
            let run = serde_json::json!({
                "archetype": exec.archetype,
                "solved": exec.solved,
                "notes": exec.notes,
                "series": manifest,
            });
            emit(Some(&dir.join("run.json")), &run)?;
            emit(None, &run)?;
            Ok(EXIT_OK)
        }
        Command::Audit { common: c, solution } => {
            let (_, doc) = spec_doc(&c)?;
            let spec = extract_six_tuple(&doc).map_err(|e| e.to_string())?;
            let series = load_series(&solution)?;
            let decl = Declarations::from_spec(&doc).map_err(|e| e.to_string())?;
            let (template, _) = gate_classification(&spec);
            let plan = plans(&c)?.into_iter().next();
            let ctx = residual_context_for(&spec, &template.id, plan.as_ref(), &series.last().shape)
                .map_err(|e| e.to_string())?;
            let evaluator = ctx.map(|ctx| evaluator_for(&template.id, &ctx)).transpose().map_err(|e| e.to_string())?;
            let eps = spec.tolerance.epsilon().quantity.si_value();
            let request = evaluator.as_deref().map(|e| ResidualRequest { evaluator: e, tolerance: eps });
            let report = audit_solution(&series, &decl, request).map_err(|e| e.to_string())?;
            emit(c.out.as_deref(), &report)?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_FLAGGED })
        }
        Command::Probe { common: c, problem, theta, probes } => {
            let p = builtin_problem(&problem, theta).map_err(|e| e.to_string())?;
            let selected = if probes.is_empty() {
                vec![ProbeName::Continuation, ProbeName::Lyapunov, ProbeName::Ensemble]
            } else {
                probes
            };
            let mut reports = Vec::new();
            for name in selected {
                let r = match name {
                    ProbeName::Continuation => probe_continuation(p.as_ref(), ContinuationSettings::default()),
                    ProbeName::Lyapunov => match probe_lyapunov(p.as_ref(), LyapunovSettings::default()) {
                        Err(ProbeError::NoLinearization) => continue,
                        r => r,
                    },
                    ProbeName::Ensemble => {
                        probe_ensemble(p.as_ref(), EnsembleSettings { seed: c.seed, ..EnsembleSettings::default() })
                    }
                };
                reports.push(r.map_err(|e| e.to_string())?);
            }
            emit(c.out.as_deref(), &reports)?;
            Ok(if reports.iter().any(|r| r.flagged) { EXIT_FLAGGED } else { EXIT_OK })
        }
        Command::Certify(c) => {
            let (bytes, _) = spec_doc(&c)?;
            let cfg = PipelineConfig { limits: limits(&c)?, seed: c.seed, ..PipelineConfig::default() };
            let run = run_pipeline(&bytes, &plans(&c)?, &cfg).map_err(|e| e.to_string())?;
            emit_bytes(c.out.as_deref(), &run.certificate.to_bytes())?;
            Ok(match run.certificate.outcome {
                CertOutcome::Certified => EXIT_OK,
                CertOutcome::Rejected => EXIT_REJECTED,
                CertOutcome::Flagged => EXIT_FLAGGED,
            })
        }
        Command::Verify { certificate } => {
            let ok = verify_certificate_bytes(&read(&certificate)?);
            emit(None, &serde_json::json!({ "valid": ok }))?;
            Ok(if ok { EXIT_OK } else { EXIT_REJECTED })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
