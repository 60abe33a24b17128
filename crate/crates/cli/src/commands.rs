use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use weakdep::adversarial::{generate_sequence, AdversarialSequence, BaseFile, Certificate, GenerateOptions};
use weakdep::functional::{
    check_model_membership, evaluate_phi, riesz_alpha, solve_g, FunctionalFile, FunctionalSpec, GridFunction,
    MembershipReport,
};
use weakdep::law::{DiscreteLaw, LawFile};
use weakdep::simulate::{run, CoverageReport, ExperimentPlan, LawCase, Method, ReportFile};

use crate::error::CliError;
use crate::plan::PlanFile;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

/// Reads a law file and rejects it on any invariant violation.
fn load_law(path: &Path) -> Result<DiscreteLaw<f64>, CliError> {
    let file: LawFile = parse(path, &read(path)?)?;
    let law = file.to_law_unchecked::<f64>()?;
    let violations = law.validate();
    if violations.is_empty() {
        return Ok(law);
    }
    let listing: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    Err(CliError::Validation { message: listing.join("; "), report: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateOutput {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks a law file; a non-empty listing is a validation failure.
pub fn cmd_validate(law: &Path) -> Result<ValidateOutput, CliError> {
    let file: LawFile = parse(law, &read(law)?)?;
    let parsed = file.to_law_unchecked::<f64>()?;
    let violations: Vec<String> = parsed.validate().iter().map(|v| v.to_string()).collect();
    let out = ValidateOutput { valid: violations.is_empty(), violations };
    if out.valid {
        Ok(out)
    } else {
        Err(CliError::Validation { message: out.violations.join("; "), report: Some(json(&out)) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutput {
    pub functional: String,
    pub phi: f64,
    /// `g[m][j]`.
    pub g: Vec<Vec<f64>>,
    /// `alpha[m][j]`.
    pub alpha: Vec<Vec<f64>>,
    pub membership: MembershipReport,
}

fn by_stratum(f: &GridFunction<f64>) -> Vec<Vec<f64>> {
    (0..f.values.cols()).map(|m| f.column(m)).collect()
}

/// `φ(P)` for a law and functional, with per-stratum residuals.
pub fn cmd_solve(law: &Path, spec: &Path, tol: f64) -> Result<SolveOutput, CliError> {
    let law = load_law(law)?;
    let file: FunctionalFile = parse(spec, &read(spec)?)?;
    let spec: FunctionalSpec<f64> = file.to_spec()?;
    spec.check_support(law.support())?;
    let membership = check_model_membership(&law, &spec, tol);
    if !membership.in_model {
        let message = membership.detail.clone().unwrap_or_else(|| "membership check failed".into());
        return Err(CliError::Membership { message, report: Some(json(&membership)) });
    }
    let g = solve_g(&law, tol)?;
    let alpha = riesz_alpha(&law, &spec)?;
    let phi = evaluate_phi(&law, &spec, tol)?;
    Ok(SolveOutput { functional: spec.name().into(), phi, g: by_stratum(&g), alpha: by_stratum(&alpha), membership })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceFile {
    pub target_zeta: f64,
    pub base: BaseFile,
    pub certificates: Vec<Certificate>,
    pub laws: Vec<LawFile>,
}

impl SequenceFile {
    fn new(seq: &AdversarialSequence<f64>) -> Self {
        SequenceFile {
            target_zeta: seq.target_zeta,
            base: BaseFile::from(&seq.base),
            certificates: seq.certificates(),
            laws: seq.law_files(),
        }
    }
}

fn generate_options(tol: f64) -> GenerateOptions<f64> {
    GenerateOptions { cert_tol: tol, solve_tol: tol, ..Default::default() }
}

fn load_sequence(base: BaseFile, zeta: f64, tv_targets: &[f64], tol: f64) -> Result<AdversarialSequence<f64>, CliError> {
    let base = base.to_base().map_err(|e| match e {
        weakdep::Error::Parse(_) => CliError::Input(e.to_string()),
        other => CliError::Generation(other.to_string()),
    })?;
    generate_sequence(&base, zeta, tv_targets, &generate_options(tol)).map_err(|e| match e {
        weakdep::Error::InvalidInput(_) => CliError::Input(e.to_string()),
        other => CliError::Generation(other.to_string()),
    })
}

/// Generates the sequence and, when `out` is given, writes `law_t{k}.json`,
/// `functional.json`, `certificates.json` and `sequence.json` there.
pub fn cmd_adversarial(
    base: &Path,
    zeta: f64,
    tv_targets: &[f64],
    tol: f64,
    out: Option<&Path>,
) -> Result<SequenceFile, CliError> {
    let file: BaseFile = parse(base, &read(base)?)?;
    let seq = load_sequence(file, zeta, tv_targets, tol)?;
    let record = SequenceFile::new(&seq);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for (k, law) in record.laws.iter().enumerate() {
            write(&dir.join(format!("law_t{k}.json")), &law.to_json())?;
        }
        write(&dir.join("functional.json"), &json(&record.base.functional))?;
        write(&dir.join("certificates.json"), &json(&record.certificates))?;
        write(&dir.join("sequence.json"), &json(&record))?;
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOutput {
    pub report: CoverageReport,
    /// Certificates of the generated laws for sweep plans.
    pub certificates: Option<Vec<Certificate>>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CoverageFile {
    report: ReportFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificates: Option<Vec<Certificate>>,
}

/// Options of `cmd_coverage` that come from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageOptions {
    pub seed: u64,
    pub level: f64,
    pub tol: f64,
    pub grid: usize,
    /// Replaces the plan's method list.
    pub methods: Option<Vec<String>>,
}

fn build_plan(file: &PlanFile, opts: &CoverageOptions) -> Result<(ExperimentPlan, Option<Vec<Certificate>>), CliError> {
    let range = file.range().map_err(CliError::Input)?;
    let names = opts.methods.as_ref().unwrap_or(&file.methods);
    let methods = names.iter().map(|m| Method::parse(m, opts.grid)).collect::<Result<Vec<_>, _>>()?;
    let (laws, functional, certificates) = match (&file.laws, &file.sweep) {
        (Some(entries), None) => {
            let spec_file =
                file.functional.as_ref().ok_or_else(|| CliError::Input("a plan with `laws` needs `functional`".into()))?;
            let functional: FunctionalSpec<f64> = spec_file.to_spec()?;
            let mut laws = Vec::with_capacity(entries.len());
            for e in entries {
                let law = e.law.to_law::<f64>()?;
                functional.check_support(law.support())?;
                let membership = check_model_membership(&law, &functional, opts.tol);
                if !membership.in_model {
                    let detail = membership.detail.unwrap_or_default();
                    return Err(CliError::membership(format!("law {}: {detail}", e.label)));
                }
                let true_phi = evaluate_phi(&law, &functional, opts.tol)?;
                laws.push(LawCase { label: e.label.clone(), law, true_phi });
            }
            (laws, functional, None)
        }
        (None, Some(sweep)) => {
            if file.functional.is_some() {
                return Err(CliError::Input("a sweep plan takes its functional from the base".into()));
            }
            let seq = load_sequence(sweep.base.clone(), sweep.zeta, &sweep.tv_targets, opts.tol)?;
            let laws = seq
                .steps
                .iter()
                .enumerate()
                .map(|(k, st)| LawCase { label: format!("step{k}"), law: st.law.clone(), true_phi: st.phi_verified })
                .collect();
            (laws, seq.base.functional().clone(), Some(seq.certificates()))
        }
        _ => return Err(CliError::Input("a plan needs exactly one of `laws` and `sweep`".into())),
    };
    let plan = ExperimentPlan {
        laws,
        functional,
        methods,
        n: file.n,
        reps: file.reps,
        level: opts.level,
        seed: opts.seed,
        range,
    };
    plan.validate().map_err(|e| CliError::validation(e.to_string()))?;
    Ok((plan, certificates))
}

/// Runs a coverage plan. With `out`, writes the CSV there and the full
/// report (per-replication diameters, certificates) next to it as JSON.
pub fn cmd_coverage(plan: &Path, opts: &CoverageOptions, out: Option<&Path>) -> Result<CoverageOutput, CliError> {
    let file: PlanFile = parse(plan, &read(plan)?)?;
    let (plan, certificates) = build_plan(&file, opts)?;
    let report = run(&plan).map_err(|e| CliError::validation(e.to_string()))?;
    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    let csv = String::from_utf8(bytes).expect("csv is utf-8");
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write(path, &csv)?;
        let record = CoverageFile { report: report.to_file(), certificates: certificates.clone() };
        write(&json_sibling(path), &json(&record))?;
    }
    Ok(CoverageOutput { report, certificates, csv })
}

/// `report.csv` → `report.json`.
pub fn json_sibling(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn pretty_coverage(report: &CoverageReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<15} {:>6} {:>6} {:>9} {:>19} {:>10} {:>8} {:>8}",
        "law", "method", "n", "reps", "coverage", "wilson 95%", "diam_mean", "full", "error"
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{:<12} {:<15} {:>6} {:>6} {:>9.4} {:>19} {:>10.4} {:>8.3} {:>8.3}",
            c.label,
            c.method,
            c.n,
            c.reps,
            c.coverage,
            format!("[{:.4}, {:.4}]", c.wilson_lo, c.wilson_hi),
            c.diam_mean,
            c.frac_fullrange,
            c.frac_error
        );
    }
    s
}

pub fn pretty_certificates(certs: &[Certificate]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>9} {:>12} {:>12} {:>14} {:>11} {:>8} {:>10}",
        "step", "tv_target", "eta_w", "gamma", "phi", "tv", "in_model", "g_resid"
    );
    for c in certs {
        let _ = writeln!(
            s,
            "{:>4} {:>9} {:>12.4e} {:>12.6} {:>14.10} {:>11.3e} {:>8} {:>10.2e}",
            c.step, c.tv_target, c.eta_w, c.gamma, c.phi_verified, c.tv_to_base, c.in_model, c.g_residual
        );
    }
    s
}

pub fn pretty_solve(out: &SolveOutput) -> String {
    let mut s = format!("{} = {}\n", out.functional, out.phi);
    for (m, (g, r)) in out.g.iter().zip(&out.membership.g_residuals).enumerate() {
        let _ = writeln!(s, "stratum {m}: g = {g:?}, residual {r:.2e}");
    }
    s
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    json(value)
}
