//! Subcommand bodies. Each returns an exit code or a classified failure.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use linf_core::characterization::{certify, nodal_set, CertificationReport, Verdict};
use linf_core::grid::{write_field_csv, ScalarField};
use linf_core::lp_energy::DualSummary;
use linf_core::minimizer::{continuation_solve, ContinuationReport};
use linf_core::oracle_1d::solve_exact;
use linf_core::pde_solver::{solve_dual, DualProblem};
use linf_core::supremand::{certify_convexity, check_assumptions};

use crate::config::{self, Built};
use crate::exit;
use crate::Common;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<u8, Failure>;

trait Classify<T> {
    fn or_exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

struct Session {
    built: Built,
    out: PathBuf,
    emit_fields: bool,
}

fn open(common: &Common) -> Result<Session, Failure> {
    let cfg = config::load(&common.config).or_exit(exit::CONFIG)?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    let built = cfg
        .build(base, common.ladder.as_deref(), common.seed)
        .or_exit(exit::CONFIG)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .or_exit(exit::CONFIG)?;
    let emit_fields = common.emit_fields || cfg.output.emit_fields;
    Ok(Session {
        built,
        out,
        emit_fields,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).or_exit(exit::SOLVER)?;
    text.push('\n');
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(exit::SOLVER)
}

fn write_field(path: &Path, field: &ScalarField) -> Result<(), Failure> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .or_exit(exit::SOLVER)?;
    write_field_csv(field, file)
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(exit::SOLVER)
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => exit::OK,
        Verdict::Fail => exit::FAIL,
        Verdict::Inconclusive => exit::INCONCLUSIVE,
    }
}

fn l1_normalized(f: &ScalarField) -> ScalarField {
    let n = f.l1_norm();
    if n > 0.0 {
        f.scaled(1.0 / n)
    } else {
        f.clone()
    }
}

#[derive(Serialize)]
struct ProblemSummary {
    supremand: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
    ladder: Vec<f64>,
}

fn problem_summary(s: &Session) -> ProblemSummary {
    let g = s.built.problem.grid();
    ProblemSummary {
        supremand: s.built.problem.spec().name().to_string(),
        lower: g.lower().to_vec(),
        upper: g.upper().to_vec(),
        nodes: g.nodes_per_axis().to_vec(),
        ladder: s.built.schedule.ladder.clone(),
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    problem: ProblemSummary,
    continuation: &'a ContinuationReport,
    duals: Option<DualSummary>,
    error: Option<String>,
}

#[derive(Serialize)]
struct StageTiming {
    p: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct Timing {
    total_seconds: f64,
    stages: Vec<StageTiming>,
}

fn timing(rep: &ContinuationReport) -> Timing {
    Timing {
        total_seconds: rep.elapsed.as_secs_f64(),
        stages: rep
            .stages
            .iter()
            .map(|s| StageTiming {
                p: s.p,
                seconds: s.elapsed.as_secs_f64(),
            })
            .collect(),
    }
}

fn stage_file(p: f64) -> String {
    format!("u_p{p}.csv")
}

fn emit_stage_fields(s: &Session, rep: &ContinuationReport) -> Result<(), Failure> {
    if !s.emit_fields {
        return Ok(());
    }
    let dir = s.out.join("fields");
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_exit(exit::SOLVER)?;
    for (st, u) in rep.stages.iter().zip(&rep.stage_fields) {
        write_field(&dir.join(stage_file(st.p)), u)?;
    }
    Ok(())
}

pub fn solve(common: &Common) -> Outcome {
    let s = open(common)?;
    let pb = s.built.problem.clone();
    let (rep, error) = match continuation_solve(pb.clone(), &s.built.schedule, None) {
        Ok(r) => (r, None),
        Err(e) => {
            let msg = e.to_string();
            (*e.partial, Some(msg))
        }
    };
    let duals = rep
        .duals
        .as_ref()
        .map(|d| d.summary(nodal_set(&d.f).count()));
    write_json(
        &s.out.join("report.json"),
        &SolveReport {
            problem: problem_summary(&s),
            continuation: &rep,
            duals,
            error: error.clone(),
        },
    )?;
    write_json(&s.out.join("timing.json"), &timing(&rep))?;
    write_field(&s.out.join("u.csv"), &rep.u)?;
    emit_stage_fields(&s, &rep)?;
    if let Some(msg) = error {
        return Err(Failure {
            code: exit::SOLVER,
            error: anyhow::anyhow!(msg),
        });
    }
    let f = match &rep.duals {
        Some(d) => l1_normalized(&d.f),
        None => ScalarField::zeros(pb.grid().clone()),
    };
    write_field(&s.out.join("f.csv"), &f)?;
    let cert = certify(&rep.u, &f, &pb, &s.built.certification).or_exit(exit::SOLVER)?;
    write_json(&s.out.join("certification.json"), &cert)?;
    let last = rep.final_stage();
    println!(
        "stages={} e_p={} f_max={} guards_passed={} verdict={:?}",
        rep.stages.len(),
        last.map_or(0.0, |st| st.e_p),
        last.map_or(0.0, |st| st.f_max),
        rep.guards_passed,
        cert.verdict
    );
    if !rep.guards_passed {
        return Err(Failure {
            code: exit::SOLVER,
            error: anyhow::anyhow!("coercivity guard failed at one or more stages"),
        });
    }
    Ok(verdict_code(cert.verdict))
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sweep(common: &Common) -> Outcome {
    let s = open(common)?;
    let rep = continuation_solve(s.built.problem.clone(), &s.built.schedule, None)
        .map_err(|e| anyhow::anyhow!(e.to_string()))
        .or_exit(exit::SOLVER)?;
    let path = s.out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("creating {}", path.display()))
        .or_exit(exit::SOLVER)?;
    w.write_record(["p", "e_p", "sign_law_residual", "nodal_count"])
        .or_exit(exit::SOLVER)?;
    for st in &rep.stages {
        w.write_record([
            sci(st.p),
            sci(st.e_p),
            st.sign_law_residual.map(sci).unwrap_or_default(),
            st.nodal_count.map(|n| n.to_string()).unwrap_or_default(),
        ])
        .or_exit(exit::SOLVER)?;
    }
    w.flush().or_exit(exit::SOLVER)?;
    write_json(&s.out.join("timing.json"), &timing(&rep))?;
    emit_stage_fields(&s, &rep)?;
    println!("{}", path.display());
    Ok(exit::OK)
}

pub fn verify(common: &Common, u: &Path, f: &Path) -> Outcome {
    let s = open(common)?;
    let pb = &s.built.problem;
    let uf = config::read_field(pb.grid(), u).or_exit(exit::CONFIG)?;
    let ff = config::read_field(pb.grid(), f).or_exit(exit::CONFIG)?;
    let cert: CertificationReport = certify(&uf, &ff, pb, &s.built.certification).or_exit(exit::CONFIG)?;
    write_json(&s.out.join("certification.json"), &cert)?;
    println!(
        "f_inf={} sign_law={} weak={} violations={} verdict={:?}",
        cert.f_inf,
        cert.sign_law_residual,
        cert.weak_residual,
        cert.probe_violations.len(),
        cert.verdict
    );
    Ok(verdict_code(cert.verdict))
}

pub fn dual(common: &Common, u: &Path) -> Outcome {
    let s = open(common)?;
    let pb = &s.built.problem;
    let uf = config::read_field(pb.grid(), u).or_exit(exit::CONFIG)?;
    let dp = DualProblem::from_state(pb, &uf).or_exit(exit::SOLVER)?;
    let sol = solve_dual(&dp, s.built.dual_mode).or_exit(exit::SOLVER)?;
    let report = sol.report(nodal_set(&sol.f).count());
    write_field(&s.out.join("f.csv"), &sol.f)?;
    write_json(&s.out.join("dual.json"), &report)?;
    println!(
        "mode={:?} fell_back={} nodal_count={}",
        report.mode, report.fell_back, report.nodal_count
    );
    Ok(exit::OK)
}

pub fn oracle(data: &[f64], out: Option<&Path>) -> Outcome {
    let [a, b, ua, sa, ub, sb] = data else {
        return Err(Failure {
            code: exit::CONFIG,
            error: anyhow::anyhow!("oracle takes exactly six numbers"),
        });
    };
    let sol = solve_exact(*a, *b, *ua, *sa, *ub, *sb).or_exit(exit::CONFIG)?;
    let summary = sol.summary();
    let text = serde_json::to_string_pretty(&summary).or_exit(exit::SOLVER)?;
    println!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .or_exit(exit::CONFIG)?;
        write_json(&dir.join("oracle.json"), &summary)?;
    }
    Ok(exit::OK)
}

#[derive(Serialize)]
struct AssumptionEntry {
    name: &'static str,
    pass: bool,
    worst: f64,
    bound: f64,
    witness: Vec<f64>,
    note: String,
}

#[derive(Serialize)]
struct ConvexityReport {
    supremand: String,
    eta: (f64, f64),
    p: (f64, f64),
    xi: (f64, f64),
    p_bar: Option<f64>,
    worst_eigenvalue: f64,
    per_candidate: Vec<(f64, f64)>,
    sample_count: usize,
    witness: Vec<f64>,
    assumptions_heuristic: bool,
    assumptions: Vec<AssumptionEntry>,
}

pub fn convexity(common: &Common, candidates: &[f64], density: usize) -> Outcome {
    let cfg = config::load(&common.config).or_exit(exit::CONFIG)?;
    let (spec, bx) = cfg.supremand().or_exit(exit::CONFIG)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .or_exit(exit::CONFIG)?;
    let cert = certify_convexity(&spec, &bx, candidates, density).or_exit(exit::CONFIG)?;
    let assumptions = check_assumptions(&spec, &bx, density).or_exit(exit::CONFIG)?;
    let report = ConvexityReport {
        supremand: spec.name().to_string(),
        eta: bx.eta,
        p: bx.p,
        xi: bx.xi,
        p_bar: cert.p_bar,
        worst_eigenvalue: cert.worst_eigenvalue,
        per_candidate: cert.per_candidate,
        sample_count: cert.sample_count,
        witness: cert.witness,
        assumptions_heuristic: assumptions.heuristic,
        assumptions: assumptions
            .checks
            .into_iter()
            .map(|c| AssumptionEntry {
                name: c.name,
                pass: c.pass,
                worst: c.worst,
                bound: c.bound,
                witness: c.witness,
                note: c.note,
            })
            .collect(),
    };
    write_json(&out.join("convexity.json"), &report)?;
    match report.p_bar {
        Some(p) => {
            println!("p_bar={p}");
            Ok(exit::OK)
        }
        None => {
            println!("p_bar=none worst_eigenvalue={}", report.worst_eigenvalue);
            Ok(exit::FAIL)
        }
    }
}
