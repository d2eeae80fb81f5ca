//! One runner per config section. Each returns a [`JobResult`].

use std::collections::BTreeMap;

use riskconc_core::curve::{argmin_curve, mean_e_curve, MonteCarloSpec};
use riskconc_core::direct::{lipschitz_check, tail_report, NormalSequenceSpec, DEFAULT_T_GRID};
use riskconc_core::expfam::{taylor_ratio, BaseMeasure, ExpFamily};
use riskconc_core::margin::{delta_bound, phi_and_r0, DeltaInputs, MarginFunction};
use riskconc_core::model::Penalty;
use riskconc_core::rng::derive_seed;
use riskconc_core::scenarios::{
    run_expfam_density, run_expfam_regression, run_linearized_ls, run_projection_case, ExpfamReport, LinearizedReport,
    ProjectionReport, RateReport, ScenarioId, ScenarioSpec,
};
use riskconc_core::{Family, LinearFamily};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CurveFamily, CurveJob, DirectJob, ExpfamFamilySpec, ExpfamJob, MarginJob, RunConfig};
use crate::error::Result;
use crate::output::{csv_table, label_hash, num, sanitize, JobOutput, JobResult};

/// A config entry with its file stem and derived seed.
pub struct Task<'a> {
    pub stem: String,
    pub seed: u64,
    pub job: Job<'a>,
}

pub enum Job<'a> {
    Direct(&'a DirectJob),
    Curve(&'a CurveJob),
    Margin(&'a MarginJob),
    Expfam(&'a ExpfamJob),
    Scenario(&'a ScenarioSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Section {
    Direct,
    Curve,
    Margin,
    Expfam,
    Scenario,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Direct => "direct",
            Section::Curve => "curve",
            Section::Margin => "margin",
            Section::Expfam => "expfam",
            Section::Scenario => "scenario",
        }
    }
}

fn stem(section: Section, i: usize, name: Option<&str>, fallback: String) -> String {
    format!("{}-{i:02}-{}", section.name(), sanitize(name.unwrap_or(&fallback)))
}

/// Tasks of one section in config order. Seeds depend only on the global
/// seed and the file stem.
pub fn tasks(config: &RunConfig, section: Section, seed: u64) -> Vec<Task<'_>> {
    let mut out: Vec<(String, Job<'_>)> = Vec::new();
    match section {
        Section::Direct => {
            for (i, j) in config.direct.iter().enumerate() {
                out.push((stem(section, i, j.name.as_deref(), format!("n{}", j.n)), Job::Direct(j)));
            }
        }
        Section::Curve => {
            for (i, j) in config.curve.iter().enumerate() {
                out.push((stem(section, i, j.name.as_deref(), format!("n{}", j.n)), Job::Curve(j)));
            }
        }
        Section::Margin => {
            for (i, j) in config.margin.iter().enumerate() {
                out.push((stem(section, i, j.name.as_deref(), format!("n{}", j.n)), Job::Margin(j)));
            }
        }
        Section::Expfam => {
            for (i, j) in config.expfam.iter().enumerate() {
                out.push((stem(section, i, j.name.as_deref(), "taylor".into()), Job::Expfam(j)));
            }
        }
        Section::Scenario => {
            for (i, s) in config.scenario.iter().enumerate() {
                out.push((stem(section, i, None, s.id.name().into()), Job::Scenario(s)));
            }
        }
    }
    out.into_iter().map(|(stem, job)| Task { seed: derive_seed(seed, label_hash(&stem)), stem, job }).collect()
}

pub fn run_task(task: &Task<'_>) -> Result<JobResult> {
    match task.job {
        Job::Direct(j) => run_direct(j, &task.stem, task.seed),
        Job::Curve(j) => run_curve(j, &task.stem, task.seed),
        Job::Margin(j) => run_margin(j, &task.stem, task.seed),
        Job::Expfam(j) => run_expfam(j, &task.stem, task.seed),
        Job::Scenario(s) => run_scenario(s, &task.stem, task.seed),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn envelope(kind: &str, name: &str, seed: u64, flags: Vec<String>, summary: BTreeMap<String, Value>, result: Value) -> JobOutput {
    JobOutput { kind: kind.into(), name: name.into(), seed, flags, summary, result }
}

pub fn run_direct(job: &DirectJob, name: &str, seed: u64) -> Result<JobResult> {
    let spec = NormalSequenceSpec::new(job.n, job.sigma, job.penalty.build(job.n), job.replicates, seed);
    let grid = job.t.clone().unwrap_or_else(|| DEFAULT_T_GRID.to_vec());
    let rep = tail_report(&spec, &grid)?;
    let lip = match job.lipschitz_pairs {
        Some(p) => Some(lipschitz_check(&spec, p)?),
        None => None,
    };
    let flags: Vec<String> = rep.flagged().iter().map(|t| format!("t={}", num(*t))).collect();
    let mut summary = BTreeMap::new();
    summary.insert("m0".into(), json!(rep.m0));
    summary.insert("m0_se".into(), json!(rep.m0_se));
    if let Some(l) = &lip {
        summary.insert("lipschitz_max".into(), json!(l.max_ratio));
    }
    let csv = rep.to_csv();
    let result = json!({ "report": to_value(&rep)?, "lipschitz": to_value(&lip)? });
    Ok(JobResult { stem: name.into(), output: envelope("direct", name, seed, flags, summary, result), csv })
}

fn curve_family(f: &CurveFamily) -> Result<Family> {
    Ok(Family::Linear(match f {
        CurveFamily::GaussianLocation { g0, sigma } => LinearFamily::gaussian_location(g0.clone(), *sigma)?,
        CurveFamily::Cosine { g0 } => riskconc_core::scenarios::cosine_family(g0.clone())?,
    }))
}

pub fn run_curve(job: &CurveJob, name: &str, seed: u64) -> Result<JobResult> {
    let fam = curve_family(&job.family)?;
    let grid = job.grid.build()?;
    let curve = mean_e_curve(&fam, &job.penalty, &MonteCarloSpec::new(job.n, job.replicates, seed), &grid)?;
    let arg = argmin_curve(&curve)?;
    let flags = if curve.flagged() > 0 { vec![format!("{} unconverged grid points", curve.flagged())] } else { Vec::new() };
    let mut summary = BTreeMap::new();
    summary.insert("s0".into(), json!(arg.s));
    summary.insert("min_value".into(), json!(arg.value));
    let result = json!({
        "metadata": to_value(&curve.metadata())?,
        "argmin": to_value(&arg)?,
        "s": curve.points(),
        "values": curve.values,
        "se": curve.se,
    });
    Ok(JobResult { stem: name.into(), output: envelope("curve", name, seed, flags, summary, result), csv: curve.to_csv() })
}

pub fn run_margin(job: &MarginJob, name: &str, seed: u64) -> Result<JobResult> {
    let pr = phi_and_r0(&job.j, job.m_n, job.c, job.k)?;
    let g = MarginFunction::quadratic(job.margin_c)?;
    let mut rows = Vec::new();
    for t in &job.t {
        let inp = DeltaInputs { t: *t, n: job.n, tau_max: job.tau_max, s0: job.s0, r0: pr.r0, c: job.c, k: job.k, c0: job.c0 };
        rows.push(delta_bound(&inp, &g)?);
    }
    let csv = csv_table(
        &["t", "delta", "rhs", "u", "c0"],
        job.t.iter().zip(&rows).map(|(t, d)| vec![num(*t), num(d.delta), num(d.rhs), num(d.u), num(d.c0)]),
    );
    let mut summary = BTreeMap::new();
    summary.insert("r0".into(), json!(pr.r0));
    summary.insert("r0_sq".into(), json!(pr.r0_sq));
    let result = json!({ "r0": to_value(&pr)?, "t": job.t, "delta": to_value(&rows)? });
    Ok(JobResult { stem: name.into(), output: envelope("margin", name, seed, Vec::new(), summary, result), csv })
}

fn expfam_family(f: &ExpfamFamilySpec) -> Result<ExpFamily> {
    Ok(match f {
        ExpfamFamilySpec::TwoPoint { p, centered } => ExpFamily::two_point(*p, *centered)?,
        ExpfamFamilySpec::Polynomial { lower, upper, base, degree, centered, nodes } => {
            let mut b = BaseMeasure::interval(*lower, *upper, *base);
            if let Some(k) = nodes {
                b = b.with_nodes(*k);
            }
            ExpFamily::polynomial(b, *degree, *centered)?
        }
    })
}

pub fn run_expfam(job: &ExpfamJob, name: &str, seed: u64) -> Result<JobResult> {
    let fam = expfam_family(&job.family)?;
    let tab = taylor_ratio(&fam, &job.theta, &job.t)?;
    let flags = if tab.stable { Vec::new() } else { vec!["Taylor constant unstable across t".into()] };
    let csv = csv_table(&["t", "ratio", "kappa"], tab.rows.iter().map(|r| vec![num(r.t), num(r.ratio), num(r.kappa)]));
    let mut summary = BTreeMap::new();
    summary.insert("kappa_min".into(), json!(tab.kappa_min));
    summary.insert("kappa_max".into(), json!(tab.kappa_max));
    Ok(JobResult { stem: name.into(), output: envelope("expfam", name, seed, flags, summary, to_value(&tab)?), csv })
}

fn rate_summary(summary: &mut BTreeMap<String, Value>, rate: &Option<RateReport>) {
    if let Some(r) = rate {
        summary.insert("slope".into(), json!(r.slope));
        summary.insert("slope_se".into(), json!(r.jackknife_se));
        if let Some(t) = r.target {
            summary.insert("target_slope".into(), json!(t));
        }
    }
}

fn projection_output(rep: &ProjectionReport) -> (Vec<String>, BTreeMap<String, Value>, String) {
    let mut flags: Vec<String> = rep
        .points
        .iter()
        .filter(|p| p.flagged)
        .map(|p| format!("n={}: {} minimum-lemma violations, {} unconverged", p.n, p.lemma_violations, p.unconverged))
        .collect();
    if let Some(r) = &rep.rate {
        if r.within_tolerance == Some(false) {
            flags.push(format!("slope {} outside tolerance of {}", num(r.slope), num(r.target.unwrap_or(f64::NAN))));
        }
    }
    let mut summary = BTreeMap::new();
    rate_summary(&mut summary, &rep.rate);
    if let Some(p) = rep.points.last() {
        summary.insert("s0_last".into(), json!(p.s0));
        summary.insert("s_hat_median_last".into(), json!(riskconc_core::stats::median(&p.s_hat)));
    }
    let csv = csv_table(
        &["n", "dimension", "lambda", "tau_min", "s0", "s0_se", "s0_at_edge", "deviation_median", "lemma_violations", "boundary_fraction", "unconverged"],
        rep.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.dimension.to_string(),
                num(p.lambda),
                num(p.tau_min),
                num(p.s0),
                num(p.s0_se),
                p.s0_at_edge.to_string(),
                num(p.deviation_median),
                p.lemma_violations.to_string(),
                num(p.boundary_fraction),
                p.unconverged.to_string(),
            ]
        }),
    );
    (flags, summary, csv)
}

fn linearized_output(rep: &LinearizedReport) -> (Vec<String>, BTreeMap<String, Value>, String) {
    let mut flags = Vec::new();
    for p in &rep.points {
        if p.unconverged > 0 || p.holder_violations > 0 || p.closed_form_gap.is_some_and(|g| g > 1e-8) {
            flags.push(format!("n={}: {} unconverged, {} Hölder violations", p.n, p.unconverged, p.holder_violations));
        }
    }
    if let Some(t) = rep.tail_check.as_ref().filter(|t| t.violations > 0) {
        flags.push(format!("{} envelope tail violations", t.violations));
    }
    let mut summary = BTreeMap::new();
    rate_summary(&mut summary, &rep.rate);
    if let Some(p) = rep.points.last() {
        summary.insert("tau_hat_median_last".into(), json!(p.tau_hat_median));
    }
    let csv = csv_table(
        &["n", "lambda", "tau_hat_median", "beta_error_median", "closed_form_gap", "holder_violations", "unconverged"],
        rep.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                num(p.lambda),
                num(p.tau_hat_median),
                num(p.beta_error_median),
                p.closed_form_gap.map(num).unwrap_or_default(),
                p.holder_violations.to_string(),
                p.unconverged.to_string(),
            ]
        }),
    );
    (flags, summary, csv)
}

fn expfam_output(rep: &ExpfamReport) -> (Vec<String>, BTreeMap<String, Value>, String) {
    let flags = rep
        .points
        .iter()
        .filter(|p| p.unconverged > 0 || p.clamped > 0)
        .map(|p| format!("n={}: {} unconverged, {} clamped", p.n, p.unconverged, p.clamped))
        .collect();
    let mut summary = BTreeMap::new();
    rate_summary(&mut summary, &rep.rate);
    if let Some(p) = rep.points.last() {
        summary.insert("tau_hat_median_last".into(), json!(p.tau_hat_median));
    }
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let csv = csv_table(
        &["n", "lambda", "tau_hat_median", "param_error_median", "expansion_ratio_median", "curvature_median", "clamped", "unconverged"],
        rep.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                num(p.lambda),
                num(p.tau_hat_median),
                num(p.param_error_median),
                opt(p.expansion_ratio_median),
                opt(p.curvature_median),
                p.clamped.to_string(),
                p.unconverged.to_string(),
            ]
        }),
    );
    (flags, summary, csv)
}

/// Flags, summary, CSV table and JSON result of one scenario.
type ScenarioParts = (Vec<String>, BTreeMap<String, Value>, String, Value);

/// Normal sequence runs over the sizes in `spec.n` with `σ = noise` and
/// `pen = λ(n)‖g‖_n²`.
fn normal_sequence(spec: &ScenarioSpec, seed: u64) -> Result<ScenarioParts> {
    spec.validate()?;
    let mut flags = Vec::new();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut summary = BTreeMap::new();
    for (i, n) in spec.n.iter().enumerate() {
        let lambda = spec.lambda.at(*n);
        let pen = if lambda == 0.0 { Penalty::Zero } else { Penalty::ridge_n(lambda, *n) };
        let ns = NormalSequenceSpec::new(*n, spec.noise, pen, spec.replicates, derive_seed(seed, i as u64));
        let rep = tail_report(&ns, &DEFAULT_T_GRID)?;
        for t in rep.flagged() {
            flags.push(format!("n={n}: t={}", num(t)));
        }
        for r in &rep.rows {
            rows.push(vec![n.to_string(), num(r.t), num(r.bound), num(r.freq), num(r.se), r.flagged.to_string()]);
        }
        summary.insert(format!("m0_n{n}"), json!(rep.m0));
        reports.push(rep);
    }
    let csv = csv_table(&["n", "t", "bound", "freq", "se", "flagged"], rows);
    Ok((flags, summary, csv, to_value(&reports)?))
}

pub fn run_scenario(spec: &ScenarioSpec, name: &str, seed: u64) -> Result<JobResult> {
    let mut spec = spec.clone();
    spec.seed = seed;
    let (flags, summary, csv, result) = match spec.id {
        ScenarioId::ProjectionCase1 | ScenarioId::ProjectionCase2 | ScenarioId::ProjectionCase3 => {
            let rep = run_projection_case(&spec)?;
            let (f, s, c) = projection_output(&rep);
            (f, s, c, to_value(&rep)?)
        }
        ScenarioId::LinearizedLs => {
            let rep = run_linearized_ls(&spec)?;
            let (f, s, c) = linearized_output(&rep);
            (f, s, c, to_value(&rep)?)
        }
        ScenarioId::ExpfamDensity | ScenarioId::ExpfamRegression => {
            let rep = if spec.id == ScenarioId::ExpfamDensity { run_expfam_density(&spec)? } else { run_expfam_regression(&spec)? };
            let (f, s, c) = expfam_output(&rep);
            (f, s, c, to_value(&rep)?)
        }
        ScenarioId::NormalSequence => normal_sequence(&spec, seed)?,
    };
    let result = json!({ "spec": to_value(&spec)?, "report": result });
    Ok(JobResult { stem: name.into(), output: envelope(spec.id.name(), name, seed, flags, summary, result), csv })
}
