use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::trace_csv::{read_trace_csv, write_trace_csv};
use super::{exit, exit_code, RunConfig};
use crate::diagnostics::{
    lyapunov_series, oracle_solve, verify_theorem, CheckStatus, OracleCertificate, Sample, Trace, TraceKind,
    VerificationReport,
};
use crate::error::{Error, Result};
use crate::iterate::{run_discrete, DiscreteRunConfig};
use crate::linalg::dist;
use crate::ode::integrate;
use crate::problem::{HypothesisFlags, ProblemInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Continuous,
    Discrete,
}

fn fail(err: &Error) -> u8 {
    match err {
        Error::Divergence { last_state, .. } => eprintln!("lmpen: {err}; last good state {last_state:?}"),
        _ => eprintln!("lmpen: {err}"),
    }
    exit_code(err)
}

fn load(config: &Path) -> Result<(RunConfig, ProblemInstance)> {
    let cfg = RunConfig::load(config)?;
    let prob = cfg.instance()?;
    Ok((cfg, prob))
}

fn discrete_block(cfg: &RunConfig) -> Result<&DiscreteRunConfig> {
    cfg.discrete.as_ref().ok_or_else(|| Error::Validation("the configuration has no discrete block".into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs the configured solver once; returns the trace and an optional final partial sum.
fn solve(cfg: &RunConfig, prob: &ProblemInstance, mode: Mode, oracle: Option<&OracleCertificate>) -> Result<(Trace, Option<f64>)> {
    match mode {
        Mode::Continuous => Ok((integrate(prob, cfg.horizon, &cfg.integrator)?, None)),
        Mode::Discrete => {
            let run = run_discrete(prob, discrete_block(cfg)?, oracle.map(|c| c.p_star.as_slice()))?;
            let last = run.partial_sums.as_ref().and_then(|s| s.last().copied());
            Ok((run.trace, last))
        }
    }
}

#[derive(Serialize)]
struct FinalState<'a> {
    t: f64,
    x: &'a [f64],
    v: &'a [f64],
    psi: f64,
    beta_psi: f64,
    obj: f64,
    int_beta_psi: f64,
    int_xdot_sq: f64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    mode: Mode,
    samples: usize,
    #[serde(rename = "final")]
    final_state: FinalState<'a>,
    hypotheses: HypothesisFlags,
    hypothesis_violations: Vec<String>,
    oracle: Option<&'a OracleCertificate>,
    oracle_error: Option<String>,
    discrete_partial_sum: Option<f64>,
    elapsed_seconds: f64,
}

/// `lmpen run`: writes `trace.csv` and `summary.json` into `out_dir`.
pub fn cmd_run(config: &Path, mode: Mode, out_dir: &Path) -> u8 {
    match run_inner(config, mode, out_dir) {
        Ok(()) => exit::OK,
        Err(e) => fail(&e),
    }
}

fn run_inner(config: &Path, mode: Mode, out_dir: &Path) -> Result<()> {
    let (cfg, prob) = load(config)?;
    if mode == Mode::Discrete {
        discrete_block(&cfg)?;
    }
    let start = Instant::now();
    let oracle = oracle_solve(&prob);
    if let Err(e) = &oracle {
        log::warn!("reference solution unavailable: {e}");
    }
    let cert = oracle.as_ref().ok();
    let (trace, partial) = solve(&cfg, &prob, mode, cert)?;
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{} samples in {elapsed:.3}s", trace.len());

    std::fs::create_dir_all(out_dir)?;
    let lyap = cert.map(|c| lyapunov_series(&prob, &trace, c));
    write_trace_csv(&out_dir.join("trace.csv"), &trace, lyap.as_deref())?;
    let (s, d) = trace.last().expect("trace has the initial sample");
    let hypotheses = prob.hypotheses();
    let summary = RunSummary {
        mode,
        samples: trace.len(),
        final_state: FinalState {
            t: s.t,
            x: &s.x,
            v: &s.v,
            psi: d.psi,
            beta_psi: d.beta_psi,
            obj: d.obj,
            int_beta_psi: d.int_beta_psi,
            int_xdot_sq: d.int_xdot_sq,
        },
        hypothesis_violations: hypotheses.violations(),
        hypotheses,
        oracle: cert,
        oracle_error: oracle.as_ref().err().map(|e| e.to_string()),
        discrete_partial_sum: partial,
        elapsed_seconds: elapsed,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!("wrote {} samples to {}", trace.len(), out_dir.display());
    Ok(())
}

/// Rebuilds a trace from the primary columns of a trace file.
fn trace_from_file(cfg: &RunConfig, prob: &ProblemInstance, path: &Path, mode: Mode) -> Result<Trace> {
    let rows = read_trace_csv(path, prob.n)?;
    let disc = match mode {
        Mode::Discrete => Some(discrete_block(cfg)?),
        Mode::Continuous => None,
    };
    let samples = rows
        .into_iter()
        .map(|r| {
            let (mu, lambda, beta) = match disc {
                Some(d) => {
                    let k = (r.t / d.delta()).round() as usize;
                    (d.mu, 1.0 / d.mu, d.beta_n(prob, k))
                }
                None => (prob.lambda.mu(r.t), prob.lambda_t(r.t), prob.beta_t(r.t)),
            };
            let z = r.x.iter().zip(&r.v).map(|(x, v)| x + mu * v).collect();
            Sample { t: r.t, z, x: r.x, v: r.v, beta, lambda, step_h: r.step_h }
        })
        .collect();
    Trace::from_samples(prob, samples)
}

fn print_report(report: &VerificationReport, to_stdout: bool) {
    let mut out = String::new();
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "n/a",
        };
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
        out.push_str(&format!(
            "{:<3} {:<5} value {:>11} threshold {:>11}  {}\n",
            c.name,
            status,
            show(c.value),
            show(c.threshold),
            c.anchor
        ));
    }
    out.push_str(&format!("condition (H): {}\n", report.condition_h));
    for v in &report.hypothesis_violations {
        out.push_str(&format!("hypothesis: {v}\n"));
    }
    out.push_str(&format!("overall: {}\n", if report.overall_pass { "pass" } else { "fail" }));
    if to_stdout {
        print!("{out}");
    } else {
        eprint!("{out}");
    }
}

/// `lmpen verify`: writes `report.json` next to the trace unless `out_dir` is given.
pub fn cmd_verify(config: &Path, trace: &Path, out_dir: Option<&Path>, mode: Mode) -> u8 {
    let (cfg, prob) = match load(config) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let tr = match trace_from_file(&cfg, &prob, trace, mode) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let oracle = oracle_solve(&prob);
    let kind = match mode {
        Mode::Continuous => TraceKind::Continuous,
        Mode::Discrete => TraceKind::Discrete,
    };
    let report = match verify_theorem(&prob, &tr, kind, oracle.as_ref(), &cfg.tolerances) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let dir: PathBuf = match out_dir {
        Some(d) => d.to_path_buf(),
        None => trace.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let written = std::fs::create_dir_all(&dir).map_err(Error::from).and_then(|_| write_json(&dir.join("report.json"), &report));
    if let Err(e) = written {
        return fail(&e);
    }
    let code = match &oracle {
        Err(e) => {
            eprintln!("lmpen: {e}");
            exit::ORACLE
        }
        Ok(_) if report.overall_pass => exit::OK,
        Ok(_) => exit::CHECK_FAILED,
    };
    print_report(&report, code == exit::OK);
    code
}

/// One line of the hypothesis audit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub hypothesis: &'static str,
    pub satisfied: bool,
    pub witness: String,
}

pub(crate) fn audit_rows(prob: &ProblemInstance) -> Vec<AuditRow> {
    let h = prob.hypotheses();
    let k = h.growth_constant;
    let t0 = prob.beta.growth_onset(k).map_or("none".to_string(), |t| format!("{t}"));
    let mut rows = vec![
        AuditRow {
            hypothesis: "lambda nonincreasing with positive limit",
            satisfied: h.lambda_ok,
            witness: format!("lim lambda = {}", prob.lambda.lambda_inf),
        },
        AuditRow {
            hypothesis: "growth 0 <= dbeta <= k beta",
            satisfied: h.growth_ok,
            witness: format!("k = {k}, from t0 = {t0}"),
        },
        AuditRow {
            hypothesis: "beta -> infinity",
            satisfied: h.beta_diverges,
            witness: format!("alpha = {}", prob.beta.alpha),
        },
    ];
    let cond_h = if prob.psi.is_zero() {
        AuditRow { hypothesis: "condition (H)", satisfied: true, witness: "trivially holds (psi is zero)".into() }
    } else {
        match oracle_solve(prob) {
            Ok(c) => {
                let total = if c.p_star.iter().all(|p| *p == 0.0) { 0.0 } else { prob.condition_h_tail(&c.p_star, 0.0) };
                AuditRow {
                    hypothesis: "condition (H)",
                    satisfied: total.is_finite(),
                    witness: format!("integral = {total} at p* = {:?}", c.p_star),
                }
            }
            Err(e) => AuditRow {
                hypothesis: "condition (H)",
                satisfied: h.condition_h,
                witness: format!("1/beta integrable: {} (no p*: {e})", h.condition_h),
            },
        }
    };
    rows.push(cond_h);
    rows.push(AuditRow {
        hypothesis: "subdifferential sum rule",
        satisfied: h.qualification.holds,
        witness: h.qualification.reason.clone(),
    });
    rows
}

/// `lmpen check`: static audit of the hypotheses.
pub fn cmd_check(config: &Path) -> u8 {
    let (_, prob) = match load(config) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let rows = audit_rows(&prob);
    for r in &rows {
        println!("{:<42} {:<4} {}", r.hypothesis, if r.satisfied { "yes" } else { "NO" }, r.witness);
    }
    if rows.iter().all(|r| r.satisfied) {
        exit::OK
    } else {
        exit::HYPOTHESIS
    }
}

/// Result of the discretization sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareOutcome {
    pub mus: Vec<f64>,
    pub sup_gaps: Vec<f64>,
    pub ratios: Vec<f64>,
    pub aligned_samples: usize,
    pub min_ratio: f64,
    pub pass: bool,
}

pub const COMPARE_LEVELS: usize = 3;
pub const COMPARE_MIN_RATIO: f64 = 1.7;

/// `lmpen compare`: sup-distance between the continuous trajectory and the
/// discrete one at `μ, μ/2, μ/4`, with `Δ` and the step count scaled alike.
pub fn cmd_compare(config: &Path, out_dir: &Path) -> u8 {
    match compare_inner(config, out_dir) {
        Ok(o) if o.pass => {
            println!("sup gaps {:?}, ratios {:?}", o.sup_gaps, o.ratios);
            exit::OK
        }
        Ok(o) => {
            eprintln!("lmpen: sup-gap ratios {:?} below {COMPARE_MIN_RATIO}", o.ratios);
            exit::CHECK_FAILED
        }
        Err(e) => fail(&e),
    }
}

fn compare_inner(config: &Path, out_dir: &Path) -> Result<CompareOutcome> {
    let (cfg, prob) = load(config)?;
    let base = discrete_block(&cfg)?.clone();
    let cont = integrate(&prob, cfg.horizon, &cfg.integrator)?;
    let mut runs = Vec::with_capacity(COMPARE_LEVELS);
    for level in 0..COMPARE_LEVELS {
        let f = (1u64 << level) as f64;
        let mut d = base.clone();
        d.mu = base.mu / f;
        d.delta = Some(base.delta() / f);
        d.steps = base.steps << level;
        if d.betas.is_some() {
            return Err(Error::Validation("compare mode needs beta_n from the schedule, not an explicit list".into()));
        }
        runs.push((d.clone(), run_discrete(&prob, &d, None)?.trace));
    }
    let delta0 = base.delta();
    let horizon = (base.steps as f64 * delta0).min(cfg.horizon);
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for s in cont.samples() {
        if s.t > horizon * (1.0 + 1e-12) {
            break;
        }
        let k0 = (s.t / delta0).round();
        if (k0 * delta0 - s.t).abs() > 1e-9 * s.t.max(1.0) {
            continue;
        }
        let gaps = runs
            .iter()
            .enumerate()
            .map(|(level, (_, tr))| dist(&s.x, &tr.samples()[(k0 as usize) << level].x))
            .collect();
        rows.push((s.t, gaps));
    }
    if rows.len() < 2 {
        return Err(Error::Validation("continuous samples and the discrete grid share fewer than two times".into()));
    }
    let sup: Vec<f64> = (0..COMPARE_LEVELS).map(|l| rows.iter().map(|r| r.1[l]).fold(0.0, f64::max)).collect();
    let ratios: Vec<f64> = sup.windows(2).map(|w| w[0] / w[1]).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);

    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("compare.csv")).map_err(|e| Error::Input(e.to_string()))?;
    let mut header = vec!["t".to_string()];
    header.extend(runs.iter().map(|(d, _)| format!("gap_mu_{}", d.mu)));
    w.write_record(&header).map_err(|e| Error::Input(e.to_string()))?;
    for (t, gaps) in &rows {
        let mut rec = vec![format!("{t:.16e}")];
        rec.extend(gaps.iter().map(|g| format!("{g:.16e}")));
        w.write_record(&rec).map_err(|e| Error::Input(e.to_string()))?;
    }
    w.flush()?;
    let outcome = CompareOutcome {
        mus: runs.iter().map(|(d, _)| d.mu).collect(),
        sup_gaps: sup,
        aligned_samples: rows.len(),
        pass: min_ratio >= COMPARE_MIN_RATIO,
        ratios,
        min_ratio,
    };
    write_json(&out_dir.join("compare.json"), &outcome)?;
    Ok(outcome)
}
