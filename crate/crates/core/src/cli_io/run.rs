use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{checks_csv, write_artifacts, Artifacts, PlotFile};
use crate::assembly::{assemble, assemble_scaled, DiscreteOperator, Variant};
use crate::error::{Error, Result};
use crate::experiments::{
    domain_exhaustion, eigfn_convergence, growth_rate, limit_estimate, local_reference, m0_monotonicity,
    property_suite, sigma_sweep, solve_record, ExhaustionSetup, LimitTarget, MonoSetup, MonotoneVerdict,
    SweepDirection, SweepRecord, SweepSetup, STAGNATION_TOL,
};
use crate::grid_kernel::{Coefficient, KernelSpec};
use crate::spectral::{existence_check, SolverOptions, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

const DEFAULT_OUT: &str = "nlspec-out";
const DEFAULT_REFERENCE_NODES: usize = 1024;
const DEFAULT_INSTANCES: usize = 10;
const DEFAULT_HORIZON: f64 = 200.0;
const DEFAULT_MONO_TOL: f64 = 1e-6;
const DEFAULT_ORDER: u32 = 1;
const GROWTH_TOL: f64 = 1e-2;
const INVARIANCE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides `output` from the config.
    pub out_dir: Option<PathBuf>,
    /// Treat warnings as invariant violations.
    pub strict: bool,
    /// Recorded in the manifest; the caller owns the thread pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub violations: Vec<String>,
    pub nonconverged: Vec<String>,
    /// Per-record errors that are neither violations nor convergence failures.
    pub failures: Vec<String>,
}

/// Findings gathered while a study runs.
#[derive(Debug, Default)]
struct Log {
    records: Vec<SweepRecord>,
    plots: Vec<PlotFile>,
    extra: Vec<(String, String)>,
    summary: serde_json::Map<String, Value>,
    warnings: Vec<String>,
    violations: Vec<String>,
    nonconverged: Vec<String>,
    failures: Vec<String>,
}

impl Log {
    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn error(&mut self, context: &str, e: Error) {
        let msg = format!("{context}: {e}");
        log::error!("{msg}");
        match e {
            Error::InvariantViolation(_) => self.violations.push(msg),
            Error::NoConvergence(..) => self.nonconverged.push(msg),
            _ => self.failures.push(msg),
        }
    }

    fn violation(&mut self, msg: String) {
        log::error!("{msg}");
        self.violations.push(msg);
    }

    fn record(&mut self, context: &str, r: SweepRecord) {
        if !r.converged {
            self.nonconverged.push(format!("{context}: solver stopped before the tolerance"));
        }
        self.records.push(r);
    }

    fn set(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    fn exit_code(&self, strict: bool) -> i32 {
        if !self.violations.is_empty() {
            EXIT_VIOLATION
        } else if !self.nonconverged.is_empty() {
            EXIT_NO_CONVERGENCE
        } else if !self.failures.is_empty() {
            EXIT_CONFIG
        } else if strict && !self.warnings.is_empty() {
            EXIT_VIOLATION
        } else {
            EXIT_OK
        }
    }
}

/// Run the experiment and write its artifacts. `Err` only for I/O failures
/// and configurations that cannot start.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let start = Instant::now();
    let mut log = Log::default();
    dispatch(cfg, &mut log)?;
    let compute_s = start.elapsed().as_secs_f64();
    let exit_code = log.exit_code(opts.strict);

    let manifest = json!({
        "tool": "nlspec",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind,
        "config": cfg,
        "threads": opts.threads.unwrap_or_else(rayon::current_num_threads),
        "strict": opts.strict,
        "wall_time_s": { "compute": compute_s },
        "records": log.records.len(),
        "summary": Value::Object(std::mem::take(&mut log.summary)),
        "warnings": log.warnings,
        "violations": log.violations,
        "nonconverged": log.nonconverged,
        "failures": log.failures,
        "exit_code": exit_code,
    });
    let art = Artifacts {
        records: std::mem::take(&mut log.records),
        plots: std::mem::take(&mut log.plots),
        extra: std::mem::take(&mut log.extra),
        manifest,
    };
    let files = write_artifacts(&out_dir, &art)?;
    Ok(RunOutcome {
        exit_code,
        out_dir,
        files,
        warnings: log.warnings,
        violations: log.violations,
        nonconverged: log.nonconverged,
        failures: log.failures,
    })
}

fn dispatch(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Eig => eig(cfg, log),
        ExperimentKind::Sweep => sweep(cfg, log, false),
        ExperimentKind::CompareLocal => sweep(cfg, log, true),
        ExperimentKind::EigfnConv => eigfn(cfg, log),
        ExperimentKind::Exhaust => exhaust(cfg, log),
        ExperimentKind::Growth => growth(cfg, log),
        ExperimentKind::Invariance => invariance(cfg, log),
        ExperimentKind::MonoM0 => mono(cfg, log),
        ExperimentKind::CheckAll => check_all(cfg, log),
    }
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("{what} is required")))
}

fn kernel(cfg: &ExperimentConfig) -> Result<&KernelSpec> {
    need(&cfg.kernel, "kernel")
}

fn solver(cfg: &ExperimentConfig) -> SolverOptions {
    cfg.solver.options()
}

fn grid_operator(cfg: &ExperimentConfig) -> Result<DiscreteOperator> {
    let grid = need(&cfg.grid, "grid")?.build()?;
    let a = Coefficient::on_grid(&cfg.coefficient, &grid)?;
    assemble(&grid, kernel(cfg)?, &a, cfg.operator)
}

fn label(k: &KernelSpec) -> f64 {
    k.sigma().unwrap_or(f64::NAN)
}

fn eig(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let op = grid_operator(cfg)?;
    match solve_record(&op, label(kernel(cfg)?), &solver(cfg), cfg.solver.lambda_v) {
        Ok((rec, res)) => {
            let report = existence_check(&res, &op);
            if report.verdict == Verdict::BoundaryCase {
                log.warn(format!(
                    "no eigenpair: spectral gap {:.3e} below {:.3e}",
                    report.gap, report.gap_tol
                ));
            }
            log.set("residual", json!(res.residual));
            log.set("iterations", json!(res.iterations));
            log.set("components", json!(res.components));
            log.set("existence", json!(report));
            if let Some(grid) = op.grid().filter(|g| g.dim() == 1) {
                let pts = grid.nodes().map(|x| x[0]).zip(res.eigvec.iter().copied()).collect();
                log.plots.push(PlotFile::new("eigvec.dat", "x", "phi", pts));
            }
            log.record("eig", rec);
        }
        Err(e) => log.error("eig", e),
    }
    Ok(())
}

fn sweep_setup(cfg: &ExperimentConfig, m: f64) -> Result<SweepSetup> {
    let grid = need(&cfg.grid, "grid")?;
    let (family, radius) = match kernel(cfg)? {
        KernelSpec::Convolution { family, radius, .. } => (*family, *radius),
        _ => return Err(Error::InvalidArgument("sweeps need a convolution kernel".into())),
    };
    Ok(SweepSetup {
        family,
        radius,
        m,
        domain: grid.domain(),
        coefficient: cfg.coefficient.clone(),
        variant: cfg.operator,
        resolution: cfg.resolution_rule()?,
        solver: solver(cfg),
        with_lambda_v: cfg.solver.lambda_v,
    })
}

fn m_list(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    match &cfg.study.ms {
        Some(ms) => Ok(ms.clone()),
        None => Ok(kernel(cfg)?.m().into_iter().collect()),
    }
}

fn collect_sweep(log: &mut Log, m: f64, out: Vec<(f64, Result<SweepRecord>)>) -> Vec<SweepRecord> {
    let mut good = Vec::new();
    for (sigma, r) in out {
        let ctx = format!("m={m} σ={sigma}");
        match r {
            Ok(rec) => {
                log.record(&ctx, rec.clone());
                good.push(rec);
            }
            Err(e) => log.error(&ctx, e),
        }
    }
    good
}

fn sweep(cfg: &ExperimentConfig, log: &mut Log, compare_local: bool) -> Result<()> {
    let ms = if compare_local { vec![2.0] } else { m_list(cfg)? };
    let sigmas = need(&cfg.study.sigmas, "study.sigmas")?;
    let direction = if compare_local {
        Some(SweepDirection::ToZero)
    } else {
        cfg.study.direction
    };
    let grid = need(&cfg.grid, "grid")?.build()?;
    let nu = Coefficient::on_grid(&cfg.coefficient, &grid)?.sup();
    let order = cfg.study.order.unwrap_or(DEFAULT_ORDER);
    let mut limits = Vec::new();
    for m in ms {
        let setup = sweep_setup(cfg, m)?;
        let recs = collect_sweep(log, m, sigma_sweep(&setup, sigmas));
        log.plots.push(PlotFile::new(
            format!("lambda_p_m{m}.dat"),
            "σ",
            "lambda_p",
            recs.iter().map(|r| (r.sigma, r.lambda_p)).collect(),
        ));
        let Some(dir) = direction else { continue };
        if cfg.operator != Variant::MPlusA {
            log.warn(format!("m={m}: limit targets are defined for M_plus_a only"));
            continue;
        }
        if recs.len() < 3 {
            log.warn(format!("m={m}: limit needs three converged records, have {}", recs.len()));
            continue;
        }
        let local = if m == 2.0 && dir == SweepDirection::ToZero {
            let nodes = cfg.study.reference_nodes.unwrap_or(DEFAULT_REFERENCE_NODES);
            match local_reference(&setup, nodes, crate::local_ref::LOCAL_TOL) {
                Ok(r) => Some(r.lambda_1),
                Err(e) => {
                    log.error("local reference", e);
                    continue;
                }
            }
        } else {
            None
        };
        let est = LimitTarget::for_regime(m, dir, nu, local)
            .and_then(|t| limit_estimate(&recs, dir, t, order));
        match est {
            Ok(est) => {
                if !est.monotone_tail {
                    log.warn(format!("m={m}: non-monotone tail, extrapolation skipped"));
                }
                let target = est.target.value();
                limits.push(json!({
                    "m": m,
                    "direction": dir,
                    "estimate": est,
                    "relative_gap": est.gap / target.abs().max(f64::MIN_POSITIVE),
                }));
            }
            Err(e) => log.error(&format!("m={m} limit"), e),
        }
    }
    if !limits.is_empty() {
        log.set("limits", Value::Array(limits));
    }
    Ok(())
}

fn eigfn(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let setup = sweep_setup(cfg, 2.0)?;
    let sigmas = need(&cfg.study.sigmas, "study.sigmas")?;
    let nodes = cfg.study.reference_nodes.unwrap_or(DEFAULT_REFERENCE_NODES);
    let reference = local_reference(&setup, nodes, crate::local_ref::LOCAL_TOL)?;
    let out = eigfn_convergence(&setup, sigmas, cfg.study.margin.unwrap_or(0.0), &reference)?;
    let mut pts = Vec::new();
    let mut distances = Vec::new();
    for (sigma, r) in out {
        let ctx = format!("σ={sigma}");
        match r {
            Ok(e) => {
                match e.distance {
                    Some(d) => pts.push((sigma, d)),
                    None => log.warn(format!("{ctx}: boundary case, no eigenfunction to compare")),
                }
                distances.push(json!({"sigma": sigma, "distance": e.distance}));
                log.record(&ctx, e.record);
            }
            Err(err) => log.error(&ctx, err),
        }
    }
    log.set("local_lambda_1", json!(reference.lambda_1));
    log.set("distances", Value::Array(distances));
    log.plots.push(PlotFile::new(
        "lambda_p_m2.dat",
        "σ",
        "lambda_p",
        log.records.iter().map(|r| (r.sigma, r.lambda_p)).collect(),
    ));
    log.plots.push(PlotFile::new("distance.dat", "σ", "distance", pts));
    Ok(())
}

fn exhaust(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let k = kernel(cfg)?;
    let half_widths = need(&cfg.study.half_widths, "study.half_widths")?;
    let spacing = cfg
        .exhaustion_spacing()
        .ok_or_else(|| Error::InvalidArgument("study.spacing is required".into()))?;
    let center = cfg.center();
    let setup = ExhaustionSetup {
        kernel: k,
        coefficient: &cfg.coefficient,
        variant: cfg.operator,
        center: &center,
        spacing,
        solver: solver(cfg),
        with_lambda_v: cfg.solver.lambda_v,
        stagnation_tol: STAGNATION_TOL,
        stop_at_stagnation: false,
    };
    match domain_exhaustion(&setup, half_widths) {
        Ok(rep) => {
            if !rep.monotone() {
                log.violation(format!(
                    "λ_p increased by {:.3e} along nested boxes",
                    rep.max_increase
                ));
            }
            if rep.stagnation.is_none() && rep.levels.len() > 1 {
                log.warn("no stagnation along the box ladder".into());
            }
            log.plots.push(PlotFile::new(
                "lambda_p_vs_L.dat",
                "L",
                "lambda_p",
                rep.levels.iter().map(|l| (l.half_width, l.lambda_p())).collect(),
            ));
            log.set("stagnation_level", json!(rep.stagnation));
            log.set("max_increase", json!(rep.max_increase));
            log.set(
                "half_widths",
                json!(rep.levels.iter().map(|l| l.half_width).collect::<Vec<_>>()),
            );
            for l in rep.levels {
                log.record(&format!("L={}", l.half_width), l.record);
            }
        }
        Err(e) => log.error("exhaustion", e),
    }
    Ok(())
}

fn growth(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let op = grid_operator(cfg)?;
    let (rec, _) = match solve_record(&op, label(kernel(cfg)?), &solver(cfg), cfg.solver.lambda_v) {
        Ok(v) => v,
        Err(e) => {
            log.error("growth", e);
            return Ok(());
        }
    };
    let norm = op
        .matrix()
        .row_iter()
        .map(|r| r.abs().sum())
        .fold(0.0, f64::max);
    let dt = cfg.study.dt.unwrap_or_else(|| (0.25 / norm).min(0.01));
    let horizon = cfg.study.horizon.unwrap_or(DEFAULT_HORIZON);
    match growth_rate(&op, horizon, dt, &vec![1.0; op.dim()]) {
        Ok(g) => {
            let err = (g.rate + rec.lambda_p).abs();
            if err > GROWTH_TOL {
                log.violation(format!(
                    "growth rate {:.6} differs from -λ_p = {:.6} by {err:.3e}",
                    g.rate, -rec.lambda_p
                ));
            }
            log.set("growth", json!(g));
            log.set("dt", json!(dt));
            log.set("horizon", json!(horizon));
            log.set("rate_error", json!(err));
        }
        Err(e) => log.error("growth", e),
    }
    log.record("growth", rec);
    Ok(())
}

fn invariance(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let op = grid_operator(cfg)?;
    let base_sigma = label(kernel(cfg)?);
    let opts = SolverOptions {
        tol: cfg.solver.tol.min(1e-13),
        ..solver(cfg)
    };
    let base = match solve_record(&op, base_sigma, &opts, cfg.solver.lambda_v) {
        Ok((r, _)) => r,
        Err(e) => {
            log.error("scale 1", e);
            return Ok(());
        }
    };
    let scales = cfg.study.scales.clone().unwrap_or_else(|| vec![0.5, 2.0, 10.0]);
    let mut pts = vec![(1.0, base.lambda_p)];
    let mut worst: f64 = 0.0;
    let base_lp = base.lambda_p;
    log.record("scale 1", base);
    for s in scales {
        let ctx = format!("scale {s}");
        let r = assemble_scaled(&op, s).and_then(|sc| solve_record(&sc, base_sigma * s, &opts, cfg.solver.lambda_v));
        match r {
            Ok((rec, _)) => {
                let d = (rec.lambda_p - base_lp).abs();
                worst = worst.max(d);
                if d > INVARIANCE_TOL {
                    log.violation(format!("{ctx}: λ_p moved by {d:.3e}"));
                }
                pts.push((s, rec.lambda_p));
                log.record(&ctx, rec);
            }
            Err(e) => log.error(&ctx, e),
        }
    }
    log.set("max_discrepancy", json!(worst));
    log.plots.push(PlotFile::new("lambda_p_vs_scale.dat", "scale", "lambda_p", pts));
    Ok(())
}

fn mono(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let (family, radius) = match kernel(cfg)? {
        KernelSpec::Convolution { family, radius, .. } => (*family, *radius),
        _ => return Err(Error::InvalidArgument("mono_m0 needs a convolution kernel".into())),
    };
    let setup = MonoSetup {
        family,
        radius,
        coefficient: cfg.coefficient.clone(),
        center: cfg.center(),
        spacing: cfg
            .exhaustion_spacing()
            .ok_or_else(|| Error::InvalidArgument("study.spacing is required".into()))?,
        half_widths: need(&cfg.study.half_widths, "study.half_widths")?.clone(),
        solver: solver(cfg),
        mono_tol: cfg.study.mono_tol.unwrap_or(DEFAULT_MONO_TOL),
    };
    match m0_monotonicity(&setup, need(&cfg.study.sigmas, "study.sigmas")?) {
        Ok(rep) => {
            match rep.verdict {
                MonotoneVerdict::Monotone => {}
                MonotoneVerdict::NotMonotone => {
                    log.violation(format!("λ_p decreased in σ by {:.3e}", rep.worst_drop))
                }
                MonotoneVerdict::Inconclusive => {
                    log.warn("some boxes did not stagnate; monotonicity inconclusive".into())
                }
            }
            log.set("verdict", json!(rep.verdict));
            log.set("worst_drop", json!(rep.worst_drop));
            log.set(
                "half_widths",
                json!(rep.entries.iter().map(|e| e.half_width).collect::<Vec<_>>()),
            );
            log.plots.push(PlotFile::new(
                "lambda_p_m0.dat",
                "σ",
                "lambda_p",
                rep.entries.iter().map(|e| (e.sigma, e.lambda_p())).collect(),
            ));
            for e in rep.entries {
                log.record(&format!("σ={}", e.sigma), e.record);
            }
        }
        Err(e) => log.error("mono_m0", e),
    }
    Ok(())
}

fn check_all(cfg: &ExperimentConfig, log: &mut Log) -> Result<()> {
    let instances = cfg.study.instances.unwrap_or(DEFAULT_INSTANCES);
    match property_suite(cfg.seed, instances) {
        Ok(checks) => {
            for c in checks.iter().filter(|c| !c.passed) {
                log.violation(format!(
                    "check {} failed: {:.3e} > {:.3e}",
                    c.name, c.value, c.threshold
                ));
            }
            log.set("checks", json!(checks));
            log.extra.push(("checks.csv".into(), checks_csv(&checks)));
        }
        Err(e) => log.error("property suite", e),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::parse_config;

    fn run_text(text: &str) -> (RunOutcome, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(text).unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        (run(&cfg, &opts).unwrap(), dir)
    }

    const EIG: &str = r#"
kind = "eig"
[grid]
lower = [0.0]
upper = [1.0]
nodes = [64]
[kernel]
variant = "convolution"
family = "uniform"
radius = 1.0
sigma = 0.5
m = 2.0
"#;

    #[test]
    fn eig_writes_artifacts() {
        let (out, dir) = run_text(EIG);
        assert_eq!(out.exit_code, EXIT_OK, "{out:?}");
        let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(dir.path().join("plotdata/eigvec.dat").exists());
        let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["kind"], "eig");
        assert_eq!(m["exit_code"], 0);
    }

    #[test]
    fn sweep_with_limit() {
        let text = EIG.replace("kind = \"eig\"", "kind = \"sweep\"")
            + "[study]\nsigmas = [0.4, 0.2, 0.1]\nnodes_per_sigma = 16\ndirection = \"to_zero\"\nms = [0.0, 1.0]\n";
        let (out, dir) = run_text(&text);
        assert!(out.violations.is_empty() && out.failures.is_empty(), "{out:?}");
        let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(dir.path().join("plotdata/lambda_p_m0.dat").exists());
        assert!(dir.path().join("plotdata/lambda_p_m1.dat").exists());
    }

    #[test]
    fn check_all_exit_zero() {
        let (out, dir) = run_text("kind = \"check_all\"\nseed = 5\n[study]\ninstances = 3\n");
        assert_eq!(out.exit_code, EXIT_OK, "{out:?}");
        assert!(dir.path().join("checks.csv").exists());
    }

    #[test]
    fn strict_promotes_warnings() {
        let mut log = Log::default();
        log.warn("w".into());
        assert_eq!(log.exit_code(false), EXIT_OK);
        assert_eq!(log.exit_code(true), EXIT_VIOLATION);
        log.nonconverged.push("n".into());
        assert_eq!(log.exit_code(false), EXIT_NO_CONVERGENCE);
        log.violations.push("v".into());
        assert_eq!(log.exit_code(false), EXIT_VIOLATION);
    }
}
