use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lifespan_core::functionals::{FunctionalAccumulator, FunctionalTrace};
use lifespan_core::lab::{
    emit_report, fit_law, kernel_suite, read_records, render_report, run_experiment, run_pde_sweep,
    ExperimentSpec, FitResult, Law, LifespanRecord, Model, OdeSettings, PdeSettings, ReportMeta, RunStatus, Source,
};
use lifespan_core::ode_blowup::{OdeConfig, OdeMode};
use lifespan_core::wave::{CsvSnapshotWriter, ProblemParams, ProblemSpec, ProfileKind, SnapshotSink};
use lifespan_core::RadialGrid;

use crate::settings::{Cli, Command, Resolved};
use crate::NumericalFailure;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = Resolved::new(&cli.opts)?;
    match cli.command {
        Command::KernelCheck => kernel_check(&cfg),
        Command::PdeSweep => pde_sweep(&cfg),
        Command::OdeSweep => ode_sweep(&cfg),
        Command::Functionals => functionals(&cfg),
        Command::Fit => fit(&cfg),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn kernel_check(cfg: &Resolved) -> Result<()> {
    let dims: Vec<usize> = match cfg.dim()? {
        Some(d) => vec![d],
        None => (1..=6).collect(),
    };
    let checks = kernel_suite(&dims)?;
    let mut out = open_out(cfg.out()?.as_deref())?;
    writeln!(out, "check,dim,t,value,lower,upper,status")?;
    for c in &checks {
        let status = if c.passed() { "pass" } else { "fail" };
        writeln!(out, "{},{},{},{:e},{},{},{status}", c.kind, c.dim, c.t, c.value, c.lower, c.upper)?;
    }
    out.flush()?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(NumericalFailure(format!("{failed} heat kernel checks failed")).into());
    }
    Ok(())
}

fn pde_settings(cfg: &Resolved) -> Result<PdeSettings> {
    let d = PdeSettings::default();
    Ok(PdeSettings {
        dim: cfg.dim()?.unwrap_or(d.dim),
        p: cfg.p()?.unwrap_or(d.p),
        profile: cfg.profile()?.unwrap_or(d.profile),
        g_scale: cfg.g_scale()?.unwrap_or(d.g_scale),
        dr: cfg.dr()?.unwrap_or(d.dr),
        dt: cfg.dt()?,
        theta: cfg.theta()?.unwrap_or(d.theta),
        t_max: cfg.t_max()?.unwrap_or(d.t_max),
        cadence: cfg.cadence()?.unwrap_or(d.cadence),
        node_budget: d.node_budget,
    })
}

fn experiment(cfg: &Resolved, model: Model) -> Result<ExperimentSpec> {
    let epsilons = cfg.eps()?.ok_or_else(|| anyhow!("missing --eps"))?;
    let spec = ExperimentSpec {
        model,
        epsilons,
        refine: cfg.refine()?.unwrap_or(0),
        workers: cfg.workers()?.unwrap_or(0),
        seed: cfg.seed()?.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

/// The law the sweep's `(n, p)` calls for, if any.
fn default_law(dim: usize, p: f64) -> Option<Law> {
    let critical = 1.0 + 2.0 / dim as f64;
    if (p - critical).abs() <= 1e-12 {
        Some(Law::Critical { dim })
    } else if p < critical {
        Some(Law::Subcritical { dim, p })
    } else {
        None
    }
}

fn check_failures(records: &[LifespanRecord]) -> Result<()> {
    let failed: Vec<String> = records
        .iter()
        .filter(|r| r.status == RunStatus::Failed)
        .map(|r| format!("ε = {}: {}", r.epsilon, r.error.as_deref().unwrap_or("unknown")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(NumericalFailure(failed.join("; ")).into())
    }
}

fn write_report(records: &[LifespanRecord], fits: &[FitResult], meta: &ReportMeta, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => emit_report(records, fits, meta, path)?,
        None => {
            let (csv, summary) = render_report(records, fits, meta);
            print!("{csv}\n{summary}");
        }
    }
    Ok(())
}

fn pde_sweep(cfg: &Resolved) -> Result<()> {
    let settings = pde_settings(cfg)?;
    let spec = experiment(cfg, Model::Pde(settings.clone()))?;
    let records = match cfg.dump()? {
        None => run_experiment(&spec)?,
        Some(dir) => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let dr = settings.refined(spec.refine).dr;
            let results = run_pde_sweep(&spec, |eps| {
                let path = dump_path(&dir, eps);
                let file = File::create(&path).map_err(|e| lifespan_core::Error::Io { context: path, source: e })?;
                CsvSnapshotWriter::new(BufWriter::new(file), dr).map_err(|e| lifespan_core::Error::Io {
                    context: dir.clone(),
                    source: e,
                })
            })?;
            results.into_iter().map(|(record, _)| record).collect()
        }
    };
    let fits: Vec<FitResult> = default_law(settings.dim, settings.p)
        .and_then(|law| fit_law(&records, law).ok())
        .into_iter()
        .collect();
    let refined = settings.refined(spec.refine);
    let mut meta = ReportMeta::default();
    meta.push("source", Source::Pde)
        .push("dim", settings.dim)
        .push("p", settings.p)
        .push("profile", settings.profile)
        .push("g_scale", settings.g_scale)
        .push("refine", spec.refine)
        .push("dr", refined.dr)
        .push("dt", refined.scheme(false).dt0)
        .push("theta", refined.theta)
        .push("t_max", settings.t_max)
        .push("seed", spec.seed);
    write_report(&records, &fits, &meta, cfg.out()?.as_deref())?;
    check_failures(&records)
}

pub fn dump_path(dir: &Path, eps: f64) -> PathBuf {
    dir.join(format!("snapshots_eps{eps}.csv"))
}

fn ode_settings(cfg: &Resolved) -> Result<OdeSettings> {
    let d = OdeSettings::default();
    let mode = match cfg.mode()?.as_deref() {
        None | Some("second") => OdeMode::SecondOrder,
        Some("first") => OdeMode::FirstOrder,
        Some(other) => bail!("--mode must be `second` or `first`, got `{other}`"),
    };
    Ok(OdeSettings {
        alpha: cfg.alpha()?.unwrap_or(d.alpha),
        beta: cfg.beta()?.unwrap_or(d.beta),
        c0: cfg.c0()?.unwrap_or(d.c0),
        i0_prime: d.i0_prime,
        mode,
        config: OdeConfig {
            horizon: cfg.t_max()?.unwrap_or(d.config.horizon),
            ..d.config
        },
    })
}

fn ode_law(settings: &OdeSettings) -> Law {
    if settings.beta >= 1.0 {
        Law::OdeCritical { alpha: settings.alpha }
    } else {
        Law::OdeSubcritical {
            alpha: settings.alpha,
            beta: settings.beta,
        }
    }
}

fn ode_sweep(cfg: &Resolved) -> Result<()> {
    let settings = ode_settings(cfg)?;
    let spec = experiment(cfg, Model::Ode(settings.clone()))?;
    let records = run_experiment(&spec)?;
    let mut out = open_out(cfg.out()?.as_deref())?;
    writeln!(out, "epsilon,T,status,steps")?;
    for r in &records {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        let status = match r.status {
            RunStatus::Survived => "horizon_reached",
            other => other.as_str(),
        };
        writeln!(out, "{},{t},{status},{}", r.epsilon, r.steps)?;
    }
    out.flush()?;
    if let Some(path) = cfg.report()? {
        let fits: Vec<FitResult> = fit_law(&records, ode_law(&settings)).ok().into_iter().collect();
        let mut meta = ReportMeta::default();
        meta.push("source", Source::Ode)
            .push("alpha", settings.alpha)
            .push("beta", settings.beta)
            .push("c0", settings.c0)
            .push("mode", if settings.mode == OdeMode::FirstOrder { "first" } else { "second" })
            .push("horizon", settings.config.horizon)
            .push("seed", spec.seed);
        emit_report(&records, &fits, &meta, &path)?;
    }
    check_failures(&records)
}

fn fit(cfg: &Resolved) -> Result<()> {
    let input = cfg.input()?.ok_or_else(|| anyhow!("missing --input report"))?;
    let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let records = read_records(&text)?;
    let first = records.first().ok_or_else(|| anyhow!("{} holds no records", input.display()))?;
    let dim = cfg.dim()?.or(first.dim);
    let p = cfg.p()?.unwrap_or(first.p);
    let alpha = cfg.alpha()?.unwrap_or(p - 1.0);
    let need_dim = || dim.ok_or_else(|| anyhow!("--dim is required for this law"));
    let law = match cfg.law()?.as_deref().unwrap_or("auto") {
        "critical" => Law::Critical { dim: need_dim()? },
        "subcritical" => Law::Subcritical { dim: need_dim()?, p },
        "ode-critical" => Law::OdeCritical { alpha },
        "ode-subcritical" => Law::OdeSubcritical {
            alpha,
            beta: cfg.beta()?.ok_or_else(|| anyhow!("--beta is required for ode-subcritical"))?,
        },
        "auto" => match first.source {
            Source::Pde => default_law(need_dim()?, p).ok_or_else(|| anyhow!("p = {p} is supercritical"))?,
            Source::Ode => match cfg.beta()? {
                Some(beta) if beta < 1.0 => Law::OdeSubcritical { alpha, beta },
                _ => Law::OdeCritical { alpha },
            },
        },
        other => bail!("unknown law `{other}`"),
    };
    let fit = fit_law(&records, law)?;
    let mut meta = ReportMeta::default();
    meta.push("input", input.display());
    let (_, summary) = render_report(&records, std::slice::from_ref(&fit), &meta);
    match cfg.out()? {
        Some(path) => std::fs::write(&path, summary).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{summary}"),
    }
    Ok(())
}

/// Snapshot times and layout of a `t,r,u,v` dump.
struct DumpIndex {
    times: Vec<f64>,
    max_rows: usize,
    dr: Option<f64>,
}

fn dump_rows(path: &Path) -> Result<impl Iterator<Item = Result<(usize, [f64; 4])>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == "t,r,u,v" => {}
        _ => bail!("{}: expected header t,r,u,v", path.display()),
    }
    Ok(lines.filter_map(|(i, line)| {
        let line = match line {
            Ok(l) if l.trim().is_empty() => return None,
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        let mut row = [0.0; 4];
        let mut fields = line.split(',');
        for slot in &mut row {
            match fields.next().map(str::parse::<f64>) {
                Some(Ok(v)) => *slot = v,
                _ => return Some(Err(anyhow!("line {}: malformed row `{line}`", i + 1))),
            }
        }
        Some(Ok((i + 1, row)))
    }))
}

fn index_dump(path: &Path) -> Result<DumpIndex> {
    let mut index = DumpIndex {
        times: Vec::new(),
        max_rows: 0,
        dr: None,
    };
    let mut rows = 0;
    for row in dump_rows(path)? {
        let (line, [t, r, _, _]) = row?;
        if index.times.last() != Some(&t) {
            if index.times.last().is_some_and(|last| t < *last) {
                bail!("line {line}: snapshot times must increase");
            }
            index.times.push(t);
            rows = 0;
        }
        if rows == 1 && index.dr.is_none() {
            index.dr = Some(r);
        }
        rows += 1;
        index.max_rows = index.max_rows.max(rows);
    }
    Ok(index)
}

/// Snapshot times closest to `2^j, j ≥ −1`, plus the last one.
fn dump_checks(times: &[f64]) -> Vec<f64> {
    let Some(&last) = times.last() else {
        return Vec::new();
    };
    let mut checks = Vec::new();
    let mut target = 0.5;
    while target <= last {
        let nearest = times.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
        checks.extend(nearest.filter(|t| *t > 0.0));
        target *= 2.0;
    }
    if last > 0.0 {
        checks.push(last);
    }
    checks
}

fn functionals(cfg: &Resolved) -> Result<()> {
    let input = cfg.input()?.ok_or_else(|| anyhow!("missing --input snapshot dump"))?;
    let dim = cfg.dim()?.ok_or_else(|| anyhow!("missing --dim"))?;
    let p = cfg.p()?.ok_or_else(|| anyhow!("missing --p"))?;
    let eps = match cfg.eps()?.as_deref() {
        Some([e]) => *e,
        _ => bail!("--eps must name the single ε of the dump"),
    };
    let profile = cfg.profile()?.unwrap_or(ProfileKind::Bump);
    let g_scale = cfg.g_scale()?.unwrap_or(1.0);

    // first pass: times and grid extent
    let index = index_dump(&input)?;
    let dr = cfg.dr()?.or(index.dr).ok_or_else(|| anyhow!("cannot infer dr from the dump; pass --dr"))?;
    let t_end = *index.times.last().ok_or_else(|| anyhow!("{} holds no snapshots", input.display()))?;
    let grid = RadialGrid::new(dr, index.max_rows.max(3), dim)?;
    let params = ProblemParams {
        dim,
        p,
        epsilon: eps,
        t_max: t_end,
        nonlinearity_on: true,
    };
    let spec = ProblemSpec::with_profile_scaled(params, profile, &grid, g_scale)?;
    let mut acc = FunctionalAccumulator::for_problem(&spec, dump_checks(&index.times))?;

    // second pass: stream the snapshots
    let (mut u, mut v) = (Vec::new(), Vec::new());
    let mut current: Option<f64> = None;
    for row in dump_rows(&input)? {
        let (_, [t, _, ui, vi]) = row?;
        if current.is_some_and(|c| c != t) {
            acc.record(current.unwrap_or_default(), &u, &v);
            u.clear();
            v.clear();
        }
        current = Some(t);
        u.push(ui);
        v.push(vi);
    }
    if let Some(t) = current {
        acc.record(t, &u, &v);
    }
    let mut trace = acc.finish();
    trace.attach_gamma_tilde(cfg.t0()?.unwrap_or(0.0))?;
    let mut out = open_out(cfg.out()?.as_deref())?;
    write_functionals(&trace, &mut out)?;
    out.flush()?;
    if trace.f.iter().any(|f| !f.is_finite()) {
        return Err(NumericalFailure("non-finite functional values".into()).into());
    }
    Ok(())
}

pub fn write_functionals(trace: &FunctionalTrace, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "t,G,F,A,B,D,duhamel_residual,gamma_tilde")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for k in 0..trace.times.len() {
        let gamma = trace.gamma_tilde.as_ref().and_then(|g| g.at(k));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            trace.times[k],
            trace.g[k],
            trace.f[k],
            trace.a[k],
            opt(trace.b[k].as_ref().map(|b| b.value)),
            opt(trace.d[k].as_ref().map(|d| d.value)),
            opt(trace.duhamel[k].as_ref().map(|c| c.residual)),
            opt(gamma),
        )?;
    }
    Ok(())
}
