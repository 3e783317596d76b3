use std::io::Write;
use std::path::Path;

use kpp_core::oracle::{self, OracleConfig, SpeedEstimate};
use kpp_core::sweeps::{self, format_float, metadata_path, SweepMetadata};
use kpp_core::variational::{linspace, logspace, scan_h};
use kpp_core::{enhancement, minimize_h, Error, Execution, GridSpec, ShearSpec, SweepConfig};
use serde_json::json;

use crate::args::{CurveArgs, FitArgs, OracleArgs, Spacing, SpeedArgs, SweepArgs};
use crate::config::{
    load_json, parse_policy, parse_range, positive, resolve_fprime0, resolve_problem, resolve_shear, usage,
    CliResult, Failure, ProblemFile, ShearFile, DEFAULT_GRID,
};

pub const SIGN_CONVENTION: &str = "speeds are signed; a front invading the u = 0 state toward -x has negative speed";

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

fn describe(shear: &ShearSpec) -> String {
    match shear {
        ShearSpec::Parametric { delta, freq } => format!("parametric, delta = {delta}, n = {freq}"),
        ShearSpec::Tabulated { n_y, n_tau, .. } => format!("tabulated {n_y}x{n_tau}"),
        ShearSpec::Fourier { modes } => format!("fourier, {} modes", modes.len()),
    }
}

pub fn speed(args: &SpeedArgs) -> CliResult<()> {
    let file: ProblemFile = load_json(args.problem.config.as_deref())?;
    let mut problem = resolve_problem(&args.problem, &file)?;
    if let Some(l) = args.lambda0 {
        problem.minimize.lambda0 = Some(positive("lambda0", l)?);
    }
    let field = problem.shear.sample(&problem.grid)?;
    let r = minimize_h(&field, &problem.grid, problem.fprime0, &problem.minimize)?;
    let gain = enhancement(&r, problem.fprime0);

    println!("shear        {}", describe(&problem.shear));
    println!("grid         {}", problem.grid);
    println!("f'(0)        {}", problem.fprime0);
    println!("c*           {:.12}", r.c_star);
    println!("lambda*      {:.12}", r.lambda_star);
    println!("mu(lambda*)  {:.12}", r.mu_at_star);
    println!("enhancement  {:.6e}  (-2 sqrt(f'(0)) - c*)", gain);
    println!(
        "iterations   {} ({} eigensolves{}{})",
        r.iterations,
        r.evaluations,
        if r.noise_limited { ", gradient at rounding floor" } else { "" },
        if r.used_fallback { ", golden-section fallback" } else { "" }
    );
    println!("identity     max defect {:.2e}", r.max_identity_defect);
    println!("c_star={} lambda_star={}", format_float(r.c_star), format_float(r.lambda_star));

    if let Some(out) = &args.out {
        write_json(
            out,
            &json!({
                "config": problem,
                "result": r,
                "enhancement": gain,
                "sign_convention": SIGN_CONVENTION,
            }),
        )?;
    }
    if !r.converged {
        return Err(Failure::Numerical("minimizer did not converge".into()));
    }
    Ok(())
}

pub fn curve(args: &CurveArgs) -> CliResult<()> {
    let file: ProblemFile = load_json(args.problem.config.as_deref())?;
    let problem = resolve_problem(&args.problem, &file)?;
    let lo = positive("lambda-min", args.lambda_min.or(file.lambda_min).unwrap_or(0.05))?;
    let hi = positive("lambda-max", args.lambda_max.or(file.lambda_max).unwrap_or(5.0))?;
    let steps = args.lambda_steps.or(file.lambda_steps).unwrap_or(100);
    if lo >= hi {
        return Err(usage(format!("--lambda-min {lo} must be below --lambda-max {hi}")));
    }
    if steps < 2 {
        return Err(usage(format!("--lambda-steps must be at least 2, got {steps}")));
    }
    let lambdas = match args.spacing.or(file.spacing).unwrap_or(Spacing::Linear) {
        Spacing::Linear => linspace(lo, hi, steps),
        Spacing::Log => logspace(lo, hi, steps),
    };
    let field = problem.shear.sample(&problem.grid)?;
    let points = scan_h(
        &field,
        &problem.grid,
        problem.fprime0,
        &lambdas,
        problem.minimize.method,
        Execution::Sequential,
    )?;
    let mut csv = String::from("lambda,mu,h\n");
    for p in &points {
        csv.push_str(&format!("{},{},{}\n", format_float(p.lambda), format_float(p.mu), format_float(p.h)));
    }
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| usage(e.to_string()))?,
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let mut cfg: SweepConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => match (&args.deltas, &args.freqs) {
            (Some(d), Some(f)) => SweepConfig::new(d.clone(), f.clone()),
            _ => return Err(usage("sweep needs --config or both --deltas and --freqs")),
        },
    };
    if let Some(d) = &args.deltas {
        cfg.deltas = d.clone();
    }
    if let Some(f) = &args.freqs {
        cfg.freqs = f.clone();
    }
    if let Some(fp) = args.fprime0 {
        cfg.fprime0 = fp;
    }
    if let Some(g) = &args.grid {
        cfg.grid = parse_policy(g)?;
    }
    cfg.warm_start |= args.warm_start;
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;

    let outcome = kpp_core::run_sweep(&cfg)?;
    sweeps::write_records(&outcome.records, &args.out)?;
    SweepMetadata::new(&cfg, &outcome)?.write(metadata_path(&args.out))?;
    if let Some(path) = &args.gnuplot {
        write_file(path, &sweeps::records_to_gnuplot(&outcome.records))?;
    }
    println!(
        "{} records, {} failures, max identity defect {:.2e}",
        outcome.records.len(),
        outcome.failures.len(),
        outcome.max_identity_defect
    );
    for f in &outcome.failures {
        eprintln!("failed: delta = {}, n = {}: {}", f.delta, f.freq, f.message);
    }
    if !outcome.failures.is_empty() {
        return Err(Failure::Numerical(format!("{} sweep pairs failed", outcome.failures.len())));
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let range = args.range.as_deref().map(parse_range).transpose()?.unwrap_or((f64::MIN_POSITIVE, f64::INFINITY));
    let mut records = kpp_core::read_records(&args.input)?;
    if let Some(n) = args.freq {
        records.retain(|r| r.freq == n);
    }
    let mut freqs: Vec<u32> = records.iter().map(|r| r.freq).collect();
    freqs.sort_unstable();
    freqs.dedup();
    if freqs.len() > 1 {
        return Err(usage(format!("records mix frequencies {freqs:?}; pick one with --freq")));
    }
    let fit = kpp_core::fit_loglog_slope(&records, range).map_err(|e| match e {
        Error::InsufficientData { .. } => usage(format!("{e} in the requested range")),
        other => other.into(),
    })?;
    println!(
        "slope={} intercept={} points={} excluded={}",
        format_float(fit.slope),
        format_float(fit.intercept),
        fit.points,
        fit.excluded
    );
    Ok(())
}

/// λ* used for the ln t correction when none is given.
fn default_lambda_star(shear: &ShearSpec, fprime0: f64) -> CliResult<(f64, Option<f64>)> {
    if shear.family_params().is_some_and(|(delta, _)| delta == 0.0) {
        return Ok((fprime0.sqrt(), Some(-2.0 * fprime0.sqrt())));
    }
    let grid = match shear {
        ShearSpec::Tabulated { n_y, n_tau, .. } => GridSpec::unit(*n_y, *n_tau)?,
        _ => GridSpec::square(DEFAULT_GRID)?,
    };
    let r = minimize_h(&shear.sample(&grid)?, &grid, fprime0, &Default::default())?;
    Ok((r.lambda_star, Some(r.c_star)))
}

pub fn oracle(args: &OracleArgs) -> CliResult<()> {
    let mut cfg: OracleConfig = load_json(args.config.as_deref())?;
    let file_shear = ShearFile {
        shear: Some(cfg.shear.clone()),
        ..Default::default()
    };
    cfg.shear = resolve_shear(&args.shear, &file_shear)?;
    cfg.fprime0 = resolve_fprime0(args.shear.fprime0, Some(cfg.fprime0))?;
    if let Some(v) = args.domain_length {
        cfg.domain_length = v;
    }
    if let Some(v) = args.nx {
        cfg.n_x = v;
    }
    if let Some(v) = args.ny {
        cfg.n_y = v;
    }
    if args.dt.is_some() {
        cfg.dt = args.dt;
    }
    if let Some(v) = args.t_final {
        cfg.t_final = v;
    }
    if let Some(v) = args.front_level {
        cfg.front_level = v;
    }
    if let Some(v) = args.window {
        cfg.measure_window = v;
    }
    if args.no_reaction {
        cfg.reaction = false;
    }
    if args.raw_upwind {
        cfg.compensate_upwind = false;
    }
    let dt = cfg.resolved_dt()?;
    let (lambda_star, c_star) = match args.lambda_star {
        Some(l) => (positive("lambda-star", l)?, None),
        None => default_lambda_star(&cfg.shear, cfg.fprime0)?,
    };

    let trace = match oracle::evolve(&cfg) {
        Ok(t) => t,
        Err(Error::BoundaryContamination { time, position, partial }) => {
            if let Some(out) = &args.out {
                oracle::write_trace(&partial, out)?;
            }
            return Err(Failure::Numerical(format!(
                "front reached the x-boundary at t = {time} (position {position}); enlarge --domain-length"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let plain = oracle::estimate_speed(&trace, cfg.measure_window)?;
    let corrected = oracle::estimate_speed_log_corrected(&trace, cfg.measure_window, lambda_star)?;

    println!("shear        {}", describe(&cfg.shear));
    println!("strip        L = {}, {} x {} points, h_x = {}", cfg.domain_length, cfg.n_x, cfg.n_y, cfg.cell_width());
    println!("time         dt = {dt}, t_final = {}, {} samples", cfg.t_final, trace.len());
    println!("u range      [{:.3e}, {:.6}]", trace.min_u, trace.max_u);
    println!("speed        {:.8}  (last {:.0}% of the run)", plain.speed, 100.0 * cfg.measure_window);
    println!("corrected    {:.8}  (ln t lag removed with lambda* = {lambda_star:.6})", corrected.speed);
    if let Some(c) = c_star {
        println!("variational  {c:.8}  (relative gap {:.3e})", (corrected.speed - c) / c.abs());
    }
    if plain.low_confidence || corrected.low_confidence {
        eprintln!("warning: front positions are not monotone inside the window; the fit is low confidence");
    }
    println!(
        "speed={} speed_log_corrected={} lambda_star={}",
        format_float(plain.speed),
        format_float(corrected.speed),
        format_float(lambda_star)
    );

    if let Some(out) = &args.out {
        oracle::write_trace(&trace, out)?;
        let estimate = |e: &SpeedEstimate| serde_json::to_value(e).unwrap_or_default();
        write_json(
            &metadata_path(out),
            &json!({
                "tool": "kppfront oracle",
                "version": env!("CARGO_PKG_VERSION"),
                "config": cfg,
                "dt": dt,
                "samples": trace.len(),
                "min_u": trace.min_u,
                "max_u": trace.max_u,
                "speed": estimate(&plain),
                "speed_log_corrected": estimate(&corrected),
                "lambda_star": lambda_star,
                "variational_c_star": c_star,
                "sign_convention": SIGN_CONVENTION,
            }),
        )?;
    }
    Ok(())
}
