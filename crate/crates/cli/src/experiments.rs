//! One function per experiment. Each returns the report plus its CSV tables
//! and never touches the filesystem.

use dynbc::fit::{fit_slope, median};
use dynbc::geometry::TimeGrid;
use dynbc::holder::{self, ValueNorm};
use dynbc::linear::{self, measure_small_time_scaling, solve_linear, ScalingNorm, ScalingTemplate};
use dynbc::mms::{self, augment, ExactSolution, Order, StudyResult};
use dynbc::quasilinear::{self, PicardConfig, ProblemSpec};
use dynbc::{parse, EvalContext, Expr, Grid, SpaceTimeField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    CompatParams, ContractionParams, Experiment, MmsParams, RunConfig, ScalingParams, SolveParams, UniquenessParams,
    ValidateParams,
};
use crate::report::{Outcome, RunReport, Table};
use crate::CliError;

type Run = Result<Outcome, CliError>;

fn solver<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Solver(format!("{what}: {e}"))
}

fn config<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{what}: {e}"))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

pub fn run(cfg: &RunConfig, seed: u64) -> Run {
    let spec = cfg.problem.spec().map_err(config("problem"))?;
    let mut report = RunReport::new(cfg, seed);
    let picard = cfg.solver.picard();
    let mut files = Vec::new();
    match &cfg.experiment {
        Experiment::Validate(p) => validate(&spec, &picard, p, &mut report, &mut files)?,
        Experiment::Solve(p) => solve(&spec, &picard, p, &mut report, &mut files)?,
        Experiment::MmsConverge(p) => mms_converge(cfg, &spec, &picard, p, &mut report, &mut files)?,
        Experiment::Scaling(p) => scaling(&spec, &picard, p, &mut report, &mut files)?,
        Experiment::Contraction(p) => contraction(&spec, &picard, p, &mut report, &mut files)?,
        Experiment::Uniqueness(p) => uniqueness(&spec, &picard, p, seed, &mut report, &mut files)?,
        Experiment::CompatNecessity(p) => compat_necessity(&spec, &picard, p, &mut report, &mut files)?,
    }
    Ok(Outcome { report, files })
}

type Files = Vec<(String, Vec<u8>)>;

fn compat_tolerance(spec: &ProblemSpec, picard: &PicardConfig, scale: f64) -> f64 {
    picard
        .compat_tol
        .unwrap_or_else(|| linear::compat_tol(&spec.grid, picard.dt, scale))
}

fn validate(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &ValidateParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    let r = quasilinear::check_compatibility(spec).map_err(solver("compatibility"))?;
    let tol = compat_tolerance(spec, picard, r.scale);
    let radius = picard.resolved_radius(spec).map_err(solver("radius"))?;
    let sample = quasilinear::precondition_box(spec, radius, p.points, p.time_levels).map_err(solver("sample box"))?;
    let (nu, nu_b) = quasilinear::check_ag4(spec, &sample).map_err(solver("structure check"))?;

    report.record("compat_residual", r.max_abs);
    report.record("compat_scale", r.scale);
    report.record("compat_tol", tol);
    report.record("radius", radius);
    report.record("ellipticity_min", nu);
    report.record("transversality_min", nu_b);
    report.check(
        "compatibility",
        r.max_abs <= tol,
        format!("compatibility residual {:e} exceeds {:e}", r.max_abs, tol),
    );
    report.check(
        "ellipticity",
        nu > 0.0,
        format!("ellipticity constant {nu} is not positive"),
    );
    report.check(
        "transversality",
        nu_b > 0.0,
        format!("transversality constant {nu_b} is not positive"),
    );

    let two_d = spec.grid.dim() == 2;
    let mut t = Table::new(if two_d {
        &["node", "x", "y", "residual"]
    } else {
        &["node", "x", "residual"]
    });
    for ((node, pos), v) in r.nodes.iter().zip(&r.positions).zip(&r.values) {
        let mut row = vec![node.to_string(), num(pos[0])];
        if two_d {
            row.push(num(pos[1]));
        }
        row.push(num(*v));
        t.row(&row);
    }
    files.push(("residual.csv".into(), t.into_bytes()));
    Ok(())
}

fn solve(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &SolveParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    let c = quasilinear::continue_in_time(spec, picard).map_err(solver("solve"))?;
    let u = &c.solution.u;
    report.record("windows", c.window_starts.len());
    report.record("linear_solves", c.trace.linear_solves);
    report.record("iterations", c.trace.converged_iterations());
    report.record("final_time", u.time().t_end());
    report.record(
        "final_sup",
        c.solution.final_level().iter().fold(0.0f64, |m, v| m.max(v.abs())),
    );
    report.record(
        "max_seam_residual",
        c.seam_residuals.iter().copied().fold(0.0f64, f64::max),
    );
    report.record_opt("max_ratio", c.trace.converged_ratios().into_iter().reduce(f64::max));
    if !p.skip_norms {
        let norms = c.solution.norm_report(spec.beta).map_err(solver("norms"))?;
        for (name, v) in norms.record() {
            report.record(format!("norm.{name}"), v);
        }
    }
    files.push(("solution.csv".into(), csv_bytes(|b| c.solution.write_csv(b))?));
    files.push(("trace.csv".into(), csv_bytes(|b| c.trace.write_csv(b))?));
    Ok(())
}

fn record_study(report: &mut RunReport, prefix: &str, s: &StudyResult) {
    match s.order {
        Order::Fitted(o) => report.record(format!("{prefix}_order"), o),
        Order::Exact => report.record(format!("{prefix}_order"), "exact"),
    }
    report.record(format!("{prefix}_monotone"), s.monotone);
    report.record(
        format!("{prefix}_finest_error"),
        s.levels.last().map_or(0.0, |l| l.error),
    );
}

fn mms_converge(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &MmsParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    let pick = |given: &Option<String>, preset: &Option<String>, which: &str| {
        given.clone().or_else(|| preset.clone()).ok_or_else(|| {
            CliError::Config(format!(
                "mms-converge: no {which} manufactured solution (set exact_{which} or use an unmodified preset)"
            ))
        })
    };
    let es = pick(&p.exact_spatial, &cfg.problem.exact_spatial, "spatial")?;
    let et = pick(&p.exact_temporal, &cfg.problem.exact_temporal, "temporal")?;
    let exact_s = ExactSolution::parse(&es).map_err(config("exact_spatial"))?;
    let exact_t = ExactSolution::parse(&et).map_err(config("exact_temporal"))?;
    if p.levels < 3 {
        return Err(CliError::Config("mms-converge: levels must be at least 3".into()));
    }

    let grids = (0..p.levels)
        .map(|k| mms::refine(&spec.grid, 1 << k))
        .collect::<dynbc::Result<Vec<_>>>()
        .map_err(config("grid ladder"))?;
    let dts: Vec<f64> = (0..p.levels).map(|k| picard.dt / (1u64 << k) as f64).collect();
    let spatial_dt = p.spatial_dt.unwrap_or(picard.dt);
    let temporal_grid = match (&p.temporal_nodes, spec.grid) {
        (None, g) => g,
        (Some(n), Grid::Interval(g)) if n.len() == 1 => {
            Grid::interval(g.x_lo, g.x_hi, n[0]).map_err(config("temporal_nodes"))?
        }
        (Some(n), Grid::Strip(g)) if n.len() == 2 => {
            Grid::strip(g.period, g.height, n[0], n[1]).map_err(config("temporal_nodes"))?
        }
        (Some(n), _) => {
            return Err(CliError::Config(format!(
                "mms-converge: temporal_nodes {n:?} does not match the geometry"
            )))
        }
    };
    let (spatial, temporal) = join_studies(
        || mms::spatial_study(spec, &exact_s, &grids, spatial_dt, picard),
        || mms::temporal_study(spec, &exact_t, temporal_grid, &dts, picard),
    );
    let spatial = spatial.map_err(solver("spatial study"))?;
    let temporal = temporal.map_err(solver("temporal study"))?;

    record_study(report, "spatial", &spatial);
    record_study(report, "temporal", &temporal);
    report.record("exact_spatial", es);
    report.record("exact_temporal", et);
    let ok_s = match spatial.order {
        Order::Fitted(o) => o >= p.min_spatial_order,
        Order::Exact => true,
    };
    let [lo, hi] = p.temporal_order;
    let ok_t = match temporal.order {
        Order::Fitted(o) => (lo..=hi).contains(&o),
        Order::Exact => true,
    };
    report.check(
        "spatial_order",
        ok_s,
        format!("spatial order {:?} below {}", spatial.order, p.min_spatial_order),
    );
    report.check(
        "temporal_order",
        ok_t,
        format!("temporal order {:?} outside [{lo}, {hi}]", temporal.order),
    );
    files.push(("study_spatial.csv".into(), csv_bytes(|b| spatial.write_csv(b))?));
    files.push(("study_temporal.csv".into(), csv_bytes(|b| temporal.write_csv(b))?));
    Ok(())
}

fn join_studies<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    std::thread::scope(|s| {
        let hb = s.spawn(b);
        let ra = a();
        (ra, hb.join().expect("study thread panicked"))
    })
}

fn scaling(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &ScalingParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    if !spec.is_u_independent() {
        return Err(CliError::Config(
            "scaling: coefficients must not depend on u or its gradient".into(),
        ));
    }
    let u0 = spec.initial_field().map_err(config("u0"))?;
    if u0.iter().any(|v| *v != 0.0) {
        return Err(CliError::Config("scaling: the initial datum must be u0 = 0".into()));
    }
    let probe =
        TimeGrid::new(0.0, p.horizons.first().copied().unwrap_or(1.0), p.n_steps.max(1)).map_err(config("scaling"))?;
    let lp = quasilinear::as_linear(spec, probe).map_err(solver("scaling"))?;
    let template = ScalingTemplate {
        grid: spec.grid,
        coeffs: lp.coeffs,
        f: lp.f,
        h: lp.h,
        n_steps: p.n_steps,
        scheme: picard.scheme,
    };

    let mut norms: Vec<(&str, f64, ScalingNorm)> = p
        .thetas
        .iter()
        .map(|&theta| ("time-holder-sup", theta, ScalingNorm::TimeHolderSup { theta }))
        .collect();
    if p.c1 {
        norms.push(("time-holder-c1", spec.beta / 2.0, ScalingNorm::TimeHolderC1));
    }
    let mut summary = Table::new(&["norm", "theta", "slope", "paper_exponent"]);
    let mut points = Table::new(&["norm", "theta", "T", "value"]);
    for (name, theta, norm) in norms {
        let r = measure_small_time_scaling(&template, norm, &p.horizons, spec.beta).map_err(|e| match e {
            dynbc::Error::InvalidArgument(_) => CliError::Config(format!("scaling: {e}")),
            e => CliError::Solver(format!("scaling: {e}")),
        })?;
        summary.row(&[name.into(), num(theta), num(r.slope), num(r.predicted)]);
        for (t, v) in r.horizons.iter().zip(&r.norms) {
            points.row(&[name.into(), num(theta), num(*t), num(*v)]);
        }
        let key = format!("{name}.theta={theta}");
        report.record(format!("slope.{key}"), r.slope);
        report.record(format!("predicted.{key}"), r.predicted);
        if matches!(norm, ScalingNorm::TimeHolderC1) {
            let [lo, hi] = p.c1_window;
            report.check(
                &key,
                (lo..=hi).contains(&r.slope),
                format!("{name} slope {} outside [{lo}, {hi}]", r.slope),
            );
        } else {
            report.check(
                &key,
                (r.slope - r.predicted).abs() <= p.slope_tol,
                format!(
                    "{name} (theta {theta}) slope {} is more than {} from {}",
                    r.slope, p.slope_tol, r.predicted
                ),
            );
        }
    }
    files.push(("scaling.csv".into(), summary.into_bytes()));
    files.push(("scaling_norms.csv".into(), points.into_bytes()));
    Ok(())
}

fn contraction(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &ContractionParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    if p.taus.is_empty() {
        return Err(CliError::Config("contraction: taus is empty".into()));
    }
    let exact = p
        .exact
        .as_deref()
        .map(ExactSolution::parse)
        .transpose()
        .map_err(config("contraction exact"))?;
    let mut table = Table::new(&["tau", "median_ratio", "iterations", "window_used"]);
    let mut medians = Vec::new();
    for &tau in &p.taus {
        let mut s = ProblemSpec {
            horizon: tau,
            ..spec.clone()
        };
        if let Some(e) = &exact {
            s = augment(&s, e).map_err(config("contraction exact"))?;
        }
        let cfg = PicardConfig { window: tau, ..*picard };
        let (sol, trace) = quasilinear::picard_solve(&s, &cfg).map_err(solver("contraction"))?;
        let m = median(&trace.converged_ratios())
            .ok_or_else(|| CliError::Solver(format!("contraction: no ratios recorded at tau {tau}")))?;
        let its = trace.converged_iterations();
        let used = sol.u.time().tau;
        table.row(&[num(tau), num(m), its.to_string(), num(used)]);
        report.record(format!("median_ratio.tau={tau}"), m);
        report.record(format!("iterations.tau={tau}"), its);
        report.check(
            &format!("iterations.tau={tau}"),
            its <= p.max_iterations,
            format!("tau {tau}: {its} iterations exceed {}", p.max_iterations),
        );
        report.check(
            &format!("window.tau={tau}"),
            (used - tau).abs() <= 1e-12 * tau.max(1.0),
            format!("tau {tau}: the window shrank to {used}"),
        );
        medians.push((tau, m));
    }
    let [lo, hi] = p.ratio_window;
    for w in medians.windows(2) {
        let q = w[0].1 / w[1].1;
        let key = format!("ratio.tau={}/tau={}", w[0].0, w[1].0);
        report.record(key.clone(), q);
        report.check(
            &key,
            (lo..=hi).contains(&q),
            format!("{key} = {q} outside [{lo}, {hi}]"),
        );
    }
    if medians.len() >= 2 {
        let xs: Vec<f64> = medians.iter().map(|m| m.0.ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m.1.ln()).collect();
        report.record("slope", fit_slope(&xs, &ys));
    } else {
        report.record_opt("slope", None);
    }
    report.record("predicted_slope", 0.5);
    files.push(("contraction.csv".into(), table.into_bytes()));
    Ok(())
}

fn shape_fn(e: &Expr) -> impl Fn(f64, [f64; 2]) -> f64 + '_ {
    move |t, p| e.eval(&EvalContext::at(t, p)).unwrap_or(f64::NAN)
}

fn uniqueness(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &UniquenessParams,
    seed: u64,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    let shape = parse(&p.shape).map_err(config("uniqueness shape"))?;
    let radius = picard.resolved_radius(spec).map_err(solver("radius"))?;
    let steps = ((picard.window.min(spec.horizon) / picard.dt).round() as usize).max(1);
    let time = TimeGrid::with_step(0.0, picard.dt, steps).map_err(config("uniqueness"))?;

    let mut fractions = p.fractions.clone();
    let mut shapes: Vec<Expr> = vec![shape; p.fractions.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..p.random {
        let mut terms = Vec::new();
        for _ in 0..3 {
            let c: f64 = rng.gen_range(-1.0..1.0);
            let k: u32 = rng.gen_range(1..=4);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push(format!("({c})*cos({k}*x + {phase})"));
        }
        let src = format!("t*({})", terms.join(" + "));
        shapes.push(parse(&src).map_err(config("random shape"))?);
        fractions.push(rng.gen_range(-0.9..0.9));
    }

    let mut offsets = Vec::new();
    for (s, &fr) in shapes.iter().zip(&fractions) {
        let o = if fr == 0.0 {
            SpaceTimeField::constant(spec.grid, time, 0.0)
        } else {
            quasilinear::scaled_offset(spec.grid, time, shape_fn(s), fr.abs() * radius, spec.beta)
                .map_err(config("uniqueness shape"))?
                .scale(fr.signum())
        };
        offsets.push(o);
    }
    let r = quasilinear::uniqueness_probe(spec, picard, &offsets).map_err(solver("uniqueness"))?;

    let mut table = Table::new(&["run", "fraction", "iterations", "distance_to_first"]);
    for (i, (sol, trace)) in r.solutions.iter().zip(&r.traces).enumerate() {
        let common = sol.u.time().n_steps.min(r.solutions[0].u.time().n_steps);
        let a = sol.u.prefix(common).map_err(solver("uniqueness"))?;
        let b = r.solutions[0].u.prefix(common).map_err(solver("uniqueness"))?;
        let d = holder::picard_metric(&a, &b, spec.beta).map_err(solver("uniqueness"))?;
        table.row(&[
            i.to_string(),
            num(fractions[i]),
            trace.converged_iterations().to_string(),
            num(d),
        ]);
    }
    let threshold = p.tol_factor * picard.tol_fp;
    report.record("radius", radius);
    report.record("runs", offsets.len());
    report.record("max_deviation", r.max_deviation);
    report.record("threshold", threshold);
    report.check(
        "max_deviation",
        r.max_deviation <= threshold,
        format!("solutions differ by {:e} (> {:e})", r.max_deviation, threshold),
    );
    files.push(("uniqueness.csv".into(), table.into_bytes()));
    Ok(())
}

fn compat_necessity(
    spec: &ProblemSpec,
    picard: &PicardConfig,
    p: &CompatParams,
    report: &mut RunReport,
    files: &mut Files,
) -> Result<(), CliError> {
    if !spec.is_u_independent() {
        return Err(CliError::Config(
            "compat-necessity: coefficients must not depend on u or its gradient".into(),
        ));
    }
    if p.steps.len() < 2 {
        return Err(CliError::Config(
            "compat-necessity: need at least two step counts".into(),
        ));
    }
    let r = quasilinear::check_compatibility(spec).map_err(solver("compatibility"))?;
    let tol = picard.compat_tol.unwrap_or(1e-8 * r.scale);
    let compatible = r.max_abs <= tol;
    let alpha = spec.beta / 2.0;

    let mut table = Table::new(&["n_steps", "dt", "seminorm", "sup"]);
    let mut rows = Vec::new();
    for &n in &p.steps {
        let time = TimeGrid::new(0.0, spec.horizon, n).map_err(config("compat-necessity"))?;
        let lp = quasilinear::as_linear(spec, time).map_err(solver("compat-necessity"))?;
        let s = solve_linear(&lp, picard.scheme).map_err(solver("compat-necessity"))?;
        let dtu = holder::forward_difference(&s.u).map_err(solver("compat-necessity"))?;
        let semi = holder::time_holder_seminorm(&dtu, alpha, ValueNorm::BoundarySup).map_err(solver("seminorm"))?;
        let sup = holder::sup_in_time(&dtu, ValueNorm::BoundarySup).map_err(solver("seminorm"))?;
        table.row(&[n.to_string(), num(time.dt), num(semi), num(sup)]);
        rows.push((n, semi, sup));
    }
    report.record("compat_residual", r.max_abs);
    report.record("compat_tol", tol);
    report.record("mode", if compatible { "compatible" } else { "incompatible" });
    if compatible {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.1), hi.max(r.1))
        });
        let scale = rows.iter().fold(0.0f64, |m, r| m.max(r.1).max(r.2));
        let variation = if scale > 0.0 { (hi - lo) / scale } else { 0.0 };
        report.record("variation", variation);
        report.check(
            "variation",
            variation < p.max_variation,
            format!("relative variation {variation} is not below {}", p.max_variation),
        );
    } else {
        for w in rows.windows(2) {
            let g = w[1].1 / w[0].1;
            let key = format!("growth.{}->{}", w[0].0, w[1].0);
            report.record(key.clone(), g);
            report.check(
                &key,
                g >= p.min_growth,
                format!("{key} = {g} is below {}", p.min_growth),
            );
        }
    }
    files.push(("compat.csv".into(), table.into_bytes()));
    Ok(())
}
