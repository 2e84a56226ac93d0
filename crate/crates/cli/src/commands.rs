//! Subcommand pipelines. Each writes its artifacts into the output directory
//! and returns whether its checks passed.

use std::fmt::Display;
use std::path::Path;
use std::time::Instant;

use fsstokes::decaylab::{
    compare, fit_series, measure_observables, observable_plan, theoretical_exponent, DecaySetup, Exponent, ObservablePlan,
    Theorem, Verdict,
};
use fsstokes::lopatinskii::{calibrate_a0, logspace, solve_roots, CalibrationReport};
use fsstokes::resolvent::{kinematic_residual, resolve, wn_trace, ResolventSolution, SpectralProfile, TraceForm};
use fsstokes::semigroup::{evolve_piece, EvolutionRequest, FieldSnapshot, Lattice};
use fsstokes::symbols::make_spectral_point;
use fsstokes::verify::{all_pass, run_all, run_check, Baseline, CheckId, CheckReport, Mutation, VerifyConfig};
use fsstokes::{LabError, C64};
use serde::Serialize;

use crate::config::{DecayFitConfig, RunConfig};
use crate::manifest::{Manifest, Status};

/// Relative kinematic residual accepted by `resolvent`.
const KINEMATIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: Status,
    pub stage: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(stage: &'static str, msg: impl Display) -> Self {
        Self { status: Status::UsageError, stage, message: msg.to_string() }
    }
}

/// Bad inputs are usage errors; everything else the library reports is numerical.
fn lab(stage: &'static str) -> impl Fn(LabError) -> Failure {
    move |e| {
        let status = match e {
            LabError::InvalidInput(_) | LabError::OutOfScope(_) | LabError::Grid(_) => Status::UsageError,
            _ => Status::NumericalFailure,
        };
        Failure { status, stage, message: e.to_string() }
    }
}

fn io<E: Display>(e: E) -> Failure {
    Failure::usage("write", e)
}

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    pub manifest: &'a mut Manifest,
}

impl Context<'_> {
    fn record(&mut self, name: &str) {
        self.manifest.artifacts.push(name.to_string());
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let text = serde_json::to_string_pretty(value).map_err(io)?;
        std::fs::write(&path, text + "\n").map_err(io)?;
        self.record(name);
        Ok(())
    }

    fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), Failure> {
        std::fs::create_dir_all(self.out).map_err(io)?;
        let mut w = csv::Writer::from_path(self.out.join(name)).map_err(io)?;
        for r in rows {
            w.serialize(r).map_err(io)?;
        }
        w.flush().map_err(io)?;
        self.record(name);
        Ok(())
    }

    fn calibration(&self) -> Result<CalibrationReport, Failure> {
        let p = self.cfg.physical_params();
        let c = &self.cfg.calibration;
        match (c.a0, c.gamma0) {
            (Some(a0), Some(g0)) => CalibrationReport::from_overrides(&p, a0, g0),
            (None, None) => calibrate_a0(&p),
            (a0, g0) => calibrate_a0(&p).and_then(|auto| {
                CalibrationReport::from_overrides(&p, a0.unwrap_or(auto.a0), g0.unwrap_or(auto.gamma0))
            }),
        }
        .map_err(lab("calibration"))
    }
}

#[derive(Serialize)]
struct RootRow {
    a: f64,
    regime: String,
    label: String,
    b_re: f64,
    b_im: f64,
    lambda_re: f64,
    lambda_im: f64,
    physical: bool,
}

pub fn roots(ctx: &mut Context) -> Result<Status, Failure> {
    let r = &ctx.cfg.roots;
    let p = ctx.cfg.physical_params();
    let mut rows = Vec::with_capacity(4 * r.points);
    for a in logspace(r.a_min, r.a_max, r.points) {
        let rs = solve_roots(a, &p).map_err(lab("roots"))?;
        for i in 0..4 {
            rows.push(RootRow {
                a,
                regime: format!("{:?}", rs.regime),
                label: rs.labels[i].to_string(),
                b_re: rs.roots[i].re,
                b_im: rs.roots[i].im,
                lambda_re: rs.lambdas[i].re,
                lambda_im: rs.lambdas[i].im,
                physical: rs.roots[i].re >= 0.0,
            });
        }
    }
    ctx.write_csv("roots.csv", &rows)?;
    println!("roots: {} frequencies, {} rows", r.points, rows.len());
    Ok(Status::Success)
}

pub fn calibrate(ctx: &mut Context) -> Result<Status, Failure> {
    let c = ctx.calibration()?;
    ctx.write_json("calibration.json", &c)?;
    println!("calibrate: A0 = {}, gamma0 = {}, gamma_infty = {}", c.a0, c.gamma0, c.gamma_infty);
    Ok(Status::Success)
}

#[derive(Serialize)]
struct ResolventOutput {
    solution: ResolventSolution,
    dhat: C64,
    /// Boundary trace of the velocity part, in its two equivalent forms.
    trace_b_form: Option<C64>,
    trace_a_form: Option<C64>,
    trace_disagreement: Option<f64>,
    trace_tol: f64,
    kinematic_residual: f64,
    kinematic_tol: f64,
    pass: bool,
}

pub fn resolvent(ctx: &mut Context) -> Result<Status, Failure> {
    let cfg = ctx.cfg;
    let p = cfg.physical_params();
    let data = cfg.initial_data();
    let xi = &cfg.resolvent.xi;
    let lambda = C64::new(cfg.resolvent.lambda[0], cfg.resolvent.lambda[1]);
    let stage = lab("resolvent");
    let sp = make_spectral_point(xi, lambda, &p).map_err(&stage)?;
    let rule = data.y_rule();
    let tables = data.y_tables(&rule.0);
    let profile = data.f_profile(xi, &rule, &tables).unwrap_or_else(|| SpectralProfile::zero(xi));
    let dhat = data.dhat(xi);
    let solution = resolve(&sp, &profile, dhat, &p, &cfg.resolvent.x_nodes).map_err(&stage)?;
    let (tb, ta) = if profile.is_zero() {
        (None, None)
    } else {
        (
            Some(wn_trace(&sp, &profile, TraceForm::BForm).map_err(&stage)?),
            Some(wn_trace(&sp, &profile, TraceForm::AForm).map_err(&stage)?),
        )
    };
    let disagreement = tb.zip(ta).map(|(b, a)| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE));
    let kin = kinematic_residual(&sp, &profile, dhat, &p).map_err(&stage)?;
    let pass = disagreement.is_none_or(|d| d <= cfg.tolerances.trace) && kin <= KINEMATIC_TOL;
    let out = ResolventOutput {
        solution,
        dhat,
        trace_b_form: tb,
        trace_a_form: ta,
        trace_disagreement: disagreement,
        trace_tol: cfg.tolerances.trace,
        kinematic_residual: kin,
        kinematic_tol: KINEMATIC_TOL,
        pass,
    };
    ctx.write_json("resolvent.json", &out)?;
    println!(
        "resolvent: h = {}, kinematic residual {:.3e}, trace disagreement {}",
        out.solution.hhat,
        kin,
        disagreement.map_or("n/a".into(), |d| format!("{d:.3e}"))
    );
    Ok(if pass { Status::Success } else { Status::CheckFailure })
}

/// Header describing the raw snapshot dump.
#[derive(Serialize)]
struct DumpHeader<'a> {
    format: &'static str,
    dtype: &'static str,
    byte_order: &'static str,
    /// Index order of the values, slowest first.
    layout: &'static str,
    times: Vec<f64>,
    components: usize,
    lattice: &'a Lattice,
    x_axis: &'a [f64],
    x_nodes: &'a [f64],
    extrapolation: Vec<bool>,
    imag_residue: Vec<f64>,
    request: &'a EvolutionRequest,
}

fn snapshot_csv(path: &Path, snaps: &[FieldSnapshot], axes: usize) -> Result<usize, Failure> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["t".to_string(), "component".to_string()];
    header.extend((1..=axes).map(|i| format!("i{i}")));
    header.extend((1..=axes).map(|i| format!("x{i}")));
    header.extend(["x_n".to_string(), "value".to_string()]);
    w.write_record(&header).map_err(io)?;
    let mut rows = 0;
    for s in snaps {
        let n = s.lattice.n;
        for c in 0..s.ncomp {
            for p in 0..s.points() {
                let idx: Vec<usize> = if axes == 1 { vec![p] } else { vec![p / n, p % n] };
                for (ix, xn) in s.x_nodes.iter().enumerate() {
                    let mut rec = vec![s.t.to_string(), c.to_string()];
                    rec.extend(idx.iter().map(|i| i.to_string()));
                    rec.extend(idx.iter().map(|&i| s.x_axis[i].to_string()));
                    rec.push(xn.to_string());
                    rec.push(s.get(c, p, ix).to_string());
                    w.write_record(&rec).map_err(io)?;
                    rows += 1;
                }
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(rows)
}

pub fn evolve(ctx: &mut Context) -> Result<Status, Failure> {
    let cfg = ctx.cfg;
    let e = &cfg.evolve;
    let p = cfg.physical_params();
    let data = cfg.initial_data();
    let calib = ctx.calibration()?;
    let grid = cfg.grid_for(e.operator).map_err(lab("grid"))?;
    let req = EvolutionRequest::new(e.operator, e.part, e.data_part, cfg.times.clone(), cfg.tolerances.quadrature)
        .with_derivative(cfg.evolve_derivative());
    let snaps = evolve_piece(&req, &data, &calib, &p, &grid).map_err(lab("evolve"))?;
    std::fs::create_dir_all(ctx.out).map_err(io)?;
    let axes = grid.lattice.axes();
    let rows = snapshot_csv(&ctx.out.join("evolve.csv"), &snaps, axes)?;
    ctx.record("evolve.csv");
    let mut bytes = Vec::with_capacity(snaps.iter().map(|s| s.values.len() * 8).sum());
    for s in &snaps {
        for v in &s.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(ctx.out.join("evolve.bin"), &bytes).map_err(io)?;
    ctx.record("evolve.bin");
    let first = &snaps[0];
    let header = DumpHeader {
        format: "fsstokes-snapshots-1",
        dtype: "f64",
        byte_order: "little",
        layout: "time, component, lattice point (row-major over tangential axes), x_n node",
        times: snaps.iter().map(|s| s.t).collect(),
        components: first.ncomp,
        lattice: &first.lattice,
        x_axis: &first.x_axis,
        x_nodes: &first.x_nodes,
        extrapolation: snaps.iter().map(|s| s.extrapolation).collect(),
        imag_residue: snaps.iter().map(|s| s.imag_residue).collect(),
        request: &req,
    };
    ctx.write_json("evolve.json", &header)?;
    let extrap = snaps.iter().filter(|s| s.extrapolation).count();
    println!("evolve: {} snapshots, {rows} rows{}", snaps.len(), if extrap > 0 { format!(", {extrap} labeled extrapolation (t < 1)") } else { String::new() });
    Ok(Status::Success)
}

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    norm: f64,
    in_fit: bool,
}

#[derive(Serialize)]
struct DecayVerdict<'a> {
    spec: &'a DecayFitConfig,
    plan: &'a ObservablePlan,
    theoretical: Exponent,
    window: (f64, f64),
    fitted_slope: f64,
    fit_residual: f64,
    verdict: Verdict,
}

pub fn decay_fit(ctx: &mut Context) -> Result<Status, Failure> {
    let cfg = ctx.cfg;
    let d = &cfg.decay_fit;
    let spec = d.spec();
    let dim = cfg.params.dim;
    let stage = lab("decay-fit");
    let mut theoretical = theoretical_exponent(&spec, dim).map_err(&stage)?;
    let plan = observable_plan(&spec, dim).map_err(&stage)?;
    let calib = ctx.calibration()?;
    if let Exponent::Exponential(None) = theoretical {
        let delta = if spec.theorem == Theorem::Gam3Exponential { calib.gamma0 } else { calib.gamma_infty };
        theoretical = Exponent::Exponential(Some(delta));
    }
    let p = cfg.physical_params();
    let data = cfg.initial_data();
    let grid = cfg.decay_grid(plan.operator).map_err(lab("grid"))?;
    let setup = DecaySetup { params: &p, calib: &calib, data: &data, grid: &grid, tol: cfg.tolerances.quadrature };
    let times = d.times.clone().unwrap_or_else(|| cfg.times.clone());
    let window = d.window.map_or((times[0], times[times.len() - 1]), |w| (w[0], w[1]));
    let norms = measure_observables(&setup, plan.operator, plan.part, plan.data_part, &[plan.derivatives.clone()], &times, spec.q)
        .map_err(&stage)?
        .remove(0);
    let series = fit_series(spec, &times, &norms, theoretical, window).map_err(&stage)?;
    let verdict = compare(&series, d.tolerance).map_err(&stage)?;
    let rows: Vec<SeriesRow> =
        (0..times.len()).map(|i| SeriesRow { t: times[i], norm: norms[i], in_fit: series.envelope[i] }).collect();
    ctx.write_csv("decay_series.csv", &rows)?;
    let pass = verdict.pass;
    let out = DecayVerdict {
        spec: d,
        plan: &plan,
        theoretical,
        window,
        fitted_slope: series.fitted_slope,
        fit_residual: series.fit_residual,
        verdict,
    };
    ctx.write_json("decay_verdict.json", &out)?;
    println!(
        "decay-fit: slope {:.4} vs bound {:.4} ({})",
        out.fitted_slope,
        out.verdict.bound,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { Status::Success } else { Status::CheckFailure })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    check_id: &'a str,
    name: &'a str,
    pass: bool,
    pass_rate: f64,
    worst_margin: f64,
}

#[derive(Serialize)]
struct DriftRow {
    check_id: String,
    constant: String,
    baseline: f64,
    current: f64,
}

/// Options given on the `verify` command line.
#[derive(Debug, Clone, Default)]
pub struct VerifyArgs {
    pub checks: Vec<String>,
    pub seed: Option<u64>,
    pub baseline: Option<std::path::PathBuf>,
    pub write_baseline: Option<std::path::PathBuf>,
}

pub fn verify(ctx: &mut Context, args: &VerifyArgs) -> Result<Status, Failure> {
    let cfg = ctx.cfg;
    let vc = VerifyConfig {
        params: cfg.physical_params(),
        seed: args.seed.unwrap_or(cfg.seed),
        sample_scale: cfg.verify.sample_scale,
        mutation: Mutation::None,
    };
    let names: Vec<&String> = args.checks.iter().chain(&cfg.verify.checks).collect();
    let mut ids = Vec::new();
    for n in names {
        let id = CheckId::parse(n).map_err(|e| Failure::usage("config", e))?;
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    let baseline = match &args.baseline {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::usage("baseline", format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str::<Baseline>(&text).map_err(|e| Failure::usage("baseline", format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let start = Instant::now();
    let reports: Vec<CheckReport> = if ids.is_empty() {
        run_all(&vc).map_err(lab("verify"))?
    } else {
        ids.sort_by_key(|id| id.index());
        ids.iter().map(|&id| run_check(id, &vc)).collect::<Result<_, _>>().map_err(lab("verify"))?
    };
    let elapsed = start.elapsed().as_secs_f64();
    for r in &reports {
        ctx.manifest.check_runtimes_s.insert(r.check_id.clone(), r.runtime);
        ctx.write_json(&format!("verify/{}.json", r.check_id), r)?;
        println!(
            "{:<4} {:<22} {} pass rate {:.4} worst margin {:.3e}",
            r.check_id,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.pass_rate,
            r.worst_margin
        );
    }
    let summary: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow { check_id: &r.check_id, name: &r.name, pass: r.pass, pass_rate: r.pass_rate, worst_margin: r.worst_margin })
        .collect();
    ctx.write_json("verify/summary.json", &summary)?;
    let mut pass = all_pass(&reports);
    if let Some(base) = baseline {
        let drift: Vec<DriftRow> = base
            .drift(&reports)
            .into_iter()
            .map(|(check_id, constant, baseline, current)| DriftRow { check_id, constant, baseline, current })
            .collect();
        for d in &drift {
            println!("drift {} {}: baseline {} current {}", d.check_id, d.constant, d.baseline, d.current);
        }
        pass &= drift.is_empty();
        ctx.write_json("verify/drift.json", &drift)?;
    }
    if let Some(path) = &args.write_baseline {
        let text = serde_json::to_string_pretty(&Baseline::from_reports(&reports)).map_err(io)?;
        std::fs::write(path, text + "\n").map_err(io)?;
    }
    println!(
        "verify: {}/{} checks passed in {elapsed:.1}s",
        reports.iter().filter(|r| r.pass).count(),
        reports.len()
    );
    Ok(if pass { Status::Success } else { Status::CheckFailure })
}
