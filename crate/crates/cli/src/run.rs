//! Command orchestration: every run writes its artifacts, a `summary.txt`
//! and a `manifest.txt` into the output directory.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use specrecon::analytic::{eigen_residuals, find_eigenvalues, BoundaryPair, EigenvalueList, SearchRegion};
use specrecon::cauchy::cauchy_data_of;
use specrecon::gl::{reconstruct_q, weyl_data};
use specrecon::half_inverse::{
    build_boundary_pair, dirichlet_spectrum, estimate_omega, solve_half_inverse_with, HalfInverseInstance,
    HalfInverseOptions,
};
use specrecon::recon::{
    build_vsystem, condition_report, element_of, recovered_cauchy, solve_moment, ConditionReport, MomentSolution,
    Regularization,
};
use specrecon::stability::{sweep, StabilityOptions};
use specrecon::sturm::{branch_sqrt, fmt_f64, omega_of, Potential};
use specrecon::Error;

use crate::config::{Command, ConditionPolicy, OmegaSource, RunConfig};
use crate::plot::{emit_plotdata, Table};

/// Why a run stopped early.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(Error),
    Condition(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Condition(_) => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Condition(m) => write!(f, "condition check failed: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::ConditionViolation(m) => RunError::Condition(m),
            other => RunError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Numerical(Error::Io(e))
    }
}

type RunResult<T> = Result<T, RunError>;

struct Context<'a> {
    cfg: &'a RunConfig,
    quiet: bool,
    timings: Vec<(String, f64)>,
    summary: Vec<(String, String)>,
}

impl Context<'_> {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[{}] {msg}", self.cfg.command.name());
        }
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> RunResult<T>) -> RunResult<T> {
        self.log(stage);
        let start = Instant::now();
        let out = f();
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn file(&self, name: &str) -> RunResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.cfg.out.join(name))?))
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> specrecon::Result<()>) -> RunResult<()> {
        let mut w = self.file(name)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn c_str(z: Complex64) -> String {
    format!("{} {}", fmt_f64(z.re), fmt_f64(z.im))
}

/// Runs the configured command and returns the process exit code.
pub fn run(cfg: &RunConfig, quiet: bool) -> i32 {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("cannot create {}: {e}", cfg.out.display());
        return 2;
    }
    let mut ctx = Context { cfg, quiet, timings: Vec::new(), summary: Vec::new() };
    let total = Instant::now();
    let result = match cfg.command {
        Command::ForwardSpectrum => forward_spectrum(&mut ctx),
        Command::Cauchy => cauchy(&mut ctx),
        Command::Reconstruct => reconstruct(&mut ctx),
        Command::HalfInverse => half_inverse(&mut ctx),
        Command::Stability => stability(&mut ctx),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    };
    if let Err(e) = &result {
        eprintln!("{e}");
        let _ = std::fs::write(
            cfg.out.join("diagnostic.txt"),
            format!("exit_code = {code}\nerror = {e}\ndetail = {e:?}\n"),
        );
    }
    let _ = write_summary(&ctx);
    let _ = write_manifest(&ctx, started, total.elapsed().as_secs_f64(), code);
    code
}

fn write_summary(ctx: &Context) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(ctx.cfg.out.join("summary.txt"))?);
    for (k, v) in &ctx.summary {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()
}

fn write_manifest(ctx: &Context, started: u64, total: f64, code: i32) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(ctx.cfg.out.join("manifest.txt"))?);
    writeln!(w, "# config")?;
    write!(w, "{}", ctx.cfg.echo())?;
    writeln!(w, "# versions")?;
    writeln!(w, "specrecon = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "threads = {}", rayon::current_num_threads())?;
    writeln!(w, "# timings (seconds)")?;
    writeln!(w, "started_unix = {started}")?;
    for (stage, secs) in &ctx.timings {
        writeln!(w, "time.{} = {secs:.3}", stage.replace(' ', "_"))?;
    }
    writeln!(w, "time.total = {total:.3}")?;
    writeln!(w, "exit_code = {code}")?;
    w.flush()
}

fn boundary(cfg: &RunConfig) -> RunResult<BoundaryPair> {
    BoundaryPair::parse(&cfg.boundary).map_err(|e| RunError::Config(e.to_string()))
}

fn regularization(cfg: &RunConfig) -> Regularization {
    if cfg.tau_absolute {
        Regularization::Absolute(cfg.tau)
    } else {
        Regularization::Relative(cfg.tau)
    }
}

fn load_spectrum(cfg: &RunConfig) -> RunResult<Option<EigenvalueList>> {
    cfg.spectrum
        .as_ref()
        .map(|p| EigenvalueList::read_csv_path(p).map_err(RunError::from))
        .transpose()
}

fn potential_table(q: &Potential, truth: Option<&Potential>) -> Table {
    let mut names = vec!["x", "re_q", "im_q"];
    if truth.is_some() {
        names.extend(["re_true", "im_true"]);
    }
    let mut t = Table::new(&names);
    for (k, v) in q.values().iter().enumerate() {
        let mut row = vec![q.grid().x(k), v.re, v.im];
        if let Some(tr) = truth {
            row.extend([tr.values()[k].re, tr.values()[k].im]);
        }
        t.push(row);
    }
    t
}

fn forward_spectrum(ctx: &mut Context) -> RunResult<()> {
    let cfg = ctx.cfg;
    let n = cfg.n;
    let (evs, omega_like, scale) = if cfg.two_pi {
        if cfg.boundary != "dirichlet" {
            return Err(RunError::Config("interval = two_pi supports only the Dirichlet boundary".into()));
        }
        let q = cfg.potential.load(cfg.grid_two_pi())?;
        let evs = ctx.timed("spectrum", || Ok(dirichlet_spectrum(&q, n)?))?;
        (evs, 0.5 * q.integral(), 0.5)
    } else {
        let q = cfg.potential.load(cfg.grid_pi())?;
        let bp = boundary(cfg)?;
        let evs = ctx.timed("spectrum", || {
            Ok(find_eigenvalues(&bp, &q, &SearchRegion::for_count(n))?)
        })?;
        if evs.last_index() < n {
            return Err(RunError::Numerical(Error::RootCountMismatch { counted: n, refined: evs.last_index() }));
        }
        let res = ctx.timed("residuals", || Ok(eigen_residuals(&bp, &q, &evs)?))?;
        ctx.write("eigen_residuals.csv", |w| {
            writeln!(w, "re_lambda,im_lambda,residual")?;
            for (l, r) in &res {
                writeln!(w, "{},{},{}", fmt_f64(l.re), fmt_f64(l.im), fmt_f64(*r))?;
            }
            Ok(())
        })?;
        (evs, omega_of(&q)?, 1.0)
    };
    ctx.write("spectrum.csv", |w| evs.write_csv(w))?;
    // √λ_n against the leading asymptotics `scale·n + Ω/(π n)`.
    let mut t = Table::new(&["n", "re_sqrt_lambda", "im_sqrt_lambda", "asymptotic"]);
    for (k, &l) in evs.values().iter().enumerate().skip(1) {
        let r = branch_sqrt(l);
        let nf = k as f64;
        t.push(vec![nf, r.re, r.im, scale * nf + omega_like.re / (PI * nf)]);
    }
    emit_plotdata(&t, &cfg.out.join("asymptotics.dat"))?;
    ctx.note("eigenvalues", evs.last_index());
    ctx.note("omega", c_str(omega_like));
    Ok(())
}

fn cauchy(ctx: &mut Context) -> RunResult<()> {
    let cfg = ctx.cfg;
    let q = cfg.potential.load(cfg.grid_pi())?;
    let cd = ctx.timed("cauchy data", || Ok(cauchy_data_of(&q, cfg.modes)?))?;
    ctx.write("cauchy.csv", |w| cd.write_csv(w))?;
    let count = cfg.weyl_count.unwrap_or(20);
    let wd = ctx.timed("weyl data", || Ok(weyl_data(&cd, count)?))?;
    ctx.write("weyl.csv", |w| wd.write_csv(w))?;
    let mut t = Table::new(&["t", "re_K", "im_K", "re_N", "im_N"]);
    for (k, (kv, nv)) in cd.k().iter().zip(cd.n()).enumerate() {
        t.push(vec![cd.grid().x(k), kv.re, kv.im, nv.re, nv.im]);
    }
    emit_plotdata(&t, &cfg.out.join("cauchy.dat"))?;
    ctx.note("omega", c_str(cd.omega()));
    ctx.note("weyl_poles", wd.len());
    ctx.note("n1", wd.n1);
    ctx.note("gamma0_radius", fmt_f64(wd.gamma0_radius));
    Ok(())
}

fn write_conditions(ctx: &mut Context, report: &ConditionReport) -> RunResult<()> {
    let n = ctx.cfg.n;
    ctx.write("condition.csv", |w| report.write_csv(w, n))?;
    let violations = report.violations(n);
    ctx.note("violations", if violations.is_empty() { "none".to_string() } else { violations.join(";") });
    if !violations.is_empty() {
        match ctx.cfg.conditions {
            ConditionPolicy::Abort => return Err(RunError::Condition(violations.join(", "))),
            ConditionPolicy::Report => ctx.log(&format!("continuing despite: {}", violations.join(", "))),
        }
    }
    Ok(())
}

fn write_moment(ctx: &mut Context, m: &MomentSolution) -> RunResult<()> {
    ctx.write("u.csv", |w| m.u.write_csv(w))?;
    ctx.write("residuals.csv", |w| m.write_residuals(w))?;
    std::fs::write(ctx.cfg.out.join("gram_cond.txt"), format!("{}\n", fmt_f64(m.gram_cond)))?;
    ctx.note("gram_cond", fmt_f64(m.gram_cond));
    ctx.note("tau", fmt_f64(m.tau));
    ctx.note("max_residual", fmt_f64(m.max_residual()));
    ctx.note("ill_conditioned", m.ill_conditioned);
    Ok(())
}

fn reconstruct(ctx: &mut Context) -> RunResult<()> {
    let cfg = ctx.cfg;
    let n = cfg.n;
    let grid = cfg.grid_pi();
    let q = cfg.potential.load(grid)?;
    let bp = boundary(cfg)?;
    let omega = omega_of(&q)?;
    let evs = match load_spectrum(cfg)? {
        Some(e) => e,
        None => ctx.timed("spectrum", || Ok(find_eigenvalues(&bp, &q, &SearchRegion::for_count(n))?))?,
    };
    if evs.last_index() < n {
        return Err(RunError::Config(format!("need {n} eigenvalues, have {}", evs.last_index())));
    }
    let evs = evs.truncated(n);
    ctx.write("spectrum.csv", |w| evs.write_csv(w))?;
    let report = ctx.timed("conditions", || Ok(condition_report(&bp, &evs)?))?;
    write_conditions(ctx, &report)?;
    let vs = ctx.timed("vector system", || Ok(build_vsystem(&bp, &evs, omega, n, grid)?))?;
    let m = ctx.timed("moment solve", || Ok(solve_moment(&vs, regularization(cfg))?))?;
    write_moment(ctx, &m)?;
    let cd = recovered_cauchy(&m.u, omega)?;
    ctx.write("cauchy_recovered.csv", |w| cd.write_csv(w))?;
    let truth = ctx.timed("true cauchy data", || Ok(cauchy_data_of(&q, cfg.modes)?))?;
    let te = element_of(&truth);
    let k_err = specrecon::quad::l2_distance(&grid.weights(), &te.h2, &m.u.h2);
    let n_err = specrecon::quad::l2_distance(&grid.weights(), &te.h1, &m.u.h1);
    ctx.note("omega", c_str(omega));
    ctx.note("k_error", fmt_f64(k_err));
    ctx.note("n_error", fmt_f64(n_err));
    if cfg.gl {
        let count = cfg.weyl_count.unwrap_or(n / 4).max(2);
        let wd = ctx.timed("weyl data", || Ok(weyl_data(&cd, count)?))?;
        ctx.write("weyl.csv", |w| wd.write_csv(w))?;
        let rec = ctx.timed("gelfand-levitan", || Ok(reconstruct_q(&wd, omega, grid)?))?;
        ctx.write("q.txt", |w| rec.write(w))?;
        emit_plotdata(&potential_table(&rec, Some(&q)), &cfg.out.join("q.dat"))?;
        ctx.note("q_error", fmt_f64(rec.l2_distance(&q)?));
    }
    Ok(())
}

fn half_inverse(ctx: &mut Context) -> RunResult<()> {
    let cfg = ctx.cfg;
    let n = cfg.n;
    let grid = cfg.grid_pi();
    let q_left = cfg.potential.load(grid)?;
    let known = cfg.known.load(cfg.grid_two_pi())?;
    let full = Potential::splice(&q_left, &known)?;
    let spectrum = match load_spectrum(cfg)? {
        Some(e) => e,
        None => ctx.timed("spectrum", || Ok(dirichlet_spectrum(&full, n)?))?,
    };
    if spectrum.last_index() < n {
        return Err(RunError::Config(format!("need {n} eigenvalues, have {}", spectrum.last_index())));
    }
    ctx.write("spectrum.csv", |w| spectrum.write_csv(w))?;
    let big_omega = match cfg.omega_source {
        OmegaSource::Exact => 0.5 * full.integral(),
        OmegaSource::Fit => estimate_omega(&spectrum)?,
    };
    ctx.note("big_omega", c_str(big_omega));
    let inst = HalfInverseInstance::new(known.clone(), spectrum, big_omega)?;
    let bp = build_boundary_pair(&known)?;
    let report = ctx.timed("conditions", || Ok(condition_report(&bp, &inst.spectrum.truncated(n))?))?;
    write_conditions(ctx, &report)?;
    let opts = HalfInverseOptions {
        regularization: regularization(cfg),
        weyl_count: cfg.weyl_count,
        grid,
        check_conditions: false,
    };
    let sol = ctx.timed("solve", || Ok(solve_half_inverse_with(&inst, n, opts)?))?;
    write_moment(ctx, &sol.moment)?;
    ctx.write("cauchy_recovered.csv", |w| sol.cauchy.write_csv(w))?;
    ctx.write("weyl.csv", |w| sol.weyl.write_csv(w))?;
    ctx.write("q.txt", |w| sol.q.write(w))?;
    emit_plotdata(&potential_table(&sol.q, Some(&q_left)), &cfg.out.join("q.dat"))?;
    ctx.note("omega", c_str(sol.omega));
    ctx.note("weyl_poles", sol.weyl.len());
    ctx.note("q_norm", fmt_f64(sol.q.l2_norm()));
    ctx.note("q_error", fmt_f64(sol.q.l2_distance(&q_left)?));
    Ok(())
}

fn stability(ctx: &mut Context) -> RunResult<()> {
    let cfg = ctx.cfg;
    let q = cfg.potential.load(cfg.grid_pi())?;
    let opts = StabilityOptions {
        weyl_count: cfg.weyl_count.unwrap_or(StabilityOptions::default().weyl_count),
        grid: cfg.grid_pi(),
        cauchy_modes: cfg.modes,
    };
    let s = ctx.timed("sweep", || {
        Ok(sweep(&q, &cfg.noise_delta, cfg.noise_modes, cfg.trials, cfg.seed, opts)?)
    })?;
    ctx.write("trials.csv", |w| s.write_trials(w))?;
    ctx.write("stability.csv", |w| s.write_summary(w))?;
    let mut t = Table::new(&["delta", "median_Xi", "median_q_err", "median_C_est"]);
    for l in s.levels.iter().filter(|l| l.succeeded > 0) {
        t.push(vec![l.delta, l.xi, l.q_err, l.c_est]);
    }
    if !t.rows.is_empty() {
        emit_plotdata(&t, &cfg.out.join("stability.dat"))?;
    }
    ctx.note("floor", fmt_f64(s.floor));
    ctx.note("slope", fmt_f64(s.slope()));
    ctx.note("xi_l2_ratio_variation", fmt_f64(s.xi_l2_variation()));
    ctx.note("m_gamma0_ratio_variation", fmt_f64(s.m_gamma0_variation()));
    ctx.note("breakdown_amplitude", s.breakdown_amplitude().map_or("none".into(), fmt_f64));
    Ok(())
}
