//! One function per subcommand. Each computes everything in memory and
//! returns an [`Output`]; nothing touches the disk until the caller writes it.

use std::fmt::Write as _;

use reservoir_hydro::kmc::{block_average, run_replicas, simulate_with, Method};
use reservoir_hydro::measures::{
    entropy_bound, initial_measure, matched_reference_level, relative_entropy, reservoir_entropy_term,
    reversible_measure, sample_with,
};
use reservoir_hydro::oracle::poisson_field;
use reservoir_hydro::pde::{
    solve_fd_with, solve_spectral_with, Backend, Boundary, FdOptions, PdeProblem, PdeSolution, SpectralOptions,
    WentzellScheme,
};
use reservoir_hydro::verify::{
    default_test_functions, equivalence_report, fmt_float, hydro_test, local_equilibrium_test, oracle_gap_ladder,
    stationarity_test_from, Harness, PdeSettings, StatReport, StatRow, TestFunction, Thresholds,
};
use reservoir_hydro::{Configuration, ModelKind, ModelParams};
use serde_json::{json, Value};

use crate::config::{keys, profile_from, Origin, Resolved, Setting, SWEEPABLE};
use crate::error::CliError;

type Res<T> = Result<T, CliError>;

#[derive(Debug, Default)]
pub struct Output {
    /// (file name, contents).
    pub files: Vec<(String, String)>,
    /// None for commands without a verification verdict.
    pub verdict: Option<bool>,
    /// Lines for stdout.
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub extra: serde_json::Map<String, Value>,
    /// Sweep points: (subdirectory, resolved config, output).
    pub children: Vec<(String, Resolved, Output)>,
}

impl Output {
    fn report(report: StatReport) -> Output {
        let verdict = report.passed();
        let failing = report.failures().count();
        let mut summary = vec![format!(
            "{}: {} ({} rows, {failing} failing, sample size {})",
            report.name,
            if verdict { "pass" } else { "fail" },
            report.rows.len(),
            report.sample_size
        )];
        for r in report.failures().take(10) {
            summary.push(format!("  fail {} N={} t={} statistic={:.4e} threshold={:.4e}", r.test, r.n, r.t, r.statistic, r.threshold));
        }
        Output { files: vec![("stats.csv".into(), report.to_csv())], verdict: Some(verdict), summary, ..Output::default() }
    }
}

pub fn run(r: &Resolved) -> Res<Output> {
    match r.command.as_str() {
        "simulate" => simulate(r),
        "oracle" => oracle(r),
        "solve" => solve(r),
        "verify-local-eq" => verify_local_eq(r),
        "verify-hydro" => verify_hydro(r),
        "verify-stationarity" => verify_stationarity(r),
        "equivalence" => equivalence(r),
        "entropy" => entropy(r),
        "sweep" => sweep(r),
        other => Err(CliError::input(format!("unknown command '{other}'"))),
    }
}

fn positive(r: &Resolved, key: &str, v: f64) -> Res<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        let s = r.setting(key)?;
        Err(CliError::input_at(format!("{key} must be positive, got {v}"), s.origin.clone()))
    }
}

fn count(r: &Resolved, key: &str, min: usize) -> Res<usize> {
    let v: usize = r.parse(key)?;
    if v < min {
        let s = r.setting(key)?;
        return Err(CliError::input_at(format!("{key} must be at least {min}, got {v}"), s.origin.clone()));
    }
    Ok(v)
}

fn params(r: &Resolved, kind: ModelKind, n: usize) -> Res<ModelParams> {
    Ok(ModelParams::new(kind, n, r.parse("theta")?, r.parse("alpha")?)?)
}

fn harness(r: &Resolved) -> Res<Harness> {
    let mut th = Thresholds::default();
    let fields: [(&str, &mut f64); 5] = [
        ("threshold.local_tv", &mut th.local_tv),
        ("threshold.correlation_factor", &mut th.correlation_factor),
        ("threshold.oracle_gap", &mut th.oracle_gap),
        ("threshold.hydro_deviation", &mut th.hydro_deviation),
        ("threshold.stationarity_tv", &mut th.stationarity_tv),
    ];
    for (k, slot) in fields {
        if let Some(v) = r.opt::<f64>(k)? {
            *slot = positive(r, k, v)?;
        }
    }
    let mut pde = PdeSettings::default();
    if let Some(b) = r.opt::<String>("pde.backend")? {
        pde.backend = parse_core(r, "pde.backend", &b)?;
    }
    if r.has("pde.K") {
        pde.modes = count(r, "pde.K", 8)?;
    }
    if r.has("pde.nx") {
        pde.nx = count(r, "pde.nx", 16)?;
    }
    if let Some(dt) = r.opt::<f64>("pde.dt")? {
        pde.dt = positive(r, "pde.dt", dt)?;
    }
    let method = match r.opt::<String>("method")? {
        Some(m) => parse_core::<Method>(r, "method", &m)?,
        None => Method::Particlewise,
    };
    Ok(Harness { thresholds: th, pde, method })
}

/// Parses with a core `FromStr`, attributing errors to the key's source.
fn parse_core<T: std::str::FromStr<Err = reservoir_hydro::Error>>(r: &Resolved, key: &str, text: &str) -> Res<T> {
    text.parse::<T>().map_err(|e| {
        let origin = r.setting(key).map(|s| s.origin.clone()).unwrap_or(Origin::Default);
        let msg = match e {
            reservoir_hydro::Error::Input(m) => m,
            other => other.to_string(),
        };
        CliError::input_at(format!("{key}: {msg}"), origin)
    })
}

fn kind(r: &Resolved) -> Res<ModelKind> {
    let s = r.str("model")?.to_string();
    parse_core(r, "model", &s)
}

fn times(r: &Resolved, key: &str) -> Res<Vec<f64>> {
    let t: Vec<f64> = r.list(key)?;
    let s = r.setting(key)?;
    if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::input_at(format!("{key} must be nonnegative and strictly increasing"), s.origin.clone()));
    }
    Ok(t)
}

fn density_csv(rows: impl Iterator<Item = (f64, f64, f64)>) -> String {
    let mut s = String::from("t,u,value\n");
    for (t, u, v) in rows {
        let _ = writeln!(s, "{},{},{}", fmt_float(t), fmt_float(u), fmt_float(v));
    }
    s
}

fn trace_csv(rows: impl Iterator<Item = (f64, Option<f64>, f64)>) -> String {
    let mut s = String::from("t,m,boundary_value\n");
    for (t, m, b) in rows {
        let _ = writeln!(s, "{},{},{}", fmt_float(t), m.map(fmt_float).unwrap_or_default(), fmt_float(b));
    }
    s
}

fn simulate(r: &Resolved) -> Res<Output> {
    let kind = kind(r)?;
    let n = count(r, "N", 2)?;
    let p = params(r, kind, n)?;
    let profile = r.profile("profile")?;
    let times = times(r, "times")?;
    let replicas = count(r, "replicas", 1)?;
    let seed: u64 = r.parse("seed")?;
    let method: Method = parse_core(r, "method", r.str("method")?)?;
    let eps: f64 = match r.str("eps")? {
        s if s.trim().eq_ignore_ascii_case("auto") => 0.05f64.max(1.0 / n as f64),
        _ => r.parse("eps")?,
    };
    if let Err(reservoir_hydro::Error::Input(m)) = block_average(&Configuration::zero(n), 0, eps) {
        return Err(CliError::input_at(format!("eps: {m}"), r.setting("eps")?.origin.clone()));
    }
    let measure = initial_measure(&profile, &p)?;
    let runs = run_replicas(replicas, seed, |_, rng| {
        let init = sample_with(&measure, rng)?;
        simulate_with(&init, &p, &times, method, rng)
    })?;
    let t_grid = runs[0].0.clone();
    let mut mean = vec![vec![0.0; n + 1]; t_grid.len()];
    let mut block = vec![0.0; t_grid.len()];
    for (_, states) in &runs {
        for (i, cfg) in states.iter().enumerate() {
            for (acc, &v) in mean[i].iter_mut().zip(&cfg.occupations) {
                *acc += v as f64;
            }
            block[i] += block_average(cfg, 0, eps)?;
        }
    }
    let scale = 1.0 / replicas as f64;
    let nf = n as f64;
    let density = density_csv(t_grid.iter().zip(&mean).flat_map(|(&t, row)| {
        (1..=n).map(move |x| (t, x as f64 / nf, row[x] * scale))
    }));
    let trace = trace_csv(t_grid.iter().enumerate().map(|(i, &t)| (t, Some(mean[i][0] * scale / nf), block[i] * scale)));
    let mut out = Output { files: vec![("density.csv".into(), density), ("trace.csv".into(), trace)], ..Output::default() };
    out.summary.push(format!("simulated {replicas} replicas of {} with N={n}, theta={}", kind.name(), p.theta));
    Ok(out)
}

fn oracle(r: &Resolved) -> Res<Output> {
    let n = count(r, "N", 2)?;
    let p = params(r, ModelKind::Rw, n)?;
    let profile = r.profile("profile")?;
    profile.validate_density(ModelKind::Rw, p.theta)?;
    let times = times(r, "times")?;
    let fields = times.iter().map(|&t| poisson_field(&profile, t, &p)).collect::<reservoir_hydro::Result<Vec<_>>>()?;
    let nf = n as f64;
    let density = density_csv(
        times.iter().zip(&fields).flat_map(|(&t, psi)| (1..=n).map(move |x| (t, x as f64 / nf, psi[x]))),
    );
    let trace = trace_csv(times.iter().zip(&fields).map(|(&t, psi)| (t, Some(psi[0] / nf), psi[1])));
    Ok(Output {
        files: vec![("density.csv".into(), density), ("trace.csv".into(), trace)],
        summary: vec![format!("oracle field for N={n}, theta={} at {} times", p.theta, times.len())],
        ..Output::default()
    })
}

/// `auto` (or absent) leaves M to the problem's own default.
fn mass(r: &Resolved) -> Res<Option<f64>> {
    match r.opt_str("M") {
        None => Ok(None),
        Some(s) if s.trim().eq_ignore_ascii_case("auto") => Ok(None),
        Some(_) => r.parse("M").map(Some),
    }
}

struct SolverChoice {
    backend: Backend,
    modes: usize,
    nx: usize,
    dt: f64,
    outputs: usize,
    wentzell: WentzellScheme,
}

fn solve_with(problem: &PdeProblem, c: &SolverChoice) -> Res<PdeSolution> {
    Ok(match c.backend {
        Backend::Spectral => solve_spectral_with(
            problem,
            &SpectralOptions { outputs: c.outputs, nx_out: c.nx, ..SpectralOptions::new(c.modes, c.dt) },
        )?,
        Backend::FiniteDifference => solve_fd_with(
            problem,
            &FdOptions { outputs: c.outputs, wentzell: c.wentzell, ..FdOptions::new(c.nx, c.dt) },
        )?,
    })
}

fn solver_choice(r: &Resolved, backend: Backend) -> Res<SolverChoice> {
    let dt: f64 = r.parse("dt")?;
    Ok(SolverChoice {
        backend,
        modes: count(r, "K", 8)?,
        nx: count(r, "nx", 16)?,
        dt: positive(r, "dt", dt)?,
        outputs: if r.has("outputs") { count(r, "outputs", 1)? } else { 100 },
        wentzell: match r.opt_str("wentzell") {
            Some(w) => parse_core(r, "wentzell", w)?,
            None => WentzellScheme::default(),
        },
    })
}

fn solve(r: &Resolved) -> Res<Output> {
    let bc: Boundary = parse_core(r, "bc", r.str("bc")?)?;
    let alpha: f64 = r.parse("alpha")?;
    let profile = r.profile("profile")?;
    let horizon: f64 = r.parse("T")?;
    let backend: Backend = parse_core(r, "backend", r.str("backend")?)?;
    let choice = solver_choice(r, backend)?;
    let problem = PdeProblem::new(bc, alpha, mass(r)?, profile, horizon)?;
    let sol = solve_with(&problem, &choice)?;
    let density = density_csv(
        sol.t_grid
            .iter()
            .zip(&sol.values)
            .flat_map(|(&t, row)| sol.u_grid.iter().zip(row).map(move |(&u, &v)| (t, u, v))),
    );
    let trace = trace_csv(sol.t_grid.iter().enumerate().map(|(i, &t)| {
        (t, sol.reservoir_trace.as_ref().map(|m| m[i]), sol.boundary[i])
    }));
    let mut out = Output { files: vec![("density.csv".into(), density), ("trace.csv".into(), trace)], ..Output::default() };
    out.summary.push(format!("solved {bc} with the {} backend, M = {}", backend.name(), problem.mass));
    out.warnings = sol.warnings.clone();
    out.extra.insert("M".into(), json!(problem.mass));
    out.extra.insert("mass_truncation".into(), json!(sol.mass_truncation));
    Ok(out)
}

fn verify_local_eq(r: &Resolved) -> Res<Output> {
    let kind = kind(r)?;
    let p = params(r, kind, count(r, "N", 2)?)?;
    let profile = r.profile("profile")?;
    let h = harness(r)?;
    let t: f64 = r.parse("t")?;
    let us: Vec<f64> = r.list("u")?;
    let k: usize = r.parse("k")?;
    let replicas = count(r, "replicas", 2)?;
    let seed: u64 = r.parse("seed")?;
    let mut report = local_equilibrium_test(&p, &profile, t, &us, k, replicas, seed, &h)?;
    if r.has("ladder") {
        if kind != ModelKind::Rw {
            let s = r.setting("ladder")?;
            return Err(CliError::input_at("the oracle gap ladder needs model = rw", s.origin.clone()));
        }
        let ladder: Vec<usize> = r.list("ladder")?;
        for &u in &us {
            report.extend(oracle_gap_ladder(&p, &profile, t, u, &ladder, &h)?);
        }
    }
    Ok(Output::report(report))
}

fn test_functions(r: &Resolved, kind: ModelKind, theta: f64) -> Res<Vec<TestFunction>> {
    let s: &Setting = r.setting("H")?;
    if s.value.trim().eq_ignore_ascii_case("auto") {
        return Ok(default_test_functions(kind, theta));
    }
    s.value
        .split(';')
        .map(|e| {
            let e = e.trim();
            let h = profile_from(e, "H", s)?;
            Ok(TestFunction { name: e.to_string(), h })
        })
        .collect()
}

fn verify_hydro(r: &Resolved) -> Res<Output> {
    let kind = kind(r)?;
    let ladder: Vec<usize> = r.list("ladder")?;
    let p = params(r, kind, ladder[0].max(2))?;
    let profile = r.profile("profile")?;
    let h = harness(r)?;
    let t: f64 = r.parse("t")?;
    let fs = test_functions(r, kind, p.theta)?;
    let replicas = count(r, "replicas", 2)?;
    let seed: u64 = r.parse("seed")?;
    Ok(Output::report(hydro_test(&p, &profile, t, &fs, &ladder, replicas, seed, &h)?))
}

fn verify_stationarity(r: &Resolved) -> Res<Output> {
    let kind = kind(r)?;
    let p = params(r, kind, count(r, "N", 2)?)?;
    let h = harness(r)?;
    let level: f64 = r.parse("level")?;
    let t: f64 = r.parse("t")?;
    let replicas = count(r, "replicas", 2)?;
    let seed: u64 = r.parse("seed")?;
    let shift: f64 = r.parse("perturb")?;
    let mut start = reversible_measure(level, &p)?;
    start.bulk.iter_mut().for_each(|b| *b += shift);
    if let Err(reservoir_hydro::Error::Input(m)) = start.validate() {
        return Err(CliError::input_at(format!("perturbed start: {m}"), r.setting("perturb")?.origin.clone()));
    }
    Ok(Output::report(stationarity_test_from(&start, level, &p, t, replicas, seed, &h)?))
}

fn side(r: &Resolved, key: &str) -> Res<(Boundary, Backend)> {
    let s = r.setting(key)?;
    let (bc, be) = s
        .value
        .split_once(':')
        .ok_or_else(|| CliError::input_at(format!("{key} must look like bc:backend"), s.origin.clone()))?;
    Ok((parse_core(r, key, bc)?, parse_core(r, key, be)?))
}

fn equivalence(r: &Resolved) -> Res<Output> {
    let left = side(r, "left")?;
    let right = side(r, "right")?;
    let alpha: f64 = r.parse("alpha")?;
    let profile = r.profile("profile")?;
    let horizon: f64 = r.parse("T")?;
    let tol: f64 = r.parse("tol")?;
    let tol = positive(r, "tol", tol)?;
    let m = mass(r)?;
    let solve_side = |(bc, backend): (Boundary, Backend)| -> Res<PdeSolution> {
        let problem = PdeProblem::new(bc, alpha, if bc.has_reservoir() { m } else { None }, profile.clone(), horizon)?;
        solve_with(&problem, &solver_choice(r, backend)?)
    };
    let a = solve_side(left)?;
    let b = solve_side(right)?;
    let mut out = Output::report(equivalence_report(&a, &b, tol)?);
    let max = out.files[0].1.lines().skip(1).filter_map(|l| l.split(',').nth(5)?.parse::<f64>().ok()).fold(0.0, f64::max);
    out.summary.push(format!("max L2 distance over t >= 0.01: {max:.4e} (tolerance {tol:e})"));
    out.extra.insert("max_l2".into(), json!(max));
    out.warnings = a.warnings.iter().chain(&b.warnings).cloned().collect();
    Ok(out)
}

fn entropy(r: &Resolved) -> Res<Output> {
    let ns: Vec<usize> = r.list("N")?;
    let profile = r.profile("profile")?;
    let p_ref = match r.str("p")? {
        s if s.trim().eq_ignore_ascii_case("auto") => matched_reference_level(&profile)?,
        _ => r.parse("p")?,
    };
    let mut report = StatReport { name: "entropy".into(), sample_size: 0, rows: Vec::new() };
    let mut table = String::from("N,p,bulk_entropy,reservoir_term,bound\n");
    for &n in &ns {
        let p = params(r, ModelKind::Sep, n)?;
        let bulk = relative_entropy(&profile, p_ref, &p)?;
        let res = reservoir_entropy_term(&profile, p_ref, &p)?;
        let bound = entropy_bound(n, p_ref);
        let _ = writeln!(table, "{n},{},{},{},{}", fmt_float(p_ref), fmt_float(bulk), fmt_float(res), fmt_float(bound));
        report.rows.push(StatRow {
            test: "entropy_bound".into(),
            n,
            theta: p.theta,
            t: 0.0,
            u: None,
            statistic: bulk + res,
            threshold: bound,
            stderr: None,
        });
    }
    let mut out = Output::report(report);
    out.files.push(("entropy.csv".into(), table));
    out.extra.insert("p".into(), json!(p_ref));
    Ok(out)
}

fn sweep(r: &Resolved) -> Res<Output> {
    let target = r.str("command")?.to_string();
    let cmd_origin = r.setting("command")?.origin.clone();
    if !SWEEPABLE.contains(&target.as_str()) {
        return Err(CliError::input_at(format!("cannot sweep '{target}'; choose one of {}", SWEEPABLE.join(", ")), cmd_origin));
    }
    let target_keys = keys(&target);
    let accepts = |k: &str| target_keys.iter().any(|x| x.name == k);
    let thetas: Vec<String> = if r.has("thetas") { r.list("thetas")? } else { Vec::new() };
    let ns: Vec<String> = if r.has("Ns") { r.list("Ns")? } else { Vec::new() };
    if thetas.is_empty() && ns.is_empty() {
        return Err(CliError::input("sweep needs thetas, Ns or both"));
    }
    let n_key = if accepts("N") { "N" } else { "ladder" };
    if !ns.is_empty() && !accepts(n_key) {
        return Err(CliError::input(format!("{target} has no N to sweep")));
    }
    for (k, s) in &r.settings {
        let own = matches!(k.as_str(), "command" | "thetas" | "Ns" | "out");
        if !own && !accepts(k) {
            return Err(CliError::input_at(format!("key '{k}' is not used by {target}"), s.origin.clone()));
        }
    }
    let theta_pts: Vec<Option<&String>> = if thetas.is_empty() { vec![None] } else { thetas.iter().map(Some).collect() };
    let n_pts: Vec<Option<&String>> = if ns.is_empty() { vec![None] } else { ns.iter().map(Some).collect() };
    let mut children = Vec::new();
    let mut summary_csv = String::from("theta,N,directory,verdict\n");
    for th in &theta_pts {
        for n in &n_pts {
            let mut child = Resolved::merge(&target, &[], None)?;
            for (k, s) in &r.settings {
                if accepts(k) && k != "out" {
                    child.settings.insert(k.clone(), s.clone());
                }
            }
            let mut dir = Vec::new();
            if let Some(th) = th {
                child.set("theta", th.to_string(), Origin::Sweep);
                dir.push(format!("theta={th}"));
            }
            if let Some(n) = n {
                child.set(n_key, n.to_string(), Origin::Sweep);
                dir.push(format!("N={n}"));
            }
            let dir = dir.join("_");
            let out = run(&child)?;
            let verdict = match out.verdict {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "",
            };
            let _ = writeln!(
                summary_csv,
                "{},{},{dir},{verdict}",
                th.map(|s| s.as_str()).unwrap_or(""),
                n.map(|s| s.as_str()).unwrap_or("")
            );
            children.push((dir, child, out));
        }
    }
    let verdicts: Vec<bool> = children.iter().filter_map(|(_, _, o)| o.verdict).collect();
    let verdict = if verdicts.is_empty() { None } else { Some(verdicts.iter().all(|&v| v)) };
    let summary = children
        .iter()
        .flat_map(|(d, _, o)| o.summary.first().map(|l| format!("[{d}] {l}")))
        .collect();
    Ok(Output { files: vec![("sweep.csv".into(), summary_csv)], verdict, summary, children, ..Output::default() })
}
