//! Statistical and numerical checks tying the particle systems, the exact
//! oracle and the PDE solvers together.
//!
//! Every check produces a [`StatReport`]: a list of rows, each with a single
//! statistic and a threshold, passing iff statistic < threshold. Ladder
//! monotonicity is written the same way: the row for N_i uses the value at
//! N_{i−1} as its threshold.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kmc::{block_average, empirical_pairing, grid_index, run_replicas, window_counts, Engine, Method};
use crate::measures::{initial_measure, reversible_measure, sample_with, ProductMeasure};
use crate::model::{Configuration, ModelKind, ModelParams};
use crate::oracle::poisson_field;
use crate::pde::{
    hydro_problem, solve_fd_with, solve_spectral_with, Backend, FdOptions, PdeProblem, PdeSolution, SpectralOptions,
};
use crate::profile::Profile;
use crate::stats::{batch_estimate, correlation, mean, tv_distance, SiteLaw};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// TV bound for window marginals.
    pub local_tv: f64,
    /// TV bound for single-site marginals under a reversible start.
    pub stationarity_tv: f64,
    /// Final hydrodynamic deviation.
    pub hydro_deviation: f64,
    /// Correlations must stay below this many multiples of 1/√replicas.
    pub correlation_factor: f64,
    /// Gap between the oracle field and the PDE at the largest N.
    pub oracle_gap: f64,
    /// Boundary probe against the PDE boundary value.
    pub probe: f64,
    /// Sink probe bound at θ > 1.
    pub sink_probe: f64,
    /// Bulk-mass drift in the Neumann regime.
    pub bulk_mass: f64,
    /// L² distance between PDE solutions.
    pub equivalence_l2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            local_tv: 0.03,
            stationarity_tv: 0.02,
            hydro_deviation: 0.02,
            correlation_factor: 4.0,
            oracle_gap: 0.02,
            probe: 0.05,
            sink_probe: 0.1,
            bulk_mass: 0.02,
            equivalence_l2: 1e-3,
        }
    }
}

/// How the PDE targets are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSettings {
    pub backend: Backend,
    pub modes: usize,
    pub nx: usize,
    pub dt: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings { backend: Backend::Spectral, modes: 128, nx: 512, dt: 1e-5 }
    }
}

impl PdeSettings {
    pub fn solve(&self, problem: &PdeProblem, outputs: usize) -> Result<PdeSolution> {
        match self.backend {
            Backend::Spectral => solve_spectral_with(
                problem,
                &SpectralOptions { outputs, nx_out: self.nx, ..SpectralOptions::new(self.modes, self.dt) },
            ),
            Backend::FiniteDifference => {
                solve_fd_with(problem, &FdOptions { outputs, ..FdOptions::new(self.nx, self.dt) })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Harness {
    pub thresholds: Thresholds,
    pub pde: PdeSettings,
    /// Simulation method for independent walks.
    pub method: Method,
}

impl Harness {
    /// Defaults used by the acceptance runs: walks are advanced particle by particle.
    pub fn fast() -> Self {
        Harness { method: Method::Particlewise, ..Harness::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub test: String,
    pub n: usize,
    pub theta: f64,
    pub t: f64,
    pub u: Option<f64>,
    pub statistic: f64,
    pub threshold: f64,
    /// Batch standard error of the statistic, when one is available.
    pub stderr: Option<f64>,
}

impl StatRow {
    pub fn passed(&self) -> bool {
        self.statistic < self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatReport {
    pub name: String,
    pub sample_size: usize,
    pub rows: Vec<StatRow>,
}

pub const CSV_HEADER: &str = "test,N,theta,t,u,statistic,threshold,verdict";

/// Float format shared by every data file: 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl StatReport {
    fn new(name: &str, sample_size: usize) -> Self {
        StatReport { name: name.into(), sample_size, rows: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(StatRow::passed)
    }

    /// Rows that fail, for messages.
    pub fn failures(&self) -> impl Iterator<Item = &StatRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    pub fn worst(&self, test_prefix: &str) -> Option<&StatRow> {
        self.rows
            .iter()
            .filter(|r| r.test.starts_with(test_prefix))
            .max_by(|a, b| (a.statistic / a.threshold).total_cmp(&(b.statistic / b.threshold)))
    }

    pub fn extend(&mut self, other: StatReport) {
        self.sample_size = self.sample_size.max(other.sample_size);
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let u = r.u.map(fmt_float).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.test,
                r.n,
                fmt_float(r.theta),
                fmt_float(r.t),
                u,
                fmt_float(r.statistic),
                fmt_float(r.threshold),
                if r.passed() { "pass" } else { "fail" }
            );
        }
        s
    }
}

/// Seed for one rung of a ladder, so rungs use unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_from<R: Rng + ?Sized>(init: &Configuration, p: &ModelParams, t: f64, method: Method, rng: &mut R) -> Result<Configuration> {
    let mut e = Engine::with_method(init, p, method)?;
    e.advance_to(t, rng);
    Ok(e.configuration())
}

/// Draws from `measure`, runs to time t and applies `observe`, for each replica.
pub fn replicate<T: Send>(
    measure: &ProductMeasure,
    p: &ModelParams,
    t: f64,
    replicas: usize,
    seed: u64,
    method: Method,
    observe: impl Fn(&Configuration) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if replicas < 2 {
        return Err(Error::input("at least two replicas are required"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::input(format!("time must be finite and nonnegative, got {t}")));
    }
    run_replicas(replicas, seed, |_, rng| {
        let init = sample_with(measure, rng)?;
        let end = run_from(&init, p, t, method, rng)?;
        observe(&end)
    })
}

/// Limiting density at time t for the model's regime.
pub fn target_solution(p: &ModelParams, profile: &Profile, t: f64, settings: &PdeSettings) -> Result<PdeSolution> {
    let problem = hydro_problem(p.kind, p.theta, p.alpha, profile, t.max(1e-12))?;
    settings.solve(&problem, 10)
}

fn rho_at(sol: &PdeSolution, t: f64, u: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(sol.problem.gamma.eval(u));
    }
    sol.value(t, u)
}

// ---------------------------------------------------------------------------
// local equilibrium

/// Rows for observed windows `windows[r][j]` (replica r, offset j) around u.
///
/// Marginals are compared with `laws_rho[j]` and, where given, the exact
/// finite-N laws `laws_exact[j]`; every pair of window sites is checked for
/// vanishing correlation.
pub fn local_equilibrium_rows(
    windows: &[Vec<u64>],
    laws_rho: &[SiteLaw],
    laws_exact: Option<&[SiteLaw]>,
    label: (usize, f64, f64, f64),
    th: &Thresholds,
) -> Vec<StatRow> {
    let (n, theta, t, u) = label;
    let width = laws_rho.len();
    let reps = windows.len();
    let row = |test: String, statistic: f64, threshold: f64| StatRow {
        test,
        n,
        theta,
        t,
        u: Some(u),
        statistic,
        threshold,
        stderr: None,
    };
    let cols: Vec<Vec<u64>> = (0..width).map(|j| windows.iter().map(|w| w[j]).collect()).collect();
    let mut rows = Vec::new();
    let half = (width / 2) as i64;
    for j in 0..width {
        let off = j as i64 - half;
        rows.push(row(format!("local_tv_rho[{off:+}]"), tv_distance(&cols[j], laws_rho[j]), th.local_tv));
        if let Some(ex) = laws_exact {
            rows.push(row(format!("local_tv_exact[{off:+}]"), tv_distance(&cols[j], ex[j]), th.local_tv));
        }
    }
    let fcols: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
    let limit = th.correlation_factor / (reps as f64).sqrt();
    for a in 0..width {
        for b in a + 1..width {
            let c = correlation(&fcols[a], &fcols[b]).abs();
            rows.push(row(format!("local_corr[{:+},{:+}]", a as i64 - half, b as i64 - half), c, limit));
        }
    }
    rows
}

/// Window law of η_t around ⌊uN⌋ against ⊗Poisson(ρ(t,u)) (RW) or ⊗Bernoulli(ρ(t,u)) (SEP).
///
/// For independent walks the exact finite-N marginals Poisson(ψ_t^N(x)) are
/// checked as well.
#[allow(clippy::too_many_arguments)]
pub fn local_equilibrium_test(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    us: &[f64],
    k: usize,
    replicas: usize,
    seed: u64,
    h: &Harness,
) -> Result<StatReport> {
    let n = p.n;
    for &u in us {
        window_counts(&Configuration::zero(n), u, k)?;
    }
    let measure = initial_measure(profile, p)?;
    let sol = target_solution(p, profile, t, &h.pde)?;
    let psi = match p.kind {
        ModelKind::Rw => Some(poisson_field(profile, t, p)?),
        ModelKind::Sep => None,
    };
    let windows = replicate(&measure, p, t, replicas, seed, h.method, |cfg| {
        us.iter().map(|&u| window_counts(cfg, u, k)).collect::<Result<Vec<_>>>()
    })?;
    let law = |m: f64| match p.kind {
        ModelKind::Rw => SiteLaw::Poisson(m),
        ModelKind::Sep => SiteLaw::Bernoulli(m.clamp(0.0, 1.0)),
    };
    let mut report = StatReport::new("local_equilibrium", replicas);
    for (i, &u) in us.iter().enumerate() {
        let w: Vec<Vec<u64>> = windows.iter().map(|r| r[i].clone()).collect();
        let rho = rho_at(&sol, t, u)?;
        let centre = grid_index(u, n);
        let laws_rho = vec![law(rho); 2 * k + 1];
        let exact: Option<Vec<SiteLaw>> =
            psi.as_ref().map(|ps| (centre - k..=centre + k).map(|x| SiteLaw::Poisson(ps[x])).collect());
        report.rows.extend(local_equilibrium_rows(&w, &laws_rho, exact.as_deref(), (n, p.theta, t, u), &h.thresholds));
    }
    Ok(report)
}

/// |ψ_t^N(⌊uN⌋) − ρ(t,u)| along a ladder of N: monotone decrease and a final bound.
pub fn oracle_gap_ladder(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    u: f64,
    ladder: &[usize],
    h: &Harness,
) -> Result<StatReport> {
    require_ladder(ladder)?;
    let sol = target_solution(p, profile, t, &h.pde)?;
    let rho = rho_at(&sol, t, u)?;
    let gaps = ladder
        .iter()
        .map(|&n| {
            let q = p.with_n(n)?;
            let psi = poisson_field(profile, t, &q)?;
            Ok((psi[grid_index(u, n)] - rho).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = StatReport::new("oracle_gap", 0);
    report.rows = ladder_rows("oracle_gap", ladder, &gaps, None, h.thresholds.oracle_gap, p.theta, t, Some(u));
    Ok(report)
}

fn require_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("ladder must be a nonempty increasing list of N"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ladder_rows(
    name: &str,
    ladder: &[usize],
    values: &[f64],
    errors: Option<&[f64]>,
    final_bound: f64,
    theta: f64,
    t: f64,
    u: Option<f64>,
) -> Vec<StatRow> {
    let mut rows = Vec::new();
    for i in 0..ladder.len() {
        rows.push(StatRow {
            test: name.to_string(),
            n: ladder[i],
            theta,
            t,
            u,
            statistic: values[i],
            threshold: if i == 0 { f64::INFINITY } else { values[i - 1] },
            stderr: errors.map(|e| e[i]),
        });
    }
    let last = ladder.len() - 1;
    rows.push(StatRow {
        test: format!("{name}_final"),
        n: ladder[last],
        theta,
        t,
        u,
        statistic: values[last],
        threshold: final_bound,
        stderr: errors.map(|e| e[last]),
    });
    rows
}

// ---------------------------------------------------------------------------
// hydrodynamics

/// A named test function for the hydrodynamic pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub h: Profile,
}

impl TestFunction {
    pub fn new(name: &str, expr: &str) -> Result<Self> {
        Ok(TestFunction { name: name.into(), h: Profile::parse(expr)? })
    }
}

/// {1, u, cos(πu)} for Neumann-type limits and {1, u, 1 − cos(πu)} (H(0) = 0) for Dirichlet-type ones.
pub fn default_test_functions(kind: ModelKind, theta: f64) -> Vec<TestFunction> {
    let _ = kind;
    let third = if theta < 1.0 {
        TestFunction::new("cos(pi u)", "cos(0,1,1)")
    } else {
        TestFunction::new("1-cos(pi u)", "cos(1,-1,1)")
    };
    vec![
        TestFunction::new("1", "const(1)").expect("valid"),
        TestFunction::new("u", "affine(0,1)").expect("valid"),
        third.expect("valid"),
    ]
}

/// Mean over replicas of |(1/N)ΣH(x/N)η_t(x) − ∫Hρ(t,·)|, with its batch error.
pub fn hydro_deviation(pairings: &[f64], target: f64) -> (f64, f64) {
    let dev: Vec<f64> = pairings.iter().map(|v| (v - target).abs()).collect();
    batch_estimate(&dev, mean)
}

/// Hydrodynamic deviation ladder for each test function.
#[allow(clippy::too_many_arguments)]
pub fn hydro_test(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    h_set: &[TestFunction],
    ladder: &[usize],
    replicas: usize,
    seed: u64,
    h: &Harness,
) -> Result<StatReport> {
    hydro_test_against(p, profile, t, h_set, ladder, replicas, seed, h, None)
}

/// As [`hydro_test`], with an optional replacement for the limiting problem.
#[allow(clippy::too_many_arguments)]
pub fn hydro_test_against(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    h_set: &[TestFunction],
    ladder: &[usize],
    replicas: usize,
    seed: u64,
    h: &Harness,
    target: Option<&PdeProblem>,
) -> Result<StatReport> {
    require_ladder(ladder)?;
    if h_set.is_empty() {
        return Err(Error::input("at least one test function is required"));
    }
    let sol = match target {
        Some(prob) => h.pde.solve(prob, 10)?,
        None => target_solution(p, profile, t, &h.pde)?,
    };
    let targets: Vec<f64> = h_set
        .iter()
        .map(|f| if t == 0.0 { crate::quadrature::integrate(|u| f.h.eval(u) * profile.eval(u), 0.0, 1.0, 1e-12) } else { sol.pairing(t, |u| f.h.eval(u)) })
        .collect::<Result<_>>()?;
    let mut devs = vec![Vec::new(); h_set.len()];
    let mut errs = vec![Vec::new(); h_set.len()];
    for &n in ladder {
        let q = p.with_n(n)?;
        let measure = initial_measure(profile, &q)?;
        let grids: Vec<Vec<f64>> = h_set.iter().map(|f| f.h.on_bulk_grid(n)).collect();
        let pairings = replicate(&measure, &q, t, replicas, derive_seed(seed, n as u64), h.method, |cfg| {
            grids.iter().map(|g| empirical_pairing(cfg, g)).collect::<Result<Vec<f64>>>()
        })?;
        for (i, target) in targets.iter().enumerate() {
            let col: Vec<f64> = pairings.iter().map(|r| r[i]).collect();
            let (d, e) = hydro_deviation(&col, *target);
            devs[i].push(d);
            errs[i].push(e);
        }
    }
    let mut report = StatReport::new("hydro", replicas);
    for (i, f) in h_set.iter().enumerate() {
        report.rows.extend(ladder_rows(
            &format!("hydro_deviation[H={}]", f.name),
            ladder,
            &devs[i],
            Some(&errs[i]),
            h.thresholds.hydro_deviation,
            p.theta,
            t,
            None,
        ));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// boundary behaviour of the exclusion process

/// Mean and batch error of a replica statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Mean block average of η_t over sites 1..⌊εN⌋.
pub fn boundary_density_probe(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    eps: f64,
    replicas: usize,
    seed: u64,
    h: &Harness,
) -> Result<Estimate> {
    if p.kind != ModelKind::Sep {
        return Err(Error::input("the boundary probe is defined for the exclusion model"));
    }
    block_average(&Configuration::zero(p.n), 0, eps)?;
    let measure = initial_measure(profile, p)?;
    let v = replicate(&measure, p, t, replicas, seed, h.method, |cfg| block_average(cfg, 0, eps))?;
    let (value, stderr) = batch_estimate(&v, mean);
    Ok(Estimate { value, stderr })
}

/// Mean bulk mass (1/N)Σ_{x≥1}η_t(x).
pub fn bulk_mass_estimate(
    p: &ModelParams,
    profile: &Profile,
    t: f64,
    replicas: usize,
    seed: u64,
    h: &Harness,
) -> Result<Estimate> {
    let measure = initial_measure(profile, p)?;
    let n = p.n as f64;
    let v = replicate(&measure, p, t, replicas, seed, h.method, |cfg| {
        Ok(cfg.bulk().iter().sum::<u64>() as f64 / n)
    })?;
    let (value, stderr) = batch_estimate(&v, mean);
    Ok(Estimate { value, stderr })
}

// ---------------------------------------------------------------------------
// stationarity

/// TV of every single-site marginal in `samples` against `laws` (site 0 first).
pub fn stationarity_rows(samples: &[Configuration], laws: &[SiteLaw], label: (usize, f64, f64), th: &Thresholds) -> Vec<StatRow> {
    let (n, theta, t) = label;
    (0..laws.len())
        .map(|x| {
            let col: Vec<u64> = samples.iter().map(|c| c.occupations[x]).collect();
            StatRow {
                test: if x == 0 { "stationarity_tv_reservoir".into() } else { "stationarity_tv".into() },
                n,
                theta,
                t,
                u: Some(x as f64 / n as f64),
                statistic: tv_distance(&col, laws[x]),
                threshold: th.stationarity_tv,
                stderr: None,
            }
        })
        .collect()
}

/// Site marginals of a product measure.
pub fn site_laws(m: &ProductMeasure) -> Vec<SiteLaw> {
    let mut laws = vec![SiteLaw::Poisson(m.site0)];
    laws.extend(m.bulk.iter().map(|&b| match m.kind {
        ModelKind::Rw => SiteLaw::Poisson(b),
        ModelKind::Sep => SiteLaw::Bernoulli(b),
    }));
    laws
}

/// Starts from the reversible measure at `level` and compares time-t marginals with it.
pub fn stationarity_test(p: &ModelParams, level: f64, t: f64, replicas: usize, seed: u64, h: &Harness) -> Result<StatReport> {
    let m = reversible_measure(level, p)?;
    stationarity_test_from(&m, level, p, t, replicas, seed, h)
}

/// As [`stationarity_test`] but the chain starts from `start`; the
/// reference is still the reversible measure at `level`.
pub fn stationarity_test_from(
    start: &ProductMeasure,
    level: f64,
    p: &ModelParams,
    t: f64,
    replicas: usize,
    seed: u64,
    h: &Harness,
) -> Result<StatReport> {
    let reference = reversible_measure(level, p)?;
    let samples = replicate(start, p, t, replicas, seed, h.method, |c| Ok(c.clone()))?;
    let mut report = StatReport::new("stationarity", replicas);
    report.rows = stationarity_rows(&samples, &site_laws(&reference), (p.n, p.theta, t), &h.thresholds);
    Ok(report)
}

// ---------------------------------------------------------------------------
// PDE equivalence

/// Spatial L² distance at every output time t ≥ 0.01, each against `tol`.
pub fn equivalence_report(a: &PdeSolution, b: &PdeSolution, tol: f64) -> Result<StatReport> {
    if a.t_grid.len() != b.t_grid.len() || a.t_grid.iter().zip(&b.t_grid).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::input("solutions must share their output times"));
    }
    let w = crate::pde::grid_weights(a.u_grid.len());
    let mut report = StatReport::new(&format!("equivalence {}:{} vs {}:{}", a.problem.bc, a.backend.name(), b.problem.bc, b.backend.name()), 0);
    for (i, &t) in a.t_grid.iter().enumerate() {
        if t + 1e-12 < 0.01 {
            continue;
        }
        let d2: f64 = a.u_grid.iter().zip(&a.values[i]).zip(&w).map(|((&u, &va), wi)| {
            let row = &b.values[i];
            let nb = row.len() - 1;
            let x = u * nb as f64;
            let j = (x.floor() as usize).min(nb - 1);
            let f = x - j as f64;
            let vb = (1.0 - f) * row[j] + f * row[j + 1];
            (va - vb).powi(2) * wi
        }).sum();
        report.rows.push(StatRow {
            test: "equivalence_l2".into(),
            n: a.nx(),
            theta: f64::NAN,
            t,
            u: None,
            statistic: d2.sqrt(),
            threshold: tol,
            stderr: None,
        });
    }
    if report.rows.is_empty() {
        return Err(Error::input("no output times at or after t = 0.01"));
    }
    Ok(report)
}
