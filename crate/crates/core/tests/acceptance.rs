//! Acceptance run: one PASS/FAIL line per criterion, plus indented detail lines.
//!
//! The process exits 0 after reporting so that the workspace test run stays
//! usable; set ACCEPTANCE_STRICT=1 to turn any failing criterion into a
//! nonzero exit. Seeds and tolerances are pinned below.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reservoir_hydro::kmc::{run_replicas, Engine, Method};
use reservoir_hydro::measures::{
    detailed_balance_residual, entropy_bound, initial_measure, relative_entropy, reservoir_entropy_term, sample_with,
};
use reservoir_hydro::oracle::{joint_laplace, poisson_field, stationary_pi, transition_matrix, walk_generator};
use reservoir_hydro::pde::{
    energy_functional, reservoir_mass, solve_fd, solve_spectral, BasisKind, Boundary, Eigenbasis, PdeProblem,
};
use reservoir_hydro::stats::{batch_estimate, mean, variance};
use reservoir_hydro::verify::*;
use reservoir_hydro::{ModelKind, ModelParams, Profile};

const SEED: u64 = 20_240_611;

// criterion 1
const REVERSIBILITY_TOL: f64 = 1e-12;
// criterion 2
const EXACT_SE: f64 = 4.0;
const EXACT_REPLICAS: usize = 100_000;
// criterion 3
const LOCAL_REPLICAS: usize = 20_000;
// criterion 4
const HYDRO_REPLICAS_RW: usize = 600;
const HYDRO_REPLICAS_SEP: usize = 300;
// criterion 5
const EQUIV_L2: f64 = 1e-3;
const CONSERVED_FD: f64 = 1e-4;
const CONSERVED_SPECTRAL: f64 = 1e-6;
// criterion 6
const ENERGY_SLACK: f64 = 1e-10;
// criterion 7
const PROBE_REPLICAS: usize = 200;
const SINK_BOUND: f64 = 0.1;
const PROBE_TOL: f64 = 0.05;
const BULK_MASS_TOL: f64 = 0.02;
// criterion 9
const SEMIGROUP_TOL: f64 = 1e-8;
const GENERATOR_TOL: f64 = 1e-12;
const MIXING_TOL: f64 = 1e-8;

/// Low-density data: the sampling floor of the hydrodynamic deviation at N = 512
/// is about √(2∫H²ρ/(πN)) ≈ 0.014, and the finite reservoir absorbs little.
const LOW_DENSITY: &str = "cos(0.15,0.05,1)";
const HALF_PLUS: &str = "affine(0.5,0.5)";

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

fn report(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "{} criterion {id} {name}: {} [{:.1}s, limit {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.summary,
        took.as_secs_f64(),
        limit.as_secs()
    );
    if !in_time {
        println!("    over the runtime limit");
    }
    for d in out.details {
        println!("    {d}");
    }
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn reversibility() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &theta in &[0.0, 1.0, 2.0] {
        for &alpha in &[0.5, 2.0] {
            for (kind, n, levels) in [(ModelKind::Rw, 3, [0.5, 1.0, 2.0]), (ModelKind::Sep, 4, [0.3, 0.5, 0.7])] {
                let p = ModelParams::new(kind, n, theta, alpha).unwrap();
                for &l in &levels {
                    worst = worst.max(detailed_balance_residual(&p, l, 4).unwrap());
                    cases += 1;
                }
            }
        }
    }
    Outcome {
        pass: worst <= REVERSIBILITY_TOL,
        summary: format!("max relative residual {worst:.2e} over {cases} cases (tol {REVERSIBILITY_TOL:e})"),
        details: vec![],
    }
}

fn exact_poisson_structure() -> Outcome {
    let n = 16;
    let t = 0.05;
    let p = ModelParams::new(ModelKind::Rw, n, 1.0, 1.0).unwrap();
    let g = Profile::parse(HALF_PLUS).unwrap();
    let psi = poisson_field(&g, t, &p).unwrap();
    let measure = initial_measure(&g, &p).unwrap();
    let states = run_replicas(EXACT_REPLICAS, SEED, |_, rng| {
        let init = sample_with(&measure, rng)?;
        let mut e = Engine::with_method(&init, &p, Method::EventDriven)?;
        e.advance_to(t, rng);
        Ok(e.occupations().to_vec())
    })
    .unwrap();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for x in 1..=n {
        let col: Vec<f64> = states.iter().map(|s| s[x] as f64).collect();
        let (m, m_se) = batch_estimate(&col, mean);
        let (v, v_se) = batch_estimate(&col, variance);
        let zm = (m - psi[x]).abs() / m_se;
        let zv = (v - psi[x]).abs() / v_se;
        worst = worst.max(zm).max(zv);
        if x % 4 == 0 {
            details.push(format!("x={x:2}: psi={:.5} mean={m:.5} ({zm:.2} se) var={v:.5} ({zv:.2} se)", psi[x]));
        }
    }
    let mut zrng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5a5a);
    for j in 0..3 {
        let zeta: Vec<f64> = (0..=n).map(|_| zrng.random_range(0.0..0.3)).collect();
        let exact = joint_laplace(&g, t, &zeta, &p).unwrap();
        let vals: Vec<f64> = states
            .iter()
            .map(|s| (-s.iter().zip(&zeta).map(|(&k, z)| k as f64 * z).sum::<f64>()).exp())
            .collect();
        let (mc, se) = batch_estimate(&vals, mean);
        let z = (mc - exact).abs() / se;
        worst = worst.max(z);
        details.push(format!("zeta #{j}: exact {exact:.6e}, Monte Carlo {mc:.6e} ({z:.2} se)"));
    }
    Outcome {
        pass: worst < EXACT_SE,
        summary: format!("worst deviation {worst:.2} batch standard errors (bound {EXACT_SE}), {EXACT_REPLICAS} replicas"),
        details,
    }
}

fn local_equilibrium() -> Outcome {
    let h = Harness::fast();
    let g = Profile::parse(HALF_PLUS).unwrap();
    let us = [0.25, 0.5, 0.75];
    let mut pass = true;
    let mut details = Vec::new();
    for (i, &theta) in [0.5, 1.0, 2.0].iter().enumerate() {
        let p = ModelParams::new(ModelKind::Rw, 128, theta, 1.0).unwrap();
        let r = local_equilibrium_test(&p, &g, 0.1, &us, 1, LOCAL_REPLICAS, derive_seed(SEED, 30 + i as u64), &h).unwrap();
        let exact_worst = r.worst("local_tv_exact").unwrap();
        let exact_ok = r.rows.iter().filter(|x| x.test.starts_with("local_tv_exact")).all(StatRow::passed);
        let rho_worst = r.worst("local_tv_rho").unwrap();
        let corr_worst = r.worst("local_corr").unwrap();
        details.push(format!(
            "theta={theta}: max TV vs Poisson(psi) {:.4} ({}), max TV vs Poisson(rho) {:.4}, max |corr| {:.4} (bound {:.4})",
            exact_worst.statistic,
            if exact_ok { "ok" } else { "over 0.03" },
            rho_worst.statistic,
            corr_worst.statistic,
            corr_worst.threshold
        ));
        pass &= exact_ok;
        for &u in &us {
            let gap = oracle_gap_ladder(&p, &g, 0.1, u, &[32, 64, 128, 256], &h).unwrap();
            let ok = gap.passed();
            pass &= ok;
            let vals: Vec<String> = gap.rows[..4].iter().map(|x| format!("{:.2e}", x.statistic)).collect();
            details.push(format!("  u={u}: |psi - rho| over N=32..256: {} {}", vals.join(" "), if ok { "ok" } else { "NOT monotone or over 0.02" }));
            if !ok {
                let ext = [32, 64, 128, 256, 512, 1024];
                let q = |n: usize| p.with_n(n).unwrap();
                let sol = target_solution(&p, &g, 0.1, &h.pde).unwrap();
                let rho = sol.value(0.1, u).unwrap();
                let signed: Vec<String> = ext
                    .iter()
                    .map(|&n| {
                        let psi = poisson_field(&g, 0.1, &q(n)).unwrap();
                        format!("{:+.2e}", psi[(u * n as f64).round() as usize] - rho)
                    })
                    .collect();
                details.push(format!("    signed psi - rho over N=32..1024: {}", signed.join(" ")));
            }
        }
    }
    Outcome { pass, summary: "exact window marginals and oracle gap ladders".into(), details }
}

fn ladder_line(r: &StatReport, prefix: &str) -> String {
    let rows: Vec<&StatRow> = r.rows.iter().filter(|x| x.test.starts_with(prefix) && !x.test.ends_with("_final")).collect();
    let vals: Vec<String> = rows.iter().map(|x| format!("{:.4}±{:.4}", x.statistic, x.stderr.unwrap_or(0.0))).collect();
    vals.join(" ")
}

fn hydro_summary(r: &StatReport, details: &mut Vec<String>, label: &str, fs: &[TestFunction]) {
    for f in fs {
        let prefix = format!("hydro_deviation[H={}]", f.name);
        let ok = r.rows.iter().filter(|x| x.test.starts_with(&prefix)).all(StatRow::passed);
        details.push(format!("{label} H={}: {} {}", f.name, ladder_line(r, &prefix), if ok { "ok" } else { "FAIL" }));
    }
}

fn hydro() -> Outcome {
    let h = Harness::fast();
    let g = Profile::parse(LOW_DENSITY).unwrap();
    let ladder = [64, 128, 256, 512];
    let mut pass = true;
    let mut details = Vec::new();
    for (kind, reps) in [(ModelKind::Rw, HYDRO_REPLICAS_RW), (ModelKind::Sep, HYDRO_REPLICAS_SEP)] {
        for (i, &theta) in [0.5, 1.0, 2.0].iter().enumerate() {
            let p = ModelParams::new(kind, 64, theta, 1.0).unwrap();
            let fs = default_test_functions(kind, theta);
            let seed = derive_seed(SEED, 40 + 10 * kind as u64 + i as u64);
            let g = if kind == ModelKind::Sep && theta > 1.0 { Profile::constant(0.8) } else { g.clone() };
            let r = hydro_test(&p, &g, 0.2, &fs, &ladder, reps, seed, &h).unwrap();
            pass &= r.passed();
            let target = hydro_problem_name(kind, theta);
            hydro_summary(&r, &mut details, &format!("{} theta={theta} ({target})", kind.name()), &fs);
        }
    }
    // the exclusion process at theta > 1 against a bath at gamma(0)/(1+gamma(0))
    let p = ModelParams::new(ModelKind::Sep, 64, 2.0, 1.0).unwrap();
    let g = Profile::constant(0.8);
    let b = 0.8 / 1.8;
    let prob = PdeProblem::new(Boundary::DirichletFixed, 1.0, None, pinned_profile(b, 0.8), 0.2).unwrap();
    let fs = default_test_functions(ModelKind::Sep, 2.0);
    let r = hydro_test_against(&p, &g, 0.2, &fs, &ladder, HYDRO_REPLICAS_SEP, derive_seed(SEED, 61), &h, Some(&prob)).unwrap();
    details.push(format!("diagnostic: SEP theta=2 against a Dirichlet bath at gamma(0)/(1+gamma(0)) = {b:.4}: {}", if r.passed() { "pass" } else { "fail" }));
    hydro_summary(&r, &mut details, "  SEP theta=2 (dirichlet at bath level)", &fs);
    Outcome { pass, summary: format!("ladders N=64..512 at t=0.2, {HYDRO_REPLICAS_RW} RW / {HYDRO_REPLICAS_SEP} SEP replicas"), details }
}

fn hydro_problem_name(kind: ModelKind, theta: f64) -> &'static str {
    reservoir_hydro::pde::hydro_problem(kind, theta, 1.0, &Profile::constant(0.1), 1.0).unwrap().bc.name()
}

/// The constant `c` with its value at u = 0 replaced by `b` through a thin linear layer.
fn pinned_profile(b: f64, c: f64) -> Profile {
    Profile::parse(&format!("sum(const({:?}),clamp01(affine({:?},150)))", c - 1.0, 1.0 - c + b)).unwrap()
}

fn wentzell_equivalence() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (gs, alpha) in [("cos(0.5,0.25,1)", 2.0), ("affine(0.2,0.6)", 0.5), ("cos(0.4,0.3,2)", 1.0)] {
        let g = Profile::parse(gs).unwrap();
        let pr = |bc| PdeProblem::new(bc, alpha, None, g.clone(), 1.0).unwrap();
        let w = solve_fd(&pr(Boundary::Wentzell), 512, 1e-5).unwrap();
        let nl = solve_spectral(&pr(Boundary::NonlocalDirichlet), 128, 1e-5).unwrap();
        let hw = solve_fd(&pr(Boundary::HomWentzell), 512, 1e-5).unwrap();
        let df = solve_spectral(&pr(Boundary::DirichletFixed), 128, 1e-5).unwrap();
        let e1 = equivalence_report(&w, &nl, EQUIV_L2).unwrap();
        let e2 = equivalence_report(&hw, &df, EQUIV_L2).unwrap();
        let max = |r: &StatReport| r.rows.iter().map(|x| x.statistic).fold(0.0, f64::max);
        let ws = solve_spectral(&pr(Boundary::Wentzell), 128, 1e-5).unwrap();
        let drift = |s: &reservoir_hydro::pde::PdeSolution| {
            s.t_grid
                .iter()
                .map(|&t| (reservoir_mass(s, t).unwrap().conserved.unwrap() - s.problem.mass).abs())
                .fold(0.0, f64::max)
        };
        let (dfd, dsp) = (drift(&w), drift(&ws));
        let ok = e1.passed() && e2.passed() && dfd < CONSERVED_FD && dsp < CONSERVED_SPECTRAL;
        pass &= ok;
        details.push(format!(
            "{gs}, alpha={alpha}: wentzell/nonlocal {:.2e}, hom_wentzell/dirichlet {:.2e}, conserved drift fd {dfd:.2e} spectral {dsp:.2e}",
            max(&e1),
            max(&e2)
        ));
    }
    Outcome { pass, summary: format!("max L2 < {EQUIV_L2:e}, drift < {CONSERVED_FD:e} (fd) / {CONSERVED_SPECTRAL:e} (spectral)"), details }
}

fn energy_decay() -> Outcome {
    let (g1, g2) = (Profile::parse("cos(0.5,0.2,1)").unwrap(), Profile::parse("cos(0.5,0.2,2)").unwrap());
    let mut pass = true;
    let mut details = Vec::new();
    for bc in Boundary::ALL {
        let p1 = PdeProblem::new(bc, 1.0, None, g1.clone(), 1.0).unwrap();
        let p2 = PdeProblem::new(bc, 1.0, None, g2.clone(), 1.0).unwrap();
        let s1 = solve_spectral(&p1, 128, 1e-5).unwrap();
        let s2 = solve_spectral(&p2, 128, 1e-5).unwrap();
        let kind = if bc == Boundary::Neumann { BasisKind::Nn } else { BasisKind::Dn };
        let basis = Eigenbasis::new(kind, 128).unwrap();
        let e: Vec<f64> = s1
            .values
            .iter()
            .zip(&s2.values)
            .map(|(a, b)| energy_functional(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>(), &basis).unwrap())
            .collect();
        let worst_rise = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let ok = (p1.mass - p2.mass).abs() < 1e-12 && worst_rise <= ENERGY_SLACK;
        pass &= ok;
        details.push(format!("{bc}: E(0)={:.3e} E(1)={:.3e} largest step change {worst_rise:.2e}", e[0], e[e.len() - 1]));
    }
    Outcome { pass, summary: format!("energy of differences nonincreasing within {ENERGY_SLACK:e} per step"), details }
}

fn sep_boundary() -> Outcome {
    let h = Harness::fast();
    let mut details = Vec::new();
    let ladder = [64, 128, 256, 512];
    let eps = 0.05;
    let t = 0.2;

    // theta = 2, gamma = 0.8: sink claim
    let g = Profile::constant(0.8);
    let probes: Vec<Estimate> = ladder
        .iter()
        .map(|&n| {
            let p = ModelParams::new(ModelKind::Sep, n, 2.0, 1.0).unwrap();
            boundary_density_probe(&p, &g, t, eps, PROBE_REPLICAS, derive_seed(SEED, 70 + n as u64), &h).unwrap()
        })
        .collect();
    let decreasing = probes.windows(2).all(|w| w[1].value < w[0].value);
    let last = probes[probes.len() - 1].value;
    let sink_ok = decreasing && last < SINK_BOUND;
    let vals: Vec<String> = probes.iter().map(|e| format!("{:.4}±{:.4}", e.value, e.stderr)).collect();
    details.push(format!("theta=2, gamma=0.8: probe over N=64..512: {} ({})", vals.join(" "), if sink_ok { "ok" } else { "FAIL: no sink" }));
    let bath = 0.8 / 1.8;
    let pinned = PdeProblem::new(Boundary::DirichletFixed, 1.0, None, pinned_profile(bath, 0.8), t).unwrap();
    let sol = solve_spectral(&pinned, 128, 1e-5).unwrap();
    let block = (1..=25).map(|x| sol.value(t, x as f64 / 512.0).unwrap()).sum::<f64>() / 25.0;
    details.push(format!(
        "  diagnostic: the reservoir acts as a bath at gamma(0)/(1+gamma(0)) = {bath:.4}; block average of that Dirichlet solution {block:.4}, probe at N=512 {last:.4} ({})",
        if (last - block).abs() < PROBE_TOL { "agrees" } else { "disagrees" }
    ));
    let g_sink = Profile::parse("affine(0,0.8)").unwrap();
    let sink: Vec<String> = [128, 512]
        .iter()
        .map(|&n| {
            let p = ModelParams::new(ModelKind::Sep, n, 2.0, 1.0).unwrap();
            let e = boundary_density_probe(&p, &g_sink, t, eps, PROBE_REPLICAS / 2, derive_seed(SEED, 90 + n as u64), &h).unwrap();
            format!("N={n} {:.4}", e.value)
        })
        .collect();
    let hd = solve_spectral(&PdeProblem::new(Boundary::HomDirichlet, 1.0, None, g_sink.clone(), t).unwrap(), 128, 1e-5).unwrap();
    let hd_block = (1..=25).map(|x| hd.value(t, x as f64 / 512.0).unwrap()).sum::<f64>() / 25.0;
    details.push(format!("  diagnostic: gamma(0)=0 (affine(0,0.8)) probe {} vs homogeneous Dirichlet block average {hd_block:.4}", sink.join(", ")));

    // theta = 1: boundary relation
    let g = Profile::parse(LOW_DENSITY).unwrap();
    let p = ModelParams::new(ModelKind::Sep, 512, 1.0, 1.0).unwrap();
    let probe = boundary_density_probe(&p, &g, t, eps, PROBE_REPLICAS, derive_seed(SEED, 80), &h).unwrap();
    let nl = solve_spectral(&PdeProblem::new(Boundary::SepNonlinear, 1.0, None, g.clone(), t).unwrap(), 128, 1e-5).unwrap();
    let m = reservoir_mass(&nl, t).unwrap().m;
    let want = m / (1.0 + m);
    let crit_ok = (probe.value - want).abs() < PROBE_TOL;
    details.push(format!(
        "theta=1: probe {:.4}±{:.4} vs alpha m/(1+alpha m) = {want:.4} (m={m:.4}) ({})",
        probe.value,
        probe.stderr,
        if crit_ok { "ok" } else { "FAIL" }
    ));

    // theta = 0.5: bulk mass conservation
    let p = ModelParams::new(ModelKind::Sep, 512, 0.5, 1.0).unwrap();
    let bm = bulk_mass_estimate(&p, &g, t, PROBE_REPLICAS, derive_seed(SEED, 81), &h).unwrap();
    let int = reservoir_hydro::quadrature::integrate(|u| g.eval(u), 0.0, 1.0, 1e-12).unwrap();
    let mass_ok = (bm.value - int).abs() < BULK_MASS_TOL;
    details.push(format!("theta=0.5: bulk mass {:.4}±{:.4} vs integral {int:.4} ({})", bm.value, bm.stderr, if mass_ok { "ok" } else { "FAIL" }));

    Outcome {
        pass: sink_ok && crit_ok && mass_ok,
        summary: format!("sink {} / boundary relation {} / bulk mass {}", ok(sink_ok), ok(crit_ok), ok(mass_ok)),
        details,
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fail"
    }
}

fn entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xe7);
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.05..0.95);
        let b: f64 = rng.random_range(0.05..0.95);
        let g = Profile::parse(&format!("affine({a},{})", b - a)).unwrap();
        let p_ref = a / (1.0 + a);
        for n in [1usize, 10, 100, 1000, 10_000] {
            let params = ModelParams::new(ModelKind::Sep, n.max(2), 1.0, 1.0).unwrap();
            let h = relative_entropy(&g, p_ref, &params).unwrap() + reservoir_entropy_term(&g, p_ref, &params).unwrap();
            worst = worst.max(h - entropy_bound(params.n, p_ref));
            count += 1;
        }
    }
    Outcome {
        pass: worst <= 0.0,
        summary: format!("max(H - N log(1/min(p,1-p))) = {worst:.3e} over {count} cases"),
        details: vec![],
    }
}

fn oracle_consistency() -> Outcome {
    let mut semi = 0.0f64;
    let mut gen = 0.0f64;
    let mut mix = 0.0f64;
    for &theta in &[0.0, 1.0, 2.0] {
        for &alpha in &[0.5, 2.0] {
            let p = ModelParams::new(ModelKind::Rw, 3, theta, alpha).unwrap();
            let a = transition_matrix(&p, 0.3).unwrap().p;
            let b = transition_matrix(&p, 0.7).unwrap().p;
            let ab = transition_matrix(&p, 1.0).unwrap().p;
            semi = semi.max((&a * &b - &ab).abs().max());
            let pi = stationary_pi(&p).unwrap();
            let q = walk_generator(&p).unwrap().dense();
            for j in 0..pi.len() {
                let s: f64 = (0..pi.len()).map(|i| pi[i] * q[(i, j)]).sum();
                gen = gen.max(s.abs());
            }
            let far = transition_matrix(&p, 10.0).unwrap().p;
            for i in 0..pi.len() {
                for j in 0..pi.len() {
                    mix = mix.max((far[(i, j)] - pi[j]).abs());
                }
            }
        }
    }
    Outcome {
        pass: semi < SEMIGROUP_TOL && gen < GENERATOR_TOL && mix < MIXING_TOL,
        summary: format!("semigroup {semi:.2e}, |pi Q| {gen:.2e}, rows vs pi at t=10 {mix:.2e}"),
        details: vec![],
    }
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let results = [
        report(1, "reversibility", secs(10), reversibility),
        report(2, "exact finite-N Poisson structure", secs(300), exact_poisson_structure),
        report(3, "propagation of local equilibrium", secs(600), local_equilibrium),
        report(4, "hydrodynamic phase transition", secs(1800), hydro),
        report(5, "wentzell / non-local dirichlet equivalence", secs(120), wentzell_equivalence),
        report(6, "uniqueness energy decay", secs(60), energy_decay),
        report(7, "exclusion boundary behaviour", secs(900), sep_boundary),
        report(8, "entropy bound", secs(1), entropy),
        report(9, "oracle self-consistency", secs(1), oracle_consistency),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria pass [{:.0}s]", results.len(), start.elapsed().as_secs_f64());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
