//! Exact continuous-time simulation and empirical observables.
//!
//! Holding times are exponential at the current total rate and the next move is
//! chosen proportionally to rates. States are read off at fixed macroscopic
//! times by the "advance until the next sample time" loop; nothing is
//! approximated.

mod rw;
mod rw_particles;
mod sep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use rw::RwEngine;
pub use rw_particles::RwParticleEngine;
pub use sep::{IndexedSet, SepEngine};

use crate::error::{Error, Result};
use crate::model::{total_mass, Configuration, ModelKind, ModelParams};

/// Generator for replica `stream` of experiment `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f` for replicas 0..count on the rayon pool and returns results in replica order.
pub fn run_replicas<T, F>(count: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            f(r, &mut rng)
        })
        .collect()
}

/// How independent walks are advanced. Exclusion always uses the event-driven engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// One exponential holding time per event at the current total rate.
    #[default]
    EventDriven,
    /// Walk-by-walk uniformized simulation (independent walks only).
    Particlewise,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "event" | "event-driven" | "gillespie" => Ok(Method::EventDriven),
            "particle" | "particlewise" => Ok(Method::Particlewise),
            other => Err(Error::input(format!("unknown simulation method '{other}'"))),
        }
    }
}

/// A running chain for either model.
#[derive(Debug, Clone)]
pub enum Engine {
    Rw(RwEngine),
    RwParticles(RwParticleEngine),
    Sep(SepEngine),
}

impl Engine {
    pub fn new(init: &Configuration, p: &ModelParams) -> Result<Self> {
        Engine::with_method(init, p, Method::EventDriven)
    }

    pub fn with_method(init: &Configuration, p: &ModelParams, method: Method) -> Result<Self> {
        init.validate(p)?;
        Ok(match (p.kind, method) {
            (ModelKind::Rw, Method::EventDriven) => Engine::Rw(RwEngine::new(init, p)),
            (ModelKind::Rw, Method::Particlewise) => Engine::RwParticles(RwParticleEngine::new(init, p)),
            (ModelKind::Sep, _) => Engine::Sep(SepEngine::new(init, p)),
        })
    }

    pub fn time(&self) -> f64 {
        match self {
            Engine::Rw(e) => e.time(),
            Engine::RwParticles(e) => e.time(),
            Engine::Sep(e) => e.time(),
        }
    }

    pub fn occupations(&self) -> &[u64] {
        match self {
            Engine::Rw(e) => e.occupations(),
            Engine::RwParticles(e) => e.occupations(),
            Engine::Sep(e) => e.occupations(),
        }
    }

    /// Events (or walk steps, particlewise) performed so far.
    pub fn events(&self) -> u64 {
        match self {
            Engine::Rw(e) => e.events(),
            Engine::RwParticles(e) => e.events(),
            Engine::Sep(e) => e.events(),
        }
    }

    /// Runs the chain up to time `t` (no-op if `t` is not ahead of the clock).
    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        if t <= self.time() {
            return;
        }
        match self {
            Engine::Rw(e) => e.advance_to(t, rng),
            Engine::RwParticles(e) => e.advance_to(t, rng),
            Engine::Sep(e) => e.advance_to(t, rng),
        }
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(self.occupations().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub sample_times: Vec<f64>,
    pub states: Vec<Configuration>,
    pub seed: u64,
}

fn check_times(times: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len() + 1);
    if times.first() != Some(&0.0) {
        out.push(0.0);
    }
    out.extend_from_slice(times);
    if out.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::input("sample times must be finite and nonnegative"));
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("sample times must be strictly increasing"));
    }
    Ok(out)
}

/// Simulates from `init`, recording the state at each sample time (0 is always recorded first).
pub fn simulate(init: &Configuration, p: &ModelParams, sample_times: &[f64], seed: u64) -> Result<Trajectory> {
    let mut rng = replica_rng(seed, 0);
    let (times, states) = simulate_with(init, p, sample_times, Method::EventDriven, &mut rng)?;
    Ok(Trajectory { params: *p, sample_times: times, states, seed })
}

pub fn simulate_with<R: Rng + ?Sized>(
    init: &Configuration,
    p: &ModelParams,
    sample_times: &[f64],
    method: Method,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<Configuration>)> {
    let times = check_times(sample_times)?;
    let mut engine = Engine::with_method(init, p, method)?;
    let mass = total_mass(init);
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        engine.advance_to(t, rng);
        let cfg = engine.configuration();
        assert_eq!(total_mass(&cfg), mass, "mass conservation violated at t={t}");
        states.push(cfg);
    }
    Ok((times, states))
}

/// Bulk occupations η(1..N) as reals, with the reservoir count alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDensity {
    pub values: Vec<f64>,
    pub reservoir: u64,
    pub n: usize,
}

impl EmpiricalDensity {
    pub fn from_configuration(cfg: &Configuration) -> Self {
        EmpiricalDensity {
            values: cfg.bulk().iter().map(|&v| v as f64).collect(),
            reservoir: cfg.reservoir(),
            n: cfg.n(),
        }
    }
}

/// (1/N)Σ_{x=1}^N H(x/N)η(x), with `h[x-1]` = H(x/N).
pub fn empirical_pairing(cfg: &Configuration, h: &[f64]) -> Result<f64> {
    let n = cfg.n();
    if h.len() != n {
        return Err(Error::input(format!("test function has {} values, bulk has {n} sites", h.len())));
    }
    Ok(cfg.bulk().iter().zip(h).map(|(&e, &hv)| hv * e as f64).sum::<f64>() / n as f64)
}

/// ⌊uN⌋, tolerant of u = x/N rounding just below an integer.
pub fn grid_index(u: f64, n: usize) -> usize {
    (u * n as f64 + 1e-9).floor() as usize
}

/// Occupations η(⌊uN⌋−k), …, η(⌊uN⌋+k).
pub fn window_counts(cfg: &Configuration, u: f64, k: usize) -> Result<Vec<u64>> {
    let n = cfg.n();
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::input(format!("window centre u={u} must lie in (0,1)")));
    }
    let c = grid_index(u, n);
    if c < k + 1 || c + k > n {
        return Err(Error::input(format!("window of half-width {k} around site {c} leaves the bulk 1..{n}")));
    }
    Ok(cfg.occupations[c - k..=c + k].to_vec())
}

/// Mean occupation of sites x+1..x+⌊εN⌋.
pub fn block_average(cfg: &Configuration, x: usize, eps: f64) -> Result<f64> {
    let n = cfg.n();
    let m = grid_index(eps, n);
    if m == 0 || x + m > n {
        return Err(Error::input(format!("block of {m} sites after site {x} does not fit in 1..{n}")));
    }
    Ok(cfg.occupations[x + 1..=x + m].iter().sum::<u64>() as f64 / m as f64)
}
