//! Configurations, parameters and the exact jump rates of both particle systems.
//!
//! Every rate returned here already carries the diffusive factor N², so the
//! simulation clock is macroscopic time.

use crate::error::{Error, Result};

/// Largest count any site may hold.
pub const MAX_COUNT: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Independent random walks; bulk sites hold any number of particles.
    Rw,
    /// Symmetric exclusion in the bulk; the reservoir is unbounded.
    Sep,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rw => "rw",
            ModelKind::Sep => "sep",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rw" => Ok(ModelKind::Rw),
            "sep" => Ok(ModelKind::Sep),
            other => Err(Error::input(format!("unknown model '{other}' (expected rw or sep)"))),
        }
    }
}

/// Position of θ relative to the critical value 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Sub,
    Critical,
    Super,
}

impl Regime {
    pub fn of(theta: f64) -> Regime {
        if theta < 1.0 {
            Regime::Sub
        } else if theta == 1.0 {
            Regime::Critical
        } else {
            Regime::Super
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub n: usize,
    pub theta: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(kind: ModelKind, n: usize, theta: f64, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::input(format!("N must be at least 2, got {n}")));
        }
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::input(format!("theta must be finite and nonnegative, got {theta}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::input(format!("alpha must be finite and positive, got {alpha}")));
        }
        Ok(ModelParams { kind, n, theta, alpha })
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.theta)
    }

    /// The same model at another lattice size.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        ModelParams::new(self.kind, n, self.theta, self.alpha)
    }

    pub fn n_sq(&self) -> f64 {
        let n = self.n as f64;
        n * n
    }

    /// N^θ/α: the reservoir size that balances a unit bulk density.
    pub fn reservoir_scale(&self) -> f64 {
        (self.n as f64).powf(self.theta) / self.alpha
    }

    /// αN^{2−θ}: release rate of a single reservoir particle.
    pub fn release_rate(&self) -> f64 {
        self.alpha * (self.n as f64).powf(2.0 - self.theta)
    }
}

/// Occupation numbers η(0),…,η(N).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub occupations: Vec<u64>,
}

impl Configuration {
    pub fn new(occupations: Vec<u64>) -> Self {
        Configuration { occupations }
    }

    pub fn zero(n: usize) -> Self {
        Configuration { occupations: vec![0; n + 1] }
    }

    pub fn n(&self) -> usize {
        self.occupations.len().saturating_sub(1)
    }

    pub fn reservoir(&self) -> u64 {
        self.occupations[0]
    }

    pub fn bulk(&self) -> &[u64] {
        &self.occupations[1..]
    }

    /// Checks the configuration against the state space of `p`.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        if self.occupations.len() != p.n + 1 {
            return Err(Error::input(format!(
                "configuration has {} sites, model expects {}",
                self.occupations.len(),
                p.n + 1
            )));
        }
        if p.kind == ModelKind::Sep {
            if let Some(x) = self.bulk().iter().position(|&v| v > 1) {
                return Err(Error::input(format!("SEP bulk site {} holds {} particles", x + 1, self.occupations[x + 1])));
            }
        }
        let mut total: u64 = 0;
        for &v in &self.occupations {
            total = total
                .checked_add(v)
                .filter(|&s| s <= MAX_COUNT)
                .ok_or_else(|| Error::resource("total mass exceeds 2^63-1"))?;
        }
        Ok(())
    }
}

/// One enabled move x→y with its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

fn check_move(cfg: &Configuration, x: usize, y: usize, p: &ModelParams) -> Result<()> {
    if cfg.occupations.len() != p.n + 1 {
        return Err(Error::input(format!(
            "configuration has {} sites, model expects {}",
            cfg.occupations.len(),
            p.n + 1
        )));
    }
    if x > p.n || y > p.n {
        return Err(Error::input(format!("site out of range: ({x},{y}) with N={}", p.n)));
    }
    if x.abs_diff(y) != 1 {
        return Err(Error::input(format!("sites {x} and {y} are not nearest neighbours")));
    }
    Ok(())
}

fn rate_unchecked(eta: &[u64], x: usize, y: usize, p: &ModelParams) -> f64 {
    let src = eta[x];
    if src == 0 {
        return 0.0;
    }
    if x == 0 {
        let free = match p.kind {
            ModelKind::Rw => 1.0,
            ModelKind::Sep => (1 - eta[1].min(1)) as f64,
        };
        return p.release_rate() * src as f64 * free;
    }
    let free = match p.kind {
        ModelKind::Rw => 1.0,
        // the reservoir never blocks
        ModelKind::Sep if y == 0 => 1.0,
        ModelKind::Sep => (1 - eta[y].min(1)) as f64,
    };
    p.n_sq() * src as f64 * free
}

/// Rate of the move x→y in configuration `cfg`, zero when the move is disabled.
pub fn jump_rate(cfg: &Configuration, x: usize, y: usize, p: &ModelParams) -> Result<f64> {
    check_move(cfg, x, y, p)?;
    Ok(rate_unchecked(&cfg.occupations, x, y, p))
}

/// Moves one particle x→y when the move is enabled; otherwise returns `cfg` unchanged.
pub fn apply_jump(cfg: &Configuration, x: usize, y: usize, p: &ModelParams) -> Result<Configuration> {
    check_move(cfg, x, y, p)?;
    let mut out = cfg.clone();
    if rate_unchecked(&cfg.occupations, x, y, p) > 0.0 {
        if out.occupations[y] >= MAX_COUNT {
            return Err(Error::resource(format!("site {y} count would exceed 2^63-1")));
        }
        out.occupations[x] -= 1;
        out.occupations[y] += 1;
    }
    Ok(out)
}

/// Every move with positive rate, in increasing order of (from, to).
pub fn enabled_transitions(cfg: &Configuration, p: &ModelParams) -> Vec<Transition> {
    let eta = &cfg.occupations;
    let mut out = Vec::new();
    for x in 0..=p.n {
        if eta[x] == 0 {
            continue;
        }
        for y in [x.wrapping_sub(1), x + 1] {
            if y > p.n {
                continue;
            }
            let rate = rate_unchecked(eta, x, y, p);
            if rate > 0.0 {
                out.push(Transition { from: x, to: y, rate });
            }
        }
    }
    out
}

pub fn total_mass(cfg: &Configuration) -> u64 {
    cfg.occupations.iter().sum()
}
