//! Product measures: the slowly varying initial law, the reversible families,
//! exact sampling, detailed balance on truncated state spaces and relative entropy.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kmc::replica_rng;
use crate::model::{enabled_transitions, Configuration, ModelKind, ModelParams, MAX_COUNT};
use crate::profile::Profile;
use crate::quadrature;

/// Poisson at site 0, and Poisson (RW) or Bernoulli (SEP) parameters at sites 1..N.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    pub kind: ModelKind,
    pub site0: f64,
    pub bulk: Vec<f64>,
}

impl ProductMeasure {
    pub fn validate(&self) -> Result<()> {
        if !(self.site0.is_finite() && self.site0 >= 0.0) {
            return Err(Error::input(format!("site-0 mean must be finite and nonnegative, got {}", self.site0)));
        }
        for (i, &b) in self.bulk.iter().enumerate() {
            let ok = match self.kind {
                ModelKind::Rw => b.is_finite() && b >= 0.0,
                ModelKind::Sep => (0.0..=1.0).contains(&b),
            };
            if !ok {
                return Err(Error::input(format!("bulk parameter {b} at site {} is out of range", i + 1)));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.bulk.len()
    }

    /// Parameter of the site-x marginal (site 0 included).
    pub fn param(&self, x: usize) -> f64 {
        if x == 0 {
            self.site0
        } else {
            self.bulk[x - 1]
        }
    }

    fn ln_site(&self, x: usize, k: u64) -> f64 {
        if x == 0 || self.kind == ModelKind::Rw {
            ln_poisson(k, self.param(x))
        } else {
            let p = self.param(x);
            match k {
                0 => (1.0 - p).ln(),
                1 => p.ln(),
                _ => f64::NEG_INFINITY,
            }
        }
    }

    /// Log of the product weight of a configuration.
    pub fn ln_weight(&self, cfg: &Configuration) -> f64 {
        cfg.occupations.iter().enumerate().map(|(x, &k)| self.ln_site(x, k)).sum()
    }
}

pub fn ln_poisson(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = k as f64;
    k * mean.ln() - mean - ln_gamma(k + 1.0)
}

/// μ_N: site 0 ~ Poisson((N^θ/α)γ(0)), site x ~ γ(x/N).
pub fn initial_measure(profile: &Profile, p: &ModelParams) -> Result<ProductMeasure> {
    profile.validate_density(p.kind, p.theta)?;
    let m = ProductMeasure {
        kind: p.kind,
        site0: p.reservoir_scale() * profile.eval(0.0),
        bulk: profile.on_bulk_grid(p.n),
    };
    m.validate()?;
    Ok(m)
}

/// Largest SEP level accepted by [`reversible_measure`].
pub const SEP_LEVEL_MAX: f64 = 1.0 - 1e-9;

/// ν_λ for RW (level λ > 0) or ν_p for SEP (0 < p ≤ 1−10⁻⁹).
pub fn reversible_measure(level: f64, p: &ModelParams) -> Result<ProductMeasure> {
    let site0 = match p.kind {
        ModelKind::Rw => {
            if !(level.is_finite() && level > 0.0) {
                return Err(Error::input(format!("RW level must be positive, got {level}")));
            }
            p.reservoir_scale() * level
        }
        ModelKind::Sep => {
            if !(level > 0.0 && level <= SEP_LEVEL_MAX) {
                return Err(Error::input(format!("SEP level must lie in (0, 1-1e-9], got {level}")));
            }
            p.reservoir_scale() * level / (1.0 - level)
        }
    };
    let m = ProductMeasure { kind: p.kind, site0, bulk: vec![level; p.n] };
    m.validate()?;
    Ok(m)
}

/// Independent exact draws per site, from stream 0 of `seed`.
pub fn sample(measure: &ProductMeasure, seed: u64) -> Result<Configuration> {
    sample_with(measure, &mut replica_rng(seed, 0))
}

pub fn sample_with<R: Rng + ?Sized>(measure: &ProductMeasure, rng: &mut R) -> Result<Configuration> {
    let mut occ = Vec::with_capacity(measure.n() + 1);
    occ.push(poisson_draw(measure.site0, rng)?);
    for &b in &measure.bulk {
        let v = match measure.kind {
            ModelKind::Rw => poisson_draw(b, rng)?,
            ModelKind::Sep => rng.random_bool(b) as u64,
        };
        occ.push(v);
    }
    Ok(Configuration::new(occ))
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    if mean >= 0.25 * MAX_COUNT as f64 {
        return Err(Error::resource(format!("Poisson mean {mean} is too large for the occupation counter")));
    }
    let d = Poisson::new(mean).map_err(|e| Error::input(format!("Poisson mean {mean}: {e}")))?;
    let v: f64 = d.sample(rng);
    if v >= MAX_COUNT as f64 {
        return Err(Error::resource(format!("Poisson draw with mean {mean} overflows the counter")));
    }
    Ok(v as u64)
}

/// Largest truncated state space the detailed-balance check will enumerate.
pub const MAX_STATES: f64 = 1e7;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn truncated_state_count(p: &ModelParams, cap: u64) -> f64 {
    let sites = p.n as u64 + 1;
    match p.kind {
        ModelKind::Rw => binomial(cap + sites, sites),
        ModelKind::Sep => (0..=cap.min(p.n as u64)).map(|j| binomial(p.n as u64, j) * (cap - j + 1) as f64).sum(),
    }
}

fn for_each_state(p: &ModelParams, cap: u64, f: &mut dyn FnMut(&Configuration)) {
    fn rec(x: usize, left: u64, p: &ModelParams, occ: &mut Vec<u64>, f: &mut dyn FnMut(&Configuration)) {
        if x > p.n {
            f(&Configuration::new(occ.clone()));
            return;
        }
        let top = if x >= 1 && p.kind == ModelKind::Sep { left.min(1) } else { left };
        for k in 0..=top {
            occ.push(k);
            rec(x + 1, left - k, p, occ, f);
            occ.pop();
        }
    }
    let mut occ = Vec::with_capacity(p.n + 1);
    rec(0, cap, p, &mut occ, f);
}

/// Detailed-balance residual of the model's own reversible measure at `level`.
pub fn detailed_balance_residual(p: &ModelParams, level: f64, mass_cap: u64) -> Result<f64> {
    let m = reversible_measure(level, p)?;
    detailed_balance_residual_for(&m, p, mass_cap)
}

/// max |1 − w(η′)r(η′→η) / (w(η)r(η→η′))| over states of mass ≤ `mass_cap` and their enabled moves.
///
/// The ratio form is the relative residual; it is evaluated in log space so
/// that large reservoir means do not overflow.
pub fn detailed_balance_residual_for(m: &ProductMeasure, p: &ModelParams, mass_cap: u64) -> Result<f64> {
    if m.kind != p.kind || m.n() != p.n {
        return Err(Error::input("measure does not match the model"));
    }
    let count = truncated_state_count(p, mass_cap);
    if count > MAX_STATES {
        return Err(Error::resource(format!("truncated state space has {count:.3e} states (limit 1e7)")));
    }
    let mut worst: f64 = 0.0;
    for_each_state(p, mass_cap, &mut |eta| {
        let lw = m.ln_weight(eta);
        if !lw.is_finite() {
            return;
        }
        for tr in enabled_transitions(eta, p) {
            let mut next = eta.clone();
            next.occupations[tr.from] -= 1;
            next.occupations[tr.to] += 1;
            let back = crate::model::jump_rate(&next, tr.to, tr.from, p).expect("adjacent sites");
            let r = if back > 0.0 {
                let ln_fwd = lw + tr.rate.ln();
                let ln_bwd = m.ln_weight(&next) + back.ln();
                (ln_bwd - ln_fwd).exp_m1().abs()
            } else {
                1.0
            };
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
    });
    Ok(worst)
}

/// KL(Bernoulli(q) ‖ Bernoulli(p)).
pub fn bernoulli_kl(q: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(q, p) + term(1.0 - q, 1.0 - p)
}

/// Reference level p with p/(1−p) = γ(0), which makes the site-0 terms cancel.
pub fn matched_reference_level(profile: &Profile) -> Result<f64> {
    let g0 = profile.eval(0.0);
    if !(g0 > 0.0 && g0.is_finite()) {
        return Err(Error::input(format!("gamma(0) = {g0} admits no reference level in (0,1)")));
    }
    Ok(g0 / (1.0 + g0))
}

/// Σ_{x=1}^N KL(γ(x/N) ‖ p_ref): the entropy of μ_N relative to ν_{p_ref} with site 0 left out.
///
/// For p_ref/(1−p_ref) = γ(0) the site-0 marginals coincide, so this is the
/// full relative entropy (see [`reservoir_entropy_term`]).
pub fn relative_entropy(profile: &Profile, p_ref: f64, params: &ModelParams) -> Result<f64> {
    if params.kind != ModelKind::Sep {
        return Err(Error::input("relative entropy is defined for the exclusion model"));
    }
    if !(p_ref > 0.0 && p_ref < 1.0) {
        return Err(Error::input(format!("reference level must lie strictly inside (0,1), got {p_ref}")));
    }
    profile.validate_density(ModelKind::Sep, params.theta)?;
    let n = params.n;
    Ok((1..=n).map(|x| bernoulli_kl(profile.eval(x as f64 / n as f64), p_ref)).sum())
}

/// KL between the site-0 Poisson marginals of μ_N and ν_{p_ref}; zero when the levels match.
pub fn reservoir_entropy_term(profile: &Profile, p_ref: f64, params: &ModelParams) -> Result<f64> {
    if !(p_ref > 0.0 && p_ref < 1.0) {
        return Err(Error::input(format!("reference level must lie strictly inside (0,1), got {p_ref}")));
    }
    let a = params.reservoir_scale() * profile.eval(0.0);
    let b = params.reservoir_scale() * p_ref / (1.0 - p_ref);
    let t = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok(t - a + b)
}

/// N·log(1/min(p,1−p)).
pub fn entropy_bound(n: usize, p_ref: f64) -> f64 {
    n as f64 * (1.0 / p_ref.min(1.0 - p_ref)).ln()
}

/// Absolute tolerance for the bulk-mass integral.
pub const MASS_TOL: f64 = 1e-10;

/// M = γ(0)/α + ∫γ.
pub fn conserved_mass(profile: &Profile, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::input(format!("alpha must be positive, got {alpha}")));
    }
    let bulk = quadrature::integrate(|u| profile.eval(u), 0.0, 1.0, MASS_TOL)?;
    Ok(profile.eval(0.0) / alpha + bulk)
}
