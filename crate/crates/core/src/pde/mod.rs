//! Limiting boundary-value problems for the bulk density and two solvers for them.
//!
//! Every problem is the heat equation ∂_tρ = ∂²_uρ on (0,1) with ∂_uρ(t,1) = 0.
//! The left boundary is one of seven variants, see [`Boundary`]. The finite
//! difference backend lives in [`fd`], the eigenfunction backend in [`spectral`].

pub mod fd;
pub mod spectral;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measures::conserved_mass;
use crate::model::{ModelKind, Regime};
use crate::profile::Profile;
use crate::quadrature;

pub use fd::{solve_fd, solve_fd_with, FdOptions, WentzellScheme};
pub use spectral::{solve_spectral, solve_spectral_with, SpectralOptions};

/// Blow-up guard shared by both backends.
pub const BLOW_UP: f64 = 1e6;

/// Tolerance used when projecting profiles on a basis.
pub const PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// ∂_uρ(t,0) = 0.
    Neumann,
    /// ∂²_uρ(t,0) = α∂_uρ(t,0), i.e. ∂_tρ(t,0) = α∂_uρ(t,0).
    Wentzell,
    /// ∂²_uρ(t,0) = 0: the boundary value never moves.
    HomWentzell,
    /// ρ(t,0) = α(M − ∫ρ(t,·)).
    NonlocalDirichlet,
    /// ρ(t,0) = γ(0).
    DirichletFixed,
    /// ρ(t,0)/(1−ρ(t,0)) = α(M − ∫ρ(t,·)).
    SepNonlinear,
    /// ρ(t,0) = 0.
    HomDirichlet,
}

impl Boundary {
    pub const ALL: [Boundary; 7] = [
        Boundary::Neumann,
        Boundary::Wentzell,
        Boundary::HomWentzell,
        Boundary::NonlocalDirichlet,
        Boundary::DirichletFixed,
        Boundary::SepNonlinear,
        Boundary::HomDirichlet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Neumann => "neumann",
            Boundary::Wentzell => "wentzell",
            Boundary::HomWentzell => "hom_wentzell",
            Boundary::NonlocalDirichlet => "nonlocal",
            Boundary::DirichletFixed => "dirichlet",
            Boundary::SepNonlinear => "sep_nonlinear",
            Boundary::HomDirichlet => "hom_dirichlet",
        }
    }

    /// Variants whose solution carries a finite reservoir m(t) = M − ∫ρ.
    pub fn has_reservoir(self) -> bool {
        matches!(self, Boundary::Wentzell | Boundary::NonlocalDirichlet | Boundary::SepNonlinear)
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "neumann" => Boundary::Neumann,
            "wentzell" => Boundary::Wentzell,
            "hom_wentzell" | "homogeneous_wentzell" => Boundary::HomWentzell,
            "nonlocal" | "nonlocal_dirichlet" | "non_local" => Boundary::NonlocalDirichlet,
            "dirichlet" | "dirichlet_fixed" => Boundary::DirichletFixed,
            "sep_nonlinear" | "nonlinear" | "nonlinear_dirichlet" => Boundary::SepNonlinear,
            "hom_dirichlet" | "homogeneous_dirichlet" => Boundary::HomDirichlet,
            _ => return Err(Error::input(format!("unknown boundary condition '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub bc: Boundary,
    pub alpha: f64,
    /// Conserved total mass. Used by the reservoir variants; for
    /// `HomWentzell` it records the limiting reservoir mass γ(0)/α.
    pub mass: f64,
    pub gamma: Profile,
    pub horizon: f64,
}

impl PdeProblem {
    /// `mass = None` selects M = γ(0)/α + ∫γ (γ(0)/α for `HomWentzell`).
    pub fn new(bc: Boundary, alpha: f64, mass: Option<f64>, gamma: Profile, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::input(format!("horizon must be positive, got {horizon}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::input(format!("alpha must be positive, got {alpha}")));
        }
        let bulk = quadrature::integrate(|u| gamma.eval(u), 0.0, 1.0, 1e-12)?;
        let mass = match (bc, mass) {
            (Boundary::HomWentzell, None) => gamma.eval(0.0) / alpha,
            (Boundary::Wentzell, Some(m)) => {
                let want = conserved_mass(&gamma, alpha)?;
                if (m - want).abs() > 1e-8 {
                    return Err(Error::input(format!(
                        "the Wentzell flow fixes M = γ(0)/α + ∫γ = {want}, got {m}"
                    )));
                }
                want
            }
            (_, None) => conserved_mass(&gamma, alpha)?,
            (_, Some(m)) => m,
        };
        if !mass.is_finite() {
            return Err(Error::input("M must be finite"));
        }
        if matches!(bc, Boundary::NonlocalDirichlet | Boundary::SepNonlinear) && mass < bulk - 1e-10 {
            return Err(Error::input(format!("M = {mass} is below ∫γ = {bulk}: the reservoir would be negative")));
        }
        if bc == Boundary::SepNonlinear {
            let bad = (0..=4096).map(|i| gamma.eval(i as f64 / 4096.0)).find(|v| !(-1e-12..=1.0 + 1e-12).contains(v));
            if let Some(v) = bad {
                return Err(Error::input(format!("nonlinear Dirichlet problem needs data in [0,1], found {v}")));
            }
        }
        Ok(PdeProblem { bc, alpha, mass, gamma, horizon })
    }

    /// Fixed boundary value of the pinned variants.
    pub fn pinned_value(&self) -> Option<f64> {
        match self.bc {
            Boundary::DirichletFixed | Boundary::HomWentzell => Some(self.gamma.eval(0.0)),
            Boundary::HomDirichlet => Some(0.0),
            _ => None,
        }
    }
}

/// The limiting problem of a particle system in each regime of θ.
pub fn hydro_problem(kind: ModelKind, theta: f64, alpha: f64, gamma: &Profile, horizon: f64) -> Result<PdeProblem> {
    let bc = match (kind, Regime::of(theta)) {
        (_, Regime::Sub) => Boundary::Neumann,
        (ModelKind::Rw, Regime::Critical) => Boundary::NonlocalDirichlet,
        (ModelKind::Sep, Regime::Critical) => Boundary::SepNonlinear,
        (ModelKind::Rw, Regime::Super) => Boundary::DirichletFixed,
        (ModelKind::Sep, Regime::Super) => Boundary::HomDirichlet,
    };
    PdeProblem::new(bc, alpha, None, gamma.clone(), horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Dirichlet at 0, Neumann at 1: Ψ_k = √2 sin(π(k+½)u).
    Dn,
    /// Neumann at both ends: Φ_0 = 1, Φ_k = √2 cos(πku).
    Nn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Eigenbasis {
    pub kind: BasisKind,
    pub modes: usize,
}

impl Eigenbasis {
    pub fn new(kind: BasisKind, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::input("a basis needs at least one mode"));
        }
        Ok(Eigenbasis { kind, modes })
    }

    fn freq(&self, k: usize) -> f64 {
        match self.kind {
            BasisKind::Dn => PI * (k as f64 + 0.5),
            BasisKind::Nn => PI * k as f64,
        }
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.freq(k).powi(2)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.modes).map(|k| self.eigenvalue(k)).collect()
    }

    pub fn eval(&self, k: usize, u: f64) -> f64 {
        match (self.kind, k) {
            (BasisKind::Nn, 0) => 1.0,
            (BasisKind::Nn, _) => SQRT_2 * (self.freq(k) * u).cos(),
            (BasisKind::Dn, _) => SQRT_2 * (self.freq(k) * u).sin(),
        }
    }

    /// Ψ′_k(0); zero for the Neumann basis.
    pub fn deriv0(&self, k: usize) -> f64 {
        match self.kind {
            BasisKind::Dn => SQRT_2 * self.freq(k),
            BasisKind::Nn => 0.0,
        }
    }

    /// ⟨1, Ψ_k⟩, which equals 2/Ψ′_k(0) in the Dirichlet–Neumann basis.
    pub fn one_coefficient(&self, k: usize) -> f64 {
        match self.kind {
            BasisKind::Dn => 2.0 / self.deriv0(k),
            BasisKind::Nn => (k == 0) as u8 as f64,
        }
    }

    /// 1 − Σ_{k<K}⟨1,Ψ_k⟩², the part of ∫ρ carried by a boundary value beyond mode K.
    pub fn mass_tail(&self) -> f64 {
        match self.kind {
            BasisKind::Dn => 1.0 - (0..self.modes).map(|k| self.one_coefficient(k).powi(2)).sum::<f64>(),
            BasisKind::Nn => 0.0,
        }
    }
}

/// c_k = ⟨γ, Ψ_k⟩ by adaptive quadrature.
pub fn project(profile: &Profile, basis: &Eigenbasis) -> Result<Vec<f64>> {
    project_fn(|u| profile.eval(u), basis)
}

pub fn project_fn(f: impl Fn(f64) -> f64, basis: &Eigenbasis) -> Result<Vec<f64>> {
    (0..basis.modes)
        .map(|k| quadrature::integrate(|u| f(u) * basis.eval(k, u), 0.0, 1.0, PROJECTION_TOL))
        .collect()
}

/// Composite Simpson weights on a uniform grid of [0,1] (trapezoid if the interval count is odd).
pub fn grid_weights(points: usize) -> Vec<f64> {
    let n = points - 1;
    let h = 1.0 / n as f64;
    let mut w = vec![0.0; points];
    if n % 2 == 0 {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = h / 3.0 * if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        }
    } else {
        w.iter_mut().for_each(|wi| *wi = h);
        w[0] = h / 2.0;
        w[n] = h / 2.0;
    }
    w
}

/// Trapezoid rule on a uniform grid of [0,1].
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    (inner + 0.5 * (values[0] + values[n])) / n as f64
}

/// ⟨ξ, Ψ_k⟩ for a function sampled on a uniform grid of [0,1].
pub fn grid_coefficients(xi: &[f64], basis: &Eigenbasis) -> Result<Vec<f64>> {
    if xi.len() < 3 {
        return Err(Error::input("grid function needs at least three points"));
    }
    let w = grid_weights(xi.len());
    let n = (xi.len() - 1) as f64;
    Ok((0..basis.modes)
        .map(|k| xi.iter().zip(&w).enumerate().map(|(i, (x, wi))| x * wi * basis.eval(k, i as f64 / n)).sum())
        .collect())
}

/// E = Σ_k c_k²/(2λ_k); the constant Neumann mode (λ = 0) is left out.
pub fn energy_from_coefficients(c: &[f64], basis: &Eigenbasis) -> f64 {
    c.iter()
        .enumerate()
        .filter(|(k, _)| basis.eigenvalue(*k) > 0.0)
        .map(|(k, ck)| ck * ck / (2.0 * basis.eigenvalue(k)))
        .sum()
}

/// Energy of a grid function: truncated Σ_k ⟨ξ,Ψ_k⟩²/(2λ_k).
pub fn energy_functional(xi: &[f64], basis: &Eigenbasis) -> Result<f64> {
    Ok(energy_from_coefficients(&grid_coefficients(xi, basis)?, basis))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    FiniteDifference,
    Spectral,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::FiniteDifference => "fd",
            Backend::Spectral => "spectral",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fd" | "finite-difference" | "finite_difference" => Ok(Backend::FiniteDifference),
            "spectral" => Ok(Backend::Spectral),
            other => Err(Error::input(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub problem: PdeProblem,
    pub backend: Backend,
    pub t_grid: Vec<f64>,
    /// Uniform grid of [0,1].
    pub u_grid: Vec<f64>,
    /// `values[i][j]` = ρ(t_i, u_j).
    pub values: Vec<Vec<f64>>,
    /// ρ(t_i, 0).
    pub boundary: Vec<f64>,
    /// ∫ρ(t_i,·) as computed by the backend (trapezoid for finite differences,
    /// series identity for the spectral backend).
    pub bulk_mass: Vec<f64>,
    /// m(t_i) = M − ∫ρ(t_i,·) for the reservoir variants.
    pub reservoir_trace: Option<Vec<f64>>,
    /// Mode coefficients ⟨ρ(t_i,·), Ψ_k⟩ (spectral backend only).
    pub coefficients: Option<(Eigenbasis, Vec<Vec<f64>>)>,
    /// Largest bulk-mass contribution that the series identity attributes to modes ≥ K.
    pub mass_truncation: f64,
    pub warnings: Vec<String>,
}

/// Reservoir mass at a time, with ρ(t,0)/α + ∫ρ for the Wentzell flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirMass {
    pub m: f64,
    pub conserved: Option<f64>,
}

impl PdeSolution {
    pub fn nx(&self) -> usize {
        self.u_grid.len() - 1
    }

    /// Time index and weight for linear interpolation in t.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let last = *self.t_grid.last().expect("nonempty grid");
        if !(t.is_finite() && t >= -1e-12 && t <= last + 1e-12) {
            return Err(Error::input(format!("time {t} outside the solved range [0, {last}]")));
        }
        let i = self.t_grid.partition_point(|&s| s <= t).clamp(1, self.t_grid.len() - 1) - 1;
        let span = self.t_grid[i + 1] - self.t_grid[i];
        Ok((i, ((t - self.t_grid[i]) / span).clamp(0.0, 1.0)))
    }

    fn lerp_series(&self, series: &[f64], t: f64) -> Result<f64> {
        let (i, w) = self.locate(t)?;
        Ok((1.0 - w) * series[i] + w * series[i + 1])
    }

    /// Density profile at time t on `u_grid`.
    pub fn profile_at(&self, t: f64) -> Result<Vec<f64>> {
        let (i, w) = self.locate(t)?;
        Ok(self.values[i].iter().zip(&self.values[i + 1]).map(|(a, b)| (1.0 - w) * a + w * b).collect())
    }

    /// ρ(t,u) by bilinear interpolation.
    pub fn value(&self, t: f64, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::input(format!("u = {u} outside [0,1]")));
        }
        let row = self.profile_at(t)?;
        Ok(interpolate_uniform(&row, u))
    }

    pub fn boundary_at(&self, t: f64) -> Result<f64> {
        self.lerp_series(&self.boundary, t)
    }

    /// ∫H ρ(t,·) on the solution grid.
    pub fn pairing(&self, t: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
        let row = self.profile_at(t)?;
        let w = grid_weights(row.len());
        Ok(row.iter().zip(&w).zip(&self.u_grid).map(|((r, wi), &u)| r * wi * h(u)).sum())
    }

    /// |ρ(t_i,1) − ρ(t_i,1−h)|/h.
    pub fn right_flux(&self, i: usize) -> f64 {
        let row = &self.values[i];
        let n = row.len() - 1;
        (row[n] - row[n - 1]).abs() * n as f64
    }
}

fn interpolate_uniform(row: &[f64], u: f64) -> f64 {
    let n = row.len() - 1;
    let x = u * n as f64;
    let j = (x.floor() as usize).min(n - 1);
    let w = x - j as f64;
    (1.0 - w) * row[j] + w * row[j + 1]
}

/// m(t) = M − ∫ρ(t,·) for the reservoir variants.
pub fn reservoir_mass(sol: &PdeSolution, t: f64) -> Result<ReservoirMass> {
    let p = &sol.problem;
    if !p.bc.has_reservoir() {
        return Err(Error::input(format!("boundary condition {} has no finite reservoir", p.bc)));
    }
    let bulk = sol.lerp_series(&sol.bulk_mass, t)?;
    let conserved = match p.bc {
        Boundary::Wentzell => Some(sol.boundary_at(t)? / p.alpha + bulk),
        _ => None,
    };
    Ok(ReservoirMass { m: p.mass - bulk, conserved })
}

/// Space-time L² distance over t ≥ `t_min`, and the largest per-time L² distance.
///
/// Both solutions must share the time grid; `b` is interpolated onto the `u`
/// grid of `a`.
pub fn l2_distances(a: &PdeSolution, b: &PdeSolution, t_min: f64) -> Result<(f64, f64)> {
    if a.t_grid.len() != b.t_grid.len() || a.t_grid.iter().zip(&b.t_grid).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::input("solutions must share their time grid"));
    }
    let w = grid_weights(a.u_grid.len());
    let mut per_time = Vec::new();
    let mut times = Vec::new();
    for (i, &t) in a.t_grid.iter().enumerate() {
        if t + 1e-12 < t_min {
            continue;
        }
        let d2: f64 = a.u_grid
            .iter()
            .zip(&a.values[i])
            .zip(&w)
            .map(|((&u, &ra), wi)| (ra - interpolate_uniform(&b.values[i], u)).powi(2) * wi)
            .sum();
        per_time.push(d2);
        times.push(t);
    }
    if per_time.is_empty() {
        return Err(Error::input("no output times at or after t_min"));
    }
    let max = per_time.iter().fold(0.0_f64, |m, v| m.max(*v)).sqrt();
    let total = if per_time.len() == 1 {
        0.0
    } else {
        times.windows(2).zip(per_time.windows(2)).map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1])).sum::<f64>()
    };
    Ok((total.sqrt(), max))
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || v.abs() > BLOW_UP) {
        return Err(Error::numeric(format!("{what}: solution left the blow-up guard (value {v})")));
    }
    Ok(())
}
