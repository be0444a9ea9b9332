//! Eigenfunction expansion in the basis that matches the boundary condition.
//!
//! For the Dirichlet-type variants the unknowns are c_k = ⟨ρ,Ψ_k⟩ with
//! c′_k = −λ_k c_k + b(t)Ψ′_k(0), where b(t) = ρ(t,0). Since Ψ_k(0) = 0 every
//! truncated series vanishes at 0, so the density is reconstructed with the
//! boundary value lifted out: ρ = b + Σ_k (c_k − b⟨1,Ψ_k⟩)Ψ_k. The same device
//! closes the bulk mass: ∫ρ = Σ_k⟨1,Ψ_k⟩c_k + τ_K b, τ_K = 1 − Σ_k⟨1,Ψ_k⟩²
//! accounting for the modes beyond K.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_finite, project, Backend, BasisKind, Boundary, Eigenbasis, PdeProblem, PdeSolution};
use crate::error::{Error, Result};

/// Relative energy in the last retained mode above which a warning is issued.
pub const TAIL_WARNING: f64 = 1e-6;

/// Largest λ·dt accepted by the explicit Runge–Kutta steps (stability limit ≈ 2.78).
pub const RK4_LAMBDA_DT: f64 = 2.5;

/// Earliest output time inspected for the tail-energy warning.
pub const TAIL_CHECK_FROM: f64 = 0.01;

/// Lifted energies below this are rounding noise (stationary data) and never warn.
pub const TAIL_ENERGY_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub modes: usize,
    /// Step bound for the Runge–Kutta integration; the linear variants are
    /// propagated exactly from output to output.
    pub dt: f64,
    pub outputs: usize,
    /// Number of reconstruction intervals on [0,1].
    pub nx_out: usize,
}

impl SpectralOptions {
    pub fn new(modes: usize, dt: f64) -> Self {
        SpectralOptions { modes, dt, outputs: 100, nx_out: 512 }
    }
}

pub fn solve_spectral(problem: &PdeProblem, modes: usize, dt: f64) -> Result<PdeSolution> {
    solve_spectral_with(problem, &SpectralOptions::new(modes, dt))
}

/// Boundary value of the nonlinear variant given D = M − Σ⟨1,Ψ_k⟩c_k.
///
/// Solves m = D − τb, b = αm/(1+αm) for m, i.e. αm² + (1+τα−αD)m − D = 0.
fn nonlinear_boundary(alpha: f64, tau: f64, d: f64) -> (f64, f64) {
    let bq = 1.0 + tau * alpha - alpha * d;
    let disc = (bq * bq + 4.0 * alpha * d).max(0.0);
    let m = 2.0 * d / (bq + disc.sqrt());
    (alpha * m / (1.0 + alpha * m), m)
}

struct Modes {
    lambda: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    tau: f64,
}

impl Modes {
    fn dot_w(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.w).map(|(a, b)| a * b).sum()
    }
}

pub fn solve_spectral_with(problem: &PdeProblem, opts: &SpectralOptions) -> Result<PdeSolution> {
    let k = opts.modes;
    if k < 8 {
        return Err(Error::input(format!("spectral solver needs at least 8 modes, got {k}")));
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::input(format!("time step must be positive, got {}", opts.dt)));
    }
    if opts.outputs == 0 || opts.nx_out < 2 {
        return Err(Error::input("need at least one output interval and two reconstruction intervals"));
    }
    let kind = if problem.bc == Boundary::Neumann { BasisKind::Nn } else { BasisKind::Dn };
    let basis = Eigenbasis::new(kind, k)?;
    let md = Modes {
        lambda: basis.eigenvalues(),
        v: (0..k).map(|i| basis.deriv0(i)).collect(),
        w: (0..k).map(|i| basis.one_coefficient(i)).collect(),
        tau: basis.mass_tail(),
    };
    let c0 = project(&problem.gamma, &basis)?;
    let interval = problem.horizon / opts.outputs as f64;
    let times: Vec<f64> = (0..=opts.outputs).map(|j| j as f64 * interval).collect();

    // (c, b, m) at each output time
    let states = match problem.bc {
        Boundary::Neumann => neumann(&md, &c0, &times),
        Boundary::DirichletFixed | Boundary::HomWentzell | Boundary::HomDirichlet => {
            pinned(&md, &c0, &times, problem.pinned_value().expect("pinned variant"))
        }
        Boundary::NonlocalDirichlet | Boundary::Wentzell => nonlocal(&md, &c0, problem, interval, opts.outputs)?,
        Boundary::SepNonlinear => nonlinear(&md, &c0, problem, interval, opts)?,
    };

    let gamma0 = problem.gamma.eval(0.0);
    let nx = opts.nx_out;
    let u_grid: Vec<f64> = (0..=nx).map(|i| i as f64 / nx as f64).collect();
    let table: Vec<Vec<f64>> = u_grid.iter().map(|&u| (0..k).map(|i| basis.eval(i, u)).collect()).collect();

    let mut sol = PdeSolution {
        problem: problem.clone(),
        backend: Backend::Spectral,
        t_grid: times.clone(),
        u_grid,
        values: Vec::with_capacity(times.len()),
        boundary: Vec::with_capacity(times.len()),
        bulk_mass: Vec::with_capacity(times.len()),
        reservoir_trace: problem.bc.has_reservoir().then(Vec::new),
        coefficients: None,
        mass_truncation: 0.0,
        warnings: Vec::new(),
    };
    let mut coeffs = Vec::with_capacity(times.len());
    let mut worst_tail = (0.0_f64, 0.0);
    for (j, (c, b, m)) in states.into_iter().enumerate() {
        check_finite(&c, "spectral modes")?;
        // at t = 0 the data themselves set the boundary value
        let b = if j == 0 { gamma0 } else { b };
        let lifted: Vec<f64> = match kind {
            BasisKind::Dn => c.iter().zip(&md.w).map(|(ci, wi)| ci - b * wi).collect(),
            BasisKind::Nn => c.clone(),
        };
        let offset = if kind == BasisKind::Dn { b } else { 0.0 };
        let row: Vec<f64> =
            table.iter().map(|phi| offset + phi.iter().zip(&lifted).map(|(p, d)| p * d).sum::<f64>()).collect();
        check_finite(&row, "spectral reconstruction")?;
        let bulk = match kind {
            BasisKind::Dn => md.dot_w(&c) + md.tau * b,
            BasisKind::Nn => c[0],
        };
        sol.mass_truncation = sol.mass_truncation.max((md.tau * b).abs());
        if times[j] >= TAIL_CHECK_FROM {
            let total: f64 = lifted.iter().map(|d| d * d).sum();
            if total > TAIL_ENERGY_FLOOR {
                let r = lifted[k - 1].powi(2) / total;
                if r > worst_tail.0 {
                    worst_tail = (r, times[j]);
                }
            }
        }
        sol.boundary.push(row[0]);
        sol.values.push(row);
        sol.bulk_mass.push(bulk);
        if let Some(tr) = sol.reservoir_trace.as_mut() {
            tr.push(m.unwrap_or(problem.mass - bulk));
        }
        coeffs.push(c);
    }
    if worst_tail.0 > TAIL_WARNING {
        sol.warnings.push(format!(
            "K={k} may be too small: last-mode energy fraction {:.3e} at t={}",
            worst_tail.0, worst_tail.1
        ));
    }
    sol.coefficients = Some((basis, coeffs));
    Ok(sol)
}

type State = (Vec<f64>, f64, Option<f64>);

fn neumann(md: &Modes, c0: &[f64], times: &[f64]) -> Vec<State> {
    times
        .iter()
        .map(|&t| (c0.iter().zip(&md.lambda).map(|(c, l)| c * (-l * t).exp()).collect(), 0.0, None))
        .collect()
}

/// c_k(t) = e^{−λ_k t}c_k(0) + bΨ′_k(0)(1 − e^{−λ_k t})/λ_k.
fn pinned(md: &Modes, c0: &[f64], times: &[f64], b: f64) -> Vec<State> {
    times
        .iter()
        .map(|&t| {
            let c = (0..c0.len())
                .map(|i| {
                    let e = (-md.lambda[i] * t).exp();
                    e * c0[i] + b * md.v[i] * (1.0 - e) / md.lambda[i]
                })
                .collect();
            (c, b, None)
        })
        .collect()
}

/// Linear non-local coupling b = α(M − ∫ρ).
///
/// With the tail closure b = α′(M − wᵀc), α′ = α/(1+ατ), so c′ = Ac + f with
/// A = −Λ − α′vwᵀ and f = α′Mv. Because w = Λ⁻¹v and Λ^{-1/2}v = √2·1, the
/// similar matrix S = Λ^{-1/2}AΛ^{1/2} = −Λ − 2α′11ᵀ is symmetric, and its
/// eigendecomposition gives e^{AΔ} = Λ^{1/2}e^{SΔ}Λ^{-1/2}. The fixed point is
/// c* = b*w with b* = αM/(1+α).
fn nonlocal(md: &Modes, c0: &[f64], p: &PdeProblem, interval: f64, outputs: usize) -> Result<Vec<State>> {
    let k = c0.len();
    let a1 = p.alpha / (1.0 + p.alpha * md.tau);
    let mut s = DMatrix::from_element(k, k, -2.0 * a1);
    for i in 0..k {
        s[(i, i)] -= md.lambda[i];
    }
    let eig = SymmetricEigen::new(s);
    let ed = DVector::from_iterator(k, eig.eigenvalues.iter().map(|mu| (mu * interval).exp()));
    let q = &eig.eigenvectors;
    let es = q * DMatrix::from_diagonal(&ed) * q.transpose();
    let sq: Vec<f64> = md.lambda.iter().map(|l| l.sqrt()).collect();
    let prop = DMatrix::from_fn(k, k, |i, j| sq[i] * es[(i, j)] / sq[j]);

    let bstar = p.alpha * p.mass / (1.0 + p.alpha);
    let cstar = DVector::from_iterator(k, md.w.iter().map(|w| bstar * w));
    let boundary = |c: &DVector<f64>| a1 * (p.mass - md.dot_w(c.as_slice()));

    let mut c = DVector::from_column_slice(c0);
    let mut out = Vec::with_capacity(outputs + 1);
    out.push((c0.to_vec(), boundary(&c), None));
    for _ in 0..outputs {
        c = &cstar + &prop * (&c - &cstar);
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("non-local mode propagation produced a non-finite value"));
        }
        let b = boundary(&c);
        out.push((c.as_slice().to_vec(), b, Some(b / p.alpha)));
    }
    Ok(out)
}

/// ρ(t,0) = αm/(1+αm) with m = M − ∫ρ, integrated by classical RK4.
fn nonlinear(md: &Modes, c0: &[f64], p: &PdeProblem, interval: f64, opts: &SpectralOptions) -> Result<Vec<State>> {
    let lmax = md.lambda.iter().fold(0.0_f64, |a, b| a.max(*b));
    let h_max = opts.dt.min(RK4_LAMBDA_DT / lmax);
    let sub = (interval / h_max).ceil() as usize;
    let h = interval / sub as f64;
    let (alpha, tau, mass) = (p.alpha, md.tau, p.mass);
    let bval = |c: &[f64]| nonlinear_boundary(alpha, tau, mass - md.dot_w(c));
    let rhs = |c: &[f64], out: &mut [f64]| {
        let (b, _) = bval(c);
        for i in 0..c.len() {
            out[i] = -md.lambda[i] * c[i] + b * md.v[i];
        }
    };

    let k = c0.len();
    let mut c = c0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut tmp = vec![0.0; k];
    let mut out = Vec::with_capacity(opts.outputs + 1);
    let (b, m) = bval(&c);
    out.push((c.clone(), b, Some(m)));
    for _ in 0..opts.outputs {
        for _ in 0..sub {
            rhs(&c, &mut k1);
            tmp.iter_mut().zip(&c).zip(&k1).for_each(|((t, x), d)| *t = x + 0.5 * h * d);
            rhs(&tmp, &mut k2);
            tmp.iter_mut().zip(&c).zip(&k2).for_each(|((t, x), d)| *t = x + 0.5 * h * d);
            rhs(&tmp, &mut k3);
            tmp.iter_mut().zip(&c).zip(&k3).for_each(|((t, x), d)| *t = x + h * d);
            rhs(&tmp, &mut k4);
            for i in 0..k {
                c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        check_finite(&c, "nonlinear modes")?;
        let (b, m) = bval(&c);
        out.push((c.clone(), b, Some(m)));
    }
    Ok(out)
}
