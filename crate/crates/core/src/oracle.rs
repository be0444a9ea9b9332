//! Exact single-walk analysis for the independent-walk model.
//!
//! Under μ_N the time-t law of the walk system is again product Poisson, with
//! parameters given by the single-walk semigroup applied to the initial profile.
//! Transition probabilities are computed by uniformization: with Λ = max|Q_ii|
//! and K = I + Q/Λ, p_t = Σ_n Poisson(Λt;n)·Kⁿ. Every term is nonnegative and
//! stochastic, so the result is too.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};
use crate::profile::Profile;

/// Largest lattice for which a dense transition matrix is formed.
pub const MAX_DENSE_N: usize = 2048;

/// Poisson mass left out of the uniformization series.
pub const SERIES_TAIL: f64 = 1e-14;

/// Tridiagonal rate matrix of one walk on {0,…,N}.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkGenerator {
    pub n: usize,
    /// Q[x][x-1] for x = 1..N (`lower[x-1]`).
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Q[x][x+1] for x = 0..N-1.
    pub upper: Vec<f64>,
}

impl WalkGenerator {
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n + 1, n + 1, |i, j| {
            if i == j {
                self.diag[i]
            } else if j + 1 == i {
                self.lower[j]
            } else if i + 1 == j {
                self.upper[i]
            } else {
                0.0
            }
        })
    }

    /// max |Q_ii|.
    pub fn uniformization_rate(&self) -> f64 {
        self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

fn require_rw(p: &ModelParams) -> Result<()> {
    if p.kind != ModelKind::Rw {
        return Err(Error::input("the single-walk oracle exists only for the independent-walk model"));
    }
    Ok(())
}

pub fn walk_generator(p: &ModelParams) -> Result<WalkGenerator> {
    require_rw(p)?;
    let n = p.n;
    let b = p.n_sq();
    let mut upper = vec![b; n];
    upper[0] = p.release_rate();
    let lower = vec![b; n];
    let mut diag = vec![0.0; n + 1];
    for x in 0..=n {
        let up = if x < n { upper[x] } else { 0.0 };
        let down = if x > 0 { lower[x - 1] } else { 0.0 };
        diag[x] = -(up + down);
    }
    Ok(WalkGenerator { n, lower, diag, upper })
}

/// π(0) ∝ N^θ/α, π(x) ∝ 1 for x ≥ 1.
pub fn stationary_pi(p: &ModelParams) -> Result<Vec<f64>> {
    require_rw(p)?;
    let a = p.reservoir_scale();
    let z = a + p.n as f64;
    let mut pi = vec![1.0 / z; p.n + 1];
    pi[0] = a / z;
    Ok(pi)
}

/// Poisson(λ) weights from index `start`, normalised, with outer tails below [`SERIES_TAIL`].
pub fn poisson_weights(lambda: f64) -> (usize, Vec<f64>) {
    if lambda <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = lambda.floor() as usize;
    // relative to w(mode) = 1, walking outward so nothing underflows
    let mut right = vec![1.0];
    let mut n = mode;
    let mut w = 1.0;
    let mut sum = 1.0;
    loop {
        w *= lambda / (n + 1) as f64;
        n += 1;
        right.push(w);
        sum += w;
        let q = lambda / (n + 1) as f64;
        if q < 1.0 && w * q / (1.0 - q) < SERIES_TAIL * sum {
            break;
        }
    }
    let mut left = Vec::new();
    let mut n = mode;
    let mut w = 1.0;
    while n > 0 {
        w *= n as f64 / lambda;
        n -= 1;
        left.push(w);
        sum += w;
        let q = n as f64 / lambda;
        if w * q / (1.0 - q) < SERIES_TAIL * sum {
            break;
        }
    }
    let start = mode - left.len();
    let mut out: Vec<f64> = left.into_iter().rev().chain(right).collect();
    // normalise by the retained mass; the omitted tails are below SERIES_TAIL
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    (start, out)
}

/// Kernel K = I + Q/Λ as three bands.
struct Kernel {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Kernel {
    fn new(g: &WalkGenerator, rate: f64) -> Self {
        Kernel {
            lower: g.lower.iter().map(|v| v / rate).collect(),
            diag: g.diag.iter().map(|v| 1.0 + v / rate).collect(),
            upper: g.upper.iter().map(|v| v / rate).collect(),
        }
    }

    /// out = K v (column action).
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.diag.len() - 1;
        for x in 0..=n {
            let mut s = self.diag[x] * v[x];
            if x > 0 {
                s += self.lower[x - 1] * v[x - 1];
            }
            if x < n {
                s += self.upper[x] * v[x + 1];
            }
            out[x] = s;
        }
    }

    /// out = V K for a dense row-major V.
    fn right_multiply(&self, v: &[f64], out: &mut [f64], dim: usize) {
        for i in 0..dim {
            let row = &v[i * dim..(i + 1) * dim];
            let o = &mut out[i * dim..(i + 1) * dim];
            for j in 0..dim {
                let mut s = row[j] * self.diag[j];
                if j > 0 {
                    s += row[j - 1] * self.upper[j - 1];
                }
                if j + 1 < dim {
                    s += row[j + 1] * self.lower[j];
                }
                o[j] = s;
            }
        }
    }
}

/// p_t as a dense row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkLaw {
    pub t: f64,
    pub p: DMatrix<f64>,
}

pub fn transition_matrix(p: &ModelParams, t: f64) -> Result<WalkLaw> {
    require_rw(p)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::input(format!("time must be finite and nonnegative, got {t}")));
    }
    if p.n > MAX_DENSE_N {
        return Err(Error::resource(format!("dense walk law limited to N <= {MAX_DENSE_N}, got {}", p.n)));
    }
    let g = walk_generator(p)?;
    let dim = p.n + 1;
    let rate = g.uniformization_rate();
    let (start, weights) = poisson_weights(rate * t);
    let k = Kernel::new(&g, rate);
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let mut scratch = vec![0.0; dim * dim];
    let mut acc = vec![0.0; dim * dim];
    for step in 0..start + weights.len() {
        if step >= start {
            let w = weights[step - start];
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += w * b);
        }
        if step + 1 < start + weights.len() {
            k.right_multiply(&v, &mut scratch, dim);
            std::mem::swap(&mut v, &mut scratch);
        }
    }
    let law = DMatrix::from_row_slice(dim, dim, &acc);
    for i in 0..dim {
        let s: f64 = law.row(i).sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::numeric(format!("row {i} of p_t sums to {s}")));
        }
    }
    Ok(WalkLaw { t, p: law })
}

/// (p_t g)(x) = Σ_y p_t(x,y)g(y) without forming p_t.
pub fn semigroup_apply(p: &ModelParams, t: f64, g: &[f64]) -> Result<Vec<f64>> {
    require_rw(p)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::input(format!("time must be finite and nonnegative, got {t}")));
    }
    if g.len() != p.n + 1 {
        return Err(Error::input("function length must be N+1"));
    }
    let gen = walk_generator(p)?;
    let rate = gen.uniformization_rate();
    let (start, weights) = poisson_weights(rate * t);
    let k = Kernel::new(&gen, rate);
    let mut v = g.to_vec();
    let mut scratch = vec![0.0; v.len()];
    let mut acc = vec![0.0; v.len()];
    for step in 0..start + weights.len() {
        if step >= start {
            let w = weights[step - start];
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += w * b);
        }
        if step + 1 < start + weights.len() {
            k.apply(&v, &mut scratch);
            std::mem::swap(&mut v, &mut scratch);
        }
    }
    Ok(acc)
}

/// Poisson parameters of η_t(x) under μ_N, x = 0..N.
///
/// Bulk sites carry Σ_y p_t(x,y)γ(y/N); site 0 carries the same sum scaled by N^θ/α.
pub fn poisson_field(profile: &Profile, t: f64, p: &ModelParams) -> Result<Vec<f64>> {
    let n = p.n;
    let g: Vec<f64> = (0..=n).map(|y| profile.eval(y as f64 / n as f64)).collect();
    let mut psi = semigroup_apply(p, t, &g)?;
    psi[0] *= p.reservoir_scale();
    Ok(psi)
}

/// E[exp(−Σ_x ζ(x)η_t(x))] under μ_N.
pub fn joint_laplace(profile: &Profile, t: f64, zeta: &[f64], p: &ModelParams) -> Result<f64> {
    if zeta.len() != p.n + 1 {
        return Err(Error::input("zeta must have one entry per site 0..N"));
    }
    if zeta.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::input("zeta must be finite and nonnegative"));
    }
    let psi = poisson_field(profile, t, p)?;
    Ok(zeta.iter().zip(&psi).map(|(z, s)| (-z).exp_m1() * s).sum::<f64>().exp())
}

/// exp(tQ) for a small dense generator by uniformization (used to check other chains).
pub fn generator_exp(q: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let dim = q.nrows();
    if q.ncols() != dim {
        return Err(Error::input("generator must be square"));
    }
    let rate = (0..dim).fold(0.0_f64, |m, i| m.max(q[(i, i)].abs()));
    if rate == 0.0 || t == 0.0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    let k = DMatrix::identity(dim, dim) + q / rate;
    let (start, weights) = poisson_weights(rate * t);
    let mut v = DMatrix::identity(dim, dim);
    let mut acc = DMatrix::zeros(dim, dim);
    for step in 0..start + weights.len() {
        if step >= start {
            acc += &v * weights[step - start];
        }
        v = &v * &k;
    }
    Ok(acc)
}
