//! Particle-wise simulation of the independent-walk model.
//!
//! Walks do not interact, so each particle can be run on its own. A bulk
//! particle sees a constant total clock 2N² (a right step at site N is a null
//! step), so the number of steps in an interval is one Poisson draw and each
//! step costs one random bit. When a walker reaches the reservoir its arrival
//! time is the j-th of K uniform order statistics, drawn from Beta(j, K−j+1).
//! Reservoir particles leave independently at rate αN^{2−θ}: over an interval of
//! length Δ the number leaving is Binomial(η(0), 1−e^{−αN^{2−θ}Δ}) and their
//! departure times are i.i.d. truncated exponentials. The law of the
//! occupation process is exactly that of the generator.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp1, Poisson};

use crate::model::{Configuration, ModelParams};

#[derive(Debug, Clone)]
pub struct RwParticleEngine {
    n: u32,
    step_rate: f64,
    release: f64,
    occ: Vec<u64>,
    walkers: Vec<u32>,
    time: f64,
    steps: u64,
}

impl RwParticleEngine {
    pub fn new(init: &Configuration, p: &ModelParams) -> Self {
        let mut walkers = Vec::new();
        for (x, &k) in init.occupations.iter().enumerate().skip(1) {
            walkers.extend(std::iter::repeat_n(x as u32, k as usize));
        }
        RwParticleEngine {
            n: p.n as u32,
            step_rate: 2.0 * p.n_sq(),
            release: p.release_rate(),
            occ: init.occupations.clone(),
            walkers,
            time: 0.0,
            steps: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn occupations(&self) -> &[u64] {
        &self.occ
    }

    /// Walk steps taken so far, null steps included.
    pub fn events(&self) -> u64 {
        self.steps
    }

    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        let t0 = self.time;
        let dt = t - t0;
        if dt <= 0.0 {
            return;
        }
        let mut reservoir = self.occ[0];
        let mut next = Vec::with_capacity(self.walkers.len() + 16);

        let leave_p = -(-self.release * dt).exp_m1();
        let leaving = if reservoir == 0 || leave_p <= 0.0 {
            0
        } else {
            Binomial::new(reservoir, leave_p.min(1.0)).expect("valid binomial").sample(rng)
        };
        reservoir -= leaving;
        for _ in 0..leaving {
            // departure time given departure before t
            let u: f64 = rng.random();
            let tau = t0 - (-u * leave_p).ln_1p() / self.release;
            match self.walk(1, tau.min(t), t, rng) {
                0 => reservoir += 1,
                s => next.push(s),
            }
        }
        let walkers = std::mem::take(&mut self.walkers);
        for &s in &walkers {
            match self.walk(s, t0, t, rng) {
                0 => reservoir += 1,
                s => next.push(s),
            }
        }
        self.walkers = next;
        self.time = t;
        self.occ.iter_mut().for_each(|v| *v = 0);
        self.occ[0] = reservoir;
        for &s in &self.walkers {
            self.occ[s as usize] += 1;
        }
    }

    /// Position at time t of a walker that sits at `site` at time `tau`.
    fn walk<R: Rng + ?Sized>(&mut self, mut site: u32, mut tau: f64, t: f64, rng: &mut R) -> u32 {
        loop {
            if site == 0 {
                tau += rng.sample::<f64, _>(Exp1) / self.release;
                if tau >= t {
                    return 0;
                }
                site = 1;
            }
            let mean = self.step_rate * (t - tau);
            let k = if mean > 0.0 { Poisson::new(mean).expect("valid mean").sample(rng) as u64 } else { 0 };
            match self.steps_until_reservoir(&mut site, k, rng) {
                None => {
                    self.steps += k;
                    return site;
                }
                Some(j) => {
                    self.steps += j;
                    let frac = if k == 1 {
                        rng.random::<f64>()
                    } else {
                        Beta::new(j as f64, (k - j + 1) as f64).expect("valid beta").sample(rng)
                    };
                    tau += (t - tau) * frac;
                    site = 0;
                }
            }
        }
    }

    /// Performs up to k steps; returns the 1-based step index on reaching site 0.
    fn steps_until_reservoir<R: Rng + ?Sized>(&self, site: &mut u32, k: u64, rng: &mut R) -> Option<u64> {
        let n = self.n;
        let mut s = *site;
        let mut done = 0u64;
        while done < k {
            let bits = rng.next_u64();
            let m = (k - done).min(64) as u32;
            for i in 0..m {
                if (bits >> i) & 1 == 1 {
                    s += (s < n) as u32;
                } else {
                    s -= 1;
                    if s == 0 {
                        *site = 0;
                        return Some(done + i as u64 + 1);
                    }
                }
            }
            done += m as u64;
        }
        *site = s;
        None
    }
}
