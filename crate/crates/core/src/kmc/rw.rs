//! Independent walks. Bulk particles are kept in a list, so an event costs O(1):
//! each bulk particle carries two clocks of rate N² (left and right) and the
//! reservoir one clock of rate αN^{2−θ}η(0). A right clock ringing at site N is a
//! null event, which leaves the law of the chain unchanged.

use rand::Rng;
use rand_distr::Exp1;

use crate::model::{Configuration, ModelParams};

#[derive(Debug, Clone)]
pub struct RwEngine {
    n: usize,
    n_sq: f64,
    release: f64,
    occ: Vec<u64>,
    pos: Vec<u32>,
    time: f64,
    events: u64,
}

impl RwEngine {
    pub fn new(init: &Configuration, p: &ModelParams) -> Self {
        let mut pos = Vec::new();
        for (x, &k) in init.occupations.iter().enumerate().skip(1) {
            pos.extend(std::iter::repeat_n(x as u32, k as usize));
        }
        RwEngine {
            n: p.n,
            n_sq: p.n_sq(),
            release: p.release_rate(),
            occ: init.occupations.clone(),
            pos,
            time: 0.0,
            events: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn occupations(&self) -> &[u64] {
        &self.occ
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        let two_n_sq = 2.0 * self.n_sq;
        let n = self.n as u32;
        loop {
            let r0 = self.release * self.occ[0] as f64;
            let bulk = two_n_sq * self.pos.len() as f64;
            let total = r0 + bulk;
            if total <= 0.0 {
                self.time = t;
                return;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
            if self.time + hold > t {
                // memorylessness: the overshooting clock is simply discarded
                self.time = t;
                return;
            }
            self.time += hold;
            self.events += 1;
            let u = rng.random::<f64>() * total;
            if u < r0 {
                self.occ[0] -= 1;
                self.occ[1] += 1;
                self.pos.push(1);
                continue;
            }
            let j = (((u - r0) / self.n_sq) as usize).min(2 * self.pos.len() - 1);
            let i = j >> 1;
            let x = self.pos[i];
            if j & 1 == 1 {
                if x < n {
                    self.occ[x as usize] -= 1;
                    self.occ[x as usize + 1] += 1;
                    self.pos[i] = x + 1;
                }
            } else {
                self.occ[x as usize] -= 1;
                self.occ[x as usize - 1] += 1;
                if x == 1 {
                    self.pos.swap_remove(i);
                } else {
                    self.pos[i] = x - 1;
                }
            }
        }
    }
}
