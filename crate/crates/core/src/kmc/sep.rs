//! Exclusion dynamics.
//!
//! Inside the bulk every legal move is a particle–hole bond (x,x+1) with
//! η(x) ≠ η(x+1), and each such bond fires at the same rate N². The engine keeps
//! those bonds in an indexed set, so choosing one is a uniform draw and a jump
//! touches only the two neighbouring bonds. The boundary contributes two more
//! sources: exit 1→0 at rate N²η(1), and release 0→1 at αN^{2−θ}η(0)(1−η(1)).

use rand::Rng;
use rand_distr::Exp1;

use crate::model::{Configuration, ModelParams};

const ABSENT: u32 = u32::MAX;

/// Set of small integers with O(1) insert, remove and indexed access.
#[derive(Debug, Clone)]
pub struct IndexedSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

impl IndexedSet {
    pub fn new(universe: usize) -> Self {
        IndexedSet { items: Vec::new(), slot: vec![ABSENT; universe] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.slot[v] != ABSENT
    }

    pub fn get(&self, i: usize) -> usize {
        self.items[i] as usize
    }

    pub fn set(&mut self, v: usize, present: bool) {
        match (self.contains(v), present) {
            (false, true) => {
                self.slot[v] = self.items.len() as u32;
                self.items.push(v as u32);
            }
            (true, false) => {
                let i = self.slot[v] as usize;
                let last = *self.items.last().expect("nonempty");
                self.items.swap_remove(i);
                if last as usize != v {
                    self.slot[last as usize] = i as u32;
                }
                self.slot[v] = ABSENT;
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone)]
pub struct SepEngine {
    n: usize,
    n_sq: f64,
    release: f64,
    occ: Vec<u64>,
    /// bonds b = 1..N-1 joining sites b and b+1
    bonds: IndexedSet,
    time: f64,
    events: u64,
}

impl SepEngine {
    pub fn new(init: &Configuration, p: &ModelParams) -> Self {
        let mut e = SepEngine {
            n: p.n,
            n_sq: p.n_sq(),
            release: p.release_rate(),
            occ: init.occupations.clone(),
            bonds: IndexedSet::new(p.n),
            time: 0.0,
            events: 0,
        };
        for b in 1..p.n {
            e.refresh(b);
        }
        e
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

    #[inline]
    fn refresh(&mut self, b: usize) {
        if b >= 1 && b < self.n {
            let active = self.occ[b] != self.occ[b + 1];
            self.bonds.set(b, active);
        }
    }

    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        loop {
            let first = self.occ[1];
            let r0 = if first == 0 { self.release * self.occ[0] as f64 } else { 0.0 };
            let exit = self.n_sq * first as f64;
            let bulk = self.n_sq * self.bonds.len() as f64;
            let total = r0 + exit + bulk;
            if total <= 0.0 {
                self.time = t;
                return;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
            if self.time + hold > t {
                self.time = t;
                return;
            }
            self.time += hold;
            self.events += 1;
            let u = rng.random::<f64>() * total;
            if u < r0 {
                self.occ[0] -= 1;
                self.occ[1] = 1;
                self.refresh(1);
            } else if u < r0 + exit || self.bonds.is_empty() {
                self.occ[1] = 0;
                self.occ[0] += 1;
                self.refresh(1);
            } else {
                let j = (((u - r0 - exit) / self.n_sq) as usize).min(self.bonds.len() - 1);
                let b = self.bonds.get(j);
                self.occ.swap(b, b + 1);
                self.refresh(b - 1);
                self.refresh(b + 1);
            }
        }
    }
}
