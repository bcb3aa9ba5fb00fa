use csp_core::{cycle_length, CspInstance};

/// Improving moves must gain more than this, which keeps the searches from
/// cycling on rounding noise.
pub const IMPROVEMENT_EPS: f64 = 1e-10;

/// A partial or complete solution with incremental coverage counts.
#[derive(Clone, Debug)]
pub(crate) struct Working<'a> {
    inst: &'a CspInstance,
    pub order: Vec<usize>,
    on: Vec<bool>,
    /// `cover[j]`: visited cities covering `j`, `j` itself included.
    cover: Vec<u32>,
    uncovered: usize,
}

impl<'a> Working<'a> {
    pub fn new(inst: &'a CspInstance, order: &[usize]) -> Self {
        let n = inst.n();
        let mut w = Working {
            inst,
            order: Vec::with_capacity(n),
            on: vec![false; n],
            cover: vec![0; n],
            uncovered: n,
        };
        for &c in order {
            let k = w.order.len();
            w.insert_at(c, k);
        }
        w
    }

    fn region(&self, c: usize) -> impl Iterator<Item = usize> + 'a {
        std::iter::once(c).chain(self.inst.cover_set(c).iter().copied())
    }

    pub fn inst(&self) -> &'a CspInstance {
        self.inst
    }

    pub fn is_on(&self, c: usize) -> bool {
        self.on[c]
    }

    pub fn is_covered(&self, j: usize) -> bool {
        self.cover[j] > 0
    }

    pub fn feasible(&self) -> bool {
        self.uncovered == 0
    }

    pub fn cost(&self) -> f64 {
        cycle_length(self.inst, &self.order)
    }

    pub fn insert_at(&mut self, c: usize, pos: usize) {
        debug_assert!(!self.on[c]);
        self.order.insert(pos, c);
        self.on[c] = true;
        for j in self.region(c) {
            if self.cover[j] == 0 {
                self.uncovered -= 1;
            }
            self.cover[j] += 1;
        }
    }

    pub fn remove_at(&mut self, pos: usize) -> usize {
        let c = self.order.remove(pos);
        self.on[c] = false;
        for j in self.region(c) {
            self.cover[j] -= 1;
            if self.cover[j] == 0 {
                self.uncovered += 1;
            }
        }
        c
    }

    /// Dropping `c` keeps every city it covers covered.
    pub fn redundant(&self, c: usize) -> bool {
        self.region(c).all(|j| self.cover[j] >= 2)
    }

    /// Uncovered cities that `c` would cover.
    pub fn gain(&self, c: usize) -> usize {
        self.region(c).filter(|&j| self.cover[j] == 0).count()
    }

    /// Length saved by removing the city at `pos`.
    pub fn removal_saving(&self, pos: usize) -> f64 {
        let k = self.order.len();
        if k < 2 {
            return 0.0;
        }
        if k == 2 {
            return cycle_length(self.inst, &self.order);
        }
        let d = |a, b| self.inst.d(a, b);
        let prev = self.order[(pos + k - 1) % k];
        let next = self.order[(pos + 1) % k];
        let c = self.order[pos];
        d(prev, c) + d(c, next) - d(prev, next)
    }

    /// Cheapest insertion of `c` as `(increase, position)`; the lowest
    /// position wins ties.
    pub fn best_insertion(&self, c: usize) -> (f64, usize) {
        let k = self.order.len();
        match k {
            0 => (0.0, 0),
            1 => (2.0 * self.inst.d(self.order[0], c), 1),
            _ => {
                let d = |a, b| self.inst.d(a, b);
                let mut best = (f64::INFINITY, 0);
                for p in 0..k {
                    let a = self.order[p];
                    let b = self.order[(p + 1) % k];
                    let inc = d(a, c) + d(c, b) - d(a, b);
                    if inc < best.0 {
                        best = (inc, p + 1);
                    }
                }
                best
            }
        }
    }

    /// One pass of redundant-city removal in tour order. Returns whether
    /// anything was removed.
    pub fn drop_redundant_pass(&mut self) -> bool {
        let mut changed = false;
        let mut pos = 0;
        while pos < self.order.len() {
            let c = self.order[pos];
            if self.order.len() > 1 && self.redundant(c) && self.removal_saving(pos) > IMPROVEMENT_EPS {
                self.remove_at(pos);
                changed = true;
            } else {
                pos += 1;
            }
        }
        changed
    }

    pub fn drop_redundant(&mut self) -> bool {
        let mut any = false;
        while self.drop_redundant_pass() {
            any = true;
        }
        any
    }
}

/// First-improvement 2-opt until no exchange gains more than
/// [`IMPROVEMENT_EPS`]. Returns whether the order changed.
pub fn two_opt_in_place(inst: &CspInstance, order: &mut [usize]) -> bool {
    let k = order.len();
    if k < 4 {
        return false;
    }
    let d = |a: usize, b: usize| inst.d(a, b);
    let mut changed = false;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..k - 2 {
            for j in i + 2..k {
                if i == 0 && j == k - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, e) = (order[j], order[(j + 1) % k]);
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < -IMPROVEMENT_EPS {
                    order[i + 1..=j].reverse();
                    improved = true;
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Gain of the best 2-exchange available on `order`, 0 when none improves.
pub fn best_two_opt_gain(inst: &CspInstance, order: &[usize]) -> f64 {
    let k = order.len();
    let mut best = 0.0f64;
    if k < 4 {
        return best;
    }
    for i in 0..k - 2 {
        for j in i + 2..k {
            if i == 0 && j == k - 1 {
                continue;
            }
            let (a, b) = (order[i], order[i + 1]);
            let (c, e) = (order[j], order[(j + 1) % k]);
            let delta = inst.d(a, c) + inst.d(b, e) - inst.d(a, b) - inst.d(c, e);
            best = best.max(-delta);
        }
    }
    best
}

