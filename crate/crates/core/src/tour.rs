use serde::{Deserialize, Serialize};

use crate::{CspError, CspInstance, Result};

/// Ordered, duplicate-free sequence of visited cities. The cycle closes from
/// the last city back to the first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tour(Vec<usize>);

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(order.len());
        for &c in &order {
            if !seen.insert(c) {
                return Err(CspError::DuplicateCity(c));
            }
        }
        Ok(Tour(order))
    }

    /// Caller guarantees the order holds no duplicates.
    pub fn from_unique(order: Vec<usize>) -> Self {
        debug_assert!(Tour::new(order.clone()).is_ok());
        Tour(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn into_order(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_indices(&self, n: usize) -> Result<()> {
        match self.0.iter().find(|&&c| c >= n) {
            Some(&index) => Err(CspError::CityOutOfRange { index, n }),
            None => Ok(()),
        }
    }
}

impl From<Tour> for Vec<usize> {
    fn from(t: Tour) -> Self {
        t.0
    }
}

/// True iff every city is on the tour or covered by a city on the tour.
pub fn is_feasible(instance: &CspInstance, tour: &Tour) -> Result<bool> {
    let n = instance.n();
    tour.check_indices(n)?;
    let mut ok = vec![false; n];
    let mut count = 0;
    let mut mark = |j: usize, ok: &mut Vec<bool>| {
        if !ok[j] {
            ok[j] = true;
            count += 1;
        }
    };
    for &i in tour.order() {
        mark(i, &mut ok);
        for &j in instance.cover_set(i) {
            mark(j, &mut ok);
        }
    }
    Ok(count == n)
}

/// Cyclic Euclidean length, closing edge included. A one-city tour has
/// length zero.
pub fn tour_length(instance: &CspInstance, tour: &Tour) -> Result<f64> {
    if tour.is_empty() {
        return Err(CspError::EmptyTour);
    }
    tour.check_indices(instance.n())?;
    Ok(cycle_length(instance, tour.order()))
}

/// Unchecked cyclic length over a raw order; zero for fewer than two cities.
pub fn cycle_length(instance: &CspInstance, order: &[usize]) -> f64 {
    let k = order.len();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in order.windows(2) {
        total += instance.d(w[0], w[1]);
    }
    total + instance.d(order[k - 1], order[0])
}
