//! Exact solver for tiny instances: enumerate every covering subset of
//! cities and solve the TSP over it exactly.

use crate::tour::cycle_length;
use crate::{CspError, CspInstance, Result, Tour};

pub const DEFAULT_EXACT_MAX_N: usize = 10;

// Held-Karp state space is 2^(n-1) * (n-1); 20 cities is already ~10M states.
const HARD_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub cost: f64,
    pub tour: Tour,
    pub nodes_expanded: u64,
}

/// Minimum-length feasible tour. Among equal-cost optima the lexicographically
/// smallest city sequence wins.
pub fn solve_exact(instance: &CspInstance, max_n: usize) -> Result<OracleResult> {
    let n = instance.n();
    if n > max_n || n > HARD_LIMIT {
        return Err(CspError::TooLarge {
            n,
            max_n: max_n.min(HARD_LIMIT),
        });
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let cover_mask: Vec<u32> = (0..n)
        .map(|i| {
            instance
                .cover_set(i)
                .iter()
                .fold(1u32 << i, |m, &j| m | (1u32 << j))
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut nodes_expanded = 0u64;
    for subset in 1..=full {
        let covered = (0..n)
            .filter(|&i| subset & (1 << i) != 0)
            .fold(0u32, |m, i| m | cover_mask[i]);
        if covered != full {
            continue;
        }
        let cities: Vec<usize> = (0..n).filter(|&i| subset & (1 << i) != 0).collect();
        let (cost, order) = solve_subset_tsp(instance, &cities, &mut nodes_expanded);
        let better = match &best {
            None => true,
            Some((bc, bo)) => {
                let tol = 1e-12 * bc.max(1.0);
                cost < bc - tol || ((cost - bc).abs() <= tol && order < *bo)
            }
        };
        if better {
            best = Some((cost, order));
        }
    }
    // Visiting every city is always feasible, so `best` is set.
    let (_, order) = best.expect("full city set is feasible");
    let cost = cycle_length(instance, &order);
    Ok(OracleResult {
        cost,
        tour: Tour::from_unique(order),
        nodes_expanded,
    })
}

/// Optimal cycle over `cities` (ascending). Returns the lexicographically
/// smallest optimal sequence, which always starts at `cities[0]`.
fn solve_subset_tsp(inst: &CspInstance, cities: &[usize], expanded: &mut u64) -> (f64, Vec<usize>) {
    let m = cities.len();
    if m < 4 {
        *expanded += 1;
        // With ascending input, the identity order is the smallest among the
        // rotations and reflections of the only cycle on <= 3 cities.
        return (cycle_length(inst, cities), cities.to_vec());
    }
    let d = |a: usize, b: usize| inst.d(cities[a], cities[b]);
    let rest = m - 1;
    let states = 1usize << rest;
    // dp[mask * rest + j]: shortest path from local city 0 through exactly
    // the cities in mask (bits over locals 1..m), ending at local j + 1.
    let mut dp = vec![f64::INFINITY; states * rest];
    for j in 0..rest {
        dp[(1 << j) * rest + j] = d(0, j + 1);
    }
    for mask in 1..states {
        for j in 0..rest {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * rest + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..rest {
                if mask & (1 << k) != 0 {
                    continue;
                }
                *expanded += 1;
                let next = mask | (1 << k);
                let cand = cur + d(j + 1, k + 1);
                let slot = &mut dp[next * rest + k];
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }
    let all = states - 1;
    let opt = (0..rest)
        .map(|j| dp[all * rest + j] + d(j + 1, 0))
        .fold(f64::INFINITY, f64::min);

    // Walk forward picking the smallest next city that still admits an
    // optimal completion. The path j -> (remaining) -> start is the reverse
    // of dp[remaining][j].
    let tol = 1e-9 * opt.max(1.0);
    let mut order = vec![cities[0]];
    let mut cur = 0usize;
    let mut remaining = all;
    let mut acc = 0.0;
    while remaining != 0 {
        let j = (0..rest)
            .filter(|&j| remaining & (1 << j) != 0)
            .find(|&j| acc + d(cur, j + 1) + dp[remaining * rest + j] <= opt + tol)
            .expect("an optimal completion exists");
        acc += d(cur, j + 1);
        cur = j + 1;
        remaining &= !(1 << j);
        order.push(cities[cur]);
    }
    (opt, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{generate_instance, tour_length, CoverageSpec, Point};

    #[test]
    fn single_city() {
        let inst = generate_instance(1, &CoverageSpec::FixedRadius { r: 0.0 }, 3).unwrap();
        let res = solve_exact(&inst, 10).unwrap();
        assert_eq!(res.cost, 0.0);
        assert_eq!(res.tour.order(), &[0]);
    }

    #[test]
    fn one_city_covers_the_other() {
        let coords = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let inst = CspInstance::new(coords, CoverageSpec::KNearest { k: 1 }, 0).unwrap();
        let res = solve_exact(&inst, 10).unwrap();
        assert_eq!(res.cost, 0.0);
        assert_eq!(res.tour.order(), &[0]);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = generate_instance(11, &CoverageSpec::KNearest { k: 2 }, 3).unwrap();
        assert!(matches!(
            solve_exact(&inst, DEFAULT_EXACT_MAX_N),
            Err(CspError::TooLarge { n: 11, .. })
        ));
    }

    #[test]
    fn square_without_coverage_is_its_perimeter() {
        let coords = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 0.0),
        ];
        let inst = CspInstance::new(coords, CoverageSpec::FixedRadius { r: 0.5 }, 0).unwrap();
        let res = solve_exact(&inst, 10).unwrap();
        assert!((res.cost - 4.0).abs() < 1e-12);
        // 0 -> (0,1) -> (1,1) -> (1,0); smallest of the two directions.
        assert_eq!(res.tour.order(), &[0, 2, 1, 3]);
    }

    #[test]
    fn reported_cost_matches_tour_length() {
        for seed in 0..5 {
            let inst = generate_instance(9, &CoverageSpec::KNearest { k: 2 }, seed).unwrap();
            let res = solve_exact(&inst, 10).unwrap();
            let len = tour_length(&inst, &res.tour).unwrap();
            assert!((res.cost - len).abs() <= 1e-9);
            assert!(crate::is_feasible(&inst, &res.tour).unwrap());
        }
    }
}
