use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{dist, Point};
use crate::{CspError, Result};

/// How each city's coverage set is determined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoverageSpec {
    /// Every city covers its `k` nearest other cities.
    KNearest { k: usize },
    /// City `i` covers its `ks[i]` nearest other cities.
    KNearestPerCity { ks: Vec<usize> },
    /// Every city covers all other cities within distance `r`.
    FixedRadius { r: f64 },
    /// City `i` covers all other cities within distance `rs[i]`.
    PerCityRadius { rs: Vec<f64> },
}

impl CoverageSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(CspError::NoCities);
        }
        let check_k = |k: usize| -> Result<()> {
            if k == 0 {
                Err(CspError::InvalidSpec("k must be positive".into()))
            } else if k >= n {
                Err(CspError::InvalidSpec(format!(
                    "k = {k} must be at most n - 1 = {}",
                    n - 1
                )))
            } else {
                Ok(())
            }
        };
        let check_r = |r: f64| -> Result<()> {
            if r.is_finite() && r >= 0.0 {
                Ok(())
            } else {
                Err(CspError::InvalidSpec(format!(
                    "radius {r} must be finite and nonnegative"
                )))
            }
        };
        match self {
            CoverageSpec::KNearest { k } => check_k(*k),
            CoverageSpec::KNearestPerCity { ks } => {
                if ks.len() != n {
                    return Err(CspError::InvalidSpec(format!(
                        "ks has {} entries, expected {n}",
                        ks.len()
                    )));
                }
                ks.iter().try_for_each(|&k| check_k(k))
            }
            CoverageSpec::FixedRadius { r } => check_r(*r),
            CoverageSpec::PerCityRadius { rs } => {
                if rs.len() != n {
                    return Err(CspError::InvalidSpec(format!(
                        "rs has {} entries, expected {n}",
                        rs.len()
                    )));
                }
                rs.iter().try_for_each(|&r| check_r(r))
            }
        }
    }

    /// Short human-readable descriptor used in benchmark tables.
    pub fn descriptor(&self) -> String {
        match self {
            CoverageSpec::KNearest { k } => format!("k_nearest:{k}"),
            CoverageSpec::KNearestPerCity { ks } => {
                let lo = ks.iter().min().copied().unwrap_or(0);
                let hi = ks.iter().max().copied().unwrap_or(0);
                format!("k_nearest_per_city:{lo}-{hi}")
            }
            CoverageSpec::FixedRadius { r } => format!("fixed_radius:{r}"),
            CoverageSpec::PerCityRadius { rs } => {
                let hi = rs.iter().cloned().fold(0.0, f64::max);
                format!("per_city_radius:max{hi:.3}")
            }
        }
    }
}

/// Coverage sets for every city, each ordered nearest first (ties by lower
/// index). A city never covers itself.
pub fn compute_cover_sets(coords: &[Point], spec: &CoverageSpec) -> Result<Vec<Vec<usize>>> {
    let n = coords.len();
    spec.validate(n)?;
    let mut sets = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(coords[i], coords[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let set: Vec<usize> = match spec {
            CoverageSpec::KNearest { k } => others.iter().take(*k).map(|p| p.1).collect(),
            CoverageSpec::KNearestPerCity { ks } => {
                others.iter().take(ks[i]).map(|p| p.1).collect()
            }
            CoverageSpec::FixedRadius { r } => {
                others.iter().take_while(|p| p.0 <= *r).map(|p| p.1).collect()
            }
            CoverageSpec::PerCityRadius { rs } => {
                others.iter().take_while(|p| p.0 <= rs[i]).map(|p| p.1).collect()
            }
        };
        sets.push(set);
    }
    Ok(sets)
}

/// A recipe for drawing a [`CoverageSpec`] together with a random instance.
/// Per-city variants draw their values from the instance RNG after the
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecGenerator {
    Fixed(CoverageSpec),
    /// Per-city NC drawn uniformly from `min..=max`.
    VariableNc { min: usize, max: usize },
    /// Per-city radius drawn uniformly from `[0, max]`.
    UniformRadius { max: f64 },
}

impl SpecGenerator {
    pub fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Result<CoverageSpec> {
        let spec = match self {
            SpecGenerator::Fixed(spec) => spec.clone(),
            SpecGenerator::VariableNc { min, max } => {
                if min > max {
                    return Err(CspError::InvalidSpec(format!(
                        "nc-min {min} exceeds nc-max {max}"
                    )));
                }
                CoverageSpec::KNearestPerCity {
                    ks: (0..n).map(|_| rng.gen_range(*min..=*max)).collect(),
                }
            }
            SpecGenerator::UniformRadius { max } => {
                if !(max.is_finite() && *max >= 0.0) {
                    return Err(CspError::InvalidSpec(format!(
                        "radius-max {max} must be finite and nonnegative"
                    )));
                }
                CoverageSpec::PerCityRadius {
                    rs: (0..n).map(|_| rng.gen::<f64>() * max).collect(),
                }
            }
        };
        spec.validate(n)?;
        Ok(spec)
    }
}
