use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{compute_cover_sets, CoverageSpec, SpecGenerator};
use crate::{CspError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Euclidean distance. Every distance in the workspace goes through here so
/// that ties compare bit-for-bit.
#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// A covering salesman instance. Immutable once built.
#[derive(Clone)]
pub struct CspInstance {
    coords: Vec<Point>,
    spec: CoverageSpec,
    cover_sets: Vec<Vec<usize>>,
    covered_by: Vec<Vec<usize>>,
    dist: Vec<f64>,
    seed: u64,
}

impl std::fmt::Debug for CspInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CspInstance")
            .field("n", &self.n())
            .field("seed", &self.seed)
            .field("spec", &self.spec)
            .field("coords", &self.coords)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CspInstance {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.spec == other.spec && self.coords == other.coords
    }
}

impl CspInstance {
    pub fn new(coords: Vec<Point>, spec: CoverageSpec, seed: u64) -> Result<Self> {
        let cover_sets = compute_cover_sets(&coords, &spec)?;
        let n = coords.len();
        let mut covered_by = vec![Vec::new(); n];
        for (i, set) in cover_sets.iter().enumerate() {
            for &j in set {
                covered_by[j].push(i);
            }
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = dist(coords[i], coords[j]);
            }
        }
        Ok(CspInstance {
            coords,
            spec,
            cover_sets,
            covered_by,
            dist: d,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn spec(&self) -> &CoverageSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cities covered by `i`, nearest first, `i` itself excluded.
    pub fn cover_set(&self, i: usize) -> &[usize] {
        &self.cover_sets[i]
    }

    pub fn cover_sets(&self) -> &[Vec<usize>] {
        &self.cover_sets
    }

    /// Cities whose cover set contains `j`, ascending.
    pub fn covered_by(&self, j: usize) -> &[usize] {
        &self.covered_by[j]
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.coords.len() + j]
    }

    /// True when some coordinate lies outside the unit square. Loaded
    /// instances are accepted regardless.
    pub fn outside_unit_square(&self) -> bool {
        self.coords
            .iter()
            .any(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
    }

    /// Same cities and coverage rule, rows reordered so that new city `i` is
    /// old city `perm[i]`. Per-city coverage values move with their city.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(CspError::InvalidSpec(format!(
                "permutation has {} entries, expected {n}",
                perm.len()
            )));
        }
        let coords = perm.iter().map(|&p| self.coords[p]).collect();
        let spec = match &self.spec {
            CoverageSpec::KNearestPerCity { ks } => CoverageSpec::KNearestPerCity {
                ks: perm.iter().map(|&p| ks[p]).collect(),
            },
            CoverageSpec::PerCityRadius { rs } => CoverageSpec::PerCityRadius {
                rs: perm.iter().map(|&p| rs[p]).collect(),
            },
            other => other.clone(),
        };
        CspInstance::new(coords, spec, self.seed)
    }
}

/// Uniform random cities in the unit square. A pure function of its inputs.
pub fn generate_instance(n: usize, spec: &CoverageSpec, seed: u64) -> Result<CspInstance> {
    generate_with(n, &SpecGenerator::Fixed(spec.clone()), seed)
}

/// Like [`generate_instance`] but the coverage spec may itself be random.
pub fn generate_with(n: usize, gen: &SpecGenerator, seed: u64) -> Result<CspInstance> {
    if n == 0 {
        return Err(CspError::NoCities);
    }
    if let SpecGenerator::Fixed(spec) = gen {
        spec.validate(n)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Point> = (0..n)
        .map(|_| {
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            Point::new(x, y)
        })
        .collect();
    let spec = gen.draw(n, &mut rng)?;
    CspInstance::new(coords, spec, seed)
}
