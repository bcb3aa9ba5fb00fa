use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use csp_core::io::{read_instance, write_instance};
use csp_core::{generate_with, CoverageSpec, CspInstance, SpecGenerator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpecKind {
    KNearest,
    FixedRadius,
    PerCityRadius,
    VariableNc,
}

/// Coverage flags shared by `generate` and `train`.
#[derive(Clone, Debug, Args)]
pub struct SpecArgs {
    #[arg(long, value_enum, default_value = "k-nearest")]
    pub spec: SpecKind,
    /// NC for k-nearest coverage.
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    /// Per-city radii are drawn from [0, radius-max].
    #[arg(long, default_value_t = 0.25)]
    pub radius_max: f64,
    #[arg(long, default_value_t = 2)]
    pub nc_min: usize,
    #[arg(long, default_value_t = 15)]
    pub nc_max: usize,
}

impl Default for SpecArgs {
    fn default() -> Self {
        SpecArgs {
            spec: SpecKind::KNearest,
            k: 7,
            radius: 0.2,
            radius_max: 0.25,
            nc_min: 2,
            nc_max: 15,
        }
    }
}

impl SpecArgs {
    pub fn generator(&self) -> SpecGenerator {
        match self.spec {
            SpecKind::KNearest => SpecGenerator::Fixed(CoverageSpec::KNearest { k: self.k }),
            SpecKind::FixedRadius => SpecGenerator::Fixed(CoverageSpec::FixedRadius { r: self.radius }),
            SpecKind::PerCityRadius => SpecGenerator::UniformRadius { max: self.radius_max },
            SpecKind::VariableNc => SpecGenerator::VariableNc {
                min: self.nc_min,
                max: self.nc_max,
            },
        }
    }
}

/// An instance with the id it is reported under (its file stem).
#[derive(Clone, Debug)]
pub struct NamedInstance {
    pub id: String,
    pub instance: CspInstance,
}

pub fn instance_file_name(n: usize, seed: u64) -> String {
    format!("csp{n}_seed{seed}.json")
}

/// Writes `count` instances with seeds `seed..seed + count`.
pub fn generate(n: usize, gen: &SpecGenerator, count: usize, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let s = seed + i;
        let inst = generate_with(n, gen, s)?;
        let path = out_dir.join(instance_file_name(n, s));
        write_instance(&path, &inst)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads instance files; directories contribute every `*.json` inside.
/// The result is ordered by instance seed, then id.
pub fn load_instances(paths: &[PathBuf]) -> Result<Vec<NamedInstance>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in fs::read_dir(p).with_context(|| format!("reading {}", p.display()))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        } else if p.exists() {
            files.push(p.clone());
        } else {
            bail!("no such instance file or directory: {}", p.display());
        }
    }
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let instance = read_instance(&f).with_context(|| format!("loading {}", f.display()))?;
        let id = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push(NamedInstance { id, instance });
    }
    if out.is_empty() {
        bail!("no instances found");
    }
    out.sort_by(|a, b| a.instance.seed().cmp(&b.instance.seed()).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}
