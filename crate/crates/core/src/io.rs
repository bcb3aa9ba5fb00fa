//! JSON instance documents. Coverage sets are never stored; they are
//! recomputed from the coordinates and spec on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CoverageSpec, CspError, CspInstance, Point, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    version: u32,
    n: usize,
    seed: u64,
    spec: CoverageSpec,
    coords: Vec<Point>,
}

pub fn serialize_instance(instance: &CspInstance) -> String {
    let doc = InstanceDoc {
        version: FORMAT_VERSION,
        n: instance.n(),
        seed: instance.seed(),
        spec: instance.spec().clone(),
        coords: instance.coords().to_vec(),
    };
    // serde_json writes the shortest decimal that round-trips each f64.
    let mut s = serde_json::to_string(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

pub fn deserialize_instance(text: &str) -> Result<CspInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| {
        CspError::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(CspError::Parse(format!(
            "field `version`: unsupported version {} (expected {FORMAT_VERSION})",
            doc.version
        )));
    }
    if doc.coords.len() != doc.n {
        return Err(CspError::Parse(format!(
            "field `coords`: {} points but `n` is {}",
            doc.coords.len(),
            doc.n
        )));
    }
    if let Some(i) = doc
        .coords
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite()))
    {
        return Err(CspError::Parse(format!("field `coords[{i}]`: non-finite coordinate")));
    }
    CspInstance::new(doc.coords, doc.spec, doc.seed).map_err(|e| match e {
        CspError::InvalidSpec(msg) => CspError::Parse(format!("field `spec`: {msg}")),
        other => other,
    })
}

pub fn write_instance(path: &Path, instance: &CspInstance) -> Result<()> {
    fs::write(path, serialize_instance(instance))?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<CspInstance> {
    let text = fs::read_to_string(path)?;
    deserialize_instance(&text)
        .map_err(|e| CspError::Parse(format!("{}: {e}", path.display())))
}
