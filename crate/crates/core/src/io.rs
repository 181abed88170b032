//! Text serialization of process tensors (`combworks-process-v1`).

use serde::{Deserialize, Serialize};

use crate::comb::ProcessTensor;
use crate::error::{CombError, Result};
use crate::linalg::{ComplexMatrix, C64};

pub const PROCESS_VERSION: &str = "combworks-process-v1";
pub const SPACE_ORDER: &str = "in-out-interleaved";

/// Descriptive fields stored alongside the Choi matrix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessMetadata {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub hamiltonian_diag: Vec<f64>,
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Deserialize)]
struct Document {
    version: String,
    n: usize,
    sys_dim: usize,
    space_order: String,
    choi_re: Vec<f64>,
    choi_im: Vec<f64>,
    #[serde(default)]
    metadata: ProcessMetadata,
}

fn real(x: f64) -> String {
    // 17 significant digits round-trip every f64
    format!("{x:.16e}")
}

fn real_array(xs: impl Iterator<Item = f64>) -> String {
    let body: Vec<String> = xs.map(real).collect();
    format!("[{}]", body.join(", "))
}

/// Serializes `p`; every real is written with 17 significant digits.
pub fn serialize_process(p: &ProcessTensor, meta: &ProcessMetadata) -> Vec<u8> {
    let data = p.choi().data();
    let name = serde_json::to_string(&meta.name).expect("strings serialize");
    let temperature = meta.temperature.map_or_else(|| "null".to_string(), real);
    let text = format!(
        "{{\n  \"version\": \"{PROCESS_VERSION}\",\n  \"n\": {},\n  \"sys_dim\": {},\n  \"space_order\": \"{SPACE_ORDER}\",\n  \"choi_re\": {},\n  \"choi_im\": {},\n  \"metadata\": {{\n    \"name\": {name},\n    \"hamiltonian_diag\": {},\n    \"temperature\": {temperature}\n  }}\n}}\n",
        p.steps(),
        p.sys_dim(),
        real_array(data.iter().map(|z| z.re)),
        real_array(data.iter().map(|z| z.im)),
        real_array(meta.hamiltonian_diag.iter().copied()),
    );
    text.into_bytes()
}

/// Parses and validates a process document. Validation failures name the
/// comb level that failed (0 for positivity).
pub fn parse_process(bytes: &[u8]) -> Result<(ProcessTensor, ProcessMetadata)> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| CombError::Parse(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(PROCESS_VERSION) => {}
        Some(other) => return Err(CombError::UnsupportedVersion(other.to_string())),
        None => return Err(CombError::Parse("missing version".into())),
    }
    let doc: Document =
        serde_json::from_value(value).map_err(|e| CombError::Parse(e.to_string()))?;
    debug_assert_eq!(doc.version, PROCESS_VERSION);
    if doc.space_order != SPACE_ORDER {
        return Err(CombError::Parse(format!(
            "unsupported space order {:?}",
            doc.space_order
        )));
    }
    let side = doc
        .sys_dim
        .checked_pow(2 * doc.n as u32)
        .ok_or_else(|| CombError::Parse("dimensions overflow".into()))?;
    if doc.choi_re.len() != side * side || doc.choi_im.len() != side * side {
        return Err(CombError::Parse(format!(
            "expected {} Choi entries for n = {} and sys_dim = {}",
            side * side,
            doc.n,
            doc.sys_dim
        )));
    }
    let data = doc
        .choi_re
        .iter()
        .zip(&doc.choi_im)
        .map(|(&re, &im)| C64::new(re, im))
        .collect();
    let choi = ComplexMatrix::from_vec(side, side, data)?;
    let p = ProcessTensor::from_choi(doc.n, doc.sys_dim, choi)?;
    Ok((p, doc.metadata))
}
