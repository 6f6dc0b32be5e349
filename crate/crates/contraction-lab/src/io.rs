//! File formats: matrix/chain/sigma JSON, xi specs, and atomic writes.
//!
//! Matrix JSON is `{"dim": d, "rows": [[...], ...]}`, row-major; readers
//! reject non-square shapes and non-finite entries. A chain file is
//! `{"dim": d, "terms": [matrix, ...], "meta": {...}}`. A sigma file is
//! `{"prefix": [ints], "tail": "identity|blocks:B"}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::products::{parse_kind, ProperMap, SigmaKind};
use crate::rng::Rng;
use crate::seqgen::{ChainMeta, ContractionChain};
use crate::symmat::SymMatrix;

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix) -> Self {
        MatrixJson {
            dim: m.dim(),
            rows: m.rows(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.rows.len() != self.dim {
            return Err(Error::Parse(format!(
                "matrix declares dim {} but has {} rows",
                self.dim,
                self.rows.len()
            )));
        }
        Matrix::from_rows(&self.rows).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Symmetric read: tolerates roundoff-level asymmetry, rejects junk.
    pub fn to_sym_matrix(&self) -> Result<SymMatrix> {
        let m = self.to_matrix()?;
        let asym = m.max_abs_diff(&m.transpose());
        if asym > 1e-9 {
            return Err(Error::Parse(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(SymMatrix::symmetrize(&m))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainFile {
    pub dim: usize,
    pub terms: Vec<MatrixJson>,
    pub meta: ChainMeta,
}

pub fn chain_to_json(chain: &ContractionChain) -> ChainFile {
    ChainFile {
        dim: chain.dim(),
        terms: chain
            .terms()
            .iter()
            .map(|t| MatrixJson::from_matrix(t.as_matrix()))
            .collect(),
        meta: chain.meta().clone(),
    }
}

pub fn save_chain(chain: &ContractionChain, path: &Path) -> Result<()> {
    write_json(path, &chain_to_json(chain))
}

/// Loads a chain without verifying the decreasing order; callers that need a
/// verified chain run `verify_chain` themselves.
pub fn load_chain(path: &Path) -> Result<ContractionChain> {
    let file: ChainFile = read_json(path)?;
    if file.terms.is_empty() {
        return Err(Error::Parse("chain file has no terms".into()));
    }
    let mut terms = Vec::with_capacity(file.terms.len());
    for t in &file.terms {
        if t.dim != file.dim {
            return Err(Error::Parse(format!(
                "chain dim {} but term dim {}",
                file.dim, t.dim
            )));
        }
        terms.push(t.to_sym_matrix()?);
    }
    ContractionChain::from_terms(terms, file.meta)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaFile {
    pub prefix: Vec<usize>,
    pub tail: String,
}

pub fn load_sigma(path: &Path, horizon: usize) -> Result<ProperMap> {
    let file: SigmaFile = read_json(path)?;
    let tail = parse_kind(&file.tail)?;
    ProperMap::new(
        SigmaKind::Explicit {
            prefix: file.prefix,
            tail: Box::new(tail),
        },
        horizon,
    )
}

/// Builds a sigma map from a CLI spec: a plain kind or `file:path`.
pub fn sigma_from_spec(spec: &str, horizon: usize) -> Result<ProperMap> {
    if let Some(path) = spec.strip_prefix("file:") {
        return load_sigma(Path::new(path), horizon);
    }
    ProperMap::parse(spec, horizon)
}

/// Stream salt for `random:SEED` vectors. Generators seed their streams
/// with the bare seed; without the salt, `--seed S` chains and `random:S`
/// vectors would draw the same leading normals (e.g. the vector would land
/// exactly on a generator's pinned eigenvector).
pub const XI_STREAM_SALT: u64 = 0x7869_2d76_6563_7430;

/// Builds a vector from a CLI spec: `random:SEED` (seeded unit vector),
/// `basis:I` (0-based standard basis vector), or `file:path` holding a JSON
/// array.
pub fn xi_from_spec(spec: &str, dim: usize) -> Result<Vec<f64>> {
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::Validation(format!("bad xi seed '{seed}'")))?;
        return Ok(Rng::new(seed ^ XI_STREAM_SALT).unit_vector(dim));
    }
    if let Some(index) = spec.strip_prefix("basis:") {
        let i: usize = index
            .parse()
            .map_err(|_| Error::Validation(format!("bad basis index '{index}'")))?;
        if i >= dim {
            return Err(Error::Validation(format!(
                "basis index {i} outside 0..{dim}"
            )));
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        return Ok(v);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let v: Vec<f64> = read_json(Path::new(path))?;
        if v.len() != dim {
            return Err(Error::Validation(format!(
                "xi file has dim {}, chain has dim {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse("xi entries must be finite".into()));
        }
        if norm(&v) == 0.0 {
            return Err(Error::Validation("xi must be nonzero".into()));
        }
        return Ok(v);
    }
    Err(Error::Validation(format!(
        "unknown xi spec '{spec}' (expected random:SEED | basis:I | file:path)"
    )))
}

/// Serializes a float with 17 significant digits, locale-free.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize for {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Write via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
