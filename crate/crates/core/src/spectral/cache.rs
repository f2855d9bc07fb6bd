//! On-disk cache of spectral bases.
//!
//! Layout: one line of JSON `{"n":…,"k_max":…,"kind":…,"hash":…}` terminated
//! by `\n`, followed by little-endian `f64`s: all `n` eigenvalues, then the
//! first `k_max` eigenvectors as an `n × k_max` row-major block.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SpectralBasis;
use crate::error::{Error, Result};
use crate::graph::{Graph, ShiftOperatorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheHeader {
    pub n: usize,
    pub k_max: usize,
    pub kind: ShiftOperatorKind,
    pub hash: String,
}

/// SHA-256 of the graph's JSON document, hex encoded.
pub fn graph_hash(g: &Graph) -> Result<String> {
    let digest = Sha256::digest(g.to_json()?.as_bytes());
    Ok(hex::encode(digest))
}

pub fn write_basis(path: &Path, g: &Graph, basis: &SpectralBasis, k_max: usize) -> Result<()> {
    let n = basis.n();
    if k_max == 0 || k_max > basis.eigenvectors().ncols() {
        return Err(Error::BandwidthOutOfRange { k: k_max, n });
    }
    let header = CacheHeader {
        n,
        k_max,
        kind: basis.kind(),
        hash: graph_hash(g)?,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for x in basis.eigenvalues().iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    let vecs = basis.eigenvectors();
    for i in 0..n {
        for j in 0..k_max {
            out.write_all(&vecs[(i, j)].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a cached basis, refusing it unless it was built from `g` with `kind`.
pub fn read_basis(path: &Path, g: &Graph, kind: ShiftOperatorKind) -> Result<SpectralBasis> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: CacheHeader = serde_json::from_str(line.trim_end())?;
    if header.hash != graph_hash(g)? || header.kind != kind || header.n != g.n_vertices() {
        return Err(Error::Config(format!(
            "cache {} was built for a different graph or shift operator",
            path.display()
        )));
    }
    if header.k_max == 0 || header.k_max > header.n {
        return Err(Error::Config(format!(
            "cache has invalid k_max {}",
            header.k_max
        )));
    }
    let n = header.n;
    let mut buf = [0u8; 8];
    let mut next = |input: &mut BufReader<std::fs::File>| -> Result<f64> {
        input.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut eigenvalues = DVector::zeros(n);
    for i in 0..n {
        eigenvalues[i] = next(&mut input)?;
    }
    let mut eigenvectors = DMatrix::zeros(n, header.k_max);
    for i in 0..n {
        for j in 0..header.k_max {
            eigenvectors[(i, j)] = next(&mut input)?;
        }
    }
    Ok(SpectralBasis::from_parts(eigenvalues, eigenvectors, kind))
}
