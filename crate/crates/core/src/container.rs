//! Self-describing binary container for realizations, screens, beams and
//! phase-space grids.
//!
//! Layout: the 8-byte magic `TURBWIG\0`, a little-endian `u32` format
//! version, a little-endian `u32` header length, the UTF-8 JSON header, then
//! the payload as little-endian `f64`. Complex values are stored as
//! interleaved `(re, im)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beam::ComplexBeam;
use crate::error::{Error, Result};
use crate::grid::TransverseGrid;
use crate::medium::{FieldRealization, ScreenStack};
use crate::spectra::SpectrumModel;
use crate::wigner::{PhaseAxes, WignerGrid};

const MAGIC: &[u8; 8] = b"TURBWIG\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadKind {
    FieldRealization,
    ScreenStack,
    Beam,
    Wigner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub kind: PayloadKind,
    /// Array shape, slowest axis first.
    pub dims: Vec<usize>,
    pub spacings: Vec<f64>,
    pub complex: bool,
    pub model_hash: String,
    pub seed: u64,
    #[serde(default)]
    pub realization: u64,
    /// Kind-specific scalars (`z`, `gamma`, `epsilon`, ...).
    #[serde(default)]
    pub attributes: serde_json::Map<String, serde_json::Value>,
    /// Hex SHA-256 of the payload bytes.
    pub payload_sha256: String,
}

impl ContainerHeader {
    fn value_count(&self) -> usize {
        self.dims.iter().product::<usize>() * if self.complex { 2 } else { 1 }
    }

    fn attribute(&self, name: &str) -> Result<f64> {
        self.attributes
            .get(name)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::Format(format!("header attribute `{name}` missing")))
    }
}

fn payload_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Serializes a container to a byte vector. `header.payload_sha256` is
/// filled in from `payload`.
pub fn encode(mut header: ContainerHeader, payload: &[f64]) -> Result<Vec<u8>> {
    if header.value_count() != payload.len() {
        return Err(Error::Format(format!(
            "payload has {} values but dims {:?} (complex = {}) need {}",
            payload.len(),
            header.dims,
            header.complex,
            header.value_count()
        )));
    }
    let bytes = payload_bytes(payload);
    header.payload_sha256 = hex::encode(Sha256::digest(&bytes));
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&bytes);
    Ok(out)
}

/// Parses a container. When `expected_model_hash` is given the header hash
/// must match it.
pub fn decode(bytes: &[u8], expected_model_hash: Option<&str>) -> Result<(ContainerHeader, Vec<f64>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing container magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let header: ContainerHeader = serde_json::from_slice(&body[..hlen])?;
    let data = &body[hlen..];
    if data.len() != header.value_count() * 8 {
        return Err(Error::Format(format!(
            "payload is {} bytes, header declares {} values",
            data.len(),
            header.value_count()
        )));
    }
    if hex::encode(Sha256::digest(data)) != header.payload_sha256 {
        return Err(Error::Format("payload checksum mismatch".into()));
    }
    if let Some(expected) = expected_model_hash {
        if header.model_hash != expected {
            return Err(Error::Format(format!(
                "model hash {} in file does not match the configured model {}",
                header.model_hash, expected
            )));
        }
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn write_file(path: &Path, header: ContainerHeader, payload: &[f64]) -> Result<()> {
    let bytes = encode(header, payload)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_file(path: &Path, expected_model_hash: Option<&str>) -> Result<(ContainerHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode(&bytes, expected_model_hash)
}

fn transverse_dims(grid: &TransverseGrid) -> (Vec<usize>, Vec<f64>) {
    (vec![grid.n; grid.dim], vec![grid.dx; grid.dim])
}

fn attrs(pairs: &[(&str, f64)]) -> serde_json::Map<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect()
}

fn grid_from(header: &ContainerHeader, skip: usize) -> Result<TransverseGrid> {
    let dims = &header.dims[skip..];
    let spacings = &header.spacings[skip..];
    if dims.is_empty() || dims.len() > 2 || dims.iter().any(|&n| n != dims[0]) {
        return Err(Error::Format(format!("unsupported transverse shape {dims:?}")));
    }
    TransverseGrid::new(dims.len(), dims[0], spacings[0])
}

fn expect_kind(header: &ContainerHeader, kind: PayloadKind) -> Result<()> {
    if header.kind != kind {
        return Err(Error::Format(format!("expected {kind:?}, file holds {:?}", header.kind)));
    }
    Ok(())
}

pub fn encode_realization(r: &FieldRealization) -> Result<Vec<u8>> {
    let (mut dims, mut spacings) = transverse_dims(&r.grid);
    dims.insert(0, r.nz);
    spacings.insert(0, r.dz_field);
    let header = ContainerHeader {
        kind: PayloadKind::FieldRealization,
        dims,
        spacings,
        complex: false,
        model_hash: r.model_hash.clone(),
        seed: r.seed,
        realization: r.realization,
        attributes: attrs(&[("epsilon", r.epsilon)]),
        payload_sha256: String::new(),
    };
    encode(header, &r.values)
}

pub fn decode_realization(bytes: &[u8], model: &SpectrumModel) -> Result<FieldRealization> {
    let (h, values) = decode(bytes, Some(&model.hash()))?;
    expect_kind(&h, PayloadKind::FieldRealization)?;
    Ok(FieldRealization {
        grid: grid_from(&h, 1)?,
        nz: h.dims[0],
        dz_field: h.spacings[0],
        values,
        seed: h.seed,
        realization: h.realization,
        model_hash: h.model_hash.clone(),
        epsilon: h.attribute("epsilon")?,
        warnings: Vec::new(),
    })
}

pub fn encode_screens(s: &ScreenStack) -> Result<Vec<u8>> {
    let (mut dims, mut spacings) = transverse_dims(&s.grid);
    dims.insert(0, s.nsteps);
    spacings.insert(0, s.dz);
    let header = ContainerHeader {
        kind: PayloadKind::ScreenStack,
        dims,
        spacings,
        complex: false,
        model_hash: s.model_hash.clone(),
        seed: s.seed,
        realization: s.realization,
        attributes: Default::default(),
        payload_sha256: String::new(),
    };
    encode(header, &s.values)
}

pub fn decode_screens(bytes: &[u8], model: &SpectrumModel) -> Result<ScreenStack> {
    let (h, values) = decode(bytes, Some(&model.hash()))?;
    expect_kind(&h, PayloadKind::ScreenStack)?;
    Ok(ScreenStack {
        grid: grid_from(&h, 1)?,
        dz: h.spacings[0],
        nsteps: h.dims[0],
        values,
        seed: h.seed,
        realization: h.realization,
        model_hash: h.model_hash.clone(),
    })
}

/// Beams carry the hash of the model that produced them (or of the free
/// configuration) so downstream loaders can check provenance.
pub fn encode_beam(beam: &ComplexBeam, model_hash: &str, seed: u64) -> Result<Vec<u8>> {
    let (dims, spacings) = transverse_dims(&beam.grid);
    let payload: Vec<f64> = beam.values.iter().flat_map(|c| [c.re, c.im]).collect();
    let header = ContainerHeader {
        kind: PayloadKind::Beam,
        dims,
        spacings,
        complex: true,
        model_hash: model_hash.to_string(),
        seed,
        realization: 0,
        attributes: attrs(&[("z", beam.z), ("gamma", beam.gamma), ("ktilde", beam.ktilde)]),
        payload_sha256: String::new(),
    };
    encode(header, &payload)
}

pub fn decode_beam(bytes: &[u8], model_hash: Option<&str>) -> Result<ComplexBeam> {
    let (h, values) = decode(bytes, model_hash)?;
    expect_kind(&h, PayloadKind::Beam)?;
    Ok(ComplexBeam {
        grid: grid_from(&h, 0)?,
        values: values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        z: h.attribute("z")?,
        gamma: h.attribute("gamma")?,
        ktilde: h.attribute("ktilde")?,
    })
}

pub fn encode_wigner(w: &WignerGrid, model_hash: &str, seed: u64) -> Result<Vec<u8>> {
    let header = ContainerHeader {
        kind: PayloadKind::Wigner,
        dims: vec![w.axes.nx(), w.axes.np],
        spacings: vec![w.axes.x.dx, w.axes.dp],
        complex: false,
        model_hash: model_hash.to_string(),
        seed,
        realization: 0,
        attributes: attrs(&[("z", w.z), ("gamma", w.gamma)]),
        payload_sha256: String::new(),
    };
    encode(header, &w.values)
}

pub fn decode_wigner(bytes: &[u8], model_hash: Option<&str>) -> Result<WignerGrid> {
    let (h, values) = decode(bytes, model_hash)?;
    expect_kind(&h, PayloadKind::Wigner)?;
    if h.dims.len() != 2 {
        return Err(Error::Format("Wigner payload must be two-dimensional".into()));
    }
    let x = TransverseGrid::new(1, h.dims[0], h.spacings[0])?;
    Ok(WignerGrid {
        axes: PhaseAxes::new(x, h.dims[1], h.spacings[1])?,
        values,
        gamma: h.attribute("gamma")?,
        z: h.attribute("z")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{synthesize_volume, VolumeSpec};

    fn model() -> SpectrumModel {
        SpectrumModel::von_karman(1.0 / 3.0, 1.0, 4.0, 1.0, 1).unwrap()
    }

    #[test]
    fn realization_survives_encoding() {
        let grid = TransverseGrid::new(1, 32, 0.25).unwrap();
        let vol = VolumeSpec { nz: 8, dz_field: 0.1 };
        let r = synthesize_volume(&model(), &grid, vol, 5, 2).unwrap().with_epsilon(0.3);
        let bytes = encode_realization(&r).unwrap();
        let back = decode_realization(&bytes, &model()).unwrap();
        assert_eq!(back.values, r.values);
        assert_eq!((back.nz, back.seed, back.realization, back.epsilon), (8, 5, 2, 0.3));
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let grid = TransverseGrid::new(1, 16, 0.5).unwrap();
        let r = synthesize_volume(&model(), &grid, VolumeSpec { nz: 4, dz_field: 0.2 }, 1, 0).unwrap();
        let bytes = encode_realization(&r).unwrap();
        let other = SpectrumModel::von_karman(0.5, 1.0, 4.0, 1.0, 1).unwrap();
        assert!(matches!(decode_realization(&bytes, &other), Err(Error::Format(_))));
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let grid = TransverseGrid::new(1, 16, 0.5).unwrap();
        let r = synthesize_volume(&model(), &grid, VolumeSpec { nz: 4, dz_field: 0.2 }, 1, 0).unwrap();
        let mut bytes = encode_realization(&r).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x10;
        assert!(decode_realization(&bytes, &model()).is_err());
    }

    #[test]
    fn complex_payload_is_interleaved_little_endian() {
        let grid = TransverseGrid::new(1, 4, 1.0).unwrap();
        let beam = ComplexBeam::new(
            &grid,
            vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25), Complex64::new(0.0, 1.0), Complex64::new(3.0, 0.0)],
            1.0,
            1.0,
        )
        .unwrap();
        let bytes = encode_beam(&beam, "free", 0).unwrap();
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let data = &bytes[16 + hlen..];
        assert_eq!(f64::from_le_bytes(data[0..8].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(data[8..16].try_into().unwrap()), -2.0);
        assert_eq!(decode_beam(&bytes, Some("free")).unwrap().values, beam.values);
    }
}
