//! Binary field dumps: one JSON header line, then little-endian `f64`
//! values in row-major order over the node lattice (x fastest), with
//! exterior nodes stored as quiet NaN.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use vortex_core::elliptic::ScalarField;
use vortex_core::{DomainSpec, Grid};

pub const FORMAT: &str = "vortexlab-field";
/// Bit pattern written for exterior nodes.
pub const EXTERIOR: u64 = 0x7ff8_0000_0000_0000;

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("not a field dump (format {0:?})")]
    Format(String),
    #[error("expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },
    #[error("cannot rebuild the grid: {0}")]
    Grid(String),
    #[error("interior node ({0}, {1}) holds NaN")]
    MissingValue(i64, i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub domain_kind: String,
    pub domain: DomainSpec,
    pub h: f64,
    /// Lattice index of the first node; node `(i, j)` sits at `(i·h, j·h)`.
    pub i0: i64,
    pub j0: i64,
    pub nx: usize,
    pub ny: usize,
    /// `[x_min, y_min, x_max, y_max]` of the node lattice.
    pub bbox: [f64; 4],
    pub byte_order: String,
    pub exterior: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub header: FieldHeader,
    pub values: Vec<f64>,
}

pub fn encode_field(field: &ScalarField, name: &str) -> Vec<u8> {
    let grid = field.grid();
    let (i0, j0, nx, ny) = grid.lattice();
    let (lo, hi) = grid.bounding_box();
    let header = FieldHeader {
        format: FORMAT.into(),
        version: 1,
        name: name.into(),
        domain_kind: grid.domain().kind().name().into(),
        domain: grid.domain().clone(),
        h: grid.h(),
        i0,
        j0,
        nx,
        ny,
        bbox: [lo.x, lo.y, hi.x, hi.y],
        byte_order: "little-endian".into(),
        exterior: "quiet-nan".into(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(8 * nx * ny);
    for j in 0..ny as i64 {
        for i in 0..nx as i64 {
            let bits = match grid.cell_at(i0 + i, j0 + j) {
                Some(c) => field.values()[c].to_bits(),
                None => EXTERIOR,
            };
            out.extend_from_slice(&bits.to_le_bytes());
        }
    }
    out
}

pub fn export_field(field: &ScalarField, name: &str, path: &Path) -> Result<(), FieldIoError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_field(field, name))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldDump, FieldIoError> {
    decode_field(BufReader::new(std::fs::File::open(path)?))
}

pub fn decode_field(mut reader: impl BufRead) -> Result<FieldDump, FieldIoError> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())?;
    if header.format != FORMAT {
        return Err(FieldIoError::Format(header.format));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = header.nx * header.ny;
    if bytes.len() != 8 * expected {
        return Err(FieldIoError::Length {
            expected,
            found: bytes.len() / 8,
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok(FieldDump { header, values })
}

impl FieldDump {
    /// Rebuilds the grid from the header and gathers the interior values.
    pub fn to_field(&self) -> Result<ScalarField, FieldIoError> {
        let hd = &self.header;
        let grid = Grid::new(&hd.domain, hd.h).map_err(|e| FieldIoError::Grid(e.to_string()))?;
        if grid.lattice() != (hd.i0, hd.j0, hd.nx, hd.ny) {
            return Err(FieldIoError::Grid("lattice does not match the header".into()));
        }
        let mut values = Vec::with_capacity(grid.len());
        for c in 0..grid.len() {
            let (i, j) = grid.cell_ij(c);
            let v = self.values[(j - hd.j0) as usize * hd.nx + (i - hd.i0) as usize];
            if v.is_nan() {
                return Err(FieldIoError::MissingValue(i, j));
            }
            values.push(v);
        }
        Ok(ScalarField::new(Arc::new(grid), values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vortex_core::Point;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = Arc::new(Grid::new(&DomainSpec::ellipse(1.5, 1.0).unwrap(), 1.0 / 16.0).unwrap());
        let field = ScalarField::from_fn(grid.clone(), |p: Point| (3.0 * p.x).sin() * p.y.exp() / 7.0);
        let bytes = encode_field(&field, "psi");
        let dump = decode_field(&bytes[..]).unwrap();
        assert_eq!(dump.header.domain_kind, "ellipse");
        assert_eq!(dump.header.h, 1.0 / 16.0);
        let back = dump.to_field().unwrap();
        assert!(back.values().iter().zip(field.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let exterior = dump.values.iter().filter(|v| v.to_bits() == EXTERIOR).count();
        assert_eq!(exterior + grid.len(), dump.header.nx * dump.header.ny);
        assert!(exterior > 0);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let grid = Arc::new(Grid::new(&DomainSpec::unit_disk(), 0.25).unwrap());
        let bytes = encode_field(&ScalarField::zeros(grid), "psi");
        assert!(matches!(
            decode_field(&bytes[..bytes.len() - 3]),
            Err(FieldIoError::Length { .. })
        ));
    }
}
