//! Binary solution dumps.
//!
//! Each field goes to its own file: a 32-byte header followed by the values
//! as little-endian f64 in storage order (time outermost, `x2` innermost).
//!
//! | bytes  | content                      |
//! |--------|------------------------------|
//! | 0..8   | magic `FRACOPT\0`            |
//! | 8..16  | `n` as u64 LE                |
//! | 16..20 | field id as u32 LE           |
//! | 20..24 | reserved, zero               |
//! | 24..32 | value count as u64 LE        |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fracopt::SolveResult;

use crate::error::{CliError, CliResult};

pub const MAGIC: [u8; 8] = *b"FRACOPT\0";
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    State = 1,
    Control = 2,
    StateCopy = 3,
    ControlCopy = 4,
    Adjoint = 5,
    DesiredState = 6,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::State => "y",
            Field::Control => "u",
            Field::StateCopy => "z_y",
            Field::ControlCopy => "z_u",
            Field::Adjoint => "p",
            Field::DesiredState => "ybar",
        }
    }

    pub fn from_id(id: u32) -> Option<Field> {
        [Field::State, Field::Control, Field::StateCopy, Field::ControlCopy, Field::Adjoint, Field::DesiredState]
            .into_iter()
            .find(|f| *f as u32 == id)
    }
}

pub fn encode(n: usize, field: Field, values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(field as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8]) -> CliResult<(usize, Field, Vec<f64>)> {
    let bad = |why: &str| CliError::Usage(format!("malformed dump: {why}"));
    if bytes.len() < HEADER_LEN || bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let n = word(8) as usize;
    let id = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let field = Field::from_id(id).ok_or_else(|| bad("unknown field id"))?;
    let count = word(24) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * count {
        return Err(bad("length does not match header"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((n, field, values))
}

/// Writes every field of `res` plus `solution.manifest` into `dir`.
pub fn write_solution(dir: &Path, n: usize, res: &SolveResult, ybar: &[f64]) -> CliResult<Vec<PathBuf>> {
    let fields: [(Field, &[f64]); 6] = [
        (Field::State, &res.y),
        (Field::Control, &res.u),
        (Field::StateCopy, &res.z_y),
        (Field::ControlCopy, &res.z_u),
        (Field::Adjoint, &res.state.p),
        (Field::DesiredState, ybar),
    ];
    let mut written = Vec::new();
    let mut manifest = String::new();
    manifest.push_str("# fracopt solution dump\n");
    manifest.push_str(&format!("n = {n}\nlen = {}\n", n * n * n));
    manifest.push_str("layout = index (k*n + i)*n + j, k time, i x1, j x2, interior nodes only\n");
    manifest.push_str("encoding = 32-byte header, then little-endian f64\n");
    manifest.push_str("# file, field, id\n");
    for (field, values) in fields {
        let file = format!("{}.bin", field.name());
        let path = dir.join(&file);
        fs::write(&path, encode(n, field, values))?;
        manifest.push_str(&format!("{file}, {}, {}\n", field.name(), field as u32));
        written.push(path);
    }
    let path = dir.join("solution.manifest");
    fs::File::create(&path)?.write_all(manifest.as_bytes())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let vals = vec![0.1, -3.5e-300, f64::MAX, 0.0, -0.0];
        let bytes = encode(7, Field::Adjoint, &vals);
        assert_eq!(bytes.len(), HEADER_LEN + 40);
        let (n, field, back) = decode(&bytes).unwrap();
        assert_eq!((n, field), (7, Field::Adjoint));
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&vals));
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let bytes = encode(2, Field::State, &[1.0; 8]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
    }
}
