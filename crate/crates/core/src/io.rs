//! Dataset CSV interchange and the binary model encoding.
//!
//! CSV: one signal per row, `label,v1,...,vd`; classes are ordered by first
//! appearance and values are written in shortest round-trip form.
//!
//! Model: little-endian binary with layout
//! `"ISCB" | version u16 | p-tag u32 | d u32 | C u32 | s u32 |
//!  C × (label byte length u32, UTF-8 bytes) | C × d × s f64 column-major`.
//! The p-tag is 1, 2 or u32::MAX (for ∞).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::norms::PNorm;
use crate::types::{ClassDataset, FeatureBank};

const MAGIC: &[u8; 4] = b"ISCB";
const VERSION: u16 = 1;
const INF_TAG: u32 = u32::MAX;

/// A loaded dataset plus the file position of every signal:
/// `row_map[file_row] = (class index, column within class)`.
#[derive(Debug, Clone)]
pub struct IndexedDataset {
    pub dataset: ClassDataset,
    pub row_map: Vec<(usize, usize)>,
}

/// Reads a labeled dataset, grouping rows into class blocks by first
/// appearance of each label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<ClassDataset> {
    Ok(load_csv_indexed(path)?.dataset)
}

/// Like [`load_csv`], additionally reporting where each file row landed.
pub fn load_csv_indexed(path: impl AsRef<Path>) -> Result<IndexedDataset> {
    let text = fs::read_to_string(path)?;
    let mut labels: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut row_map = Vec::new();
    let mut dim: Option<usize> = None;

    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            return Err(Error::Parse {
                row,
                column: None,
                message: "empty row".into(),
            });
        }
        let mut fields = line.split(',');
        let label = fields.next().expect("split yields at least one field");
        let mut values = Vec::new();
        for (f_idx, field) in fields.enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: Some(f_idx + 2),
                message: format!("non-numeric field {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: Some(f_idx + 2),
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(value);
        }
        match dim {
            None => {
                if values.is_empty() {
                    return Err(Error::Parse {
                        row,
                        column: None,
                        message: "row has a label but no signal components".into(),
                    });
                }
                dim = Some(values.len());
            }
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    row,
                    column: None,
                    message: format!(
                        "ragged row: {} components, expected {d}",
                        values.len()
                    ),
                });
            }
            _ => {}
        }
        let class = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                columns.push(Vec::new());
                labels.len() - 1
            }
        };
        row_map.push((class, columns[class].len()));
        columns[class].push(values);
    }

    let dim = dim.ok_or(Error::Parse {
        row: 1,
        column: None,
        message: "empty file".into(),
    })?;
    let classes = columns
        .into_iter()
        .map(|cols| {
            let mut block = DMatrix::zeros(dim, cols.len());
            for (k, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    block[(i, k)] = *v;
                }
            }
            block
        })
        .collect();
    Ok(IndexedDataset {
        dataset: ClassDataset::new(labels, classes)?,
        row_map,
    })
}

/// Writes a dataset in the CSV interchange format, class blocks in order.
pub fn save_csv(path: impl AsRef<Path>, data: &ClassDataset) -> Result<()> {
    let mut out = String::new();
    for (label, block) in data.labels().iter().zip(data.classes()) {
        for k in 0..block.ncols() {
            out.push_str(label);
            for v in block.column(k).iter() {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn pnorm_tag(p: PNorm) -> u32 {
    match p {
        PNorm::One => 1,
        PNorm::Two => 2,
        PNorm::Inf => INF_TAG,
    }
}

fn tag_pnorm(tag: u32) -> Result<PNorm> {
    match tag {
        1 => Ok(PNorm::One),
        2 => Ok(PNorm::Two),
        INF_TAG => Ok(PNorm::Inf),
        other => Err(Error::Model(format!("unknown p-norm tag {other}"))),
    }
}

/// Serializes a bank; `decode_model` inverts this bit-exactly.
pub fn encode_model(bank: &FeatureBank) -> Vec<u8> {
    let d = bank.dim();
    let s = bank.rank();
    let c = bank.class_count();
    let mut out = Vec::with_capacity(22 + c * (4 + 8) + c * d * s * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&pnorm_tag(bank.pnorm()).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(s as u32).to_le_bytes());
    for label in bank.labels() {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    for block in bank.blocks() {
        // DMatrix stores column-major, so the raw slice is already in order
        for v in block.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Model(format!(
                "truncated while reading {what}: need {} bytes, have {}",
                self.pos + n,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Decodes a bank, rejecting bad magic, unknown versions, truncation,
/// trailing bytes and blocks that fail the orthonormality check.
pub fn decode_model(bytes: &[u8]) -> Result<FeatureBank> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Model(format!("bad magic {magic:02x?}")));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let pnorm = tag_pnorm(r.u32("p-norm tag")?)?;
    let d = r.u32("dimension")? as usize;
    let c = r.u32("class count")? as usize;
    let s = r.u32("rank")? as usize;
    if d == 0 || c == 0 || s == 0 || s > d {
        return Err(Error::Model(format!(
            "inconsistent header: d={d}, C={c}, s={s}"
        )));
    }
    let mut labels = Vec::with_capacity(c);
    for i in 0..c {
        let len = r.u32("label length")? as usize;
        let raw = r.take(len, "label bytes")?;
        let label = std::str::from_utf8(raw)
            .map_err(|_| Error::Model(format!("label {i} is not valid UTF-8")))?;
        labels.push(label.to_string());
    }
    let expected = r.pos + c * d * s * 8;
    if bytes.len() != expected {
        return Err(Error::Model(format!(
            "block section length mismatch: expected {expected} bytes total, found {}",
            bytes.len()
        )));
    }
    let mut blocks = Vec::with_capacity(c);
    for _ in 0..c {
        let raw = r.take(d * s * 8, "feature block")?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        blocks.push(DMatrix::from_column_slice(d, s, &values));
    }
    // FeatureBank::new re-checks orthonormality, guarding against corruption
    FeatureBank::new(labels, blocks, pnorm).map_err(|e| Error::Model(e.to_string()))
}

pub fn save_model(path: impl AsRef<Path>, bank: &FeatureBank) -> Result<()> {
    fs::write(path, encode_model(bank))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FeatureBank> {
    decode_model(&fs::read(path)?)
}
