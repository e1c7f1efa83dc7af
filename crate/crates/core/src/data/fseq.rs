use std::fs;
use std::path::Path;

use super::SequenceSet;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FSEQ_MAGIC: &[u8; 4] = b"FSEQ";
pub const FSEQ_VERSION: u32 = 1;
const HEADER: usize = 24;

/// Header: magic, version, record count, T, D, class count (u32 LE).
/// Each record: u32 label, then T·D f32 values, row-major.
pub fn write_fseq(set: &SequenceSet) -> Result<Vec<u8>> {
    let (t, d) = (set.t_len(), set.d_in());
    let mut out = Vec::with_capacity(HEADER + set.len() * (4 + 4 * t * d));
    out.extend_from_slice(FSEQ_MAGIC);
    for v in [FSEQ_VERSION, set.len() as u32, t as u32, d as u32, set.n_classes as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (s, &l) in set.seqs.iter().zip(&set.labels) {
        if !s.all_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        out.extend_from_slice(&(l as u32).to_le_bytes());
        for &v in s.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_fseq(bytes: &[u8]) -> Result<SequenceSet> {
    if bytes.len() < HEADER {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            msg: "truncated header".into(),
        });
    }
    if &bytes[..4] != FSEQ_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("expected magic {:?}, found {:?}", FSEQ_MAGIC, &bytes[..4]),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let version = word(0) as u32;
    if version != FSEQ_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let (n, t, d, n_classes) = (word(1), word(2), word(3), word(4));
    let record = 4 + 4 * t * d;
    let expected = HEADER + n * record;
    if bytes.len() != expected {
        return Err(Error::Format {
            offset: bytes.len().min(expected) as u64,
            msg: format!("payload length {} does not match header ({expected})", bytes.len()),
        });
    }
    let mut seqs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let base = HEADER + r * record;
        let label = u32::from_le_bytes(bytes[base..base + 4].try_into().unwrap()) as usize;
        if label >= n_classes {
            return Err(Error::Format {
                offset: base as u64,
                msg: format!("label {label} out of range for {n_classes} classes"),
            });
        }
        let mut data = Vec::with_capacity(t * d);
        for (k, c) in bytes[base + 4..base + record].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: (base + 4 + 4 * k) as u64,
                    msg: "non-finite feature value".into(),
                });
            }
            data.push(v as f64);
        }
        seqs.push(Tensor::from_vec(t, d, data)?);
        labels.push(label);
    }
    SequenceSet::new(seqs, labels, n_classes)
}

pub fn write_fseq_file(path: &Path, set: &SequenceSet) -> Result<()> {
    fs::write(path, write_fseq(set)?)?;
    Ok(())
}

pub fn read_fseq_file(path: &Path) -> Result<SequenceSet> {
    read_fseq(&fs::read(path)?)
}
