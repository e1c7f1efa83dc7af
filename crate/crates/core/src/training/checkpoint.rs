use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schedule::TrainConfig;
use crate::backbone::{AnyModel, ArchSpec};
use crate::error::{Error, Result};
use crate::params::Parameterized;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 5] = b"BMRU1";
const VERSION: u32 = 1;
/// Value of `CheckpointMeta::format`.
pub const CHECKPOINT_FORMAT: &str = "fqbmru-checkpoint";

/// Sidecar written next to the binary payload as `<file>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub arch: ArchSpec,
    pub config: Option<TrainConfig>,
    pub iteration: usize,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub eps: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

/// Little-endian container: magic, version, count, then per tensor the
/// name, rank, dims (u64) and f64 payload.
pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let magic = c.take(5, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("expected magic {:?}, found {:?}", MAGIC, magic),
        });
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 5,
            msg: format!("unsupported checkpoint version {version}"),
        });
    }
    let count = c.u32("tensor count")?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = c.u32("name length")? as usize;
        let at = c.pos;
        let name = String::from_utf8(c.take(len, "name")?.to_vec()).map_err(|_| Error::Format {
            offset: at as u64,
            msg: "tensor name is not UTF-8".into(),
        })?;
        let rank = c.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u64("dimension")? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = c.take(n * 8, "payload")?;
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if c.pos != buf.len() {
        return Err(Error::Format {
            offset: c.pos as u64,
            msg: "trailing bytes after last tensor".into(),
        });
    }
    Ok(out)
}

/// Overwrites every parameter of `model` from `tensors`, by name.
pub fn load_params<P: Parameterized + ?Sized>(model: &mut P, tensors: &[(String, Tensor)]) -> Result<()> {
    let mut missing = None;
    model.visit_mut("", &mut |name, t, _| {
        match tensors.iter().find(|(n, _)| n == name) {
            Some((_, src)) if src.shape() == t.shape() => *t = src.clone(),
            _ => {
                missing.get_or_insert_with(|| name.to_string());
            }
        }
    });
    match missing {
        Some(name) => Err(Error::Data(format!("checkpoint lacks parameter `{name}` or its shape differs"))),
        None => Ok(()),
    }
}

pub fn save_checkpoint(path: &Path, model: &AnyModel, meta: &CheckpointMeta) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_tensors(&mut f, &model.named_tensors())?;
    f.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(AnyModel, CheckpointMeta)> {
    let meta: CheckpointMeta = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let tensors = read_tensors(fs::File::open(path)?)?;
    let mut model = meta.arch.build(0);
    load_params(&mut model, &tensors)?;
    Ok((model, meta))
}
