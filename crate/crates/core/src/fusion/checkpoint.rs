//! Binary snapshot container for parameters and memory.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "MBAFCKPT"
//! version  u32      1
//! count    u32      number of tensors
//! repeated count times:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   rows u32, cols u32
//!   rows*cols f64 values, row-major, IEEE-754 little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{MbafError, Result};
use crate::fusion::MemoryState;
use crate::numcore::DenseMatrix;
use crate::params::ParamSet;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MBAFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Ordered list of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, DenseMatrix)>,
}

fn format_err(msg: impl Into<String>) -> MbafError {
    MbafError::Format(msg.into())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: DenseMatrix) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn push_params(&mut self, prefix: &str, params: &dyn ParamSet) -> Result<()> {
        let mut out = Vec::new();
        params.visit(prefix, &mut |name, (r, c), data| {
            out.push((name.to_string(), r, c, data.to_vec()));
        });
        for (name, r, c, data) in out {
            self.push(name, DenseMatrix::new(r, c, data)?);
        }
        Ok(())
    }

    /// Copies every tensor of `params` from this checkpoint, checking sizes.
    pub fn restore_params(&self, prefix: &str, params: &mut dyn ParamSet) -> Result<()> {
        let mut err = None;
        params.visit_mut(prefix, &mut |name, data| {
            if err.is_some() {
                return;
            }
            match self.get(name) {
                Some(t) if t.data().len() == data.len() => data.copy_from_slice(t.data()),
                Some(t) => {
                    err = Some(format_err(format!(
                        "tensor `{name}` has {} values, expected {}",
                        t.data().len(),
                        data.len()
                    )))
                }
                None => err = Some(format_err(format!("missing tensor `{name}`"))),
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn push_memory(&mut self, prefix: &str, memory: &[MemoryState]) {
        for (i, m) in memory.iter().enumerate() {
            self.push(format!("{prefix}.memory{i}"), m.matrix().clone());
        }
    }

    pub fn restore_memory(&self, prefix: &str, memory: &mut [MemoryState]) -> Result<()> {
        for (i, m) in memory.iter_mut().enumerate() {
            let name = format!("{prefix}.memory{i}");
            let t = self
                .get(&name)
                .ok_or_else(|| format_err(format!("missing tensor `{name}`")))?;
            if t.shape() != m.matrix().shape() {
                return Err(format_err(format!("tensor `{name}` has shape {:?}", t.shape())));
            }
            *m.matrix_mut() = t.clone();
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let count = u32::try_from(self.tensors.len()).map_err(|_| format_err("too many tensors"))?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for (name, t) in &self.tensors {
            let len = u32::try_from(name.len()).map_err(|_| format_err("tensor name too long"))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            for dim in [t.rows(), t.cols()] {
                let dim = u32::try_from(dim).map_err(|_| format_err("tensor too large"))?;
                w.write_all(&dim.to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(format_err("bad magic bytes"));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let count = read_u32(r)?;
        let mut ckpt = Checkpoint::new();
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| format_err("tensor name is not UTF-8"))?;
            let rows = read_u32(r)? as usize;
            let cols = read_u32(r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            ckpt.push(name, DenseMatrix::new(rows, cols, data)?);
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{memory_init, MbafParams};
    use crate::numcore::Rng;

    #[test]
    fn header_layout() {
        let mut ckpt = Checkpoint::new();
        ckpt.push("w", DenseMatrix::new(1, 2, vec![1.0, -2.5]).unwrap());
        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"MBAFCKPT");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(bytes[20], b'w');
        assert_eq!(&bytes[21..25], &1u32.to_le_bytes());
        assert_eq!(&bytes[25..29], &2u32.to_le_bytes());
        assert_eq!(&bytes[29..37], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[37..45], &(-2.5f64).to_le_bytes());
        assert_eq!(bytes.len(), 45);
    }

    #[test]
    fn params_and_memory_survive_a_round_trip() {
        let mut rng = Rng::new(12);
        let params = MbafParams::init(3, &mut rng).unwrap();
        let memory = vec![memory_init(&mut rng, 4, 3).unwrap()];
        let mut ckpt = Checkpoint::new();
        ckpt.push_params("fusion", &params).unwrap();
        ckpt.push_memory("fusion", &memory);

        let mut bytes = Vec::new();
        ckpt.write_to(&mut bytes).unwrap();
        let back = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();

        let mut p2 = MbafParams::zeros(3);
        back.restore_params("fusion", &mut p2).unwrap();
        assert_eq!(p2, params);
        let mut m2 = vec![memory_init(&mut rng, 4, 3).unwrap()];
        back.restore_memory("fusion", &mut m2).unwrap();
        assert_eq!(m2[0].matrix(), memory[0].matrix());

        let mut wrong = MbafParams::zeros(2);
        assert!(back.restore_params("fusion", &mut wrong).is_err());
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(Checkpoint::read_from(&mut &b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut bytes = Vec::new();
        Checkpoint::new().write_to(&mut bytes).unwrap();
        bytes[8] = 9;
        assert!(Checkpoint::read_from(&mut bytes.as_slice()).is_err());
    }
}
