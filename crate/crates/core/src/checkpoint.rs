//! Parameter checkpoints.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "WSTGCKPT"
//! version      u32      1
//! stage        u8       0 = coarse, 1 = fine
//! epoch        u32      epochs completed in that stage
//! config_len   u32
//! config       config_len bytes of UTF-8 `key=value` text
//! param_count  u32
//! per parameter, in store order:
//!   name_len   u32
//!   name       name_len bytes of UTF-8
//!   rank       u32
//!   dims       rank × u32
//!   values     product(dims) × f64, row-major
//! ```

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"WSTGCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Coarse,
    Fine,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Coarse => "coarse",
            Stage::Fine => "fine",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub stage: Stage,
    pub epoch: u32,
    pub config: TrainConfig,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.params.total_values());
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION).unwrap();
        out.write_u8(match self.stage {
            Stage::Coarse => 0,
            Stage::Fine => 1,
        })
        .unwrap();
        out.write_u32::<LittleEndian>(self.epoch).unwrap();
        let config = self.config.to_text();
        out.write_u32::<LittleEndian>(config.len() as u32).unwrap();
        out.extend_from_slice(config.as_bytes());
        out.write_u32::<LittleEndian>(self.params.len() as u32).unwrap();
        for (_, p) in self.params.iter() {
            out.write_u32::<LittleEndian>(p.name.len() as u32).unwrap();
            out.extend_from_slice(p.name.as_bytes());
            out.write_u32::<LittleEndian>(p.value.rank() as u32).unwrap();
            for &d in p.value.shape() {
                out.write_u32::<LittleEndian>(d as u32).unwrap();
            }
            for &v in p.value.data() {
                out.write_f64::<LittleEndian>(v).unwrap();
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let trunc = |cur: &Cursor<&[u8]>| Error::Checkpoint(format!("truncated at byte {}", cur.position()));

        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(|_| trunc(&cur))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let stage = match cur.read_u8().map_err(|_| trunc(&cur))? {
            0 => Stage::Coarse,
            1 => Stage::Fine,
            s => return Err(Error::Checkpoint(format!("unknown stage tag {s}"))),
        };
        let epoch = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))?;
        let config = read_string(&mut cur)?;
        let config = TrainConfig::parse(&config).map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;

        let count = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = read_string(&mut cur)?;
            let rank = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))? as usize;
            if rank == 0 || rank > 8 {
                return Err(Error::Checkpoint(format!("`{name}` has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))? as usize);
            }
            let n: usize = shape.iter().product();
            let remaining = bytes.len() - cur.position() as usize;
            if n * 8 > remaining {
                return Err(trunc(&cur));
            }
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(cur.read_f64::<LittleEndian>().map_err(|_| trunc(&cur))?);
            }
            let value = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
            params
                .add(name, value)
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        if cur.position() as usize != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - cur.position() as usize
            )));
        }
        Ok(Checkpoint {
            stage,
            epoch,
            config,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

fn read_string(cur: &mut Cursor<&[u8]>) -> Result<String> {
    let len = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Checkpoint(format!("truncated at byte {}", cur.position())))? as usize;
    let start = cur.position() as usize;
    let bytes = cur.get_ref();
    if start + len > bytes.len() {
        return Err(Error::Checkpoint(format!("truncated string at byte {start}")));
    }
    let s = std::str::from_utf8(&bytes[start..start + len])
        .map_err(|_| Error::Checkpoint(format!("invalid UTF-8 at byte {start}")))?
        .to_string();
    cur.set_position((start + len) as u64);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut params = ParamStore::new();
        params.add("a.weight", Tensor::matrix(2, 2, vec![1.0, -2.5, 3.25, 0.1]).unwrap()).unwrap();
        params.add("a.bias", Tensor::vector(vec![1e-300, f64::MAX]).unwrap()).unwrap();
        Checkpoint {
            stage: Stage::Fine,
            epoch: 7,
            config: TrainConfig::default(),
            params,
        }
    }

    #[test]
    fn bytes_round_trip() {
        let bytes = sample().to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.stage, Stage::Fine);
        assert_eq!(back.epoch, 7);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_input_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
