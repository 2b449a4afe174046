//! Parameter checkpoints.
//!
//! Layout (little endian): magic `CNCK`, `u32` version, `u32` entry count,
//! then per entry `u32` name length, UTF-8 name, `u32` rows, `u32` cols and
//! `rows * cols` `f64` values in row-major order.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{NeuralError, ParamStore, Result};

const MAGIC: &[u8; 4] = b"CNCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, store: &ParamStore) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for p in store.iter() {
        out.write_all(&(p.name.len() as u32).to_le_bytes())?;
        out.write_all(p.name.as_bytes())?;
        out.write_all(&(p.value.nrows() as u32).to_le_bytes())?;
        out.write_all(&(p.value.ncols() as u32).to_le_bytes())?;
        for v in p.value.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn u32_from<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Loads values into `store`; names and shapes must match exactly.
pub fn read_checkpoint<R: Read>(mut input: R, store: &mut ParamStore) -> Result<()> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".into()));
    }
    let version = u32_from(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32_from(&mut input)? as usize;
    if count != store.len() {
        return Err(NeuralError::Checkpoint(format!(
            "{count} entries, model has {}",
            store.len()
        )));
    }
    for _ in 0..count {
        let len = u32_from(&mut input)? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NeuralError::Checkpoint("name is not UTF-8".into()))?;
        let rows = u32_from(&mut input)? as usize;
        let cols = u32_from(&mut input)? as usize;
        let id = store
            .find(&name)
            .ok_or_else(|| NeuralError::UnknownParam(name.clone()))?;
        if store.get(id).value.dim() != (rows, cols) {
            return Err(NeuralError::Checkpoint(format!("shape mismatch for `{name}`")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b)?;
            values.push(f64::from_le_bytes(b));
        }
        *store.value_mut(id) =
            Array2::from_shape_vec((rows, cols), values).expect("length checked");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a", array![[1.5, -2.0], [0.1, 1e-300]]);
        s.add_buffer("bn.mean", array![[3.0]]);
        s
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let s = store();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &s).unwrap();
        let mut t = store();
        for p in t.iter_mut() {
            p.value.fill(0.0);
        }
        read_checkpoint(buf.as_slice(), &mut t).unwrap();
        assert_eq!(s, t);
        let mut again = Vec::new();
        write_checkpoint(&mut again, &t).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn mismatches_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store()).unwrap();
        let mut other = ParamStore::new();
        other.add("a", array![[0.0]]);
        other.add_buffer("bn.mean", array![[0.0]]);
        assert!(read_checkpoint(buf.as_slice(), &mut other).is_err());
        buf[0] = b'X';
        assert!(read_checkpoint(buf.as_slice(), &mut store()).is_err());
    }
}
