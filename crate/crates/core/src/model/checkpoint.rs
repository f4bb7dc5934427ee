//! Parameter checkpoints: little-endian `u64` block count, one `u64` per
//! block size, then the `f64` parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{BlockLayout, ParamVector};

pub fn write_checkpoint<W: Write>(mut w: W, theta: &ParamVector) -> Result<()> {
    let sizes = theta.layout.sizes();
    w.write_all(&(sizes.len() as u64).to_le_bytes())?;
    for s in &sizes {
        w.write_all(&(*s as u64).to_le_bytes())?;
    }
    for v in &theta.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamVector> {
    let n_s = read_u64(&mut r)? as usize;
    let sizes = (0..n_s)
        .map(|_| read_u64(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let layout = BlockLayout::from_sizes(&sizes);
    let mut values = Vec::with_capacity(layout.len());
    for _ in 0..layout.len() {
        values.push(f64::from_bits(read_u64(&mut r)?));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Layout(format!("{} trailing bytes in checkpoint", rest.len())));
    }
    ParamVector::new(values, layout)
}

pub fn save_checkpoint(path: &Path, theta: &ParamVector) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), theta)
}

pub fn load_checkpoint(path: &Path) -> Result<ParamVector> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_little_endian() {
        let theta = ParamVector::new(vec![1.0, -0.5, 2.0], BlockLayout::from_sizes(&[1, 2])).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &theta).unwrap();
        assert_eq!(buf.len(), 8 * (1 + 2 + 3));
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), theta);
    }

    #[test]
    fn truncated_file_fails() {
        let theta = ParamVector::new(vec![1.0, 2.0], BlockLayout::from_sizes(&[2])).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &theta).unwrap();
        buf.pop();
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
