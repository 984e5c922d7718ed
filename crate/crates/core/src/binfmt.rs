//! Little-endian framing helpers shared by the on-disk formats.

use crate::error::{Error, Result};
use std::io::{Read, Write};

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> std::io::Result<()> {
    for v in vs {
        write_f64(w, *v)?;
    }
    Ok(())
}

fn short_read(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated payload".into())
    } else {
        Error::Format(e.to_string())
    }
}

pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &[u8]) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    r.read_exact(&mut buf).map_err(short_read)?;
    if buf != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(short_read)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(short_read)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(short_read)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

pub(crate) fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(short_read)?;
    Ok(f32::from_le_bytes(b))
}

pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b) {
        Ok(0) => Ok(()),
        Ok(_) => Err(Error::Format("trailing bytes after payload".into())),
        Err(e) => Err(Error::Format(e.to_string())),
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}
