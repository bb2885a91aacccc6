//! Binary operator files: an 8-byte magic string, a format version, a fixed
//! little-endian header and the matrix in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fio::{FIOApprox, Side};
use crate::kernel::AcaOptions;
use crate::transform::VariableTransform;

pub const MAGIC: &[u8; 8] = b"FRACSPEC";
pub const VERSION: u32 = 1;

fn side_code(s: Side) -> u8 {
    match s {
        Side::Left => 0,
        Side::Right => 1,
        Side::Riesz => 2,
    }
}

fn side_from(code: u8) -> Result<Side> {
    match code {
        0 => Ok(Side::Left),
        1 => Ok(Side::Right),
        2 => Ok(Side::Riesz),
        c => Err(Error::Format(format!("unknown side code {c}"))),
    }
}

fn transform_code(t: &VariableTransform) -> u8 {
    match t {
        VariableTransform::DoubleExp(_) => 0,
        VariableTransform::Algebraic(_) => 1,
    }
}

fn transform_from(code: u8, param: f64) -> Result<VariableTransform> {
    match code {
        0 => VariableTransform::double_exp(param),
        1 => VariableTransform::algebraic(param),
        c => Err(Error::Format(format!("unknown transform code {c}"))),
    }
}

pub fn write_operator<W: Write>(mut w: W, a: &FIOApprox) -> Result<()> {
    let n = a.n();
    let (k, l) = a.kernel_degrees();
    let band = a.band_profile();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[side_code(a.side()), transform_code(a.transform())])?;
    w.write_all(&a.transform().parameter().to_le_bytes())?;
    w.write_all(&a.mu().to_le_bytes())?;
    for v in [n, a.kernel_rank(), k, l, band.lower, band.upper] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in a.matrix().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(b)
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    let v = u64::from_le_bytes(read_array(r)?);
    usize::try_from(v).map_err(|_| Error::Format(format!("size {v} does not fit in memory")))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_operator<R: Read>(mut r: R) -> Result<FIOApprox> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic string".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}, expected {VERSION}")));
    }
    let [side, kind]: [u8; 2] = read_array(&mut r)?;
    let side = side_from(side)?;
    let param = read_f64(&mut r)?;
    let transform = transform_from(kind, param)?;
    let mu = read_f64(&mut r)?;
    let n = read_u64(&mut r)?;
    let rank = read_u64(&mut r)?;
    let k = read_u64(&mut r)?;
    let l = read_u64(&mut r)?;
    // band profile is re-measured from the data
    let _lower = read_u64(&mut r)?;
    let _upper = read_u64(&mut r)?;
    let len = n
        .checked_mul(n)
        .ok_or_else(|| Error::Format(format!("dimension {n} overflows")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(Error::Format(format!(
            "expected {} bytes of matrix data, found {}",
            8 * len,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite matrix entry".into()));
    }
    FIOApprox::from_parts(side, mu, transform, DMatrix::from_vec(n, n, data), rank, (k, l))
}

pub fn save_operator(path: &Path, a: &FIOApprox) -> Result<()> {
    write_operator(BufWriter::new(File::create(path)?), a)
}

pub fn load_operator(path: &Path) -> Result<FIOApprox> {
    read_operator(BufReader::new(File::open(path)?))
}

/// File stem identifying an operator: transform, its parameter, order, side,
/// size and kernel options.
pub fn cache_key(t: &VariableTransform, mu: f64, side: Side, n: usize, aca: Option<&AcaOptions>) -> String {
    let kernel = match aca {
        Some(o) => format!("k{}l{}r{}t{:e}", o.k, o.l, o.max_rank, o.tol),
        None => "auto".to_string(),
    };
    format!(
        "{}-{:016x}-mu{:016x}-{}-n{n}-{kernel}",
        t.kind_name(),
        t.parameter().to_bits(),
        mu.to_bits(),
        side.name()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fio::{build_fio, FioOptions};

    fn sample() -> FIOApprox {
        let tr = VariableTransform::double_exp(4.0).unwrap();
        build_fio(&tr, 0.5, Side::Right, 24, &FioOptions::default()).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let a = sample();
        let mut buf = Vec::new();
        write_operator(&mut buf, &a).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 4 + 2 + 16 + 48 + 8 * 24 * 24);
        let b = read_operator(buf.as_slice()).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(b.side(), Side::Right);
        assert_eq!(b.mu(), 0.5);
        assert_eq!(b.kernel_rank(), a.kernel_rank());
        assert_eq!(b.band_profile(), a.band_profile());
        assert_eq!(b.transform().parameter(), 4.0);
    }

    #[test]
    fn rejects_corruption() {
        let a = sample();
        let mut buf = Vec::new();
        write_operator(&mut buf, &a).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_operator(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_operator(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_operator(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(read_operator(&buf[..20]), Err(Error::Format(_))));
    }

    #[test]
    fn keys_distinguish_parameters() {
        let tr = VariableTransform::double_exp(4.0).unwrap();
        let a = cache_key(&tr, 0.5, Side::Left, 64, None);
        assert_ne!(a, cache_key(&tr, 0.5, Side::Right, 64, None));
        assert_ne!(a, cache_key(&tr, 0.5 + 1e-16, Side::Left, 64, None));
        assert_ne!(a, cache_key(&tr, 0.5, Side::Left, 64, Some(&AcaOptions::fixed(28, 80))));
    }
}
