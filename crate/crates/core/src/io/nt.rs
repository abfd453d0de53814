//! `.nt` tensor files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "NTEN"            4 bytes magic
//! version: u32      = 1
//! order:   u32      N
//! extents: N x u32
//! dtype:   u8       0 = real f64, 1 = complex (re, im) f64 pairs
//! payload           row-major samples
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{LrdError, Result};
use crate::tensor::{ComplexTensor, DenseTensor};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"NTEN";
pub const VERSION: u32 = 1;

const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;

/// Contents of a `.nt` file, in the stored precision.
#[derive(Clone, Debug, PartialEq)]
pub enum NtTensor {
    Real(DenseTensor<f64>),
    Complex(ComplexTensor<f64>),
}

fn write_header<W: Write>(w: &mut W, shape: &[usize], dtype: u8) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let order = u32::try_from(shape.len()).map_err(|_| LrdError::format("tensor order exceeds u32"))?;
    w.write_all(&order.to_le_bytes())?;
    for &e in shape {
        let e = u32::try_from(e).map_err(|_| LrdError::format(format!("extent {e} exceeds u32")))?;
        w.write_all(&e.to_le_bytes())?;
    }
    w.write_all(&[dtype])?;
    Ok(())
}

pub fn write_real<T: Scalar, W: Write>(w: &mut W, t: &DenseTensor<T>) -> Result<()> {
    write_header(w, t.shape(), DTYPE_REAL)?;
    for &v in t.data() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_complex<T: Scalar, W: Write>(w: &mut W, t: &ComplexTensor<T>) -> Result<()> {
    write_header(w, t.shape(), DTYPE_COMPLEX)?;
    for v in t.data() {
        w.write_all(&v.re.as_f64().to_le_bytes())?;
        w.write_all(&v.im.as_f64().to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| LrdError::format(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| LrdError::format(format!("truncated payload: {e}")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(LrdError::format("trailing bytes after payload"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read<R: Read>(r: &mut R) -> Result<NtTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| LrdError::format("file too short for magic bytes"))?;
    if &magic != MAGIC {
        return Err(LrdError::format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(LrdError::format(format!("unsupported version {version}")));
    }
    let order = read_u32(r)? as usize;
    if order == 0 || order > 64 {
        return Err(LrdError::format(format!("implausible tensor order {order}")));
    }
    let shape = (0..order)
        .map(|_| read_u32(r).map(|e| e as usize))
        .collect::<Result<Vec<_>>>()?;
    if shape.contains(&0) {
        return Err(LrdError::format(format!("zero extent in shape {shape:?}")));
    }
    let len = shape
        .iter()
        .try_fold(1usize, |a, &e| a.checked_mul(e))
        .ok_or_else(|| LrdError::format("shape overflows"))?;
    let mut dtype = [0u8; 1];
    r.read_exact(&mut dtype)
        .map_err(|_| LrdError::format("missing dtype byte"))?;
    match dtype[0] {
        DTYPE_REAL => Ok(NtTensor::Real(DenseTensor::new(shape, read_f64s(r, len)?)?)),
        DTYPE_COMPLEX => {
            let raw = read_f64s(r, 2 * len)?;
            let data = raw.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect();
            Ok(NtTensor::Complex(ComplexTensor::new(shape, data)?))
        }
        other => Err(LrdError::format(format!("unknown dtype {other}"))),
    }
}

pub fn save_real<T: Scalar>(path: impl AsRef<Path>, t: &DenseTensor<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_real(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn save_complex<T: Scalar>(path: impl AsRef<Path>, t: &ComplexTensor<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_complex(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<NtTensor> {
    let mut r = BufReader::new(File::open(path)?);
    read(&mut r)
}

/// Loads a real tensor, converting to the requested precision.
pub fn load_real<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseTensor<T>> {
    match load(path)? {
        NtTensor::Real(t) => Ok(t.map(T::of)),
        NtTensor::Complex(_) => Err(LrdError::format("expected a real tensor, found complex")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode_real(t: &DenseTensor<f64>) -> Vec<u8> {
        let mut buf = Vec::new();
        write_real(&mut buf, t).unwrap();
        buf
    }

    #[test]
    fn header_layout() {
        let t = DenseTensor::new(vec![2, 1], vec![1.0, -0.5]).unwrap();
        let buf = encode_real(&t);
        assert_eq!(&buf[..4], b"NTEN");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(&buf[16..20], &1u32.to_le_bytes());
        assert_eq!(buf[20], 0);
        assert_eq!(&buf[21..29], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 21 + 16);
    }

    #[test]
    fn complex_round_trip() {
        let t = ComplexTensor::new(
            vec![3],
            vec![
                Complex::new(1.0, 2.0),
                Complex::new(-0.0, f64::MIN_POSITIVE),
                Complex::new(3.5, -1e300),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_complex(&mut buf, &t).unwrap();
        assert_eq!(buf[16], 1);
        let NtTensor::Complex(back) = read(&mut buf.as_slice()).unwrap() else {
            panic!("expected complex");
        };
        assert_eq!(back, t);
    }

    #[test]
    fn corrupt_inputs() {
        let t = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let good = encode_real(&t);
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read(&mut bad_magic.as_slice()), Err(LrdError::Format(_))));
        let truncated = &good[..good.len() - 3];
        assert!(matches!(read(&mut &truncated[..]), Err(LrdError::Format(_))));
        let mut bad_dtype = good.clone();
        bad_dtype[16] = 7;
        assert!(read(&mut bad_dtype.as_slice()).is_err());
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(read(&mut trailing.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn real_round_trip_is_bit_exact(
            shape in prop::collection::vec(1usize..4, 1..4),
            bits in prop::collection::vec(any::<u64>(), 27),
        ) {
            let len: usize = shape.iter().product();
            let data: Vec<f64> = bits[..len].iter().map(|&b| f64::from_bits(b)).collect();
            let t = DenseTensor::new(shape, data).unwrap();
            let buf = encode_real(&t);
            let NtTensor::Real(back) = read(&mut buf.as_slice()).unwrap() else {
                panic!("expected real");
            };
            let a: Vec<u64> = back.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = t.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.shape(), t.shape());
        }
    }
}
