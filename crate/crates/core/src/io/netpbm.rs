//! Binary NetPBM images (P5 grayscale, P6 RGB) and frame directories.
//!
//! Samples are mapped to `[0, 1]` by dividing by the header's maxval; writing
//! clamps to `[0, 1]`, scales by 255 and rounds.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{LrdError, Result};
use crate::tensor::DenseTensor;
use crate::Scalar;

/// A decoded image as one `[height, width]` plane per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    pub channels: Vec<DenseTensor<T>>,
}

impl<T: Scalar> Image<T> {
    pub fn height(&self) -> usize {
        self.channels[0].shape()[0]
    }

    pub fn width(&self) -> usize {
        self.channels[0].shape()[1]
    }
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'6') {
        return Err(LrdError::format("not a binary P5/P6 NetPBM file"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(LrdError::format("truncated NetPBM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(LrdError::format("expected a number in NetPBM header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|e| LrdError::format(format!("bad header number: {e}")))?;
    }
    // exactly one whitespace byte separates header and raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(LrdError::format("missing whitespace after maxval"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(LrdError::format("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(LrdError::format(format!("invalid maxval {maxval}")));
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let h = parse_header(bytes)?;
    let nch = if h.magic[1] == b'5' { 1 } else { 3 };
    let bps = if h.maxval < 256 { 1 } else { 2 };
    let need = h.width * h.height * nch * bps;
    let raster = &bytes[h.data_start..];
    if raster.len() < need {
        return Err(LrdError::format(format!(
            "raster has {} bytes, expected {need}",
            raster.len()
        )));
    }
    let scale = T::one() / T::of(h.maxval as f64);
    let sample = |k: usize| -> T {
        let v = if bps == 1 {
            raster[k] as f64
        } else {
            u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
        };
        T::of(v) * scale
    };
    let channels = (0..nch)
        .map(|c| {
            DenseTensor::from_fn(&[h.height, h.width], |idx| {
                sample((idx[0] * h.width + idx[1]) * nch + c)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Image { channels })
}

fn quantize<T: Scalar>(v: T) -> u8 {
    let v = v.as_f64();
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode<T: Scalar>(img: &Image<T>) -> Result<Vec<u8>> {
    let nch = img.channels.len();
    let magic = match nch {
        1 => "P5",
        3 => "P6",
        n => return Err(LrdError::domain(format!("cannot encode {n}-channel image"))),
    };
    let shape = img.channels[0].shape();
    if shape.len() != 2 || img.channels.iter().any(|c| c.shape() != shape) {
        return Err(LrdError::domain("image channels must share a 2-D shape"));
    }
    let (height, width) = (shape[0], shape[1]);
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height * nch);
    for p in 0..width * height {
        for ch in &img.channels {
            out.push(quantize(ch.data()[p]));
        }
    }
    Ok(out)
}

pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    decode(&fs::read(path)?)
}

pub fn write_image<T: Scalar>(path: impl AsRef<Path>, img: &Image<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode(img)?)?;
    w.flush()?;
    Ok(())
}

/// Reads a grayscale image; RGB input is rejected.
pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseTensor<T>> {
    let mut img = read_image(path)?;
    if img.channels.len() != 1 {
        return Err(LrdError::format("expected a P5 grayscale image"));
    }
    Ok(img.channels.remove(0))
}

pub fn write_pgm<T: Scalar>(path: impl AsRef<Path>, t: &DenseTensor<T>) -> Result<()> {
    write_image(
        path,
        &Image {
            channels: vec![t.clone()],
        },
    )
}

fn numeric_key(path: &Path) -> (u64, String) {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let digits: String = name
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    (digits.parse().unwrap_or(u64::MAX), name)
}

/// Lists `.ppm`/`.pnm` (or `.pgm`) files of a directory in numeric order.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "pgm" | "pnm"))
        })
        .collect();
    paths.sort_by_key(|p| numeric_key(p));
    Ok(paths)
}

/// Stacks a directory of frames into one `[frames, height, width]` tensor
/// per channel.
pub fn read_frames<T: Scalar>(dir: impl AsRef<Path>) -> Result<Vec<DenseTensor<T>>> {
    let paths = list_frames(&dir)?;
    if paths.is_empty() {
        return Err(LrdError::format(format!(
            "no frames found in {}",
            dir.as_ref().display()
        )));
    }
    let frames = paths.iter().map(read_image::<T>).collect::<Result<Vec<_>>>()?;
    let nch = frames[0].channels.len();
    let (h, w) = (frames[0].height(), frames[0].width());
    if frames
        .iter()
        .any(|f| f.channels.len() != nch || f.height() != h || f.width() != w)
    {
        return Err(LrdError::format("frames differ in size or channel count"));
    }
    (0..nch)
        .map(|c| {
            let mut data = Vec::with_capacity(frames.len() * h * w);
            for f in &frames {
                data.extend_from_slice(f.channels[c].data());
            }
            DenseTensor::new(vec![frames.len(), h, w], data)
        })
        .collect()
}

/// Writes per-channel `[frames, height, width]` tensors as numbered frames.
pub fn write_frames<T: Scalar>(dir: impl AsRef<Path>, channels: &[DenseTensor<T>]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let shape = channels
        .first()
        .ok_or_else(|| LrdError::domain("no channels to write"))?
        .shape()
        .to_vec();
    if shape.len() != 3 || channels.iter().any(|c| c.shape() != shape.as_slice()) {
        return Err(LrdError::domain("frame channels must share a 3-D shape"));
    }
    let (nf, h, w) = (shape[0], shape[1], shape[2]);
    let ext = if channels.len() == 1 { "pgm" } else { "ppm" };
    let mut written = Vec::with_capacity(nf);
    for f in 0..nf {
        let planes = channels
            .iter()
            .map(|c| DenseTensor::new(vec![h, w], c.data()[f * h * w..(f + 1) * h * w].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let path = dir.join(format!("frame_{f:04}.{ext}"));
        write_image(&path, &Image { channels: planes })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_maxval() {
        let mut bytes = b"P5\n# a comment\n3 2\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 102, 153, 204, 255]);
        let img: Image<f64> = decode(&bytes).unwrap();
        assert_eq!(img.channels.len(), 1);
        assert_eq!(img.channels[0].shape(), &[2, 3]);
        assert!((img.channels[0].get(&[1, 0]) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn byte_exact_round_trip() {
        let raster: Vec<u8> = (0..4 * 5 * 3).map(|i| (i * 37 % 256) as u8).collect();
        let mut bytes = b"P6\n5 4\n255\n".to_vec();
        bytes.extend_from_slice(&raster);
        let img: Image<f64> = decode(&bytes).unwrap();
        assert_eq!(img.channels.len(), 3);
        assert_eq!(encode(&img).unwrap(), bytes);
    }

    #[test]
    fn sixteen_bit() {
        let mut bytes = b"P5 1 1 1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        let img: Image<f64> = decode(&bytes).unwrap();
        assert!((img.channels[0].data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode::<f64>(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode::<f64>(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode::<f64>(b"P5\n0 2\n255\n").is_err());
    }

    #[test]
    fn frame_order_is_numeric() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("f10.ppm", 10u8), ("f2.ppm", 2), ("f1.ppm", 1)] {
            let mut b = b"P6\n1 1\n255\n".to_vec();
            b.extend_from_slice(&[v, v, v]);
            fs::write(dir.path().join(name), b).unwrap();
        }
        let ch: Vec<DenseTensor<f64>> = read_frames(dir.path()).unwrap();
        assert_eq!(ch.len(), 3);
        assert_eq!(ch[0].shape(), &[3, 1, 1]);
        let got: Vec<u8> = ch[0].data().iter().map(|&v| quantize(v)).collect();
        assert_eq!(got, vec![1, 2, 10]);
    }
}
