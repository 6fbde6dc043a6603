//! Grayscale image files: 8-bit PGM (P2, P5) and PNG in, P5 PGM out.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Image};

/// Rec. 601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Loads an image scaled to `[0, 1]` on the unit-extent grid `h = 1/m`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    load_image_with(path, None)
}

/// Loads an image; `mesh` overrides the default `h = 1/m`.
pub fn load_image_with(path: impl AsRef<Path>, mesh: Option<f64>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, values) = if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(Error::Format("expected PGM (P2/P5) or PNG data".into()))
    }
    .map_err(|e| e.for_item(path.display().to_string()))?;
    if w == 0 || h == 0 {
        return Err(Error::Format("zero-size image".into()).for_item(path.display().to_string()));
    }
    let side = w.min(h);
    if w != h {
        warn!(
            "{}: {w}×{h} is not square, using the central {side}×{side} crop",
            path.display()
        );
    }
    let (r0, c0) = ((h - side) / 2, (w - side) / 2);
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        out.extend_from_slice(&values[(r0 + r) * w + c0..(r0 + r) * w + c0 + side]);
    }
    let grid = match mesh {
        Some(m) => GridSpec::new(m, side)?,
        None => GridSpec::unit(side)?,
    };
    Image::new(grid, out)
}

fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "png bit depth {:?} (only 8-bit is supported)",
            info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let channels = info.color_type.samples();
    let values = data
        .chunks_exact(channels)
        .map(|px| match channels {
            1 | 2 => px[0] as f64 / 255.0,
            _ => (LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64) / 255.0,
        })
        .collect();
    Ok((w, h, values))
}

/// Splits the PGM header into tokens, skipping `#` comments, and returns the
/// offset just past the single whitespace byte that ends the header.
fn pgm_header(bytes: &[u8]) -> Result<([usize; 3], usize)> {
    let mut fields = [0usize; 3];
    let mut pos = 2;
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Format("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    Ok((fields, pos + 1))
}

fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let ([w, h, maxval], body) = pgm_header(bytes)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!(
            "PGM maxval {maxval} (only 8-bit is supported)"
        )));
    }
    let n = w * h;
    let scale = maxval as f64;
    let raw: Vec<u32> = if bytes[1] == b'5' {
        let data = bytes
            .get(body..body + n)
            .ok_or_else(|| Error::Format("truncated P5 data".into()))?;
        data.iter().map(|&b| b as u32).collect()
    } else {
        let text = std::str::from_utf8(bytes.get(body.min(bytes.len())..).unwrap_or_default())
            .map_err(|_| Error::Format("P2 data is not ASCII".into()))?;
        let vals = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u32>().map_err(|_| Error::Format(format!("bad P2 sample '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(Error::Format("truncated P2 data".into()));
        }
        vals
    };
    if raw.iter().any(|&v| v as usize > maxval) {
        return Err(Error::Format("PGM sample exceeds maxval".into()));
    }
    Ok((w, h, raw.into_iter().map(|v| v as f64 / scale).collect()))
}

/// `round(255·clamp(v, 0, 1))` with halves rounded up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes a binary 8-bit PGM.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = image.side();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let bytes: Vec<u8> = image.values().iter().map(|&v| quantize(v)).collect();
    write!(w, "P5\n{m} {m}\n255\n")
        .and_then(|_| w.write_all(&bytes))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Image files (`.pgm`, `.png`) under `path`, sorted by name; a file path is
/// returned as is.
pub fn list_images(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "png")) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::domain(format!("no .pgm or .png files in {}", path.display())));
    }
    Ok(files)
}

/// Loads every image under `path` in name order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, Image)>> {
    list_images(path)?
        .into_iter()
        .map(|p| load_image(&p).map(|img| (p, img)))
        .collect()
}
