//! PFM (32-bit float, bottom-up rows) and 16-bit millimeter PGM readers and
//! writers, one image per file.

use std::io::Write;
use std::path::Path;

use crate::NoiseError;

fn io_err(path: &Path, source: std::io::Error) -> NoiseError {
    NoiseError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> NoiseError {
    NoiseError::Parse { path: path.display().to_string(), offset, message: message.into() }
}

/// Whitespace-separated ASCII token scanner that reports byte offsets and
/// skips `#` comment lines.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_space_and_comments(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn token(&mut self) -> Option<(usize, &'a str)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.bytes[start..self.pos]).ok().map(|s| (start, s))
        }
    }

    /// One whitespace byte separates the header from binary data.
    fn skip_single_space(&mut self) {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
}

/// Write a single grayscale PFM ("Pf", negative scale = little-endian,
/// bottom-up rows, 32-bit floats).
pub fn write_pfm(path: &Path, data: &[f64], height: usize, width: usize) -> Result<(), NoiseError> {
    assert_eq!(data.len(), height * width);
    let mut buf = Vec::with_capacity(32 + data.len() * 4);
    write!(buf, "Pf\n{width} {height}\n-1.0\n").expect("write to vec");
    for y in (0..height).rev() {
        for x in 0..width {
            buf.extend_from_slice(&(data[y * width + x] as f32).to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Read a grayscale PFM; color "PF" files are rejected. Returns (data,
/// height, width) with rows flipped back to top-down order.
pub fn read_pfm(path: &Path) -> Result<(Vec<f64>, usize, usize), NoiseError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cur = Cursor::new(&bytes);

    let (off, magic) = cur.token().ok_or_else(|| parse_err(path, 0, "missing magic"))?;
    match magic {
        "Pf" => {}
        "PF" => return Err(parse_err(path, off, "color PFM (PF) not supported, expected grayscale Pf")),
        other => return Err(parse_err(path, off, format!("bad magic '{other}', expected Pf"))),
    }
    let (off_w, w_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing width"))?;
    let width: usize = w_tok.parse().map_err(|_| parse_err(path, off_w, "bad width"))?;
    let (off_h, h_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing height"))?;
    let height: usize = h_tok.parse().map_err(|_| parse_err(path, off_h, "bad height"))?;
    let (off_s, s_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing scale"))?;
    let scale: f64 = s_tok.parse().map_err(|_| parse_err(path, off_s, "bad scale"))?;
    let little_endian = scale < 0.0;
    cur.skip_single_space();

    let need = width * height * 4;
    if bytes.len() - cur.pos < need {
        return Err(parse_err(path, cur.pos, format!("expected {need} data bytes, found {}", bytes.len() - cur.pos)));
    }
    let raw = &bytes[cur.pos..cur.pos + need];
    let mut data = vec![0.0f64; width * height];
    for y in 0..height {
        for x in 0..width {
            let i = (y * width + x) * 4;
            let quad = [raw[i], raw[i + 1], raw[i + 2], raw[i + 3]];
            let v = if little_endian { f32::from_le_bytes(quad) } else { f32::from_be_bytes(quad) };
            // PFM rows are bottom-up
            data[(height - 1 - y) * width + x] = v as f64;
        }
    }
    Ok((data, height, width))
}

/// Write a 16-bit binary PGM storing depth in millimeters (big-endian,
/// top-down rows). Values clamp to the u16 range; invalid depth writes 0.
pub fn write_pgm(path: &Path, data: &[f64], height: usize, width: usize) -> Result<(), NoiseError> {
    assert_eq!(data.len(), height * width);
    let mut buf = Vec::with_capacity(48 + data.len() * 2);
    write!(buf, "P5\n# depth in millimeters\n{width} {height}\n65535\n").expect("write to vec");
    for &v in data {
        let mm = (v * 1000.0).round().clamp(0.0, 65535.0) as u16;
        buf.extend_from_slice(&mm.to_be_bytes());
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Read a 16-bit millimeter PGM back into meters.
pub fn read_pgm(path: &Path) -> Result<(Vec<f64>, usize, usize), NoiseError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cur = Cursor::new(&bytes);

    let (off, magic) = cur.token().ok_or_else(|| parse_err(path, 0, "missing magic"))?;
    if magic != "P5" {
        return Err(parse_err(path, off, format!("bad magic '{magic}', expected P5")));
    }
    let (off_w, w_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing width"))?;
    let width: usize = w_tok.parse().map_err(|_| parse_err(path, off_w, "bad width"))?;
    let (off_h, h_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing height"))?;
    let height: usize = h_tok.parse().map_err(|_| parse_err(path, off_h, "bad height"))?;
    let (off_m, m_tok) = cur.token().ok_or_else(|| parse_err(path, cur.pos, "missing maxval"))?;
    let maxval: u32 = m_tok.parse().map_err(|_| parse_err(path, off_m, "bad maxval"))?;
    if maxval != 65535 {
        return Err(parse_err(path, off_m, format!("maxval {maxval}, expected 65535 (16-bit millimeters)")));
    }
    cur.skip_single_space();

    let need = width * height * 2;
    if bytes.len() - cur.pos < need {
        return Err(parse_err(path, cur.pos, format!("expected {need} data bytes, found {}", bytes.len() - cur.pos)));
    }
    let raw = &bytes[cur.pos..cur.pos + need];
    let data = raw
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 1000.0)
        .collect();
    Ok((data, height, width))
}
