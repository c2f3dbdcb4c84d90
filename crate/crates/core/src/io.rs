//! On-disk formats: OAMF1 complex fields, OAMI1 raw intensity images and
//! 16-bit PGM renderings.
//!
//! Both binary formats start with a magic line, then `key = value` header
//! lines, a blank line and little-endian f64 samples in row-major order
//! (row 0 at the most negative y). Floats in headers are written with Rust's
//! shortest round-trip formatting, so a read after a write is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{make_grid, ComplexField, GridSpec, IntensityImage};

pub const FIELD_MAGIC: &[u8] = b"OAMF1\n";
pub const IMAGE_MAGIC: &[u8] = b"OAMI1\n";

fn fmt_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, msg: msg.into() }
}

struct Header {
    n: usize,
    extent_mm: f64,
    wavelength_nm: Option<f64>,
    /// Byte offset of the first sample.
    body: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8], keys: &[&str]) -> Result<Header> {
    if !bytes.starts_with(magic) {
        let bad = bytes.iter().zip(magic).position(|(a, b)| a != b).unwrap_or(bytes.len().min(magic.len()));
        return Err(fmt_err(bad, format!("expected magic {:?}", String::from_utf8_lossy(magic).trim_end())));
    }
    let mut pos = magic.len();
    let (mut n, mut extent, mut wl) = (None, None, None);
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fmt_err(bytes.len(), "header ends before the blank line"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| fmt_err(pos, "header is not UTF-8"))?;
        let start = pos;
        pos += end + 1;
        if line.is_empty() {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| fmt_err(start, format!("expected `key = value`, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !keys.contains(&k) {
            return Err(fmt_err(start, format!("unknown header key {k:?}")));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|_| fmt_err(start, format!("bad number {v:?} for {k}")));
        let slot = match k {
            "n" => {
                n = Some(v.parse::<usize>().map_err(|_| fmt_err(start, format!("bad grid size {v:?}")))?);
                continue;
            }
            "extent_mm" => &mut extent,
            _ => &mut wl,
        };
        if slot.replace(num(v)?).is_some() {
            return Err(fmt_err(start, format!("duplicate header key {k:?}")));
        }
    }
    let missing = |k: &str| fmt_err(pos, format!("header lacks {k}"));
    let n = n.ok_or_else(|| missing("n"))?;
    let extent_mm = extent.ok_or_else(|| missing("extent_mm"))?;
    if keys.contains(&"wavelength_nm") && wl.is_none() {
        return Err(missing("wavelength_nm"));
    }
    Ok(Header { n, extent_mm, wavelength_nm: wl, body: pos })
}

fn grid_of(h: &Header) -> Result<GridSpec> {
    make_grid(h.n, h.extent_mm).map_err(|e| fmt_err(0, format!("header describes no valid grid: {e}")))
}

fn check_len(bytes: &[u8], h: &Header, per_sample: usize) -> Result<()> {
    let want = h
        .n
        .checked_mul(h.n)
        .and_then(|c| c.checked_mul(per_sample))
        .ok_or_else(|| fmt_err(0, "grid size overflows"))?;
    let got = bytes.len() - h.body;
    if got != want {
        let at = h.body + got.min(want);
        return Err(fmt_err(at, format!("payload holds {got} bytes, header implies {want}")));
    }
    Ok(())
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

pub fn encode_field(f: &ComplexField) -> Vec<u8> {
    let g = f.grid();
    let mut out = FIELD_MAGIC.to_vec();
    out.extend(format!("n = {}\nextent_mm = {}\nwavelength_nm = {}\n\n", g.n(), g.extent_mm(), f.wavelength_nm()).bytes());
    out.reserve(16 * g.len());
    for a in f.amp() {
        out.extend(a.re.to_le_bytes());
        out.extend(a.im.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ComplexField> {
    let h = parse_header(bytes, FIELD_MAGIC, &["n", "extent_mm", "wavelength_nm"])?;
    let grid = grid_of(&h)?;
    check_len(bytes, &h, 16)?;
    let amp = (0..grid.len())
        .map(|k| {
            let at = h.body + 16 * k;
            Complex64::new(f64_at(bytes, at), f64_at(bytes, at + 8))
        })
        .collect();
    let wl = h.wavelength_nm.unwrap();
    ComplexField::new(grid, wl, amp).map_err(|e| fmt_err(h.body, format!("payload rejected: {e}")))
}

pub fn write_field(f: &ComplexField, path: &Path) -> Result<()> {
    Ok(fs::write(path, encode_field(f))?)
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    decode_field(&fs::read(path)?)
}

pub fn encode_image(img: &IntensityImage) -> Vec<u8> {
    let g = img.grid();
    let mut out = IMAGE_MAGIC.to_vec();
    out.extend(format!("n = {}\nextent_mm = {}\n\n", g.n(), g.extent_mm()).bytes());
    for v in img.vals() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<IntensityImage> {
    let h = parse_header(bytes, IMAGE_MAGIC, &["n", "extent_mm"])?;
    let grid = grid_of(&h)?;
    check_len(bytes, &h, 8)?;
    let vals = (0..grid.len()).map(|k| f64_at(bytes, h.body + 8 * k)).collect();
    IntensityImage::new(grid, vals).map_err(|e| fmt_err(h.body, format!("payload rejected: {e}")))
}

pub fn write_image(img: &IntensityImage, path: &Path) -> Result<()> {
    Ok(fs::write(path, encode_image(img))?)
}

pub fn read_image(path: &Path) -> Result<IntensityImage> {
    decode_image(&fs::read(path)?)
}

/// 16-bit binary PGM, +y up, linearly scaled so the maximum maps to 65535.
///
/// The comment `# scale <s>` gives intensity per count; it is `0` for a dark image.
pub fn encode_pgm(img: &IntensityImage) -> Vec<u8> {
    let n = img.grid().n();
    let max = img.max();
    let scale = if max > 0.0 { max / 65535.0 } else { 0.0 };
    let mut out = Vec::with_capacity(2 * n * n + 64);
    write!(out, "P5\n# scale {scale}\n{n} {n}\n65535\n").unwrap();
    for j in (0..n).rev() {
        for i in 0..n {
            let c = if scale > 0.0 { (img.at(i, j) / scale).round().clamp(0.0, 65535.0) as u16 } else { 0 };
            out.extend(c.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(img: &IntensityImage, path: &Path) -> Result<()> {
    Ok(fs::write(path, encode_pgm(img))?)
}

/// Counts (top row first) and the scale comment of a 16-bit PGM written by `encode_pgm`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub scale: Option<f64>,
    pub counts: Vec<u16>,
}

impl Pgm {
    /// Back to intensities on a grid of `extent_mm`, undoing the row flip.
    pub fn to_image(&self, extent_mm: f64) -> Result<IntensityImage> {
        if self.width != self.height {
            return Err(Error::invalid(format!("image is {}x{}, grids are square", self.width, self.height)));
        }
        let n = self.width;
        let s = self.scale.unwrap_or(1.0);
        let vals = (0..n * n).map(|k| self.counts[(n - 1 - k / n) * n + k % n] as f64 * s).collect();
        IntensityImage::new(make_grid(n, extent_mm)?, vals)
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    let mut scale = None;
    let mut tokens = Vec::new();
    // magic, width, height, maxval; comments may sit between them
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(fmt_err(pos, "PGM header is truncated"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let text = String::from_utf8_lossy(&bytes[pos + 1..end]);
            if let Some(v) = text.trim().strip_prefix("scale") {
                scale = Some(v.trim().parse::<f64>().map_err(|_| fmt_err(pos, "bad scale comment"))?);
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    if tokens[0].1 != "P5" {
        return Err(fmt_err(0, "not a binary PGM"));
    }
    let num = |k: usize| tokens[k].1.parse::<usize>().map_err(|_| fmt_err(tokens[k].0, "bad PGM header number"));
    let (width, height, maxval) = (num(1)?, num(2)?, num(3)?);
    if maxval != 65535 {
        return Err(fmt_err(tokens[3].0, format!("expected a 16-bit PGM, maxval is {maxval}")));
    }
    pos += 1; // single whitespace byte before the raster
    let want = 2 * width * height;
    if bytes.len() < pos || bytes.len() - pos != want {
        return Err(fmt_err(bytes.len(), format!("raster holds {} bytes, header implies {want}", bytes.len().saturating_sub(pos))));
    }
    let counts = bytes[pos..].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(Pgm { width, height, scale, counts })
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    decode_pgm(&fs::read(path)?)
}

/// Intensity image from any of the three formats, told apart by their magic.
///
/// PGM carries no grid size, so `pgm_extent_mm` supplies it.
pub fn load_image(path: &Path, pgm_extent_mm: f64) -> Result<IntensityImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(FIELD_MAGIC) {
        Ok(crate::field::to_intensity(&decode_field(&bytes)?))
    } else if bytes.starts_with(IMAGE_MAGIC) {
        decode_image(&bytes)
    } else {
        decode_pgm(&bytes)?.to_image(pgm_extent_mm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::to_intensity;
    use crate::sources::{lg_mode, BeamSpec};

    fn field() -> ComplexField {
        lg_mode(make_grid(32, 4.7).unwrap(), BeamSpec::new(0.9, 776.0, -2)).unwrap()
    }

    fn same_bits(a: &ComplexField, b: &ComplexField) -> bool {
        a.grid().extent_mm().to_bits() == b.grid().extent_mm().to_bits()
            && a.wavelength_nm().to_bits() == b.wavelength_nm().to_bits()
            && a.amp().iter().zip(b.amp()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        let f = field();
        let back = decode_field(&encode_field(&f)).unwrap();
        assert!(same_bits(&f, &back));
        let odd = ComplexField::new(make_grid(16, 0.1 + 0.2).unwrap(), 1.0 / 3.0, vec![Complex64::new(-0.0, 1e-310); 256]).unwrap();
        assert!(same_bits(&odd, &decode_field(&encode_field(&odd)).unwrap()));
    }

    #[test]
    fn truncated_and_mismatched_fields() {
        let b = encode_field(&field());
        assert!(matches!(decode_field(&b[..b.len() - 3]), Err(Error::Format { .. })));
        assert!(matches!(decode_field(&b[..20]), Err(Error::Format { .. })));
        let text = String::from_utf8_lossy(&b[..40]).replace("n = 32", "n = 34");
        let mut bad = text.into_bytes();
        bad.extend(&b[40..]);
        match decode_field(&bad) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode_field(b"OAMF2\n"), Err(Error::Format { offset: 4, .. })));
        let dup = b"OAMF1\nn = 1\nn = 1\nextent_mm = 1\nwavelength_nm = 1\n\n";
        assert!(decode_field(dup).is_err());
    }

    #[test]
    fn image_round_trip() {
        let img = to_intensity(&field());
        let back = decode_image(&encode_image(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_scaling_and_flip() {
        let g = make_grid(16, 1.0).unwrap();
        let mut v = vec![0.0; 256];
        v[1] = 0.5;
        v[255] = 2.0;
        let img = IntensityImage::new(g, v).unwrap();
        let p = decode_pgm(&encode_pgm(&img)).unwrap();
        // row 0 of the grid is the bottom row of the picture
        assert_eq!(p.counts[15 * 16 + 1], 16384);
        assert_eq!(p.counts[15], 65535);
        assert_eq!(p.scale, Some(2.0 / 65535.0));
        let back = p.to_image(1.0).unwrap();
        for (a, b) in back.vals().iter().zip(img.vals()) {
            assert!((a - b).abs() <= 2.0 / 65535.0);
        }
        let dark = encode_pgm(&IntensityImage::new(g, vec![0.0; 256]).unwrap());
        assert!(String::from_utf8_lossy(&dark).contains("# scale 0\n"));
        assert!(decode_pgm(&dark).unwrap().counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn pgm_relative_intensities_within_quantization() {
        let img = to_intensity(&field());
        let p = decode_pgm(&encode_pgm(&img)).unwrap();
        let back = p.to_image(4.7).unwrap();
        let m = img.max();
        for (a, b) in back.vals().iter().zip(img.vals()) {
            assert!((a / m - b / m).abs() <= 1.0 / 65535.0);
        }
    }
}
