//! Binary PPM (P6) and PGM (P5) images, maxval 255.
//!
//! A view is stored as a PPM for its colors and a PGM for its mask; mask
//! samples of 128 and above are foreground.

use std::fs;
use std::path::Path;

use crate::sampling::ViewImage;
use crate::volumes::Rgb;
use crate::{Error, Result};

/// Maps a `[0, 1]` channel value to the nearest 8-bit level.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[Rgb]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(rgb.len() * 3);
    for c in rgb {
        out.extend(c.iter().map(|&v| quantize(v)));
    }
    out
}

pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

struct Header {
    width: usize,
    height: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2], format: &'static str) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format(format, "bad magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and comments before each field.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(format, "truncated header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(format, "header value out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(format, "missing separator after header"));
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(format, format!("maxval {maxval} unsupported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format, "zero image size"));
    }
    Ok(Header {
        width,
        height,
        offset: pos + 1,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<Rgb>)> {
    let h = parse_header(bytes, b"P6", "PPM")?;
    let payload = &bytes[h.offset..];
    if payload.len() != h.width * h.height * 3 {
        return Err(Error::format("PPM", "payload size mismatch"));
    }
    let rgb = payload
        .chunks_exact(3)
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    Ok((h.width, h.height, rgb))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let h = parse_header(bytes, b"P5", "PGM")?;
    let payload = &bytes[h.offset..];
    if payload.len() != h.width * h.height {
        return Err(Error::format("PGM", "payload size mismatch"));
    }
    Ok((h.width, h.height, payload.to_vec()))
}

pub fn mask_samples(mask: &[bool]) -> Vec<u8> {
    mask.iter().map(|&m| if m { 255 } else { 0 }).collect()
}

pub fn save_view(view: &ViewImage, ppm: impl AsRef<Path>, pgm: impl AsRef<Path>) -> Result<()> {
    let (ppm, pgm) = (ppm.as_ref(), pgm.as_ref());
    fs::write(ppm, encode_ppm(view.width(), view.height(), view.rgb()))
        .map_err(|e| Error::from(e).in_file(ppm))?;
    fs::write(
        pgm,
        encode_pgm(view.width(), view.height(), &mask_samples(view.mask())),
    )
    .map_err(|e| Error::from(e).in_file(pgm))
}

pub fn load_view(ppm: impl AsRef<Path>, pgm: impl AsRef<Path>) -> Result<ViewImage> {
    let (ppm, pgm) = (ppm.as_ref(), pgm.as_ref());
    let bytes = fs::read(ppm).map_err(|e| Error::from(e).in_file(ppm))?;
    let (w, h, rgb) = decode_ppm(&bytes).map_err(|e| e.in_file(ppm))?;
    let bytes = fs::read(pgm).map_err(|e| Error::from(e).in_file(pgm))?;
    let (mw, mh, samples) = decode_pgm(&bytes).map_err(|e| e.in_file(pgm))?;
    if (mw, mh) != (w, h) {
        return Err(Error::ImageSize {
            expected_w: w,
            expected_h: h,
            found_w: mw,
            found_h: mh,
        }
        .in_file(pgm));
    }
    let mask = samples.iter().map(|&s| s >= 128).collect();
    ViewImage::new(w, h, rgb, mask)
}

/// Quantizes a view to 8 bits per channel, exactly as a PPM round trip does.
pub fn quantize_view(view: &ViewImage) -> ViewImage {
    let rgb = view
        .rgb()
        .iter()
        .map(|c| c.map(|v| quantize(v) as f64 / 255.0))
        .collect();
    ViewImage::new(view.width(), view.height(), rgb, view.mask().to_vec()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_quantizes() {
        let rgb = vec![[0.0, 0.5, 1.0], [0.2, 0.4, 0.6]];
        let bytes = encode_ppm(2, 1, &rgb);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        let (w, h, back) = decode_ppm(&bytes).unwrap();
        assert_eq!((w, h), (2, 1));
        for (a, b) in rgb.iter().flatten().zip(back.iter().flatten()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# a comment\n3 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255]);
        let (w, h, samples) = decode_pgm(&bytes).unwrap();
        assert_eq!((w, h, samples), (3, 1, vec![0, 128, 255]));
    }

    #[test]
    fn rejects_wrong_maxval_and_size() {
        assert!(decode_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\0\0\0").is_err());
        assert!(decode_ppm(b"P5\n1 1\n255\n\0").is_err());
    }
}
