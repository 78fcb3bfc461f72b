//! Binary PGM (`P5`, maxval 255). Pixel bytes are kept verbatim, so a file
//! written by [`encode_pgm`] decodes and re-encodes to identical bytes.

use std::path::Path;

use super::{Mask, SpatialError};

pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend_from_slice(mask.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Mask, SpatialError> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // whitespace and comments between header tokens
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(SpatialError::Pgm("truncated header".into()));
        }
        tokens.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| SpatialError::Pgm("non-ascii header".into()))?,
        );
    }
    if tokens[0] != "P5" {
        return Err(SpatialError::Pgm(format!(
            "unsupported magic `{}`",
            tokens[0]
        )));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| SpatialError::Pgm(format!("bad {what} `{s}`")))
    };
    let width = parse(tokens[1], "width")?;
    let height = parse(tokens[2], "height")?;
    let maxval = parse(tokens[3], "maxval")?;
    if maxval != 255 {
        return Err(SpatialError::Pgm(format!(
            "maxval {maxval} unsupported, expected 255"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(SpatialError::Pgm("missing raster".into()));
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() != width * height {
        return Err(SpatialError::Pgm(format!(
            "expected {} raster bytes, found {}",
            width * height,
            raster.len()
        )));
    }
    Mask::new(width, height, raster.to_vec())
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Mask, SpatialError> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, mask: &Mask) -> Result<(), SpatialError> {
    std::fs::write(path, encode_pgm(mask))?;
    Ok(())
}
