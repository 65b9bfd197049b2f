//! Grayscale BMP codec for label masks.
//!
//! Output is always an uncompressed 8-bit palettized file: a 14-byte file
//! header, a 40-byte `BITMAPINFOHEADER`, a 256-entry identity gray palette
//! and bottom-up rows padded to 4 bytes. Input additionally accepts top-down
//! files, shorter gray palettes, larger info headers and 24-bit files whose
//! pixels have equal channels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::{LabelMask, PixelLabel};

const FILE_HEADER_LEN: usize = 14;
const INFO_HEADER_LEN: usize = 40;
const PALETTE_LEN: usize = 256 * 4;
const PIXELS_PER_METER: i32 = 2835;

/// Decoder options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Reject gray values other than 0, 128 and 255 instead of snapping them
    /// to the nearest label.
    pub strict: bool,
}

impl DecodeOptions {
    pub const STRICT: DecodeOptions = DecodeOptions { strict: true };
}

/// Bytes per stored row, padded to a multiple of four.
#[inline]
pub fn row_stride(width: u32, bits_per_pixel: u16) -> usize {
    (width as usize * bits_per_pixel as usize).div_ceil(32) * 4
}

/// Size in bytes of the file [`encode_mask`] produces for the given dimensions.
pub fn encoded_len(width: u32, height: u32) -> usize {
    FILE_HEADER_LEN + INFO_HEADER_LEN + PALETTE_LEN + row_stride(width, 8) * height as usize
}

/// Encodes a mask as an 8-bit palettized grayscale BMP.
pub fn encode_mask(mask: &LabelMask) -> Vec<u8> {
    let (width, height) = mask.dimensions();
    let stride = row_stride(width, 8);
    let image_len = stride * height as usize;
    let data_offset = FILE_HEADER_LEN + INFO_HEADER_LEN + PALETTE_LEN;
    let total = data_offset + image_len;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(data_offset as u32).to_le_bytes());

    out.extend_from_slice(&(INFO_HEADER_LEN as u32).to_le_bytes());
    out.extend_from_slice(&(width as i32).to_le_bytes());
    out.extend_from_slice(&(height as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&8u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // BI_RGB
    out.extend_from_slice(&(image_len as u32).to_le_bytes());
    out.extend_from_slice(&PIXELS_PER_METER.to_le_bytes());
    out.extend_from_slice(&PIXELS_PER_METER.to_le_bytes());
    out.extend_from_slice(&256u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());

    for i in 0..=255u8 {
        out.extend_from_slice(&[i, i, i, 0]);
    }

    let pad = stride - width as usize;
    for row in mask.rows().rev() {
        out.extend(row.iter().map(|l| l.gray()));
        out.extend(std::iter::repeat_n(0u8, pad));
    }
    debug_assert_eq!(out.len(), total);
    out
}

/// Decodes a grayscale BMP into a label mask, top row first.
pub fn decode_mask(bytes: &[u8], opts: DecodeOptions) -> Result<LabelMask> {
    let header = Header::parse(bytes)?;
    let width = header.width;
    let height = header.height;
    let stride = row_stride(width, header.bits_per_pixel);

    // Gray level of each possible 8-bit pixel value; `None` marks indices
    // past the end of the palette.
    let palette_lut: Option<[Option<u8>; 256]> = match header.bits_per_pixel {
        8 => {
            let palette = header.gray_palette(bytes)?;
            let mut lut = [None; 256];
            for (slot, &g) in lut.iter_mut().zip(&palette) {
                *slot = Some(g);
            }
            Some(lut)
        }
        _ => None,
    };

    let mut labels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height as usize {
        let file_row = if header.top_down {
            y
        } else {
            height as usize - 1 - y
        };
        let start = header.data_offset + file_row * stride;
        let row = &bytes[start..start + stride];
        for x in 0..width as usize {
            let g = match &palette_lut {
                Some(lut) => lut[row[x] as usize].ok_or_else(|| {
                    Error::MalformedHeader(format!(
                        "pixel index {} outside the palette",
                        row[x]
                    ))
                })?,
                None => {
                    let px = &row[3 * x..3 * x + 3];
                    if px[0] != px[1] || px[1] != px[2] {
                        return Err(Error::UnsupportedEncoding(format!(
                            "24-bit pixel with unequal channels (b={}, g={}, r={})",
                            px[0], px[1], px[2]
                        )));
                    }
                    px[0]
                }
            };
            let label = if opts.strict {
                PixelLabel::from_gray_exact(g).ok_or(Error::StrictValueViolation {
                    x: x as u32,
                    y: y as u32,
                    value: g,
                })?
            } else {
                PixelLabel::from_gray_nearest(g)
            };
            labels.push(label);
        }
    }
    LabelMask::from_labels(width, height, labels)
}

pub fn read_mask(path: impl AsRef<Path>, opts: DecodeOptions) -> Result<LabelMask> {
    decode_mask(&fs::read(path)?, opts)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &LabelMask) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

struct Header {
    data_offset: usize,
    info_len: usize,
    width: u32,
    height: u32,
    top_down: bool,
    bits_per_pixel: u16,
    colors_used: u32,
}

#[inline]
fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

#[inline]
fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

impl Header {
    fn parse(b: &[u8]) -> Result<Self> {
        let malformed = |m: String| Err(Error::MalformedHeader(m));
        if b.len() < FILE_HEADER_LEN + INFO_HEADER_LEN {
            return malformed(format!("file is only {} bytes", b.len()));
        }
        if &b[0..2] != b"BM" {
            return malformed("missing BM signature".into());
        }
        let declared_len = u32_at(b, 2) as usize;
        // Some writers leave the size field zeroed.
        if declared_len != 0 && declared_len > b.len() {
            return malformed(format!(
                "declared file size {declared_len} exceeds actual size {}",
                b.len()
            ));
        }
        let data_offset = u32_at(b, 10) as usize;
        let info_len = u32_at(b, 14) as usize;
        if info_len < INFO_HEADER_LEN {
            return Err(Error::UnsupportedEncoding(format!(
                "info header of {info_len} bytes (need at least {INFO_HEADER_LEN})"
            )));
        }
        if FILE_HEADER_LEN + info_len > b.len() {
            return malformed(format!("info header of {info_len} bytes is truncated"));
        }
        let raw_width = u32_at(b, 18) as i32;
        let raw_height = u32_at(b, 22) as i32;
        if raw_width <= 0 || raw_height == 0 || raw_height == i32::MIN {
            return malformed(format!("invalid dimensions {raw_width}x{raw_height}"));
        }
        if u16_at(b, 26) != 1 {
            return malformed(format!("plane count {}", u16_at(b, 26)));
        }
        let bits_per_pixel = u16_at(b, 28);
        let compression = u32_at(b, 30);
        if compression != 0 {
            return Err(Error::UnsupportedEncoding(format!(
                "compression method {compression}"
            )));
        }
        if bits_per_pixel != 8 && bits_per_pixel != 24 {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits_per_pixel} bits per pixel"
            )));
        }
        let colors_used = u32_at(b, 46);
        let width = raw_width as u32;
        let height = raw_height.unsigned_abs();
        let header_end = FILE_HEADER_LEN + info_len;
        if data_offset < header_end {
            return malformed(format!(
                "pixel data offset {data_offset} overlaps the headers"
            ));
        }
        let needed = row_stride(width, bits_per_pixel)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_add(data_offset));
        match needed {
            Some(n) if n <= b.len() => {}
            _ => {
                return malformed(format!(
                    "pixel data for {width}x{height} at offset {data_offset} exceeds file size {}",
                    b.len()
                ))
            }
        }
        Ok(Self {
            data_offset,
            info_len,
            width,
            height,
            top_down: raw_height < 0,
            bits_per_pixel,
            colors_used,
        })
    }

    /// Gray level of every palette entry. Entries with unequal channels are
    /// rejected.
    fn gray_palette(&self, b: &[u8]) -> Result<Vec<u8>> {
        let start = FILE_HEADER_LEN + self.info_len;
        let entries = match self.colors_used {
            0 => 256,
            n if n <= 256 => n as usize,
            n => {
                return Err(Error::MalformedHeader(format!(
                    "{n} palette entries for an 8-bit image"
                )))
            }
        };
        if start + entries * 4 > self.data_offset {
            return Err(Error::MalformedHeader(format!(
                "{entries}-entry palette overlaps pixel data"
            )));
        }
        b[start..start + entries * 4]
            .chunks_exact(4)
            .enumerate()
            .map(|(i, e)| {
                if e[0] == e[1] && e[1] == e[2] {
                    Ok(e[0])
                } else {
                    Err(Error::UnsupportedEncoding(format!(
                        "palette entry {i} is not gray (b={}, g={}, r={})",
                        e[0], e[1], e[2]
                    )))
                }
            })
            .collect()
    }
}
