//! Writes a label mask as an 8-bit BMP, reads it back, and shows how strict
//! decoding treats an off-palette gray level.

use fundus_eval::bmp::{self, DecodeOptions};
use fundus_eval::synth::{render_mask, EllipseParams};
use fundus_eval::PixelLabel;

fn main() -> anyhow::Result<()> {
    let disc = EllipseParams { cx: 32.0, cy: 30.0, semi_h: 18.0, semi_v: 20.0, theta: 0.2 };
    let cup = EllipseParams { cx: 33.0, cy: 29.0, semi_h: 8.0, semi_v: 10.0, theta: 0.0 };
    let mask = render_mask(&disc, &cup, 64, 60);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("mask.bmp");
    bmp::write_mask(&path, &mask)?;
    let back = bmp::read_mask(&path, DecodeOptions::STRICT)?;
    assert_eq!(back, mask);
    println!(
        "{}x{} mask, {} bytes on disk, cup {} px, rim {} px",
        mask.width(),
        mask.height(),
        std::fs::metadata(&path)?.len(),
        mask.count(PixelLabel::Cup),
        mask.count(PixelLabel::Disc),
    );

    // overwrite the first stored pixel (bottom-left) with gray 127
    let mut bytes = bmp::encode_mask(&mask);
    let offset = u32::from_le_bytes(bytes[10..14].try_into()?) as usize;
    bytes[offset] = 127;
    let lenient = bmp::decode_mask(&bytes, DecodeOptions::default())?;
    println!("lenient decode maps 127 to {:?}", lenient.get(0, mask.height() - 1));
    match bmp::decode_mask(&bytes, DecodeOptions::STRICT) {
        Err(e) => println!("strict decode: {e}"),
        Ok(_) => anyhow::bail!("strict decode accepted gray 127"),
    }
    Ok(())
}
