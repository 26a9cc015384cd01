//! Deterministic synthetic digit corpus.
//!
//! Ten 8x8 glyph bitmaps are upscaled to 32x32, randomly shifted by up to
//! two pixels, drawn at a randomized ink intensity, and overlaid with
//! per-pixel Gaussian noise. Every random choice comes from the provided
//! counter-based stream, so a corpus is a pure function of `(seed, stream,
//! n)` — two machines produce byte-identical files. The 32-pixel side is
//! divisible by 1, 2, 4, and 8, so the standard downsampling factors apply
//! cleanly.

use crate::data::idx::IdxImageSet;
use crate::ndnum::RngStream;

/// Output image side length.
pub const DIGIT_SIDE: usize = 32;

const GLYPH_SIDE: usize = 8;
const SCALE: usize = DIGIT_SIDE / GLYPH_SIDE;
const MAX_SHIFT: i32 = 2;
const NOISE_STD: f64 = 10.0;

/// 8x8 glyph bitmaps, one row byte per glyph row, most significant bit is
/// the leftmost column.
#[rustfmt::skip]
const GLYPHS: [[u8; 8]; 10] = [
    [0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00], // 0
    [0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00], // 1
    [0x3C, 0x66, 0x06, 0x0C, 0x18, 0x30, 0x7E, 0x00], // 2
    [0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00], // 3
    [0x0C, 0x1C, 0x3C, 0x6C, 0x7E, 0x0C, 0x0C, 0x00], // 4
    [0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00], // 5
    [0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00], // 6
    [0x7E, 0x06, 0x0C, 0x18, 0x30, 0x30, 0x30, 0x00], // 7
    [0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00], // 8
    [0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00], // 9
];

/// Generate `n` labeled digit images. Labels cycle `0..=9` so every class
/// appears within any window of ten images.
pub fn generate_digit_corpus(n: usize, stream: &mut RngStream) -> (IdxImageSet, Vec<u8>) {
    let mut pixels = Vec::with_capacity(n * DIGIT_SIDE * DIGIT_SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        labels.push(label);
        render_digit(label, stream, &mut pixels);
    }
    let images = IdxImageSet::new(n, DIGIT_SIDE, DIGIT_SIDE, pixels)
        .expect("rendered pixel count matches the declared shape");
    (images, labels)
}

/// Render one digit into `out` (appends `DIGIT_SIDE^2` bytes). Per image
/// the stream is consumed in a fixed order: ink intensity, horizontal
/// shift, vertical shift, then one Gaussian per pixel.
fn render_digit(label: u8, stream: &mut RngStream, out: &mut Vec<u8>) {
    let glyph = &GLYPHS[label as usize];
    let ink = stream.next_range(200.0, 255.0);
    let dx = stream.next_index(2 * MAX_SHIFT as usize + 1) as i32 - MAX_SHIFT;
    let dy = stream.next_index(2 * MAX_SHIFT as usize + 1) as i32 - MAX_SHIFT;
    for r in 0..DIGIT_SIDE as i32 {
        for c in 0..DIGIT_SIDE as i32 {
            // Source position before the shift; off-canvas samples are
            // background.
            let sr = r - dy;
            let sc = c - dx;
            let lit = sr >= 0
                && sc >= 0
                && (sr as usize) < DIGIT_SIDE
                && (sc as usize) < DIGIT_SIDE
                && glyph_bit(glyph, sr as usize / SCALE, sc as usize / SCALE);
            let base = if lit { ink } else { 0.0 };
            let value = base + stream.next_gaussian(0.0, NOISE_STD);
            out.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
}

fn glyph_bit(glyph: &[u8; 8], row: usize, col: usize) -> bool {
    (glyph[row] >> (GLYPH_SIDE - 1 - col)) & 1 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_in_the_stream() {
        let (imgs_a, labels_a) = generate_digit_corpus(30, &mut RngStream::new(9, 2));
        let (imgs_b, labels_b) = generate_digit_corpus(30, &mut RngStream::new(9, 2));
        assert_eq!(imgs_a, imgs_b);
        assert_eq!(labels_a, labels_b);
    }

    #[test]
    fn labels_cycle_through_all_classes() {
        let (_, labels) = generate_digit_corpus(25, &mut RngStream::new(1, 2));
        assert_eq!(&labels[..10], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(labels[10], 0);
        assert_eq!(labels[24], 4);
    }

    #[test]
    fn images_have_ink_and_background_contrast() {
        let (imgs, _) = generate_digit_corpus(10, &mut RngStream::new(3, 2));
        for i in 0..10 {
            let img = imgs.image(i);
            let bright = img.iter().filter(|&&p| p > 150).count();
            let dark = img.iter().filter(|&&p| p < 60).count();
            // Glyphs cover roughly 15-40% of the canvas; the rest is
            // near-black background.
            assert!(bright > 100, "image {i} has only {bright} bright pixels");
            assert!(dark > 400, "image {i} has only {dark} dark pixels");
        }
    }

    #[test]
    fn same_class_images_differ_by_noise_and_jitter() {
        let (imgs, labels) = generate_digit_corpus(30, &mut RngStream::new(4, 2));
        assert_eq!(labels[0], labels[10]);
        assert_ne!(imgs.image(0), imgs.image(10));
    }

    #[test]
    fn different_seeds_give_different_corpora() {
        let (a, _) = generate_digit_corpus(5, &mut RngStream::new(1, 2));
        let (b, _) = generate_digit_corpus(5, &mut RngStream::new(2, 2));
        assert_ne!(a, b);
    }

    #[test]
    fn stream_consumption_is_fixed_per_image() {
        let mut stream = RngStream::new(8, 2);
        let before = stream.counter();
        generate_digit_corpus(3, &mut stream);
        // Per image: 1 intensity + 2 shifts + 2 ticks per pixel Gaussian.
        let per_image = 3 + 2 * (DIGIT_SIDE as u64 * DIGIT_SIDE as u64);
        assert_eq!(stream.counter() - before, 3 * per_image);
    }
}
