use image::RgbImage;
use serde::{Deserialize, Serialize};

/// The 16 basic CSS colors, in their canonical listing order. Ties in
/// nearest-color lookup resolve to the earlier entry.
pub const PALETTE: [(&str, [u8; 3]); 16] = [
    ("black", [0, 0, 0]),
    ("silver", [192, 192, 192]),
    ("gray", [128, 128, 128]),
    ("white", [255, 255, 255]),
    ("maroon", [128, 0, 0]),
    ("red", [255, 0, 0]),
    ("purple", [128, 0, 128]),
    ("fuchsia", [255, 0, 255]),
    ("green", [0, 128, 0]),
    ("lime", [0, 255, 0]),
    ("olive", [128, 128, 0]),
    ("yellow", [255, 255, 0]),
    ("navy", [0, 0, 128]),
    ("blue", [0, 0, 255]),
    ("teal", [0, 128, 128]),
    ("aqua", [0, 255, 255]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorDescriptor {
    pub avg_rgb: [u8; 3],
    pub named_color: String,
}

pub(crate) fn distance_sq(a: [u8; 3], b: [u8; 3]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| {
            let d = i32::from(x) - i32::from(y);
            (d * d) as u32
        })
        .sum()
}

pub fn nearest_named_color(rgb: [u8; 3]) -> &'static str {
    let mut best = PALETTE[0];
    for entry in &PALETTE[1..] {
        if distance_sq(rgb, entry.1) < distance_sq(rgb, best.1) {
            best = *entry;
        }
    }
    best.0
}

/// Per-channel mean over all pixels, rounded half-up.
pub fn average_rgb(img: &RgbImage) -> [u8; 3] {
    let n = u64::from(img.width()) * u64::from(img.height());
    let mut sums = [0u64; 3];
    for px in img.pixels() {
        for (s, &c) in sums.iter_mut().zip(&px.0) {
            *s += u64::from(c);
        }
    }
    // floor(sum / n + 1/2) in integer arithmetic
    sums.map(|s| ((2 * s + n) / (2 * n)) as u8)
}

pub fn extract_color(img: &RgbImage) -> ColorDescriptor {
    let avg_rgb = average_rgb(img);
    ColorDescriptor {
        avg_rgb,
        named_color: nearest_named_color(avg_rgb).to_string(),
    }
}

/// Similarity in [0, 1]: one minus distance over the RGB-cube diagonal.
pub fn color_similarity(a: [u8; 3], b: [u8; 3]) -> f64 {
    // sqrt(d^2 / (3 * 255^2)) is exact at the cube corners.
    let ratio = f64::from(distance_sq(a, b)) / (3.0 * 255.0 * 255.0);
    (1.0 - ratio.sqrt()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn uniform(w: u32, h: u32, c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(c))
    }

    #[test]
    fn uniform_images() {
        let red = extract_color(&uniform(8, 8, [255, 0, 0]));
        assert_eq!(red.avg_rgb, [255, 0, 0]);
        assert_eq!(red.named_color, "red");
        assert_eq!(extract_color(&uniform(3, 5, [0, 0, 255])).named_color, "blue");
    }

    #[test]
    fn half_black_half_white_rounds_up_to_gray() {
        let mut img = uniform(10, 4, [0, 0, 0]);
        for y in 0..4 {
            for x in 5..10 {
                img.put_pixel(x, y, Rgb([255, 255, 255]));
            }
        }
        // mean = 127.5 on every channel; half-up gives 128.
        let c = extract_color(&img);
        assert_eq!(c.avg_rgb, [128, 128, 128]);
        assert_eq!(c.named_color, "gray");
    }

    #[test]
    fn palette_ties_resolve_to_earlier_entry() {
        // (64,64,64) is equidistant from black and gray; black comes first.
        assert_eq!(nearest_named_color([64, 64, 64]), "black");
    }

    #[test]
    fn color_similarity_range() {
        assert_eq!(color_similarity([0, 0, 0], [255, 255, 255]), 0.0);
        assert_eq!(color_similarity([10, 20, 30], [10, 20, 30]), 1.0);
    }

    proptest! {
        #[test]
        fn average_matches_float_oracle(w in 1u32..12, h in 1u32..12, seed in any::<u64>()) {
            let mut state = seed;
            let mut img = RgbImage::new(w, h);
            for px in img.pixels_mut() {
                for c in px.0.iter_mut() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    *c = (state >> 56) as u8;
                }
            }
            let got = average_rgb(&img);
            let n = f64::from(w * h);
            for ch in 0..3 {
                let mean: f64 = img.pixels().map(|p| f64::from(p.0[ch])).sum::<f64>() / n;
                prop_assert!((f64::from(got[ch]) - mean).abs() <= 0.5 + 1e-9);
            }
        }
    }
}
